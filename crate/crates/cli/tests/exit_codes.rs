use std::path::Path;
use std::process::{Command, Output};

fn bergman(args: &[&str], cache: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bergman"))
        .args(args)
        .env("BERGMAN_CACHE_DIR", cache)
        .output()
        .unwrap()
}

#[test]
fn usage_errors_exit_4() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(bergman(&["no-such-command"], tmp.path()).status.code(), Some(4));
    let m = tmp.path().join("m.json");
    std::fs::write(&m, r#"{"grid": {"radii": [0.1], "angels": 3}}"#).unwrap();
    let out = bergman(&["berezin", "--manifest", m.to_str().unwrap()], tmp.path());
    assert_eq!(out.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&out.stderr).contains("grid.angels"));
    std::fs::write(&m, r#"{"radius": 1.5}"#).unwrap();
    assert_eq!(bergman(&["svd", "--manifest", m.to_str().unwrap()], tmp.path()).status.code(), Some(4));
    let out_dir = tmp.path().join("o");
    let o = out_dir.to_str().unwrap();
    assert_eq!(bergman(&["bmo", "--n", "3", "--out", o], tmp.path()).status.code(), Some(4));
    // p at the threshold (n+2+2α)/(1+α) = 3
    assert_eq!(bergman(&["e3-localized", "--p", "3", "--out", o], tmp.path()).status.code(), Some(4));
}

#[test]
fn coarse_rule_is_inconclusive() {
    let tmp = tempfile::tempdir().unwrap();
    let m = tmp.path().join("m.json");
    std::fs::write(&m, r#"{"max_degree": 8, "rule": {"radial_points": 3, "angular_points": 5}}"#).unwrap();
    let out = tmp.path().join("o");
    let code = bergman(
        &["identity-suite", "--manifest", m.to_str().unwrap(), "--out", out.to_str().unwrap()],
        tmp.path(),
    )
    .status
    .code();
    assert_eq!(code, Some(3));
    assert!(out.join("identities.json").exists());
}

#[test]
fn cache_lifecycle() {
    let tmp = tempfile::tempdir().unwrap();
    let c = tmp.path();
    assert_eq!(bergman(&["cache", "build", "--alpha", "0", "--max-degree", "6"], c).status.code(), Some(0));
    let listed = String::from_utf8_lossy(&bergman(&["cache", "list"], c).stdout).into_owned();
    assert!(listed.contains(".bgq") && listed.contains(".bgn"), "{listed}");
    assert_eq!(bergman(&["cache", "verify"], c).status.code(), Some(0));

    let file = std::fs::read_dir(c)
        .unwrap()
        .map(|e| e.unwrap().path())
        .find(|p| p.extension().is_some_and(|x| x == "bgq"))
        .unwrap();
    let mut bytes = std::fs::read(&file).unwrap();
    bytes[12] ^= 1;
    std::fs::write(&file, bytes).unwrap();
    assert_eq!(bergman(&["cache", "verify"], c).status.code(), Some(2));

    assert_eq!(bergman(&["cache", "purge"], c).status.code(), Some(0));
    let listed = String::from_utf8_lossy(&bergman(&["cache", "list"], c).stdout).into_owned();
    assert!(listed.contains("no cache files"));
}
