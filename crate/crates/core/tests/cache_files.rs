use std::sync::Arc;

use bergman_core::basis::{enumerate_basis, rule_for_degree, BasisTable};
use bergman_core::cache;
use bergman_core::{assemble_auto, ScalarFn, SpaceParams, Symbol};

#[test]
fn rule_and_norm_files_round_trip_and_detect_corruption() {
    let dir = tempfile::tempdir().unwrap();
    let p = SpaceParams::new(2, 1.5).unwrap();
    let rule = rule_for_degree(&p, 6).unwrap();
    let table = enumerate_basis(&p, 6, 1, &rule).unwrap();
    let rpath = cache::write_rule(dir.path(), &rule).unwrap();
    let tpath = cache::write_norm_table(dir.path(), &table).unwrap();

    let back = cache::decode_rule(&std::fs::read(&rpath).unwrap()).unwrap();
    assert_eq!(back.weights, rule.weights);
    assert_eq!(back.nodes, rule.nodes);
    let norms = cache::decode_norm_table(&std::fs::read(&tpath).unwrap()).unwrap();
    assert_eq!(norms.norms, table.norms);

    assert_eq!(cache::list(dir.path()).unwrap().len(), 2);
    assert!(cache::verify(&rpath).is_ok());
    let mut bytes = std::fs::read(&tpath).unwrap();
    let mid = bytes.len() / 2;
    bytes[mid] ^= 0x40;
    std::fs::write(&tpath, &bytes).unwrap();
    assert!(cache::verify(&tpath).is_err());
    assert!(cache::decode_norm_table(&bytes).is_err());

    assert_eq!(cache::purge(dir.path()).unwrap(), 2);
    assert!(cache::list(dir.path()).unwrap().is_empty());
}

#[test]
fn operator_file_keeps_matrix_and_sidecar() {
    let dir = tempfile::tempdir().unwrap();
    let p = SpaceParams::new(1, 0.0).unwrap();
    let table = Arc::new(BasisTable::build(&p, 8, 2).unwrap());
    let b = Symbol::DiagonalGeometric { tau: ScalarFn::indicator(0.5), d: 2 };
    let op = assemble_auto(&b, &table).unwrap();
    let path = dir.path().join("op.bgo");
    cache::write_operator(&path, &op, &[("assembly".into(), 1e-12)]).unwrap();
    let (m, side) = cache::read_operator(&path).unwrap();
    assert_eq!(m, op.matrix);
    assert_eq!(side.format_version, cache::FORMAT_VERSION);
    assert_eq!(side.tolerances, vec![("assembly".to_string(), 1e-12)]);
    assert!(path.with_extension("json").exists());
}
