//! Acceptance suite: one line per criterion, nonzero exit if any fails.
//!
//! Runs without the libtest harness so the lines appear in order on stdout.

use std::path::Path;
use std::process::Command;
use std::sync::Arc;
use std::time::Instant;

use bergman_cli::identities::{
    basis_checks, geometry_checks, operator_checks, random_matrix, IdentityConfig, Status,
};
use bergman_core::basis::BasisTable;
use bergman_core::quadrature::gauss_jacobi;
use bergman_core::toeplitz::assembly_rule;
use bergman_core::{
    apply_to_kernel, assemble, berezin_field, build_rule, default_z_grid, multi_indices, norm_intersection,
    normalized_kernel, opnorm_2to1, opnorm_2to2, sufficiently_localized_functional, tail_decay_profile,
    Complex64, DVector, MultiIndex, Point, RulePolicy, ScalarFn, SpaceParams, Symbol,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

type Criterion = fn() -> Result<Outcome, Box<dyn std::error::Error>>;

fn main() {
    let criteria: [(&str, Criterion); 9] = [
        ("1 mobius and kernel identities", c1_geometry),
        ("2 quadrature mass and moments", c2_quadrature),
        ("3 basis gramian and kernel reconstruction", c3_basis),
        ("4 exact operator identities", c4_operators),
        ("5 compact diagonal example", c5_compact),
        ("6 non-compact tau*I example", c6_noncompact),
        ("7 intersection norm sandwich", c7_sandwich),
        ("8 localization threshold and scaling", c8_localized),
        ("9 thread-count determinism", c9_determinism),
    ];
    let mut failed = 0;
    for (name, f) in criteria {
        let t = Instant::now();
        let o = f().unwrap_or_else(|e| outcome(false, format!("error: {e}")));
        if !o.pass {
            failed += 1;
        }
        println!(
            "criterion {name}: {} ({:.1}s) {}",
            if o.pass { "PASS" } else { "FAIL" },
            t.elapsed().as_secs_f64(),
            o.detail
        );
    }
    println!("{} of 9 criteria passed", 9 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}

fn c1_geometry() -> Result<Outcome, Box<dyn std::error::Error>> {
    let checks = geometry_checks(200, 7, 0.0)?;
    let wanted = ["involution", "endpoints", "one minus norm identity", "gamma unimodular", "kernel multiplicativity"];
    let mut worst: f64 = 0.0;
    let mut seen = 0;
    for c in checks.iter().filter(|c| wanted.iter().any(|w| c.name.starts_with(w))) {
        seen += 1;
        worst = worst.max(c.error);
        if c.samples < 200 {
            return Ok(outcome(false, format!("{} ran on {} samples", c.name, c.samples)));
        }
    }
    Ok(outcome(
        seen == 10 && worst <= 1e-10,
        format!("{seen} identities over n=1,2, worst error {worst:.2e} (tol 1e-10)"),
    ))
}

fn monomial_pair(z: &[Complex64], a: &MultiIndex, b: &MultiIndex) -> Complex64 {
    let mut v = Complex64::new(1.0, 0.0);
    for i in 0..z.len() {
        v *= z[i].powu(a.exponents[i]) * z[i].conj().powu(b.exponents[i]);
    }
    v
}

fn factorial(k: u32) -> f64 {
    (1..=k).map(|i| i as f64).product()
}

/// ∫ z^a conj(z)^b dν_α from a 1-D Gauss–Jacobi rule for the radial part and
/// the closed form of the sphere average.
fn moment_oracle(n: usize, a: &MultiIndex, b: &MultiIndex, radial: &(Vec<f64>, Vec<f64>)) -> f64 {
    if a.exponents != b.exponents {
        return 0.0;
    }
    let k = a.exponents.iter().sum::<u32>();
    let m = |p: u32| -> f64 { radial.0.iter().zip(&radial.1).map(|(x, w)| w * x.powi(p as i32)).sum() };
    let sphere = a.exponents.iter().map(|&e| factorial(e)).product::<f64>() * factorial(n as u32 - 1)
        / factorial(k + n as u32 - 1);
    sphere * m(k + n as u32 - 1) / m(n as u32 - 1)
}

fn c2_quadrature() -> Result<Outcome, Box<dyn std::error::Error>> {
    let (mut mass_err, mut mom_err, mut beta_err): (f64, f64, f64) = (0.0, 0.0, 0.0);
    let mut count = 0usize;
    for n in [1usize, 2] {
        for alpha in [0.0, 1.0, 2.5] {
            let p = SpaceParams::new(n, alpha)?;
            let (r, a) = if n == 1 { (6, 23) } else { (4, 15) };
            let rule = build_rule(&p, r, a)?;
            mass_err = mass_err.max((rule.weights.iter().sum::<f64>() - 1.0).abs());
            let radial = gauss_jacobi(40, alpha, 0.0);
            for k in 0..=rule.declared_exactness as u32 {
                let exact = statrs::function::beta::beta(k as f64 + n as f64, alpha + 1.0);
                let gj: f64 = radial.0.iter().zip(&radial.1).map(|(x, w)| w * x.powi((k + n as u32 - 1) as i32)).sum();
                beta_err = beta_err.max((gj - exact).abs() / exact);
            }
            let e = rule.declared_exactness as u32;
            let idx = multi_indices(n, e);
            let pairs: Vec<(&MultiIndex, &MultiIndex)> = idx
                .iter()
                .flat_map(|a| idx.iter().map(move |b| (a, b)))
                .filter(|(a, b)| a.exponents.iter().sum::<u32>() + b.exponents.iter().sum::<u32>() <= e)
                .collect();
            let mut sums = vec![Complex64::new(0.0, 0.0); pairs.len()];
            for (node, w) in rule.nodes.iter().zip(&rule.weights) {
                for (s, (a, b)) in sums.iter_mut().zip(&pairs) {
                    *s += monomial_pair(node.coords(), a, b) * *w;
                }
            }
            for (s, (a, b)) in sums.iter().zip(&pairs) {
                mom_err = mom_err.max((s - moment_oracle(n, a, b, &radial)).norm());
            }
            count += pairs.len();
        }
    }
    Ok(outcome(
        mass_err <= 1e-12 && mom_err <= 1e-11 && beta_err <= 1e-12,
        format!(
            "mass error {mass_err:.2e} (tol 1e-12), {count} moments worst {mom_err:.2e} (tol 1e-11), radial oracle vs beta {beta_err:.2e}"
        ),
    ))
}

fn c3_basis() -> Result<Outcome, Box<dyn std::error::Error>> {
    let mut gram: f64 = 0.0;
    for (n, dmax, d) in [(1usize, 12u32, 3usize), (2, 6, 2)] {
        let mut cfg = IdentityConfig::new(SpaceParams::new(n, 0.0)?);
        cfg.max_degree = dmax;
        cfg.channels = d;
        let c = basis_checks(&cfg)?;
        let g = c.iter().find(|c| c.name == "gramian").ok_or("no gramian check")?;
        gram = gram.max(g.error);
    }
    let p = SpaceParams::new(1, 0.0)?;
    let table = BasisTable::build(&p, 40, 2)?;
    let e = DVector::from_vec(vec![Complex64::new(0.6, 0.0), Complex64::new(0.0, 0.8)]);
    let (mut norm_err, mut point_err): (f64, f64) = (0.0, 0.0);
    for r in [0.0, 0.3, 0.5, 0.7, 0.8] {
        for t in [0.0, 1.1, 2.9] {
            let z = Point::new([Complex64::from_polar(r, t)])?;
            let coef = table.kernel_coefficients(&z, &e)?;
            norm_err = norm_err.max((coef.norm() - 1.0).abs());
            for w in [Point::real(&[0.5])?, Point::new([Complex64::from_polar(0.8, -0.7)])?] {
                let v = table.eval_function(&coef, w.coords());
                let k = normalized_kernel(&p, &w, &z)?;
                point_err = point_err.max((&v - &e * k).norm());
            }
        }
    }
    Ok(outcome(
        gram <= 1e-8 && norm_err <= 1e-6 && point_err <= 1e-6,
        format!("gramian {gram:.2e} (tol 1e-8), |k_z e| error {norm_err:.2e}, pointwise {point_err:.2e} (tol 1e-6)"),
    ))
}

fn c4_operators() -> Result<Outcome, Box<dyn std::error::Error>> {
    let cfg = IdentityConfig::new(SpaceParams::new(1, 0.0)?);
    let checks = operator_checks(&cfg)?;
    let bad: Vec<String> = checks
        .iter()
        .filter(|c| c.status != Status::Pass)
        .map(|c| format!("{} err {:.2e} tol {:.0e}", c.name, c.error, c.tolerance))
        .collect();
    let summary: Vec<String> = checks.iter().map(|c| format!("{} {:.1e}", c.name, c.error)).collect();
    Ok(outcome(
        bad.is_empty() && checks.len() >= 10,
        if bad.is_empty() { summary.join("; ") } else { bad.join("; ") },
    ))
}

fn sorted_desc(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(|a, b| b.total_cmp(a));
    v
}

fn max_gap(a: &[f64], b: &[f64]) -> f64 {
    if a.len() != b.len() {
        return f64::INFINITY;
    }
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn c5_compact() -> Result<Outcome, Box<dyn std::error::Error>> {
    let p = SpaceParams::new(1, 0.0)?;
    let policy = RulePolicy::default();
    let d = 8;
    let b = Symbol::DiagonalGeometric { tau: ScalarFn::indicator(0.5), d };
    let table = Arc::new(BasisTable::build(&p, 20, d)?);
    let op = assemble(&b, &table, &*assembly_rule(&b, &table, &policy)?)?;
    let mut oracle = Vec::new();
    for j in 1..=d {
        for m in 0..=20 {
            oracle.push(0.5f64.powi(j as i32) * 0.5f64.powi(2 * (m + 1)));
        }
    }
    let sv_err = max_gap(&sorted_desc(op.singular_values()), &sorted_desc(oracle));

    let grid = default_z_grid(1);
    let tau_sup = berezin_field(&Symbol::Scalar { tau: ScalarFn::indicator(0.5) }, &grid, &p, &policy)?.sup_norm();
    let d_values: Vec<usize> = (0..d).collect();
    let profile = tail_decay_profile(&b, &p, &grid, &d_values, &policy)?;
    let mut bound_excess = f64::NEG_INFINITY;
    let mut halving = true;
    for (d0, &v) in profile.iter().enumerate() {
        bound_excess = bound_excess.max(v - (tau_sup * 0.5f64.powi(d0 as i32) / 3f64.sqrt() + 1e-10));
        if d0 > 0 && v > 0.5 * profile[d0 - 1] + 1e-15 {
            halving = false;
        }
    }

    let mut factor = f64::INFINITY;
    let es = [
        DVector::from_fn(d, |i, _| Complex64::new(if i == 0 { 1.0 } else { 0.0 }, 0.0)),
        DVector::from_element(d, Complex64::new(1.0 / (d as f64).sqrt(), 0.0)),
    ];
    for e in &es {
        let inner = apply_to_kernel(&op, &Point::real(&[0.2])?, e)?.norm;
        let outer = apply_to_kernel(&op, &Point::real(&[0.95])?, e)?.norm;
        factor = factor.min(inner / outer);
    }
    Ok(outcome(
        sv_err <= 1e-8 && bound_excess <= 0.0 && halving && factor >= 5.0,
        format!(
            "singular values {sv_err:.2e} (tol 1e-8), tail bound margin {:.2e}, halving {halving}, boundary decay factor {factor:.2} (need 5)",
            -bound_excess
        ),
    ))
}

fn c6_noncompact() -> Result<Outcome, Box<dyn std::error::Error>> {
    let p = SpaceParams::new(1, 0.0)?;
    let policy = RulePolicy::default();
    let tau = ScalarFn::indicator(0.5);
    let grid = default_z_grid(1);
    let scalar = {
        let b = Symbol::Scalar { tau: tau.clone() };
        let table = Arc::new(BasisTable::build(&p, 20, 1)?);
        sorted_desc(assemble(&b, &table, &*assembly_rule(&b, &table, &policy)?)?.singular_values())
    };
    let (mut mult_err, mut flat): (f64, f64) = (0.0, 0.0);
    let mut dth = Vec::new();
    for d in [1usize, 2, 4, 8] {
        let b = Symbol::ScalarTimesIdentity { tau: tau.clone(), d };
        let table = Arc::new(BasisTable::build(&p, 20, d)?);
        let sv = sorted_desc(assemble(&b, &table, &*assembly_rule(&b, &table, &policy)?)?.singular_values());
        let copies = sorted_desc(scalar.iter().flat_map(|&s| std::iter::repeat(s).take(d)).collect());
        mult_err = mult_err.max(max_gap(&sv, &copies));
        dth.push(sv[d - 1]);
        let d_values: Vec<usize> = (0..d).collect();
        let prof = tail_decay_profile(&b, &p, &grid, &d_values, &policy)?;
        let hi = prof.iter().cloned().fold(f64::MIN, f64::max);
        let lo = prof.iter().cloned().fold(f64::MAX, f64::min);
        flat = flat.max(hi - lo);
    }
    let spread = dth.iter().cloned().fold(f64::MIN, f64::max) - dth.iter().cloned().fold(f64::MAX, f64::min);
    Ok(outcome(
        mult_err <= 1e-10 && spread <= 1e-8 && flat < 1e-10,
        format!("multiplicity {mult_err:.2e} (tol 1e-10), d-th value spread {spread:.2e} (tol 1e-8), tail variation {flat:.2e} (< 1e-10)"),
    ))
}

fn c7_sandwich() -> Result<Outcome, Box<dyn std::error::Error>> {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let (mut violation, mut inexact): (f64, usize) = (f64::NEG_INFINITY, 0);
    for _ in 0..100 {
        let m = random_matrix(&mut rng, 3);
        let n22 = opnorm_2to2(&m);
        let n21 = opnorm_2to1(&m);
        let ni = norm_intersection(&m);
        if !n21.exact || !ni.exact {
            inexact += 1;
        }
        let lo = n22.max(n21.value);
        violation = violation.max(lo - ni.value).max(ni.value - (2.0 * lo + 1e-6));
    }
    Ok(outcome(
        violation <= 0.0,
        format!("100 matrices, largest violation {violation:.2e}, {inexact} searches uncertified"),
    ))
}

fn c8_localized() -> Result<Outcome, Box<dyn std::error::Error>> {
    let policy = RulePolicy::default();
    let mut enforced = true;
    for (n, alpha) in [(1usize, 0.0), (1, 1.0), (2, 0.0), (2, 2.5)] {
        let p = SpaceParams::new(n, alpha)?;
        let th = (n as f64 + 2.0 + 2.0 * alpha) / (1.0 + alpha);
        let table = BasisTable::build(&p, 4, 1)?;
        let b = Symbol::Scalar { tau: ScalarFn::indicator(0.5) };
        let grid = [Point::origin(n)];
        for bad in [th, th - 0.5, f64::NAN] {
            if sufficiently_localized_functional(&b, bad, &grid, &[1], &table, &policy).is_ok() {
                enforced = false;
            }
        }
        if sufficiently_localized_functional(&b, th + 0.25, &grid, &[1], &table, &policy).is_err() {
            enforced = false;
        }
    }

    let p = SpaceParams::new(1, 0.0)?;
    let d = 8;
    let tau = ScalarFn::indicator(0.5);
    let table = BasisTable::build(&p, 12, d)?;
    let grid = default_z_grid(1);
    let pp = 3.5;
    let scalar =
        sufficiently_localized_functional(&Symbol::Scalar { tau: tau.clone() }, pp, &grid, &[1], &table.with_channels(1), &policy)?;
    let channels: Vec<usize> = (1..=d).collect();
    let diag = sufficiently_localized_functional(&Symbol::DiagonalGeometric { tau, d }, pp, &grid, &channels, &table, &policy)?;
    let err = diag
        .per_channel
        .iter()
        .enumerate()
        .map(|(i, v)| (v - 0.5f64.powi(i as i32 + 1) * scalar.value).abs())
        .fold(0.0, f64::max);
    Ok(outcome(
        enforced && diag.per_channel.len() == d && err <= 1e-6,
        format!("threshold enforced {enforced}, 2^-j scaling error {err:.2e} over j <= {d} (tol 1e-6)"),
    ))
}

fn run_bin(args: &[&str], dir: &Path) -> Result<i32, Box<dyn std::error::Error>> {
    let out = Command::new(env!("CARGO_BIN_EXE_bergman"))
        .args(args)
        .arg("--out")
        .arg(dir)
        .output()?;
    Ok(out.status.code().unwrap_or(-1))
}

fn read_tree(dir: &Path) -> Result<Vec<(String, Vec<u8>)>, Box<dyn std::error::Error>> {
    let mut files = Vec::new();
    for entry in std::fs::read_dir(dir)? {
        let entry = entry?;
        files.push((entry.file_name().to_string_lossy().into_owned(), std::fs::read(entry.path())?));
    }
    files.sort();
    Ok(files)
}

fn c9_determinism() -> Result<Outcome, Box<dyn std::error::Error>> {
    let tmp = tempfile::tempdir()?;
    let manifest = tmp.path().join("m.json");
    std::fs::write(
        &manifest,
        r#"{"max_degree": 12, "channel_sweep": [1, 3], "grid": {"radii": [0.0, 0.5, 0.9], "angles": 4}}"#,
    )?;
    let m = manifest.to_string_lossy().into_owned();
    let mut compared = 0;
    for cmd in ["identity-suite", "e2-taui", "bmo", "berezin", "assemble", "svd"] {
        let mut trees = Vec::new();
        for threads in ["1", "3"] {
            let dir = tmp.path().join(format!("{cmd}-{threads}"));
            let code = run_bin(&[cmd, "--manifest", &m, "--threads", threads], &dir)?;
            if code != 0 {
                return Ok(outcome(false, format!("{cmd} --threads {threads} exited {code}")));
            }
            trees.push(read_tree(&dir)?);
        }
        if trees[0] != trees[1] || trees[0].is_empty() {
            return Ok(outcome(false, format!("{cmd} outputs differ between 1 and 3 threads")));
        }
        compared += trees[0].len();
    }
    Ok(outcome(true, format!("{compared} files byte-identical at 1 and 3 threads across 6 commands")))
}
