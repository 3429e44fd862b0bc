//! The exact-identity battery: relations that hold as equalities on finite
//! sections (up to quadrature and truncation error), each with its tolerance.

use std::fmt::Write as _;
use std::sync::Arc;

use bergman_core::basis::BasisTable;
use bergman_core::berezin::{berezin_operator, berezin_symbol_auto};
use bergman_core::geometry::{kernel, normalized_kernel, unimodular_gamma};
use bergman_core::norms::{max_abs, norm_intersection, opnorm_2to1, opnorm_2to2};
use bergman_core::quadrature::{build_rule, cached_rule, integrate_real, RulePolicy};
use bergman_core::toeplitz::{apply_to_kernel, assembly_rule, conjugate, truncation_matrices};
use bergman_core::{
    adjoint, adjoint_symbol, assemble, compose, corner_truncate, mobius, tail_truncate, Complex64, DMatrix,
    DVector, Point, ScalarFn, SpaceParams, Symbol, TruncatedOperator,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Pass,
    Fail,
    /// The computation behind the check was precision-flagged.
    Inconclusive,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Check {
    pub group: String,
    pub name: String,
    pub tolerance: f64,
    /// Largest observed discrepancy.
    pub error: f64,
    pub samples: usize,
    pub status: Status,
    pub flags: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IdentityReport {
    pub checks: Vec<Check>,
}

impl IdentityReport {
    pub fn count(&self, status: Status) -> usize {
        self.checks.iter().filter(|c| c.status == status).count()
    }

    pub fn find(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let width = self.checks.iter().map(|c| c.name.len()).max().unwrap_or(0);
        for c in &self.checks {
            let status = match c.status {
                Status::Pass => "pass",
                Status::Fail => "FAIL",
                Status::Inconclusive => "inconclusive",
            };
            let _ = writeln!(
                out,
                "{:<10} {:<width$}  {:<12} err {:.3e}  tol {:.0e}  n={}",
                c.group, c.name, status, c.error, c.tolerance, c.samples
            );
            for f in &c.flags {
                let _ = writeln!(out, "{:<10} {:<width$}  flag: {f}", "", "");
            }
        }
        let _ = writeln!(
            out,
            "\n{} pass, {} fail, {} inconclusive",
            self.count(Status::Pass),
            self.count(Status::Fail),
            self.count(Status::Inconclusive)
        );
        out
    }
}

/// Fixed (radial, angular) counts that replace the automatic assembly rule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RuleOverride {
    pub radial_points: usize,
    pub angular_points: usize,
}

#[derive(Debug, Clone)]
pub struct IdentityConfig {
    pub params: SpaceParams,
    pub max_degree: u32,
    pub channels: usize,
    pub samples: usize,
    pub matrix_samples: usize,
    pub seed: u64,
    pub rule: Option<RuleOverride>,
    pub policy: RulePolicy,
}

impl IdentityConfig {
    pub fn new(params: SpaceParams) -> Self {
        IdentityConfig {
            params,
            max_degree: 16,
            channels: 3,
            samples: 200,
            matrix_samples: 100,
            seed: 0,
            rule: None,
            policy: RulePolicy::default(),
        }
    }
}

fn check(group: &str, name: &str, tolerance: f64, error: f64, samples: usize, flags: Vec<String>) -> Check {
    let status = if !flags.is_empty() {
        Status::Inconclusive
    } else if error <= tolerance {
        Status::Pass
    } else {
        Status::Fail
    };
    Check {
        group: group.into(),
        name: name.into(),
        tolerance,
        error: if error.is_nan() { f64::INFINITY } else { error },
        samples,
        status,
        flags,
    }
}

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Uniform-ish point in the ball of radius `r_max` (radius uniform, direction from a cube).
pub fn random_point(rng: &mut ChaCha8Rng, n: usize, r_max: f64) -> Point {
    loop {
        let v: Vec<Complex64> = (0..n)
            .map(|_| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        let norm = v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
        if norm > 1e-3 && norm <= 1.0 {
            let r = rng.gen_range(0.0..r_max);
            return Point::new(v.into_iter().map(|x| x * (r / norm))).expect("inside the ball");
        }
    }
}

pub fn random_matrix(rng: &mut ChaCha8Rng, d: usize) -> DMatrix<Complex64> {
    DMatrix::from_fn(d, d, |_, _| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
}

fn diff(a: &DMatrix<Complex64>, b: &DMatrix<Complex64>) -> f64 {
    if a.shape() != b.shape() {
        return f64::INFINITY;
    }
    max_abs(&(a - b))
}

/// Dense d×d test symbol supported in the ball of radius 1/2: entry (r, c) is
/// χ·coeff·z₁ᵃ·conj(z₁)ᵇ (with a z₂ factor in some entries when n = 2).
pub fn battery_symbol(n: usize, d: usize) -> Symbol {
    let entries = (0..d)
        .map(|r| {
            (0..d)
                .map(|col| {
                    let a = ((r + 2 * col) % 3) as u32;
                    let b = ((2 * r + col) % 3) as u32;
                    let phase = 0.7 * (r as f64) - 1.3 * (col as f64);
                    let coeff = Complex64::from_polar(1.0 / (1.0 + (r + col) as f64), phase);
                    let mut holo = vec![0u32; n];
                    let mut anti = vec![0u32; n];
                    holo[0] = a;
                    anti[0] = b;
                    if n == 2 && (r + col) % 2 == 1 {
                        anti[1] = 1;
                    }
                    ScalarFn::indicator(0.5).times(ScalarFn::monomial(coeff, &holo, &anti))
                })
                .collect()
        })
        .collect();
    Symbol::DenseMatrix { entries }
}

struct Ctx<'a> {
    cfg: &'a IdentityConfig,
    table: Arc<BasisTable>,
}

impl Ctx<'_> {
    fn assemble(&self, b: &Symbol, table: &Arc<BasisTable>) -> bergman_core::Result<TruncatedOperator> {
        let rule = match self.cfg.rule {
            Some(o) => {
                let mut breaks = Vec::new();
                match b.mobius_split() {
                    Some((base, _)) => breaks.extend(base.radial_breaks()),
                    None => breaks.extend(b.radial_breaks()),
                }
                cached_rule(&table.params, o.radial_points, o.angular_points, &breaks)?
            }
            None => assembly_rule(b, table, &self.cfg.policy)?,
        };
        assemble(b, table, &rule)
    }
}

fn channel_submatrix(op: &TruncatedOperator, d0: usize) -> DMatrix<Complex64> {
    let t = &op.table;
    let m = t.scalar_len();
    DMatrix::from_fn(m * d0, m * d0, |r, col| {
        let (ir, cr) = (r / d0, r % d0);
        let (ic, cc) = (col / d0, col % d0);
        op.matrix[(t.position(ir, cr), t.position(ic, cc))]
    })
}

/// Geometry identities on random samples for n ∈ {1, 2}.
pub fn geometry_checks(samples: usize, seed: u64, alpha: f64) -> bergman_core::Result<Vec<Check>> {
    let mut out = Vec::new();
    for n in [1usize, 2] {
        let params = SpaceParams::new(n, alpha)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ ((n as u64) << 32));
        let (mut inv, mut ends, mut ident, mut gam, mut mult) = (0.0f64, 0.0f64, 0.0f64, 0.0f64, 0.0f64);
        for _ in 0..samples {
            let a = random_point(&mut rng, n, 0.95);
            let z = random_point(&mut rng, n, 0.95);
            let w = random_point(&mut rng, n, 0.95);
            let pz = mobius(&params, &a, &z)?;
            inv = inv.max(mobius(&params, &a, &pz)?.distance(&z));
            ends = ends.max(mobius(&params, &a, &Point::origin(n))?.distance(&a));
            ends = ends.max(mobius(&params, &a, &a)?.norm());
            let q = (c(1.0, 0.0) - z.inner(&a)).norm_sqr();
            ident = ident.max(((1.0 - pz.norm_sqr()) - (1.0 - a.norm_sqr()) * (1.0 - z.norm_sqr()) / q).abs());
            gam = gam.max((unimodular_gamma(&z, &a)?.norm() - 1.0).abs());
            // |k_w(φ_a ζ)|·|k_a(ζ)| = |k_{φ_a w}(ζ)|, with ζ = z.
            let lhs = normalized_kernel(&params, &pz, &w)?.norm() * normalized_kernel(&params, &z, &a)?.norm();
            let rhs = normalized_kernel(&params, &z, &mobius(&params, &a, &w)?)?.norm();
            mult = mult.max((lhs - rhs).abs() / rhs.max(1.0));
        }
        let g = format!("geometry n={n}");
        out.push(check(&g, &format!("involution n={n}"), 1e-10, inv, samples, vec![]));
        out.push(check(&g, &format!("endpoints n={n}"), 1e-14, ends, samples, vec![]));
        out.push(check(&g, &format!("one minus norm identity n={n}"), 1e-10, ident, samples, vec![]));
        out.push(check(&g, &format!("gamma unimodular n={n}"), 1e-14, gam, samples, vec![]));
        out.push(check(&g, &format!("kernel multiplicativity n={n}"), 1e-10, mult, samples, vec![]));
        // Hermitian symmetry of K as a sanity anchor for the branch choice.
        let z = random_point(&mut rng, n, 0.9);
        let w = random_point(&mut rng, n, 0.9);
        let herm = (kernel(&params, &z, &w)? - kernel(&params, &w, &z)?.conj()).norm();
        out.push(check(&g, &format!("kernel hermitian n={n}"), 1e-12, herm, 1, vec![]));
    }
    Ok(out)
}

/// ∫ 1 dν_α = 1 and the Gramian of the table.
pub fn basis_checks(cfg: &IdentityConfig) -> bergman_core::Result<Vec<Check>> {
    let p = &cfg.params;
    let rule = build_rule(p, cfg.max_degree as usize + 2, 2 * cfg.max_degree as usize + 2)?;
    let mass = (integrate_real(&rule, |_| 1.0) - 1.0).abs();
    let table = BasisTable::build(p, cfg.max_degree, cfg.channels)?;
    let mut mono = Vec::new();
    let len = table.scalar_len();
    let mut gram = DMatrix::<Complex64>::zeros(len, len);
    for (node, w) in rule.nodes.iter().zip(&rule.weights) {
        table.eval_monomials(node.coords(), &mut mono);
        for i in 0..len {
            for j in 0..len {
                gram[(i, j)] += mono[i] * mono[j].conj() * *w;
            }
        }
    }
    let gram_err = diff(&gram, &DMatrix::identity(len, len));
    Ok(vec![
        check("quadrature", "total mass", 1e-12, mass, 1, vec![]),
        check("basis", "gramian", 1e-8, gram_err, len * len, vec![]),
    ])
}

fn flags_of(ops: &[&TruncatedOperator]) -> Vec<String> {
    let mut f: Vec<String> = ops.iter().flat_map(|o| o.flags.iter().cloned()).collect();
    f.sort();
    f.dedup();
    f
}

/// Operator identities on the configured section.
pub fn operator_checks(cfg: &IdentityConfig) -> bergman_core::Result<Vec<Check>> {
    let n = cfg.params.n;
    let d = cfg.channels;
    let table = Arc::new(BasisTable::build(&cfg.params, cfg.max_degree, d)?);
    let ctx = Ctx { cfg, table: table.clone() };
    let b = battery_symbol(n, d);
    let tb = ctx.assemble(&b, &table)?;
    let mut out = Vec::new();
    let g = "operators";

    // T_b·M_{I_(d0)} = T_{b_(d0)}
    let mut err: f64 = 0.0;
    let mut flags = flags_of(&[&tb]);
    for d0 in 0..=d {
        let (_, tail) = truncation_matrices(&table, d0)?;
        let lhs = compose(&tb, &tail)?;
        let rhs = ctx.assemble(&tail_truncate(&b, d0)?, &table)?;
        flags.extend(rhs.flags.iter().cloned());
        err = err.max(diff(&lhs.matrix, &rhs.matrix));
    }
    flags.dedup();
    out.push(check(g, "tail identity", 1e-10, err, d + 1, flags));

    // M^(d0)·T_b·M^(d0) restricted to the first d0 channels = T_{corner}
    let (mut err, mut nerr) = (0.0f64, 0.0f64);
    let mut flags = flags_of(&[&tb]);
    for d0 in 1..=d {
        let (head, _) = truncation_matrices(&table, d0)?;
        let lhs = compose(&compose(&head, &tb)?, &head)?;
        let small = Arc::new(table.with_channels(d0));
        let rhs = ctx.assemble(&corner_truncate(&b, d0)?, &small)?;
        flags.extend(rhs.flags.iter().cloned());
        err = err.max(diff(&channel_submatrix(&lhs, d0), &rhs.matrix));
        nerr = nerr.max((lhs.opnorm() - rhs.opnorm()).abs());
    }
    flags.dedup();
    out.push(check(g, "corner identity", 1e-10, err, d, flags.clone()));
    out.push(check(g, "corner norm equality", 1e-10, nerr, d, flags));

    // (T_b)* = T_{b*}
    let rhs = ctx.assemble(&adjoint_symbol(&b), &table)?;
    out.push(check(g, "adjoint identity", 1e-9, diff(&adjoint(&tb).matrix, &rhs.matrix), 1, flags_of(&[&tb, &rhs])));

    // Berezin of the operator equals Berezin of the symbol for |z| ≤ 0.7.
    let mut err: f64 = 0.0;
    let mut flags = flags_of(&[&tb]);
    let zs = sample_points(n, &[0.0, 0.3, 0.5, 0.7], 3);
    for z in &zs {
        let lhs = berezin_operator(&tb, z)?;
        let rhs = berezin_symbol_auto(&b, z, &cfg.params, &cfg.policy)?;
        if !rhs.policy_ok {
            flags.push(format!("berezin rule below policy at |z|={:.2}", z.norm()));
        }
        err = err.max(diff(&lhs, &rhs.value));
    }
    out.push(check(g, "berezin of operator equals berezin of symbol", 5e-6, err, zs.len(), flags));

    // (T_b)^z = T_{b∘φ_z} on the valid block, and ‖(T_b)^z e‖ = ‖T_b(k_z e)‖.
    let (mut err, mut nerr) = (0.0f64, 0.0f64);
    let mut flags = flags_of(&[&tb]);
    let zs = sample_points(n, &[0.2, 0.25], 2);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(17));
    for z in &zs {
        let sz = conjugate(&tb, z)?;
        let rhs = ctx.assemble(&b.compose_mobius(z), &table)?;
        flags.extend(rhs.flags.iter().cloned());
        let v = sz.valid_degree;
        err = err.max(diff(&sz.leading_block(v), &rhs.leading_block(v)));
        let e = DVector::from_fn(d, |_, _| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
        let e = &e / c(e.norm(), 0.0);
        let mut f = DVector::zeros(table.len());
        for ch in 0..d {
            f[table.position(0, ch)] = e[ch];
        }
        let lhs = (&sz.matrix * f).norm();
        let kimg = apply_to_kernel(&tb, z, &e)?;
        nerr = nerr.max((lhs - kimg.norm).abs());
    }
    flags.sort();
    flags.dedup();
    out.push(check(g, "conjugation identity", 5e-5, err, zs.len(), flags.clone()));
    out.push(check(g, "conjugated kernel norm equality", 5e-5, nerr, zs.len(), flags));

    out.extend(lift_checks(&ctx)?);
    Ok(out)
}

fn sample_points(n: usize, radii: &[f64], angles: usize) -> Vec<Point> {
    let mut out = Vec::new();
    for &r in radii {
        if r == 0.0 {
            out.push(Point::origin(n));
            continue;
        }
        for k in 0..angles {
            let t = 0.4 + 2.0 * std::f64::consts::PI * k as f64 / angles as f64;
            let dir: Vec<Complex64> = if n == 1 {
                vec![Complex64::from_polar(1.0, t)]
            } else {
                vec![Complex64::from_polar(0.8, t), Complex64::from_polar(0.6, -0.5 * t)]
            };
            out.push(Point::on_ray(&dir, r).expect("radius below 1"));
        }
    }
    out
}

/// Lifts of scalar symbols into channel blocks, their composition, and the
/// decomposition of a dense symbol into single-entry lifts.
fn lift_checks(ctx: &Ctx) -> bergman_core::Result<Vec<Check>> {
    let cfg = ctx.cfg;
    let n = cfg.params.n;
    let d = cfg.channels;
    let g = "lifts";
    let scalar_table = Arc::new(ctx.table.with_channels(1));
    let mut x1 = vec![0u32; n];
    x1[0] = 1;
    let zero = vec![0u32; n];
    let beta = ScalarFn::indicator(0.5).times(ScalarFn::monomial(c(0.5, -1.0), &zero, &x1));
    let a1 = ScalarFn::indicator(0.5).times(ScalarFn::monomial(c(1.0, 0.5), &x1, &zero));
    let a2 = ScalarFn::Sum {
        terms: vec![
            ScalarFn::indicator(0.5),
            ScalarFn::indicator(0.5).times(ScalarFn::monomial(c(0.0, 2.0), &x1, &x1)),
        ],
    };
    let tbeta = ctx.assemble(&Symbol::Scalar { tau: beta.clone() }, &scalar_table)?;
    let ta1 = ctx.assemble(&Symbol::Scalar { tau: a1.clone() }, &scalar_table)?;
    let ta2 = ctx.assemble(&Symbol::Scalar { tau: a2.clone() }, &scalar_table)?;
    let scalar_product = compose(&ta1, &ta2)?;
    let zero_block = DMatrix::<Complex64>::zeros(scalar_table.len(), scalar_table.len());
    let mut flags = flags_of(&[&tbeta, &ta1, &ta2]);

    let (mut err_b, mut err_a) = (0.0f64, 0.0f64);
    for k in 1..=d {
        for j in 1..=d {
            let lb = ctx.assemble(&Symbol::LiftBkj { beta: beta.clone(), k, j, d }, &ctx.table)?;
            let la1 = ctx.assemble(&Symbol::LiftA1j { a1: a1.clone(), j, d }, &ctx.table)?;
            let la2 = ctx.assemble(&Symbol::LiftA2kj { a2: a2.clone(), k, j, d }, &ctx.table)?;
            let prod = compose(&la1, &la2)?;
            flags.extend(flags_of(&[&lb, &la1, &la2]));
            for r in 0..d {
                for col in 0..d {
                    let want_b = if (r, col) == (k - 1, j - 1) { &tbeta.matrix } else { &zero_block };
                    err_b = err_b.max(diff(&lb.channel_block(r, col), want_b));
                    let want_a = if (r, col) == (j - 1, k - 1) { &scalar_product.matrix } else { &zero_block };
                    err_a = err_a.max(diff(&prod.channel_block(r, col), want_a));
                }
            }
        }
    }

    // T_β = Σ_{k,j} T_{B_{k,j}} with B_{k,j} carrying β's (row k, column j) entry.
    let dense = battery_symbol(n, d);
    let Symbol::DenseMatrix { entries } = &dense else { unreachable!() };
    let whole = ctx.assemble(&dense, &ctx.table)?;
    let mut sum = DMatrix::<Complex64>::zeros(ctx.table.len(), ctx.table.len());
    for k in 1..=d {
        for j in 1..=d {
            let piece = ctx.assemble(
                &Symbol::LiftBkj {
                    beta: entries[k - 1][j - 1].clone(),
                    k,
                    j,
                    d,
                },
                &ctx.table,
            )?;
            flags.extend(piece.flags.iter().cloned());
            sum += &piece.matrix;
        }
    }
    flags.extend(whole.flags.iter().cloned());
    flags.sort();
    flags.dedup();
    Ok(vec![
        check(g, "single-entry lift identity", 1e-8, err_b, d * d, flags.clone()),
        check(g, "lift composition identity", 1e-8, err_a, d * d, flags.clone()),
        check(g, "lift decomposition", 1e-8, diff(&sum, &whole.matrix), 1, flags),
    ])
}

/// Berezin-transform identities for the battery symbol.
pub fn berezin_checks(cfg: &IdentityConfig) -> bergman_core::Result<Vec<Check>> {
    let n = cfg.params.n;
    let d = cfg.channels;
    let p = &cfg.params;
    let b = battery_symbol(n, d);
    let pol = &cfg.policy;
    let g = "berezin";
    let mut flags = Vec::new();
    let mut note = |ok: bool, what: &str| {
        if !ok {
            flags.push(format!("{what}: rule below policy"));
        }
    };

    let (mut cov, mut dual, mut corner, mut count) = (0.0f64, 0.0f64, 0.0f64, 0);
    for z in sample_points(n, &[0.0, 0.3], 2) {
        for w in sample_points(n, &[0.0, 0.2, 0.5], 2) {
            let lhs = berezin_symbol_auto(&b.compose_mobius(&z), &w, p, pol)?;
            let rhs = berezin_symbol_auto(&b, &mobius(p, &z, &w)?, p, pol)?;
            note(lhs.policy_ok && rhs.policy_ok, "covariance");
            cov = cov.max(diff(&lhs.value, &rhs.value));
            count += 1;
        }
    }
    let zs = sample_points(n, &[0.0, 0.4, 0.7], 2);
    for z in &zs {
        let bt = berezin_symbol_auto(&b, z, p, pol)?;
        let adj = berezin_symbol_auto(&adjoint_symbol(&b), z, p, pol)?;
        note(bt.policy_ok && adj.policy_ok, "adjoint duality");
        dual = dual.max(diff(&adj.value, &bt.value.adjoint()));
        for d0 in 1..=d {
            let ct = berezin_symbol_auto(&corner_truncate(&b, d0)?, z, p, pol)?;
            corner = corner.max(diff(&ct.value, &bt.value.view((0, 0), (d0, d0)).into_owned()));
        }
    }
    flags.sort();
    flags.dedup();
    Ok(vec![
        check(g, "mobius covariance", 1e-7, cov, count, flags.clone()),
        check(g, "adjoint duality", 1e-9, dual, zs.len(), flags.clone()),
        check(g, "corner commutation", 1e-10, corner, zs.len() * d, flags),
    ])
}

/// max(n22, n21) ≤ n∩ ≤ 2·max(n22, n21) on random matrices. The error is the
/// largest violation of either side.
pub fn norm_checks(cfg: &IdentityConfig) -> Vec<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(101));
    let mut violation: f64 = 0.0;
    let mut inexact = 0;
    for _ in 0..cfg.matrix_samples {
        let m = random_matrix(&mut rng, 3);
        let n22 = opnorm_2to2(&m);
        let n21 = opnorm_2to1(&m);
        let ni = norm_intersection(&m);
        if !n21.exact {
            inexact += 1;
        }
        let lo = n22.max(n21.value);
        violation = violation.max(lo - ni.value).max(ni.value - 2.0 * lo);
    }
    let flags = if inexact > 0 {
        vec![format!("{inexact} 2to1 norms from the lower-bound path")]
    } else {
        vec![]
    };
    vec![check("norms", "intersection norm sandwich", 1e-6, violation.max(0.0), cfg.matrix_samples, flags)]
}

pub fn run_battery(cfg: &IdentityConfig) -> bergman_core::Result<IdentityReport> {
    let mut checks = geometry_checks(cfg.samples, cfg.seed, cfg.params.alpha)?;
    checks.extend(basis_checks(cfg)?);
    checks.extend(operator_checks(cfg)?);
    checks.extend(berezin_checks(cfg)?);
    checks.extend(norm_checks(cfg));
    Ok(IdentityReport { checks })
}
