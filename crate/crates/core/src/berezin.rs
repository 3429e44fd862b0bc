//! Berezin transforms of symbols and operators, BMO¹ seminorms, Bloch norms
//! and tail-decay profiles. Every supremum here is a maximum over a finite grid.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::basis::BasisTable;
use crate::error::{Error, Result};
use crate::geometry::{normalized_kernel_sqr_raw, MobiusMap, Point, SpaceParams};
use crate::norms::{opnorm_2to2, NormKind, SearchConfig};
use crate::quadrature::{integrate_matrix, integrate_real, QuadratureRule, RulePolicy};
use crate::symbols::{tail_truncate, Symbol};
use crate::toeplitz::TruncatedOperator;

/// Per-thread memo of norm computations keyed by the matrix they were computed
/// from. Piecewise-constant symbols repeat the same matrix across most nodes.
struct NodeMemo {
    id: u64,
}

thread_local! {
    static MEMO: std::cell::RefCell<Vec<(u64, DMatrix<Complex64>, Vec<f64>)>> =
        const { std::cell::RefCell::new(Vec::new()) };
}

impl NodeMemo {
    fn new() -> Self {
        static NEXT: std::sync::atomic::AtomicU64 = std::sync::atomic::AtomicU64::new(0);
        NodeMemo {
            id: NEXT.fetch_add(1, std::sync::atomic::Ordering::Relaxed),
        }
    }

    fn get(&self, key: &DMatrix<Complex64>, f: impl FnOnce() -> Vec<f64>) -> Vec<f64> {
        const SLOTS: usize = 8;
        let hit = MEMO.with(|m| {
            m.borrow()
                .iter()
                .find(|(id, k, _)| *id == self.id && k == key)
                .map(|(_, _, v)| v.clone())
        });
        if let Some(v) = hit {
            return v;
        }
        let v = f();
        MEMO.with(|m| {
            let mut m = m.borrow_mut();
            if m.len() >= SLOTS {
                m.remove(0);
            }
            m.push((self.id, key.clone(), v.clone()));
        });
        v
    }
}

/// A Berezin value together with whether the rule met the resolution policy.
#[derive(Debug, Clone)]
pub struct BerezinValue {
    pub value: DMatrix<Complex64>,
    pub policy_ok: bool,
}

/// Radius at which the kernel weight of the Berezin integrand peaks, after the
/// pullback used for Möbius-composed symbols.
fn effective_radius(b: &Symbol, z: &Point) -> f64 {
    match b.mobius_split() {
        Some((_, c)) => MobiusMap::new(&c).apply(z).norm(),
        None => z.norm(),
    }
}

/// b̃(z) = ∫ |k_z(w)|² b(w) dν_α(w).
///
/// For b = c∘φ_a the integral is pulled back by u = φ_a(w), giving
/// ∫ c(u)·|k_z(φ_a u)|²·|k_a(u)|² dν_α(u), so the jumps of c sit on the rule's panels.
pub fn berezin_symbol(
    b: &Symbol,
    z: &Point,
    rule: &QuadratureRule,
    policy: &RulePolicy,
) -> Result<BerezinValue> {
    let params = &rule.params;
    params.check_point(z)?;
    b.validate(params.n)?;
    let lambda = params.kernel_exponent();
    let degree = b.degree().unwrap_or(0);
    let policy_ok = policy.satisfied_by(rule, effective_radius(b, z), degree);
    let value = match b.mobius_split() {
        Some((base, a)) => {
            let map = MobiusMap::new(&a);
            integrate_matrix(rule, |u| {
                let w = map.apply_coords(u.coords());
                let weight = normalized_kernel_sqr_raw(lambda, &w, z.coords())
                    * normalized_kernel_sqr_raw(lambda, u.coords(), a.coords());
                base.eval(u) * Complex64::new(weight, 0.0)
            })?
        }
        None => integrate_matrix(rule, |w| {
            b.eval(w) * Complex64::new(normalized_kernel_sqr_raw(lambda, w.coords(), z.coords()), 0.0)
        })?,
    };
    Ok(BerezinValue { value, policy_ok })
}

/// Rule the policy prescribes for the Berezin integrand of `b` at `z`.
pub fn berezin_rule(
    b: &Symbol,
    z: &Point,
    params: &SpaceParams,
    policy: &RulePolicy,
) -> Result<std::sync::Arc<QuadratureRule>> {
    let (breaks, degree) = match b.mobius_split() {
        Some((base, _)) => (base.radial_breaks(), base.degree().unwrap_or(0)),
        None => (b.radial_breaks(), b.degree().unwrap_or(0)),
    };
    policy.rule_for(params, effective_radius(b, z), degree, &breaks)
}

/// [`berezin_symbol`] with the rule chosen by the policy.
pub fn berezin_symbol_auto(b: &Symbol, z: &Point, params: &SpaceParams, policy: &RulePolicy) -> Result<BerezinValue> {
    let rule = berezin_rule(b, z, params, policy)?;
    berezin_symbol(b, z, &rule, policy)
}

/// Operator Berezin transform: entry (j, k) is ⟨S(k_z e_k), k_z e_j⟩.
pub fn berezin_operator(s: &TruncatedOperator, z: &Point) -> Result<DMatrix<Complex64>> {
    let table = &s.table;
    let d = table.channels;
    let coeffs: Vec<DVector<Complex64>> = (0..d)
        .map(|k| {
            let mut e = DVector::zeros(d);
            e[k] = Complex64::new(1.0, 0.0);
            table.kernel_coefficients(z, &e)
        })
        .collect::<Result<_>>()?;
    let images: Vec<DVector<Complex64>> = coeffs.iter().map(|c| &s.matrix * c).collect();
    Ok(DMatrix::from_fn(d, d, |j, k| coeffs[j].dotc(&images[k])))
}

/// Berezin transforms on a grid.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BerezinField {
    pub grid: Vec<Point>,
    /// values[g][r][c] = [re, im] of entry (r, c) at grid point g.
    pub values: Vec<Vec<Vec<[f64; 2]>>>,
    pub provenance: String,
    /// Grid points where the rule fell short of the resolution policy.
    pub flagged: Vec<usize>,
}

impl BerezinField {
    pub fn matrix(&self, g: usize) -> DMatrix<Complex64> {
        let v = &self.values[g];
        DMatrix::from_fn(v.len(), v.len(), |r, c| Complex64::new(v[r][c][0], v[r][c][1]))
    }

    /// Grid maximum of ‖b̃(z)‖_{2→2}, a lower bound for the supremum over the ball.
    pub fn sup_norm(&self) -> f64 {
        (0..self.grid.len())
            .map(|g| opnorm_2to2(&self.matrix(g)))
            .fold(0.0, f64::max)
    }

    /// Header: z coordinates, then entries row-major.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let n = self.grid.first().map_or(0, |p| p.dim());
        let d = self.values.first().map_or(0, |v| v.len());
        let mut header: Vec<String> = Vec::new();
        for i in 1..=n {
            header.push(format!("z{i}_re"));
            header.push(format!("z{i}_im"));
        }
        for r in 1..=d {
            for c in 1..=d {
                header.push(format!("b{r}{c}_re"));
                header.push(format!("b{r}{c}_im"));
            }
        }
        out.push_str(&header.join(","));
        out.push('\n');
        for (p, v) in self.grid.iter().zip(&self.values) {
            let mut row: Vec<String> = Vec::new();
            for c in p.coords() {
                row.push(fmt_f64(c.re));
                row.push(fmt_f64(c.im));
            }
            for r in v {
                for e in r {
                    row.push(fmt_f64(e[0]));
                    row.push(fmt_f64(e[1]));
                }
            }
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }
}

/// Full-precision (17 significant digits) decimal rendering used in CSV output.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn to_rows(m: &DMatrix<Complex64>) -> Vec<Vec<[f64; 2]>> {
    (0..m.nrows())
        .map(|r| (0..m.ncols()).map(|c| [m[(r, c)].re, m[(r, c)].im]).collect())
        .collect()
}

pub fn berezin_field(b: &Symbol, grid: &[Point], params: &SpaceParams, policy: &RulePolicy) -> Result<BerezinField> {
    let results: Vec<BerezinValue> = grid
        .par_iter()
        .map(|z| berezin_symbol_auto(b, z, params, policy))
        .collect::<Result<_>>()?;
    Ok(BerezinField {
        grid: grid.to_vec(),
        values: results.iter().map(|r| to_rows(&r.value)).collect(),
        provenance: format!("Berezin transform of {}", b.describe()),
        flagged: results
            .iter()
            .enumerate()
            .filter(|(_, r)| !r.policy_ok)
            .map(|(i, _)| i)
            .collect(),
    })
}

/// Default grid: radii {0, .2, .4, .6, .8, .9, .95} times 8 angles per complex
/// coordinate. For n = 2 the points are r·(e^{iθ₁}, e^{iθ₂})/√2.
pub fn default_z_grid(n: usize) -> Vec<Point> {
    z_grid(n, &[0.0, 0.2, 0.4, 0.6, 0.8, 0.9, 0.95], 8)
}

pub fn z_grid(n: usize, radii: &[f64], angles: usize) -> Vec<Point> {
    let phase = |k: usize| Complex64::from_polar(1.0, 2.0 * PI * k as f64 / angles as f64);
    let mut out: Vec<Point> = Vec::new();
    for &r in radii {
        if r == 0.0 {
            out.push(Point::origin(n));
            continue;
        }
        if n == 1 {
            for k in 0..angles {
                out.extend(Point::new([phase(k) * r]));
            }
        } else {
            let s = r / 2f64.sqrt();
            for k1 in 0..angles {
                for k2 in 0..angles {
                    let mut c = vec![phase(k1) * s, phase(k2) * s];
                    c.extend(std::iter::repeat(Complex64::new(0.0, 0.0)).take(n.saturating_sub(2)));
                    out.extend(Point::new(c));
                }
            }
        }
    }
    let mut dedup: Vec<Point> = Vec::new();
    for p in out {
        if !dedup.iter().any(|q| q.distance(&p) < 1e-14) {
            dedup.push(p);
        }
    }
    dedup
}

/// BMO¹ estimate over a grid.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BmoEstimate {
    /// Grid maximum; a lower bound for the supremum over the ball.
    pub value: f64,
    pub argmax: Point,
    pub per_point: Vec<f64>,
    pub norm_kind: NormKind,
    /// False if any matrix norm came from the lower-bound search path.
    pub norms_exact: bool,
    /// Grid points where the rule fell short of the resolution policy.
    pub flagged: Vec<usize>,
}

/// max over z of ∫ ‖b(φ_z(w)) − b̃(z)‖ dν_α(w), evaluated in the pulled-back form
/// ∫ ‖b(u) − b̃(z)‖·|k_z(u)|² dν_α(u).
pub fn bmo1_seminorm(
    b: &Symbol,
    params: &SpaceParams,
    z_grid: &[Point],
    norm_kind: NormKind,
    policy: &RulePolicy,
    search: &SearchConfig,
) -> Result<BmoEstimate> {
    if z_grid.is_empty() {
        return Err(Error::invalid("z grid is empty"));
    }
    b.validate(params.n)?;
    let lambda = params.kernel_exponent();
    let degree = b.degree().unwrap_or(0);
    let breaks = b.radial_breaks();
    let results: Vec<(f64, bool, bool)> = z_grid
        .iter()
        .map(|z| {
            params.check_point(z)?;
            let bt = berezin_symbol_auto(b, z, params, policy)?;
            let rule = policy.rule_for(params, z.norm(), degree, &breaks)?;
            let exact = std::sync::atomic::AtomicBool::new(true);
            let memo = NodeMemo::new();
            let v = integrate_real(&rule, |u| {
                let diff = b.eval(u) - &bt.value;
                let est = memo.get(&diff, || {
                    let est = norm_kind.apply(&diff, search);
                    vec![est.value, if est.exact { 1.0 } else { 0.0 }]
                });
                if est[1] == 0.0 {
                    exact.store(false, std::sync::atomic::Ordering::Relaxed);
                }
                est[0] * normalized_kernel_sqr_raw(lambda, u.coords(), z.coords())
            });
            // Jumps of Möbius-composed symbols are not on the rule's panels.
            let ok = bt.policy_ok && !(b.contains_mobius() && b.has_jumps());
            Ok((v, exact.into_inner(), ok))
        })
        .collect::<Result<_>>()?;
    let mut best = 0;
    for (i, r) in results.iter().enumerate() {
        if r.0 > results[best].0 {
            best = i;
        }
    }
    Ok(BmoEstimate {
        value: results[best].0,
        argmax: z_grid[best].clone(),
        per_point: results.iter().map(|r| r.0).collect(),
        norm_kind,
        norms_exact: results.iter().all(|r| r.1),
        flagged: results
            .iter()
            .enumerate()
            .filter(|(_, r)| !r.2)
            .map(|(i, _)| i)
            .collect(),
    })
}

/// max over the grid of (1 − |z|²)·‖∇f(z)‖, where ‖∇f‖ sums the ℓ¹ norms (over
/// channels) of the n partial derivatives.
pub fn bloch_norm(f: &DVector<Complex64>, table: &BasisTable, grid: &[Point]) -> Result<f64> {
    if f.len() != table.len() {
        return Err(Error::DimensionMismatch {
            expected: table.len(),
            found: f.len(),
        });
    }
    let mut best: f64 = 0.0;
    for z in grid {
        table.params.check_point(z)?;
        let g = table.gradient(f, z.coords());
        let norm: f64 = g.iter().map(|v| v.norm()).sum();
        best = best.max((1.0 - z.norm_sqr()) * norm);
    }
    Ok(best)
}

/// For each d0: max over the grid of ∫ |k_z(w)|²·‖b_(d0)(w)‖_{2→2} dν_α(w).
pub fn tail_decay_profile(
    b: &Symbol,
    params: &SpaceParams,
    z_grid: &[Point],
    d_values: &[usize],
    policy: &RulePolicy,
) -> Result<Vec<f64>> {
    let d = b.channels();
    for &d0 in d_values {
        tail_truncate(b, d0)?;
    }
    if z_grid.is_empty() {
        return Err(Error::invalid("z grid is empty"));
    }
    b.validate(params.n)?;
    let lambda = params.kernel_exponent();
    let degree = b.degree().unwrap_or(0);
    let breaks = b.radial_breaks();
    let mut best = vec![0.0f64; d_values.len()];
    for z in z_grid {
        params.check_point(z)?;
        let rule = policy.rule_for(params, z.norm(), degree, &breaks)?;
        let memo = NodeMemo::new();
        let sums = crate::toeplitz::accumulate_nodes(&rule, d_values.len(), |w, weight, acc| {
            let bw = b.eval(w);
            let norms = memo.get(&bw, || {
                d_values
                    .iter()
                    .map(|&d0| {
                        if d0 >= d {
                            return 0.0;
                        }
                        let mut t = bw.clone();
                        t.columns_mut(0, d0).fill(Complex64::new(0.0, 0.0));
                        opnorm_2to2(&t)
                    })
                    .collect()
            });
            let k = normalized_kernel_sqr_raw(lambda, w.coords(), z.coords()) * weight;
            for (slot, v) in acc.iter_mut().zip(norms) {
                *slot += Complex64::new(v * k, 0.0);
            }
        });
        for (b, s) in best.iter_mut().zip(sums) {
            *b = b.max(s.re);
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symbols::ScalarFn;

    fn p1() -> SpaceParams {
        SpaceParams::new(1, 0.0).unwrap()
    }

    #[test]
    fn constant_symbol_berezin_is_itself() {
        let p = p1();
        let c = Symbol::ConstantMatrix {
            rows: vec![
                vec![Complex64::new(1.0, 2.0), Complex64::new(0.0, -1.0)],
                vec![Complex64::new(0.5, 0.0), Complex64::new(-3.0, 0.0)],
            ],
        };
        let policy = RulePolicy::default();
        let z = Point::new([Complex64::new(0.3, -0.5)]).unwrap();
        let v = berezin_symbol_auto(&c, &z, &p, &policy).unwrap();
        let rows = [[Complex64::new(1.0, 2.0), Complex64::new(0.0, -1.0)], [Complex64::new(0.5, 0.0), Complex64::new(-3.0, 0.0)]];
        for r in 0..2 {
            for col in 0..2 {
                assert!((v.value[(r, col)] - rows[r][col]).norm() < 1e-10);
            }
        }
        assert!(v.policy_ok);
    }

    #[test]
    fn indicator_berezin_at_origin_and_closed_form() {
        let p = p1();
        let policy = RulePolicy::default();
        let b = Symbol::Scalar {
            tau: ScalarFn::indicator(0.5),
        };
        let v0 = berezin_symbol_auto(&b, &Point::origin(1), &p, &policy).unwrap();
        assert!((v0.value[(0, 0)].re - 0.25).abs() < 1e-13);
        // τ̃(z) = (1−|z|²)² r²/(1−r²|z|²)²
        for &x in &[0.3, 0.7, 0.9] {
            let z = Point::real(&[x]).unwrap();
            let v = berezin_symbol_auto(&b, &z, &p, &policy).unwrap().value[(0, 0)].re;
            let t = x * x;
            let want = (1.0 - t).powi(2) * 0.25 / (1.0 - 0.25 * t).powi(2);
            assert!((v - want).abs() < 1e-12, "{x}: {v} vs {want}");
        }
    }

    #[test]
    fn bmo_of_indicator_at_origin() {
        let p = p1();
        let b = Symbol::Scalar {
            tau: ScalarFn::indicator(0.5),
        };
        let est = bmo1_seminorm(
            &b,
            &p,
            &[Point::origin(1)],
            NormKind::TwoToTwo,
            &RulePolicy::default(),
            &SearchConfig::default(),
        )
        .unwrap();
        assert!((est.value - 0.375).abs() < 1e-12);
        let c = Symbol::identity(2);
        let est = bmo1_seminorm(
            &c,
            &p,
            &default_z_grid(1),
            NormKind::TwoToOne,
            &RulePolicy::default(),
            &SearchConfig::default(),
        )
        .unwrap();
        assert!(est.value < 1e-10);
    }

    #[test]
    fn bloch_examples() {
        let p = p1();
        let t = BasisTable::build(&p, 3, 1).unwrap();
        let grid: Vec<Point> = (0..2000).map(|i| Point::real(&[i as f64 / 2000.0]).unwrap()).collect();
        let mut f = DVector::zeros(t.len());
        f[0] = Complex64::new(3.0, 0.0);
        assert_eq!(bloch_norm(&f, &t, &grid).unwrap(), 0.0);
        let mut f = DVector::zeros(t.len());
        f[1] = Complex64::new(t.norms[1], 0.0); // f(z) = z
        assert!((bloch_norm(&f, &t, &grid).unwrap() - 1.0).abs() < 1e-14);
        let mut f = DVector::zeros(t.len());
        f[2] = Complex64::new(t.norms[2], 0.0); // f(z) = z²
        let want = 2.0 * (2.0 / 3.0) * (1.0f64 / 3.0).sqrt();
        assert!((bloch_norm(&f, &t, &grid).unwrap() - want).abs() < 1e-6);
    }

    #[test]
    fn grid_sizes() {
        assert_eq!(default_z_grid(1).len(), 49);
        assert_eq!(default_z_grid(2).len(), 1 + 6 * 64);
    }
}
