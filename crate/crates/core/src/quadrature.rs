//! Deterministic product rules for ∫ f dν_α on the ball in ℂ¹ and ℂ².
//!
//! The radial variable is ρ = |z|². For n = 2 the simplex (t₁, t₂) = (ρv, ρ(1−v))
//! is covered by a Duffy substitution, so a rule is a tensor of a radial
//! Gauss–Jacobi factor, a Gauss–Legendre factor in v (n = 2 only) and uniform
//! angular grids. Jump radii of indicator symbols become panel breakpoints.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::geometry::{Coords, Point, SpaceParams};

/// Gauss–Jacobi nodes and weights on [0, 1] for the weight (1−x)^a x^b.
///
/// Golub–Welsch: eigen-decomposition of the Jacobi matrix of the monic
/// recurrence. Nodes are returned in increasing order; weights sum to B(a+1, b+1).
pub fn gauss_jacobi(m: usize, a: f64, b: f64) -> (Vec<f64>, Vec<f64>) {
    assert!(m >= 1 && a > -1.0 && b > -1.0);
    let ab = a + b;
    let mut jac = DMatrix::<f64>::zeros(m, m);
    for k in 0..m {
        let kf = k as f64;
        jac[(k, k)] = if k == 0 {
            (b - a) / (ab + 2.0)
        } else {
            (b * b - a * a) / ((2.0 * kf + ab) * (2.0 * kf + ab + 2.0))
        };
        if k + 1 < m {
            let j = kf + 1.0;
            let s = 2.0 * j + ab;
            let beta = 4.0 * j * (j + a) * (j + b) * (j + ab) / (s * s * (s + 1.0) * (s - 1.0));
            jac[(k, k + 1)] = beta.sqrt();
            jac[(k + 1, k)] = beta.sqrt();
        }
    }
    let eig = SymmetricEigen::new(jac);
    let mass = beta_fn(a + 1.0, b + 1.0);
    let mut pairs: Vec<(f64, f64)> = (0..m)
        .map(|i| {
            let t = eig.eigenvalues[i];
            let v0 = eig.eigenvectors[(0, i)];
            ((t + 1.0) / 2.0, mass * v0 * v0)
        })
        .collect();
    pairs.sort_by(|x, y| x.0.total_cmp(&y.0));
    pairs.into_iter().unzip()
}

/// Euler beta function. When either argument is a small positive integer the
/// finite product (q−1)!/(p(p+1)…(p+q−1)) is used; it is exact to rounding,
/// unlike differences of log-gamma values.
pub fn beta_fn(p: f64, q: f64) -> f64 {
    let small_int = |x: f64| x.fract() == 0.0 && (1.0..=64.0).contains(&x);
    let (p, q) = if small_int(q) { (p, q) } else { (q, p) };
    if small_int(q) {
        let mut v = 1.0;
        for i in 0..q as usize {
            v *= (i.max(1)) as f64 / (p + i as f64);
        }
        return v;
    }
    (ln_gamma(p) + ln_gamma(q) - ln_gamma(p + q)).exp()
}

/// Gauss–Legendre on [lo, hi] with weights summing to hi − lo.
pub fn gauss_legendre(m: usize, lo: f64, hi: f64) -> (Vec<f64>, Vec<f64>) {
    let (x, w) = gauss_jacobi(m, 0.0, 0.0);
    let h = hi - lo;
    (
        x.iter().map(|t| lo + h * t).collect(),
        w.iter().map(|v| v * h).collect(),
    )
}

/// Neumaier-compensated accumulator.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ComplexSum {
    re: CompensatedSum,
    im: CompensatedSum,
}

impl ComplexSum {
    pub fn add(&mut self, z: Complex64) {
        self.re.add(z.re);
        self.im.add(z.im);
    }

    pub fn value(&self) -> Complex64 {
        Complex64::new(self.re.value(), self.im.value())
    }
}

/// One radial (and, for n = 2, simplex) node before the angular expansion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadialNode {
    /// ρ = |z|².
    pub rho: f64,
    /// Share of ρ carried by the first coordinate (always 1 when n = 1).
    pub split: f64,
    pub weight: f64,
}

impl RadialNode {
    /// Squared moduli (|z₁|², …) at this node.
    pub fn moduli_sqr(&self, n: usize) -> [f64; 2] {
        if n == 1 {
            [self.rho, 0.0]
        } else {
            [self.rho * self.split, self.rho * (1.0 - self.split)]
        }
    }
}

#[derive(Debug, Clone)]
pub struct QuadratureRule {
    pub params: SpaceParams,
    pub radial_points: usize,
    pub angular_points: usize,
    /// Radii at which panels are split, increasing, in (0, 1).
    pub breaks: Vec<f64>,
    /// Total degree in z and z̄ up to which monomials are integrated exactly.
    pub declared_exactness: usize,
    pub radial: Vec<RadialNode>,
    pub nodes: Vec<Point>,
    pub weights: Vec<f64>,
}

const CHUNK: usize = 2048;

impl QuadratureRule {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Number of nodes sharing one radial node (N for n = 1, N² for n = 2).
    pub fn angular_block(&self) -> usize {
        self.angular_points.pow(self.params.n as u32)
    }
}

fn panel_edges(breaks: &[f64]) -> Vec<f64> {
    let mut edges = vec![0.0];
    edges.extend(breaks.iter().map(|r| r * r));
    edges.push(1.0);
    edges
}

/// Radial factor for the density n·c_α·ρ^{n−1}(1−ρ)^α on [0, 1], split at `breaks`.
fn radial_factor(params: &SpaceParams, points: usize, breaks: &[f64]) -> Vec<(f64, f64)> {
    let n = params.n;
    let alpha = params.alpha;
    let scale = n as f64 * params.c_alpha;
    let b = (n - 1) as f64;
    let mut out = Vec::new();
    if breaks.is_empty() {
        let (x, w) = gauss_jacobi(points, alpha, b);
        out.extend(x.into_iter().zip(w).map(|(x, w)| (x, scale * w)));
        return out;
    }
    let edges = panel_edges(breaks);
    let last = edges.len() - 2;
    for p in 0..=last {
        let (lo, hi) = (edges[p], edges[p + 1]);
        let h = hi - lo;
        if p == 0 {
            // x^{n−1} absorbed by the rule, (1−ρ)^α smooth here.
            let (x, w) = gauss_jacobi(points, 0.0, b);
            for (x, w) in x.into_iter().zip(w) {
                let rho = hi * x;
                out.push((rho, scale * w * hi.powi(n as i32) * (1.0 - rho).powf(alpha)));
            }
        } else if p == last {
            // (1−ρ)^α absorbed by the rule, ρ^{n−1} smooth here.
            let (x, w) = gauss_jacobi(points, alpha, 0.0);
            for (x, w) in x.into_iter().zip(w) {
                let rho = lo + h * x;
                out.push((rho, scale * w * h.powf(alpha + 1.0) * rho.powi(n as i32 - 1)));
            }
        } else {
            let (x, w) = gauss_legendre(points, lo, hi);
            for (rho, w) in x.into_iter().zip(w) {
                out.push((rho, scale * w * rho.powi(n as i32 - 1) * (1.0 - rho).powf(alpha)));
            }
        }
    }
    out
}

fn normalize_breaks(breaks: &[f64]) -> Result<Vec<f64>> {
    let mut out: Vec<f64> = Vec::new();
    for &r in breaks {
        if r.is_nan() {
            return Err(Error::invalid("break radius is NaN"));
        }
        // Jumps at the center or on the sphere need no panel.
        if r > 0.0 && r < 1.0 {
            out.push(r);
        }
    }
    out.sort_by(f64::total_cmp);
    out.dedup_by(|a, b| (*a - *b).abs() < 1e-14);
    Ok(out)
}

/// Builds a rule with `radial_points` Gauss nodes per radial panel (and in the
/// simplex direction for n = 2) and `angular_points` equispaced angles per
/// complex coordinate.
pub fn build_rule(
    params: &SpaceParams,
    radial_points: usize,
    angular_points: usize,
) -> Result<QuadratureRule> {
    build_rule_with_breaks(params, radial_points, angular_points, &[])
}

/// As [`build_rule`], with the radial panels split at the given radii so that
/// integrands jumping across those spheres are integrated piecewise smoothly.
pub fn build_rule_with_breaks(
    params: &SpaceParams,
    radial_points: usize,
    angular_points: usize,
    breaks: &[f64],
) -> Result<QuadratureRule> {
    let n = params.n;
    if n != 1 && n != 2 {
        return Err(Error::UnsupportedDimension(n));
    }
    if radial_points == 0 || angular_points == 0 {
        return Err(Error::invalid("rule resolutions must be positive"));
    }
    let breaks = normalize_breaks(breaks)?;
    let radial_1d = radial_factor(params, radial_points, &breaks);
    let radial: Vec<RadialNode> = if n == 1 {
        radial_1d
            .iter()
            .map(|&(rho, weight)| RadialNode {
                rho,
                split: 1.0,
                weight,
            })
            .collect()
    } else {
        let (v, wv) = gauss_legendre(radial_points, 0.0, 1.0);
        radial_1d
            .iter()
            .flat_map(|&(rho, w)| {
                v.iter().zip(&wv).map(move |(&split, &ws)| RadialNode {
                    rho,
                    split,
                    weight: w * ws,
                })
            })
            .collect()
    };

    let na = angular_points;
    let phases: Vec<Complex64> = (0..na)
        .map(|k| Complex64::from_polar(1.0, 2.0 * PI * k as f64 / na as f64))
        .collect();
    let block = na.pow(n as u32);
    let mut nodes = Vec::with_capacity(radial.len() * block);
    let mut weights = Vec::with_capacity(radial.len() * block);
    for rn in &radial {
        let w = rn.weight / block as f64;
        let m = rn.moduli_sqr(n);
        if n == 1 {
            let r = m[0].sqrt();
            for ph in &phases {
                nodes.push(Point::from_coords_clamped(Coords::from_slice(&[ph * r])));
                weights.push(w);
            }
        } else {
            let (r1, r2) = (m[0].sqrt(), m[1].sqrt());
            for p1 in &phases {
                for p2 in &phases {
                    nodes.push(Point::from_coords_clamped(Coords::from_slice(&[
                        p1 * r1,
                        p2 * r2,
                    ])));
                    weights.push(w);
                }
            }
        }
    }
    let radial_exact = 4 * radial_points - 2;
    Ok(QuadratureRule {
        params: *params,
        radial_points,
        angular_points,
        breaks,
        declared_exactness: radial_exact.min(angular_points - 1),
        radial,
        nodes,
        weights,
    })
}

/// Σ wᵢ f(zᵢ) with compensated summation in fixed node order.
///
/// Nodes are split into fixed-size chunks evaluated in parallel; partial sums
/// are combined in chunk order, so the result does not depend on the thread count.
pub fn integrate<F>(rule: &QuadratureRule, f: F) -> Complex64
where
    F: Fn(&Point) -> Complex64 + Sync,
{
    let partials: Vec<Complex64> = rule
        .nodes
        .par_chunks(CHUNK)
        .zip(rule.weights.par_chunks(CHUNK))
        .map(|(ns, ws)| {
            let mut acc = ComplexSum::default();
            for (z, w) in ns.iter().zip(ws) {
                acc.add(f(z) * *w);
            }
            acc.value()
        })
        .collect();
    let mut acc = ComplexSum::default();
    for p in partials {
        acc.add(p);
    }
    acc.value()
}

/// Real-valued variant of [`integrate`].
pub fn integrate_real<F>(rule: &QuadratureRule, f: F) -> f64
where
    F: Fn(&Point) -> f64 + Sync,
{
    let partials: Vec<f64> = rule
        .nodes
        .par_chunks(CHUNK)
        .zip(rule.weights.par_chunks(CHUNK))
        .map(|(ns, ws)| {
            let mut acc = CompensatedSum::default();
            for (z, w) in ns.iter().zip(ws) {
                acc.add(f(z) * *w);
            }
            acc.value()
        })
        .collect();
    let mut acc = CompensatedSum::default();
    for p in partials {
        acc.add(p);
    }
    acc.value()
}

/// Entrywise integral of a matrix-valued function.
pub fn integrate_matrix<F>(rule: &QuadratureRule, f: F) -> Result<DMatrix<Complex64>>
where
    F: Fn(&Point) -> DMatrix<Complex64> + Sync,
{
    let partials: Vec<Result<(usize, usize, Vec<ComplexSum>)>> = rule
        .nodes
        .par_chunks(CHUNK)
        .zip(rule.weights.par_chunks(CHUNK))
        .map(|(ns, ws)| {
            let mut shape = None;
            let mut acc: Vec<ComplexSum> = Vec::new();
            for (z, w) in ns.iter().zip(ws) {
                let m = f(z);
                let s = (m.nrows(), m.ncols());
                match shape {
                    None => {
                        shape = Some(s);
                        acc = vec![ComplexSum::default(); s.0 * s.1];
                    }
                    Some(t) if t != s => {
                        return Err(Error::invalid(format!(
                            "integrand changed shape from {t:?} to {s:?}"
                        )))
                    }
                    _ => {}
                }
                for (a, v) in acc.iter_mut().zip(m.iter()) {
                    a.add(v * *w);
                }
            }
            let (r, c) = shape.unwrap_or((0, 0));
            Ok((r, c, acc))
        })
        .collect();
    let mut shape: Option<(usize, usize)> = None;
    let mut total: Vec<ComplexSum> = Vec::new();
    for p in partials {
        let (r, c, acc) = p?;
        match shape {
            None => {
                shape = Some((r, c));
                total = vec![ComplexSum::default(); r * c];
            }
            Some(t) if t != (r, c) => {
                return Err(Error::invalid(format!(
                    "integrand changed shape from {t:?} to {:?}",
                    (r, c)
                )))
            }
            _ => {}
        }
        for (t, a) in total.iter_mut().zip(&acc) {
            t.add(a.value());
        }
    }
    let (r, c) = shape.unwrap_or((0, 0));
    Ok(DMatrix::from_iterator(r, c, total.iter().map(|s| s.value())))
}

/// Resolution policy for integrands weighted by |k_z|² or involving φ_z.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RulePolicy {
    pub radial_base: usize,
    pub radial_slope: f64,
    /// Angular points grow like this constant over (1 − |z|).
    pub angular_scale: f64,
    pub min_angular: usize,
}

impl Default for RulePolicy {
    fn default() -> Self {
        RulePolicy {
            radial_base: 40,
            radial_slope: 200.0,
            angular_scale: 30.0,
            min_angular: 16,
        }
    }
}

impl RulePolicy {
    pub fn radial_points(&self, z_norm: f64, degree: usize) -> usize {
        let by_z = self.radial_base + (self.radial_slope * z_norm * z_norm).ceil() as usize;
        by_z.max(degree / 2 + 1)
    }

    pub fn angular_points(&self, z_norm: f64, degree: usize) -> usize {
        let by_z = (self.angular_scale / (1.0 - z_norm)).ceil() as usize;
        by_z.max(degree + 1).max(self.min_angular)
    }

    /// Whether `rule` meets the policy for a kernel-weighted integrand at |z| with
    /// polynomial content of total degree `degree`.
    pub fn satisfied_by(&self, rule: &QuadratureRule, z_norm: f64, degree: usize) -> bool {
        rule.radial_points >= self.radial_points(z_norm, degree)
            && rule.angular_points >= self.angular_points(z_norm, degree)
    }

    /// Memoized rule meeting the policy at |z| for the given degree and breaks.
    pub fn rule_for(
        &self,
        params: &SpaceParams,
        z_norm: f64,
        degree: usize,
        breaks: &[f64],
    ) -> Result<Arc<QuadratureRule>> {
        cached_rule(
            params,
            self.radial_points(z_norm, degree),
            self.angular_points(z_norm, degree),
            breaks,
        )
    }
}

type RuleKey = (usize, u64, usize, usize, Vec<u64>);

const RULE_CACHE_LIMIT: usize = 48;

fn rule_cache() -> &'static Mutex<HashMap<RuleKey, Arc<QuadratureRule>>> {
    static CACHE: OnceLock<Mutex<HashMap<RuleKey, Arc<QuadratureRule>>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

/// Process-wide memo of [`build_rule_with_breaks`].
pub fn cached_rule(
    params: &SpaceParams,
    radial_points: usize,
    angular_points: usize,
    breaks: &[f64],
) -> Result<Arc<QuadratureRule>> {
    let breaks = normalize_breaks(breaks)?;
    let key: RuleKey = (
        params.n,
        params.alpha.to_bits(),
        radial_points,
        angular_points,
        breaks.iter().map(|b| b.to_bits()).collect(),
    );
    if let Some(rule) = rule_cache().lock().unwrap().get(&key) {
        return Ok(rule.clone());
    }
    let rule = Arc::new(build_rule_with_breaks(
        params,
        radial_points,
        angular_points,
        &breaks,
    )?);
    let mut cache = rule_cache().lock().unwrap();
    if cache.len() >= RULE_CACHE_LIMIT {
        cache.clear();
    }
    cache.insert(key, rule.clone());
    Ok(rule)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::normalized_kernel;

    /// B(k+1, y) = k!/(y(y+1)…(y+k)) for integer k.
    fn beta_int(k: u32, y: f64) -> f64 {
        (0..=k).fold(1.0, |v, i| v * (i.max(1)) as f64 / (y + i as f64))
    }

    #[test]
    fn gauss_jacobi_integrates_polynomials() {
        // ∫₀¹ x^k (1−x)^a x^b dx = B(k+b+1, a+1)
        for &(a, b) in &[(0.0, 0.0), (1.5, 0.0), (0.0, 1.0), (-0.5, 1.0)] {
            let (x, w) = gauss_jacobi(8, a, b);
            for k in 0..16 {
                let q: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(k)).sum();
                let exact = beta_int(k as u32 + b as u32, a + 1.0);
                assert!((q - exact).abs() < 1e-14, "a={a} b={b} k={k}: {q} vs {exact}");
            }
        }
    }

    #[test]
    fn total_mass_is_one() {
        for n in 1..=2 {
            for &alpha in &[0.0, 1.0, 2.5, -0.5] {
                let p = SpaceParams::new(n, alpha).unwrap();
                let rule = build_rule(&p, 6, 5).unwrap();
                let s: f64 = rule.weights.iter().sum();
                assert!((s - 1.0).abs() < 1e-12, "n={n} alpha={alpha}: {s}");
                // (1−ρ)^α is only smooth, not polynomial, on the inner panels.
                let with_breaks = build_rule_with_breaks(&p, 24, 5, &[0.3, 0.7]).unwrap();
                let s: f64 = with_breaks.weights.iter().sum();
                assert!((s - 1.0).abs() < 1e-12, "breaks n={n} alpha={alpha}: {s}");
            }
        }
    }

    #[test]
    fn second_moment_unweighted_disc() {
        let p = SpaceParams::new(1, 0.0).unwrap();
        let rule = build_rule(&p, 4, 8).unwrap();
        let v = integrate(&rule, |z| Complex64::new(z.norm_sqr(), 0.0));
        assert!((v.re - 0.5).abs() < 1e-14);
        // Riemann-sum oracle in r: ∫₀¹ r² · 2r dr
        let m = 200_000;
        let h = 1.0 / m as f64;
        let riemann: f64 = (0..m)
            .map(|i| {
                let r = (i as f64 + 0.5) * h;
                r * r * 2.0 * r * h
            })
            .sum();
        assert!((v.re - riemann).abs() < 1e-9);
        let odd = integrate(&rule, |z| z.coords()[0]);
        assert!(odd.norm() < 1e-13);
    }

    #[test]
    fn normalized_kernel_has_unit_norm() {
        let p = SpaceParams::new(1, 2.0).unwrap();
        let w = Point::real(&[0.4]).unwrap();
        let rule = build_rule(&p, 60, 64).unwrap();
        let v = integrate_real(&rule, |z| normalized_kernel(&p, z, &w).unwrap().norm_sqr());
        assert!((v - 1.0).abs() < 1e-8);
    }

    #[test]
    fn matrix_integration_is_entrywise() {
        let p = SpaceParams::new(1, 0.0).unwrap();
        let rule = build_rule(&p, 5, 7).unwrap();
        let f = |z: &Point| {
            let x = z.coords()[0];
            DMatrix::from_row_slice(2, 2, &[x * x.conj(), x, x.conj(), Complex64::new(1.0, 0.0)])
        };
        let m = integrate_matrix(&rule, f).unwrap();
        let e00 = integrate(&rule, |z| z.coords()[0].norm_sqr().into());
        assert_eq!(m[(0, 0)], e00);
        assert!((m[(1, 1)].re - 1.0).abs() < 1e-14);
        assert!(m[(0, 1)].norm() < 1e-14);
        let bad = integrate_matrix(&rule, |z| {
            if z.coords()[0].re > 0.5 {
                DMatrix::zeros(1, 1)
            } else {
                DMatrix::zeros(2, 2)
            }
        });
        assert!(bad.is_err());
    }

    #[test]
    fn unsupported_dimension() {
        let p = SpaceParams::new(3, 0.0).unwrap();
        assert!(matches!(build_rule(&p, 4, 4), Err(Error::UnsupportedDimension(3))));
    }

    #[test]
    fn exactness_is_total_degree() {
        let p = SpaceParams::new(2, 0.0).unwrap();
        let rule = build_rule(&p, 5, 30).unwrap();
        assert_eq!(rule.declared_exactness, 18);
        let rule = build_rule(&p, 5, 9).unwrap();
        assert_eq!(rule.declared_exactness, 8);
    }
}
