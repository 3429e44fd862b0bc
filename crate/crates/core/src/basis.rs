//! Truncated orthonormal monomial basis {zᵐ e_j / ‖zᵐ‖} of the vector-valued space.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use smallvec::SmallVec;
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::geometry::{MobiusMap, Point, SpaceParams};
use crate::quadrature::{build_rule, gauss_jacobi, integrate, ComplexSum, QuadratureRule};
use crate::toeplitz::TruncatedOperator;

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct MultiIndex {
    pub exponents: SmallVec<[u32; 2]>,
    pub total_degree: u32,
}

impl MultiIndex {
    pub fn new(exponents: &[u32]) -> Self {
        MultiIndex {
            exponents: exponents.into(),
            total_degree: exponents.iter().sum(),
        }
    }

    /// m! = Π mᵢ!
    pub fn ln_factorial(&self) -> f64 {
        self.exponents
            .iter()
            .map(|&k| ln_gamma(k as f64 + 1.0))
            .sum()
    }

    /// zᵐ at the given coordinates.
    pub fn eval(&self, z: &[Complex64]) -> Complex64 {
        self.exponents
            .iter()
            .zip(z)
            .map(|(&k, c)| c.powu(k))
            .product()
    }
}

/// All multi-indices of length `n` with total degree ≤ `max_degree`, sorted by
/// degree and then lexicographically.
pub fn multi_indices(n: usize, max_degree: u32) -> Vec<MultiIndex> {
    let mut out = Vec::new();
    for deg in 0..=max_degree {
        let mut current = vec![0u32; n];
        fill(&mut out, &mut current, 0, deg);
    }
    out
}

fn fill(out: &mut Vec<MultiIndex>, current: &mut Vec<u32>, pos: usize, remaining: u32) {
    if pos + 1 == current.len() {
        current[pos] = remaining;
        out.push(MultiIndex::new(current));
        return;
    }
    for k in 0..=remaining {
        current[pos] = k;
        fill(out, current, pos + 1, remaining - k);
    }
}

/// ‖zᵐ‖² = m!·Γ(n+α+1)/Γ(n+|m|+α+1), by the 1-D Gauss–Jacobi radial integral
/// times the sphere moment (n−1)!·m!/(n−1+|m|)!.
fn radial_oracle_norm_sqr(params: &SpaceParams, m: &MultiIndex) -> f64 {
    let n = params.n;
    let k = m.total_degree as usize + n - 1;
    let (x, w) = gauss_jacobi(k / 2 + 2, params.alpha, 0.0);
    let radial: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(k as i32)).sum();
    let ln_sphere = ln_gamma(n as f64) + m.ln_factorial() - ln_gamma(k as f64 + 1.0);
    let sphere = match m.exponents.as_slice() {
        [_] => 1.0,
        [a, b] => crate::quadrature::beta_fn(*a as f64 + 1.0, *b as f64 + 1.0),
        _ => ln_sphere.exp(),
    };
    n as f64 * params.c_alpha * radial * sphere
}

/// √(∫ |zᵐ|² dν_α) by the given rule.
pub fn monomial_norm(params: &SpaceParams, rule: &QuadratureRule, m: &MultiIndex) -> Result<f64> {
    if m.exponents.len() != params.n {
        return Err(Error::DimensionMismatch {
            expected: params.n,
            found: m.exponents.len(),
        });
    }
    let need = 2 * m.total_degree as usize;
    if rule.declared_exactness < need {
        return Err(Error::Precision(format!(
            "rule exact to degree {} but |z^m|^2 has degree {need}",
            rule.declared_exactness
        )));
    }
    // |zᵐ|² is angle-free, so each angular block contributes its radial weight.
    let mut acc = ComplexSum::default();
    for rn in &rule.radial {
        let t = rn.moduli_sqr(params.n);
        let v: f64 = m
            .exponents
            .iter()
            .zip(&t)
            .map(|(&k, &t)| t.powi(k as i32))
            .product();
        acc.add((rn.weight * v).into());
    }
    Ok(acc.value().re.sqrt())
}

/// Ordered basis (multi-index, channel) with monomial norms.
///
/// Position of (multi-index i, channel c) is `i * channels + c`; channels are
/// 0-based here. Ordering is by total degree, exponents, then channel, so every
/// degree-≤k block is a prefix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BasisTable {
    pub params: SpaceParams,
    pub max_degree: u32,
    pub channels: usize,
    pub indices: Vec<MultiIndex>,
    pub norms: Vec<f64>,
}

/// Rule that is exact for every basis product |zᵐ|², |m| ≤ D.
pub fn rule_for_degree(params: &SpaceParams, max_degree: u32) -> Result<QuadratureRule> {
    let d = max_degree as usize;
    build_rule(params, d / 2 + 2, 2 * d + 2)
}

pub fn enumerate_basis(
    params: &SpaceParams,
    max_degree: u32,
    channels: usize,
    rule: &QuadratureRule,
) -> Result<BasisTable> {
    if channels == 0 {
        return Err(Error::invalid("channel dimension must be at least 1"));
    }
    if rule.params != *params {
        return Err(Error::invalid("rule was built for different space parameters"));
    }
    let indices = multi_indices(params.n, max_degree);
    let norms = indices
        .par_iter()
        .map(|m| {
            let q = monomial_norm(params, rule, m)?;
            let oracle = radial_oracle_norm_sqr(params, m).sqrt();
            if ((q - oracle) / oracle).abs() > 1e-10 {
                return Err(Error::Precision(format!(
                    "norm of z^{:?}: quadrature {q} disagrees with radial oracle {oracle}",
                    m.exponents
                )));
            }
            Ok(q)
        })
        .collect::<Result<Vec<f64>>>()?;
    let table = BasisTable {
        params: *params,
        max_degree,
        channels,
        indices,
        norms,
    };
    table.shadow_check_kernel_coefficients()?;
    Ok(table)
}

impl BasisTable {
    /// Table with its own adequate rule.
    pub fn build(params: &SpaceParams, max_degree: u32, channels: usize) -> Result<Self> {
        let rule = rule_for_degree(params, max_degree)?;
        enumerate_basis(params, max_degree, channels, &rule)
    }

    pub fn len(&self) -> usize {
        self.indices.len() * self.channels
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn scalar_len(&self) -> usize {
        self.indices.len()
    }

    pub fn position(&self, index: usize, channel: usize) -> usize {
        index * self.channels + channel
    }

    /// (multi-index position, channel) of a basis position.
    pub fn entry(&self, pos: usize) -> (usize, usize) {
        (pos / self.channels, pos % self.channels)
    }

    /// Number of leading positions with total degree ≤ `degree`.
    pub fn block_len(&self, degree: u32) -> usize {
        self.indices
            .iter()
            .take_while(|m| m.total_degree <= degree)
            .count()
            * self.channels
    }

    /// Same basis with a different number of channels.
    pub fn with_channels(&self, channels: usize) -> Self {
        BasisTable {
            channels,
            ..self.clone()
        }
    }

    /// Normalized monomials zᵐ/‖zᵐ‖ for every multi-index, written into `out`.
    pub fn eval_monomials(&self, z: &[Complex64], out: &mut Vec<Complex64>) {
        let n = self.params.n;
        let dmax = self.max_degree as usize;
        let mut powers: SmallVec<[Vec<Complex64>; 2]> = SmallVec::new();
        for c in z.iter().take(n) {
            let mut p = Vec::with_capacity(dmax + 1);
            let mut acc = Complex64::new(1.0, 0.0);
            for _ in 0..=dmax {
                p.push(acc);
                acc *= c;
            }
            powers.push(p);
        }
        out.clear();
        for (m, norm) in self.indices.iter().zip(&self.norms) {
            let mut v = Complex64::new(1.0, 0.0);
            for (i, &k) in m.exponents.iter().enumerate() {
                v *= powers[i][k as usize];
            }
            out.push(v / norm);
        }
    }

    /// Value at `z` of the function with coefficient vector `f`, as a ℂᵈ vector.
    pub fn eval_function(&self, f: &DVector<Complex64>, z: &[Complex64]) -> DVector<Complex64> {
        let mut mono = Vec::new();
        self.eval_monomials(z, &mut mono);
        let mut out = DVector::zeros(self.channels);
        for (i, p) in mono.iter().enumerate() {
            for c in 0..self.channels {
                out[c] += f[self.position(i, c)] * p;
            }
        }
        out
    }

    /// Gradient ∂f/∂zᵢ at `z`: an n × d matrix (row i = ∂/∂zᵢ, column = channel).
    pub fn gradient(&self, f: &DVector<Complex64>, z: &[Complex64]) -> DMatrix<Complex64> {
        let n = self.params.n;
        let mut g = DMatrix::zeros(n, self.channels);
        for (idx, (m, norm)) in self.indices.iter().zip(&self.norms).enumerate() {
            for i in 0..n {
                let k = m.exponents[i];
                if k == 0 {
                    continue;
                }
                let mut v = Complex64::new(k as f64 / norm, 0.0);
                for (l, &e) in m.exponents.iter().enumerate() {
                    let e = if l == i { e - 1 } else { e };
                    v *= z[l].powu(e);
                }
                for c in 0..self.channels {
                    g[(i, c)] += f[self.position(idx, c)] * v;
                }
            }
        }
        g
    }

    /// Coefficients of the normalized kernel k_z e in this basis:
    /// (1−|z|²)^{λ/2}·conj(z)ᵐ/‖zᵐ‖·e_j, from the Taylor series of (1−⟨w,z⟩)^{−λ}.
    pub fn kernel_coefficients(&self, z: &Point, e: &DVector<Complex64>) -> Result<DVector<Complex64>> {
        self.params.check_point(z)?;
        if e.len() != self.channels {
            return Err(Error::DimensionMismatch {
                expected: self.channels,
                found: e.len(),
            });
        }
        let lambda = self.params.kernel_exponent();
        let scale = (1.0 - z.norm_sqr()).powf(lambda / 2.0);
        let zc: SmallVec<[Complex64; 2]> = z.coords().iter().map(|c| c.conj()).collect();
        let mut mono = Vec::new();
        self.eval_monomials(&zc, &mut mono);
        let mut out = DVector::zeros(self.len());
        for (i, p) in mono.iter().enumerate() {
            let coef = p * scale;
            for c in 0..self.channels {
                out[self.position(i, c)] = coef * e[c];
            }
        }
        Ok(out)
    }

    /// Compares the closed-form kernel coefficients with quadrature inner
    /// products at a fixed interior point.
    fn shadow_check_kernel_coefficients(&self) -> Result<()> {
        let n = self.params.n;
        let z = if n == 1 {
            Point::new([Complex64::new(0.15, 0.1)])?
        } else {
            Point::new([Complex64::new(0.12, 0.05), Complex64::new(-0.04, 0.1)])?
        };
        let d = self.max_degree as usize;
        let rule = build_rule(&self.params, d / 2 + 4, 2 * d + 24)?;
        let scalar = self.with_channels(1);
        let closed = scalar.kernel_coefficients(&z, &DVector::from_element(1, Complex64::new(1.0, 0.0)))?;
        let lambda = self.params.kernel_exponent();
        let scale = (1.0 - z.norm_sqr()).powf(lambda / 2.0);
        for (i, m) in self.indices.iter().enumerate() {
            let norm = self.norms[i];
            let q = integrate(&rule, |w| {
                crate::geometry::kernel_raw(lambda, w.coords(), z.coords())
                    * scale
                    * m.eval(w.coords()).conj()
                    / norm
            });
            if (q - closed[i]).norm() > 1e-8 {
                return Err(Error::Precision(format!(
                    "kernel coefficient of z^{:?}: closed form {} vs quadrature {}",
                    m.exponents, closed[i], q
                )));
            }
        }
        Ok(())
    }
}

/// Matrix of U_z f = (f∘φ_z)·k_z in the table, entries ⟨U_z φ_i, φ_j⟩ at (row j, column i).
///
/// U_z acts identically on every channel, so the scalar matrix is computed once
/// and repeated on the channel diagonal. Only the degree-≤D/2 block is reliable.
pub fn uz_matrix(table: &Arc<BasisTable>, rule: &QuadratureRule, z: &Point) -> Result<TruncatedOperator> {
    let params = &table.params;
    params.check_point(z)?;
    let map = MobiusMap::new(z);
    let lambda = params.kernel_exponent();
    let kscale = (1.0 - z.norm_sqr()).powf(lambda / 2.0);
    let m = table.scalar_len();
    let scalar = crate::toeplitz::accumulate_nodes(rule, m * m, |w, weight, acc| {
        let u = map.apply_coords(w.coords());
        let k = crate::geometry::kernel_raw(lambda, w.coords(), z.coords()) * kscale * weight;
        let mut pu = Vec::with_capacity(m);
        let mut pw = Vec::with_capacity(m);
        table.eval_monomials(&u, &mut pu);
        table.eval_monomials(w.coords(), &mut pw);
        for i in 0..m {
            let a = pu[i] * k;
            for j in 0..m {
                acc[j + m * i] += a * pw[j].conj();
            }
        }
    });
    let scalar = DMatrix::from_vec(m, m, scalar);
    let full = crate::toeplitz::expand_channels(&scalar, table.channels);
    let mut op = TruncatedOperator::new(table.clone(), full, format!("U_z at {:?}", z.coords()))?;
    op.valid_degree = table.max_degree / 2;
    Ok(op)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn enumeration_counts_and_order() {
        let p1 = SpaceParams::new(1, 0.0).unwrap();
        let t = BasisTable::build(&p1, 3, 2).unwrap();
        assert_eq!(t.len(), 8);
        let p2 = SpaceParams::new(2, 0.0).unwrap();
        let t2 = BasisTable::build(&p2, 2, 1).unwrap();
        assert_eq!(t2.len(), 6);
        let exps: Vec<Vec<u32>> = t2.indices.iter().map(|m| m.exponents.to_vec()).collect();
        assert_eq!(
            exps,
            vec![vec![0, 0], vec![0, 1], vec![1, 0], vec![0, 2], vec![1, 1], vec![2, 0]]
        );
        assert_eq!(t2.block_len(1), 3);
    }

    #[test]
    fn known_norms() {
        let p = SpaceParams::new(1, 0.0).unwrap();
        let rule = rule_for_degree(&p, 4).unwrap();
        let n0 = monomial_norm(&p, &rule, &MultiIndex::new(&[0])).unwrap();
        let n1 = monomial_norm(&p, &rule, &MultiIndex::new(&[1])).unwrap();
        let n2 = monomial_norm(&p, &rule, &MultiIndex::new(&[2])).unwrap();
        assert!((n0 - 1.0).abs() < 1e-14);
        assert!((n1 - 0.5f64.sqrt()).abs() < 1e-14);
        assert!((n2 - (1.0f64 / 3.0).sqrt()).abs() < 1e-14);
    }

    #[test]
    fn coarse_rule_is_a_precision_error() {
        let p = SpaceParams::new(1, 0.0).unwrap();
        let rule = build_rule(&p, 2, 3).unwrap();
        assert!(matches!(
            monomial_norm(&p, &rule, &MultiIndex::new(&[4])),
            Err(Error::Precision(_))
        ));
    }

    #[test]
    fn kernel_coefficients_at_origin() {
        let p = SpaceParams::new(1, 1.0).unwrap();
        let t = BasisTable::build(&p, 5, 2).unwrap();
        let e = DVector::from_vec(vec![Complex64::new(0.6, 0.0), Complex64::new(0.0, 0.8)]);
        let c = t.kernel_coefficients(&Point::origin(1), &e).unwrap();
        assert!((c[0] - e[0]).norm() < 1e-15);
        assert!((c[1] - e[1]).norm() < 1e-15);
        assert!(c.iter().skip(2).all(|v| v.norm() == 0.0));
    }

    #[test]
    fn uz_at_origin_is_parity() {
        let p = SpaceParams::new(1, 0.0).unwrap();
        let t = Arc::new(BasisTable::build(&p, 6, 1).unwrap());
        let rule = build_rule(&p, 8, 20).unwrap();
        let u = uz_matrix(&t, &rule, &Point::origin(1)).unwrap();
        for i in 0..t.len() {
            for j in 0..t.len() {
                let want = if i == j {
                    if i % 2 == 0 { 1.0 } else { -1.0 }
                } else {
                    0.0
                };
                assert!((u.matrix[(j, i)] - Complex64::new(want, 0.0)).norm() < 1e-12);
            }
        }
    }
}
