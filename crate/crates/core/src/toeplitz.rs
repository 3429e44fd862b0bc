//! Truncated Toeplitz matrices and the operations on them.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::basis::{uz_matrix, BasisTable};
use crate::error::{Error, Result};
use crate::geometry::{normalized_kernel_sqr_raw, MobiusMap, Point};
use crate::quadrature::{cached_rule, ComplexSum, QuadratureRule, RulePolicy};
use crate::symbols::Symbol;

/// Matrix of an operator in a [`BasisTable`]; entry (row j, column i) is ⟨S φ_i, φ_j⟩.
#[derive(Debug, Clone)]
pub struct TruncatedOperator {
    pub table: Arc<BasisTable>,
    pub matrix: DMatrix<Complex64>,
    pub provenance: String,
    /// Total degree up to which the matrix is trusted (D, or D/2 after conjugation).
    pub valid_degree: u32,
    /// Precision warnings raised while building the matrix.
    pub flags: Vec<String>,
}

/// Descriptive metadata written next to a stored operator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OperatorMeta {
    pub n: usize,
    pub alpha: f64,
    pub max_degree: u32,
    pub channels: usize,
    pub size: usize,
    pub valid_degree: u32,
    pub provenance: String,
    pub flags: Vec<String>,
}

impl TruncatedOperator {
    pub fn new(table: Arc<BasisTable>, matrix: DMatrix<Complex64>, provenance: impl Into<String>) -> Result<Self> {
        let n = table.len();
        if matrix.nrows() != n || matrix.ncols() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: matrix.nrows().max(matrix.ncols()),
            });
        }
        Ok(TruncatedOperator {
            valid_degree: table.max_degree,
            table,
            matrix,
            provenance: provenance.into(),
            flags: Vec::new(),
        })
    }

    pub fn identity(table: Arc<BasisTable>) -> Self {
        let n = table.len();
        TruncatedOperator::new(table, DMatrix::identity(n, n), "identity").unwrap()
    }

    pub fn zero(table: Arc<BasisTable>) -> Self {
        let n = table.len();
        TruncatedOperator::new(table, DMatrix::zeros(n, n), "zero").unwrap()
    }

    pub fn size(&self) -> usize {
        self.matrix.nrows()
    }

    /// Largest singular value.
    pub fn opnorm(&self) -> f64 {
        crate::norms::opnorm_2to2(&self.matrix)
    }

    /// Singular values in decreasing order.
    pub fn singular_values(&self) -> Vec<f64> {
        let mut s: Vec<f64> = self.matrix.clone().svd(false, false).singular_values.iter().copied().collect();
        s.sort_by(|a, b| b.total_cmp(a));
        s
    }

    /// Scalar M × M block acting from channel `col` into channel `row` (0-based).
    pub fn channel_block(&self, row: usize, col: usize) -> DMatrix<Complex64> {
        let m = self.table.scalar_len();
        let d = self.table.channels;
        DMatrix::from_fn(m, m, |j, i| self.matrix[(j * d + row, i * d + col)])
    }

    /// Leading block of positions with total degree ≤ `degree`.
    pub fn leading_block(&self, degree: u32) -> DMatrix<Complex64> {
        let k = self.table.block_len(degree);
        self.matrix.view((0, 0), (k, k)).into_owned()
    }

    pub fn meta(&self) -> OperatorMeta {
        OperatorMeta {
            n: self.table.params.n,
            alpha: self.table.params.alpha,
            max_degree: self.table.max_degree,
            channels: self.table.channels,
            size: self.size(),
            valid_degree: self.valid_degree,
            provenance: self.provenance.clone(),
            flags: self.flags.clone(),
        }
    }
}

/// Repeats a scalar matrix on the channel diagonal.
pub fn expand_channels(scalar: &DMatrix<Complex64>, d: usize) -> DMatrix<Complex64> {
    let m = scalar.nrows();
    let mut out = DMatrix::zeros(m * d, m * d);
    for i in 0..m {
        for j in 0..m {
            for c in 0..d {
                out[(j * d + c, i * d + c)] = scalar[(j, i)];
            }
        }
    }
    out
}

const NODE_CHUNK: usize = 256;
const CHUNK_GROUP: usize = 64;

/// Σ over nodes of `f(node, weight, acc)` into a vector of length `len`.
///
/// Nodes are cut into fixed chunks summed in parallel; the chunk partials are
/// merged in node order with compensated sums, so the result is independent of
/// the thread count.
pub fn accumulate_nodes<F>(rule: &QuadratureRule, len: usize, f: F) -> Vec<Complex64>
where
    F: Fn(&Point, f64, &mut [Complex64]) + Sync,
{
    let mut total = vec![ComplexSum::default(); len];
    let nodes = &rule.nodes;
    let weights = &rule.weights;
    for group_start in (0..nodes.len()).step_by(NODE_CHUNK * CHUNK_GROUP) {
        let group_end = (group_start + NODE_CHUNK * CHUNK_GROUP).min(nodes.len());
        let partials: Vec<Vec<Complex64>> = nodes[group_start..group_end]
            .par_chunks(NODE_CHUNK)
            .zip(weights[group_start..group_end].par_chunks(NODE_CHUNK))
            .map(|(ns, ws)| {
                let mut acc = vec![Complex64::new(0.0, 0.0); len];
                for (z, w) in ns.iter().zip(ws) {
                    f(z, *w, &mut acc);
                }
                acc
            })
            .collect();
        for p in partials {
            for (t, v) in total.iter_mut().zip(p) {
                t.add(v);
            }
        }
    }
    total.into_iter().map(|s| s.value()).collect()
}

/// How matrix entries are integrated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AssemblyPath {
    /// Radial symbols: angular orthogonality makes the matrix block diagonal in
    /// the multi-index, leaving one radial sum per entry.
    Auto,
    /// Full node-by-node evaluation of ⟨b(w)φ_i(w), φ_j(w)⟩.
    Direct,
}

fn pairs_of(pattern: &DMatrix<bool>) -> Vec<(usize, usize)> {
    let d = pattern.nrows();
    let mut out = Vec::new();
    for r in 0..d {
        for c in 0..d {
            if pattern[(r, c)] {
                out.push((r, c));
            }
        }
    }
    out
}

/// Assembles T_b on the table with the given rule.
///
/// Symbols of the form c∘φ_z are integrated after the change of variables
/// u = φ_z(w): ∫ c(u)·φ_i(φ_z u)·conj(φ_j(φ_z u))·|k_z(u)|² dν_α(u), so jumps of c
/// stay on centered spheres where the rule has panel breaks.
pub fn assemble(b: &Symbol, table: &Arc<BasisTable>, rule: &QuadratureRule) -> Result<TruncatedOperator> {
    assemble_with(b, table, rule, AssemblyPath::Auto)
}

pub fn assemble_with(
    b: &Symbol,
    table: &Arc<BasisTable>,
    rule: &QuadratureRule,
    path: AssemblyPath,
) -> Result<TruncatedOperator> {
    let params = &table.params;
    b.validate(params.n)?;
    if b.channels() != table.channels {
        return Err(Error::DimensionMismatch {
            expected: table.channels,
            found: b.channels(),
        });
    }
    if rule.params != *params {
        return Err(Error::invalid("rule was built for different space parameters"));
    }
    let mut flags = Vec::new();
    let needed = 2 * table.max_degree as usize + b.degree().unwrap_or(0);
    if rule.declared_exactness < needed {
        flags.push(format!(
            "rule exactness {} below integrand degree {needed}",
            rule.declared_exactness
        ));
    }
    let matrix = match (path, b.mobius_split()) {
        (_, Some((base, z))) => assemble_pullback(&base, &z, table, rule),
        (AssemblyPath::Auto, None) if b.is_radial() => assemble_radial(b, table, rule),
        _ => assemble_direct(b, table, rule),
    };
    let mut op = TruncatedOperator::new(table.clone(), matrix, format!("T_b for {}", b.describe()))?;
    op.flags = flags;
    Ok(op)
}

fn scatter(
    table: &BasisTable,
    pairs: &[(usize, usize)],
    acc: &[Complex64],
) -> DMatrix<Complex64> {
    let m = table.scalar_len();
    let d = table.channels;
    let mut out = DMatrix::zeros(m * d, m * d);
    for (q, &(r, c)) in pairs.iter().enumerate() {
        let base = q * m * m;
        for i in 0..m {
            for j in 0..m {
                out[(j * d + r, i * d + c)] = acc[base + i * m + j];
            }
        }
    }
    out
}

fn assemble_direct(b: &Symbol, table: &BasisTable, rule: &QuadratureRule) -> DMatrix<Complex64> {
    let pairs = pairs_of(&b.pattern());
    let m = table.scalar_len();
    let acc = accumulate_nodes(rule, pairs.len() * m * m, |w, weight, acc| {
        let bw = b.eval(w);
        let mut p = Vec::with_capacity(m);
        table.eval_monomials(w.coords(), &mut p);
        add_products(&pairs, &bw, weight, &p, &p, m, acc);
    });
    scatter(table, &pairs, &acc)
}

fn add_products(
    pairs: &[(usize, usize)],
    bw: &DMatrix<Complex64>,
    weight: f64,
    p_in: &[Complex64],
    p_out: &[Complex64],
    m: usize,
    acc: &mut [Complex64],
) {
    for (q, &(r, c)) in pairs.iter().enumerate() {
        let v = bw[(r, c)] * weight;
        if v.re == 0.0 && v.im == 0.0 {
            continue;
        }
        let block = &mut acc[q * m * m..(q + 1) * m * m];
        for i in 0..m {
            let a = v * p_in[i];
            let row = &mut block[i * m..(i + 1) * m];
            for (slot, pj) in row.iter_mut().zip(p_out) {
                *slot += a * pj.conj();
            }
        }
    }
}

fn assemble_pullback(base: &Symbol, z: &Point, table: &BasisTable, rule: &QuadratureRule) -> DMatrix<Complex64> {
    let pairs = pairs_of(&base.pattern());
    let m = table.scalar_len();
    let map = MobiusMap::new(z);
    let lambda = table.params.kernel_exponent();
    let acc = accumulate_nodes(rule, pairs.len() * m * m, |u, weight, acc| {
        let bu = base.eval(u);
        let w = map.apply_coords(u.coords());
        let jac = normalized_kernel_sqr_raw(lambda, u.coords(), z.coords());
        let mut p = Vec::with_capacity(m);
        table.eval_monomials(&w, &mut p);
        add_products(&pairs, &bu, weight * jac, &p, &p, m, acc);
    });
    scatter(table, &pairs, &acc)
}

fn assemble_radial(b: &Symbol, table: &BasisTable, rule: &QuadratureRule) -> DMatrix<Complex64> {
    let n = table.params.n;
    let m = table.scalar_len();
    let d = table.channels;
    let pairs = pairs_of(&b.pattern());
    let mut sums = vec![ComplexSum::default(); pairs.len() * m];
    for rn in &rule.radial {
        let t = rn.moduli_sqr(n);
        let rep: Vec<Complex64> = t[..n].iter().map(|x| Complex64::new(x.sqrt(), 0.0)).collect();
        let bw = b.eval_coords(&rep);
        for (i, (mi, norm)) in table.indices.iter().zip(&table.norms).enumerate() {
            let mono: f64 = mi
                .exponents
                .iter()
                .zip(&t)
                .map(|(&k, &x)| x.powi(k as i32))
                .product::<f64>()
                / (norm * norm);
            for (q, &(r, c)) in pairs.iter().enumerate() {
                sums[q * m + i].add(bw[(r, c)] * (rn.weight * mono));
            }
        }
    }
    let mut out = DMatrix::zeros(m * d, m * d);
    for (q, &(r, c)) in pairs.iter().enumerate() {
        for i in 0..m {
            out[(i * d + r, i * d + c)] = sums[q * m + i].value();
        }
    }
    out
}

/// Coefficient vectors of T_b(e_j) for the constant functions e_j (0-based
/// channels), i.e. the degree-0 columns of the matrix, without assembling the rest.
pub fn constant_images(
    b: &Symbol,
    table: &BasisTable,
    rule: &QuadratureRule,
    channels: &[usize],
) -> Result<Vec<DVector<Complex64>>> {
    b.validate(table.params.n)?;
    let d = table.channels;
    if b.channels() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: b.channels(),
        });
    }
    if let Some(&j) = channels.iter().find(|&&j| j >= d) {
        return Err(Error::invalid(format!("channel {} out of range 1..={d}", j + 1)));
    }
    let m = table.scalar_len();
    let one = 1.0 / table.norms[0];
    let lambda = table.params.kernel_exponent();
    let split = b.mobius_split();
    let len = channels.len() * d * m;
    let acc = accumulate_nodes(rule, len, |u, weight, acc| {
        let (bw, w, weight) = match &split {
            Some((base, z)) => {
                let w = MobiusMap::new(z).apply_coords(u.coords());
                let jac = normalized_kernel_sqr_raw(lambda, u.coords(), z.coords());
                (base.eval(u), w, weight * jac)
            }
            None => (b.eval(u), u.coords().iter().copied().collect(), weight),
        };
        let mut p = Vec::with_capacity(m);
        table.eval_monomials(&w, &mut p);
        for (q, &j) in channels.iter().enumerate() {
            for i in 0..d {
                let v = bw[(i, j)] * (weight * one);
                if v.re == 0.0 && v.im == 0.0 {
                    continue;
                }
                let slot = &mut acc[(q * d + i) * m..(q * d + i + 1) * m];
                for (s, pm) in slot.iter_mut().zip(&p) {
                    *s += v * pm.conj();
                }
            }
        }
    });
    Ok(channels
        .iter()
        .enumerate()
        .map(|(q, _)| {
            let mut out = DVector::zeros(table.len());
            for i in 0..d {
                for mi in 0..m {
                    out[table.position(mi, i)] = acc[(q * d + i) * m + mi];
                }
            }
            out
        })
        .collect())
}

/// Rule adequate for assembling `b` on `table` under `policy`: panels at the
/// symbol's jump radii, and for c∘φ_z the resolution the policy asks for at |z|.
pub fn assembly_rule(b: &Symbol, table: &BasisTable, policy: &RulePolicy) -> Result<Arc<QuadratureRule>> {
    let dmax = table.max_degree as usize;
    let (breaks, z_norm, extra) = match b.mobius_split() {
        Some((base, z)) => (base.radial_breaks(), z.norm(), base.degree().unwrap_or(0)),
        None => (b.radial_breaks(), 0.0, b.degree().unwrap_or(0)),
    };
    let degree = 2 * dmax + extra;
    let radial = if z_norm > 0.0 {
        policy.radial_points(z_norm, degree)
    } else {
        degree / 2 + 8
    };
    let angular = if z_norm > 0.0 {
        policy.angular_points(z_norm, degree + 8)
    } else {
        degree + 8
    };
    cached_rule(&table.params, radial, angular, &breaks)
}

/// [`assemble`] with [`assembly_rule`] under the default policy.
pub fn assemble_auto(b: &Symbol, table: &Arc<BasisTable>) -> Result<TruncatedOperator> {
    let rule = assembly_rule(b, table, &RulePolicy::default())?;
    assemble(b, table, &rule)
}

/// T_b applied to k_z e.
#[derive(Debug, Clone)]
pub struct KernelImage {
    pub coefficients: DVector<Complex64>,
    pub norm: f64,
    /// Set when |z| > 0.9 with D < 60: the kernel expansion is visibly truncated.
    pub truncation_warning: bool,
}

pub fn apply_to_kernel(s: &TruncatedOperator, z: &Point, e: &DVector<Complex64>) -> Result<KernelImage> {
    let k = s.table.kernel_coefficients(z, e)?;
    let coefficients = &s.matrix * k;
    let norm = coefficients.norm();
    Ok(KernelImage {
        coefficients,
        norm,
        truncation_warning: z.norm() > 0.9 && s.table.max_degree < 60,
    })
}

/// S^z = U_z S U_z, trusted on the degree-≤D/2 block.
pub fn conjugate(s: &TruncatedOperator, z: &Point) -> Result<TruncatedOperator> {
    conjugate_with(s, z, &RulePolicy::default())
}

pub fn conjugate_with(s: &TruncatedOperator, z: &Point, policy: &RulePolicy) -> Result<TruncatedOperator> {
    let table = &s.table;
    let degree = 2 * table.max_degree as usize;
    let rule = policy.rule_for(&table.params, z.norm(), degree, &[])?;
    let u = uz_matrix(table, &rule, z)?;
    let matrix = &u.matrix * &s.matrix * &u.matrix;
    let mut op = TruncatedOperator::new(table.clone(), matrix, format!("conjugate of {}", s.provenance))?;
    op.valid_degree = (table.max_degree / 2).min(s.valid_degree);
    op.flags = s.flags.clone();
    Ok(op)
}

/// (M_{I^(d0)}, M_{I_(d0)}): projections onto channels 1..d0 and d0+1..d.
pub fn truncation_matrices(table: &Arc<BasisTable>, d0: usize) -> Result<(TruncatedOperator, TruncatedOperator)> {
    let d = table.channels;
    if d0 > d {
        return Err(Error::invalid(format!("truncation index {d0} exceeds {d} channels")));
    }
    let n = table.len();
    let head = DMatrix::from_fn(n, n, |r, c| {
        if r == c && table.entry(r).1 < d0 {
            Complex64::new(1.0, 0.0)
        } else {
            Complex64::new(0.0, 0.0)
        }
    });
    let tail = DMatrix::identity(n, n) - &head;
    Ok((
        TruncatedOperator::new(table.clone(), head, format!("channels 1..={d0}"))?,
        TruncatedOperator::new(table.clone(), tail, format!("channels > {d0}"))?,
    ))
}

fn same_table(a: &TruncatedOperator, b: &TruncatedOperator) -> Result<()> {
    if Arc::ptr_eq(&a.table, &b.table) || *a.table == *b.table {
        Ok(())
    } else {
        Err(Error::invalid("operators live on different basis tables"))
    }
}

/// S∘T.
pub fn compose(s: &TruncatedOperator, t: &TruncatedOperator) -> Result<TruncatedOperator> {
    same_table(s, t)?;
    let mut op = TruncatedOperator::new(
        s.table.clone(),
        &s.matrix * &t.matrix,
        format!("({}) * ({})", s.provenance, t.provenance),
    )?;
    op.valid_degree = s.valid_degree.min(t.valid_degree);
    op.flags = s.flags.iter().chain(&t.flags).cloned().collect();
    Ok(op)
}

pub fn adjoint(s: &TruncatedOperator) -> TruncatedOperator {
    TruncatedOperator {
        table: s.table.clone(),
        matrix: s.matrix.adjoint(),
        provenance: format!("adjoint of {}", s.provenance),
        valid_degree: s.valid_degree,
        flags: s.flags.clone(),
    }
}

pub fn add(s: &TruncatedOperator, t: &TruncatedOperator) -> Result<TruncatedOperator> {
    same_table(s, t)?;
    TruncatedOperator::new(
        s.table.clone(),
        &s.matrix + &t.matrix,
        format!("({}) + ({})", s.provenance, t.provenance),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::SpaceParams;
    use crate::quadrature::{build_rule, build_rule_with_breaks};
    use crate::symbols::ScalarFn;

    fn table(d: usize, deg: u32) -> Arc<BasisTable> {
        let p = SpaceParams::new(1, 0.0).unwrap();
        Arc::new(BasisTable::build(&p, deg, d).unwrap())
    }

    #[test]
    fn identity_symbol_gives_identity() {
        let t = table(2, 6);
        let rule = build_rule(&t.params, 6, 16).unwrap();
        for path in [AssemblyPath::Auto, AssemblyPath::Direct] {
            let op = assemble_with(&Symbol::identity(2), &t, &rule, path).unwrap();
            let err = crate::norms::max_abs(&(&op.matrix - DMatrix::identity(t.len(), t.len())));
            assert!(err < 1e-12, "{path:?}: {err}");
        }
    }

    #[test]
    fn radial_fast_path_matches_direct() {
        let t = table(2, 8);
        let rule = build_rule_with_breaks(&t.params, 12, 24, &[0.5]).unwrap();
        let b = Symbol::DiagonalGeometric {
            tau: ScalarFn::indicator(0.5),
            d: 2,
        };
        let fast = assemble(&b, &t, &rule).unwrap();
        let slow = assemble_with(&b, &t, &rule, AssemblyPath::Direct).unwrap();
        assert!(crate::norms::max_abs(&(&fast.matrix - &slow.matrix)) < 1e-12);
    }

    #[test]
    fn indicator_eigenvalues() {
        let t = table(1, 10);
        let b = Symbol::Scalar {
            tau: ScalarFn::indicator(0.5),
        };
        let op = assemble_auto(&b, &t).unwrap();
        for m in 0..=10 {
            let want = 0.25f64.powi(m + 1);
            assert!((op.matrix[(m as usize, m as usize)].re - want).abs() < 1e-14);
        }
    }

    #[test]
    fn truncations_sum_to_identity() {
        let t = table(3, 3);
        let (h, l) = truncation_matrices(&t, 2).unwrap();
        assert_eq!(h.matrix + l.matrix, DMatrix::identity(t.len(), t.len()));
        let (h, l) = truncation_matrices(&t, 3).unwrap();
        assert_eq!(h.matrix, DMatrix::identity(t.len(), t.len()));
        assert_eq!(l.matrix, DMatrix::zeros(t.len(), t.len()));
        assert!(truncation_matrices(&t, 4).is_err());
    }

    #[test]
    fn compose_checks_tables() {
        let a = TruncatedOperator::identity(table(1, 3));
        let b = TruncatedOperator::identity(table(2, 3));
        assert!(compose(&a, &b).is_err());
        let c = compose(&a, &a).unwrap();
        assert_eq!(c.matrix, a.matrix);
    }

    #[test]
    fn conjugate_at_origin_keeps_diagonal_operators() {
        let t = table(1, 6);
        let b = Symbol::Scalar {
            tau: ScalarFn::indicator(0.7),
        };
        let s = assemble_auto(&b, &t).unwrap();
        let c = conjugate(&s, &Point::origin(1)).unwrap();
        assert!(crate::norms::max_abs(&(&c.matrix - &s.matrix)) < 1e-12);
        assert_eq!(c.valid_degree, 3);
    }
}
