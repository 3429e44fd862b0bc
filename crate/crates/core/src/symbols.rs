//! Matrix-valued symbols b: 𝔹ₙ → ℂ^{d×d} and their truncation, adjoint and lift combinators.
//!
//! Entry (row r, column c) of `eval(w)` is ⟨b(w)e_c, e_r⟩; column c is b(w)e_c.
//! Lift indices and `d0` counts are 1-based as in the usual ℓ² frame {e₁, e₂, …}.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{MobiusMap, Point};

/// Scalar functions on the ball.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScalarFn {
    Constant {
        value: Complex64,
    },
    /// Characteristic function of the open ball of the given radius.
    Indicator {
        radius: f64,
    },
    /// coeff · zᵃ · conj(z)ᵇ.
    Monomial {
        coeff: Complex64,
        holo: Vec<u32>,
        anti: Vec<u32>,
    },
    Sum {
        terms: Vec<ScalarFn>,
    },
    Product {
        factors: Vec<ScalarFn>,
    },
}

impl ScalarFn {
    pub fn constant(v: f64) -> Self {
        ScalarFn::Constant {
            value: Complex64::new(v, 0.0),
        }
    }

    pub fn indicator(radius: f64) -> Self {
        ScalarFn::Indicator { radius }
    }

    pub fn monomial(coeff: Complex64, holo: &[u32], anti: &[u32]) -> Self {
        ScalarFn::Monomial {
            coeff,
            holo: holo.to_vec(),
            anti: anti.to_vec(),
        }
    }

    pub fn times(self, other: ScalarFn) -> Self {
        ScalarFn::Product {
            factors: vec![self, other],
        }
    }

    pub fn eval(&self, w: &[Complex64]) -> Complex64 {
        match self {
            ScalarFn::Constant { value } => *value,
            ScalarFn::Indicator { radius } => {
                let r2: f64 = w.iter().map(|c| c.norm_sqr()).sum();
                if r2 < radius * radius {
                    Complex64::new(1.0, 0.0)
                } else {
                    Complex64::new(0.0, 0.0)
                }
            }
            ScalarFn::Monomial { coeff, holo, anti } => {
                let mut v = *coeff;
                for (c, &k) in w.iter().zip(holo) {
                    v *= c.powu(k);
                }
                for (c, &k) in w.iter().zip(anti) {
                    v *= c.conj().powu(k);
                }
                v
            }
            ScalarFn::Sum { terms } => terms.iter().map(|t| t.eval(w)).sum(),
            ScalarFn::Product { factors } => factors.iter().map(|t| t.eval(w)).product(),
        }
    }

    pub fn conj(&self) -> Self {
        match self {
            ScalarFn::Constant { value } => ScalarFn::Constant { value: value.conj() },
            ScalarFn::Indicator { radius } => ScalarFn::Indicator { radius: *radius },
            ScalarFn::Monomial { coeff, holo, anti } => ScalarFn::Monomial {
                coeff: coeff.conj(),
                holo: anti.clone(),
                anti: holo.clone(),
            },
            ScalarFn::Sum { terms } => ScalarFn::Sum {
                terms: terms.iter().map(ScalarFn::conj).collect(),
            },
            ScalarFn::Product { factors } => ScalarFn::Product {
                factors: factors.iter().map(ScalarFn::conj).collect(),
            },
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            ScalarFn::Constant { value } => value.norm() == 0.0,
            ScalarFn::Indicator { radius } => *radius <= 0.0,
            ScalarFn::Monomial { coeff, .. } => coeff.norm() == 0.0,
            ScalarFn::Sum { terms } => terms.iter().all(ScalarFn::is_zero),
            ScalarFn::Product { factors } => factors.iter().any(ScalarFn::is_zero),
        }
    }

    /// Depends on |w| only.
    pub fn is_radial(&self) -> bool {
        match self {
            ScalarFn::Constant { .. } | ScalarFn::Indicator { .. } => true,
            ScalarFn::Monomial { holo, anti, .. } => {
                holo == anti && (holo.len() <= 1 || holo.iter().all(|&k| k == 0))
            }
            ScalarFn::Sum { terms } => terms.iter().all(ScalarFn::is_radial),
            ScalarFn::Product { factors } => factors.iter().all(ScalarFn::is_radial),
        }
    }

    /// Total polynomial degree in z and z̄ (0 for constants and indicators).
    pub fn degree(&self) -> usize {
        match self {
            ScalarFn::Constant { .. } | ScalarFn::Indicator { .. } => 0,
            ScalarFn::Monomial { holo, anti, .. } => {
                (holo.iter().sum::<u32>() + anti.iter().sum::<u32>()) as usize
            }
            ScalarFn::Sum { terms } => terms.iter().map(ScalarFn::degree).max().unwrap_or(0),
            ScalarFn::Product { factors } => factors.iter().map(ScalarFn::degree).sum(),
        }
    }

    /// Radii of spheres across which the function jumps.
    pub fn breaks(&self, out: &mut Vec<f64>) {
        match self {
            ScalarFn::Indicator { radius } if *radius > 0.0 && *radius < 1.0 => out.push(*radius),
            ScalarFn::Sum { terms } => terms.iter().for_each(|t| t.breaks(out)),
            ScalarFn::Product { factors } => factors.iter().for_each(|t| t.breaks(out)),
            _ => {}
        }
    }

    fn validate(&self, n: usize) -> Result<()> {
        match self {
            ScalarFn::Monomial { holo, anti, .. } => {
                if holo.len() != n || anti.len() != n {
                    return Err(Error::invalid(format!(
                        "monomial exponents must have length {n}"
                    )));
                }
                Ok(())
            }
            ScalarFn::Indicator { radius } if !radius.is_finite() || *radius < 0.0 => {
                Err(Error::invalid(format!("indicator radius {radius} out of range")))
            }
            ScalarFn::Sum { terms } => terms.iter().try_for_each(|t| t.validate(n)),
            ScalarFn::Product { factors } => factors.iter().try_for_each(|t| t.validate(n)),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Symbol {
    /// τ acting on a single channel.
    Scalar { tau: ScalarFn },
    /// τ·I on d channels.
    ScalarTimesIdentity { tau: ScalarFn, d: usize },
    /// b(w)eᵢ = τ(w)·2⁻ⁱ·eᵢ, i = 1..d.
    DiagonalGeometric { tau: ScalarFn, d: usize },
    /// entries[r][c] = ⟨b(w)e_c, e_r⟩.
    DenseMatrix { entries: Vec<Vec<ScalarFn>> },
    /// Constant matrix, rows[r][c] = ⟨b e_c, e_r⟩.
    ConstantMatrix { rows: Vec<Vec<Complex64>> },
    /// Zeroes the action on e₁..e_{d0}.
    TailTruncated { base: Box<Symbol>, d0: usize },
    /// Leading d0 × d0 block.
    CornerTruncated { base: Box<Symbol>, d0: usize },
    /// Pointwise conjugate transpose.
    Adjoint { base: Box<Symbol> },
    /// β in (row k, column j): T g = (T_β g_j)·e_k.
    LiftBkj { beta: ScalarFn, k: usize, j: usize, d: usize },
    /// a¹ in (row j, column j).
    LiftA1j { a1: ScalarFn, j: usize, d: usize },
    /// a² in (row j, column k): T g = (T_{a²} g_k)·e_j.
    LiftA2kj { a2: ScalarFn, k: usize, j: usize, d: usize },
    /// w ↦ base(φ_center(w)).
    MobiusComposed { base: Box<Symbol>, center: Point },
}

fn single_entry(d: usize, row: usize, col: usize, v: Complex64) -> DMatrix<Complex64> {
    let mut m = DMatrix::zeros(d, d);
    m[(row, col)] = v;
    m
}

impl Symbol {
    pub fn identity(d: usize) -> Self {
        Symbol::ScalarTimesIdentity {
            tau: ScalarFn::constant(1.0),
            d,
        }
    }

    pub fn zero(d: usize) -> Self {
        Symbol::ScalarTimesIdentity {
            tau: ScalarFn::constant(0.0),
            d,
        }
    }

    pub fn channels(&self) -> usize {
        match self {
            Symbol::Scalar { .. } => 1,
            Symbol::ScalarTimesIdentity { d, .. }
            | Symbol::DiagonalGeometric { d, .. }
            | Symbol::LiftBkj { d, .. }
            | Symbol::LiftA1j { d, .. }
            | Symbol::LiftA2kj { d, .. } => *d,
            Symbol::DenseMatrix { entries } => entries.len(),
            Symbol::ConstantMatrix { rows } => rows.len(),
            Symbol::TailTruncated { base, .. }
            | Symbol::Adjoint { base }
            | Symbol::MobiusComposed { base, .. } => base.channels(),
            Symbol::CornerTruncated { d0, .. } => *d0,
        }
    }

    /// Checks structural parameters against the ambient dimension n.
    pub fn validate(&self, n: usize) -> Result<()> {
        let lift = |d: usize, idx: &[usize]| -> Result<()> {
            if d == 0 || idx.iter().any(|&i| i == 0 || i > d) {
                return Err(Error::invalid(format!(
                    "lift indices {idx:?} must lie in 1..={d}"
                )));
            }
            Ok(())
        };
        match self {
            Symbol::Scalar { tau } => tau.validate(n),
            Symbol::ScalarTimesIdentity { tau, d } | Symbol::DiagonalGeometric { tau, d } => {
                if *d == 0 {
                    return Err(Error::invalid("channel dimension must be at least 1"));
                }
                tau.validate(n)
            }
            Symbol::DenseMatrix { entries } => {
                let d = entries.len();
                if d == 0 || entries.iter().any(|r| r.len() != d) {
                    return Err(Error::invalid("dense symbol must be a nonempty square grid"));
                }
                entries.iter().flatten().try_for_each(|f| f.validate(n))
            }
            Symbol::ConstantMatrix { rows } => {
                let d = rows.len();
                if d == 0 || rows.iter().any(|r| r.len() != d) {
                    return Err(Error::invalid("constant symbol must be a nonempty square grid"));
                }
                Ok(())
            }
            Symbol::TailTruncated { base, d0 } => {
                base.validate(n)?;
                if *d0 > base.channels() {
                    return Err(Error::invalid(format!(
                        "tail index {d0} exceeds channel dimension {}",
                        base.channels()
                    )));
                }
                Ok(())
            }
            Symbol::CornerTruncated { base, d0 } => {
                base.validate(n)?;
                if *d0 == 0 || *d0 > base.channels() {
                    return Err(Error::invalid(format!(
                        "corner size {d0} must lie in 1..={}",
                        base.channels()
                    )));
                }
                Ok(())
            }
            Symbol::Adjoint { base } => base.validate(n),
            Symbol::LiftBkj { beta, k, j, d } => {
                lift(*d, &[*k, *j])?;
                beta.validate(n)
            }
            Symbol::LiftA1j { a1, j, d } => {
                lift(*d, &[*j])?;
                a1.validate(n)
            }
            Symbol::LiftA2kj { a2, k, j, d } => {
                lift(*d, &[*k, *j])?;
                a2.validate(n)
            }
            Symbol::MobiusComposed { base, center } => {
                if center.dim() != n {
                    return Err(Error::DimensionMismatch {
                        expected: n,
                        found: center.dim(),
                    });
                }
                base.validate(n)
            }
        }
    }

    pub fn eval(&self, w: &Point) -> DMatrix<Complex64> {
        self.eval_coords(w.coords())
    }

    pub fn eval_coords(&self, w: &[Complex64]) -> DMatrix<Complex64> {
        match self {
            Symbol::Scalar { tau } => DMatrix::from_element(1, 1, tau.eval(w)),
            Symbol::ScalarTimesIdentity { tau, d } => {
                DMatrix::from_diagonal_element(*d, *d, tau.eval(w))
            }
            Symbol::DiagonalGeometric { tau, d } => {
                let t = tau.eval(w);
                DMatrix::from_fn(*d, *d, |r, c| {
                    if r == c {
                        t * 0.5f64.powi(r as i32 + 1)
                    } else {
                        Complex64::new(0.0, 0.0)
                    }
                })
            }
            Symbol::DenseMatrix { entries } => {
                let d = entries.len();
                DMatrix::from_fn(d, d, |r, c| entries[r][c].eval(w))
            }
            Symbol::ConstantMatrix { rows } => {
                let d = rows.len();
                DMatrix::from_fn(d, d, |r, c| rows[r][c])
            }
            Symbol::TailTruncated { base, d0 } => {
                let mut m = base.eval_coords(w);
                m.columns_mut(0, *d0).fill(Complex64::new(0.0, 0.0));
                m
            }
            Symbol::CornerTruncated { base, d0 } => {
                base.eval_coords(w).view((0, 0), (*d0, *d0)).into_owned()
            }
            Symbol::Adjoint { base } => base.eval_coords(w).adjoint(),
            Symbol::LiftBkj { beta, k, j, d } => single_entry(*d, k - 1, j - 1, beta.eval(w)),
            Symbol::LiftA1j { a1, j, d } => single_entry(*d, j - 1, j - 1, a1.eval(w)),
            Symbol::LiftA2kj { a2, k, j, d } => single_entry(*d, j - 1, k - 1, a2.eval(w)),
            Symbol::MobiusComposed { base, center } => {
                let u = MobiusMap::new(center).apply_coords(w);
                base.eval_coords(&u)
            }
        }
    }

    /// Entries that can be nonzero somewhere.
    pub fn pattern(&self) -> DMatrix<bool> {
        let d = self.channels();
        let one = |row: usize, col: usize, f: &ScalarFn| {
            DMatrix::from_fn(d, d, |r, c| r == row && c == col && !f.is_zero())
        };
        match self {
            Symbol::Scalar { tau } => DMatrix::from_element(1, 1, !tau.is_zero()),
            Symbol::ScalarTimesIdentity { tau, d } | Symbol::DiagonalGeometric { tau, d } => {
                DMatrix::from_fn(*d, *d, |r, c| r == c && !tau.is_zero())
            }
            Symbol::DenseMatrix { entries } => DMatrix::from_fn(d, d, |r, c| !entries[r][c].is_zero()),
            Symbol::ConstantMatrix { rows } => DMatrix::from_fn(d, d, |r, c| rows[r][c].norm() != 0.0),
            Symbol::TailTruncated { base, d0 } => {
                let mut p = base.pattern();
                p.columns_mut(0, *d0).fill(false);
                p
            }
            Symbol::CornerTruncated { base, d0 } => {
                base.pattern().view((0, 0), (*d0, *d0)).into_owned()
            }
            Symbol::Adjoint { base } => base.pattern().transpose(),
            Symbol::LiftBkj { beta, k, j, .. } => one(k - 1, j - 1, beta),
            Symbol::LiftA1j { a1, j, .. } => one(j - 1, j - 1, a1),
            Symbol::LiftA2kj { a2, k, j, .. } => one(j - 1, k - 1, a2),
            Symbol::MobiusComposed { base, .. } => base.pattern(),
        }
    }

    fn scalars(&self) -> Vec<&ScalarFn> {
        match self {
            Symbol::Scalar { tau }
            | Symbol::ScalarTimesIdentity { tau, .. }
            | Symbol::DiagonalGeometric { tau, .. } => vec![tau],
            Symbol::DenseMatrix { entries } => entries.iter().flatten().collect(),
            Symbol::ConstantMatrix { .. } => vec![],
            Symbol::TailTruncated { base, .. }
            | Symbol::CornerTruncated { base, .. }
            | Symbol::Adjoint { base }
            | Symbol::MobiusComposed { base, .. } => base.scalars(),
            Symbol::LiftBkj { beta, .. } => vec![beta],
            Symbol::LiftA1j { a1, .. } => vec![a1],
            Symbol::LiftA2kj { a2, .. } => vec![a2],
        }
    }

    /// Depends on |w| only.
    pub fn is_radial(&self) -> bool {
        !self.contains_mobius() && self.scalars().iter().all(|f| f.is_radial())
    }

    pub fn contains_mobius(&self) -> bool {
        match self {
            Symbol::MobiusComposed { .. } => true,
            Symbol::TailTruncated { base, .. }
            | Symbol::CornerTruncated { base, .. }
            | Symbol::Adjoint { base } => base.contains_mobius(),
            _ => false,
        }
    }

    /// Polynomial degree of the entries; composition with φ_z is not polynomial.
    pub fn degree(&self) -> Option<usize> {
        if self.contains_mobius() {
            return None;
        }
        Some(self.scalars().iter().map(|f| f.degree()).max().unwrap_or(0))
    }

    /// Jump radii of the entries, sorted; empty for Möbius compositions, whose
    /// jump sets are not centered spheres.
    pub fn radial_breaks(&self) -> Vec<f64> {
        if self.contains_mobius() {
            return Vec::new();
        }
        let mut out = Vec::new();
        for f in self.scalars() {
            f.breaks(&mut out);
        }
        out.sort_by(f64::total_cmp);
        out.dedup();
        out
    }

    /// Whether any entry has a jump discontinuity.
    pub fn has_jumps(&self) -> bool {
        let mut out = Vec::new();
        for f in self.scalars() {
            f.breaks(&mut out);
        }
        !out.is_empty()
    }

    /// Splits b = c∘φ_z with c free of Möbius compositions, pushing truncations
    /// and adjoints inside (they act pointwise, so they commute with composition).
    pub fn mobius_split(&self) -> Option<(Symbol, Point)> {
        match self {
            Symbol::MobiusComposed { base, center } => {
                if base.contains_mobius() {
                    None
                } else {
                    Some(((**base).clone(), center.clone()))
                }
            }
            Symbol::TailTruncated { base, d0 } => base
                .mobius_split()
                .map(|(b, z)| (Symbol::TailTruncated { base: Box::new(b), d0: *d0 }, z)),
            Symbol::CornerTruncated { base, d0 } => base
                .mobius_split()
                .map(|(b, z)| (Symbol::CornerTruncated { base: Box::new(b), d0: *d0 }, z)),
            Symbol::Adjoint { base } => base
                .mobius_split()
                .map(|(b, z)| (Symbol::Adjoint { base: Box::new(b) }, z)),
            _ => None,
        }
    }

    pub fn compose_mobius(&self, center: &Point) -> Symbol {
        Symbol::MobiusComposed {
            base: Box::new(self.clone()),
            center: center.clone(),
        }
    }

    /// The same parametric symbol on `d` channels, for sweeps over d. Kinds
    /// without a natural channel parameter only accept their own d.
    pub fn with_channels(&self, d: usize) -> Result<Symbol> {
        match self {
            Symbol::ScalarTimesIdentity { tau, .. } => Ok(Symbol::ScalarTimesIdentity { tau: tau.clone(), d }),
            Symbol::DiagonalGeometric { tau, .. } => Ok(Symbol::DiagonalGeometric { tau: tau.clone(), d }),
            Symbol::Scalar { tau } if d > 1 => Ok(Symbol::ScalarTimesIdentity { tau: tau.clone(), d }),
            Symbol::TailTruncated { base, d0 } => Ok(Symbol::TailTruncated {
                base: Box::new(base.with_channels(d)?),
                d0: (*d0).min(d),
            }),
            Symbol::Adjoint { base } => Ok(Symbol::Adjoint {
                base: Box::new(base.with_channels(d)?),
            }),
            Symbol::MobiusComposed { base, center } => Ok(Symbol::MobiusComposed {
                base: Box::new(base.with_channels(d)?),
                center: center.clone(),
            }),
            _ if d == self.channels() => Ok(self.clone()),
            _ => Err(Error::invalid(format!(
                "{} has no channel parameter to set to {d}",
                self.describe()
            ))),
        }
    }

    /// Short human-readable description for reports.
    pub fn describe(&self) -> String {
        match self {
            Symbol::Scalar { .. } => "scalar".into(),
            Symbol::ScalarTimesIdentity { d, .. } => format!("scalar_times_identity(d={d})"),
            Symbol::DiagonalGeometric { d, .. } => format!("diagonal_geometric(d={d})"),
            Symbol::DenseMatrix { entries } => format!("dense_matrix(d={})", entries.len()),
            Symbol::ConstantMatrix { rows } => format!("constant_matrix(d={})", rows.len()),
            Symbol::TailTruncated { base, d0 } => format!("tail({}, {d0})", base.describe()),
            Symbol::CornerTruncated { base, d0 } => format!("corner({}, {d0})", base.describe()),
            Symbol::Adjoint { base } => format!("adjoint({})", base.describe()),
            Symbol::LiftBkj { k, j, d, .. } => format!("lift_b(k={k}, j={j}, d={d})"),
            Symbol::LiftA1j { j, d, .. } => format!("lift_a1(j={j}, d={d})"),
            Symbol::LiftA2kj { k, j, d, .. } => format!("lift_a2(k={k}, j={j}, d={d})"),
            Symbol::MobiusComposed { base, .. } => format!("mobius({})", base.describe()),
        }
    }
}

/// b_(d0): columns 1..d0 zeroed.
pub fn tail_truncate(b: &Symbol, d0: usize) -> Result<Symbol> {
    if d0 > b.channels() {
        return Err(Error::invalid(format!(
            "tail index {d0} exceeds channel dimension {}",
            b.channels()
        )));
    }
    Ok(Symbol::TailTruncated {
        base: Box::new(b.clone()),
        d0,
    })
}

/// Leading d0 × d0 block.
pub fn corner_truncate(b: &Symbol, d0: usize) -> Result<Symbol> {
    if d0 == 0 || d0 > b.channels() {
        return Err(Error::invalid(format!(
            "corner size {d0} must lie in 1..={}",
            b.channels()
        )));
    }
    Ok(Symbol::CornerTruncated {
        base: Box::new(b.clone()),
        d0,
    })
}

pub fn adjoint_symbol(b: &Symbol) -> Symbol {
    Symbol::Adjoint {
        base: Box::new(b.clone()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn w() -> Point {
        Point::new([c(0.2, -0.3)]).unwrap()
    }

    fn tau() -> ScalarFn {
        ScalarFn::Sum {
            terms: vec![
                ScalarFn::constant(0.5),
                ScalarFn::monomial(c(0.0, 1.0), &[1], &[0]),
            ],
        }
    }

    #[test]
    fn basic_kinds() {
        let t = tau().eval(w().coords());
        let m = Symbol::ScalarTimesIdentity { tau: tau(), d: 3 }.eval(&w());
        assert_eq!(m, DMatrix::from_diagonal_element(3, 3, t));
        let g = Symbol::DiagonalGeometric { tau: tau(), d: 2 }.eval(&w());
        assert_eq!(g[(0, 0)], t / 2.0);
        assert_eq!(g[(1, 1)], t / 4.0);
        assert_eq!(g[(0, 1)], c(0.0, 0.0));
    }

    #[test]
    fn lift_positions() {
        let b = Symbol::LiftBkj {
            beta: tau(),
            k: 1,
            j: 2,
            d: 3,
        };
        let m = b.eval(&w());
        assert_eq!(m[(0, 1)], tau().eval(w().coords()));
        assert_eq!(m.iter().filter(|v| v.norm() != 0.0).count(), 1);
        let a = adjoint_symbol(&b).eval(&w());
        assert_eq!(a[(1, 0)], tau().eval(w().coords()).conj());
        let a2 = Symbol::LiftA2kj {
            a2: tau(),
            k: 3,
            j: 1,
            d: 3,
        };
        assert!(a2.eval(&w())[(0, 2)].norm() > 0.0);
        assert!(Symbol::LiftA1j { a1: tau(), j: 4, d: 3 }.validate(1).is_err());
    }

    #[test]
    fn truncations() {
        let b = Symbol::DiagonalGeometric { tau: tau(), d: 3 };
        assert_eq!(tail_truncate(&b, 0).unwrap().eval(&w()), b.eval(&w()));
        assert_eq!(
            tail_truncate(&b, 3).unwrap().eval(&w()),
            DMatrix::zeros(3, 3)
        );
        let t1 = tail_truncate(&b, 1).unwrap().eval(&w());
        let t = tau().eval(w().coords());
        assert_eq!(t1, DMatrix::from_diagonal(&nalgebra::dvector![c(0.0, 0.0), t / 4.0, t / 8.0]));
        assert!(tail_truncate(&b, 4).is_err());
        assert!(corner_truncate(&b, 0).is_err());
        let s = Symbol::ScalarTimesIdentity { tau: tau(), d: 5 };
        let cs = corner_truncate(&s, 2).unwrap();
        assert_eq!(cs.channels(), 2);
        assert_eq!(cs.eval(&w()), DMatrix::from_diagonal_element(2, 2, t));
    }

    #[test]
    fn adjoint_involution_and_conj() {
        let b = Symbol::DenseMatrix {
            entries: vec![
                vec![tau(), ScalarFn::monomial(c(1.0, 2.0), &[2], &[1])],
                vec![ScalarFn::indicator(0.5), tau().conj()],
            ],
        };
        let aa = adjoint_symbol(&adjoint_symbol(&b));
        assert_eq!(aa.eval(&w()), b.eval(&w()));
        assert_eq!(adjoint_symbol(&b).eval(&w()), b.eval(&w()).adjoint());
        let f = ScalarFn::monomial(c(1.0, 2.0), &[2], &[1]);
        assert!((f.conj().eval(w().coords()) - f.eval(w().coords()).conj()).norm() < 1e-15);
    }

    #[test]
    fn json_round_trip() {
        let b = Symbol::TailTruncated {
            base: Box::new(Symbol::DiagonalGeometric {
                tau: ScalarFn::indicator(0.5),
                d: 8,
            }),
            d0: 2,
        };
        let s = serde_json::to_string(&b).unwrap();
        let back: Symbol = serde_json::from_str(&s).unwrap();
        assert_eq!(back, b);
        assert_eq!(back.radial_breaks(), vec![0.5]);
        assert!(back.is_radial());
    }

    #[test]
    fn mobius_split_pushes_wrappers_inside() {
        let z = w();
        let b = Symbol::DiagonalGeometric {
            tau: ScalarFn::indicator(0.5),
            d: 3,
        };
        let wrapped = tail_truncate(&b.compose_mobius(&z), 1).unwrap();
        let (inner, center) = wrapped.mobius_split().unwrap();
        assert_eq!(center, z);
        assert_eq!(inner, tail_truncate(&b, 1).unwrap());
        assert!(wrapped.radial_breaks().is_empty());
        assert!(wrapped.has_jumps());
    }
}
