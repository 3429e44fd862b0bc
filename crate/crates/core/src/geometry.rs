//! Points of the unit ball, Möbius involutions and reproducing kernels.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use smallvec::SmallVec;

use crate::error::{Error, Result};

pub type Coords = SmallVec<[Complex64; 2]>;

/// A point of the open unit ball in ℂⁿ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<[f64; 2]>", into = "Vec<[f64; 2]>")]
pub struct Point {
    coords: Coords,
}

impl Point {
    pub fn new(coords: impl IntoIterator<Item = Complex64>) -> Result<Self> {
        let coords: Coords = coords.into_iter().collect();
        if coords.is_empty() {
            return Err(Error::invalid("a point needs at least one coordinate"));
        }
        let norm = norm_sqr(&coords).sqrt();
        if !(norm < 1.0) {
            return Err(Error::OutsideBall { norm });
        }
        Ok(Point { coords })
    }

    /// Point with real coordinates.
    pub fn real(xs: &[f64]) -> Result<Self> {
        Self::new(xs.iter().map(|&x| Complex64::new(x, 0.0)))
    }

    pub fn origin(n: usize) -> Self {
        Point {
            coords: std::iter::repeat(Complex64::new(0.0, 0.0)).take(n).collect(),
        }
    }

    /// `radius · direction / |direction|`.
    pub fn on_ray(direction: &[Complex64], radius: f64) -> Result<Self> {
        let len = norm_sqr(direction).sqrt();
        if len == 0.0 {
            return Err(Error::invalid("ray direction must be nonzero"));
        }
        Self::new(direction.iter().map(|c| c * (radius / len)))
    }

    /// Builds a point from coordinates already known to lie in the ball, pulling
    /// values that rounded onto the sphere back inside.
    pub(crate) fn from_coords_clamped(mut coords: Coords) -> Self {
        let norm = norm_sqr(&coords).sqrt();
        if norm >= 1.0 {
            let scale = (1.0 - f64::EPSILON) / norm;
            for c in coords.iter_mut() {
                *c *= scale;
            }
        }
        Point { coords }
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn coords(&self) -> &[Complex64] {
        &self.coords
    }

    pub fn norm_sqr(&self) -> f64 {
        norm_sqr(&self.coords)
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    pub fn is_origin(&self) -> bool {
        self.coords.iter().all(|c| c.re == 0.0 && c.im == 0.0)
    }

    /// Hermitian product ⟨self, other⟩ = Σ selfᵢ·conj(otherᵢ).
    pub fn inner(&self, other: &Point) -> Complex64 {
        inner(&self.coords, &other.coords)
    }

    pub fn distance(&self, other: &Point) -> f64 {
        self.coords
            .iter()
            .zip(&other.coords)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt()
    }
}

impl TryFrom<Vec<[f64; 2]>> for Point {
    type Error = Error;

    fn try_from(v: Vec<[f64; 2]>) -> Result<Self> {
        Point::new(v.into_iter().map(|[re, im]| Complex64::new(re, im)))
    }
}

impl From<Point> for Vec<[f64; 2]> {
    fn from(p: Point) -> Self {
        p.coords.iter().map(|c| [c.re, c.im]).collect()
    }
}

pub(crate) fn norm_sqr(z: &[Complex64]) -> f64 {
    z.iter().map(|c| c.norm_sqr()).sum()
}

pub(crate) fn inner(z: &[Complex64], w: &[Complex64]) -> Complex64 {
    z.iter().zip(w).map(|(a, b)| a * b.conj()).sum()
}

/// Dimension n, weight α and the normalizing constant making ν_α a probability measure.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawParams")]
pub struct SpaceParams {
    pub n: usize,
    pub alpha: f64,
    pub c_alpha: f64,
}

#[derive(Deserialize)]
struct RawParams {
    n: usize,
    alpha: f64,
}

impl TryFrom<RawParams> for SpaceParams {
    type Error = Error;

    fn try_from(raw: RawParams) -> Result<Self> {
        SpaceParams::new(raw.n, raw.alpha)
    }
}

impl SpaceParams {
    pub fn new(n: usize, alpha: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("dimension n must be positive"));
        }
        if !(alpha > -1.0) || !alpha.is_finite() {
            return Err(Error::InvalidAlpha(alpha));
        }
        // Γ(n+α+1)/(n!·Γ(α+1)) = Π_{i=1}^{n} (α+i)/i
        let c_alpha = (1..=n).map(|i| (alpha + i as f64) / i as f64).product();
        Ok(SpaceParams { n, alpha, c_alpha })
    }

    /// Kernel exponent n + 1 + α.
    pub fn kernel_exponent(&self) -> f64 {
        self.n as f64 + 1.0 + self.alpha
    }

    pub fn check_point(&self, p: &Point) -> Result<()> {
        if p.dim() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                found: p.dim(),
            });
        }
        Ok(())
    }

    /// The p-threshold (n + 2 + 2α)/(1 + α) for sufficiently localized functionals.
    pub fn localization_threshold(&self) -> f64 {
        (self.n as f64 + 2.0 + 2.0 * self.alpha) / (1.0 + self.alpha)
    }
}

/// Precomputed φ_a, reused when the same involution is applied at many points.
#[derive(Debug, Clone)]
pub struct MobiusMap {
    a: Coords,
    a_norm_sqr: f64,
    s: f64,
}

impl MobiusMap {
    pub fn new(a: &Point) -> Self {
        let a_norm_sqr = a.norm_sqr();
        MobiusMap {
            a: a.coords.clone(),
            a_norm_sqr,
            s: (1.0 - a_norm_sqr).sqrt(),
        }
    }

    pub fn center(&self) -> &[Complex64] {
        &self.a
    }

    pub fn apply_coords(&self, z: &[Complex64]) -> Coords {
        if self.a_norm_sqr == 0.0 {
            return z.iter().map(|c| -c).collect();
        }
        let za = inner(z, &self.a);
        let denom = Complex64::new(1.0, 0.0) - za;
        let proj = za / self.a_norm_sqr;
        self.a
            .iter()
            .zip(z)
            .map(|(&ai, &zi)| {
                let p = proj * ai;
                (ai - p - (zi - p) * self.s) / denom
            })
            .collect()
    }

    pub fn apply(&self, z: &Point) -> Point {
        Point::from_coords_clamped(self.apply_coords(&z.coords))
    }
}

fn check_pair(params: &SpaceParams, a: &Point, b: &Point) -> Result<()> {
    params.check_point(a)?;
    params.check_point(b)
}

/// φ_a(z) = (a − P_a z − s_a Q_a z)/(1 − ⟨z,a⟩), with φ_0(z) = −z.
pub fn mobius(params: &SpaceParams, a: &Point, z: &Point) -> Result<Point> {
    check_pair(params, a, z)?;
    Ok(MobiusMap::new(a).apply(z))
}

/// (1 − ⟨z,w⟩)^{−λ} on the principal branch; Re(1 − ⟨z,w⟩) > 0 inside the ball.
pub(crate) fn kernel_raw(lambda: f64, z: &[Complex64], w: &[Complex64]) -> Complex64 {
    let q = Complex64::new(1.0, 0.0) - inner(z, w);
    debug_assert!(q.re > 0.0);
    (q.ln() * -lambda).exp()
}

/// |k_w(z)|² without forming the complex power.
pub(crate) fn normalized_kernel_sqr_raw(lambda: f64, z: &[Complex64], w: &[Complex64]) -> f64 {
    let q = (Complex64::new(1.0, 0.0) - inner(z, w)).norm_sqr();
    ((1.0 - norm_sqr(w)) / q).powf(lambda)
}

/// Reproducing kernel K_w(z).
pub fn kernel(params: &SpaceParams, z: &Point, w: &Point) -> Result<Complex64> {
    check_pair(params, z, w)?;
    Ok(kernel_raw(params.kernel_exponent(), &z.coords, &w.coords))
}

/// k_w(z) = (1 − |w|²)^{λ/2} K_w(z), a unit vector of the weighted Bergman space.
pub fn normalized_kernel(params: &SpaceParams, z: &Point, w: &Point) -> Result<Complex64> {
    let lambda = params.kernel_exponent();
    Ok(kernel(params, z, w)? * (1.0 - w.norm_sqr()).powf(lambda / 2.0))
}

/// γ_{z,a} = |1 − ⟨z,a⟩|/(1 − ⟨z,a⟩).
pub fn unimodular_gamma(z: &Point, a: &Point) -> Result<Complex64> {
    if z.dim() != a.dim() {
        return Err(Error::DimensionMismatch {
            expected: z.dim(),
            found: a.dim(),
        });
    }
    let q = Complex64::new(1.0, 0.0) - z.inner(a);
    Ok(q.norm() / q)
}
