//! Dissipativity, the Cayley transform, and relative-perturbation quantities.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{LabError, Result};
use crate::matrix::{
    inverse, min_hermitian_eigenvalue, op_norm, shifted, singular_values, thin_svd, trace_norm,
    CMat, CVec, OperatorMatrix, I,
};

/// Default dissipativity tolerance relative to `‖X‖`.
pub const DISSIPATIVITY_REL_TOL: f64 = 1e-12;

pub fn default_tol(x: &OperatorMatrix) -> f64 {
    DISSIPATIVITY_REL_TOL * x.op_norm().max(1.0)
}

/// `λ_min(Im X)`.
pub fn dissipativity_margin(x: &OperatorMatrix) -> f64 {
    min_hermitian_eigenvalue(&x.imag_part())
}

pub fn is_dissipative(x: &OperatorMatrix, tol: f64) -> bool {
    dissipativity_margin(x) >= -tol
}

pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub(crate) fn gaussian(rng: &mut impl Rng) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

pub fn gaussian_matrix(rng: &mut impl Rng, rows: usize, cols: usize) -> CMat {
    CMat::from_fn(rows, cols, |_, _| gaussian(rng))
}

pub(crate) fn random_hermitian(rng: &mut impl Rng, dim: usize) -> CMat {
    let g = gaussian_matrix(rng, dim, dim);
    (&g + g.adjoint()) * Complex64::new(0.5, 0.0)
}

/// `P ⪰ gap·I` with a random positive part of unit-order size.
pub(crate) fn random_positive(rng: &mut impl Rng, dim: usize, gap: f64) -> CMat {
    let b = gaussian_matrix(rng, dim, dim);
    let p = &b * b.adjoint() * Complex64::new(1.0 / dim as f64, 0.0);
    shifted(&p, Complex64::new(gap, 0.0))
}

pub fn random_unit_vector(rng: &mut impl Rng, dim: usize) -> CVec {
    let v = CVec::from_fn(dim, |_, _| gaussian(rng));
    let n = v.norm();
    v.unscale(n)
}

/// `A + iP` with `A` Hermitian and `P ⪰ gap·I`, deterministic in `seed`.
pub fn random_dissipative(seed: u64, dim: usize, gap: f64) -> Result<OperatorMatrix> {
    if dim < 1 {
        return Err(LabError::Argument("dim must be at least 1".into()));
    }
    if !(gap > 0.0) {
        return Err(LabError::Argument(format!("gap must be positive, got {gap}")));
    }
    let mut rng = rng_from_seed(seed);
    let a = random_hermitian(&mut rng, dim);
    let p = random_positive(&mut rng, dim, gap);
    Ok(OperatorMatrix::wrap(a + p * I))
}

/// `(L + iI)⁻¹`.
pub fn resolvent_at_minus_i(l: &OperatorMatrix) -> Result<CMat> {
    inverse(&shifted(l.entries(), I))
}

/// `T = (L − iI)(L + iI)⁻¹`.
pub fn cayley(l: &OperatorMatrix) -> Result<OperatorMatrix> {
    let r = resolvent_at_minus_i(l)?;
    Ok(OperatorMatrix::wrap(shifted(l.entries(), -I) * r))
}

/// `L = i(I + T)(I − T)⁻¹`.
pub fn inverse_cayley(t: &OperatorMatrix) -> Result<OperatorMatrix> {
    let n = t.dim();
    let one = Complex64::new(1.0, 0.0);
    if let Ok(spec) = t.spectral() {
        let distance = spec
            .eigenvalues
            .iter()
            .map(|z| (z - one).norm())
            .fold(f64::INFINITY, f64::min);
        if distance < 1e-10 {
            return Err(LabError::NotInvertible { distance });
        }
    }
    let id = CMat::identity(n, n);
    let denom = &id - t.entries();
    let inv = inverse(&denom).map_err(|_| LabError::NotInvertible {
        distance: singular_values(&denom).last().copied().unwrap_or(0.0),
    })?;
    Ok(OperatorMatrix::wrap((&id + t.entries()) * inv * I))
}

/// `C = K(L + iI)⁻¹`.
pub fn relative_operator(l: &OperatorMatrix, k: &OperatorMatrix) -> Result<OperatorMatrix> {
    if l.dim() != k.dim() {
        return Err(LabError::Dimension(format!(
            "L is {0}x{0} but K is {1}x{1}",
            l.dim(),
            k.dim()
        )));
    }
    Ok(OperatorMatrix::wrap(k.entries() * resolvent_at_minus_i(l)?))
}

/// Returns `c` with `‖Kv‖ ≤ c‖v‖ + d‖Lv‖`, following the finite-rank plus small split of
/// the relative operator: `C = F + R` with `‖R‖ < d/2`, `c = ‖F(L + iI)‖ + ‖R‖`.
pub fn domination_constants(l: &OperatorMatrix, k: &OperatorMatrix, d: f64) -> Result<f64> {
    if !(d > 0.0 && d < 1.0) {
        return Err(LabError::Argument(format!("d must lie in (0,1), got {d}")));
    }
    let c_rel = relative_operator(l, k)?;
    let svd = thin_svd(c_rel.entries());
    let n = l.dim();
    let mut finite_rank = CMat::zeros(n, n);
    let mut remainder = 0.0f64;
    for (j, &s) in svd.s.iter().enumerate() {
        if s >= 0.5 * d {
            finite_rank += svd.u.column(j) * svd.v.column(j).adjoint() * Complex64::new(s, 0.0);
        } else {
            remainder = remainder.max(s);
        }
    }
    let lifted = finite_rank * shifted(l.entries(), I);
    Ok(op_norm(&lifted) + remainder)
}

/// Largest value of `‖Kv‖ − c‖v‖ − d‖Lv‖` found over `samples` seeded unit vectors and
/// projected-gradient ascent from `starts` random points. Non-positive means no violation.
pub fn domination_violation(
    l: &OperatorMatrix,
    k: &OperatorMatrix,
    c: f64,
    d: f64,
    seed: u64,
    samples: usize,
    starts: usize,
) -> f64 {
    let n = l.dim();
    let (lm, km) = (l.entries(), k.entries());
    let gap = |v: &CVec| (km * v).norm() - c * v.norm() - d * (lm * v).norm();
    let mut rng = rng_from_seed(seed);
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..samples {
        worst = worst.max(gap(&random_unit_vector(&mut rng, n)));
    }
    let kk = km.adjoint() * km;
    let ll = lm.adjoint() * lm;
    let step = 0.5 / (op_norm(km) + d * op_norm(lm) + 1e-300);
    for _ in 0..starts {
        let mut v = random_unit_vector(&mut rng, n);
        for _ in 0..300 {
            let kv = (km * &v).norm();
            let lv = (lm * &v).norm();
            let mut grad = CVec::zeros(n);
            if kv > 0.0 {
                grad += &kk * &v / Complex64::new(kv, 0.0);
            }
            if lv > 0.0 {
                grad -= &ll * &v * Complex64::new(d / lv, 0.0);
            }
            let radial = v.dotc(&grad).re;
            let tangent = grad - &v * Complex64::new(radial, 0.0);
            if tangent.norm() < 1e-14 {
                break;
            }
            let next = &v + tangent * Complex64::new(step, 0.0);
            v = next.unscale(next.norm());
            worst = worst.max(gap(&v));
        }
    }
    worst
}

/// `K(L_t + iI)⁻¹` computed as `C(I + tC)⁻¹`.
pub fn path_relative(pair: &DissipativePair, t: f64) -> Result<OperatorMatrix> {
    let c = pair.relative.entries();
    let n = pair.dim();
    let factor = CMat::identity(n, n) + c * Complex64::new(t, 0.0);
    let inv = inverse(&factor).map_err(|_| LabError::PathDegenerate { t })?;
    Ok(OperatorMatrix::wrap(c * inv))
}

/// A margin `κ` with `(2 + c/κ)·d < 1`: twice the critical value `2cd/(1 − 2d)`.
pub fn maximality_margin(c: f64, d: f64) -> Result<f64> {
    if !(d < 0.5) {
        return Err(LabError::OutOfScope(format!("requires d < 1/2, got {d}")));
    }
    if d < 0.0 || c < 0.0 {
        return Err(LabError::Argument(format!("c and d must be nonnegative, got {c}, {d}")));
    }
    if c == 0.0 {
        return Ok(1.0);
    }
    let kappa = 2.0 * (2.0 * c * d / (1.0 - 2.0 * d));
    Ok(if kappa > 0.0 { kappa } else { 1.0 })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum Schatten {
    One,
    Two,
    Inf,
}

pub fn schatten_norm(x: &OperatorMatrix, p: Schatten) -> f64 {
    match p {
        Schatten::One => trace_norm(x.entries()),
        Schatten::Two => x.entries().norm(),
        Schatten::Inf => x.op_norm(),
    }
}

/// A dissipative `L` with a perturbation `K` such that `M = L + K` is dissipative too.
#[derive(Debug, Clone)]
pub struct DissipativePair {
    pub l: OperatorMatrix,
    pub k: OperatorMatrix,
    pub m: OperatorMatrix,
    /// `C = K(L + iI)⁻¹`.
    pub relative: OperatorMatrix,
    pub c: f64,
    pub d: f64,
}

impl DissipativePair {
    pub const DEFAULT_D: f64 = 0.5;

    pub fn new(l: OperatorMatrix, k: OperatorMatrix, d: f64) -> Result<Self> {
        if l.dim() != k.dim() {
            return Err(LabError::Dimension(format!(
                "L is {0}x{0} but K is {1}x{1}",
                l.dim(),
                k.dim()
            )));
        }
        let m = l.add(&k)?;
        for x in [&l, &m] {
            let margin = dissipativity_margin(x);
            if margin < -default_tol(x) {
                return Err(LabError::NonDissipative { min_imag: margin });
            }
        }
        let relative = relative_operator(&l, &k)?;
        let c = domination_constants(&l, &k, d)?;
        Ok(Self {
            l,
            k,
            m,
            relative,
            c,
            d,
        })
    }

    pub fn from_endpoints(l: OperatorMatrix, m: OperatorMatrix, d: f64) -> Result<Self> {
        let k = m.sub(&l)?;
        Self::new(l, k, d)
    }

    pub fn dim(&self) -> usize {
        self.l.dim()
    }

    /// `L_t = L + tK`.
    pub fn at(&self, t: f64) -> OperatorMatrix {
        OperatorMatrix::wrap(self.l.entries() + self.k.entries() * Complex64::new(t, 0.0))
    }
}

/// `L_t = L + tK` on a grid of `t ∈ [0, 1]`, every member dissipative.
#[derive(Debug, Clone)]
pub struct PathFamily {
    pub pair: DissipativePair,
    pub t_grid: Vec<f64>,
}

impl PathFamily {
    pub fn new(pair: DissipativePair, t_grid: Vec<f64>) -> Result<Self> {
        if t_grid.windows(2).any(|w| w[0] > w[1]) {
            return Err(LabError::Argument("t grid must be ordered".into()));
        }
        for &t in &t_grid {
            if !(0.0..=1.0).contains(&t) {
                return Err(LabError::Argument(format!("t = {t} outside [0,1]")));
            }
            let lt = pair.at(t);
            let margin = dissipativity_margin(&lt);
            if margin < -default_tol(&lt) {
                return Err(LabError::NonDissipative { min_imag: margin });
            }
        }
        Ok(Self { pair, t_grid })
    }

    pub fn members(&self) -> impl Iterator<Item = (f64, OperatorMatrix)> + '_ {
        self.t_grid.iter().map(|&t| (t, self.pair.at(t)))
    }
}

/// `‖(L + iI)v‖² − ‖Lv‖² − ‖v‖²`, nonnegative for dissipative `L`.
pub fn resolvent_lower_gap(l: &OperatorMatrix, v: &CVec) -> f64 {
    let lv = l.entries() * v;
    let shifted_v = &lv + v * I;
    shifted_v.norm_squared() - lv.norm_squared() - v.norm_squared()
}

/// `‖(L + iκI)⁻¹‖`.
pub fn shifted_resolvent_norm(l: &OperatorMatrix, kappa: f64) -> Result<f64> {
    Ok(op_norm(&inverse(&shifted(l.entries(), I * kappa))?))
}

/// `‖K(L + iκI)⁻¹‖`.
pub fn shifted_relative_norm(l: &OperatorMatrix, k: &OperatorMatrix, kappa: f64) -> Result<f64> {
    Ok(op_norm(&(k.entries() * inverse(&shifted(l.entries(), I * kappa))?)))
}
