//! Semi-spectral measures of dissipative matrices, computed two ways.
//!
//! For strictly dissipative `L` the measure `ℰ_L` has the matrix density
//!
//! ```text
//! ρ_L(x) = (1/π)·(L* − x)⁻¹·Im L·(L − x)⁻¹,
//! ```
//!
//! which is the route used by every quadrature evaluator in the crate. The second route
//! compresses the spectral measure of an explicit self-adjoint dilation: a depth-`N`
//! unitary dilation `U` of the Cayley transform `T = cayley(L)`, mapped back to the line
//! by the inverse Cayley transform. [`cross_validate`] ties the two together within a
//! computed bound.

use std::fmt::Write as _;

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{LabError, Result};
use crate::funcalc::AnalyticFunction;
use crate::matrix::{
    inverse, op_norm, psd_sqrt, schur_eigenvalues, schur_normal, shifted, CMat, OperatorMatrix, I,
};
use crate::operator::cayley;
use crate::quadrature::QuadratureGrid;

/// Minimal distance of the spectrum to `ℝ` for the density route.
pub const EPS_SPEC: f64 = 1e-3;

/// Default quadrature tolerance.
pub const DEFAULT_TOL: f64 = 1e-8;

const ONE: Complex64 = Complex64::new(1.0, 0.0);

fn require_strict(l: &OperatorMatrix) -> Result<Vec<Complex64>> {
    let eig = schur_eigenvalues(l.entries());
    if let Some(&bad) = eig.iter().find(|z| z.im < EPS_SPEC) {
        return Err(LabError::SingularPart {
            eigenvalue: bad,
            eps: EPS_SPEC,
        });
    }
    Ok(eig)
}

/// `ρ_L(x)`, Hermitian positive semidefinite.
pub fn poisson_density(l: &OperatorMatrix, x: f64) -> Result<CMat> {
    require_strict(l)?;
    Ok(density_unchecked(l.entries(), &l.imag_part(), x))
}

pub(crate) fn density_unchecked(l: &CMat, im_l: &CMat, x: f64) -> CMat {
    let r = inverse(&shifted(l, Complex64::new(-x, 0.0)))
        .expect("strictly dissipative matrices have no real eigenvalues");
    let rho = r.adjoint() * im_l * &r * Complex64::new(std::f64::consts::FRAC_1_PI, 0.0);
    // Symmetrize against rounding.
    (&rho + rho.adjoint()) * Complex64::new(0.5, 0.0)
}

/// The density `x ↦ ρ_L(x)` together with a grid resolving it.
#[derive(Debug, Clone)]
pub struct SemiSpectralDensity {
    pub l: OperatorMatrix,
    im_l: CMat,
    pub eigenvalues: Vec<Complex64>,
    pub grid: QuadratureGrid,
}

impl SemiSpectralDensity {
    pub fn new(l: &OperatorMatrix, tol: f64) -> Result<Self> {
        let eigenvalues = require_strict(l)?;
        let im_l = l.imag_part();
        let entries = l.entries().clone();
        let probe = |x: f64| density_unchecked(&entries, &im_l, x);
        let grid = QuadratureGrid::adapt(&eigenvalues, tol, probe)?;
        Ok(Self {
            l: l.clone(),
            im_l,
            eigenvalues,
            grid,
        })
    }

    pub fn density(&self, x: f64) -> CMat {
        density_unchecked(self.l.entries(), &self.im_l, x)
    }

    /// `∫ρ_L dx`, which should be `I`.
    pub fn total_mass(&self) -> CMat {
        self.grid.integrate(|x| self.density(x))
    }

    /// CSV rows `x, Re ρ₀₀, Im ρ₀₀, Re ρ₀₁, …` in row-major order.
    pub fn to_csv(&self, xs: &[f64]) -> String {
        let n = self.l.dim();
        let mut out = String::from("x");
        for i in 0..n {
            for j in 0..n {
                let _ = write!(out, ",re_{i}_{j},im_{i}_{j}");
            }
        }
        out.push('\n');
        for &x in xs {
            let rho = self.density(x);
            let _ = write!(out, "{x}");
            for i in 0..n {
                for j in 0..n {
                    let z = rho[(i, j)];
                    let _ = write!(out, ",{},{}", z.re, z.im);
                }
            }
            out.push('\n');
        }
        out
    }
}

/// Grid adapted to `x ↦ f(x)·ρ_L(x)`.
pub fn functional_grid(f: &AnalyticFunction, l: &OperatorMatrix, tol: f64) -> Result<QuadratureGrid> {
    let eig = require_strict(l)?;
    let im_l = l.imag_part();
    let entries = l.entries();
    QuadratureGrid::adapt(&eig, tol, |x| {
        density_unchecked(entries, &im_l, x) * f.value(Complex64::new(x, 0.0))
    })
}

/// `∫ f(x)·ρ_L(x) dx` on the given grid.
pub fn integrate_functional(
    f: &AnalyticFunction,
    l: &OperatorMatrix,
    grid: &QuadratureGrid,
) -> Result<OperatorMatrix> {
    require_strict(l)?;
    let im_l = l.imag_part();
    let entries = l.entries();
    let total = grid.integrate(|x| density_unchecked(entries, &im_l, x) * f.value(Complex64::new(x, 0.0)));
    Ok(OperatorMatrix::wrap(total))
}

/// A unitary `U` on `H ⊕ H^{N+1}` whose compressions to `H` reproduce `Tⁿ` for `n ≤ N + 1`.
///
/// Block layout (`n × n` blocks, indices `0..=N+1`):
///
/// ```text
/// U[0][0] = T      U[0][N+1] = D_{T*}
/// U[1][0] = D_T    U[1][N+1] = −T*
/// U[j+1][j] = I    for 1 ≤ j ≤ N
/// ```
#[derive(Debug, Clone)]
pub struct FiniteDilation {
    pub t: CMat,
    pub depth: usize,
    pub u: CMat,
    /// `H` occupies indices `embedding.0 .. embedding.1` of the dilation space.
    pub embedding: (usize, usize),
}

pub fn finite_dilation(t: &OperatorMatrix, depth: usize) -> Result<FiniteDilation> {
    if depth < 1 {
        return Err(LabError::Argument("dilation depth must be at least 1".into()));
    }
    let norm = t.op_norm();
    if norm > 1.0 + 1e-10 {
        return Err(LabError::NotContraction { norm });
    }
    let n = t.dim();
    let tm = t.entries();
    let id = CMat::identity(n, n);
    let d_t = psd_sqrt(&(&id - tm.adjoint() * tm));
    let d_ts = psd_sqrt(&(&id - tm * tm.adjoint()));
    let blocks = depth + 2;
    let mut u = CMat::zeros(n * blocks, n * blocks);
    let last = (blocks - 1) * n;
    u.view_mut((0, 0), (n, n)).copy_from(tm);
    u.view_mut((0, last), (n, n)).copy_from(&d_ts);
    u.view_mut((n, 0), (n, n)).copy_from(&d_t);
    u.view_mut((n, last), (n, n)).copy_from(&(-tm.adjoint()));
    for j in 1..=depth {
        u.view_mut(((j + 1) * n, j * n), (n, n)).copy_from(&id);
    }
    Ok(FiniteDilation {
        t: tm.clone(),
        depth,
        u,
        embedding: (0, n),
    })
}

impl FiniteDilation {
    pub fn dim(&self) -> usize {
        self.embedding.1 - self.embedding.0
    }

    pub fn compress(&self, big: &CMat) -> CMat {
        let (a, b) = self.embedding;
        big.view((a, a), (b - a, b - a)).into_owned()
    }

    /// `‖U*U − I‖`.
    pub fn unitarity_residual(&self) -> f64 {
        let k = self.u.nrows();
        op_norm(&(self.u.adjoint() * &self.u - CMat::identity(k, k)))
    }

    /// `‖Tⁿ − P Uⁿ|H‖` for `n = 0..=max_power`.
    pub fn power_residuals(&self, max_power: usize) -> Vec<f64> {
        let n = self.dim();
        let k = self.u.nrows();
        let mut tp = CMat::identity(n, n);
        let mut up = CMat::identity(k, k);
        let mut out = Vec::with_capacity(max_power + 1);
        for _ in 0..=max_power {
            out.push(op_norm(&(&tp - self.compress(&up))));
            tp = &tp * &self.t;
            up = &up * &self.u;
        }
        out
    }

    /// Spectral data of `A = inverse_cayley(U)`; eigenvectors of `U` at `1` are deflated.
    pub fn self_adjoint(&self) -> SelfAdjointDilation {
        let (q, zetas) = schur_normal(&self.u);
        let n = self.dim();
        let mut points = Vec::new();
        let mut heads = Vec::new();
        let mut deflated = 0;
        for (j, &zeta) in zetas.iter().enumerate() {
            if (zeta - ONE).norm() < 1e-10 {
                deflated += 1;
                continue;
            }
            let x = (I * (ONE + zeta) / (ONE - zeta)).re;
            points.push(x);
            heads.push(q.view((self.embedding.0, j), (n, 1)).into_owned());
        }
        SelfAdjointDilation {
            points,
            heads,
            deflated,
            dim: n,
        }
    }
}

/// Spectral resolution of the self-adjoint dilation, restricted to what the compression
/// to `H` needs: eigenvalues `x_j` and the `H`-parts of the eigenvectors.
#[derive(Debug, Clone)]
pub struct SelfAdjointDilation {
    pub points: Vec<f64>,
    heads: Vec<CMat>,
    pub deflated: usize,
    dim: usize,
}

impl SelfAdjointDilation {
    /// `P E_A((a, b))|H`.
    pub fn compressed_projection(&self, a: f64, b: f64) -> Result<CMat> {
        let mut out = CMat::zeros(self.dim, self.dim);
        for (x, h) in self.points.iter().zip(&self.heads) {
            for e in [a, b] {
                if e.is_finite() && (x - e).abs() < 1e-8 {
                    return Err(LabError::EndpointCollision { endpoint: e });
                }
            }
            if *x > a && *x < b {
                out += h * h.adjoint();
            }
        }
        Ok(out)
    }

    /// `P (A − λ)⁻¹|H`.
    pub fn compressed_resolvent(&self, lambda: Complex64) -> CMat {
        let mut out = CMat::zeros(self.dim, self.dim);
        for (x, h) in self.points.iter().zip(&self.heads) {
            out += h * h.adjoint() / (Complex64::new(*x, 0.0) - lambda);
        }
        out
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ResolventDilationCheck {
    /// `max_{n ≤ N} ‖Tⁿ − P Uⁿ|H‖`: polynomial compressions, exact up to rounding.
    pub disk_residual: f64,
    /// `‖(L − λ)⁻¹ − P(A − λ)⁻¹|H‖`.
    pub residual: f64,
    /// Tail bound from the expansion of `(ω(ζ) − λ)⁻¹` in powers of `ζ`.
    pub bound: f64,
    /// `γ = (λ + i)/(λ − i)`, the geometric ratio of that expansion.
    pub gamma: Complex64,
}

/// Compares `(L − λ)⁻¹` with the compressed resolvent of the depth-`N` dilation.
///
/// `(ω(ζ) − λ)⁻¹ = (1 − ζ)/((i − λ)(1 − γζ))` with `|γ| < 1` for `Im λ < 0`, so the
/// compression error is bounded by `2 Σ_{n>N} |cₙ| = 2|γ − 1||γ|ᴺ / ((1 − |γ|)|i − λ|)`.
pub fn resolvent_dilation_check(
    l: &OperatorMatrix,
    depth: usize,
    lambda: Complex64,
) -> Result<ResolventDilationCheck> {
    if !(lambda.im < 0.0) {
        return Err(LabError::Argument(format!("Im λ must be negative, got {lambda}")));
    }
    let t = cayley(l)?;
    let dil = finite_dilation(&t, depth)?;
    let disk_residual = dil.power_residuals(depth).into_iter().fold(0.0, f64::max);
    let adil = dil.self_adjoint();
    let direct = inverse(&shifted(l.entries(), -lambda))?;
    let residual = op_norm(&(direct - adil.compressed_resolvent(lambda)));
    let gamma = (lambda + I) / (lambda - I);
    let g = gamma.norm();
    let tail = 2.0 * (gamma - ONE).norm() * g.powi(depth as i32) / ((1.0 - g) * (I - lambda).norm());
    // Deflated eigenvalues within 1e-10 of 1 contribute at most |g(ζ)| ≤ 1e-10/|i − λ|(1−|γ|).
    let deflation = adil.deflated as f64 * 1e-10 / ((I - lambda).norm() * (1.0 - g));
    Ok(ResolventDilationCheck {
        disk_residual,
        residual,
        bound: tail + deflation + 1e-12,
        gamma,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct IntervalComparison {
    pub a: f64,
    pub b: f64,
    pub deviation: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct CrossValidation {
    pub intervals: Vec<IntervalComparison>,
    pub deviation: f64,
    pub bound: f64,
    /// `sup_θ ‖w(e^{iθ})‖` of the density of `ℰ_T` against `dθ/2π`.
    pub density_sup: f64,
}

/// Density of the semi-spectral measure of a contraction against `dθ/2π`:
/// `w(ζ) = (I − ζ̄T)⁻¹ + (I − ζT*)⁻¹ − I`.
pub fn circle_density(t: &CMat, theta: f64) -> Result<CMat> {
    let n = t.nrows();
    let id = CMat::identity(n, n);
    let zeta = Complex64::from_polar(1.0, theta);
    let a = inverse(&(&id - t * zeta.conj()))?;
    let b = inverse(&(&id - t.adjoint() * zeta))?;
    Ok(a + b - id)
}

/// Compares `∫_a^b ρ_L dx` with `P E_A((a, b))|H` for each interval.
///
/// Both measures share their trigonometric moments up to order `N` on the circle, so
/// Selberg's majorant and minorant of an arc (degree `N`, integral gap `2/(N + 1)`) give
/// `‖ℰ_L(Δ) − P E_A(Δ)|H‖ ≤ 2·sup‖w‖/(N + 1)` for every interval `Δ`. The grid
/// tolerance is added for the quadrature side.
pub fn cross_validate(
    l: &OperatorMatrix,
    tol: f64,
    depth: usize,
    intervals: &[(f64, f64)],
) -> Result<CrossValidation> {
    let eig = require_strict(l)?;
    let t = cayley(l)?;
    let dil = finite_dilation(&t, depth)?;
    let adil = dil.self_adjoint();
    let im_l = l.imag_part();
    let entries = l.entries();

    let mut density_sup = 0.0f64;
    let samples = 8192;
    for j in 0..samples {
        let theta = std::f64::consts::TAU * j as f64 / samples as f64;
        density_sup = density_sup.max(op_norm(&circle_density(t.entries(), theta)?));
    }
    // Sampling slack: w is smooth with scale set by 1 − ‖T‖; pad by 1%.
    density_sup *= 1.01;

    let mut out = Vec::with_capacity(intervals.len());
    let mut worst = 0.0f64;
    for &(a, b) in intervals {
        let projection = adil.compressed_projection(a, b)?;
        let grid = QuadratureGrid::adapt_interval(&eig, tol, a, b, |x| density_unchecked(entries, &im_l, x))?;
        let mass = grid.integrate(|x| density_unchecked(entries, &im_l, x));
        let deviation = op_norm(&(mass - projection));
        worst = worst.max(deviation);
        out.push(IntervalComparison { a, b, deviation });
    }
    Ok(CrossValidation {
        intervals: out,
        deviation: worst,
        bound: 2.0 * density_sup / (depth as f64 + 1.0) + tol,
        density_sup,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::funcalc::{apply, default_battery, AnalyticFunction};
    use crate::matrix::{hermitian_eigen, rel_diff};
    use crate::operator::{random_dissipative, random_hermitian, rng_from_seed};
    use std::f64::consts::FRAC_1_PI;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn scalar_poisson_kernel() {
        let l = OperatorMatrix::scalar(I);
        let rho = poisson_density(&l, 0.0).unwrap();
        assert!((rho[(0, 0)] - c(FRAC_1_PI, 0.)).norm() < 1e-15);
        let dens = SemiSpectralDensity::new(&l, 1e-10).unwrap();
        assert!((dens.total_mass()[(0, 0)] - ONE).norm() < 1e-8);
    }

    #[test]
    fn diagonal_density() {
        let l = OperatorMatrix::diagonal(&[I, c(1., 1.)]);
        let rho = poisson_density(&l, 1.0).unwrap();
        assert!((rho[(0, 0)].re - 0.5 * FRAC_1_PI).abs() < 1e-15);
        assert!((rho[(1, 1)].re - FRAC_1_PI).abs() < 1e-15);
        assert!(rho[(0, 1)].norm() < 1e-15);
    }

    #[test]
    fn density_rejects_real_spectrum() {
        let l = OperatorMatrix::scalar(c(1., 1e-5));
        assert!(matches!(poisson_density(&l, 0.0), Err(LabError::SingularPart { .. })));
    }

    #[test]
    fn density_is_psd_with_unit_mass() {
        let l = random_dissipative(3, 4, 0.2).unwrap();
        let dens = SemiSpectralDensity::new(&l, 1e-9).unwrap();
        for (x, _) in dens.grid.points().into_iter().step_by(37) {
            let (ev, _) = hermitian_eigen(&dens.density(x));
            assert!(ev[0] >= -1e-10, "x = {x}, λ_min = {}", ev[0]);
        }
        assert!(rel_diff(&dens.total_mass(), &CMat::identity(4, 4)) < 1e-8);
    }

    #[test]
    fn integrate_functional_examples() {
        let l = OperatorMatrix::scalar(I);
        let f = AnalyticFunction::Pole(-I);
        let g = functional_grid(&f, &l, 1e-10).unwrap();
        let v = integrate_functional(&f, &l, &g).unwrap();
        assert!((v.entries()[(0, 0)] - c(0., -0.5)).norm() < 1e-8);

        let l = OperatorMatrix::diagonal(&[I, c(0., 2.)]);
        let f = AnalyticFunction::Pole(c(0., -2.));
        let g = functional_grid(&f, &l, 1e-10).unwrap();
        let v = integrate_functional(&f, &l, &g).unwrap();
        assert!((v.entries()[(0, 0)] - ONE / c(0., 3.)).norm() < 1e-8);
        assert!((v.entries()[(1, 1)] - ONE / c(0., 4.)).norm() < 1e-8);

        let l = random_dissipative(8, 3, 0.3).unwrap();
        let one = AnalyticFunction::Const(ONE);
        let g = functional_grid(&one, &l, 1e-9).unwrap();
        let v = integrate_functional(&one, &l, &g).unwrap();
        assert!(rel_diff(v.entries(), &CMat::identity(3, 3)) < 1e-8);
    }

    #[test]
    fn integrate_functional_matches_apply_on_battery() {
        let l = random_dissipative(12, 3, 0.3).unwrap();
        for f in default_battery() {
            let g = functional_grid(&f.f, &l, 1e-9).unwrap();
            let v = integrate_functional(&f.f, &l, &g).unwrap();
            let want = apply(&f.f, &l).unwrap();
            assert!(rel_diff(v.entries(), want.entries()) < 1e-8, "{}", f.id);
        }
    }

    #[test]
    fn dilation_examples() {
        let zero = finite_dilation(&OperatorMatrix::scalar(c(0., 0.)), 1).unwrap();
        assert!(zero.u.nrows() >= 2);
        assert!(zero.unitarity_residual() < 1e-14);
        assert!(zero.compress(&zero.u)[(0, 0)].norm() < 1e-15);

        let half = finite_dilation(&OperatorMatrix::scalar(c(0.5, 0.)), 3).unwrap();
        assert!(half.power_residuals(3).iter().all(|&r| r <= 1e-12));

        // A unitary T has zero defect; its powers are reproduced exactly.
        let mut rng = rng_from_seed(5);
        let h = random_hermitian(&mut rng, 3);
        let u = cayley(&OperatorMatrix::new(h).unwrap()).unwrap();
        let d = finite_dilation(&u, 4).unwrap();
        assert!(d.power_residuals(4).iter().all(|&r| r <= 1e-12));

        assert!(matches!(
            finite_dilation(&OperatorMatrix::scalar(c(1.5, 0.)), 2),
            Err(LabError::NotContraction { .. })
        ));
    }

    #[test]
    fn resolvent_check_examples() {
        let l = random_dissipative(14, 3, 0.3).unwrap();
        let lambda = c(0.5, -1.5);
        let mut last = f64::INFINITY;
        for depth in [4, 8, 16, 32] {
            let chk = resolvent_dilation_check(&l, depth, lambda).unwrap();
            assert!(chk.disk_residual < 1e-12);
            assert!(chk.residual <= chk.bound, "N = {depth}: {} > {}", chk.residual, chk.bound);
            assert!(chk.residual <= last * (1.0 + 1e-9) + 1e-13);
            last = chk.residual;
        }
        // Self-adjoint L needs no dilation.
        let mut rng = rng_from_seed(15);
        let h = OperatorMatrix::new(random_hermitian(&mut rng, 3)).unwrap();
        let chk = resolvent_dilation_check(&h, 2, lambda).unwrap();
        assert!(chk.residual <= 1e-10);
        assert!(resolvent_dilation_check(&l, 2, c(0., 1.)).is_err());
    }

    #[test]
    fn cross_validate_scalar_examples() {
        let l = OperatorMatrix::scalar(I);
        let cv = cross_validate(&l, 1e-10, 64, &[(-1.0, 1.0)]).unwrap();
        assert!(cv.deviation <= 1e-3, "deviation {}", cv.deviation);
        assert!(cv.deviation <= cv.bound);
        let full = cross_validate(&l, 1e-10, 64, &[(f64::NEG_INFINITY, f64::INFINITY)]).unwrap();
        assert!(full.deviation <= full.bound);
        // K = 0 leaves the comparison unchanged.
        let same = cross_validate(&l.add(&OperatorMatrix::zeros(1)).unwrap(), 1e-10, 64, &[(-1.0, 1.0)]).unwrap();
        assert_eq!(same.deviation, cv.deviation);
    }

    #[test]
    fn cross_validate_random() {
        let l = random_dissipative(16, 3, 0.4).unwrap();
        let cv = cross_validate(&l, 1e-9, 16, &[(-1.3, 0.7), (0.2, 2.9), (-5.1, -0.05)]).unwrap();
        assert!(cv.deviation <= cv.bound, "{} > {}", cv.deviation, cv.bound);
    }

    #[test]
    fn csv_layout() {
        let l = OperatorMatrix::diagonal(&[I, c(1., 1.)]);
        let dens = SemiSpectralDensity::new(&l, 1e-8).unwrap();
        let csv = dens.to_csv(&[0.0, 1.0]);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 3);
        assert_eq!(lines[0].split(',').count(), 1 + 2 * 4);
        assert!(lines[1].starts_with("0,"));
    }
}
