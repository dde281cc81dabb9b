//! Double operator integrals `∬ Φ(x, y) dℰ_M(x) Q dℰ_L(y)` for analytic kernels.
//!
//! [`doi_eigen`] evaluates in the eigenbases of `M` and `L`, where the integral is an
//! entrywise (Schur) product. [`doi_quadrature`] integrates the Poisson densities on a
//! tensor grid and shares no code path with it beyond the kernel itself.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::funcalc::{apply, upper_eigenvalues, AnalyticFunction};
use crate::matrix::{op_norm, schur_eigenvalues, trace_norm, CMat, OperatorMatrix, I};
use crate::operator::{path_relative, DissipativePair};
use crate::quadrature::QuadratureGrid;
use crate::semispectral::{density_unchecked, poisson_density, EPS_SPEC};

const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Default central-difference step.
pub const FD_STEP: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "snake_case")]
pub enum Kernel {
    /// `𝔇f(z, w)`.
    Dd { f: AnalyticFunction },
    /// `𝔇f(z, w)·(w + i)`.
    DdFlat { f: AnalyticFunction },
    /// `(z + i)(w + i)·𝔇f(z, w)`.
    ResDd { f: AnalyticFunction },
    /// `Σ aₙ(z)·bₙ(w)`.
    Separable { terms: Vec<(AnalyticFunction, AnalyticFunction)> },
}

impl Kernel {
    pub fn one() -> Self {
        let c = AnalyticFunction::constant(ONE);
        Kernel::Separable {
            terms: vec![(c.clone(), c)],
        }
    }

    pub(crate) fn value(&self, z: Complex64, w: Complex64) -> Complex64 {
        match self {
            Kernel::Dd { f } => f.dd(z, w),
            Kernel::DdFlat { f } => f.dd(z, w) * (w + I),
            Kernel::ResDd { f } => f.dd(z, w) * (z + I) * (w + I),
            Kernel::Separable { terms } => terms.iter().map(|(a, b)| a.value(z) * b.value(w)).sum(),
        }
    }
}

pub fn kernel_eval(ker: &Kernel, z: Complex64, w: Complex64) -> Result<Complex64> {
    for p in [z, w] {
        if p.im < 0.0 {
            return Err(LabError::Domain { z: p });
        }
    }
    Ok(ker.value(z, w))
}

/// `S_M·(Φ(μ_j, λ_k) ∘ S_M⁻¹ Q S_L)·S_L⁻¹`.
pub fn doi_eigen(ker: &Kernel, m: &OperatorMatrix, q: &OperatorMatrix, l: &OperatorMatrix) -> Result<OperatorMatrix> {
    if q.dim() != m.dim() || q.dim() != l.dim() {
        return Err(LabError::Dimension(format!(
            "M, Q, L have sizes {}, {}, {}",
            m.dim(),
            q.dim(),
            l.dim()
        )));
    }
    let mu = upper_eigenvalues(m)?;
    let lambda = upper_eigenvalues(l)?;
    let sm = m.spectral()?;
    let sl = l.spectral()?;
    let mut core = &sm.vectors_inv * q.entries() * &sl.vectors;
    for j in 0..mu.len() {
        for k in 0..lambda.len() {
            core[(j, k)] *= ker.value(mu[j], lambda[k]);
        }
    }
    Ok(OperatorMatrix::wrap(&sm.vectors * core * &sl.vectors_inv))
}

/// Panels for the `x` (left, `ℰ_M`) and `y` (right, `ℰ_L`) integrations.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DoiGrids {
    pub x: QuadratureGrid,
    pub y: QuadratureGrid,
}

fn strict_eigenvalues(a: &OperatorMatrix) -> Result<Vec<Complex64>> {
    // Runs the density precondition check.
    poisson_density(a, 0.0)?;
    Ok(schur_eigenvalues(a.entries()))
}

/// Grids adapted to `ρ_M(x)·Φ(x, ·)` and `Φ(·, y)·ρ_L(y)` at the real parts of the other
/// side's eigenvalues.
pub fn doi_grids(ker: &Kernel, m: &OperatorMatrix, l: &OperatorMatrix, tol: f64) -> Result<DoiGrids> {
    let em = strict_eigenvalues(m)?;
    let el = strict_eigenvalues(l)?;
    let side = |a: &OperatorMatrix, own: &[Complex64], other: &[Complex64], left: bool| {
        let im_a = a.imag_part();
        let n = a.dim();
        let anchors: Vec<Complex64> = std::iter::once(Complex64::new(0.0, 0.0))
            .chain(other.iter().map(|z| Complex64::new(z.re, 0.0)))
            .collect();
        QuadratureGrid::adapt(own, tol, |x| {
            let rho = density_unchecked(a.entries(), &im_a, x);
            let mut out = CMat::zeros(n, n * anchors.len());
            for (j, &c) in anchors.iter().enumerate() {
                let phi = if left {
                    ker.value(Complex64::new(x, 0.0), c)
                } else {
                    ker.value(c, Complex64::new(x, 0.0))
                };
                out.view_mut((0, j * n), (n, n)).copy_from(&(&rho * phi));
            }
            out
        })
    };
    Ok(DoiGrids {
        x: side(m, &em, &el, true)?,
        y: side(l, &el, &em, false)?,
    })
}

/// `Σ_{a,b} w_a w_b Φ(x_a, y_b)·ρ_M(x_a)·Q·ρ_L(y_b)`.
pub fn doi_quadrature(
    ker: &Kernel,
    m: &OperatorMatrix,
    q: &OperatorMatrix,
    l: &OperatorMatrix,
    grids: &DoiGrids,
) -> Result<OperatorMatrix> {
    strict_eigenvalues(m)?;
    strict_eigenvalues(l)?;
    let n = l.dim();
    let (im_m, im_l) = (m.imag_part(), l.imag_part());
    let xs = grids.x.points();
    let ys = grids.y.points();
    let rho_l: Vec<CMat> = ys.iter().map(|&(y, _)| density_unchecked(l.entries(), &im_l, y)).collect();
    let terms: Vec<CMat> = xs
        .par_iter()
        .map(|&(x, wx)| {
            let mut inner = CMat::zeros(n, n);
            for ((y, wy), rho) in ys.iter().zip(&rho_l) {
                inner += rho * (ker.value(Complex64::new(x, 0.0), Complex64::new(*y, 0.0)) * *wy);
            }
            density_unchecked(m.entries(), &im_m, x) * q.entries() * inner * Complex64::new(wx, 0.0)
        })
        .collect();
    // Sequential sum: the result must not depend on the thread count.
    let total = terms.into_iter().fold(CMat::zeros(n, n), |a, b| a + b);
    if total.iter().any(|z| !z.is_finite()) {
        return Err(LabError::Quadrature("non-finite tensor sum".into()));
    }
    Ok(OperatorMatrix::wrap(total))
}

/// `‖f(M) − f(L) − ∬ 𝔇♭f dℰ_M C dℰ_L‖ / max(1, ‖f(M) − f(L)‖)`.
pub fn difference_formula_residual(f: &AnalyticFunction, pair: &DissipativePair) -> Result<f64> {
    let delta = apply(f, &pair.m)?.into_entries() - apply(f, &pair.l)?.into_entries();
    let ker = Kernel::DdFlat { f: f.clone() };
    let doi = doi_eigen(&ker, &pair.m, &pair.relative, &pair.l)?;
    Ok(op_norm(&(&delta - doi.entries())) / op_norm(&delta).max(1.0))
}

/// `‖f(M) − f(L)‖ / ‖C‖`, or `None` when `C = 0`.
pub fn relative_lipschitz_ratio(f: &AnalyticFunction, pair: &DissipativePair) -> Result<Option<f64>> {
    let c = pair.relative.op_norm();
    if c == 0.0 {
        return Ok(None);
    }
    let delta = apply(f, &pair.m)?.into_entries() - apply(f, &pair.l)?.into_entries();
    Ok(Some(op_norm(&delta) / c))
}

#[derive(Debug, Clone)]
pub struct DerivativeFormula {
    /// `Q_t = ∬ 𝔇♭f dℰ_t K(L_t + iI)⁻¹ dℰ_t`, the derivative of `f(L_t)`.
    pub q: OperatorMatrix,
    pub trace_norm: f64,
}

pub fn derivative_formula(pair: &DissipativePair, t: f64, f: &AnalyticFunction) -> Result<DerivativeFormula> {
    let lt = pair.at(t);
    let rel = path_relative(pair, t)?;
    let q = doi_eigen(&Kernel::DdFlat { f: f.clone() }, &lt, &rel, &lt)?;
    let trace_norm = trace_norm(q.entries());
    Ok(DerivativeFormula { q, trace_norm })
}

/// `(f(L_{t+h}) − f(L_{t−h})) / 2h`.
pub fn central_difference(pair: &DissipativePair, t: f64, f: &AnalyticFunction, h: f64) -> Result<OperatorMatrix> {
    if !(h > 0.0) {
        return Err(LabError::Argument(format!("step must be positive, got {h}")));
    }
    let plus = apply(f, &pair.at(t + h))?;
    let minus = apply(f, &pair.at(t - h))?;
    Ok(OperatorMatrix::wrap(
        (plus.into_entries() - minus.into_entries()) / Complex64::new(2.0 * h, 0.0),
    ))
}

#[derive(Debug, Clone, Serialize)]
pub struct OrderFit {
    pub steps: Vec<f64>,
    pub errors: Vec<f64>,
    /// Least-squares slope of `log error` against `log h`.
    pub order: f64,
}

/// Relative central-difference errors against `Q_t` over the given steps.
pub fn derivative_order(pair: &DissipativePair, t: f64, f: &AnalyticFunction, steps: &[f64]) -> Result<OrderFit> {
    let q = derivative_formula(pair, t, f)?.q;
    let scale = q.op_norm().max(f64::MIN_POSITIVE);
    let errors = steps
        .iter()
        .map(|&h| {
            central_difference(pair, t, f, h).map(|fd| op_norm(&(fd.entries() - q.entries())) / scale)
        })
        .collect::<Result<Vec<_>>>()?;
    let pts: Vec<(f64, f64)> = steps
        .iter()
        .zip(&errors)
        .filter(|(_, &e)| e > 0.0)
        .map(|(&h, &e)| (h.ln(), e.ln()))
        .collect();
    let order = if pts.len() < 2 {
        f64::INFINITY
    } else {
        let k = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
        sxy / sxx
    };
    Ok(OrderFit {
        steps: steps.to_vec(),
        errors,
        order,
    })
}

/// Halving sequence from `1e−2` down to `1e−4`.
pub fn halving_steps() -> Vec<f64> {
    let mut out = vec![];
    let mut h = 1e-2;
    while h >= 1e-4 * (1.0 - 1e-12) {
        out.push(h);
        h *= 0.5;
    }
    if *out.last().unwrap() > 1e-4 {
        out.push(1e-4);
    }
    out
}

/// `(trace ∬ 𝔇♭f dℰ_L R dℰ_L, ∫ f′(x)(x + i)·trace(ρ_L(x) R) dx)`.
pub fn doi_trace_identity(
    f: &AnalyticFunction,
    l: &OperatorMatrix,
    r: &OperatorMatrix,
    grid: &QuadratureGrid,
) -> Result<(Complex64, Complex64)> {
    poisson_density(l, 0.0)?;
    let lhs = doi_eigen(&Kernel::DdFlat { f: f.clone() }, l, r, l)?.trace();
    let im_l = l.imag_part();
    let rhs = grid.integrate_scalar(|x| {
        let z = Complex64::new(x, 0.0);
        f.deriv(z) * (z + I) * (density_unchecked(l.entries(), &im_l, x) * r.entries()).trace()
    });
    Ok((lhs, rhs))
}

/// Grid for [`doi_trace_identity`], adapted to the scalar integrand.
pub fn trace_identity_grid(f: &AnalyticFunction, l: &OperatorMatrix, r: &OperatorMatrix, tol: f64) -> Result<QuadratureGrid> {
    let eig = strict_eigenvalues(l)?;
    let im_l = l.imag_part();
    QuadratureGrid::adapt(&eig, tol, |x| {
        let z = Complex64::new(x, 0.0);
        let v = f.deriv(z) * (z + I) * (density_unchecked(l.entries(), &im_l, x) * r.entries()).trace();
        CMat::from_element(1, 1, v)
    })
}

/// One row of a residual table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualRecord {
    pub seed: u64,
    pub dim: usize,
    pub function_id: String,
    pub residual: f64,
}

/// Sanity floor for the strict-dissipativity requirement of the quadrature route.
pub fn quadrature_applicable(a: &OperatorMatrix) -> bool {
    schur_eigenvalues(a.entries()).iter().all(|z| z.im >= EPS_SPEC)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::funcalc::default_battery;
    use crate::matrix::{inverse, rel_diff, shifted};
    use crate::operator::random_dissipative;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn pair(seed: u64, dim: usize) -> DissipativePair {
        let l = random_dissipative(seed, dim, 0.2).unwrap();
        let m = random_dissipative(seed + 1000, dim, 0.2).unwrap();
        DissipativePair::from_endpoints(l, m, DissipativePair::DEFAULT_D).unwrap()
    }

    #[test]
    fn kernel_examples() {
        let f = AnalyticFunction::Pole(-I);
        let flat = Kernel::DdFlat { f: f.clone() };
        assert!((kernel_eval(&flat, c(0., 0.), c(1., 0.)).unwrap() - I).norm() < 1e-15);
        assert!((kernel_eval(&flat, c(0., 0.), c(0., 0.)).unwrap() - I).norm() < 1e-15);
        let dd = Kernel::Dd {
            f: AnalyticFunction::constant(c(3., 1.)),
        };
        assert_eq!(kernel_eval(&dd, c(0.3, 0.), c(-2., 1.)).unwrap(), c(0., 0.));
        assert!(kernel_eval(&flat, c(0., -1.), I).is_err());
        // Off-diagonal closed form −(x + i)⁻¹.
        for (x, y) in [(0.5, -2.0), (3.0, 1.0)] {
            let v = kernel_eval(&flat, c(x, 0.), c(y, 0.)).unwrap();
            assert!((v + ONE / c(x, 1.)).norm() < 1e-14);
        }
    }

    #[test]
    fn doi_eigen_examples() {
        let (m, q, l) = (OperatorMatrix::scalar(c(0.5, 2.)), OperatorMatrix::scalar(c(2., -1.)), OperatorMatrix::scalar(I));
        let ker = Kernel::Dd {
            f: AnalyticFunction::Pole(c(0., -2.)),
        };
        let got = doi_eigen(&ker, &m, &q, &l).unwrap().entries()[(0, 0)];
        assert!((got - ker.value(c(0.5, 2.), I) * c(2., -1.)).norm() < 1e-14);

        let p = pair(1, 4);
        let any = OperatorMatrix::new(p.k.entries() * c(0.3, 0.7)).unwrap();
        assert!(rel_diff(doi_eigen(&Kernel::one(), &p.m, &any, &p.l).unwrap().entries(), any.entries()) < 1e-10);

        let f = AnalyticFunction::Pole(-I);
        let got = doi_eigen(&Kernel::DdFlat { f }, &p.m, &p.relative, &p.l).unwrap();
        let want = inverse(&shifted(p.m.entries(), I)).unwrap() - inverse(&shifted(p.l.entries(), I)).unwrap();
        assert!(rel_diff(got.entries(), &want) < 1e-10);
    }

    #[test]
    fn doi_quadrature_scalar_oracle() {
        let (m, l) = (OperatorMatrix::scalar(c(0.5, 1.)), OperatorMatrix::scalar(c(-0.3, 0.7)));
        let q = OperatorMatrix::scalar(ONE);
        let ker = Kernel::DdFlat {
            f: AnalyticFunction::Pole(c(0., -2.)),
        };
        let grids = doi_grids(&ker, &m, &l, 1e-10).unwrap();
        let got = doi_quadrature(&ker, &m, &q, &l, &grids).unwrap().entries()[(0, 0)];
        // Independent scalar oracle: plain nested midpoint-free Gauss rule in the angle.
        let (t, w) = crate::quadrature::gauss_legendre_on(1200, -std::f64::consts::FRAC_PI_2, std::f64::consts::FRAC_PI_2);
        let poisson = |z: Complex64, x: f64| z.im / (std::f64::consts::PI * ((x - z.re).powi(2) + z.im * z.im));
        let mut want = c(0., 0.);
        for (ta, wa) in t.iter().zip(&w) {
            let x = ta.tan();
            let jx = wa / ta.cos().powi(2);
            for (tb, wb) in t.iter().zip(&w) {
                let y = tb.tan();
                let jy = wb / tb.cos().powi(2);
                want += ker.value(c(x, 0.), c(y, 0.)) * poisson(c(0.5, 1.), x) * poisson(c(-0.3, 0.7), y) * jx * jy;
            }
        }
        assert!((got - want).norm() < 1e-7, "{got} vs {want}");
        // Analytic kernels in the upper half-plane reduce to the eigen evaluation.
        assert!((got - doi_eigen(&ker, &m, &q, &l).unwrap().entries()[(0, 0)]).norm() < 1e-8);
    }

    #[test]
    fn doi_quadrature_identity_kernel_and_cross_check() {
        let p = pair(2, 3);
        let tol = 1e-8;
        let one = Kernel::one();
        let grids = doi_grids(&one, &p.m, &p.l, tol).unwrap();
        let got = doi_quadrature(&one, &p.m, &p.k, &p.l, &grids).unwrap();
        assert!(op_norm(&(got.entries() - p.k.entries())) <= 10.0 * tol * p.k.op_norm().max(1.0));

        let ker = Kernel::DdFlat {
            f: AnalyticFunction::Pole(c(0., -2.)),
        };
        let grids = doi_grids(&ker, &p.m, &p.l, tol).unwrap();
        let q = doi_quadrature(&ker, &p.m, &p.relative, &p.l, &grids).unwrap();
        let e = doi_eigen(&ker, &p.m, &p.relative, &p.l).unwrap();
        assert!(op_norm(&(q.entries() - e.entries())) <= 1e-6);
    }

    #[test]
    fn difference_formula_examples() {
        let p = pair(3, 5);
        let zero = DissipativePair::new(p.l.clone(), OperatorMatrix::zeros(5), 0.5).unwrap();
        for f in default_battery() {
            assert_eq!(difference_formula_residual(&f.f, &zero).unwrap(), 0.0);
        }
        assert!(difference_formula_residual(&AnalyticFunction::Pole(-I), &p).unwrap() <= 1e-10);
        let big = pair(4, 8);
        for f in default_battery() {
            let r = difference_formula_residual(&f.f, &big).unwrap();
            assert!(r <= 1e-8, "{}: {r:e}", f.id);
        }
    }

    #[test]
    fn derivative_examples() {
        let p = pair(5, 3);
        let zero = DissipativePair::new(p.l.clone(), OperatorMatrix::zeros(3), 0.5).unwrap();
        let d = derivative_formula(&zero, 0.3, &AnalyticFunction::Pole(-I)).unwrap();
        assert_eq!(d.q.op_norm(), 0.0);

        let scalar = DissipativePair::new(OperatorMatrix::scalar(I), OperatorMatrix::scalar(ONE), 0.5).unwrap();
        let d = derivative_formula(&scalar, 0.0, &AnalyticFunction::Pole(-I)).unwrap();
        assert!((d.q.entries()[(0, 0)] - c(0.25, 0.)).norm() < 1e-14);
        assert!((d.trace_norm - 0.25).abs() < 1e-14);

        for seed in 0..4 {
            let p = pair(10 + seed, 4);
            for f in default_battery() {
                let q = derivative_formula(&p, 0.5, &f.f).unwrap().q;
                let fd = central_difference(&p, 0.5, &f.f, FD_STEP).unwrap();
                let rel = op_norm(&(fd.entries() - q.entries())) / q.op_norm();
                assert!(rel <= 1e-5, "{} seed {seed}: {rel:e}", f.id);
            }
        }
    }

    #[test]
    fn derivative_order_is_two() {
        let p = pair(20, 4);
        let fit = derivative_order(&p, 0.5, &AnalyticFunction::resolvent_power(2), &halving_steps()).unwrap();
        assert!(fit.order >= 1.9, "{fit:?}");
        let steps = halving_steps();
        assert_eq!(steps[0], 1e-2);
        assert_eq!(*steps.last().unwrap(), 1e-4);
    }

    #[test]
    fn trace_identity_examples() {
        let l = OperatorMatrix::scalar(I);
        let f = AnalyticFunction::Pole(-I);
        let r = OperatorMatrix::scalar(ONE);
        let g = trace_identity_grid(&f, &l, &r, 1e-10).unwrap();
        let (lhs, rhs) = doi_trace_identity(&f, &l, &r, &g).unwrap();
        assert!((lhs - c(0., 0.5)).norm() < 1e-14);
        assert!((rhs - lhs).norm() < 1e-8);

        let zero = OperatorMatrix::zeros(1);
        let (a, b) = doi_trace_identity(&f, &l, &zero, &g).unwrap();
        assert_eq!((a, b), (c(0., 0.), c(0., 0.)));

        let l = random_dissipative(30, 3, 0.3).unwrap();
        let r = random_dissipative(31, 3, 0.1).unwrap();
        for f in default_battery() {
            let g = trace_identity_grid(&f.f, &l, &r, 1e-9).unwrap();
            let (a, b) = doi_trace_identity(&f.f, &l, &r, &g).unwrap();
            assert!((a - b).norm() <= 1e-6, "{}: {a} vs {b}", f.id);
        }
    }

    #[test]
    fn kernel_serde_roundtrip() {
        let k = Kernel::ResDd {
            f: AnalyticFunction::resolvent_power(2),
        };
        let s = serde_json::to_string(&k).unwrap();
        assert_eq!(serde_json::from_str::<Kernel>(&s).unwrap(), k);
    }
}
