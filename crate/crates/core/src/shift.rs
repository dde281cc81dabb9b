//! Spectral shift function of a relatively trace-class pair along `L_t = L + tK`.
//!
//! `ν_t(Δ) = trace(ℰ_t(Δ)·K(L_t + iI)⁻¹)` has density `trace(ρ_{L_t}(s)·K(L_t + iI)⁻¹)`.
//! Averaging over `t ∈ [0, 1]` and multiplying by `s + i` gives a complex `ξ` with
//! `trace(f(M) − f(L)) = ∫ f′ξ` for the analytic class. The choice made here is one of
//! many functions with that property (the pairing only sees `ξ` modulo boundary values
//! of functions analytic in the lower half-plane), so it need not agree pointwise with
//! the real shift function of the perturbation determinant.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::doi::derivative_formula;
use crate::error::{LabError, Result};
use crate::funcalc::{apply, AnalyticFunction, NamedFunction};
use crate::matrix::{inverse, op_norm, schur_eigenvalues, shifted, trace_norm, CMat, OperatorMatrix, I};
use crate::operator::{path_relative, DissipativePair};
use crate::quadrature::{gauss_legendre_on, QuadratureGrid};
use crate::semispectral::{density_unchecked, EPS_SPEC};

/// Default Gauss–Legendre order for the `t`-integral.
pub const T_NODES: usize = 32;

/// One node of the `t`-rule in the eigenbasis `L_t = VΛV⁻¹`.
///
/// With `X = V*·Im L_t·V` and `Y = V⁻¹·K(L_t + iI)⁻¹·V⁻*`, the density is
/// `(1/π) Σ_{j,k} X_{jk}Y_{kj} / (conj(λ_j − s)(λ_k − s))`.
#[derive(Debug, Clone)]
struct PathNode {
    weight: f64,
    lambda: Vec<Complex64>,
    w: CMat,
}

impl PathNode {
    fn new(pair: &DissipativePair, t: f64, weight: f64) -> Result<Self> {
        let lt = pair.at(t);
        strict_at(lt.entries())?;
        let spec = lt.spectral()?;
        spec.check_conditioning()?;
        let rel = path_relative(pair, t)?;
        let x = spec.vectors.adjoint() * lt.imag_part() * &spec.vectors;
        let y = &spec.vectors_inv * rel.entries() * spec.vectors_inv.adjoint();
        let n = lt.dim();
        let w = CMat::from_fn(n, n, |j, k| x[(j, k)] * y[(k, j)] * std::f64::consts::FRAC_1_PI);
        Ok(Self {
            weight,
            lambda: spec.eigenvalues.clone(),
            w,
        })
    }

    fn density(&self, s: f64) -> Complex64 {
        let x = Complex64::new(s, 0.0);
        let r: Vec<Complex64> = self.lambda.iter().map(|&l| Complex64::new(1.0, 0.0) / (l - x)).collect();
        let mut total = Complex64::new(0.0, 0.0);
        for (j, rj) in r.iter().enumerate() {
            let mut row = Complex64::new(0.0, 0.0);
            for (k, rk) in r.iter().enumerate() {
                row += self.w[(j, k)] * rk;
            }
            total += rj.conj() * row;
        }
        total
    }
}

/// `ν_t` and its average over a Gauss rule in `t`.
#[derive(Debug, Clone)]
pub struct NuField {
    nodes: Vec<PathNode>,
    /// Eigenvalues of `L_t` at a few snapshots of the path, used to seed `s`-grids.
    pub centers: Vec<Complex64>,
    dim: usize,
}

fn strict_at(a: &CMat) -> Result<Vec<Complex64>> {
    let eig = schur_eigenvalues(a);
    if let Some(&bad) = eig.iter().find(|z| z.im < EPS_SPEC) {
        return Err(LabError::SingularPart {
            eigenvalue: bad,
            eps: EPS_SPEC,
        });
    }
    Ok(eig)
}

impl NuField {
    pub fn new(pair: &DissipativePair, t_nodes: usize) -> Result<Self> {
        if t_nodes < 1 {
            return Err(LabError::Argument("t rule needs at least one node".into()));
        }
        let (ts, ws) = gauss_legendre_on(t_nodes, 0.0, 1.0);
        let nodes = ts
            .iter()
            .zip(&ws)
            .map(|(&t, &w)| PathNode::new(pair, t, w))
            .collect::<Result<Vec<_>>>()?;
        let mut centers = Vec::new();
        for t in [0.0, 0.25, 0.5, 0.75, 1.0] {
            centers.extend(schur_eigenvalues(pair.at(t).entries()));
        }
        Ok(Self {
            nodes,
            centers,
            dim: pair.dim(),
        })
    }

    /// `∫₀¹ ν_t density(s) dt`.
    pub fn nu(&self, s: f64) -> Complex64 {
        self.nodes.iter().map(|n| n.density(s) * n.weight).sum()
    }

    /// `ξ(s) = (s + i)·ν(s)`.
    pub fn xi(&self, s: f64) -> Complex64 {
        (Complex64::new(s, 0.0) + I) * self.nu(s)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
}

/// `trace(ρ_{L_t}(s)·K(L_t + iI)⁻¹)`.
pub fn nu_t_density(pair: &DissipativePair, t: f64, s: f64) -> Result<Complex64> {
    let lt = pair.at(t);
    strict_at(lt.entries())?;
    let rel = path_relative(pair, t)?;
    Ok((density_unchecked(lt.entries(), &lt.imag_part(), s) * rel.entries()).trace())
}

/// `s`-grid adapted jointly to `ν(s)` and `ξ(s)/(1 + |s|)`.
pub fn shift_grid(field: &NuField, tol: f64) -> Result<QuadratureGrid> {
    QuadratureGrid::adapt(&field.centers, tol, |s| {
        let xi = field.xi(s);
        CMat::from_row_slice(1, 2, &[xi / (Complex64::new(s, 0.0) + I), xi / (1.0 + s.abs())])
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct GridMeta {
    pub panels: usize,
    pub nodes: usize,
    pub tol: f64,
    pub t_nodes: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct SpectralShiftResult {
    pub s_grid: Vec<f64>,
    pub weights: Vec<f64>,
    pub xi: Vec<Complex64>,
    /// `∫ |ξ(s)| / (1 + |s|) ds`.
    pub weight_integral: f64,
    pub residuals: BTreeMap<String, f64>,
    pub grid_meta: GridMeta,
}

/// Samples `ξ` on the nodes of `grid`.
pub fn xi_from_nu(field: &NuField, grid: &QuadratureGrid) -> SpectralShiftResult {
    let pts = grid.points();
    let xi: Vec<Complex64> = pts.par_iter().map(|&(s, _)| field.xi(s)).collect();
    let weight_integral = pts
        .iter()
        .zip(&xi)
        .map(|(&(s, w), z)| w * z.norm() / (1.0 + s.abs()))
        .sum();
    SpectralShiftResult {
        s_grid: pts.iter().map(|p| p.0).collect(),
        weights: pts.iter().map(|p| p.1).collect(),
        xi,
        weight_integral,
        residuals: BTreeMap::new(),
        grid_meta: GridMeta {
            panels: grid.panels.len(),
            nodes: pts.len(),
            tol: grid.tol,
            t_nodes: field.nodes.len(),
        },
    }
}

/// Convenience wrapper: field, adapted grid and samples.
pub fn spectral_shift(pair: &DissipativePair, tol: f64, t_nodes: usize) -> Result<(NuField, QuadratureGrid, SpectralShiftResult)> {
    let field = NuField::new(pair, t_nodes)?;
    let grid = shift_grid(&field, tol)?;
    let ssr = xi_from_nu(&field, &grid);
    Ok((field, grid, ssr))
}

impl SpectralShiftResult {
    /// `∫ f′(s)·ξ(s) ds` on the stored nodes.
    pub fn pair_with_derivative(&self, f: &AnalyticFunction) -> Complex64 {
        self.s_grid
            .iter()
            .zip(&self.weights)
            .zip(&self.xi)
            .map(|((&s, &w), &xi)| f.deriv(Complex64::new(s, 0.0)) * xi * w)
            .sum()
    }

    pub fn record_residuals(&mut self, pair: &DissipativePair, battery: &[NamedFunction]) -> Result<()> {
        for g in battery {
            let r = trace_formula_residual(pair, &g.f, self)?;
            self.residuals.insert(g.id.clone(), r);
        }
        Ok(())
    }

    pub fn max_residual(&self) -> f64 {
        self.residuals.values().copied().fold(0.0, f64::max)
    }

    /// Rows `s,re_xi,im_xi` in full round-trip precision.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("s,re_xi,im_xi\n");
        for (s, z) in self.s_grid.iter().zip(&self.xi) {
            // `+ 0.0` folds negative zeros.
            let _ = writeln!(out, "{s:?},{:?},{:?}", z.re + 0.0, z.im + 0.0);
        }
        out
    }

    pub fn summary_json(&self, seed: u64) -> serde_json::Value {
        serde_json::json!({
            "weight_integral": self.weight_integral,
            "residuals": self.residuals,
            "grid_meta": self.grid_meta,
            "seed": seed,
        })
    }
}

/// `|trace(f(M) − f(L)) − ∫ f′ξ|`.
pub fn trace_formula_residual(pair: &DissipativePair, f: &AnalyticFunction, ssr: &SpectralShiftResult) -> Result<f64> {
    let lhs = (apply(f, &pair.m)?.into_entries() - apply(f, &pair.l)?.into_entries()).trace();
    Ok((lhs - ssr.pair_with_derivative(f)).norm())
}

/// Relative change of the weight integral when every panel's order is doubled.
pub fn weight_integral_stability(field: &NuField, grid: &QuadratureGrid) -> (f64, f64, f64) {
    let a = xi_from_nu(field, grid).weight_integral;
    let b = xi_from_nu(field, &grid.doubled()).weight_integral;
    let rel = if a == 0.0 && b == 0.0 { 0.0 } else { (a - b).abs() / a.abs().max(b.abs()) };
    (a, b, rel)
}

/// `∫₀¹ trace Q_t dt` on a Gauss rule; no `ξ` involved.
pub fn q_route_trace(pair: &DissipativePair, f: &AnalyticFunction, t_nodes: usize) -> Result<Complex64> {
    let (ts, ws) = gauss_legendre_on(t_nodes, 0.0, 1.0);
    let mut total = Complex64::new(0.0, 0.0);
    for (&t, &w) in ts.iter().zip(&ws) {
        total += derivative_formula(pair, t, f)?.q.trace() * w;
    }
    Ok(total)
}

/// `(1/π)(arg(λ − s) − arg(μ − s))`, the phase of the scalar perturbation determinant
/// `(μ − z)/(λ − z)` continued to the real axis from above.
pub fn scalar_xi_oracle(lambda: Complex64, mu: Complex64, s: f64) -> f64 {
    let x = Complex64::new(s, 0.0);
    ((lambda - x).arg() - (mu - x).arg()) / std::f64::consts::PI
}

/// Grid for integrating against [`scalar_xi_oracle`].
pub fn scalar_oracle_grid(lambda: Complex64, mu: Complex64, f: &AnalyticFunction, tol: f64) -> Result<QuadratureGrid> {
    QuadratureGrid::adapt(&[lambda, mu], tol, |s| {
        CMat::from_element(1, 1, f.deriv(Complex64::new(s, 0.0)) * scalar_xi_oracle(lambda, mu, s))
    })
}

/// `(∫ f′·oracle, f(μ) − f(λ))`.
pub fn validate_scalar_oracle(lambda: Complex64, mu: Complex64, f: &AnalyticFunction, tol: f64) -> Result<(Complex64, Complex64)> {
    let g = scalar_oracle_grid(lambda, mu, f, tol)?;
    let lhs = g.integrate_scalar(|s| f.deriv(Complex64::new(s, 0.0)) * scalar_xi_oracle(lambda, mu, s));
    Ok((lhs, f.value(mu) - f.value(lambda)))
}

/// `(‖(M + iI)⁻¹ − (L + iI)⁻¹‖_{S₁}, ‖(M + iI)⁻¹‖·‖C‖_{S₁})`.
pub fn resolvent_difference_check(pair: &DissipativePair) -> Result<(f64, f64)> {
    let rm = inverse(&shifted(pair.m.entries(), I))?;
    let rl = inverse(&shifted(pair.l.entries(), I))?;
    let norm = trace_norm(&(&rm - rl));
    let bound = op_norm(&rm) * trace_norm(pair.relative.entries());
    Ok((norm, bound))
}

/// `|s·ξ(s)|` maximized over `[a, b]` on a log-spaced sample of both signs.
pub fn tail_constant(field: &NuField, a: f64, b: f64, samples: usize) -> f64 {
    let (la, lb) = (a.ln(), b.ln());
    let mut c = 0.0f64;
    for j in 0..samples {
        let s = (la + (lb - la) * j as f64 / (samples.max(2) - 1) as f64).exp();
        for x in [s, -s] {
            c = c.max(x.abs() * field.xi(x).norm());
        }
    }
    c
}

/// Lipschitz modulus of `t ↦ K(L_t + iI)⁻¹` in `S₁`, fitted on a uniform grid.
pub fn path_modulus(pair: &DissipativePair, samples: usize) -> Result<f64> {
    let h = 1.0 / samples as f64;
    let mut prev = path_relative(pair, 0.0)?.into_entries();
    let mut lip = 0.0f64;
    for j in 1..=samples {
        let next = path_relative(pair, j as f64 * h)?.into_entries();
        lip = lip.max(trace_norm(&(&next - &prev)) / h);
        prev = next;
    }
    Ok(lip)
}

/// `‖P(t₁) − P(t₂)‖_{S₁} ≤ ω(|t₁ − t₂|)` on random pairs `(t₁, t₂)`; returns violations.
///
/// The modulus is `ω(δ) = 1.5·L̂·δ` with `L̂` from [`path_modulus`]; the derivative
/// `−P(t)²` is smooth, so sampled slopes approach the true constant from below.
pub fn path_continuity_violations(pair: &DissipativePair, probes: &[(f64, f64)]) -> Result<usize> {
    let lip = 1.5 * path_modulus(pair, 256)?;
    let mut bad = 0;
    for &(a, b) in probes {
        let d = trace_norm(&(path_relative(pair, a)?.into_entries() - path_relative(pair, b)?.into_entries()));
        if d > lip * (a - b).abs() + 1e-12 {
            bad += 1;
        }
    }
    Ok(bad)
}

/// The trivial pair `(L, L)` has `ξ ≡ 0`; exposed for the harness.
pub fn zero_shift(l: &OperatorMatrix) -> Result<DissipativePair> {
    DissipativePair::new(l.clone(), OperatorMatrix::zeros(l.dim()), DissipativePair::DEFAULT_D)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::funcalc::default_battery;
    use crate::operator::random_dissipative;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn scalar_pair(l: Complex64, m: Complex64) -> DissipativePair {
        DissipativePair::from_endpoints(OperatorMatrix::scalar(l), OperatorMatrix::scalar(m), 0.5).unwrap()
    }

    fn pair(seed: u64, dim: usize) -> DissipativePair {
        let l = random_dissipative(seed, dim, 0.3).unwrap();
        let m = random_dissipative(seed + 500, dim, 0.3).unwrap();
        DissipativePair::from_endpoints(l, m, 0.5).unwrap()
    }

    #[test]
    fn nu_density_examples() {
        let p = scalar_pair(I, c(1., 1.));
        let zero = zero_shift(&p.l).unwrap();
        for (t, s) in [(0.0, 0.0), (0.3, -2.0), (1.0, 7.0)] {
            assert_eq!(nu_t_density(&zero, t, s).unwrap(), c(0., 0.));
        }
        let unit = DissipativePair::new(OperatorMatrix::scalar(I), OperatorMatrix::scalar(c(1., 0.)), 0.5).unwrap();
        let v = nu_t_density(&unit, 0.0, 0.0).unwrap();
        assert!((v - c(0., -0.5 / std::f64::consts::PI)).norm() < 1e-15);

        let p = pair(1, 3);
        let t = 0.4;
        let lt = p.at(t);
        let eig = schur_eigenvalues(lt.entries());
        let g = QuadratureGrid::adapt(&eig, 1e-10, |s| CMat::from_element(1, 1, nu_t_density(&p, t, s).unwrap())).unwrap();
        let mass = g.integrate_scalar(|s| nu_t_density(&p, t, s).unwrap());
        assert!((mass - path_relative(&p, t).unwrap().trace()).norm() < 1e-8);
    }

    #[test]
    fn eigenbasis_density_matches_direct() {
        let p = pair(7, 4);
        let field = NuField::new(&p, 3).unwrap();
        let (ts, ws) = gauss_legendre_on(3, 0.0, 1.0);
        for s in [-3.0, -0.2, 0.0, 1.7, 40.0] {
            let direct: Complex64 = ts.iter().zip(&ws).map(|(&t, &w)| nu_t_density(&p, t, s).unwrap() * w).sum();
            assert!((field.nu(s) - direct).norm() <= 1e-12 * direct.norm().max(1.0));
        }
    }

    #[test]
    fn zero_perturbation_gives_zero_xi() {
        let l = random_dissipative(2, 3, 0.3).unwrap();
        let (_, _, ssr) = spectral_shift(&zero_shift(&l).unwrap(), 1e-8, 8).unwrap();
        assert!(ssr.xi.iter().all(|z| *z == c(0., 0.)));
        assert_eq!(ssr.weight_integral, 0.0);
        let csv = ssr.to_csv();
        assert!(csv.lines().skip(1).all(|r| r.ends_with(",0.0,0.0")));
    }

    #[test]
    fn scalar_oracle_examples() {
        assert_eq!(scalar_xi_oracle(I, I, 3.0), 0.0);
        assert_eq!(scalar_xi_oracle(c(2., 1.), c(2., 1.), -1.0), 0.0);
        let f = AnalyticFunction::Pole(-I);
        let (lhs, rhs) = validate_scalar_oracle(I, c(1., 1.), &f, 1e-11).unwrap();
        assert!((rhs - (ONE / c(1., 2.) - ONE / c(0., 2.))).norm() < 1e-15);
        assert!((lhs - rhs).norm() < 1e-8, "{lhs} vs {rhs}");
        // Self-adjoint limit: the indicator of [λ, μ].
        let v = scalar_xi_oracle(c(0., 1e-9), c(1., 1e-9), 0.5);
        assert!((v - 1.0).abs() < 1e-6);
    }

    const ONE: Complex64 = Complex64::new(1.0, 0.0);

    #[test]
    fn scalar_trace_formula() {
        let p = scalar_pair(I, c(0., 2.));
        let (_, _, ssr) = spectral_shift(&p, 1e-10, T_NODES).unwrap();
        let f = AnalyticFunction::Pole(-I);
        let lhs = ONE / c(0., 3.) - ONE / c(0., 2.);
        assert!((lhs - c(0., 1. / 6.)).norm() < 1e-15);
        assert!(trace_formula_residual(&p, &f, &ssr).unwrap() <= 1e-6);
    }

    #[test]
    fn matrix_trace_formula_and_q_route() {
        let p = pair(3, 6);
        let (field, grid, mut ssr) = spectral_shift(&p, 1e-8, T_NODES).unwrap();
        let battery = default_battery();
        ssr.record_residuals(&p, &battery).unwrap();
        assert!(ssr.max_residual() <= 1e-6, "{:?}", ssr.residuals);
        for g in &battery {
            let direct = (apply(&g.f, &p.m).unwrap().into_entries() - apply(&g.f, &p.l).unwrap().into_entries()).trace();
            let q = q_route_trace(&p, &g.f, T_NODES).unwrap();
            assert!((q - direct).norm() <= 1e-7, "{}", g.id);
        }
        let (a, _, rel) = weight_integral_stability(&field, &grid);
        assert!(a.is_finite() && rel <= 1e-3);
    }

    #[test]
    fn xi_tail_decays_like_inverse_s() {
        let p = pair(4, 3);
        let field = NuField::new(&p, 16).unwrap();
        let fitted = tail_constant(&field, 100.0, 1000.0, 40);
        let far = tail_constant(&field, 1000.0, 1e5, 40);
        assert!(far <= 1.1 * fitted, "{far} > {fitted}");
    }

    #[test]
    fn resolvent_difference_examples() {
        let p = scalar_pair(I, I);
        assert_eq!(resolvent_difference_check(&p).unwrap(), (0.0, 0.0));
        let p = scalar_pair(I, c(0., 2.));
        let (n, b) = resolvent_difference_check(&p).unwrap();
        assert!((n - 1. / 6.).abs() < 1e-15 && (b - 1. / 6.).abs() < 1e-15);
        for seed in 0..20 {
            let (n, b) = resolvent_difference_check(&pair(100 + seed, 4)).unwrap();
            assert!(n <= b + 1e-10);
        }
    }

    #[test]
    fn path_continuity() {
        let p = pair(6, 4);
        let probes: Vec<(f64, f64)> = (0..50).map(|j| ((j as f64 * 0.618) % 1.0, (j as f64 * 0.377 + 0.1) % 1.0)).collect();
        assert_eq!(path_continuity_violations(&p, &probes).unwrap(), 0);
    }

    #[test]
    fn pair_near_real_axis_is_rejected() {
        let p = scalar_pair(c(0., 1e-5), c(2., 1e-5));
        assert!(matches!(NuField::new(&p, 4), Err(LabError::SingularPart { .. })));
    }
}
