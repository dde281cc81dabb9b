//! Composite Gauss–Legendre quadrature on the real line through `x = tan θ`.
//!
//! Panels live in `θ ∈ (−π/2, π/2)`; the Jacobian `sec²θ` is folded into the weights, so
//! integrands decaying like `|x|⁻²` become bounded near the ends. Panel breakpoints are
//! seeded around the real parts of the eigenvalues in play (with spacing proportional to
//! their imaginary parts) and then bisected until an `n`-point and a `2n`-point rule agree.

use std::f64::consts::{FRAC_PI_2, PI};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::matrix::CMat;

/// Gauss–Legendre nodes and weights on `[−1, 1]` by Newton iteration on `P_n`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            // p1 = P_n(x), p0 = P_{n−1}(x)
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

/// Gauss–Legendre rule mapped to `[a, b]`.
pub fn gauss_legendre_on(n: usize, a: f64, b: f64) -> (Vec<f64>, Vec<f64>) {
    let (x, w) = gauss_legendre(n);
    let (mid, half) = (0.5 * (a + b), 0.5 * (b - a));
    (
        x.iter().map(|t| mid + half * t).collect(),
        w.iter().map(|v| half * v).collect(),
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Panel {
    /// Endpoints in `θ`.
    pub a: f64,
    pub b: f64,
    /// Nodes in `θ` and the plain Gauss weights (no Jacobian).
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl Panel {
    fn new(a: f64, b: f64, n: usize) -> Self {
        let (nodes, weights) = gauss_legendre_on(n, a, b);
        Self { a, b, nodes, weights }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadratureGrid {
    pub panels: Vec<Panel>,
    pub refinement_centers: Vec<Complex64>,
    pub tol: f64,
}

const BASE_ORDER: usize = 10;
const MAX_PANELS: usize = 40_000;
const MIN_WIDTH: f64 = 1e-13;

impl QuadratureGrid {
    /// Adaptive grid over the whole real line.
    pub fn adapt<F>(centers: &[Complex64], tol: f64, probe: F) -> Result<Self>
    where
        F: Fn(f64) -> CMat,
    {
        Self::adapt_on(centers, tol, -FRAC_PI_2, FRAC_PI_2, probe)
    }

    /// Adaptive grid over `(a, b)` with `a < b`, either end possibly infinite.
    pub fn adapt_interval<F>(centers: &[Complex64], tol: f64, a: f64, b: f64, probe: F) -> Result<Self>
    where
        F: Fn(f64) -> CMat,
    {
        if !(a < b) {
            return Err(LabError::Argument(format!("empty interval ({a}, {b})")));
        }
        Self::adapt_on(centers, tol, a.atan(), b.atan(), probe)
    }

    fn adapt_on<F>(centers: &[Complex64], tol: f64, lo: f64, hi: f64, probe: F) -> Result<Self>
    where
        F: Fn(f64) -> CMat,
    {
        if !(tol > 0.0) {
            return Err(LabError::Argument(format!("tolerance must be positive, got {tol}")));
        }
        let mut breaks = vec![lo, hi];
        if lo < 0.0 && 0.0 < hi {
            breaks.push(0.0);
        }
        for c in centers {
            let h = c.im.abs().max(1e-6);
            for k in [-4.0, -2.0, -1.0, -0.5, 0.0, 0.5, 1.0, 2.0, 4.0] {
                let theta = (c.re + k * h).atan();
                if theta > lo && theta < hi {
                    breaks.push(theta);
                }
            }
        }
        breaks.sort_by(f64::total_cmp);
        breaks.dedup_by(|a, b| (*a - *b).abs() < 1e-12);

        let span = hi - lo;
        let mut stack: Vec<(f64, f64)> = breaks.windows(2).rev().map(|w| (w[0], w[1])).collect();
        let mut accepted = Vec::new();
        while let Some((a, b)) = stack.pop() {
            if accepted.len() + stack.len() > MAX_PANELS {
                return Err(LabError::Quadrature(format!(
                    "more than {MAX_PANELS} panels needed for tolerance {tol:e}"
                )));
            }
            let coarse = Panel::new(a, b, BASE_ORDER);
            let fine = Panel::new(a, b, 2 * BASE_ORDER);
            let diff = max_abs(&(panel_sum(&coarse, &probe) - panel_sum(&fine, &probe)));
            if !diff.is_finite() {
                return Err(LabError::Quadrature(format!(
                    "non-finite integrand on panel ({}, {})",
                    a.tan(),
                    b.tan()
                )));
            }
            let local = tol * (b - a) / span;
            if diff <= local {
                accepted.push(fine);
            } else if b - a < MIN_WIDTH {
                return Err(LabError::Quadrature(format!(
                    "panel near x = {} cannot be refined further (error estimate {diff:e})",
                    (0.5 * (a + b)).tan()
                )));
            } else {
                let mid = 0.5 * (a + b);
                stack.push((mid, b));
                stack.push((a, mid));
            }
        }
        accepted.sort_by(|p, q| p.a.total_cmp(&q.a));
        Ok(Self {
            panels: accepted,
            refinement_centers: centers.to_vec(),
            tol,
        })
    }

    /// Same panels, twice the nodes on each.
    pub fn doubled(&self) -> Self {
        Self {
            panels: self
                .panels
                .iter()
                .map(|p| Panel::new(p.a, p.b, 2 * p.nodes.len()))
                .collect(),
            refinement_centers: self.refinement_centers.clone(),
            tol: self.tol,
        }
    }

    /// Nodes `x` and weights including the `sec²θ` Jacobian.
    pub fn points(&self) -> Vec<(f64, f64)> {
        let mut out = Vec::with_capacity(self.len());
        for p in &self.panels {
            for (&t, &w) in p.nodes.iter().zip(&p.weights) {
                let c = t.cos();
                out.push((t.tan(), w / (c * c)));
            }
        }
        out
    }

    pub fn len(&self) -> usize {
        self.panels.iter().map(|p| p.nodes.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.panels.is_empty()
    }

    pub fn integrate<F>(&self, f: F) -> CMat
    where
        F: Fn(f64) -> CMat,
    {
        let mut total: Option<CMat> = None;
        for p in &self.panels {
            let s = panel_sum(p, &f);
            total = Some(match total {
                Some(t) => t + s,
                None => s,
            });
        }
        total.unwrap_or_else(|| CMat::zeros(0, 0))
    }

    pub fn integrate_scalar<F>(&self, f: F) -> Complex64
    where
        F: Fn(f64) -> Complex64,
    {
        self.points().into_iter().map(|(x, w)| f(x) * w).sum()
    }
}

fn panel_sum<F>(p: &Panel, f: &F) -> CMat
where
    F: Fn(f64) -> CMat,
{
    let mut total: Option<CMat> = None;
    for (&t, &w) in p.nodes.iter().zip(&p.weights) {
        let c = t.cos();
        let v = f(t.tan()) * Complex64::new(w / (c * c), 0.0);
        total = Some(match total {
            Some(acc) => acc + v,
            None => v,
        });
    }
    total.expect("panels carry at least one node")
}

fn max_abs(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Wraps a scalar integrand as a 1×1 probe.
pub fn scalar_probe<F>(f: F) -> impl Fn(f64) -> CMat
where
    F: Fn(f64) -> Complex64,
{
    move |x| CMat::from_element(1, 1, f(x))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn gauss_legendre_is_exact_for_polynomials() {
        for n in [1, 2, 5, 10, 20, 32] {
            let (x, w) = gauss_legendre(n);
            assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-13, "n = {n}");
            for deg in 0..(2 * n) {
                let got: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(deg as i32)).sum();
                let want = if deg % 2 == 1 { 0.0 } else { 2.0 / (deg as f64 + 1.0) };
                assert!((got - want).abs() < 1e-13, "n = {n}, degree {deg}");
            }
        }
    }

    #[test]
    fn poisson_kernel_mass() {
        let probe = scalar_probe(|x| Complex64::new(1.0 / (PI * (x * x + 1.0)), 0.0));
        let g = QuadratureGrid::adapt(&[Complex64::new(0.0, 1.0)], 1e-10, &probe).unwrap();
        let total = g.integrate(&probe)[(0, 0)];
        assert!((total.re - 1.0).abs() < 1e-10);
        let again = g.doubled().integrate(&probe)[(0, 0)];
        assert!((again - total).norm() < 1e-10);
    }

    #[test]
    fn narrow_peak_is_resolved() {
        let eps = 1e-2;
        let probe = scalar_probe(move |x| Complex64::new(eps / (PI * ((x - 3.0).powi(2) + eps * eps)), 0.0));
        let g = QuadratureGrid::adapt(&[Complex64::new(3.0, eps)], 1e-9, &probe).unwrap();
        assert!((g.integrate(&probe)[(0, 0)].re - 1.0).abs() < 1e-9);
    }

    #[test]
    fn bounded_interval() {
        let probe = scalar_probe(|x| Complex64::new(1.0 / (PI * (x * x + 1.0)), 0.0));
        let g = QuadratureGrid::adapt_interval(&[], 1e-12, -1.0, 1.0, &probe).unwrap();
        assert!((g.integrate(&probe)[(0, 0)].re - 0.5).abs() < 1e-12);
        assert!(QuadratureGrid::adapt_interval(&[], 1e-12, 1.0, 1.0, &probe).is_err());
    }

    #[test]
    fn nonpositive_tolerance_rejected() {
        let probe = scalar_probe(|_| Complex64::new(0.0, 0.0));
        assert!(QuadratureGrid::adapt(&[], 0.0, &probe).is_err());
    }
}
