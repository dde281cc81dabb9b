//! Rational functions on the closed upper half-plane and the matrix functional calculus.
//!
//! An [`AnalyticFunction`] is an expression tree built from constants, simple poles in the
//! open lower half-plane, and polynomials in the disk variable `b(z) = (z − i)/(z + i)`.
//! Values, derivatives and divided differences are all computed by exact rules on the
//! tree, so a divided difference never goes through `(f(z) − f(w))/(z − w)`.

use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::matrix::{op_norm, shifted, OperatorMatrix, I};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Default bound on pole positions: every pole satisfies `Im p ≤ −POLE_GAP`.
pub const POLE_GAP: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnalyticFunction {
    Const(Complex64),
    /// `(z − p)⁻¹` with `Im p < 0`.
    Pole(Complex64),
    Sum(Vec<AnalyticFunction>),
    Product(Vec<AnalyticFunction>),
    /// `Σ c_k b(z)^k` with coefficients in increasing degree.
    DiskPoly(Vec<Complex64>),
}

use AnalyticFunction::*;

fn b_of(z: Complex64) -> Complex64 {
    (z - I) / (z + I)
}

fn horner(coeffs: &[Complex64], u: Complex64) -> Complex64 {
    coeffs.iter().rev().fold(ZERO, |acc, &c| acc * u + c)
}

fn horner_deriv(coeffs: &[Complex64], u: Complex64) -> Complex64 {
    coeffs
        .iter()
        .enumerate()
        .skip(1)
        .rev()
        .fold(ZERO, |acc, (k, &c)| acc * u + c * k as f64)
}

/// `(P(u) − P(v))/(u − v)` as `Σ_k c_k Σ_{j<k} u^j v^{k−1−j}`.
fn poly_divided_diff(coeffs: &[Complex64], u: Complex64, v: Complex64) -> Complex64 {
    // h_k = Σ_{j<k} u^j v^{k−1−j} obeys h_{k+1} = u·h_k + v^k.
    let mut total = ZERO;
    let mut h = ZERO;
    let mut v_pow = ONE;
    for &c in coeffs.iter().skip(1) {
        h = h * u + v_pow;
        v_pow *= v;
        total += c * h;
    }
    total
}

fn check_domain(z: Complex64) -> Result<()> {
    if z.im < 0.0 || !z.re.is_finite() || !z.im.is_finite() {
        Err(LabError::Domain { z })
    } else {
        Ok(())
    }
}

impl AnalyticFunction {
    pub fn constant(c: Complex64) -> Self {
        Const(c)
    }

    pub fn pole(p: Complex64) -> Result<Self> {
        if !(p.im < 0.0) {
            return Err(LabError::Argument(format!(
                "pole {p} must lie in the open lower half-plane"
            )));
        }
        Ok(Pole(p))
    }

    /// `(z + i)⁻ᵏ` as a product node.
    pub fn resolvent_power(k: usize) -> Self {
        match k {
            0 => Const(ONE),
            1 => Pole(-I),
            _ => Product(vec![Pole(-I); k]),
        }
    }

    /// `b(z) = (z − i)/(z + i)`.
    pub fn disk_variable() -> Self {
        DiskPoly(vec![ZERO, ONE])
    }

    pub fn times(self, other: Self) -> Self {
        Product(vec![self, other])
    }

    pub fn plus(self, other: Self) -> Self {
        Sum(vec![self, other])
    }

    pub fn scaled(self, c: Complex64) -> Self {
        Product(vec![Const(c), self])
    }

    /// `f_i(z) = f(z)/(z + i)`.
    pub fn shrink_by_pole(&self) -> Self {
        Product(vec![self.clone(), Pole(-I)])
    }

    /// Every pole satisfies `Im p ≤ −gap`.
    pub fn check_poles(&self, gap: f64) -> Result<()> {
        match self {
            Pole(p) if p.im > -gap => Err(LabError::Argument(format!(
                "pole {p} closer than {gap} to the real axis"
            ))),
            Sum(v) | Product(v) => v.iter().try_for_each(|f| f.check_poles(gap)),
            _ => Ok(()),
        }
    }

    pub fn eval(&self, z: Complex64) -> Result<Complex64> {
        check_domain(z)?;
        Ok(self.value(z))
    }

    pub fn derivative(&self, z: Complex64) -> Result<Complex64> {
        check_domain(z)?;
        Ok(self.deriv(z))
    }

    pub fn divided_diff(&self, z: Complex64, w: Complex64) -> Result<Complex64> {
        check_domain(z)?;
        check_domain(w)?;
        Ok(self.dd(z, w))
    }

    /// Value without the domain check.
    pub(crate) fn value(&self, z: Complex64) -> Complex64 {
        match self {
            Const(c) => *c,
            Pole(p) => ONE / (z - p),
            Sum(v) => v.iter().map(|f| f.value(z)).sum(),
            Product(v) => v.iter().map(|f| f.value(z)).product(),
            DiskPoly(c) => horner(c, b_of(z)),
        }
    }

    pub(crate) fn deriv(&self, z: Complex64) -> Complex64 {
        match self {
            Const(_) => ZERO,
            Pole(p) => {
                let r = ONE / (z - p);
                -r * r
            }
            Sum(v) => v.iter().map(|f| f.deriv(z)).sum(),
            Product(v) => {
                let values: Vec<Complex64> = v.iter().map(|f| f.value(z)).collect();
                (0..v.len())
                    .map(|k| {
                        let others: Complex64 = values
                            .iter()
                            .enumerate()
                            .filter(|&(j, _)| j != k)
                            .map(|(_, &x)| x)
                            .product();
                        v[k].deriv(z) * others
                    })
                    .sum()
            }
            DiskPoly(c) => {
                let r = ONE / (z + I);
                horner_deriv(c, b_of(z)) * 2.0 * I * r * r
            }
        }
    }

    /// Symbolic divided difference; the diagonal gives `f′(z)`.
    pub(crate) fn dd(&self, z: Complex64, w: Complex64) -> Complex64 {
        match self {
            Const(_) => ZERO,
            Pole(p) => -(ONE / (z - p)) * (ONE / (w - p)),
            Sum(v) => v.iter().map(|f| f.dd(z, w)).sum(),
            Product(v) => {
                // 𝔇(f₁⋯fₙ) = Σ_k f₁(z)⋯f_{k−1}(z)·𝔇f_k(z,w)·f_{k+1}(w)⋯fₙ(w)
                let at_z: Vec<Complex64> = v.iter().map(|f| f.value(z)).collect();
                let at_w: Vec<Complex64> = v.iter().map(|f| f.value(w)).collect();
                let n = v.len();
                let mut suffix = vec![ONE; n + 1];
                for k in (0..n).rev() {
                    suffix[k] = suffix[k + 1] * at_w[k];
                }
                let mut prefix = ONE;
                let mut total = ZERO;
                for k in 0..n {
                    total += prefix * v[k].dd(z, w) * suffix[k + 1];
                    prefix *= at_z[k];
                }
                total
            }
            DiskPoly(c) => {
                let db = 2.0 * I / ((z + I) * (w + I));
                poly_divided_diff(c, b_of(z), b_of(w)) * db
            }
        }
    }

    /// `lim_{|z|→∞} f(z)`.
    pub fn limit_at_infinity(&self) -> Complex64 {
        match self {
            Const(c) => *c,
            Pole(_) => ZERO,
            Sum(v) => v.iter().map(|f| f.limit_at_infinity()).sum(),
            Product(v) => v.iter().map(|f| f.limit_at_infinity()).product(),
            DiskPoly(c) => c.iter().sum(),
        }
    }

    /// `φ = f∘ω` on the closed disk, `ω(ζ) = i(1 + ζ)/(1 − ζ)`.
    pub fn transplant_to_disk(&self) -> DiskFunction {
        DiskFunction { inner: self.clone() }
    }
}

impl fmt::Display for AnalyticFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fn cplx(c: &Complex64) -> String {
            format!("({}{:+}i)", c.re, c.im)
        }
        match self {
            Const(c) => write!(f, "{}", cplx(c)),
            Pole(p) => write!(f, "(z-{})^-1", cplx(p)),
            Sum(v) => {
                let parts: Vec<String> = v.iter().map(|g| g.to_string()).collect();
                write!(f, "[{}]", parts.join(" + "))
            }
            Product(v) => {
                let parts: Vec<String> = v.iter().map(|g| g.to_string()).collect();
                write!(f, "{}", parts.join("*"))
            }
            DiskPoly(c) => {
                let parts: Vec<String> =
                    c.iter().enumerate().map(|(k, a)| format!("{}b^{k}", cplx(a))).collect();
                write!(f, "P[{}]", parts.join(" + "))
            }
        }
    }
}

/// A function on the closed unit disk obtained by transplanting from the half-plane.
#[derive(Debug, Clone, PartialEq)]
pub struct DiskFunction {
    inner: AnalyticFunction,
}

impl DiskFunction {
    pub fn source(&self) -> &AnalyticFunction {
        &self.inner
    }

    pub fn eval(&self, zeta: Complex64) -> Result<Complex64> {
        if zeta.norm() > 1.0 + 1e-12 {
            return Err(LabError::Argument(format!("{zeta} lies outside the closed unit disk")));
        }
        if (zeta - ONE).norm() < 1e-14 {
            return Err(LabError::Pole { zeta });
        }
        Ok(Self::value(&self.inner, zeta))
    }

    // Each node is rewritten in ζ directly: (ω(ζ) − p)⁻¹ = (1 − ζ)/((i − p) + (i + p)ζ) and
    // b(ω(ζ)) = ζ, so nothing passes through ω itself.
    fn value(f: &AnalyticFunction, zeta: Complex64) -> Complex64 {
        match f {
            Const(c) => *c,
            Pole(p) => (ONE - zeta) / ((I - p) + (I + p) * zeta),
            Sum(v) => v.iter().map(|g| Self::value(g, zeta)).sum(),
            Product(v) => v.iter().map(|g| Self::value(g, zeta)).product(),
            DiskPoly(c) => horner(c, zeta),
        }
    }
}

/// Imaginary parts in `(−tol, 0)` are treated as rounding and projected onto `ℝ`.
pub fn eigen_tol(l: &OperatorMatrix) -> f64 {
    1e-9 * l.op_norm().max(1.0)
}

/// Eigenvalues of `l`, conditioning-gated and projected onto the closed upper half-plane.
pub fn upper_eigenvalues(l: &OperatorMatrix) -> Result<Vec<Complex64>> {
    let spec = l.spectral()?;
    spec.check_conditioning()?;
    let tol = eigen_tol(l);
    spec.eigenvalues
        .iter()
        .map(|&z| {
            if z.im < -tol {
                Err(LabError::NonDissipative { min_imag: z.im })
            } else {
                Ok(Complex64::new(z.re, z.im.max(0.0)))
            }
        })
        .collect()
}

/// `f(L) = V·diag(f(λ_j))·V⁻¹`.
pub fn apply(f: &AnalyticFunction, l: &OperatorMatrix) -> Result<OperatorMatrix> {
    let eig = upper_eigenvalues(l)?;
    let values: Vec<Complex64> = eig.iter().map(|&z| f.value(z)).collect();
    Ok(OperatorMatrix::wrap(l.spectral()?.reconstruct(&values)))
}

/// `f(L) = (L + iI)·f_i(L)`.
pub fn apply_unbounded_form(f: &AnalyticFunction, l: &OperatorMatrix) -> Result<OperatorMatrix> {
    let fi = apply(&f.shrink_by_pole(), l)?;
    Ok(OperatorMatrix::wrap(shifted(l.entries(), I) * fi.entries()))
}

/// `φ(T)` by the eigen path on a contraction `T`.
pub fn apply_disk(phi: &DiskFunction, t: &OperatorMatrix) -> Result<OperatorMatrix> {
    let spec = t.spectral()?;
    spec.check_conditioning()?;
    let tol = 1e-9 * op_norm(t.entries()).max(1.0);
    let values = spec
        .eigenvalues
        .iter()
        .map(|&z| {
            let r = z.norm();
            if r > 1.0 + tol {
                return Err(LabError::NotContraction { norm: r });
            }
            let z = if r > 1.0 { z / r } else { z };
            phi.eval(z)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(OperatorMatrix::wrap(spec.reconstruct(&values)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BatteryKind {
    ResolventPowers,
    LowerPoles,
    DiskPolys,
    Mixed,
}

/// A battery member tagged with a stable identifier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedFunction {
    pub id: String,
    pub f: AnalyticFunction,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BatterySpec {
    pub kinds: Vec<BatteryKind>,
    pub count: usize,
    /// Poles for `lower_poles`, as `[re, im]`.
    pub poles: Vec<[f64; 2]>,
}

impl Default for BatterySpec {
    fn default() -> Self {
        Self {
            kinds: vec![
                BatteryKind::ResolventPowers,
                BatteryKind::LowerPoles,
                BatteryKind::DiskPolys,
                BatteryKind::Mixed,
            ],
            count: 3,
            poles: vec![[0.0, -2.0], [1.0, -1.0], [-1.0, -0.5], [0.5, -1.5]],
        }
    }
}

impl BatterySpec {
    pub fn build(&self) -> Result<Vec<NamedFunction>> {
        let mut out = Vec::new();
        for &kind in &self.kinds {
            let poles: Vec<Complex64> =
                self.poles.iter().map(|p| Complex64::new(p[0], p[1])).collect();
            out.extend(battery(kind, self.count, &poles)?);
        }
        Ok(out)
    }
}

/// Deterministic test corpus. `count` bounds the number of members for every kind except
/// `lower_poles`, which yields one member per pole.
pub fn battery(kind: BatteryKind, count: usize, poles: &[Complex64]) -> Result<Vec<NamedFunction>> {
    let c = |re: f64, im: f64| Complex64::new(re, im);
    let out: Vec<NamedFunction> = match kind {
        BatteryKind::ResolventPowers => (1..=count)
            .map(|k| NamedFunction {
                id: format!("res_pow_{k}"),
                f: AnalyticFunction::resolvent_power(k),
            })
            .collect(),
        BatteryKind::LowerPoles => poles
            .iter()
            .map(|&p| {
                AnalyticFunction::pole(p).map(|f| NamedFunction {
                    id: format!("pole_{}_{}", p.re, p.im),
                    f,
                })
            })
            .collect::<Result<_>>()?,
        BatteryKind::DiskPolys => (1..=count)
            .map(|k| {
                let mut coeffs: Vec<Complex64> = (0..k)
                    .map(|j| c(0.5 * ((j + 1) as f64 * 0.37).sin(), 0.2 * (j as f64 * 1.3).cos()))
                    .collect();
                coeffs.push(ONE);
                NamedFunction {
                    id: format!("disk_poly_{k}"),
                    f: DiskPoly(coeffs),
                }
            })
            .collect(),
        BatteryKind::Mixed => {
            let b = AnalyticFunction::disk_variable;
            let members = vec![
                ("mixed_res_b", Pole(-I).times(b())),
                (
                    "mixed_pole_combo",
                    Pole(c(0., -3.)).scaled(c(2., 0.)).plus(Product(vec![
                        Const(c(-1., 0.)),
                        Pole(-I),
                        Pole(c(0., -2.)),
                    ])),
                ),
                (
                    "mixed_shifted_b2",
                    Const(c(0.5, 0.)).plus(Pole(c(-1., -1.)).times(DiskPoly(vec![ZERO, ZERO, ONE]))),
                ),
                (
                    "mixed_sq_pole_b",
                    Product(vec![Pole(c(0., -2.)), Pole(c(0., -2.)), DiskPoly(vec![ONE, ONE])]),
                ),
            ];
            members
                .into_iter()
                .take(count.max(1))
                .map(|(id, f)| NamedFunction { id: id.into(), f })
                .collect()
        }
    };
    for g in &out {
        g.f.check_poles(POLE_GAP)?;
    }
    Ok(out)
}

/// The default battery: every kind, three members each where `count` applies.
pub fn default_battery() -> Vec<NamedFunction> {
    BatterySpec::default()
        .build()
        .expect("default battery poles respect the pole gap")
}
