//! Finite-dimensional laboratory for the functional calculus of dissipative matrices,
//! double operator integrals with divided-difference kernels, and spectral shift
//! functions of relatively trace-class perturbations.
//!
//! Every operator is a dense complex square matrix. The modules are layered:
//!
//! - [`matrix`], [`operator`]: the matrix substrate, dissipativity, Cayley transforms and
//!   relative-perturbation constants.
//! - [`funcalc`]: rational functions on the closed upper half-plane and `f(L)`.
//! - [`quadrature`], [`semispectral`]: densities of semi-spectral measures, finite unitary
//!   dilations and their cross-validation.
//! - [`doi`]: double operator integrals, operator-difference and derivative formulas.
//! - [`shift`]: the spectral shift function pipeline and trace formula.
//! - [`multiplier`]: certified Schur-multiplier norm brackets on finite grids.
//! - [`harness`]: instance generation, suites, configuration and reports.

pub mod doi;
pub mod error;
pub mod funcalc;
pub mod harness;
pub mod hexfloat;
pub mod matrix;
pub mod multiplier;
pub mod operator;
pub mod quadrature;
pub mod semispectral;
pub mod shift;

pub use error::{LabError, Result};
pub use funcalc::{AnalyticFunction, NamedFunction};
pub use matrix::{CMat, OperatorMatrix};
pub use operator::{DissipativePair, PathFamily};
