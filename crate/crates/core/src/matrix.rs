//! Dense complex matrices with a lazily computed eigendecomposition.
//!
//! Everything in the crate is built on [`OperatorMatrix`]. The eigen path
//! (complex Schur form followed by back substitution on the triangular
//! factor) is the only route to spectral data, and its eigenvector
//! condition number travels with the cache so that consumers can refuse
//! nearly defective inputs.

use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{LabError, Result};

pub type CMat = DMatrix<Complex64>;
pub type CVec = DVector<Complex64>;

pub const I: Complex64 = Complex64::new(0.0, 1.0);

/// Eigenvector condition numbers above this are rejected by eigen-path operations.
pub const CONDITION_LIMIT: f64 = 1e8;

/// Eigen-residual the spectral cache must meet, relative to `‖X‖·‖V‖`.
pub const SPECTRAL_RESIDUAL_LIMIT: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct SpectralData {
    pub eigenvalues: Vec<Complex64>,
    /// Right eigenvectors as unit-norm columns.
    pub vectors: CMat,
    pub vectors_inv: CMat,
    /// cond₂ of `vectors`.
    pub condition: f64,
    /// `‖XV − VΛ‖ / (‖X‖‖V‖)`.
    pub residual: f64,
}

impl SpectralData {
    /// `V · diag(values) · V⁻¹`.
    pub fn reconstruct(&self, values: &[Complex64]) -> CMat {
        let n = self.eigenvalues.len();
        let mut scaled = self.vectors.clone();
        for j in 0..n {
            let v = values[j];
            scaled.column_mut(j).iter_mut().for_each(|e| *e *= v);
        }
        scaled * &self.vectors_inv
    }

    pub fn check_conditioning(&self) -> Result<()> {
        if !self.condition.is_finite() || self.condition > CONDITION_LIMIT {
            return Err(LabError::Conditioning {
                condition: self.condition,
                limit: CONDITION_LIMIT,
            });
        }
        Ok(())
    }
}

/// A dense complex square matrix.
#[derive(Debug, Clone)]
pub struct OperatorMatrix {
    entries: CMat,
    spectral: OnceLock<std::result::Result<SpectralData, LabError>>,
}

impl PartialEq for OperatorMatrix {
    fn eq(&self, other: &Self) -> bool {
        self.entries == other.entries
    }
}

impl OperatorMatrix {
    pub fn new(entries: CMat) -> Result<Self> {
        if entries.nrows() != entries.ncols() {
            return Err(LabError::Dimension(format!(
                "expected a square matrix, got {}x{}",
                entries.nrows(),
                entries.ncols()
            )));
        }
        if entries.nrows() == 0 {
            return Err(LabError::Dimension("empty matrix".into()));
        }
        Ok(Self::wrap(entries))
    }

    pub(crate) fn wrap(entries: CMat) -> Self {
        debug_assert_eq!(entries.nrows(), entries.ncols());
        Self {
            entries,
            spectral: OnceLock::new(),
        }
    }

    /// Builds from row-major complex entries.
    pub fn from_rows(rows: &[Vec<Complex64>]) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(LabError::Dimension("rows have inconsistent length".into()));
        }
        Self::new(CMat::from_fn(n, n, |i, j| rows[i][j]))
    }

    pub fn scalar(value: Complex64) -> Self {
        Self::wrap(CMat::from_element(1, 1, value))
    }

    pub fn identity(dim: usize) -> Self {
        Self::wrap(CMat::identity(dim, dim))
    }

    pub fn zeros(dim: usize) -> Self {
        Self::wrap(CMat::zeros(dim, dim))
    }

    pub fn diagonal(values: &[Complex64]) -> Self {
        Self::wrap(CMat::from_diagonal(&CVec::from_column_slice(values)))
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &CMat {
        &self.entries
    }

    pub fn into_entries(self) -> CMat {
        self.entries
    }

    pub fn adjoint(&self) -> Self {
        Self::wrap(self.entries.adjoint())
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        check_same_dim(self, other)?;
        Ok(Self::wrap(&self.entries + &other.entries))
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        check_same_dim(self, other)?;
        Ok(Self::wrap(&self.entries - &other.entries))
    }

    pub fn mul(&self, other: &Self) -> Result<Self> {
        check_same_dim(self, other)?;
        Ok(Self::wrap(&self.entries * &other.entries))
    }

    pub fn scale(&self, s: Complex64) -> Self {
        Self::wrap(&self.entries * s)
    }

    /// `X + s·I`.
    pub fn shift(&self, s: Complex64) -> Self {
        Self::wrap(shifted(&self.entries, s))
    }

    /// `(X − X*)/(2i)`.
    pub fn imag_part(&self) -> CMat {
        imag_part(&self.entries)
    }

    pub fn trace(&self) -> Complex64 {
        self.entries.trace()
    }

    pub fn op_norm(&self) -> f64 {
        op_norm(&self.entries)
    }

    /// Spectral data, computed on first use.
    pub fn spectral(&self) -> Result<&SpectralData> {
        self.spectral
            .get_or_init(|| eigen_decompose(&self.entries))
            .as_ref()
            .map_err(Clone::clone)
    }

    pub fn eigenvector_condition(&self) -> Result<f64> {
        self.spectral().map(|s| s.condition)
    }
}

fn check_same_dim(a: &OperatorMatrix, b: &OperatorMatrix) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(LabError::Dimension(format!(
            "dimension mismatch: {} vs {}",
            a.dim(),
            b.dim()
        )));
    }
    Ok(())
}

pub fn shifted(m: &CMat, s: Complex64) -> CMat {
    let mut out = m.clone();
    for k in 0..m.nrows().min(m.ncols()) {
        out[(k, k)] += s;
    }
    out
}

pub fn imag_part(m: &CMat) -> CMat {
    (m - m.adjoint()) * Complex64::new(0.0, -0.5)
}

pub fn hermitian_part(m: &CMat) -> CMat {
    (m + m.adjoint()) * Complex64::new(0.5, 0.0)
}

pub fn singular_values(m: &CMat) -> Vec<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Vec::new();
    }
    let mut s: Vec<f64> = m.clone().svd(false, false).singular_values.iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

/// Singular triplets with `σ > 1e−15·σ₁`, sorted by decreasing `σ`: `m ≈ U·diag(s)·V*`.
#[derive(Debug, Clone)]
pub struct ThinSvd {
    pub u: CMat,
    pub s: Vec<f64>,
    pub v: CMat,
}

/// Thin SVD, checked by recomposition.
///
/// The bidiagonal QR iteration occasionally returns inconsistent singular vectors on
/// highly structured input (all-ones matrices of odd size, for one), so a failed check
/// falls back to the Hermitian eigenproblem of `[[0, M], [M*, 0]]`, whose eigenpairs are
/// `±σ` with vectors `(u, ±v)/√2`.
pub fn thin_svd(m: &CMat) -> ThinSvd {
    let (rows, cols) = m.shape();
    if rows == 0 || cols == 0 {
        return ThinSvd { u: CMat::zeros(rows, 0), s: vec![], v: CMat::zeros(cols, 0) };
    }
    let svd = m.clone().svd(true, true);
    let (u, vt) = (svd.u.expect("requested"), svd.v_t.expect("requested"));
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let top = svd.singular_values[order[0]];
    let keep: Vec<usize> = order.into_iter().filter(|&k| svd.singular_values[k] > 1e-15 * top).collect();
    let cand = ThinSvd {
        u: CMat::from_fn(rows, keep.len(), |i, c| u[(i, keep[c])]),
        s: keep.iter().map(|&k| svd.singular_values[k]).collect(),
        v: CMat::from_fn(cols, keep.len(), |i, c| vt[(keep[c], i)].conj()),
    };
    let scale = m.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if scale == 0.0 || cand.recompose_error(m) <= 1e-12 * scale * (rows.max(cols) as f64) {
        return cand;
    }
    jordan_wielandt(m)
}

fn jordan_wielandt(m: &CMat) -> ThinSvd {
    let (rows, cols) = m.shape();
    let n = rows + cols;
    let mut h = CMat::zeros(n, n);
    h.view_mut((0, rows), (rows, cols)).copy_from(m);
    h.view_mut((rows, 0), (cols, rows)).copy_from(&m.adjoint());
    let (vals, vecs) = hermitian_eigen(&h);
    let top = vals.iter().copied().fold(0.0, |a: f64, b| a.max(b.abs()));
    let sqrt2 = Complex64::new(2f64.sqrt(), 0.0);
    let keep: Vec<usize> = (0..n).rev().filter(|&k| vals[k] > 1e-15 * top).take(rows.min(cols)).collect();
    ThinSvd {
        u: CMat::from_fn(rows, keep.len(), |i, c| vecs[(i, keep[c])] * sqrt2),
        s: keep.iter().map(|&k| vals[k]).collect(),
        v: CMat::from_fn(cols, keep.len(), |i, c| vecs[(rows + i, keep[c])] * sqrt2),
    }
}

impl ThinSvd {
    pub fn rank(&self) -> usize {
        self.s.len()
    }

    pub fn recompose(&self) -> CMat {
        let mut us = self.u.clone();
        for (j, &s) in self.s.iter().enumerate() {
            us.column_mut(j).iter_mut().for_each(|e| *e *= s);
        }
        us * self.v.adjoint()
    }

    fn recompose_error(&self, m: &CMat) -> f64 {
        (self.recompose() - m).iter().map(|z| z.norm()).fold(0.0, f64::max)
    }
}

pub fn op_norm(m: &CMat) -> f64 {
    singular_values(m).first().copied().unwrap_or(0.0)
}

pub fn trace_norm(m: &CMat) -> f64 {
    singular_values(m).iter().sum()
}

pub fn condition_number(m: &CMat) -> f64 {
    let s = singular_values(m);
    match (s.first(), s.last()) {
        (Some(&hi), Some(&lo)) if lo > 0.0 => hi / lo,
        _ => f64::INFINITY,
    }
}

/// Eigenvalues (ascending) and orthonormal eigenvectors of a Hermitian matrix.
pub fn hermitian_eigen(h: &CMat) -> (Vec<f64>, CMat) {
    let sym = hermitian_part(h);
    let eig = SymmetricEigen::new(sym);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let vectors = CMat::from_fn(h.nrows(), order.len(), |i, j| eig.eigenvectors[(i, order[j])]);
    (values, vectors)
}

pub fn min_hermitian_eigenvalue(h: &CMat) -> f64 {
    hermitian_eigen(h).0.first().copied().unwrap_or(0.0)
}

/// Square root of a positive semidefinite matrix; negative rounding noise is clipped.
pub fn psd_sqrt(h: &CMat) -> CMat {
    let (values, vectors) = hermitian_eigen(h);
    let n = values.len();
    let mut scaled = vectors.clone();
    for j in 0..n {
        let r = Complex64::new(values[j].max(0.0).sqrt(), 0.0);
        scaled.column_mut(j).iter_mut().for_each(|e| *e *= r);
    }
    scaled * vectors.adjoint()
}

/// Inverse through LU, refusing matrices whose reciprocal condition is below `1e-14`.
pub fn inverse(m: &CMat) -> Result<CMat> {
    let n = m.nrows();
    let inv = m
        .clone()
        .lu()
        .try_inverse()
        .ok_or_else(|| LabError::Singular(format!("{n}x{n} matrix has no LU inverse")))?;
    let cond = op_norm(m) * op_norm(&inv);
    if !cond.is_finite() || cond > 1e14 {
        return Err(LabError::Singular(format!("condition number {cond:e}")));
    }
    Ok(inv)
}

/// Complex Schur form `m = Q T Q*`.
///
/// The Francis iteration can stall on highly structured input (cyclic shifts, for
/// instance), so on failure the matrix is conjugated by a fixed pseudo-random unitary
/// and the factorization is retried.
pub fn schur(m: &CMat) -> (CMat, CMat) {
    let n = m.nrows();
    let limit = 2000 * n.max(1);
    if let Some(s) = m.clone().try_schur(f64::EPSILON, limit) {
        return s.unpack();
    }
    for seed in 1..=4u32 {
        let w = scrambler(n, seed);
        let conj = w.adjoint() * m * &w;
        if let Some(s) = conj.try_schur(f64::EPSILON, limit) {
            let (q, t) = s.unpack();
            return (w * q, t);
        }
    }
    panic!("Schur iteration failed on a {n}x{n} matrix after scrambling");
}

fn scrambler(n: usize, seed: u32) -> CMat {
    let s = seed as f64;
    let g = CMat::from_fn(n, n, |j, k| {
        let (j, k) = (j as f64, k as f64);
        Complex64::new((1.7 * j + 2.3 * k * k + s).sin(), (0.9 * j * j + 3.1 * k + 2.0 * s).cos())
    });
    g.qr().q()
}

/// Eigenvalues from the complex Schur form, without eigenvectors.
pub fn schur_eigenvalues(m: &CMat) -> Vec<Complex64> {
    let (_, t) = schur(m);
    (0..t.nrows()).map(|k| t[(k, k)]).collect()
}

/// Unitary `Q` and diagonal of the Schur form; for a normal matrix the columns of `Q`
/// are orthonormal eigenvectors.
pub fn schur_normal(m: &CMat) -> (CMat, Vec<Complex64>) {
    let (q, t) = schur(m);
    let d = (0..t.nrows()).map(|k| t[(k, k)]).collect();
    (q, d)
}

/// Complex eigendecomposition through the Schur form.
pub fn eigen_decompose(m: &CMat) -> std::result::Result<SpectralData, LabError> {
    let n = m.nrows();
    let (q, t) = schur(m);
    let scale = t.iter().map(|z| z.norm()).fold(0.0f64, f64::max).max(f64::MIN_POSITIVE);
    let smin = f64::EPSILON * scale;

    // Back substitution on the triangular factor, one eigenvector per diagonal entry.
    let mut y = CMat::zeros(n, n);
    for k in 0..n {
        let lambda = t[(k, k)];
        y[(k, k)] = Complex64::new(1.0, 0.0);
        for j in (0..k).rev() {
            let mut s = Complex64::new(0.0, 0.0);
            for l in (j + 1)..=k {
                s += t[(j, l)] * y[(l, k)];
            }
            let mut d = t[(j, j)] - lambda;
            if d.norm() < smin {
                d = Complex64::new(smin, 0.0);
            }
            y[(j, k)] = -s / d;
        }
    }
    let mut vectors = q * y;
    for j in 0..n {
        let norm = vectors.column(j).norm();
        if norm > 0.0 {
            vectors.column_mut(j).unscale_mut(norm);
        }
    }
    let eigenvalues: Vec<Complex64> = (0..n).map(|k| t[(k, k)]).collect();
    let condition = condition_number(&vectors);
    let vectors_inv = vectors
        .clone()
        .lu()
        .try_inverse()
        .ok_or(LabError::Conditioning {
            condition: f64::INFINITY,
            limit: CONDITION_LIMIT,
        })?;
    let lambda = CMat::from_diagonal(&CVec::from_column_slice(&eigenvalues));
    let denom = (op_norm(m) * op_norm(&vectors)).max(f64::MIN_POSITIVE);
    let residual = op_norm(&(m * &vectors - &vectors * lambda)) / denom;
    Ok(SpectralData {
        eigenvalues,
        vectors,
        vectors_inv,
        condition,
        residual,
    })
}

/// Relative distance `‖a − b‖ / max(1, ‖b‖)` in operator norm.
pub fn rel_diff(a: &CMat, b: &CMat) -> f64 {
    op_norm(&(a - b)) / op_norm(b).max(1.0)
}
