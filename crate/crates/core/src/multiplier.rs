//! Schur-multiplier norm brackets on finite grids.
//!
//! For a matrix `M` the multiplier norm `‖M‖_𝔐 = sup_{‖X‖ ≤ 1} ‖M ∘ X‖` equals the
//! factorization norm `min_{M = AB} max_j‖row_j A‖·max_k‖col_k B‖` and also
//! `sup_{α, β} ‖D_√α M D_√β‖_{S₁}` over probability vectors `α, β`. Both sides are
//! computed with witnesses, so every bracket `lower ≤ ‖M‖_𝔐 ≤ upper` is certified by
//! arithmetic that can be re-checked independently of the search that produced it.
//!
//! The factorization search works in the range of `M`: with the thin SVD
//! `M = Ũ Ṽ` (`Ũ = U_r Σ^{1/2}`, `Ṽ = Σ^{1/2} V_r*`), factorizations `A = ŨG`,
//! `B = G⁻¹Ṽ` are parametrized by `P = GG* ≻ 0`. Dual weights `(α, β)` are updated
//! multiplicatively toward the longest rows and columns, and `P` is the best response
//! `X⁻¹ # Y` (matrix geometric mean) with `X = Ũ*D_αŨ`, `Y = ṼD_βṼ*`.

use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::doi::Kernel;
use crate::error::Result;
use crate::funcalc::{apply, apply_disk, AnalyticFunction};
use crate::matrix::{hermitian_eigen, inverse, op_norm, shifted, singular_values, thin_svd, trace_norm, CMat, I};
use crate::operator::{cayley, random_dissipative, random_unit_vector, rng_from_seed};

pub const RESTARTS: usize = 32;
pub const ITERATIONS: usize = 500;
pub const STALL: f64 = 1e-6;
const RANK_TOL: f64 = 1e-13;

/// `Φ(x_j, y_k)` on real grids.
pub fn grid_kernel(ker: &Kernel, xs: &[f64], ys: &[f64]) -> CMat {
    CMat::from_fn(xs.len(), ys.len(), |j, k| {
        ker.value(Complex64::new(xs[j], 0.0), Complex64::new(ys[k], 0.0))
    })
}

/// `Φ(z_j, w_k)` at arbitrary points of the closed upper half-plane.
pub fn point_kernel(ker: &Kernel, zs: &[Complex64], ws: &[Complex64]) -> CMat {
    CMat::from_fn(zs.len(), ws.len(), |j, k| ker.value(zs[j], ws[k]))
}

/// `x_j = tan(−π/2 + π(j + 1)/(n + 1))`, `j < n`; sizes `2ᵏ − 1` nest.
pub fn tan_grid(n: usize) -> Vec<f64> {
    (0..n)
        .map(|j| (-std::f64::consts::FRAC_PI_2 + std::f64::consts::PI * (j + 1) as f64 / (n + 1) as f64).tan())
        .collect()
}

fn hadamard(a: &CMat, b: &CMat) -> CMat {
    a.component_mul(b)
}

fn max_row_norm(a: &CMat) -> f64 {
    (0..a.nrows()).map(|j| a.row(j).norm()).fold(0.0, f64::max)
}

fn max_col_norm(b: &CMat) -> f64 {
    (0..b.ncols()).map(|k| b.column(k).norm()).fold(0.0, f64::max)
}

#[derive(Debug, Clone)]
pub struct UpperWitness {
    pub upper: f64,
    pub a: CMat,
    pub b: CMat,
    pub converged: bool,
}

#[derive(Debug, Clone)]
pub struct LowerWitness {
    pub lower: f64,
    /// Partial isometry with `‖M ∘ X‖ = lower`.
    pub x: CMat,
}

struct ThinFactor {
    u: CMat,
    v: CMat,
}

fn thin_factor(m: &CMat) -> Option<ThinFactor> {
    let svd = thin_svd(m);
    let top = svd.s.first().copied()?;
    let r = svd.s.iter().filter(|&&s| s > RANK_TOL * top).count();
    let uu = CMat::from_fn(m.nrows(), r, |i, c| svd.u[(i, c)] * svd.s[c].sqrt());
    let vv = CMat::from_fn(r, m.ncols(), |c, k| svd.v[(k, c)].conj() * svd.s[c].sqrt());
    Some(ThinFactor { u: uu, v: vv })
}

fn hermitian_power(h: &CMat, p: f64) -> CMat {
    let (vals, vecs) = hermitian_eigen(h);
    let mut scaled = vecs.clone();
    for (j, &v) in vals.iter().enumerate() {
        let f = Complex64::new(v.max(0.0).powf(p), 0.0);
        scaled.column_mut(j).iter_mut().for_each(|e| *e *= f);
    }
    scaled * vecs.adjoint()
}

/// `X⁻¹ # Y = X^{−1/2}(X^{1/2} Y X^{1/2})^{1/2} X^{−1/2}`, regularized.
fn geometric_best_response(x: &CMat, y: &CMat) -> CMat {
    let r = x.nrows();
    let eps = 1e-12 * (x.trace().re + y.trace().re).max(f64::MIN_POSITIVE);
    let xr = x + CMat::identity(r, r) * Complex64::new(eps, 0.0);
    let yr = y + CMat::identity(r, r) * Complex64::new(eps, 0.0);
    let xh = hermitian_power(&xr, 0.5);
    let xih = hermitian_power(&xr, -0.5);
    let mid = hermitian_power(&(&xh * yr * &xh), 0.5);
    &xih * mid * &xih
}

struct Search {
    upper: f64,
    p: CMat,
    alpha: Vec<f64>,
    beta: Vec<f64>,
    converged: bool,
}

fn row_quad(u: &CMat, p: &CMat) -> Vec<f64> {
    let up = u * p;
    (0..u.nrows())
        .map(|j| up.row(j).iter().zip(u.row(j).iter()).map(|(a, b)| (a * b.conj()).re).sum::<f64>().max(0.0))
        .collect()
}

fn col_quad(v: &CMat, pinv: &CMat) -> Vec<f64> {
    let pv = pinv * v;
    (0..v.ncols())
        .map(|k| pv.column(k).iter().zip(v.column(k).iter()).map(|(a, b)| (a * b.conj()).re).sum::<f64>().max(0.0))
        .collect()
}

fn normalize(w: &mut [f64]) {
    let s: f64 = w.iter().sum();
    w.iter_mut().for_each(|x| *x /= s);
}

fn search(f: &ThinFactor, mut alpha: Vec<f64>, mut beta: Vec<f64>, iters: usize) -> Search {
    let r = f.u.ncols();
    let mut best = Search {
        upper: f64::INFINITY,
        p: CMat::identity(r, r),
        alpha: alpha.clone(),
        beta: beta.clone(),
        converged: false,
    };
    let mut last = f64::INFINITY;
    for _ in 0..iters {
        let x = f.u.adjoint() * CMat::from_diagonal(&nalgebra::DVector::from_iterator(alpha.len(), alpha.iter().map(|&a| Complex64::new(a, 0.0)))) * &f.u;
        let y = &f.v * CMat::from_diagonal(&nalgebra::DVector::from_iterator(beta.len(), beta.iter().map(|&b| Complex64::new(b, 0.0)))) * f.v.adjoint();
        let p = geometric_best_response(&x, &y);
        let Ok(pinv) = inverse(&p) else { break };
        let rows = row_quad(&f.u, &p);
        let cols = col_quad(&f.v, &pinv);
        let rmax = rows.iter().copied().fold(0.0, f64::max);
        let cmax = cols.iter().copied().fold(0.0, f64::max);
        let upper = (rmax * cmax).sqrt();
        if upper < best.upper {
            best.upper = upper;
            best.p = p;
            best.alpha = alpha.clone();
            best.beta = beta.clone();
        }
        if (last - upper).abs() <= STALL * upper && last.is_finite() {
            best.converged = true;
            break;
        }
        last = upper;
        for (a, q) in alpha.iter_mut().zip(&rows) {
            *a *= q / rmax;
        }
        for (b, q) in beta.iter_mut().zip(&cols) {
            *b *= q / cmax;
        }
        // Keep every index reachable so the weights can move back.
        let floor_a = 1e-12 / alpha.len() as f64;
        let floor_b = 1e-12 / beta.len() as f64;
        alpha.iter_mut().for_each(|a| *a = a.max(floor_a));
        beta.iter_mut().for_each(|b| *b = b.max(floor_b));
        normalize(&mut alpha);
        normalize(&mut beta);
    }
    best
}

fn random_simplex(rng: &mut impl Rng, n: usize) -> Vec<f64> {
    let mut w: Vec<f64> = (0..n).map(|_| rng.random::<f64>() + 0.05).collect();
    normalize(&mut w);
    w
}

fn factor_from_p(f: &ThinFactor, p: &CMat) -> (CMat, CMat) {
    let g = hermitian_power(p, 0.5);
    let gi = hermitian_power(p, -0.5);
    (&f.u * g, gi * &f.v)
}

fn factorization_holds(a: &CMat, b: &CMat, m: &CMat) -> bool {
    let ok = a.iter().chain(b.iter()).all(|z| z.re.is_finite() && z.im.is_finite());
    ok && op_norm(&(a * b - m)) <= 1e-9 * op_norm(m)
}

/// Certified upper bound from `restarts` searches (the first starts from uniform weights).
pub fn schur_upper_with(m: &CMat, restarts: usize, iters: usize, seed: u64) -> UpperWitness {
    let Some(f) = thin_factor(m) else {
        return UpperWitness {
            upper: 0.0,
            a: CMat::zeros(m.nrows(), 0),
            b: CMat::zeros(0, m.ncols()),
            converged: true,
        };
    };
    let (n, k) = (m.nrows(), m.ncols());
    let results: Vec<Search> = (0..restarts.max(1))
        .into_par_iter()
        .map(|j| {
            let (alpha, beta) = if j == 0 {
                (vec![1.0 / n as f64; n], vec![1.0 / k as f64; k])
            } else {
                let mut rng = rng_from_seed(seed.wrapping_add(j as u64));
                (random_simplex(&mut rng, n), random_simplex(&mut rng, k))
            };
            search(&f, alpha, beta, iters)
        })
        .collect();
    // Deterministic reduction in restart order.
    let mut best: Option<UpperWitness> = None;
    for s in results {
        let (mut a, mut b) = factor_from_p(&f, &s.p);
        // A near-singular `P` can lose the factorization; the plain SVD split is always valid.
        if !factorization_holds(&a, &b, m) {
            (a, b) = (f.u.clone(), f.v.clone());
        }
        let upper = max_row_norm(&a) * max_col_norm(&b);
        if best.as_ref().is_none_or(|w| upper < w.upper) {
            best = Some(UpperWitness {
                upper,
                a,
                b,
                converged: s.converged,
            });
        }
    }
    // `M = M·I` and `M = I·M` give the row and column maxima.
    for (a, b) in [(m.clone(), CMat::identity(k, k)), (CMat::identity(n, n), m.clone())] {
        let upper = max_row_norm(&a) * max_col_norm(&b);
        if best.as_ref().is_some_and(|w| upper < w.upper) {
            best = Some(UpperWitness {
                upper,
                a,
                b,
                converged: true,
            });
        }
    }
    best.expect("at least one restart")
}

pub fn schur_upper(m: &CMat, iters: usize) -> UpperWitness {
    schur_upper_with(m, RESTARTS, iters, 0)
}

/// Witness `X = (V U*)ᵀ` from the thin SVD `D_x M D_y = UΣV*`; `|xᵀ(M ∘ X)y| = ‖D_x M D_y‖_{S₁}`.
fn witness_from_vectors(m: &CMat, x: &[Complex64], y: &[Complex64]) -> CMat {
    let scaled = CMat::from_fn(m.nrows(), m.ncols(), |j, k| x[j] * m[(j, k)] * y[k]);
    let svd = thin_svd(&scaled);
    (&svd.v * svd.u.adjoint()).transpose()
}

fn ascend(m: &CMat, mut x: Vec<Complex64>, mut y: Vec<Complex64>, steps: usize) -> LowerWitness {
    let mut best = LowerWitness {
        lower: 0.0,
        x: CMat::zeros(m.nrows(), m.ncols()),
    };
    for _ in 0..steps {
        let w = witness_from_vectors(m, &x, &y);
        let prod = hadamard(m, &w);
        let svd = thin_svd(&prod);
        let Some(&s) = svd.s.first() else { break };
        if s <= best.lower * (1.0 + 1e-12) {
            if s > best.lower {
                best = LowerWitness { lower: s, x: w };
            }
            break;
        }
        best = LowerWitness { lower: s, x: w };
        x = svd.u.column(0).iter().map(|z| z.conj()).collect();
        y = svd.v.column(0).iter().copied().collect();
    }
    best
}

/// `X = e_i e_jᵀ` at the largest entry: `‖M ∘ X‖ = max |m_ij|`.
fn entry_witness(m: &CMat) -> LowerWitness {
    let mut x = CMat::zeros(m.nrows(), m.ncols());
    let (mut lower, mut at) = (0.0, None);
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            if m[(i, j)].norm() > lower {
                lower = m[(i, j)].norm();
                at = Some((i, j));
            }
        }
    }
    if let Some(ij) = at {
        x[ij] = Complex64::new(1.0, 0.0);
    }
    LowerWitness { lower, x }
}

/// Best of `trials` random starts (plus a uniform start) with alternating ascent.
pub fn schur_lower(m: &CMat, trials: usize) -> LowerWitness {
    schur_lower_seeded(m, trials, 0)
}

pub fn schur_lower_seeded(m: &CMat, trials: usize, seed: u64) -> LowerWitness {
    let (n, k) = (m.nrows(), m.ncols());
    if m.iter().all(|z| *z == Complex64::new(0.0, 0.0)) {
        return LowerWitness {
            lower: 0.0,
            x: CMat::zeros(n, k),
        };
    }
    let runs: Vec<LowerWitness> = (0..=trials)
        .into_par_iter()
        .map(|j| {
            let (x, y) = if j == 0 {
                (
                    vec![Complex64::new(1.0 / (n as f64).sqrt(), 0.0); n],
                    vec![Complex64::new(1.0 / (k as f64).sqrt(), 0.0); k],
                )
            } else {
                let mut rng = rng_from_seed(seed.wrapping_add(1000 + j as u64));
                (
                    random_unit_vector(&mut rng, n).iter().copied().collect(),
                    random_unit_vector(&mut rng, k).iter().copied().collect(),
                )
            };
            ascend(m, x, y, 60)
        })
        .collect();
    runs.into_iter().fold(entry_witness(m), |a, b| if b.lower > a.lower { b } else { a })
}

/// Lower witness seeded by dual weights: `x = √α`, `y = √β`.
fn lower_from_weights(m: &CMat, alpha: &[f64], beta: &[f64], steps: usize) -> LowerWitness {
    let x = alpha.iter().map(|a| Complex64::new(a.sqrt(), 0.0)).collect();
    let y = beta.iter().map(|b| Complex64::new(b.sqrt(), 0.0)).collect();
    ascend(m, x, y, steps)
}

#[derive(Debug, Clone)]
pub struct MultiplierBracket {
    pub kernel_id: String,
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
    pub lower: f64,
    pub upper: f64,
    pub witness_factorization: (CMat, CMat),
    pub witness_contraction: CMat,
    pub converged: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct Certification {
    pub order_ok: bool,
    pub contraction_norm: f64,
    pub contraction_value: f64,
    pub factor_bound: f64,
    pub factor_residual: f64,
}

impl Certification {
    pub fn passed(&self) -> bool {
        self.order_ok && self.contraction_norm <= 1.0 + 1e-9 && self.factor_residual <= 1e-8
    }
}

/// Bracket for an arbitrary matrix, combining dual-weight and random-start lower bounds.
pub fn bracket_matrix(kernel_id: &str, m: &CMat, xs: Vec<f64>, ys: Vec<f64>, trials: usize) -> MultiplierBracket {
    let up = schur_upper(m, ITERATIONS);
    let mut low = if let Some(f) = thin_factor(m) {
        let s = search(&f, vec![1.0 / m.nrows() as f64; m.nrows()], vec![1.0 / m.ncols() as f64; m.ncols()], ITERATIONS);
        lower_from_weights(m, &s.alpha, &s.beta, 20)
    } else {
        LowerWitness {
            lower: 0.0,
            x: CMat::zeros(m.nrows(), m.ncols()),
        }
    };
    let single = entry_witness(m);
    if single.lower > low.lower {
        low = single;
    }
    if trials > 0 {
        let other = schur_lower(m, trials);
        if other.lower > low.lower {
            low = other;
        }
    }
    MultiplierBracket {
        kernel_id: kernel_id.to_string(),
        xs,
        ys,
        lower: low.lower,
        upper: up.upper,
        witness_factorization: (up.a, up.b),
        witness_contraction: low.x,
        converged: up.converged,
    }
}

impl MultiplierBracket {
    /// Re-derives both bounds from the witnesses alone.
    pub fn certify(&self, m: &CMat) -> Certification {
        let (a, b) = &self.witness_factorization;
        let factor_residual = if a.ncols() == 0 {
            op_norm(m)
        } else {
            op_norm(&(a * b - m)) / op_norm(m).max(1.0)
        };
        let factor_bound = if a.ncols() == 0 { 0.0 } else { max_row_norm(a) * max_col_norm(b) };
        let contraction_norm = op_norm(&self.witness_contraction);
        let contraction_value = op_norm(&hadamard(m, &self.witness_contraction));
        Certification {
            order_ok: self.lower <= self.upper + 1e-9
                && contraction_value >= self.lower - 1e-9
                && factor_bound <= self.upper + 1e-9,
            contraction_norm,
            contraction_value,
            factor_bound,
            factor_residual,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Trend {
    /// All brackets fit in a band of relative width 10%.
    Stable,
    /// Lower bounds grow by more than 10% across the sequence.
    Growing,
    Mixed,
}

#[derive(Debug, Clone, Serialize)]
pub struct ProbeRecord {
    pub function_id: String,
    pub grid_size: usize,
    pub lower: f64,
    pub upper: f64,
    pub trend: Trend,
}

fn trend_of(brackets: &[MultiplierBracket]) -> Trend {
    let hi = brackets.iter().map(|b| b.upper).fold(0.0, f64::max);
    let lo = brackets.iter().map(|b| b.lower).fold(f64::INFINITY, f64::min);
    if hi <= 1.1 * lo || hi == 0.0 {
        return Trend::Stable;
    }
    let first = brackets.first().map(|b| b.lower).unwrap_or(0.0);
    let last = brackets.last().map(|b| b.lower).unwrap_or(0.0);
    if last > 1.1 * first {
        Trend::Growing
    } else {
        Trend::Mixed
    }
}

/// Brackets of a kernel on tan grids of the given sizes.
pub fn probe_kernel(function_id: &str, ker: &Kernel, grid_sizes: &[usize]) -> (Vec<MultiplierBracket>, Vec<ProbeRecord>) {
    let brackets: Vec<MultiplierBracket> = grid_sizes
        .iter()
        .map(|&n| {
            let xs = tan_grid(n);
            let m = grid_kernel(ker, &xs, &xs);
            let trials = if n <= 64 { 4 } else { 0 };
            bracket_matrix(function_id, &m, xs.clone(), xs, trials)
        })
        .collect();
    let trend = trend_of(&brackets);
    let records = brackets
        .iter()
        .map(|b| ProbeRecord {
            function_id: function_id.to_string(),
            grid_size: b.xs.len(),
            lower: b.lower,
            upper: b.upper,
            trend,
        })
        .collect();
    (brackets, records)
}

/// Evidence for the relative operator Lipschitz property: brackets of `𝔇♭f`.
pub fn rola_probe(function_id: &str, f: &AnalyticFunction, grid_sizes: &[usize]) -> (Vec<MultiplierBracket>, Vec<ProbeRecord>) {
    probe_kernel(function_id, &Kernel::DdFlat { f: f.clone() }, grid_sizes)
}

#[derive(Debug, Clone, Serialize)]
pub struct TransplantSample {
    pub seed: u64,
    /// `‖f(M) − f(L)‖ / ‖(M + iI)⁻¹ − (L + iI)⁻¹‖`.
    pub resolvent_ratio: f64,
    /// `‖φ(V) − φ(U)‖ / ‖V − U‖` for `U, V` the Cayley transforms.
    pub disk_ratio: f64,
    /// `|‖f(M) − f(L)‖ − ‖φ(V) − φ(U)‖|`.
    pub identity_gap: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ResLipProbe {
    pub records: Vec<ProbeRecord>,
    pub samples: Vec<TransplantSample>,
    /// `lim_{|z|→∞} f(z)`.
    pub limit_at_infinity: Complex64,
    #[serde(skip)]
    pub brackets: Vec<MultiplierBracket>,
}

/// Brackets of `(z + i)(w + i)𝔇f` plus the Cayley transplant cross-check.
///
/// `V − U = −2i((M + iI)⁻¹ − (L + iI)⁻¹)`, so `resolvent_ratio = 2·disk_ratio` per sample.
pub fn reslip_probe(
    function_id: &str,
    f: &AnalyticFunction,
    grid_sizes: &[usize],
    seed: u64,
    samples: usize,
    dim: usize,
) -> Result<ResLipProbe> {
    let (brackets, records) = probe_kernel(function_id, &Kernel::ResDd { f: f.clone() }, grid_sizes);
    let phi = f.transplant_to_disk();
    let mut out = Vec::with_capacity(samples);
    for j in 0..samples as u64 {
        let s = seed.wrapping_mul(7919).wrapping_add(j);
        let l = random_dissipative(s, dim, 0.2)?;
        let m = random_dissipative(s ^ 0x5555_5555, dim, 0.2)?;
        let df = op_norm(&(apply(f, &m)?.into_entries() - apply(f, &l)?.into_entries()));
        let dr = op_norm(&(inverse(&shifted(m.entries(), I))? - inverse(&shifted(l.entries(), I))?));
        let (u, v) = (cayley(&l)?, cayley(&m)?);
        let dphi = op_norm(&(apply_disk(&phi, &v)?.into_entries() - apply_disk(&phi, &u)?.into_entries()));
        let duv = op_norm(&(v.entries() - u.entries()));
        out.push(TransplantSample {
            seed: s,
            resolvent_ratio: df / dr,
            disk_ratio: dphi / duv,
            identity_gap: (df - dphi).abs(),
        });
    }
    Ok(ResLipProbe {
        records,
        samples: out,
        limit_at_infinity: f.limit_at_infinity(),
        brackets,
    })
}

/// `‖M‖_𝔐 = max_j M_jj` for positive semidefinite `M`; certified by `X = I` and `M = S·S`.
pub fn psd_oracle(m: &CMat) -> f64 {
    (0..m.nrows()).map(|j| m[(j, j)].re).fold(0.0, f64::max)
}

/// Largest `‖M ∘ X‖` over `samples` random contractions (unitaries and rank-one
/// partial isometries), for brute-force checks at sizes `≤ 3`.
pub fn brute_force_lower(m: &CMat, samples: usize, seed: u64) -> f64 {
    let mut rng = rng_from_seed(seed);
    let (n, k) = (m.nrows(), m.ncols());
    let mut best = 0.0f64;
    for j in 0..samples {
        let x = if j % 2 == 0 {
            let g = crate::operator::gaussian_matrix(&mut rng, n, k);
            let svd = thin_svd(&g);
            &svd.u * svd.v.adjoint()
        } else {
            let a = random_unit_vector(&mut rng, n);
            let b = random_unit_vector(&mut rng, k);
            &a * b.adjoint()
        };
        best = best.max(op_norm(&hadamard(m, &x)));
    }
    best
}

/// `‖f(M) − f(L)‖_{S₁} ≤ κ(S_M)κ(S_L)·‖Φ‖_𝔐·‖C‖_{S₁}` with `Φ = 𝔇♭f` on the spectra.
pub fn s1_difference_bound(f: &AnalyticFunction, pair: &crate::operator::DissipativePair) -> Result<(f64, f64)> {
    let mu = crate::funcalc::upper_eigenvalues(&pair.m)?;
    let lambda = crate::funcalc::upper_eigenvalues(&pair.l)?;
    let grid = point_kernel(&Kernel::DdFlat { f: f.clone() }, &mu, &lambda);
    let upper = schur_upper_with(&grid, 4, 200, 0).upper;
    let kappa = pair.m.spectral()?.condition * pair.l.spectral()?.condition;
    let lhs = trace_norm(&(apply(f, &pair.m)?.into_entries() - apply(f, &pair.l)?.into_entries()));
    Ok((lhs, kappa * upper * trace_norm(pair.relative.entries())))
}

/// Singular values, exposed for reports.
pub fn spectrum_of(m: &CMat) -> Vec<f64> {
    singular_values(m)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn close(a: f64, b: f64, rel: f64) -> bool {
        (a - b).abs() <= rel * b.abs().max(1e-300)
    }

    #[test]
    fn grid_kernel_examples() {
        let xs = [-1.0, 0.0, 2.5];
        let ys = [-3.0, 0.5];
        let m = grid_kernel(&Kernel::DdFlat { f: AnalyticFunction::Pole(-I) }, &xs, &ys);
        for (j, &x) in xs.iter().enumerate() {
            for k in 0..ys.len() {
                assert!((m[(j, k)] + Complex64::new(1.0, 0.0) / c(x, 1.)).norm() < 1e-15);
            }
        }
        let ones = grid_kernel(&Kernel::one(), &xs, &ys);
        assert!(ones.iter().all(|z| *z == c(1., 0.)));
        let one = grid_kernel(&Kernel::Dd { f: AnalyticFunction::resolvent_power(2) }, &[0.3], &[0.3]);
        let want = crate::doi::kernel_eval(&Kernel::Dd { f: AnalyticFunction::resolvent_power(2) }, c(0.3, 0.), c(0.3, 0.)).unwrap();
        assert_eq!(one[(0, 0)], want);
    }

    fn check(m: &CMat, b: &MultiplierBracket) {
        let cert = b.certify(m);
        assert!(cert.passed(), "{cert:?}");
    }

    #[test]
    fn upper_examples() {
        let phi = [c(1., 0.), c(-2., 1.), c(0.5, 0.5)];
        let psi = [c(0.3, 0.), c(1., -1.), c(0., 2.), c(-0.7, 0.1)];
        let rank_one = CMat::from_fn(3, 4, |j, k| phi[j] * psi[k]);
        let want = phi.iter().map(|z| z.norm()).fold(0.0, f64::max) * psi.iter().map(|z| z.norm()).fold(0.0, f64::max);
        let up = schur_upper(&rank_one, ITERATIONS);
        assert!(close(up.upper, want, 0.05), "{} vs {want}", up.upper);
        assert!(op_norm(&(&up.a * &up.b - &rank_one)) < 1e-8);

        let ones = CMat::from_element(5, 5, c(1., 0.));
        assert!(close(schur_upper(&ones, ITERATIONS).upper, 1.0, 0.05));

        let d = CMat::from_diagonal(&nalgebra::DVector::from_vec(vec![c(0.5, 0.), c(0., -2.), c(1., 1.)]));
        let up = schur_upper(&d, ITERATIONS).upper;
        assert!(close(up, 2.0, 0.05), "{up}");
        assert!(brute_force_lower(&d, 4000, 1) <= up + 1e-9);
    }

    #[test]
    fn lower_examples() {
        let ones = CMat::from_element(4, 4, c(1., 0.));
        let low = schur_lower(&ones, 4);
        assert!(low.lower >= 1.0 - 1e-6);
        assert!(op_norm(&low.x) <= 1.0 + 1e-9);
        assert_eq!(schur_lower(&CMat::zeros(3, 3), 4).lower, 0.0);
        let h = CMat::from_row_slice(2, 2, &[c(1., 0.), c(1., 0.), c(1., 0.), c(-1., 0.)]);
        let low = schur_lower(&h, 8);
        assert!(low.lower >= 2f64.sqrt() - 0.05, "{}", low.lower);
        // Brute force over contractions agrees and the factorization side closes the gap.
        let brute = brute_force_lower(&h, 20000, 2);
        assert!(brute <= low.lower + 1e-9 || brute <= 2f64.sqrt() + 1e-9);
        assert!(close(schur_upper(&h, ITERATIONS).upper, 2f64.sqrt(), 0.05));
    }

    #[test]
    fn psd_oracle_matches_brute_force() {
        let mut rng = rng_from_seed(3);
        for n in 1..=3 {
            let g = crate::operator::gaussian_matrix(&mut rng, n, n);
            let p = &g * g.adjoint();
            let oracle = psd_oracle(&p);
            let brute = brute_force_lower(&p, 5000, n as u64);
            assert!(brute <= oracle * (1.0 + 1e-9));
            let b = bracket_matrix("psd", &p, vec![], vec![], 4);
            check(&p, &b);
            assert!(b.lower <= oracle * (1.0 + 1e-9) && b.upper >= oracle * (1.0 - 1e-9));
            assert!(close(b.upper, oracle, 0.05) && close(b.lower, oracle, 0.05), "{b:?}");
        }
    }

    #[test]
    fn rola_probe_examples() {
        let (br, rec) = rola_probe("res1", &AnalyticFunction::Pole(-I), &[8, 32, 128]);
        for b in &br {
            assert!(b.lower >= 0.95 && b.upper <= 1.05, "{} {}", b.lower, b.upper);
        }
        assert_eq!(rec[0].trend, Trend::Stable);
        let (br, _) = rola_probe("const", &AnalyticFunction::constant(c(2., 0.)), &[8]);
        assert_eq!((br[0].lower, br[0].upper), (0.0, 0.0));
        let (br, _) = rola_probe("pole2", &AnalyticFunction::Pole(c(0., -2.)), &[16, 64]);
        for b in &br {
            assert!(b.upper <= 0.5 * 1.05 && b.lower <= b.upper + 1e-9);
        }
    }

    #[test]
    fn reslip_probe_examples() {
        let p = reslip_probe("res1", &AnalyticFunction::Pole(-I), &[8, 16], 1, 4, 3).unwrap();
        for b in &p.brackets {
            assert!(close(b.upper, 1.0, 0.05) && close(b.lower, 1.0, 0.05));
        }
        for s in &p.samples {
            assert!((s.resolvent_ratio - 1.0).abs() < 1e-9);
            assert!((s.resolvent_ratio - 2.0 * s.disk_ratio).abs() < 1e-9);
            assert!(s.identity_gap < 1e-9);
        }
        let k = reslip_probe("const", &AnalyticFunction::constant(c(1., 0.)), &[8], 1, 2, 2).unwrap();
        assert_eq!(k.brackets[0].upper, 0.0);
        assert_eq!(k.limit_at_infinity, c(1., 0.));
    }

    #[test]
    fn invariance_under_permutation_and_phases() {
        let xs = tan_grid(7);
        let ker = Kernel::DdFlat { f: AnalyticFunction::resolvent_power(2) };
        let m = grid_kernel(&ker, &xs, &xs);
        let base = bracket_matrix("b", &m, vec![], vec![], 2);
        let perm = [3usize, 0, 6, 1, 5, 2, 4];
        let phases: Vec<Complex64> = (0..7).map(|j| Complex64::from_polar(1.0, 0.9 * j as f64)).collect();
        let moved = CMat::from_fn(7, 7, |j, k| m[(perm[j], perm[(k + 2) % 7])] * phases[j] * phases[(3 * k) % 7].conj());
        let other = bracket_matrix("b", &moved, vec![], vec![], 2);
        check(&m, &base);
        check(&moved, &other);
        assert!(other.lower <= base.upper + 1e-9 && base.lower <= other.upper + 1e-9);
        assert!(close(other.upper, base.upper, 0.02) && close(other.lower, base.lower, 0.02));
    }
}
