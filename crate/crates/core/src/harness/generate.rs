use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::matrix::{shifted, trace_norm, CMat, OperatorMatrix, I};
use crate::operator::{random_dissipative, random_hermitian, rng_from_seed, DissipativePair};

/// `‖C‖_{S₁}` of `trace_class_structured` pairs.
pub const TRACE_CLASS_S1: f64 = 1.0;

/// Eigenvector condition numbers above this are resampled.
const GENERATION_CONDITION: f64 = 1e6;
const ATTEMPTS: u64 = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairKind {
    /// Independent strictly dissipative endpoints.
    Generic,
    /// `K = Q` dissipative, scaled so that `‖K(L + iI)⁻¹‖_{S₁}` is fixed.
    TraceClassStructured,
    /// Hermitian `L`, strictly dissipative `K`.
    SelfadjointBase,
}

impl PairKind {
    pub const ALL: [PairKind; 3] = [PairKind::Generic, PairKind::TraceClassStructured, PairKind::SelfadjointBase];

    pub fn as_str(self) -> &'static str {
        match self {
            PairKind::Generic => "generic",
            PairKind::TraceClassStructured => "trace_class_structured",
            PairKind::SelfadjointBase => "selfadjoint_base",
        }
    }
}

/// SplitMix64 finalizer, used to derive independent instance seeds.
pub fn mix(a: u64, b: u64) -> u64 {
    let mut z = a ^ b.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn well_conditioned(x: &OperatorMatrix) -> bool {
    x.eigenvector_condition().is_ok_and(|c| c <= GENERATION_CONDITION)
}

fn kind_salt(kind: PairKind) -> u64 {
    match kind {
        PairKind::Generic => 1,
        PairKind::TraceClassStructured => 2,
        PairKind::SelfadjointBase => 3,
    }
}

pub fn gen_pair(seed: u64, dim: usize, gap: f64, kind: PairKind) -> Result<DissipativePair> {
    if dim < 1 {
        return Err(LabError::Argument("dimension must be at least 1".into()));
    }
    for attempt in 0..ATTEMPTS {
        let s = mix(mix(seed, dim as u64), kind_salt(kind) * 1000 + attempt);
        let (l, k) = match kind {
            PairKind::Generic => {
                let l = random_dissipative(s, dim, gap)?;
                let m = random_dissipative(mix(s, 7), dim, gap)?;
                let k = m.sub(&l)?;
                (l, k)
            }
            PairKind::TraceClassStructured => {
                let l = random_dissipative(s, dim, gap)?;
                let q = random_dissipative(mix(s, 11), dim, gap)?;
                let c0 = q.entries() * crate::matrix::inverse(&shifted(l.entries(), I))?;
                let scale = TRACE_CLASS_S1 / trace_norm(&c0);
                (l, q.scale(Complex64::new(scale, 0.0)))
            }
            PairKind::SelfadjointBase => {
                let mut rng = rng_from_seed(s);
                let l = OperatorMatrix::new(random_hermitian(&mut rng, dim))?;
                let k = random_dissipative(mix(s, 13), dim, gap)?;
                (l, k)
            }
        };
        let pair = DissipativePair::new(l, k, DissipativePair::DEFAULT_D)?;
        if well_conditioned(&pair.l) && well_conditioned(&pair.m) {
            return Ok(pair);
        }
    }
    Err(LabError::Generation(format!(
        "no well-conditioned {} pair after {ATTEMPTS} attempts (seed {seed}, dim {dim}, gap {gap})",
        kind.as_str()
    )))
}

/// A contraction `T = G/‖G‖·r` with `r ∈ (0, 1]` drawn from the seed.
pub fn gen_contraction(seed: u64, dim: usize) -> CMat {
    use rand::Rng;
    let mut rng = rng_from_seed(mix(seed, 0xc0_47));
    let g = crate::operator::gaussian_matrix(&mut rng, dim, dim);
    let r: f64 = rng.random_range(0.3..=1.0);
    &g * Complex64::new(r / crate::matrix::op_norm(&g), 0.0)
}
