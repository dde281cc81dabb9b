//! Back ends of the `xi`, `dilate` and `probe-multiplier` subcommands.

use std::fs;
use std::path::Path;

use num_complex::Complex64;
use serde::Serialize;

use super::generate::{gen_contraction, gen_pair, PairKind};
use super::report::io_err;
use crate::error::{LabError, Result};
use crate::funcalc::{AnalyticFunction, BatterySpec};
use crate::hexfloat::{format_matrix, parse_matrix};
use crate::matrix::OperatorMatrix;
use crate::multiplier::{reslip_probe, rola_probe, ProbeRecord};
use crate::operator::DissipativePair;
use crate::semispectral::finite_dilation;
use crate::shift::{scalar_xi_oracle, spectral_shift, validate_scalar_oracle, zero_shift};

#[derive(Debug, Clone, PartialEq)]
pub enum PairSpec {
    Generated { seed: u64, dim: usize, gap: f64, kind: PairKind },
    /// `L = λ`, `M = μ` on `ℂ¹`.
    Scalar { lambda: Complex64, mu: Complex64 },
    /// `(L, L)` with `L` generated.
    ZeroPerturbation { seed: u64, dim: usize, gap: f64 },
    /// Hex-float matrix files, as written to `failures/`.
    Files { l: String, m: String },
}

impl PairSpec {
    pub fn seed(&self) -> u64 {
        match self {
            PairSpec::Generated { seed, .. } | PairSpec::ZeroPerturbation { seed, .. } => *seed,
            _ => 0,
        }
    }

    pub fn build(&self) -> Result<DissipativePair> {
        let d = DissipativePair::DEFAULT_D;
        match self {
            PairSpec::Generated { seed, dim, gap, kind } => gen_pair(*seed, *dim, *gap, *kind),
            PairSpec::Scalar { lambda, mu } => {
                DissipativePair::from_endpoints(OperatorMatrix::scalar(*lambda), OperatorMatrix::scalar(*mu), d)
            }
            PairSpec::ZeroPerturbation { seed, dim, gap } => {
                zero_shift(&gen_pair(*seed, *dim, *gap, PairKind::Generic)?.l)
            }
            PairSpec::Files { l, m } => {
                let read = |p: &str| {
                    fs::read_to_string(p)
                        .map_err(io_err)
                        .and_then(|t| parse_matrix(&t))
                        .and_then(OperatorMatrix::new)
                };
                DissipativePair::from_endpoints(read(l)?, read(m)?, d)
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct XiOutput {
    pub csv: String,
    pub summary: serde_json::Value,
    pub weight_integral: f64,
    pub max_residual: f64,
    /// `s,xi_oracle` on the same nodes, for `1 × 1` pairs.
    pub oracle_csv: Option<String>,
}

/// Computes `ξ` on an adapted grid and the trace-formula residuals on the battery.
pub fn xi_command(spec: &PairSpec, tol: f64, t_nodes: usize, battery: &BatterySpec) -> Result<XiOutput> {
    let pair = spec.build()?;
    let (_, _, mut ssr) = spectral_shift(&pair, tol, t_nodes)?;
    ssr.record_residuals(&pair, &battery.build()?)?;
    let mut summary = ssr.summary_json(spec.seed());
    let mut oracle_csv = None;
    if pair.dim() == 1 {
        let (lambda, mu) = (pair.l.entries()[(0, 0)], pair.m.entries()[(0, 0)]);
        let mut csv = String::from("s,xi_oracle\n");
        let mut dev = 0.0f64;
        for (&s, z) in ssr.s_grid.iter().zip(&ssr.xi) {
            let o = scalar_xi_oracle(lambda, mu, s);
            csv.push_str(&format!("{s:?},{:?}\n", o + 0.0));
            if s.abs() <= 50.0 {
                dev = dev.max((z - o).norm());
            }
        }
        let g = AnalyticFunction::Pole(Complex64::new(0.0, -2.0));
        let (lhs, rhs) = validate_scalar_oracle(lambda, mu, &g, tol)?;
        summary["oracle"] = serde_json::json!({
            "max_deviation_on_nodes": dev,
            "validation_residual": (lhs - rhs).norm(),
        });
        oracle_csv = Some(csv);
    }
    Ok(XiOutput {
        csv: ssr.to_csv(),
        summary,
        weight_integral: ssr.weight_integral,
        max_residual: ssr.max_residual(),
        oracle_csv,
    })
}

impl XiOutput {
    /// `xi.csv`, `xi_summary.json` and, when present, `xi_oracle.csv`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(io_err)?;
        fs::write(dir.join("xi.csv"), &self.csv).map_err(io_err)?;
        let json = serde_json::to_string_pretty(&self.summary).expect("summary is serializable");
        fs::write(dir.join("xi_summary.json"), json + "\n").map_err(io_err)?;
        if let Some(o) = &self.oracle_csv {
            fs::write(dir.join("xi_oracle.csv"), o).map_err(io_err)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct DilateOutput {
    pub dim: usize,
    pub depth: usize,
    pub unitarity_residual: f64,
    /// `‖Tⁿ − P_H Uⁿ|H‖` for `n = 0..=depth`.
    pub power_residuals: Vec<f64>,
    #[serde(skip)]
    pub unitary: String,
}

/// Dilation of a generated contraction, or of a hex-float matrix file.
pub fn dilate_command(seed: u64, dim: usize, file: Option<&str>, depth: usize) -> Result<DilateOutput> {
    let t = match file {
        Some(p) => parse_matrix(&fs::read_to_string(p).map_err(io_err)?)?,
        None => gen_contraction(seed, dim),
    };
    let dil = finite_dilation(&OperatorMatrix::new(t)?, depth)?;
    Ok(DilateOutput {
        dim: dil.t.nrows(),
        depth,
        unitarity_residual: dil.unitarity_residual(),
        power_residuals: dil.power_residuals(depth),
        unitary: format_matrix(&dil.u),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProbeKind {
    Rola,
    Reslip,
}

/// Resolves a battery id, or parses a JSON `AnalyticFunction`.
pub fn resolve_function(spec: &str, battery: &BatterySpec) -> Result<(String, AnalyticFunction)> {
    if let Some(g) = battery.build()?.into_iter().find(|g| g.id == spec) {
        return Ok((g.id, g.f));
    }
    if spec == "resolvent" {
        return Ok(("resolvent".into(), AnalyticFunction::resolvent_power(1)));
    }
    let f: AnalyticFunction = serde_json::from_str(spec)
        .map_err(|e| LabError::Config(format!("{spec:?} is neither a battery id nor a function: {e}")))?;
    f.check_poles(0.0)?;
    Ok(("custom".into(), f))
}

pub fn probe_command(
    function_id: &str,
    f: &AnalyticFunction,
    kind: ProbeKind,
    sizes: &[usize],
    seed: u64,
) -> Result<Vec<ProbeRecord>> {
    match kind {
        ProbeKind::Rola => Ok(rola_probe(function_id, f, sizes).1),
        ProbeKind::Reslip => Ok(reslip_probe(function_id, f, sizes, seed, 0, 1)?.records),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_perturbation_gives_zero_xi() {
        let spec = PairSpec::ZeroPerturbation { seed: 1, dim: 3, gap: 0.2 };
        let out = xi_command(&spec, 1e-8, 8, &BatterySpec::default()).unwrap();
        assert_eq!(out.weight_integral, 0.0);
        assert!(out.csv.lines().skip(1).all(|l| l.ends_with(",0.0,0.0")));
    }

    #[test]
    fn scalar_writes_oracle() {
        let spec = PairSpec::Scalar {
            lambda: Complex64::new(0.0, 1.0),
            mu: Complex64::new(1.0, 1.0),
        };
        let out = xi_command(&spec, 1e-8, 32, &BatterySpec::default()).unwrap();
        assert!(out.oracle_csv.unwrap().starts_with("s,xi_oracle\n"));
        assert!(out.max_residual <= 1e-6);
    }

    #[test]
    fn dilation_and_probe() {
        let d = dilate_command(2, 3, None, 4).unwrap();
        assert!(d.power_residuals.iter().all(|&r| r <= 1e-10));
        let (id, f) = resolve_function("resolvent", &BatterySpec::default()).unwrap();
        let recs = probe_command(&id, &f, ProbeKind::Rola, &[8], 0).unwrap();
        assert!((recs[0].upper - 1.0).abs() <= 0.05);
        assert!(resolve_function("nope", &BatterySpec::default()).is_err());
    }
}
