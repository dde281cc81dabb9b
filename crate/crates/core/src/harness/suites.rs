use std::collections::BTreeMap;
use std::time::Instant;

use num_complex::Complex64;
use rayon::prelude::*;

use super::config::{SuiteConfig, SuiteName};
use super::generate::{gen_contraction, gen_pair, mix, PairKind};
use super::report::{Observation, Report};
use crate::doi::{
    central_difference, derivative_formula, derivative_order, difference_formula_residual, doi_eigen, doi_grids,
    doi_quadrature, doi_trace_identity, halving_steps, relative_lipschitz_ratio, trace_identity_grid, Kernel,
    ResidualRecord,
};
use crate::error::{LabError, Result};
use crate::funcalc::{apply, apply_disk, apply_unbounded_form, AnalyticFunction, NamedFunction};
use crate::hexfloat::format_matrix;
use crate::matrix::{op_norm, rel_diff, OperatorMatrix, I};
use crate::multiplier::{reslip_probe, rola_probe, s1_difference_bound};
use crate::operator::{
    cayley, domination_violation, inverse_cayley, maximality_margin, random_unit_vector, resolvent_lower_gap,
    rng_from_seed, shifted_relative_norm, shifted_resolvent_norm, DissipativePair,
};
use crate::semispectral::{
    cross_validate, finite_dilation, integrate_functional, functional_grid, resolvent_dilation_check,
    SemiSpectralDensity,
};
use crate::shift::{
    path_continuity_violations, q_route_trace, resolvent_difference_check, spectral_shift, trace_formula_residual,
    weight_integral_stability, T_NODES,
};

/// Grid sizes used by the multiplier suite.
pub const PROBE_SIZES: [usize; 3] = [8, 16, 32];
const RESLIP_SIZES: [usize; 2] = [8, 16];
const DILATION_DEPTHS: [usize; 3] = [1, 4, 16];
const MAXIMALITY_D: f64 = 0.25;

#[derive(Debug, Clone, Copy)]
struct Instance {
    index: usize,
    seed: u64,
    dim: usize,
}

#[derive(Default)]
struct Output {
    obs: Vec<Observation>,
    residuals: Vec<ResidualRecord>,
    /// `(function_id, instance index, ratio)`.
    rol: Vec<(String, usize, f64)>,
    records: BTreeMap<String, serde_json::Value>,
}

fn pair_dump(pair: &DissipativePair) -> String {
    format!("# L\n{}# M\n{}", format_matrix(pair.l.entries()), format_matrix(pair.m.entries()))
}

/// Errors that mean "outside the check's domain" become skips; everything else fails.
fn settle(base: Observation, r: Result<Observation>) -> Observation {
    match r {
        Ok(o) => o,
        Err(e @ (LabError::Conditioning { .. } | LabError::SingularPart { .. } | LabError::OutOfScope(_))) => {
            base.skip(e.to_string())
        }
        Err(e) => {
            let mut o = base.at_most(f64::NAN, 0.0);
            o.skipped = None;
            o.function_id = format!("{} ({e})", o.function_id);
            o
        }
    }
}

fn kind_for(index: usize, strict_only: bool) -> PairKind {
    if strict_only {
        [PairKind::Generic, PairKind::TraceClassStructured][index % 2]
    } else {
        PairKind::ALL[index % 3]
    }
}

fn core_instance(cfg: &SuiteConfig, inst: Instance, _battery: &[NamedFunction]) -> Output {
    let s = SuiteName::Core;
    let kind = kind_for(inst.index, false);
    let base = |check| Observation::new(s, check, inst.seed, inst.dim, kind.as_str());
    let pair = match gen_pair(inst.seed, inst.dim, cfg.gap, kind) {
        Ok(p) => p,
        Err(e) => return Output { obs: vec![settle(base("generation"), Err(e))], ..Default::default() },
    };
    let dump = pair_dump(&pair);
    let mut obs = Vec::new();
    for (id, x) in [("L", &pair.l), ("M", &pair.m)] {
        let b = Observation::new(s, "cayley_roundtrip", inst.seed, inst.dim, id);
        obs.push(settle(
            b.clone(),
            (|| {
                let back = inverse_cayley(&cayley(x)?)?;
                Ok(b.clone().at_most(rel_diff(back.entries(), x.entries()), 1e-9).with_dump(dump.clone()))
            })(),
        ));
        let b = Observation::new(s, "cayley_contraction", inst.seed, inst.dim, id);
        obs.push(settle(
            b.clone(),
            cayley(x).map(|t| b.clone().at_most(t.op_norm(), 1.0 + 1e-12).with_dump(dump.clone())),
        ));
    }
    let c = match crate::operator::domination_constants(&pair.l, &pair.k, pair.d) {
        Ok(c) => c,
        Err(e) => {
            obs.push(settle(base("domination"), Err(e)));
            return Output { obs, ..Default::default() };
        }
    };
    let v = domination_violation(&pair.l, &pair.k, c, pair.d, mix(inst.seed, 17), 500, 4);
    let scale = 1.0 + pair.k.op_norm();
    obs.push(base("domination").at_most(v, 1e-9 * scale).with_dump(dump.clone()));

    let mut rng = rng_from_seed(mix(inst.seed, 23));
    let mut worst = f64::INFINITY;
    for _ in 0..200 {
        let u = random_unit_vector(&mut rng, inst.dim);
        worst = worst.min(resolvent_lower_gap(&pair.l, &u) / (1.0 + pair.l.op_norm().powi(2)));
    }
    obs.push(base("resolvent_lower_gap").at_least(worst, -1e-12).with_dump(dump.clone()));

    for kappa in [0.5, 1.0, 4.0] {
        let b = base("shifted_resolvent");
        obs.push(settle(
            b.clone(),
            shifted_resolvent_norm(&pair.l, kappa).map(|n| b.clone().at_most(n * kappa, 1.0 + 1e-10)),
        ));
    }
    // The margin lemma needs d < 1/2; re-derive c at a smaller d.
    let b = base("maximality");
    obs.push(settle(
        b.clone(),
        crate::operator::domination_constants(&pair.l, &pair.k, MAXIMALITY_D)
            .and_then(|c| maximality_margin(c, MAXIMALITY_D))
            .and_then(|kappa| shifted_relative_norm(&pair.l, &pair.k, kappa))
            .map(|n| b.clone().at_most(n, 1.0 - 1e-12).with_dump(dump)),
    ));
    Output { obs, ..Default::default() }
}

fn funcalc_instance(cfg: &SuiteConfig, inst: Instance, battery: &[NamedFunction]) -> Output {
    let s = SuiteName::Funcalc;
    let kind = kind_for(inst.index, false);
    let pair = match gen_pair(inst.seed, inst.dim, cfg.gap, kind) {
        Ok(p) => p,
        Err(e) => {
            let b = Observation::new(s, "generation", inst.seed, inst.dim, kind.as_str());
            return Output { obs: vec![settle(b, Err(e))], ..Default::default() };
        }
    };
    let dump = pair_dump(&pair);
    let mut obs = Vec::new();
    for g in battery {
        let base = |check| Observation::new(s, check, inst.seed, inst.dim, &g.id);
        let phi = g.f.transplant_to_disk();
        let b = base("calculus_consistency");
        obs.push(settle(
            b.clone(),
            (|| {
                let direct = apply(&g.f, &pair.l)?;
                let disk = apply_disk(&phi, &cayley(&pair.l)?)?;
                Ok(b.clone().at_most(rel_diff(direct.entries(), disk.entries()), 1e-9).with_dump(dump.clone()))
            })(),
        ));
        let b = base("unbounded_form");
        obs.push(settle(
            b.clone(),
            (|| {
                let direct = apply(&g.f, &pair.l)?;
                let other = apply_unbounded_form(&g.f, &pair.l)?;
                Ok(b.clone().at_most(rel_diff(direct.entries(), other.entries()), 1e-9))
            })(),
        ));
        let b = base("transplant_identity");
        obs.push(settle(
            b.clone(),
            (|| {
                let df = op_norm(&(apply(&g.f, &pair.m)?.into_entries() - apply(&g.f, &pair.l)?.into_entries()));
                let (u, v) = (cayley(&pair.l)?, cayley(&pair.m)?);
                let dphi = op_norm(&(apply_disk(&phi, &v)?.into_entries() - apply_disk(&phi, &u)?.into_entries()));
                Ok(b.clone().at_most((df - dphi).abs() / df.max(1.0), 1e-9).with_dump(dump.clone()))
            })(),
        ));
    }
    Output { obs, ..Default::default() }
}

fn semispectral_instance(cfg: &SuiteConfig, inst: Instance, battery: &[NamedFunction]) -> Output {
    let s = SuiteName::Semispectral;
    let tol = cfg.tolerances.quadrature;
    let kind = kind_for(inst.index, true);
    let pair = match gen_pair(inst.seed, inst.dim, cfg.gap, kind) {
        Ok(p) => p,
        Err(e) => {
            let b = Observation::new(s, "generation", inst.seed, inst.dim, kind.as_str());
            return Output { obs: vec![settle(b, Err(e))], ..Default::default() };
        }
    };
    let l = &pair.l;
    let dump = format!("# L\n{}", format_matrix(l.entries()));
    let base = |check, id: &str| Observation::new(s, check, inst.seed, inst.dim, id);
    let mut obs = Vec::new();

    let b = base("density_mass", "L");
    obs.push(settle(
        b.clone(),
        SemiSpectralDensity::new(l, tol).map(|d| {
            let id = OperatorMatrix::identity(inst.dim);
            b.clone().at_most(op_norm(&(d.total_mass() - id.entries())), 1e-7).with_dump(dump.clone())
        }),
    ));
    for g in battery {
        let b = base("functional_vs_apply", &g.id);
        obs.push(settle(
            b.clone(),
            (|| {
                let grid = functional_grid(&g.f, l, tol)?;
                let q = integrate_functional(&g.f, l, &grid)?;
                let direct = apply(&g.f, l)?;
                Ok(b.clone().at_most(rel_diff(q.entries(), direct.entries()), 1e-7))
            })(),
        ));
    }
    let b = base("cross_validate", "L");
    obs.push(settle(
        b.clone(),
        cross_validate(l, tol, 16, &[(-1.0, 1.0), (0.0, 2.5), (-4.0, -0.5)])
            .map(|cv| b.clone().at_most(cv.deviation, cv.bound).with_dump(dump.clone())),
    ));

    let contraction = OperatorMatrix::new(gen_contraction(inst.seed, inst.dim));
    for (id, t) in [("cayley_L", cayley(l)), ("random", contraction)] {
        for depth in DILATION_DEPTHS {
            let b = base("dilation_powers", id);
            obs.push(settle(
                b.clone(),
                t.clone().and_then(|t| finite_dilation(&t, depth)).map(|dil| {
                    let worst = dil.power_residuals(depth).into_iter().fold(0.0, f64::max);
                    let unit = dil.unitarity_residual();
                    b.clone()
                        .at_most(worst.max(unit), 1e-10)
                        .with_dump(format!("# T\n{}", format_matrix(&dil.t)))
                }),
            ));
        }
    }
    let b = base("resolvent_dilation", "L");
    obs.push(settle(
        b.clone(),
        resolvent_dilation_check(l, 16, Complex64::new(0.3, -1.2))
            .map(|r| b.clone().at_most(r.residual, r.bound).with_dump(dump.clone())),
    ));
    Output { obs, ..Default::default() }
}

fn doi_instance(cfg: &SuiteConfig, inst: Instance, battery: &[NamedFunction]) -> Output {
    let s = SuiteName::Doi;
    let kind = kind_for(inst.index, false);
    let pair = match gen_pair(inst.seed, inst.dim, cfg.gap, kind) {
        Ok(p) => p,
        Err(e) => {
            let b = Observation::new(s, "generation", inst.seed, inst.dim, kind.as_str());
            return Output { obs: vec![settle(b, Err(e))], ..Default::default() };
        }
    };
    let dump = pair_dump(&pair);
    let mut out = Output::default();
    let h = cfg.tolerances.fd_step;
    for g in battery {
        let base = |check| Observation::new(s, check, inst.seed, inst.dim, &g.id);
        let b = base("opra_residual");
        let r = difference_formula_residual(&g.f, &pair);
        if let Ok(res) = r {
            out.residuals.push(ResidualRecord {
                seed: inst.seed,
                dim: inst.dim,
                function_id: g.id.clone(),
                residual: res,
            });
        }
        out.obs.push(settle(
            b.clone(),
            r.map(|res| b.clone().at_most(res, cfg.tolerances.residual).with_dump(dump.clone())),
        ));

        if let Ok(Some(k)) = relative_lipschitz_ratio(&g.f, &pair) {
            out.rol.push((g.id.clone(), inst.index, k));
        }

        let b = base("s1_bound");
        out.obs.push(settle(
            b.clone(),
            s1_difference_bound(&g.f, &pair).map(|(lhs, bound)| {
                let v = if bound.is_finite() { lhs / bound.max(f64::MIN_POSITIVE) } else { f64::INFINITY };
                b.clone().at_most(v, 1.0 + 1e-9)
            }),
        ));

        if inst.dim <= 6 {
            let b = base("derivative_fd");
            out.obs.push(settle(
                b.clone(),
                (|| {
                    let q = derivative_formula(&pair, 0.5, &g.f)?.q;
                    let fd = central_difference(&pair, 0.5, &g.f, h)?;
                    let rel = op_norm(&(fd.entries() - q.entries())) / q.op_norm().max(f64::MIN_POSITIVE);
                    Ok(b.clone().at_most(rel, 1e-5).with_dump(dump.clone()))
                })(),
            ));
            let b = base("derivative_order");
            out.obs.push(settle(
                b.clone(),
                derivative_order(&pair, 0.5, &g.f, &halving_steps())
                    .map(|fit| b.clone().at_least(fit.order, 1.9).with_dump(dump.clone())),
            ));
        }
    }

    let strict = crate::doi::quadrature_applicable(&pair.l) && crate::doi::quadrature_applicable(&pair.m);
    if inst.dim <= 4 && strict {
        let f = AnalyticFunction::Pole(Complex64::new(0.0, -2.0));
        let ker = Kernel::DdFlat { f: f.clone() };
        let tol = cfg.tolerances.quadrature;
        let b = Observation::new(s, "evaluator_agreement", inst.seed, inst.dim, "pole_0_-2");
        out.obs.push(settle(
            b.clone(),
            (|| {
                let grids = doi_grids(&ker, &pair.m, &pair.l, tol)?;
                let quad = doi_quadrature(&ker, &pair.m, &pair.relative, &pair.l, &grids)?;
                let eig = doi_eigen(&ker, &pair.m, &pair.relative, &pair.l)?;
                let d = op_norm(&(quad.entries() - eig.entries())) / eig.op_norm().max(1.0);
                Ok(b.clone().at_most(d, 10.0 * tol).with_dump(dump.clone()))
            })(),
        ));
        let b = Observation::new(s, "trace_identity", inst.seed, inst.dim, "pole_0_-2");
        out.obs.push(settle(
            b.clone(),
            (|| {
                let grid = trace_identity_grid(&f, &pair.l, &pair.relative, tol)?;
                let (lhs, rhs) = doi_trace_identity(&f, &pair.l, &pair.relative, &grid)?;
                Ok(b.clone().at_most((lhs - rhs).norm() / lhs.norm().max(1.0), 1e-6))
            })(),
        ));
    }
    out
}

fn shift_instance(cfg: &SuiteConfig, inst: Instance, battery: &[NamedFunction]) -> Output {
    let s = SuiteName::Shift;
    let kind = kind_for(inst.index, true);
    let base = |check, id: &str| Observation::new(s, check, inst.seed, inst.dim, id);
    if inst.dim > 8 {
        return Output {
            obs: vec![base("trace_formula", kind.as_str()).skip("dimension above 8")],
            ..Default::default()
        };
    }
    let pair = match gen_pair(inst.seed, inst.dim, cfg.gap, kind) {
        Ok(p) => p,
        Err(e) => return Output { obs: vec![settle(base("generation", kind.as_str()), Err(e))], ..Default::default() },
    };
    let dump = pair_dump(&pair);
    let mut obs = Vec::new();

    let b = base("resolvent_difference", kind.as_str());
    obs.push(settle(
        b.clone(),
        resolvent_difference_check(&pair).map(|(n, bound)| b.clone().at_most(n, bound * (1.0 + 1e-10) + 1e-14)),
    ));
    let b = base("path_continuity", kind.as_str());
    let mut rng = rng_from_seed(mix(inst.seed, 31));
    let probes: Vec<(f64, f64)> = (0..32)
        .map(|_| {
            use rand::Rng;
            (rng.random_range(0.0..1.0), rng.random_range(0.0..1.0))
        })
        .collect();
    obs.push(settle(
        b.clone(),
        path_continuity_violations(&pair, &probes).map(|n| b.clone().at_most(n as f64, 0.0)),
    ));

    let shift = spectral_shift(&pair, cfg.tolerances.quadrature, T_NODES);
    let (field, grid, ssr) = match shift {
        Ok(x) => x,
        Err(e) => {
            obs.push(settle(base("trace_formula", kind.as_str()), Err(e)));
            return Output { obs, ..Default::default() };
        }
    };
    let (w, _, rel) = weight_integral_stability(&field, &grid);
    obs.push(base("weight_integral_finite", kind.as_str()).at_most(if w.is_finite() { 0.0 } else { 1.0 }, 0.0));
    obs.push(base("weight_stability", kind.as_str()).at_most(rel, 1e-3).with_dump(dump.clone()));
    for g in battery {
        let b = base("trace_formula", &g.id);
        obs.push(settle(
            b.clone(),
            trace_formula_residual(&pair, &g.f, &ssr).map(|r| b.clone().at_most(r, 1e-6).with_dump(dump.clone())),
        ));
        let b = base("q_route", &g.id);
        obs.push(settle(
            b.clone(),
            (|| {
                let direct = (apply(&g.f, &pair.m)?.into_entries() - apply(&g.f, &pair.l)?.into_entries()).trace();
                let q = q_route_trace(&pair, &g.f, T_NODES)?;
                Ok(b.clone().at_most((q - direct).norm(), 1e-7))
            })(),
        ));
    }
    Output { obs, ..Default::default() }
}

/// Suite-level multiplier checks; independent of `dims` apart from the transplant samples.
fn multiplier_suite(cfg: &SuiteConfig, battery: &[NamedFunction]) -> Output {
    let s = SuiteName::Multiplier;
    let seed = cfg.seed;
    let dim = cfg.dims[0];
    let mut targets: Vec<NamedFunction> = battery.to_vec();
    targets.push(NamedFunction {
        id: "resolvent".into(),
        f: AnalyticFunction::Pole(-I),
    });
    let per: Vec<Output> = targets
        .par_iter()
        .map(|g| {
            let mut out = Output::default();
            let (brackets, rola) = rola_probe(&g.id, &g.f, &PROBE_SIZES);
            for (b, n) in brackets.iter().zip(PROBE_SIZES) {
                let m = crate::multiplier::grid_kernel(&Kernel::DdFlat { f: g.f.clone() }, &b.xs, &b.ys);
                let cert = b.certify(&m);
                let o = Observation::new(s, "bracket_certified", seed, n, &g.id);
                out.obs.push(o.at_most(if cert.passed() { 0.0 } else { 1.0 }, 0.0));
                if g.id == "resolvent" {
                    let o = Observation::new(s, "resolvent_bracket", seed, n, &g.id);
                    let dev = (b.lower - 1.0).abs().max((b.upper - 1.0).abs());
                    out.obs.push(o.at_most(dev, 0.05));
                }
            }
            out.records.insert(format!("rola/{}", g.id), serde_json::to_value(&rola).unwrap());
            match reslip_probe(&g.id, &g.f, &RESLIP_SIZES, seed, 4, dim) {
                Ok(p) => {
                    for smp in &p.samples {
                        let o = Observation::new(s, "transplant_identity", smp.seed, dim, &g.id);
                        out.obs.push(o.at_most(smp.identity_gap, 1e-9));
                        let o = Observation::new(s, "resolvent_vs_disk_ratio", smp.seed, dim, &g.id);
                        let gap = (smp.resolvent_ratio - 2.0 * smp.disk_ratio).abs() / smp.resolvent_ratio.max(1.0);
                        out.obs.push(o.at_most(gap, 1e-9));
                    }
                    out.records.insert(format!("reslip/{}", g.id), serde_json::to_value(&p).unwrap());
                }
                Err(e) => out.obs.push(settle(Observation::new(s, "transplant_identity", seed, dim, &g.id), Err(e))),
            }
            out
        })
        .collect();
    let mut out = Output::default();
    for p in per {
        out.obs.extend(p.obs);
        out.records.extend(p.records);
    }
    out
}

type InstanceFn = fn(&SuiteConfig, Instance, &[NamedFunction]) -> Output;

fn instance_fn(suite: SuiteName) -> Option<InstanceFn> {
    match suite {
        SuiteName::Core => Some(core_instance),
        SuiteName::Funcalc => Some(funcalc_instance),
        SuiteName::Semispectral => Some(semispectral_instance),
        SuiteName::Doi => Some(doi_instance),
        SuiteName::Shift => Some(shift_instance),
        SuiteName::Multiplier => None,
    }
}

/// Runs the configured suites on a pool of `workers` threads (0 = rayon default).
///
/// Work is parallel per instance; results are ordered by `(seed, dim, function_id)`
/// before aggregation, so the report does not depend on scheduling.
pub fn run_suite(cfg: &SuiteConfig, workers: usize) -> Result<Report> {
    cfg.validate()?;
    let battery = cfg.battery.build()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| LabError::Config(format!("thread pool: {e}")))?;
    let start = Instant::now();
    let mut report = Report::empty(cfg);
    let instances: Vec<Instance> = cfg
        .dims
        .iter()
        .flat_map(|&dim| {
            (0..cfg.n_instances).map(move |index| Instance {
                index,
                seed: cfg.seed.wrapping_add(index as u64),
                dim,
            })
        })
        .collect();

    for &suite in &cfg.suites {
        let t0 = Instant::now();
        let mut out = match instance_fn(suite) {
            Some(f) => {
                let parts: Vec<Output> = pool.install(|| instances.par_iter().map(|&i| f(cfg, i, &battery)).collect());
                let mut all = Output::default();
                for p in parts {
                    all.obs.extend(p.obs);
                    all.residuals.extend(p.residuals);
                    all.rol.extend(p.rol);
                    all.records.extend(p.records);
                }
                all
            }
            None => pool.install(|| multiplier_suite(cfg, &battery)),
        };
        out.obs.sort_by(|a, b| {
            (a.seed, a.dim, &a.function_id, a.check).cmp(&(b.seed, b.dim, &b.function_id, b.check))
        });
        report.absorb(&out.obs);
        if suite == SuiteName::Doi {
            out.residuals.sort_by(|a, b| (a.seed, a.dim, &a.function_id).cmp(&(b.seed, b.dim, &b.function_id)));
            report.records.insert("doi/residuals".into(), serde_json::to_value(&out.residuals).unwrap());
            report.records.insert("doi/rol_constants".into(), rol_summary(&out.rol, cfg.n_instances));
        }
        for (k, v) in out.records {
            report.records.insert(k, v);
        }
        report
            .timing
            .suites_ms
            .insert(suite.as_str().into(), t0.elapsed().as_secs_f64() * 1e3);
    }
    report.timing.total_ms = start.elapsed().as_secs_f64() * 1e3;
    Ok(report)
}

/// Running maximum of `‖f(M) − f(L)‖/‖C‖` per function, over the first half of the
/// instances and over all of them; close values indicate the maximum has stabilized.
fn rol_summary(rol: &[(String, usize, f64)], n_instances: usize) -> serde_json::Value {
    let half = n_instances.div_ceil(2);
    let mut table: BTreeMap<&str, (f64, f64)> = BTreeMap::new();
    for (id, index, k) in rol {
        let e = table.entry(id).or_insert((0.0, 0.0));
        if *index < half {
            e.0 = e.0.max(*k);
        }
        e.1 = e.1.max(*k);
    }
    serde_json::Value::Object(
        table
            .into_iter()
            .map(|(id, (h, a))| (id.to_string(), serde_json::json!({ "half_max": h, "max": a })))
            .collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;

    fn small(suites: &[SuiteName]) -> SuiteConfig {
        SuiteConfig {
            dims: vec![2, 3],
            n_instances: 2,
            suites: suites.iter().copied().collect::<BTreeSet<_>>(),
            ..SuiteConfig::default()
        }
    }

    #[test]
    fn empty_suites_pass() {
        let cfg = SuiteConfig {
            suites: BTreeSet::new(),
            ..SuiteConfig::default()
        };
        let r = run_suite(&cfg, 1).unwrap();
        assert!(r.passed());
        assert!(r.suites.is_empty());
    }

    #[test]
    fn cheap_suites_pass_and_are_deterministic() {
        let cfg = small(&[SuiteName::Core, SuiteName::Funcalc, SuiteName::Doi]);
        let a = run_suite(&cfg, 1).unwrap();
        let b = run_suite(&cfg, 3).unwrap();
        assert!(a.passed(), "{:#?}", a.failures);
        assert_eq!(a.deterministic_json(), b.deterministic_json());
        assert!(a.records.contains_key("doi/residuals"));
    }

    #[test]
    fn analysis_suites_pass() {
        let cfg = SuiteConfig {
            dims: vec![2],
            n_instances: 2,
            suites: [SuiteName::Semispectral, SuiteName::Shift].into_iter().collect(),
            ..SuiteConfig::default()
        };
        let r = run_suite(&cfg, 0).unwrap();
        assert!(r.passed(), "{:#?}", r.failures);
        assert!(r.suites["shift"].passed > 0);
    }
}
