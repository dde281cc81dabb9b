use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};
use num_complex::Complex64;

use oplab::funcalc::{BatteryKind, BatterySpec};
use oplab::harness::commands::{
    dilate_command, probe_command, resolve_function, xi_command, PairSpec, ProbeKind,
};
use oplab::harness::{merge_reports, parse_dims, parse_suites, run_suite, PairKind, Report, SuiteConfig};
use oplab::LabError;

#[derive(Parser)]
#[command(name = "oplab", version, about = "Numerical checks for dissipative operator perturbation theory")]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run verification suites and write report.json.
    Verify(VerifyArgs),
    /// Compute the spectral shift function of one pair.
    Xi(XiArgs),
    /// Bracket the Schur multiplier norm of a divided-difference kernel on nested grids.
    ProbeMultiplier(ProbeArgs),
    /// Build a finite unitary dilation and report its residuals.
    Dilate(DilateArgs),
    /// Combine several report.json files.
    ReportMerge(MergeArgs),
}

/// Every configuration key, as an optional override.
#[derive(Args)]
struct ConfigArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    dims: Option<String>,
    #[arg(long)]
    n_instances: Option<usize>,
    #[arg(long, allow_hyphen_values = true)]
    gap: Option<f64>,
    /// Comma-separated suite names; an empty string selects none.
    #[arg(long)]
    suite: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    tol_quad: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    tol_res: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    fd_step: Option<f64>,
    /// Comma-separated battery kinds.
    #[arg(long)]
    battery_kinds: Option<String>,
    #[arg(long)]
    battery_count: Option<usize>,
}

#[derive(Args)]
struct VerifyArgs {
    #[command(flatten)]
    cfg: ConfigArgs,
    /// Worker threads; 0 picks the number of cores.
    #[arg(long, default_value_t = 0)]
    workers: usize,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum KindArg {
    Generic,
    TraceClassStructured,
    SelfadjointBase,
}

#[derive(Args)]
struct XiArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 2)]
    dim: usize,
    #[arg(long, default_value_t = 0.2, allow_hyphen_values = true)]
    gap: f64,
    #[arg(long, value_enum, default_value = "generic")]
    kind: KindArg,
    /// Scalar pair: `L = λ`, e.g. `0+1i`.
    #[arg(long, requires = "mu")]
    lambda: Option<Complex64>,
    #[arg(long, requires = "lambda")]
    mu: Option<Complex64>,
    /// Use `K = 0` with a generated `L`.
    #[arg(long)]
    zero: bool,
    /// Hex-float matrix files for `L` and `M`.
    #[arg(long, requires = "m_file")]
    l_file: Option<String>,
    #[arg(long, requires = "l_file")]
    m_file: Option<String>,
    #[arg(long, default_value_t = 1e-8, allow_hyphen_values = true)]
    tol_quad: f64,
    #[arg(long, default_value_t = oplab::shift::T_NODES)]
    t_nodes: usize,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum ProbeArg {
    Rola,
    Reslip,
}

#[derive(Args)]
struct ProbeArgs {
    /// Battery id, `resolvent`, or a JSON function.
    #[arg(long)]
    function: String,
    #[arg(long, value_enum, default_value = "rola")]
    kind: ProbeArg,
    #[arg(long, default_value = "8,16,32,64")]
    sizes: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct DilateArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 3)]
    dim: usize,
    /// Hex-float contraction instead of a generated one.
    #[arg(long)]
    matrix: Option<String>,
    #[arg(long, default_value_t = 4)]
    depth: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct MergeArgs {
    #[arg(required = true)]
    reports: Vec<PathBuf>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

enum Failure {
    Config(anyhow::Error),
    Runtime(anyhow::Error),
}

impl From<LabError> for Failure {
    fn from(e: LabError) -> Self {
        match e {
            LabError::Config(_) | LabError::Argument(_) => Failure::Config(e.into()),
            other => Failure::Runtime(other.into()),
        }
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Runtime(e)
    }
}

fn config_err(e: impl Into<anyhow::Error>) -> Failure {
    Failure::Config(e.into())
}

fn load_config(a: &ConfigArgs) -> Result<SuiteConfig, Failure> {
    let mut cfg = match &a.config {
        Some(p) => {
            let text = fs::read_to_string(p)
                .with_context(|| format!("reading {}", p.display()))
                .map_err(config_err)?;
            SuiteConfig::from_toml(&text)
                .map_err(|e| config_err(anyhow::anyhow!("{}: {e}", p.display())))?
        }
        None => SuiteConfig::default(),
    };
    if let Some(v) = a.seed {
        cfg.seed = v;
    }
    if let Some(v) = &a.dims {
        cfg.dims = parse_dims(v)?;
    }
    if let Some(v) = a.n_instances {
        cfg.n_instances = v;
    }
    if let Some(v) = a.gap {
        cfg.gap = v;
    }
    if let Some(v) = &a.suite {
        cfg.suites = parse_suites(v)?;
    }
    if let Some(v) = a.tol_quad {
        cfg.tolerances.quadrature = v;
    }
    if let Some(v) = a.tol_res {
        cfg.tolerances.residual = v;
    }
    if let Some(v) = a.fd_step {
        cfg.tolerances.fd_step = v;
    }
    if let Some(v) = &a.battery_kinds {
        cfg.battery.kinds = v
            .split(',')
            .filter(|t| !t.trim().is_empty())
            .map(|t| {
                serde_json::from_value::<BatteryKind>(serde_json::Value::String(t.trim().into()))
                    .map_err(|_| config_err(anyhow::anyhow!("unknown battery kind {t:?}")))
            })
            .collect::<Result<_, _>>()?;
    }
    if let Some(v) = a.battery_count {
        cfg.battery.count = v;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> anyhow::Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, serde_json::to_string_pretty(value)? + "\n")?;
    Ok(())
}

/// `Ok(true)` when every hard assertion held.
fn run(cli: Cli) -> Result<bool, Failure> {
    match cli.cmd {
        Command::Verify(a) => {
            let cfg = load_config(&a.cfg)?;
            let report = run_suite(&cfg, a.workers)?;
            report.write_outputs(&a.out)?;
            for (name, s) in &report.suites {
                println!("{name}: {} passed, {} failed, {} skipped", s.passed, s.failed, s.skipped);
            }
            for f in &report.failures {
                println!("FAIL {}/{} value {:e} threshold {:e}: {}", f.suite, f.check, f.value, f.threshold, f.repro);
            }
            println!("report: {}", a.out.join("report.json").display());
            Ok(report.passed())
        }
        Command::Xi(a) => {
            let battery = match &a.config {
                Some(p) => {
                    let text = fs::read_to_string(p).map_err(config_err)?;
                    SuiteConfig::from_toml(&text)?.battery
                }
                None => BatterySpec::default(),
            };
            let spec = if let (Some(lambda), Some(mu)) = (a.lambda, a.mu) {
                PairSpec::Scalar { lambda, mu }
            } else if let (Some(l), Some(m)) = (a.l_file, a.m_file) {
                PairSpec::Files { l, m }
            } else if a.zero {
                PairSpec::ZeroPerturbation { seed: a.seed, dim: a.dim, gap: a.gap }
            } else {
                let kind = match a.kind {
                    KindArg::Generic => PairKind::Generic,
                    KindArg::TraceClassStructured => PairKind::TraceClassStructured,
                    KindArg::SelfadjointBase => PairKind::SelfadjointBase,
                };
                PairSpec::Generated { seed: a.seed, dim: a.dim, gap: a.gap, kind }
            };
            if !(a.tol_quad > 0.0) || a.t_nodes == 0 {
                return Err(config_err(anyhow::anyhow!("tol-quad and t-nodes must be positive")));
            }
            let out = xi_command(&spec, a.tol_quad, a.t_nodes, &battery)?;
            out.write(&a.out)?;
            println!("weight integral: {:e}", out.weight_integral);
            println!("max trace residual: {:e}", out.max_residual);
            Ok(out.max_residual <= 1e-6)
        }
        Command::ProbeMultiplier(a) => {
            let (id, f) = resolve_function(&a.function, &BatterySpec::default())?;
            let sizes = parse_dims(&a.sizes)?;
            let kind = match a.kind {
                ProbeArg::Rola => ProbeKind::Rola,
                ProbeArg::Reslip => ProbeKind::Reslip,
            };
            let records = probe_command(&id, &f, kind, &sizes, a.seed)?;
            for r in &records {
                println!("{} n={} lower={:.6} upper={:.6} {:?}", r.function_id, r.grid_size, r.lower, r.upper, r.trend);
            }
            if let Some(dir) = a.out {
                write_json(&dir.join("multiplier.json"), &records)?;
            }
            Ok(records.iter().all(|r| r.lower <= r.upper))
        }
        Command::Dilate(a) => {
            let d = dilate_command(a.seed, a.dim, a.matrix.as_deref(), a.depth)?;
            let worst = d.power_residuals.iter().copied().fold(d.unitarity_residual, f64::max);
            println!("dim {} depth {}: unitarity {:e}, worst power residual {:e}", d.dim, d.depth, d.unitarity_residual, worst);
            if let Some(dir) = a.out {
                write_json(&dir.join("dilation.json"), &d)?;
                fs::write(dir.join("dilation_u.txt"), &d.unitary).map_err(anyhow::Error::from)?;
            }
            Ok(worst <= 1e-10)
        }
        Command::ReportMerge(a) => {
            let reports = a
                .reports
                .iter()
                .map(|p| {
                    let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
                    Report::from_json(&text).with_context(|| p.display().to_string())
                })
                .collect::<anyhow::Result<Vec<_>>>()
                .map_err(config_err)?;
            let merged = merge_reports(&reports);
            write_json(&a.out.join("report.json"), &merged)?;
            println!("merged {} reports, {} failures", reports.len(), merged.failures.len());
            Ok(merged.passed())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(Failure::Config(e)) => {
            eprintln!("{e:#}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
