use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::{SuiteConfig, SuiteName};
use crate::error::{LabError, Result};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Comparison {
    AtMost,
    AtLeast,
}

/// One measured value against one threshold.
#[derive(Debug, Clone)]
pub struct Observation {
    pub suite: SuiteName,
    pub check: &'static str,
    pub seed: u64,
    pub dim: usize,
    pub function_id: String,
    pub value: f64,
    pub threshold: f64,
    pub cmp: Comparison,
    /// Report-only observations never fail the run.
    pub hard: bool,
    /// `None` marks a skipped instance.
    pub skipped: Option<String>,
    /// Matrices to dump on failure, already in hex-float text form.
    pub dump: Option<String>,
}

impl Observation {
    pub fn new(suite: SuiteName, check: &'static str, seed: u64, dim: usize, function_id: &str) -> Self {
        Observation {
            suite,
            check,
            seed,
            dim,
            function_id: function_id.to_string(),
            value: 0.0,
            threshold: 0.0,
            cmp: Comparison::AtMost,
            hard: true,
            skipped: None,
            dump: None,
        }
    }

    pub fn at_most(mut self, value: f64, threshold: f64) -> Self {
        self.value = value;
        self.threshold = threshold;
        self.cmp = Comparison::AtMost;
        self
    }

    pub fn at_least(mut self, value: f64, threshold: f64) -> Self {
        self.value = value;
        self.threshold = threshold;
        self.cmp = Comparison::AtLeast;
        self
    }

    pub fn report_only(mut self) -> Self {
        self.hard = false;
        self
    }

    pub fn skip(mut self, reason: impl Into<String>) -> Self {
        self.skipped = Some(reason.into());
        self
    }

    pub fn with_dump(mut self, dump: String) -> Self {
        self.dump = Some(dump);
        self
    }

    /// NaN never passes.
    pub fn passed(&self) -> bool {
        match self.cmp {
            Comparison::AtMost => self.value <= self.threshold,
            Comparison::AtLeast => self.value >= self.threshold,
        }
    }

    fn worse_than(&self, other: &WorstCase) -> bool {
        if self.value.is_nan() {
            return !other.value.is_nan();
        }
        match self.cmp {
            Comparison::AtMost => self.value > other.value,
            Comparison::AtLeast => self.value < other.value,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorstCase {
    pub value: f64,
    pub threshold: f64,
    pub cmp: Comparison,
    pub seed: u64,
    pub dim: usize,
    pub function_id: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CheckSummary {
    pub passed: usize,
    pub failed: usize,
    pub skipped: usize,
    pub report_only: bool,
    pub worst: Option<WorstCase>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SuiteSummary {
    pub passed: usize,
    pub failed: usize,
    pub skipped: usize,
    pub checks: BTreeMap<String, CheckSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Failure {
    pub suite: SuiteName,
    pub check: String,
    pub seed: u64,
    pub dim: usize,
    pub function_id: String,
    pub value: f64,
    pub threshold: f64,
    pub repro: String,
    pub dump_file: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub total_ms: f64,
    pub suites_ms: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub version: String,
    pub config: SuiteConfig,
    pub suites: BTreeMap<String, SuiteSummary>,
    pub failures: Vec<Failure>,
    /// Residual tables, Lipschitz-ratio maxima, multiplier brackets.
    pub records: BTreeMap<String, serde_json::Value>,
    pub timing: Timing,
    #[serde(skip)]
    pub dumps: BTreeMap<String, String>,
}

/// `oplab verify` arguments that rerun exactly one instance.
pub fn repro_command(cfg: &SuiteConfig, suite: SuiteName, seed: u64, dim: usize) -> String {
    let t = &cfg.tolerances;
    format!(
        "oplab verify --seed {seed} --dims {dim} --n-instances 1 --suite {suite} --gap {:?} --tol-quad {:?} --tol-res {:?} --fd-step {:?}",
        cfg.gap, t.quadrature, t.residual, t.fd_step
    )
}

impl Report {
    pub fn empty(cfg: &SuiteConfig) -> Self {
        Report {
            version: VERSION.to_string(),
            config: cfg.clone(),
            suites: BTreeMap::new(),
            failures: Vec::new(),
            records: BTreeMap::new(),
            timing: Timing::default(),
            dumps: BTreeMap::new(),
        }
    }

    /// Folds observations, which must already be in their final order.
    pub fn absorb(&mut self, observations: &[Observation]) {
        for o in observations {
            let suite = self.suites.entry(o.suite.as_str().to_string()).or_default();
            let check = suite.checks.entry(o.check.to_string()).or_default();
            check.report_only = !o.hard;
            if o.skipped.is_some() {
                check.skipped += 1;
                suite.skipped += 1;
                continue;
            }
            if check.worst.as_ref().is_none_or(|w| o.worse_than(w)) {
                check.worst = Some(WorstCase {
                    value: o.value,
                    threshold: o.threshold,
                    cmp: o.cmp,
                    seed: o.seed,
                    dim: o.dim,
                    function_id: o.function_id.clone(),
                });
            }
            if o.passed() || !o.hard {
                check.passed += 1;
                suite.passed += 1;
                continue;
            }
            check.failed += 1;
            suite.failed += 1;
            let dump_file = o.dump.as_ref().map(|text| {
                let name = format!(
                    "{}_{}_s{}_d{}_{}.txt",
                    o.suite,
                    o.check,
                    o.seed,
                    o.dim,
                    sanitize(&o.function_id)
                );
                self.dumps.insert(name.clone(), text.clone());
                name
            });
            self.failures.push(Failure {
                suite: o.suite,
                check: o.check.to_string(),
                seed: o.seed,
                dim: o.dim,
                function_id: o.function_id.clone(),
                value: o.value,
                threshold: o.threshold,
                repro: repro_command(&self.config, o.suite, o.seed, o.dim),
                dump_file,
            });
        }
    }

    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report is serializable")
    }

    /// The JSON with the timing subtree removed, for byte comparisons.
    pub fn deterministic_json(&self) -> String {
        let mut v = serde_json::to_value(self).expect("report is serializable");
        if let Some(obj) = v.as_object_mut() {
            obj.remove("timing");
        }
        serde_json::to_string_pretty(&v).expect("report is serializable")
    }

    /// Writes `report.json` and `failures/*.txt` under `dir`.
    pub fn write_outputs(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(io_err)?;
        fs::write(dir.join("report.json"), self.to_json() + "\n").map_err(io_err)?;
        if !self.dumps.is_empty() {
            let fdir = dir.join("failures");
            fs::create_dir_all(&fdir).map_err(io_err)?;
            for (name, text) in &self.dumps {
                fs::write(fdir.join(name), text).map_err(io_err)?;
            }
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| LabError::Config(format!("report: {e}")))
    }
}

fn sanitize(s: &str) -> String {
    let t: String = s
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' { c } else { '_' })
        .collect();
    if t.is_empty() { "none".into() } else { t }
}

pub(crate) fn io_err(e: std::io::Error) -> LabError {
    LabError::Argument(format!("i/o: {e}"))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MergedReport {
    pub version: String,
    pub configs: Vec<SuiteConfig>,
    pub suites: BTreeMap<String, SuiteSummary>,
    pub failures: Vec<Failure>,
    pub records: Vec<BTreeMap<String, serde_json::Value>>,
    pub timing: Timing,
}

impl MergedReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Sums counts, keeps the worst case of each check and concatenates failures in input order.
pub fn merge_reports(reports: &[Report]) -> MergedReport {
    let mut out = MergedReport {
        version: VERSION.to_string(),
        configs: Vec::new(),
        suites: BTreeMap::new(),
        failures: Vec::new(),
        records: Vec::new(),
        timing: Timing::default(),
    };
    for r in reports {
        out.configs.push(r.config.clone());
        out.failures.extend(r.failures.iter().cloned());
        out.records.push(r.records.clone());
        out.timing.total_ms += r.timing.total_ms;
        for (k, ms) in &r.timing.suites_ms {
            *out.timing.suites_ms.entry(k.clone()).or_default() += ms;
        }
        for (name, s) in &r.suites {
            let dst = out.suites.entry(name.clone()).or_default();
            dst.passed += s.passed;
            dst.failed += s.failed;
            dst.skipped += s.skipped;
            for (cname, c) in &s.checks {
                let d = dst.checks.entry(cname.clone()).or_default();
                d.passed += c.passed;
                d.failed += c.failed;
                d.skipped += c.skipped;
                d.report_only = c.report_only;
                if let Some(w) = &c.worst {
                    let replace = match &d.worst {
                        None => true,
                        Some(old) => match w.cmp {
                            Comparison::AtMost => w.value > old.value,
                            Comparison::AtLeast => w.value < old.value,
                        },
                    };
                    if replace {
                        d.worst = Some(w.clone());
                    }
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn obs(v: f64) -> Observation {
        Observation::new(SuiteName::Doi, "opra", 3, 4, "pole:0").at_most(v, 1e-8)
    }

    #[test]
    fn failures_carry_repro_and_dump() {
        let cfg = SuiteConfig::default();
        let mut r = Report::empty(&cfg);
        r.absorb(&[obs(1e-12), obs(1e-3).with_dump("1 1\n0x1p+0 0x0p+0\n".into()), obs(f64::NAN)]);
        assert_eq!(r.failures.len(), 2);
        assert!(r.failures.iter().all(|f| f.repro.starts_with("oplab verify --seed 3 --dims 4")));
        assert_eq!(r.dumps.len(), 1);
        let c = &r.suites["doi"].checks["opra"];
        assert_eq!((c.passed, c.failed), (1, 2));
        assert!(c.worst.as_ref().unwrap().value.is_nan());
    }

    #[test]
    fn report_only_never_fails() {
        let mut r = Report::empty(&SuiteConfig::default());
        r.absorb(&[obs(1.0).report_only()]);
        assert!(r.passed());
    }

    #[test]
    fn json_roundtrip_and_merge() {
        let mut r = Report::empty(&SuiteConfig::default());
        r.absorb(&[obs(1e-10), obs(1e-9)]);
        r.timing.total_ms = 5.0;
        let back = Report::from_json(&r.to_json()).unwrap();
        assert_eq!(back.suites, r.suites);
        assert!(!r.deterministic_json().contains("timing"));
        let m = merge_reports(&[r.clone(), back]);
        assert_eq!(m.suites["doi"].passed, 4);
        assert_eq!(m.timing.total_ms, 10.0);
        assert_eq!(m.suites["doi"].checks["opra"].worst.as_ref().unwrap().value, 1e-9);
    }
}
