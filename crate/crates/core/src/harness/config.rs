use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::funcalc::BatterySpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SuiteName {
    Core,
    Funcalc,
    Semispectral,
    Doi,
    Shift,
    Multiplier,
}

impl SuiteName {
    pub const ALL: [SuiteName; 6] = [
        SuiteName::Core,
        SuiteName::Funcalc,
        SuiteName::Semispectral,
        SuiteName::Doi,
        SuiteName::Shift,
        SuiteName::Multiplier,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            SuiteName::Core => "core",
            SuiteName::Funcalc => "funcalc",
            SuiteName::Semispectral => "semispectral",
            SuiteName::Doi => "doi",
            SuiteName::Shift => "shift",
            SuiteName::Multiplier => "multiplier",
        }
    }
}

impl fmt::Display for SuiteName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SuiteName {
    type Err = LabError;

    fn from_str(s: &str) -> Result<Self> {
        SuiteName::ALL
            .into_iter()
            .find(|n| n.as_str() == s.trim())
            .ok_or_else(|| LabError::Config(format!("unknown suite {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    pub quadrature: f64,
    pub residual: f64,
    pub fd_step: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            quadrature: 1e-8,
            residual: 1e-8,
            fd_step: crate::doi::FD_STEP,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SuiteConfig {
    pub seed: u64,
    pub dims: Vec<usize>,
    pub n_instances: usize,
    pub gap: f64,
    pub battery: BatterySpec,
    pub tolerances: Tolerances,
    pub suites: BTreeSet<SuiteName>,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            dims: vec![2, 4, 8],
            n_instances: 4,
            gap: 0.2,
            battery: BatterySpec::default(),
            tolerances: Tolerances::default(),
            suites: SuiteName::ALL.into_iter().collect(),
        }
    }
}

impl SuiteConfig {
    /// Parses TOML; unknown keys and type errors are reported with their location.
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: SuiteConfig = toml::from_str(text).map_err(|e| LabError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration is always representable")
    }

    pub fn validate(&self) -> Result<()> {
        let t = &self.tolerances;
        for (key, v) in [
            ("tolerances.quadrature", t.quadrature),
            ("tolerances.residual", t.residual),
            ("tolerances.fd_step", t.fd_step),
            ("gap", self.gap),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(LabError::Config(format!("{key} must be positive and finite, got {v}")));
            }
        }
        if self.dims.is_empty() && !self.suites.is_empty() {
            return Err(LabError::Config("dims must not be empty".into()));
        }
        if let Some(&d) = self.dims.iter().find(|&&d| d < 1) {
            return Err(LabError::Config(format!("dims must be at least 1, got {d}")));
        }
        if self.n_instances < 1 {
            return Err(LabError::Config("n_instances must be at least 1".into()));
        }
        self.battery.build().map_err(|e| LabError::Config(format!("battery: {e}")))?;
        Ok(())
    }
}

/// Parses `2,4,8`.
pub fn parse_dims(s: &str) -> Result<Vec<usize>> {
    s.split(',')
        .filter(|t| !t.trim().is_empty())
        .map(|t| {
            t.trim()
                .parse()
                .map_err(|_| LabError::Config(format!("bad dimension {t:?}")))
        })
        .collect()
}

/// Parses `doi,shift`; an empty string selects nothing.
pub fn parse_suites(s: &str) -> Result<BTreeSet<SuiteName>> {
    s.split(',').filter(|t| !t.trim().is_empty()).map(str::parse).collect()
}
