//! Instance generation, suite orchestration and report emission.

pub mod config;
pub mod generate;
pub mod report;
pub mod suites;
pub mod commands;

pub use config::{parse_dims, parse_suites, SuiteConfig, SuiteName, Tolerances};
pub use generate::{gen_contraction, gen_pair, PairKind};
pub use report::{merge_reports, MergedReport, Report};
pub use suites::run_suite;
