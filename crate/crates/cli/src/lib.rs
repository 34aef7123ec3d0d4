//! Report generation and command implementations behind the `f3dc` binary.

pub mod bench;
pub mod config;
pub mod csv_io;
pub mod run;
pub mod tables;
pub mod verify;

use std::path::Path;

use anyhow::{Context, Result};
use f3dc_core::{builtin_t3_k4_s2, TransformSet};

pub use bench::{cmd_bench, BenchReport, BenchRow};
pub use config::BenchConfig;
pub use run::{cmd_run, RunArgs, RunSummary};
pub use tables::{cmd_complexity, cmd_perf, ComplexityReport, PerfReport};
pub use verify::{cmd_verify, VerifyReport, VerifyRow};

/// The built-in set unless a file is given.
pub fn load_transform(path: Option<&Path>) -> Result<TransformSet> {
    match path {
        None => Ok(builtin_t3_k4_s2()),
        Some(p) => TransformSet::load(p).with_context(|| format!("loading transform set {}", p.display())),
    }
}
