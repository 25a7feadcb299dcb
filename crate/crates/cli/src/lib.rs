//! Command-line front end: configs, run records and phase-diagram scans.

pub mod commands;
pub mod config;
pub mod error;
pub mod scan;

use std::path::Path;

use serde::Serialize;
use serde_json::Value;

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};

/// Everything needed to reproduce and read back a run.
#[derive(Debug, Clone, Serialize)]
pub struct RunRecord {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub config_hash: String,
    pub config: RunConfig,
    pub result: Value,
}

/// Resolves defaults, runs the command and builds its record.
///
/// `out` is the scan directory for `scan` and ignored otherwise.
pub fn run(cfg: RunConfig, out: Option<&Path>) -> CliResult<(RunRecord, Option<String>)> {
    let cfg = commands::resolve(cfg)?;
    let (result, csv) = if cfg.command == "scan" {
        let dir = out.ok_or_else(|| CliError::Config("scan needs an output directory (--out)".into()))?;
        let summary = scan::run_scan(&cfg, dir)?;
        eprintln!("scan: {} points computed, {} reused", summary.computed, summary.reused);
        (serde_json::to_value(&summary.points)?, None)
    } else {
        let o = commands::execute(&cfg)?;
        (o.result, o.csv)
    };
    let record = RunRecord {
        tool: "hierpin",
        version: env!("CARGO_PKG_VERSION"),
        command: cfg.command.clone(),
        config_hash: cfg.hash(),
        config: cfg,
        result,
    };
    Ok((record, csv))
}
