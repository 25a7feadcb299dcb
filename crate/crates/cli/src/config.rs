//! Run configuration: a flat set of fields shared by every command, read
//! from command-line flags, a sectioned `key = value` file or JSON.
//!
//! ```text
//! [run]
//! command = annealed.critical
//! tol = 1e-6
//!
//! [lattice]
//! B = 1.5
//! n = 14
//!
//! [disorder]
//! kappa = 0
//! beta = 0.5
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

/// Every command the tool runs, by its config name.
pub const COMMANDS: &[&str] = &[
    "pure",
    "quenched",
    "annealed.critical",
    "annealed.profile",
    "annealed.weights",
    "relevance.fm",
    "relevance.search",
    "relevance.overlap",
    "relevance.yn",
    "relevance.com",
    "relevance.smoothing",
    "relevance.strong",
    "scan",
];

pub const DEFAULT_SEED: u64 = 2011;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub command: String,
    #[serde(rename = "B", alias = "b", default, skip_serializing_if = "Option::is_none")]
    pub b: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    /// First depth of a depth series.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_from: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h_grid: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub u: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gammas: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub us: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threshold: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bs: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappas: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub betas: Option<Vec<f64>>,
    /// Never persisted: results do not depend on it.
    #[serde(default, skip_serializing)]
    pub workers: Option<usize>,
}

/// Section each key belongs to in the text format.
fn section_of(key: &str) -> Option<&'static str> {
    Some(match key {
        "command" | "tol" | "threshold" => "run",
        "B" | "b" | "n" | "n_from" => "lattice",
        "kappa" | "beta" | "seed" => "disorder",
        "h" | "h_grid" | "u" | "us" | "gamma" | "gammas" => "field",
        "samples" | "workers" => "mc",
        "bs" | "kappas" | "betas" => "scan",
        _ => return None,
    })
}

fn parse_list(value: &str) -> Result<Vec<f64>, String> {
    value
        .split(',')
        .map(|s| s.trim())
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<f64>().map_err(|e| format!("{s:?}: {e}")))
        .collect()
}

impl RunConfig {
    /// Parses the sectioned `key = value` format.
    pub fn from_text(text: &str) -> CliResult<Self> {
        let mut cfg = RunConfig::default();
        let mut section: Option<String> = None;
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.split(['#', ';']).next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix('[') {
                let name = name
                    .strip_suffix(']')
                    .ok_or_else(|| CliError::Config(format!("line {line_no}: unterminated section header")))?
                    .trim();
                if !["run", "lattice", "disorder", "field", "mc", "scan"].contains(&name) {
                    return Err(CliError::Config(format!("line {line_no}: unknown section [{name}]")));
                }
                section = Some(name.to_string());
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| CliError::Config(format!("line {line_no}: expected key = value")))?;
            let (key, value) = (key.trim(), value.trim());
            let home = section_of(key)
                .ok_or_else(|| CliError::Config(format!("line {line_no}: unknown field {key:?}")))?;
            if let Some(s) = &section {
                if s != home {
                    return Err(CliError::Config(format!(
                        "line {line_no}: field {key:?} belongs in [{home}], found in [{s}]"
                    )));
                }
            }
            cfg.set(key, value)
                .map_err(|m| CliError::Config(format!("line {line_no}: field {key:?}: {m}")))?;
        }
        Ok(cfg)
    }

    /// Parses JSON, accepting either a bare config or a run record.
    pub fn from_json(text: &str) -> CliResult<Self> {
        let value: serde_json::Value =
            serde_json::from_str(text).map_err(|e| CliError::Config(format!("line {}: {e}", e.line())))?;
        let inner = match value.get("config") {
            Some(c) if value.get("result").is_some() => c.clone(),
            _ => value,
        };
        serde_json::from_value(inner).map_err(|e| CliError::Config(e.to_string()))
    }

    /// Reads a config file; JSON is recognised by a leading `{`.
    pub fn from_file(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        if text.trim_start().starts_with('{') {
            Self::from_json(&text)
        } else {
            Self::from_text(&text)
        }
    }

    fn set(&mut self, key: &str, value: &str) -> Result<(), String> {
        fn num<T: std::str::FromStr>(v: &str) -> Result<T, String>
        where
            T::Err: std::fmt::Display,
        {
            v.parse::<T>().map_err(|e| format!("{v:?}: {e}"))
        }
        match key {
            "command" => self.command = value.to_string(),
            "tol" => self.tol = Some(num(value)?),
            "threshold" => self.threshold = Some(num(value)?),
            "B" | "b" => self.b = Some(num(value)?),
            "n" => self.n = Some(num(value)?),
            "n_from" => self.n_from = Some(num(value)?),
            "kappa" => self.kappa = Some(num(value)?),
            "beta" => self.beta = Some(num(value)?),
            "seed" => self.seed = Some(num(value)?),
            "h" => self.h = Some(num(value)?),
            "h_grid" => self.h_grid = Some(parse_list(value)?),
            "u" => self.u = Some(num(value)?),
            "us" => self.us = Some(parse_list(value)?),
            "gamma" => self.gamma = Some(num(value)?),
            "gammas" => self.gammas = Some(parse_list(value)?),
            "samples" => self.samples = Some(num(value)?),
            "workers" => self.workers = Some(num(value)?),
            "bs" => self.bs = Some(parse_list(value)?),
            "kappas" => self.kappas = Some(parse_list(value)?),
            "betas" => self.betas = Some(parse_list(value)?),
            _ => return Err("unknown field".into()),
        }
        Ok(())
    }

    /// Fields set in `other` replace those set here.
    pub fn overlay(&mut self, other: &RunConfig) {
        macro_rules! take {
            ($($f:ident),*) => {$(
                if other.$f.is_some() {
                    self.$f = other.$f.clone();
                }
            )*};
        }
        if !other.command.is_empty() {
            self.command = other.command.clone();
        }
        take!(b, n, n_from, kappa, beta, seed, h, h_grid, u, gamma, gammas, us, samples, tol, threshold, bs, kappas, betas, workers);
    }

    /// Hex SHA-256 of the persisted form.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        hex::encode(Sha256::digest(json.as_bytes()))
    }

    /// Renders the sectioned text format; `from_text` reads it back.
    pub fn to_text(&self) -> String {
        let value = serde_json::to_value(self).expect("config serializes");
        let map = value.as_object().expect("object");
        let mut out = String::new();
        for section in ["run", "lattice", "disorder", "field", "mc", "scan"] {
            let mut lines = Vec::new();
            for (k, v) in map {
                if section_of(k) != Some(section) {
                    continue;
                }
                let text = match v {
                    serde_json::Value::Array(xs) => {
                        xs.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(", ")
                    }
                    serde_json::Value::String(s) => s.clone(),
                    other => other.to_string(),
                };
                lines.push(format!("{k} = {text}"));
            }
            if !lines.is_empty() {
                out.push_str(&format!("[{section}]\n{}\n\n", lines.join("\n")));
            }
        }
        out
    }

    pub fn require_f64(&self, value: Option<f64>, name: &str) -> CliResult<f64> {
        value.ok_or_else(|| CliError::Config(format!("{} needs field {name:?}", self.command)))
    }

    pub fn require_usize(&self, value: Option<usize>, name: &str) -> CliResult<usize> {
        value.ok_or_else(|| CliError::Config(format!("{} needs field {name:?}", self.command)))
    }
}

/// Worker count from the config, else `HIERPIN_WORKERS`, else all cores.
pub fn workers(cfg: &RunConfig) -> usize {
    cfg.workers
        .or_else(|| std::env::var("HIERPIN_WORKERS").ok().and_then(|v| v.parse().ok()))
        .unwrap_or(0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn text_round_trip() {
        let text = "[run]\ncommand = quenched\n\n[lattice]\nB = 1.5\nn = 6\n[disorder]\nkappa=0.1 # comment\nbeta = 1\n[field]\nh_grid = -0.1, 0, 0.25\n";
        let cfg = RunConfig::from_text(text).unwrap();
        assert_eq!(cfg.command, "quenched");
        assert_eq!(cfg.b, Some(1.5));
        assert_eq!(cfg.h_grid, Some(vec![-0.1, 0.0, 0.25]));
        assert_eq!(RunConfig::from_text(&cfg.to_text()).unwrap(), cfg);
    }

    #[test]
    fn errors_name_line_and_field() {
        let e = RunConfig::from_text("[lattice]\nB = 1.5\nn = six\n").unwrap_err();
        assert!(e.to_string().contains("line 3") && e.to_string().contains("\"n\""), "{e}");
        let e = RunConfig::from_text("[disorder]\nB = 1.5\n").unwrap_err();
        assert!(e.to_string().contains("belongs in [lattice]"));
        let e = RunConfig::from_text("colour = red\n").unwrap_err();
        assert!(e.to_string().contains("unknown field"));
        assert_eq!(e.exit_code(), 2);
        assert!(RunConfig::from_text("[nope]\n").is_err());
        assert!(RunConfig::from_json("{\"B\": 1.5, \"colour\": 1}").is_err());
    }

    #[test]
    fn json_accepts_records_and_hash_ignores_workers() {
        let mut cfg = RunConfig::from_json("{\"command\": \"pure\", \"B\": 1.5, \"h\": 0.01}").unwrap();
        let h = cfg.hash();
        cfg.workers = Some(3);
        assert_eq!(cfg.hash(), h);
        let record = format!("{{\"config\": {}, \"result\": 1}}", serde_json::to_string(&cfg).unwrap());
        let back = RunConfig::from_json(&record).unwrap();
        assert_eq!(back.b, Some(1.5));
        assert_eq!(back.workers, None);
    }
}
