//! Phase-diagram scans over `(B, kappa, beta)`.
//!
//! Each point is stored under `points/<hash>.json`, keyed by the hash of its
//! parameters and pipeline settings; a rerun loads stored points instead of
//! recomputing them.

use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use hierpin::annealed::{contact_growth_rate, criticality_profile, find_annealed_critical_point};
use hierpin::disorder::k_infty;

use crate::config::{workers, RunConfig};
use crate::error::{CliError, CliResult};

/// Relative tolerance around `2/B` for the pure-like label.
pub const PURE_LIKE_BAND: f64 = 0.1;
/// Anomalous rates must stay below this multiple of `kappa^{-1/2}`...
pub const ANOMALOUS_KAPPA_FACTOR: f64 = 1.1;
/// ...and below this fraction of `2/B`.
pub const ANOMALOUS_PURE_FRACTION: f64 = 0.9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Regime {
    NoTransition,
    AnnealedPureLike,
    AnnealedAnomalous,
    Undecided,
}

impl Regime {
    pub fn label(self) -> &'static str {
        match self {
            Regime::NoTransition => "NO_TRANSITION",
            Regime::AnnealedPureLike => "ANNEALED_PURE_LIKE",
            Regime::AnnealedAnomalous => "ANNEALED_ANOMALOUS",
            Regime::Undecided => "UNDECIDED",
        }
    }
}

/// Label from the position of `kappa` relative to `1/2` and `B^2/4`.
pub fn analytic_regime(b: f64, kappa: f64) -> Regime {
    if kappa >= 0.5 {
        Regime::NoTransition
    } else if kappa < b * b / 4.0 {
        Regime::AnnealedPureLike
    } else {
        Regime::AnnealedAnomalous
    }
}

/// Label from a measured growth rate of `E^a[S_n]`.
pub fn measured_regime(b: f64, kappa: f64, rate: f64) -> Regime {
    let pure = 2.0 / b;
    if (rate / pure - 1.0).abs() <= PURE_LIKE_BAND {
        Regime::AnnealedPureLike
    } else if kappa > 0.0 && rate <= ANOMALOUS_KAPPA_FACTOR / kappa.sqrt() && rate < ANOMALOUS_PURE_FRACTION * pure {
        Regime::AnnealedAnomalous
    } else {
        Regime::Undecided
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhasePoint {
    #[serde(rename = "B")]
    pub b: f64,
    pub kappa: f64,
    pub beta: f64,
    pub n: usize,
    pub tol: f64,
    /// `None` when the point failed; see `error`.
    pub regime: Option<Regime>,
    pub analytic_regime: Regime,
    pub disagreement: bool,
    pub h_lo: Option<f64>,
    pub h_hi: Option<f64>,
    pub h_hat: Option<f64>,
    pub growth_rate: Option<f64>,
    pub max_abs_log_za: Option<f64>,
    pub product_below_bound: Option<bool>,
    pub error: Option<String>,
}

impl PhasePoint {
    pub const CSV_HEADER: &'static str =
        "B,kappa,beta,n,regime,analytic_regime,disagreement,h_lo,h_hi,h_hat,growth_rate,max_abs_log_za,product_below_bound,error";

    pub fn csv_row(&self) -> String {
        fn opt<T: ToString>(x: Option<T>) -> String {
            x.map_or(String::new(), |v| v.to_string())
        }
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            self.b,
            self.kappa,
            self.beta,
            self.n,
            self.regime.map_or("", |r| r.label()),
            self.analytic_regime.label(),
            self.disagreement,
            opt(self.h_lo),
            opt(self.h_hi),
            opt(self.h_hat),
            opt(self.growth_rate),
            opt(self.max_abs_log_za),
            opt(self.product_below_bound),
            self.error.as_deref().unwrap_or("").replace(',', ";"),
        )
    }
}

/// Runs the per-point pipeline. Failures are recorded in the point.
pub fn phase_point(b: f64, kappa: f64, beta: f64, n: usize, tol: f64) -> PhasePoint {
    let analytic = analytic_regime(b, kappa);
    let mut p = PhasePoint {
        b,
        kappa,
        beta,
        n,
        tol,
        regime: None,
        analytic_regime: analytic,
        disagreement: false,
        h_lo: None,
        h_hi: None,
        h_hat: None,
        growth_rate: None,
        max_abs_log_za: None,
        product_below_bound: None,
        error: None,
    };
    if k_infty(kappa).is_err() {
        p.regime = Some(Regime::NoTransition);
        p.disagreement = analytic != Regime::NoTransition;
        return p;
    }
    let mut run = || -> hierpin::Result<()> {
        let crit = find_annealed_critical_point(b, kappa, beta, n, tol)?;
        p.h_lo = Some(crit.h_lo);
        p.h_hi = Some(crit.h_hi);
        p.h_hat = Some(crit.h_hat);
        let rows = criticality_profile(b, kappa, beta, crit.h_hat, n)?;
        let rate = contact_growth_rate(&rows, n / 2, n)?;
        p.growth_rate = Some(rate);
        p.max_abs_log_za = Some(rows.iter().map(|r| r.log_za.abs()).fold(0.0, f64::max));
        p.product_below_bound = Some(rows.iter().all(|r| r.running_product <= r.product_bound));
        let regime = measured_regime(b, kappa, rate);
        p.regime = Some(regime);
        p.disagreement = regime != analytic;
        Ok(())
    };
    if let Err(e) = run() {
        p.error = Some(e.to_string());
    }
    p
}

#[derive(Serialize)]
struct PointKey {
    #[serde(rename = "B")]
    b: f64,
    kappa: f64,
    beta: f64,
    n: usize,
    tol: f64,
    version: &'static str,
}

fn point_hash(b: f64, kappa: f64, beta: f64, n: usize, tol: f64) -> String {
    let key = PointKey { b, kappa, beta, n, tol, version: env!("CARGO_PKG_VERSION") };
    let json = serde_json::to_string(&key).expect("key serializes");
    hex::encode(Sha256::digest(json.as_bytes()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanSummary {
    pub points: Vec<PhasePoint>,
    pub computed: usize,
    pub reused: usize,
}

/// Runs the scan grid into `dir`: `phase_points.csv`, `phase_points.json`,
/// one file per point under `points/` and an append-only `scan.log`.
pub fn run_scan(cfg: &RunConfig, dir: &Path) -> CliResult<ScanSummary> {
    let bs = cfg.bs.clone().or(cfg.b.map(|b| vec![b]));
    let kappas = cfg.kappas.clone().or(cfg.kappa.map(|k| vec![k]));
    let betas = cfg.betas.clone().or(cfg.beta.map(|b| vec![b]));
    let (Some(bs), Some(kappas), Some(betas)) = (bs, kappas, betas) else {
        return Err(CliError::Config("scan needs bs, kappas and betas".into()));
    };
    let n = cfg.require_usize(cfg.n, "n")?;
    let tol = cfg.require_f64(cfg.tol, "tol")?;
    let mut grid = Vec::with_capacity(bs.len() * kappas.len() * betas.len());
    for &b in &bs {
        for &kappa in &kappas {
            for &beta in &betas {
                grid.push((b, kappa, beta));
            }
        }
    }

    let points_dir = dir.join("points");
    fs::create_dir_all(&points_dir)?;
    let log = Mutex::new(OpenOptions::new().create(true).append(true).open(dir.join("scan.log"))?);
    let next = AtomicUsize::new(0);
    let reused = AtomicUsize::new(0);
    let slots: Vec<Mutex<Option<CliResult<PhasePoint>>>> = grid.iter().map(|_| Mutex::new(None)).collect();

    let threads = match workers(cfg) {
        0 => std::thread::available_parallelism().map_or(1, |n| n.get()),
        w => w,
    }
    .min(grid.len().max(1));
    std::thread::scope(|s| {
        for _ in 0..threads {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                if i >= grid.len() {
                    break;
                }
                let (b, kappa, beta) = grid[i];
                let hash = point_hash(b, kappa, beta, n, tol);
                let path = points_dir.join(format!("{hash}.json"));
                let stored = fs::read_to_string(&path)
                    .ok()
                    .and_then(|t| serde_json::from_str::<PhasePoint>(&t).ok());
                let outcome = match stored {
                    Some(p) => {
                        reused.fetch_add(1, Ordering::SeqCst);
                        Ok(p)
                    }
                    None => {
                        let p = phase_point(b, kappa, beta, n, tol);
                        let tmp = path.with_extension("tmp");
                        serde_json::to_string_pretty(&p)
                            .map_err(CliError::from)
                            .and_then(|t| fs::write(&tmp, t).map_err(CliError::from))
                            .and_then(|_| fs::rename(&tmp, &path).map_err(CliError::from))
                            .map(|_| p)
                    }
                };
                if let Ok(p) = &outcome {
                    let mut f = log.lock().expect("log lock");
                    let _ = writeln!(
                        f,
                        "B={b} kappa={kappa} beta={beta} {} {hash}",
                        p.regime.map_or("FAILED", |r| r.label())
                    );
                }
                *slots[i].lock().expect("slot lock") = Some(outcome);
            });
        }
    });

    let points: Vec<PhasePoint> = slots
        .into_iter()
        .map(|m| m.into_inner().expect("slot lock").expect("every point visited"))
        .collect::<CliResult<_>>()?;
    let mut table = String::from(PhasePoint::CSV_HEADER);
    table.push('\n');
    for p in &points {
        table.push_str(&p.csv_row());
        table.push('\n');
    }
    fs::write(dir.join("phase_points.csv"), table)?;
    fs::write(dir.join("phase_points.json"), serde_json::to_string_pretty(&points)?)?;
    let reused = reused.into_inner();
    Ok(ScanSummary { computed: points.len() - reused, reused, points })
}
