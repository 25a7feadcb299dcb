//! Thin wrappers running one command from a resolved config.

use serde::Serialize;
use serde_json::{json, Value};

use hierpin::annealed::{
    annealed_moments, annealed_weight_vector, contact_growth_rate, criticality_profile, find_annealed_critical_point,
    AnnealedParams, ProfileRow,
};
use hierpin::disorder::{k_infty, DisorderSpec};
use hierpin::lattice::{pure_exponent, pure_free_energy, LatticeSpec};
use hierpin::quenched::{quenched_free_energy_mc, FreeEnergyEstimate};
use hierpin::relevance::{
    change_of_measure_probe, fractional_moment_mc, log_spaced, n1_scale, overlap_series, relevance_search,
    smoothing_exponent_probe, strong_correlation_probe, y_n_norm, McConfig, RelevanceSearchConfig,
};

use crate::config::{workers, RunConfig, COMMANDS, DEFAULT_SEED};
use crate::error::{CliError, CliResult};

/// Result of one command: the structured result and an optional CSV series.
pub struct Output {
    pub result: Value,
    pub csv: Option<String>,
}

fn to_value<T: Serialize>(x: &T) -> Value {
    serde_json::to_value(x).expect("results serialize")
}

/// Fills the command's defaults so the persisted config is self-contained.
pub fn resolve(mut cfg: RunConfig) -> CliResult<RunConfig> {
    if !COMMANDS.contains(&cfg.command.as_str()) {
        return Err(CliError::Config(format!("unknown command {:?}", cfg.command)));
    }
    let seeded = matches!(
        cfg.command.as_str(),
        "quenched" | "relevance.fm" | "relevance.search" | "relevance.overlap" | "relevance.com"
            | "relevance.smoothing" | "relevance.strong"
    );
    if seeded {
        cfg.seed.get_or_insert(DEFAULT_SEED);
    }
    let (n, samples, tol) = match cfg.command.as_str() {
        "pure" => (None, None, Some(1e-10)),
        "quenched" => (Some(10), Some(100), None),
        "annealed.critical" => (Some(14), None, Some(1e-6)),
        "annealed.profile" => (Some(12), None, Some(1e-7)),
        "annealed.weights" => (Some(10), None, None),
        "relevance.fm" => (Some(10), Some(400), None),
        "relevance.overlap" => (Some(10), Some(100_000), None),
        "relevance.com" => (Some(8), Some(4000), Some(1e-7)),
        "relevance.smoothing" => (Some(12), Some(200), Some(1e-6)),
        "relevance.strong" => (Some(12), Some(200), None),
        "scan" => (Some(12), None, Some(1e-7)),
        _ => (None, None, None),
    };
    if cfg.n.is_none() {
        cfg.n = n;
    }
    if cfg.samples.is_none() {
        cfg.samples = samples;
    }
    if cfg.tol.is_none() {
        cfg.tol = tol;
    }
    match cfg.command.as_str() {
        "relevance.fm" => {
            cfg.gamma.get_or_insert(0.98);
        }
        "relevance.overlap" => {
            cfg.u.get_or_insert(0.01);
            cfg.n_from.get_or_insert(4);
        }
        "relevance.smoothing" => {
            cfg.threshold.get_or_insert(1.8);
        }
        "relevance.search" => {
            let b = cfg.require_f64(cfg.b, "B")?;
            let kappa = cfg.require_f64(cfg.kappa, "kappa")?;
            let d = RelevanceSearchConfig::default_grid(b, kappa);
            cfg.betas.get_or_insert(d.betas);
            cfg.us.get_or_insert(d.us);
            cfg.gammas.get_or_insert(d.gammas);
            cfg.n.get_or_insert(d.n);
            cfg.samples.get_or_insert(d.samples);
            cfg.tol.get_or_insert(d.annealed_tol);
            cfg.seed.get_or_insert(d.seed);
        }
        _ => {}
    }
    Ok(cfg)
}

fn csv<T>(header: &str, rows: impl IntoIterator<Item = T>, f: impl Fn(T) -> String) -> String {
    let mut out = String::from(header);
    out.push('\n');
    for r in rows {
        out.push_str(&f(r));
        out.push('\n');
    }
    out
}

/// Annealed commands are only meaningful for a summable covariance.
fn annealed_kappa(cfg: &RunConfig) -> CliResult<f64> {
    let kappa = cfg.require_f64(cfg.kappa, "kappa")?;
    k_infty(kappa)?;
    Ok(kappa)
}

fn critical_h(cfg: &RunConfig, b: f64, kappa: f64, beta: f64) -> CliResult<(f64, Option<Value>)> {
    if let Some(h) = cfg.h {
        return Ok((h, None));
    }
    let n = cfg.n.unwrap_or(12).min(14);
    let r = find_annealed_critical_point(b, kappa, beta, n, cfg.tol.unwrap_or(1e-7))?;
    Ok((r.h_hat, Some(to_value(&r))))
}

pub fn execute(cfg: &RunConfig) -> CliResult<Output> {
    let w = workers(cfg);
    let plain = |result: Value| Ok(Output { result, csv: None });
    match cfg.command.as_str() {
        "pure" => {
            let b = cfg.require_f64(cfg.b, "B")?;
            let h = cfg.require_f64(cfg.h, "h")?;
            let f = pure_free_energy(b, h, cfg.tol.unwrap_or(1e-10))?;
            plain(json!({ "free_energy": f, "nu": pure_exponent(b)? }))
        }
        "quenched" => {
            let b = cfg.require_f64(cfg.b, "B")?;
            let n = cfg.require_usize(cfg.n, "n")?;
            let dis = DisorderSpec::new(
                cfg.require_f64(cfg.kappa, "kappa")?,
                cfg.require_f64(cfg.beta, "beta")?,
                cfg.seed.unwrap_or(DEFAULT_SEED),
            )?;
            let hs = match (&cfg.h_grid, cfg.h) {
                (Some(g), _) => g.clone(),
                (None, Some(h)) => vec![h],
                (None, None) => return Err(CliError::Config("quenched needs field \"h\" or \"h_grid\"".into())),
            };
            let lat = LatticeSpec::new(b, n)?;
            let samples = cfg.require_usize(cfg.samples, "samples")?;
            let est: Vec<FreeEnergyEstimate> = hs
                .iter()
                .map(|&h| quenched_free_energy_mc(&lat, h, &dis, samples, w))
                .collect::<hierpin::Result<_>>()?;
            let table = csv(FreeEnergyEstimate::CSV_HEADER, &est, |e| e.csv_row());
            Ok(Output { result: json!({ "estimates": est }), csv: Some(table) })
        }
        "annealed.critical" => {
            let kappa = annealed_kappa(cfg)?;
            let r = find_annealed_critical_point(
                cfg.require_f64(cfg.b, "B")?,
                kappa,
                cfg.require_f64(cfg.beta, "beta")?,
                cfg.require_usize(cfg.n, "n")?,
                cfg.require_f64(cfg.tol, "tol")?,
            )?;
            plain(to_value(&r))
        }
        "annealed.profile" => {
            let b = cfg.require_f64(cfg.b, "B")?;
            let kappa = annealed_kappa(cfg)?;
            let beta = cfg.require_f64(cfg.beta, "beta")?;
            let n = cfg.require_usize(cfg.n, "n")?;
            let (h, critical) = critical_h(cfg, b, kappa, beta)?;
            let rows = criticality_profile(b, kappa, beta, h, n)?;
            let rate = contact_growth_rate(&rows, n / 2, n)?;
            let p = AnnealedParams::new(b, kappa, beta, h)?;
            let table = csv(ProfileRow::CSV_HEADER, &rows, |r| r.csv_row(&p));
            Ok(Output {
                result: json!({ "h": h, "critical_point": critical, "growth_rate": rate, "rows": rows }),
                csv: Some(table),
            })
        }
        "annealed.weights" => {
            let b = cfg.require_f64(cfg.b, "B")?;
            let kappa = annealed_kappa(cfg)?;
            let beta = cfg.require_f64(cfg.beta, "beta")?;
            let h = cfg.require_f64(cfg.h, "h")?;
            let n = cfg.require_usize(cfg.n, "n")?;
            let s = annealed_weight_vector(b, kappa, beta, h, n)?;
            let top = s.top();
            let table = csv("s,logw", top.log_w.iter().enumerate(), |(k, w)| format!("{k},{w:e}"));
            Ok(Output {
                result: json!({
                    "log_partition": s.log_partition_at(n),
                    "aux_log_partition": s.aux_log_partition_at(n)?,
                    "moments": annealed_moments(&s, 2)?,
                    "log_weights": top.log_w.iter().map(|w| w.to_string()).collect::<Vec<_>>(),
                }),
                csv: Some(table),
            })
        }
        "relevance.fm" => {
            let run = fractional_moment_mc(
                cfg.require_f64(cfg.b, "B")?,
                cfg.require_f64(cfg.kappa, "kappa")?,
                cfg.require_f64(cfg.beta, "beta")?,
                cfg.require_f64(cfg.gamma, "gamma")?,
                cfg.require_f64(cfg.h, "h")?,
                cfg.require_usize(cfg.n, "n")?,
                cfg.require_usize(cfg.samples, "samples")?,
                cfg.seed.unwrap_or(DEFAULT_SEED),
                w,
            )?;
            plain(to_value(&run))
        }
        "relevance.search" => {
            let b = cfg.require_f64(cfg.b, "B")?;
            let kappa = cfg.require_f64(cfg.kappa, "kappa")?;
            let mut sc = RelevanceSearchConfig::default_grid(b, kappa);
            sc.betas = cfg.betas.clone().unwrap_or(sc.betas);
            sc.us = cfg.us.clone().unwrap_or(sc.us);
            sc.gammas = cfg.gammas.clone().unwrap_or(sc.gammas);
            sc.n = cfg.n.unwrap_or(sc.n);
            sc.samples = cfg.samples.unwrap_or(sc.samples);
            sc.seed = cfg.seed.unwrap_or(sc.seed);
            sc.annealed_tol = cfg.tol.unwrap_or(sc.annealed_tol);
            sc.workers = w;
            let mut r = relevance_search(&sc)?;
            r.config.workers = 0;
            let rows = r.per_beta.iter().flat_map(|s| s.points.iter().map(move |p| (s.beta, p)));
            let table = csv("beta,u,h,certified,raw_certified,gamma,level,best_margin", rows, |(beta, p)| {
                format!(
                    "{beta},{},{},{},{},{},{},{:e}",
                    p.u,
                    p.h,
                    p.certified,
                    p.raw_certified,
                    p.gamma.map_or(String::new(), |g| g.to_string()),
                    p.level.map_or(String::new(), |l| l.to_string()),
                    p.best_margin
                )
            });
            Ok(Output {
                result: json!({
                    "any_certified": r.any_certified(),
                    "onset_nonincreasing_in_beta": r.onset_nonincreasing_in_beta(),
                    "shift_monotone_in_beta": r.shift_monotone_in_beta(),
                    "search": r,
                }),
                csv: Some(table),
            })
        }
        "relevance.overlap" => {
            let b = cfg.require_f64(cfg.b, "B")?;
            let u = cfg.require_f64(cfg.u, "u")?;
            let from = cfg.require_usize(cfg.n_from, "n_from")?;
            let to = cfg.require_usize(cfg.n, "n")?;
            if from > to {
                return Err(CliError::Config(format!("n_from = {from} exceeds n = {to}")));
            }
            let depths: Vec<usize> = (from..=to).collect();
            let s = overlap_series(
                b,
                cfg.require_f64(cfg.kappa, "kappa")?,
                u,
                &depths,
                cfg.require_usize(cfg.samples, "samples")?,
                cfg.seed.unwrap_or(DEFAULT_SEED),
                w,
            )?;
            let table = csv("n,u,samples,estimate,stderr,mean_overlap", &s.stats, |x| {
                format!("{},{},{},{:e},{:e},{:e}", x.n, x.u, x.samples, x.estimate, x.stderr, x.mean_overlap)
            });
            Ok(Output {
                result: json!({ "series": s, "n1_scale": n1_scale(b, u) }),
                csv: Some(table),
            })
        }
        "relevance.yn" => {
            let b = cfg.require_f64(cfg.b, "B")?;
            let n = cfg.require_usize(cfg.n, "n")?;
            plain(json!({ "y_n": y_n_norm(b, n)? }))
        }
        "relevance.com" => {
            let b = cfg.require_f64(cfg.b, "B")?;
            let kappa = annealed_kappa(cfg)?;
            let beta = cfg.require_f64(cfg.beta, "beta")?;
            let (h, critical) = if beta > 0.0 { critical_h(cfg, b, kappa, beta)? } else { (cfg.require_f64(cfg.h, "h")?, None) };
            let s = change_of_measure_probe(
                b,
                kappa,
                beta,
                h,
                cfg.require_usize(cfg.n, "n")?,
                cfg.require_usize(cfg.samples, "samples")?,
                cfg.seed.unwrap_or(DEFAULT_SEED),
                w,
            )?;
            plain(json!({ "stats": s, "critical_point": critical }))
        }
        "relevance.smoothing" => {
            let b = cfg.require_f64(cfg.b, "B")?;
            let kappa = annealed_kappa(cfg)?;
            let beta = cfg.require_f64(cfg.beta, "beta")?;
            let mc = McConfig {
                n: cfg.require_usize(cfg.n, "n")?,
                samples: cfg.require_usize(cfg.samples, "samples")?,
                seed: cfg.seed.unwrap_or(DEFAULT_SEED),
                workers: w,
            };
            let grid = match &cfg.h_grid {
                Some(g) => g.clone(),
                None => {
                    let anchor = if beta > 0.0 {
                        find_annealed_critical_point(b, kappa, beta, mc.n.min(14), cfg.tol.unwrap_or(1e-6))?.h_hi
                    } else {
                        0.0
                    };
                    std::iter::once(anchor - 0.05)
                        .chain(log_spaced(0.005, 0.6, 20).into_iter().map(|u| anchor + u))
                        .collect()
                }
            };
            let mut p = smoothing_exponent_probe(b, kappa, beta, &grid, mc, cfg.require_f64(cfg.threshold, "threshold")?)?;
            p.mc.workers = 0;
            let table = csv(FreeEnergyEstimate::CSV_HEADER, &p.estimates, |e| e.csv_row());
            Ok(Output { result: to_value(&p), csv: Some(table) })
        }
        "relevance.strong" => {
            let mc = McConfig {
                n: cfg.require_usize(cfg.n, "n")?,
                samples: cfg.require_usize(cfg.samples, "samples")?,
                seed: cfg.seed.unwrap_or(DEFAULT_SEED),
                workers: w,
            };
            let p = strong_correlation_probe(
                cfg.require_f64(cfg.b, "B")?,
                cfg.require_f64(cfg.kappa, "kappa")?,
                cfg.require_f64(cfg.beta, "beta")?,
                cfg.require_f64(cfg.h, "h")?,
                mc,
            )?;
            plain(to_value(&p))
        }
        "scan" => Err(CliError::Config("scan runs through run_scan".into())),
        other => Err(CliError::Config(format!("unknown command {other:?}"))),
    }
}
