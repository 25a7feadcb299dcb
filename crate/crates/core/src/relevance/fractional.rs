//! Fractional-moment delocalization certificates.
//!
//! With `A_k = E[(Zbar_k)^gamma]`, the moments obey
//! `A_{k+1} <= (A_k^2 + (B-1)^gamma) / B^gamma`; once some `A_k` falls at or
//! below the upper fixed point `x_gamma` of that map, the quenched free
//! energy vanishes. `A_k` is only reachable by Monte Carlo, so the
//! certificate here is statistical: `A_k + 3 stderr <= x_gamma`.
//!
//! `Zbar_k` is heavy tailed above the annealed critical point, and a sample
//! that misses the tail reports small `A_k` with a small standard error.
//! The same environments therefore also estimate `E[Zbar_k]`, which is known
//! exactly from the annealed recursion; a level counts towards a
//! certificate only when that first-moment check passes.

use serde::{Deserialize, Serialize};

use crate::annealed::{annealed_weight_vector, find_annealed_critical_point};
use crate::disorder::{sample_disorder, DisorderSpec};
use crate::error::{check_finite, Error, Result};
use crate::lattice::{check_geometry, LatticeSpec};
use crate::quenched::{aux_tilt, visit_block_vectors, QUENCHED_N_MAX};
use crate::rng::{stream, Domain};
use crate::stats::{run_indexed, Estimate};

/// Number of standard errors required by the statistical certificate.
pub const CERT_SIGMAS: f64 = 3.0;

/// Upper fixed point of `x -> (x^2 + (B-1)^gamma) / B^gamma`.
pub fn fixed_point_xgamma(b: f64, gamma: f64) -> Result<f64> {
    check_geometry(b)?;
    if !(gamma > 0.0 && gamma <= 1.0) {
        return Err(Error::arg(format!("gamma must lie in (0, 1], got {gamma}")));
    }
    let bg = b.powf(gamma);
    let disc = bg * bg - 4.0 * (b - 1.0).powf(gamma);
    if disc < 0.0 {
        return Err(Error::NoFixedPoint(format!(
            "no real fixed point for B={b}, gamma={gamma} (discriminant {disc:e})"
        )));
    }
    Ok(0.5 * (bg + disc.sqrt()))
}

/// `a_{k+1} = (a_k^2 + (B-1)^gamma) / B^gamma`, returned with `a_0` first.
pub fn fm_map_iterate(a0: f64, b: f64, gamma: f64, steps: usize) -> Result<Vec<f64>> {
    if !(a0 >= 0.0) {
        return Err(Error::arg(format!("a0 must be >= 0, got {a0}")));
    }
    let bg = b.powf(gamma);
    let c = (b - 1.0).powf(gamma);
    let mut out = Vec::with_capacity(steps + 1);
    let mut a = a0;
    out.push(a);
    for _ in 0..steps {
        a = (a * a + c) / bg;
        out.push(a);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FractionalMomentRun {
    pub b: f64,
    pub kappa: f64,
    pub beta: f64,
    pub gamma: f64,
    pub h: f64,
    pub n: usize,
    pub samples: usize,
    pub seed: u64,
    /// `A_k` estimates for `k = 0..=n`, each averaged over the `2^{n-k}`
    /// blocks of level `k` within a sample.
    pub a_hat: Vec<Estimate>,
    pub x_gamma: f64,
    pub sigmas: f64,
    /// Monte Carlo `E[Zbar_k]` from the same environments.
    pub first_moment: Vec<Estimate>,
    /// Exact `E[Zbar_k] = Zbar^a_k`.
    pub first_moment_exact: Vec<f64>,
    /// Whether `first_moment[k]` lies within `sigmas` standard errors of the
    /// exact value.
    pub tail_resolved: Vec<bool>,
    /// First level with `A_k + sigmas * stderr <= x_gamma`, ignoring the
    /// first-moment check.
    pub raw_certified_level: Option<usize>,
    /// First level passing both the moment bound and the first-moment check.
    pub certified_level: Option<usize>,
}

impl FractionalMomentRun {
    pub fn certified(&self) -> bool {
        self.certified_level.is_some()
    }

    /// `x_gamma - (A_k + sigmas * stderr)` at level `k`.
    pub fn margin(&self, k: usize) -> f64 {
        let e = &self.a_hat[k];
        self.x_gamma - (e.mean + self.sigmas * e.stderr)
    }

    /// Level with the largest margin among tail-resolved levels, and that
    /// margin (positive when certified).
    pub fn best_level(&self) -> Option<(usize, f64)> {
        (0..self.a_hat.len())
            .filter(|&k| self.tail_resolved[k])
            .map(|k| (k, self.margin(k)))
            .max_by(|a, b| a.1.total_cmp(&b.1))
    }

    pub fn best_margin(&self) -> f64 {
        self.best_level().map_or(f64::NEG_INFINITY, |(_, m)| m)
    }
}

/// `A_k` estimates for several `gamma` at once, sharing the environments.
pub fn fractional_moments_multi(
    b: f64,
    dis: &DisorderSpec,
    gammas: &[f64],
    h: f64,
    n: usize,
    samples: usize,
    workers: usize,
) -> Result<Vec<FractionalMomentRun>> {
    let lat = LatticeSpec::new(b, n)?;
    check_finite("h", h)?;
    if samples < 2 {
        return Err(Error::arg(format!("need at least 2 samples, got {samples}")));
    }
    let x_gammas: Vec<f64> = gammas
        .iter()
        .map(|&g| fixed_point_xgamma(b, g))
        .collect::<Result<_>>()?;
    let tilts: Vec<f64> = (0..=n).map(|k| aux_tilt(dis, k)).collect::<Result<_>>()?;
    let annealed = annealed_weight_vector(b, dis.kappa, dis.beta, h, n)?;
    let first_moment_exact: Vec<f64> = (0..=n)
        .map(|k| annealed.aux_log_partition_at(k).map(f64::exp))
        .collect::<Result<_>>()?;

    // per sample: [gamma][level] block-averaged (Zbar_k)^gamma; the last
    // row is gamma = 1
    let exponents: Vec<f64> = gammas.iter().copied().chain([1.0]).collect();
    let per_sample = run_indexed(samples, workers, |i| -> Result<Vec<Vec<f64>>> {
        let mut rng = stream(dis.seed, Domain::Disorder, i);
        let omega = sample_disorder(dis, n, &mut rng)?;
        let mut out = vec![vec![0.0; n + 1]; exponents.len()];
        visit_block_vectors(&lat, h, dis, &omega, QUENCHED_N_MAX, |k, blocks| {
            let logs: Vec<f64> = blocks.iter().map(|v| v.log_total_tilted(tilts[k])).collect();
            for (g, &gamma) in exponents.iter().enumerate() {
                let s: f64 = logs.iter().map(|l| (gamma * l).exp()).sum();
                out[g][k] = s / logs.len() as f64;
            }
        })?;
        Ok(out)
    });
    let per_sample: Vec<Vec<Vec<f64>>> = per_sample.into_iter().collect::<Result<_>>()?;
    let level_estimates = |g: usize| -> Vec<Estimate> {
        (0..=n)
            .map(|k| {
                let xs: Vec<f64> = per_sample.iter().map(|s| s[g][k]).collect();
                Estimate::from_values(&xs)
            })
            .collect()
    };
    let first_moment = level_estimates(gammas.len());
    let tail_resolved: Vec<bool> = first_moment
        .iter()
        .zip(&first_moment_exact)
        .map(|(e, &exact)| (e.mean - exact).abs() <= CERT_SIGMAS * e.stderr + 1e-12 * exact)
        .collect();

    Ok(gammas
        .iter()
        .enumerate()
        .map(|(g, &gamma)| {
            let a_hat = level_estimates(g);
            let x_gamma = x_gammas[g];
            let bound_holds: Vec<bool> = a_hat
                .iter()
                .map(|e| e.mean + CERT_SIGMAS * e.stderr <= x_gamma)
                .collect();
            let raw_certified_level = bound_holds.iter().position(|&ok| ok);
            let certified_level = (0..=n).find(|&k| bound_holds[k] && tail_resolved[k]);
            FractionalMomentRun {
                b,
                kappa: dis.kappa,
                beta: dis.beta,
                gamma,
                h,
                n,
                samples,
                seed: dis.seed,
                a_hat,
                x_gamma,
                sigmas: CERT_SIGMAS,
                first_moment: first_moment.clone(),
                first_moment_exact: first_moment_exact.clone(),
                tail_resolved: tail_resolved.clone(),
                raw_certified_level,
                certified_level,
            }
        })
        .collect())
}

/// Monte Carlo estimate of `E[(Zbar_k)^gamma]`, `k <= n`, with the
/// 3-sigma certificate flag.
#[allow(clippy::too_many_arguments)]
pub fn fractional_moment_mc(
    b: f64,
    kappa: f64,
    beta: f64,
    gamma: f64,
    h: f64,
    n: usize,
    samples: usize,
    seed: u64,
    workers: usize,
) -> Result<FractionalMomentRun> {
    let dis = DisorderSpec::new(kappa, beta, seed)?;
    let mut runs = fractional_moments_multi(b, &dis, &[gamma], h, n, samples, workers)?;
    Ok(runs.pop().expect("one gamma"))
}

/// Grid for [`relevance_search`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelevanceSearchConfig {
    pub b: f64,
    pub kappa: f64,
    pub betas: Vec<f64>,
    /// Offsets above the certified annealed bracket, searched in order.
    pub us: Vec<f64>,
    pub gammas: Vec<f64>,
    pub n: usize,
    pub samples: usize,
    pub seed: u64,
    pub workers: usize,
    /// Depth and tolerance used to bracket the annealed critical point.
    pub annealed_n: usize,
    pub annealed_tol: f64,
}

impl RelevanceSearchConfig {
    /// Default grid at given `B`, `kappa`.
    pub fn default_grid(b: f64, kappa: f64) -> Self {
        Self {
            b,
            kappa,
            betas: vec![0.6, 0.8, 1.0, 1.2, 1.5, 2.0, 2.5],
            us: log_spaced(0.002, 0.2, 9),
            gammas: vec![0.95, 0.98, 0.995],
            n: 10,
            samples: 400,
            seed: 2011,
            workers: 0,
            annealed_n: 12,
            annealed_tol: 1e-6,
        }
    }
}

/// `count` log-spaced points from `lo` to `hi` inclusive.
pub fn log_spaced(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![lo];
    }
    let (a, c) = (lo.ln(), hi.ln());
    (0..count)
        .map(|i| (a + (c - a) * i as f64 / (count - 1) as f64).exp())
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchPoint {
    pub u: f64,
    pub h: f64,
    pub certified: bool,
    /// Whether the moment bound alone held for some gamma and level,
    /// regardless of the first-moment check.
    pub raw_certified: bool,
    /// Gamma and level of the strongest certificate, if any.
    pub gamma: Option<f64>,
    pub level: Option<usize>,
    pub best_margin: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BetaSummary {
    pub beta: f64,
    /// Upper end of the certified annealed bracket; `h = annealed_upper + u`.
    pub annealed_upper: f64,
    pub points: Vec<SearchPoint>,
    pub smallest_certified_u: Option<f64>,
    /// Largest certified `u`: a statistical lower bound on `h_c - h_c^a`.
    pub largest_certified_u: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelevanceSearchResult {
    pub config: RelevanceSearchConfig,
    /// Gammas of the grid for which `x_gamma` exists at this `B`.
    pub gammas_used: Vec<f64>,
    /// Gammas dropped because the fixed-point equation has no real root.
    pub gammas_skipped: Vec<f64>,
    pub per_beta: Vec<BetaSummary>,
}

impl RelevanceSearchResult {
    pub fn any_certified(&self) -> bool {
        self.per_beta.iter().any(|s| s.largest_certified_u.is_some())
    }

    /// Certified shift lower bounds are nondecreasing in beta, over the betas
    /// where a certificate fired.
    pub fn shift_monotone_in_beta(&self) -> bool {
        let us: Vec<f64> = self
            .per_beta
            .iter()
            .filter_map(|s| s.largest_certified_u)
            .collect();
        us.windows(2).all(|w| w[1] >= w[0])
    }

    /// Smallest certified `u` is nonincreasing in beta, counting a beta
    /// without any certificate as `+inf`.
    pub fn onset_nonincreasing_in_beta(&self) -> bool {
        let us: Vec<f64> = self
            .per_beta
            .iter()
            .map(|s| s.smallest_certified_u.unwrap_or(f64::INFINITY))
            .collect();
        us.windows(2).all(|w| w[1] <= w[0])
    }
}

/// Searches the grid for fractional-moment certificates at fields strictly
/// above the annealed critical point.
pub fn relevance_search(config: &RelevanceSearchConfig) -> Result<RelevanceSearchResult> {
    let (gammas_used, gammas_skipped): (Vec<f64>, Vec<f64>) = config
        .gammas
        .iter()
        .partition(|&&g| !matches!(fixed_point_xgamma(config.b, g), Err(Error::NoFixedPoint(_))));
    if gammas_used.is_empty() {
        return Err(Error::NoFixedPoint(format!(
            "no gamma in {:?} has a fixed point at B={}",
            config.gammas, config.b
        )));
    }
    let mut per_beta = Vec::with_capacity(config.betas.len());
    for &beta in &config.betas {
        let crit = find_annealed_critical_point(config.b, config.kappa, beta, config.annealed_n, config.annealed_tol)?;
        let dis = DisorderSpec::new(config.kappa, beta, config.seed)?;
        let mut points = Vec::with_capacity(config.us.len());
        for &u in &config.us {
            let h = crit.h_hi + u;
            let runs = fractional_moments_multi(config.b, &dis, &gammas_used, h, config.n, config.samples, config.workers)?;
            let best = runs
                .iter()
                .max_by(|a, b| a.best_margin().total_cmp(&b.best_margin()))
                .expect("at least one gamma");
            let certified = best.certified();
            let level = best.best_level().map(|(k, _)| k);
            points.push(SearchPoint {
                u,
                h,
                certified,
                raw_certified: runs.iter().any(|r| r.raw_certified_level.is_some()),
                gamma: certified.then_some(best.gamma),
                level: if certified { level } else { None },
                best_margin: best.best_margin(),
            });
        }
        let certified: Vec<f64> = points.iter().filter(|p| p.certified).map(|p| p.u).collect();
        per_beta.push(BetaSummary {
            beta,
            annealed_upper: crit.h_hi,
            smallest_certified_u: certified.iter().copied().reduce(f64::min),
            largest_certified_u: certified.iter().copied().reduce(f64::max),
            points,
        });
    }
    Ok(RelevanceSearchResult {
        config: config.clone(),
        gammas_used,
        gammas_skipped,
        per_beta,
    })
}
