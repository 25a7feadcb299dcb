//! Exploratory Monte Carlo probes. Neither certifies anything: they report
//! estimates, noise floors and a verdict that may be inconclusive.

use serde::{Deserialize, Serialize};

use crate::annealed::find_annealed_critical_point;
use crate::disorder::DisorderSpec;
use crate::error::{Error, Result};
use crate::lattice::LatticeSpec;
use crate::quenched::{free_energy_bracket, quenched_free_energy_mc, FreeEnergyEstimate};
use crate::stats::{linear_fit, LinearFit};

/// Depth used to bracket the annealed critical point in the smoothing probe.
const ANNEALED_PROBE_DEPTH: usize = 12;

/// Monte Carlo settings shared by the probes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McConfig {
    pub n: usize,
    pub samples: usize,
    pub seed: u64,
    pub workers: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum SmoothingVerdict {
    Conforming,
    Nonconforming,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmoothingProbe {
    pub b: f64,
    pub kappa: f64,
    pub beta: f64,
    pub mc: McConfig,
    pub threshold: f64,
    pub estimates: Vec<FreeEnergyEstimate>,
    /// Where the finite-volume lower bound `mean - 2^-n log B` turns
    /// positive, refined by bisection on the same environments. Above
    /// `h_c` up to Monte Carlo error.
    pub h_c_upper: Option<f64>,
    /// Lower end of the certified annealed bracket, below `h_c`.
    pub h_c_lower: f64,
    /// Width of the finite-volume bracket around the infinite-volume free
    /// energy.
    pub noise_floor: f64,
    pub max_stderr: f64,
    /// Grid indices whose 3-sigma lower bound exceeds the noise floor.
    pub resolved: Vec<usize>,
    /// Fit of `log F` against `log(h - h_c_upper)`; biased towards small
    /// slopes.
    pub fit: Option<LinearFit>,
    /// Slope with `h_c_lower` in place of `h_c_upper`; biased towards large
    /// slopes.
    pub slope_at_lower: Option<f64>,
    pub verdict: SmoothingVerdict,
    pub reason: String,
}

/// Bisection steps used to refine the finite-volume crossing.
const CROSSING_STEPS: usize = 30;

/// Fits the local exponent of the quenched free energy above its critical
/// point. `threshold` is the exponent the fit is compared with.
///
/// `h_c` is only known to lie between the annealed critical point and the
/// finite-volume crossing, so the fit is repeated at both ends: the verdict
/// is conforming when the low-biased slope reaches `threshold`, and
/// nonconforming when the high-biased slope stays below it.
pub fn smoothing_exponent_probe(
    b: f64,
    kappa: f64,
    beta: f64,
    h_grid: &[f64],
    mc: McConfig,
    threshold: f64,
) -> Result<SmoothingProbe> {
    if h_grid.len() < 3 || h_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::arg("h grid needs at least 3 strictly increasing points"));
    }
    let lat = LatticeSpec::new(b, mc.n)?;
    let dis = DisorderSpec::new(kappa, beta, mc.seed)?;
    let h_c_lower = if beta > 0.0 {
        find_annealed_critical_point(b, kappa, beta, mc.n.min(ANNEALED_PROBE_DEPTH), 1e-6)?.h_lo
    } else {
        0.0
    };
    let run = |h: f64| quenched_free_energy_mc(&lat, h, &dis, mc.samples, mc.workers);
    let estimates: Vec<FreeEnergyEstimate> = h_grid.iter().map(|&h| run(h)).collect::<Result<_>>()?;
    let (below, above, _) = free_energy_bracket(b, kappa, beta, mc.n);
    let noise_floor = below + above;
    let max_stderr = estimates.iter().map(|e| e.stderr).fold(0.0, f64::max);

    let lower = |e: &FreeEnergyEstimate| e.mean - below;
    let h_c_upper = match estimates.iter().position(|e| lower(e) > 0.0) {
        Some(k) if k > 0 => {
            let (mut lo, mut hi) = (h_grid[k - 1], h_grid[k]);
            for _ in 0..CROSSING_STEPS {
                let mid = 0.5 * (lo + hi);
                if lower(&run(mid)?) > 0.0 {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            Some(hi)
        }
        _ => None,
    };

    let mut probe = SmoothingProbe {
        b,
        kappa,
        beta,
        mc,
        threshold,
        estimates,
        h_c_upper,
        h_c_lower,
        noise_floor,
        max_stderr,
        resolved: Vec::new(),
        fit: None,
        slope_at_lower: None,
        verdict: SmoothingVerdict::Inconclusive,
        reason: String::new(),
    };
    let Some(h_c) = h_c_upper else {
        probe.reason = "grid does not bracket the finite-volume transition".into();
        return Ok(probe);
    };
    probe.resolved = probe
        .estimates
        .iter()
        .enumerate()
        .filter(|(_, e)| e.h > h_c && e.mean - below - 3.0 * e.stderr > noise_floor)
        .map(|(k, _)| k)
        .collect();
    if probe.resolved.len() < 4 {
        probe.reason = format!(
            "only {} points above the noise floor {:.3e} (max stderr {:.3e})",
            probe.resolved.len(),
            noise_floor,
            max_stderr
        );
        return Ok(probe);
    }
    let fit_at = |hc: f64| {
        let (x, y): (Vec<f64>, Vec<f64>) = probe
            .resolved
            .iter()
            .map(|&k| {
                let e = &probe.estimates[k];
                ((e.h - hc).ln(), e.mean.ln())
            })
            .unzip();
        linear_fit(&x, &y)
    };
    let fit = fit_at(h_c);
    let steep = fit_at(h_c_lower).slope;
    probe.fit = Some(fit);
    probe.slope_at_lower = Some(steep);
    if !fit.slope_stderr.is_finite() || fit.slope_stderr > 0.5 {
        probe.reason = format!("slope stderr {:.3} exceeds 0.5", fit.slope_stderr);
    } else if fit.slope - 2.0 * fit.slope_stderr >= threshold {
        probe.verdict = SmoothingVerdict::Conforming;
        probe.reason = format!(
            "slope {:.3} ± {:.3} at the upper h_c estimate is >= {threshold}",
            fit.slope, fit.slope_stderr
        );
    } else if steep + 2.0 * fit.slope_stderr < threshold {
        probe.verdict = SmoothingVerdict::Nonconforming;
        probe.reason = format!("slope {steep:.3} at the lower h_c estimate is below {threshold}");
    } else {
        probe.reason = format!(
            "slopes {:.3} to {steep:.3} across the h_c band straddle {threshold}",
            fit.slope
        );
    }
    Ok(probe)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum PositivityVerdict {
    Positive,
    Inconclusive,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StrongCorrelationProbe {
    pub estimate: FreeEnergyEstimate,
    /// `mean - 3 stderr - 2^-n log B`.
    pub lower_confidence: f64,
    pub verdict: PositivityVerdict,
    /// Same run at `kappa = 0.1`.
    pub comparison: FreeEnergyEstimate,
    /// Whether the comparison run's bracket and 3-sigma band reach zero.
    pub comparison_consistent_with_zero: bool,
}

/// Quenched free energy at `kappa > 1/2`, with a positivity verdict.
pub fn strong_correlation_probe(b: f64, kappa: f64, beta: f64, h: f64, mc: McConfig) -> Result<StrongCorrelationProbe> {
    if !(kappa > 0.5) {
        return Err(Error::arg(format!("strong-correlation probe needs kappa > 1/2, got {kappa}")));
    }
    let lat = LatticeSpec::new(b, mc.n)?;
    let run = |kappa: f64| -> Result<FreeEnergyEstimate> {
        let dis = DisorderSpec::new(kappa, beta, mc.seed)?;
        quenched_free_energy_mc(&lat, h, &dis, mc.samples, mc.workers)
    };
    let estimate = run(kappa)?;
    let comparison = run(0.1)?;
    let lower_confidence = estimate.lower - 3.0 * estimate.stderr;
    Ok(StrongCorrelationProbe {
        estimate,
        lower_confidence,
        verdict: if lower_confidence > 0.0 {
            PositivityVerdict::Positive
        } else {
            PositivityVerdict::Inconclusive
        },
        comparison,
        comparison_consistent_with_zero: comparison.lower - 3.0 * comparison.stderr <= 0.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn strong_probe_rejects_weak_correlation() {
        let mc = McConfig { n: 6, samples: 10, seed: 1, workers: 1 };
        assert!(strong_correlation_probe(1.3, 0.5, 1.0, -0.5, mc).is_err());
        assert!(strong_correlation_probe(1.3, 0.2, 1.0, -0.5, mc).is_err());
    }

    #[test]
    fn smoothing_grid_validation() {
        let mc = McConfig { n: 6, samples: 10, seed: 1, workers: 1 };
        assert!(smoothing_exponent_probe(1.3, 0.1, 1.0, &[0.1, 0.05, 0.2], mc, 1.8).is_err());
        assert!(smoothing_exponent_probe(1.3, 0.1, 1.0, &[0.1, 0.2], mc, 1.8).is_err());
    }

    #[test]
    fn noise_dominated_grid_is_inconclusive() {
        let mc = McConfig { n: 6, samples: 20, seed: 1, workers: 1 };
        let grid: Vec<f64> = (0..5).map(|k| -3.0 + 0.01 * k as f64).collect();
        let p = smoothing_exponent_probe(1.3, 0.1, 0.3, &grid, mc, 1.8).unwrap();
        assert_eq!(p.verdict, SmoothingVerdict::Inconclusive);
        assert!(!p.reason.is_empty());
    }
}
