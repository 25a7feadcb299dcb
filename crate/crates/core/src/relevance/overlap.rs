//! Two-replica overlap `D_n = sum_{i,j} kappa^{d(i,j)} delta_i delta'_j` of
//! independent Galton–Watson populations.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{check_geometry, tree_distance, DEFAULT_N_MAX};
use crate::rng::{stream, Domain};
use crate::stats::{linear_fit, run_indexed, Estimate};

/// Generation-`n` population of the binary Galton–Watson tree, as sorted
/// 0-based leaf indices.
pub fn sample_gw_leaves<R: Rng + ?Sized>(b: f64, n: usize, rng: &mut R) -> Vec<u32> {
    let p_branch = 1.0 / b;
    // alive blocks at the current level, as block indices
    let mut alive = vec![0u32];
    for _ in 0..n {
        let mut next = Vec::with_capacity(alive.len() * 2);
        for &blk in &alive {
            if rng.random::<f64>() < p_branch {
                next.push(2 * blk);
                next.push(2 * blk + 1);
            }
        }
        alive = next;
        if alive.is_empty() {
            break;
        }
    }
    alive
}

/// Ordered pair counts `N_p` between the two sets by tree distance, via
/// block-count aggregation.
pub fn distance_class_counts(a: &[u32], b: &[u32], n: usize) -> Vec<u64> {
    let mut cumulative = Vec::with_capacity(n + 1);
    for p in 0..=n {
        let (mut i, mut j) = (0, 0);
        let mut m = 0u64;
        while i < a.len() && j < b.len() {
            let (ba, bb) = (a[i] >> p, b[j] >> p);
            if ba < bb {
                i += 1;
            } else if bb < ba {
                j += 1;
            } else {
                let i0 = i;
                while i < a.len() && a[i] >> p == ba {
                    i += 1;
                }
                let j0 = j;
                while j < b.len() && b[j] >> p == ba {
                    j += 1;
                }
                m += ((i - i0) * (j - j0)) as u64;
            }
        }
        cumulative.push(m);
    }
    let mut counts = Vec::with_capacity(n + 1);
    let mut prev = 0;
    for m in cumulative {
        counts.push(m - prev);
        prev = m;
    }
    counts
}

/// `D_n` from distance-class counts.
pub fn overlap(a: &[u32], b: &[u32], kappa: f64, n: usize) -> f64 {
    distance_class_counts(a, b, n)
        .iter()
        .enumerate()
        .map(|(p, &c)| kappa.powi(p as i32) * c as f64)
        .sum()
}

/// `D_n` by the direct pair loop.
pub fn overlap_naive(a: &[u32], b: &[u32], kappa: f64) -> f64 {
    let mut d = 0.0;
    for &i in a {
        for &j in b {
            d += kappa.powi(tree_distance(i as u64 + 1, j as u64 + 1) as i32);
        }
    }
    d
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OverlapStats {
    pub b: f64,
    pub kappa: f64,
    pub n: usize,
    pub u: f64,
    pub samples: usize,
    /// Estimate of `E[e^{u D_n}] - 1`.
    pub estimate: f64,
    pub stderr: f64,
    pub mean_overlap: f64,
}

/// Monte Carlo estimate of `E[exp(u D_n)] - 1` over `samples` replica pairs.
pub fn two_replica_overlap_mc(
    b: f64,
    kappa: f64,
    n: usize,
    u: f64,
    samples: usize,
    seed: u64,
    workers: usize,
) -> Result<OverlapStats> {
    check_geometry(b)?;
    if !(u >= 0.0 && u.is_finite()) {
        return Err(Error::arg(format!("u must be finite and >= 0, got {u}")));
    }
    if !(0.0..1.0).contains(&kappa) {
        return Err(Error::arg(format!("kappa must lie in [0, 1), got {kappa}")));
    }
    if n > DEFAULT_N_MAX {
        return Err(Error::SizeLimit { what: "overlap depth", value: n, max: DEFAULT_N_MAX });
    }
    if samples < 2 {
        return Err(Error::arg(format!("need at least 2 samples, got {samples}")));
    }
    let pairs = run_indexed(samples, workers, |i| {
        let mut rng = stream(seed, Domain::Replica, i);
        let r1 = sample_gw_leaves(b, n, &mut rng);
        let r2 = sample_gw_leaves(b, n, &mut rng);
        let d = overlap(&r1, &r2, kappa, n);
        ((u * d).exp_m1(), d)
    });
    let (vals, ds): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
    let est = Estimate::from_values(&vals);
    Ok(OverlapStats {
        b,
        kappa,
        n,
        u,
        samples,
        estimate: est.mean,
        stderr: est.stderr,
        mean_overlap: Estimate::from_values(&ds).mean,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverlapSeries {
    pub stats: Vec<OverlapStats>,
    /// Geometric ratio per unit of `n`, from a log-linear fit.
    pub fitted_ratio: f64,
    pub ratio_stderr: f64,
}

/// Overlap estimates for each depth in `depths`, and their fitted
/// geometric ratio. Each depth uses its own stream family.
pub fn overlap_series(
    b: f64,
    kappa: f64,
    u: f64,
    depths: &[usize],
    samples: usize,
    seed: u64,
    workers: usize,
) -> Result<OverlapSeries> {
    let stats: Vec<OverlapStats> = depths
        .iter()
        .map(|&n| two_replica_overlap_mc(b, kappa, n, u, samples, seed.wrapping_add(n as u64 * 0x1000_0001), workers))
        .collect::<Result<_>>()?;
    let pts: Vec<(f64, f64)> = stats
        .iter()
        .filter(|s| s.estimate > 0.0)
        .map(|s| (s.n as f64, s.estimate.ln()))
        .collect();
    if pts.len() < 2 {
        return Err(Error::arg("overlap series has fewer than two positive points"));
    }
    let (x, y): (Vec<f64>, Vec<f64>) = pts.into_iter().unzip();
    let fit = linear_fit(&x, &y);
    Ok(OverlapSeries {
        stats,
        fitted_ratio: fit.slope.exp(),
        ratio_stderr: fit.slope.exp() * fit.slope_stderr,
    })
}

/// Depth `n_1 = log(1/u) / log(2/B)` at which `E_n[exp(u S_n)]` stops being close to 1.
pub fn n1_scale(b: f64, u: f64) -> f64 {
    (1.0 / u).ln() / (2.0 / b).ln()
}
