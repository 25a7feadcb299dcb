//! Monte Carlo aggregation helpers.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::logdomain::pairwise_sum;

/// Sample mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub stderr: f64,
    pub count: usize,
}

impl Estimate {
    pub fn from_values(xs: &[f64]) -> Self {
        let count = xs.len();
        if count == 0 {
            return Estimate { mean: f64::NAN, stderr: f64::NAN, count };
        }
        let mean = pairwise_sum(xs) / count as f64;
        let stderr = if count > 1 {
            let dev: Vec<f64> = xs.iter().map(|x| (x - mean) * (x - mean)).collect();
            (pairwise_sum(&dev) / (count - 1) as f64 / count as f64).sqrt()
        } else {
            f64::NAN
        };
        Estimate { mean, stderr, count }
    }

    /// True when `value` lies within `k` standard errors of the mean.
    pub fn within(&self, value: f64, k: f64) -> bool {
        (self.mean - value).abs() <= k * self.stderr
    }
}

/// Self-normalized importance average `sum w f / sum w` with weights given
/// in log form, and a delta-method standard error.
pub fn weighted_estimate(log_w: &[f64], f: &[f64]) -> Estimate {
    assert_eq!(log_w.len(), f.len());
    let count = f.len();
    let m = log_w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = log_w.iter().map(|&l| (l - m).exp()).collect();
    let sw = pairwise_sum(&w);
    let wf: Vec<f64> = w.iter().zip(f).map(|(w, f)| w * f).collect();
    let mean = pairwise_sum(&wf) / sw;
    let var: Vec<f64> = w
        .iter()
        .zip(f)
        .map(|(w, f)| (w * (f - mean)).powi(2))
        .collect();
    let stderr = pairwise_sum(&var).sqrt() / sw;
    Estimate { mean, stderr, count }
}

/// Ordinary least squares `y = intercept + slope x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_stderr: f64,
}

pub fn linear_fit(x: &[f64], y: &[f64]) -> LinearFit {
    assert_eq!(x.len(), y.len());
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let slope_stderr = if x.len() > 2 {
        let rss: f64 = x
            .iter()
            .zip(y)
            .map(|(a, b)| (b - intercept - slope * a).powi(2))
            .sum();
        (rss / (n - 2.0) / sxx).sqrt()
    } else {
        f64::NAN
    };
    LinearFit { slope, intercept, slope_stderr }
}

/// Evaluates `f(i)` for `i in 0..samples` and returns results in index order.
///
/// `workers == 0` uses the global rayon pool, `1` runs serially, anything
/// else a dedicated pool of that size. Results do not depend on the choice.
pub fn run_indexed<T, F>(samples: usize, workers: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64) -> T + Sync + Send,
{
    match workers {
        1 => (0..samples as u64).map(f).collect(),
        0 => (0..samples as u64).into_par_iter().map(f).collect(),
        w => match rayon::ThreadPoolBuilder::new().num_threads(w).build() {
            Ok(pool) => pool.install(|| (0..samples as u64).into_par_iter().map(&f).collect()),
            Err(_) => (0..samples as u64).map(f).collect(),
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mean_and_stderr() {
        let e = Estimate::from_values(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(e.mean, 2.5);
        let sd = (5.0f64 / 3.0).sqrt();
        assert!((e.stderr - sd / 2.0).abs() < 1e-15);
    }

    #[test]
    fn fit_exact_line() {
        let x = [0.0, 1.0, 2.0, 3.0];
        let y = [1.0, 3.0, 5.0, 7.0];
        let fit = linear_fit(&x, &y);
        assert!((fit.slope - 2.0).abs() < 1e-14);
        assert!((fit.intercept - 1.0).abs() < 1e-14);
    }

    #[test]
    fn weighted_uniform_is_plain_mean() {
        let e = weighted_estimate(&[0.3; 4], &[1.0, 2.0, 3.0, 6.0]);
        assert!((e.mean - 3.0).abs() < 1e-14);
    }

    #[test]
    fn indexed_runs_agree_across_workers() {
        let f = |i: u64| (i as f64).sqrt();
        assert_eq!(run_indexed(100, 1, f), run_indexed(100, 3, f));
        assert_eq!(run_indexed(100, 0, f), run_indexed(100, 1, f));
    }
}
