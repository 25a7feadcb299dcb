//! Change-of-measure quantities.
//!
//! `V` is the hierarchical matrix with `V_ii = 0` and
//! `V_ij = E[delta_i delta_j] / Y_n = B^{-n-d(i,j)+1} / Y_n`, where `Y_n` makes
//! `sum_{i != j} V_ij^2 = 1`. The statistic is
//! `F(omega) = <V omega, omega> - E<V omega, omega>`.

use serde::{Deserialize, Serialize};

use crate::disorder::{hier_eigenvalues, k_infty, sample_disorder, DisorderSpec, HierMatrix};
use crate::error::{check_finite, check_size, Error, Result};
use crate::lattice::{check_geometry, LatticeSpec};
use crate::quenched::aux_log_partition;
use crate::rng::{stream, Domain};
use crate::stats::{run_indexed, weighted_estimate, Estimate};

/// Largest depth accepted by [`change_of_measure_probe`].
pub const MEASURE_N_MAX: usize = 10;

/// `Y_n = sqrt(sum_{p=1}^n 2^{n+p-1} B^{-2(n+p-1)})`.
pub fn y_n_norm(b: f64, n: usize) -> Result<f64> {
    if n == 0 {
        return Err(Error::arg("Y_n needs n >= 1"));
    }
    check_geometry(b)?;
    // terms (2/B^2)^{n+p-1}, summed from the smallest exponent
    let r = 2.0 / (b * b);
    let s: f64 = (1..=n).map(|p| r.powi((n + p - 1) as i32)).sum();
    Ok(s.sqrt())
}

/// Distance generator of `V`: entry `p` is `V_ij` at `d(i,j) = p`.
pub fn v_generator(b: f64, n: usize) -> Result<Vec<f64>> {
    let y = y_n_norm(b, n)?;
    let mut g = vec![0.0];
    g.extend((1..=n).map(|p| b.powi(-((n + p) as i32) + 1) / y));
    Ok(g)
}

/// Sums over `i != j` of `omega_i omega_j` by tree distance, `p = 1..=n`
/// (index `p - 1`), through block sums in `O(2^n)`.
pub fn pair_class_sums(omega: &[f64]) -> Vec<f64> {
    let mut sums = omega.to_vec();
    let mut prev: f64 = sums.iter().map(|x| x * x).sum();
    let mut out = Vec::new();
    while sums.len() > 1 {
        sums = sums.chunks_exact(2).map(|c| c[0] + c[1]).collect();
        let q: f64 = sums.iter().map(|x| x * x).sum();
        out.push(q - prev);
        prev = q;
    }
    out
}

/// `<V omega, omega>` for a generator with zero diagonal.
pub fn quadratic_form(v: &[f64], omega: &[f64]) -> f64 {
    pair_class_sums(omega)
        .iter()
        .enumerate()
        .map(|(k, s)| v[k + 1] * s)
        .sum()
}

/// `E<V omega, omega> = sum_{i != j} V_ij kappa^{d(i,j)}`.
pub fn quadratic_form_mean(v: &[f64], kappa: f64) -> f64 {
    let n = v.len() - 1;
    (1..=n)
        .map(|p| 2f64.powi((n + p - 1) as i32) * v[p] * kappa.powi(p as i32))
        .sum()
}

/// `Var F = 2 tr((V K)^2)`, from the shared eigenbasis.
pub fn exact_variance(b: f64, kappa: f64, n: usize) -> Result<f64> {
    let v = HierMatrix::new(n, v_generator(b, n)?)?;
    let k = HierMatrix::new(n, (0..=n).map(|p| kappa.powi(p as i32)).collect())?;
    Ok(2.0
        * hier_eigenvalues(&v)
            .iter()
            .zip(hier_eigenvalues(&k))
            .map(|(&(lv, m), (lk, _))| m as f64 * (lv * lk).powi(2))
            .sum::<f64>())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChangeOfMeasureStats {
    pub b: f64,
    pub kappa: f64,
    pub beta: f64,
    pub h: f64,
    pub n: usize,
    pub samples: usize,
    pub seed: u64,
    pub y_n: f64,
    /// Sample variance of `F` under the disorder law, with the standard
    /// error of that variance.
    pub var_f: Estimate,
    pub var_f_exact: f64,
    /// `2 K_inf^2`.
    pub var_bound: f64,
    pub var_within_bound: bool,
    /// `E[F Zbar] / E[Zbar]`.
    pub tilted_mean: Estimate,
    /// `tilted_mean / (beta^2 Y_n)`; NaN at `beta = 0`.
    pub normalized_tilted_mean: f64,
    /// Tilted `E[F]^2 / E[F^2]`.
    pub second_moment_ratio: f64,
}

/// Monte Carlo change-of-measure diagnostics at depth `n <= 10`.
#[allow(clippy::too_many_arguments)]
pub fn change_of_measure_probe(
    b: f64,
    kappa: f64,
    beta: f64,
    h: f64,
    n: usize,
    samples: usize,
    seed: u64,
    workers: usize,
) -> Result<ChangeOfMeasureStats> {
    check_size("change-of-measure depth", n, MEASURE_N_MAX)?;
    check_finite("h", h)?;
    let k_inf = k_infty(kappa)?;
    if samples < 2 {
        return Err(Error::arg(format!("need at least 2 samples, got {samples}")));
    }
    let lat = LatticeSpec::new(b, n)?;
    let dis = DisorderSpec::new(kappa, beta, seed)?;
    let y_n = y_n_norm(b, n)?;
    let v = v_generator(b, n)?;
    let centre = quadratic_form_mean(&v, kappa);

    let rows = run_indexed(samples, workers, |i| -> Result<(f64, f64)> {
        let mut rng = stream(seed, Domain::Disorder, i);
        let omega = sample_disorder(&dis, n, &mut rng)?;
        let f = quadratic_form(&v, omega.as_slice()) - centre;
        Ok((f, aux_log_partition(&lat, h, &dis, &omega)?))
    });
    let rows: Vec<(f64, f64)> = rows.into_iter().collect::<Result<_>>()?;
    let (fs, log_w): (Vec<f64>, Vec<f64>) = rows.into_iter().unzip();

    let mean_f = fs.iter().sum::<f64>() / fs.len() as f64;
    let dev: Vec<f64> = fs.iter().map(|f| (f - mean_f).powi(2)).collect();
    let mut var_f = Estimate::from_values(&dev);
    var_f.mean *= samples as f64 / (samples - 1) as f64;
    let var_bound = 2.0 * k_inf * k_inf;

    let tilted_mean = weighted_estimate(&log_w, &fs);
    let f2: Vec<f64> = fs.iter().map(|f| f * f).collect();
    let tilted_second = weighted_estimate(&log_w, &f2);
    let normalized_tilted_mean = if beta > 0.0 {
        tilted_mean.mean / (beta * beta * y_n)
    } else {
        f64::NAN
    };

    Ok(ChangeOfMeasureStats {
        b,
        kappa,
        beta,
        h,
        n,
        samples,
        seed,
        y_n,
        var_f,
        var_f_exact: exact_variance(b, kappa, n)?,
        var_bound,
        var_within_bound: var_f.mean <= var_bound + 3.0 * var_f.stderr,
        tilted_mean,
        normalized_tilted_mean,
        second_moment_ratio: tilted_mean.mean.powi(2) / tilted_second.mean,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::tree_distance;

    #[test]
    fn y_n_critical_is_sqrt_n() {
        for n in 1..=30 {
            let y = y_n_norm(2f64.sqrt(), n).unwrap();
            assert!((y * y - n as f64).abs() <= 1e-12 * n as f64, "n={n}");
        }
        assert!(y_n_norm(1.3, 0).is_err());
    }

    #[test]
    fn y_one_term() {
        let b = 1.7;
        assert!((y_n_norm(b, 1).unwrap() - 2f64.sqrt() / b).abs() < 1e-15);
    }

    #[test]
    fn y_n_grows_like_square_of_ratio() {
        // Y_n / (2/B^2)^n tends to (2/B^2 - 1)^{-1/2}
        let b = 1.2f64;
        let r = 2.0 / (b * b);
        let lim = (r - 1.0).powf(-0.5);
        let y = y_n_norm(b, 60).unwrap();
        assert!((y / r.powi(60) - lim).abs() < 1e-6 * lim);
    }

    #[test]
    fn v_is_normalized() {
        for &(b, n) in &[(1.2, 4), (1.5, 7), (1.9, 10)] {
            let v = v_generator(b, n).unwrap();
            let s: f64 = (1..=n)
                .map(|p| 2f64.powi((n + p - 1) as i32) * v[p] * v[p])
                .sum();
            assert!((s - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn quadratic_form_matches_direct_sum() {
        let n = 4;
        let v = v_generator(1.4, n).unwrap();
        let omega: Vec<f64> = (0..16).map(|i| ((i * 7 + 3) % 11) as f64 - 5.0).collect();
        let mut direct = 0.0;
        for i in 0..16u64 {
            for j in 0..16u64 {
                if i != j {
                    direct += v[tree_distance(i + 1, j + 1) as usize] * omega[i as usize] * omega[j as usize];
                }
            }
        }
        assert!((quadratic_form(&v, &omega) - direct).abs() < 1e-12 * direct.abs().max(1.0));
    }

    #[test]
    fn exact_variance_below_bound() {
        for &kappa in &[0.0, 0.1, 0.3, 0.45] {
            let var = exact_variance(1.3, kappa, 8).unwrap();
            let k = k_infty(kappa).unwrap();
            assert!(var <= 2.0 * k * k * (1.0 + 1e-12));
        }
        // kappa = 0: Var = 2 sum V_ij^2 = 2
        assert!((exact_variance(1.5, 0.0, 6).unwrap() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn untilted_mean_vanishes_at_zero_beta() {
        let s = change_of_measure_probe(1.4, 0.2, 0.0, -0.1, 6, 4000, 3, 0).unwrap();
        assert!(s.tilted_mean.within(0.0, 3.0), "{:?}", s.tilted_mean);
        assert!(s.var_within_bound);
        assert!((s.var_f.mean - s.var_f_exact).abs() <= 4.0 * s.var_f.stderr);
    }
}
