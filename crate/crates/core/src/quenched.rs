//! Quenched partition functions for a fixed environment, and Monte Carlo
//! estimation of the quenched free energy.

use serde::{Deserialize, Serialize};

use crate::disorder::{sample_disorder, theta, DisorderSample, DisorderSpec};
use crate::error::{check_finite, check_size, Error, Result};
use crate::lattice::{k_b, LatticeSpec};
use crate::logdomain::recursion_step;
use crate::rng::{stream, Domain};
use crate::stats::{run_indexed, Estimate};
use crate::weights::LogWeightVector;

/// Default depth limit for the contact-resolved recursion (`O(4^n)` work).
pub const QUENCHED_N_MAX: usize = 14;

fn check_env(lat: &LatticeSpec, omega: &DisorderSample) -> Result<()> {
    if omega.len() as u64 != lat.leaves() {
        return Err(Error::arg(format!(
            "environment has {} sites, lattice needs {}",
            omega.len(),
            lat.leaves()
        )));
    }
    Ok(())
}

/// `log Z_n^omega` by the bottom-up recursion, `O(2^n)`.
pub fn quenched_log_partition(lat: &LatticeSpec, h: f64, dis: &DisorderSpec, omega: &DisorderSample) -> Result<f64> {
    check_env(lat, omega)?;
    check_finite("h", h)?;
    let b = lat.b();
    let mut level: Vec<f64> = omega.as_slice().iter().map(|w| dis.beta * w + h).collect();
    while level.len() > 1 {
        level = level
            .chunks_exact(2)
            .map(|pair| recursion_step(pair[0] + pair[1], b))
            .collect();
    }
    Ok(level[0])
}

/// Runs the contact-resolved recursion and hands every level's block
/// vectors (left to right) to `visit`. Returns the root vector.
pub fn visit_block_vectors<F>(
    lat: &LatticeSpec,
    h: f64,
    dis: &DisorderSpec,
    omega: &DisorderSample,
    n_max: usize,
    mut visit: F,
) -> Result<LogWeightVector>
where
    F: FnMut(usize, &[LogWeightVector]),
{
    check_env(lat, omega)?;
    check_finite("h", h)?;
    check_size("depth", lat.n(), n_max)?;
    let b = lat.b();
    let mut level: Vec<LogWeightVector> = omega
        .as_slice()
        .iter()
        .map(|w| LogWeightVector::leaf(dis.beta * w + h))
        .collect();
    visit(0, &level);
    let mut k = 0;
    while level.len() > 1 {
        level = level
            .chunks_exact(2)
            .map(|pair| LogWeightVector::join(&pair[0], &pair[1], 0.0, b))
            .collect();
        k += 1;
        visit(k, &level);
    }
    Ok(level.pop().expect("root block"))
}

/// Joint law of weight and contact number at the root block.
pub fn contact_weight_vector(lat: &LatticeSpec, h: f64, dis: &DisorderSpec, omega: &DisorderSample) -> Result<LogWeightVector> {
    visit_block_vectors(lat, h, dis, omega, QUENCHED_N_MAX, |_, _| {})
}

/// Tilt coefficient `theta beta^2 kappa^k` applied to `S_k^2` at level `k`.
pub fn aux_tilt(dis: &DisorderSpec, k: usize) -> Result<f64> {
    Ok(theta(dis.kappa)? * dis.beta * dis.beta * dis.kappa.powi(k as i32))
}

/// `log Zbar_n^omega`, the partition function tilted by `theta beta^2 kappa^n S_n^2`.
pub fn aux_log_partition(lat: &LatticeSpec, h: f64, dis: &DisorderSpec, omega: &DisorderSample) -> Result<f64> {
    let tilt = aux_tilt(dis, lat.n())?;
    Ok(contact_weight_vector(lat, h, dis, omega)?.log_total_tilted(tilt))
}

/// Monte Carlo estimate of `E[2^-n log Z_n]` with its deterministic
/// finite-size bracket for the infinite-volume free energy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FreeEnergyEstimate {
    pub b: f64,
    pub kappa: f64,
    pub beta: f64,
    pub h: f64,
    pub n: usize,
    pub samples: usize,
    pub mean: f64,
    pub stderr: f64,
    /// `mean - 2^-n log B`.
    pub lower: f64,
    /// `mean + 2^-n log K_B + theta beta^2 (2 kappa)^n`.
    pub upper: f64,
    /// False when `kappa >= 1/2`, where the tilt correction is unavailable
    /// and `upper` omits it.
    pub upper_rigorous: bool,
    pub seed: u64,
}

impl FreeEnergyEstimate {
    pub const CSV_HEADER: &'static str = "B,kappa,beta,h,n,samples,mean,stderr,lower,upper,seed";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{:e},{:e},{:e},{:e},{}",
            self.b,
            self.kappa,
            self.beta,
            self.h,
            self.n,
            self.samples,
            self.mean,
            self.stderr,
            self.lower,
            self.upper,
            self.seed
        )
    }
}

/// Bracket offsets `(below, above)` to add to a finite-volume mean.
pub fn free_energy_bracket(b: f64, kappa: f64, beta: f64, n: usize) -> (f64, f64, bool) {
    let scale = 0.5f64.powi(n as i32);
    let below = scale * b.ln();
    let mut above = scale * k_b(b).ln();
    let rigorous = match theta(kappa) {
        Ok(t) => {
            above += t * beta * beta * (2.0 * kappa).powi(n as i32);
            true
        }
        Err(_) => false,
    };
    (below, above, rigorous)
}

/// `2^-n log Z_n^omega` for replica `index` of the run.
pub fn replica_free_energy(lat: &LatticeSpec, h: f64, dis: &DisorderSpec, index: u64) -> Result<f64> {
    let mut rng = stream(dis.seed, Domain::Disorder, index);
    let omega = sample_disorder(dis, lat.n(), &mut rng)?;
    Ok(quenched_log_partition(lat, h, dis, &omega)? * 0.5f64.powi(lat.n() as i32))
}

/// Quenched free energy over `samples` i.i.d. environments.
///
/// Replica `i` always uses stream `i` of the seed, so estimates at
/// different `h` share their environments and results are identical for
/// any `workers` count.
pub fn quenched_free_energy_mc(
    lat: &LatticeSpec,
    h: f64,
    dis: &DisorderSpec,
    samples: usize,
    workers: usize,
) -> Result<FreeEnergyEstimate> {
    if samples < 2 {
        return Err(Error::arg(format!("need at least 2 samples, got {samples}")));
    }
    check_finite("h", h)?;
    let values = run_indexed(samples, workers, |i| replica_free_energy(lat, h, dis, i));
    let values: Vec<f64> = values.into_iter().collect::<Result<_>>()?;
    let est = Estimate::from_values(&values);
    let (below, above, upper_rigorous) = free_energy_bracket(lat.b(), dis.kappa, dis.beta, lat.n());
    Ok(FreeEnergyEstimate {
        b: lat.b(),
        kappa: dis.kappa,
        beta: dis.beta,
        h,
        n: lat.n(),
        samples,
        mean: est.mean,
        stderr: est.stderr,
        lower: est.mean - below,
        upper: est.mean + above,
        upper_rigorous,
        seed: dis.seed,
    })
}
