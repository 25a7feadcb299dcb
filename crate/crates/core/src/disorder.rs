//! Hierarchically correlated Gaussian disorder.
//!
//! `Cov(omega_i, omega_j) = kappa^{d(i,j)}`. Samples are built from one
//! independent standard normal per dyadic block, weighted by
//! `sqrt(kappa^p - kappa^{p+1})` at level `p`, plus a shared root variable
//! of weight `sqrt(kappa^{n+1})` standing in for all levels above `n`.
//!
//! Matrices whose entries depend only on the tree distance are diagonalized
//! by the Haar basis; their spectrum is available in closed form at any
//! depth.

use std::io::{self, Write};

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{check_size, Error, Result};
use crate::lattice::tree_distance;

/// Largest depth for dense `2^n x 2^n` materialization.
pub const DENSE_MAX_DEPTH: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DisorderSpec {
    pub kappa: f64,
    pub beta: f64,
    pub seed: u64,
}

impl DisorderSpec {
    pub fn new(kappa: f64, beta: f64, seed: u64) -> Result<Self> {
        if !(kappa.is_finite() && (0.0..1.0).contains(&kappa)) {
            return Err(Error::arg(format!("kappa must lie in [0, 1), got {kappa}")));
        }
        if !(beta.is_finite() && beta >= 0.0) {
            return Err(Error::arg(format!("beta must be finite and >= 0, got {beta}")));
        }
        Ok(Self { kappa, beta, seed })
    }

    /// Tilt coefficient `theta = kappa / (2 (1 - 2 kappa))` of the auxiliary
    /// partition function; only defined for `kappa < 1/2`.
    pub fn theta(&self) -> Result<f64> {
        theta(self.kappa)
    }
}

pub fn theta(kappa: f64) -> Result<f64> {
    if kappa < 0.5 {
        Ok(kappa / (2.0 * (1.0 - 2.0 * kappa)))
    } else {
        Err(Error::Divergence(format!(
            "auxiliary tilt undefined for kappa = {kappa} >= 1/2"
        )))
    }
}

/// `K_inf = sum_p (2 kappa)^p = 1 / (1 - 2 kappa)`, the uniform bound on the
/// covariance row sums.
pub fn k_infty(kappa: f64) -> Result<f64> {
    if !(kappa.is_finite() && (0.0..1.0).contains(&kappa)) {
        return Err(Error::arg(format!("kappa must lie in [0, 1), got {kappa}")));
    }
    if kappa >= 0.5 {
        return Err(Error::Divergence(format!(
            "K_inf diverges for kappa = {kappa} >= 1/2: the annealed model is ill-defined \
             (annealed free energy is infinite)"
        )));
    }
    Ok(1.0 / (1.0 - 2.0 * kappa))
}

/// One environment `omega_1 .. omega_{2^n}` (stored 0-based).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DisorderSample(pub Vec<f64>);

impl DisorderSample {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    /// Raw little-endian `f64` array.
    pub fn write_binary<W: Write>(&self, mut w: W) -> io::Result<()> {
        for x in &self.0 {
            w.write_all(&x.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_binary(bytes: &[u8]) -> Result<Self> {
        if !bytes.len().is_multiple_of(8) {
            return Err(Error::arg("binary disorder length is not a multiple of 8"));
        }
        Ok(DisorderSample(
            bytes
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
                .collect(),
        ))
    }

    /// `index,omega` rows with a 1-based index.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "index,omega")?;
        for (i, x) in self.0.iter().enumerate() {
            writeln!(w, "{},{:e}", i + 1, x)?;
        }
        Ok(())
    }
}

/// Per-level block weights `sqrt(kappa^p - kappa^{p+1})` for `p = 0..=n`,
/// followed by the residual root weight `sqrt(kappa^{n+1})`.
pub fn block_weights(kappa: f64, n: usize) -> Vec<f64> {
    let mut w: Vec<f64> = (0..=n)
        .map(|p| (kappa.powi(p as i32) - kappa.powi(p as i32 + 1)).max(0.0).sqrt())
        .collect();
    w.push(kappa.powi(n as i32 + 1).sqrt());
    w
}

/// Draws one environment of `2^n` sites.
///
/// Variates are consumed level by level from the leaves up, blocks left to
/// right, the residual root variable last; the number of draws does not
/// depend on `kappa`, so the same stream gives coupled environments across
/// parameter values.
pub fn sample_disorder<R: Rng + ?Sized>(spec: &DisorderSpec, n: usize, rng: &mut R) -> Result<DisorderSample> {
    if !(0.0..1.0).contains(&spec.kappa) {
        return Err(Error::arg(format!("kappa must lie in [0, 1), got {}", spec.kappa)));
    }
    let size = 1usize << n;
    let weights = block_weights(spec.kappa, n);
    let mut omega = vec![0.0; size];
    for (p, &w) in weights.iter().take(n + 1).enumerate() {
        let block = 1usize << p;
        for chunk in omega.chunks_mut(block) {
            let z: f64 = rng.sample(StandardNormal);
            if w != 0.0 {
                for x in chunk.iter_mut() {
                    *x += w * z;
                }
            }
        }
    }
    let z: f64 = rng.sample(StandardNormal);
    let w = weights[n + 1];
    if w != 0.0 {
        for x in omega.iter_mut() {
            *x += w * z;
        }
    }
    Ok(DisorderSample(omega))
}

/// Symmetric `2^n x 2^n` matrix with entries `m(d(i, j))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HierMatrix {
    n: usize,
    generator: Vec<f64>,
}

impl HierMatrix {
    /// `generator[p]` is the entry for tree distance `p`, `p = 0..=n`.
    pub fn new(n: usize, generator: Vec<f64>) -> Result<Self> {
        if generator.len() != n + 1 {
            return Err(Error::arg(format!(
                "generator needs {} entries, got {}",
                n + 1,
                generator.len()
            )));
        }
        Ok(Self { n, generator })
    }

    pub fn depth(&self) -> usize {
        self.n
    }

    pub fn generator(&self) -> &[f64] {
        &self.generator
    }

    /// Entry at 1-based indices.
    pub fn entry(&self, i: u64, j: u64) -> f64 {
        self.generator[tree_distance(i, j) as usize]
    }

    pub fn dense(&self) -> Result<DMatrix<f64>> {
        check_size("dense matrix depth", self.n, DENSE_MAX_DEPTH)?;
        let size = 1usize << self.n;
        Ok(DMatrix::from_fn(size, size, |i, j| self.entry(i as u64 + 1, j as u64 + 1)))
    }

    /// `sum_j |M_ij|`, identical for every row.
    pub fn abs_row_sum(&self) -> f64 {
        self.generator[0].abs()
            + (1..=self.n)
                .map(|p| 2f64.powi(p as i32 - 1) * self.generator[p].abs())
                .sum::<f64>()
    }
}

/// Covariance `kappa^{d(i,j)}` at depth `n`.
pub fn covariance_matrix(spec: &DisorderSpec, n: usize) -> Result<HierMatrix> {
    check_size("covariance depth", n, DENSE_MAX_DEPTH)?;
    HierMatrix::new(n, (0..=n).map(|p| spec.kappa.powi(p as i32)).collect())
}

/// Distinct eigenvalues with multiplicities, `lambda_0` first, then
/// `lambda_p` of multiplicity `2^{p-1}` for `p = 1..=n`.
pub fn hier_eigenvalues(m: &HierMatrix) -> Vec<(f64, u64)> {
    let n = m.n;
    let g = &m.generator;
    let partial = |upto: usize| -> f64 {
        g[0] + (1..=upto).map(|k| 2f64.powi(k as i32 - 1) * g[k]).sum::<f64>()
    };
    let mut out = vec![(partial(n), 1u64)];
    for p in 1..=n {
        let lambda = partial(n - p) - 2f64.powi((n - p) as i32) * g[n + 1 - p];
        out.push((lambda, 1u64 << (p - 1)));
    }
    out
}

/// Eigenvalues repeated by multiplicity, in the column order of [`build_omega`].
pub fn hier_eigenvalues_expanded(m: &HierMatrix) -> Vec<f64> {
    hier_eigenvalues(m)
        .into_iter()
        .flat_map(|(l, mult)| std::iter::repeat_n(l, mult as usize))
        .collect()
}

/// Orthogonal Haar basis diagonalizing every [`HierMatrix`] of depth `n`.
///
/// Column 0 is constant; then for `p = 1..=n` come the `2^{p-1}` vectors
/// that are `+1` on the left half and `-1` on the right half of one block of
/// size `2^{n+1-p}`, normalized.
pub fn build_omega(n: usize) -> Result<DMatrix<f64>> {
    check_size("Haar basis depth", n, DENSE_MAX_DEPTH)?;
    let size = 1usize << n;
    let mut omega = DMatrix::zeros(size, size);
    let c0 = (size as f64).sqrt().recip();
    for i in 0..size {
        omega[(i, 0)] = c0;
    }
    let mut col = 1;
    for p in 1..=n {
        let q = n + 1 - p;
        let block = 1usize << q;
        let half = block / 2;
        let c = (block as f64).sqrt().recip();
        for k in 0..(1usize << (p - 1)) {
            let start = k * block;
            for i in start..start + half {
                omega[(i, col)] = c;
            }
            for i in start + half..start + block {
                omega[(i, col)] = -c;
            }
            col += 1;
        }
    }
    Ok(omega)
}

/// Samples a centered Gaussian vector with covariance `m` (which must be
/// positive semidefinite) through the Haar transform, in `O(n 2^n)`.
pub fn sample_hier_gaussian<R: Rng + ?Sized>(m: &HierMatrix, rng: &mut R) -> Result<Vec<f64>> {
    let eig = hier_eigenvalues(m);
    if eig.iter().any(|&(l, _)| l < -1e-12) {
        return Err(Error::arg("generator is not positive semidefinite"));
    }
    let n = m.n;
    let size = 1usize << n;
    let mut out = vec![0.0; size];
    let z0: f64 = rng.sample(StandardNormal);
    let c0 = eig[0].0.max(0.0).sqrt() * z0 / (size as f64).sqrt();
    out.iter_mut().for_each(|x| *x = c0);
    for (p, e) in eig.iter().enumerate().take(n + 1).skip(1) {
        let sd = e.0.max(0.0).sqrt();
        let block = 1usize << (n + 1 - p);
        let c = sd / (block as f64).sqrt();
        for chunk in out.chunks_mut(block) {
            let z: f64 = rng.sample(StandardNormal);
            let (l, r) = chunk.split_at_mut(block / 2);
            l.iter_mut().for_each(|x| *x += c * z);
            r.iter_mut().for_each(|x| *x -= c * z);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Domain};

    #[test]
    fn spec_validation() {
        assert!(DisorderSpec::new(1.0, 0.5, 0).is_err());
        assert!(DisorderSpec::new(-0.1, 0.5, 0).is_err());
        assert!(DisorderSpec::new(0.3, -0.5, 0).is_err());
        assert!(DisorderSpec::new(0.3, 0.5, 0).is_ok());
    }

    #[test]
    fn k_infty_values() {
        assert_eq!(k_infty(0.0).unwrap(), 1.0);
        assert!((k_infty(0.25).unwrap() - 2.0).abs() < 1e-15);
        assert!(matches!(k_infty(0.5), Err(Error::Divergence(_))));
        assert!(matches!(k_infty(1.2), Err(Error::Argument(_))));
    }

    #[test]
    fn weights_telescope_to_one() {
        for kappa in [0.0, 0.1, 0.3, 0.8] {
            for n in 0..8 {
                let s: f64 = block_weights(kappa, n).iter().map(|w| w * w).sum();
                assert!((s - 1.0).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn kappa_zero_gives_iid_draws() {
        let spec = DisorderSpec::new(0.0, 1.0, 5).unwrap();
        let mut rng = stream(5, Domain::Disorder, 0);
        let omega = sample_disorder(&spec, 3, &mut rng).unwrap();
        let mut rng = stream(5, Domain::Disorder, 0);
        let direct: Vec<f64> = (0..8).map(|_| rng.sample(StandardNormal)).collect();
        assert_eq!(omega.0, direct);
    }

    #[test]
    fn covariance_entries() {
        let spec = DisorderSpec::new(0.4, 0.0, 0).unwrap();
        let m = covariance_matrix(&spec, 1).unwrap().dense().unwrap();
        assert_eq!(m, DMatrix::from_row_slice(2, 2, &[1.0, 0.4, 0.4, 1.0]));
        let spec = DisorderSpec::new(0.25, 0.0, 0).unwrap();
        let m = covariance_matrix(&spec, 2).unwrap();
        assert_eq!(m.entry(1, 3), 0.0625);
        let id = covariance_matrix(&DisorderSpec::new(0.0, 0.0, 0).unwrap(), 3)
            .unwrap()
            .dense()
            .unwrap();
        assert_eq!(id, DMatrix::identity(8, 8));
        assert!(covariance_matrix(&spec, 13).is_err());
    }

    #[test]
    fn eigenvalue_examples() {
        let m = HierMatrix::new(1, vec![1.0, 0.3]).unwrap();
        let e = hier_eigenvalues(&m);
        assert!((e[0].0 - 1.3).abs() < 1e-15 && (e[1].0 - 0.7).abs() < 1e-15);
        let m = HierMatrix::new(2, vec![1.0, 0.25, 0.0625]).unwrap();
        let e = hier_eigenvalues(&m);
        assert_eq!(e, vec![(1.375, 1), (1.125, 1), (0.75, 2)]);
        let m = HierMatrix::new(4, vec![1.0, 0.0, 0.0, 0.0, 0.0]).unwrap();
        assert!(hier_eigenvalues_expanded(&m).iter().all(|&l| l == 1.0));
        let total: u64 = hier_eigenvalues(&HierMatrix::new(5, vec![0.0; 6]).unwrap())
            .iter()
            .map(|e| e.1)
            .sum();
        assert_eq!(total, 32);
    }

    #[test]
    fn omega_depth_one() {
        let o = build_omega(1).unwrap();
        let c = 0.5f64.sqrt();
        assert!((o[(0, 0)] - c).abs() < 1e-15 && (o[(1, 0)] - c).abs() < 1e-15);
        assert!((o[(0, 1)] - c).abs() < 1e-15 && (o[(1, 1)] + c).abs() < 1e-15);
    }

    #[test]
    fn omega_diagonalizes_covariance() {
        let spec = DisorderSpec::new(0.25, 0.0, 0).unwrap();
        for n in 0..=5 {
            let m = covariance_matrix(&spec, n).unwrap();
            let o = build_omega(n).unwrap();
            let id = o.transpose() * &o;
            assert!((id - DMatrix::identity(1 << n, 1 << n)).abs().max() < 1e-12);
            let d = o.transpose() * m.dense().unwrap() * &o;
            let eig = hier_eigenvalues_expanded(&m);
            for i in 0..(1 << n) {
                for j in 0..(1 << n) {
                    let want = if i == j { eig[i] } else { 0.0 };
                    assert!((d[(i, j)] - want).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn spectral_radius_bound() {
        let m = HierMatrix::new(4, vec![1.0, -0.7, 0.3, 0.9, -0.2]).unwrap();
        let radius = hier_eigenvalues(&m).iter().map(|e| e.0.abs()).fold(0.0, f64::max);
        assert!(radius <= m.abs_row_sum() + 1e-12);
    }

    #[test]
    fn binary_round_trip() {
        let s = DisorderSample(vec![1.5, -0.25, 3.0e-7]);
        let mut buf = Vec::new();
        s.write_binary(&mut buf).unwrap();
        assert_eq!(buf.len(), 24);
        assert_eq!(DisorderSample::read_binary(&buf).unwrap(), s);
        let mut csv = Vec::new();
        s.write_csv(&mut csv).unwrap();
        assert!(String::from_utf8(csv).unwrap().starts_with("index,omega\n1,"));
    }
}
