//! Exact annealed model.
//!
//! Averaging over the Gaussian environment turns the Hamiltonian into
//! `(h + beta^2/2) S_n + beta^2 sum_p kappa^p (cross products of sibling
//! contact numbers at level p)`. Since all blocks of a level share one law,
//! a single contact-resolved vector per level suffices:
//!
//! `A_{k+1}(s) = logsumexp_{s1+s2=s} [A_k(s1) + A_k(s2) + beta^2 kappa^{k+1} s1 s2] - log B`
//!
//! plus the extinction atom at `s = 0`.
//!
//! The critical point is located with certificates derived from two
//! monotone recursions: `Z_{k+1} >= (Z_k^2 + B - 1)/B` and
//! `Zbar_{k+1} <= (Zbar_k^2 + B - 1)/B`. Once `Z_k > 1` the iterates
//! escape to infinity (localized); once `Zbar_k <= 1` they stay below one
//! (delocalized).

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::disorder::theta;
use crate::error::{check_finite, check_size, Error, Result};
use crate::lattice::{check_geometry, k_b, tree_distance};
use crate::logdomain::recursion_step;
use crate::stats::linear_fit;
use crate::weights::LogWeightVector;

/// Default depth limit of the annealed recursion.
pub const ANNEALED_N_MAX: usize = 14;

/// `log Z` must clear zero by this much before a certificate is issued.
const CERT_MARGIN: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnnealedParams {
    pub b: f64,
    pub kappa: f64,
    pub beta: f64,
    pub h: f64,
}

impl AnnealedParams {
    pub fn new(b: f64, kappa: f64, beta: f64, h: f64) -> Result<Self> {
        check_geometry(b)?;
        if !(kappa.is_finite() && (0.0..1.0).contains(&kappa)) {
            return Err(Error::arg(format!("kappa must lie in [0, 1), got {kappa}")));
        }
        if !(beta.is_finite() && beta >= 0.0) {
            return Err(Error::arg(format!("beta must be finite and >= 0, got {beta}")));
        }
        check_finite("h", h)?;
        Ok(Self { b, kappa, beta, h })
    }

    pub fn with_h(&self, h: f64) -> Self {
        Self { h, ..*self }
    }

    fn cross(&self, level: usize) -> f64 {
        self.beta * self.beta * self.kappa.powi(level as i32)
    }

    /// `theta beta^2 kappa^k`.
    pub fn aux_tilt(&self, k: usize) -> Result<f64> {
        Ok(theta(self.kappa)? * self.cross(k))
    }

    fn leaf(&self) -> LogWeightVector {
        LogWeightVector::leaf(self.h + 0.5 * self.beta * self.beta)
    }
}

/// `c_kappa = (1 + kappa/(1 - 2 kappa)) / 2`: `h + c_kappa beta^2` is the
/// largest effective pure field the annealed Hamiltonian can reach.
pub fn c_kappa(kappa: f64) -> Result<f64> {
    if !(0.0..0.5).contains(&kappa) {
        return Err(Error::Divergence(format!(
            "annealed model ill-defined for kappa = {kappa} >= 1/2"
        )));
    }
    Ok(0.5 * (1.0 + kappa / (1.0 - 2.0 * kappa)))
}

/// Iterates the annealed recursion one level at a time.
#[derive(Debug, Clone)]
pub struct AnnealedDp {
    params: AnnealedParams,
    current: LogWeightVector,
}

impl AnnealedDp {
    pub fn new(params: AnnealedParams) -> Self {
        Self { current: params.leaf(), params }
    }

    pub fn level(&self) -> usize {
        self.current.n
    }

    pub fn vector(&self) -> &LogWeightVector {
        &self.current
    }

    pub fn advance(&mut self) {
        let k = self.current.n;
        self.current = LogWeightVector::join(
            &self.current,
            &self.current,
            self.params.cross(k + 1),
            self.params.b,
        );
    }
}

/// Annealed weight vectors `A_0 .. A_n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnealedState {
    pub params: AnnealedParams,
    pub levels: Vec<LogWeightVector>,
}

impl AnnealedState {
    pub fn n(&self) -> usize {
        self.levels.len() - 1
    }

    pub fn top(&self) -> &LogWeightVector {
        self.levels.last().expect("at least level 0")
    }

    pub fn log_partition_at(&self, k: usize) -> f64 {
        self.levels[k].log_total()
    }

    pub fn aux_log_partition_at(&self, k: usize) -> Result<f64> {
        Ok(self.levels[k].log_total_tilted(self.params.aux_tilt(k)?))
    }
}

pub fn annealed_weight_vector(b: f64, kappa: f64, beta: f64, h: f64, n: usize) -> Result<AnnealedState> {
    annealed_weight_vector_with_limit(AnnealedParams::new(b, kappa, beta, h)?, n, ANNEALED_N_MAX)
}

pub fn annealed_weight_vector_with_limit(params: AnnealedParams, n: usize, n_max: usize) -> Result<AnnealedState> {
    check_size("annealed depth", n, n_max)?;
    let mut dp = AnnealedDp::new(params);
    let mut levels = Vec::with_capacity(n + 1);
    levels.push(dp.vector().clone());
    for _ in 0..n {
        dp.advance();
        levels.push(dp.vector().clone());
    }
    Ok(AnnealedState { params, levels })
}

/// `log Z^a_n`.
pub fn annealed_log_partition(state: &AnnealedState) -> f64 {
    state.log_partition_at(state.n())
}

/// `log Zbar^a_n`, with the `theta beta^2 kappa^n S_n^2` tilt.
pub fn aux_annealed_log_partition(state: &AnnealedState) -> Result<f64> {
    state.aux_log_partition_at(state.n())
}

/// `E^a[S_n^m]` for `m = 1..=m_max` under the annealed polymer measure.
pub fn annealed_moments(state: &AnnealedState, m_max: usize) -> Result<Vec<f64>> {
    if m_max < 1 {
        return Err(Error::arg("m_max must be at least 1"));
    }
    Ok(state.top().moments(m_max))
}

/// `E_n[delta_i delta_j e^{H^a}]` for a pair at tree distance `p`.
///
/// A marked leaf forces every block on its path to survive, so marked
/// vectors are joined without the extinction atom. Two marked vectors meet
/// at level `p`; above that the marked block is joined with ordinary ones.
pub fn annealed_pair_correlation(b: f64, kappa: f64, beta: f64, h: f64, n: usize, p: usize) -> Result<f64> {
    let params = AnnealedParams::new(b, kappa, beta, h)?;
    check_size("annealed depth", n, ANNEALED_N_MAX)?;
    if p < 1 || p > n {
        return Err(Error::arg(format!("pair distance must lie in 1..={n}, got {p}")));
    }
    let state = annealed_weight_vector_with_limit(params, n, ANNEALED_N_MAX)?;
    let mut marked = params.leaf();
    for k in 0..p - 1 {
        marked = LogWeightVector::join_marked(&marked, &state.levels[k], params.cross(k + 1), b);
    }
    let mut both = LogWeightVector::join_marked(&marked, &marked, params.cross(p), b);
    for k in p..n {
        both = LogWeightVector::join_marked(&both, &state.levels[k], params.cross(k + 1), b);
    }
    Ok(both.log_total().exp())
}

/// Pair correlation of the pure model, `E_n[delta_i delta_j] = B^{-n-d+1}`.
pub fn pure_pair_marginal(b: f64, n: usize, i: u64, j: u64) -> f64 {
    let d = tree_distance(i, j) as i32;
    b.powi(-(n as i32) - d + 1)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Phase {
    Localized,
    Delocalized,
    Undecided,
}

/// Outcome of running the certificates at one `h`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub h: f64,
    pub phase: Phase,
    /// Level at which the deciding certificate fired.
    pub level: Option<usize>,
    pub levels_run: usize,
    /// `max_k log Z^a_k` over the levels run.
    pub max_log_z: f64,
    /// `min_k log Zbar^a_k` over the levels run.
    pub min_log_zbar: f64,
    /// Rigorous lower bound on the annealed free energy when localized.
    pub free_energy_lower: Option<f64>,
}

/// Continues the scalar map from `log z > 0` at level `k` until `z > B` and
/// returns `2^-m log(z_m / B)`, a lower bound on the free energy.
fn free_energy_lower_bound(mut log_z: f64, k: usize, b: f64) -> f64 {
    let log_b = b.ln();
    let mut m = k;
    while log_z <= log_b && m < 4000 {
        log_z = recursion_step(2.0 * log_z, b);
        m += 1;
    }
    0.5f64.powi(m as i32) * (log_z - log_b)
}

/// Runs the annealed recursion at `params.h` up to depth `n`, stopping at
/// the first certificate.
pub fn classify(params: &AnnealedParams, n: usize) -> Result<Certificate> {
    let mut dp = AnnealedDp::new(*params);
    let mut max_log_z = f64::NEG_INFINITY;
    let mut min_log_zbar = f64::INFINITY;
    loop {
        let k = dp.level();
        let log_z = dp.vector().log_total();
        let log_zbar = dp.vector().log_total_tilted(params.aux_tilt(k)?);
        max_log_z = max_log_z.max(log_z);
        min_log_zbar = min_log_zbar.min(log_zbar);
        let decided = if log_z > CERT_MARGIN {
            Some((Phase::Localized, Some(free_energy_lower_bound(log_z, k, params.b))))
        } else if log_zbar < -CERT_MARGIN {
            Some((Phase::Delocalized, None))
        } else {
            None
        };
        if let Some((phase, free_energy_lower)) = decided {
            return Ok(Certificate {
                h: params.h,
                phase,
                level: Some(k),
                levels_run: k,
                max_log_z,
                min_log_zbar,
                free_energy_lower,
            });
        }
        if k == n {
            return Ok(Certificate {
                h: params.h,
                phase: Phase::Undecided,
                level: None,
                levels_run: k,
                max_log_z,
                min_log_zbar,
                free_energy_lower: None,
            });
        }
        dp.advance();
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CriticalPointResult {
    pub b: f64,
    pub kappa: f64,
    pub beta: f64,
    pub n_used: usize,
    pub tol: f64,
    /// Largest `h` certified delocalized: `h_lo <= h_c^a`.
    pub h_lo: f64,
    /// Smallest `h` certified localized: `h_c^a < h_hi`.
    pub h_hi: f64,
    pub h_hat: f64,
    /// Range of evaluated `h` left undecided, if any.
    pub undecided: Option<(f64, f64)>,
    pub undecided_width: f64,
    /// `max_k Z^a_k` at `h_hi`.
    pub localization_certificate: f64,
    pub localization_level: Option<usize>,
    pub free_energy_lower_at_hi: Option<f64>,
    /// `min_k Zbar^a_k` at `h_lo`.
    pub delocalization_certificate: f64,
    /// `min_k K_B Zbar^a_k` at `h_lo` (diagnostic only: always above 1).
    pub delocalization_kb_value: f64,
    pub delocalization_level: Option<usize>,
    pub evaluations: usize,
}

struct Search {
    params: AnnealedParams,
    n: usize,
    lo: Option<Certificate>,
    hi: Option<Certificate>,
    undecided: Option<(f64, f64)>,
    evaluations: usize,
}

impl Search {
    fn eval_many(&mut self, hs: &[f64]) -> Result<Vec<Certificate>> {
        self.evaluations += hs.len();
        let certs: Vec<Result<Certificate>> = hs
            .par_iter()
            .map(|&h| classify(&self.params.with_h(h), self.n))
            .collect();
        let certs: Vec<Certificate> = certs.into_iter().collect::<Result<_>>()?;
        for c in &certs {
            self.absorb(c);
        }
        Ok(certs)
    }

    fn absorb(&mut self, c: &Certificate) {
        match c.phase {
            Phase::Delocalized => {
                if self.lo.is_none_or(|lo| c.h > lo.h) {
                    self.lo = Some(*c);
                }
            }
            Phase::Localized => {
                if self.hi.is_none_or(|hi| c.h < hi.h) {
                    self.hi = Some(*c);
                }
            }
            Phase::Undecided => {
                self.undecided = Some(match self.undecided {
                    None => (c.h, c.h),
                    Some((a, b)) => (a.min(c.h), b.max(c.h)),
                });
            }
        }
    }
}

/// Brackets the annealed critical point `h_c^a(beta)` with certificates.
///
/// The search starts from `[-c_kappa beta^2 (1.01), -beta^2/2]`, expands the
/// ends until they are certified, then refines by evaluating three interior
/// points per round in parallel. If some `h` stay undecided at depth `n`,
/// both edges of the undecided window are refined separately to `tol / 2`
/// and the window is reported as is.
pub fn find_annealed_critical_point(b: f64, kappa: f64, beta: f64, n: usize, tol: f64) -> Result<CriticalPointResult> {
    let ck = c_kappa(kappa)?;
    let params = AnnealedParams::new(b, kappa, beta, 0.0)?;
    check_size("annealed depth", n, ANNEALED_N_MAX)?;
    if !(tol > 0.0) {
        return Err(Error::arg(format!("tol must be positive, got {tol}")));
    }
    let seed_lo = -beta * beta * ck * 1.01;
    let seed_hi = -beta * beta / 2.0;
    let mut search = Search {
        params,
        n,
        lo: None,
        hi: None,
        undecided: None,
        evaluations: 0,
    };
    search.eval_many(&[seed_lo, seed_hi])?;

    let mut step = (0.01 * beta * beta * ck).max(1e-3).max(tol);
    let mut probe_lo = seed_lo;
    let mut probe_hi = seed_hi;
    for _ in 0..64 {
        if search.lo.is_some() && search.hi.is_some() {
            break;
        }
        let mut hs = Vec::new();
        if search.lo.is_none() {
            probe_lo -= step;
            hs.push(probe_lo);
        }
        if search.hi.is_none() {
            probe_hi += step;
            hs.push(probe_hi);
        }
        search.eval_many(&hs)?;
        step *= 2.0;
    }
    if search.lo.is_none() || search.hi.is_none() {
        return Err(Error::Unresolved(format!(
            "could not certify both sides of the annealed critical point (B={b}, kappa={kappa}, beta={beta}, n={n})"
        )));
    }

    for _ in 0..400 {
        let lo = search.lo.expect("certified").h;
        let hi = search.hi.expect("certified").h;
        if lo >= hi {
            return Err(Error::Unresolved(format!(
                "inconsistent certificates: delocalized at {lo} >= localized at {hi}"
            )));
        }
        // with an undecided window each edge gets half the tolerance
        let (gaps, gap_tol) = match search.undecided {
            None => (vec![(lo, hi)], tol),
            Some((ulo, uhi)) => (vec![(lo, ulo), (uhi, hi)], 0.5 * tol),
        };
        let hs: Vec<f64> = gaps
            .iter()
            .filter(|(a, c)| c - a > gap_tol)
            .flat_map(|&(a, c)| (1..=3).map(move |j| a + (c - a) * j as f64 / 4.0))
            .filter(|&h| h > lo && h < hi)
            .collect();
        if hs.is_empty() {
            break;
        }
        search.eval_many(&hs)?;
    }

    let lo = search.lo.expect("certified");
    let hi = search.hi.expect("certified");
    let undecided = search
        .undecided
        .filter(|&(a, c)| a > lo.h && c < hi.h);
    Ok(CriticalPointResult {
        b,
        kappa,
        beta,
        n_used: n,
        tol,
        h_lo: lo.h,
        h_hi: hi.h,
        h_hat: 0.5 * (lo.h + hi.h),
        undecided,
        undecided_width: undecided.map_or(0.0, |(a, c)| c - a),
        localization_certificate: hi.max_log_z.exp(),
        localization_level: hi.level,
        free_energy_lower_at_hi: hi.free_energy_lower,
        delocalization_certificate: lo.min_log_zbar.exp(),
        delocalization_kb_value: k_b(b) * lo.min_log_zbar.exp(),
        delocalization_level: lo.level,
        evaluations: search.evaluations,
    })
}

/// One level of the criticality profile.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfileRow {
    pub n: usize,
    pub h: f64,
    pub log_za: f64,
    pub log_zabar: f64,
    /// `E^a[S_n]`.
    pub mean_contacts: f64,
    /// `prod_{p<n} Z^a_p`.
    pub running_product: f64,
    /// `(1/(beta sqrt kappa)) (B/(2 sqrt kappa))^n`, infinite when undefined.
    pub product_bound: f64,
}

impl ProfileRow {
    pub const CSV_HEADER: &'static str = "B,kappa,beta,n,h,logZa,logZabar,ES1,prodZa,prodBound";

    pub fn csv_row(&self, p: &AnnealedParams) -> String {
        format!(
            "{},{},{},{},{},{:e},{:e},{:e},{:e},{:e}",
            p.b, p.kappa, p.beta, self.n, self.h, self.log_za, self.log_zabar, self.mean_contacts, self.running_product, self.product_bound
        )
    }
}

/// `Z^a_n`, `Zbar^a_n`, `E^a[S_n]` and the running product of `Z^a_p` at a
/// fixed field, for `n = 0..=n_max`.
pub fn criticality_profile(b: f64, kappa: f64, beta: f64, h: f64, n_max: usize) -> Result<Vec<ProfileRow>> {
    let params = AnnealedParams::new(b, kappa, beta, h)?;
    theta(kappa)?;
    let state = annealed_weight_vector_with_limit(params, n_max, ANNEALED_N_MAX)?;
    let mut rows = Vec::with_capacity(n_max + 1);
    let mut log_product = 0.0f64;
    for (n, v) in state.levels.iter().enumerate() {
        let bound = if beta > 0.0 && kappa > 0.0 {
            (b / (2.0 * kappa.sqrt())).powi(n as i32) / (beta * kappa.sqrt())
        } else {
            f64::INFINITY
        };
        let log_za = v.log_total();
        rows.push(ProfileRow {
            n,
            h,
            log_za,
            log_zabar: v.log_total_tilted(params.aux_tilt(n)?),
            mean_contacts: v.moments(1)[0],
            running_product: log_product.exp(),
            product_bound: bound,
        });
        log_product += log_za;
    }
    Ok(rows)
}

/// Geometric growth rate of `E^a[S_n]` fitted over `n_from..=n_to`.
pub fn contact_growth_rate(rows: &[ProfileRow], n_from: usize, n_to: usize) -> Result<f64> {
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.n >= n_from && r.n <= n_to && r.mean_contacts > 0.0)
        .map(|r| (r.n as f64, r.mean_contacts.ln()))
        .collect();
    if pts.len() < 2 {
        return Err(Error::arg("need at least two profile levels to fit a growth rate"));
    }
    let (x, y): (Vec<f64>, Vec<f64>) = pts.into_iter().unzip();
    Ok(linear_fit(&x, &y).slope.exp())
}
