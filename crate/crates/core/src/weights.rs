use serde::{Deserialize, Serialize};

use crate::logdomain::{convolve_log, log_sum_exp};

/// `a(s) = log E[e^H ; S_n = s]` for `s = 0..=2^n`, `-inf` where the weight
/// vanishes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogWeightVector {
    pub n: usize,
    pub log_w: Vec<f64>,
}

impl LogWeightVector {
    /// A single site with log weight `value` (depth 0: `S_0 = 1` surely).
    pub fn leaf(value: f64) -> Self {
        LogWeightVector {
            n: 0,
            log_w: vec![f64::NEG_INFINITY, value],
        }
    }

    /// Joins two sibling blocks:
    /// `a(s) = logsumexp_{s1+s2=s} [l(s1) + r(s2) + cross s1 s2] - log B`,
    /// plus the extinction atom `log((B-1)/B)` at `s = 0`.
    pub fn join(left: &Self, right: &Self, cross: f64, b: f64) -> Self {
        debug_assert_eq!(left.n, right.n);
        let mut log_w = convolve_log(&left.log_w, &right.log_w, cross);
        let log_b = b.ln();
        log_w.iter_mut().for_each(|x| *x -= log_b);
        log_w[0] = crate::logdomain::log_add(log_w[0], ((b - 1.0) / b).ln());
        LogWeightVector { n: left.n + 1, log_w }
    }

    /// As [`join`](Self::join) but without the extinction atom: used when a
    /// marked leaf forces the block to survive.
    pub fn join_marked(left: &Self, right: &Self, cross: f64, b: f64) -> Self {
        let mut log_w = convolve_log(&left.log_w, &right.log_w, cross);
        let log_b = b.ln();
        log_w.iter_mut().for_each(|x| *x -= log_b);
        LogWeightVector { n: left.n + 1, log_w }
    }

    /// `log sum_s e^{a(s)}`.
    pub fn log_total(&self) -> f64 {
        log_sum_exp(&self.log_w)
    }

    /// `log sum_s e^{a(s) + tilt s^2}`.
    pub fn log_total_tilted(&self, tilt: f64) -> f64 {
        if tilt == 0.0 {
            return self.log_total();
        }
        let v: Vec<f64> = self
            .log_w
            .iter()
            .enumerate()
            .map(|(s, &a)| a + tilt * (s as f64) * (s as f64))
            .collect();
        log_sum_exp(&v)
    }

    /// `sum_s s^m e^{a(s)} / sum_s e^{a(s)}` for `m = 1..=m_max`.
    pub fn moments(&self, m_max: usize) -> Vec<f64> {
        let top = self.log_w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let w: Vec<f64> = self.log_w.iter().map(|&a| (a - top).exp()).collect();
        let z: f64 = w.iter().sum();
        (1..=m_max)
            .map(|m| {
                w.iter()
                    .enumerate()
                    .map(|(s, &x)| x * (s as f64).powi(m as i32))
                    .sum::<f64>()
                    / z
            })
            .collect()
    }

    /// True when all odd contact numbers carry zero weight.
    pub fn odd_support_empty(&self) -> bool {
        self.log_w
            .iter()
            .skip(1)
            .step_by(2)
            .all(|&x| x == f64::NEG_INFINITY)
    }
}
