//! Log-domain primitives shared by the pure, quenched and annealed recursions.

use rayon::prelude::*;

/// Output length above which [`convolve_log`] splits work across threads.
const PAR_THRESHOLD: usize = 512;

/// `log(exp(a) + exp(b))` without overflow. Handles `-inf` operands.
#[inline]
pub fn log_add(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    if hi == f64::NEG_INFINITY {
        return hi;
    }
    hi + (lo - hi).exp().ln_1p()
}

/// Max-shifted log-sum-exp. Returns `-inf` for an empty or all `-inf` input.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    if m == f64::INFINITY {
        return m;
    }
    let s: f64 = xs.iter().map(|&x| (x - m).exp()).sum();
    m + s.ln()
}

/// One step of the hierarchical recursion `Z = (Z1 Z2 + B - 1) / B` in log form.
///
/// `x = log Z1 + log Z2`. Near `Z = 1` the result is computed as
/// `log1p(expm1(x) / B)` so that `Z - 1` keeps full relative precision.
#[inline]
pub fn recursion_step(x: f64, b: f64) -> f64 {
    if x < 30.0 {
        (x.exp_m1() / b).ln_1p()
    } else {
        x - b.ln() + ((b - 1.0) * (-x).exp()).ln_1p()
    }
}

/// True when every odd index of `v` carries zero weight.
fn even_supported(v: &[f64]) -> bool {
    v.iter().skip(1).step_by(2).all(|&x| x == f64::NEG_INFINITY)
}

/// Log-domain convolution with a bilinear cross coupling:
///
/// `out[s] = logsumexp_{s1 + s2 = s} ( a[s1] + b[s2] + cross * s1 * s2 )`.
///
/// Each output entry is shift-normalized by its own maximum term, so no
/// entry underflows relative to the others. When both inputs live on even
/// indices only, odd outputs are skipped.
pub fn convolve_log(a: &[f64], b: &[f64], cross: f64) -> Vec<f64> {
    assert!(!a.is_empty() && !b.is_empty());
    let len = a.len() + b.len() - 1;
    let stride = if a.len() > 1 && b.len() > 1 && even_supported(a) && even_supported(b) {
        2
    } else {
        1
    };
    let entry = |s: usize| -> f64 {
        if !s.is_multiple_of(stride) {
            return f64::NEG_INFINITY;
        }
        let lo = s.saturating_sub(b.len() - 1);
        let hi = s.min(a.len() - 1);
        // align the first index with the stride
        let start = lo + (stride - lo % stride) % stride;
        let term = |s1: usize| -> f64 {
            let x = a[s1];
            let y = b[s - s1];
            if x == f64::NEG_INFINITY || y == f64::NEG_INFINITY {
                f64::NEG_INFINITY
            } else if cross == 0.0 {
                x + y
            } else {
                x + y + cross * (s1 as f64) * ((s - s1) as f64)
            }
        };
        let mut m = f64::NEG_INFINITY;
        let mut s1 = start;
        while s1 <= hi {
            m = m.max(term(s1));
            s1 += stride;
        }
        if m == f64::NEG_INFINITY {
            return m;
        }
        let mut acc = 0.0;
        let mut s1 = start;
        while s1 <= hi {
            acc += (term(s1) - m).exp();
            s1 += stride;
        }
        m + acc.ln()
    };
    if len >= PAR_THRESHOLD {
        (0..len).into_par_iter().map(entry).collect()
    } else {
        (0..len).map(entry).collect()
    }
}

/// Sum in a fixed pairwise order, independent of thread scheduling.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    match xs.len() {
        0 => 0.0,
        1 => xs[0],
        2 => xs[0] + xs[1],
        n => {
            let (l, r) = xs.split_at(n / 2);
            pairwise_sum(l) + pairwise_sum(r)
        }
    }
}
