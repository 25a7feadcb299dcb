//! Brute-force reference computations over every Galton–Watson outcome.
//! Only usable for depth n <= 3 (26 outcomes).

#![allow(dead_code)]

use hierpin::lattice::tree_distance;

/// One outcome: 1-based surviving leaves and its probability.
pub struct Outcome {
    pub leaves: Vec<u64>,
    pub prob: f64,
}

/// All generation-`n` populations, built from the two-subtree split.
pub fn outcomes(b: f64, n: usize) -> Vec<Outcome> {
    if n == 0 {
        return vec![Outcome { leaves: vec![1], prob: 1.0 }];
    }
    let sub = outcomes(b, n - 1);
    let half = 1u64 << (n - 1);
    let mut out = vec![Outcome { leaves: vec![], prob: (b - 1.0) / b }];
    for l in &sub {
        for r in &sub {
            let mut leaves = l.leaves.clone();
            leaves.extend(r.leaves.iter().map(|j| j + half));
            out.push(Outcome { leaves, prob: l.prob * r.prob / b });
        }
    }
    out
}

fn log_sum(terms: impl Iterator<Item = f64>) -> f64 {
    let v: Vec<f64> = terms.collect();
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// `sum_{i,j in I} kappa^{d(i,j)}`, diagonal included.
pub fn pair_energy(leaves: &[u64], kappa: f64) -> f64 {
    let mut e = 0.0;
    for &i in leaves {
        for &j in leaves {
            e += kappa.powi(tree_distance(i, j) as i32);
        }
    }
    e
}

/// `log sum_I P(I) exp(sum_{i in I} (beta omega_i + h) + tilt |I|^2)`.
pub fn quenched(b: f64, n: usize, beta: f64, h: f64, omega: &[f64], tilt: f64) -> f64 {
    log_sum(outcomes(b, n).iter().map(|o| {
        let s = o.leaves.len() as f64;
        let e: f64 = o.leaves.iter().map(|&i| beta * omega[i as usize - 1] + h).sum();
        o.prob.ln() + e + tilt * s * s
    }))
}

/// Annealed weights by contact number:
/// `log sum_{|I|=s} P(I) exp(h|I| + beta^2/2 sum kappa^d + tilt |I|^2)`.
pub fn annealed_vector(b: f64, n: usize, kappa: f64, beta: f64, h: f64, tilt: f64) -> Vec<f64> {
    let size = (1usize << n) + 1;
    let all = outcomes(b, n);
    (0..size)
        .map(|s| {
            log_sum(all.iter().filter(|o| o.leaves.len() == s).map(|o| {
                let sf = s as f64;
                o.prob.ln() + h * sf + 0.5 * beta * beta * pair_energy(&o.leaves, kappa) + tilt * sf * sf
            }))
        })
        .collect()
}

pub fn annealed(b: f64, n: usize, kappa: f64, beta: f64, h: f64, tilt: f64) -> f64 {
    log_sum(annealed_vector(b, n, kappa, beta, h, tilt).into_iter())
}

/// `E[delta_i delta_j e^{H^a}]` for 1-based leaves `i`, `j`.
pub fn annealed_pair(b: f64, n: usize, kappa: f64, beta: f64, h: f64, i: u64, j: u64) -> f64 {
    outcomes(b, n)
        .iter()
        .filter(|o| o.leaves.contains(&i) && o.leaves.contains(&j))
        .map(|o| {
            o.prob
                * (h * o.leaves.len() as f64 + 0.5 * beta * beta * pair_energy(&o.leaves, kappa)).exp()
        })
        .sum()
}

/// Probability that every leaf of `set` survives.
pub fn marginal(b: f64, n: usize, set: &[u64]) -> f64 {
    outcomes(b, n)
        .iter()
        .filter(|o| set.iter().all(|i| o.leaves.contains(i)))
        .map(|o| o.prob)
        .sum()
}

/// Small deterministic generator for parameter draws.
pub struct Draws(u64);

impl Draws {
    pub fn new(seed: u64) -> Self {
        Draws(seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) | 1)
    }

    pub fn unit(&mut self) -> f64 {
        self.0 ^= self.0 << 13;
        self.0 ^= self.0 >> 7;
        self.0 ^= self.0 << 17;
        (self.0 >> 11) as f64 / (1u64 << 53) as f64
    }

    pub fn range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.unit()
    }

    pub fn normal(&mut self) -> f64 {
        let u1 = self.unit().max(1e-300);
        let u2 = self.unit();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }
}

/// `|a - b| <= tol * max(1, |b|)`, treating two `-inf` as equal.
pub fn close(a: f64, b: f64, tol: f64) -> bool {
    if a == f64::NEG_INFINITY && b == f64::NEG_INFINITY {
        return true;
    }
    (a - b).abs() <= tol * b.abs().max(1.0)
}
