//! Annealed critical behaviour on both sides of `kappa = B^2/4`.

use hierpin::annealed::{
    annealed_moments, annealed_pair_correlation, annealed_weight_vector, c_kappa, criticality_profile,
    find_annealed_critical_point, pure_pair_marginal,
};
use hierpin::stats::linear_fit;

#[test]
fn correlated_critical_point_lies_strictly_inside_sandwich() {
    let (b, kappa, beta) = (1.5, 0.2, 0.3);
    let r = find_annealed_critical_point(b, kappa, beta, 14, 1e-8).unwrap();
    let lower = -beta * beta * c_kappa(kappa).unwrap();
    let upper = -beta * beta / 2.0;
    assert!(r.h_lo > lower && r.h_hi < upper, "{r:?}");
    assert!(r.h_hi - r.h_lo <= 1e-6 || r.undecided.is_some());

    // Z^a <= 1 on the delocalized side, Zbar^a >= 1 on the localized side
    let lo = annealed_weight_vector(b, kappa, beta, r.h_lo, 14).unwrap();
    let hi = annealed_weight_vector(b, kappa, beta, r.h_hi, 14).unwrap();
    for k in 0..=14 {
        assert!(lo.log_partition_at(k) <= 1e-12);
        assert!(hi.aux_log_partition_at(k).unwrap() >= -1e-12);
    }
}

#[test]
fn weak_correlation_profile_stays_near_one() {
    for (b, kappa) in [(1.1, 0.2), (1.5, 0.3), (1.3, 0.1)] {
        let beta = 0.3;
        let r = find_annealed_critical_point(b, kappa, beta, 12, 1e-9).unwrap();
        let rows = criticality_profile(b, kappa, beta, r.h_hat, 12).unwrap();
        let worst = rows.iter().map(|r| r.log_za.exp_m1().abs()).fold(0.0, f64::max);
        assert!(worst <= 0.05, "B={b} kappa={kappa}: {worst}");
    }
}

#[test]
fn uncorrelated_profile_is_exactly_critical() {
    let beta = 0.7;
    let rows = criticality_profile(1.4, 0.0, beta, -beta * beta / 2.0, 12).unwrap();
    for r in &rows {
        assert!(r.log_za.abs() <= 1e-13, "n={} {}", r.n, r.log_za);
    }
}

#[test]
fn pair_ratio_to_pure_scales_as_beta_squared() {
    let (b, kappa, n) = (1.5, 0.2, 10);
    let betas = [0.1, 0.2, 0.4];
    let mut worst = Vec::new();
    let mut mean_scale = Vec::new();
    for &beta in &betas {
        let r = find_annealed_critical_point(b, kappa, beta, 12, 1e-10).unwrap();
        let m = (1..=n)
            .map(|p| {
                let a = annealed_pair_correlation(b, kappa, beta, r.h_hat, n, p).unwrap();
                let pure = pure_pair_marginal(b, n, 1, (1u64 << (p - 1)) + 1);
                (a / pure).ln().abs()
            })
            .fold(0.0, f64::max);
        worst.push(m);
        let s = annealed_weight_vector(b, kappa, beta, r.h_hat, n).unwrap();
        let es = annealed_moments(&s, 1).unwrap()[0];
        mean_scale.push((es / (2.0 / b).powi(n as i32)).ln().abs() / (beta * beta));
    }
    let x: Vec<f64> = betas.iter().map(|b| b.ln()).collect();
    let y: Vec<f64> = worst.iter().map(|w| w.ln()).collect();
    let fit = linear_fit(&x, &y);
    assert!((fit.slope - 2.0).abs() <= 0.4, "exponent {} from {worst:?}", fit.slope);
    // a single constant C bounds |log E^a[S_n] / (2/B)^n| <= C beta^2
    let (lo, hi) = mean_scale.iter().fold((f64::MAX, 0.0f64), |(l, h), &c| (l.min(c), h.max(c)));
    assert!(hi <= 2.0 * lo.max(1e-3), "{mean_scale:?}");
}

#[test]
fn strong_correlation_slows_contact_growth() {
    let (b, beta) = (1.1, 0.5);
    let weak = find_annealed_critical_point(b, 0.2, beta, 12, 1e-7).unwrap();
    let weak_rows = criticality_profile(b, 0.2, beta, weak.h_hat, 12).unwrap();
    let weak_rate = hierpin::annealed::contact_growth_rate(&weak_rows, 6, 12).unwrap();
    assert!((weak_rate / (2.0 / b) - 1.0).abs() <= 0.1, "{weak_rate}");

    let kappa = 0.45;
    let strong = find_annealed_critical_point(b, kappa, beta, 12, 1e-7).unwrap();
    let rows = criticality_profile(b, kappa, beta, strong.h_hat, 12).unwrap();
    let rate = hierpin::annealed::contact_growth_rate(&rows, 6, 12).unwrap();
    assert!(rate <= 1.05 / kappa.sqrt(), "{rate}");
    assert!(rate < 0.9 * 2.0 / b);
    assert!(rows.iter().all(|r| r.running_product <= r.product_bound));
}
