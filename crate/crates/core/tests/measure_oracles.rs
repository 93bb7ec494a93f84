//! Scalar oracle checks for the measures: with d = 1 and Sigma = [[1]] both
//! measures have closed forms in the normal CDF, evaluated here through
//! statrs rather than the crate's own normal code.

use normtest_core::measures::{
    acceptance_rate, critical_value, multiplicative_factor, MeasureConfig, MeasureKind,
};
use normtest_core::mvn::{cholesky_factor, sample_mvn, CovMatrix};
use normtest_core::norms::NormSpec;
use normtest_core::rng::SeededStream;
use statrs::distribution::{ContinuousCDF, Normal};

const M: usize = 200_000;

fn unit_draws(seed: u64) -> normtest_core::mvn::DrawMatrix {
    let l = cholesky_factor(&CovMatrix::identity(1)).unwrap();
    sample_mvn(&l, M, SeededStream::new(seed, 0)).unwrap()
}

// P(|N(0,1) + x| <= c)
fn ar_closed_form(n: &Normal, c: f64, x: f64) -> f64 {
    n.cdf(c - x) - n.cdf(-c - x)
}

#[test]
fn critical_value_matches_normal_quantile() {
    let n = Normal::new(0.0, 1.0).unwrap();
    let draws = unit_draws(11);
    let cal = critical_value(NormSpec::Lp(2.0), &draws, 0.05).unwrap();
    let exact = n.inverse_cdf(0.975);
    // Order-statistic sd of c0 at this m is about 4e-3.
    assert!(
        (cal.c0() - exact).abs() < 0.012,
        "c0 = {}, exact = {exact}",
        cal.c0()
    );
}

#[test]
fn acceptance_rate_matches_closed_form_on_grid() {
    let n = Normal::new(0.0, 1.0).unwrap();
    let draws = unit_draws(11);
    let cal = critical_value(NormSpec::Lp(2.0), &draws, 0.05).unwrap();
    let c_exact = n.inverse_cdf(0.975);
    for x in [0.0, 0.5, 1.0, 1.959_964, 3.0, 4.5] {
        let mc = acceptance_rate(&[x], &cal, &draws).unwrap();
        let exact = ar_closed_form(&n, c_exact, x);
        let se = (exact * (1.0 - exact) / M as f64).sqrt();
        // The 1e-4 floor covers critical-value noise where the binomial
        // standard error degenerates (exact near 0 or 1).
        let tol = 3.0 * se + 1e-4;
        assert!(
            (mc - exact).abs() <= tol,
            "x={x}: mc={mc} exact={exact} tol={tol}"
        );
    }
}

#[test]
fn multiplicative_factor_matches_closed_form_root() {
    // Oracle route: bisect P(|N(0,1) + s·x| <= c) = tau on the statrs CDF,
    // fully independent of the crate's bisection and normal code.
    let n = Normal::new(0.0, 1.0).unwrap();
    let draws = unit_draws(11);
    let cal = critical_value(NormSpec::Lp(2.0), &draws, 0.05).unwrap();
    let c_exact = n.inverse_cdf(0.975);
    let cfg = MeasureConfig {
        kind: MeasureKind::MultiplicativeFactor,
        ..MeasureConfig::default()
    };
    for x in [0.5, 1.0, 2.5] {
        let mc = multiplicative_factor(&[x], &cal, &draws, &cfg).unwrap();
        let (mut lo, mut hi) = (0.0f64, 64.0f64);
        for _ in 0..80 {
            let mid = 0.5 * (lo + hi);
            if ar_closed_form(&n, c_exact, mid * x) <= cfg.tau {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        let exact = hi;
        assert!(
            (mc / exact - 1.0).abs() <= 1e-2,
            "x={x}: mc={mc} exact={exact}"
        );
    }
}

#[test]
fn reference_factor_value_at_unit_shift() {
    // Γ_mf(1) with alpha = 0.05, tau = 0.2 is 2.801582 (root of
    // Φ(1.959964 - s) - Φ(-1.959964 - s) = 0.2).
    let draws = unit_draws(11);
    let cal = critical_value(NormSpec::Lp(2.0), &draws, 0.05).unwrap();
    let cfg = MeasureConfig {
        kind: MeasureKind::MultiplicativeFactor,
        ..MeasureConfig::default()
    };
    let s = multiplicative_factor(&[1.0], &cal, &draws, &cfg).unwrap();
    assert!((s / 2.801_582 - 1.0).abs() <= 1e-2, "s = {s}");
}
