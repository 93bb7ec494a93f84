//! Two-dimensional oracle for the acceptance-rate measure: a 400 x 400
//! tensor-product Gauss-Legendre quadrature of the acceptance probability
//! P(φ(U + x) ≤ c₀), built from scratch in this test (own nodes, weights,
//! density, and norms) so it shares no code with the implementation.
//!
//! The rule is region-adapted: the outer nodes span the u1 extent of the
//! acceptance region and the inner nodes are mapped onto the exact u2
//! section at each outer node. Quadrating the raw indicator on a fixed box
//! instead would leave O(spacing x density) staircase error, up to 1e-2
//! when a region boundary crosses the mode.

use normtest_core::measures::{acceptance_rate, calibrate_family};
use normtest_core::mvn::{cholesky_factor, sample_mvn, CovMatrix};
use normtest_core::norms::NormSpec;
use normtest_core::rng::SeededStream;
use statrs::distribution::{ContinuousCDF, Normal};

const N_NODES: usize = 400;
const BOX: f64 = 8.0;
const M: usize = 400_000;

// Legendre P_n and its derivative by upward recurrence.
fn legendre_pd(n: usize, x: f64) -> (f64, f64) {
    let mut p_prev = 1.0f64;
    let mut p = x;
    for k in 2..=n {
        let kf = k as f64;
        let next = ((2.0 * kf - 1.0) * x * p - (kf - 1.0) * p_prev) / kf;
        p_prev = p;
        p = next;
    }
    let dp = n as f64 * (x * p - p_prev) / (x * x - 1.0);
    (p, dp)
}

fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre_pd(n, x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let (_, dp) = legendre_pd(n, x);
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

struct Quad {
    nodes: Vec<f64>,
    weights: Vec<f64>,
    inv: [[f64; 2]; 2],
    norm_const: f64,
}

impl Quad {
    fn new(sigma: &[[f64; 2]; 2]) -> Self {
        let (nodes, weights) = gauss_legendre(N_NODES);
        let det = sigma[0][0] * sigma[1][1] - sigma[0][1] * sigma[1][0];
        let inv = [
            [sigma[1][1] / det, -sigma[0][1] / det],
            [-sigma[1][0] / det, sigma[0][0] / det],
        ];
        let norm_const = 1.0 / (2.0 * std::f64::consts::PI * det.sqrt());
        Quad {
            nodes,
            weights,
            inv,
            norm_const,
        }
    }

    fn density(&self, a: f64, b: f64) -> f64 {
        let q = self.inv[0][0] * a * a + 2.0 * self.inv[0][1] * a * b + self.inv[1][1] * b * b;
        self.norm_const * (-0.5 * q).exp()
    }

    /// Tensor rule over {(u1, u2) : lo1 <= u1 <= hi1, lo2(u1) <= u2 <= hi2(u1)}.
    fn integrate(&self, lo1: f64, hi1: f64, section: impl Fn(f64) -> (f64, f64)) -> f64 {
        let (mid1, half1) = (0.5 * (lo1 + hi1), 0.5 * (hi1 - lo1));
        let mut acc = 0.0;
        for (&t1, &w1) in self.nodes.iter().zip(&self.weights) {
            let u1 = mid1 + half1 * t1;
            let (lo2, hi2) = section(u1);
            if hi2 <= lo2 {
                continue;
            }
            let (mid2, half2) = (0.5 * (lo2 + hi2), 0.5 * (hi2 - lo2));
            let mut inner = 0.0;
            for (&t2, &w2) in self.nodes.iter().zip(&self.weights) {
                inner += w2 * self.density(u1, mid2 + half2 * t2);
            }
            acc += w1 * half1 * half2 * inner;
        }
        acc
    }
}

fn quad_acceptance(quad: &Quad, x: &[f64; 2], c0: f64, linf: bool) -> f64 {
    let (lo1, hi1) = (-x[0] - c0, -x[0] + c0);
    if linf {
        quad.integrate(lo1, hi1, |_| (-x[1] - c0, -x[1] + c0))
    } else {
        quad.integrate(lo1, hi1, |u1| {
            let g = (c0 * c0 - (u1 + x[0]) * (u1 + x[0])).max(0.0).sqrt();
            (-x[1] - g, -x[1] + g)
        })
    }
}

#[test]
fn quadrature_reproduces_total_mass() {
    for sigma in [[[1.0, 0.0], [0.0, 1.0]], [[1.0, 0.8], [0.8, 1.0]]] {
        let quad = Quad::new(&sigma);
        let total = quad.integrate(-BOX, BOX, |_| (-BOX, BOX));
        assert!((total - 1.0).abs() < 1e-9, "mass = {total}");
    }
}

#[test]
fn quadrature_reproduces_closed_form_box_probability() {
    // Independent coordinates: P(max(|u1|,|u2|) <= c) = (Φ(c) - Φ(-c))^2.
    let n = Normal::new(0.0, 1.0).unwrap();
    let c = n.inverse_cdf((1.0 + 0.95f64.sqrt()) / 2.0);
    let quad = Quad::new(&[[1.0, 0.0], [0.0, 1.0]]);
    let q = quad_acceptance(&quad, &[0.0, 0.0], c, true);
    assert!((q - 0.95).abs() < 1e-9, "q = {q}");
    // Shifted rectangle against the product of statrs CDF differences.
    let x = [-2.383_584, -0.018_590];
    let q = quad_acceptance(&quad, &x, c, true);
    let f1 = n.cdf(c - x[0]) - n.cdf(-c - x[0]);
    let f2 = n.cdf(c - x[1]) - n.cdf(-c - x[1]);
    assert!((q - f1 * f2).abs() < 1e-9, "q = {q} vs {}", f1 * f2);
}

#[test]
fn acceptance_rate_matches_quadrature() {
    let specs = [NormSpec::Lp(2.0), NormSpec::LInf];
    let mut x_rng = SeededStream::new(77, 0).rng();
    let shifts: Vec<[f64; 2]> = (0..10)
        .map(|_| {
            [
                1.3 * normtest_core::normal::draw_std_normal(&mut x_rng),
                1.3 * normtest_core::normal::draw_std_normal(&mut x_rng),
            ]
        })
        .collect();
    for (seed, sigma) in [
        (101u64, [[1.0, 0.0], [0.0, 1.0]]),
        (102, [[1.0, 0.8], [0.8, 1.0]]),
    ] {
        let quad = Quad::new(&sigma);
        let cov =
            CovMatrix::new(2, vec![sigma[0][0], sigma[0][1], sigma[1][0], sigma[1][1]]).unwrap();
        let l = cholesky_factor(&cov).unwrap();
        let draws = sample_mvn(&l, M, SeededStream::new(seed, 0)).unwrap();
        let cals = calibrate_family(&specs, &draws, 0.05).unwrap();
        for cal in &cals {
            let linf = matches!(cal.spec(), NormSpec::LInf);
            for x in &shifts {
                let mc = acceptance_rate(x, cal, &draws).unwrap();
                let oracle = quad_acceptance(&quad, x, cal.c0(), linf);
                assert!(
                    (mc - oracle).abs() <= 5e-3,
                    "sigma={sigma:?} norm={:?} x={x:?}: mc={mc} oracle={oracle}",
                    cal.spec()
                );
            }
        }
    }
}
