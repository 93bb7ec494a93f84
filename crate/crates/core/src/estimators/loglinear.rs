//! Plug-in estimator of log-linear association coefficients under
//! missingness: ψ_j = cov(W_j, log m_j(W_j)) / var(W_j), where m_j is a
//! smooth of the inner regression P(U = 1 | Δ = 1, W) onto the single
//! coordinate W_j. No influence function is available for this plug-in, so
//! Σ_n comes from the nonparametric bootstrap.

use alloc::vec;
use alloc::vec::Vec;

use super::{bootstrap_covariance, column_mean_sd, EstimateResult, SigmaSource};
use crate::error::Error;
use crate::exec::Executor;
use crate::mvn::solve_spd;
use crate::rng::SeededStream;
use crate::Result;

/// Conditional-mean learner: fit E[target | x] on the fit rows, evaluate on
/// the eval rows. Both matrices are row-major with `d` columns.
pub trait RegressionLearner: Sync {
    fn fit_and_predict(
        &self,
        x_fit: &[f64],
        d: usize,
        target: &[f64],
        x_eval: &[f64],
    ) -> Result<Vec<f64>>;
}

#[inline]
pub(super) fn expit(eta: f64) -> f64 {
    if eta >= 0.0 {
        1.0 / (1.0 + libm::exp(-eta))
    } else {
        let e = libm::exp(eta);
        e / (1.0 + e)
    }
}

#[inline]
pub(super) fn softplus(eta: f64) -> f64 {
    if eta > 0.0 {
        eta + libm::log1p(libm::exp(-eta))
    } else {
        libm::log1p(libm::exp(eta))
    }
}

/// Maximum-likelihood logistic regression with an intercept, fitted by
/// Newton iterations with step halving.
pub struct LogisticLearner {
    pub max_iter: usize,
    pub grad_tol: f64,
}

impl Default for LogisticLearner {
    fn default() -> Self {
        LogisticLearner {
            max_iter: 100,
            grad_tol: 1e-10,
        }
    }
}

impl LogisticLearner {
    fn fit(&self, x: &[f64], d: usize, target: &[f64]) -> Result<Vec<f64>> {
        let n = target.len();
        let p = d + 1;
        if n < p {
            return Err(Error::InsufficientData { needed: p, got: n });
        }
        let row = |i: usize, k: usize| if k == 0 { 1.0 } else { x[i * d + (k - 1)] };
        let mut beta = vec![0.0; p];
        let mut eta = vec![0.0; n];
        let loglik = |eta: &[f64]| -> f64 {
            eta.iter()
                .zip(target)
                .map(|(&e, &t)| t * e - softplus(e))
                .sum()
        };
        let mut ll = loglik(&eta);
        for _ in 0..self.max_iter {
            let mut grad = vec![0.0; p];
            let mut hess = vec![0.0; p * p];
            for i in 0..n {
                let mu = expit(eta[i]);
                let r = target[i] - mu;
                let s = mu * (1.0 - mu);
                for k in 0..p {
                    let xk = row(i, k);
                    grad[k] += xk * r;
                    for l in k..p {
                        hess[k * p + l] += s * xk * row(i, l);
                    }
                }
            }
            for k in 0..p {
                for l in 0..k {
                    hess[k * p + l] = hess[l * p + k];
                }
            }
            if grad.iter().all(|g| g.abs() <= self.grad_tol) {
                return Ok(beta);
            }
            let step = match solve_spd(p, &hess, &grad) {
                Some(s) => s,
                None => return Err(Error::Separation),
            };
            // Step halving keeps the likelihood non-decreasing.
            let mut scale = 1.0;
            let mut accepted = false;
            for _ in 0..30 {
                let cand: Vec<f64> = beta
                    .iter()
                    .zip(&step)
                    .map(|(&b, &s)| b + scale * s)
                    .collect();
                let cand_eta: Vec<f64> = (0..n)
                    .map(|i| (0..p).map(|k| cand[k] * row(i, k)).sum())
                    .collect();
                let cand_ll = loglik(&cand_eta);
                if cand_ll >= ll - 1e-12 {
                    beta = cand;
                    eta = cand_eta;
                    ll = cand_ll;
                    accepted = true;
                    break;
                }
                scale *= 0.5;
            }
            if !accepted {
                return Err(Error::Separation);
            }
            let norm: f64 = libm::sqrt(beta.iter().map(|b| b * b).sum());
            if norm > 50.0 {
                return Err(Error::Separation);
            }
        }
        Err(Error::Separation)
    }
}

impl RegressionLearner for LogisticLearner {
    fn fit_and_predict(
        &self,
        x_fit: &[f64],
        d: usize,
        target: &[f64],
        x_eval: &[f64],
    ) -> Result<Vec<f64>> {
        for &t in target {
            if t != 0.0 && t != 1.0 {
                return Err(Error::DomainError {
                    value: t,
                    domain: "{0, 1}",
                });
            }
        }
        let beta = self.fit(x_fit, d, target)?;
        Ok(x_eval
            .chunks_exact(d)
            .map(|r| {
                let eta = beta[0] + r.iter().zip(&beta[1..]).map(|(&x, &b)| x * b).sum::<f64>();
                expit(eta)
            })
            .collect())
    }
}

/// Local-linear smoother with a Gaussian kernel and the normal-reference
/// bandwidth 1.06·sd·n^(−1/5). Univariate only.
pub struct LocalLinearLearner;

impl RegressionLearner for LocalLinearLearner {
    fn fit_and_predict(
        &self,
        x_fit: &[f64],
        d: usize,
        target: &[f64],
        x_eval: &[f64],
    ) -> Result<Vec<f64>> {
        if d != 1 {
            return Err(Error::InvalidConfig {
                reason: "local-linear smoother is univariate",
            });
        }
        let n = target.len();
        if x_fit.len() != n || n < 2 {
            return Err(Error::InsufficientData {
                needed: 2,
                got: n.min(x_fit.len()),
            });
        }
        let (_, sd) = column_mean_sd(x_fit.iter().copied(), n);
        if sd == 0.0 {
            return Err(Error::DegenerateCovariate { column: 0 });
        }
        let h = 1.06 * sd * libm::pow(n as f64, -0.2);
        let mut out = Vec::with_capacity(x_eval.len());
        for &t in x_eval {
            let (mut s0, mut s1, mut s2, mut ty0, mut ty1) = (0.0, 0.0, 0.0, 0.0, 0.0);
            for (&x, &y) in x_fit.iter().zip(target) {
                let u = (x - t) / h;
                let k = libm::exp(-0.5 * u * u);
                let dx = x - t;
                s0 += k;
                s1 += k * dx;
                s2 += k * dx * dx;
                ty0 += k * y;
                ty1 += k * dx * y;
            }
            // Local-linear intercept; falls back to local-constant when the
            // design is numerically singular (isolated evaluation point).
            let det = s0 * s2 - s1 * s1;
            let pred = if det.abs() > 1e-12 * (s0 * s2).abs().max(f64::MIN_POSITIVE) {
                (s2 * ty0 - s1 * ty1) / det
            } else {
                ty0 / s0
            };
            out.push(pred);
        }
        Ok(out)
    }
}

// One full pipeline evaluation on the rows named by `idx`.
fn psi_on_subset(
    w: &[f64],
    d: usize,
    u: &[f64],
    delta: &[f64],
    learner: &dyn RegressionLearner,
    idx: &[usize],
) -> Result<Vec<f64>> {
    let n = idx.len();
    let complete: Vec<usize> = idx.iter().copied().filter(|&i| delta[i] == 1.0).collect();
    if complete.len() < d + 2 {
        return Err(Error::InsufficientData {
            needed: d + 2,
            got: complete.len(),
        });
    }
    let mut w_fit = Vec::with_capacity(complete.len() * d);
    let mut u_fit = Vec::with_capacity(complete.len());
    for &i in &complete {
        w_fit.extend_from_slice(&w[i * d..(i + 1) * d]);
        u_fit.push(u[i]);
    }
    let mut w_all = Vec::with_capacity(n * d);
    for &i in idx {
        w_all.extend_from_slice(&w[i * d..(i + 1) * d]);
    }
    let mu_hat = learner.fit_and_predict(&w_fit, d, &u_fit, &w_all)?;

    let smoother = LocalLinearLearner;
    let mut psi = Vec::with_capacity(d);
    for j in 0..d {
        let col: Vec<f64> = (0..n).map(|i| w_all[i * d + j]).collect();
        let m_hat = smoother.fit_and_predict(&col, 1, &mu_hat, &col)?;
        let mut log_m = Vec::with_capacity(n);
        for (i, &m) in m_hat.iter().enumerate() {
            if !m.is_finite() {
                return Err(Error::NonPositiveSmoother { point: i });
            }
            log_m.push(libm::log(m.clamp(1e-6, 1.0)));
        }
        let (w_mean, w_sd) = column_mean_sd(col.iter().copied(), n);
        if w_sd == 0.0 {
            return Err(Error::DegenerateCovariate { column: j });
        }
        let lg_mean = log_m.iter().sum::<f64>() / n as f64;
        let cov = col
            .iter()
            .zip(&log_m)
            .map(|(&x, &l)| (x - w_mean) * (l - lg_mean))
            .sum::<f64>()
            / n as f64;
        psi.push(cov / (w_sd * w_sd));
    }
    Ok(psi)
}

/// Log-linear association coefficients under missingness (Δ = 0 hides U),
/// with bootstrap covariance.
///
/// The inner regression is fitted on Δ = 1 rows only; the outer smoother
/// and the final covariance/variance ratio use all rows. Smoothed values
/// are clipped to [1e-6, 1] before the log.
pub fn loglinear_missing_estimator(
    w: &[f64],
    n: usize,
    d: usize,
    u: &[f64],
    delta: &[f64],
    learner: &dyn RegressionLearner,
    b_reps: usize,
    seed: SeededStream,
    exec: &dyn Executor,
) -> Result<EstimateResult> {
    if d == 0 {
        return Err(Error::EmptyInput);
    }
    if w.len() != n * d {
        return Err(Error::DimensionMismatch {
            expected: n * d,
            got: w.len(),
        });
    }
    if u.len() != n || delta.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: u.len().min(delta.len()),
        });
    }
    for &v in delta.iter().chain(u) {
        if v != 0.0 && v != 1.0 {
            return Err(Error::DomainError {
                value: v,
                domain: "{0, 1}",
            });
        }
    }
    if !delta.iter().any(|&v| v == 1.0) {
        return Err(Error::InsufficientData { needed: 1, got: 0 });
    }

    let all: Vec<usize> = (0..n).collect();
    let psi_n = psi_on_subset(w, d, u, delta, learner, &all)?;
    let sigma_n = bootstrap_covariance(n, d, b_reps, seed, exec, |idx| {
        psi_on_subset(w, d, u, delta, learner, idx)
    })?;
    Ok(EstimateResult {
        psi_n,
        n,
        if_matrix: None,
        sigma_n,
        sigma_source: SigmaSource::Bootstrap,
    })
}

#[cfg(test)]
mod tests {
    extern crate std;
    use super::*;
    use crate::exec::SequentialExec;
    use crate::normal::draw_std_normal;

    #[test]
    fn logistic_learner_recovers_known_coefficients() {
        let n = 4000;
        let mut rng = SeededStream::new(41, 0).rng();
        let x: Vec<f64> = (0..n).map(|_| draw_std_normal(&mut rng)).collect();
        let t: Vec<f64> = x
            .iter()
            .map(|&v| {
                let p = expit(-0.5 + 1.2 * v);
                if rng.next_f64_open() < p {
                    1.0
                } else {
                    0.0
                }
            })
            .collect();
        let beta = LogisticLearner::default().fit(&x, 1, &t).unwrap();
        assert!((beta[0] + 0.5).abs() < 0.15, "intercept {}", beta[0]);
        assert!((beta[1] - 1.2).abs() < 0.15, "slope {}", beta[1]);
    }

    #[test]
    fn logistic_learner_detects_separation() {
        // Narrow margin: the slope must pass the norm limit before the
        // residuals underflow the gradient tolerance.
        let x = [-0.2, -0.1, 0.1, 0.2, -0.15, 0.15];
        let t = [0.0, 0.0, 1.0, 1.0, 0.0, 1.0];
        assert!(matches!(
            LogisticLearner::default().fit(&x, 1, &t),
            Err(Error::Separation)
        ));
    }

    #[test]
    fn local_linear_recovers_linear_function_exactly() {
        let x: Vec<f64> = (0..60).map(|i| i as f64 / 10.0).collect();
        let y: Vec<f64> = x.iter().map(|&v| 2.0 - 0.7 * v).collect();
        let out = LocalLinearLearner.fit_and_predict(&x, 1, &y, &x).unwrap();
        for (p, t) in out.iter().zip(&y) {
            assert!((p - t).abs() < 1e-9, "{p} vs {t}");
        }
    }

    #[test]
    fn local_linear_smooths_toward_conditional_mean() {
        let n = 2000;
        let mut rng = SeededStream::new(42, 0).rng();
        let x: Vec<f64> = (0..n).map(|_| draw_std_normal(&mut rng)).collect();
        let y: Vec<f64> = x
            .iter()
            .map(|&v| libm::sin(v) + 0.1 * draw_std_normal(&mut rng))
            .collect();
        let eval = [0.0, 0.5, -1.0];
        let out = LocalLinearLearner
            .fit_and_predict(&x, 1, &y, &eval)
            .unwrap();
        for (&t, &p) in eval.iter().zip(&out) {
            assert!((p - libm::sin(t)).abs() < 0.05, "at {t}: {p}");
        }
    }

    #[test]
    fn independent_u_gives_near_zero_psi() {
        let n = 400;
        let d = 3;
        let mut rng = SeededStream::new(43, 0).rng();
        let w: Vec<f64> = (0..n * d).map(|_| draw_std_normal(&mut rng)).collect();
        let u: Vec<f64> = (0..n)
            .map(|_| if rng.next_f64_open() < 0.4 { 1.0 } else { 0.0 })
            .collect();
        let delta: Vec<f64> = (0..n)
            .map(|_| if rng.next_f64_open() < 0.8 { 1.0 } else { 0.0 })
            .collect();
        let est = loglinear_missing_estimator(
            &w,
            n,
            d,
            &u,
            &delta,
            &LogisticLearner::default(),
            100,
            SeededStream::new(44, 0),
            &SequentialExec,
        )
        .unwrap();
        assert_eq!(est.sigma_source, SigmaSource::Bootstrap);
        for j in 0..d {
            let se = libm::sqrt(est.sigma_n.get(j, j) / n as f64);
            assert!(
                est.psi_n[j].abs() <= 3.0 * se,
                "psi[{j}] = {} vs se {se}",
                est.psi_n[j]
            );
        }
    }

    #[test]
    fn binary_covariate_identifies_loglinear_slope() {
        // With binary W, cov(W, log E[U|W]) / var(W) = b exactly when
        // P(U=1|W=w) = exp(a + b w).
        let n = 2000;
        let (a, b) = (-1.5, 0.7);
        let mut rng = SeededStream::new(45, 0).rng();
        let w: Vec<f64> = (0..n)
            .map(|_| if rng.next_f64_open() < 0.5 { 1.0 } else { 0.0 })
            .collect();
        let u: Vec<f64> = w
            .iter()
            .map(|&wv| {
                let p = libm::exp(a + b * wv);
                if rng.next_f64_open() < p {
                    1.0
                } else {
                    0.0
                }
            })
            .collect();
        let delta = vec![1.0; n];
        let est = loglinear_missing_estimator(
            &w,
            n,
            1,
            &u,
            &delta,
            &LogisticLearner::default(),
            50,
            SeededStream::new(46, 0),
            &SequentialExec,
        )
        .unwrap();
        let se = libm::sqrt(est.sigma_n.get(0, 0) / n as f64);
        assert!(
            (est.psi_n[0] - b).abs() <= 3.0 * se,
            "psi = {} vs b = {b}, se = {se}",
            est.psi_n[0]
        );
    }

    #[test]
    fn deterministic_in_seed() {
        let n = 150;
        let mut rng = SeededStream::new(47, 0).rng();
        let w: Vec<f64> = (0..n).map(|_| draw_std_normal(&mut rng)).collect();
        let u: Vec<f64> = (0..n)
            .map(|_| if rng.next_f64_open() < 0.5 { 1.0 } else { 0.0 })
            .collect();
        let delta = vec![1.0; n];
        let run = || {
            loglinear_missing_estimator(
                &w,
                n,
                1,
                &u,
                &delta,
                &LogisticLearner::default(),
                50,
                SeededStream::new(48, 0),
                &SequentialExec,
            )
            .unwrap()
        };
        let (e1, e2) = (run(), run());
        assert_eq!(e1.psi_n, e2.psi_n);
        assert_eq!(e1.sigma_n.entries(), e2.sigma_n.entries());
    }
}
