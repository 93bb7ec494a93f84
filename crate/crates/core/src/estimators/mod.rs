//! Asymptotically linear estimators ψ_n with influence-function
//! evaluations, and the covariance assembly Σ_n used to calibrate the test.
//!
//! Matrices are row-major `&[f64]` slices with explicit (n, d). Estimators
//! either carry an analytic influence function (correlation, two-phase
//! logistic) and build Σ_n as its empirical cross-moment, or fall back to a
//! nonparametric bootstrap when no analytic influence function is available
//! (the log-linear missingness coefficient).

use alloc::vec;
use alloc::vec::Vec;

use crate::error::Error;
use crate::exec::Executor;
use crate::mvn::CovMatrix;
use crate::rng::SeededStream;
use crate::Result;

pub mod correlation;
pub mod loglinear;
pub mod two_phase;

pub use correlation::correlation_estimator;
pub use loglinear::{
    loglinear_missing_estimator, LocalLinearLearner, LogisticLearner, RegressionLearner,
};
pub use two_phase::{two_phase_estimate, two_phase_logistic_estimator, TwoPhaseRecord};

/// How sigma_n was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SigmaSource {
    InfluenceFunction,
    Bootstrap,
}

/// An estimate ψ_n with everything the test needs: the sample size, the
/// covariance of √n·ψ_n, and (when analytic) the influence-function
/// evaluations it came from, empirically centered column by column.
#[derive(Debug, Clone)]
pub struct EstimateResult {
    pub psi_n: Vec<f64>,
    pub n: usize,
    /// Row-major n×d when present; columns centered to mean 0.
    pub if_matrix: Option<Vec<f64>>,
    pub sigma_n: CovMatrix,
    pub sigma_source: SigmaSource,
}

impl EstimateResult {
    pub fn dim(&self) -> usize {
        self.psi_n.len()
    }
}

/// Σ_jk = (1/n)·Σ_i φ_j(X_i)·φ_k(X_i) after column centering.
pub fn empirical_covariance_from_if(if_matrix: &[f64], n: usize, d: usize) -> Result<CovMatrix> {
    if n < 2 {
        return Err(Error::InsufficientData { needed: 2, got: n });
    }
    if if_matrix.len() != n * d || d == 0 {
        return Err(Error::DimensionMismatch {
            expected: n * d,
            got: if_matrix.len(),
        });
    }
    let inv_n = 1.0 / n as f64;
    let mut means = vec![0.0; d];
    for row in if_matrix.chunks_exact(d) {
        for (m, &v) in means.iter_mut().zip(row) {
            *m += v;
        }
    }
    for m in &mut means {
        *m *= inv_n;
    }
    let mut entries = vec![0.0; d * d];
    for j in 0..d {
        for k in j..d {
            let mut acc = 0.0;
            for row in if_matrix.chunks_exact(d) {
                acc += (row[j] - means[j]) * (row[k] - means[k]);
            }
            let v = acc * inv_n;
            entries[j * d + k] = v;
            entries[k * d + j] = v;
        }
    }
    CovMatrix::new(d, entries)
}

// Centers each column to exact-mean-zero-up-to-roundoff and packages an
// influence-function-based estimate.
pub(crate) fn if_estimate(
    psi_n: Vec<f64>,
    n: usize,
    mut if_matrix: Vec<f64>,
) -> Result<EstimateResult> {
    let d = psi_n.len();
    let sigma_n = empirical_covariance_from_if(&if_matrix, n, d)?;
    let inv_n = 1.0 / n as f64;
    let mut means = vec![0.0; d];
    for row in if_matrix.chunks_exact(d) {
        for (m, &v) in means.iter_mut().zip(row) {
            *m += v;
        }
    }
    for m in &mut means {
        *m *= inv_n;
    }
    for row in if_matrix.chunks_exact_mut(d) {
        for (v, &m) in row.iter_mut().zip(&means) {
            *v -= m;
        }
    }
    Ok(EstimateResult {
        psi_n,
        n,
        if_matrix: Some(if_matrix),
        sigma_n,
        sigma_source: SigmaSource::InfluenceFunction,
    })
}

/// n times the sample covariance of ψ* over nonparametric resamples.
///
/// `psi_star` receives the resample as indices into the caller's data and
/// returns the d-vector estimate. A failing resample is redrawn on a fresh
/// substream, at most 10 attempts per replicate, then the error propagates.
/// Deterministic in `seed` regardless of the executor.
pub fn bootstrap_covariance<F>(
    n: usize,
    d: usize,
    b_reps: usize,
    seed: SeededStream,
    exec: &dyn Executor,
    psi_star: F,
) -> Result<CovMatrix>
where
    F: Fn(&[usize]) -> Result<Vec<f64>> + Sync,
{
    if b_reps < 50 {
        return Err(Error::InvalidConfig {
            reason: "bootstrap replications must be >= 50",
        });
    }
    if n < 2 {
        return Err(Error::InsufficientData { needed: 2, got: n });
    }
    if d == 0 {
        return Err(Error::EmptyInput);
    }
    let draw_one = |b: usize| -> Result<Vec<f64>> {
        let mut last_err = Error::EmptyInput;
        for attempt in 0..10u64 {
            let mut rng = seed.derive(b as u64).derive(attempt).rng();
            let indices: Vec<usize> = (0..n)
                .map(|_| ((rng.next_f64_open() * n as f64) as usize).min(n - 1))
                .collect();
            match psi_star(&indices) {
                Ok(psi) => {
                    if psi.len() != d {
                        return Err(Error::DimensionMismatch {
                            expected: d,
                            got: psi.len(),
                        });
                    }
                    return Ok(psi);
                }
                Err(e) => last_err = e,
            }
        }
        Err(last_err)
    };
    let rows = exec.try_map_vec(b_reps, &draw_one)?;

    let inv_b = 1.0 / b_reps as f64;
    let mut means = vec![0.0; d];
    for row in &rows {
        for (m, v) in means.iter_mut().zip(row) {
            *m += v;
        }
    }
    for m in &mut means {
        *m *= inv_b;
    }
    let scale = n as f64 / (b_reps - 1) as f64;
    let mut entries = vec![0.0; d * d];
    for j in 0..d {
        for k in j..d {
            let mut acc = 0.0;
            for row in &rows {
                acc += (row[j] - means[j]) * (row[k] - means[k]);
            }
            let v = acc * scale;
            entries[j * d + k] = v;
            entries[k * d + j] = v;
        }
    }
    CovMatrix::new(d, entries)
}

// Population-normalized column statistics shared by the estimators.
pub(crate) fn column_mean_sd(values: impl Iterator<Item = f64> + Clone, n: usize) -> (f64, f64) {
    let mean = values.clone().sum::<f64>() / n as f64;
    let var = values.map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
    (mean, libm::sqrt(var))
}
