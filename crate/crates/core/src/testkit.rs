//! Adaptive test: nested Monte Carlo null calibration, the min-over-norms
//! statistic, rank p-values, and a permutation variant.
//!
//! Calibration draws one inner matrix for the measure thresholds and reuses
//! it across every outer null draw, so a full calibration costs
//! O(m_outer * m_inner * K * d). Both measures shrink under alternatives,
//! so the test rejects for small statistics at the alpha-quantile of the
//! simulated null. All parallel sections are pure index maps; the single
//! sort happens serially afterwards, which keeps reports bit-identical
//! across thread counts.

use alloc::vec;
use alloc::vec::Vec;

use crate::comparators::{bonferroni_p, cauchy_combination, wald_pvalues, CauchyForm};
use crate::error::Error;
use crate::estimators::{correlation_estimator, EstimateResult};
use crate::exec::Executor;
use crate::measures::{calibrate_family, measure_batch, MeasureConfig, NormCalibration};
use crate::mvn::{
    cholesky_factor, sample_mvn, sample_mvn_from_cache, sample_mvn_single, CovMatrix, DrawMatrix,
    NormalCache,
};
use crate::norms::NormSpec;
use crate::rng::{SeededStream, Xoshiro256pp};
use crate::Result;

/// Simulated null distribution for one (covariance, family, config) triple.
///
/// Inner draws come from `seed.derive(0)`; outer draw m comes from
/// `seed.derive(1).with_stream(m)`. That layout is part of the contract:
/// it is what makes reports reproducible from their recorded seed alone.
#[derive(Debug, Clone)]
pub struct CalibrationResult {
    /// Per-norm thresholds, in family order.
    pub norm_cals: Vec<NormCalibration>,
    /// Ascending min-over-norms statistics of the outer null draws.
    pub null_z_sorted: Vec<f64>,
    /// Rejection cutoff: the floor(alpha * m_outer)-th ascending null value.
    pub threshold: f64,
    pub alpha: f64,
    pub seed: SeededStream,
}

/// Reference p-values computed from the same estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct ComparatorSet {
    /// Bonferroni-corrected minimum of the per-coordinate Wald p-values.
    pub bonferroni_p: f64,
    /// Cauchy combination of the same p-values; absent when a pole input
    /// (a p-value of exactly 1, 1/2, or 0) makes the transform undefined.
    pub cauchy_p: Option<f64>,
}

/// Everything one run of the test produced.
#[derive(Debug, Clone, PartialEq)]
pub struct TestReport {
    /// Scaled estimate sqrt(n) * psi_n the statistic was evaluated at.
    pub u_n: Vec<f64>,
    /// Minimum measure value over the family; +inf only for the
    /// multiplicative measure at u_n = 0.
    pub z_n: f64,
    /// Measure value per family member, in family order.
    pub per_norm_gamma: Vec<(NormSpec, f64)>,
    /// First index attaining the minimum; diagnostic only.
    pub selected_norm: usize,
    pub p_value: f64,
    /// Exactly p_value <= alpha.
    pub reject: bool,
    pub alpha: f64,
    /// Present when the per-coordinate Wald p-values exist.
    pub comparators: Option<ComparatorSet>,
    pub seed: SeededStream,
    /// The family the calibration actually used, in calibration order.
    pub family: Vec<NormSpec>,
}

// First index minimizing under total order; ties break low so the selected
// norm is deterministic.
fn min_index(values: &[f64]) -> usize {
    let mut best = 0;
    for (k, v) in values.iter().enumerate().skip(1) {
        if v.total_cmp(&values[best]) == core::cmp::Ordering::Less {
            best = k;
        }
    }
    best
}

// floor(frac * m) as a 1-based order-statistic index, snapped to the nearest
// integer first so float dust in frac cannot shift the index.
fn floor_index(frac: f64, m: usize) -> usize {
    let t = frac * m as f64;
    let near = libm::round(t);
    let t = if (t - near).abs() <= 1e-9 * (m as f64).max(1.0) {
        near
    } else {
        t
    };
    (libm::floor(t) as usize).clamp(1, m)
}

/// Evaluates the measure for every calibrated norm at `u` and takes the
/// minimum. Returns (statistic, per-norm values, first argmin index).
pub fn adaptive_statistic(
    u: &[f64],
    cals: &[NormCalibration],
    draws: &DrawMatrix,
    cfg: &MeasureConfig,
) -> Result<(f64, Vec<f64>, usize)> {
    if cals.is_empty() {
        return Err(Error::EmptyInput);
    }
    let per_norm = measure_batch(u, cals, draws, cfg)?;
    let selected = min_index(&per_norm);
    Ok((per_norm[selected], per_norm, selected))
}

/// Simulates the null distribution of the statistic under N(0, sigma_n):
/// calibrates every norm against one shared inner draw matrix, then runs
/// m_outer independent outer draws through the same measure pipeline.
pub fn calibrate_null(
    sigma_n: &CovMatrix,
    family: &[NormSpec],
    cfg: &MeasureConfig,
    seed: SeededStream,
    exec: &dyn Executor,
) -> Result<CalibrationResult> {
    let (calib, _) = calibrate_null_with_draws(sigma_n, family, cfg, seed, exec)?;
    Ok(calib)
}

// Keeps the inner draw matrix so run_test can evaluate the observed
// statistic against exactly the thresholds it was calibrated with.
pub(crate) fn calibrate_null_with_draws(
    sigma_n: &CovMatrix,
    family: &[NormSpec],
    cfg: &MeasureConfig,
    seed: SeededStream,
    exec: &dyn Executor,
) -> Result<(CalibrationResult, DrawMatrix)> {
    cfg.validate()?;
    if family.is_empty() {
        return Err(Error::EmptyInput);
    }
    let chol = cholesky_factor(sigma_n)?;
    let draws = sample_mvn(&chol, cfg.m_inner, seed.derive(0))?;
    let norm_cals = calibrate_family(family, &draws, cfg.alpha)?;
    let outer = seed.derive(1);
    let per_draw = exec.try_map_vec(cfg.m_outer, &|m| {
        let u = sample_mvn_single(&chol, outer.with_stream(m as u64));
        let gammas = measure_batch(&u, &norm_cals, &draws, cfg)?;
        Ok(vec![gammas[min_index(&gammas)]])
    })?;
    let mut null_z_sorted: Vec<f64> = per_draw.into_iter().map(|v| v[0]).collect();
    null_z_sorted.sort_unstable_by(f64::total_cmp);
    let threshold = null_z_sorted[floor_index(cfg.alpha, cfg.m_outer) - 1];
    Ok((
        CalibrationResult {
            norm_cals,
            null_z_sorted,
            threshold,
            alpha: cfg.alpha,
            seed,
        },
        draws,
    ))
}

/// Rank p-value with the +1/+1 correction: ties with null draws count as
/// at least as extreme, so p > 0 always and the test is valid at finite
/// m_outer.
pub fn p_value(z_n: f64, calib: &CalibrationResult) -> f64 {
    let below = calib.null_z_sorted.partition_point(|v| *v <= z_n);
    (1 + below) as f64 / (calib.null_z_sorted.len() + 1) as f64
}

fn comparator_set(est: &EstimateResult, form: CauchyForm) -> Result<Option<ComparatorSet>> {
    let wald = match wald_pvalues(&est.psi_n, &est.sigma_n, est.n) {
        Ok(w) => w,
        Err(Error::DegenerateVariance { .. }) => return Ok(None),
        Err(e) => return Err(e),
    };
    let bonferroni = bonferroni_p(&wald.p_values)?;
    let cauchy = match cauchy_combination(&wald.p_values, form) {
        Ok((_, p)) => Some(p),
        Err(Error::PoleInput { .. }) => None,
        Err(e) => return Err(e),
    };
    Ok(Some(ComparatorSet {
        bonferroni_p: bonferroni,
        cauchy_p: cauchy,
    }))
}

/// Full test on one estimate: scales to u_n = sqrt(n) * psi_n, calibrates
/// the null under the estimated covariance, and rejects when the rank
/// p-value is at most alpha. Comparator p-values ride along when the
/// per-coordinate variances support them.
pub fn run_test(
    est: &EstimateResult,
    family: &[NormSpec],
    cfg: &MeasureConfig,
    seed: SeededStream,
    exec: &dyn Executor,
    cauchy_form: CauchyForm,
) -> Result<TestReport> {
    if est.n < 2 {
        return Err(Error::InsufficientData {
            needed: 2,
            got: est.n,
        });
    }
    if est.dim() < 1 {
        return Err(Error::InsufficientData { needed: 1, got: 0 });
    }
    let sqrt_n = libm::sqrt(est.n as f64);
    let u_n: Vec<f64> = est.psi_n.iter().map(|&v| sqrt_n * v).collect();
    let (calib, draws) = calibrate_null_with_draws(&est.sigma_n, family, cfg, seed, exec)?;
    let (z_n, per_norm, selected_norm) = adaptive_statistic(&u_n, &calib.norm_cals, &draws, cfg)?;
    let p = p_value(z_n, &calib);
    let comparators = comparator_set(est, cauchy_form)?;
    let family_used: Vec<NormSpec> = calib.norm_cals.iter().map(|c| c.spec()).collect();
    let per_norm_gamma: Vec<(NormSpec, f64)> = family_used.iter().copied().zip(per_norm).collect();
    Ok(TestReport {
        u_n,
        z_n,
        per_norm_gamma,
        selected_norm,
        p_value: p,
        reject: p <= cfg.alpha,
        alpha: cfg.alpha,
        comparators,
        seed,
        family: family_used,
    })
}

// Fisher-Yates driven by one dedicated stream per permutation, so
// permutation b is the same dataset no matter which thread runs it.
fn permuted(y: &[f64], mut rng: Xoshiro256pp) -> Vec<f64> {
    let mut out = y.to_vec();
    for i in (1..out.len()).rev() {
        let j = (rng.next_f64_open() * (i + 1) as f64) as usize;
        out.swap(i, j.min(i));
    }
    out
}

/// Permutation variant for complete-case correlation data: the statistic
/// (estimate, covariance, calibration, minimum) is recomputed from scratch
/// on every permuted outcome vector, sharing only the normal innovations of
/// the inner draws, so the statistic is a function of the permuted dataset
/// alone and the rank p-value is exact under exchangeability.
pub fn permutation_test(
    w: &[f64],
    n: usize,
    d: usize,
    y: &[f64],
    family: &[NormSpec],
    cfg: &MeasureConfig,
    n_perm: usize,
    seed: SeededStream,
    exec: &dyn Executor,
    cauchy_form: CauchyForm,
) -> Result<TestReport> {
    if n < 3 {
        return Err(Error::InsufficientData { needed: 3, got: n });
    }
    if n_perm == 0 {
        return Err(Error::InvalidConfig {
            reason: "permutation count must be positive",
        });
    }
    cfg.validate()?;
    if family.is_empty() {
        return Err(Error::EmptyInput);
    }
    let cache = NormalCache::draw(cfg.m_inner / 2, d, seed.derive(0));
    let statistic = |y_cur: &[f64]| -> Result<(
        EstimateResult,
        Vec<NormCalibration>,
        DrawMatrix,
        f64,
        Vec<f64>,
        usize,
    )> {
        let est = correlation_estimator(w, n, d, y_cur)?;
        let chol = cholesky_factor(&est.sigma_n)?;
        let draws = sample_mvn_from_cache(&chol, &cache, seed.derive(0))?;
        let cals = calibrate_family(family, &draws, cfg.alpha)?;
        let sqrt_n = libm::sqrt(est.n as f64);
        let u: Vec<f64> = est.psi_n.iter().map(|&v| sqrt_n * v).collect();
        let (z, per_norm, selected) = adaptive_statistic(&u, &cals, &draws, cfg)?;
        Ok((est, cals, draws, z, per_norm, selected))
    };
    let (est, cals, _, z_n, per_norm, selected_norm) = statistic(y)?;
    let perm_seed = seed.derive(2);
    let perm_z = exec.try_map_vec(n_perm, &|b| {
        let y_b = permuted(y, perm_seed.with_stream(b as u64).rng());
        let (_, _, _, z_b, _, _) = statistic(&y_b)?;
        Ok(vec![z_b])
    })?;
    let at_most = perm_z.iter().filter(|v| v[0] <= z_n).count();
    let p = (1 + at_most) as f64 / (n_perm + 1) as f64;
    let comparators = comparator_set(&est, cauchy_form)?;
    let family_used: Vec<NormSpec> = cals.iter().map(|c| c.spec()).collect();
    let sqrt_n = libm::sqrt(est.n as f64);
    let u_n: Vec<f64> = est.psi_n.iter().map(|&v| sqrt_n * v).collect();
    let per_norm_gamma: Vec<(NormSpec, f64)> = family_used.iter().copied().zip(per_norm).collect();
    Ok(TestReport {
        u_n,
        z_n,
        per_norm_gamma,
        selected_norm,
        p_value: p,
        reject: p <= cfg.alpha,
        alpha: cfg.alpha,
        comparators,
        seed,
        family: family_used,
    })
}
