//! Simulation designs from the evaluation study and the replicate runner.
//!
//! Example 1 pairs equicorrelated Gaussian covariates with a continuous
//! outcome; Example 2 pairs them with a Bernoulli outcome observed through
//! a covariate-driven missingness mechanism. [`run_experiment`] fans
//! replicates over an executor with one RNG stream per replicate, so rate
//! tables are deterministic in the seed no matter how work is scheduled.
//!
//! Seed layout: replicate `r` draws its data from
//! `SeededStream::new(cfg.seed, r)`; the Example 2 bootstrap covariance uses
//! `data.derive(3)`; each test kind calibrates from `data.derive(salt)` with
//! a salt fixed per kind, so a test's result does not depend on which other
//! tests were requested alongside it.

use normtest_core::comparators::{bonferroni_p, cauchy_combination, wald_pvalues, CauchyForm};
use normtest_core::estimators::{
    correlation_estimator, loglinear_missing_estimator, EstimateResult, LogisticLearner,
};
use normtest_core::exec::{Executor, SequentialExec};
use normtest_core::measures::MeasureConfig;
use normtest_core::normal::draw_std_normal;
use normtest_core::norms::{default_family, FamilyKind, NormSpec};
use normtest_core::rng::SeededStream;
use normtest_core::testkit::{permutation_test, run_test};
use normtest_core::{Error, Result};

use crate::error::CliError;

/// Tests the runner knows how to execute.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TestKind {
    AdaptiveLp,
    AdaptiveSsq,
    L2,
    LInf,
    Bonferroni,
    Cauchy,
    Permutation,
}

impl TestKind {
    pub const ALL: [TestKind; 7] = [
        TestKind::AdaptiveLp,
        TestKind::AdaptiveSsq,
        TestKind::L2,
        TestKind::LInf,
        TestKind::Bonferroni,
        TestKind::Cauchy,
        TestKind::Permutation,
    ];

    /// Descriptor used in config files, `--tests` lists, and table rows.
    pub fn name(self) -> &'static str {
        match self {
            TestKind::AdaptiveLp => "adaptive-lp",
            TestKind::AdaptiveSsq => "adaptive-ssq",
            TestKind::L2 => "l2",
            TestKind::LInf => "linf",
            TestKind::Bonferroni => "bonferroni",
            TestKind::Cauchy => "cauchy",
            TestKind::Permutation => "permutation",
        }
    }

    pub fn parse(name: &str) -> Result<TestKind> {
        TestKind::ALL
            .into_iter()
            .find(|k| k.name() == name)
            .ok_or(Error::InvalidConfig {
                reason: "unknown test descriptor",
            })
    }

    // Calibration salts are keyed to the kind, not the list position, so a
    // kind's result is invariant to the rest of the request.
    fn calibration_salt(self) -> u64 {
        match self {
            TestKind::AdaptiveLp => 10,
            TestKind::AdaptiveSsq => 11,
            TestKind::L2 => 12,
            TestKind::LInf => 13,
            TestKind::Bonferroni | TestKind::Cauchy => 14,
            TestKind::Permutation => 16,
        }
    }

    fn family(self, d: usize) -> Option<Vec<NormSpec>> {
        match self {
            TestKind::AdaptiveLp | TestKind::Permutation => Some(default_family(FamilyKind::Lp, d)),
            TestKind::AdaptiveSsq => Some(default_family(FamilyKind::SumSquares, d)),
            TestKind::L2 => Some(vec![NormSpec::Lp(2.0)]),
            TestKind::LInf => Some(vec![NormSpec::LInf]),
            TestKind::Bonferroni | TestKind::Cauchy => None,
        }
    }
}

/// One simulation request: a design cell plus the tests to run on it.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    /// 1 for the continuous-outcome design, 2 for the missing-binary design.
    pub example: u8,
    pub setting: u8,
    pub n: usize,
    pub d: usize,
    /// Example 1 equicorrelation; Example 2 fixes it at 0.5.
    pub rho: f64,
    pub reps: usize,
    pub tests: Vec<TestKind>,
    pub measure: MeasureConfig,
    pub seed: u64,
    /// Multiplier on the setting's signal coefficients; 0 turns any setting
    /// into a null, 1 reproduces the printed designs.
    pub shift_scale: f64,
    /// Permutation count when [`TestKind::Permutation`] is requested.
    pub n_perm: usize,
    /// Bootstrap replicates behind the Example 2 covariance.
    pub bootstrap_reps: usize,
    pub cauchy_form: CauchyForm,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            example: 1,
            setting: 1,
            n: 100,
            d: 10,
            rho: 0.0,
            reps: 500,
            tests: vec![TestKind::AdaptiveLp],
            measure: MeasureConfig::default(),
            seed: 0,
            shift_scale: 1.0,
            n_perm: 199,
            bootstrap_reps: 400,
            cauchy_form: CauchyForm::Paper,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        match self.example {
            1 => {
                if !(1..=3).contains(&self.setting) {
                    return Err(Error::InvalidConfig {
                        reason: "example 1 settings are 1, 2, and 3",
                    });
                }
            }
            2 => {
                if !(1..=4).contains(&self.setting) {
                    return Err(Error::InvalidConfig {
                        reason: "example 2 settings are 1 through 4",
                    });
                }
                if self.d < 2 {
                    return Err(Error::InvalidConfig {
                        reason: "example 2 needs d >= 2 for the missingness model",
                    });
                }
                if self.tests.contains(&TestKind::Permutation) {
                    return Err(Error::InvalidConfig {
                        reason: "the permutation test applies to example 1 only",
                    });
                }
            }
            _ => {
                return Err(Error::InvalidConfig {
                    reason: "example must be 1 or 2",
                })
            }
        }
        if self.setting >= 3 && self.d < 10 {
            return Err(Error::InvalidConfig {
                reason: "settings with the 10-coefficient pattern need d >= 10",
            });
        }
        if self.d == 0 {
            return Err(Error::InvalidConfig {
                reason: "dimension must be positive",
            });
        }
        if self.n < 2 {
            return Err(Error::InsufficientData {
                needed: 2,
                got: self.n,
            });
        }
        if !(0.0..1.0).contains(&self.rho) {
            return Err(Error::DomainError {
                value: self.rho,
                domain: "[0, 1)",
            });
        }
        if !(self.shift_scale.is_finite() && self.shift_scale >= 0.0) {
            return Err(Error::DomainError {
                value: self.shift_scale,
                domain: "[0, inf)",
            });
        }
        if self.tests.is_empty() {
            return Err(Error::InvalidConfig {
                reason: "no tests requested",
            });
        }
        if self.tests.contains(&TestKind::Permutation) && self.n_perm == 0 {
            return Err(Error::InvalidConfig {
                reason: "permutation count must be positive",
            });
        }
        self.measure.validate()
    }
}

fn expit(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

// W = sqrt(rho) z0 1 + sqrt(1 - rho) Z is exact for the equicorrelated
// covariance, and O(d) per row where a Cholesky transform would be O(d^2).
fn equicorrelated_row(
    rng: &mut normtest_core::rng::Xoshiro256pp,
    sqrt_rho: f64,
    sqrt_unique: f64,
    row: &mut [f64],
) {
    let z0 = draw_std_normal(rng);
    for slot in row.iter_mut() {
        *slot = sqrt_rho * z0 + sqrt_unique * draw_std_normal(rng);
    }
}

fn check_example1_args(d: usize, rho: f64, setting: u8, shift_scale: f64) -> Result<()> {
    if !(1..=3).contains(&setting) {
        return Err(Error::InvalidConfig {
            reason: "example 1 settings are 1, 2, and 3",
        });
    }
    if d == 0 {
        return Err(Error::InvalidConfig {
            reason: "dimension must be positive",
        });
    }
    if setting == 3 && d < 10 {
        return Err(Error::InvalidConfig {
            reason: "settings with the 10-coefficient pattern need d >= 10",
        });
    }
    if !(0.0..1.0).contains(&rho) {
        return Err(Error::DomainError {
            value: rho,
            domain: "[0, 1)",
        });
    }
    if !(shift_scale.is_finite() && shift_scale >= 0.0) {
        return Err(Error::DomainError {
            value: shift_scale,
            domain: "[0, inf)",
        });
    }
    Ok(())
}

/// Example 1 data: W equicorrelated at `rho`, Y continuous.
///
/// Settings: 1 is the global null Y = ε; 2 is the sparse signal
/// Y = 0.25 W₁ + ε; 3 is the dense signal
/// Y = 0.15 (W₁ + ... + W₅) − 0.1 (W₆ + ... + W₁₀) + ε, with ε standard
/// normal. Per row the stream is spent as z₀, then the d coordinate draws,
/// then ε.
pub fn generate_example1(
    n: usize,
    d: usize,
    rho: f64,
    setting: u8,
    stream: SeededStream,
) -> Result<(Vec<f64>, Vec<f64>)> {
    generate_example1_scaled(n, d, rho, setting, 1.0, stream)
}

/// [`generate_example1`] with the signal coefficients multiplied by
/// `shift_scale`, for power curves in the shift magnitude.
pub fn generate_example1_scaled(
    n: usize,
    d: usize,
    rho: f64,
    setting: u8,
    shift_scale: f64,
    stream: SeededStream,
) -> Result<(Vec<f64>, Vec<f64>)> {
    check_example1_args(d, rho, setting, shift_scale)?;
    let sqrt_rho = rho.sqrt();
    let sqrt_unique = (1.0 - rho).sqrt();
    let mut rng = stream.rng();
    let mut w = vec![0.0; n * d];
    let mut y = vec![0.0; n];
    for i in 0..n {
        let row = &mut w[i * d..(i + 1) * d];
        equicorrelated_row(&mut rng, sqrt_rho, sqrt_unique, row);
        let eps = draw_std_normal(&mut rng);
        y[i] = match setting {
            1 => eps,
            2 => shift_scale * 0.25 * row[0] + eps,
            _ => {
                let up: f64 = row[..5].iter().sum();
                let down: f64 = row[5..10].iter().sum();
                shift_scale * (0.15 * up - 0.1 * down) + eps
            }
        };
    }
    Ok((w, y))
}

fn example2_beta(d: usize, setting: u8, shift_scale: f64) -> Vec<f64> {
    let mut beta = vec![0.0; d];
    match setting {
        1 => {}
        2 => beta[0] = 0.6 * shift_scale,
        3 => {
            for b in &mut beta[..5] {
                *b = 0.32 * shift_scale;
            }
            for b in &mut beta[5..10] {
                *b = -0.32 * shift_scale;
            }
        }
        _ => {
            for b in &mut beta[..5] {
                *b = 0.23375 * shift_scale;
            }
            for b in &mut beta[5..10] {
                *b = 0.4675 * shift_scale;
            }
        }
    }
    beta
}

fn check_example2_args(d: usize, setting: u8, shift_scale: f64) -> Result<()> {
    if !(1..=4).contains(&setting) {
        return Err(Error::InvalidConfig {
            reason: "example 2 settings are 1 through 4",
        });
    }
    if d < 2 {
        return Err(Error::InvalidConfig {
            reason: "example 2 needs d >= 2 for the missingness model",
        });
    }
    if setting >= 3 && d < 10 {
        return Err(Error::InvalidConfig {
            reason: "settings with the 10-coefficient pattern need d >= 10",
        });
    }
    if !(shift_scale.is_finite() && shift_scale >= 0.0) {
        return Err(Error::DomainError {
            value: shift_scale,
            domain: "[0, inf)",
        });
    }
    Ok(())
}

/// Example 2 data: W equicorrelated at 0.5, Y ~ Bernoulli(expit(βᵀw)),
/// Δ ~ Bernoulli(expit(0.5 + 0.15 W_{d−1} − 0.275 W_d)), U = Δ·Y.
///
/// The setting picks β: 1 is β = 0, 2 is β₁ = 0.6, 3 splits ±0.32 over the
/// first ten coordinates, 4 uses 0.23375 and 0.4675. Missingness depends on
/// W only, never on Y. Per row the stream is spent as z₀, the d coordinate
/// draws, the outcome uniform, then the missingness uniform.
pub fn generate_example2(
    n: usize,
    d: usize,
    setting: u8,
    stream: SeededStream,
) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>)> {
    generate_example2_scaled(n, d, setting, 1.0, stream)
}

/// [`generate_example2`] with β multiplied by `shift_scale`.
pub fn generate_example2_scaled(
    n: usize,
    d: usize,
    setting: u8,
    shift_scale: f64,
    stream: SeededStream,
) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>)> {
    check_example2_args(d, setting, shift_scale)?;
    let beta = example2_beta(d, setting, shift_scale);
    let sqrt_rho = 0.5f64.sqrt();
    let mut rng = stream.rng();
    let mut w = vec![0.0; n * d];
    let mut u = vec![0.0; n];
    let mut delta = vec![0.0; n];
    for i in 0..n {
        let row = &mut w[i * d..(i + 1) * d];
        equicorrelated_row(&mut rng, sqrt_rho, sqrt_rho, row);
        let linear: f64 = beta.iter().zip(row.iter()).map(|(b, x)| b * x).sum();
        let y = f64::from(rng.next_f64_open() < expit(linear));
        let miss = expit(0.5 + 0.15 * row[d - 2] - 0.275 * row[d - 1]);
        let obs = f64::from(rng.next_f64_open() < miss);
        u[i] = obs * y;
        delta[i] = obs;
    }
    Ok((w, u, delta))
}

/// One output row: a test's rejection rate over the effective replicates.
#[derive(Debug, Clone, PartialEq)]
pub struct TableRow {
    pub test: TestKind,
    pub setting: u8,
    pub n: usize,
    pub d: usize,
    pub rho: f64,
    /// Replicates that produced a decision for this test.
    pub reps: usize,
    pub reject_rate: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
}

/// Rate table plus the count of replicates that failed somewhere.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentTable {
    pub rows: Vec<TableRow>,
    pub failed: usize,
}

/// Wilson 95% score interval for `k` successes in `n` trials. Chosen over
/// the Wald interval because simulated rates sit near 0.05 where Wald
/// collapses; (NaN, NaN) when n = 0.
pub fn wilson_interval(k: usize, n: usize) -> (f64, f64) {
    const Z: f64 = 1.959963984540054;
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let nf = n as f64;
    let p = k as f64 / nf;
    let z2 = Z * Z;
    let denom = 1.0 + z2 / nf;
    let center = (p + z2 / (2.0 * nf)) / denom;
    let half = (Z / denom) * (p * (1.0 - p) / nf + z2 / (4.0 * nf * nf)).sqrt();
    ((center - half).max(0.0), (center + half).min(1.0))
}

// Failures that can plausibly be caused by one replicate's draw. Anything
// else is a configuration or programming error and aborts the run.
fn replicate_failure(e: &Error) -> bool {
    matches!(
        e,
        Error::NotPositiveDefinite
            | Error::Separation
            | Error::DegenerateOutcome
            | Error::DegenerateCovariate { .. }
            | Error::DegenerateVariance { .. }
            | Error::PoleInput { .. }
            | Error::EmptyStratum { .. }
            | Error::NonPositiveSmoother { .. }
            | Error::InsufficientData { .. }
    )
}

// Decision flags for one replicate, one per requested test: 1.0 reject,
// 0.0 accept, NaN when this replicate could not produce a decision.
fn run_replicate(cfg: &ExperimentConfig, rep: u64) -> Result<Vec<f64>> {
    let k = cfg.tests.len();
    let data = SeededStream::new(cfg.seed, rep);
    let seq = SequentialExec;

    let mut w_ex1 = Vec::new();
    let mut y_ex1 = Vec::new();
    let estimate = if cfg.example == 1 {
        let (w, y) =
            generate_example1_scaled(cfg.n, cfg.d, cfg.rho, cfg.setting, cfg.shift_scale, data)?;
        w_ex1 = w;
        y_ex1 = y;
        if cfg.tests.iter().all(|t| *t == TestKind::Permutation) {
            Ok(None)
        } else {
            correlation_estimator(&w_ex1, cfg.n, cfg.d, &y_ex1).map(Some)
        }
    } else {
        let (w, u, delta) =
            generate_example2_scaled(cfg.n, cfg.d, cfg.setting, cfg.shift_scale, data)?;
        loglinear_missing_estimator(
            &w,
            cfg.n,
            cfg.d,
            &u,
            &delta,
            &LogisticLearner::default(),
            cfg.bootstrap_reps,
            data.derive(3),
            &seq,
        )
        .map(Some)
    };
    let estimate: Option<EstimateResult> = match estimate {
        Ok(e) => e,
        Err(e) if replicate_failure(&e) => return Ok(vec![f64::NAN; k]),
        Err(e) => return Err(e),
    };

    let needs_wald = cfg
        .tests
        .iter()
        .any(|t| matches!(t, TestKind::Bonferroni | TestKind::Cauchy));
    let wald = match (&estimate, needs_wald) {
        (Some(est), true) => match wald_pvalues(&est.psi_n, &est.sigma_n, est.n) {
            Ok(w) => Some(w),
            Err(e) if replicate_failure(&e) => None,
            Err(e) => return Err(e),
        },
        _ => None,
    };

    let mut flags = Vec::with_capacity(k);
    for kind in &cfg.tests {
        let decision: Result<f64> = match kind {
            TestKind::Bonferroni => match &wald {
                Some(wald) => {
                    bonferroni_p(&wald.p_values).map(|p| f64::from(p <= cfg.measure.alpha))
                }
                None => Ok(f64::NAN),
            },
            TestKind::Cauchy => match &wald {
                Some(wald) => cauchy_combination(&wald.p_values, cfg.cauchy_form)
                    .map(|(_, p)| f64::from(p <= cfg.measure.alpha)),
                None => Ok(f64::NAN),
            },
            TestKind::Permutation => {
                let family = kind.family(cfg.d).expect("permutation has a family");
                permutation_test(
                    &w_ex1,
                    cfg.n,
                    cfg.d,
                    &y_ex1,
                    &family,
                    &cfg.measure,
                    cfg.n_perm,
                    data.derive(kind.calibration_salt()),
                    &seq,
                    cfg.cauchy_form,
                )
                .map(|r| f64::from(r.reject))
            }
            adaptive => {
                let family = adaptive
                    .family(cfg.d)
                    .expect("adaptive kinds have a family");
                let est = estimate
                    .as_ref()
                    .expect("estimate exists for non-permutation tests");
                run_test(
                    est,
                    &family,
                    &cfg.measure,
                    data.derive(adaptive.calibration_salt()),
                    &seq,
                    cfg.cauchy_form,
                )
                .map(|r| f64::from(r.reject))
            }
        };
        match decision {
            Ok(flag) => flags.push(flag),
            Err(e) if replicate_failure(&e) => flags.push(f64::NAN),
            Err(e) => return Err(e),
        }
    }
    Ok(flags)
}

/// Runs every requested test on `cfg.reps` fresh datasets and aggregates
/// per-test rejection rates with Wilson 95% intervals.
///
/// A replicate that fails for a data-dependent reason (separation, a
/// degenerate draw) is dropped from the affected tests; the run aborts with
/// [`CliError::TooManyFailures`] once more than 1% of replicates fail.
/// Replicate work is embarrassingly parallel and assembled in replicate
/// order, so the table is identical for any executor.
pub fn run_experiment(
    cfg: &ExperimentConfig,
    exec: &dyn Executor,
) -> std::result::Result<ExperimentTable, CliError> {
    cfg.validate()?;
    if cfg.reps == 0 {
        return Ok(ExperimentTable {
            rows: Vec::new(),
            failed: 0,
        });
    }
    let flags = exec.try_map_vec(cfg.reps, &|rep| run_replicate(cfg, rep as u64))?;
    let failed = flags
        .iter()
        .filter(|row| row.iter().any(|v| v.is_nan()))
        .count();
    if failed * 100 > cfg.reps {
        return Err(CliError::TooManyFailures {
            failed,
            reps: cfg.reps,
        });
    }
    let rows = cfg
        .tests
        .iter()
        .enumerate()
        .map(|(t, kind)| {
            let mut decided = 0usize;
            let mut rejects = 0usize;
            for row in &flags {
                let v = row[t];
                if !v.is_nan() {
                    decided += 1;
                    if v == 1.0 {
                        rejects += 1;
                    }
                }
            }
            let rate = if decided > 0 {
                rejects as f64 / decided as f64
            } else {
                f64::NAN
            };
            let (ci_lo, ci_hi) = wilson_interval(rejects, decided);
            TableRow {
                test: *kind,
                setting: cfg.setting,
                n: cfg.n,
                d: cfg.d,
                rho: cfg.rho,
                reps: decided,
                reject_rate: rate,
                ci_lo,
                ci_hi,
            }
        })
        .collect();
    Ok(ExperimentTable { rows, failed })
}
