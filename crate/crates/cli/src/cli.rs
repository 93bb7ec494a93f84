//! Argument surface and subcommand dispatch.
//!
//! Exit codes: 0 success, 2 usage (raised by clap before [`run`] is
//! reached), 3 data or contract violation, 4 numeric failure.

use std::fs;
use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Deserialize;

use normtest_core::comparators::CauchyForm;
use normtest_core::estimators::{
    correlation_estimator, loglinear_missing_estimator, two_phase_estimate, EstimateResult,
    LogisticLearner,
};
use normtest_core::measures::{MeasureConfig, MeasureKind};
use normtest_core::mvn::CovMatrix;
use normtest_core::norms::{default_family, evaluate, FamilyKind, NormSpec};
use normtest_core::rng::SeededStream;
use normtest_core::testkit::{calibrate_null, permutation_test, run_test, TestReport};

use crate::error::CliError;
use crate::harness::{run_experiment, ExperimentConfig, TestKind};
use crate::io::{self, Dataset};
use crate::parallel::RayonExec;
use crate::report::JsonReport;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MeasureArg {
    /// Acceptance-rate measure.
    Ar,
    /// Multiplicative-factor measure.
    Mf,
}

impl From<MeasureArg> for MeasureKind {
    fn from(m: MeasureArg) -> MeasureKind {
        match m {
            MeasureArg::Ar => MeasureKind::AcceptanceRate,
            MeasureArg::Mf => MeasureKind::MultiplicativeFactor,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CauchyArg {
    /// Tangent transform exactly as printed in the reference derivation.
    Paper,
    /// Conventional Liu-Xie transform.
    Canonical,
}

impl From<CauchyArg> for CauchyForm {
    fn from(c: CauchyArg) -> CauchyForm {
        match c {
            CauchyArg::Paper => CauchyForm::Paper,
            CauchyArg::Canonical => CauchyForm::Canonical,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EstimatorArg {
    /// Outcome-covariate correlations (continuous outcome).
    Correlation,
    /// Missing-binary-outcome log-linear associations.
    Loglinear,
    /// Two-phase biomarker log odds ratios.
    TwoPhase,
}

#[derive(Debug, Parser)]
#[command(
    name = "normtest",
    version,
    about = "Adaptive-norm tests for multivariate point nulls"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// Base seed; every random quantity derives from it.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,

    /// Test level and acceptance-region level.
    #[arg(long, global = true, default_value_t = 0.05)]
    pub alpha: f64,

    /// Type II error target of the multiplicative-factor measure.
    #[arg(long, global = true, default_value_t = 0.2)]
    pub tau: f64,

    /// Inner draws behind each measure evaluation.
    #[arg(long, global = true, default_value_t = 5000)]
    pub m_inner: usize,

    /// Outer draws behind the null calibration.
    #[arg(long, global = true, default_value_t = 2000)]
    pub m_outer: usize,

    /// Worker threads; defaults to all cores. Output does not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    /// Inefficiency measure driving the adaptive statistic.
    #[arg(long, global = true, value_enum, default_value_t = MeasureArg::Ar)]
    pub measure: MeasureArg,

    /// Norm family: `lp`, `ssq`, or an explicit comma list like
    /// `l1,l2,linf,ssq:3`.
    #[arg(long, global = true, default_value = "lp")]
    pub family: String,

    /// Which tangent transform the Cauchy combination uses.
    #[arg(long, global = true, value_enum, default_value_t = CauchyArg::Paper)]
    pub cauchy_form: CauchyArg,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the test on a CSV dataset and emit a JSON report.
    Test {
        /// Dataset with columns w1..wd plus y, u, delta, s1..sk as the
        /// estimator requires.
        #[arg(long)]
        csv: PathBuf,

        #[arg(long, value_enum, default_value_t = EstimatorArg::Correlation)]
        estimator: EstimatorArg,

        /// Write the report here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,

        /// Permutation count; switches the correlation estimator to the
        /// permutation test.
        #[arg(long)]
        n_perm: Option<usize>,

        /// Bootstrap replicates behind the loglinear covariance.
        #[arg(long, default_value_t = 400)]
        bootstrap_reps: usize,
    },
    /// Monte Carlo rejection-rate table over the built-in designs.
    Simulate {
        /// JSON experiment config; when given, every other simulate and
        /// global flag is ignored.
        #[arg(long)]
        config: Option<PathBuf>,

        #[arg(long, default_value_t = 1)]
        example: u8,

        #[arg(long, default_value_t = 1)]
        setting: u8,

        #[arg(long, default_value_t = 100)]
        n: usize,

        #[arg(long, default_value_t = 10)]
        d: usize,

        /// Example 1 equicorrelation.
        #[arg(long, default_value_t = 0.0)]
        rho: f64,

        #[arg(long, default_value_t = 500)]
        reps: usize,

        /// Comma-separated test descriptors: adaptive-lp, adaptive-ssq, l2,
        /// linf, bonferroni, cauchy, permutation.
        #[arg(long, default_value = "adaptive-lp")]
        tests: String,

        /// Multiplier on the setting's signal coefficients.
        #[arg(long, default_value_t = 1.0)]
        shift_scale: f64,

        #[arg(long, default_value_t = 199)]
        n_perm: usize,

        #[arg(long, default_value_t = 400)]
        bootstrap_reps: usize,

        /// Write the table here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate a norm on a vector.
    Norms {
        /// Norm name: l1, l2, l4.5, linf, or ssq:k.
        #[arg(long)]
        spec: String,

        /// Comma-separated coordinates.
        #[arg(long)]
        vec: String,
    },
    /// Export the calibration null sample as CSV.
    Calibrate {
        /// Dataset to estimate the null covariance from.
        #[arg(long)]
        csv: Option<PathBuf>,

        #[arg(long, value_enum, default_value_t = EstimatorArg::Correlation)]
        estimator: EstimatorArg,

        /// Calibrate against the d-dimensional identity covariance instead
        /// of a dataset.
        #[arg(long, conflicts_with = "csv")]
        d: Option<usize>,

        #[arg(long, default_value_t = 400)]
        bootstrap_reps: usize,

        /// Write the sample here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn resolve_family(arg: &str, d: usize) -> Result<Vec<NormSpec>, CliError> {
    match arg {
        "lp" => Ok(default_family(FamilyKind::Lp, d)),
        "ssq" => Ok(default_family(FamilyKind::SumSquares, d)),
        list => list
            .split(',')
            .map(|token| NormSpec::parse(token.trim()).map_err(CliError::from))
            .collect(),
    }
}

fn parse_tests(arg: &str) -> Result<Vec<TestKind>, CliError> {
    arg.split(',')
        .map(|token| TestKind::parse(token.trim()).map_err(CliError::from))
        .collect()
}

fn parse_vector(arg: &str) -> Result<Vec<f64>, CliError> {
    arg.split(',')
        .map(|token| {
            let token = token.trim();
            token
                .parse()
                .map_err(|_| CliError::Data(format!("`{token}` is not a number")))
        })
        .collect()
}

fn require_col<'a>(
    col: Option<&'a Vec<f64>>,
    estimator: &str,
    name: &str,
) -> Result<&'a [f64], CliError> {
    col.map(|v| v.as_slice())
        .ok_or_else(|| CliError::Data(format!("estimator {estimator} needs a `{name}` column")))
}

fn estimate_from_dataset(
    ds: &Dataset,
    estimator: EstimatorArg,
    bootstrap_reps: usize,
    seed: SeededStream,
    exec: &RayonExec,
) -> Result<EstimateResult, CliError> {
    match estimator {
        EstimatorArg::Correlation => {
            let y = require_col(ds.y.as_ref(), "correlation", "y")?;
            Ok(correlation_estimator(&ds.w, ds.n, ds.d, y)?)
        }
        EstimatorArg::Loglinear => {
            let u = require_col(ds.u.as_ref(), "loglinear", "u")?;
            let delta = require_col(ds.delta.as_ref(), "loglinear", "delta")?;
            Ok(loglinear_missing_estimator(
                &ds.w,
                ds.n,
                ds.d,
                u,
                delta,
                &LogisticLearner::default(),
                bootstrap_reps,
                seed.derive(3),
                exec,
            )?)
        }
        EstimatorArg::TwoPhase => {
            let records = ds.two_phase_records()?;
            Ok(two_phase_estimate(&records)?)
        }
    }
}

// Config file schema mirroring ExperimentConfig. Only the design cell is
// required; everything else falls back to the library defaults, not to the
// command line, because --config replaces the flag surface entirely.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    example: u8,
    setting: u8,
    n: usize,
    d: usize,
    #[serde(default)]
    rho: f64,
    reps: usize,
    tests: Vec<String>,
    #[serde(default)]
    measure: Option<MeasureFile>,
    #[serde(default)]
    seed: u64,
    #[serde(default)]
    shift_scale: Option<f64>,
    #[serde(default)]
    n_perm: Option<usize>,
    #[serde(default)]
    bootstrap_reps: Option<usize>,
    #[serde(default)]
    cauchy_form: Option<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct MeasureFile {
    #[serde(default)]
    kind: Option<String>,
    #[serde(default)]
    alpha: Option<f64>,
    #[serde(default)]
    tau: Option<f64>,
    #[serde(default)]
    m_inner: Option<usize>,
    #[serde(default)]
    m_outer: Option<usize>,
    #[serde(default)]
    bisect_rel_tol: Option<f64>,
    #[serde(default)]
    max_doublings: Option<u32>,
}

fn config_from_json(text: &str) -> Result<ExperimentConfig, CliError> {
    let file: ConfigFile = serde_json::from_str(text)?;
    let defaults = ExperimentConfig::default();
    let base = MeasureConfig::default();
    let measure = match file.measure {
        Some(m) => MeasureConfig {
            kind: match m.kind.as_deref() {
                None | Some("ar") => MeasureKind::AcceptanceRate,
                Some("mf") => MeasureKind::MultiplicativeFactor,
                Some(other) => {
                    return Err(CliError::Data(format!(
                        "unknown measure kind `{other}` (expected ar or mf)"
                    )))
                }
            },
            alpha: m.alpha.unwrap_or(base.alpha),
            tau: m.tau.unwrap_or(base.tau),
            m_inner: m.m_inner.unwrap_or(base.m_inner),
            m_outer: m.m_outer.unwrap_or(base.m_outer),
            bisect_rel_tol: m.bisect_rel_tol.unwrap_or(base.bisect_rel_tol),
            max_doublings: m.max_doublings.unwrap_or(base.max_doublings),
        },
        None => base,
    };
    let cauchy_form = match file.cauchy_form.as_deref() {
        None | Some("paper") => CauchyForm::Paper,
        Some("canonical") => CauchyForm::Canonical,
        Some(other) => {
            return Err(CliError::Data(format!(
                "unknown cauchy form `{other}` (expected paper or canonical)"
            )))
        }
    };
    Ok(ExperimentConfig {
        example: file.example,
        setting: file.setting,
        n: file.n,
        d: file.d,
        rho: file.rho,
        reps: file.reps,
        tests: file
            .tests
            .iter()
            .map(|name| TestKind::parse(name).map_err(CliError::from))
            .collect::<Result<_, _>>()?,
        measure,
        seed: file.seed,
        shift_scale: file.shift_scale.unwrap_or(defaults.shift_scale),
        n_perm: file.n_perm.unwrap_or(defaults.n_perm),
        bootstrap_reps: file.bootstrap_reps.unwrap_or(defaults.bootstrap_reps),
        cauchy_form,
    })
}

/// Executes a parsed command line. The caller maps errors to exit codes.
pub fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(threads) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| CliError::Data(format!("thread pool: {e}")))?;
    }
    let exec = RayonExec;
    let measure = MeasureConfig {
        kind: cli.measure.into(),
        alpha: cli.alpha,
        tau: cli.tau,
        m_inner: cli.m_inner,
        m_outer: cli.m_outer,
        ..MeasureConfig::default()
    };
    let cauchy_form: CauchyForm = cli.cauchy_form.into();
    let seed = SeededStream::new(cli.seed, 0);

    match cli.command {
        Command::Test {
            csv,
            estimator,
            out,
            n_perm,
            bootstrap_reps,
        } => {
            let ds = io::read_dataset(&csv)?;
            let report: TestReport = match (estimator, n_perm) {
                (EstimatorArg::Correlation, Some(n_perm)) => {
                    let y = require_col(ds.y.as_ref(), "correlation", "y")?;
                    let family = resolve_family(&cli.family, ds.d)?;
                    permutation_test(
                        &ds.w,
                        ds.n,
                        ds.d,
                        y,
                        &family,
                        &measure,
                        n_perm,
                        seed,
                        &exec,
                        cauchy_form,
                    )?
                }
                (_, Some(_)) => {
                    return Err(CliError::Data(
                        "--n-perm applies to the correlation estimator only".into(),
                    ))
                }
                (estimator, None) => {
                    let est = estimate_from_dataset(&ds, estimator, bootstrap_reps, seed, &exec)?;
                    let family = resolve_family(&cli.family, est.dim())?;
                    run_test(&est, &family, &measure, seed, &exec, cauchy_form)?
                }
            };
            let json = JsonReport::from_report(&report)
                .to_pretty()
                .map_err(CliError::from)?;
            io::write_output(out.as_deref(), &json)
        }
        Command::Simulate {
            config,
            example,
            setting,
            n,
            d,
            rho,
            reps,
            tests,
            shift_scale,
            n_perm,
            bootstrap_reps,
            out,
        } => {
            let cfg = match config {
                Some(path) => config_from_json(&fs::read_to_string(path)?)?,
                None => ExperimentConfig {
                    example,
                    setting,
                    n,
                    d,
                    rho,
                    reps,
                    tests: parse_tests(&tests)?,
                    measure,
                    seed: cli.seed,
                    shift_scale,
                    n_perm,
                    bootstrap_reps,
                    cauchy_form,
                },
            };
            let table = run_experiment(&cfg, &exec)?;
            if table.failed > 0 {
                eprintln!(
                    "warning: {} of {} replicates failed and were dropped",
                    table.failed, cfg.reps
                );
            }
            io::write_output(out.as_deref(), &io::table_to_csv(&table))
        }
        Command::Norms { spec, vec } => {
            let spec = NormSpec::parse(&spec)?;
            let x = parse_vector(&vec)?;
            let value = evaluate(spec, &x)?;
            println!("{value}");
            Ok(())
        }
        Command::Calibrate {
            csv,
            estimator,
            d,
            bootstrap_reps,
            out,
        } => {
            let calib = match (csv, d) {
                (None, Some(dim)) => {
                    let sigma = CovMatrix::identity(dim);
                    let family = resolve_family(&cli.family, dim)?;
                    calibrate_null(&sigma, &family, &measure, seed, &exec)?
                }
                (Some(path), None) => {
                    let ds = io::read_dataset(&path)?;
                    let est = estimate_from_dataset(&ds, estimator, bootstrap_reps, seed, &exec)?;
                    let family = resolve_family(&cli.family, est.dim())?;
                    calibrate_null(&est.sigma_n, &family, &measure, seed, &exec)?
                }
                _ => return Err(CliError::Data("calibrate needs either --csv or --d".into())),
            };
            io::write_output(out.as_deref(), &io::calibration_to_csv(&calib))
        }
    }
}
