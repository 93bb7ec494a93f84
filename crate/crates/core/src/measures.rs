//! Local measures of test inefficiency evaluated against a shared draw
//! matrix: critical values, the acceptance-rate measure, and the
//! multiplicative-factor measure.
//!
//! The acceptance rate at shift x is the fraction of draws u_i with
//! φ(u_i + x) ≤ c₀, where c₀ is the ⌈(1−α)m⌉-th smallest of the unshifted
//! norm values. The multiplicative factor is the smallest s ≥ 0 at which the
//! acceptance rate along the ray s·x falls to τ; the same draws are reused at
//! every candidate s, which keeps the profile monotone up to tie granularity
//! and the scaling identity exact.
//!
//! Internally every norm is compared in a powered "comparison space" (the
//! sum of p-th powers for ℓ_p, the largest k squared components for ȷ_k)
//! against the identically transformed threshold. This makes the tie
//! convention at c₀ exact by construction, avoids root evaluations in the
//! hot loop, and, combined with a per-calibration scale factor and a
//! max-component prefilter, cannot overflow for any finite input.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::Error;
use crate::mvn::DrawMatrix;
use crate::norms::NormSpec;
use crate::Result;

/// Which measure an evaluation produces.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeasureKind {
    AcceptanceRate,
    MultiplicativeFactor,
}

/// Shared configuration for measure evaluation and null calibration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeasureConfig {
    pub kind: MeasureKind,
    /// Nominal type I error of the acceptance region.
    pub alpha: f64,
    /// Type II error target of the multiplicative-factor measure.
    pub tau: f64,
    /// Draws in the inner matrix used for Γ evaluation and c₀.
    pub m_inner: usize,
    /// Outer null draws used to calibrate the adaptive statistic.
    pub m_outer: usize,
    /// Relative tolerance of the bisection for the multiplicative factor.
    pub bisect_rel_tol: f64,
    /// Cap on bracket doublings before the factor is reported as +∞.
    pub max_doublings: u32,
}

impl Default for MeasureConfig {
    fn default() -> Self {
        MeasureConfig {
            kind: MeasureKind::AcceptanceRate,
            alpha: 0.05,
            tau: 0.2,
            m_inner: 5000,
            m_outer: 2000,
            bisect_rel_tol: 1e-6,
            max_doublings: 60,
        }
    }
}

impl MeasureConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidConfig {
                reason: "alpha must lie in (0, 1)",
            });
        }
        if !(self.tau > 0.0 && self.tau < 1.0 - self.alpha) {
            return Err(Error::InvalidConfig {
                reason: "tau must lie in (0, 1 - alpha)",
            });
        }
        for m in [self.m_inner, self.m_outer] {
            if m < 2 || m % 2 != 0 {
                return Err(Error::InvalidConfig {
                    reason: "draw budgets must be even and >= 2",
                });
            }
        }
        if !(self.bisect_rel_tol > 0.0 && self.bisect_rel_tol < 1.0) {
            return Err(Error::InvalidConfig {
                reason: "bisect_rel_tol must lie in (0, 1)",
            });
        }
        if self.max_doublings == 0 {
            return Err(Error::InvalidConfig {
                reason: "max_doublings must be >= 1",
            });
        }
        Ok(())
    }
}

// How a norm is evaluated in comparison space.
#[derive(Debug, Clone, Copy)]
enum CmpKind {
    /// Sum of integer p-th powers of scaled magnitudes.
    PowInt(u32),
    /// Sum of real p-th powers of scaled magnitudes.
    PowReal(f64),
    /// Largest magnitude, unscaled.
    MaxAbs,
    /// Sum of the k largest scaled squared magnitudes.
    TopSquares(usize),
}

/// Critical value c₀ for one norm, tied to the draw matrix it came from.
#[derive(Debug, Clone)]
pub struct NormCalibration {
    spec: NormSpec,
    c0: f64,
    sorted_norm_values: Vec<f64>,
    cmp: CmpKind,
    /// Order statistic in comparison space; ties compare exactly.
    cmp_threshold: f64,
    /// Max-component prefilter bound, slightly above c0 so it only discards
    /// rows the full comparison would certainly reject.
    guard: f64,
    /// Per-calibration magnitude scale shared by draws and shifts.
    inv_scale: f64,
    m: usize,
}

impl NormCalibration {
    pub fn spec(&self) -> NormSpec {
        self.spec
    }

    /// Critical value on the norm's own scale.
    pub fn c0(&self) -> f64 {
        self.c0
    }

    /// Ascending norm values of the calibration draws.
    pub fn sorted_norm_values(&self) -> &[f64] {
        &self.sorted_norm_values
    }

    fn check_draws(&self, draws: &DrawMatrix) -> Result<()> {
        if draws.m() != self.m {
            return Err(Error::DimensionMismatch {
                expected: self.m,
                got: draws.m(),
            });
        }
        Ok(())
    }
}

fn cmp_kind(spec: NormSpec) -> CmpKind {
    match spec {
        NormSpec::Lp(p) => {
            if p == libm::trunc(p) && p <= 64.0 {
                CmpKind::PowInt(p as u32)
            } else {
                CmpKind::PowReal(p)
            }
        }
        NormSpec::LInf => CmpKind::MaxAbs,
        NormSpec::SumSquares(k) => CmpKind::TopSquares(k),
    }
}

#[inline]
fn powi(x: f64, mut e: u32) -> f64 {
    let mut base = x;
    let mut acc = 1.0;
    while e > 0 {
        if e & 1 == 1 {
            acc *= base;
        }
        base *= base;
        e >>= 1;
    }
    acc
}

// Maps a comparison-space value back to the norm's own scale.
fn cmp_to_user(cmp: CmpKind, scale: f64, t: f64) -> f64 {
    match cmp {
        CmpKind::PowInt(1) => scale * t,
        CmpKind::PowInt(2) => scale * libm::sqrt(t),
        CmpKind::PowInt(e) => scale * libm::pow(t, 1.0 / e as f64),
        CmpKind::PowReal(p) => scale * libm::pow(t, 1.0 / p),
        CmpKind::MaxAbs => t,
        CmpKind::TopSquares(_) => scale * libm::sqrt(t),
    }
}

// Scratch for one row: magnitudes in coordinate order, the running max, and
// (on demand) descending sorted scaled squares with prefix sums.
struct RowScratch {
    scaled_abs: Vec<f64>,
    sq_prefix: Vec<f64>,
    sq_sorted: Vec<f64>,
    maxabs: f64,
    squares_ready: bool,
}

impl RowScratch {
    fn new(dim: usize) -> Self {
        RowScratch {
            scaled_abs: vec![0.0; dim],
            sq_prefix: vec![0.0; dim + 1],
            sq_sorted: vec![0.0; dim],
            maxabs: 0.0,
            squares_ready: false,
        }
    }

    #[inline]
    fn load(&mut self, row: &[f64], shift: &[f64], inv_scale: f64) {
        let mut maxabs = 0.0f64;
        for ((dst, &u), &x) in self.scaled_abs.iter_mut().zip(row).zip(shift) {
            let a = (u + x).abs();
            if a > maxabs {
                maxabs = a;
            }
            *dst = a * inv_scale;
        }
        self.maxabs = maxabs;
        self.squares_ready = false;
    }

    #[inline]
    fn top_squares(&mut self, k: usize) -> f64 {
        if !self.squares_ready {
            for (dst, &a) in self.sq_sorted.iter_mut().zip(&self.scaled_abs) {
                *dst = a * a;
            }
            self.sq_sorted.sort_unstable_by(|a, b| b.total_cmp(a));
            let mut acc = 0.0;
            self.sq_prefix[0] = 0.0;
            for (i, &s) in self.sq_sorted.iter().enumerate() {
                acc += s;
                self.sq_prefix[i + 1] = acc;
            }
            self.squares_ready = true;
        }
        self.sq_prefix[k]
    }
}

// Counts, for each calibration, the rows with φ(row + shift) ≤ c₀.
// All calibrations must come from the same draws (same m, scale).
fn count_accepted(
    cals: &[&NormCalibration],
    draws: &DrawMatrix,
    shift: &[f64],
    counts: &mut [u64],
) {
    let inv_scale = cals[0].inv_scale;
    let mut scratch = RowScratch::new(draws.dim());
    counts.iter_mut().for_each(|c| *c = 0);
    for i in 0..draws.m() {
        scratch.load(draws.row(i), shift, inv_scale);
        for (slot, cal) in counts.iter_mut().zip(cals) {
            if scratch.maxabs > cal.guard {
                continue;
            }
            let t = match cal.cmp {
                CmpKind::PowInt(1) => scratch.scaled_abs.iter().sum(),
                CmpKind::PowInt(2) => scratch.scaled_abs.iter().map(|&a| a * a).sum(),
                CmpKind::PowInt(e) => scratch.scaled_abs.iter().map(|&a| powi(a, e)).sum(),
                CmpKind::PowReal(p) => scratch.scaled_abs.iter().map(|&a| libm::pow(a, p)).sum(),
                CmpKind::MaxAbs => scratch.maxabs,
                CmpKind::TopSquares(k) => scratch.top_squares(k),
            };
            if t <= cal.cmp_threshold {
                *slot += 1;
            }
        }
    }
}

// ceil(frac * m) as a 1-based order-statistic index, snapped to the nearest
// integer first so float dust in frac cannot shift the index.
fn ceil_index(frac: f64, m: usize) -> usize {
    let t = frac * m as f64;
    let near = libm::round(t);
    let t = if (t - near).abs() <= 1e-9 * (m as f64).max(1.0) {
        near
    } else {
        t
    };
    (libm::ceil(t) as usize).clamp(1, m)
}

/// Calibrates several norms against one draw matrix in a single pass.
pub fn calibrate_family(
    specs: &[NormSpec],
    draws: &DrawMatrix,
    alpha: f64,
) -> Result<Vec<NormCalibration>> {
    if specs.is_empty() {
        return Err(Error::EmptyInput);
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::DomainError {
            value: alpha,
            domain: "(0, 1)",
        });
    }
    let m = draws.m();
    let d = draws.dim();
    if m == 0 {
        return Err(Error::EmptyInput);
    }
    let scale = {
        let s = libm::sqrt(draws.source_cov().trace() / d as f64);
        if s > 0.0 && s.is_finite() {
            s
        } else {
            1.0
        }
    };
    let inv_scale = 1.0 / scale;
    let idx = ceil_index(1.0 - alpha, m);

    let mut out = Vec::with_capacity(specs.len());
    for &spec in specs {
        // Validate against the ambient dimension before any evaluation.
        crate::norms::evaluate(spec, &vec![0.0; d])?;
        let cmp = cmp_kind(spec);
        let mut scratch = RowScratch::new(d);
        let zero_shift = vec![0.0; d];
        let mut cmp_values = Vec::with_capacity(m);
        for i in 0..m {
            scratch.load(draws.row(i), &zero_shift, inv_scale);
            let t = match cmp {
                CmpKind::PowInt(1) => scratch.scaled_abs.iter().sum(),
                CmpKind::PowInt(2) => scratch.scaled_abs.iter().map(|&a| a * a).sum(),
                CmpKind::PowInt(e) => scratch.scaled_abs.iter().map(|&a| powi(a, e)).sum(),
                CmpKind::PowReal(p) => scratch.scaled_abs.iter().map(|&a| libm::pow(a, p)).sum(),
                CmpKind::MaxAbs => scratch.maxabs,
                CmpKind::TopSquares(k) => scratch.top_squares(k),
            };
            cmp_values.push(t);
        }
        cmp_values.sort_unstable_by(f64::total_cmp);
        let cmp_threshold = cmp_values[idx - 1];
        let sorted_norm_values: Vec<f64> = cmp_values
            .iter()
            .map(|&t| cmp_to_user(cmp, scale, t))
            .collect();
        let c0 = sorted_norm_values[idx - 1];
        out.push(NormCalibration {
            spec,
            c0,
            sorted_norm_values,
            cmp,
            cmp_threshold,
            guard: c0 * (1.0 + 1e-12),
            inv_scale,
            m,
        });
    }
    Ok(out)
}

/// Critical value for a single norm: the ⌈(1−α)m⌉-th smallest norm value
/// over the draws.
pub fn critical_value(spec: NormSpec, draws: &DrawMatrix, alpha: f64) -> Result<NormCalibration> {
    let mut v = calibrate_family(&[spec], draws, alpha)?;
    Ok(v.pop().unwrap())
}

/// Acceptance-rate measure: the fraction of draws with φ(u_i + x) ≤ c₀.
/// Ties at c₀ count as accepted.
pub fn acceptance_rate(x: &[f64], cal: &NormCalibration, draws: &DrawMatrix) -> Result<f64> {
    cal.check_draws(draws)?;
    if x.len() != draws.dim() {
        return Err(Error::DimensionMismatch {
            expected: draws.dim(),
            got: x.len(),
        });
    }
    for &v in x {
        if !v.is_finite() {
            return Err(Error::DomainError {
                value: v,
                domain: "finite reals",
            });
        }
    }
    let mut counts = [0u64];
    count_accepted(&[cal], draws, x, &mut counts);
    Ok(counts[0] as f64 / draws.m() as f64)
}

// Acceptance count along the ray t * direction, as a fraction of m.
fn lambda_on_ray(
    cal: &NormCalibration,
    draws: &DrawMatrix,
    direction: &[f64],
    t: f64,
    shift_buf: &mut [f64],
) -> f64 {
    for (dst, &v) in shift_buf.iter_mut().zip(direction) {
        *dst = t * v;
    }
    let mut counts = [0u64];
    count_accepted(&[cal], draws, shift_buf, &mut counts);
    counts[0] as f64 / draws.m() as f64
}

/// Multiplicative-factor measure: min{s ≥ 0 : acceptance_rate(s·x) ≤ τ}.
///
/// The search runs along the unit direction x/‖x‖₂ (bracket [0, 1] in ray
/// length, doubled until the acceptance rate falls to τ, then bisection to
/// `bisect_rel_tol`), and the found ray length is divided by ‖x‖₂ at the
/// end. Working on the normalized ray keeps the query points, and therefore
/// the result, exactly proportional under x → βx, which is what makes the
/// scaling identity hold to bisection resolution. Returns +∞ when x = 0 or
/// when no bracket is found within `max_doublings`.
pub fn multiplicative_factor(
    x: &[f64],
    cal: &NormCalibration,
    draws: &DrawMatrix,
    cfg: &MeasureConfig,
) -> Result<f64> {
    cal.check_draws(draws)?;
    cfg.validate()?;
    if x.len() != draws.dim() {
        return Err(Error::DimensionMismatch {
            expected: draws.dim(),
            got: x.len(),
        });
    }
    for &v in x {
        if !v.is_finite() {
            return Err(Error::DomainError {
                value: v,
                domain: "finite reals",
            });
        }
    }
    let r = crate::norms::evaluate(NormSpec::Lp(2.0), x)?;
    if r == 0.0 {
        return Ok(f64::INFINITY);
    }
    let direction: Vec<f64> = x.iter().map(|&v| v / r).collect();
    let mut shift_buf = vec![0.0; x.len()];
    let tau = cfg.tau;

    // Bracket: lo keeps Λ̂ > τ, hi is the first point with Λ̂ ≤ τ.
    let mut lo = 0.0f64;
    let mut hi = 1.0f64;
    let mut lam_hi = lambda_on_ray(cal, draws, &direction, hi, &mut shift_buf);
    let mut doublings = 0;
    while lam_hi > tau {
        if doublings >= cfg.max_doublings {
            return Ok(f64::INFINITY);
        }
        lo = hi;
        hi *= 2.0;
        lam_hi = lambda_on_ray(cal, draws, &direction, hi, &mut shift_buf);
        doublings += 1;
    }

    // Bisection; the cap covers subnormal roots where relative width stalls.
    let mut iters = 0u32;
    while hi - lo > cfg.bisect_rel_tol * hi && iters < 2000 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let lam = lambda_on_ray(cal, draws, &direction, mid, &mut shift_buf);
        if lam <= tau {
            hi = mid;
        } else {
            lo = mid;
        }
        iters += 1;
    }
    Ok(hi / r)
}

/// Γ values for every calibrated norm at a common shift, under the measure
/// selected by `cfg.kind`. Acceptance rates for the whole family cost one
/// pass over the draws.
pub fn measure_batch(
    x: &[f64],
    cals: &[NormCalibration],
    draws: &DrawMatrix,
    cfg: &MeasureConfig,
) -> Result<Vec<f64>> {
    if cals.is_empty() {
        return Err(Error::EmptyInput);
    }
    match cfg.kind {
        MeasureKind::AcceptanceRate => {
            for cal in cals {
                cal.check_draws(draws)?;
            }
            if x.len() != draws.dim() {
                return Err(Error::DimensionMismatch {
                    expected: draws.dim(),
                    got: x.len(),
                });
            }
            for &v in x {
                if !v.is_finite() {
                    return Err(Error::DomainError {
                        value: v,
                        domain: "finite reals",
                    });
                }
            }
            let refs: Vec<&NormCalibration> = cals.iter().collect();
            let mut counts = vec![0u64; cals.len()];
            count_accepted(&refs, draws, x, &mut counts);
            let m = draws.m() as f64;
            Ok(counts.into_iter().map(|c| c as f64 / m).collect())
        }
        MeasureKind::MultiplicativeFactor => cals
            .iter()
            .map(|cal| multiplicative_factor(x, cal, draws, cfg))
            .collect(),
    }
}
