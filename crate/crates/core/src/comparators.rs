//! Baseline multiplicity procedures the adaptive test is compared against:
//! per-coordinate Wald p-values, Bonferroni, and the Cauchy combination.

use alloc::vec::Vec;

use crate::error::Error;
use crate::mvn::CovMatrix;
use crate::normal::std_normal_sf;
use crate::Result;

/// Per-coordinate Wald statistics z_j = sqrt(n)·|ψ_j|/σ_j and two-sided
/// p-values 2[1 − Φ(z_j)].
#[derive(Debug, Clone, PartialEq)]
pub struct WaldSummary {
    pub z_scores: Vec<f64>,
    pub p_values: Vec<f64>,
}

pub fn wald_pvalues(psi_n: &[f64], sigma_n: &CovMatrix, n: usize) -> Result<WaldSummary> {
    if psi_n.is_empty() {
        return Err(Error::EmptyInput);
    }
    if sigma_n.dim() != psi_n.len() {
        return Err(Error::DimensionMismatch {
            expected: psi_n.len(),
            got: sigma_n.dim(),
        });
    }
    if n < 1 {
        return Err(Error::InsufficientData { needed: 1, got: n });
    }
    let sqrt_n = libm::sqrt(n as f64);
    let mut z_scores = Vec::with_capacity(psi_n.len());
    let mut p_values = Vec::with_capacity(psi_n.len());
    for (j, &psi) in psi_n.iter().enumerate() {
        let var = sigma_n.get(j, j);
        if !(var > 0.0) || !var.is_finite() {
            return Err(Error::DegenerateVariance { coordinate: j });
        }
        let z = sqrt_n * psi.abs() / libm::sqrt(var);
        // Clamped so deep-tail z keeps p strictly positive.
        let p = (2.0 * std_normal_sf(z)).max(f64::MIN_POSITIVE).min(1.0);
        z_scores.push(z);
        p_values.push(p);
    }
    Ok(WaldSummary { z_scores, p_values })
}

/// min(1, d · min_j p_j).
pub fn bonferroni_p(p_values: &[f64]) -> Result<f64> {
    if p_values.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut min_p = f64::INFINITY;
    for &p in p_values {
        if !(p > 0.0 && p <= 1.0) {
            return Err(Error::DomainError {
                value: p,
                domain: "(0, 1]",
            });
        }
        min_p = min_p.min(p);
    }
    Ok((p_values.len() as f64 * min_p).min(1.0))
}

/// Which tangent transform the combination statistic uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CauchyForm {
    /// tan{(2p − 3/2)π}, poles at p ∈ {0, 1/2, 1}.
    #[default]
    Paper,
    /// tan{(1/2 − p)π}, poles at p ∈ {0, 1}.
    Canonical,
}

const POLE_TOL: f64 = 1e-12;

/// Cauchy combination statistic (the mean of the transformed p-values) and
/// its standard-Cauchy upper-tail p-value 1/2 − arctan(statistic)/π.
pub fn cauchy_combination(p_values: &[f64], form: CauchyForm) -> Result<(f64, f64)> {
    if p_values.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut acc = 0.0;
    for &p in p_values {
        // p = 1 (a Wald p at ψ = 0) falls through to the pole check below.
        if !(p > 0.0 && p <= 1.0) {
            return Err(Error::DomainError {
                value: p,
                domain: "(0, 1)",
            });
        }
        let near_pole = match form {
            CauchyForm::Paper => {
                p <= POLE_TOL || (p - 0.5).abs() <= POLE_TOL || p >= 1.0 - POLE_TOL
            }
            CauchyForm::Canonical => p <= POLE_TOL || p >= 1.0 - POLE_TOL,
        };
        if near_pole {
            return Err(Error::PoleInput { value: p });
        }
        let arg = match form {
            CauchyForm::Paper => (2.0 * p - 1.5) * core::f64::consts::PI,
            CauchyForm::Canonical => (0.5 - p) * core::f64::consts::PI,
        };
        acc += libm::tan(arg);
    }
    let statistic = acc / p_values.len() as f64;
    let p = 0.5 - libm::atan(statistic) / core::f64::consts::PI;
    Ok((statistic, p))
}
