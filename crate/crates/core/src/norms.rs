//! Candidate norm family: ℓ_p norms and sum-of-squares norms.
//!
//! The sum-of-squares norm ȷ_k is the square root of the sum of the k
//! largest squared components; ȷ_1 is the max norm and ȷ_d the Euclidean
//! norm. Every evaluation first scales by the largest absolute component,
//! so no admissible input can overflow, and sums run over the components in
//! a canonical sorted order, which makes permutation invariance and the
//! family identities (ȷ_1 = ℓ_∞, ȷ_d = ℓ_2) hold exactly instead of only
//! up to rounding.

use alloc::string::String;
use alloc::vec::Vec;

use crate::error::Error;
use crate::Result;

/// One member of the candidate family.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NormSpec {
    /// ℓ_p with finite exponent p >= 1.
    Lp(f64),
    /// ℓ_∞, kept as its own variant so p never appears as a large float.
    LInf,
    /// ȷ_k: sqrt of the sum of the k largest squared components, 1 <= k <= d.
    SumSquares(usize),
}

/// Which built-in family to construct.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FamilyKind {
    Lp,
    SumSquares,
}

impl NormSpec {
    /// CLI name: "l1", "l2", "linf", "ssq:3", ...
    pub fn name(&self) -> String {
        match self {
            NormSpec::Lp(p) => {
                if *p == libm::trunc(*p) && *p < 1e15 {
                    alloc::format!("l{}", *p as u64)
                } else {
                    alloc::format!("l{p}")
                }
            }
            NormSpec::LInf => String::from("linf"),
            NormSpec::SumSquares(k) => alloc::format!("ssq:{k}"),
        }
    }

    /// Parses a CLI name. Accepts "linf", "l<p>" with integer p >= 1, and
    /// "ssq:<k>" with integer k >= 1.
    pub fn parse(name: &str) -> Result<Self> {
        if name == "linf" {
            return Ok(NormSpec::LInf);
        }
        if let Some(rest) = name.strip_prefix("ssq:") {
            return match rest.parse::<usize>() {
                Ok(k) if k >= 1 => Ok(NormSpec::SumSquares(k)),
                _ => Err(Error::InvalidNorm {
                    reason: "ssq index must be a positive integer",
                }),
            };
        }
        if let Some(rest) = name.strip_prefix('l') {
            return match rest.parse::<u32>() {
                Ok(p) if p >= 1 => Ok(NormSpec::Lp(p as f64)),
                _ => Err(Error::InvalidNorm {
                    reason: "lp exponent must be an integer >= 1",
                }),
            };
        }
        Err(Error::InvalidNorm {
            reason: "unrecognized norm name",
        })
    }

    fn validate(&self, dim: usize) -> Result<()> {
        match self {
            NormSpec::Lp(p) => {
                if !(p.is_finite() && *p >= 1.0) {
                    return Err(Error::InvalidNorm {
                        reason: "lp exponent must be finite and >= 1",
                    });
                }
            }
            NormSpec::LInf => {}
            NormSpec::SumSquares(k) => {
                if *k == 0 {
                    return Err(Error::InvalidNorm {
                        reason: "ssq index must be >= 1",
                    });
                }
                if *k > dim {
                    return Err(Error::DimensionMismatch {
                        expected: dim,
                        got: *k,
                    });
                }
            }
        }
        Ok(())
    }
}

// x^e for small integer e by binary exponentiation (f64::powi is std-only).
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

/// Evaluates a norm. Overflow-safe for every p: components are scaled by the
/// largest absolute value before powers are taken.
pub fn evaluate(spec: NormSpec, x: &[f64]) -> Result<f64> {
    spec.validate(x.len())?;
    if x.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut maxabs = 0.0f64;
    for &v in x {
        if !v.is_finite() {
            return Err(Error::DomainError {
                value: v,
                domain: "finite reals",
            });
        }
        let a = v.abs();
        if a > maxabs {
            maxabs = a;
        }
    }
    if maxabs == 0.0 {
        return Ok(0.0);
    }
    if let NormSpec::LInf = spec {
        return Ok(maxabs);
    }
    // Canonical ascending order of scaled magnitudes: sums become independent
    // of the input's component order, and the ssq/lp identities are exact.
    let mut scaled: Vec<f64> = x.iter().map(|&v| v.abs() / maxabs).collect();
    scaled.sort_unstable_by(f64::total_cmp);
    let d = scaled.len();
    let value = match spec {
        NormSpec::Lp(p) => {
            let sum: f64 = if p == 1.0 {
                scaled.iter().sum()
            } else if p == libm::trunc(p) && p <= 64.0 {
                let e = p as u32;
                scaled.iter().map(|&t| powi(t, e)).sum()
            } else {
                scaled.iter().map(|&t| libm::pow(t, p)).sum()
            };
            if p == 1.0 {
                maxabs * sum
            } else if p == 2.0 {
                maxabs * libm::sqrt(sum)
            } else {
                maxabs * libm::pow(sum, 1.0 / p)
            }
        }
        NormSpec::SumSquares(k) => {
            let sum: f64 = scaled[d - k..].iter().map(|&t| t * t).sum();
            maxabs * libm::sqrt(sum)
        }
        NormSpec::LInf => unreachable!(),
    };
    Ok(value)
}

/// The built-in candidate families.
///
/// `Lp` is {ℓ_1, ℓ_2, ℓ_4, ℓ_6, ℓ_∞} at every dimension. `SumSquares` uses
/// a 6-point grid of k values evenly spaced from 1 to d, rounded to the
/// nearest integer and deduplicated; at d = 10, 50, 100 this yields
/// {1,3,5,6,8,10}, {1,11,21,30,40,50}, and {1,21,41,60,80,100}.
pub fn default_family(kind: FamilyKind, d: usize) -> Vec<NormSpec> {
    match kind {
        FamilyKind::Lp => {
            alloc::vec![
                NormSpec::Lp(1.0),
                NormSpec::Lp(2.0),
                NormSpec::Lp(4.0),
                NormSpec::Lp(6.0),
                NormSpec::LInf,
            ]
        }
        FamilyKind::SumSquares => {
            let mut ks: Vec<usize> = Vec::with_capacity(6);
            let step = (d as f64 - 1.0) / 5.0;
            for i in 0..6 {
                let k = libm::round(1.0 + i as f64 * step) as usize;
                let k = k.clamp(1, d);
                if ks.last() != Some(&k) {
                    ks.push(k);
                }
            }
            ks.into_iter().map(NormSpec::SumSquares).collect()
        }
    }
}
