//! Slope estimation for a univariable logistic working model under two-phase
//! sampling, with plug-in stratum weights and influence evaluations.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use super::loglinear::{expit, softplus};
use super::{column_mean_sd, if_estimate, EstimateResult};
use crate::error::Error;
use crate::Result;

/// One observed unit from a two-phase design. The pair `(w, y)` is always
/// recorded; the biomarker vector only when the unit was sampled into the
/// second phase.
#[derive(Clone, Debug)]
pub struct TwoPhaseRecord {
    /// First-phase covariate vector with finite support. Records sharing a
    /// bitwise-equal `(w, y)` pair form one sampling stratum.
    pub w: Vec<f64>,
    /// Biomarker vector, present exactly when `delta` is true.
    pub s_tilde: Option<Vec<f64>>,
    /// Second-phase sampling indicator.
    pub delta: bool,
    /// Binary outcome.
    pub y: bool,
}

const GRAD_TOL: f64 = 1e-10;
const MAX_ITER: usize = 100;
const MAX_HALVINGS: usize = 30;
const BETA_NORM_LIMIT: f64 = 50.0;

/// Stratum assignment and plug-in sampling weights.
struct Strata {
    /// Stratum id per record; ids follow first appearance.
    index: Vec<usize>,
    /// Reciprocal of the within-stratum mean of `delta`, per id.
    inv_pi: Vec<f64>,
    /// Common length of the recorded biomarker vectors.
    s_dim: usize,
}

fn prepare(records: &[TwoPhaseRecord]) -> Result<Strata> {
    if records.is_empty() {
        return Err(Error::EmptyInput);
    }
    let w_dim = records[0].w.len();
    let mut s_dim: Option<usize> = None;
    for r in records {
        if r.w.len() != w_dim {
            return Err(Error::DimensionMismatch {
                expected: w_dim,
                got: r.w.len(),
            });
        }
        for &v in &r.w {
            if !v.is_finite() {
                return Err(Error::DomainError {
                    value: v,
                    domain: "finite stratum covariates",
                });
            }
        }
        if r.delta != r.s_tilde.is_some() {
            return Err(Error::InvalidConfig {
                reason: "biomarker vector must be present exactly when delta = 1",
            });
        }
        if let Some(s) = &r.s_tilde {
            match s_dim {
                None => s_dim = Some(s.len()),
                Some(d) if d != s.len() => {
                    return Err(Error::DimensionMismatch {
                        expected: d,
                        got: s.len(),
                    })
                }
                _ => {}
            }
            for &v in s {
                if !v.is_finite() {
                    return Err(Error::DomainError {
                        value: v,
                        domain: "finite biomarkers",
                    });
                }
            }
        }
    }

    let mut ids: BTreeMap<(Vec<u64>, bool), usize> = BTreeMap::new();
    let mut index = Vec::with_capacity(records.len());
    let mut counts: Vec<(usize, usize)> = Vec::new();
    for r in records {
        let key = (r.w.iter().map(|v| v.to_bits()).collect(), r.y);
        let id = *ids.entry(key).or_insert_with(|| {
            counts.push((0, 0));
            counts.len() - 1
        });
        counts[id].0 += 1;
        counts[id].1 += usize::from(r.delta);
        index.push(id);
    }
    for (id, &(_, sampled)) in counts.iter().enumerate() {
        if sampled == 0 {
            return Err(Error::EmptyStratum { stratum: id });
        }
    }
    let inv_pi = counts
        .iter()
        .map(|&(total, sampled)| total as f64 / sampled as f64)
        .collect();
    let s_dim = s_dim.expect("every stratum holds a sampled record");
    Ok(Strata {
        index,
        inv_pi,
        s_dim,
    })
}

struct FitRow {
    record: usize,
    s: f64,
    y: f64,
    weight: f64,
}

/// Mean weighted log-likelihood of the working model at `beta`.
fn weighted_ll(rows: &[FitRow], n: f64, beta: [f64; 2]) -> f64 {
    let mut total = 0.0;
    for row in rows {
        let eta = beta[0] + beta[1] * row.s;
        total += row.weight * (row.y * eta - softplus(eta));
    }
    total / n
}

/// Mean weighted score, and the entries `[m00, m01, m11]` of the weighted
/// mean of `mu (1 - mu) (1, s)(1, s)^T`, both at `beta`.
fn score_and_curvature(rows: &[FitRow], n: f64, beta: [f64; 2]) -> ([f64; 2], [f64; 3]) {
    let (mut g0, mut g1) = (0.0, 0.0);
    let (mut m00, mut m01, mut m11) = (0.0, 0.0, 0.0);
    for row in rows {
        let mu = expit(beta[0] + beta[1] * row.s);
        let wr = row.weight * (row.y - mu);
        g0 += wr;
        g1 += wr * row.s;
        let wv = row.weight * mu * (1.0 - mu);
        m00 += wv;
        m01 += wv * row.s;
        m11 += wv * row.s * row.s;
    }
    ([g0 / n, g1 / n], [m00 / n, m01 / n, m11 / n])
}

/// Newton ascent with step halving. Returns the maximizer and the curvature
/// matrix evaluated there.
fn newton(rows: &[FitRow], n: f64) -> Result<([f64; 2], [f64; 3])> {
    let mut beta = [0.0f64; 2];
    let mut ll = weighted_ll(rows, n, beta);
    for _ in 0..MAX_ITER {
        let (grad, curv) = score_and_curvature(rows, n, beta);
        if libm::hypot(grad[0], grad[1]) <= GRAD_TOL {
            return Ok((beta, curv));
        }
        let det = curv[0] * curv[2] - curv[1] * curv[1];
        if !(det > 0.0) {
            return Err(Error::Separation);
        }
        let step = [
            (curv[2] * grad[0] - curv[1] * grad[1]) / det,
            (curv[0] * grad[1] - curv[1] * grad[0]) / det,
        ];
        let mut scale = 1.0;
        let mut moved = false;
        for _ in 0..MAX_HALVINGS {
            let cand = [beta[0] + scale * step[0], beta[1] + scale * step[1]];
            let cand_ll = weighted_ll(rows, n, cand);
            if cand_ll >= ll - 1e-12 {
                beta = cand;
                ll = cand_ll;
                moved = true;
                break;
            }
            scale *= 0.5;
        }
        if !moved || libm::hypot(beta[0], beta[1]) > BETA_NORM_LIMIT {
            return Err(Error::Separation);
        }
    }
    Err(Error::Separation)
}

fn fit_slope(
    records: &[TwoPhaseRecord],
    strata: &Strata,
    j: usize,
) -> Result<([f64; 2], Vec<f64>)> {
    if j >= strata.s_dim {
        return Err(Error::InvalidConfig {
            reason: "biomarker index out of range",
        });
    }
    let n = records.len();
    let mut rows = Vec::new();
    for (i, r) in records.iter().enumerate() {
        if let Some(s) = &r.s_tilde {
            rows.push(FitRow {
                record: i,
                s: s[j],
                y: if r.y { 1.0 } else { 0.0 },
                weight: strata.inv_pi[strata.index[i]],
            });
        }
    }
    if rows.len() < 2 {
        return Err(Error::InsufficientData {
            needed: 2,
            got: rows.len(),
        });
    }
    let (_, sd) = column_mean_sd(rows.iter().map(|row| row.s), rows.len());
    if sd <= 0.0 {
        return Err(Error::DegenerateCovariate { column: j });
    }

    let nf = n as f64;
    let (beta, curv) = newton(&rows, nf)?;
    let det = curv[0] * curv[2] - curv[1] * curv[1];
    if !(det > 0.0) {
        return Err(Error::Separation);
    }
    // Second row of the inverse curvature matrix.
    let a = -curv[1] / det;
    let b = curv[0] / det;

    let n_strata = strata.inv_pi.len();
    let mut xi = vec![0.0; n_strata];
    let mut sampled = vec![0usize; n_strata];
    let mut score = vec![0.0; n];
    for row in &rows {
        let mu = expit(beta[0] + beta[1] * row.s);
        let value = (a + b * row.s) * (row.y - mu);
        score[row.record] = value;
        let id = strata.index[row.record];
        xi[id] += value;
        sampled[id] += 1;
    }
    for (sum, count) in xi.iter_mut().zip(&sampled) {
        *sum /= *count as f64;
    }

    let mut phi = vec![0.0; n];
    for (i, r) in records.iter().enumerate() {
        let id = strata.index[i];
        let ipw = if r.delta { strata.inv_pi[id] } else { 0.0 };
        phi[i] = ipw * score[i] + (1.0 - ipw) * xi[id];
    }
    Ok((beta, phi))
}

/// Fits the working-model intercept and slope for biomarker `j` by weighted
/// logistic regression on the sampled records, weights being reciprocals of
/// the within-stratum sampling rates, and returns one influence evaluation
/// per record alongside.
///
/// The influence value of a sampled record is its weighted score contribution
/// plus a complementary-weight share of its stratum score mean; an unsampled
/// record receives the stratum score mean. Values are uncentered; covariance
/// assembly centers them.
pub fn two_phase_logistic_estimator(
    records: &[TwoPhaseRecord],
    j: usize,
) -> Result<([f64; 2], Vec<f64>)> {
    let strata = prepare(records)?;
    fit_slope(records, &strata, j)
}

/// Runs [`two_phase_logistic_estimator`] for every biomarker coordinate and
/// assembles the slopes and influence evaluations into an estimate with an
/// influence-function covariance.
pub fn two_phase_estimate(records: &[TwoPhaseRecord]) -> Result<EstimateResult> {
    let strata = prepare(records)?;
    if strata.s_dim == 0 {
        return Err(Error::InvalidConfig {
            reason: "biomarker vectors are empty",
        });
    }
    let n = records.len();
    let d = strata.s_dim;
    let mut psi_n = vec![0.0; d];
    let mut if_matrix = vec![0.0; n * d];
    for j in 0..d {
        let (beta, phi) = fit_slope(records, &strata, j)?;
        psi_n[j] = beta[1];
        for (i, value) in phi.into_iter().enumerate() {
            if_matrix[i * d + j] = value;
        }
    }
    if_estimate(psi_n, n, if_matrix)
}
