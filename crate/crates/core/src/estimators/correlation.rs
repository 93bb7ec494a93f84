//! Marginal correlation estimator: ψ_j = corr(W_j, Y) with the classical
//! correlation influence function.

use alloc::vec;
use alloc::vec::Vec;

use super::{column_mean_sd, if_estimate, EstimateResult};
use crate::error::Error;
use crate::Result;

/// ψ_j = sample correlation of column j of w with y.
///
/// The influence function is evaluated at the empirically standardized
/// coordinates: φ_ij = z_w·z_y − (ρ̂_j/2)(z_w² + z_y²), which is exactly
/// mean-zero in the sample up to roundoff.
pub fn correlation_estimator(w: &[f64], n: usize, d: usize, y: &[f64]) -> Result<EstimateResult> {
    if n < 3 {
        return Err(Error::InsufficientData { needed: 3, got: n });
    }
    if d == 0 {
        return Err(Error::EmptyInput);
    }
    if w.len() != n * d {
        return Err(Error::DimensionMismatch {
            expected: n * d,
            got: w.len(),
        });
    }
    if y.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: y.len(),
        });
    }
    for &v in w.iter().chain(y) {
        if !v.is_finite() {
            return Err(Error::DomainError {
                value: v,
                domain: "finite reals",
            });
        }
    }

    let (y_mean, y_sd) = column_mean_sd(y.iter().copied(), n);
    if y_sd == 0.0 {
        return Err(Error::DegenerateOutcome);
    }
    let zy: Vec<f64> = y.iter().map(|&v| (v - y_mean) / y_sd).collect();

    let mut psi = vec![0.0; d];
    let mut zw = vec![0.0; n * d];
    for j in 0..d {
        let col = w.iter().skip(j).step_by(d).copied();
        let (mean, sd) = column_mean_sd(col, n);
        if sd == 0.0 {
            return Err(Error::DegenerateCovariate { column: j });
        }
        let mut rho = 0.0;
        for i in 0..n {
            let z = (w[i * d + j] - mean) / sd;
            zw[i * d + j] = z;
            rho += z * zy[i];
        }
        psi[j] = rho / n as f64;
    }

    let mut if_matrix = vec![0.0; n * d];
    for i in 0..n {
        for j in 0..d {
            let zwv = zw[i * d + j];
            let zyv = zy[i];
            if_matrix[i * d + j] = zwv * zyv - 0.5 * psi[j] * (zwv * zwv + zyv * zyv);
        }
    }
    if_estimate(psi, n, if_matrix)
}
