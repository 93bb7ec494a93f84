//! Covariance matrices, Cholesky factorization, and antithetic multivariate
//! normal sampling.
//!
//! Draws are generated by the inverse-CDF transform of stream uniforms and
//! mapped through the lower-triangular factor, so a `(seed, stream)` pair
//! fully determines every matrix bit-for-bit. Rows come in antithetic pairs:
//! row 2i+1 is the exact floating-point negation of row 2i, which later makes
//! central symmetry of the measure estimates hold exactly rather than only in
//! expectation.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::Error;
use crate::normal::draw_std_normal;
use crate::rng::SeededStream;
use crate::Result;

/// Symmetric covariance matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct CovMatrix {
    dim: usize,
    entries: Vec<f64>,
}

impl CovMatrix {
    /// Validates shape, finiteness, and symmetry (1e-12 relative).
    pub fn new(dim: usize, entries: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::EmptyInput);
        }
        if entries.len() != dim * dim {
            return Err(Error::DimensionMismatch {
                expected: dim * dim,
                got: entries.len(),
            });
        }
        for &v in &entries {
            if !v.is_finite() {
                return Err(Error::DomainError {
                    value: v,
                    domain: "finite reals",
                });
            }
        }
        for j in 0..dim {
            for k in (j + 1)..dim {
                let a = entries[j * dim + k];
                let b = entries[k * dim + j];
                if (a - b).abs() > 1e-12 * a.abs().max(1.0) {
                    return Err(Error::InvalidConfig {
                        reason: "covariance matrix not symmetric",
                    });
                }
            }
        }
        Ok(CovMatrix { dim, entries })
    }

    pub fn identity(dim: usize) -> Self {
        let mut entries = vec![0.0; dim * dim];
        for j in 0..dim {
            entries[j * dim + j] = 1.0;
        }
        CovMatrix { dim, entries }
    }

    /// (1 - rho) I + rho 11^T, the equicorrelated matrix with unit variances.
    pub fn equicorrelated(dim: usize, rho: f64) -> Result<Self> {
        if !(-1.0 < rho && rho < 1.0) {
            return Err(Error::DomainError {
                value: rho,
                domain: "(-1, 1)",
            });
        }
        let mut entries = vec![rho; dim * dim];
        for j in 0..dim {
            entries[j * dim + j] = 1.0;
        }
        Ok(CovMatrix { dim, entries })
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, j: usize, k: usize) -> f64 {
        self.entries[j * self.dim + k]
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim).map(|j| self.get(j, j)).sum()
    }
}

/// Lower-triangular Cholesky factor, with the jitter actually applied (0 when
/// the input factorized as given) and the source covariance for provenance.
#[derive(Debug, Clone)]
pub struct CholeskyFactor {
    dim: usize,
    lower: Vec<f64>,
    jitter: f64,
    source: CovMatrix,
}

impl CholeskyFactor {
    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.lower[i * self.dim + j]
    }

    /// Ridge added to the diagonal before factorization succeeded.
    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    pub fn source_cov(&self) -> &CovMatrix {
        &self.source
    }

    /// out = L z, forward substitution order.
    #[inline]
    pub fn mul_vec(&self, z: &[f64], out: &mut [f64]) {
        let d = self.dim;
        for i in 0..d {
            let row = &self.lower[i * d..i * d + i + 1];
            let mut acc = 0.0;
            for (k, &l) in row.iter().enumerate() {
                acc += l * z[k];
            }
            out[i] = acc;
        }
    }
}

pub(crate) fn try_cholesky(dim: usize, a: &[f64], ridge: f64) -> Option<Vec<f64>> {
    let mut l = vec![0.0f64; dim * dim];
    for j in 0..dim {
        let mut diag = a[j * dim + j] + ridge;
        for k in 0..j {
            diag -= l[j * dim + k] * l[j * dim + k];
        }
        if !(diag > 0.0) || !diag.is_finite() {
            return None;
        }
        let root = libm::sqrt(diag);
        l[j * dim + j] = root;
        for i in (j + 1)..dim {
            let mut acc = a[i * dim + j] + if i == j { ridge } else { 0.0 };
            for k in 0..j {
                acc -= l[i * dim + k] * l[j * dim + k];
            }
            l[i * dim + j] = acc / root;
        }
    }
    Some(l)
}

// Solves A x = b for symmetric positive definite A via Cholesky with
// forward and back substitution. None when A is not PD.
pub(crate) fn solve_spd(dim: usize, a: &[f64], b: &[f64]) -> Option<Vec<f64>> {
    let l = try_cholesky(dim, a, 0.0)?;
    let mut x = b.to_vec();
    for i in 0..dim {
        let mut acc = x[i];
        for k in 0..i {
            acc -= l[i * dim + k] * x[k];
        }
        x[i] = acc / l[i * dim + i];
    }
    for i in (0..dim).rev() {
        let mut acc = x[i];
        for k in (i + 1)..dim {
            acc -= l[k * dim + i] * x[k];
        }
        x[i] = acc / l[i * dim + i];
    }
    Some(x)
}

/// Cholesky factorization with escalating diagonal jitter.
///
/// On failure, retries with ridge eps * (trace / d) for eps in
/// {1e-10, 1e-8, 1e-6}; a matrix that resists all three escalations is
/// reported as not positive definite.
pub fn cholesky_factor(sigma: &CovMatrix) -> Result<CholeskyFactor> {
    let scale = sigma.trace() / sigma.dim() as f64;
    let mut ladder = [0.0, 1e-10, 1e-8, 1e-6];
    for eps in ladder.iter_mut() {
        *eps *= scale;
    }
    for &ridge in &ladder {
        if let Some(lower) = try_cholesky(sigma.dim(), sigma.entries(), ridge) {
            return Ok(CholeskyFactor {
                dim: sigma.dim(),
                lower,
                jitter: ridge,
                source: sigma.clone(),
            });
        }
    }
    Err(Error::NotPositiveDefinite)
}

/// Standard normal innovations for m/2 antithetic pairs, kept separate from
/// [`DrawMatrix`] so callers that refactorize the covariance (permutation
/// tests under common random numbers) can reuse one set of innovations.
#[derive(Debug, Clone)]
pub struct NormalCache {
    pairs: usize,
    dim: usize,
    z: Vec<f64>,
}

impl NormalCache {
    pub fn draw(pairs: usize, dim: usize, stream: SeededStream) -> Self {
        let mut rng = stream.rng();
        let mut z = Vec::with_capacity(pairs * dim);
        for _ in 0..pairs * dim {
            z.push(draw_std_normal(&mut rng));
        }
        NormalCache { pairs, dim, z }
    }

    #[inline]
    pub fn pairs(&self) -> usize {
        self.pairs
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }
}

/// Antithetic Monte Carlo draws from N(0, Sigma), row-major m x d.
#[derive(Debug, Clone)]
pub struct DrawMatrix {
    m: usize,
    dim: usize,
    rows: Vec<f64>,
    source_cov: CovMatrix,
    source_seed: SeededStream,
}

impl DrawMatrix {
    #[inline]
    pub fn m(&self) -> usize {
        self.m
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.rows[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows_flat(&self) -> &[f64] {
        &self.rows
    }

    pub fn source_cov(&self) -> &CovMatrix {
        &self.source_cov
    }

    pub fn source_seed(&self) -> SeededStream {
        self.source_seed
    }

    // Backdoor for exercising order-statistic rules on handpicked values.
    #[cfg(test)]
    pub(crate) fn from_raw_for_tests(
        m: usize,
        dim: usize,
        rows: Vec<f64>,
        source_cov: CovMatrix,
    ) -> Self {
        assert_eq!(rows.len(), m * dim);
        DrawMatrix {
            m,
            dim,
            rows,
            source_cov,
            source_seed: SeededStream::new(0, 0),
        }
    }
}

/// Maps cached innovations through L, installing antithetic partners by exact
/// negation. The cache dimension must match the factor.
pub fn sample_mvn_from_cache(
    chol: &CholeskyFactor,
    cache: &NormalCache,
    stream: SeededStream,
) -> Result<DrawMatrix> {
    let d = chol.dim();
    if cache.dim() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: cache.dim(),
        });
    }
    let pairs = cache.pairs();
    let mut rows = vec![0.0f64; 2 * pairs * d];
    for i in 0..pairs {
        let z = &cache.z[i * d..(i + 1) * d];
        let (head, tail) = rows[2 * i * d..(2 * i + 2) * d].split_at_mut(d);
        chol.mul_vec(z, head);
        for (neg, &v) in tail.iter_mut().zip(head.iter()) {
            *neg = -v;
        }
    }
    Ok(DrawMatrix {
        m: 2 * pairs,
        dim: d,
        rows,
        source_cov: chol.source_cov().clone(),
        source_seed: stream,
    })
}

/// Draws an antithetic DrawMatrix of m rows (m even) from N(0, L L^T).
pub fn sample_mvn(chol: &CholeskyFactor, m: usize, stream: SeededStream) -> Result<DrawMatrix> {
    if m == 0 || m % 2 != 0 {
        return Err(Error::InvalidConfig {
            reason: "draw count must be even and positive",
        });
    }
    let cache = NormalCache::draw(m / 2, chol.dim(), stream);
    sample_mvn_from_cache(chol, &cache, stream)
}

/// One draw from N(0, L L^T) on its own stream (no antithetic partner);
/// used for the outer draws of the nested calibration.
pub fn sample_mvn_single(chol: &CholeskyFactor, stream: SeededStream) -> Vec<f64> {
    let d = chol.dim();
    let mut rng = stream.rng();
    let mut z = Vec::with_capacity(d);
    for _ in 0..d {
        z.push(draw_std_normal(&mut rng));
    }
    let mut out = vec![0.0; d];
    chol.mul_vec(&z, &mut out);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cov(dim: usize, entries: &[f64]) -> CovMatrix {
        CovMatrix::new(dim, entries.to_vec()).unwrap()
    }

    #[test]
    fn rejects_asymmetric_input() {
        let r = CovMatrix::new(2, vec![1.0, 0.5, 0.2, 1.0]);
        assert!(matches!(r, Err(Error::InvalidConfig { .. })));
    }

    #[test]
    fn cholesky_identity_and_diagonal() {
        let id = cholesky_factor(&CovMatrix::identity(3)).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert_eq!(id.get(i, j), want);
            }
        }
        let dg = cholesky_factor(&cov(2, &[4.0, 0.0, 0.0, 9.0])).unwrap();
        assert_eq!(dg.get(0, 0), 2.0);
        assert_eq!(dg.get(1, 1), 3.0);
        assert_eq!(dg.get(1, 0), 0.0);
        assert_eq!(dg.jitter(), 0.0);
    }

    #[test]
    fn cholesky_reconstructs_input() {
        let sigma = cov(2, &[2.0, 1.0, 1.0, 2.0]);
        let l = cholesky_factor(&sigma).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                let mut acc = 0.0;
                for k in 0..2 {
                    acc += l.get(i, k) * l.get(j, k);
                }
                let want = sigma.get(i, j);
                assert!((acc - want).abs() <= 1e-10 * (1.0 + want.abs()));
            }
        }
    }

    #[test]
    fn jitter_rescues_singular_matrix() {
        // Rank-one matrix: fails plain factorization, succeeds with ridge.
        let sigma = cov(2, &[1.0, 1.0, 1.0, 1.0]);
        let l = cholesky_factor(&sigma).unwrap();
        assert!(l.jitter() > 0.0);
        assert!(l.get(1, 1) > 0.0);
    }

    #[test]
    fn indefinite_matrix_fails_after_ladder() {
        let sigma = cov(2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(matches!(
            cholesky_factor(&sigma),
            Err(Error::NotPositiveDefinite)
        ));
    }

    #[test]
    fn antithetic_rows_negate_exactly() {
        let sigma = cov(2, &[2.0, 1.0, 1.0, 2.0]);
        let l = cholesky_factor(&sigma).unwrap();
        let draws = sample_mvn(&l, 64, SeededStream::new(5, 0)).unwrap();
        for i in 0..32 {
            for j in 0..2 {
                let a = draws.row(2 * i)[j];
                let b = draws.row(2 * i + 1)[j];
                assert_eq!(a.to_bits() ^ (1 << 63), b.to_bits());
            }
        }
    }

    #[test]
    fn sampling_is_deterministic() {
        let l = cholesky_factor(&CovMatrix::identity(3)).unwrap();
        let a = sample_mvn(&l, 100, SeededStream::new(9, 2)).unwrap();
        let b = sample_mvn(&l, 100, SeededStream::new(9, 2)).unwrap();
        assert_eq!(a.rows_flat(), b.rows_flat());
    }

    #[test]
    fn odd_draw_count_rejected() {
        let l = cholesky_factor(&CovMatrix::identity(1)).unwrap();
        assert!(sample_mvn(&l, 7, SeededStream::new(0, 0)).is_err());
    }

    #[test]
    fn sample_variance_matches_source() {
        let sigma = cov(1, &[4.0]);
        let l = cholesky_factor(&sigma).unwrap();
        let m = 200_000;
        let draws = sample_mvn(&l, m, SeededStream::new(31, 0)).unwrap();
        let mut sumsq = 0.0;
        for i in 0..m {
            let v = draws.row(i)[0];
            sumsq += v * v;
        }
        let var = sumsq / m as f64;
        assert!((3.9..=4.1).contains(&var), "var {var}");
    }

    #[test]
    fn empirical_covariance_matches_within_five_ses() {
        let sigma = cov(2, &[1.0, 0.8, 0.8, 1.0]);
        let l = cholesky_factor(&sigma).unwrap();
        let m = 200_000;
        let draws = sample_mvn(&l, m, SeededStream::new(77, 0)).unwrap();
        let mf = m as f64;
        for j in 0..2 {
            // Column means cancel exactly under antithetic pairing.
            let mean: f64 = (0..m).map(|i| draws.row(i)[j]).sum::<f64>();
            assert_eq!(mean, 0.0);
            for k in j..2 {
                let s: f64 = (0..m)
                    .map(|i| draws.row(i)[j] * draws.row(i)[k])
                    .sum::<f64>()
                    / mf;
                let want = sigma.get(j, k);
                // Var of a cross-moment of bivariate normals: sjj*skk + sjk^2.
                let se = libm::sqrt((sigma.get(j, j) * sigma.get(k, k) + want * want) / mf);
                assert!((s - want).abs() <= 5.0 * se, "({j},{k}): {s} vs {want}");
            }
        }
    }

    #[test]
    fn cache_reuse_matches_direct_sampling() {
        let l = cholesky_factor(&cov(2, &[2.0, 1.0, 1.0, 2.0])).unwrap();
        let stream = SeededStream::new(123, 4);
        let direct = sample_mvn(&l, 50, stream).unwrap();
        let cache = NormalCache::draw(25, 2, stream);
        let via_cache = sample_mvn_from_cache(&l, &cache, stream).unwrap();
        assert_eq!(direct.rows_flat(), via_cache.rows_flat());
    }
}
