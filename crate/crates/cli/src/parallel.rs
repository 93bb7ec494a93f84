//! Rayon-backed executor.
//!
//! Work items are pure functions of their index, so collecting into an
//! index-ordered vector makes parallel runs bitwise identical to sequential
//! ones. Errors are reduced to the lowest failing index for the same reason.

use normtest_core::exec::Executor;
use normtest_core::Result;
use rayon::prelude::*;

/// Executor that fans index maps over the global rayon pool.
#[derive(Debug, Clone, Copy, Default)]
pub struct RayonExec;

impl Executor for RayonExec {
    fn map_f64(&self, n: usize, f: &(dyn Fn(usize) -> f64 + Sync)) -> Vec<f64> {
        (0..n).into_par_iter().map(f).collect()
    }

    fn try_map_vec(
        &self,
        n: usize,
        f: &(dyn Fn(usize) -> Result<Vec<f64>> + Sync),
    ) -> Result<Vec<Vec<f64>>> {
        let per_item: Vec<Result<Vec<f64>>> = (0..n).into_par_iter().map(f).collect();
        per_item.into_iter().collect()
    }
}
