//! Pluggable execution strategy for embarrassingly parallel index loops.
//!
//! Core algorithms express their parallel sections as pure index-to-value
//! maps through this trait and default to sequential evaluation, keeping
//! the crate free of threading machinery. A std host can override both
//! methods with a work-stealing pool; results are collected by index, so
//! any implementation produces the same output in the same order.

use alloc::vec::Vec;

use crate::Result;

pub trait Executor: Sync {
    fn map_f64(&self, n: usize, f: &(dyn Fn(usize) -> f64 + Sync)) -> Vec<f64> {
        (0..n).map(f).collect()
    }

    fn try_map_vec(
        &self,
        n: usize,
        f: &(dyn Fn(usize) -> Result<Vec<f64>> + Sync),
    ) -> Result<Vec<Vec<f64>>> {
        (0..n).map(f).collect()
    }
}

/// In-order evaluation on the calling thread.
pub struct SequentialExec;

impl Executor for SequentialExec {}
