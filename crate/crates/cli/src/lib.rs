//! Command-line front end and simulation harness for `normtest-core`.
//!
//! The library half exposes the pieces the binary is made of so integration
//! tests can drive them directly: simulation-study data generators and the
//! replicate runner ([`harness`]), CSV dataset IO ([`io`]), JSON report
//! shaping ([`report`]), a rayon-backed executor ([`parallel`]), and the
//! argument surface itself ([`cli`]).
//!
//! Every entry point is deterministic in the seed: fixed-seed runs produce
//! byte-identical output regardless of thread count.

pub mod cli;
pub mod error;
pub mod harness;
pub mod io;
pub mod parallel;
pub mod report;

pub use error::CliError;
