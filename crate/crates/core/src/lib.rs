#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod comparators;
pub mod error;
pub mod estimators;
pub mod exec;
pub mod measures;
pub mod mvn;
pub mod normal;
pub mod norms;
pub mod rng;
pub mod testkit;

pub use error::Error;

/// Crate-wide result alias.
pub type Result<T> = core::result::Result<T, Error>;
