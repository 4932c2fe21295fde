//! Semantic map prediction with ensemble uncertainty and confidence-bound
//! goal selection for object-goal navigation in synthetic gridworlds.
//!
//! Everything here is pure and allocation-only; file formats, the CLI and
//! parallel fan-out live in the `semnav` crate.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod grid;
pub mod math;
pub mod world;
pub mod predictor;
pub mod uncertainty;
pub mod belief;
pub mod nav;
pub mod policy;
pub mod metrics;
pub mod harness;
