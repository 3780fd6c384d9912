//! Compressed-sensing MRI reconstruction core.
//!
//! Everything here is `no_std` + `alloc`: centered FFTs, Haar wavelets and TV,
//! a small reverse-mode autodiff engine, variable-density Poisson-disk masks,
//! the single-coil forward model, the classical half-quadratic-splitting
//! solver, the unrolled network trained on the same objective, image-quality
//! metrics and a synthetic phantom generator. File formats, timing and the
//! command line live in the `hqsnet` crate.

#![no_std]

extern crate alloc;

pub mod autodiff;
pub mod clock;
pub mod error;
pub mod forward;
pub mod grid;
pub mod hqs;
pub mod metrics;
pub mod net;
pub mod numerics;
pub mod phantom;
pub mod sampling;

#[cfg(test)]
mod testutil;

pub use clock::{Clock, NoClock};
pub use error::{Error, Result};
pub use forward::Measurements;
pub use grid::{ComplexGrid, RealGrid};
pub use sampling::Mask;
