//! Phase-matrix feasible sets, Rician channel synthesis and sum spectral
//! efficiency maximization for UAV downlinks through a beyond-diagonal
//! reconfigurable intelligent surface (BD-RIS).
//!
//! The crate is `no_std` and only needs an allocator. File formats, the
//! Monte-Carlo harness and the command line live in the `bdris` crate.

#![no_std]
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod channel;
pub mod error;
pub mod linalg;
pub mod objective;
pub mod optimizer;
pub mod ris;

pub use error::{Error, Result};
pub use nalgebra;
