//! Nuclear norm subspace identification of discrete-time LTI systems.
//!
//! The identification problem is posed as a convex program over the
//! predicted outputs and the Markov parameters of an observer, solved by
//! ADMM with singular value thresholding; system matrices are then read
//! off the low-rank solution.

pub mod admm;
pub mod cli;
pub mod error;
pub mod extraction;
pub mod linalg;
pub mod model;
pub mod pipeline;
pub mod structured;
pub mod synth;

pub use error::{Error, Result};
