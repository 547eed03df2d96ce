//! Moments of level-set counts and measures of stationary Gaussian processes
//! and fields: Kac-Rice integrands, Geman-type convergence classification, and
//! Monte Carlo ground truth.

pub mod covmodels;
pub mod error;
pub mod field;
pub mod gausscond;
pub mod kacrice;
pub mod quad;
pub mod simulate;
pub mod special;
pub mod stats;
pub mod validation;

pub use error::{Error, Result};
