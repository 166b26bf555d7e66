//! Positive linear operator sequences on sampled functions, summability
//! methods as residual functionals, and Korovkin-type diagnostics.

pub mod cli;
pub mod error;
pub mod funcspace;
pub mod korovkin;
pub mod operators;
pub mod summability;

pub use error::{Error, Result};
