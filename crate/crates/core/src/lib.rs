//! Hidden deterministic relations in rank-deficient stationary processes.

pub mod cli;
pub mod error;
pub mod exec;
pub mod feedback;
pub mod fixtures;
pub mod linalg;
pub mod lti;
pub mod relation;
pub mod sampling;
pub mod spectral;

pub use error::{Error, Result};
pub use exec::Exec;
pub use linalg::{CMatrix, Matrix, Tolerances};
pub use lti::{CtModel, StateSpace};
