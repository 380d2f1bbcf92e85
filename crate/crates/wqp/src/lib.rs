//! Elliptic theta functions, vertex-type R-matrices, exchange structure
//! functions, and mode-expansion coefficient tables.

pub mod error;
pub mod exec;
pub mod modes;
pub mod params;
pub mod report;
pub mod rmatrix;
pub mod structure;
pub mod tensor;
pub mod theta;
pub mod verify;

pub use error::{Result, WqpError};
