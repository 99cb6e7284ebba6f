pub mod analysis;
pub mod cli;
pub mod error;
pub mod linalg;
pub mod mat_ops;
pub mod problems;
pub mod random;
pub mod scf;

pub use error::{Error, Result};
