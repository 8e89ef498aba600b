pub mod cli;
pub mod conditions;
pub mod eigen;
pub mod error;
pub mod ext;
pub mod fem;
pub mod nonlinearity;
pub mod quad;
pub mod solver;

pub use error::{Error, Result};
pub use ext::{ExtReal, PotentialValue};
