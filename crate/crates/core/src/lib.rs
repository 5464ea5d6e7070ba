pub mod blockops;
pub mod error;
pub mod matrix;
pub mod random;
#[cfg(feature = "cli")]
pub mod request;
pub mod rkhs;
pub mod shifts;
pub mod similarity;

pub use error::{LabError, LabResult};
pub use matrix::{ComplexMatrix, PsdVerdict};
