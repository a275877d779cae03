//! Construction, certification and dispersion analysis of piecewise-constant
//! time-periodic Dirac forcing whose Floquet exponent is flat to high order
//! at zero frequency.

pub mod error;
pub mod scalar;
pub mod series;
pub mod su2;
pub mod linalg;
pub mod solver;
pub mod certify;
pub mod quadrature;
pub mod dispersion;

pub use error::{Error, Result};
pub use scalar::{Complex, MpFloat, Precision, Real};
pub use series::TruncatedJet;
