//! Exact jet computations of affine and CR relative differential invariants
//! of graphed curves `u = F(x)` and surfaces `u = F(x, y)`.

pub mod affine;
pub mod analytic;
pub mod cli;
pub mod complex;
pub mod cr;
pub mod diffalg;
pub mod error;
pub mod expr;
pub mod io;
pub mod jet;
pub mod scalar;
pub mod space;
pub mod transform;

pub use error::{Error, Result};
pub use jet::Jet;
pub use scalar::Scalar;
