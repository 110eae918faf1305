//! Second-moment operators of random elements in finite-dimensional `ℓ_p`
//! spaces and numerical verification of Chebyshev-type tail inequalities,
//! from the scalar case up to the dual-space (Banach) form.
//!
//! Module map:
//! - [`space`]: `p`-norms, dual pairing and dual norms, certified `p → q` operator norms.
//! - [`measure`]: discrete measures (step functions), samplers, grid quantizer, pushforwards.
//! - [`covop`]: the operator `S: B* → B`, its inverse and the Mahalanobis functional.
//! - [`bounds`]: every tail inequality as a left-side/right-side report.
//! - [`hilbert`]: the Riesz-map reduction to the Hilbert-space bounds.
//! - [`report`]: CSV and JSON serialization of reports.

pub mod bounds;
pub mod covop;
pub mod error;
pub mod hilbert;
pub mod measure;
pub mod report;
pub mod space;

pub use bounds::{BoundReport, Inequality, Method};
pub use covop::{CovarianceOperator, InverseOperator};
pub use error::{Error, Result};
pub use measure::{DiscreteMeasure, Role, Sampler};
pub use space::{Exponent, NormInterval, PNormSpace};
