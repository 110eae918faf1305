use thiserror::Error;

/// Errors raised by the operator constructions and bound evaluators.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("shape error: expected dimension {expected}, found {found}")]
    Shape { expected: usize, found: usize },

    #[error("role error: expected a {expected} measure, found a {found} measure")]
    Role {
        expected: &'static str,
        found: &'static str,
    },

    #[error("invalid measure: {0}")]
    InvalidMeasure(String),

    #[error(
        "operator is not positive definite: smallest eigenvalue {smallest:e} does not exceed threshold {threshold:e}"
    )]
    NotPositiveDefinite { smallest: f64, threshold: f64 },

    #[error("inverse residual {residual:e} exceeds 1e-8; operator is too ill-conditioned")]
    IllConditioned { residual: f64 },

    #[error("not applicable: {0}")]
    Applicability(String),

    #[error("measure is not centered: mean has Euclidean norm {mean_norm:e}")]
    NotCentered { mean_norm: f64 },

    #[error("coupling error: {0}")]
    Coupling(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::Shape { expected, found })
    }
}
