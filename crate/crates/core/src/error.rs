use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("quaternion norm {norm:e} is too small to normalize")]
    DegenerateQuaternion { norm: f64 },

    #[error("quaternion has non-finite components")]
    NonFiniteQuaternion,

    #[error("quaternion index {0} out of range (expected 0..=3)")]
    IndexOutOfRange(usize),

    #[error("{which} vector has norm {norm}, expected unit norm within 1e-6")]
    NotUnitVector { which: &'static str, norm: f64 },

    #[error("weight {0} must be finite and positive")]
    InvalidWeight(f64),

    #[error("observation set must contain at least one pair")]
    EmptySet,

    #[error("matrix is not symmetric (max asymmetry {0:e})")]
    NotSymmetric(f64),

    #[error("matrix factorization failed: {0}")]
    Factorization(&'static str),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

pub type Result<T> = std::result::Result<T, Error>;
