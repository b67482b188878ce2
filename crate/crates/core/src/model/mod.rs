//! Shared domain types: complex matrices, objectives, constraints and
//! solutions.
//!
//! Everything here is an immutable value once built; all operations are pure.

mod linalg;
mod matrix;
mod types;

pub use linalg::{
    cholesky, hermitian_inverse, hermitian_solve, hermitian_solve_vec, pseudo_inverse, real_solve, singular_values,
    DEFAULT_RANK_TOL,
};
pub use matrix::{conj_vec, dot, inner, norm, norm_sqr, normalized, scale_vec, ComplexMatrix};
pub use types::{Architecture, Constraint, ConstraintKind, ObjectiveKind, Solution};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("matrix is not positive definite")]
    NotPositiveDefinite,
    #[error("matrix is not Hermitian")]
    NotHermitian,
    #[error("matrix is rank deficient")]
    RankDeficient,
    #[error("shape mismatch: expected {expected:?}, found {found:?}")]
    ShapeMismatch {
        expected: (usize, usize),
        found: (usize, usize),
    },
    #[error("non-finite entry")]
    NonFinite,
    #[error("entry outside the 1-bit alphabet")]
    OffAlphabet,
    #[error("analog entry without unit modulus")]
    NotUnitModulus,
    #[error("{kind} constraint is missing parameter `{name}`")]
    MissingParameter { kind: ConstraintKind, name: String },
    #[error("{kind} constraint has invalid parameter `{name}`")]
    InvalidParameter { kind: ConstraintKind, name: String },
}
