// SPDX-License-Identifier: Apache-2.0

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("Bloch vector norm {norm} exceeds 1")]
    NormTooLarge { norm: f64 },

    #[error("operator is not a density matrix: {0}")]
    NotDensity(String),

    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("operator entries must be finite and the matrix square and non-empty")]
    InvalidOperator,

    #[error("negative or non-finite dissipation time {0}")]
    NegativeTau(f64),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("no convergence: {0}")]
    NoConvergence(String),

    /// `|Tr[sigma_f e^{D tau}(sigma_i)]|` fell below the vanishing threshold.
    #[error("post-selection probability vanishes ({0:e})")]
    PostselectionVanishes(f64),

    #[error("weak-value denominator vanishes ({0:e})")]
    DenominatorVanishes(f64),

    #[error("epsilon {0} outside 0 < |epsilon| <= 0.2")]
    EpsilonOutOfRange(f64),

    #[error("weak-value inversion is singular (denominator {0:e})")]
    SingularInversion(f64),

    #[error("degenerate fit: {0}")]
    DegenerateFit(String),
}
