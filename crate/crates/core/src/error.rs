use num_complex::Complex64;
use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum VkError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("matrix is not hermitian (defect {defect:.3e})")]
    NonHermitian { defect: f64 },
    #[error("matrix is not positive definite (min eigenvalue {min_eigenvalue:.3e})")]
    NotPositiveDefinite { min_eigenvalue: f64 },
    #[error("singular matrix: {0}")]
    Singular(String),
    #[error("lambda = {lambda} lies within {distance:.3e} of the spectrum")]
    SpectrumCollision { lambda: Complex64, distance: f64 },
    #[error("spectra overlap (gap {gap:.3e})")]
    SpectraOverlap { gap: f64 },
    #[error("integration diverged at node {node}")]
    Diverged { node: usize },
    #[error("degenerate input vector at node {node}")]
    DegenerateB { node: usize },
    #[error("eigenvector transport broke down at node {node} (overlap {overlap:.3e})")]
    TransportBreakdown { node: usize, overlap: f64 },
    #[error("eigenvalue {z} is not simple (gap {gap:.3e})")]
    NonSimpleEigenvalue { z: Complex64, gap: f64 },
    #[error("gamma chain mismatch (defect {defect:.3e})")]
    InconsistentChain { defect: f64 },
    #[error("pair is not observable/controllable at node {node}")]
    NotMinimal { node: usize },
    #[error("vessels are not gauge equivalent: {0}")]
    NotEquivalent(String),
    #[error("condition failed: {0}")]
    ConditionFailed(String),
}

pub type VkResult<T> = Result<T, VkError>;
