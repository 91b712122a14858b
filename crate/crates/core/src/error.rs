use thiserror::Error;

/// Errors surfaced by the library.
///
/// Most numeric code paths prefer returning flagged values over failing; the
/// variants here are reserved for genuine contract violations (degenerate
/// inputs, non-convergence, unclassifiable structure).
#[derive(Debug, Error)]
pub enum HornError {
    #[error("degenerate resultant input: {0}")]
    DegenerateResultant(String),

    #[error("identically-zero polynomial")]
    ZeroPolynomial,

    #[error("complex spectrum: 4p^3+27q^2 = {0:.3e} > tolerance")]
    ComplexSpectrum(f64),

    #[error("non-traceless spectrum: sum = {0:.3e}")]
    NotTraceless(f64),

    #[error("empty Horn polygon (inconsistent spectra ordering?)")]
    EmptyPolygon,

    #[error("repeated spectrum entries: {0}")]
    RepeatedSpectrum(String),

    #[error("divergent orbit sum: {0}")]
    DivergentOrbitSum(String),

    #[error("root finder failure at (p,q)=({0},{1}): {2}")]
    RootFinder(f64, f64, String),

    #[error("unclassified pattern at (p,q)=({0},{1}): {2}")]
    UnclassifiedPattern(f64, f64, String),

    #[error("unexpected critical point at z={0}: |R'_u|={1:.3e}")]
    UnexpectedCriticalPoint(f64, f64),

    #[error("kappa {0} outside admissible range {1}")]
    KappaRange(f64, &'static str),

    #[error("partition length {0} exceeds variable count {1}")]
    PartitionLength(usize, usize),

    #[error("eigensolver failed to converge after {0} sweeps")]
    EigenNonConvergence(usize),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, HornError>;
