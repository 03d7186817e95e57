use thiserror::Error;

/// Errors raised by the simulator and the physics pipelines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid qubit index: {0}")]
    Index(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("matrix is not Hermitian positive definite (minimal eigenvalue {min_eigenvalue:.3e})")]
    NotPositiveDefinite { min_eigenvalue: f64 },

    #[error("postselection impossible: outcome probability {probability:.3e}")]
    PostselectionImpossible { probability: f64 },

    #[error("exceptional point: {0}")]
    ExceptionalPoint(String),

    #[error("vanishing denominator <psi1|O'|psi2> (|value| = {magnitude:.3e}); choose a different O'")]
    OrthogonalDenominator { magnitude: f64 },

    #[error("preparation impossible: initial state overlap with target eigenvector is {overlap:.3e}")]
    PreparationImpossible { overlap: f64 },

    #[error("invalid dilation parameters: M(t) - I loses positivity at t = {time} (minimal eigenvalue {min_eigenvalue:.3e})")]
    InvalidDilation { time: f64, min_eigenvalue: f64 },

    #[error("generalized Brillouin zone is degenerate for |t1| = |delta| = {0}")]
    GbzDegenerate(f64),

    #[error("parameters lie on a phase boundary ({0})")]
    PhaseBoundary(String),

    #[error("ambiguous phase branch at step {step}; increase the number of k samples")]
    AmbiguousBranch { step: usize },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("io error: {0}")]
    Io(String),
}

impl Error {
    /// True for failures caused by the physics of the requested point
    /// (exceptional points, orthogonality, bad dilation parameters) rather
    /// than malformed input.
    pub fn is_physics(&self) -> bool {
        matches!(
            self,
            Error::ExceptionalPoint(_)
                | Error::OrthogonalDenominator { .. }
                | Error::PreparationImpossible { .. }
                | Error::InvalidDilation { .. }
                | Error::GbzDegenerate(_)
                | Error::PhaseBoundary(_)
                | Error::AmbiguousBranch { .. }
                | Error::PostselectionImpossible { .. }
                | Error::NotPositiveDefinite { .. }
                | Error::Numerical(_)
        )
    }

    /// Short stable identifier used in machine-readable error records.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Dimension(_) => "dimension",
            Error::Index(_) => "index",
            Error::Domain(_) => "domain",
            Error::Numerical(_) => "numerical",
            Error::NotPositiveDefinite { .. } => "not_positive_definite",
            Error::PostselectionImpossible { .. } => "postselection_impossible",
            Error::ExceptionalPoint(_) => "exceptional_point",
            Error::OrthogonalDenominator { .. } => "orthogonal_denominator",
            Error::PreparationImpossible { .. } => "preparation_impossible",
            Error::InvalidDilation { .. } => "invalid_dilation",
            Error::GbzDegenerate(_) => "gbz_degenerate",
            Error::PhaseBoundary(_) => "phase_boundary",
            Error::AmbiguousBranch { .. } => "ambiguous_branch",
            Error::Parse(_) => "parse",
            Error::Io(_) => "io",
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
