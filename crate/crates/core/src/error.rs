use thiserror::Error;

/// Failures raised by the numerical pipeline.
///
/// Variant names double as the diagnostic tags printed by the command line
/// front end, see [`Error::name`].
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("eigenvector matrix is numerically defective (condition {condition:.3e} > cap {cap:.3e})")]
    DefectiveMatrix { condition: f64, cap: f64 },

    #[error("omega = {omega} coincides with a real eigenvalue; resolvent is singular")]
    SingularAtResonance { omega: f64 },

    #[error("left/right overlap of mode {mode} is {overlap:.3e}, below floor")]
    SingularOverlap { mode: usize, overlap: f64 },

    #[error("gamma1 = gamma2 = 0: the degeneracy is a Dirac point, not a pair of exceptional points")]
    HermitianDegenerate,

    #[error("|v| = {v_abs} >= |w| = {w_abs}: chain is in the trivial phase and hosts no zero mode")]
    TrivialPhase { v_abs: f64, w_abs: f64 },

    #[error("no resonance peak above the prominence threshold")]
    NoPeaks,

    #[error("fit diverged: {0}")]
    FitDiverged(String),

    #[error("rank deficient fit: {0}")]
    RankDeficient(String),

    #[error("prefactor at fixed site {fixed_idx} is {ratio:.3e} of the campaign maximum; mode not retrievable from this site")]
    WeakPrefactor { fixed_idx: usize, ratio: f64 },

    #[error("eigenvalue gap {gap:.3e} at loop step {step} is below the exceptional-point margin {margin:.3e}")]
    EPTooClose { step: usize, gap: f64, margin: f64 },

    #[error("mode tracking ambiguous at loop step {step}")]
    TrackingAmbiguous { step: usize },

    #[error("tracked strand does not close on itself (started in band {start}, ended in band {end}); traverse more cycles")]
    OpenHolonomy { start: usize, end: usize },

    #[error("schema mismatch at {location}: {message}")]
    SchemaMismatch { location: String, message: String },
}

impl Error {
    pub fn name(&self) -> &'static str {
        match self {
            Error::InvalidInput(_) => "InvalidInput",
            Error::DefectiveMatrix { .. } => "DefectiveMatrix",
            Error::SingularAtResonance { .. } => "SingularAtResonance",
            Error::SingularOverlap { .. } => "SingularOverlap",
            Error::HermitianDegenerate => "HermitianDegenerate",
            Error::TrivialPhase { .. } => "TrivialPhase",
            Error::NoPeaks => "NoPeaks",
            Error::FitDiverged(_) => "FitDiverged",
            Error::RankDeficient(_) => "RankDeficient",
            Error::WeakPrefactor { .. } => "WeakPrefactor",
            Error::EPTooClose { .. } => "EPTooClose",
            Error::TrackingAmbiguous { .. } => "TrackingAmbiguous",
            Error::OpenHolonomy { .. } => "OpenHolonomy",
            Error::SchemaMismatch { .. } => "SchemaMismatch",
        }
    }

    pub fn schema(location: impl Into<String>, message: impl Into<String>) -> Self {
        Error::SchemaMismatch {
            location: location.into(),
            message: message.into(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
