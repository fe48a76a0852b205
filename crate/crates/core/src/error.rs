//! Crate-wide error type.

use thiserror::Error;

use crate::rational::Rational;

pub type Result<T> = std::result::Result<T, Error>;

/// Errors reported by the library.
///
/// Refusals are explicit: an operation that would have to enumerate past the
/// configured cap, read an undefined bias, or accept malformed staging data
/// returns one of these instead of guessing.
#[derive(Debug, Error)]
pub enum Error {
    #[error("bias undefined at coordinate {coord}")]
    BiasUndefined { coord: u32 },

    #[error("domain size {size} exceeds enumeration cap {cap}")]
    EnumerationCap { size: usize, cap: usize },

    #[error("domain error: {0}")]
    Domain(String),

    // Boxed so the common Result stays small.
    #[error("not dominated at coordinate {coord}: {lower} > {upper}")]
    NotDominated {
        coord: u32,
        lower: Box<Rational>,
        upper: Box<Rational>,
    },

    #[error("window too short: {0}")]
    WindowTooShort(String),

    #[error("set is not positive for the filter base: {0}")]
    NotPositive(String),

    #[error("witness lands in heavy stage {stage}")]
    HeavyStage { stage: usize },

    #[error("stage bound violated at stage {stage}: {detail}")]
    StageBound { stage: usize, detail: String },

    #[error("missing closed-set approximation for stage {stage} at resolution {resolution}")]
    MissingResolution { stage: usize, resolution: u32 },

    #[error("generator {generator} has empty intersection with its band (levels {level_lo}..={level_hi})")]
    EmptyBand {
        generator: usize,
        level_lo: u32,
        level_hi: u32,
    },

    #[error("invalid {what}: {detail}")]
    Invalid { what: &'static str, detail: String },
}

impl Error {
    pub(crate) fn invalid(what: &'static str, detail: impl Into<String>) -> Self {
        Error::Invalid {
            what,
            detail: detail.into(),
        }
    }

    pub(crate) fn domain(detail: impl Into<String>) -> Self {
        Error::Domain(detail.into())
    }
}
