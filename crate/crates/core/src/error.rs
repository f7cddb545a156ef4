use thiserror::Error;

/// Errors raised by the numerical pipelines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error(
        "grid too coarse: {samples:.2} samples across the narrowest width {width:.4e} \
         (step {step:.4e}); at least 8 are required"
    )]
    GridTooCoarse { samples: f64, width: f64, step: f64 },

    #[error("density is not normalized (total mass {total:.9})")]
    NotNormalized { total: f64 },

    #[error(
        "detector array half-width {needed:.4e} exceeds the grid half-extent {available:.4e}; \
         use a larger grid"
    )]
    GridExtent { needed: f64, available: f64 },

    #[error(
        "memory budget exceeded: {requested} samples requested, budget {budget}; \
         try a resolution of {suggested}"
    )]
    MemoryBudget {
        requested: usize,
        budget: usize,
        suggested: usize,
    },

    #[error("no accepted events: P1 + P2 + P3 = 0")]
    NoAcceptedEvents,

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("numerical failure: {0}")]
    Numerical(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
