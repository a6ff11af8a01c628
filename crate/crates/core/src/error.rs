use thiserror::Error;

/// Failures surfaced by the numerical routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("matrix is not positive definite: {0}")]
    NotPositiveDefinite(String),

    #[error("batch is rank deficient: {0}")]
    RankDeficient(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("every component log-density underflowed at the given context")]
    AllZeroLikelihood,

    #[error("vector is not L2-normalized (norm {norm})")]
    NotNormalized { norm: f64 },

    #[error("training diverged at epoch {epoch}: loss is not finite")]
    Diverged { epoch: usize },

    #[error("mixture component {component} collapsed below the variance floor")]
    DegenerateComponent { component: usize },

    #[error("GNG seed points are identical")]
    DegenerateSeed,

    #[error("identity collapse: the parameter network must see the context only, got {input} inputs for context width {context}")]
    IdentityCollapse { input: usize, context: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, Error>;
