use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("degenerate metric: Gram matrix is singular")]
    DegenerateMetric,

    #[error(
        "infeasible embedding: target block {block} needs size {required} but has {available}"
    )]
    InfeasibleEmbedding {
        block: usize,
        required: usize,
        available: usize,
    },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error(
        "invalid slot: summand {summand}, block {block}, copy {copy} (multiplicity {multiplicity})"
    )]
    InvalidSlot {
        summand: usize,
        block: usize,
        copy: usize,
        multiplicity: usize,
    },

    #[error("singular element in summand {0}")]
    SingularElement(usize),

    #[error("unsupported dimension {dim}: explicit Hodge star is limited to {max} derivation directions, use scalar_product instead")]
    UnsupportedDimension { dim: usize, max: usize },

    #[error("degree mismatch: {0}")]
    DegreeMismatch(String),

    #[error("profile mismatch: {0}")]
    ProfileMismatch(String),

    #[error("invalid gauge element: unitarity defect {0:.3e}")]
    InvalidGaugeElement(f64),

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("ratio undefined: no inherited degrees of freedom")]
    UndefinedRatio,

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("numerical failure: {0}")]
    NumericalFailure(String),
}

pub type Result<T> = std::result::Result<T, Error>;
