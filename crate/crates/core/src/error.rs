use alloc::string::String;

/// Errors raised by the core computations.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("model `{0}` is already registered")]
    DuplicateModel(String),
    #[error("unknown model `{0}`")]
    UnknownModel(String),
    #[error("invariant violated: {0}")]
    InvariantViolation(String),
    #[error("query matched no filters: {0}")]
    EmptyResult(String),
    #[error("catalog is empty")]
    EmptyCatalog,
    #[error("PCA needs at least {required} non-degenerate filters, got {got}")]
    InsufficientSamples { required: u64, got: u64 },
    #[error("all filters are identical; total variance is zero")]
    ZeroVariance,
    #[error("coefficients on component {component} are constant across all compared sets")]
    DegenerateRange { component: usize },
    #[error("histograms do not share range and bin count")]
    RangeMismatch,
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("need at least 2 groups of at least {min_size} filters, got {got}")]
    TooFewGroups { got: usize, min_size: usize },
    #[error("layer index {layer_index} out of range for {conv_layer_count} conv layers")]
    IndexOutOfRange { layer_index: u32, conv_layer_count: u32 },
    #[error("need at least {required} coefficient rows, got {got}")]
    InsufficientData { required: usize, got: usize },
    #[error("nothing to analyze: {0}")]
    EmptyInput(&'static str),
}
