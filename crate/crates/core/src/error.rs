use thiserror::Error;

/// Errors raised by model construction, training and evaluation.
#[derive(Debug, Error)]
pub enum PstError {
    #[error("prior alpha must lie strictly between 0 and 1, got {0}")]
    InvalidAlpha(f64),

    #[error("maximum depth {0} exceeds the supported limit of {max}", max = crate::trie::MAX_DEPTH_LIMIT)]
    DepthTooLarge(usize),

    #[error("train fraction must lie strictly between 0 and 1, got {0}")]
    InvalidFraction(f64),

    #[error("prune interval must be at least 1")]
    InvalidPruneInterval,

    #[error("model is frozen and cannot be modified")]
    Frozen,

    #[error("history window holds {got} words but {need} are required")]
    ShortHistory { got: usize, need: usize },

    #[error("the padding symbol cannot be predicted or observed")]
    PadPredicted,

    #[error("cannot evaluate an empty token stream")]
    EmptyStream,

    #[error("candidate list is empty")]
    NoCandidates,

    #[error("model has no observations to sample from")]
    EmptyModel,

    #[error("word count for generation must be at least 1")]
    ZeroWords,

    #[error("instance too large to enumerate: more than {limit} trees")]
    TooManyTrees { limit: usize },
}

pub type Result<T> = std::result::Result<T, PstError>;
