use thiserror::Error;

/// Errors raised across the crate.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Error {
    #[error("degree mismatch: expected m = {expected}, found m = {found}")]
    DegreeMismatch { expected: usize, found: usize },

    #[error("invalid vertex: {0}")]
    InvalidVertex(String),

    #[error("invalid permutation: {0}")]
    InvalidPermutation(String),

    #[error("element is not a member of the ambient group: {0}")]
    Membership(String),

    #[error("normalization failure: {0}")]
    NotNormalizing(String),

    #[error("memory cap exceeded: {needed} bytes requested, cap is {cap} bytes")]
    MemoryCap { needed: usize, cap: usize },

    #[error("resource cap: {0}")]
    ResourceCap(String),

    #[error("chain step failed at level {level}: {reason}")]
    ChainStep { level: usize, reason: String },

    #[error("A-invariance violated at level {level}")]
    InvarianceViolation { level: usize },

    #[error("precision mode required: {0}")]
    PrecisionRequired(String),

    #[error("depth too small: {0}")]
    DepthTooSmall(String),

    #[error("infeasible request: {0}")]
    Infeasible(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),
}

pub type Result<T> = std::result::Result<T, Error>;
