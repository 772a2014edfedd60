use thiserror::Error;

/// Errors raised by the core routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(&'static str),
    #[error("group size not integral: K = {k} is not divisible by L = {groups}")]
    GroupSize { k: usize, groups: usize },
    #[error("shape mismatch: {0}")]
    Shape(&'static str),
    #[error("projection undefined: block {block} is rank deficient")]
    RankDeficient { block: usize },
    #[error("mode error: {0}")]
    Mode(&'static str),
    #[error("domain error: {0}")]
    Domain(&'static str),
    #[error("degenerate instance: every effective gain is zero")]
    Degenerate,
    #[error("numerical failure: {0}")]
    Numerical(&'static str),
}

pub type Result<T> = core::result::Result<T, Error>;
