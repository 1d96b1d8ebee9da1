use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("zero frequency has no kernel projection")]
    ZeroFrequency,
    #[error("rank is not constant (rank {rank_a} vs {rank_b} at witness {witness:?})")]
    NonConstantRank {
        rank_a: usize,
        rank_b: usize,
        witness: Vec<f64>,
    },
    #[error("non-finite multiplier value at frequency {0:?}")]
    NonFiniteMultiplier(Vec<i64>),
    #[error("term count {count} exceeds cap {cap}")]
    TermOverflow { count: usize, cap: usize },
    #[error("field has nonzero mean {0:e} in strict mode")]
    NonZeroMean(f64),
    #[error("Young function is not convex (midpoint test failed near s = {0:e})")]
    NonConvex(f64),
    #[error("trivial truncation: the bad set covers the whole domain")]
    TrivialTruncation,
    #[error("tail bound not met: decay factor {0:e} exceeds tolerance")]
    TailBound(f64),
    #[error("not applicable: {0}")]
    NotApplicable(String),
    #[error("unknown identifier '{name}'{}", suggestion.as_ref().map(|s| format!(", did you mean '{s}'?")).unwrap_or_default())]
    Unknown {
        name: String,
        suggestion: Option<String>,
    },
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
