use thiserror::Error;

#[derive(Debug, Error)]
pub enum KabarError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("stale model: node {node} is no longer in block {expected_block}")]
    StaleModel { node: u32, expected_block: u32 },
    #[error("internal invariant violated: {0}")]
    Internal(String),
}
