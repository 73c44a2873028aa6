use thiserror::Error as ThisError;

#[derive(Debug, ThisError, Clone, PartialEq)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("mesh error: {0}")]
    Mesh(String),
    #[error("validation error: {0}")]
    Validation(String),
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("divergence at step {step}: max |Q| = {magnitude:e} at element {element}, node {node} ({x:.6e}, {y:.6e}, {z:.6e})")]
    Divergence {
        step: usize,
        magnitude: f64,
        element: usize,
        node: usize,
        x: f64,
        y: f64,
        z: f64,
    },
}

pub type Result<T> = std::result::Result<T, Error>;
