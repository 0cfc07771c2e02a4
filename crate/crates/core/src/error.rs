use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("control grid is empty")]
    EmptyControlGrid,

    #[error("invalid control grid: {0}")]
    InvalidControlGrid(String),

    #[error("quadrature invariant failed: {0}")]
    Quadrature(String),

    #[error("non-finite {quantity} at control {control:?}, state {state:?}{}", mark_suffix(*.mark))]
    NonFinite {
        quantity: &'static str,
        control: Vec<f64>,
        state: Vec<f64>,
        mark: Option<f64>,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("unsupported dimension {0}; only d = 1 is implemented here")]
    UnsupportedDimension(usize),

    #[error("CFL violation at step {step}: stability ratio {ratio} exceeds 1")]
    Cfl { step: usize, ratio: f64 },

    #[error("non-finite value at step {step}, node {node}")]
    Blowup { step: usize, node: usize },

    #[error("non-finite state on path {path} at step {step}")]
    NonFiniteState { path: u64, step: usize },

    #[error("reference measure has infinite total mass; only compound Poisson jumps can be simulated")]
    InfiniteMass,

    #[error("time {0} is not on the stored timeline")]
    NotOnTimeline(f64),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("tail is not monotone near {at}")]
    NonMonotoneTail { at: f64 },

    #[error("invalid model specification: {0}")]
    InvalidSpec(String),
}

fn mark_suffix(mark: Option<f64>) -> String {
    match mark {
        Some(z) => format!(", mark {z}"),
        None => String::new(),
    }
}
