use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("data error: {0}")]
    Data(String),

    /// |ψ| fell below the division floor at a node where a quotient by ψ is needed.
    #[error("division hazard: |psi| = {value:e} below floor at time node {time_index}, space node {space_index} (t = {t}, x = {x:?})")]
    DivisionHazard {
        time_index: usize,
        space_index: usize,
        t: f64,
        x: [f64; 2],
        value: f64,
    },

    /// Neither the local nor the global solvability hypotheses hold.
    #[error("certificate fails: {0}")]
    Certificate(String),

    #[error("numerical blow-up in mode {mode:?} at time step {step}")]
    Blowup { mode: Option<usize>, step: usize },

    #[error("linear solver failed at time step {step}: residual {residual:e} after {iterations} iterations")]
    LinearSolve {
        step: usize,
        residual: f64,
        iterations: usize,
    },
}

impl Error {
    pub(crate) fn with_mode(self, k: usize) -> Self {
        match self {
            Error::Blowup { step, .. } => Error::Blowup {
                mode: Some(k),
                step,
            },
            other => other,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
