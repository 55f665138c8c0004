use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("solver failure: {0}")]
    Solver(String),
    #[error("solver returned unknown: {0}")]
    SolverUnknown(String),
    #[error("formula is unsatisfiable")]
    Unsat,
    #[error("cannot negate a quantified formula")]
    QuantifiedNegation,
    #[error("model does not satisfy the formula")]
    ModelMismatch,
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("vocabulary mismatch")]
    VocabularyMismatch,
    #[error("abstraction is not normal")]
    NotNormal,
    #[error("matrix is not coherent with respect to the Q-VASR (row {0})")]
    Incoherent(usize),
    #[error("simulation matrix has a zero row ({0})")]
    ZeroRow(usize),
    #[error("edge {edge} does not leave control state {state}")]
    DisconnectedEdge { edge: usize, state: usize },
    #[error("abstract-VASR exceeded the cube cap of {0}")]
    IterationCap(usize),
    #[error("reachability encoding needs more than {0} reset shapes")]
    ShapeCap(usize),
    #[error("{line}:{col}: {msg}")]
    Parse { line: usize, col: usize, msg: String },
    #[error("invalid input: {0}")]
    Invalid(String),
}

impl Error {
    /// True for failures that came from the solver process or an
    /// inconclusive solver answer.
    pub fn is_solver_failure(&self) -> bool {
        matches!(self, Error::Solver(_) | Error::SolverUnknown(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
