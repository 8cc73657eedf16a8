use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("size error: {0}")]
    Size(String),

    #[error("wire error: wire {wire} is invalid for a {n_qubits}-qubit register")]
    Wire { wire: usize, n_qubits: usize },

    #[error("wire error: {0}")]
    WireList(String),

    #[error("gate {index}: {source}")]
    Gate {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("dimension error: {0}")]
    Dimension(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("batch error: {0}")]
    Batch(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("action error: {0}")]
    Action(String),

    #[error("budget infeasible: {budget} parameters requested, at least {minimum} required")]
    BudgetInfeasible { budget: usize, minimum: usize },

    #[error("episode already finished")]
    EpisodeDone,
}

impl Error {
    pub(crate) fn at_gate(self, index: usize) -> Self {
        Error::Gate {
            index,
            source: Box::new(self),
        }
    }
}
