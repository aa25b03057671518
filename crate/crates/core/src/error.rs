//! Error type shared by every module of the engine.

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// Malformed or inconsistent input: bad dimensions, unknown symbols,
    /// invalid configuration values.
    #[error("invalid input: {0}")]
    Input(String),

    /// A state lies on the kernel of at least one functional where a state
    /// strictly inside a cell is required.
    #[error("state {state:?} lies on the boundary of hypersurface(s) {surfaces:?}")]
    BoundaryState {
        state: Vec<f64>,
        surfaces: Vec<usize>,
    },

    #[error("exhaustive enumeration requested for {n} functionals (limit is {limit})")]
    Capacity { n: usize, limit: usize },

    #[error("integration diverged at t = {time}: non-finite state")]
    Divergence { time: f64 },

    #[error(
        "no state strictly inside a cell was found in the sampling box after {attempts} draws"
    )]
    EmptyDomain { attempts: usize },

    #[error("automaton is not observable ({witnesses} witness(es)); reconstruction refused")]
    NotObservable { witnesses: usize },

    /// `position` is 1-based: the index of the first plant-symbol that no
    /// transition can produce.
    #[error("inadmissible plant-symbol sequence at position {position}: no transition from {state} emits {symbol}")]
    Inadmissible {
        position: usize,
        state: String,
        symbol: String,
    },
}

impl Error {
    pub(crate) fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }
}
