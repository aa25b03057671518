//! Discrete-event abstraction of continuous plants under piecewise-constant
//! control.
//!
//! The state space is split by hypersurfaces `h_i(x) = 0` into cells labeled
//! by sign vectors ([`partition`]). A plant ([`plant`]) driven by a finite
//! control alphabet moves between cells; every strict kernel crossing is a
//! plant-event that emits a plant-symbol ([`event_engine`]). Sampled
//! simulation turns this into a nondeterministic DES-plant automaton whose
//! observability can be checked and whose discrete evolutions can be
//! reconstructed from plant-symbol sequences ([`abstraction`]).

pub mod abstraction;
pub mod cli;
pub mod error;
pub mod event_engine;
pub mod io;
pub mod partition;
pub mod plant;
pub mod system;

pub use abstraction::{
    check_observability, extract, reconstruct, simulate_closed_loop, successor, DesAutomaton,
    ObservabilityReport, Trace, Transition,
};
pub use error::{Error, Result};
pub use event_engine::{EventTolerances, PlantEvent, PlantSymbol};
pub use partition::{
    adjacency, CellLabel, CellRegistry, Direction, PartitionSpec, Sign, SignVector,
};
pub use plant::{ControlAlphabet, VectorField};
pub use system::{ConfigOverrides, ExtractionConfig, PlantSystem, SamplingBox};
