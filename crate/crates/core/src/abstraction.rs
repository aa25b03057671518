//! The DES-plant automaton: extraction by sampled simulation, observability
//! checking and reconstruction of discrete evolutions.
//!
//! Extraction under-approximates the transition relation. Each `(cell,
//! control)` pair is explored from a finite, seeded set of initial states, so
//! a transition that only a small subset of a cell can take may be missed.
//! Increasing `samples_per_cell` can only add transitions.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::event_engine::{first_event, plant_alphabet, PlantSymbol};
use crate::partition::{adjacency, CellLabel, CellRegistry, SignVector};
use crate::plant::Sample;
use crate::system::{ExtractionConfig, PlantSystem};

/// Rejection-sampling budget per `(candidate cell, sample slot)`.
const DRAWS_PER_SLOT: usize = 64;
const MAX_DRAWS: usize = 50_000_000;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StateEntry {
    pub symbol: String,
    pub signs: SignVector,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Transition {
    pub from: String,
    pub control: String,
    pub to: String,
    pub output: PlantSymbol,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NoEventRecord {
    pub from: String,
    pub control: String,
    /// Number of runs that reached the horizon without a plant-event.
    pub runs: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CellSamples {
    pub state: String,
    /// Initial states drawn inside the sampling box.
    pub sampled: usize,
    /// Initial states taken from event states entering the cell, used when
    /// the box holds no witness of the cell.
    pub entered: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExtractionMetadata {
    pub samples_per_cell: usize,
    pub horizon: f64,
    pub dt: f64,
    pub eps_t: f64,
    pub eps_h: f64,
    pub seed: u64,
    pub sampling_draws: usize,
    pub runs: usize,
    pub cell_samples: Vec<CellSamples>,
    /// Runs whose first plant-event tied with another within `eps_t`.
    pub simultaneous_events: usize,
    pub sliding_runs: usize,
    pub diverged_runs: usize,
    pub no_event: Vec<NoEventRecord>,
}

/// Nondeterministic automaton whose transitions are labeled by a control
/// symbol and output a plant-symbol.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesAutomaton {
    states: Vec<StateEntry>,
    controls: Vec<String>,
    plant_symbols: Vec<PlantSymbol>,
    transitions: Vec<Transition>,
    #[serde(default)]
    metadata: ExtractionMetadata,
}

impl DesAutomaton {
    /// Checks referential integrity and `from != to`, then stores the
    /// transitions deduplicated in canonical order (source state, control,
    /// target state, output; states and controls by their list position).
    pub fn new(
        states: Vec<StateEntry>,
        controls: Vec<String>,
        plant_symbols: Vec<PlantSymbol>,
        transitions: Vec<Transition>,
        metadata: ExtractionMetadata,
    ) -> Result<Self> {
        let mut a = DesAutomaton {
            states,
            controls,
            plant_symbols,
            transitions,
            metadata,
        };
        a.normalize()?;
        Ok(a)
    }

    pub(crate) fn normalize(&mut self) -> Result<()> {
        let mut state_index = HashMap::new();
        let mut signs_seen = HashMap::new();
        let width = self.states.first().map(|s| s.signs.len());
        for (i, s) in self.states.iter().enumerate() {
            if state_index.insert(s.symbol.as_str(), i).is_some() {
                return Err(Error::input(format!("duplicate state {}", s.symbol)));
            }
            if !s.signs.is_consistent() || Some(s.signs.len()) != width {
                return Err(Error::input(format!(
                    "state {}: signs {} are not a cell label",
                    s.symbol, s.signs
                )));
            }
            if let Some(other) = signs_seen.insert(&s.signs, &s.symbol) {
                return Err(Error::input(format!(
                    "states {other} and {} share signs {}",
                    s.symbol, s.signs
                )));
            }
        }
        let mut control_index = HashMap::new();
        for (i, c) in self.controls.iter().enumerate() {
            if control_index.insert(c.as_str(), i).is_some() {
                return Err(Error::input(format!("duplicate control {c}")));
            }
        }
        let outputs: BTreeSet<_> = self.plant_symbols.iter().copied().collect();
        if outputs.len() != self.plant_symbols.len() {
            return Err(Error::input("duplicate plant symbol"));
        }
        let mut keyed = BTreeMap::new();
        for t in self.transitions.drain(..) {
            let from = *state_index
                .get(t.from.as_str())
                .ok_or_else(|| Error::input(format!("transition from unknown state {}", t.from)))?;
            let to = *state_index
                .get(t.to.as_str())
                .ok_or_else(|| Error::input(format!("transition to unknown state {}", t.to)))?;
            let control = *control_index.get(t.control.as_str()).ok_or_else(|| {
                Error::input(format!("transition uses unknown control {}", t.control))
            })?;
            if !outputs.contains(&t.output) {
                return Err(Error::input(format!(
                    "transition output {} is not a plant symbol",
                    t.output
                )));
            }
            if from == to {
                return Err(Error::input(format!(
                    "self-loop on {} under {}: a transition must change the state",
                    t.from, t.control
                )));
            }
            keyed.insert((from, control, to, t.output), t);
        }
        self.transitions = keyed.into_values().collect();
        Ok(())
    }

    pub fn states(&self) -> &[StateEntry] {
        &self.states
    }

    pub fn state(&self, symbol: &str) -> Option<&StateEntry> {
        self.states.iter().find(|s| s.symbol == symbol)
    }

    pub fn controls(&self) -> &[String] {
        &self.controls
    }

    pub fn plant_symbols(&self) -> &[PlantSymbol] {
        &self.plant_symbols
    }

    pub fn transitions(&self) -> &[Transition] {
        &self.transitions
    }

    pub fn metadata(&self) -> &ExtractionMetadata {
        &self.metadata
    }

    /// Registry with the automaton's own labels, so that simulations name
    /// cells the same way the automaton does.
    pub fn registry(&self) -> Result<CellRegistry> {
        let width = self.states.first().map_or(0, |s| s.signs.len());
        CellRegistry::with_labels(
            width,
            self.states
                .iter()
                .map(|s| (s.symbol.clone(), s.signs.clone())),
        )
    }

    /// Transitions whose cells are not adjacent across the kernel and in the
    /// direction named by their output symbol.
    pub fn coherence_violations(&self) -> Vec<&Transition> {
        self.transitions
            .iter()
            .filter(|t| {
                let from = self.state(&t.from).map(|s| &s.signs);
                let to = self.state(&t.to).map(|s| &s.signs);
                match (from, to) {
                    (Some(a), Some(b)) => adjacency(a, b)
                        .map(|adj| PlantSymbol::new(adj.surface, adj.direction) != t.output)
                        .unwrap_or(true),
                    _ => true,
                }
            })
            .collect()
    }
}

/// One observed discrete step.
#[derive(Debug, Clone, PartialEq)]
pub struct Successor {
    pub to: CellLabel,
    pub symbol: PlantSymbol,
    pub event_time: f64,
    pub event_state: Vec<f64>,
    /// Another plant-event fell within `eps_t` of this one.
    pub simultaneous: bool,
}

/// Integrates from `x0` (strictly inside `from`) under `act(control)` until
/// the first plant-event. Returns `None` when the horizon expires first.
pub fn successor(
    system: &PlantSystem,
    registry: &mut CellRegistry,
    from: &CellLabel,
    x0: &[f64],
    control: &str,
    cfg: &ExtractionConfig,
) -> Result<Option<Successor>> {
    cfg.validate()?;
    let q = system.partition().quality(x0, cfg.tol.eps_h)?;
    if !q.is_consistent() {
        return Err(Error::BoundaryState {
            state: x0.to_vec(),
            surfaces: q.zero_surfaces(),
        });
    }
    if &q != from.signs() {
        return Err(Error::input(format!(
            "state {x0:?} has quality {q}, not the signs {} of {}",
            from.signs(),
            from.symbol()
        )));
    }
    let u = system.alphabet().actuate(control)?;
    let run = first_event(
        system.field(),
        system.partition(),
        from.signs(),
        0.0,
        x0,
        u,
        cfg.horizon,
        cfg.dt,
        cfg.tol,
    )?;
    let Some(event) = run.event else {
        return Ok(None);
    };
    let to_signs = from
        .signs()
        .with_component(event.surface, event.direction.sign());
    let to = registry.register(to_signs)?.clone();
    Ok(Some(Successor {
        to,
        symbol: event.symbol(),
        event_time: event.time,
        event_state: event.state,
        simultaneous: run.simultaneous,
    }))
}

struct Task<'a> {
    cell: usize,
    control: usize,
    start: &'a [f64],
}

/// Builds the DES-plant automaton of `system` by seeded Monte-Carlo simulation.
///
/// Cells are discovered by uniform rejection sampling in the sampling box
/// and by following simulated trajectories. Each discovered cell is explored
/// under every control from up to `samples_per_cell` initial states; cells
/// without a witness in the box start from the event states that entered
/// them. The result is bit-identical for identical inputs.
pub fn extract(system: &PlantSystem, cfg: &ExtractionConfig) -> Result<DesAutomaton> {
    cfg.validate()?;
    let partition = system.partition();
    let bx = cfg.sampling_box.as_ref().unwrap_or(system.sampling_box());
    if bx.dimension() != system.state_dim() {
        return Err(Error::input(format!(
            "sampling box has {} dimensions, plant state has {}",
            bx.dimension(),
            system.state_dim()
        )));
    }
    let k = cfg.samples_per_cell;
    let mut registry = system.registry();

    // Box samples, indexed by registry position.
    let candidates = 1usize << partition.len().min(30);
    let budget = k
        .saturating_mul(candidates)
        .saturating_mul(DRAWS_PER_SLOT)
        .min(MAX_DRAWS);
    let mut sampled: Vec<Vec<Vec<f64>>> = vec![Vec::new(); registry.len()];
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut full_cells = 0;
    let mut draws = 0;
    while draws < budget && full_cells < candidates {
        draws += 1;
        let x: Vec<f64> = bx
            .bounds()
            .iter()
            .map(|&[lo, hi]| rng.gen_range(lo..hi))
            .collect();
        let q = partition.quality_unchecked(&x, cfg.tol.eps_h);
        if !q.is_consistent() {
            continue;
        }
        registry.register(q.clone())?;
        let idx = registry.index_of(&q).expect("registered");
        if sampled.len() <= idx {
            sampled.resize(idx + 1, Vec::new());
        }
        if sampled[idx].len() < k {
            sampled[idx].push(x);
            if sampled[idx].len() == k {
                full_cells += 1;
            }
        }
    }
    if sampled.iter().all(Vec::is_empty) {
        return Err(Error::EmptyDomain { attempts: draws });
    }

    let controls: Vec<&str> = system.alphabet().symbols().collect();
    let mut entered: Vec<Vec<Vec<f64>>> = vec![Vec::new(); registry.len()];
    let mut processed = vec![false; registry.len()];
    let mut edges: BTreeSet<(usize, usize, usize, PlantSymbol)> = BTreeSet::new();
    let mut no_event: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    let mut meta = ExtractionMetadata {
        samples_per_cell: k,
        horizon: cfg.horizon,
        dt: cfg.dt,
        eps_t: cfg.tol.eps_t,
        eps_h: cfg.tol.eps_h,
        seed: cfg.seed,
        sampling_draws: draws,
        ..Default::default()
    };

    loop {
        let n = registry.len();
        sampled.resize(n, Vec::new());
        entered.resize(n, Vec::new());
        processed.resize(n, false);
        let pending: Vec<usize> = (0..n)
            .filter(|&c| !processed[c] && (!sampled[c].is_empty() || !entered[c].is_empty()))
            .collect();
        if pending.is_empty() {
            break;
        }
        let cells: Vec<SignVector> = registry.cells().iter().map(|c| c.signs().clone()).collect();
        let tasks: Vec<Task> = pending
            .iter()
            .flat_map(|&cell| {
                let starts = if sampled[cell].is_empty() {
                    &entered[cell]
                } else {
                    &sampled[cell]
                };
                (0..controls.len()).flat_map(move |control| {
                    starts.iter().map(move |s| Task {
                        cell,
                        control,
                        start: s.as_slice(),
                    })
                })
            })
            .collect();
        let results: Vec<_> = tasks
            .par_iter()
            .map(|t| {
                let u = system.alphabet().actuate(controls[t.control])?;
                first_event(
                    system.field(),
                    partition,
                    &cells[t.cell],
                    0.0,
                    t.start,
                    u,
                    cfg.horizon,
                    cfg.dt,
                    cfg.tol,
                )
            })
            .collect();

        let mut new_entries: Vec<(usize, Vec<f64>)> = Vec::new();
        for (task, result) in tasks.iter().zip(results) {
            let run = match result {
                Ok(run) => run,
                Err(Error::Divergence { .. }) => {
                    meta.diverged_runs += 1;
                    continue;
                }
                Err(e) => return Err(e),
            };
            meta.runs += 1;
            meta.simultaneous_events += usize::from(run.simultaneous);
            meta.sliding_runs += usize::from(!run.sliding.is_empty());
            match run.event {
                None => *no_event.entry((task.cell, task.control)).or_default() += 1,
                Some(event) => {
                    let to_signs =
                        cells[task.cell].with_component(event.surface, event.direction.sign());
                    registry.register(to_signs.clone())?;
                    let to = registry.index_of(&to_signs).expect("registered");
                    edges.insert((task.cell, task.control, to, event.symbol()));
                    new_entries.push((to, event.state));
                }
            }
        }
        for &c in &pending {
            processed[c] = true;
        }
        entered.resize(registry.len(), Vec::new());
        for (cell, state) in new_entries {
            if entered[cell].len() < k && !entered[cell].contains(&state) {
                entered[cell].push(state);
            }
        }
    }

    // Only cells that were witnessed become states; pinned labels that were
    // never observed are dropped.
    let witnessed: Vec<usize> = (0..registry.len())
        .filter(|&c| processed.get(c).copied().unwrap_or(false))
        .collect();
    let label = |c: usize| registry.cells()[c].symbol().to_string();
    meta.cell_samples = witnessed
        .iter()
        .map(|&c| CellSamples {
            state: label(c),
            sampled: sampled[c].len(),
            entered: if sampled[c].is_empty() {
                entered[c].len()
            } else {
                0
            },
        })
        .collect();
    meta.no_event = no_event
        .into_iter()
        .map(|((cell, control), runs)| NoEventRecord {
            from: label(cell),
            control: controls[control].to_string(),
            runs,
        })
        .collect();
    let states = witnessed
        .iter()
        .map(|&c| StateEntry {
            symbol: label(c),
            signs: registry.cells()[c].signs().clone(),
        })
        .collect();
    let transitions = edges
        .into_iter()
        .map(|(from, control, to, output)| Transition {
            from: label(from),
            control: controls[control].to_string(),
            to: label(to),
            output,
        })
        .collect();
    DesAutomaton::new(
        states,
        controls.iter().map(|c| c.to_string()).collect(),
        plant_alphabet(partition.len()),
        transitions,
        meta,
    )
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Witness {
    pub from: String,
    pub symbol: PlantSymbol,
    /// Two or more distinct successors sharing `(from, symbol)`.
    pub targets: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObservabilityReport {
    pub observable: bool,
    pub witnesses: Vec<Witness>,
}

/// The automaton is observable iff every `(state, plant-symbol)` pair has at
/// most one successor state, whatever the control.
pub fn check_observability(a: &DesAutomaton) -> ObservabilityReport {
    let mut targets: BTreeMap<(&str, PlantSymbol), BTreeSet<&str>> = BTreeMap::new();
    for t in a.transitions() {
        targets
            .entry((t.from.as_str(), t.output))
            .or_default()
            .insert(t.to.as_str());
    }
    let order: HashMap<&str, usize> = a
        .states()
        .iter()
        .enumerate()
        .map(|(i, s)| (s.symbol.as_str(), i))
        .collect();
    let mut witnesses: Vec<Witness> = targets
        .into_iter()
        .filter(|(_, to)| to.len() > 1)
        .map(|((from, symbol), to)| {
            let mut to: Vec<&str> = to.into_iter().collect();
            to.sort_by_key(|s| order.get(s).copied());
            Witness {
                from: from.to_string(),
                symbol,
                targets: to.into_iter().map(String::from).collect(),
            }
        })
        .collect();
    witnesses.sort_by_key(|w| (order.get(w.from.as_str()).copied(), w.symbol));
    ObservabilityReport {
        observable: witnesses.is_empty(),
        witnesses,
    }
}

/// Recovers the unique state sequence that produces `symbols` from `initial`.
/// Refuses unobservable automata.
pub fn reconstruct(
    a: &DesAutomaton,
    initial: &str,
    symbols: &[PlantSymbol],
) -> Result<Vec<String>> {
    let report = check_observability(a);
    if !report.observable {
        return Err(Error::NotObservable {
            witnesses: report.witnesses.len(),
        });
    }
    if a.state(initial).is_none() {
        return Err(Error::input(format!("unknown initial state {initial}")));
    }
    let mut next: HashMap<(&str, PlantSymbol), &str> = HashMap::new();
    for t in a.transitions() {
        next.insert((t.from.as_str(), t.output), t.to.as_str());
    }
    let mut path = vec![initial.to_string()];
    let mut current = a.state(initial).expect("checked").symbol.as_str();
    for (k, z) in symbols.iter().enumerate() {
        current = next
            .get(&(current, *z))
            .copied()
            .ok_or_else(|| Error::Inadmissible {
                position: k + 1,
                state: current.to_string(),
                symbol: z.to_string(),
            })?;
        path.push(current.to_string());
    }
    Ok(path)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Termination {
    /// Every control symbol produced its plant-event.
    ControlsExhausted,
    /// The control at `step` (0-based) ran for the whole horizon without an event.
    NoEvent {
        step: usize,
        control: String,
        time: f64,
    },
}

/// A closed-loop discrete evolution together with its continuous waypoints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    pub states: Vec<String>,
    pub controls: Vec<String>,
    pub symbols: Vec<PlantSymbol>,
    pub event_times: Vec<f64>,
    /// Initial state, every event state, and the final state of a run that
    /// ended without an event.
    pub waypoints: Vec<Sample>,
    pub termination: Termination,
    pub simultaneous_events: usize,
}

/// Applies `controls` one per discrete step, switching exactly at each
/// plant-event, and records the resulting evolution. Stops after the last
/// control's event or when a control produces no event within the horizon.
pub fn simulate_closed_loop(
    system: &PlantSystem,
    registry: &mut CellRegistry,
    x0: &[f64],
    controls: &[String],
    cfg: &ExtractionConfig,
) -> Result<Trace> {
    cfg.validate()?;
    if controls.is_empty() {
        return Err(Error::input("control sequence is empty"));
    }
    if x0.len() != system.state_dim() {
        return Err(Error::input(format!(
            "initial state has dimension {}, plant expects {}",
            x0.len(),
            system.state_dim()
        )));
    }
    for c in controls {
        system.alphabet().actuate(c)?;
    }
    let mut cell = system
        .partition()
        .cell_of(registry, x0, cfg.tol.eps_h)?
        .signs()
        .clone();
    let mut trace = Trace {
        states: vec![registry
            .lookup(&cell)
            .expect("registered")
            .symbol()
            .to_string()],
        controls: Vec::new(),
        symbols: Vec::new(),
        event_times: Vec::new(),
        waypoints: vec![Sample {
            time: 0.0,
            state: x0.to_vec(),
        }],
        termination: Termination::ControlsExhausted,
        simultaneous_events: 0,
    };
    let mut t = 0.0;
    let mut x = x0.to_vec();
    for (step, control) in controls.iter().enumerate() {
        let u = system.alphabet().actuate(control)?;
        let run = first_event(
            system.field(),
            system.partition(),
            &cell,
            t,
            &x,
            u,
            cfg.horizon,
            cfg.dt,
            cfg.tol,
        )?;
        trace.controls.push(control.clone());
        trace.simultaneous_events += usize::from(run.simultaneous);
        let Some(event) = run.event else {
            trace.waypoints.push(Sample {
                time: run.end_time,
                state: run.end_state,
            });
            trace.termination = Termination::NoEvent {
                step,
                control: control.clone(),
                time: run.end_time,
            };
            break;
        };
        cell = cell.with_component(event.surface, event.direction.sign());
        trace
            .states
            .push(registry.register(cell.clone())?.symbol().to_string());
        trace.symbols.push(event.symbol());
        trace.event_times.push(event.time);
        trace.waypoints.push(Sample {
            time: event.time,
            state: event.state.clone(),
        });
        t = event.time;
        x = event.state;
    }
    Ok(trace)
}
