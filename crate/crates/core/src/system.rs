//! Plant systems: dynamics, actuator, partition and sampling domain bundled
//! together, plus the JSON system-definition file that describes them.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::event_engine::EventTolerances;
use crate::partition::{BuiltinFunctional, CellRegistry, Functional, PartitionSpec, SignVector};
use crate::plant::{
    BuiltinField, ControlAlphabet, ControlEntry, VectorField, DEFAULT_DT, DEFAULT_HORIZON,
};

pub const SYSTEM_FORMAT_VERSION: u32 = 1;

pub const DEFAULT_SAMPLES_PER_CELL: usize = 64;
pub const DEFAULT_SEED: u64 = 0;

/// Axis-aligned box `[lo_1, hi_1] x ... x [lo_n, hi_n]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SamplingBox {
    bounds: Vec<[f64; 2]>,
}

impl SamplingBox {
    pub fn new(bounds: Vec<[f64; 2]>) -> Result<Self> {
        if bounds.is_empty() {
            return Err(Error::input("sampling box has no dimensions"));
        }
        for (i, [lo, hi]) in bounds.iter().enumerate() {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(Error::input(format!(
                    "sampling box dimension {} must satisfy lo < hi (got [{lo}, {hi}])",
                    i + 1
                )));
            }
        }
        Ok(SamplingBox { bounds })
    }

    pub fn cube(n: usize, half_width: f64) -> Result<Self> {
        SamplingBox::new(vec![[-half_width, half_width]; n])
    }

    pub fn bounds(&self) -> &[[f64; 2]] {
        &self.bounds
    }

    pub fn dimension(&self) -> usize {
        self.bounds.len()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.bounds.len()
            && x.iter()
                .zip(&self.bounds)
                .all(|(v, [lo, hi])| lo <= v && v <= hi)
    }
}

/// Optional numeric settings; unset fields fall through to the next layer
/// (command line, then system file, then built-in defaults).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigOverrides {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps_t: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps_h: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl ConfigOverrides {
    /// Fields set in `self` win over those in `base`.
    pub fn or(&self, base: &ConfigOverrides) -> ConfigOverrides {
        ConfigOverrides {
            dt: self.dt.or(base.dt),
            horizon: self.horizon.or(base.horizon),
            samples: self.samples.or(base.samples),
            eps_t: self.eps_t.or(base.eps_t),
            eps_h: self.eps_h.or(base.eps_h),
            seed: self.seed.or(base.seed),
        }
    }
}

/// Numeric settings for extraction and closed-loop simulation.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtractionConfig {
    pub samples_per_cell: usize,
    /// Longest time a run waits for a plant-event under one control value.
    pub horizon: f64,
    pub dt: f64,
    pub tol: EventTolerances,
    pub seed: u64,
    /// Overrides the system's own sampling box when set.
    pub sampling_box: Option<SamplingBox>,
}

impl Default for ExtractionConfig {
    fn default() -> Self {
        ExtractionConfig {
            samples_per_cell: DEFAULT_SAMPLES_PER_CELL,
            horizon: DEFAULT_HORIZON,
            dt: DEFAULT_DT,
            tol: EventTolerances::default(),
            seed: DEFAULT_SEED,
            sampling_box: None,
        }
    }
}

impl ExtractionConfig {
    pub fn with_overrides(mut self, o: &ConfigOverrides) -> Self {
        if let Some(v) = o.dt {
            self.dt = v;
        }
        if let Some(v) = o.horizon {
            self.horizon = v;
        }
        if let Some(v) = o.samples {
            self.samples_per_cell = v;
        }
        if let Some(v) = o.eps_t {
            self.tol.eps_t = v;
        }
        if let Some(v) = o.eps_h {
            self.tol.eps_h = v;
        }
        if let Some(v) = o.seed {
            self.seed = v;
        }
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.samples_per_cell == 0 {
            return Err(Error::input("samples per cell must be at least 1"));
        }
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::input(format!(
                    "{name} must be positive and finite, got {v}"
                )))
            }
        };
        positive("dt", self.dt)?;
        positive("horizon", self.horizon)?;
        positive("eps_t", self.tol.eps_t)?;
        positive("eps_h", self.tol.eps_h)?;
        Ok(())
    }
}

/// Continuous plant together with its actuator, partition and sampling box.
#[derive(Debug, Clone, PartialEq)]
pub struct PlantSystem {
    pub name: String,
    field: VectorField,
    alphabet: ControlAlphabet,
    partition: PartitionSpec,
    sampling_box: SamplingBox,
    /// Pinned `(symbol, signs)` labels; other cells are numbered on discovery.
    cell_labels: Vec<(String, SignVector)>,
    defaults: ConfigOverrides,
}

impl PlantSystem {
    pub fn new(
        name: impl Into<String>,
        field: VectorField,
        alphabet: ControlAlphabet,
        partition: PartitionSpec,
        sampling_box: SamplingBox,
    ) -> Result<Self> {
        let n = field.state_dim();
        if alphabet.control_dim() != field.control_dim() {
            return Err(Error::input(format!(
                "control values have dimension {}, plant expects {}",
                alphabet.control_dim(),
                field.control_dim()
            )));
        }
        if let Some(d) = partition.dimension() {
            if d != n {
                return Err(Error::input(format!(
                    "partition functionals have dimension {d}, plant state has {n}"
                )));
            }
        }
        if sampling_box.dimension() != n {
            return Err(Error::input(format!(
                "sampling box has {} dimensions, plant state has {n}",
                sampling_box.dimension()
            )));
        }
        Ok(PlantSystem {
            name: name.into(),
            field,
            alphabet,
            partition,
            sampling_box,
            cell_labels: Vec::new(),
            defaults: ConfigOverrides::default(),
        })
    }

    /// Pins state symbols to sign vectors. Fails on duplicates or malformed signs.
    pub fn with_cell_labels(mut self, labels: Vec<(String, SignVector)>) -> Result<Self> {
        CellRegistry::with_labels(self.partition.len(), labels.iter().cloned())?;
        self.cell_labels = labels;
        Ok(self)
    }

    pub fn with_defaults(mut self, defaults: ConfigOverrides) -> Self {
        self.defaults = defaults;
        self
    }

    /// The double integrator `x1' = x2, x2' = u` with `u` in `{-1, 0, 1}`
    /// (symbols `r1, r2, r3`), partitioned by `h1 = x1`, `h2 = x2`, sampled
    /// on `[-5, 5]^2`, with the quadrant cells pinned to `p1 = [1 1]`,
    /// `p2 = [-1 1]`, `p3 = [-1 -1]`, `p4 = [1 -1]`.
    pub fn double_integrator() -> Self {
        PlantSystem::new(
            "double_integrator",
            VectorField::double_integrator(),
            double_integrator_alphabet(),
            axis_partition(2),
            SamplingBox::cube(2, 5.0).expect("valid box"),
        )
        .expect("consistent built-in system")
        .with_cell_labels(double_integrator_cells())
        .expect("valid pinned labels")
    }

    pub fn field(&self) -> &VectorField {
        &self.field
    }

    pub fn alphabet(&self) -> &ControlAlphabet {
        &self.alphabet
    }

    pub fn partition(&self) -> &PartitionSpec {
        &self.partition
    }

    pub fn sampling_box(&self) -> &SamplingBox {
        &self.sampling_box
    }

    pub fn state_dim(&self) -> usize {
        self.field.state_dim()
    }

    pub fn cell_labels(&self) -> &[(String, SignVector)] {
        &self.cell_labels
    }

    /// Settings carried by the system file.
    pub fn defaults(&self) -> &ConfigOverrides {
        &self.defaults
    }

    /// Configuration from built-in defaults, the system's own settings and
    /// then `overrides`, in increasing priority.
    pub fn config(&self, overrides: &ConfigOverrides) -> ExtractionConfig {
        ExtractionConfig::default().with_overrides(&overrides.or(&self.defaults))
    }

    /// Fresh registry holding only the pinned labels.
    pub fn registry(&self) -> CellRegistry {
        CellRegistry::with_labels(self.partition.len(), self.cell_labels.iter().cloned())
            .expect("labels validated at construction")
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let file: SystemFile =
            serde_json::from_str(text).map_err(|e| Error::input(format!("system file: {e}")))?;
        file.into_system()
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::input(format!("cannot read {}: {e}", path.display())))?;
        PlantSystem::from_json_str(&text)
            .map_err(|e| Error::input(format!("{}: {}", path.display(), strip_prefix(&e))))
    }
}

fn strip_prefix(e: &Error) -> String {
    match e {
        Error::Input(msg) => msg.clone(),
        other => other.to_string(),
    }
}

fn double_integrator_alphabet() -> ControlAlphabet {
    ControlAlphabet::new(
        [("r1", -1.0), ("r2", 0.0), ("r3", 1.0)]
            .into_iter()
            .map(|(s, v)| ControlEntry {
                symbol: s.into(),
                value: vec![v],
            })
            .collect(),
    )
    .expect("distinct controls")
}

fn double_integrator_cells() -> Vec<(String, SignVector)> {
    [
        ("p1", [1, 1]),
        ("p2", [-1, 1]),
        ("p3", [-1, -1]),
        ("p4", [1, -1]),
    ]
    .into_iter()
    .map(|(s, b)| (s.to_string(), SignVector::from_ints(&b).expect("signs")))
    .collect()
}

/// `h_i(x) = x_i` for `i = 1..=n`.
pub fn axis_partition(n: usize) -> PartitionSpec {
    PartitionSpec::new(
        (1..=n)
            .map(|i| {
                let mut normal = vec![0.0; n];
                normal[i - 1] = 1.0;
                Functional::affine(i, normal, 0.0).expect("unit normal")
            })
            .collect(),
    )
    .expect("axis partition")
}

// On-disk layout of a system definition.

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SystemFile {
    #[serde(default)]
    format_version: Option<u32>,
    #[serde(default)]
    name: Option<String>,
    plant: PlantSection,
    #[serde(default)]
    controls: Option<Vec<ControlEntry>>,
    #[serde(default)]
    partition: Option<Vec<FunctionalEntry>>,
    #[serde(default)]
    sampling_box: Option<Vec<[f64; 2]>>,
    #[serde(default)]
    cells: Option<Vec<CellEntry>>,
    #[serde(default)]
    config: Option<ConfigOverrides>,
}

#[derive(Debug, Deserialize)]
#[serde(rename_all = "lowercase", deny_unknown_fields)]
enum PlantSection {
    Builtin(String),
    Linear {
        #[serde(rename = "A")]
        a: Vec<Vec<f64>>,
        #[serde(rename = "B")]
        b: Vec<Vec<f64>>,
    },
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct FunctionalEntry {
    id: usize,
    #[serde(default)]
    normal: Option<Vec<f64>>,
    #[serde(default)]
    offset: Option<f64>,
    #[serde(default)]
    builtin: Option<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct CellEntry {
    symbol: String,
    signs: Vec<i8>,
}

impl SystemFile {
    fn into_system(self) -> Result<PlantSystem> {
        if let Some(v) = self.format_version {
            if v != SYSTEM_FORMAT_VERSION {
                return Err(Error::input(format!(
                    "unsupported format_version {v} (expected {SYSTEM_FORMAT_VERSION})"
                )));
            }
        }
        let (field, builtin) = match self.plant {
            PlantSection::Builtin(name) => {
                let b = BuiltinField::from_name(&name)
                    .ok_or_else(|| Error::input(format!("plant: unknown builtin {name:?}")))?;
                (VectorField::Builtin(b), Some(b))
            }
            PlantSection::Linear { a, b } => (
                VectorField::linear(a, b)
                    .map_err(|e| Error::input(format!("plant: {}", strip_prefix(&e))))?,
                None,
            ),
        };
        let reference = builtin.map(|b| match b {
            BuiltinField::DoubleIntegrator => PlantSystem::double_integrator(),
        });
        let missing = |what: &str| Error::input(format!("{what} is required for a linear plant"));

        let alphabet = match self.controls {
            Some(c) => ControlAlphabet::new(c)
                .map_err(|e| Error::input(format!("controls: {}", strip_prefix(&e))))?,
            None => reference
                .as_ref()
                .map(|r| r.alphabet.clone())
                .ok_or_else(|| missing("controls"))?,
        };
        let partition = match self.partition {
            Some(entries) => parse_partition(entries)?,
            None => reference
                .as_ref()
                .map(|r| r.partition.clone())
                .ok_or_else(|| missing("partition"))?,
        };
        let sampling_box = match self.sampling_box {
            Some(b) => SamplingBox::new(b)
                .map_err(|e| Error::input(format!("sampling_box: {}", strip_prefix(&e))))?,
            None => reference
                .as_ref()
                .map(|r| r.sampling_box.clone())
                .ok_or_else(|| missing("sampling_box"))?,
        };
        let name = self
            .name
            .or_else(|| builtin.map(|b| b.name().to_string()))
            .unwrap_or_else(|| "system".into());
        let mut system = PlantSystem::new(name, field, alphabet, partition, sampling_box)?;

        let labels = match self.cells {
            Some(cells) => cells
                .into_iter()
                .map(|c| {
                    SignVector::from_ints(&c.signs)
                        .map(|s| (c.symbol.clone(), s))
                        .map_err(|e| {
                            Error::input(format!("cells: {}: {}", c.symbol, strip_prefix(&e)))
                        })
                })
                .collect::<Result<Vec<_>>>()?,
            // Pinned labels only carry over when the partition is the reference one.
            None => match &reference {
                Some(r) if r.partition == system.partition => r.cell_labels.clone(),
                _ => Vec::new(),
            },
        };
        system = system
            .with_cell_labels(labels)
            .map_err(|e| Error::input(format!("cells: {}", strip_prefix(&e))))?;
        let config = self.config.unwrap_or_default();
        ExtractionConfig::default()
            .with_overrides(&config)
            .validate()
            .map_err(|e| Error::input(format!("config: {}", strip_prefix(&e))))?;
        Ok(system.with_defaults(config))
    }
}

fn parse_partition(entries: Vec<FunctionalEntry>) -> Result<PartitionSpec> {
    let functionals = entries
        .into_iter()
        .enumerate()
        .map(|(pos, e)| {
            let ctx = |msg: String| Error::input(format!("partition[{pos}]: {msg}"));
            match (e.normal, e.builtin) {
                (Some(normal), None) => Functional::affine(e.id, normal, e.offset.unwrap_or(0.0))
                    .map_err(|err| ctx(strip_prefix(&err))),
                (None, Some(name)) => {
                    if e.offset.is_some() {
                        return Err(ctx(format!(
                            "functional {}: builtin functionals take no offset",
                            e.id
                        )));
                    }
                    BuiltinFunctional::from_name(&name)
                        .map(|b| Functional::builtin(e.id, b))
                        .ok_or_else(|| {
                            ctx(format!("functional {}: unknown builtin {name:?}", e.id))
                        })
                }
                _ => Err(ctx(format!(
                    "functional {}: exactly one of `normal` or `builtin` is required",
                    e.id
                ))),
            }
        })
        .collect::<Result<Vec<_>>>()?;
    PartitionSpec::new(functionals)
        .map_err(|e| Error::input(format!("partition: {}", strip_prefix(&e))))
}
