//! Hypersurface partition of the state space.
//!
//! A [`PartitionSpec`] holds `N` scalar functionals `h_1 .. h_N`. The kernel of
//! each functional splits the state space into a negative and a positive open
//! halfspace; the vector of signs of all functionals at a state (its *quality*)
//! identifies the cell the state belongs to. Cells are equivalence classes of
//! states with equal, fully nonzero quality vectors.
//!
//! Surface indices are 1-based everywhere in the public API, matching the
//! functional ids and the plant-symbol names (`z1+`, `z2-`, ...).

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default threshold below which `|h_i(x)|` counts as zero.
pub const DEFAULT_EPS_H: f64 = 1e-9;

/// Largest `N` accepted by [`PartitionSpec::enumerate_candidate_cells`].
pub const MAX_ENUMERATED_FUNCTIONALS: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "i8", try_from = "i8")]
#[repr(i8)]
pub enum Sign {
    Negative = -1,
    Zero = 0,
    Positive = 1,
}

impl Sign {
    /// `sgn` with a dead band: values with `|v| < eps` map to [`Sign::Zero`].
    pub fn of(value: f64, eps: f64) -> Sign {
        if value.abs() < eps {
            Sign::Zero
        } else if value > 0.0 {
            Sign::Positive
        } else {
            Sign::Negative
        }
    }

    pub fn flipped(self) -> Sign {
        match self {
            Sign::Negative => Sign::Positive,
            Sign::Zero => Sign::Zero,
            Sign::Positive => Sign::Negative,
        }
    }

    pub fn is_zero(self) -> bool {
        self == Sign::Zero
    }
}

impl From<Sign> for i8 {
    fn from(s: Sign) -> i8 {
        s as i8
    }
}

impl TryFrom<i8> for Sign {
    type Error = String;

    fn try_from(v: i8) -> std::result::Result<Self, Self::Error> {
        match v {
            -1 => Ok(Sign::Negative),
            0 => Ok(Sign::Zero),
            1 => Ok(Sign::Positive),
            other => Err(format!("sign component must be -1, 0 or 1, got {other}")),
        }
    }
}

/// Direction in which a kernel is crossed: `Positive` means entering the
/// positive halfspace of the functional.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Direction {
    Positive,
    Negative,
}

impl Direction {
    pub fn sign(self) -> Sign {
        match self {
            Direction::Positive => Sign::Positive,
            Direction::Negative => Sign::Negative,
        }
    }

    pub fn from_sign(sign: Sign) -> Option<Direction> {
        match sign {
            Sign::Positive => Some(Direction::Positive),
            Sign::Negative => Some(Direction::Negative),
            Sign::Zero => None,
        }
    }

    pub fn as_char(self) -> char {
        match self {
            Direction::Positive => '+',
            Direction::Negative => '-',
        }
    }

    pub fn reversed(self) -> Direction {
        match self {
            Direction::Positive => Direction::Negative,
            Direction::Negative => Direction::Positive,
        }
    }
}

/// Element of `{-1, 0, +1}^N`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SignVector(Vec<Sign>);

impl SignVector {
    pub fn new(components: Vec<Sign>) -> Self {
        SignVector(components)
    }

    pub fn from_ints(values: &[i8]) -> Result<Self> {
        values
            .iter()
            .map(|&v| Sign::try_from(v).map_err(Error::Input))
            .collect::<Result<Vec<_>>>()
            .map(SignVector)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn components(&self) -> &[Sign] {
        &self.0
    }

    /// Component for the 1-based surface index `surface`.
    pub fn get(&self, surface: usize) -> Option<Sign> {
        surface.checked_sub(1).and_then(|i| self.0.get(i).copied())
    }

    /// True iff no component is zero, i.e. the state is off every kernel.
    pub fn is_consistent(&self) -> bool {
        !self.0.iter().any(|s| s.is_zero())
    }

    /// 1-based indices of the zero components.
    pub fn zero_surfaces(&self) -> Vec<usize> {
        self.0
            .iter()
            .enumerate()
            .filter(|(_, s)| s.is_zero())
            .map(|(i, _)| i + 1)
            .collect()
    }

    /// Copy with the 1-based component `surface` set to `sign`.
    pub fn with_component(&self, surface: usize, sign: Sign) -> SignVector {
        let mut out = self.0.clone();
        out[surface - 1] = sign;
        SignVector(out)
    }
}

impl fmt::Display for SignVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("[")?;
        for (i, s) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            write!(f, "{}", *s as i8)?;
        }
        f.write_str("]")
    }
}

pub fn is_consistent(b: &SignVector) -> bool {
    b.is_consistent()
}

/// Smooth functionals registered in code, selectable by name from a system file.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BuiltinFunctional {
    /// `|x|^2 - 1`
    UnitSphere,
}

impl BuiltinFunctional {
    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "unit_sphere" => Some(BuiltinFunctional::UnitSphere),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            BuiltinFunctional::UnitSphere => "unit_sphere",
        }
    }

    fn evaluate(self, x: &[f64]) -> f64 {
        match self {
            BuiltinFunctional::UnitSphere => x.iter().map(|v| v * v).sum::<f64>() - 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum FunctionalKind {
    /// `normal . x + offset`
    Affine {
        normal: Vec<f64>,
        offset: f64,
    },
    Builtin(BuiltinFunctional),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Functional {
    id: usize,
    kind: FunctionalKind,
}

impl Functional {
    pub fn affine(id: usize, normal: Vec<f64>, offset: f64) -> Result<Self> {
        if normal.is_empty() {
            return Err(Error::input(format!(
                "functional {id}: normal vector is empty"
            )));
        }
        if normal
            .iter()
            .chain(std::iter::once(&offset))
            .any(|v| !v.is_finite())
        {
            return Err(Error::input(format!(
                "functional {id}: coefficients must be finite"
            )));
        }
        if normal.iter().all(|&v| v == 0.0) {
            return Err(Error::input(format!(
                "functional {id}: normal vector is zero (gradient must not vanish)"
            )));
        }
        Ok(Functional {
            id,
            kind: FunctionalKind::Affine { normal, offset },
        })
    }

    pub fn builtin(id: usize, builtin: BuiltinFunctional) -> Self {
        Functional {
            id,
            kind: FunctionalKind::Builtin(builtin),
        }
    }

    pub fn id(&self) -> usize {
        self.id
    }

    pub fn kind(&self) -> &FunctionalKind {
        &self.kind
    }

    /// State dimension implied by the functional, if it fixes one.
    pub fn dimension(&self) -> Option<usize> {
        match &self.kind {
            FunctionalKind::Affine { normal, .. } => Some(normal.len()),
            FunctionalKind::Builtin(_) => None,
        }
    }

    pub fn evaluate(&self, x: &[f64]) -> Result<f64> {
        match &self.kind {
            FunctionalKind::Affine { normal, offset } => {
                if normal.len() != x.len() {
                    return Err(Error::input(format!(
                        "functional {}: state has dimension {}, expected {}",
                        self.id,
                        x.len(),
                        normal.len()
                    )));
                }
                Ok(dot(normal, x) + offset)
            }
            FunctionalKind::Builtin(b) => Ok(b.evaluate(x)),
        }
    }

    /// Evaluation without the dimension check, for hot loops over states
    /// already validated against the partition.
    #[inline]
    pub(crate) fn eval_unchecked(&self, x: &[f64]) -> f64 {
        match &self.kind {
            FunctionalKind::Affine { normal, offset } => dot(normal, x) + offset,
            FunctionalKind::Builtin(b) => b.evaluate(x),
        }
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| p * q).sum()
}

/// Ordered set of `N >= 1` functionals with ids `1..=N`.
#[derive(Debug, Clone, PartialEq)]
pub struct PartitionSpec {
    functionals: Vec<Functional>,
}

impl PartitionSpec {
    pub fn new(functionals: Vec<Functional>) -> Result<Self> {
        if functionals.is_empty() {
            return Err(Error::input("partition needs at least one functional"));
        }
        for (pos, f) in functionals.iter().enumerate() {
            if f.id != pos + 1 {
                return Err(Error::input(format!(
                    "functional ids must be 1..N in order; position {} has id {}",
                    pos + 1,
                    f.id
                )));
            }
        }
        let mut dims = functionals.iter().filter_map(Functional::dimension);
        if let Some(first) = dims.next() {
            if let Some(other) = dims.find(|&d| d != first) {
                return Err(Error::input(format!(
                    "affine functionals disagree on state dimension ({first} vs {other})"
                )));
            }
        }
        Ok(PartitionSpec { functionals })
    }

    /// Number of functionals `N`.
    pub fn len(&self) -> usize {
        self.functionals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.functionals.is_empty()
    }

    pub fn functionals(&self) -> &[Functional] {
        &self.functionals
    }

    /// Functional with the 1-based id `surface`.
    pub fn functional(&self, surface: usize) -> Option<&Functional> {
        surface.checked_sub(1).and_then(|i| self.functionals.get(i))
    }

    pub fn dimension(&self) -> Option<usize> {
        self.functionals.iter().find_map(Functional::dimension)
    }

    pub fn check_dimension(&self, x: &[f64]) -> Result<()> {
        match self.dimension() {
            Some(n) if n != x.len() => Err(Error::input(format!(
                "state has dimension {}, partition expects {n}",
                x.len()
            ))),
            _ => Ok(()),
        }
    }

    /// Sign of every functional at `x`, with `|h_i(x)| < eps_h` mapped to zero.
    pub fn quality(&self, x: &[f64], eps_h: f64) -> Result<SignVector> {
        self.check_dimension(x)?;
        Ok(self.quality_unchecked(x, eps_h))
    }

    pub(crate) fn quality_unchecked(&self, x: &[f64], eps_h: f64) -> SignVector {
        SignVector(
            self.functionals
                .iter()
                .map(|f| Sign::of(f.eval_unchecked(x), eps_h))
                .collect(),
        )
    }

    /// Label of the cell containing `x`, registering the cell on first sight.
    pub fn cell_of(&self, registry: &mut CellRegistry, x: &[f64], eps_h: f64) -> Result<CellLabel> {
        let q = self.quality(x, eps_h)?;
        if !q.is_consistent() {
            return Err(Error::BoundaryState {
                state: x.to_vec(),
                surfaces: q.zero_surfaces(),
            });
        }
        registry.register(q).cloned()
    }

    /// All `2^N` fully nonzero sign vectors in lexicographic order (`-1 < +1`).
    /// These are candidates only; some may correspond to empty regions.
    pub fn enumerate_candidate_cells(&self) -> Result<Vec<SignVector>> {
        enumerate_sign_vectors(self.len())
    }
}

pub(crate) fn enumerate_sign_vectors(n: usize) -> Result<Vec<SignVector>> {
    if n > MAX_ENUMERATED_FUNCTIONALS {
        return Err(Error::Capacity {
            n,
            limit: MAX_ENUMERATED_FUNCTIONALS,
        });
    }
    Ok((0u32..1 << n)
        .map(|code| {
            SignVector(
                (0..n)
                    .map(|j| {
                        if code >> (n - 1 - j) & 1 == 1 {
                            Sign::Positive
                        } else {
                            Sign::Negative
                        }
                    })
                    .collect(),
            )
        })
        .collect())
}

/// Crossing between two cells: the 1-based index of the only differing
/// component and the direction the crossing takes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Adjacency {
    pub surface: usize,
    pub direction: Direction,
}

/// Returns the adjacency of `from` and `to` iff their signs differ in exactly
/// one component. The direction is `Positive` when `from` has `-1` there.
pub fn adjacency(from: &SignVector, to: &SignVector) -> Option<Adjacency> {
    if from.len() != to.len() {
        return None;
    }
    let mut differing = from
        .0
        .iter()
        .zip(&to.0)
        .enumerate()
        .filter(|(_, (a, b))| a != b);
    let (i, (&a, &b)) = differing.next()?;
    if differing.next().is_some() || a.is_zero() || b.is_zero() {
        return None;
    }
    Some(Adjacency {
        surface: i + 1,
        direction: if a == Sign::Negative {
            Direction::Positive
        } else {
            Direction::Negative
        },
    })
}

/// A consistent sign vector together with its discrete-state symbol.
///
/// Equality, ordering and hashing look at the signs only.
#[derive(Debug, Clone)]
pub struct CellLabel {
    signs: SignVector,
    symbol: String,
}

impl CellLabel {
    pub fn signs(&self) -> &SignVector {
        &self.signs
    }

    pub fn symbol(&self) -> &str {
        &self.symbol
    }
}

impl PartialEq for CellLabel {
    fn eq(&self, other: &Self) -> bool {
        self.signs == other.signs
    }
}

impl Eq for CellLabel {}

impl std::hash::Hash for CellLabel {
    fn hash<H: std::hash::Hasher>(&self, state: &mut H) {
        self.signs.hash(state)
    }
}

impl fmt::Display for CellLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.symbol)
    }
}

/// Cells discovered so far, in registration order.
///
/// Registration takes `&mut self`, so a registry has a single writer; shared
/// references are safe for any number of concurrent readers.
#[derive(Debug, Clone, Default)]
pub struct CellRegistry {
    width: Option<usize>,
    cells: Vec<CellLabel>,
    by_signs: HashMap<SignVector, usize>,
    by_symbol: HashMap<String, usize>,
}

impl CellRegistry {
    pub fn new(n_functionals: usize) -> Self {
        CellRegistry {
            width: Some(n_functionals),
            ..Default::default()
        }
    }

    /// Registry preloaded with fixed `(symbol, signs)` pairs, e.g. pinned labels
    /// of a reference system.
    pub fn with_labels<I, S>(n_functionals: usize, labels: I) -> Result<Self>
    where
        I: IntoIterator<Item = (S, SignVector)>,
        S: Into<String>,
    {
        let mut reg = CellRegistry::new(n_functionals);
        for (symbol, signs) in labels {
            reg.insert_named(symbol.into(), signs)?;
        }
        Ok(reg)
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn cells(&self) -> &[CellLabel] {
        &self.cells
    }

    pub fn lookup(&self, signs: &SignVector) -> Option<&CellLabel> {
        self.by_signs.get(signs).map(|&i| &self.cells[i])
    }

    pub fn by_symbol(&self, symbol: &str) -> Option<&CellLabel> {
        self.by_symbol.get(symbol).map(|&i| &self.cells[i])
    }

    /// Position of a cell in registration order.
    pub fn index_of(&self, signs: &SignVector) -> Option<usize> {
        self.by_signs.get(signs).copied()
    }

    /// Returns the label for `signs`, assigning the next free `p<q>` symbol if
    /// the cell has not been seen before.
    pub fn register(&mut self, signs: SignVector) -> Result<&CellLabel> {
        if let Some(&i) = self.by_signs.get(&signs) {
            return Ok(&self.cells[i]);
        }
        let mut q = self.cells.len() + 1;
        while self.by_symbol.contains_key(&format!("p{q}")) {
            q += 1;
        }
        let i = self.insert_named(format!("p{q}"), signs)?;
        Ok(&self.cells[i])
    }

    fn insert_named(&mut self, symbol: String, signs: SignVector) -> Result<usize> {
        if !signs.is_consistent() {
            return Err(Error::input(format!(
                "cell {symbol}: sign vector {signs} has a zero component"
            )));
        }
        match self.width {
            Some(w) if w != signs.len() => {
                return Err(Error::input(format!(
                    "cell {symbol}: sign vector has {} components, expected {w}",
                    signs.len()
                )))
            }
            None => self.width = Some(signs.len()),
            _ => {}
        }
        if self.by_signs.contains_key(&signs) {
            return Err(Error::input(format!(
                "cell {symbol}: signs {signs} already registered"
            )));
        }
        if self.by_symbol.contains_key(&symbol) {
            return Err(Error::input(format!("duplicate cell symbol {symbol}")));
        }
        let i = self.cells.len();
        self.by_signs.insert(signs.clone(), i);
        self.by_symbol.insert(symbol.clone(), i);
        self.cells.push(CellLabel { signs, symbol });
        Ok(i)
    }
}
