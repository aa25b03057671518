//! Continuous plant `x' = f(x, u)` driven by a finite set of control values.
//!
//! The actuator maps control symbols bijectively onto control values and holds
//! each value until the next symbol arrives. Trajectories are produced with a
//! fixed-step classical Runge-Kutta scheme so that the dense output is evenly
//! spaced in time.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_DT: f64 = 1e-3;
pub const DEFAULT_HORIZON: f64 = 100.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlEntry {
    pub symbol: String,
    pub value: Vec<f64>,
}

/// Finite control alphabet together with the actuator map `symbol -> value`.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlAlphabet {
    entries: Vec<ControlEntry>,
}

impl ControlAlphabet {
    pub fn new(entries: Vec<ControlEntry>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::input("control alphabet is empty"));
        }
        let m = entries[0].value.len();
        for (i, e) in entries.iter().enumerate() {
            if e.symbol.is_empty() {
                return Err(Error::input(format!(
                    "control {} has an empty symbol",
                    i + 1
                )));
            }
            if e.value.len() != m {
                return Err(Error::input(format!(
                    "control {}: value has {} components, expected {m}",
                    e.symbol,
                    e.value.len()
                )));
            }
            if e.value.iter().any(|v| !v.is_finite()) {
                return Err(Error::input(format!(
                    "control {}: value is not finite",
                    e.symbol
                )));
            }
            for prev in &entries[..i] {
                if prev.symbol == e.symbol {
                    return Err(Error::input(format!(
                        "duplicate control symbol {}",
                        e.symbol
                    )));
                }
                if prev.value == e.value {
                    return Err(Error::input(format!(
                        "controls {} and {} share the value {:?}; the actuator map must be bijective",
                        prev.symbol, e.symbol, e.value
                    )));
                }
            }
        }
        Ok(ControlAlphabet { entries })
    }

    pub fn entries(&self) -> &[ControlEntry] {
        &self.entries
    }

    pub fn symbols(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|e| e.symbol.as_str())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Dimension `m` of the control values.
    pub fn control_dim(&self) -> usize {
        self.entries[0].value.len()
    }

    /// The actuator map.
    pub fn actuate(&self, symbol: &str) -> Result<&[f64]> {
        self.entries
            .iter()
            .find(|e| e.symbol == symbol)
            .map(|e| e.value.as_slice())
            .ok_or_else(|| Error::input(format!("unknown control symbol {symbol:?}")))
    }

    /// Inverse of [`ControlAlphabet::actuate`].
    pub fn symbol_of(&self, value: &[f64]) -> Option<&str> {
        self.entries
            .iter()
            .find(|e| e.value == value)
            .map(|e| e.symbol.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BuiltinField {
    /// `x1' = x2, x2' = u`
    DoubleIntegrator,
}

impl BuiltinField {
    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "double_integrator" => Some(BuiltinField::DoubleIntegrator),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            BuiltinField::DoubleIntegrator => "double_integrator",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum VectorField {
    /// `A x + B u`, matrices stored row-major.
    Linear {
        a: Vec<Vec<f64>>,
        b: Vec<Vec<f64>>,
    },
    Builtin(BuiltinField),
}

impl VectorField {
    pub fn linear(a: Vec<Vec<f64>>, b: Vec<Vec<f64>>) -> Result<Self> {
        let n = a.len();
        if n == 0 {
            return Err(Error::input("matrix A is empty"));
        }
        if let Some(row) = a.iter().position(|r| r.len() != n) {
            return Err(Error::input(format!(
                "matrix A must be {n}x{n}; row {} has {} entries",
                row + 1,
                a[row].len()
            )));
        }
        if b.len() != n {
            return Err(Error::input(format!(
                "matrix B must have {n} rows, found {}",
                b.len()
            )));
        }
        let m = b[0].len();
        if m == 0 || b.iter().any(|r| r.len() != m) {
            return Err(Error::input(
                "matrix B rows must have the same nonzero length",
            ));
        }
        if a.iter().chain(&b).flatten().any(|v| !v.is_finite()) {
            return Err(Error::input("matrix entries must be finite"));
        }
        Ok(VectorField::Linear { a, b })
    }

    pub fn double_integrator() -> Self {
        VectorField::Builtin(BuiltinField::DoubleIntegrator)
    }

    /// State dimension `n`.
    pub fn state_dim(&self) -> usize {
        match self {
            VectorField::Linear { a, .. } => a.len(),
            VectorField::Builtin(BuiltinField::DoubleIntegrator) => 2,
        }
    }

    /// Control dimension `m`.
    pub fn control_dim(&self) -> usize {
        match self {
            VectorField::Linear { b, .. } => b[0].len(),
            VectorField::Builtin(BuiltinField::DoubleIntegrator) => 1,
        }
    }

    pub fn evaluate(&self, x: &[f64], u: &[f64]) -> Result<Vec<f64>> {
        self.check(x, u)?;
        let mut out = vec![0.0; x.len()];
        self.eval_into(x, u, &mut out);
        Ok(out)
    }

    pub(crate) fn check(&self, x: &[f64], u: &[f64]) -> Result<()> {
        if x.len() != self.state_dim() {
            return Err(Error::input(format!(
                "state has dimension {}, plant expects {}",
                x.len(),
                self.state_dim()
            )));
        }
        if u.len() != self.control_dim() {
            return Err(Error::input(format!(
                "control has dimension {}, plant expects {}",
                u.len(),
                self.control_dim()
            )));
        }
        Ok(())
    }

    #[inline]
    fn eval_into(&self, x: &[f64], u: &[f64], out: &mut [f64]) {
        match self {
            VectorField::Linear { a, b } => {
                for (i, o) in out.iter_mut().enumerate() {
                    let ax: f64 = a[i].iter().zip(x).map(|(p, q)| p * q).sum();
                    let bu: f64 = b[i].iter().zip(u).map(|(p, q)| p * q).sum();
                    *o = ax + bu;
                }
            }
            VectorField::Builtin(BuiltinField::DoubleIntegrator) => {
                out[0] = x[1];
                out[1] = u[0];
            }
        }
    }
}

/// Reusable RK4 scratch space; stepping does not allocate.
#[derive(Debug, Clone)]
pub(crate) struct Rk4 {
    k1: Vec<f64>,
    k2: Vec<f64>,
    k3: Vec<f64>,
    k4: Vec<f64>,
    tmp: Vec<f64>,
}

impl Rk4 {
    pub(crate) fn new(n: usize) -> Self {
        Rk4 {
            k1: vec![0.0; n],
            k2: vec![0.0; n],
            k3: vec![0.0; n],
            k4: vec![0.0; n],
            tmp: vec![0.0; n],
        }
    }

    /// Advances `x` in place by one step; returns false if the result is not finite.
    #[allow(clippy::needless_range_loop)]
    pub(crate) fn step(&mut self, f: &VectorField, x: &mut [f64], u: &[f64], dt: f64) -> bool {
        let n = x.len();
        f.eval_into(x, u, &mut self.k1);
        for i in 0..n {
            self.tmp[i] = x[i] + 0.5 * dt * self.k1[i];
        }
        f.eval_into(&self.tmp, u, &mut self.k2);
        for i in 0..n {
            self.tmp[i] = x[i] + 0.5 * dt * self.k2[i];
        }
        f.eval_into(&self.tmp, u, &mut self.k3);
        for i in 0..n {
            self.tmp[i] = x[i] + dt * self.k3[i];
        }
        f.eval_into(&self.tmp, u, &mut self.k4);
        let mut finite = true;
        for i in 0..n {
            x[i] += dt / 6.0 * (self.k1[i] + 2.0 * self.k2[i] + 2.0 * self.k3[i] + self.k4[i]);
            finite &= x[i].is_finite();
        }
        finite
    }
}

/// One classical fourth-order Runge-Kutta step. A divergence error reports the
/// time relative to the start of the step.
pub fn integrate_step(f: &VectorField, x: &[f64], u: &[f64], dt: f64) -> Result<Vec<f64>> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::input(format!(
            "step size must be positive, got {dt}"
        )));
    }
    f.check(x, u)?;
    let mut out = x.to_vec();
    if Rk4::new(x.len()).step(f, &mut out, u, dt) {
        Ok(out)
    } else {
        Err(Error::Divergence { time: dt })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub time: f64,
    pub state: Vec<f64>,
}

/// Dense trajectory under a single constant control value.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectorySegment {
    pub start_time: f64,
    pub control: Vec<f64>,
    pub samples: Vec<Sample>,
}

impl TrajectorySegment {
    pub fn start_state(&self) -> &[f64] {
        &self.samples[0].state
    }

    pub fn end_time(&self) -> f64 {
        self.samples.last().map_or(self.start_time, |s| s.time)
    }
}

/// Number of fixed steps needed for the last sample to reach `horizon`.
pub(crate) fn step_count(horizon: f64, dt: f64) -> usize {
    let ratio = horizon / dt;
    let nearest = ratio.round();
    if (ratio - nearest).abs() <= 1e-9 * nearest.max(1.0) {
        nearest as usize
    } else {
        ratio.ceil() as usize
    }
}

pub(crate) fn check_step_params(horizon: f64, dt: f64) -> Result<()> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::input(format!(
            "step size must be positive, got {dt}"
        )));
    }
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(Error::input(format!(
            "horizon must be positive, got {horizon}"
        )));
    }
    Ok(())
}

pub fn flow(
    f: &VectorField,
    x0: &[f64],
    u: &[f64],
    horizon: f64,
    dt: f64,
) -> Result<TrajectorySegment> {
    flow_from(f, 0.0, x0, u, horizon, dt)
}

/// Dense RK4 trajectory starting at time `t0`. Sample times are `t0 + k dt`.
pub fn flow_from(
    f: &VectorField,
    t0: f64,
    x0: &[f64],
    u: &[f64],
    horizon: f64,
    dt: f64,
) -> Result<TrajectorySegment> {
    check_step_params(horizon, dt)?;
    f.check(x0, u)?;
    let steps = step_count(horizon, dt);
    let mut rk = Rk4::new(x0.len());
    let mut x = x0.to_vec();
    let mut samples = Vec::with_capacity(steps + 1);
    samples.push(Sample {
        time: t0,
        state: x.clone(),
    });
    for k in 1..=steps {
        let t = t0 + k as f64 * dt;
        if !rk.step(f, &mut x, u, dt) {
            return Err(Error::Divergence { time: t });
        }
        samples.push(Sample {
            time: t,
            state: x.clone(),
        });
    }
    Ok(TrajectorySegment {
        start_time: t0,
        control: u.to_vec(),
        samples,
    })
}

/// Analytic solution of the double integrator under constant scalar input.
pub fn closed_form_double_integrator(x0: [f64; 2], u: f64, t: f64) -> [f64; 2] {
    [x0[0] + t * x0[1] + 0.5 * t * t * u, x0[1] + t * u]
}

/// Control symbols with strictly increasing activation times.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlSchedule {
    entries: Vec<(String, f64)>,
}

impl ControlSchedule {
    pub fn new(entries: Vec<(String, f64)>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::input("control schedule is empty"));
        }
        for w in entries.windows(2) {
            // Written negated so NaN times are rejected too.
            #[allow(clippy::neg_cmp_op_on_partial_ord)]
            if !(w[0].1 < w[1].1) {
                return Err(Error::input(format!(
                    "activation times must be strictly increasing ({} then {})",
                    w[0].1, w[1].1
                )));
            }
        }
        if entries.iter().any(|(_, t)| !t.is_finite()) {
            return Err(Error::input("activation times must be finite"));
        }
        Ok(ControlSchedule { entries })
    }

    pub fn entries(&self) -> &[(String, f64)] {
        &self.entries
    }

    /// Symbol active at time `t`, i.e. the last one with activation time `<= t`.
    pub fn active_at(&self, t: f64) -> Option<&str> {
        self.entries
            .iter()
            .take_while(|(_, tc)| *tc <= t)
            .last()
            .map(|(s, _)| s.as_str())
    }

    /// Trajectory of the piecewise-constant control signal from the first
    /// activation time up to `end_time`, one segment per schedule entry.
    pub fn flow(
        &self,
        f: &VectorField,
        alphabet: &ControlAlphabet,
        x0: &[f64],
        end_time: f64,
        dt: f64,
    ) -> Result<Vec<TrajectorySegment>> {
        let mut segments = Vec::with_capacity(self.entries.len());
        let mut x = x0.to_vec();
        for (k, (symbol, t_start)) in self.entries.iter().enumerate() {
            let t_end = self.entries.get(k + 1).map_or(end_time, |(_, t)| *t);
            if t_end <= *t_start {
                break;
            }
            let u = alphabet.actuate(symbol)?;
            let seg = flow_until(f, *t_start, &x, u, t_end, dt)?;
            x = seg
                .samples
                .last()
                .expect("segment has samples")
                .state
                .clone();
            segments.push(seg);
        }
        Ok(segments)
    }
}

/// Like [`flow_from`] but the final step is shortened to land exactly on `t_end`.
fn flow_until(
    f: &VectorField,
    t0: f64,
    x0: &[f64],
    u: &[f64],
    t_end: f64,
    dt: f64,
) -> Result<TrajectorySegment> {
    check_step_params(t_end - t0, dt)?;
    f.check(x0, u)?;
    let full = ((t_end - t0) / dt).floor() as usize;
    let mut rk = Rk4::new(x0.len());
    let mut x = x0.to_vec();
    let mut samples = vec![Sample {
        time: t0,
        state: x.clone(),
    }];
    for k in 1..=full {
        let t = t0 + k as f64 * dt;
        if !rk.step(f, &mut x, u, dt) {
            return Err(Error::Divergence { time: t });
        }
        samples.push(Sample {
            time: t,
            state: x.clone(),
        });
    }
    let last = t0 + full as f64 * dt;
    let rest = t_end - last;
    if rest > 1e-12 * dt.max(1.0) {
        if !rk.step(f, &mut x, u, rest) {
            return Err(Error::Divergence { time: t_end });
        }
        samples.push(Sample {
            time: t_end,
            state: x.clone(),
        });
    }
    Ok(TrajectorySegment {
        start_time: t0,
        control: u.to_vec(),
        samples,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn alphabet() -> ControlAlphabet {
        ControlAlphabet::new(vec![
            ControlEntry {
                symbol: "r1".into(),
                value: vec![-1.0],
            },
            ControlEntry {
                symbol: "r2".into(),
                value: vec![0.0],
            },
            ControlEntry {
                symbol: "r3".into(),
                value: vec![1.0],
            },
        ])
        .unwrap()
    }

    #[test]
    fn actuator_values() {
        let a = alphabet();
        assert_eq!(a.actuate("r1").unwrap(), &[-1.0]);
        assert_eq!(a.actuate("r2").unwrap(), &[0.0]);
        assert_eq!(a.actuate("r3").unwrap(), &[1.0]);
        assert!(a.actuate("r4").is_err());
        for e in a.entries() {
            assert_eq!(
                a.symbol_of(a.actuate(&e.symbol).unwrap()),
                Some(e.symbol.as_str())
            );
        }
    }

    #[test]
    fn alphabet_must_be_bijective() {
        let dup_symbol = ControlAlphabet::new(vec![
            ControlEntry {
                symbol: "r1".into(),
                value: vec![0.0],
            },
            ControlEntry {
                symbol: "r1".into(),
                value: vec![1.0],
            },
        ]);
        assert!(dup_symbol
            .unwrap_err()
            .to_string()
            .contains("duplicate control symbol r1"));
        let dup_value = ControlAlphabet::new(vec![
            ControlEntry {
                symbol: "a".into(),
                value: vec![1.0],
            },
            ControlEntry {
                symbol: "b".into(),
                value: vec![1.0],
            },
        ]);
        assert!(dup_value.is_err());
    }

    #[test]
    fn rk4_step_examples() {
        let f = VectorField::double_integrator();
        assert_eq!(
            integrate_step(&f, &[0.0, 0.0], &[1.0], 1.0).unwrap(),
            vec![0.5, 1.0]
        );
        assert_eq!(
            integrate_step(&f, &[1.0, 2.0], &[0.0], 3.0).unwrap(),
            vec![7.0, 2.0]
        );
        assert!(integrate_step(&f, &[1.0, 2.0], &[0.0], 0.0).is_err());
    }

    #[test]
    fn divergence_is_reported() {
        let f = VectorField::linear(vec![vec![1e200]], vec![vec![0.0]]).unwrap();
        assert!(matches!(
            integrate_step(&f, &[1e200], &[0.0], 1.0),
            Err(Error::Divergence { .. })
        ));
    }

    #[test]
    fn linear_field_matches_hand_computation() {
        let f = VectorField::linear(
            vec![vec![1.0, 2.0], vec![-3.0, 0.5]],
            vec![vec![1.0], vec![-2.0]],
        )
        .unwrap();
        assert_eq!(f.evaluate(&[1.0, -1.0], &[2.0]).unwrap(), vec![1.0, -7.5]);
        assert!(VectorField::linear(vec![vec![1.0, 2.0]], vec![vec![1.0]]).is_err());
    }

    #[test]
    fn one_step_flow_has_two_samples() {
        let f = VectorField::double_integrator();
        let seg = flow(&f, &[1.0, 1.0], &[0.0], 0.01, 0.01).unwrap();
        assert_eq!(seg.samples.len(), 2);
        assert_eq!(seg.samples[0].time, 0.0);
        assert_eq!(seg.samples[0].state, vec![1.0, 1.0]);
    }

    #[test]
    fn flow_preserves_integral_curves() {
        let f = VectorField::double_integrator();
        let up = flow(&f, &[-1.0, 0.5], &[1.0], 2.0, 0.01).unwrap();
        let k = -1.0 - 0.125;
        for s in &up.samples {
            assert!((s.state[0] - s.state[1] * s.state[1] / 2.0 - k).abs() < 1e-9);
        }
        assert!(up.end_time() >= 2.0);
        let down = flow(&f, &[-1.0, 0.5], &[-1.0], 2.0, 0.01).unwrap();
        let k = -1.0 + 0.125;
        for s in &down.samples {
            assert!((s.state[0] + s.state[1] * s.state[1] / 2.0 - k).abs() < 1e-9);
        }
    }

    #[test]
    fn closed_form_examples() {
        assert_eq!(
            closed_form_double_integrator([0.0, 0.0], 1.0, 2.0),
            [2.0, 2.0]
        );
        assert_eq!(
            closed_form_double_integrator([3.0, -1.0], 0.0, 4.0),
            [-1.0, -1.0]
        );
        assert_eq!(
            closed_form_double_integrator([-1.0, 0.5], 1.0, 0.0),
            [-1.0, 0.5]
        );
    }

    #[test]
    fn schedule_validation_and_lookup() {
        assert!(ControlSchedule::new(vec![("r1".into(), 1.0), ("r2".into(), 1.0)]).is_err());
        let s = ControlSchedule::new(vec![("r1".into(), 0.0), ("r3".into(), 2.0)]).unwrap();
        assert_eq!(s.active_at(0.0), Some("r1"));
        assert_eq!(s.active_at(1.999), Some("r1"));
        assert_eq!(s.active_at(2.0), Some("r3"));
        assert_eq!(s.active_at(-1.0), None);
    }

    #[test]
    fn single_entry_schedule_equals_constant_flow() {
        let f = VectorField::double_integrator();
        let a = alphabet();
        let s = ControlSchedule::new(vec![("r3".into(), 0.0)]).unwrap();
        let segs = s.flow(&f, &a, &[-1.0, 0.5], 1.0, 0.01).unwrap();
        let direct = flow(&f, &[-1.0, 0.5], &[1.0], 1.0, 0.01).unwrap();
        assert_eq!(segs.len(), 1);
        assert_eq!(segs[0].samples.len(), direct.samples.len());
        for (p, q) in segs[0].samples.iter().zip(&direct.samples) {
            assert_eq!(p.state, q.state);
        }
    }

    #[test]
    fn piecewise_schedule_matches_closed_form() {
        let f = VectorField::double_integrator();
        let a = alphabet();
        let s = ControlSchedule::new(vec![("r3".into(), 0.0), ("r1".into(), 1.5)]).unwrap();
        let segs = s.flow(&f, &a, &[0.0, 0.0], 2.25, 0.1).unwrap();
        let mid = closed_form_double_integrator([0.0, 0.0], 1.0, 1.5);
        let end = closed_form_double_integrator(mid, -1.0, 0.75);
        let last = &segs[1].samples.last().unwrap();
        assert!((last.time - 2.25).abs() < 1e-12);
        assert!((last.state[0] - end[0]).abs() < 1e-12);
        assert!((last.state[1] - end[1]).abs() < 1e-12);
    }
}
