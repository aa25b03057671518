//! Plant-event detection.
//!
//! A plant-event `(i+)` / `(i-)` is a strict crossing of the kernel of `h_i`
//! into its positive / negative halfspace. Crossings are detected at
//! integrator-step resolution: the sign of every functional is compared
//! between consecutive dense samples (samples within `eps_h` of a kernel are
//! skipped), and each bracketed crossing is then localized by bisection,
//! re-stepping the integrator from the start of the bracket.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::partition::{Direction, PartitionSpec, Sign, SignVector, DEFAULT_EPS_H};
use crate::plant::{check_step_params, step_count, Rk4, TrajectorySegment, VectorField};

pub const DEFAULT_EPS_T: f64 = 1e-9;

const MAX_BISECTIONS: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EventTolerances {
    /// Width of the time bracket at which bisection may stop; also the
    /// separation below which two events count as simultaneous.
    pub eps_t: f64,
    /// Dead band around each kernel.
    pub eps_h: f64,
}

impl Default for EventTolerances {
    fn default() -> Self {
        EventTolerances {
            eps_t: DEFAULT_EPS_T,
            eps_h: DEFAULT_EPS_H,
        }
    }
}

/// Output symbol `z<i>+` / `z<i>-` emitted for a crossing of kernel `i`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PlantSymbol {
    pub surface: usize,
    pub direction: Direction,
}

impl PlantSymbol {
    pub fn new(surface: usize, direction: Direction) -> Self {
        PlantSymbol { surface, direction }
    }
}

impl fmt::Display for PlantSymbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "z{}{}", self.surface, self.direction.as_char())
    }
}

impl FromStr for PlantSymbol {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || {
            Error::input(format!(
                "invalid plant symbol {s:?} (expected e.g. z1+ or z2-)"
            ))
        };
        let body = s.trim().strip_prefix('z').ok_or_else(bad)?;
        let (index, dir) = body.split_at(body.len().saturating_sub(1));
        let direction = match dir {
            "+" => Direction::Positive,
            "-" => Direction::Negative,
            _ => return Err(bad()),
        };
        if index.is_empty() || !index.bytes().all(|b| b.is_ascii_digit()) {
            return Err(bad());
        }
        let surface: usize = index.parse().map_err(|_| bad())?;
        if surface == 0 {
            return Err(bad());
        }
        Ok(PlantSymbol { surface, direction })
    }
}

impl Serialize for PlantSymbol {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for PlantSymbol {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// The `2N` plant-symbols of a partition with `n_functionals` functionals,
/// ordered `z1+, z1-, z2+, ...`.
pub fn plant_alphabet(n_functionals: usize) -> Vec<PlantSymbol> {
    (1..=n_functionals)
        .flat_map(|i| {
            [
                PlantSymbol::new(i, Direction::Positive),
                PlantSymbol::new(i, Direction::Negative),
            ]
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlantEvent {
    /// 1-based index of the crossed kernel.
    pub surface: usize,
    pub direction: Direction,
    pub time: f64,
    /// State at the localized crossing, within `eps_h` of the kernel.
    pub state: Vec<f64>,
    /// First dense sample strictly inside the entered halfspace.
    pub post_time: f64,
    pub post_state: Vec<f64>,
}

impl PlantEvent {
    pub fn symbol(&self) -> PlantSymbol {
        event_to_symbol(self)
    }
}

pub fn event_to_symbol(e: &PlantEvent) -> PlantSymbol {
    PlantSymbol::new(e.surface, e.direction)
}

/// A functional stayed inside its dead band for consecutive samples, i.e. the
/// trajectory slides along a kernel. Sliding motion is not modeled.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlidingDiagnostic {
    pub surface: usize,
    pub time: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct EventScan {
    pub events: Vec<PlantEvent>,
    pub sliding: Vec<SlidingDiagnostic>,
}

/// Per-functional sign memory across consecutive samples.
#[derive(Debug, Clone)]
struct CrossingTracker {
    last_strict: Vec<Sign>,
    kernel_run: Vec<usize>,
}

impl CrossingTracker {
    fn new(carried: &SignVector) -> Self {
        CrossingTracker {
            last_strict: carried.components().to_vec(),
            kernel_run: vec![0; carried.len()],
        }
    }

    /// Feeds the next sample; returns the strict sign changes it completes
    /// and the surfaces that just started sliding.
    fn advance(
        &mut self,
        partition: &PartitionSpec,
        x: &[f64],
        eps_h: f64,
        crossings: &mut Vec<(usize, Direction)>,
        sliding: &mut Vec<usize>,
    ) {
        for (i, f) in partition.functionals().iter().enumerate() {
            let s = Sign::of(f.eval_unchecked(x), eps_h);
            if s.is_zero() {
                self.kernel_run[i] += 1;
                if self.kernel_run[i] == 2 {
                    sliding.push(i + 1);
                }
                continue;
            }
            self.kernel_run[i] = 0;
            if s != self.last_strict[i] {
                crossings.push((i + 1, Direction::from_sign(s).expect("strict sign")));
                self.last_strict[i] = s;
            }
        }
    }

    fn mark_start(&mut self, partition: &PartitionSpec, x: &[f64], eps_h: f64) {
        for (i, f) in partition.functionals().iter().enumerate() {
            if Sign::of(f.eval_unchecked(x), eps_h).is_zero() {
                self.kernel_run[i] = 1;
            }
        }
    }
}

/// Bisection on `[t_a, t_b]` for the instant `h_surface` takes the sign of
/// `direction`. States inside the bracket are obtained by a single RK4 step
/// from `(t_a, x_a)`.
#[allow(clippy::too_many_arguments)]
fn localize(
    field: &VectorField,
    partition: &PartitionSpec,
    surface: usize,
    direction: Direction,
    (t_a, x_a): (f64, &[f64]),
    (t_b, x_b): (f64, &[f64]),
    u: &[f64],
    tol: EventTolerances,
    rk: &mut Rk4,
) -> (f64, Vec<f64>) {
    let h = partition
        .functional(surface)
        .expect("surface index in range");
    let target = direction.sign();
    let (mut lo, mut hi) = (t_a, t_b);
    let mut x_hi = x_b.to_vec();
    let mut g_hi = h.eval_unchecked(x_b);
    let mut x_mid = x_a.to_vec();
    for _ in 0..MAX_BISECTIONS {
        if hi - lo < tol.eps_t && g_hi.abs() < tol.eps_h {
            break;
        }
        let mid = lo + 0.5 * (hi - lo);
        if !(mid > lo && mid < hi) {
            break;
        }
        x_mid.copy_from_slice(x_a);
        rk.step(field, &mut x_mid, u, mid - t_a);
        let g = h.eval_unchecked(&x_mid);
        if Sign::of(g, 0.0) == target {
            hi = mid;
            x_hi.copy_from_slice(&x_mid);
            g_hi = g;
        } else {
            lo = mid;
        }
    }
    (hi, x_hi)
}

/// All plant-events along a dense segment, ordered by event time.
///
/// The field must be the one that produced the segment; it is used to
/// re-step inside brackets during localization.
pub fn detect_events(
    segment: &TrajectorySegment,
    field: &VectorField,
    partition: &PartitionSpec,
    tol: EventTolerances,
) -> Result<EventScan> {
    let first = segment
        .samples
        .first()
        .ok_or_else(|| Error::input("segment has no samples"))?;
    partition.check_dimension(&first.state)?;
    field.check(&first.state, &segment.control)?;
    let start = partition.quality(&first.state, tol.eps_h)?;
    if !start.is_consistent() {
        return Err(Error::BoundaryState {
            state: first.state.clone(),
            surfaces: start.zero_surfaces(),
        });
    }
    let mut tracker = CrossingTracker::new(&start);
    let mut rk = Rk4::new(first.state.len());
    let mut scan = EventScan::default();
    let mut crossings = Vec::new();
    let mut sliding = Vec::new();
    for pair in segment.samples.windows(2) {
        let (a, b) = (&pair[0], &pair[1]);
        crossings.clear();
        sliding.clear();
        tracker.advance(partition, &b.state, tol.eps_h, &mut crossings, &mut sliding);
        scan.sliding
            .extend(sliding.iter().map(|&surface| SlidingDiagnostic {
                surface,
                time: b.time,
            }));
        for &(surface, direction) in &crossings {
            let (time, state) = localize(
                field,
                partition,
                surface,
                direction,
                (a.time, &a.state),
                (b.time, &b.state),
                &segment.control,
                tol,
                &mut rk,
            );
            scan.events.push(PlantEvent {
                surface,
                direction,
                time,
                state,
                post_time: b.time,
                post_state: b.state.clone(),
            });
        }
    }
    scan.events
        .sort_by(|p, q| p.time.total_cmp(&q.time).then(p.surface.cmp(&q.surface)));
    Ok(scan)
}

/// Groups time-ordered events closer than `eps_t` and orders each group by
/// ascending surface index. The flag is set when any group has more than one
/// member, i.e. when events were not separated in time.
pub fn check_simultaneity(events: Vec<PlantEvent>, eps_t: f64) -> (Vec<PlantEvent>, bool) {
    let mut out = Vec::with_capacity(events.len());
    let mut violated = false;
    let mut group: Vec<PlantEvent> = Vec::new();
    for e in events {
        if let Some(last) = group.last() {
            if e.time - last.time >= eps_t {
                violated |= group.len() > 1;
                group.sort_by_key(|g| g.surface);
                out.append(&mut group);
            }
        }
        group.push(e);
    }
    violated |= group.len() > 1;
    group.sort_by_key(|g| g.surface);
    out.append(&mut group);
    (out, violated)
}

/// Result of integrating until the first plant-event.
#[derive(Debug, Clone, PartialEq)]
pub struct FirstEvent {
    /// `None` when the horizon expired without a crossing.
    pub event: Option<PlantEvent>,
    /// Another crossing happened within `eps_t` of the reported one.
    pub simultaneous: bool,
    pub sliding: Vec<SlidingDiagnostic>,
    /// Time and state where integration stopped.
    pub end_time: f64,
    pub end_state: Vec<f64>,
}

/// Integrates from `(t0, x0)` under constant control `u` until the first
/// plant-event or until `horizon` has elapsed.
///
/// `carried` is the cell the state belongs to. Components where `x0` lies
/// within `eps_h` of a kernel take their sign from `carried`, which lets a
/// run start exactly at the state of a previous event.
#[allow(clippy::too_many_arguments)]
pub fn first_event(
    field: &VectorField,
    partition: &PartitionSpec,
    carried: &SignVector,
    t0: f64,
    x0: &[f64],
    u: &[f64],
    horizon: f64,
    dt: f64,
    tol: EventTolerances,
) -> Result<FirstEvent> {
    check_step_params(horizon, dt)?;
    field.check(x0, u)?;
    partition.check_dimension(x0)?;
    if carried.len() != partition.len() || !carried.is_consistent() {
        return Err(Error::input(format!(
            "cell signs {carried} do not label a cell of this partition"
        )));
    }
    let q = partition.quality(x0, tol.eps_h)?;
    for (i, (&s, &c)) in q.components().iter().zip(carried.components()).enumerate() {
        if !s.is_zero() && s != c {
            return Err(Error::input(format!(
                "state {x0:?} is not in cell {carried}: h{} has sign {}",
                i + 1,
                s as i8
            )));
        }
    }

    let mut tracker = CrossingTracker::new(carried);
    tracker.mark_start(partition, x0, tol.eps_h);
    let mut rk = Rk4::new(x0.len());
    let mut loc_rk = Rk4::new(x0.len());
    let steps = step_count(horizon, dt);
    let mut x_a = x0.to_vec();
    let mut x_b = x0.to_vec();
    let mut t_a = t0;
    let mut crossings = Vec::new();
    let mut sliding_surfaces = Vec::new();
    let mut sliding = Vec::new();
    let mut candidates: Vec<PlantEvent> = Vec::new();
    let mut k = 0;
    while k < steps {
        k += 1;
        let t_b = t0 + k as f64 * dt;
        x_b.copy_from_slice(&x_a);
        if !rk.step(field, &mut x_b, u, dt) {
            return Err(Error::Divergence { time: t_b });
        }
        crossings.clear();
        sliding_surfaces.clear();
        tracker.advance(
            partition,
            &x_b,
            tol.eps_h,
            &mut crossings,
            &mut sliding_surfaces,
        );
        sliding.extend(
            sliding_surfaces
                .iter()
                .map(|&surface| SlidingDiagnostic { surface, time: t_b }),
        );
        for &(surface, direction) in &crossings {
            let (time, state) = localize(
                field,
                partition,
                surface,
                direction,
                (t_a, &x_a),
                (t_b, &x_b),
                u,
                tol,
                &mut loc_rk,
            );
            candidates.push(PlantEvent {
                surface,
                direction,
                time,
                state,
                post_time: t_b,
                post_state: x_b.clone(),
            });
        }
        let earliest = candidates.iter().map(|e| e.time).reduce(f64::min);
        std::mem::swap(&mut x_a, &mut x_b);
        t_a = t_b;
        match earliest {
            // A crossing just past the end of this step could still tie with
            // the earliest one; look one step further before deciding.
            Some(t_min) if t_b - t_min < tol.eps_t && k < steps => continue,
            Some(_) => break,
            None => {}
        }
    }

    if candidates.is_empty() {
        return Ok(FirstEvent {
            event: None,
            simultaneous: false,
            sliding,
            end_time: t_a,
            end_state: x_a,
        });
    }
    candidates.sort_by(|p, q| p.time.total_cmp(&q.time).then(p.surface.cmp(&q.surface)));
    let t_min = candidates[0].time;
    let tied = candidates
        .iter()
        .filter(|e| e.time - t_min < tol.eps_t)
        .count();
    let (ordered, _) = check_simultaneity(candidates, tol.eps_t);
    let event = ordered.into_iter().next().expect("non-empty");
    Ok(FirstEvent {
        end_time: event.time,
        end_state: event.state.clone(),
        event: Some(event),
        simultaneous: tied > 1,
        sliding,
    })
}
