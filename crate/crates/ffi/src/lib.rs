//! C ABI for the `desabs` engine.
//!
//! Systems and automata cross the boundary as opaque handles owned by the
//! caller and released with their `_free` function. Every fallible call
//! returns a [`DesStatus`]; on failure a description is available from
//! [`desabs_last_error_message`] on the same thread. Strings returned through
//! `char **` out-parameters are NUL-terminated UTF-8 and must be released
//! with [`desabs_string_free`].
//!
//! List arguments (control symbols, plant symbols) are comma-separated
//! strings such as `"r3,r1"` or `"z1+,z2-"`.

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use desabs::io::{automaton_from_json, automaton_to_json, to_dot, trace_to_json};
use desabs::{
    check_observability, extract, reconstruct, simulate_closed_loop, ConfigOverrides, Error,
    ExtractionConfig, PlantSymbol, PlantSystem,
};

/// Bumped whenever a signature or struct layout in this header changes.
pub const DESABS_ABI_VERSION: u32 = 1;

/// Result of every fallible call. Codes 1 to 4 match the exit status of the
/// `desabs` command line tool.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DesStatus {
    Ok = 0,
    InvalidInput = 1,
    NotObservable = 2,
    Inadmissible = 3,
    NumericFailure = 4,
    NullPointer = 5,
    Panicked = 6,
}

/// Plant, control alphabet, partition and sampling box.
pub struct DesSystem {
    inner: PlantSystem,
}

/// Extracted or loaded DES-plant automaton.
pub struct DesAutomaton {
    inner: desabs::DesAutomaton,
}

/// Numeric settings for extraction and simulation. Fill with
/// `desabs_options_default` and adjust; passing NULL instead uses the
/// system's own defaults.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DesOptions {
    pub samples_per_cell: usize,
    pub horizon: f64,
    pub dt: f64,
    pub eps_t: f64,
    pub eps_h: f64,
    pub seed: u64,
}

impl From<&ExtractionConfig> for DesOptions {
    fn from(c: &ExtractionConfig) -> Self {
        DesOptions {
            samples_per_cell: c.samples_per_cell,
            horizon: c.horizon,
            dt: c.dt,
            eps_t: c.tol.eps_t,
            eps_h: c.tol.eps_h,
            seed: c.seed,
        }
    }
}

impl DesOptions {
    fn overrides(&self) -> ConfigOverrides {
        ConfigOverrides {
            dt: Some(self.dt),
            horizon: Some(self.horizon),
            samples: Some(self.samples_per_cell),
            eps_t: Some(self.eps_t),
            eps_h: Some(self.eps_h),
            seed: Some(self.seed),
        }
    }
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

struct Failure {
    status: DesStatus,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::Input(_) | Error::BoundaryState { .. } | Error::Capacity { .. } => {
                DesStatus::InvalidInput
            }
            Error::NotObservable { .. } => DesStatus::NotObservable,
            Error::Inadmissible { .. } => DesStatus::Inadmissible,
            Error::Divergence { .. } | Error::EmptyDomain { .. } => DesStatus::NumericFailure,
        };
        Failure {
            status,
            message: e.to_string(),
        }
    }
}

fn null(what: &str) -> Failure {
    Failure {
        status: DesStatus::NullPointer,
        message: format!("{what} is NULL"),
    }
}

fn set_last_error(message: &str) {
    let c = CString::new(message.replace('\0', " ")).expect("interior NULs removed");
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(c));
}

/// Runs `body`, converting errors and panics into a status code.
fn guard(body: impl FnOnce() -> Result<(), Failure>) -> DesStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|slot| *slot.borrow_mut() = None);
            DesStatus::Ok
        }
        Ok(Err(f)) => {
            set_last_error(&f.message);
            f.status
        }
        Err(payload) => {
            let what = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_last_error(&format!("internal panic: {what}"));
            DesStatus::Panicked
        }
    }
}

unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p).to_str().map_err(|_| Failure {
        status: DesStatus::InvalidInput,
        message: format!("{what} is not valid UTF-8"),
    })
}

unsafe fn out_ptr<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| null(what))
}

fn into_c_string(s: String) -> *mut c_char {
    CString::new(s.replace('\0', " "))
        .expect("interior NULs removed")
        .into_raw()
}

fn split_list(s: &str) -> Vec<String> {
    s.split(',')
        .map(|p| p.trim().to_string())
        .filter(|p| !p.is_empty())
        .collect()
}

unsafe fn config(system: &PlantSystem, options: *const DesOptions) -> ExtractionConfig {
    match options.as_ref() {
        Some(o) => ExtractionConfig::default().with_overrides(&o.overrides()),
        None => system.config(&ConfigOverrides::default()),
    }
}

#[no_mangle]
pub extern "C" fn desabs_abi_version() -> u32 {
    DESABS_ABI_VERSION
}

/// Message of the most recent failure on this thread, or NULL when the
/// latest status-returning call succeeded. The pointer stays valid until the
/// next status-returning call on this thread.
#[no_mangle]
pub extern "C" fn desabs_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

#[no_mangle]
pub unsafe extern "C" fn desabs_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Parses a system description in the JSON file format.
#[no_mangle]
pub unsafe extern "C" fn desabs_system_from_json(
    json: *const c_char,
    out: *mut *mut DesSystem,
) -> DesStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        *out = ptr::null_mut();
        let inner = PlantSystem::from_json_str(text(json, "json")?)?;
        *out = Box::into_raw(Box::new(DesSystem { inner }));
        Ok(())
    })
}

/// The double integrator with axis hypersurfaces and controls -1, 0, 1.
#[no_mangle]
pub unsafe extern "C" fn desabs_system_double_integrator(out: *mut *mut DesSystem) -> DesStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        *out = Box::into_raw(Box::new(DesSystem {
            inner: PlantSystem::double_integrator(),
        }));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn desabs_system_free(system: *mut DesSystem) {
    if !system.is_null() {
        drop(Box::from_raw(system));
    }
}

/// Writes the system's default settings into `out`.
#[no_mangle]
pub unsafe extern "C" fn desabs_options_default(
    system: *const DesSystem,
    out: *mut DesOptions,
) -> DesStatus {
    guard(|| {
        let system = system.as_ref().ok_or_else(|| null("system"))?;
        *out_ptr(out, "out")? = DesOptions::from(&system.inner.config(&ConfigOverrides::default()));
        Ok(())
    })
}

/// Builds the automaton of `system`. `options` may be NULL.
#[no_mangle]
pub unsafe extern "C" fn desabs_extract(
    system: *const DesSystem,
    options: *const DesOptions,
    out: *mut *mut DesAutomaton,
) -> DesStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        *out = ptr::null_mut();
        let system = &system.as_ref().ok_or_else(|| null("system"))?.inner;
        let inner = extract(system, &config(system, options))?;
        *out = Box::into_raw(Box::new(DesAutomaton { inner }));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn desabs_automaton_from_json(
    json: *const c_char,
    out: *mut *mut DesAutomaton,
) -> DesStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        *out = ptr::null_mut();
        let inner = automaton_from_json(text(json, "json")?)?;
        *out = Box::into_raw(Box::new(DesAutomaton { inner }));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn desabs_automaton_to_json(
    automaton: *const DesAutomaton,
    out: *mut *mut c_char,
) -> DesStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        *out = ptr::null_mut();
        let a = &automaton.as_ref().ok_or_else(|| null("automaton"))?.inner;
        *out = into_c_string(automaton_to_json(a));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn desabs_automaton_free(automaton: *mut DesAutomaton) {
    if !automaton.is_null() {
        drop(Box::from_raw(automaton));
    }
}

/// Number of states, or 0 for a NULL handle.
#[no_mangle]
pub unsafe extern "C" fn desabs_automaton_num_states(automaton: *const DesAutomaton) -> usize {
    automaton.as_ref().map_or(0, |a| a.inner.states().len())
}

/// Number of transitions, or 0 for a NULL handle.
#[no_mangle]
pub unsafe extern "C" fn desabs_automaton_num_transitions(automaton: *const DesAutomaton) -> usize {
    automaton
        .as_ref()
        .map_or(0, |a| a.inner.transitions().len())
}

/// Sets `*observable` and the number of (state, plant-symbol) pairs with
/// more than one successor. `witnesses` may be NULL.
#[no_mangle]
pub unsafe extern "C" fn desabs_check_observability(
    automaton: *const DesAutomaton,
    observable: *mut bool,
    witnesses: *mut usize,
) -> DesStatus {
    guard(|| {
        let a = &automaton.as_ref().ok_or_else(|| null("automaton"))?.inner;
        let observable = out_ptr(observable, "observable")?;
        let report = check_observability(a);
        *observable = report.observable;
        if let Some(w) = witnesses.as_mut() {
            *w = report.witnesses.len();
        }
        Ok(())
    })
}

/// Recovers the state sequence driven by `symbols` from `initial` and
/// returns it space-separated in `*out_states`. On an inadmissible symbol
/// `*failed_position` (if not NULL) receives its 1-based position.
#[no_mangle]
pub unsafe extern "C" fn desabs_reconstruct(
    automaton: *const DesAutomaton,
    initial: *const c_char,
    symbols: *const c_char,
    out_states: *mut *mut c_char,
    failed_position: *mut usize,
) -> DesStatus {
    guard(|| {
        let out = out_ptr(out_states, "out_states")?;
        *out = ptr::null_mut();
        if let Some(p) = failed_position.as_mut() {
            *p = 0;
        }
        let a = &automaton.as_ref().ok_or_else(|| null("automaton"))?.inner;
        let initial = text(initial, "initial")?;
        let zs = split_list(text(symbols, "symbols")?)
            .iter()
            .map(|s| s.parse::<PlantSymbol>())
            .collect::<Result<Vec<_>, _>>()?;
        match reconstruct(a, initial, &zs) {
            Ok(states) => {
                *out = into_c_string(states.join(" "));
                Ok(())
            }
            Err(e) => {
                if let (Error::Inadmissible { position, .. }, Some(p)) =
                    (&e, failed_position.as_mut())
                {
                    *p = *position;
                }
                Err(e.into())
            }
        }
    })
}

/// Runs the closed loop from `x0` under the comma-separated `controls` and
/// returns the trace as JSON. `options` may be NULL.
#[no_mangle]
pub unsafe extern "C" fn desabs_simulate(
    system: *const DesSystem,
    x0: *const f64,
    x0_len: usize,
    controls: *const c_char,
    options: *const DesOptions,
    out_trace_json: *mut *mut c_char,
) -> DesStatus {
    guard(|| {
        let out = out_ptr(out_trace_json, "out_trace_json")?;
        *out = ptr::null_mut();
        let system = &system.as_ref().ok_or_else(|| null("system"))?.inner;
        if x0.is_null() {
            return Err(null("x0"));
        }
        let x0 = std::slice::from_raw_parts(x0, x0_len);
        let controls = split_list(text(controls, "controls")?);
        let mut registry = system.registry();
        let trace = simulate_closed_loop(
            system,
            &mut registry,
            x0,
            &controls,
            &config(system, options),
        )?;
        *out = into_c_string(trace_to_json(&trace));
        Ok(())
    })
}

/// Graphviz rendering of the automaton.
#[no_mangle]
pub unsafe extern "C" fn desabs_export_dot(
    automaton: *const DesAutomaton,
    out: *mut *mut c_char,
) -> DesStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        *out = ptr::null_mut();
        let a = &automaton.as_ref().ok_or_else(|| null("automaton"))?.inner;
        *out = into_c_string(to_dot(a));
        Ok(())
    })
}
