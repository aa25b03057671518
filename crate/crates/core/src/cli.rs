//! Command-line front end.
//!
//! Exit status: 0 success, 1 input error, 2 automaton not observable,
//! 3 inadmissible plant-symbol sequence, 4 numeric failure.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::abstraction::{
    check_observability, extract, reconstruct, simulate_closed_loop, Termination,
};
use crate::error::Error;
use crate::event_engine::PlantSymbol;
use crate::io::{automaton_to_json, read_automaton, to_dot, trace_to_json, write_file};
use crate::system::{ConfigOverrides, PlantSystem};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 1;
pub const EXIT_UNOBSERVABLE: i32 = 2;
pub const EXIT_INADMISSIBLE: i32 = 3;
pub const EXIT_NUMERIC: i32 = 4;

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Input(_) | Error::BoundaryState { .. } | Error::Capacity { .. } => EXIT_INPUT,
        Error::NotObservable { .. } => EXIT_UNOBSERVABLE,
        Error::Inadmissible { .. } => EXIT_INADMISSIBLE,
        Error::Divergence { .. } | Error::EmptyDomain { .. } => EXIT_NUMERIC,
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "desabs",
    version,
    about = "Discrete-event abstraction of continuous plants"
)]
struct Cli {
    #[command(flatten)]
    global: GlobalOpts,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct GlobalOpts {
    /// Seed of the initial-state sampler
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Integrator step size
    #[arg(long, global = true)]
    dt: Option<f64>,
    /// Longest wait for a plant-event under one control value
    #[arg(long, global = true)]
    horizon: Option<f64>,
    /// Initial states per (cell, control) pair
    #[arg(long, global = true)]
    samples: Option<usize>,
    /// Event-time localization tolerance
    #[arg(long = "eps-t", global = true)]
    eps_t: Option<f64>,
    /// Dead band around each hypersurface
    #[arg(long = "eps-h", global = true)]
    eps_h: Option<f64>,
    /// Output file
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

impl GlobalOpts {
    fn overrides(&self) -> ConfigOverrides {
        ConfigOverrides {
            dt: self.dt,
            horizon: self.horizon,
            samples: self.samples,
            eps_t: self.eps_t,
            eps_h: self.eps_h,
            seed: self.seed,
        }
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Build the DES-plant automaton of a system file
    Extract { system: PathBuf },
    /// Run the closed loop from an initial state under a control sequence
    Simulate {
        system: PathBuf,
        /// Initial state, comma separated
        #[arg(long, allow_hyphen_values = true)]
        x0: String,
        /// Control symbols, comma separated
        #[arg(long, allow_hyphen_values = true)]
        controls: String,
        /// Name cells after the states of this automaton file
        #[arg(long)]
        automaton: Option<PathBuf>,
    },
    /// Check that every (state, plant-symbol) pair has a unique successor
    CheckObservability { automaton: PathBuf },
    /// Recover the discrete state sequence behind a plant-symbol sequence
    Reconstruct {
        automaton: PathBuf,
        #[arg(long)]
        initial: String,
        /// Plant symbols, comma separated (e.g. z1+,z2-)
        #[arg(long, allow_hyphen_values = true)]
        symbols: String,
    },
    /// Print the automaton as a Graphviz digraph
    ExportDot { automaton: PathBuf },
}

/// Runs the command line `args` (including the program name) and returns the
/// process exit status.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
            let _ = if e.use_stderr() {
                write!(err, "{}", e.render())
            } else {
                write!(out, "{}", e.render())
            };
            return code;
        }
    };
    match dispatch(&cli, out) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            exit_code(&e)
        }
    }
}

fn parse_reals(text: &str, what: &str) -> Result<Vec<f64>, Error> {
    if text.trim().is_empty() {
        return Err(Error::Input(format!("usage: --{what} must not be empty")));
    }
    text.split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::Input(format!("--{what}: {s:?} is not a finite number")))
        })
        .collect()
}

fn parse_list(text: &str) -> Vec<String> {
    text.split(',')
        .map(|s| s.trim().to_string())
        .filter(|s| !s.is_empty())
        .collect()
}

fn default_out(input: &Path, suffix: &str) -> PathBuf {
    let stem = input
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "system".into());
    PathBuf::from(format!("{stem}.{suffix}.json"))
}

fn dispatch(cli: &Cli, out: &mut dyn Write) -> Result<i32, Error> {
    let overrides = cli.global.overrides();
    let io_err = |e: std::io::Error| Error::Input(format!("cannot write output: {e}"));
    match &cli.command {
        Command::Extract { system } => {
            let sys = PlantSystem::from_path(system)?;
            let cfg = sys.config(&overrides);
            let automaton = extract(&sys, &cfg)?;
            let target = cli
                .global
                .out
                .clone()
                .unwrap_or_else(|| default_out(system, "automaton"));
            write_file(&target, &automaton_to_json(&automaton))?;
            let report = check_observability(&automaton);
            let meta = automaton.metadata();
            (|| -> std::io::Result<()> {
                writeln!(out, "system: {}", sys.name)?;
                writeln!(out, "states: {}", automaton.states().len())?;
                for s in automaton.states() {
                    writeln!(out, "  {} {}", s.symbol, s.signs)?;
                }
                writeln!(out, "transitions: {}", automaton.transitions().len())?;
                for t in automaton.transitions() {
                    writeln!(
                        out,
                        "  {} -> {} [{} / {}]",
                        t.from, t.to, t.control, t.output
                    )?;
                }
                writeln!(
                    out,
                    "observable: {}",
                    if report.observable { "yes" } else { "no" }
                )?;
                for w in &report.witnesses {
                    writeln!(
                        out,
                        "  witness: {} [{}] -> {{{}}}",
                        w.from,
                        w.symbol,
                        w.targets.join(", ")
                    )?;
                }
                writeln!(out, "simultaneous events: {}", meta.simultaneous_events)?;
                if meta.sliding_runs > 0 {
                    writeln!(
                        out,
                        "runs sliding along a hypersurface: {}",
                        meta.sliding_runs
                    )?;
                }
                if meta.diverged_runs > 0 {
                    writeln!(out, "diverged runs: {}", meta.diverged_runs)?;
                }
                let pairs: Vec<String> = meta
                    .no_event
                    .iter()
                    .map(|r| format!("{}/{} ({} runs)", r.from, r.control, r.runs))
                    .collect();
                writeln!(
                    out,
                    "no-event pairs: {}",
                    if pairs.is_empty() {
                        "none".into()
                    } else {
                        pairs.join(", ")
                    }
                )?;
                writeln!(out, "automaton written to {}", target.display())
            })()
            .map_err(io_err)?;
            Ok(EXIT_OK)
        }
        Command::Simulate {
            system,
            x0,
            controls,
            automaton,
        } => {
            let x0 = parse_reals(x0, "x0")?;
            let controls = parse_list(controls);
            if controls.is_empty() {
                return Err(Error::Input(
                    "usage: --controls must list at least one control symbol".into(),
                ));
            }
            let sys = PlantSystem::from_path(system)?;
            let cfg = sys.config(&overrides);
            let mut registry = match automaton {
                Some(path) => read_automaton(path)?.registry()?,
                None => sys.registry(),
            };
            let trace = simulate_closed_loop(&sys, &mut registry, &x0, &controls, &cfg)?;
            let target = cli
                .global
                .out
                .clone()
                .unwrap_or_else(|| default_out(system, "trace"));
            write_file(&target, &trace_to_json(&trace))?;
            let symbols: Vec<String> = trace.symbols.iter().map(ToString::to_string).collect();
            (|| -> std::io::Result<()> {
                writeln!(out, "states: {}", trace.states.join(" "))?;
                writeln!(out, "symbols: {}", symbols.join(" "))?;
                let times: Vec<String> = trace.event_times.iter().map(|t| format!("{t}")).collect();
                writeln!(out, "event times: {}", times.join(" "))?;
                match &trace.termination {
                    Termination::ControlsExhausted => {
                        writeln!(out, "termination: controls exhausted")?
                    }
                    Termination::NoEvent {
                        step,
                        control,
                        time,
                    } => writeln!(
                        out,
                        "termination: no plant-event under {control} (step {}) before t = {time}",
                        step + 1
                    )?,
                }
                if trace.simultaneous_events > 0 {
                    writeln!(out, "simultaneous events: {}", trace.simultaneous_events)?;
                }
                writeln!(out, "trace written to {}", target.display())
            })()
            .map_err(io_err)?;
            Ok(EXIT_OK)
        }
        Command::CheckObservability { automaton } => {
            let a = read_automaton(automaton)?;
            let report = check_observability(&a);
            (|| -> std::io::Result<()> {
                writeln!(
                    out,
                    "observable: {}",
                    if report.observable { "yes" } else { "no" }
                )?;
                for w in &report.witnesses {
                    writeln!(
                        out,
                        "witness: {} [{}] -> {{{}}}",
                        w.from,
                        w.symbol,
                        w.targets.join(", ")
                    )?;
                }
                Ok(())
            })()
            .map_err(io_err)?;
            Ok(if report.observable {
                EXIT_OK
            } else {
                EXIT_UNOBSERVABLE
            })
        }
        Command::Reconstruct {
            automaton,
            initial,
            symbols,
        } => {
            let a = read_automaton(automaton)?;
            let zs = parse_list(symbols)
                .iter()
                .map(|s| s.parse::<PlantSymbol>())
                .collect::<Result<Vec<_>, _>>()?;
            let states = reconstruct(&a, initial, &zs)?;
            writeln!(out, "{}", states.join(" ")).map_err(io_err)?;
            Ok(EXIT_OK)
        }
        Command::ExportDot { automaton } => {
            let a = read_automaton(automaton)?;
            let dot = to_dot(&a);
            match &cli.global.out {
                Some(path) => write_file(path, &dot)?,
                None => out.write_all(dot.as_bytes()).map_err(io_err)?,
            }
            Ok(EXIT_OK)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn real_lists() {
        assert_eq!(parse_reals("-1, 0.5", "x0").unwrap(), vec![-1.0, 0.5]);
        assert!(parse_reals("", "x0").is_err());
        assert!(parse_reals("1,,2", "x0").is_err());
        assert!(parse_reals("1,nan", "x0").is_err());
    }

    #[test]
    fn symbol_lists() {
        assert_eq!(parse_list("z1+, z2-"), vec!["z1+", "z2-"]);
        assert!(parse_list("").is_empty());
    }

    #[test]
    fn exit_codes() {
        assert_eq!(exit_code(&Error::Input("x".into())), 1);
        assert_eq!(exit_code(&Error::NotObservable { witnesses: 1 }), 2);
        assert_eq!(
            exit_code(&Error::Inadmissible {
                position: 1,
                state: "p1".into(),
                symbol: "z1+".into()
            }),
            3
        );
        assert_eq!(exit_code(&Error::Divergence { time: 1.0 }), 4);
    }

    #[test]
    fn usage_errors_exit_with_input_code() {
        let mut out = Vec::new();
        let mut err = Vec::new();
        assert_eq!(run(["desabs", "bogus"], &mut out, &mut err), EXIT_INPUT);
        assert_eq!(run(["desabs", "--help"], &mut out, &mut err), EXIT_OK);
    }
}
