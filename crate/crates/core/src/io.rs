//! File formats: automaton and trace JSON files, and DOT export.

use std::cmp::Ordering;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::abstraction::{DesAutomaton, Trace};
use crate::error::{Error, Result};

pub const AUTOMATON_FORMAT_VERSION: u32 = 1;
pub const TRACE_FORMAT_VERSION: u32 = 1;

#[derive(Serialize)]
struct Versioned<'a, T> {
    format_version: u32,
    #[serde(flatten)]
    body: &'a T,
}

#[derive(Deserialize)]
struct VersionedOwned<T> {
    format_version: u32,
    #[serde(flatten)]
    body: T,
}

fn check_version(found: u32, expected: u32, what: &str) -> Result<()> {
    if found == expected {
        Ok(())
    } else {
        Err(Error::input(format!(
            "unsupported {what} format_version {found} (expected {expected})"
        )))
    }
}

pub fn automaton_to_json(a: &DesAutomaton) -> String {
    serde_json::to_string_pretty(&Versioned {
        format_version: AUTOMATON_FORMAT_VERSION,
        body: a,
    })
    .expect("automaton serializes")
}

pub fn automaton_from_json(text: &str) -> Result<DesAutomaton> {
    let file: VersionedOwned<DesAutomaton> =
        serde_json::from_str(text).map_err(|e| Error::input(format!("automaton file: {e}")))?;
    check_version(file.format_version, AUTOMATON_FORMAT_VERSION, "automaton")?;
    let mut a = file.body;
    a.normalize()?;
    Ok(a)
}

pub fn trace_to_json(t: &Trace) -> String {
    serde_json::to_string_pretty(&Versioned {
        format_version: TRACE_FORMAT_VERSION,
        body: t,
    })
    .expect("trace serializes")
}

pub fn trace_from_json(text: &str) -> Result<Trace> {
    let file: VersionedOwned<Trace> =
        serde_json::from_str(text).map_err(|e| Error::input(format!("trace file: {e}")))?;
    check_version(file.format_version, TRACE_FORMAT_VERSION, "trace")?;
    Ok(file.body)
}

pub fn read_automaton(path: impl AsRef<Path>) -> Result<DesAutomaton> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::input(format!("cannot read {}: {e}", path.display())))?;
    automaton_from_json(&text).map_err(|e| match e {
        Error::Input(msg) => Error::input(format!("{}: {msg}", path.display())),
        other => other,
    })
}

pub fn write_file(path: impl AsRef<Path>, contents: &str) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, contents)
        .map_err(|e| Error::input(format!("cannot write {}: {e}", path.display())))
}

/// Orders `p2` before `p10`: alphabetic prefix first, then the numeric suffix.
pub fn natural_cmp(a: &str, b: &str) -> Ordering {
    fn split(s: &str) -> (&str, Option<u64>, &str) {
        let digits_at = s.find(|c: char| c.is_ascii_digit()).unwrap_or(s.len());
        let (prefix, rest) = s.split_at(digits_at);
        let end = rest
            .find(|c: char| !c.is_ascii_digit())
            .unwrap_or(rest.len());
        (prefix, rest[..end].parse().ok(), &rest[end..])
    }
    let (pa, na, ra) = split(a);
    let (pb, nb, rb) = split(b);
    pa.cmp(pb)
        .then(na.cmp(&nb))
        .then_with(|| ra.cmp(rb))
        .then_with(|| a.cmp(b))
}

fn quoted(s: &str) -> String {
    format!("\"{}\"", s.replace('"', "\\\""))
}

/// Graphviz digraph: one node per state labeled with its symbol and sign
/// vector, one edge per transition labeled `control / output`. Nodes are
/// sorted by state symbol, edges by source, control and target.
pub fn to_dot(a: &DesAutomaton) -> String {
    let mut states: Vec<_> = a.states().iter().collect();
    states.sort_by(|p, q| natural_cmp(&p.symbol, &q.symbol));
    let mut edges: Vec<_> = a.transitions().iter().collect();
    edges.sort_by(|p, q| {
        natural_cmp(&p.from, &q.from)
            .then_with(|| natural_cmp(&p.control, &q.control))
            .then_with(|| natural_cmp(&p.to, &q.to))
            .then_with(|| p.output.cmp(&q.output))
    });

    let mut out = String::from("digraph des_plant {\n    rankdir=LR;\n    node [shape=ellipse];\n");
    for s in states {
        let _ = writeln!(
            out,
            "    {} [label={}];",
            quoted(&s.symbol),
            quoted(&format!("{}\\n{}", s.symbol, s.signs))
        );
    }
    for t in edges {
        let _ = writeln!(
            out,
            "    {} -> {} [label={}];",
            quoted(&t.from),
            quoted(&t.to),
            quoted(&format!("{} / {}", t.control, t.output))
        );
    }
    out.push_str("}\n");
    out
}
