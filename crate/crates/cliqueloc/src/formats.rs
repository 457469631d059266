//! Text formats: edge lists in, CSV out.
//!
//! Edge lists hold one edge per line as two whitespace-separated integer
//! labels. Lines starting with `#` and blank lines are skipped. Duplicate
//! edges collapse; vertex indices follow first appearance.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use cliqueloc_core::{Graph, State, Trajectory};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum FormatError {
    #[error("line {line}, column {column}: cannot read {token:?} as a vertex label")]
    BadToken {
        line: usize,
        column: usize,
        token: String,
    },
    #[error("line {line}: expected two labels, found {found}")]
    FieldCount { line: usize, found: usize },
    #[error("line {line}: self-loop at vertex {label}")]
    SelfLoop { line: usize, label: u64 },
    #[error("edge list contains no edges")]
    NoEdges,
    #[error("bad vertex:count pair {0:?}")]
    BadPair(String),
    #[error("vertex {0} is not in the graph")]
    UnknownVertex(u64),
    #[error("bad label list {0:?}")]
    BadList(String),
}

/// Parses an edge-list document.
pub fn parse_graph(text: &str) -> Result<Graph, FormatError> {
    let mut edges = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let trimmed = raw.trim_start();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let mut labels = [0u64; 2];
        let mut found = 0;
        for (column, token) in tokens(raw) {
            if found < 2 {
                labels[found] = token.parse().map_err(|_| FormatError::BadToken {
                    line,
                    column,
                    token: token.to_string(),
                })?;
            }
            found += 1;
        }
        if found != 2 {
            return Err(FormatError::FieldCount { line, found });
        }
        if labels[0] == labels[1] {
            return Err(FormatError::SelfLoop {
                line,
                label: labels[0],
            });
        }
        edges.push((labels[0], labels[1]));
    }
    if edges.is_empty() {
        return Err(FormatError::NoEdges);
    }
    Ok(Graph::from_edges(edges).expect("edges are validated above"))
}

/// Whitespace-separated tokens with their 1-based byte columns.
fn tokens(line: &str) -> impl Iterator<Item = (usize, &str)> {
    let mut rest = line;
    let mut offset = 0;
    std::iter::from_fn(move || {
        let skip = rest.len() - rest.trim_start().len();
        rest = &rest[skip..];
        offset += skip;
        if rest.is_empty() {
            return None;
        }
        let len = rest.find(char::is_whitespace).unwrap_or(rest.len());
        let token = &rest[..len];
        let column = offset + 1;
        rest = &rest[len..];
        offset += len;
        Some((column, token))
    })
}

pub fn read_graph(path: &Path) -> anyhow::Result<Graph> {
    let text = fs::read_to_string(path)
        .map_err(|e| anyhow::anyhow!("cannot read {}: {e}", path.display()))?;
    parse_graph(&text).map_err(|e| anyhow::anyhow!("{}: {e}", path.display()))
}

/// Parses `v:c,v:c,...` into a state over `g`; unlisted vertices get 0.
/// Repeated vertices accumulate.
pub fn parse_counts(g: &Graph, spec: &str) -> Result<State, FormatError> {
    let mut counts = vec![0u64; g.len()];
    for part in spec.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let (v, c) = part
            .split_once(':')
            .ok_or_else(|| FormatError::BadPair(part.to_string()))?;
        let label: u64 = v
            .trim()
            .parse()
            .map_err(|_| FormatError::BadPair(part.to_string()))?;
        let count: u64 = c
            .trim()
            .parse()
            .map_err(|_| FormatError::BadPair(part.to_string()))?;
        let idx = g.index_of(label).ok_or(FormatError::UnknownVertex(label))?;
        counts[idx] += count;
    }
    Ok(State::from_counts(counts))
}

/// Parses a comma-separated label list, keeping its order.
pub fn parse_labels(spec: &str) -> Result<Vec<u64>, FormatError> {
    let labels: Vec<u64> = spec
        .split(',')
        .map(|p| p.trim().parse())
        .collect::<Result<_, _>>()
        .map_err(|_| FormatError::BadList(spec.to_string()))?;
    if labels.is_empty() {
        return Err(FormatError::BadList(spec.to_string()));
    }
    Ok(labels)
}

/// `step,vertex` rows, steps 1-based, vertices by label.
pub fn trajectory_csv(g: &Graph, t: &Trajectory) -> String {
    let mut out = String::with_capacity(12 * t.len() + 16);
    out.push_str("step,vertex\n");
    for (i, &v) in t.allocations.iter().enumerate() {
        let _ = writeln!(out, "{},{}", i + 1, g.label(v));
    }
    out
}

/// `vertex,count` rows in index order.
pub fn state_csv(g: &Graph, s: &State) -> String {
    let mut out = String::from("vertex,count\n");
    for (v, &c) in s.counts().iter().enumerate() {
        let _ = writeln!(out, "{},{}", g.label(v), c);
    }
    out
}

/// `n,v,u,ratio` rows for every ordered pair of distinct vertices in `set`,
/// at `n = every, 2·every, …` and the horizon. Rows with `X_u(n) = 0` are
/// omitted.
pub fn ratio_trace_csv(g: &Graph, t: &Trajectory, set: &[usize], every: usize) -> String {
    let every = every.max(1);
    let mut out = String::from("n,v,u,ratio\n");
    let last = t.len();
    for (n, s) in t.states().enumerate() {
        if n == 0 || (n % every != 0 && n != last) {
            continue;
        }
        for &v in set {
            for &u in set {
                if v == u || s.count(u) == 0 {
                    continue;
                }
                let ratio = s.count(v) as f64 / s.count(u) as f64;
                let _ = writeln!(out, "{n},{},{},{ratio}", g.label(v), g.label(u));
            }
        }
    }
    out
}
