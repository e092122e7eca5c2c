//! Edge-list and model files.
//!
//! ```text
//! #partitions 0 0 1 1
//! #gamma 0.1 0 -0.2 0.05
//! # anything else after '#' is a comment
//! 0 2 0.5
//! 0 3 0.25
//! ```
//!
//! The `#partitions` header gives one block index per vertex; the `#gamma`
//! header gives one field per vertex. Body lines are `u v` for plain graphs
//! or `u v beta` for models. Without either header the vertex count is
//! inferred from the ids, and ids with gaps are remapped to `0..n` in
//! increasing order.

use std::collections::BTreeMap;
use std::fmt;
use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::sync::Arc;

use thiserror::Error;

use crate::graph::{Edge, GraphError, PartitionedGraph, Vertex};
use crate::model::{IsingModel, ModelError};

#[derive(Debug, Error)]
pub enum LoadError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("line {line}: {reason}")]
    Malformed { line: usize, reason: String },
    #[error("line {line}: self-loop at vertex {vertex}")]
    SelfLoop { line: usize, vertex: u64 },
    #[error("line {line}: edge ({u}, {v}) repeated with coupling {second} (first given as {first})")]
    ConflictingCoupling { line: usize, u: u64, v: u64, first: f64, second: f64 },
    #[error("line {line}: vertex {vertex} out of range for {num_vertices} vertices declared in the header")]
    OutOfRange { line: usize, vertex: u64, num_vertices: usize },
    #[error("headers disagree: #partitions lists {partitions} vertices, #gamma lists {gamma}")]
    HeaderMismatch { partitions: usize, gamma: usize },
    #[error("line {line}: coupling required on every edge of a model file")]
    MissingCoupling { line: usize },
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Non-fatal conditions found while loading.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LoadWarning {
    /// Vertex ids were not contiguous and have been renumbered.
    RemappedIds { distinct: usize, max_id: u64 },
    /// Repeated edges were merged.
    DuplicateEdges(usize),
}

impl fmt::Display for LoadWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LoadWarning::RemappedIds { distinct, max_id } => write!(
                f,
                "vertex ids have gaps ({distinct} distinct ids, largest {max_id}); remapped densely in increasing order"
            ),
            LoadWarning::DuplicateEdges(n) => write!(f, "{n} duplicate edge line(s) merged"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct LoadedGraph {
    pub graph: PartitionedGraph,
    pub warnings: Vec<LoadWarning>,
}

#[derive(Debug, Clone)]
pub struct LoadedModel {
    pub model: IsingModel,
    pub warnings: Vec<LoadWarning>,
}

struct Parsed {
    partitions: Option<Vec<u32>>,
    gamma: Option<Vec<f64>>,
    num_vertices: usize,
    edges: Vec<Edge>,
    /// Coupling per edge, aligned with `edges`; `None` where the line had none.
    beta: Vec<Option<f64>>,
    /// Source line of each edge, for error reporting.
    lines: Vec<usize>,
    warnings: Vec<LoadWarning>,
}

fn malformed(line: usize, reason: impl Into<String>) -> LoadError {
    LoadError::Malformed { line, reason: reason.into() }
}

fn parse_values<T: std::str::FromStr>(
    line: usize,
    fields: std::str::SplitWhitespace<'_>,
    what: &str,
) -> Result<Vec<T>, LoadError> {
    fields.map(|tok| tok.parse::<T>().map_err(|_| malformed(line, format!("bad {what} value `{tok}`")))).collect()
}

fn parse<R: BufRead>(reader: R) -> Result<Parsed, LoadError> {
    let mut partitions: Option<Vec<u32>> = None;
    let mut gamma: Option<Vec<f64>> = None;
    let mut raw: Vec<(u64, u64, Option<f64>, usize)> = Vec::new();

    for (idx, line) in reader.lines().enumerate() {
        let lineno = idx + 1;
        let line = line?;
        let text = line.trim();
        if text.is_empty() {
            continue;
        }
        if let Some(rest) = text.strip_prefix('#') {
            let mut fields = rest.split_whitespace();
            match fields.next() {
                Some("partitions") => {
                    if partitions.is_some() {
                        return Err(malformed(lineno, "second #partitions header"));
                    }
                    partitions = Some(parse_values(lineno, fields, "partition")?);
                }
                Some("gamma") => {
                    if gamma.is_some() {
                        return Err(malformed(lineno, "second #gamma header"));
                    }
                    let g: Vec<f64> = parse_values(lineno, fields, "field")?;
                    if let Some(x) = g.iter().find(|x| !x.is_finite()) {
                        return Err(malformed(lineno, format!("non-finite field {x}")));
                    }
                    gamma = Some(g);
                }
                _ => {}
            }
            continue;
        }
        let fields: Vec<&str> = text.split_whitespace().collect();
        if !(2..=3).contains(&fields.len()) {
            return Err(malformed(lineno, format!("expected `u v` or `u v beta`, found {} fields", fields.len())));
        }
        let id = |tok: &str| tok.parse::<u64>().map_err(|_| malformed(lineno, format!("bad vertex id `{tok}`")));
        let (u, v) = (id(fields[0])?, id(fields[1])?);
        if u == v {
            return Err(LoadError::SelfLoop { line: lineno, vertex: u });
        }
        let beta = match fields.get(2) {
            Some(tok) => {
                let b: f64 = tok.parse().map_err(|_| malformed(lineno, format!("bad coupling `{tok}`")))?;
                if !b.is_finite() {
                    return Err(malformed(lineno, format!("non-finite coupling {b}")));
                }
                Some(b)
            }
            None => None,
        };
        raw.push((u.min(v), u.max(v), beta, lineno));
    }

    let mut warnings = Vec::new();
    let declared = match (&partitions, &gamma) {
        (Some(p), Some(g)) if p.len() != g.len() => {
            return Err(LoadError::HeaderMismatch { partitions: p.len(), gamma: g.len() });
        }
        (Some(p), _) => Some(p.len()),
        (None, Some(g)) => Some(g.len()),
        (None, None) => None,
    };

    let num_vertices = match declared {
        Some(n) => {
            if let Some(&(_, v, _, line)) = raw.iter().find(|e| e.1 >= n as u64) {
                return Err(LoadError::OutOfRange { line, vertex: v, num_vertices: n });
            }
            n
        }
        None => {
            let mut ids: Vec<u64> = raw.iter().flat_map(|e| [e.0, e.1]).collect();
            ids.sort_unstable();
            ids.dedup();
            let max_id = ids.last().copied();
            match max_id {
                None => 0,
                Some(m) if m + 1 == ids.len() as u64 => ids.len(),
                Some(m) => {
                    warnings.push(LoadWarning::RemappedIds { distinct: ids.len(), max_id: m });
                    let rank = |x: u64| ids.binary_search(&x).unwrap() as u64;
                    for e in raw.iter_mut() {
                        e.0 = rank(e.0);
                        e.1 = rank(e.1);
                    }
                    ids.len()
                }
            }
        }
    };
    if num_vertices >= u32::MAX as usize {
        return Err(GraphError::TooLarge(format!("{num_vertices} vertices")).into());
    }

    let mut merged: BTreeMap<Edge, (Option<f64>, usize)> = BTreeMap::new();
    let mut duplicates = 0;
    for (u, v, beta, line) in raw {
        let key = (u as Vertex, v as Vertex);
        match merged.get(&key) {
            None => {
                merged.insert(key, (beta, line));
            }
            Some(&(first, _)) => {
                duplicates += 1;
                if let (Some(a), Some(b)) = (first, beta) {
                    if a != b {
                        return Err(LoadError::ConflictingCoupling { line, u, v, first: a, second: b });
                    }
                }
                if first.is_none() && beta.is_some() {
                    merged.insert(key, (beta, line));
                }
            }
        }
    }
    if duplicates > 0 {
        warnings.push(LoadWarning::DuplicateEdges(duplicates));
    }
    let mut edges = Vec::with_capacity(merged.len());
    let mut beta = Vec::with_capacity(merged.len());
    let mut lines = Vec::with_capacity(merged.len());
    for (e, (b, l)) in merged {
        edges.push(e);
        beta.push(b);
        lines.push(l);
    }
    Ok(Parsed { partitions, gamma, num_vertices, edges, beta, lines, warnings })
}

fn build_graph(parsed: &mut Parsed) -> Result<PartitionedGraph, LoadError> {
    let labels = parsed.partitions.take().unwrap_or_else(|| vec![0; parsed.num_vertices]);
    Ok(PartitionedGraph::from_parts(labels, std::mem::take(&mut parsed.edges))?)
}

/// Reads a graph; any coupling column and `#gamma` header are ignored.
pub fn read_edge_list<R: BufRead>(reader: R) -> Result<LoadedGraph, LoadError> {
    let mut parsed = parse(reader)?;
    let graph = build_graph(&mut parsed)?;
    Ok(LoadedGraph { graph, warnings: parsed.warnings })
}

pub fn load_edge_list(path: impl AsRef<Path>) -> Result<LoadedGraph, LoadError> {
    read_edge_list(BufReader::new(File::open(path)?))
}

/// Reads a model. Every edge needs a coupling; a missing `#gamma` header
/// means zero field.
pub fn read_model<R: BufRead>(reader: R) -> Result<LoadedModel, LoadError> {
    let mut parsed = parse(reader)?;
    let mut beta = Vec::with_capacity(parsed.beta.len());
    for (b, &line) in parsed.beta.iter().zip(&parsed.lines) {
        beta.push(b.ok_or(LoadError::MissingCoupling { line })?);
    }
    let gamma = parsed.gamma.take().unwrap_or_else(|| vec![0.0; parsed.num_vertices]);
    let graph = build_graph(&mut parsed)?;
    let model = IsingModel::new(Arc::new(graph), beta, gamma)?;
    Ok(LoadedModel { model, warnings: parsed.warnings })
}

pub fn load_model(path: impl AsRef<Path>) -> Result<LoadedModel, LoadError> {
    read_model(BufReader::new(File::open(path)?))
}

fn write_partitions<W: Write>(graph: &PartitionedGraph, w: &mut W) -> io::Result<()> {
    write!(w, "#partitions")?;
    for p in graph.partition_labels() {
        write!(w, " {p}")?;
    }
    writeln!(w)
}

/// Canonical form: partitions header, then sorted edges.
pub fn write_edge_list<W: Write>(graph: &PartitionedGraph, mut w: W) -> io::Result<()> {
    write_partitions(graph, &mut w)?;
    for &(u, v) in graph.edges() {
        writeln!(w, "{u} {v}")?;
    }
    w.flush()
}

pub fn save_edge_list(graph: &PartitionedGraph, path: impl AsRef<Path>) -> io::Result<()> {
    write_edge_list(graph, BufWriter::new(File::create(path)?))
}

/// Floats are written in shortest round-trip form, so reading back gives
/// bit-identical parameters.
pub fn write_model<W: Write>(model: &IsingModel, mut w: W) -> io::Result<()> {
    write_partitions(model.graph(), &mut w)?;
    write!(w, "#gamma")?;
    for g in model.gamma() {
        write!(w, " {g}")?;
    }
    writeln!(w)?;
    for (&(u, v), b) in model.graph().edges().iter().zip(model.beta()) {
        writeln!(w, "{u} {v} {b}")?;
    }
    w.flush()
}

pub fn save_model(model: &IsingModel, path: impl AsRef<Path>) -> io::Result<()> {
    write_model(model, BufWriter::new(File::create(path)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{gen_partitioned, GraphSpec};
    use crate::rng::stream_rng;
    use rand::Rng;

    fn graph_of(text: &str) -> Result<LoadedGraph, LoadError> {
        read_edge_list(text.as_bytes())
    }

    #[test]
    fn path_graph() {
        let g = graph_of("0 1\n1 2").unwrap();
        assert_eq!(g.graph.num_vertices(), 3);
        assert_eq!(g.graph.edges(), &[(0, 1), (1, 2)]);
        assert!(g.warnings.is_empty());
    }

    #[test]
    fn duplicates_are_merged() {
        let g = graph_of("0 1\n0 1\n1 0\n").unwrap();
        assert_eq!(g.graph.num_edges(), 1);
        assert_eq!(g.warnings, vec![LoadWarning::DuplicateEdges(2)]);
    }

    #[test]
    fn errors_carry_line_numbers() {
        assert!(matches!(graph_of("0 1\n2 2\n"), Err(LoadError::SelfLoop { line: 2, vertex: 2 })));
        assert!(matches!(graph_of("# c\n0 1\nx 3\n"), Err(LoadError::Malformed { line: 3, .. })));
        assert!(matches!(graph_of("0 1 2 3\n"), Err(LoadError::Malformed { line: 1, .. })));
        assert!(matches!(graph_of("#partitions 0 0\n0 5\n"), Err(LoadError::OutOfRange { line: 2, vertex: 5, .. })));
        let msg = graph_of("0 1\n\n-1 2\n").unwrap_err().to_string();
        assert!(msg.starts_with("line 3:"), "{msg}");
    }

    #[test]
    fn gaps_are_remapped_with_warning() {
        let g = graph_of("10 30\n30 20\n").unwrap();
        assert_eq!(g.graph.num_vertices(), 3);
        assert_eq!(g.graph.edges(), &[(0, 2), (1, 2)]);
        assert_eq!(g.warnings, vec![LoadWarning::RemappedIds { distinct: 3, max_id: 30 }]);
    }

    #[test]
    fn header_keeps_isolated_vertices() {
        let g = graph_of("#partitions 0 0 1 1 1\n# note\n0 2\n").unwrap();
        assert_eq!(g.graph.num_vertices(), 5);
        assert_eq!(g.graph.partition_sizes(), &[2, 3]);
        assert!(g.warnings.is_empty());
    }

    #[test]
    fn empty_file_is_empty_graph() {
        let g = graph_of("# nothing\n").unwrap();
        assert_eq!(g.graph.num_vertices(), 0);
    }

    #[test]
    fn generated_graph_round_trips() {
        let spec = GraphSpec::new(60, vec![0.3, 0.7], vec![vec![0.2, 0.05], vec![0.05, 0.1]]).unwrap();
        let g = gen_partitioned(&spec, &mut stream_rng(3, 0));
        let mut buf = Vec::new();
        write_edge_list(&g, &mut buf).unwrap();
        let back = read_edge_list(buf.as_slice()).unwrap();
        assert_eq!(back.graph, g);
        let mut again = Vec::new();
        write_edge_list(&back.graph, &mut again).unwrap();
        assert_eq!(buf, again);
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("g.txt");
        let g = crate::graph::complete_bipartite(3, 4).unwrap();
        save_edge_list(&g, &path).unwrap();
        assert_eq!(load_edge_list(&path).unwrap().graph, g);
    }

    #[test]
    fn model_round_trip_is_bit_exact() {
        let g = Arc::new(crate::graph::complete_bipartite(3, 3).unwrap());
        let mut rng = stream_rng(4, 0);
        let beta: Vec<f64> = (0..9).map(|_| rng.random::<f64>()).collect();
        let gamma: Vec<f64> = (0..6).map(|_| rng.random_range(-0.1..0.1)).collect();
        let m = IsingModel::new(g, beta, gamma).unwrap();
        let mut buf = Vec::new();
        write_model(&m, &mut buf).unwrap();
        let back = read_model(buf.as_slice()).unwrap().model;
        assert_eq!(back.graph(), m.graph());
        assert_eq!(back.beta(), m.beta());
        assert_eq!(back.gamma(), m.gamma());
    }

    #[test]
    fn model_file_checks() {
        let m = read_model("0 1 0.5\n1 2 0.25\n".as_bytes()).unwrap().model;
        assert_eq!(m.gamma(), &[0.0; 3]);
        assert!(matches!(read_model("0 1 0.5\n1 2\n".as_bytes()), Err(LoadError::MissingCoupling { line: 2 })));
        assert!(matches!(
            read_model("0 1 0.5\n1 0 0.6\n".as_bytes()),
            Err(LoadError::ConflictingCoupling { line: 2, .. })
        ));
        assert!(read_model("0 1 0.5\n1 0 0.5\n".as_bytes()).is_ok());
        assert!(matches!(read_model("0 1 -0.5\n".as_bytes()), Err(LoadError::Model(_))));
        assert!(matches!(
            read_model("#partitions 0 1\n#gamma 0 0 0\n0 1 1\n".as_bytes()),
            Err(LoadError::HeaderMismatch { partitions: 2, gamma: 3 })
        ));
    }
}
