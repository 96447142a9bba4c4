//! File formats: edge-list CSV, point-cloud CSV, graph JSON, signal CSV, and
//! the tabular simulation outputs.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::detectors::Signal;
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::sim::{RocCurve, SweepRow};

fn parse_err(line: usize, msg: impl std::fmt::Display) -> Error {
    Error::Parse(format!("line {line}: {msg}"))
}

/// Reads a `u,v,w` edge list. Both orientations of an edge may appear if
/// their weights agree. `p` defaults to one past the largest index.
pub fn read_edge_list<R: Read>(r: R, p: Option<usize>) -> Result<Graph> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(r);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_owned).collect();
    if header != ["u", "v", "w"] {
        return Err(Error::Parse(format!(
            "edge list header must be \"u,v,w\" (got \"{}\")",
            header.join(",")
        )));
    }
    let mut edges: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    for (i, rec) in rdr.records().enumerate() {
        let line = i + 2;
        let rec = rec?;
        if rec.len() != 3 {
            return Err(parse_err(
                line,
                format!("expected 3 fields, got {}", rec.len()),
            ));
        }
        let u: usize = rec[0]
            .parse()
            .map_err(|e| parse_err(line, format!("u: {e}")))?;
        let v: usize = rec[1]
            .parse()
            .map_err(|e| parse_err(line, format!("v: {e}")))?;
        let w: f64 = rec[2]
            .parse()
            .map_err(|e| parse_err(line, format!("w: {e}")))?;
        if u == v {
            return Err(parse_err(line, format!("self-loop at vertex {u}")));
        }
        let key = (u.min(v), u.max(v));
        match edges.get(&key) {
            Some(&old) if old != w => {
                return Err(parse_err(
                    line,
                    format!(
                        "edge ({}, {}) repeated with weights {old} and {w}",
                        key.0, key.1
                    ),
                ))
            }
            _ => {
                edges.insert(key, w);
            }
        }
    }
    let inferred = edges.keys().map(|&(_, v)| v + 1).max().unwrap_or(0);
    let p = p.unwrap_or(inferred);
    Graph::new(p, edges.into_iter().map(|((u, v), w)| (u, v, w)))
}

pub fn write_edge_list<W: Write>(g: &Graph, w: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["u", "v", "w"])?;
    for e in g.edges() {
        wtr.serialize((e.u, e.v, e.w))?;
    }
    wtr.flush()?;
    Ok(())
}

/// Reads one point per row. A first row whose first token is not a number is
/// treated as a header.
pub fn read_points<R: Read>(r: R) -> Result<Vec<Vec<f64>>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(r);
    let mut points = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        if rec.iter().all(str::is_empty) {
            continue;
        }
        if i == 0 && rec.get(0).is_some_and(|t| t.parse::<f64>().is_err()) {
            continue;
        }
        let row = rec
            .iter()
            .map(|t| t.parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| parse_err(i + 1, e))?;
        if let Some(first) = points.first().map(Vec::len) {
            if row.len() != first {
                return Err(parse_err(
                    i + 1,
                    format!("expected {first} coordinates, got {}", row.len()),
                ));
            }
        }
        points.push(row);
    }
    Ok(points)
}

/// `{"p": int, "edges": [[u, v, w], ...]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphJson {
    pub p: usize,
    pub edges: Vec<(usize, usize, f64)>,
}

impl From<&Graph> for GraphJson {
    fn from(g: &Graph) -> Self {
        Self {
            p: g.p(),
            edges: g.edges().iter().map(|e| (e.u, e.v, e.w)).collect(),
        }
    }
}

impl TryFrom<GraphJson> for Graph {
    type Error = Error;

    fn try_from(j: GraphJson) -> Result<Graph> {
        Graph::new(j.p, j.edges)
    }
}

pub fn write_graph_json<W: Write>(g: &Graph, w: W) -> Result<()> {
    serde_json::to_writer(w, &GraphJson::from(g))?;
    Ok(())
}

pub fn read_graph_json<R: Read>(r: R) -> Result<Graph> {
    let j: GraphJson = serde_json::from_reader(r)?;
    j.try_into()
}

/// Loads a graph from `.json` or, for any other extension, an edge list.
pub fn load_graph(path: &Path) -> Result<Graph> {
    let f = BufReader::new(File::open(path)?);
    if path
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("json"))
    {
        read_graph_json(f)
    } else {
        read_edge_list(f, None)
    }
}

/// One value per line; the number of values must equal `p`.
pub fn read_signal<R: Read>(r: R, p: usize) -> Result<Signal> {
    let mut values = Vec::with_capacity(p);
    for (i, line) in BufReader::new(r).lines().enumerate() {
        let line = line?;
        let t = line.trim();
        if t.is_empty() {
            continue;
        }
        values.push(
            t.parse::<f64>()
                .map_err(|e| parse_err(i + 1, format!("{e} ({t:?})")))?,
        );
    }
    Signal::for_graph(values, p)
}

pub fn write_signal<W: Write>(y: &[f64], w: W) -> Result<()> {
    let mut w = BufWriter::new(w);
    for v in y {
        writeln!(w, "{v}")?;
    }
    w.flush()?;
    Ok(())
}

/// `detector,fa_rate,det_rate`, one row per staircase point.
pub fn write_roc_csv<W: Write>(curves: &[RocCurve], w: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["detector", "fa_rate", "det_rate"])?;
    for c in curves {
        for &(fa, det) in &c.points {
            wtr.serialize((&c.detector, fa, det))?;
        }
    }
    wtr.flush()?;
    Ok(())
}

/// `size,snr,det_rate`.
pub fn write_sweep_csv<W: Write>(rows: &[SweepRow], w: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["size", "snr", "det_rate"])?;
    for r in rows {
        wtr.serialize((r.size, r.snr, r.det_rate))?;
    }
    wtr.flush()?;
    Ok(())
}
