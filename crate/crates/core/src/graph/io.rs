//! JSONL graph serialisation: one `{"n", "edges", "nodes"}` object per line.

use super::Graph;
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

/// On-disk form of a graph. Only `i < j` pairs with a non-zero label are stored.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GraphRecord {
    pub n: usize,
    pub edges: Vec<[usize; 3]>,
    pub nodes: Vec<usize>,
}

impl From<&Graph> for GraphRecord {
    fn from(g: &Graph) -> Self {
        let n = g.num_nodes();
        let mut edges = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                let e = g.edge(i, j);
                if e != 0 {
                    edges.push([i, j, e]);
                }
            }
        }
        Self {
            n,
            edges,
            nodes: (0..n).map(|i| g.node(i)).collect(),
        }
    }
}

impl GraphRecord {
    pub fn into_graph(self, node_classes: u8, edge_classes: u8) -> Result<Graph> {
        let n = self.n;
        if self.nodes.len() != n {
            return Err(Error::Dimension(format!(
                "{} node labels for n = {n}",
                self.nodes.len()
            )));
        }
        let mut nodes = Vec::with_capacity(n);
        for &x in &self.nodes {
            if x >= node_classes as usize {
                return Err(Error::Domain(format!("node label {x} >= {node_classes}")));
            }
            nodes.push(x as u8);
        }
        let mut edges = vec![0u8; n * n];
        for [i, j, e] in self.edges {
            if i >= j || j >= n {
                return Err(Error::Domain(format!("edge ({i},{j}) must satisfy i < j < n")));
            }
            if e >= edge_classes as usize {
                return Err(Error::Domain(format!("edge label {e} >= {edge_classes}")));
            }
            edges[i * n + j] = e as u8;
            edges[j * n + i] = e as u8;
        }
        Graph::from_parts(n, node_classes, edge_classes, nodes, edges)
    }
}

pub fn graph_to_json_line(g: &Graph) -> String {
    serde_json::to_string(&GraphRecord::from(g)).expect("graph records always serialise")
}

pub fn graph_from_json_line(line: &str, node_classes: u8, edge_classes: u8) -> Result<Graph> {
    let rec: GraphRecord = serde_json::from_str(line)?;
    rec.into_graph(node_classes, edge_classes)
}

pub fn write_jsonl(path: &Path, graphs: &[Graph]) -> Result<()> {
    let mut w = BufWriter::new(std::fs::File::create(path)?);
    for g in graphs {
        writeln!(w, "{}", graph_to_json_line(g))?;
    }
    w.flush()?;
    Ok(())
}

/// Reads every non-blank line as a graph with the given class cardinalities.
pub fn read_jsonl(path: &Path, node_classes: u8, edge_classes: u8) -> Result<Vec<Graph>> {
    let r = BufReader::new(std::fs::File::open(path)?);
    let mut out = Vec::new();
    for (k, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let g = graph_from_json_line(&line, node_classes, edge_classes).map_err(|e| {
            Error::Parse {
                line: k + 1,
                msg: e.to_string(),
            }
        })?;
        out.push(g);
    }
    Ok(out)
}
