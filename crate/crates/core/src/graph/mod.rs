//! Discrete-time dynamic graphs over a persistent node universe.

mod bfs;
mod io;
mod sbm;
mod split;

pub use bfs::{hop_distance, HopDistances};
pub use io::{load_edge_list, read_edge_list, write_edge_list, write_edges, Binning, LoadOptions};
pub use sbm::{generate_sbm, SbmGraph, SbmParams};
pub use split::{Split, SplitSpec};

use crate::error::{Error, Result};

/// One timestamped edge. Undirected snapshots store each pair once with
/// `src < dst`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub src: usize,
    pub dst: usize,
    pub weight: f64,
}

/// Graph at a single timestamp, embedded in the global node universe.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    t: usize,
    directed: bool,
    edges: Vec<Edge>,
    /// Row `i` of the padded adjacency as sorted `(column, weight)` pairs.
    rows: Vec<Vec<(usize, f64)>>,
    /// Neighbors ignoring direction, sorted.
    undirected: Vec<Vec<usize>>,
    present: Vec<bool>,
}

impl Snapshot {
    /// Builds a snapshot from raw edges. Self-loops are dropped; duplicate
    /// edges are merged by summing their weights.
    pub fn new(t: usize, n_global: usize, directed: bool, raw: impl IntoIterator<Item = Edge>) -> Result<Self> {
        let mut edges: Vec<Edge> = Vec::new();
        for mut e in raw {
            if e.src >= n_global || e.dst >= n_global {
                return Err(Error::OutOfRange(format!(
                    "edge ({}, {}) outside universe of {n_global} nodes",
                    e.src, e.dst
                )));
            }
            if e.src == e.dst {
                continue;
            }
            if !directed && e.src > e.dst {
                std::mem::swap(&mut e.src, &mut e.dst);
            }
            edges.push(e);
        }
        edges.sort_by(|a, b| (a.src, a.dst).cmp(&(b.src, b.dst)));
        edges.dedup_by(|next, kept| {
            if (next.src, next.dst) == (kept.src, kept.dst) {
                kept.weight += next.weight;
                true
            } else {
                false
            }
        });

        let mut rows = vec![Vec::new(); n_global];
        let mut undirected = vec![Vec::new(); n_global];
        let mut present = vec![false; n_global];
        for e in &edges {
            rows[e.src].push((e.dst, e.weight));
            if !directed {
                rows[e.dst].push((e.src, e.weight));
            }
            undirected[e.src].push(e.dst);
            undirected[e.dst].push(e.src);
            present[e.src] = true;
            present[e.dst] = true;
        }
        for r in &mut rows {
            r.sort_by_key(|&(c, _)| c);
        }
        for u in &mut undirected {
            u.sort_unstable();
            u.dedup();
        }
        Ok(Self {
            t,
            directed,
            edges,
            rows,
            undirected,
            present,
        })
    }

    pub fn t(&self) -> usize {
        self.t
    }

    pub fn directed(&self) -> bool {
        self.directed
    }

    pub fn n_global(&self) -> usize {
        self.present.len()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn is_present(&self, i: usize) -> bool {
        self.present.get(i).copied().unwrap_or(false)
    }

    pub fn present_nodes(&self) -> impl Iterator<Item = usize> + '_ {
        self.present.iter().enumerate().filter(|(_, p)| **p).map(|(i, _)| i)
    }

    pub fn num_present(&self) -> usize {
        self.present.iter().filter(|p| **p).count()
    }

    /// Nonzero entries of row `i` of the padded adjacency.
    pub fn row(&self, i: usize) -> &[(usize, f64)] {
        &self.rows[i]
    }

    /// Partners of `i` used as link-prediction targets: out-neighbors on
    /// directed graphs, neighbors otherwise.
    pub fn partners(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        self.rows[i].iter().map(|&(c, _)| c)
    }

    /// Neighbors of `i` in the undirected view.
    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.undirected[i]
    }

    /// Degree of `i` in the undirected view.
    pub fn degree(&self, i: usize) -> usize {
        self.undirected[i].len()
    }
}

/// Ordered sequence of snapshots sharing one node universe.
#[derive(Debug, Clone, PartialEq)]
pub struct DynamicGraph {
    snapshots: Vec<Snapshot>,
    n_global: usize,
    node_ids: Vec<String>,
    directed: bool,
    binning: Option<String>,
}

impl DynamicGraph {
    /// Assembles a graph; snapshot `k` must carry timestamp index `k`.
    pub fn new(snapshots: Vec<Snapshot>, node_ids: Vec<String>, directed: bool) -> Result<Self> {
        let n_global = node_ids.len();
        for (k, s) in snapshots.iter().enumerate() {
            if s.t != k {
                return Err(Error::Config(format!(
                    "snapshot at position {k} carries timestamp {}",
                    s.t
                )));
            }
            if s.n_global() != n_global || s.directed != directed {
                return Err(Error::Config(format!(
                    "snapshot {k} does not match the graph universe"
                )));
            }
        }
        Ok(Self {
            snapshots,
            n_global,
            node_ids,
            directed,
            binning: None,
        })
    }

    pub(crate) fn with_binning(mut self, description: String) -> Self {
        self.binning = Some(description);
        self
    }

    pub fn snapshots(&self) -> &[Snapshot] {
        &self.snapshots
    }

    pub fn snapshot(&self, t: usize) -> Result<&Snapshot> {
        self.snapshots
            .get(t)
            .ok_or_else(|| Error::OutOfRange(format!("timestamp {t} of {}", self.snapshots.len())))
    }

    pub fn num_timestamps(&self) -> usize {
        self.snapshots.len()
    }

    pub fn n_global(&self) -> usize {
        self.n_global
    }

    pub fn directed(&self) -> bool {
        self.directed
    }

    pub fn node_ids(&self) -> &[String] {
        &self.node_ids
    }

    pub fn node_index(&self, id: &str) -> Option<usize> {
        self.node_ids.iter().position(|n| n == id)
    }

    /// Human-readable description of the timestamp binning used at load time.
    pub fn binning(&self) -> Option<&str> {
        self.binning.as_deref()
    }

    pub fn num_edges(&self) -> usize {
        self.snapshots.iter().map(Snapshot::num_edges).sum()
    }

    /// Row `i` of the padded adjacency at `t` as a dense vector of length
    /// `n_global`. Absent nodes yield the zero vector.
    pub fn padded_row(&self, t: usize, i: usize, binarize: bool) -> Result<Vec<f64>> {
        let s = self.snapshot(t)?;
        if i >= self.n_global {
            return Err(Error::OutOfRange(format!("node {i} of {}", self.n_global)));
        }
        let mut row = vec![0.0; self.n_global];
        for &(c, w) in s.row(i) {
            row[c] = if binarize { 1.0 } else { w };
        }
        Ok(row)
    }
}
