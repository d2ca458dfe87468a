//! Temporal dynamics diagnostics: temporal edge appearance (TEA) counts, the
//! novelty index and snapshot cosine-similarity profiles.

use std::collections::HashSet;

use crate::error::{Error, Result};
use crate::graph::{DynamicGraph, Snapshot};

/// Edge identity for set comparisons; undirected snapshots already store
/// canonical `src < dst` pairs.
fn edge_set(s: &Snapshot) -> HashSet<(usize, usize)> {
    s.edges().iter().map(|e| (e.src, e.dst)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TeaCounts {
    pub t: usize,
    pub new_edges: usize,
    pub repeated_edges: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TeaProfile {
    /// Counts for every timestamp with at least one edge.
    pub counts: Vec<TeaCounts>,
    /// Mean fraction of never-before-seen edges over those timestamps.
    pub novelty: f64,
}

/// Splits each snapshot's edges into new and repeated ones, where "seen"
/// means present in any earlier snapshot. Edgeless timestamps are skipped.
pub fn tea(g: &DynamicGraph) -> Result<TeaProfile> {
    let mut seen: HashSet<(usize, usize)> = HashSet::new();
    let mut counts = Vec::new();
    for s in g.snapshots() {
        if s.num_edges() == 0 {
            continue;
        }
        let current = edge_set(s);
        let new_edges = current.iter().filter(|e| !seen.contains(e)).count();
        counts.push(TeaCounts {
            t: s.t(),
            new_edges,
            repeated_edges: current.len() - new_edges,
        });
        seen.extend(current);
    }
    if counts.is_empty() {
        return Err(Error::Empty("graph has no edges".into()));
    }
    let novelty = counts
        .iter()
        .map(|c| c.new_edges as f64 / (c.new_edges + c.repeated_edges) as f64)
        .sum::<f64>()
        / counts.len() as f64;
    Ok(TeaProfile { counts, novelty })
}

/// Cosine similarity of two binarized adjacency matrices; 0 when either is
/// all-zero.
pub fn snapshot_cosine(a: &Snapshot, b: &Snapshot) -> f64 {
    if a.num_edges() == 0 || b.num_edges() == 0 {
        return 0.0;
    }
    let ea = edge_set(a);
    let common = b.edges().iter().filter(|e| ea.contains(&(e.src, e.dst))).count();
    common as f64 / ((a.num_edges() * b.num_edges()) as f64).sqrt()
}

#[derive(Debug, Clone, PartialEq)]
pub struct CosineProfile {
    pub window: usize,
    /// `(anchor, similarities at lags 1..=window)`.
    pub rows: Vec<(usize, Vec<f64>)>,
    /// Mean over anchors at each lag.
    pub mean: Vec<f64>,
}

/// Similarity between each anchor snapshot and its `window` predecessors.
pub fn cosine_profile(g: &DynamicGraph, anchors: &[usize], window: usize) -> Result<CosineProfile> {
    if window == 0 {
        return Err(Error::Config("cosine window must be positive".into()));
    }
    if anchors.is_empty() {
        return Err(Error::Config("no anchors for cosine profile".into()));
    }
    let mut rows = Vec::with_capacity(anchors.len());
    for &t in anchors {
        if t < window || t >= g.num_timestamps() {
            return Err(Error::OutOfRange(format!(
                "anchor {t} needs {window} predecessors within {} timestamps",
                g.num_timestamps()
            )));
        }
        let current = g.snapshot(t)?;
        let sims = (1..=window)
            .map(|k| Ok(snapshot_cosine(current, g.snapshot(t - k)?)))
            .collect::<Result<Vec<_>>>()?;
        rows.push((t, sims));
    }
    let mean = (0..window)
        .map(|k| rows.iter().map(|(_, s)| s[k]).sum::<f64>() / rows.len() as f64)
        .collect();
    Ok(CosineProfile { window, rows, mean })
}

/// Anchors `window, 2*window, ...` below `timestamps`.
pub fn default_anchors(timestamps: usize, window: usize) -> Vec<usize> {
    if window == 0 {
        return Vec::new();
    }
    (1..).map(|m| m * window).take_while(|&t| t < timestamps).collect()
}
