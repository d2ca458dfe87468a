//! Attention matrices of one node over time, next to its degree history.

use serde::{Deserialize, Serialize};

use super::metrics::spearman;
use crate::error::{Error, Result};
use crate::graph::DynamicGraph;
use crate::models::TransformerG2g;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttentionEntry {
    pub t: usize,
    /// Row-major `(l+1) x (l+1)` weights; row and column `k` refer to `t - l + k`.
    pub weights: Vec<f64>,
    /// Degree at `t - l ..= t`, zero before the first snapshot.
    pub degrees: Vec<usize>,
    /// Spearman correlation of the last attention row with `degrees`;
    /// `None` when either is constant.
    pub correlation: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttentionReport {
    pub node: usize,
    pub lookback: usize,
    pub entries: Vec<AttentionEntry>,
}

impl AttentionEntry {
    pub fn last_row(&self) -> &[f64] {
        let s = self.degrees.len();
        &self.weights[(s - 1) * s..]
    }
}

pub fn attention_report(model: &TransformerG2g, g: &DynamicGraph, node: usize, timestamps: &[usize], binarize: bool) -> Result<AttentionReport> {
    if node >= g.n_global() {
        return Err(Error::OutOfRange(format!("node {node} of {}", g.n_global())));
    }
    if model.n_global() != g.n_global() {
        return Err(Error::Dimension(format!(
            "model over {} nodes applied to a graph of {}",
            model.n_global(),
            g.n_global()
        )));
    }
    let l = model.lookback();
    let mut entries = Vec::with_capacity(timestamps.len());
    for &t in timestamps {
        g.snapshot(t)?;
        let mut history = Vec::with_capacity(l + 1);
        let mut degrees = Vec::with_capacity(l + 1);
        for back in (0..=l).rev() {
            match t.checked_sub(back) {
                Some(tau) => {
                    history.push(g.padded_row(tau, node, binarize)?);
                    degrees.push(g.snapshot(tau)?.degree(node));
                }
                None => {
                    history.push(vec![0.0; g.n_global()]);
                    degrees.push(0);
                }
            }
        }
        let (_, weights) = model.forward_history(&history)?;
        let last = &weights[l * (l + 1)..];
        let deg: Vec<f64> = degrees.iter().map(|&d| d as f64).collect();
        let correlation = spearman(last, &deg);
        entries.push(AttentionEntry { t, weights, degrees, correlation });
    }
    Ok(AttentionReport { node, lookback: l, entries })
}
