//! Per-node candidate ranking for temporal link prediction.

use std::ops::Range;

use serde::{Deserialize, Serialize};

use super::metrics::{average_precision, mean_std, reciprocal_rank};
use crate::error::{Error, Result};
use crate::graph::DynamicGraph;
use crate::rng::{stream, tag};

/// Source of pair scores; higher means more likely linked.
pub trait PairScorer {
    /// Returns a function filling `out[j]` with the score of `(src, j)` for
    /// every node `j` at timestamp `t`.
    fn prepare(&self, t: usize) -> Result<Box<dyn Fn(usize, &mut [f64]) + '_>>;
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalOptions {
    /// Sampled non-partners per true partner on large graphs.
    pub neg_factor: usize,
    /// Graphs with at most this many nodes rank every non-partner.
    pub exhaustive_limit: usize,
    pub seed: u64,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self {
            neg_factor: 20,
            exhaustive_limit: 2000,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeResult {
    pub t: usize,
    pub node: usize,
    pub ap: f64,
    pub rr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimestampResult {
    pub t: usize,
    pub map: f64,
    pub mrr: f64,
    pub nodes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankingResult {
    pub nodes: Vec<NodeResult>,
    pub timestamps: Vec<TimestampResult>,
    pub map: f64,
    pub mrr: f64,
    /// Population standard deviations over timestamps.
    pub map_std: f64,
    pub mrr_std: f64,
}

/// Candidate set of `src`: every other node when exhaustive, else all true
/// partners plus up to `neg_factor` sampled non-partners per partner.
fn candidates(n: usize, src: usize, partners: &[usize], opts: &EvalOptions, t: usize) -> Vec<usize> {
    let non_partner = |j: &usize| *j != src && partners.binary_search(j).is_err();
    if n <= opts.exhaustive_limit {
        return (0..n).filter(|j| *j != src).collect();
    }
    let pool: Vec<usize> = (0..n).filter(non_partner).collect();
    let want = (opts.neg_factor * partners.len()).min(pool.len());
    let mut rng = stream(opts.seed, &[tag::EVAL, t as u64, src as u64]);
    let mut out: Vec<usize> = partners.to_vec();
    out.extend(rand::seq::index::sample(&mut rng, pool.len(), want).into_iter().map(|k| pool[k]));
    out
}

/// MAP and MRR over `timestamps`: averaged over nodes with at least one
/// partner, then over timestamps. Ties rank the lower node index first.
pub fn evaluate(scorer: &dyn PairScorer, g: &DynamicGraph, timestamps: Range<usize>, opts: &EvalOptions) -> Result<RankingResult> {
    if timestamps.is_empty() {
        return Err(Error::Empty("no evaluation timestamps".into()));
    }
    let n = g.n_global();
    let mut result = RankingResult {
        nodes: Vec::new(),
        timestamps: Vec::new(),
        map: 0.0,
        mrr: 0.0,
        map_std: 0.0,
        mrr_std: 0.0,
    };
    let mut scores = vec![0.0; n];
    for t in timestamps {
        let s = g.snapshot(t)?;
        let score_row = scorer.prepare(t)?;
        let (mut aps, mut rrs) = (Vec::new(), Vec::new());
        for src in 0..n {
            let partners: Vec<usize> = s.partners(src).collect();
            if partners.is_empty() {
                continue;
            }
            score_row(src, &mut scores);
            let mut cand = candidates(n, src, &partners, opts, t);
            if let Some(j) = cand.iter().find(|&&j| !scores[j].is_finite()) {
                return Err(Error::Diverged(format!("non-finite score for ({src}, {j}) at t={t}")));
            }
            cand.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
            let labels: Vec<bool> = cand.iter().map(|j| partners.binary_search(j).is_ok()).collect();
            let ap = average_precision(&labels).expect("partners are candidates");
            let rr = reciprocal_rank(&labels).expect("partners are candidates");
            result.nodes.push(NodeResult { t, node: src, ap, rr });
            aps.push(ap);
            rrs.push(rr);
        }
        if aps.is_empty() {
            continue;
        }
        result.timestamps.push(TimestampResult {
            t,
            map: mean_std(&aps).0,
            mrr: mean_std(&rrs).0,
            nodes: aps.len(),
        });
    }
    if result.timestamps.is_empty() {
        return Err(Error::Empty("no evaluation timestamp has edges".into()));
    }
    let maps: Vec<f64> = result.timestamps.iter().map(|r| r.map).collect();
    let mrrs: Vec<f64> = result.timestamps.iter().map(|r| r.mrr).collect();
    (result.map, result.map_std) = mean_std(&maps);
    (result.mrr, result.mrr_std) = mean_std(&mrrs);
    Ok(result)
}

/// Scores from a dense `[timestamps][n * n]` table, mainly for tests and oracles.
pub struct TableScorer {
    pub n: usize,
    pub scores: Vec<Vec<f64>>,
}

impl PairScorer for TableScorer {
    fn prepare(&self, t: usize) -> Result<Box<dyn Fn(usize, &mut [f64]) + '_>> {
        let table = self
            .scores
            .get(t)
            .ok_or_else(|| Error::OutOfRange(format!("no scores for timestamp {t}")))?;
        let n = self.n;
        Ok(Box::new(move |src, out| out.copy_from_slice(&table[src * n..(src + 1) * n])))
    }
}
