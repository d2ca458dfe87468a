//! Dynamic stochastic block model with community migration.
//!
//! The first snapshot samples every pair independently with the in-block or
//! cross-block probability. Each later snapshot copies the previous one,
//! moves a random number of nodes to a different community and resamples
//! every pair incident to a moved node under the new assignment.

use std::collections::BTreeSet;

use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{DynamicGraph, Edge, Snapshot};
use crate::error::{Error, Result};
use crate::rng::{stream, tag};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SbmParams {
    pub n_nodes: usize,
    pub n_communities: usize,
    pub p_in: f64,
    pub p_out: f64,
    pub n_timestamps: usize,
    pub migrate_min: usize,
    pub migrate_max: usize,
    pub seed: u64,
}

impl Default for SbmParams {
    fn default() -> Self {
        Self {
            n_nodes: 1000,
            n_communities: 3,
            p_in: 0.2,
            p_out: 0.01,
            n_timestamps: 50,
            migrate_min: 10,
            migrate_max: 20,
            seed: 0,
        }
    }
}

impl SbmParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.n_nodes == 0 || self.n_timestamps == 0 {
            return bad("SBM needs at least one node and one timestamp".into());
        }
        if self.n_communities == 0 || self.n_communities > self.n_nodes {
            return bad(format!(
                "{} communities cannot partition {} nodes",
                self.n_communities, self.n_nodes
            ));
        }
        if !(0.0..=1.0).contains(&self.p_in) || !(0.0..=1.0).contains(&self.p_out) || self.p_out > self.p_in {
            return bad(format!(
                "probabilities must satisfy 0 <= p_out <= p_in <= 1 (got {}, {})",
                self.p_out, self.p_in
            ));
        }
        if self.migrate_min > self.migrate_max || self.migrate_max >= self.n_nodes {
            return bad(format!(
                "migration range {}..={} invalid for {} nodes",
                self.migrate_min, self.migrate_max, self.n_nodes
            ));
        }
        if self.n_timestamps > 1 && self.migrate_max > 0 && self.n_communities < 2 {
            return bad("migration needs at least two communities".into());
        }
        Ok(())
    }

    /// Block sizes differ by at most one; the larger blocks come last.
    pub fn block_sizes(&self) -> Vec<usize> {
        let base = self.n_nodes / self.n_communities;
        let extra = self.n_nodes % self.n_communities;
        (0..self.n_communities)
            .map(|c| base + usize::from(c >= self.n_communities - extra))
            .collect()
    }
}

/// Generated graph plus the per-step community assignments and migration counts.
#[derive(Debug, Clone)]
pub struct SbmGraph {
    pub graph: DynamicGraph,
    pub communities: Vec<Vec<usize>>,
    /// Nodes moved before snapshot `t` was drawn; zero for the first.
    pub migrations: Vec<usize>,
}

pub fn generate_sbm(params: &SbmParams) -> Result<SbmGraph> {
    params.validate()?;
    let n = params.n_nodes;
    let k = params.n_communities;
    let mut rng = stream(params.seed, &[tag::SBM]);

    let mut community: Vec<usize> = params
        .block_sizes()
        .iter()
        .enumerate()
        .flat_map(|(c, &size)| std::iter::repeat_n(c, size))
        .collect();
    let prob = |a: usize, b: usize, comm: &[usize]| {
        if comm[a] == comm[b] {
            params.p_in
        } else {
            params.p_out
        }
    };

    let mut adjacency: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n];
    for u in 0..n {
        for v in u + 1..n {
            if rng.random_bool(prob(u, v, &community)) {
                adjacency[u].insert(v);
                adjacency[v].insert(u);
            }
        }
    }

    let mut snapshots = Vec::with_capacity(params.n_timestamps);
    let mut communities = Vec::with_capacity(params.n_timestamps);
    let mut migrations = Vec::with_capacity(params.n_timestamps);
    for t in 0..params.n_timestamps {
        if t > 0 {
            let count = rng.random_range(params.migrate_min..=params.migrate_max);
            let mut moved: Vec<usize> = sample(&mut rng, n, count).into_vec();
            moved.sort_unstable();
            for &u in &moved {
                let shift = rng.random_range(1..k);
                community[u] = (community[u] + shift) % k;
            }
            for &u in &moved {
                for v in std::mem::take(&mut adjacency[u]) {
                    adjacency[v].remove(&u);
                }
            }
            for (idx, &u) in moved.iter().enumerate() {
                for v in 0..n {
                    // pairs of two moved nodes are drawn once, from the earlier one
                    if v == u || moved[..idx].binary_search(&v).is_ok() {
                        continue;
                    }
                    if rng.random_bool(prob(u, v, &community)) {
                        adjacency[u].insert(v);
                        adjacency[v].insert(u);
                    }
                }
            }
            migrations.push(count);
        } else {
            migrations.push(0);
        }
        let edges = adjacency.iter().enumerate().flat_map(|(u, nb)| {
            nb.range(u + 1..).map(move |&v| Edge {
                src: u,
                dst: v,
                weight: 1.0,
            })
        });
        snapshots.push(Snapshot::new(t, n, false, edges)?);
        communities.push(community.clone());
    }

    let ids = (0..n).map(|i| i.to_string()).collect();
    let graph = DynamicGraph::new(snapshots, ids, false)?.with_binning("generated".into());
    Ok(SbmGraph {
        graph,
        communities,
        migrations,
    })
}
