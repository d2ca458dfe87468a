//! Node triplets `(anchor, near, far)` for the contrastive loss. Near nodes
//! are exactly one hop from the anchor; far nodes are present nodes at two
//! or more hops, including unreachable ones.

use rand::seq::IndexedRandom;
use rand::Rng;

use crate::error::{Error, Result};
use crate::graph::{hop_distance, Snapshot};
use crate::rng;

pub const DEFAULT_K_PER_ANCHOR: usize = 3;
/// Triples per timestamp are capped at this multiple of the present-node count.
pub const MAX_TRIPLES_PER_NODE: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Triplet {
    pub anchor: usize,
    pub near: usize,
    pub far: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TripletBatch {
    pub t: usize,
    pub triples: Vec<Triplet>,
}

impl TripletBatch {
    pub fn len(&self) -> usize {
        self.triples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triples.is_empty()
    }

    /// Distinct nodes referenced by the batch, sorted.
    pub fn nodes(&self) -> Vec<usize> {
        let mut v: Vec<usize> = self
            .triples
            .iter()
            .flat_map(|t| [t.anchor, t.near, t.far])
            .collect();
        v.sort_unstable();
        v.dedup();
        v
    }
}

/// Samples up to `k_per_anchor` triples for every present node, using the
/// stream derived from `(seed, t)`.
pub fn sample_triplets(s: &Snapshot, k_per_anchor: usize, seed: u64) -> Result<TripletBatch> {
    sample_triplets_in(s, k_per_anchor, &mut rng::stream(seed, &[s.t() as u64]))
}

/// Same as [`sample_triplets`] with a caller-provided RNG stream.
pub fn sample_triplets_in<R: Rng>(s: &Snapshot, k_per_anchor: usize, rng: &mut R) -> Result<TripletBatch> {
    if s.num_edges() == 0 {
        return Err(Error::Empty(format!("snapshot {} has no edges", s.t())));
    }
    let present: Vec<usize> = s.present_nodes().collect();
    let cap = MAX_TRIPLES_PER_NODE * present.len();
    let mut triples = Vec::new();
    for &anchor in &present {
        let near_pool = s.neighbors(anchor);
        // anchor and its neighbors are the only present nodes closer than 2 hops
        let far_count = present.len() - near_pool.len() - 1;
        if far_count == 0 {
            continue;
        }
        let mut far_pool: Option<Vec<usize>> = None;
        for _ in 0..k_per_anchor {
            let near = *near_pool.choose(rng).expect("present nodes have neighbors");
            let far = if far_count * 4 >= present.len() {
                loop {
                    let c = *present.choose(rng).expect("non-empty");
                    if c != anchor && near_pool.binary_search(&c).is_err() {
                        break c;
                    }
                }
            } else {
                let pool = far_pool.get_or_insert_with(|| {
                    present
                        .iter()
                        .copied()
                        .filter(|&c| c != anchor && near_pool.binary_search(&c).is_err())
                        .collect()
                });
                *pool.choose(rng).expect("far_count > 0")
            };
            triples.push(Triplet { anchor, near, far });
        }
    }
    triples.truncate(cap);
    Ok(TripletBatch { t: s.t(), triples })
}

/// True iff every triple has present members and `sp(anchor, near) <
/// sp(anchor, far)` under a fresh breadth-first search.
pub fn validate_batch(b: &TripletBatch, s: &Snapshot) -> bool {
    if b.t != s.t() {
        return false;
    }
    b.triples.iter().all(|tr| {
        let members_present = [tr.anchor, tr.near, tr.far].iter().all(|&v| s.is_present(v));
        if !members_present {
            return false;
        }
        let Ok(dist) = hop_distance(s, tr.anchor, usize::MAX) else {
            return false;
        };
        match (dist.get(tr.near), dist.get(tr.far)) {
            (Some(dn), Some(df)) => dn < df,
            (Some(_), None) => true,
            (None, _) => false,
        }
    })
}
