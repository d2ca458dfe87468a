use std::collections::VecDeque;

use super::Snapshot;
use crate::error::{Error, Result};

/// Hop distances from one anchor; `None` means unreachable within the hop
/// limit.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HopDistances {
    dist: Vec<u32>,
}

impl HopDistances {
    pub const UNREACHABLE: u32 = u32::MAX;

    pub fn get(&self, node: usize) -> Option<u32> {
        match self.dist.get(node) {
            Some(&d) if d != Self::UNREACHABLE => Some(d),
            _ => None,
        }
    }

    /// Raw distances with [`Self::UNREACHABLE`] as the infinity sentinel.
    pub fn as_slice(&self) -> &[u32] {
        &self.dist
    }
}

/// Breadth-first distances from `anchor` in the undirected view of `s`,
/// explored up to `max_hops` (pass `usize::MAX` for no limit).
pub fn hop_distance(s: &Snapshot, anchor: usize, max_hops: usize) -> Result<HopDistances> {
    if anchor >= s.n_global() {
        return Err(Error::OutOfRange(format!("node {anchor} of {}", s.n_global())));
    }
    if !s.is_present(anchor) {
        return Err(Error::OutOfRange(format!(
            "node {anchor} is absent at timestamp {}",
            s.t()
        )));
    }
    let mut dist = vec![HopDistances::UNREACHABLE; s.n_global()];
    dist[anchor] = 0;
    let mut queue = VecDeque::from([anchor]);
    while let Some(u) = queue.pop_front() {
        let du = dist[u];
        if du as usize >= max_hops {
            continue;
        }
        for &v in s.neighbors(u) {
            if dist[v] == HopDistances::UNREACHABLE {
                dist[v] = du + 1;
                queue.push_back(v);
            }
        }
    }
    Ok(HopDistances { dist })
}
