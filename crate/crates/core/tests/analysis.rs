use std::collections::BTreeSet;

use gembed_core::analysis::{cosine_profile, tea};
use gembed_core::graph::{DynamicGraph, Edge, Snapshot};
use proptest::prelude::*;

fn build(n: usize, directed: bool, snaps: &[Vec<(usize, usize)>]) -> DynamicGraph {
    let snapshots = snaps
        .iter()
        .enumerate()
        .map(|(t, es)| Snapshot::new(t, n, directed, es.iter().map(|&(src, dst)| Edge { src, dst, weight: 1.0 })).unwrap())
        .collect();
    DynamicGraph::new(snapshots, (0..n).map(|i| i.to_string()).collect(), directed).unwrap()
}

/// Straight set-union reading of the novelty definition.
fn oracle(snaps: &[Vec<(usize, usize)>], directed: bool) -> (Vec<(usize, usize)>, f64) {
    let key = |&(a, b): &(usize, usize)| if directed || a < b { (a, b) } else { (b, a) };
    let sets: Vec<BTreeSet<(usize, usize)>> =
        snaps.iter().map(|es| es.iter().filter(|(a, b)| a != b).map(key).collect()).collect();
    let mut counts = Vec::new();
    let mut ratios = Vec::new();
    for (t, cur) in sets.iter().enumerate() {
        if cur.is_empty() {
            continue;
        }
        let seen: BTreeSet<_> = sets[..t].iter().flatten().copied().collect();
        let new = cur.difference(&seen).count();
        counts.push((new, cur.len() - new));
        ratios.push(new as f64 / cur.len() as f64);
    }
    (counts, ratios.iter().sum::<f64>() / ratios.len() as f64)
}

proptest! {
    #[test]
    fn tea_agrees_with_set_union_oracle(
        snaps in prop::collection::vec(prop::collection::vec((0usize..8, 0usize..8), 1..5), 1..=5),
        directed in any::<bool>(),
    ) {
        prop_assume!(snaps.iter().all(|es| es.iter().any(|(a, b)| a != b)));
        let g = build(8, directed, &snaps);
        let p = tea(&g).unwrap();
        let (counts, novelty) = oracle(&snaps, directed);
        let got: Vec<(usize, usize)> = p.counts.iter().map(|c| (c.new_edges, c.repeated_edges)).collect();
        prop_assert_eq!(got, counts);
        prop_assert!((p.novelty - novelty).abs() < 1e-12);
        let t = p.counts.len() as f64;
        prop_assert!(p.novelty >= 1.0 / t - 1e-12 && p.novelty <= 1.0);
        for (c, s) in p.counts.iter().zip(g.snapshots()) {
            prop_assert_eq!(c.new_edges + c.repeated_edges, s.num_edges());
        }
    }

    #[test]
    fn cosine_in_unit_interval(
        snaps in prop::collection::vec(prop::collection::vec((0usize..6, 0usize..6), 1..8), 3..6),
    ) {
        prop_assume!(snaps.iter().all(|es| es.iter().any(|(a, b)| a != b)));
        let g = build(6, false, &snaps);
        let last = g.num_timestamps() - 1;
        let p = cosine_profile(&g, &[last], 2).unwrap();
        for v in &p.rows[0].1 {
            prop_assert!((0.0..=1.0 + 1e-12).contains(v));
        }
    }
}

#[test]
fn tea_examples() {
    let g = build(2, false, &[vec![(0, 1)], vec![(0, 1)]]);
    assert_eq!(tea(&g).unwrap().novelty, 0.5);
    let g = build(6, false, &[vec![(0, 1)], vec![(2, 3)], vec![(4, 5), (0, 2)]]);
    assert_eq!(tea(&g).unwrap().novelty, 1.0);
}

#[test]
fn cosine_examples() {
    let same = build(4, false, &[vec![(0, 1), (2, 3)], vec![(0, 1), (2, 3)], vec![(0, 1), (2, 3)]]);
    assert_eq!(cosine_profile(&same, &[2], 2).unwrap().mean, vec![1.0, 1.0]);
    let disjoint = build(4, false, &[vec![(0, 1)], vec![(2, 3)]]);
    assert_eq!(cosine_profile(&disjoint, &[1], 1).unwrap().mean, vec![0.0]);
    let half = build(6, false, &[vec![(0, 1), (1, 2), (3, 4), (4, 5)], vec![(0, 1), (1, 2), (0, 5), (2, 3)]]);
    assert_eq!(cosine_profile(&half, &[1], 1).unwrap().mean, vec![0.5]);
    assert!(cosine_profile(&half, &[0], 1).is_err());
    assert!(cosine_profile(&half, &[2], 1).is_err());
}
