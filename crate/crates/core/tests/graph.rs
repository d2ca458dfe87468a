use gembed_core::graph::{
    generate_sbm, hop_distance, read_edge_list, write_edges, DynamicGraph, Edge, HopDistances, LoadOptions, SbmParams,
    Snapshot, Split, SplitSpec,
};
use proptest::prelude::*;

fn build(n: usize, directed: bool, snaps: &[Vec<(usize, usize, f64)>]) -> DynamicGraph {
    let snapshots = snaps
        .iter()
        .enumerate()
        .map(|(t, es)| {
            Snapshot::new(t, n, directed, es.iter().map(|&(src, dst, weight)| Edge { src, dst, weight })).unwrap()
        })
        .collect();
    DynamicGraph::new(snapshots, (0..n).map(|i| i.to_string()).collect(), directed).unwrap()
}

fn edge_lists(max_n: usize) -> impl Strategy<Value = (usize, bool, Vec<Vec<(usize, usize, f64)>>)> {
    (3..max_n, any::<bool>()).prop_flat_map(|(n, directed)| {
        let edge = (0..n, 0..n, prop_oneof![Just(1.0), 0.5f64..4.0]);
        let snap = prop::collection::vec(edge, 1..15)
            .prop_filter("needs a non-loop edge", |es| es.iter().any(|(a, b, _)| a != b));
        (Just(n), Just(directed), prop::collection::vec(snap, 1..5))
    })
}

proptest! {
    #[test]
    fn write_then_read_gives_identical_snapshots((n, directed, snaps) in edge_lists(12)) {
        let g = build(n, directed, &snaps);
        let mut buf = Vec::new();
        write_edges(&g, &mut buf).unwrap();
        let back = read_edge_list(&buf[..], &LoadOptions::default()).unwrap();
        prop_assert_eq!(back.directed(), g.directed());
        prop_assert_eq!(back.n_global(), g.n_global());
        prop_assert_eq!(back.snapshots(), g.snapshots());
    }

    #[test]
    fn padded_rows_sum_to_edge_count((n, directed, snaps) in edge_lists(15)) {
        let g = build(n, directed, &snaps);
        for t in 0..g.num_timestamps() {
            let mut total = 0.0;
            for i in 0..n {
                let row = g.padded_row(t, i, true).unwrap();
                prop_assert_eq!(row.len(), n);
                total += row.iter().sum::<f64>();
            }
            let e = g.snapshot(t).unwrap().num_edges() as f64;
            prop_assert_eq!(total, if directed { e } else { 2.0 * e });
        }
    }

    #[test]
    fn bfs_matches_floyd_warshall(
        n in 2usize..30,
        pairs in prop::collection::vec((0usize..30, 0usize..30), 1..60),
        directed in any::<bool>(),
    ) {
        let es: Vec<(usize, usize, f64)> = pairs.iter().map(|&(a, b)| (a % n, b % n, 1.0)).filter(|(a, b, _)| a != b).collect();
        prop_assume!(!es.is_empty());
        let g = build(n, directed, &[es.clone()]);
        let s = g.snapshot(0).unwrap();
        let inf = u32::MAX;
        let mut d = vec![vec![inf; n]; n];
        for (i, row) in d.iter_mut().enumerate() {
            row[i] = 0;
        }
        for &(a, b, _) in &es {
            d[a][b] = 1;
            d[b][a] = 1;
        }
        for k in 0..n {
            for i in 0..n {
                for j in 0..n {
                    if d[i][k] != inf && d[k][j] != inf && d[i][k] + d[k][j] < d[i][j] {
                        d[i][j] = d[i][k] + d[k][j];
                    }
                }
            }
        }
        for a in 0..n {
            if !s.is_present(a) {
                prop_assert!(hop_distance(s, a, n).is_err());
                continue;
            }
            let h = hop_distance(s, a, n).unwrap();
            for (j, &want) in d[a].iter().enumerate() {
                let got = h.as_slice()[j];
                prop_assert_eq!(got, if want == inf { HopDistances::UNREACHABLE } else { want });
            }
        }
    }
}

#[test]
fn padding_and_symmetry() {
    let g = build(5, false, &[vec![(0, 1, 3.0), (1, 2, 1.0)]]);
    assert_eq!(g.padded_row(0, 3, true).unwrap(), vec![0.0; 5]);
    assert_eq!(g.padded_row(0, 4, true).unwrap(), vec![0.0; 5]);
    assert_eq!(g.padded_row(0, 0, true).unwrap(), vec![0.0, 1.0, 0.0, 0.0, 0.0]);
    assert_eq!(g.padded_row(0, 1, true).unwrap(), vec![1.0, 0.0, 1.0, 0.0, 0.0]);
    assert_eq!(g.padded_row(0, 0, false).unwrap()[1], 3.0);
    assert!(g.padded_row(0, 5, true).is_err());
    assert!(g.padded_row(1, 0, true).is_err());
}

#[test]
fn sbm_edge_count_within_three_sigma() {
    let params = SbmParams::default();
    let sizes = params.block_sizes();
    assert_eq!(sizes, vec![333, 333, 334]);
    let within: f64 = sizes.iter().map(|&s| (s * (s - 1) / 2) as f64).sum();
    let all = (params.n_nodes * (params.n_nodes - 1) / 2) as f64;
    let cross = all - within;
    let mean = within * params.p_in + cross * params.p_out;
    let sd = (within * params.p_in * (1.0 - params.p_in) + cross * params.p_out * (1.0 - params.p_out)).sqrt();
    assert!((mean - 36_567.0).abs() < 1.0, "{mean}");
    let sbm = generate_sbm(&params).unwrap();
    assert_eq!((sbm.graph.num_timestamps(), sbm.graph.n_global()), (50, 1000));
    for s in sbm.graph.snapshots() {
        let e = s.num_edges() as f64;
        assert!((e - mean).abs() < 3.0 * sd, "t={}: {e} vs {mean} +- {sd}", s.t());
    }
}

#[test]
fn sbm_migrations_stay_in_range_across_seeds() {
    for seed in 0..5 {
        let p = SbmParams { n_nodes: 60, n_timestamps: 12, migrate_min: 2, migrate_max: 5, seed, ..SbmParams::default() };
        let sbm = generate_sbm(&p).unwrap();
        assert_eq!(sbm.migrations.len(), 12);
        assert_eq!(sbm.migrations[0], 0);
        for t in 1..12 {
            let m = sbm.migrations[t];
            assert!((2..=5).contains(&m));
            let moved = (0..60).filter(|&i| sbm.communities[t - 1][i] != sbm.communities[t][i]).count();
            assert_eq!(moved, m);
        }
    }
}

#[test]
fn sbm_is_deterministic_per_seed() {
    let p = SbmParams { n_nodes: 40, n_timestamps: 5, migrate_min: 1, migrate_max: 3, ..SbmParams::default() };
    let a = generate_sbm(&p).unwrap().graph;
    let b = generate_sbm(&p).unwrap().graph;
    assert_eq!(a, b);
    let c = generate_sbm(&SbmParams { seed: 9, ..p }).unwrap().graph;
    assert_ne!(a, c);
}

#[test]
fn table_split_counts() {
    for (t, want) in [(50, (35, 5, 10)), (90, (63, 9, 18)), (88, (62, 9, 17))] {
        let s = Split::new(t, SplitSpec::default_for(t)).unwrap();
        assert_eq!((s.train.len(), s.val.len(), s.test.len()), want);
        assert_eq!(s.test.end, t);
    }
    let s = Split::new(10, SplitSpec::new(8, 1, 1)).unwrap();
    assert_eq!((s.train, s.val, s.test), (0..8, 8..9, 9..10));
    assert!(Split::new(10, SplitSpec::new(8, 1, 2)).is_err());
}
