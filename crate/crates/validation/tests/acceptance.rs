//! Acceptance run: one PASS/FAIL line per criterion, non-zero exit if any fails.

use std::path::Path;
use std::time::Instant;

use gembed_cli::commands::{evaluate_embeddings, train_one};
use gembed_cli::config::{thetas_from_flags, Settings};
use gembed_core::analysis::tea;
use gembed_core::eval::{attention_report, evaluate, mean_std, EvalOptions, TableScorer};
use gembed_core::graph::{
    generate_sbm, load_edge_list, Binning, DynamicGraph, Edge, LoadOptions, SbmParams, Snapshot, Split, SplitSpec,
};
use gembed_core::models::{
    history_matrix, kl_divergence, positional_encoding, triplet_loss, Encoder, GaussianEmbedding, Registry,
    TrainConfig, TransformerG2g,
};
use gembed_core::rng::stream;
use gembed_core::sampling::{sample_triplets, TripletBatch};
use gembed_tensor::{grad_check, relative_error, CsrMatrix, Tape, Tensor, Var};
use gembed_validation::{note, Outcome, Report};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

const H: f64 = 1e-5;
const GRAD_TOL: f64 = 1e-4;

fn main() {
    let mut report = Report::default();
    report.run(1, "gradient correctness", gradients);
    report.run(2, "KL oracle", kl_oracle);
    report.run(3, "novelty reproduction", novelty);
    report.run(4, "multi-step identity", multistep_identity);
    report.run(6, "lookback degeneracy", lookback_degeneracy);
    report.run(7, "ranking-metric oracle", ranking_oracle);
    report.run(8, "attention normalization and report", attention);
    report.run(9, "determinism", determinism);
    report.run(5, "desk-scale link prediction", link_prediction);
    density_matched();
    if !report.finish() {
        std::process::exit(1);
    }
}

fn uniform(rng: &mut impl Rng, shape: &[usize]) -> Tensor {
    let n: usize = shape.iter().product();
    Tensor::new((0..n).map(|_| rng.random_range(-1.0..1.0)).collect(), shape.to_vec()).unwrap()
}

type OpFn = Box<dyn Fn(&mut Tape, Var, &[Tensor]) -> gembed_tensor::Result<Var>>;

/// Every tape op, each as `(name, input shape, constant shapes, f)`.
fn op_cases() -> Vec<(&'static str, Vec<usize>, Vec<Vec<usize>>, OpFn)> {
    fn c(t: &mut Tape, x: &Tensor) -> Var {
        t.constant(x.clone()).unwrap()
    }
    vec![
        ("matmul", vec![3, 4], vec![vec![4, 2]], Box::new(|t, x, k| { let b = c(t, &k[0]); t.matmul(x, b) })),
        ("spmm", vec![5, 3], vec![], Box::new(|t, x, _| {
            let a = CsrMatrix::from_dense(2, 5, &[0.5, 0.0, -1.0, 0.0, 0.3, 0.0, 0.2, 0.0, 0.0, 1.0])?;
            t.spmm(a, x)
        })),
        ("add", vec![2, 3], vec![vec![2, 3]], Box::new(|t, x, k| { let b = c(t, &k[0]); t.add(x, b) })),
        ("sub", vec![2, 3], vec![vec![2, 3]], Box::new(|t, x, k| { let b = c(t, &k[0]); t.sub(b, x) })),
        ("mul", vec![2, 3], vec![vec![2, 3]], Box::new(|t, x, k| { let b = c(t, &k[0]); let y = t.mul(x, b)?; t.mul(y, x) })),
        ("div", vec![2, 3], vec![vec![2, 3]], Box::new(|t, x, k| {
            let b = c(t, &k[0]);
            let b = t.exp(b)?;
            let y = t.div(x, b)?;
            let d = t.exp(x)?;
            t.div(y, d)
        })),
        ("add_row", vec![3], vec![vec![4, 3]], Box::new(|t, x, k| { let a = c(t, &k[0]); let y = t.add_row(a, x)?; t.square(y) })),
        ("mul_row", vec![3], vec![vec![4, 3]], Box::new(|t, x, k| { let a = c(t, &k[0]); t.mul_row(a, x) })),
        ("scale", vec![4], vec![], Box::new(|t, x, _| { let y = t.scale(x, -2.5)?; t.square(y) })),
        ("add_scalar", vec![4], vec![], Box::new(|t, x, _| { let y = t.add_scalar(x, 0.75)?; t.square(y) })),
        ("reshape", vec![2, 3], vec![], Box::new(|t, x, _| { let y = t.reshape(x, &[3, 2])?; t.softmax_rows(y) })),
        ("concat_cols", vec![2, 2], vec![vec![2, 3]], Box::new(|t, x, k| {
            let b = c(t, &k[0]);
            let y = t.concat_cols(&[b, x, x])?;
            t.softmax_rows(y)
        })),
        ("gather_rows", vec![3, 2], vec![], Box::new(|t, x, _| { let y = t.gather_rows(x, &[2, 0, 2, 1])?; t.square(y) })),
        ("softmax_rows", vec![3, 4], vec![], Box::new(|t, x, _| t.softmax_rows(x))),
        ("tanh", vec![5], vec![], Box::new(|t, x, _| t.tanh(x))),
        ("sigmoid", vec![5], vec![], Box::new(|t, x, _| t.sigmoid(x))),
        ("softplus", vec![5], vec![], Box::new(|t, x, _| t.softplus(x))),
        ("exp", vec![5], vec![], Box::new(|t, x, _| t.exp(x))),
        ("log", vec![5], vec![], Box::new(|t, x, _| { let y = t.exp(x)?; let y = t.add_scalar(y, 0.5)?; t.log(y) })),
        ("elu", vec![6], vec![], Box::new(|t, x, _| t.elu(x))),
        ("relu", vec![6], vec![], Box::new(|t, x, _| t.relu(x))),
        ("square", vec![5], vec![], Box::new(|t, x, _| t.square(x))),
        ("layer_norm_rows", vec![3, 5], vec![], Box::new(|t, x, _| t.layer_norm_rows(x))),
        ("sum", vec![2, 3], vec![], Box::new(|t, x, _| { let y = t.square(x)?; t.sum(y) })),
        ("mean", vec![2, 3], vec![], Box::new(|t, x, _| { let y = t.tanh(x)?; t.mean(y) })),
        ("row_sum", vec![3, 4], vec![], Box::new(|t, x, _| { let y = t.square(x)?; t.row_sum(y) })),
        ("block_matmul_nt", vec![6, 4], vec![vec![6, 4]], Box::new(|t, x, k| { let b = c(t, &k[0]); t.block_matmul_nt(x, b, 3) })),
        ("block_matmul", vec![6, 3], vec![vec![6, 4]], Box::new(|t, x, k| { let b = c(t, &k[0]); t.block_matmul(x, b, 3) })),
    ]
}

fn encoder_error<E: Encoder>(enc: &E, g: &DynamicGraph, batch: &TripletBatch) -> f64 {
    let nodes = batch.nodes();
    let loss_of = |e: &E| {
        let mut tape = Tape::new();
        let out = e.encode(&mut tape, g, batch.t, &nodes, true).unwrap();
        let loss = triplet_loss(&mut tape, out.mu, out.var, batch, |n| nodes.binary_search(&n).ok()).unwrap();
        (tape, loss, out.params)
    };
    let (mut tape, loss, params) = loss_of(enc);
    tape.backward(loss).unwrap();
    let mut probe = enc.clone();
    let analytic: Vec<Vec<f64>> = probe
        .params_mut()
        .into_iter()
        .zip(&params)
        .map(|(p, v)| {
            let mut t = p.clone();
            t.zero_grad();
            tape.accumulate_grad(*v, &mut t).unwrap();
            t.grad().unwrap().to_vec()
        })
        .collect();
    let mut worst: f64 = 0.0;
    for (k, grad) in analytic.iter().enumerate() {
        for (i, a) in grad.iter().enumerate() {
            let eval = |d: f64| {
                let mut e = enc.clone();
                e.params_mut()[k].data_mut()[i] += d;
                let (tape, loss, _) = loss_of(&e);
                tape.item(loss)
            };
            worst = worst.max(relative_error(*a, (eval(H) - eval(-H)) / (2.0 * H)));
        }
    }
    worst
}

fn gradients() -> Outcome {
    let start = Instant::now();
    let mut worst_op = (0.0f64, "");
    let cases = op_cases();
    for (name, shape, consts, f) in &cases {
        for seed in 0..5u64 {
            let mut rng = stream(seed, &[11]);
            let x = uniform(&mut rng, shape);
            let ks: Vec<Tensor> = consts.iter().map(|s| uniform(&mut rng, s)).collect();
            let w = uniform(&mut rng, &[64]);
            let err = grad_check(
                |t, xv| {
                    let y = f(t, xv, &ks)?;
                    let n = t.value(y).len();
                    let wv = t.constant(Tensor::new(w.data()[..n].to_vec(), t.shape(y).to_vec())?)?;
                    let p = t.mul(y, wv)?;
                    t.sum(p)
                },
                &x,
                H,
            )
            .unwrap();
            if err > worst_op.0 {
                worst_op = (err, name);
            }
        }
    }
    let e = |a, b| Edge { src: a, dst: b, weight: 1.0 };
    let g = DynamicGraph::new(
        vec![
            Snapshot::new(0, 5, false, vec![e(0, 1), e(1, 2), e(2, 3)]).unwrap(),
            Snapshot::new(1, 5, false, vec![e(0, 1), e(1, 2), e(3, 4), e(2, 4)]).unwrap(),
        ],
        (0..5).map(|i| i.to_string()).collect(),
        false,
    )
    .unwrap();
    let batch = sample_triplets(g.snapshot(1).unwrap(), 2, 4).unwrap();
    let mut worst_tf: f64 = 0.0;
    for lookback in 0..=2 {
        for seed in 0..3 {
            let cfg = TrainConfig { lookback, d_model: 4, d_ff: 6, hidden: 5, embed_dim: 3, ..TrainConfig::default() };
            let m = TransformerG2g::new(&mut stream(seed, &[lookback as u64]), 5, &cfg).unwrap();
            worst_tf = worst_tf.max(encoder_error(&m, &g, &batch));
        }
    }
    let secs = start.elapsed().as_secs_f64();
    Outcome::new(
        worst_op.0 < GRAD_TOL && worst_tf < GRAD_TOL && secs < 60.0,
        format!(
            "{} ops max rel err {:.2e} ({}), transformer+triplet max rel err {:.2e}, {secs:.1}s < 60s",
            cases.len(),
            worst_op.0,
            worst_op.1,
            worst_tf
        ),
    )
}

fn kl_oracle() -> Outcome {
    let mut rng = stream(2, &[22]);
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let draw = |rng: &mut gembed_core::rng::Rng| {
            let mu: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
            let var: Vec<f64> = (0..4).map(|_| rng.random_range(0.5..2.0)).collect();
            GaussianEmbedding::new(mu, var).unwrap()
        };
        let p = draw(&mut rng);
        let q = draw(&mut rng);
        let samples = 1_000_000;
        let mut acc = 0.0;
        for _ in 0..samples {
            for k in 0..4 {
                let z: f64 = StandardNormal.sample(&mut rng);
                let x = p.mu[k] + p.var[k].sqrt() * z;
                acc += 0.5 * (q.var[k] / p.var[k]).ln() - 0.5 * z * z + (x - q.mu[k]).powi(2) / (2.0 * q.var[k]);
            }
        }
        let mc = acc / samples as f64;
        let kl = kl_divergence(&p, &q).unwrap();
        worst = worst.max((mc - kl).abs() / kl);
    }
    let one = |mu: f64, var: f64| GaussianEmbedding::new(vec![mu], vec![var]).unwrap();
    let a = kl_divergence(&one(0.0, 1.0), &one(1.0, 1.0)).unwrap();
    let b = kl_divergence(&one(0.0, 1.0), &one(0.0, 2.0)).unwrap();
    let b_hand = 0.5 * (0.5 - 1.0 + 2f64.ln());
    let hand_ok = (a - 0.5).abs() < 1e-12 && (b - b_hand).abs() < 1e-12;
    Outcome::new(
        worst < 0.01 && hand_ok,
        format!("20 pairs max MC rel err {:.3}% (< 1%), hand values {a} and {b:.5}", worst * 100.0),
    )
}

/// Novelty reported for each benchmark, with the snapshot count it was binned to.
const BENCHMARKS: &[(&str, usize, bool, f64)] = &[
    ("reality", 90, false, 0.0761),
    ("uci", 88, true, 0.7526),
    ("bitcoin", 137, true, 0.9161),
    ("slashdot", 12, true, 0.9861),
    ("as", 100, false, 0.014),
];

fn novelty() -> Outcome {
    let mut values = Vec::new();
    for seed in 0..3 {
        let g = generate_sbm(&SbmParams { seed, ..SbmParams::default() }).unwrap().graph;
        values.push(tea(&g).unwrap().novelty);
    }
    let mut pass = values.iter().all(|v| (0.02..=0.05).contains(v));
    let mut detail = format!("SBM novelty over 3 seeds {values:.4?} within [0.02, 0.05]");
    if let Some(dir) = std::env::var_os("GEMBED_DATA_DIR") {
        for &(name, bins, directed, target) in BENCHMARKS {
            let path = Path::new(&dir).join(format!("{name}.txt"));
            if !path.exists() {
                continue;
            }
            let opts = LoadOptions { directed: Some(directed), binning: Binning::Uniform { bins } };
            let v = load_edge_list(&path, &opts).and_then(|g| tea(&g)).map(|p| p.novelty);
            let ok = matches!(v, Ok(x) if (x - target).abs() <= 0.02);
            note(&format!("{name}: novelty {v:?} vs {target} +- 0.02 -> {}", if ok { "ok" } else { "off" }));
            pass &= ok;
            detail.push_str(&format!("; {name} checked"));
        }
    } else {
        note("benchmark files not present (set GEMBED_DATA_DIR); SBM branch only");
    }
    Outcome::new(pass, detail)
}

fn toy_sbm(n: usize, t: usize, seed: u64) -> DynamicGraph {
    generate_sbm(&SbmParams {
        n_nodes: n,
        n_communities: 2,
        p_in: 0.4,
        p_out: 0.05,
        n_timestamps: t,
        migrate_min: 1,
        migrate_max: 3,
        seed,
    })
    .unwrap()
    .graph
}

fn multistep_identity() -> Outcome {
    let g = toy_sbm(60, 10, 1);
    let split = Split::new(10, SplitSpec::new(7, 1, 2)).unwrap();
    let registry = Registry::builtin();
    let flag = thetas_from_flags(Some(1.0), [None; 3]).unwrap().unwrap();
    let run = |thetas: Vec<f64>| {
        let cfg = TrainConfig { d_model: 8, hidden: 16, embed_dim: 4, lr: 1e-2, epochs: 5, seed: 4, thetas, ..TrainConfig::default() };
        let mut m = registry.build("dyng2g", cfg).unwrap();
        m.fit(&g, &split).unwrap();
        let emb = m.embed(&g).unwrap();
        let tensors: Vec<Vec<u64>> =
            m.checkpoint().unwrap().tensors.iter().map(|(_, t)| t.data().iter().map(|x| x.to_bits()).collect()).collect();
        let means: Vec<u64> = (0..10).flat_map(|t| emb.means_at(t).unwrap().to_vec()).map(f64::to_bits).collect();
        (tensors, means)
    };
    let two_step = run(flag.clone());
    let baseline = run(vec![1.0]);
    Outcome::new(
        flag == vec![1.0, 0.0] && two_step == baseline,
        format!("theta {flag:?} vs [1.0]: {} weight tensors and all means bit-identical", two_step.0.len()),
    )
}

/// The model's lookback-0 op sequence with the attention block replaced by
/// its value projection.
fn without_attention(m: &TransformerG2g, rows: CsrMatrix) -> (Vec<f64>, Vec<f64>) {
    let mut tape = Tape::new();
    let mut vars = Vec::new();
    let (batch, d) = (rows.rows(), m.d_model());
    let h0 = m.input.bind(&mut tape, &mut vars).unwrap().apply_sparse(&mut tape, rows).unwrap();
    let pe: Vec<f64> = positional_encoding(1, d).unwrap().into_iter().cycle().take(batch * d).collect();
    let pe = tape.leaf(pe, vec![batch, d], false).unwrap();
    let h0 = tape.add(h0, pe).unwrap();
    let v = m.value.bind(&mut tape, &mut vars).unwrap().apply(&mut tape, h0).unwrap();
    let o = m.output.bind(&mut tape, &mut vars).unwrap().apply(&mut tape, v).unwrap();
    let r1 = tape.add(h0, o).unwrap();
    let norm = |tape: &mut Tape, x, gain: &Tensor, bias: &Tensor| {
        let g = tape.param(gain).unwrap();
        let b = tape.param(bias).unwrap();
        let n = tape.layer_norm_rows(x).unwrap();
        let n = tape.mul_row(n, g).unwrap();
        tape.add_row(n, b).unwrap()
    };
    let h1 = norm(&mut tape, r1, &m.norm1.gain, &m.norm1.bias);
    let f = m.ffn_in.bind(&mut tape, &mut vars).unwrap().apply(&mut tape, h1).unwrap();
    let f = tape.relu(f).unwrap();
    let f = m.ffn_out.bind(&mut tape, &mut vars).unwrap().apply(&mut tape, f).unwrap();
    let r2 = tape.add(h1, f).unwrap();
    let h2 = norm(&mut tape, r2, &m.norm2.gain, &m.norm2.bias);
    let p = m.project.bind(&mut tape, &mut vars).unwrap().apply(&mut tape, h2).unwrap();
    let p = tape.tanh(p).unwrap();
    let (mu, var) = m.heads.apply(&mut tape, p, &mut vars).unwrap();
    (tape.value(mu).to_vec(), tape.value(var).to_vec())
}

fn lookback_degeneracy() -> Outcome {
    let g = toy_sbm(30, 4, 2);
    let nodes: Vec<usize> = (0..30).collect();
    let mut identical = true;
    let mut unit = true;
    for seed in 0..5 {
        let cfg = TrainConfig { lookback: 0, d_model: 8, d_ff: 16, hidden: 12, embed_dim: 4, seed, ..TrainConfig::default() };
        let m = TransformerG2g::new(&mut stream(seed, &[1]), 30, &cfg).unwrap();
        for t in 0..4 {
            let rows = history_matrix(&g, t, &nodes, 0, true).unwrap();
            let mut tape = Tape::new();
            let out = m.forward(&mut tape, rows.clone()).unwrap();
            unit &= tape.value(out.encoded.attention.unwrap()).iter().all(|&a| a == 1.0);
            let (mu, var) = without_attention(&m, rows);
            identical &= tape.value(out.encoded.mu) == &mu[..] && tape.value(out.encoded.var) == &var[..];
            let (_, a) = m.forward_history(&[g.padded_row(t, 3, true).unwrap()]).unwrap();
            unit &= a == vec![1.0];
        }
    }
    Outcome::new(
        identical && unit,
        format!("5 models x 4 snapshots: outputs bit-identical to the attention-free pass = {identical}, attention [[1]] = {unit}"),
    )
}

fn brute_force(g: &DynamicGraph, scores: &[Vec<f64>]) -> Option<(f64, f64)> {
    let n = g.n_global();
    let (mut maps, mut mrrs) = (Vec::new(), Vec::new());
    for (t, s) in g.snapshots().iter().enumerate() {
        let (mut aps, mut rrs) = (Vec::new(), Vec::new());
        for src in 0..n {
            let partners: Vec<usize> = s.partners(src).collect();
            if partners.is_empty() {
                continue;
            }
            let sc = |j: usize| scores[t][src * n + j];
            let mut ranks: Vec<usize> = partners
                .iter()
                .map(|&j| 1 + (0..n).filter(|&k| k != src && (sc(k) > sc(j) || (sc(k) == sc(j) && k < j))).count())
                .collect();
            ranks.sort();
            aps.push(ranks.iter().enumerate().map(|(i, &r)| (i + 1) as f64 / r as f64).sum::<f64>() / ranks.len() as f64);
            rrs.push(1.0 / ranks[0] as f64);
        }
        if !aps.is_empty() {
            maps.push(aps.iter().sum::<f64>() / aps.len() as f64);
            mrrs.push(rrs.iter().sum::<f64>() / rrs.len() as f64);
        }
    }
    (!maps.is_empty()).then(|| (maps.iter().sum::<f64>() / maps.len() as f64, mrrs.iter().sum::<f64>() / mrrs.len() as f64))
}

fn ranking_oracle() -> Outcome {
    let (mut exact, mut total) = (0, 0);
    let mut seed = 0u64;
    while total < 100 {
        seed += 1;
        let mut rng = stream(seed, &[77]);
        let n = rng.random_range(2..=12);
        let ts = rng.random_range(1..=3);
        let directed = rng.random_bool(0.5);
        let snaps: Vec<Snapshot> = (0..ts)
            .map(|t| {
                let m = rng.random_range(1..=2 * n);
                let edges: Vec<Edge> = (0..m)
                    .map(|_| Edge { src: rng.random_range(0..n), dst: rng.random_range(0..n), weight: 1.0 })
                    .collect();
                Snapshot::new(t, n, directed, edges).unwrap()
            })
            .collect();
        let g = DynamicGraph::new(snaps, (0..n).map(|i| i.to_string()).collect(), directed).unwrap();
        let scores: Vec<Vec<f64>> = (0..ts).map(|_| (0..n * n).map(|_| rng.random_range(0..4) as f64).collect()).collect();
        let Some((map, mrr)) = brute_force(&g, &scores) else { continue };
        let r = evaluate(&TableScorer { n, scores }, &g, 0..ts, &EvalOptions::default()).unwrap();
        total += 1;
        exact += usize::from(r.map == map && r.mrr == mrr);
    }
    Outcome::new(exact == total, format!("{exact}/{total} random instances (n <= 12, tied scores) match exactly"))
}

fn alternating_graph(seed: u64) -> DynamicGraph {
    let (n, t_count) = (40, 20);
    let mut rng = stream(seed, &[99]);
    let base: Vec<(usize, usize)> =
        (1..n).flat_map(|a| (a + 1..n).map(move |b| (a, b))).filter(|_| rng.random_bool(0.1)).collect();
    let snaps = (0..t_count)
        .map(|t| {
            let mut es: Vec<Edge> = base.iter().map(|&(src, dst)| Edge { src, dst, weight: 1.0 }).collect();
            if t % 2 == 0 {
                es.extend((1..16).map(|dst| Edge { src: 0, dst, weight: 1.0 }));
            }
            Snapshot::new(t, n, false, es).unwrap()
        })
        .collect();
    DynamicGraph::new(snaps, (0..n).map(|i| i.to_string()).collect(), false).unwrap()
}

fn attention() -> Outcome {
    let lookback = 4;
    let mut rows_ok = true;
    let mut shape_ok = true;
    let mut diffs = Vec::new();
    for seed in 0..10u64 {
        let g = alternating_graph(seed);
        let cfg = TrainConfig {
            lookback,
            d_model: 64,
            d_ff: 128,
            hidden: 16,
            embed_dim: 8,
            lr: 1e-4,
            epochs: 100,
            seed,
            ..TrainConfig::default()
        };
        let split = Split::new(20, SplitSpec::new(14, 2, 4)).unwrap();
        let (model, _) = gembed_core::models::train_transformer(&g, &split, &cfg).unwrap();
        let all: Vec<usize> = (0..20).collect();
        for node in [0, 1, 39] {
            let r = attention_report(&model, &g, node, &all, true).unwrap();
            for e in &r.entries {
                shape_ok &= e.weights.len() == (lookback + 1) * (lookback + 1) && e.degrees.len() == lookback + 1;
                rows_ok &= e.weights.chunks(lookback + 1).all(|row| (row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            }
        }
        // the node is present at even snapshots; its degree alternates 15/0 along the history
        let present: Vec<usize> = (lookback..20).filter(|t| t % 2 == 0).collect();
        let r = attention_report(&model, &g, 0, &present, true).unwrap();
        let (mut hi, mut lo) = (Vec::new(), Vec::new());
        for e in &r.entries {
            for (w, d) in e.last_row().iter().zip(&e.degrees) {
                if *d > 0 { hi.push(*w) } else { lo.push(*w) }
            }
        }
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        diffs.push(mean(&hi) - mean(&lo));
    }
    let (mean, sd) = mean_std(&diffs);
    let two_sigma = 2.0 * sd / (diffs.len() as f64).sqrt();
    Outcome::new(
        rows_ok && shape_ok && mean > two_sigma,
        format!(
            "rows sum to 1 = {rows_ok}, {}x{} weights + degree history = {shape_ok}; high-minus-zero degree attention {mean:.4} > 2 sigma {two_sigma:.4} over 10 seeds",
            lookback + 1,
            lookback + 1
        ),
    )
}

fn determinism() -> Outcome {
    let g = toy_sbm(40, 10, 3);
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("g.txt");
    gembed_core::graph::write_edge_list(&g, &data).unwrap();
    let mut same = true;
    let mut shown = Vec::new();
    for model in Registry::builtin().names() {
        let mut s = Settings::default();
        s.model = model.to_string();
        s.train = TrainConfig { d_model: 8, d_ff: 16, hidden: 16, embed_dim: 4, lr: 1e-2, epochs: 4, seed: 9, ..TrainConfig::default() };
        s.classifier.lr = 1e-2;
        let split = s.split_for(10).unwrap();
        let mut runs = Vec::new();
        for k in 0..2 {
            let out = dir.path().join(format!("{model}{k}"));
            let emb = train_one(&s, &g, &data, &out).unwrap();
            let r = evaluate_embeddings(&emb, &g, &split, &s, 9).unwrap();
            let bytes = std::fs::read(out.join("embeddings.bin")).unwrap();
            runs.push((r.map.to_bits(), r.mrr.to_bits(), bytes));
        }
        same &= runs[0] == runs[1];
        shown.push(format!("{model} MAP={:.4}", f64::from_bits(runs[0].0)));
    }
    Outcome::new(same, format!("two train+eval runs per model bit-identical: {}", shown.join(", ")))
}

struct Measured {
    transformer: f64,
    baseline: f64,
    edges: usize,
}

fn sbm_pipeline(p_in: f64) -> Measured {
    let g = generate_sbm(&SbmParams { p_in, ..SbmParams::default() }).unwrap().graph;
    let split = Split::new(50, SplitSpec::new(35, 5, 10)).unwrap();
    let settings = Settings { split: Some((35, 5, 10)), ..Settings::default() };
    let registry = Registry::builtin();
    let map_of = |name: &str, cfg: TrainConfig| {
        let mut m = registry.build(name, cfg).unwrap();
        m.fit(&g, &split).unwrap();
        let emb = m.embed(&g).unwrap();
        evaluate_embeddings(&emb, &g, &split, &settings, 0).unwrap().map
    };
    let transformer = map_of("transformer", TrainConfig { lookback: 1, lr: 1e-4, epochs: 20, ..TrainConfig::default() });
    let baseline = map_of("dyng2g", TrainConfig { lr: 1e-3, epochs: 50, ..TrainConfig::default() });
    Measured { transformer, baseline, edges: g.num_edges() }
}

fn link_prediction() -> Outcome {
    let start = Instant::now();
    let m = sbm_pipeline(0.2);
    let secs = start.elapsed().as_secs_f64();
    let ratio = m.transformer.max(m.baseline) / m.transformer.min(m.baseline);
    Outcome::new(
        m.transformer >= 0.45 && ratio <= 1.5 && secs < 7200.0,
        format!(
            "p_in 0.2 ({} edges): transformer l=1 test MAP {:.4} (need >= 0.45), DynG2G {:.4}, ratio {ratio:.2} (<= 1.5), {secs:.0}s",
            m.edges, m.transformer, m.baseline
        ),
    )
}

/// Same pipeline at the in-block density that matches the reference edge
/// volume; informational only.
fn density_matched() {
    let dense = sbm_pipeline(0.565);
    let ratio = dense.transformer.max(dense.baseline) / dense.transformer.min(dense.baseline);
    note(&format!(
        "density-matched p_in 0.565 ({} edges): transformer MAP {:.4}, DynG2G {:.4}, ratio {ratio:.2}",
        dense.edges, dense.transformer, dense.baseline
    ));
}
