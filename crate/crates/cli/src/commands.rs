use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use gembed_core::analysis::{cosine_profile, default_anchors, tea};
use gembed_core::eval::{
    attention_report, evaluate, mean_std, train_classifier, AttentionReport, ClassifierScorer, RankingResult,
};
use gembed_core::graph::{generate_sbm, load_edge_list, write_edge_list, DynamicGraph, SbmParams, Split};
use gembed_core::models::{Checkpoint, EmbeddingTable, Registry, TrainLog};
use gembed_core::Error;
use log::{info, warn};

use crate::config::{self, Layer, Settings};
use crate::manifest::RunManifest;
use crate::{io_error, AnalyzeArgs, Command, Common, EmbedArgs, EvalArgs, GenSbmArgs, TrainArgs, DATA_DIR_ENV};

pub fn dispatch(cmd: Command) -> anyhow::Result<()> {
    match cmd {
        Command::Analyze(a) => analyze(&a),
        Command::GenSbm(a) => gen_sbm(&a),
        Command::Train(a) => train(&a),
        Command::Embed(a) => embed(&a),
        Command::Eval(a) => eval(&a),
    }
}

fn put(layer: &mut Layer, key: &str, value: Option<impl ToString>) {
    if let Some(v) = value {
        layer.insert(key.to_string(), v.to_string());
    }
}

fn common_layer(c: &Common) -> Layer {
    let mut l = Layer::new();
    put(&mut l, "split", c.split.as_ref());
    put(&mut l, "bins", c.bins);
    put(&mut l, "directed", c.directed);
    put(&mut l, "seed", c.seed);
    l
}

/// Preset, then config file, then the command-line layer.
pub fn resolve(common: &Common, cli: &Layer) -> anyhow::Result<Settings> {
    let preset = match &common.preset {
        Some(name) => config::preset(name)?.layer(),
        None => Layer::new(),
    };
    let file = match &common.config {
        Some(path) => config::load_config(path)?,
        None => Layer::new(),
    };
    Ok(Settings::resolve(&[&preset, &file, cli])?)
}

/// `path` as given when it exists, else under the data directory when that
/// is set and holds it.
pub fn resolve_dataset(path: &Path) -> PathBuf {
    if path.exists() || path.is_absolute() {
        return path.to_path_buf();
    }
    match std::env::var_os(DATA_DIR_ENV) {
        Some(dir) if Path::new(&dir).join(path).exists() => Path::new(&dir).join(path),
        _ => path.to_path_buf(),
    }
}

pub fn load_graph(path: &Path, s: &Settings) -> anyhow::Result<(PathBuf, DynamicGraph)> {
    let path = resolve_dataset(path);
    let g = load_edge_list(&path, &s.load_options()).map_err(|e| match e {
        e @ Error::Parse { .. } => anyhow::Error::new(e).context(format!("parsing {}", path.display())),
        e => e.into(),
    })?;
    info!(
        "{}: {} snapshots, {} nodes, {} edges",
        path.display(),
        g.num_timestamps(),
        g.n_global(),
        g.num_edges()
    );
    Ok((path, g))
}

fn create_dir(dir: &Path) -> anyhow::Result<()> {
    fs::create_dir_all(dir).map_err(|e| io_error(dir, e))?;
    Ok(())
}

fn write_text(path: &Path, text: &str, manifest: &mut RunManifest) -> anyhow::Result<()> {
    fs::write(path, text).map_err(|e| io_error(path, e))?;
    manifest.output(path);
    Ok(())
}

fn sidecar(path: &Path) -> PathBuf {
    let mut name = path.file_name().unwrap_or_default().to_os_string();
    name.push(".manifest.json");
    path.with_file_name(name)
}

fn analyze(a: &AnalyzeArgs) -> anyhow::Result<()> {
    let mut cli = common_layer(&a.common);
    put(&mut cli, "window", a.window);
    let s = resolve(&a.common, &cli)?;
    let (path, g) = load_graph(&a.dataset, &s)?;
    create_dir(&a.out)?;
    let mut m = RunManifest::new("analyze", s.train.seed, &s);
    m.input(&path)?;

    let profile = m.time("tea", || tea(&g))?;
    let mut csv = String::from("t,new_edges,repeated_edges\n");
    for c in &profile.counts {
        writeln!(csv, "{},{},{}", c.t, c.new_edges, c.repeated_edges)?;
    }
    write_text(&a.out.join("tea.csv"), &csv, &mut m)?;
    let line = format!("novelty={:.4}", profile.novelty);
    write_text(&a.out.join("novelty.txt"), &format!("{line}\n"), &mut m)?;
    println!("{line}");

    let anchors = default_anchors(g.num_timestamps(), s.window);
    if anchors.is_empty() {
        warn!("{} snapshots is too few for a cosine window of {}", g.num_timestamps(), s.window);
    } else {
        let cos = m.time("cosine", || cosine_profile(&g, &anchors, s.window))?;
        let mut csv = String::from("anchor,lag,cosine\n");
        for (anchor, sims) in &cos.rows {
            for (k, v) in sims.iter().enumerate() {
                writeln!(csv, "{anchor},{},{v}", k + 1)?;
            }
        }
        for (k, v) in cos.mean.iter().enumerate() {
            writeln!(csv, "mean,{},{v}", k + 1)?;
        }
        write_text(&a.out.join("cosine.csv"), &csv, &mut m)?;
    }
    m.write(&a.out.join("manifest.json"))
}

fn gen_sbm(a: &GenSbmArgs) -> anyhow::Result<()> {
    let params = SbmParams {
        n_nodes: a.nodes,
        n_communities: a.communities,
        p_in: a.p_in,
        p_out: a.p_out,
        n_timestamps: a.timestamps,
        migrate_min: a.migrate_min,
        migrate_max: a.migrate_max,
        seed: a.seed,
    };
    let mut m = RunManifest::new("gen-sbm", a.seed, &params);
    let sbm = m.time("generate", || generate_sbm(&params))?;
    if let Some(dir) = a.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        create_dir(dir)?;
    }
    write_edge_list(&sbm.graph, &a.out)?;
    m.output(&a.out);
    info!("wrote {} edges over {} snapshots to {}", sbm.graph.num_edges(), a.timestamps, a.out.display());
    m.write(&sidecar(&a.out))
}

fn train_layer(a: &TrainArgs) -> anyhow::Result<Layer> {
    let mut l = common_layer(&a.common);
    put(&mut l, "model", a.model.as_ref());
    put(&mut l, "epochs", a.epochs);
    put(&mut l, "lr", a.lr);
    put(&mut l, "d_model", a.d_model);
    put(&mut l, "d_ff", a.d_ff);
    put(&mut l, "hidden", a.hidden);
    put(&mut l, "embed_dim", a.embed_dim);
    put(&mut l, "k_per_anchor", a.k_per_anchor);
    put(&mut l, "batch_triples", a.batch_triples);
    put(&mut l, "binarize", a.binarize);
    let thetas = config::thetas_from_flags(a.theta, [a.theta1, a.theta2, a.theta3])?;
    put(
        &mut l,
        "thetas",
        thetas.map(|t| t.iter().map(f64::to_string).collect::<Vec<_>>().join(",")),
    );
    Ok(l)
}

fn loss_csv(log: &TrainLog) -> anyhow::Result<String> {
    let mut csv = String::from("epoch,t,train_loss,val_loss\n");
    let opt = |v: Option<String>| v.unwrap_or_default();
    for r in &log.records {
        writeln!(
            csv,
            "{},{},{},{}",
            r.epoch,
            opt(r.t.map(|t| t.to_string())),
            r.train_loss,
            opt(r.val_loss.map(|v| v.to_string()))
        )?;
    }
    Ok(csv)
}

/// Trains one model into `out`, returning its embeddings.
pub fn train_one(s: &Settings, g: &DynamicGraph, data: &Path, out: &Path) -> anyhow::Result<EmbeddingTable> {
    let registry = Registry::builtin();
    let split = s.split_for(g.num_timestamps())?;
    let mut model = registry.build(&s.model, s.train.clone())?;
    create_dir(out)?;
    let mut m = RunManifest::new("train", s.train.seed, s);
    m.input(data)?;
    info!(
        "training {} (lookback {}) on {}/{}/{} snapshots",
        s.model,
        s.train.lookback,
        split.train.len(),
        split.val.len(),
        split.test.len()
    );
    let log = m.time("fit", || model.fit(g, &split))?;
    if !log.skipped.is_empty() {
        warn!("no triplets at training snapshots {:?}", log.skipped);
    }
    let table = m.time("embed", || model.embed(g))?;

    let ck = out.join("checkpoint.ckpt");
    model.checkpoint()?.save(&ck)?;
    m.output(&ck);
    let emb = out.join("embeddings.bin");
    table.save(&emb)?;
    m.output(&emb);
    write_text(&out.join("loss.csv"), &loss_csv(&log)?, &mut m)?;
    if let Some(last) = log.records.last() {
        info!("final train loss {:.6} (best epoch {:?})", last.train_loss, log.best_epoch);
    }
    m.write(&out.join("manifest.json"))?;
    Ok(table)
}

fn train(a: &TrainArgs) -> anyhow::Result<()> {
    let lookbacks = match &a.lookback {
        Some(v) => Some(config::parse_lookbacks(v)?),
        None => None,
    };
    let mut cli = train_layer(a)?;
    if let Some([single]) = lookbacks.as_deref() {
        put(&mut cli, "lookback", Some(single));
    }
    let base = resolve(&a.common, &cli)?;
    base.train.validate()?;
    let (path, g) = load_graph(&a.dataset, &base)?;
    match lookbacks {
        Some(ls) if ls.len() > 1 => {
            for l in ls {
                let mut s = base.clone();
                s.train.lookback = l;
                train_one(&s, &g, &path, &a.out.join(format!("l{l}")))?;
            }
        }
        _ => {
            train_one(&base, &g, &path, &a.out)?;
        }
    }
    Ok(())
}

fn embed(a: &EmbedArgs) -> anyhow::Result<()> {
    let s = resolve(&a.common, &common_layer(&a.common))?;
    let (path, g) = load_graph(&a.dataset, &s)?;
    let ck = Checkpoint::load(&a.checkpoint)?;
    let model = Registry::builtin().restore(&ck)?;
    let mut m = RunManifest::new("embed", model.config().seed, model.config());
    m.input(&path)?;
    m.input(&a.checkpoint)?;
    let table = m.time("embed", || model.embed(&g))?;
    if let Some(dir) = a.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        create_dir(dir)?;
    }
    table.save(&a.out)?;
    m.output(&a.out);
    m.write(&sidecar(&a.out))
}

/// Trains the link classifier on the training snapshots and ranks the test
/// snapshots.
pub fn evaluate_embeddings(emb: &EmbeddingTable, g: &DynamicGraph, split: &Split, s: &Settings, seed: u64) -> anyhow::Result<RankingResult> {
    if emb.timestamps() != g.num_timestamps() || emb.nodes() != g.n_global() {
        return Err(Error::Dimension(format!(
            "embeddings cover {} snapshots x {} nodes, dataset has {} x {}",
            emb.timestamps(),
            emb.nodes(),
            g.num_timestamps(),
            g.n_global()
        ))
        .into());
    }
    let (clf, losses) = train_classifier(emb, g, split.train.clone(), &s.classifier_config(seed))?;
    log::debug!("classifier losses {losses:?}");
    let scorer = ClassifierScorer::new(&clf, emb)?;
    Ok(evaluate(&scorer, g, split.test.clone(), &s.eval_options(seed))?)
}

fn ranking_csv(r: &RankingResult) -> anyhow::Result<String> {
    let mut csv = String::from("timestamp,node,ap,rr\n");
    for n in &r.nodes {
        writeln!(csv, "{},{},{},{}", n.t, n.node, n.ap, n.rr)?;
    }
    Ok(csv)
}

fn attention_csvs(r: &AttentionReport) -> anyhow::Result<(String, String)> {
    let s = r.lookback + 1;
    let mut weights = String::from("t,row,col,weight\n");
    let mut degrees = String::from("t,lag,degree\n");
    for e in &r.entries {
        for (k, w) in e.weights.iter().enumerate() {
            writeln!(weights, "{},{},{},{w}", e.t, k / s, k % s)?;
        }
        for (k, d) in e.degrees.iter().enumerate() {
            writeln!(degrees, "{},{},{d}", e.t, r.lookback - k)?;
        }
    }
    Ok((weights, degrees))
}

fn eval(a: &EvalArgs) -> anyhow::Result<()> {
    if a.seeds == 0 {
        return Err(Error::Config("--seeds must be at least 1".into()).into());
    }
    let mut cli = common_layer(&a.common);
    put(&mut cli, "clf_lr", a.clf_lr);
    put(&mut cli, "clf_epochs", a.clf_epochs);
    put(&mut cli, "neg_factor", a.neg_factor);
    let s = resolve(&a.common, &cli)?;
    let (path, g) = load_graph(&a.dataset, &s)?;
    let emb = EmbeddingTable::load(&a.embeddings)?;
    let split = s.split_for(g.num_timestamps())?;
    create_dir(&a.out)?;
    let mut m = RunManifest::new("eval", s.train.seed, &s);
    m.input(&path)?;
    m.input(&a.embeddings)?;

    let mut runs = Vec::with_capacity(a.seeds);
    for k in 0..a.seeds {
        let seed = s.train.seed + k as u64;
        let r = m.time(&format!("seed {seed}"), || evaluate_embeddings(&emb, &g, &split, &s, seed))?;
        let name = if a.seeds == 1 { "ranking.csv".to_string() } else { format!("ranking_seed{seed}.csv") };
        write_text(&a.out.join(name), &ranking_csv(&r)?, &mut m)?;
        runs.push(r);
    }
    // spread across seeds when repeated, else across test snapshots
    let (map, mrr, map_sd, mrr_sd) = if runs.len() == 1 {
        (runs[0].map, runs[0].mrr, runs[0].map_std, runs[0].mrr_std)
    } else {
        let (map, map_sd) = mean_std(&runs.iter().map(|r| r.map).collect::<Vec<_>>());
        let (mrr, mrr_sd) = mean_std(&runs.iter().map(|r| r.mrr).collect::<Vec<_>>());
        (map, mrr, map_sd, mrr_sd)
    };
    let summary = format!("metric,mean,stddev\nMAP,{map},{map_sd}\nMRR,{mrr},{mrr_sd}\n");
    write_text(&a.out.join("summary.csv"), &summary, &mut m)?;
    if runs.len() == 1 {
        println!("MAP={map:.4}, MRR={mrr:.4}");
    } else {
        println!("MAP={map:.4} ± {map_sd:.4}, MRR={mrr:.4} ± {mrr_sd:.4}");
    }

    if let Some(id) = &a.attention_node {
        let ck_path = a
            .checkpoint
            .as_ref()
            .ok_or_else(|| Error::Config("--attention-node needs --checkpoint".into()))?;
        let model = Registry::builtin().restore(&Checkpoint::load(ck_path)?)?;
        let tf = model
            .as_transformer()
            .ok_or_else(|| Error::Config(format!("attention report needs a transformer, got {}", model.name())))?;
        let node = g
            .node_index(id)
            .ok_or_else(|| Error::OutOfRange(format!("node id {id:?} not in dataset")))?;
        let ts: Vec<usize> = split.test.clone().collect();
        let report = attention_report(tf, &g, node, &ts, model.config().binarize)?;
        let (weights, degrees) = attention_csvs(&report)?;
        write_text(&a.out.join("attention.csv"), &weights, &mut m)?;
        write_text(&a.out.join("attention_degrees.csv"), &degrees, &mut m)?;
        m.input(ck_path)?;
    }
    m.write(&a.out.join("manifest.json"))
}
