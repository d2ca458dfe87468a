//! Layered run settings: built-in defaults, then a named preset, then a flat
//! `key = value` file, then command-line flags. Later layers win.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use gembed_core::eval::{ClassifierConfig, EvalOptions};
use gembed_core::graph::{Binning, LoadOptions, Split, SplitSpec};
use gembed_core::models::TrainConfig;
use gembed_core::Error;
use serde::Serialize;

/// One layer of raw string settings.
pub type Layer = BTreeMap<String, String>;

pub const KEYS: &[&str] = &[
    "model",
    "lookback",
    "d_model",
    "d_ff",
    "hidden",
    "embed_dim",
    "lr",
    "epochs",
    "seed",
    "thetas",
    "k_per_anchor",
    "batch_triples",
    "binarize",
    "split",
    "bins",
    "directed",
    "clf_lr",
    "clf_epochs",
    "clf_positives",
    "clf_negatives",
    "clf_batch",
    "neg_factor",
    "exhaustive_limit",
    "window",
];

/// Per-dataset defaults: embedding size, model width, learning rate,
/// snapshot count and chronological split.
pub struct Preset {
    pub name: &'static str,
    pub embed_dim: usize,
    pub d_model: usize,
    pub lr: f64,
    pub timestamps: usize,
    pub split: (usize, usize, usize),
}

pub const PRESETS: &[Preset] = &[
    Preset { name: "sbm", embed_dim: 64, d_model: 256, lr: 1e-4, timestamps: 50, split: (35, 5, 10) },
    Preset { name: "reality", embed_dim: 64, d_model: 256, lr: 1e-4, timestamps: 90, split: (63, 9, 18) },
    Preset { name: "uci", embed_dim: 256, d_model: 512, lr: 1e-6, timestamps: 88, split: (62, 9, 17) },
    Preset { name: "slashdot", embed_dim: 64, d_model: 256, lr: 1e-6, timestamps: 12, split: (8, 2, 2) },
    Preset { name: "bitcoin", embed_dim: 256, d_model: 512, lr: 1e-6, timestamps: 137, split: (95, 14, 28) },
    Preset { name: "as", embed_dim: 64, d_model: 256, lr: 1e-4, timestamps: 100, split: (70, 10, 20) },
];

pub fn preset(name: &str) -> Result<&'static Preset, Error> {
    PRESETS.iter().find(|p| p.name == name).ok_or_else(|| {
        let known: Vec<&str> = PRESETS.iter().map(|p| p.name).collect();
        Error::Config(format!("unknown preset {name:?}; known: {}", known.join(", ")))
    })
}

impl Preset {
    pub fn layer(&self) -> Layer {
        let (a, b, c) = self.split;
        [
            ("embed_dim", self.embed_dim.to_string()),
            ("d_model", self.d_model.to_string()),
            ("lr", self.lr.to_string()),
            ("bins", self.timestamps.to_string()),
            ("split", format!("{a}/{b}/{c}")),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect()
    }
}

/// Parses `key = value` lines; `#` starts a comment.
pub fn parse_config(text: &str) -> Result<Layer, Error> {
    let mut layer = Layer::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(Error::Parse { line: i + 1, msg: format!("expected key = value, got {raw:?}") });
        };
        let key = k.trim().replace('-', "_");
        if !KEYS.contains(&key.as_str()) {
            return Err(Error::Parse { line: i + 1, msg: format!("unknown key {key:?}") });
        }
        layer.insert(key, v.trim().to_string());
    }
    Ok(layer)
}

pub fn load_config(path: &Path) -> anyhow::Result<Layer> {
    let text = fs::read_to_string(path).map_err(|e| crate::io_error(path, e))?;
    parse_config(&text).map_err(|e| anyhow::Error::new(e).context(format!("in config {}", path.display())))
}

/// Fully resolved settings for one run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Settings {
    pub model: String,
    pub train: TrainConfig,
    /// Explicit split; `None` uses the 70/10/20 rule.
    pub split: Option<(usize, usize, usize)>,
    pub bins: Option<usize>,
    pub directed: Option<bool>,
    pub classifier: ClassifierSettings,
    pub neg_factor: usize,
    pub exhaustive_limit: usize,
    pub window: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassifierSettings {
    pub lr: f64,
    pub epochs: usize,
    pub positives: usize,
    pub negatives: usize,
    pub batch: usize,
}

impl Default for Settings {
    fn default() -> Self {
        let c = ClassifierConfig::default();
        let e = EvalOptions::default();
        Self {
            model: "transformer".into(),
            train: TrainConfig::default(),
            split: None,
            bins: None,
            directed: None,
            classifier: ClassifierSettings {
                lr: c.lr,
                epochs: c.epochs,
                positives: c.positives_per_timestamp,
                negatives: c.negatives_per_positive,
                batch: c.batch_size,
            },
            neg_factor: e.neg_factor,
            exhaustive_limit: e.exhaustive_limit,
            window: 10,
        }
    }
}

fn parse<T: std::str::FromStr>(key: &str, v: &str) -> Result<T, Error> {
    v.parse().map_err(|_| Error::Config(format!("{key}: cannot parse {v:?}")))
}

fn parse_bool(key: &str, v: &str) -> Result<bool, Error> {
    match v.to_ascii_lowercase().as_str() {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(Error::Config(format!("{key}: expected a boolean, got {v:?}"))),
    }
}

pub fn parse_split(v: &str) -> Result<(usize, usize, usize), Error> {
    let parts: Vec<&str> = v.split('/').collect();
    if parts.len() != 3 {
        return Err(Error::Config(format!("split must look like 35/5/10, got {v:?}")));
    }
    Ok((parse("split", parts[0])?, parse("split", parts[1])?, parse("split", parts[2])?))
}

impl Settings {
    /// Merges layers in order (later wins) over the defaults.
    pub fn resolve(layers: &[&Layer]) -> Result<Self, Error> {
        let mut merged = Layer::new();
        for layer in layers {
            for (k, v) in layer.iter() {
                merged.insert(k.clone(), v.clone());
            }
        }
        let mut s = Settings::default();
        for (k, v) in &merged {
            let v = v.as_str();
            match k.as_str() {
                "model" => s.model = v.to_string(),
                "lookback" => s.train.lookback = parse(k, v)?,
                "d_model" => s.train.d_model = parse(k, v)?,
                "d_ff" => s.train.d_ff = parse(k, v)?,
                "hidden" => s.train.hidden = parse(k, v)?,
                "embed_dim" => s.train.embed_dim = parse(k, v)?,
                "lr" => s.train.lr = parse(k, v)?,
                "epochs" => s.train.epochs = parse(k, v)?,
                "seed" => s.train.seed = parse(k, v)?,
                "thetas" => {
                    s.train.thetas = v.split(',').map(|x| parse(k, x.trim())).collect::<Result<_, _>>()?
                }
                "k_per_anchor" => s.train.k_per_anchor = parse(k, v)?,
                "batch_triples" => s.train.batch_triples = parse(k, v)?,
                "binarize" => s.train.binarize = parse_bool(k, v)?,
                "split" => s.split = Some(parse_split(v)?),
                "bins" => s.bins = Some(parse(k, v)?),
                "directed" => s.directed = Some(parse_bool(k, v)?),
                "clf_lr" => s.classifier.lr = parse(k, v)?,
                "clf_epochs" => s.classifier.epochs = parse(k, v)?,
                "clf_positives" => s.classifier.positives = parse(k, v)?,
                "clf_negatives" => s.classifier.negatives = parse(k, v)?,
                "clf_batch" => s.classifier.batch = parse(k, v)?,
                "neg_factor" => s.neg_factor = parse(k, v)?,
                "exhaustive_limit" => s.exhaustive_limit = parse(k, v)?,
                "window" => s.window = parse(k, v)?,
                other => return Err(Error::Config(format!("unknown setting {other:?}"))),
            }
        }
        Ok(s)
    }

    pub fn load_options(&self) -> LoadOptions {
        LoadOptions {
            directed: self.directed,
            binning: match self.bins {
                Some(bins) => Binning::Uniform { bins },
                None => Binning::Exact,
            },
        }
    }

    pub fn split_for(&self, timestamps: usize) -> Result<Split, Error> {
        let spec = match self.split {
            Some((a, b, c)) => SplitSpec::new(a, b, c),
            None => SplitSpec::default_for(timestamps),
        };
        Split::new(timestamps, spec)
    }

    pub fn classifier_config(&self, seed: u64) -> ClassifierConfig {
        ClassifierConfig {
            lr: self.classifier.lr,
            epochs: self.classifier.epochs,
            positives_per_timestamp: self.classifier.positives,
            negatives_per_positive: self.classifier.negatives,
            batch_size: self.classifier.batch,
            seed,
        }
    }

    pub fn eval_options(&self, seed: u64) -> EvalOptions {
        EvalOptions {
            neg_factor: self.neg_factor,
            exhaustive_limit: self.exhaustive_limit,
            seed,
        }
    }
}

/// Warm-start coefficients from the two command-line spellings: a single
/// two-step `theta` (giving `[theta, 1 - theta]`) or explicit per-step values.
pub fn thetas_from_flags(theta: Option<f64>, steps: [Option<f64>; 3]) -> Result<Option<Vec<f64>>, Error> {
    let explicit: Vec<f64> = steps.iter().map_while(|x| *x).collect();
    if steps.iter().skip(explicit.len()).any(Option::is_some) {
        return Err(Error::Config("--theta2/--theta3 need the earlier steps set".into()));
    }
    match (theta, explicit.is_empty()) {
        (Some(_), false) => Err(Error::Config("use either --theta or --theta1/2/3, not both".into())),
        (Some(t), true) => Ok(Some(vec![t, 1.0 - t])),
        (None, false) => Ok(Some(explicit)),
        (None, true) => Ok(None),
    }
}

/// A single lookback (`3`) or an inclusive sweep (`1..5`).
pub fn parse_lookbacks(v: &str) -> Result<Vec<usize>, Error> {
    match v.split_once("..") {
        Some((a, b)) => {
            let (a, b): (usize, usize) = (parse("lookback", a)?, parse("lookback", b.trim_start_matches('='))?);
            if a > b {
                return Err(Error::Config(format!("empty lookback range {v:?}")));
            }
            Ok((a..=b).collect())
        }
        None => Ok(vec![parse("lookback", v)?]),
    }
}
