//! Named embedding models selected at runtime.

use std::fmt;

use gembed_tensor::Tensor;

use super::checkpoint::Checkpoint;
use super::dyng2g::{train_dyng2g, train_g2g, DynG2g};
use super::g2g::G2gEncoder;
use super::train::{emit, TrainLog};
use super::transformer::{train_transformer, TransformerG2g};
use super::{EmbeddingTable, TrainConfig};
use crate::error::{Error, Result};
use crate::graph::{DynamicGraph, Split};

/// Common surface of every embedding model.
pub trait EmbeddingModel {
    fn name(&self) -> &'static str;
    fn config(&self) -> &TrainConfig;
    fn fit(&mut self, g: &DynamicGraph, split: &Split) -> Result<TrainLog>;
    /// Embeddings of every node at every timestamp of `g`.
    fn embed(&self, g: &DynamicGraph) -> Result<EmbeddingTable>;
    fn checkpoint(&self) -> Result<Checkpoint>;
    fn as_transformer(&self) -> Option<&TransformerG2g> {
        None
    }
}

fn untrained(name: &str) -> Error {
    Error::Config(format!("{name} model is untrained"))
}

fn named(prefix: &str, names: &[&str], params: Vec<&Tensor>) -> Vec<(String, Tensor)> {
    names.iter().zip(params).map(|(n, t)| (format!("{prefix}{n}"), t.clone())).collect()
}

struct G2gModel {
    cfg: TrainConfig,
    enc: Option<G2gEncoder>,
}

impl EmbeddingModel for G2gModel {
    fn name(&self) -> &'static str {
        "g2g"
    }

    fn config(&self) -> &TrainConfig {
        &self.cfg
    }

    fn fit(&mut self, g: &DynamicGraph, split: &Split) -> Result<TrainLog> {
        let (enc, log) = train_g2g(g, split, &self.cfg)?;
        self.enc = Some(enc);
        Ok(log)
    }

    fn embed(&self, g: &DynamicGraph) -> Result<EmbeddingTable> {
        let enc = self.enc.as_ref().ok_or_else(|| untrained("g2g"))?;
        if enc.n_in() != g.n_global() {
            return Err(Error::Dimension(format!("encoder over {} nodes, graph has {}", enc.n_in(), g.n_global())));
        }
        let mut table = EmbeddingTable::new(g.num_timestamps(), g.n_global(), enc.embed_dim());
        emit(enc, g, 0..g.num_timestamps(), self.cfg.binarize, &mut table)?;
        Ok(table)
    }

    fn checkpoint(&self) -> Result<Checkpoint> {
        let enc = self.enc.as_ref().ok_or_else(|| untrained("g2g"))?;
        Ok(Checkpoint {
            model: "g2g".into(),
            config: self.cfg.clone(),
            meta: serde_json::Value::Null,
            tensors: named("", &G2gEncoder::param_names(), enc.params()),
        })
    }
}

struct DynG2gModel {
    cfg: TrainConfig,
    model: Option<DynG2g>,
}

impl EmbeddingModel for DynG2gModel {
    fn name(&self) -> &'static str {
        "dyng2g"
    }

    fn config(&self) -> &TrainConfig {
        &self.cfg
    }

    fn fit(&mut self, g: &DynamicGraph, split: &Split) -> Result<TrainLog> {
        let (model, log) = train_dyng2g(g, split, &self.cfg)?;
        self.model = Some(model);
        Ok(log)
    }

    fn embed(&self, g: &DynamicGraph) -> Result<EmbeddingTable> {
        self.model.as_ref().ok_or_else(|| untrained("dyng2g"))?.embed(g, self.cfg.binarize)
    }

    fn checkpoint(&self) -> Result<Checkpoint> {
        let m = self.model.as_ref().ok_or_else(|| untrained("dyng2g"))?;
        let tensors = m
            .encoders
            .iter()
            .enumerate()
            .flat_map(|(k, e)| named(&format!("enc{k}."), &G2gEncoder::param_names(), e.params()))
            .collect();
        Ok(Checkpoint {
            model: "dyng2g".into(),
            config: self.cfg.clone(),
            meta: serde_json::json!({ "trained_at": m.trained_at }),
            tensors,
        })
    }
}

struct TransformerModel {
    cfg: TrainConfig,
    model: Option<TransformerG2g>,
}

impl EmbeddingModel for TransformerModel {
    fn name(&self) -> &'static str {
        "transformer"
    }

    fn config(&self) -> &TrainConfig {
        &self.cfg
    }

    fn fit(&mut self, g: &DynamicGraph, split: &Split) -> Result<TrainLog> {
        let (model, log) = train_transformer(g, split, &self.cfg)?;
        self.model = Some(model);
        Ok(log)
    }

    fn embed(&self, g: &DynamicGraph) -> Result<EmbeddingTable> {
        self.model.as_ref().ok_or_else(|| untrained("transformer"))?.embed(g, self.cfg.binarize)
    }

    fn checkpoint(&self) -> Result<Checkpoint> {
        let m = self.model.as_ref().ok_or_else(|| untrained("transformer"))?;
        Ok(Checkpoint {
            model: "transformer".into(),
            config: self.cfg.clone(),
            meta: serde_json::Value::Null,
            tensors: named("", &TransformerG2g::param_names(), m.params()),
        })
    }

    fn as_transformer(&self) -> Option<&TransformerG2g> {
        self.model.as_ref()
    }
}

fn build_g2g(cfg: TrainConfig) -> Box<dyn EmbeddingModel> {
    Box::new(G2gModel { cfg, enc: None })
}

fn build_dyng2g(cfg: TrainConfig) -> Box<dyn EmbeddingModel> {
    Box::new(DynG2gModel { cfg, model: None })
}

fn build_transformer(cfg: TrainConfig) -> Box<dyn EmbeddingModel> {
    Box::new(TransformerModel { cfg, model: None })
}

fn restore_g2g(ck: &Checkpoint) -> Result<Box<dyn EmbeddingModel>> {
    let enc = G2gEncoder::from_params(ck.take_tensors("", &G2gEncoder::param_names())?)?;
    Ok(Box::new(G2gModel { cfg: ck.config.clone(), enc: Some(enc) }))
}

fn restore_dyng2g(ck: &Checkpoint) -> Result<Box<dyn EmbeddingModel>> {
    let trained_at: Vec<usize> = serde_json::from_value(ck.meta["trained_at"].clone())
        .map_err(|e| Error::Checkpoint(format!("dyng2g timestamps: {e}")))?;
    if trained_at.is_empty() {
        return Err(Error::Checkpoint("dyng2g checkpoint without encoders".into()));
    }
    let encoders = (0..trained_at.len())
        .map(|k| G2gEncoder::from_params(ck.take_tensors(&format!("enc{k}."), &G2gEncoder::param_names())?))
        .collect::<Result<Vec<_>>>()?;
    Ok(Box::new(DynG2gModel {
        cfg: ck.config.clone(),
        model: Some(DynG2g { encoders, trained_at }),
    }))
}

fn restore_transformer(ck: &Checkpoint) -> Result<Box<dyn EmbeddingModel>> {
    let names = TransformerG2g::param_names();
    let model = TransformerG2g::from_params(ck.config.lookback, ck.take_tensors("", &names)?)?;
    Ok(Box::new(TransformerModel { cfg: ck.config.clone(), model: Some(model) }))
}

/// Constructor pair for one model kind.
#[derive(Clone, Copy)]
pub struct ModelEntry {
    pub name: &'static str,
    pub summary: &'static str,
    pub build: fn(TrainConfig) -> Box<dyn EmbeddingModel>,
    pub restore: fn(&Checkpoint) -> Result<Box<dyn EmbeddingModel>>,
}

impl fmt::Debug for ModelEntry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ModelEntry").field("name", &self.name).finish()
    }
}

#[derive(Debug, Clone, Default)]
pub struct Registry {
    entries: Vec<ModelEntry>,
}

impl Registry {
    pub fn builtin() -> Self {
        let mut r = Self::default();
        for entry in [
            ModelEntry {
                name: "g2g",
                summary: "one feed-forward Gaussian encoder shared by all timestamps",
                build: build_g2g,
                restore: restore_g2g,
            },
            ModelEntry {
                name: "dyng2g",
                summary: "per-timestamp encoders with multi-step warm starts",
                build: build_dyng2g,
                restore: restore_dyng2g,
            },
            ModelEntry {
                name: "transformer",
                summary: "self-attention over each node's adjacency history",
                build: build_transformer,
                restore: restore_transformer,
            },
        ] {
            r.register(entry).expect("builtin names are distinct");
        }
        r
    }

    pub fn register(&mut self, entry: ModelEntry) -> Result<()> {
        if self.get(entry.name).is_some() {
            return Err(Error::Config(format!("model '{}' already registered", entry.name)));
        }
        self.entries.push(entry);
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<&ModelEntry> {
        self.entries.iter().find(|e| e.name == name)
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.entries.iter().map(|e| e.name).collect()
    }

    fn entry(&self, name: &str) -> Result<&ModelEntry> {
        self.get(name).ok_or_else(|| {
            Error::Config(format!("unknown model '{name}'; available: {}", self.names().join(", ")))
        })
    }

    /// Validates `cfg` and returns an untrained model.
    pub fn build(&self, name: &str, cfg: TrainConfig) -> Result<Box<dyn EmbeddingModel>> {
        let entry = self.entry(name)?;
        cfg.validate()?;
        Ok((entry.build)(cfg))
    }

    pub fn restore(&self, ck: &Checkpoint) -> Result<Box<dyn EmbeddingModel>> {
        (self.entry(&ck.model)?.restore)(ck)
    }
}
