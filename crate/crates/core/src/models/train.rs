//! Training and emission loops shared by the encoders.

use std::ops::Range;

use gembed_tensor::{Adam, Tape, Tensor, TensorError, Var};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{triplet_loss, EmbeddingTable, TrainConfig};
use crate::error::{Error, Result};
use crate::graph::{DynamicGraph, Split};
use crate::rng::{stream, tag};
use crate::sampling::{sample_triplets_in, TripletBatch};

/// Nodes encoded per tape during embedding emission.
pub const EMIT_CHUNK: usize = 256;

/// Tape handles produced by one encoder forward pass.
pub struct Encoded {
    /// Parameter leaves in the same order as [`Encoder::params_mut`].
    pub params: Vec<Var>,
    pub mu: Var,
    pub var: Var,
    /// `[nodes * seq_len, seq_len]` attention weights, when the encoder has any.
    pub attention: Option<Var>,
}

/// A differentiable map from the graph state of nodes at `t` to Gaussian embeddings.
pub trait Encoder: Clone {
    fn encode(&self, tape: &mut Tape, g: &DynamicGraph, t: usize, nodes: &[usize], binarize: bool) -> Result<Encoded>;
    fn params_mut(&mut self) -> Vec<&mut Tensor>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Timestamp for per-timestamp training; `None` for a shared model.
    pub t: Option<usize>,
    /// Mean loss per triple.
    pub train_loss: f64,
    pub val_loss: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainLog {
    pub records: Vec<EpochRecord>,
    /// Training timestamps without a usable triplet.
    pub skipped: Vec<usize>,
    /// Epoch whose parameters were kept, for shared models with validation.
    pub best_epoch: Option<usize>,
}

/// Reports non-finite values as divergence rather than a generic tensor error.
pub(crate) fn numeric(e: Error, context: &str) -> Error {
    match e {
        Error::Tensor(TensorError::NonFinite { op }) => {
            Error::Diverged(format!("non-finite value in {op} while {context}"))
        }
        other => other,
    }
}

/// Triples for `t`, or `None` when the snapshot is edgeless or has no valid triple.
pub(crate) fn sample_batch(g: &DynamicGraph, t: usize, cfg: &TrainConfig, parts: &[u64]) -> Result<Option<TripletBatch>> {
    let s = g.snapshot(t)?;
    if s.num_edges() == 0 {
        return Ok(None);
    }
    let batch = sample_triplets_in(s, cfg.k_per_anchor, &mut stream(cfg.seed, parts))?;
    Ok((!batch.is_empty()).then_some(batch))
}

fn loss_on<E: Encoder>(enc: &E, tape: &mut Tape, g: &DynamicGraph, batch: &TripletBatch, binarize: bool) -> Result<(Encoded, Var)> {
    let nodes = batch.nodes();
    let out = enc.encode(tape, g, batch.t, &nodes, binarize)?;
    let loss = triplet_loss(tape, out.mu, out.var, batch, |n| nodes.binary_search(&n).ok())?;
    Ok((out, loss))
}

/// Loss of `batch` without touching parameters.
pub fn batch_loss<E: Encoder>(enc: &E, g: &DynamicGraph, batch: &TripletBatch, binarize: bool) -> Result<f64> {
    let mut tape = Tape::new();
    let (_, loss) = loss_on(enc, &mut tape, g, batch, binarize)?;
    Ok(tape.item(loss))
}

/// One Adam update on `batch`; returns the loss before the update.
pub fn optimizer_step<E: Encoder>(enc: &mut E, adam: &mut Adam, g: &DynamicGraph, batch: &TripletBatch, binarize: bool) -> Result<f64> {
    let mut tape = Tape::new();
    let (out, loss) = loss_on(enc, &mut tape, g, batch, binarize)?;
    let value = tape.item(loss);
    tape.backward(loss)?;
    let mut params = enc.params_mut();
    for (p, v) in params.iter_mut().zip(&out.params) {
        tape.accumulate_grad(*v, p)?;
    }
    adam.step(&mut params)?;
    for p in params.iter_mut() {
        p.zero_grad();
    }
    Ok(value)
}

/// Runs the updates for one timestamp of one epoch, splitting the batch
/// into shuffled chunks when `batch_triples` is set. Returns the summed loss.
fn train_on_batch<E: Encoder>(
    enc: &mut E,
    adam: &mut Adam,
    g: &DynamicGraph,
    batch: TripletBatch,
    cfg: &TrainConfig,
    epoch: usize,
) -> Result<f64> {
    if cfg.batch_triples == 0 || batch.len() <= cfg.batch_triples {
        return optimizer_step(enc, adam, g, &batch, cfg.binarize);
    }
    let t = batch.t;
    let mut triples = batch.triples;
    triples.shuffle(&mut stream(cfg.seed, &[tag::SHUFFLE, epoch as u64, t as u64]));
    let mut total = 0.0;
    for chunk in triples.chunks(cfg.batch_triples) {
        let part = TripletBatch { t, triples: chunk.to_vec() };
        total += optimizer_step(enc, adam, g, &part, cfg.binarize)?;
    }
    Ok(total)
}

/// Trains one encoder over every training timestamp, keeping the parameters
/// with the lowest validation loss when validation timestamps exist.
pub fn fit_shared<E: Encoder>(enc: &mut E, g: &DynamicGraph, split: &Split, cfg: &TrainConfig) -> Result<TrainLog> {
    cfg.validate()?;
    let mut log = TrainLog::default();
    let mut val_batches = Vec::new();
    for t in split.val.clone() {
        if let Some(b) = sample_batch(g, t, cfg, &[tag::VALID, t as u64])? {
            val_batches.push(b);
        }
    }
    let mut adam = Adam::new(cfg.lr);
    let mut best: Option<(f64, E)> = None;
    for epoch in 0..cfg.epochs {
        let (mut total, mut count) = (0.0, 0usize);
        for t in split.train.clone() {
            let Some(batch) = sample_batch(g, t, cfg, &[tag::TRAIN, epoch as u64, t as u64])? else {
                if epoch == 0 {
                    log::warn!("timestamp {t} has no valid triplet; skipped");
                    log.skipped.push(t);
                }
                continue;
            };
            count += batch.len();
            total += train_on_batch(enc, &mut adam, g, batch, cfg, epoch)
                .map_err(|e| numeric(e, &format!("training epoch {epoch} at t={t}")))?;
        }
        if count == 0 {
            return Err(Error::Empty("no training timestamp yields a triplet".into()));
        }
        let val_loss = if val_batches.is_empty() {
            None
        } else {
            let (mut v, mut n) = (0.0, 0usize);
            for b in &val_batches {
                v += batch_loss(enc, g, b, cfg.binarize).map_err(|e| numeric(e, "validating"))?;
                n += b.len();
            }
            Some(v / n as f64)
        };
        let train_loss = total / count as f64;
        log::info!("epoch {epoch}: train {train_loss:.6} val {val_loss:?}");
        log.records.push(EpochRecord { epoch, t: None, train_loss, val_loss });
        if let Some(v) = val_loss {
            if best.as_ref().is_none_or(|(b, _)| v < *b) {
                best = Some((v, enc.clone()));
                log.best_epoch = Some(epoch);
            }
        }
    }
    if let Some((_, e)) = best {
        *enc = e;
    }
    Ok(log)
}

/// Trains `enc` on timestamp `t` alone with a fresh optimizer. Returns `None`
/// when `t` has no valid triplet.
pub fn fit_timestamp<E: Encoder>(enc: &mut E, g: &DynamicGraph, t: usize, cfg: &TrainConfig) -> Result<Option<Vec<EpochRecord>>> {
    cfg.validate()?;
    let mut adam = Adam::new(cfg.lr);
    let mut records = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        let Some(batch) = sample_batch(g, t, cfg, &[tag::TRAIN, epoch as u64, t as u64])? else {
            return Ok(None);
        };
        let n = batch.len();
        let total = train_on_batch(enc, &mut adam, g, batch, cfg, epoch)
            .map_err(|e| numeric(e, &format!("training epoch {epoch} at t={t}")))?;
        records.push(EpochRecord {
            epoch,
            t: Some(t),
            train_loss: total / n as f64,
            val_loss: None,
        });
    }
    Ok(Some(records))
}

/// Writes embeddings of every node at each timestamp in `ts` into `table`.
pub fn emit<E: Encoder>(enc: &E, g: &DynamicGraph, ts: Range<usize>, binarize: bool, table: &mut EmbeddingTable) -> Result<()> {
    let all: Vec<usize> = (0..g.n_global()).collect();
    let dim = table.dim();
    for t in ts {
        for chunk in all.chunks(EMIT_CHUNK) {
            let mut tape = Tape::new();
            let out = enc.encode(&mut tape, g, t, chunk, binarize).map_err(|e| numeric(e, "embedding"))?;
            let (mu, var) = (tape.value(out.mu), tape.value(out.var));
            if tape.dims2(out.mu).1 != dim {
                return Err(Error::Dimension(format!(
                    "encoder emits dim {} into a table of dim {dim}",
                    tape.dims2(out.mu).1
                )));
            }
            for (k, &node) in chunk.iter().enumerate() {
                table.set(t, node, &mu[k * dim..(k + 1) * dim], &var[k * dim..(k + 1) * dim])?;
            }
        }
    }
    Ok(())
}
