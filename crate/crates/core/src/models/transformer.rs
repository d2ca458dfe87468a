//! Single-layer, single-head transformer encoder over a node's adjacency
//! history, followed by Gaussian projection heads.
//!
//! For a node `i` at timestamp `t` the input is the sequence of padded
//! adjacency rows at `t - l, ..., t` (oldest first, zero rows before the
//! first snapshot). Rows are projected to `d_model`, summed with a
//! sinusoidal positional encoding and passed through a post-norm encoder
//! layer (attention, add & norm, ReLU feed-forward, add & norm). The `l + 1`
//! outputs are concatenated, mapped through `tanh` to the hidden width, and
//! fed to the mean and variance heads.

use gembed_tensor::{CsrMatrix, Tape, Tensor, Var};
use rand::Rng;

use super::layers::{GaussianHeads, Linear};
use super::train::{emit, fit_shared, Encoded, Encoder, TrainLog};
use super::{EmbeddingTable, GaussianEmbedding, TrainConfig};
use crate::error::{Error, Result};
use crate::graph::{DynamicGraph, Split};
use crate::rng::{stream, tag};

/// Sinusoidal table of shape `[len, d]`, row-major:
/// `PE(p, 2i) = sin(p / 10000^(2i/d))`, `PE(p, 2i+1) = cos(p / 10000^(2i/d))`.
pub fn positional_encoding(len: usize, d: usize) -> Result<Vec<f64>> {
    if d == 0 || d % 2 != 0 {
        return Err(Error::Config(format!("positional encoding needs an even width, got {d}")));
    }
    let mut table = vec![0.0; len * d];
    for pos in 0..len {
        for i in 0..d / 2 {
            let angle = pos as f64 / 10000f64.powf(2.0 * i as f64 / d as f64);
            table[pos * d + 2 * i] = angle.sin();
            table[pos * d + 2 * i + 1] = angle.cos();
        }
    }
    Ok(table)
}

/// Scaled dot-product attention applied independently to consecutive blocks
/// of `seq_len` rows: `softmax(Q K^T / sqrt(d)) V`. Returns the output and
/// the `[blocks * seq_len, seq_len]` attention weights. No masking.
pub fn attention(tape: &mut Tape, q: Var, k: Var, v: Var, seq_len: usize) -> Result<(Var, Var)> {
    let d = tape.dims2(q).1;
    let scores = tape.block_matmul_nt(q, k, seq_len)?;
    let scaled = tape.scale(scores, 1.0 / (d as f64).sqrt())?;
    let weights = tape.softmax_rows(scaled)?;
    let out = tape.block_matmul(weights, v, seq_len)?;
    Ok((out, weights))
}

/// Stacks node histories into a `[nodes * (lookback + 1), n_global]` matrix.
pub fn history_matrix(
    g: &DynamicGraph,
    t: usize,
    nodes: &[usize],
    lookback: usize,
    binarize: bool,
) -> Result<CsrMatrix> {
    g.snapshot(t)?;
    let mut m = CsrMatrix::new(g.n_global());
    for &i in nodes {
        if i >= g.n_global() {
            return Err(Error::OutOfRange(format!("node {i} of {}", g.n_global())));
        }
        for back in (0..=lookback).rev() {
            match t.checked_sub(back) {
                Some(tau) => {
                    let row = g.snapshot(tau)?.row(i);
                    m.push_row(row.iter().map(|&(c, w)| (c, if binarize { 1.0 } else { w })))?;
                }
                None => m.push_row(std::iter::empty())?,
            }
        }
    }
    Ok(m)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerNormAffine {
    pub gain: Tensor,
    pub bias: Tensor,
}

impl LayerNormAffine {
    fn new(d: usize) -> Self {
        Self {
            gain: Tensor::vector(vec![1.0; d]).trainable(),
            bias: Tensor::zeros(&[d]).trainable(),
        }
    }

    fn apply(&self, tape: &mut Tape, x: Var, vars: &mut Vec<Var>) -> Result<Var> {
        let gain = tape.param(&self.gain)?;
        let bias = tape.param(&self.bias)?;
        vars.extend([gain, bias]);
        let n = tape.layer_norm_rows(x)?;
        let n = tape.mul_row(n, gain)?;
        Ok(tape.add_row(n, bias)?)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransformerG2g {
    lookback: usize,
    d_model: usize,
    positional: Vec<f64>,
    pub input: Linear,
    pub query: Linear,
    pub key: Linear,
    pub value: Linear,
    pub output: Linear,
    pub norm1: LayerNormAffine,
    pub ffn_in: Linear,
    pub ffn_out: Linear,
    pub norm2: LayerNormAffine,
    pub project: Linear,
    pub heads: GaussianHeads,
}

/// Result of a forward pass for a batch of nodes.
pub struct TransformerOutput {
    pub encoded: Encoded,
    pub seq_len: usize,
}

impl TransformerG2g {
    pub fn new<R: Rng>(rng: &mut R, n_global: usize, cfg: &TrainConfig) -> Result<Self> {
        let d = cfg.d_model;
        let s = cfg.lookback + 1;
        Ok(Self {
            lookback: cfg.lookback,
            d_model: d,
            positional: positional_encoding(s, d)?,
            input: Linear::new(rng, n_global, d),
            query: Linear::new(rng, d, d),
            key: Linear::new(rng, d, d),
            value: Linear::new(rng, d, d),
            output: Linear::new(rng, d, d),
            norm1: LayerNormAffine::new(d),
            ffn_in: Linear::new(rng, d, cfg.d_ff),
            ffn_out: Linear::new(rng, cfg.d_ff, d),
            norm2: LayerNormAffine::new(d),
            project: Linear::new(rng, s * d, cfg.hidden),
            heads: GaussianHeads::new(rng, cfg.hidden, cfg.embed_dim),
        })
    }

    pub fn lookback(&self) -> usize {
        self.lookback
    }

    pub fn seq_len(&self) -> usize {
        self.lookback + 1
    }

    pub fn d_model(&self) -> usize {
        self.d_model
    }

    pub fn n_global(&self) -> usize {
        self.input.in_dim()
    }

    pub fn embed_dim(&self) -> usize {
        self.heads.mu.out_dim()
    }

    pub fn param_names() -> Vec<&'static str> {
        vec![
            "input.w", "input.b", "query.w", "query.b", "key.w", "key.b", "value.w", "value.b",
            "output.w", "output.b", "norm1.gain", "norm1.bias", "ffn_in.w", "ffn_in.b",
            "ffn_out.w", "ffn_out.b", "norm2.gain", "norm2.bias", "project.w", "project.b",
            "mu.w", "mu.b", "sigma.w", "sigma.b",
        ]
    }

    pub fn params(&self) -> Vec<&Tensor> {
        let mut v: Vec<&Tensor> = Vec::new();
        for l in [&self.input, &self.query, &self.key, &self.value, &self.output] {
            v.extend(l.params());
        }
        v.extend([&self.norm1.gain, &self.norm1.bias]);
        v.extend(self.ffn_in.params());
        v.extend(self.ffn_out.params());
        v.extend([&self.norm2.gain, &self.norm2.bias]);
        v.extend(self.project.params());
        v.extend(self.heads.params());
        v
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor> {
        let mut v: Vec<&mut Tensor> = Vec::new();
        for l in [&mut self.input, &mut self.query, &mut self.key, &mut self.value, &mut self.output] {
            v.extend(l.params_mut());
        }
        v.extend([&mut self.norm1.gain, &mut self.norm1.bias]);
        v.extend(self.ffn_in.params_mut());
        v.extend(self.ffn_out.params_mut());
        v.extend([&mut self.norm2.gain, &mut self.norm2.bias]);
        v.extend(self.project.params_mut());
        v.extend(self.heads.params_mut());
        v
    }

    /// Rebuilds a model from tensors in [`Self::params`] order.
    pub fn from_params(lookback: usize, params: Vec<Tensor>) -> Result<Self> {
        if params.len() != 24 {
            return Err(Error::Checkpoint(format!(
                "transformer needs 24 tensors, got {}",
                params.len()
            )));
        }
        let mut it = params.into_iter().map(|mut t| {
            t.set_requires_grad(true);
            t
        });
        let mut lin = || Linear {
            weight: it.next().expect("counted"),
            bias: it.next().expect("counted"),
        };
        let input = lin();
        let query = lin();
        let key = lin();
        let value = lin();
        let output = lin();
        let n1 = lin();
        let ffn_in = lin();
        let ffn_out = lin();
        let n2 = lin();
        let project = lin();
        let mu = lin();
        let sigma = lin();
        let d = input.out_dim();
        let s = lookback + 1;
        if project.in_dim() != s * d || query.in_dim() != d || ffn_out.out_dim() != d {
            return Err(Error::Checkpoint("inconsistent transformer shapes".into()));
        }
        Ok(Self {
            lookback,
            d_model: d,
            positional: positional_encoding(s, d)?,
            input,
            query,
            key,
            value,
            output,
            norm1: LayerNormAffine { gain: n1.weight, bias: n1.bias },
            ffn_in,
            ffn_out,
            norm2: LayerNormAffine { gain: n2.weight, bias: n2.bias },
            project,
            heads: GaussianHeads { mu, sigma },
        })
    }

    /// Records the model on `tape` for `[nodes * (lookback + 1), n_global]`
    /// stacked histories.
    pub fn forward(&self, tape: &mut Tape, histories: CsrMatrix) -> Result<TransformerOutput> {
        let s = self.seq_len();
        let d = self.d_model;
        if histories.cols() != self.n_global() {
            return Err(Error::Dimension(format!(
                "history rows of width {} for a model over {} nodes",
                histories.cols(),
                self.n_global()
            )));
        }
        if histories.rows() == 0 || histories.rows() % s != 0 {
            return Err(Error::Dimension(format!(
                "{} history rows is not a multiple of sequence length {s}",
                histories.rows()
            )));
        }
        let batch = histories.rows() / s;
        let mut params: Vec<Var> = Vec::new();

        let input = self.input.bind(tape, &mut params)?;
        let h0 = input.apply_sparse(tape, histories)?;
        let pe: Vec<f64> = self.positional.iter().copied().cycle().take(batch * s * d).collect();
        let pe = tape.leaf(pe, vec![batch * s, d], false)?;
        let h0 = tape.add(h0, pe)?;

        let q = self.query.bind(tape, &mut params)?.apply(tape, h0)?;
        let k = self.key.bind(tape, &mut params)?.apply(tape, h0)?;
        let v = self.value.bind(tape, &mut params)?.apply(tape, h0)?;
        let (ctx, weights) = attention(tape, q, k, v, s)?;
        let attn = self.output.bind(tape, &mut params)?.apply(tape, ctx)?;
        let r1 = tape.add(h0, attn)?;
        let h1 = self.norm1.apply(tape, r1, &mut params)?;

        let f = self.ffn_in.bind(tape, &mut params)?.apply(tape, h1)?;
        let f = tape.relu(f)?;
        let f = self.ffn_out.bind(tape, &mut params)?.apply(tape, f)?;
        let r2 = tape.add(h1, f)?;
        let h2 = self.norm2.apply(tape, r2, &mut params)?;

        let flat = tape.reshape(h2, &[batch, s * d])?;
        let p = self.project.bind(tape, &mut params)?.apply(tape, flat)?;
        let p = tape.tanh(p)?;
        let (mu, var) = self.heads.apply(tape, p, &mut params)?;
        Ok(TransformerOutput {
            encoded: Encoded {
                params,
                mu,
                var,
                attention: Some(weights),
            },
            seq_len: s,
        })
    }

    /// Embeds one node from its dense history (`lookback + 1` rows, oldest
    /// first) and returns the `(l+1) x (l+1)` attention matrix.
    pub fn forward_history(&self, history: &[Vec<f64>]) -> Result<(GaussianEmbedding, Vec<f64>)> {
        if history.len() != self.seq_len() {
            return Err(Error::Dimension(format!(
                "history of length {} for lookback {}",
                history.len(),
                self.lookback
            )));
        }
        let mut m = CsrMatrix::new(self.n_global());
        for row in history {
            if row.len() != self.n_global() {
                return Err(Error::Dimension(format!(
                    "history row of width {} for {} nodes",
                    row.len(),
                    self.n_global()
                )));
            }
            m.push_row(row.iter().copied().enumerate())?;
        }
        let mut tape = Tape::new();
        let out = self.forward(&mut tape, m)?;
        let e = GaussianEmbedding::new(
            tape.value(out.encoded.mu).to_vec(),
            tape.value(out.encoded.var).to_vec(),
        )?;
        let a = tape.value(out.encoded.attention.expect("transformer records attention")).to_vec();
        Ok((e, a))
    }

    /// Embeddings of every node at every timestamp of `g`.
    pub fn embed(&self, g: &DynamicGraph, binarize: bool) -> Result<EmbeddingTable> {
        if g.n_global() != self.n_global() {
            return Err(Error::Dimension(format!(
                "model over {} nodes applied to a graph of {}",
                self.n_global(),
                g.n_global()
            )));
        }
        let mut table = EmbeddingTable::new(g.num_timestamps(), g.n_global(), self.embed_dim());
        emit(self, g, 0..g.num_timestamps(), binarize, &mut table)?;
        Ok(table)
    }
}

/// Trains one transformer over all training timestamps.
pub fn train_transformer(g: &DynamicGraph, split: &Split, cfg: &TrainConfig) -> Result<(TransformerG2g, TrainLog)> {
    cfg.validate()?;
    let mut rng = stream(cfg.seed, &[tag::INIT]);
    let mut model = TransformerG2g::new(&mut rng, g.n_global(), cfg)?;
    let log = fit_shared(&mut model, g, split, cfg)?;
    Ok((model, log))
}

impl Encoder for TransformerG2g {
    fn encode(&self, tape: &mut Tape, g: &DynamicGraph, t: usize, nodes: &[usize], binarize: bool) -> Result<Encoded> {
        let x = history_matrix(g, t, nodes, self.lookback, binarize)?;
        Ok(self.forward(tape, x)?.encoded)
    }

    fn params_mut(&mut self) -> Vec<&mut Tensor> {
        TransformerG2g::params_mut(self)
    }
}
