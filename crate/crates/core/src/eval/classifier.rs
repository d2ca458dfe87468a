//! Two-layer link classifier over concatenated node means.

use std::ops::Range;

use gembed_tensor::{Adam, Tape, Tensor};
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::ranking::PairScorer;
use crate::error::{Error, Result};
use crate::graph::DynamicGraph;
use crate::models::layers::Linear;
use crate::models::EmbeddingTable;
use crate::rng::{stream, tag};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierConfig {
    pub lr: f64,
    pub epochs: usize,
    /// Positive pairs drawn per training timestamp and epoch; 0 keeps all.
    pub positives_per_timestamp: usize,
    /// Non-partner pairs sampled per positive, sharing its source node.
    pub negatives_per_positive: usize,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        Self {
            lr: 1e-4,
            epochs: 10,
            positives_per_timestamp: 2000,
            negatives_per_positive: 5,
            batch_size: 256,
            seed: 0,
        }
    }
}

/// Labelled `(t, src, dst)` pairs.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PairPool {
    pub pairs: Vec<(usize, usize, usize)>,
    pub labels: Vec<bool>,
}

impl PairPool {
    pub fn positives(&self) -> usize {
        self.labels.iter().filter(|l| **l).count()
    }

    pub fn negatives(&self) -> usize {
        self.labels.len() - self.positives()
    }

    /// `#negatives / #positives`.
    pub fn positive_weight(&self) -> Result<f64> {
        match self.positives() {
            0 => Err(Error::Empty("no positive pairs".into())),
            p => Ok(self.negatives() as f64 / p as f64),
        }
    }
}

/// Positives are edges at `t` in both orientations on undirected graphs;
/// each is matched with sampled non-partners of the same source.
pub fn sample_pairs<R: Rng>(g: &DynamicGraph, t: usize, cfg: &ClassifierConfig, rng: &mut R) -> Result<PairPool> {
    let s = g.snapshot(t)?;
    let n = g.n_global();
    let mut positives: Vec<(usize, usize)> = Vec::new();
    for i in 0..n {
        positives.extend(s.partners(i).map(|j| (i, j)));
    }
    if cfg.positives_per_timestamp > 0 && positives.len() > cfg.positives_per_timestamp {
        positives = rand::seq::index::sample(rng, positives.len(), cfg.positives_per_timestamp)
            .into_iter()
            .map(|k| positives[k])
            .collect();
    }
    let mut pool = PairPool::default();
    for (i, j) in positives {
        pool.pairs.push((t, i, j));
        pool.labels.push(true);
        let row = s.row(i);
        if row.len() + 1 >= n {
            continue;
        }
        for _ in 0..cfg.negatives_per_positive {
            let k = loop {
                let c = rng.random_range(0..n);
                if c != i && row.binary_search_by_key(&c, |&(col, _)| col).is_err() {
                    break c;
                }
            };
            pool.pairs.push((t, i, k));
            pool.labels.push(false);
        }
    }
    Ok(pool)
}

/// `[mu_i; mu_j] -> relu(. W1 + b1) -> . w2 + b2`, read through a sigmoid.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkClassifier {
    pub hidden: Linear,
    pub output: Linear,
}

impl LinkClassifier {
    pub fn new<R: Rng>(rng: &mut R, embed_dim: usize) -> Self {
        Self {
            hidden: Linear::new(rng, 2 * embed_dim, embed_dim),
            output: Linear::new(rng, embed_dim, 1),
        }
    }

    pub fn embed_dim(&self) -> usize {
        self.hidden.out_dim()
    }

    fn params_mut(&mut self) -> Vec<&mut Tensor> {
        let mut v: Vec<&mut Tensor> = self.hidden.params_mut().into_iter().collect();
        v.extend(self.output.params_mut());
        v
    }

    fn check(&self, emb: &EmbeddingTable) -> Result<()> {
        if emb.dim() != self.embed_dim() {
            return Err(Error::Dimension(format!(
                "classifier expects dim {} embeddings, got {}",
                self.embed_dim(),
                emb.dim()
            )));
        }
        Ok(())
    }

    /// Logit for one pair.
    pub fn logit(&self, mu_i: &[f64], mu_j: &[f64]) -> f64 {
        let l = self.embed_dim();
        let w1 = self.hidden.weight.data();
        let (w2, b2) = (self.output.weight.data(), self.output.bias.data()[0]);
        let mut z = b2;
        for k in 0..l {
            let mut h = self.hidden.bias.data()[k];
            for (r, x) in mu_i.iter().chain(mu_j).enumerate() {
                h += x * w1[r * l + k];
            }
            z += w2[k] * h.max(0.0);
        }
        z
    }

    /// Probability that `(i, j)` is an edge at `t`.
    pub fn predict(&self, emb: &EmbeddingTable, t: usize, i: usize, j: usize) -> Result<f64> {
        self.check(emb)?;
        let z = self.logit(emb.mu(t, i)?, emb.mu(t, j)?);
        Ok(1.0 / (1.0 + (-z).exp()))
    }

    /// One pass of weighted binary cross-entropy minimisation over `pool`.
    /// Returns the mean loss over minibatches.
    fn train_epoch(&mut self, adam: &mut Adam, emb: &EmbeddingTable, pool: &PairPool, order: &[usize], batch: usize, pos_weight: f64) -> Result<f64> {
        let l = self.embed_dim();
        let mut total = 0.0;
        let mut steps = 0usize;
        for chunk in order.chunks(batch.max(1)) {
            let mut x = Vec::with_capacity(chunk.len() * 2 * l);
            let mut w_pos = Vec::with_capacity(chunk.len());
            let mut w_neg = Vec::with_capacity(chunk.len());
            for &k in chunk {
                let (t, i, j) = pool.pairs[k];
                x.extend_from_slice(emb.mu(t, i)?);
                x.extend_from_slice(emb.mu(t, j)?);
                let y = pool.labels[k];
                w_pos.push(if y { pos_weight } else { 0.0 });
                w_neg.push(if y { 0.0 } else { 1.0 });
            }
            let m = chunk.len();
            let mut tape = Tape::new();
            let xv = tape.leaf(x, vec![m, 2 * l], false)?;
            let params = [
                tape.param(&self.hidden.weight)?,
                tape.param(&self.hidden.bias)?,
                tape.param(&self.output.weight)?,
                tape.param(&self.output.bias)?,
            ];
            let h = tape.matmul(xv, params[0])?;
            let h = tape.add_row(h, params[1])?;
            let h = tape.relu(h)?;
            let z = tape.matmul(h, params[2])?;
            let z = tape.add_row(z, params[3])?;
            let neg_z = tape.scale(z, -1.0)?;
            // -log sigmoid(z) = softplus(-z); -log(1 - sigmoid(z)) = softplus(z)
            let lp = tape.softplus(neg_z)?;
            let ln = tape.softplus(z)?;
            let wp = tape.leaf(w_pos, vec![m, 1], false)?;
            let wn = tape.leaf(w_neg, vec![m, 1], false)?;
            let a = tape.mul(lp, wp)?;
            let b = tape.mul(ln, wn)?;
            let per = tape.add(a, b)?;
            let loss = tape.mean(per)?;
            total += tape.item(loss);
            steps += 1;
            tape.backward(loss)?;
            let mut ps = self.params_mut();
            for (p, v) in ps.iter_mut().zip(params) {
                tape.accumulate_grad(v, p)?;
            }
            adam.step(&mut ps)?;
            ps.iter_mut().for_each(|p| p.zero_grad());
        }
        Ok(total / steps.max(1) as f64)
    }
}

/// Trains a classifier on pairs from the timestamps in `train`, resampling
/// the pool every epoch. Returns the classifier and per-epoch losses.
pub fn train_classifier(emb: &EmbeddingTable, g: &DynamicGraph, train: Range<usize>, cfg: &ClassifierConfig) -> Result<(LinkClassifier, Vec<f64>)> {
    if emb.nodes() != g.n_global() || emb.timestamps() < train.end {
        return Err(Error::Dimension(format!(
            "embeddings cover {} timestamps x {} nodes; graph needs {} x {}",
            emb.timestamps(),
            emb.nodes(),
            train.end,
            g.n_global()
        )));
    }
    if !(cfg.lr > 0.0) || cfg.epochs == 0 {
        return Err(Error::Config("classifier needs a positive learning rate and epochs".into()));
    }
    let mut clf = LinkClassifier::new(&mut stream(cfg.seed, &[tag::CLASSIFIER]), emb.dim());
    let mut adam = Adam::new(cfg.lr);
    let mut losses = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        let mut pool = PairPool::default();
        for t in train.clone() {
            let mut rng = stream(cfg.seed, &[tag::CLASSIFIER, epoch as u64, t as u64]);
            let p = sample_pairs(g, t, cfg, &mut rng)?;
            pool.pairs.extend(p.pairs);
            pool.labels.extend(p.labels);
        }
        let pos_weight = pool.positive_weight()?;
        let mut order: Vec<usize> = (0..pool.labels.len()).collect();
        order.shuffle(&mut stream(cfg.seed, &[tag::SHUFFLE, tag::CLASSIFIER, epoch as u64]));
        let loss = clf.train_epoch(&mut adam, emb, &pool, &order, cfg.batch_size, pos_weight)?;
        log::info!("classifier epoch {epoch}: loss {loss:.6}");
        losses.push(loss);
    }
    Ok((clf, losses))
}

/// Scores pairs with a classifier, caching the per-node halves of the
/// hidden pre-activation so a full row costs `O(n L)`.
pub struct ClassifierScorer<'a> {
    clf: &'a LinkClassifier,
    emb: &'a EmbeddingTable,
}

impl<'a> ClassifierScorer<'a> {
    pub fn new(clf: &'a LinkClassifier, emb: &'a EmbeddingTable) -> Result<Self> {
        clf.check(emb)?;
        Ok(Self { clf, emb })
    }

    /// `mu W1[rows] (+ b1)` for every node at `t`.
    fn half(&self, t: usize, second: bool) -> Result<Vec<f64>> {
        let l = self.clf.embed_dim();
        let n = self.emb.nodes();
        let mu = self.emb.means_at(t)?;
        let w1 = self.clf.hidden.weight.data();
        let off = if second { l * l } else { 0 };
        let mut out = vec![0.0; n * l];
        for node in 0..n {
            let row = &mut out[node * l..(node + 1) * l];
            if second {
                row.copy_from_slice(self.clf.hidden.bias.data());
            }
            for (r, x) in mu[node * l..(node + 1) * l].iter().enumerate() {
                let w = &w1[off + r * l..off + (r + 1) * l];
                row.iter_mut().zip(w).for_each(|(o, w)| *o += x * w);
            }
        }
        Ok(out)
    }
}

impl PairScorer for ClassifierScorer<'_> {
    fn prepare(&self, t: usize) -> Result<Box<dyn Fn(usize, &mut [f64]) + '_>> {
        let l = self.clf.embed_dim();
        let a = self.half(t, false)?;
        let b = self.half(t, true)?;
        let w2 = self.clf.output.weight.data();
        let b2 = self.clf.output.bias.data()[0];
        Ok(Box::new(move |src, out| {
            let ai = &a[src * l..(src + 1) * l];
            for (j, o) in out.iter_mut().enumerate() {
                let bj = &b[j * l..(j + 1) * l];
                let mut z = b2;
                for k in 0..l {
                    z += w2[k] * (ai[k] + bj[k]).max(0.0);
                }
                *o = z;
            }
        }))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn class_weight_ratio() {
        let mut pool = PairPool::default();
        pool.labels = (0..125).map(|k| k < 25).collect();
        assert_eq!(pool.positive_weight().unwrap(), 4.0);
        assert!(PairPool::default().positive_weight().is_err());
    }

    #[test]
    fn cached_scores_match_direct_logits() {
        let mut rng = stream(3, &[]);
        let clf = LinkClassifier::new(&mut rng, 3);
        let mut emb = EmbeddingTable::new(1, 4, 3);
        for node in 0..4 {
            let mu: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
            emb.set(0, node, &mu, &[1.0; 3]).unwrap();
        }
        let scorer = ClassifierScorer::new(&clf, &emb).unwrap();
        let f = scorer.prepare(0).unwrap();
        let mut out = vec![0.0; 4];
        f(2, &mut out);
        for j in 0..4 {
            let direct = clf.logit(emb.mu(0, 2).unwrap(), emb.mu(0, j).unwrap());
            assert!((out[j] - direct).abs() < 1e-12);
        }
        let wrong = EmbeddingTable::new(1, 4, 5);
        assert!(ClassifierScorer::new(&clf, &wrong).is_err());
    }
}
