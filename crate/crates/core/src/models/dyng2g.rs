//! Per-timestamp G2G encoders with multi-step warm starts, and the static
//! single-encoder G2G baseline.

use gembed_tensor::Tensor;

use super::config::validate_thetas;
use super::g2g::G2gEncoder;
use super::train::{emit, fit_shared, fit_timestamp, TrainLog};
use super::{EmbeddingTable, TrainConfig};
use crate::error::{Error, Result};
use crate::graph::{DynamicGraph, Split};
use crate::rng::{stream, tag};

/// Convex combination `sum_k thetas[k] * history[k]` of weight sets, where
/// `history[0]` is the most recent. Terms with a zero coefficient are
/// skipped, so `[1]` and `[1, 0]` return `history[0]` bit for bit.
pub fn multistep_init(history: &[Vec<Tensor>], thetas: &[f64]) -> Result<Vec<Tensor>> {
    validate_thetas(thetas)?;
    if history.len() != thetas.len() {
        return Err(Error::Config(format!(
            "{} weight sets for {} coefficients",
            history.len(),
            thetas.len()
        )));
    }
    let first = &history[0];
    for set in &history[1..] {
        let same = set.len() == first.len() && set.iter().zip(first).all(|(a, b)| a.shape() == b.shape());
        if !same {
            return Err(Error::Dimension("weight sets have different shapes".into()));
        }
    }
    let mut acc: Option<Vec<Tensor>> = None;
    for (set, &theta) in history.iter().zip(thetas) {
        if theta == 0.0 {
            continue;
        }
        match &mut acc {
            None => {
                acc = Some(
                    set.iter()
                        .map(|w| {
                            let mut out = w.clone();
                            out.zero_grad();
                            out.data_mut().iter_mut().for_each(|x| *x *= theta);
                            out
                        })
                        .collect(),
                )
            }
            Some(acc) => {
                for (a, w) in acc.iter_mut().zip(set) {
                    a.data_mut().iter_mut().zip(w.data()).for_each(|(x, y)| *x += theta * y);
                }
            }
        }
    }
    Ok(acc.expect("validated coefficients sum to one"))
}

/// Coefficients usable with `available` earlier encoders: the leading
/// entries, rescaled to sum to one when truncated. `None` means fall back
/// to copying the most recent encoder.
fn usable_thetas(thetas: &[f64], available: usize) -> Option<Vec<f64>> {
    if available >= thetas.len() {
        return Some(thetas.to_vec());
    }
    let head = &thetas[..available];
    let sum: f64 = head.iter().sum();
    (sum > 0.0).then(|| head.iter().map(|t| t / sum).collect())
}

/// Sequence of G2G encoders, one per trained timestamp.
#[derive(Debug, Clone, PartialEq)]
pub struct DynG2g {
    pub encoders: Vec<G2gEncoder>,
    /// Timestamp each encoder was trained on, ascending.
    pub trained_at: Vec<usize>,
}

impl DynG2g {
    /// Encoder for `t`: the latest one trained at or before `t`, else the first.
    pub fn encoder_at(&self, t: usize) -> &G2gEncoder {
        let k = self.trained_at.partition_point(|&s| s <= t);
        &self.encoders[k.saturating_sub(1)]
    }

    pub fn embed(&self, g: &DynamicGraph, binarize: bool) -> Result<EmbeddingTable> {
        let first = &self.encoders[0];
        if first.n_in() != g.n_global() {
            return Err(Error::Dimension(format!(
                "encoders over {} nodes applied to a graph of {}",
                first.n_in(),
                g.n_global()
            )));
        }
        let mut table = EmbeddingTable::new(g.num_timestamps(), g.n_global(), first.embed_dim());
        for t in 0..g.num_timestamps() {
            emit(self.encoder_at(t), g, t..t + 1, binarize, &mut table)?;
        }
        Ok(table)
    }
}

/// Trains encoders timestamp by timestamp over the training range. The
/// encoder at `t` starts from [`multistep_init`] over the most recent
/// trained encoders and gets a fresh optimizer.
pub fn train_dyng2g(g: &DynamicGraph, split: &Split, cfg: &TrainConfig) -> Result<(DynG2g, TrainLog)> {
    cfg.validate()?;
    let mut rng = stream(cfg.seed, &[tag::INIT]);
    let fresh = G2gEncoder::new(&mut rng, g.n_global(), cfg.hidden, cfg.embed_dim);
    let mut model = DynG2g { encoders: Vec::new(), trained_at: Vec::new() };
    let mut log = TrainLog::default();
    for t in split.train.clone() {
        let available = model.encoders.len().min(cfg.thetas.len());
        let mut enc = if available == 0 {
            fresh.clone()
        } else {
            let recent: Vec<Vec<Tensor>> = model.encoders.iter().rev().take(available)
                .map(|e| e.params().into_iter().cloned().collect())
                .collect();
            match usable_thetas(&cfg.thetas, available) {
                Some(th) => G2gEncoder::from_params(multistep_init(&recent, &th)?)?,
                None => model.encoders.last().expect("available > 0").clone(),
            }
        };
        match fit_timestamp(&mut enc, g, t, cfg)? {
            Some(records) => {
                if let Some(last) = records.last() {
                    log::info!("t={t}: loss {:.6}", last.train_loss);
                }
                log.records.extend(records);
                model.encoders.push(enc);
                model.trained_at.push(t);
            }
            None => {
                log::warn!("timestamp {t} has no valid triplet; skipped");
                log.skipped.push(t);
            }
        }
    }
    if model.encoders.is_empty() {
        return Err(Error::Empty("no training timestamp yields a triplet".into()));
    }
    Ok((model, log))
}

/// One G2G encoder shared by all timestamps.
pub fn train_g2g(g: &DynamicGraph, split: &Split, cfg: &TrainConfig) -> Result<(G2gEncoder, TrainLog)> {
    cfg.validate()?;
    let mut rng = stream(cfg.seed, &[tag::INIT]);
    let mut enc = G2gEncoder::new(&mut rng, g.n_global(), cfg.hidden, cfg.embed_dim);
    let log = fit_shared(&mut enc, g, split, cfg)?;
    Ok((enc, log))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(values: &[f64]) -> Vec<Tensor> {
        vec![Tensor::vector(values.to_vec())]
    }

    #[test]
    fn identity_coefficient_returns_latest_exactly() {
        let h = vec![set(&[-0.0, 0.1, 3.0])];
        let out = multistep_init(&h, &[1.0]).unwrap();
        assert_eq!(out[0].data(), h[0][0].data());
        assert!(out[0].data()[0].is_sign_negative());
        let h2 = vec![set(&[-0.0, 0.1, 3.0]), set(&[5.0, 5.0, 5.0])];
        let out2 = multistep_init(&h2, &[1.0, 0.0]).unwrap();
        assert!(out2[0].data().iter().zip(h2[0][0].data()).all(|(a, b)| a.to_bits() == b.to_bits()));
    }

    #[test]
    fn half_and_half() {
        let eye = vec![Tensor::matrix(2, 2, vec![1.0, 0.0, 0.0, 1.0]).unwrap()];
        let zero = vec![Tensor::zeros(&[2, 2])];
        let out = multistep_init(&[eye, zero], &[0.5, 0.5]).unwrap();
        assert_eq!(out[0].data(), &[0.5, 0.0, 0.0, 0.5]);
    }

    #[test]
    fn three_step_and_errors() {
        let h = vec![set(&[1.0]), set(&[2.0]), set(&[3.0])];
        let out = multistep_init(&h, &[0.2, 0.6, 0.2]).unwrap();
        assert!((out[0].data()[0] - 2.0).abs() < 1e-15);
        assert!(multistep_init(&h, &[0.5, 0.6, 0.2]).is_err());
        assert!(multistep_init(&h[..2], &[0.2, 0.6, 0.2]).is_err());
        assert!(multistep_init(&[set(&[1.0]), set(&[1.0, 2.0])], &[0.5, 0.5]).is_err());
    }

    #[test]
    fn truncated_coefficients() {
        assert_eq!(usable_thetas(&[0.25, 0.75], 1), Some(vec![1.0]));
        let two = usable_thetas(&[0.2, 0.6, 0.2], 2).unwrap();
        assert!((two[0] - 0.25).abs() < 1e-15 && (two[1] - 0.75).abs() < 1e-15);
        assert_eq!(usable_thetas(&[0.0, 1.0], 1), None);
        assert_eq!(usable_thetas(&[1.0, 0.0], 2), Some(vec![1.0, 0.0]));
    }
}
