//! Feed-forward Gaussian encoder of a single adjacency row.

use gembed_tensor::{CsrMatrix, Tape, Tensor, Var};
use rand::Rng;

use super::layers::{GaussianHeads, Linear};
use super::train::{Encoded, Encoder};
use super::GaussianEmbedding;
use crate::error::{Error, Result};
use crate::graph::DynamicGraph;

/// `row -> tanh(row W_h + b_h) -> (mu, var)`.
#[derive(Debug, Clone, PartialEq)]
pub struct G2gEncoder {
    pub hidden: Linear,
    pub heads: GaussianHeads,
}

impl G2gEncoder {
    pub fn new<R: Rng>(rng: &mut R, n_in: usize, hidden: usize, embed_dim: usize) -> Self {
        Self {
            hidden: Linear::new(rng, n_in, hidden),
            heads: GaussianHeads::new(rng, hidden, embed_dim),
        }
    }

    pub fn n_in(&self) -> usize {
        self.hidden.in_dim()
    }

    pub fn embed_dim(&self) -> usize {
        self.heads.mu.out_dim()
    }

    pub fn params(&self) -> Vec<&Tensor> {
        let mut v = self.hidden.params().to_vec();
        v.extend(self.heads.params());
        v
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor> {
        let mut v: Vec<&mut Tensor> = self.hidden.params_mut().into_iter().collect();
        v.extend(self.heads.params_mut());
        v
    }

    pub fn param_names() -> [&'static str; 6] {
        ["hidden.w", "hidden.b", "mu.w", "mu.b", "sigma.w", "sigma.b"]
    }

    /// Rebuilds an encoder from tensors in [`Self::params`] order.
    pub fn from_params(mut p: Vec<Tensor>) -> Result<Self> {
        if p.len() != 6 {
            return Err(Error::Checkpoint(format!("G2G encoder needs 6 tensors, got {}", p.len())));
        }
        let mut next = || {
            let mut t = p.remove(0);
            t.set_requires_grad(true);
            t
        };
        let enc = Self {
            hidden: Linear { weight: next(), bias: next() },
            heads: GaussianHeads {
                mu: Linear { weight: next(), bias: next() },
                sigma: Linear { weight: next(), bias: next() },
            },
        };
        let h = enc.hidden.out_dim();
        if enc.heads.mu.in_dim() != h || enc.heads.sigma.in_dim() != h || enc.heads.sigma.out_dim() != enc.embed_dim() {
            return Err(Error::Checkpoint("inconsistent G2G encoder shapes".into()));
        }
        Ok(enc)
    }

    /// Records the encoder on `tape` for a stack of rows.
    pub fn forward(&self, tape: &mut Tape, rows: CsrMatrix) -> Result<Encoded> {
        if rows.cols() != self.n_in() {
            return Err(Error::Dimension(format!(
                "input rows of width {} for an encoder over {} nodes",
                rows.cols(),
                self.n_in()
            )));
        }
        let mut params: Vec<Var> = Vec::new();
        let hidden = self.hidden.bind(tape, &mut params)?;
        let h = hidden.apply_sparse(tape, rows)?;
        let h = tape.tanh(h)?;
        let (mu, var) = self.heads.apply(tape, h, &mut params)?;
        Ok(Encoded {
            params,
            mu,
            var,
            attention: None,
        })
    }

    /// Embeds one dense padded adjacency row.
    pub fn embed_row(&self, row: &[f64]) -> Result<GaussianEmbedding> {
        if row.iter().any(|v| !v.is_finite()) {
            return Err(Error::Tensor(gembed_tensor::TensorError::NonFinite { op: "g2g_forward" }));
        }
        let csr = CsrMatrix::from_dense(1, row.len(), row)?;
        let mut tape = Tape::new();
        let out = self.forward(&mut tape, csr)?;
        GaussianEmbedding::new(tape.value(out.mu).to_vec(), tape.value(out.var).to_vec())
    }
}

impl Encoder for G2gEncoder {
    fn encode(&self, tape: &mut Tape, g: &DynamicGraph, t: usize, nodes: &[usize], binarize: bool) -> Result<Encoded> {
        let s = g.snapshot(t)?;
        let mut rows = CsrMatrix::new(g.n_global());
        for &i in nodes {
            rows.push_row(s.row(i).iter().map(|&(c, w)| (c, if binarize { 1.0 } else { w })))?;
        }
        self.forward(tape, rows)
    }

    fn params_mut(&mut self) -> Vec<&mut Tensor> {
        G2gEncoder::params_mut(self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    #[test]
    fn zero_heads_give_unit_variance() {
        let mut rng = stream(0, &[]);
        let mut enc = G2gEncoder::new(&mut rng, 5, 8, 3);
        enc.heads.mu = Linear::zeros(8, 3);
        enc.heads.sigma = Linear::zeros(8, 3);
        let e = enc.embed_row(&[0.0, 1.0, 1.0, 0.0, 1.0]).unwrap();
        assert_eq!(e.mu, vec![0.0; 3]);
        assert_eq!(e.var, vec![1.0 + 1e-14; 3]);
    }

    #[test]
    fn output_shapes() {
        let mut rng = stream(1, &[]);
        let enc = G2gEncoder::new(&mut rng, 10, 16, 64);
        let e = enc.embed_row(&[1.0; 10]).unwrap();
        assert_eq!((e.mu.len(), e.var.len()), (64, 64));
    }

    #[test]
    fn variance_positive_over_random_draws() {
        let mut min_var = f64::INFINITY;
        for seed in 0..1000 {
            let mut rng = stream(seed, &[9]);
            let enc = G2gEncoder::new(&mut rng, 6, 4, 2);
            let row: Vec<f64> = (0..6).map(|_| rng.random_range(-3.0..3.0)).collect();
            let e = enc.embed_row(&row).unwrap();
            min_var = e.var.iter().copied().fold(min_var, f64::min);
        }
        assert!(min_var > 0.0);
    }

    #[test]
    fn wrong_width_is_rejected() {
        let mut rng = stream(2, &[]);
        let enc = G2gEncoder::new(&mut rng, 4, 4, 2);
        assert!(enc.embed_row(&[1.0; 5]).is_err());
    }

    #[test]
    fn params_round_trip() {
        let mut rng = stream(3, &[]);
        let enc = G2gEncoder::new(&mut rng, 4, 3, 2);
        let rebuilt = G2gEncoder::from_params(enc.params().into_iter().cloned().collect()).unwrap();
        assert_eq!(rebuilt, enc);
    }
}
