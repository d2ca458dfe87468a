use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Hyperparameters shared by every embedding model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    /// Number of previous timestamps fed to the transformer (sequence length `lookback + 1`).
    pub lookback: usize,
    pub d_model: usize,
    pub d_ff: usize,
    /// Width of the nonlinear layer in front of the Gaussian heads.
    pub hidden: usize,
    /// Embedding size L0.
    pub embed_dim: usize,
    pub lr: f64,
    pub epochs: usize,
    pub seed: u64,
    /// Warm-start coefficients for the previous 1..=3 encoders, most recent first.
    pub thetas: Vec<f64>,
    pub k_per_anchor: usize,
    /// Triples per optimizer step; 0 uses the whole timestamp.
    pub batch_triples: usize,
    pub binarize: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lookback: 1,
            d_model: 256,
            d_ff: 1024,
            hidden: 512,
            embed_dim: 64,
            lr: 1e-4,
            epochs: 20,
            seed: 0,
            thetas: vec![1.0],
            k_per_anchor: crate::sampling::DEFAULT_K_PER_ANCHOR,
            batch_triples: 0,
            binarize: true,
        }
    }
}

pub const THETA_TOLERANCE: f64 = 1e-9;

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if self.d_model == 0 || self.d_model % 2 != 0 {
            return fail(format!("d_model must be positive and even, got {}", self.d_model));
        }
        if self.d_ff == 0 || self.hidden == 0 || self.embed_dim == 0 {
            return fail("layer widths must be positive".into());
        }
        if !(self.lr > 0.0) || !self.lr.is_finite() {
            return fail(format!("learning rate must be positive, got {}", self.lr));
        }
        if self.epochs == 0 || self.k_per_anchor == 0 {
            return fail("epochs and k_per_anchor must be positive".into());
        }
        validate_thetas(&self.thetas)
    }
}

pub fn validate_thetas(thetas: &[f64]) -> Result<()> {
    if thetas.is_empty() || thetas.len() > 3 {
        return Err(Error::Config(format!(
            "expected 1 to 3 warm-start coefficients, got {}",
            thetas.len()
        )));
    }
    if thetas.iter().any(|t| !t.is_finite() || *t < 0.0) {
        return Err(Error::Config(format!("coefficients must be non-negative: {thetas:?}")));
    }
    let sum: f64 = thetas.iter().sum();
    if (sum - 1.0).abs() > THETA_TOLERANCE {
        return Err(Error::Config(format!("coefficients {thetas:?} sum to {sum}, not 1")));
    }
    Ok(())
}
