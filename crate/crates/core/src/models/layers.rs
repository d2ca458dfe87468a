use gembed_tensor::{CsrMatrix, Tape, Tensor, Var};
use rand::Rng;

use crate::error::Result;

/// Offset added after `elu(x) + 1` so variances stay strictly positive.
pub const VAR_EPS: f64 = 1e-14;

/// Uniform in `[-1/sqrt(fan_in), 1/sqrt(fan_in)]`.
pub fn init_uniform<R: Rng>(rng: &mut R, fan_in: usize, shape: &[usize]) -> Tensor {
    let bound = 1.0 / (fan_in as f64).sqrt();
    let n = shape.iter().product();
    let data = (0..n).map(|_| rng.random_range(-bound..bound)).collect();
    Tensor::new(data, shape.to_vec()).expect("shape matches").trainable()
}

/// Affine map `x W + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct Linear {
    pub weight: Tensor,
    pub bias: Tensor,
}

#[derive(Debug, Clone, Copy)]
pub struct LinearVars {
    pub weight: Var,
    pub bias: Var,
}

impl Linear {
    pub fn new<R: Rng>(rng: &mut R, fan_in: usize, fan_out: usize) -> Self {
        Self {
            weight: init_uniform(rng, fan_in, &[fan_in, fan_out]),
            bias: init_uniform(rng, fan_in, &[fan_out]),
        }
    }

    pub fn zeros(fan_in: usize, fan_out: usize) -> Self {
        Self {
            weight: Tensor::zeros(&[fan_in, fan_out]).trainable(),
            bias: Tensor::zeros(&[fan_out]).trainable(),
        }
    }

    pub fn in_dim(&self) -> usize {
        self.weight.shape()[0]
    }

    pub fn out_dim(&self) -> usize {
        self.weight.shape()[1]
    }

    pub fn bind(&self, tape: &mut Tape, vars: &mut Vec<Var>) -> Result<LinearVars> {
        let weight = tape.param(&self.weight)?;
        let bias = tape.param(&self.bias)?;
        vars.extend([weight, bias]);
        Ok(LinearVars { weight, bias })
    }

    pub fn params(&self) -> [&Tensor; 2] {
        [&self.weight, &self.bias]
    }

    pub fn params_mut(&mut self) -> [&mut Tensor; 2] {
        [&mut self.weight, &mut self.bias]
    }
}

impl LinearVars {
    pub fn apply(&self, tape: &mut Tape, x: Var) -> Result<Var> {
        let xw = tape.matmul(x, self.weight)?;
        Ok(tape.add_row(xw, self.bias)?)
    }

    pub fn apply_sparse(&self, tape: &mut Tape, x: CsrMatrix) -> Result<Var> {
        let xw = tape.spmm(x, self.weight)?;
        Ok(tape.add_row(xw, self.bias)?)
    }
}

/// Mean and variance heads on a shared representation:
/// `mu = h W_mu + b_mu`, `var = elu(h W_s + b_s) + 1 + VAR_EPS`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianHeads {
    pub mu: Linear,
    pub sigma: Linear,
}

impl GaussianHeads {
    pub fn new<R: Rng>(rng: &mut R, hidden: usize, embed_dim: usize) -> Self {
        Self {
            mu: Linear::new(rng, hidden, embed_dim),
            sigma: Linear::new(rng, hidden, embed_dim),
        }
    }

    pub fn apply(&self, tape: &mut Tape, h: Var, vars: &mut Vec<Var>) -> Result<(Var, Var)> {
        let mu_head = self.mu.bind(tape, vars)?;
        let sigma_head = self.sigma.bind(tape, vars)?;
        let mu = mu_head.apply(tape, h)?;
        let s = sigma_head.apply(tape, h)?;
        let s = tape.elu(s)?;
        let var = tape.add_scalar(s, 1.0 + VAR_EPS)?;
        Ok((mu, var))
    }

    pub fn params(&self) -> Vec<&Tensor> {
        let mut v = self.mu.params().to_vec();
        v.extend(self.sigma.params());
        v
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor> {
        let mut v: Vec<&mut Tensor> = self.mu.params_mut().into_iter().collect();
        v.extend(self.sigma.params_mut());
        v
    }
}
