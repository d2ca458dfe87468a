use gembed_tensor::{Tape, Var};

use crate::error::{Error, Result};
use crate::sampling::TripletBatch;

/// Diagonal Gaussian node embedding.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianEmbedding {
    pub mu: Vec<f64>,
    pub var: Vec<f64>,
}

impl GaussianEmbedding {
    pub fn new(mu: Vec<f64>, var: Vec<f64>) -> Result<Self> {
        if mu.len() != var.len() {
            return Err(Error::Dimension(format!(
                "mean of length {} with variance of length {}",
                mu.len(),
                var.len()
            )));
        }
        if var.iter().any(|v| !(*v > 0.0) || !v.is_finite()) || mu.iter().any(|m| !m.is_finite()) {
            return Err(Error::Config("variances must be positive and finite".into()));
        }
        Ok(Self { mu, var })
    }

    pub fn dim(&self) -> usize {
        self.mu.len()
    }
}

/// `KL(p || q)` between diagonal Gaussians:
/// `0.5 * sum(var_p/var_q + (mu_q - mu_p)^2/var_q - 1 + ln var_q - ln var_p)`.
pub fn kl_divergence(p: &GaussianEmbedding, q: &GaussianEmbedding) -> Result<f64> {
    if p.dim() != q.dim() {
        return Err(Error::Dimension(format!("KL between dims {} and {}", p.dim(), q.dim())));
    }
    if p.var.iter().chain(&q.var).any(|v| !(*v > 0.0)) {
        return Err(Error::Config("KL needs strictly positive variances".into()));
    }
    let mut acc = 0.0;
    for k in 0..p.dim() {
        let d = q.mu[k] - p.mu[k];
        acc += p.var[k] / q.var[k] + d * d / q.var[k] - 1.0 + q.var[k].ln() - p.var[k].ln();
    }
    Ok(0.5 * acc)
}

/// Per-row KL on the tape for `[n, L]` mean/variance blocks; returns `[n, 1]`.
pub fn kl_rows(tape: &mut Tape, mu_p: Var, var_p: Var, mu_q: Var, var_q: Var) -> Result<Var> {
    let ratio = tape.div(var_p, var_q)?;
    let diff = tape.sub(mu_q, mu_p)?;
    let diff2 = tape.square(diff)?;
    let maha = tape.div(diff2, var_q)?;
    let log_q = tape.log(var_q)?;
    let log_p = tape.log(var_p)?;
    let log_ratio = tape.sub(log_q, log_p)?;
    let terms = tape.add(ratio, maha)?;
    let terms = tape.add(terms, log_ratio)?;
    let terms = tape.add_scalar(terms, -1.0)?;
    let summed = tape.row_sum(terms)?;
    Ok(tape.scale(summed, 0.5)?)
}

/// Contrastive loss over a batch: `sum KL(anchor||near)^2 + exp(-KL(anchor||far))`.
///
/// `mu` and `var` are `[m, L]` blocks whose row `row_of(node)` holds that
/// node's embedding.
pub fn triplet_loss(
    tape: &mut Tape,
    mu: Var,
    var: Var,
    batch: &TripletBatch,
    row_of: impl Fn(usize) -> Option<usize>,
) -> Result<Var> {
    if batch.is_empty() {
        return Err(Error::Empty(format!("no triplets at timestamp {}", batch.t)));
    }
    let lookup = |node: usize| {
        row_of(node).ok_or_else(|| Error::OutOfRange(format!("no embedding for node {node}")))
    };
    let mut anchors = Vec::with_capacity(batch.len());
    let mut nears = Vec::with_capacity(batch.len());
    let mut fars = Vec::with_capacity(batch.len());
    for tr in &batch.triples {
        anchors.push(lookup(tr.anchor)?);
        nears.push(lookup(tr.near)?);
        fars.push(lookup(tr.far)?);
    }
    let mu_a = tape.gather_rows(mu, &anchors)?;
    let var_a = tape.gather_rows(var, &anchors)?;
    let mu_n = tape.gather_rows(mu, &nears)?;
    let var_n = tape.gather_rows(var, &nears)?;
    let mu_f = tape.gather_rows(mu, &fars)?;
    let var_f = tape.gather_rows(var, &fars)?;
    let kl_near = kl_rows(tape, mu_a, var_a, mu_n, var_n)?;
    let kl_far = kl_rows(tape, mu_a, var_a, mu_f, var_f)?;
    let pull = tape.square(kl_near)?;
    let neg = tape.scale(kl_far, -1.0)?;
    let push = tape.exp(neg)?;
    let per_triple = tape.add(pull, push)?;
    Ok(tape.sum(per_triple)?)
}
