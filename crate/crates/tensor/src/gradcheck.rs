use crate::error::{Result, TensorError};
use crate::tape::{Tape, Var};
use crate::tensor::Tensor;

/// Denominator floor for [`relative_error`]. Below this magnitude the error
/// degrades to an absolute error scaled by the floor, which keeps round-off in
/// the finite difference from dominating near-zero gradient coordinates.
pub const GRAD_CHECK_FLOOR: f64 = 1e-4;

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    let scale = analytic.abs().max(numeric.abs()).max(GRAD_CHECK_FLOOR);
    (analytic - numeric).abs() / scale
}

fn eval<F>(f: &F, x: &Tensor) -> Result<f64>
where
    F: Fn(&mut Tape, Var) -> Result<Var>,
{
    let mut tape = Tape::new();
    let xv = tape.param(x)?;
    let y = f(&mut tape, xv)?;
    let value = tape.item(y);
    if !value.is_finite() {
        return Err(TensorError::NonFinite { op: "grad_check" });
    }
    Ok(value)
}

/// Central finite-difference gradient of a scalar function.
pub fn numeric_grad<F>(f: &F, x: &Tensor, h: f64) -> Result<Vec<f64>>
where
    F: Fn(&mut Tape, Var) -> Result<Var>,
{
    let mut probe = x.clone();
    let mut out = Vec::with_capacity(x.numel());
    for i in 0..x.numel() {
        let orig = probe.data()[i];
        probe.data_mut()[i] = orig + h;
        let plus = eval(f, &probe)?;
        probe.data_mut()[i] = orig - h;
        let minus = eval(f, &probe)?;
        probe.data_mut()[i] = orig;
        out.push((plus - minus) / (2.0 * h));
    }
    Ok(out)
}

/// Compares reverse-mode gradients of `f` at `x` against central finite
/// differences with step `h`, returning the largest per-coordinate
/// [`relative_error`].
pub fn grad_check<F>(f: F, x: &Tensor, h: f64) -> Result<f64>
where
    F: Fn(&mut Tape, Var) -> Result<Var>,
{
    if !(1e-7..=1e-4).contains(&h) {
        return Err(TensorError::Invalid(format!("step {h} outside [1e-7, 1e-4]")));
    }
    let mut x = x.clone();
    x.set_requires_grad(true);
    let mut tape = Tape::new();
    let xv = tape.param(&x)?;
    let y = f(&mut tape, xv)?;
    if !tape.item(y).is_finite() {
        return Err(TensorError::NonFinite { op: "grad_check" });
    }
    tape.backward(y)?;
    let analytic = tape
        .grad(xv)
        .map(<[f64]>::to_vec)
        .unwrap_or_else(|| vec![0.0; x.numel()]);
    let numeric = numeric_grad(&f, &x, h)?;
    Ok(analytic
        .iter()
        .zip(&numeric)
        .map(|(a, n)| relative_error(*a, *n))
        .fold(0.0, f64::max))
}
