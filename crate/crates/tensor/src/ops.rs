use crate::error::{Result, TensorError};
use crate::sparse::CsrMatrix;
use crate::tape::{Tape, Var};
use crate::LAYER_NORM_EPS;

pub(crate) enum Op {
    Leaf,
    Consumed,
    MatMul(Var, Var),
    SpMM(CsrMatrix, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Div(Var, Var),
    AddRow(Var, Var),
    MulRow(Var, Var),
    Scale(Var, f64),
    AddScalar(Var),
    Reshape(Var),
    ConcatCols(Vec<Var>),
    SoftmaxRows(Var),
    Tanh(Var),
    Sigmoid(Var),
    Softplus(Var),
    Exp(Var),
    Elu(Var),
    Relu(Var),
    Log(Var),
    Square(Var),
    LayerNormRows { input: Var, inv_std: Vec<f64> },
    Sum(Var),
    Mean(Var),
    RowSum(Var),
    GatherRows(Var, Vec<usize>),
    BlockMatMulNt { a: Var, b: Var, block: usize },
    BlockMatMul { a: Var, b: Var, block: usize },
}

impl Op {
    pub(crate) fn parents(&self) -> Vec<Var> {
        match self {
            Op::Leaf | Op::Consumed => vec![],
            Op::MatMul(a, b)
            | Op::Add(a, b)
            | Op::Sub(a, b)
            | Op::Mul(a, b)
            | Op::Div(a, b)
            | Op::AddRow(a, b)
            | Op::MulRow(a, b)
            | Op::BlockMatMulNt { a, b, .. }
            | Op::BlockMatMul { a, b, .. } => vec![*a, *b],
            Op::SpMM(_, a)
            | Op::Scale(a, _)
            | Op::AddScalar(a)
            | Op::Reshape(a)
            | Op::SoftmaxRows(a)
            | Op::Tanh(a)
            | Op::Sigmoid(a)
            | Op::Softplus(a)
            | Op::Exp(a)
            | Op::Elu(a)
            | Op::Relu(a)
            | Op::Log(a)
            | Op::Square(a)
            | Op::LayerNormRows { input: a, .. }
            | Op::Sum(a)
            | Op::Mean(a)
            | Op::RowSum(a)
            | Op::GatherRows(a, _) => vec![*a],
            Op::ConcatCols(parts) => parts.clone(),
        }
    }
}

/// `c = a * b + beta * c` for an `m x k` by `k x n` product written into a
/// row-major `m x n` buffer. Operand layouts are given as (row, col) strides.
#[allow(clippy::too_many_arguments)]
pub(crate) fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    a_strides: (usize, usize),
    b: &[f64],
    b_strides: (usize, usize),
    c: &mut [f64],
    beta: f64,
) {
    if m == 0 || n == 0 {
        return;
    }
    assert!(c.len() >= m * n, "gemm output buffer too small");
    if k > 0 {
        assert!(a.len() > (m - 1) * a_strides.0 + (k - 1) * a_strides.1);
        assert!(b.len() > (k - 1) * b_strides.0 + (n - 1) * b_strides.1);
    }
    // SAFETY: bounds of every operand were checked against their strides above.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            a_strides.0 as isize,
            a_strides.1 as isize,
            b.as_ptr(),
            b_strides.0 as isize,
            b_strides.1 as isize,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

fn mismatch(op: &'static str, left: &[usize], right: &[usize]) -> TensorError {
    TensorError::ShapeMismatch {
        op,
        left: left.to_vec(),
        right: right.to_vec(),
    }
}

impl Tape {
    fn same_shape(&self, op: &'static str, a: Var, b: Var) -> Result<()> {
        if self.shape(a) != self.shape(b) {
            return Err(mismatch(op, self.shape(a), self.shape(b)));
        }
        Ok(())
    }

    fn map(&mut self, name: &'static str, a: Var, op: Op, f: impl Fn(f64) -> f64) -> Result<Var> {
        let data = self.value(a).iter().map(|&x| f(x)).collect();
        let shape = self.shape(a).to_vec();
        self.push(name, data, shape, op)
    }

    fn zip_with(&mut self, name: &'static str, a: Var, b: Var, op: Op, f: impl Fn(f64, f64) -> f64) -> Result<Var> {
        self.same_shape(name, a, b)?;
        let data = self
            .value(a)
            .iter()
            .zip(self.value(b))
            .map(|(&x, &y)| f(x, y))
            .collect();
        let shape = self.shape(a).to_vec();
        self.push(name, data, shape, op)
    }

    /// Matrix product of `[m, k]` and `[k, n]`.
    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa.len() != 2 || sb.len() != 2 || sa[1] != sb[0] {
            return Err(mismatch("matmul", sa, sb));
        }
        let (m, k, n) = (sa[0], sa[1], sb[1]);
        let mut out = vec![0.0; m * n];
        gemm(m, k, n, self.value(a), (k, 1), self.value(b), (n, 1), &mut out, 0.0);
        self.push("matmul", out, vec![m, n], Op::MatMul(a, b))
    }

    /// Product of a constant sparse matrix `[m, k]` with `w` of shape `[k, n]`.
    pub fn spmm(&mut self, x: CsrMatrix, w: Var) -> Result<Var> {
        let sw = self.shape(w);
        if sw.len() != 2 || sw[0] != x.cols() {
            return Err(mismatch("spmm", &[x.rows(), x.cols()], sw));
        }
        let n = sw[1];
        let wv = self.value(w);
        let mut out = vec![0.0; x.rows() * n];
        for (r, orow) in out.chunks_mut(n.max(1)).enumerate().take(x.rows()) {
            for (c, v) in x.row(r) {
                orow.iter_mut()
                    .zip(&wv[c * n..(c + 1) * n])
                    .for_each(|(o, w)| *o += v * w);
            }
        }
        let shape = vec![x.rows(), n];
        self.push("spmm", out, shape, Op::SpMM(x, w))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip_with("add", a, b, Op::Add(a, b), |x, y| x + y)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip_with("sub", a, b, Op::Sub(a, b), |x, y| x - y)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip_with("mul", a, b, Op::Mul(a, b), |x, y| x * y)
    }

    pub fn div(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip_with("div", a, b, Op::Div(a, b), |x, y| x / y)
    }

    fn row_broadcast(&self, op: &'static str, a: Var, b: Var) -> Result<usize> {
        let cols = self.dims2(a).1;
        if self.value(b).len() != cols {
            return Err(mismatch(op, self.shape(a), self.shape(b)));
        }
        Ok(cols)
    }

    /// Adds the row vector `b` (length = columns of `a`) to every row of `a`.
    pub fn add_row(&mut self, a: Var, b: Var) -> Result<Var> {
        let cols = self.row_broadcast("add_row", a, b)?;
        let bv = self.value(b);
        let data = self
            .value(a)
            .chunks(cols)
            .flat_map(|row| row.iter().zip(bv).map(|(x, y)| x + y))
            .collect();
        let shape = self.shape(a).to_vec();
        self.push("add_row", data, shape, Op::AddRow(a, b))
    }

    /// Multiplies every row of `a` elementwise by the row vector `b`.
    pub fn mul_row(&mut self, a: Var, b: Var) -> Result<Var> {
        let cols = self.row_broadcast("mul_row", a, b)?;
        let bv = self.value(b);
        let data = self
            .value(a)
            .chunks(cols)
            .flat_map(|row| row.iter().zip(bv).map(|(x, y)| x * y))
            .collect();
        let shape = self.shape(a).to_vec();
        self.push("mul_row", data, shape, Op::MulRow(a, b))
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Result<Var> {
        self.map("scale", a, Op::Scale(a, c), |x| c * x)
    }

    pub fn add_scalar(&mut self, a: Var, c: f64) -> Result<Var> {
        self.map("add_scalar", a, Op::AddScalar(a), |x| x + c)
    }

    /// Row-major reinterpretation; the element count must be preserved.
    pub fn reshape(&mut self, a: Var, shape: &[usize]) -> Result<Var> {
        if shape.iter().product::<usize>() != self.value(a).len() || shape.is_empty() {
            return Err(mismatch("reshape", self.shape(a), shape));
        }
        let data = self.value(a).to_vec();
        self.push("reshape", data, shape.to_vec(), Op::Reshape(a))
    }

    /// Concatenates along the last axis; all parts need the same row count.
    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        let Some(&first) = parts.first() else {
            return Err(TensorError::Invalid("concat of zero tensors".into()));
        };
        let rows = self.dims2(first).0;
        for &p in parts {
            if self.dims2(p).0 != rows {
                return Err(mismatch("concat", self.shape(first), self.shape(p)));
            }
        }
        let total: usize = parts.iter().map(|&p| self.dims2(p).1).sum();
        let mut data = Vec::with_capacity(rows * total);
        for r in 0..rows {
            for &p in parts {
                let w = self.dims2(p).1;
                data.extend_from_slice(&self.value(p)[r * w..(r + 1) * w]);
            }
        }
        let shape = if self.shape(first).len() == 1 {
            vec![total]
        } else {
            vec![rows, total]
        };
        self.push("concat", data, shape, Op::ConcatCols(parts.to_vec()))
    }

    /// Numerically stable softmax over each row.
    pub fn softmax_rows(&mut self, a: Var) -> Result<Var> {
        let cols = self.dims2(a).1;
        let mut data = Vec::with_capacity(self.value(a).len());
        for row in self.value(a).chunks(cols) {
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let start = data.len();
            data.extend(row.iter().map(|x| (x - max).exp()));
            let z: f64 = data[start..].iter().sum();
            data[start..].iter_mut().for_each(|v| *v /= z);
        }
        let shape = self.shape(a).to_vec();
        self.push("softmax", data, shape, Op::SoftmaxRows(a))
    }

    pub fn tanh(&mut self, a: Var) -> Result<Var> {
        self.map("tanh", a, Op::Tanh(a), f64::tanh)
    }

    pub fn sigmoid(&mut self, a: Var) -> Result<Var> {
        self.map("sigmoid", a, Op::Sigmoid(a), sigmoid)
    }

    /// `ln(1 + exp(x))`, evaluated without overflow.
    pub fn softplus(&mut self, a: Var) -> Result<Var> {
        self.map("softplus", a, Op::Softplus(a), softplus)
    }

    pub fn exp(&mut self, a: Var) -> Result<Var> {
        self.map("exp", a, Op::Exp(a), f64::exp)
    }

    /// `x` for positive inputs, `exp(x) - 1` otherwise (unit scale).
    pub fn elu(&mut self, a: Var) -> Result<Var> {
        self.map("elu", a, Op::Elu(a), elu)
    }

    pub fn relu(&mut self, a: Var) -> Result<Var> {
        self.map("relu", a, Op::Relu(a), |x| x.max(0.0))
    }

    pub fn log(&mut self, a: Var) -> Result<Var> {
        self.map("log", a, Op::Log(a), f64::ln)
    }

    pub fn square(&mut self, a: Var) -> Result<Var> {
        self.map("square", a, Op::Square(a), |x| x * x)
    }

    /// Normalizes each row to zero mean and unit population variance, with
    /// [`LAYER_NORM_EPS`] added to the variance. No affine transform.
    pub fn layer_norm_rows(&mut self, a: Var) -> Result<Var> {
        let cols = self.dims2(a).1;
        let n = cols as f64;
        let mut data = Vec::with_capacity(self.value(a).len());
        let mut inv_std = Vec::new();
        for row in self.value(a).chunks(cols) {
            let mean = row.iter().sum::<f64>() / n;
            let var = row.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
            let s = 1.0 / (var + LAYER_NORM_EPS).sqrt();
            data.extend(row.iter().map(|x| (x - mean) * s));
            inv_std.push(s);
        }
        let shape = self.shape(a).to_vec();
        self.push("layer_norm", data, shape, Op::LayerNormRows { input: a, inv_std })
    }

    pub fn sum(&mut self, a: Var) -> Result<Var> {
        let s = self.value(a).iter().sum();
        self.push("sum", vec![s], vec![1], Op::Sum(a))
    }

    pub fn mean(&mut self, a: Var) -> Result<Var> {
        let v = self.value(a);
        let m = v.iter().sum::<f64>() / v.len() as f64;
        self.push("mean", vec![m], vec![1], Op::Mean(a))
    }

    /// Sums each row, giving a `[rows, 1]` column.
    pub fn row_sum(&mut self, a: Var) -> Result<Var> {
        let (rows, cols) = self.dims2(a);
        let data = self.value(a).chunks(cols).map(|r| r.iter().sum()).collect();
        self.push("row_sum", data, vec![rows, 1], Op::RowSum(a))
    }

    /// Selects rows by index (repeats allowed).
    pub fn gather_rows(&mut self, a: Var, idx: &[usize]) -> Result<Var> {
        let (rows, cols) = self.dims2(a);
        if let Some(&bad) = idx.iter().find(|&&r| r >= rows) {
            return Err(TensorError::Invalid(format!(
                "gather index {bad} out of range for {rows} rows"
            )));
        }
        let v = self.value(a);
        let mut data = Vec::with_capacity(idx.len() * cols);
        for &r in idx {
            data.extend_from_slice(&v[r * cols..(r + 1) * cols]);
        }
        self.push("gather_rows", data, vec![idx.len(), cols], Op::GatherRows(a, idx.to_vec()))
    }

    /// Block-diagonal `A_b B_b^T` for consecutive groups of `block` rows.
    /// Inputs are `[g * block, d]`; output is `[g * block, block]`.
    pub fn block_matmul_nt(&mut self, a: Var, b: Var, block: usize) -> Result<Var> {
        self.same_shape("block_matmul_nt", a, b)?;
        let (rows, d) = self.dims2(a);
        if block == 0 || rows % block != 0 {
            return Err(mismatch("block_matmul_nt", self.shape(a), &[block]));
        }
        let mut out = vec![0.0; rows * block];
        let (av, bv) = (self.value(a), self.value(b));
        for off in (0..rows).step_by(block) {
            gemm(
                block,
                d,
                block,
                &av[off * d..],
                (d, 1),
                &bv[off * d..],
                (1, d),
                &mut out[off * block..(off + block) * block],
                0.0,
            );
        }
        self.push("block_matmul_nt", out, vec![rows, block], Op::BlockMatMulNt { a, b, block })
    }

    /// Block-diagonal `A_b B_b` where `a` is `[g * block, block]` and `b` is
    /// `[g * block, d]`.
    pub fn block_matmul(&mut self, a: Var, b: Var, block: usize) -> Result<Var> {
        let (rows, w) = self.dims2(a);
        let (brows, d) = self.dims2(b);
        if block == 0 || w != block || rows != brows || rows % block != 0 {
            return Err(mismatch("block_matmul", self.shape(a), self.shape(b)));
        }
        let mut out = vec![0.0; rows * d];
        let (av, bv) = (self.value(a), self.value(b));
        for off in (0..rows).step_by(block) {
            gemm(
                block,
                block,
                d,
                &av[off * block..],
                (block, 1),
                &bv[off * d..],
                (d, 1),
                &mut out[off * d..(off + block) * d],
                0.0,
            );
        }
        self.push("block_matmul", out, vec![rows, d], Op::BlockMatMul { a, b, block })
    }
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub(crate) fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

pub(crate) fn elu(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        x.exp_m1()
    }
}

