use crate::error::{Result, TensorError};
use crate::ops::{gemm, Op};
use crate::tensor::{dims2, Tensor};

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(pub(crate) usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

pub(crate) struct Node {
    pub(crate) value: Vec<f64>,
    pub(crate) shape: Vec<usize>,
    pub(crate) op: Op,
    pub(crate) requires_grad: bool,
}

/// Linear record of one forward pass. Values are kept after
/// [`Tape::backward`]; the recorded operations are not, so a tape supports
/// exactly one backward pass.
#[derive(Default)]
pub struct Tape {
    pub(crate) nodes: Vec<Node>,
    grads: Vec<Option<Vec<f64>>>,
    consumed: bool,
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Records a leaf carrying the tensor's data and `requires_grad` flag.
    pub fn param(&mut self, t: &Tensor) -> Result<Var> {
        self.leaf(t.data().to_vec(), t.shape().to_vec(), t.requires_grad())
    }

    /// Records a constant leaf.
    pub fn constant(&mut self, t: Tensor) -> Result<Var> {
        let shape = t.shape().to_vec();
        self.leaf(t.into_data(), shape, false)
    }

    pub fn leaf(&mut self, data: Vec<f64>, shape: Vec<usize>, requires_grad: bool) -> Result<Var> {
        if shape.iter().product::<usize>() != data.len() || shape.is_empty() {
            return Err(TensorError::Invalid(format!(
                "data of length {} does not fit shape {:?}",
                data.len(),
                shape
            )));
        }
        self.push_checked("leaf", data, shape, Op::Leaf, requires_grad)
    }

    pub(crate) fn push(&mut self, op_name: &'static str, data: Vec<f64>, shape: Vec<usize>, op: Op) -> Result<Var> {
        let requires_grad = op.parents().iter().any(|p| self.nodes[p.0].requires_grad);
        self.push_checked(op_name, data, shape, op, requires_grad)
    }

    fn push_checked(
        &mut self,
        op_name: &'static str,
        value: Vec<f64>,
        shape: Vec<usize>,
        op: Op,
        requires_grad: bool,
    ) -> Result<Var> {
        if self.consumed {
            return Err(TensorError::TapeConsumed);
        }
        if value.iter().any(|v| !v.is_finite()) {
            return Err(TensorError::NonFinite { op: op_name });
        }
        self.nodes.push(Node {
            value,
            shape,
            op,
            requires_grad,
        });
        Ok(Var(self.nodes.len() - 1))
    }

    pub fn value(&self, v: Var) -> &[f64] {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        &self.nodes[v.0].shape
    }

    pub fn dims2(&self, v: Var) -> (usize, usize) {
        dims2(&self.nodes[v.0].shape)
    }

    /// Copies a recorded value out as a standalone tensor.
    pub fn tensor(&self, v: Var) -> Tensor {
        let n = &self.nodes[v.0];
        Tensor::new(n.value.clone(), n.shape.clone()).expect("tape shapes are consistent")
    }

    pub fn item(&self, v: Var) -> f64 {
        self.nodes[v.0].value[0]
    }

    /// Gradient of the loss with respect to a leaf, available after backward.
    pub fn grad(&self, v: Var) -> Option<&[f64]> {
        self.grads.get(v.0).and_then(|g| g.as_deref())
    }

    /// Adds the gradient recorded for `v` into `target`'s gradient slot. A
    /// leaf that received no gradient contributes zeros.
    pub fn accumulate_grad(&self, v: Var, target: &mut Tensor) -> Result<()> {
        match self.grad(v) {
            Some(g) => target.accumulate_grad(g),
            None => target.accumulate_grad(&vec![0.0; target.numel()]),
        }
    }

    /// Reverse sweep from a scalar loss. Populates gradients of every leaf
    /// that requires them; intermediate gradients are released as soon as
    /// they have been propagated.
    pub fn backward(&mut self, loss: Var) -> Result<()> {
        if self.consumed {
            return Err(TensorError::TapeConsumed);
        }
        let shape = &self.nodes[loss.0].shape;
        if shape.iter().product::<usize>() != 1 {
            return Err(TensorError::NonScalarLoss(shape.clone()));
        }
        self.consumed = true;
        self.grads = vec![None; self.nodes.len()];
        if !self.nodes[loss.0].requires_grad {
            return Ok(());
        }
        self.grads[loss.0] = Some(vec![1.0]);

        for i in (0..=loss.0).rev() {
            let Some(g) = self.grads[i].take() else {
                continue;
            };
            let op = std::mem::replace(&mut self.nodes[i].op, Op::Consumed);
            if matches!(op, Op::Leaf) {
                if g.iter().any(|v| !v.is_finite()) {
                    return Err(TensorError::NonFinite { op: "backward" });
                }
                self.grads[i] = Some(g);
                continue;
            }
            self.propagate(i, &op, &g)?;
        }
        Ok(())
    }

    fn propagate(&mut self, i: usize, op: &Op, g: &[f64]) -> Result<()> {
        let (nodes, grads) = (&self.nodes, &mut self.grads);
        match op {
            Op::Leaf | Op::Consumed => {}
            Op::MatMul(a, b) => {
                let (m, k) = dims_of(nodes, *a);
                let n = dims_of(nodes, *b).1;
                if nodes[a.0].requires_grad {
                    let bv = &nodes[b.0].value;
                    let ga = slot(nodes, grads, *a).expect("requires grad");
                    // dA = G * B^T
                    gemm(m, n, k, g, (n, 1), &bv, (1, n), ga, 1.0);
                }
                if nodes[b.0].requires_grad {
                    let av = &nodes[a.0].value;
                    let gb = slot(nodes, grads, *b).expect("requires grad");
                    // dB = A^T * G
                    gemm(k, m, n, &av, (1, k), g, (n, 1), gb, 1.0);
                }
            }
            Op::SpMM(x, w) => {
                let d = dims_of(nodes, *w).1;
                if let Some(gw) = slot(nodes, grads, *w) {
                    for r in 0..x.rows() {
                        let grow = &g[r * d..(r + 1) * d];
                        for (c, val) in x.row(r) {
                            let dst = &mut gw[c * d..(c + 1) * d];
                            dst.iter_mut().zip(grow).for_each(|(o, gg)| *o += val * gg);
                        }
                    }
                }
            }
            Op::Add(a, b) => {
                if let Some(ga) = slot(nodes, grads, *a) {
                    add_into(ga, g);
                }
                if let Some(gb) = slot(nodes, grads, *b) {
                    add_into(gb, g);
                }
            }
            Op::Sub(a, b) => {
                if let Some(ga) = slot(nodes, grads, *a) {
                    add_into(ga, g);
                }
                if let Some(gb) = slot(nodes, grads, *b) {
                    gb.iter_mut().zip(g).for_each(|(o, gg)| *o -= gg);
                }
            }
            Op::Mul(a, b) => {
                if nodes[a.0].requires_grad {
                    let bv = &nodes[b.0].value;
                    let ga = slot(nodes, grads, *a).expect("requires grad");
                    for ((o, gg), bb) in ga.iter_mut().zip(g).zip(bv) {
                        *o += gg * bb;
                    }
                }
                if nodes[b.0].requires_grad {
                    let av = &nodes[a.0].value;
                    let gb = slot(nodes, grads, *b).expect("requires grad");
                    for ((o, gg), aa) in gb.iter_mut().zip(g).zip(av) {
                        *o += gg * aa;
                    }
                }
            }
            Op::Div(a, b) => {
                let bv = &nodes[b.0].value;
                if let Some(ga) = slot(nodes, grads, *a) {
                    for ((o, gg), bb) in ga.iter_mut().zip(g).zip(bv) {
                        *o += gg / bb;
                    }
                }
                if nodes[b.0].requires_grad {
                    let yv = &nodes[i].value;
                    let gb = slot(nodes, grads, *b).expect("requires grad");
                    // d(a/b)/db = -(a/b)/b
                    for (((o, gg), bb), y) in gb.iter_mut().zip(g).zip(bv).zip(yv) {
                        *o -= gg * y / bb;
                    }
                }
            }
            Op::AddRow(a, b) => {
                let cols = dims_of(nodes, *b).1;
                if let Some(ga) = slot(nodes, grads, *a) {
                    add_into(ga, g);
                }
                if let Some(gb) = slot(nodes, grads, *b) {
                    for row in g.chunks(cols) {
                        add_into(gb, row);
                    }
                }
            }
            Op::MulRow(a, b) => {
                let cols = dims_of(nodes, *b).1;
                if nodes[a.0].requires_grad {
                    let bv = &nodes[b.0].value;
                    let ga = slot(nodes, grads, *a).expect("requires grad");
                    for (orow, grow) in ga.chunks_mut(cols).zip(g.chunks(cols)) {
                        for ((o, gg), bb) in orow.iter_mut().zip(grow).zip(bv) {
                            *o += gg * bb;
                        }
                    }
                }
                if nodes[b.0].requires_grad {
                    let av = &nodes[a.0].value;
                    let gb = slot(nodes, grads, *b).expect("requires grad");
                    for (arow, grow) in av.chunks(cols).zip(g.chunks(cols)) {
                        for ((o, gg), aa) in gb.iter_mut().zip(grow).zip(arow) {
                            *o += gg * aa;
                        }
                    }
                }
            }
            Op::Scale(a, c) => {
                if let Some(ga) = slot(nodes, grads, *a) {
                    ga.iter_mut().zip(g).for_each(|(o, gg)| *o += c * gg);
                }
            }
            Op::AddScalar(a) | Op::Reshape(a) => {
                if let Some(ga) = slot(nodes, grads, *a) {
                    add_into(ga, g);
                }
            }
            Op::ConcatCols(parts) => {
                let rows = dims_of(nodes, Var(i)).0;
                let total = dims_of(nodes, Var(i)).1;
                let mut offset = 0;
                for p in parts {
                    let w = dims_of(nodes, *p).1;
                    if let Some(gp) = slot(nodes, grads, *p) {
                        for r in 0..rows {
                            let src = &g[r * total + offset..r * total + offset + w];
                            add_into(&mut gp[r * w..(r + 1) * w], src);
                        }
                    }
                    offset += w;
                }
            }
            Op::SoftmaxRows(a) => {
                let cols = dims_of(nodes, *a).1;
                let yv = &nodes[i].value;
                if let Some(ga) = slot(nodes, grads, *a) {
                    for ((orow, grow), yrow) in ga.chunks_mut(cols).zip(g.chunks(cols)).zip(yv.chunks(cols)) {
                        let dot: f64 = grow.iter().zip(yrow).map(|(gg, y)| gg * y).sum();
                        for ((o, gg), y) in orow.iter_mut().zip(grow).zip(yrow) {
                            *o += y * (gg - dot);
                        }
                    }
                }
            }
            Op::Tanh(a) => unary(nodes, grads, *a, &nodes[i].value, g, |y| 1.0 - y * y),
            Op::Sigmoid(a) => unary(nodes, grads, *a, &nodes[i].value, g, |y| y * (1.0 - y)),
            Op::Softplus(a) => unary(nodes, grads, *a, &nodes[a.0].value, g, crate::ops::sigmoid),
            Op::Exp(a) => unary(nodes, grads, *a, &nodes[i].value, g, |y| y),
            Op::Elu(a) => {
                let xv = &nodes[a.0].value;
                let yv = &nodes[i].value;
                if let Some(ga) = slot(nodes, grads, *a) {
                    for (((o, gg), x), y) in ga.iter_mut().zip(g).zip(xv).zip(yv) {
                        *o += if *x > 0.0 { *gg } else { gg * (y + 1.0) };
                    }
                }
            }
            Op::Relu(a) => unary(nodes, grads, *a, &nodes[a.0].value, g, |x| if x > 0.0 { 1.0 } else { 0.0 }),
            Op::Log(a) => unary(nodes, grads, *a, &nodes[a.0].value, g, |x| 1.0 / x),
            Op::Square(a) => unary(nodes, grads, *a, &nodes[a.0].value, g, |x| 2.0 * x),
            Op::LayerNormRows { input, inv_std } => {
                let cols = dims_of(nodes, *input).1;
                let yv = &nodes[i].value;
                if let Some(ga) = slot(nodes, grads, *input) {
                    let n = cols as f64;
                    for (((orow, grow), yrow), s) in ga
                        .chunks_mut(cols)
                        .zip(g.chunks(cols))
                        .zip(yv.chunks(cols))
                        .zip(inv_std)
                    {
                        let mean_g = grow.iter().sum::<f64>() / n;
                        let mean_gy = grow.iter().zip(yrow).map(|(a, b)| a * b).sum::<f64>() / n;
                        for ((o, gg), y) in orow.iter_mut().zip(grow).zip(yrow) {
                            *o += s * (gg - mean_g - y * mean_gy);
                        }
                    }
                }
            }
            Op::Sum(a) => {
                let g0 = g[0];
                if let Some(ga) = slot(nodes, grads, *a) {
                    ga.iter_mut().for_each(|o| *o += g0);
                }
            }
            Op::Mean(a) => {
                let n = nodes[a.0].value.len() as f64;
                let g0 = g[0] / n;
                if let Some(ga) = slot(nodes, grads, *a) {
                    ga.iter_mut().for_each(|o| *o += g0);
                }
            }
            Op::RowSum(a) => {
                let cols = dims_of(nodes, *a).1;
                if let Some(ga) = slot(nodes, grads, *a) {
                    for (orow, gg) in ga.chunks_mut(cols).zip(g) {
                        orow.iter_mut().for_each(|o| *o += gg);
                    }
                }
            }
            Op::GatherRows(a, idx) => {
                let cols = dims_of(nodes, *a).1;
                if let Some(ga) = slot(nodes, grads, *a) {
                    for (k, &r) in idx.iter().enumerate() {
                        add_into(&mut ga[r * cols..(r + 1) * cols], &g[k * cols..(k + 1) * cols]);
                    }
                }
            }
            Op::BlockMatMulNt { a, b, block } => {
                // S_b = A_b B_b^T with A_b, B_b of shape [block, d]
                let d = dims_of(nodes, *a).1;
                let s = *block;
                let blocks = dims_of(nodes, *a).0 / s;
                if nodes[a.0].requires_grad {
                    let bv = &nodes[b.0].value;
                    let ga = slot(nodes, grads, *a).expect("requires grad");
                    for bi in 0..blocks {
                        let off = bi * s;
                        // dA_b = G_b B_b
                        gemm(s, s, d, &g[off * s..], (s, 1), &bv[off * d..], (d, 1), &mut ga[off * d..(off + s) * d], 1.0);
                    }
                }
                if nodes[b.0].requires_grad {
                    let av = &nodes[a.0].value;
                    let gb = slot(nodes, grads, *b).expect("requires grad");
                    for bi in 0..blocks {
                        let off = bi * s;
                        // dB_b = G_b^T A_b
                        gemm(s, s, d, &g[off * s..], (1, s), &av[off * d..], (d, 1), &mut gb[off * d..(off + s) * d], 1.0);
                    }
                }
            }
            Op::BlockMatMul { a, b, block } => {
                // C_b = A_b B_b with A_b [block, block], B_b [block, d]
                let d = dims_of(nodes, *b).1;
                let s = *block;
                let blocks = dims_of(nodes, *a).0 / s;
                if nodes[a.0].requires_grad {
                    let bv = &nodes[b.0].value;
                    let ga = slot(nodes, grads, *a).expect("requires grad");
                    for bi in 0..blocks {
                        let off = bi * s;
                        // dA_b = G_b B_b^T
                        gemm(s, d, s, &g[off * d..], (d, 1), &bv[off * d..], (1, d), &mut ga[off * s..(off + s) * s], 1.0);
                    }
                }
                if nodes[b.0].requires_grad {
                    let av = &nodes[a.0].value;
                    let gb = slot(nodes, grads, *b).expect("requires grad");
                    for bi in 0..blocks {
                        let off = bi * s;
                        // dB_b = A_b^T G_b
                        gemm(s, s, d, &av[off * s..], (1, s), &g[off * d..], (d, 1), &mut gb[off * d..(off + s) * d], 1.0);
                    }
                }
            }
        }
        Ok(())
    }
}

fn slot<'a>(nodes: &[Node], grads: &'a mut [Option<Vec<f64>>], v: Var) -> Option<&'a mut Vec<f64>> {
    let node = &nodes[v.0];
    if !node.requires_grad {
        return None;
    }
    let n = node.value.len();
    Some(grads[v.0].get_or_insert_with(|| vec![0.0; n]))
}

fn dims_of(nodes: &[Node], v: Var) -> (usize, usize) {
    dims2(&nodes[v.0].shape)
}

/// Elementwise rule `dx += g * f(s)` where `s` is either the op's input or its output.
fn unary(nodes: &[Node], grads: &mut [Option<Vec<f64>>], a: Var, saved: &[f64], g: &[f64], f: impl Fn(f64) -> f64) {
    if let Some(ga) = slot(nodes, grads, a) {
        for ((o, gg), s) in ga.iter_mut().zip(g).zip(saved) {
            *o += gg * f(*s);
        }
    }
}

fn add_into(dst: &mut [f64], src: &[f64]) {
    dst.iter_mut().zip(src).for_each(|(o, s)| *o += s);
}
