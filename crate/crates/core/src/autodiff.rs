//! Reverse-mode automatic differentiation over a linear tape.
//!
//! Values are recorded in evaluation order, so node ids are already a
//! topological order and the backward pass is a single reverse sweep.
//! Leaves created with [`Tape::constant`] do not require gradients; any node
//! whose inputs are all constants is skipped during backward.

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn id(self) -> usize {
        self.0
    }
}

/// Differentiable primitive operations.
#[derive(Clone, Debug, PartialEq)]
pub enum Primitive {
    /// `[m,k] x [k,n] -> [m,n]`
    MatMul,
    Add,
    Sub,
    Mul,
    /// `[m,n] + [n]`, the only broadcasting op.
    AddBias,
    Relu,
    Tanh,
    Sigmoid,
    /// Row-wise over the last axis.
    Softmax,
    /// Row-wise over the last axis.
    LogSoftmax,
    /// `mean((a - b)^2)` as a scalar.
    Mse,
    /// Mean over rows of `-sum_c t_c log_softmax(l)_c`; inputs are logits and targets.
    CrossEntropy,
    Sum,
    Scale(f64),
    /// Concatenate along the last axis.
    Concat,
    /// Columns `start..end` of the last axis.
    Slice { start: usize, end: usize },
}

impl Primitive {
    pub fn name(&self) -> &'static str {
        match self {
            Primitive::MatMul => "matmul",
            Primitive::Add => "add",
            Primitive::Sub => "sub",
            Primitive::Mul => "mul",
            Primitive::AddBias => "add_bias",
            Primitive::Relu => "relu",
            Primitive::Tanh => "tanh",
            Primitive::Sigmoid => "sigmoid",
            Primitive::Softmax => "softmax",
            Primitive::LogSoftmax => "log_softmax",
            Primitive::Mse => "mse",
            Primitive::CrossEntropy => "cross_entropy",
            Primitive::Sum => "sum",
            Primitive::Scale(_) => "scale",
            Primitive::Concat => "concat",
            Primitive::Slice { .. } => "slice",
        }
    }

    fn arity(&self) -> usize {
        match self {
            Primitive::MatMul
            | Primitive::Add
            | Primitive::Sub
            | Primitive::Mul
            | Primitive::AddBias
            | Primitive::Mse
            | Primitive::CrossEntropy
            | Primitive::Concat => 2,
            _ => 1,
        }
    }
}

#[derive(Debug)]
struct Node {
    op: Option<Primitive>,
    inputs: Vec<usize>,
    value: Tensor,
    requires_grad: bool,
}

#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// Gradients from one backward pass, indexed by [`Var`].
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Vec<f64>>>,
    shapes: Vec<Vec<usize>>,
}

impl Gradients {
    /// Gradient for `v`; untouched nodes yield zeros of the node's shape.
    pub fn get(&self, v: Var) -> Tensor {
        let shape = self.shapes[v.0].clone();
        match &self.grads[v.0] {
            Some(g) => Tensor::from_parts(shape, g.clone()),
            None => Tensor::zeros(&shape),
        }
    }

    pub fn take(&mut self, v: Var) -> Tensor {
        let shape = self.shapes[v.0].clone();
        match self.grads[v.0].take() {
            Some(g) => Tensor::from_parts(shape, g),
            None => Tensor::zeros(&shape),
        }
    }
}

impl Tape {
    pub fn new() -> Self {
        Tape::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// A leaf whose gradient is wanted.
    pub fn leaf(&mut self, t: Tensor) -> Var {
        self.push(None, vec![], t, true)
    }

    /// A leaf that never needs a gradient (frozen parameters, data, targets).
    pub fn constant(&mut self, t: Tensor) -> Var {
        self.push(None, vec![], t, false)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    fn push(&mut self, op: Option<Primitive>, inputs: Vec<usize>, value: Tensor, requires_grad: bool) -> Var {
        self.nodes.push(Node { op, inputs, value, requires_grad });
        Var(self.nodes.len() - 1)
    }

    /// Evaluates `op` on `inputs` and records the result.
    pub fn apply(&mut self, op: Primitive, inputs: &[Var]) -> Result<Var> {
        if inputs.len() != op.arity() {
            return Err(Error::InvalidArgument(format!(
                "{} takes {} inputs, got {}",
                op.name(),
                op.arity(),
                inputs.len()
            )));
        }
        let vals: Vec<&Tensor> = inputs.iter().map(|v| &self.nodes[v.0].value).collect();
        let value = forward(&op, &vals)?;
        let requires_grad = inputs.iter().any(|v| self.nodes[v.0].requires_grad);
        Ok(self.push(Some(op), inputs.iter().map(|v| v.0).collect(), value, requires_grad))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.apply(Primitive::MatMul, &[a, b])
    }
    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.apply(Primitive::Add, &[a, b])
    }
    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.apply(Primitive::Sub, &[a, b])
    }
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.apply(Primitive::Mul, &[a, b])
    }
    pub fn add_bias(&mut self, a: Var, bias: Var) -> Result<Var> {
        self.apply(Primitive::AddBias, &[a, bias])
    }
    pub fn relu(&mut self, a: Var) -> Result<Var> {
        self.apply(Primitive::Relu, &[a])
    }
    pub fn tanh(&mut self, a: Var) -> Result<Var> {
        self.apply(Primitive::Tanh, &[a])
    }
    pub fn sigmoid(&mut self, a: Var) -> Result<Var> {
        self.apply(Primitive::Sigmoid, &[a])
    }
    pub fn softmax(&mut self, a: Var) -> Result<Var> {
        self.apply(Primitive::Softmax, &[a])
    }
    pub fn log_softmax(&mut self, a: Var) -> Result<Var> {
        self.apply(Primitive::LogSoftmax, &[a])
    }
    pub fn mse(&mut self, a: Var, b: Var) -> Result<Var> {
        self.apply(Primitive::Mse, &[a, b])
    }
    pub fn cross_entropy(&mut self, logits: Var, targets: Var) -> Result<Var> {
        self.apply(Primitive::CrossEntropy, &[logits, targets])
    }
    pub fn sum(&mut self, a: Var) -> Result<Var> {
        self.apply(Primitive::Sum, &[a])
    }
    pub fn scale(&mut self, a: Var, k: f64) -> Result<Var> {
        self.apply(Primitive::Scale(k), &[a])
    }
    pub fn concat(&mut self, a: Var, b: Var) -> Result<Var> {
        self.apply(Primitive::Concat, &[a, b])
    }
    pub fn slice(&mut self, a: Var, start: usize, end: usize) -> Result<Var> {
        self.apply(Primitive::Slice { start, end }, &[a])
    }

    /// Reverse sweep from the scalar `output`.
    pub fn backward(&self, output: Var) -> Result<Gradients> {
        let out = &self.nodes[output.0];
        if !out.value.is_scalar() {
            return Err(Error::NonScalarOutput(out.value.shape().to_vec()));
        }
        let n = output.0 + 1;
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; self.nodes.len()];
        grads[output.0] = Some(vec![1.0]);
        for id in (0..n).rev() {
            let node = &self.nodes[id];
            let Some(op) = &node.op else { continue };
            if !node.requires_grad {
                continue;
            }
            let Some(g) = grads[id].take() else { continue };
            let inputs: Vec<&Tensor> = node.inputs.iter().map(|&i| &self.nodes[i].value).collect();
            let wanted: Vec<bool> = node.inputs.iter().map(|&i| self.nodes[i].requires_grad).collect();
            let local = backward_op(op, &inputs, &node.value, &g, &wanted);
            for (slot, (&input, lg)) in node.inputs.iter().zip(local).enumerate() {
                let Some(lg) = lg else { continue };
                debug_assert!(wanted[slot]);
                match &mut grads[input] {
                    Some(acc) => acc.iter_mut().zip(&lg).for_each(|(a, b)| *a += b),
                    empty => *empty = Some(lg),
                }
            }
            grads[id] = Some(g);
        }
        let shapes = self.nodes.iter().map(|n| n.value.shape().to_vec()).collect();
        Ok(Gradients { grads, shapes })
    }
}

fn mat_dims(op: &'static str, t: &Tensor) -> Result<(usize, usize)> {
    if t.rank() != 2 {
        return Err(Error::shape(op, &[t.shape()]));
    }
    Ok((t.shape()[0], t.shape()[1]))
}

/// `c (+)= op(a) * op(b)` where `op` optionally transposes a row-major operand.
/// `a` is `[m,k]` after its transpose, `b` is `[k,n]` after its transpose.
#[allow(clippy::too_many_arguments)]
pub(crate) fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    a_trans: bool,
    b: &[f64],
    b_trans: bool,
    c: &mut [f64],
    accumulate: bool,
) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), k * n);
    debug_assert_eq!(c.len(), m * n);
    let (rsa, csa) = if a_trans { (1, m as isize) } else { (k as isize, 1) };
    let (rsb, csb) = if b_trans { (1, k as isize) } else { (n as isize, 1) };
    if m == 1 {
        // A single row skips dgemm's packing of `b`, which dominates small batches.
        if !accumulate {
            c.fill(0.0);
        }
        if b_trans {
            for (j, cj) in c.iter_mut().enumerate() {
                *cj += a.iter().zip(&b[j * k..(j + 1) * k]).map(|(x, y)| x * y).sum::<f64>();
            }
        } else {
            for (&ai, row) in a.iter().zip(b.chunks_exact(n)) {
                c.iter_mut().zip(row).for_each(|(cj, &bj)| *cj += ai * bj);
            }
        }
        return;
    }
    let beta = if accumulate { 1.0 } else { 0.0 };
    // SAFETY: the pointers cover exactly m*k, k*n and m*n elements with the
    // given strides, checked by the debug assertions above and the callers'
    // shape validation.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa,
            csa,
            b.as_ptr(),
            rsb,
            csb,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

fn row_log_softmax(row: &[f64], out: &mut [f64]) {
    let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
    for (o, v) in out.iter_mut().zip(row) {
        *o = v - lse;
    }
}

fn forward(op: &Primitive, x: &[&Tensor]) -> Result<Tensor> {
    let name = op.name();
    match op {
        Primitive::MatMul => {
            let (m, k) = mat_dims(name, x[0])?;
            let (k2, n) = mat_dims(name, x[1])?;
            if k != k2 {
                return Err(Error::shape(name, &[x[0].shape(), x[1].shape()]));
            }
            let mut c = vec![0.0; m * n];
            gemm(m, k, n, x[0].data(), false, x[1].data(), false, &mut c, false);
            Tensor::from_op(name, vec![m, n], c)
        }
        Primitive::Add => x[0].zip_map(x[1], "add", |a, b| a + b),
        Primitive::Sub => x[0].zip_map(x[1], "sub", |a, b| a - b),
        Primitive::Mul => x[0].zip_map(x[1], "mul", |a, b| a * b),
        Primitive::AddBias => {
            let (m, n) = mat_dims(name, x[0])?;
            if x[1].shape() != [n] {
                return Err(Error::shape(name, &[x[0].shape(), x[1].shape()]));
            }
            let bias = x[1].data();
            let mut out = x[0].data().to_vec();
            for r in 0..m {
                out[r * n..(r + 1) * n].iter_mut().zip(bias).for_each(|(o, b)| *o += b);
            }
            Tensor::from_op(name, vec![m, n], out)
        }
        Primitive::Relu => x[0].map(name, |v| v.max(0.0)),
        Primitive::Tanh => x[0].map(name, f64::tanh),
        Primitive::Sigmoid => x[0].map(name, sigmoid),
        Primitive::Softmax | Primitive::LogSoftmax => {
            let (rows, cols) = x[0].as_matrix_dims();
            let mut out = vec![0.0; rows * cols];
            for r in 0..rows {
                row_log_softmax(&x[0].data()[r * cols..(r + 1) * cols], &mut out[r * cols..(r + 1) * cols]);
            }
            if matches!(op, Primitive::Softmax) {
                out.iter_mut().for_each(|v| *v = v.exp());
            }
            Tensor::from_op(name, x[0].shape().to_vec(), out)
        }
        Primitive::Mse => {
            if x[0].shape() != x[1].shape() {
                return Err(Error::shape(name, &[x[0].shape(), x[1].shape()]));
            }
            let n = x[0].numel() as f64;
            let s: f64 = x[0].data().iter().zip(x[1].data()).map(|(a, b)| (a - b) * (a - b)).sum();
            Tensor::from_op(name, vec![1], vec![s / n])
        }
        Primitive::CrossEntropy => {
            if x[0].shape() != x[1].shape() {
                return Err(Error::shape(name, &[x[0].shape(), x[1].shape()]));
            }
            let (rows, cols) = x[0].as_matrix_dims();
            let mut ls = vec![0.0; cols];
            let mut total = 0.0;
            for r in 0..rows {
                row_log_softmax(&x[0].data()[r * cols..(r + 1) * cols], &mut ls);
                total -= ls.iter().zip(&x[1].data()[r * cols..(r + 1) * cols]).map(|(l, t)| l * t).sum::<f64>();
            }
            Tensor::from_op(name, vec![1], vec![total / rows as f64])
        }
        Primitive::Sum => Tensor::from_op(name, vec![1], vec![x[0].sum()]),
        Primitive::Scale(k) => x[0].map(name, |v| v * k),
        Primitive::Concat => {
            let (ra, ca) = x[0].as_matrix_dims();
            let (rb, cb) = x[1].as_matrix_dims();
            let lead_a = &x[0].shape()[..x[0].rank() - 1];
            let lead_b = &x[1].shape()[..x[1].rank() - 1];
            if ra != rb || lead_a != lead_b {
                return Err(Error::shape(name, &[x[0].shape(), x[1].shape()]));
            }
            let mut out = Vec::with_capacity(ra * (ca + cb));
            for r in 0..ra {
                out.extend_from_slice(&x[0].data()[r * ca..(r + 1) * ca]);
                out.extend_from_slice(&x[1].data()[r * cb..(r + 1) * cb]);
            }
            let mut shape = lead_a.to_vec();
            shape.push(ca + cb);
            Tensor::from_op(name, shape, out)
        }
        Primitive::Slice { start, end } => {
            let (rows, cols) = x[0].as_matrix_dims();
            if start >= end || *end > cols {
                return Err(Error::InvalidArgument(format!(
                    "slice {start}..{end} out of range for shape {:?}",
                    x[0].shape()
                )));
            }
            let w = end - start;
            let mut out = Vec::with_capacity(rows * w);
            for r in 0..rows {
                out.extend_from_slice(&x[0].data()[r * cols + start..r * cols + end]);
            }
            let mut shape = x[0].shape().to_vec();
            *shape.last_mut().unwrap() = w;
            Tensor::from_op(name, shape, out)
        }
    }
}

pub(crate) fn sigmoid(v: f64) -> f64 {
    if v >= 0.0 {
        1.0 / (1.0 + (-v).exp())
    } else {
        let e = v.exp();
        e / (1.0 + e)
    }
}

/// Local vector-Jacobian products for one node. Returns one entry per input,
/// `None` where the input does not require a gradient.
fn backward_op(op: &Primitive, x: &[&Tensor], y: &Tensor, g: &[f64], wanted: &[bool]) -> Vec<Option<Vec<f64>>> {
    let want = |i: usize| wanted[i];
    let elementwise = |f: &dyn Fn(usize) -> f64| -> Vec<f64> { (0..g.len()).map(f).collect() };
    match op {
        Primitive::MatMul => {
            let (m, k) = (x[0].shape()[0], x[0].shape()[1]);
            let n = x[1].shape()[1];
            let ga = want(0).then(|| {
                let mut ga = vec![0.0; m * k];
                gemm(m, n, k, g, false, x[1].data(), true, &mut ga, false);
                ga
            });
            let gb = want(1).then(|| {
                let mut gb = vec![0.0; k * n];
                gemm(k, m, n, x[0].data(), true, g, false, &mut gb, false);
                gb
            });
            vec![ga, gb]
        }
        Primitive::Add => vec![want(0).then(|| g.to_vec()), want(1).then(|| g.to_vec())],
        Primitive::Sub => vec![want(0).then(|| g.to_vec()), want(1).then(|| g.iter().map(|v| -v).collect())],
        Primitive::Mul => {
            let (a, b) = (x[0].data(), x[1].data());
            vec![want(0).then(|| elementwise(&|i| g[i] * b[i])), want(1).then(|| elementwise(&|i| g[i] * a[i]))]
        }
        Primitive::AddBias => {
            let n = x[1].numel();
            let gb = want(1).then(|| {
                let mut gb = vec![0.0; n];
                for row in g.chunks(n) {
                    gb.iter_mut().zip(row).for_each(|(a, b)| *a += b);
                }
                gb
            });
            vec![want(0).then(|| g.to_vec()), gb]
        }
        Primitive::Relu => {
            let a = x[0].data();
            vec![Some(elementwise(&|i| if a[i] > 0.0 { g[i] } else { 0.0 }))]
        }
        Primitive::Tanh => {
            let y = y.data();
            vec![Some(elementwise(&|i| g[i] * (1.0 - y[i] * y[i])))]
        }
        Primitive::Sigmoid => {
            let y = y.data();
            vec![Some(elementwise(&|i| g[i] * y[i] * (1.0 - y[i])))]
        }
        Primitive::Softmax => {
            let (rows, cols) = y.as_matrix_dims();
            let s = y.data();
            let mut out = vec![0.0; g.len()];
            for r in 0..rows {
                let span = r * cols..(r + 1) * cols;
                let dot: f64 = g[span.clone()].iter().zip(&s[span.clone()]).map(|(a, b)| a * b).sum();
                for i in span {
                    out[i] = s[i] * (g[i] - dot);
                }
            }
            vec![Some(out)]
        }
        Primitive::LogSoftmax => {
            let (rows, cols) = y.as_matrix_dims();
            let ly = y.data();
            let mut out = vec![0.0; g.len()];
            for r in 0..rows {
                let span = r * cols..(r + 1) * cols;
                let gsum: f64 = g[span.clone()].iter().sum();
                for i in span {
                    out[i] = g[i] - ly[i].exp() * gsum;
                }
            }
            vec![Some(out)]
        }
        Primitive::Mse => {
            let (a, b) = (x[0].data(), x[1].data());
            let k = 2.0 * g[0] / a.len() as f64;
            let diff: Vec<f64> = a.iter().zip(b).map(|(a, b)| k * (a - b)).collect();
            let gb = want(1).then(|| diff.iter().map(|v| -v).collect());
            vec![want(0).then_some(diff), gb]
        }
        Primitive::CrossEntropy => {
            let (rows, cols) = x[0].as_matrix_dims();
            let (l, t) = (x[0].data(), x[1].data());
            let k = g[0] / rows as f64;
            let mut gl = vec![0.0; l.len()];
            let mut gt = vec![0.0; l.len()];
            let mut ls = vec![0.0; cols];
            for r in 0..rows {
                let span = r * cols..(r + 1) * cols;
                row_log_softmax(&l[span.clone()], &mut ls);
                let tsum: f64 = t[span.clone()].iter().sum();
                for (c, i) in span.enumerate() {
                    gl[i] = k * (ls[c].exp() * tsum - t[i]);
                    gt[i] = -k * ls[c];
                }
            }
            vec![want(0).then_some(gl), want(1).then_some(gt)]
        }
        Primitive::Sum => vec![Some(vec![g[0]; x[0].numel()])],
        Primitive::Scale(k) => vec![Some(g.iter().map(|v| v * k).collect())],
        Primitive::Concat => {
            let (rows, ca) = x[0].as_matrix_dims();
            let cb = x[1].as_matrix_dims().1;
            let w = ca + cb;
            let ga = want(0).then(|| (0..rows).flat_map(|r| g[r * w..r * w + ca].iter().copied()).collect());
            let gb = want(1).then(|| (0..rows).flat_map(|r| g[r * w + ca..(r + 1) * w].iter().copied()).collect());
            vec![ga, gb]
        }
        Primitive::Slice { start, end } => {
            let (rows, cols) = x[0].as_matrix_dims();
            let w = end - start;
            let mut out = vec![0.0; rows * cols];
            for r in 0..rows {
                out[r * cols + start..r * cols + end].copy_from_slice(&g[r * w..(r + 1) * w]);
            }
            vec![Some(out)]
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(shape: &[usize], data: &[f64]) -> Tensor {
        Tensor::new(shape.to_vec(), data.to_vec()).unwrap()
    }

    #[test]
    fn matmul_identity() {
        let mut tape = Tape::new();
        let i = tape.constant(Tensor::eye(2));
        let a = tape.constant(t(&[2, 2], &[1.5, -2.0, 3.0, 0.25]));
        let y = tape.matmul(i, a).unwrap();
        assert_eq!(tape.value(y), tape.value(a));
    }

    #[test]
    fn log_softmax_symmetric() {
        let mut tape = Tape::new();
        let a = tape.constant(t(&[2], &[0.0, 0.0]));
        let y = tape.log_softmax(a).unwrap();
        for &v in tape.value(y).data() {
            assert!((v + std::f64::consts::LN_2).abs() < 1e-15);
        }
    }

    #[test]
    fn sigmoid_at_zero() {
        let mut tape = Tape::new();
        let a = tape.constant(t(&[1], &[0.0]));
        let y = tape.sigmoid(a).unwrap();
        assert_eq!(tape.value(y).item(), 0.5);
    }

    #[test]
    fn square_derivative() {
        let mut tape = Tape::new();
        let x = tape.leaf(t(&[1], &[3.0]));
        let y = tape.mul(x, x).unwrap();
        let grads = tape.backward(y).unwrap();
        assert_eq!(grads.get(x).item(), 6.0);
    }

    #[test]
    fn log_softmax_jacobian() {
        let l = [0.3, -1.2, 2.0];
        let s: Vec<f64> = {
            let z: f64 = l.iter().map(|v: &f64| v.exp()).sum();
            l.iter().map(|v| v.exp() / z).collect()
        };
        for i in 0..3 {
            let mut tape = Tape::new();
            let x = tape.leaf(t(&[3], &l));
            let y = tape.log_softmax(x).unwrap();
            let yi = tape.slice(y, i, i + 1).unwrap();
            let g = tape.backward(yi).unwrap().get(x);
            for j in 0..3 {
                let expected = if i == j { 1.0 } else { 0.0 } - s[j];
                assert!((g.data()[j] - expected).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn non_scalar_backward_is_error() {
        let mut tape = Tape::new();
        let x = tape.leaf(t(&[2], &[1.0, 2.0]));
        let y = tape.relu(x).unwrap();
        assert!(matches!(tape.backward(y), Err(Error::NonScalarOutput(_))));
    }

    #[test]
    fn untouched_leaf_gets_zero() {
        let mut tape = Tape::new();
        let x = tape.leaf(t(&[2], &[1.0, 2.0]));
        let unused = tape.leaf(t(&[3], &[1.0, 2.0, 3.0]));
        let y = tape.sum(x).unwrap();
        let g = tape.backward(y).unwrap();
        assert_eq!(g.get(unused).data(), &[0.0, 0.0, 0.0]);
    }

    #[test]
    fn shape_errors_name_op() {
        let mut tape = Tape::new();
        let a = tape.constant(Tensor::zeros(&[2, 3]));
        let b = tape.constant(Tensor::zeros(&[2, 3]));
        let err = tape.matmul(a, b).unwrap_err().to_string();
        assert!(err.contains("matmul") && err.contains("[2, 3]"), "{err}");
        let c = tape.constant(Tensor::zeros(&[4]));
        assert!(tape.add_bias(a, c).unwrap_err().to_string().contains("add_bias"));
        assert!(tape.slice(a, 2, 4).is_err());
        assert!(tape.apply(Primitive::Add, &[a]).is_err());
    }

    #[test]
    fn softmax_sums_to_one() {
        let mut tape = Tape::new();
        let a = tape.constant(t(&[2, 4], &[1.0, 2.0, 3.0, -50.0, 700.0, 699.0, 0.0, 1.0]));
        let s = tape.softmax(a).unwrap();
        let ls = tape.log_softmax(a).unwrap();
        for r in 0..2 {
            let row = tape.value(s).row(r);
            assert!((row.sum() - 1.0).abs() < 1e-12);
            let lrow = tape.value(ls).row(r);
            for (p, lp) in row.data().iter().zip(lrow.data()) {
                if *p > 0.0 {
                    assert!((p.ln() - lp).abs() < 1e-10);
                }
            }
        }
    }
}
