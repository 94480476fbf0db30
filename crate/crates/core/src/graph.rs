//! Reverse-mode differentiation over dense `f64` arrays.
//!
//! A [`Graph`] is an append-only tape. Every op pushes a node holding its
//! output value and the ids of its inputs, so inputs always have smaller ids
//! than their consumers and the reverse sweep is a single pass from the loss
//! back to id 0.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::params::{Gradients, ParamId, ParameterStore};
use crate::{Error, Result, Tensor};

/// Handle to a node in a [`Graph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn id(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone, Copy)]
enum Broadcast {
    Same,
    LeftScalar,
    RightScalar,
}

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    Param(ParamId),
    MatMul(Var, Var),
    Add(Var, Var, Broadcast),
    Sub(Var, Var, Broadcast),
    Mul(Var, Var, Broadcast),
    AddRow(Var, Var),
    Scale(Var, f64),
    Shift(Var),
    Neg(Var),
    Tanh(Var),
    Sigmoid(Var),
    Exp(Var),
    Ln(Var),
    Relu(Var),
    Abs(Var),
    Clamp(Var, f64, f64),
    Sum(Var),
    Mean(Var),
    ConcatCols(Var, Var),
    SliceCols(Var, usize),
    SliceRows(Var, usize),
    ZeroDiag(Var),
    BceWithLogits(Var, Vec<f64>),
}

#[derive(Debug, Clone)]
struct Node {
    op: Op,
    value: Tensor,
    requires_grad: bool,
}

/// Append-only computation tape.
#[derive(Debug, Clone, Default)]
pub struct Graph {
    nodes: Vec<Node>,
}

impl Graph {
    pub fn new() -> Self {
        Graph { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    fn push_raw(&mut self, op: Op, value: Tensor, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            op,
            value,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn push(&mut self, name: &'static str, op: Op, value: Tensor, inputs: &[Var]) -> Result<Var> {
        if !value.is_finite() {
            return Err(Error::NonFinite { op: name });
        }
        let requires_grad = inputs.iter().any(|v| self.nodes[v.0].requires_grad);
        Ok(self.push_raw(op, value, requires_grad))
    }

    /// A leaf that never receives a gradient.
    pub fn constant(&mut self, value: Tensor) -> Var {
        self.push_raw(Op::Leaf, value, false)
    }

    /// A free leaf whose gradient is tracked but which is not a stored parameter.
    pub fn variable(&mut self, value: Tensor) -> Var {
        self.push_raw(Op::Leaf, value, true)
    }

    /// Copies parameter `id` out of `store` as a differentiable leaf.
    pub fn param(&mut self, store: &ParameterStore, id: ParamId) -> Var {
        let value = store.tensor(id).clone();
        self.push_raw(Op::Param(id), value, true)
    }

    fn broadcast(&self, name: &'static str, a: Var, b: Var) -> Result<Broadcast> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.shape() == tb.shape() {
            Ok(Broadcast::Same)
        } else if ta.numel() == 1 {
            Ok(Broadcast::LeftScalar)
        } else if tb.numel() == 1 {
            Ok(Broadcast::RightScalar)
        } else {
            Err(mismatch(name, ta, tb))
        }
    }

    fn binary(
        &mut self,
        name: &'static str,
        a: Var,
        b: Var,
        f: impl Fn(f64, f64) -> f64,
        op: impl FnOnce(Broadcast) -> Op,
    ) -> Result<Var> {
        let mode = self.broadcast(name, a, b)?;
        let (ta, tb) = (self.value(a), self.value(b));
        let out = match mode {
            Broadcast::Same => {
                let data = zip_map(ta.data(), tb.data(), &f);
                Tensor::new(ta.shape().to_vec(), data)?
            }
            Broadcast::LeftScalar => {
                let s = ta.item();
                let data = tb.data().iter().map(|&y| f(s, y)).collect();
                Tensor::new(tb.shape().to_vec(), data)?
            }
            Broadcast::RightScalar => {
                let s = tb.item();
                let data = ta.data().iter().map(|&x| f(x, s)).collect();
                Tensor::new(ta.shape().to_vec(), data)?
            }
        };
        self.push(name, op(mode), out, &[a, b])
    }

    fn unary(&mut self, name: &'static str, a: Var, f: impl Fn(f64) -> f64, op: Op) -> Result<Var> {
        let ta = self.value(a);
        let data = ta.data().iter().map(|&x| f(x)).collect();
        let out = Tensor::new(ta.shape().to_vec(), data)?;
        self.push(name, op, out, &[a])
    }

    /// Matrix product of two 2-D operands.
    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.shape().len() != 2 || tb.shape().len() != 2 || ta.shape()[1] != tb.shape()[0] {
            return Err(mismatch("matmul", ta, tb));
        }
        let (m, k) = ta.dims2();
        let n = tb.shape()[1];
        let data = matmul_raw(ta.data(), tb.data(), m, k, n);
        let out = Tensor::new(vec![m, n], data)?;
        self.push("matmul", Op::MatMul(a, b), out, &[a, b])
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary("add", a, b, |x, y| x + y, |m| Op::Add(a, b, m))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary("sub", a, b, |x, y| x - y, |m| Op::Sub(a, b, m))
    }

    /// Elementwise (Hadamard) product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary("mul", a, b, |x, y| x * y, |m| Op::Mul(a, b, m))
    }

    /// Adds a bias vector of length `cols` to every row of a `rows x cols` matrix.
    pub fn add_row(&mut self, a: Var, bias: Var) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(bias));
        let (rows, cols) = ta.dims2();
        if ta.shape().len() != 2 || tb.numel() != cols {
            return Err(mismatch("add_row", ta, tb));
        }
        let mut data = ta.data().to_vec();
        for r in 0..rows {
            for (x, &bv) in data[r * cols..(r + 1) * cols].iter_mut().zip(tb.data()) {
                *x += bv;
            }
        }
        let out = Tensor::new(vec![rows, cols], data)?;
        self.push("add_row", Op::AddRow(a, bias), out, &[a, bias])
    }

    /// `a * factor` for a constant factor.
    pub fn scale(&mut self, a: Var, factor: f64) -> Result<Var> {
        self.unary("scale", a, |x| x * factor, Op::Scale(a, factor))
    }

    /// `a + offset` for a constant offset.
    pub fn shift(&mut self, a: Var, offset: f64) -> Result<Var> {
        self.unary("shift", a, |x| x + offset, Op::Shift(a))
    }

    pub fn neg(&mut self, a: Var) -> Result<Var> {
        self.unary("neg", a, |x| -x, Op::Neg(a))
    }

    pub fn tanh(&mut self, a: Var) -> Result<Var> {
        self.unary("tanh", a, libm::tanh, Op::Tanh(a))
    }

    pub fn sigmoid(&mut self, a: Var) -> Result<Var> {
        self.unary("sigmoid", a, sigmoid, Op::Sigmoid(a))
    }

    pub fn exp(&mut self, a: Var) -> Result<Var> {
        self.unary("exp", a, libm::exp, Op::Exp(a))
    }

    /// Natural logarithm; non-positive inputs yield a [`Error::NonFinite`].
    pub fn ln(&mut self, a: Var) -> Result<Var> {
        self.unary("ln", a, libm::log, Op::Ln(a))
    }

    /// `max(0, a)`.
    pub fn relu(&mut self, a: Var) -> Result<Var> {
        self.unary("relu", a, |x| if x > 0.0 { x } else { 0.0 }, Op::Relu(a))
    }

    pub fn abs(&mut self, a: Var) -> Result<Var> {
        self.unary("abs", a, libm::fabs, Op::Abs(a))
    }

    /// Clamps into `[lo, hi]`; the gradient is zero outside the interval.
    pub fn clamp(&mut self, a: Var, lo: f64, hi: f64) -> Result<Var> {
        self.unary("clamp", a, |x| x.clamp(lo, hi), Op::Clamp(a, lo, hi))
    }

    pub fn sum(&mut self, a: Var) -> Result<Var> {
        let s = self.value(a).data().iter().sum();
        self.push("sum", Op::Sum(a), Tensor::scalar(s), &[a])
    }

    pub fn mean(&mut self, a: Var) -> Result<Var> {
        let t = self.value(a);
        let s = t.data().iter().sum::<f64>() / t.numel() as f64;
        self.push("mean", Op::Mean(a), Tensor::scalar(s), &[a])
    }

    /// Column-wise concatenation `[a | b]` of two matrices with equal row counts.
    pub fn concat_cols(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(b));
        let ((ra, ca), (rb, cb)) = (ta.dims2(), tb.dims2());
        if ta.shape().len() != 2 || tb.shape().len() != 2 || ra != rb {
            return Err(mismatch("concat_cols", ta, tb));
        }
        let mut data = Vec::with_capacity(ra * (ca + cb));
        for r in 0..ra {
            data.extend_from_slice(&ta.data()[r * ca..(r + 1) * ca]);
            data.extend_from_slice(&tb.data()[r * cb..(r + 1) * cb]);
        }
        let out = Tensor::new(vec![ra, ca + cb], data)?;
        self.push("concat_cols", Op::ConcatCols(a, b), out, &[a, b])
    }

    /// Columns `start..start + len` of a matrix.
    pub fn slice_cols(&mut self, a: Var, start: usize, len: usize) -> Result<Var> {
        let ta = self.value(a);
        let (rows, cols) = ta.dims2();
        if ta.shape().len() != 2 || len == 0 || start + len > cols {
            return Err(Error::ShapeMismatch {
                op: "slice_cols",
                left: ta.shape().to_vec(),
                right: vec![start, len],
            });
        }
        let mut data = Vec::with_capacity(rows * len);
        for r in 0..rows {
            data.extend_from_slice(&ta.data()[r * cols + start..r * cols + start + len]);
        }
        let out = Tensor::new(vec![rows, len], data)?;
        self.push("slice_cols", Op::SliceCols(a, start), out, &[a])
    }

    /// Rows `start..start + len` of a matrix.
    pub fn slice_rows(&mut self, a: Var, start: usize, len: usize) -> Result<Var> {
        let ta = self.value(a);
        let (rows, cols) = ta.dims2();
        if ta.shape().len() != 2 || len == 0 || start + len > rows {
            return Err(Error::ShapeMismatch {
                op: "slice_rows",
                left: ta.shape().to_vec(),
                right: vec![start, len],
            });
        }
        let data = ta.data()[start * cols..(start + len) * cols].to_vec();
        let out = Tensor::new(vec![len, cols], data)?;
        self.push("slice_rows", Op::SliceRows(a, start), out, &[a])
    }

    /// Multiplies a square matrix by the constant mask `1 - I`.
    pub fn zero_diag(&mut self, a: Var) -> Result<Var> {
        let ta = self.value(a);
        let (r, c) = ta.dims2();
        if ta.shape().len() != 2 || r != c {
            return Err(mismatch("zero_diag", ta, ta));
        }
        let mut data = ta.data().to_vec();
        for i in 0..r {
            data[i * c + i] = 0.0;
        }
        let out = Tensor::new(vec![r, c], data)?;
        self.push("zero_diag", Op::ZeroDiag(a), out, &[a])
    }

    /// Inverted dropout: each entry is zeroed with probability `rate` and
    /// survivors are scaled by `1 / (1 - rate)`. Identity when `rate == 0`.
    pub fn dropout<R: Rng + ?Sized>(&mut self, a: Var, rate: f64, rng: &mut R) -> Result<Var> {
        if rate <= 0.0 {
            return Ok(a);
        }
        let keep = 1.0 - rate;
        let shape = self.value(a).shape().to_vec();
        let n = self.value(a).numel();
        let mask: Vec<f64> = (0..n)
            .map(|_| if rng.random::<f64>() < keep { 1.0 / keep } else { 0.0 })
            .collect();
        let mask = self.constant(Tensor::new(shape, mask)?);
        self.mul(a, mask)
    }

    /// Mean binary cross-entropy computed from logits in the overflow-free
    /// form `max(l, 0) - l*y + ln(1 + exp(-|l|))`.
    pub fn bce_with_logits(&mut self, logits: Var, targets: &[f64]) -> Result<Var> {
        let tl = self.value(logits);
        if tl.numel() != targets.len() {
            return Err(Error::ShapeMismatch {
                op: "bce_with_logits",
                left: tl.shape().to_vec(),
                right: vec![targets.len()],
            });
        }
        let n = targets.len() as f64;
        let total: f64 = tl
            .data()
            .iter()
            .zip(targets)
            .map(|(&l, &y)| bce_from_logit(l, y))
            .sum();
        let op = Op::BceWithLogits(logits, targets.to_vec());
        self.push("bce_with_logits", op, Tensor::scalar(total / n), &[logits])
    }

    /// Runs the reverse sweep from a scalar `loss`.
    pub fn backward(&self, loss: Var) -> Result<Adjoints> {
        let lt = self.value(loss);
        if lt.numel() != 1 {
            return Err(Error::NonScalarLoss(lt.shape().to_vec()));
        }
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; loss.0 + 1];
        grads[loss.0] = Some(vec![1.0]);

        for i in (0..=loss.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            let node = &self.nodes[i];
            if !node.requires_grad {
                continue;
            }
            self.propagate(&node.op, &node.value, &g, &mut grads);
            grads[i] = Some(g);
        }
        Ok(Adjoints { grads })
    }

    fn wants(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    fn propagate(&self, op: &Op, out: &Tensor, g: &[f64], grads: &mut [Option<Vec<f64>>]) {
        match *op {
            Op::Leaf | Op::Param(_) => {}
            Op::MatMul(a, b) => {
                let (ta, tb) = (self.value(a), self.value(b));
                let (m, k) = ta.dims2();
                let n = tb.shape()[1];
                if self.wants(a) {
                    accumulate(grads, a, &matmul_a_bt(g, tb.data(), m, n, k));
                }
                if self.wants(b) {
                    accumulate(grads, b, &matmul_at_b(ta.data(), g, m, k, n));
                }
            }
            Op::Add(a, b, mode) => {
                self.push_broadcast(grads, a, b, mode, g, |_| 1.0, |_| 1.0);
            }
            Op::Sub(a, b, mode) => {
                self.push_broadcast(grads, a, b, mode, g, |_| 1.0, |_| -1.0);
            }
            Op::Mul(a, b, mode) => {
                let (ta, tb) = (self.value(a), self.value(b));
                let at = |i: usize| match mode {
                    Broadcast::LeftScalar => ta.item(),
                    _ => ta.data()[i],
                };
                let bt = |i: usize| match mode {
                    Broadcast::RightScalar => tb.item(),
                    _ => tb.data()[i],
                };
                self.push_broadcast(grads, a, b, mode, g, bt, at);
            }
            Op::AddRow(a, bias) => {
                if self.wants(a) {
                    accumulate(grads, a, g);
                }
                if self.wants(bias) {
                    let cols = self.value(bias).numel();
                    let mut gb = vec![0.0; cols];
                    for row in g.chunks_exact(cols) {
                        for (acc, &x) in gb.iter_mut().zip(row) {
                            *acc += x;
                        }
                    }
                    accumulate(grads, bias, &gb);
                }
            }
            Op::Scale(a, f) => accumulate_map(grads, a, g, |i| g[i] * f),
            Op::Shift(a) => accumulate(grads, a, g),
            Op::Neg(a) => accumulate_map(grads, a, g, |i| -g[i]),
            Op::Tanh(a) => {
                let y = out.data();
                accumulate_map(grads, a, g, |i| g[i] * (1.0 - y[i] * y[i]));
            }
            Op::Sigmoid(a) => {
                let y = out.data();
                accumulate_map(grads, a, g, |i| g[i] * y[i] * (1.0 - y[i]));
            }
            Op::Exp(a) => {
                let y = out.data();
                accumulate_map(grads, a, g, |i| g[i] * y[i]);
            }
            Op::Ln(a) => {
                let x = self.value(a).data();
                accumulate_map(grads, a, g, |i| g[i] / x[i]);
            }
            Op::Relu(a) => {
                let x = self.value(a).data();
                accumulate_map(grads, a, g, |i| if x[i] > 0.0 { g[i] } else { 0.0 });
            }
            Op::Abs(a) => {
                let x = self.value(a).data();
                accumulate_map(grads, a, g, |i| g[i] * sign(x[i]));
            }
            Op::Clamp(a, lo, hi) => {
                let x = self.value(a).data();
                accumulate_map(grads, a, g, |i| {
                    if x[i] >= lo && x[i] <= hi {
                        g[i]
                    } else {
                        0.0
                    }
                });
            }
            Op::Sum(a) => {
                let n = self.value(a).numel();
                accumulate(grads, a, &vec![g[0]; n]);
            }
            Op::Mean(a) => {
                let n = self.value(a).numel();
                accumulate(grads, a, &vec![g[0] / n as f64; n]);
            }
            Op::ConcatCols(a, b) => {
                let (rows, ca) = self.value(a).dims2();
                let cb = self.value(b).dims2().1;
                let width = ca + cb;
                if self.wants(a) {
                    let ga: Vec<f64> = (0..rows)
                        .flat_map(|r| g[r * width..r * width + ca].iter().copied())
                        .collect();
                    accumulate(grads, a, &ga);
                }
                if self.wants(b) {
                    let gb: Vec<f64> = (0..rows)
                        .flat_map(|r| g[r * width + ca..(r + 1) * width].iter().copied())
                        .collect();
                    accumulate(grads, b, &gb);
                }
            }
            Op::SliceCols(a, start) => {
                let (rows, cols) = self.value(a).dims2();
                let len = out.dims2().1;
                let slot = slot(grads, a, rows * cols);
                for r in 0..rows {
                    for j in 0..len {
                        slot[r * cols + start + j] += g[r * len + j];
                    }
                }
            }
            Op::SliceRows(a, start) => {
                let (rows, cols) = self.value(a).dims2();
                let slot = slot(grads, a, rows * cols);
                for (acc, &x) in slot[start * cols..].iter_mut().zip(g) {
                    *acc += x;
                }
            }
            Op::ZeroDiag(a) => {
                let (n, _) = self.value(a).dims2();
                let mut ga = g.to_vec();
                for i in 0..n {
                    ga[i * n + i] = 0.0;
                }
                accumulate(grads, a, &ga);
            }
            Op::BceWithLogits(a, ref targets) => {
                let l = self.value(a).data();
                let n = targets.len() as f64;
                let ga: Vec<f64> = (0..l.len()).map(|i| g[0] * (sigmoid(l[i]) - targets[i]) / n).collect();
                accumulate(grads, a, &ga);
            }
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn push_broadcast(
        &self,
        grads: &mut [Option<Vec<f64>>],
        a: Var,
        b: Var,
        mode: Broadcast,
        g: &[f64],
        da: impl Fn(usize) -> f64,
        db: impl Fn(usize) -> f64,
    ) {
        let reduce = |d: &dyn Fn(usize) -> f64| -> Vec<f64> { vec![(0..g.len()).map(|i| g[i] * d(i)).sum()] };
        let full = |d: &dyn Fn(usize) -> f64| -> Vec<f64> { (0..g.len()).map(|i| g[i] * d(i)).collect() };
        if self.wants(a) {
            let ga = match mode {
                Broadcast::LeftScalar => reduce(&da),
                _ => full(&da),
            };
            accumulate(grads, a, &ga);
        }
        if self.wants(b) {
            let gb = match mode {
                Broadcast::RightScalar => reduce(&db),
                _ => full(&db),
            };
            accumulate(grads, b, &gb);
        }
    }
}

/// Gradients of a scalar with respect to every node of a [`Graph`].
#[derive(Debug, Clone)]
pub struct Adjoints {
    grads: Vec<Option<Vec<f64>>>,
}

impl Adjoints {
    /// Gradient with respect to `v`, or `None` when `v` is not on any path to the loss.
    pub fn wrt(&self, v: Var) -> Option<&[f64]> {
        self.grads.get(v.0).and_then(|g| g.as_deref())
    }

    /// Sums leaf gradients into one slot per stored parameter. Parameters not
    /// reached from the loss get zeros.
    pub fn param_grads(&self, graph: &Graph, store: &ParameterStore) -> Gradients {
        let mut out = Gradients::zeros_like(store);
        for (i, node) in graph.nodes.iter().enumerate().take(self.grads.len()) {
            if let (Op::Param(id), Some(g)) = (&node.op, &self.grads[i]) {
                for (acc, &x) in out.get_mut(*id).iter_mut().zip(g) {
                    *acc += x;
                }
            }
        }
        out
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + libm::exp(-x))
    } else {
        let e = libm::exp(x);
        e / (1.0 + e)
    }
}

/// Binary cross-entropy of a single logit against a target in `[0, 1]`.
pub fn bce_from_logit(logit: f64, target: f64) -> f64 {
    logit.max(0.0) - logit * target + libm::log1p(libm::exp(-libm::fabs(logit)))
}

fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

fn mismatch(op: &'static str, a: &Tensor, b: &Tensor) -> Error {
    Error::ShapeMismatch {
        op,
        left: a.shape().to_vec(),
        right: b.shape().to_vec(),
    }
}

fn zip_map(a: &[f64], b: &[f64], f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
    a.iter().zip(b).map(|(&x, &y)| f(x, y)).collect()
}

fn slot(grads: &mut [Option<Vec<f64>>], v: Var, n: usize) -> &mut Vec<f64> {
    grads[v.0].get_or_insert_with(|| vec![0.0; n])
}

fn accumulate(grads: &mut [Option<Vec<f64>>], v: Var, g: &[f64]) {
    match &mut grads[v.0] {
        Some(acc) => acc.iter_mut().zip(g).for_each(|(a, &x)| *a += x),
        none => *none = Some(g.to_vec()),
    }
}

fn accumulate_map(grads: &mut [Option<Vec<f64>>], v: Var, g: &[f64], f: impl Fn(usize) -> f64) {
    let local: Vec<f64> = (0..g.len()).map(f).collect();
    accumulate(grads, v, &local);
}

/// `[m,k] x [k,n]`.
pub(crate) fn matmul_raw(a: &[f64], b: &[f64], m: usize, k: usize, n: usize) -> Vec<f64> {
    let mut out = vec![0.0; m * n];
    for i in 0..m {
        let row = &mut out[i * n..(i + 1) * n];
        for p in 0..k {
            let av = a[i * k + p];
            if av == 0.0 {
                continue;
            }
            for (o, &bv) in row.iter_mut().zip(&b[p * n..(p + 1) * n]) {
                *o += av * bv;
            }
        }
    }
    out
}

/// `g [m,n] x bᵀ` where `b` is `[k,n]`; result `[m,k]`.
fn matmul_a_bt(g: &[f64], b: &[f64], m: usize, n: usize, k: usize) -> Vec<f64> {
    let mut out = vec![0.0; m * k];
    for i in 0..m {
        let gi = &g[i * n..(i + 1) * n];
        for p in 0..k {
            let bp = &b[p * n..(p + 1) * n];
            out[i * k + p] = gi.iter().zip(bp).map(|(x, y)| x * y).sum();
        }
    }
    out
}

/// `aᵀ x g` where `a` is `[m,k]` and `g` is `[m,n]`; result `[k,n]`.
fn matmul_at_b(a: &[f64], g: &[f64], m: usize, k: usize, n: usize) -> Vec<f64> {
    let mut out = vec![0.0; k * n];
    for i in 0..m {
        let gi = &g[i * n..(i + 1) * n];
        for p in 0..k {
            let av = a[i * k + p];
            if av == 0.0 {
                continue;
            }
            for (o, &x) in out[p * n..(p + 1) * n].iter_mut().zip(gi) {
                *o += av * x;
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn mat(g: &mut Graph, r: usize, c: usize, d: &[f64]) -> Var {
        g.variable(Tensor::matrix(r, c, d.to_vec()).unwrap())
    }

    #[test]
    fn matmul_swaps_with_permutation() {
        let mut g = Graph::new();
        let p = mat(&mut g, 2, 2, &[0.0, 1.0, 1.0, 0.0]);
        let x = mat(&mut g, 2, 1, &[2.0, 3.0]);
        let y = g.matmul(p, x).unwrap();
        assert_eq!(g.value(y).data(), &[3.0, 2.0]);
        assert_eq!(g.value(y).shape(), &[2, 1]);
    }

    #[test]
    fn activations_at_zero() {
        let mut g = Graph::new();
        let z = g.constant(Tensor::scalar(0.0));
        let t = g.tanh(z).unwrap();
        let s = g.sigmoid(z).unwrap();
        assert_eq!(g.value(t).item(), 0.0);
        assert_eq!(g.value(s).item(), 0.5);
    }

    #[test]
    fn zero_diag_then_matmul() {
        let mut g = Graph::new();
        let w = mat(&mut g, 2, 2, &[5.0, 1.0, 1.0, 5.0]);
        let w = g.zero_diag(w).unwrap();
        let ones = mat(&mut g, 2, 1, &[1.0, 1.0]);
        let y = g.matmul(w, ones).unwrap();
        assert_eq!(g.value(y).data(), &[1.0, 1.0]);
    }

    #[test]
    fn shape_errors_name_both_shapes() {
        let mut g = Graph::new();
        let a = mat(&mut g, 2, 3, &[0.0; 6]);
        let b = mat(&mut g, 2, 3, &[0.0; 6]);
        let err = g.matmul(a, b).unwrap_err();
        assert_eq!(
            err,
            Error::ShapeMismatch {
                op: "matmul",
                left: vec![2, 3],
                right: vec![2, 3]
            }
        );
        let msg = alloc::format!("{err}");
        assert!(msg.contains("[2, 3]"));
        let c = mat(&mut g, 3, 2, &[0.0; 6]);
        assert!(g.add(a, c).is_err());
    }

    #[test]
    fn overflow_is_an_error() {
        let mut g = Graph::new();
        let x = g.constant(Tensor::scalar(1000.0));
        assert_eq!(g.exp(x).unwrap_err(), Error::NonFinite { op: "exp" });
        let z = g.constant(Tensor::scalar(0.0));
        assert!(g.ln(z).is_err());
    }

    #[test]
    fn product_rule() {
        let mut g = Graph::new();
        let x = g.variable(Tensor::scalar(2.0));
        let y = g.variable(Tensor::scalar(3.0));
        let f = g.mul(x, y).unwrap();
        let adj = g.backward(f).unwrap();
        assert_eq!(adj.wrt(x).unwrap(), &[3.0]);
        assert_eq!(adj.wrt(y).unwrap(), &[2.0]);
    }

    #[test]
    fn relu_subgradient() {
        let mut g = Graph::new();
        let x = g.variable(Tensor::vector(alloc::vec![-1.0, 2.0]));
        let r = g.relu(x).unwrap();
        let f = g.sum(r).unwrap();
        let adj = g.backward(f).unwrap();
        assert_eq!(adj.wrt(x).unwrap(), &[0.0, 1.0]);
    }

    #[test]
    fn sigmoid_slope_at_origin() {
        let mut g = Graph::new();
        let w = g.variable(Tensor::matrix(1, 1, alloc::vec![0.0]).unwrap());
        let x = g.constant(Tensor::matrix(1, 1, alloc::vec![1.0]).unwrap());
        let wx = g.matmul(w, x).unwrap();
        let f = g.sigmoid(wx).unwrap();
        let adj = g.backward(f).unwrap();
        assert_eq!(adj.wrt(w).unwrap(), &[0.25]);
    }

    #[test]
    fn non_scalar_loss_rejected() {
        let mut g = Graph::new();
        let x = g.variable(Tensor::vector(alloc::vec![1.0, 2.0]));
        assert_eq!(g.backward(x).unwrap_err(), Error::NonScalarLoss(alloc::vec![2]));
    }

    #[test]
    fn unreached_nodes_get_nothing() {
        let mut g = Graph::new();
        let x = g.variable(Tensor::scalar(2.0));
        let unused = g.variable(Tensor::scalar(5.0));
        let _dead = g.exp(unused).unwrap();
        let f = g.mul(x, x).unwrap();
        let adj = g.backward(f).unwrap();
        assert_eq!(adj.wrt(x).unwrap(), &[4.0]);
        assert!(adj.wrt(unused).is_none());
    }

    #[test]
    fn dropout_eval_is_identity_and_train_is_unbiased() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut g = Graph::new();
        let x = g.constant(Tensor::full(&[200, 100], 1.0));
        let same = g.dropout(x, 0.0, &mut rng).unwrap();
        assert_eq!(same, x);
        let d = g.dropout(x, 0.3, &mut rng).unwrap();
        let m = g.mean(d).unwrap();
        assert!((g.value(m).item() - 1.0).abs() < 0.02);
    }

    #[test]
    fn stable_bce_at_extreme_logits() {
        let mut g = Graph::new();
        let l = g.variable(Tensor::vector(alloc::vec![100.0, -100.0]));
        let loss = g.bce_with_logits(l, &[0.0, 1.0]).unwrap();
        assert!((g.value(loss).item() - 100.0).abs() < 1e-9);
        let adj = g.backward(loss).unwrap();
        assert!(adj.wrt(l).unwrap().iter().all(|v| v.is_finite()));
    }
}
