//! Tape-based reverse-mode differentiation over dense tensors.
//!
//! A [`Graph`] records every primitive applied to its [`Var`] handles. Calling
//! [`Graph::backward`] on a scalar node walks the tape in reverse and returns
//! the gradient of that scalar with respect to every ancestor that requires a
//! gradient. Graphs are meant to live for a single training step: build one,
//! run forward, take gradients, drop it.
//!
//! ```
//! use hypernet::autodiff::Graph;
//! use hypernet::Tensor;
//!
//! let mut g = Graph::new();
//! let x = g.leaf(Tensor::vector(vec![3.0]));
//! let loss = g.sum_of_squares(x).unwrap();
//! let grads = g.backward(loss).unwrap();
//! assert_eq!(grads.get(x).unwrap().data(), &[6.0]);
//! ```

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Handle to a node of a [`Graph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Primitive operations understood by the tape.
#[derive(Debug, Clone, PartialEq)]
pub enum Primitive {
    /// `a · b`, or `a · bᵀ` when `transpose_rhs` is set. Supports
    /// matrix·vector, matrix·matrix and batched `[B,m,k]·[B,k,n]`.
    MatMul { transpose_rhs: bool },
    /// Same-shape addition, or bias addition of a vector along the last axis.
    Add,
    /// Axis 0 on vectors, axis 1 on matrices.
    Concat { axis: usize },
    /// Elementwise product of same-shape tensors.
    Mul,
    Reshape { shape: Vec<usize> },
    Slice { axis: usize, start: usize, len: usize },
    Relu,
    Sigmoid,
    Tanh,
    /// ELU with α = 1.
    Elu,
    /// Softmax along the last axis.
    Softmax,
    /// Log-softmax along the last axis.
    LogSoftmax,
    /// Mean of all entries, producing a scalar.
    Mean,
    /// Sum of squared entries, producing a scalar.
    SumOfSquares,
}

impl Primitive {
    pub fn name(&self) -> &'static str {
        match self {
            Primitive::MatMul { .. } => "matmul",
            Primitive::Add => "add",
            Primitive::Concat { .. } => "concat",
            Primitive::Mul => "mul",
            Primitive::Reshape { .. } => "reshape",
            Primitive::Slice { .. } => "slice",
            Primitive::Relu => "relu",
            Primitive::Sigmoid => "sigmoid",
            Primitive::Tanh => "tanh",
            Primitive::Elu => "elu",
            Primitive::Softmax => "softmax",
            Primitive::LogSoftmax => "log_softmax",
            Primitive::Mean => "mean",
            Primitive::SumOfSquares => "sum_of_squares",
        }
    }

    fn arity(&self) -> usize {
        match self {
            Primitive::MatMul { .. } | Primitive::Add | Primitive::Concat { .. } | Primitive::Mul => 2,
            _ => 1,
        }
    }
}

#[derive(Debug)]
enum NodeKind {
    Leaf,
    Op(Primitive),
}

#[derive(Debug)]
struct Node {
    kind: NodeKind,
    inputs: [usize; 2],
    value: Tensor,
    requires_grad: bool,
}

/// An append-only computation tape.
#[derive(Debug, Default)]
pub struct Graph {
    nodes: Vec<Node>,
}

/// Gradients produced by [`Graph::backward`], indexed by node.
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    pub fn get(&self, v: Var) -> Option<&Tensor> {
        self.grads.get(v.0).and_then(Option::as_ref)
    }

    pub fn take(&mut self, v: Var) -> Option<Tensor> {
        self.grads.get_mut(v.0).and_then(Option::take)
    }

    pub fn contains(&self, v: Var) -> bool {
        self.get(v).is_some()
    }
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Drops every recorded node.
    pub fn clear(&mut self) {
        self.nodes.clear();
    }

    /// Records a differentiable input.
    pub fn leaf(&mut self, value: Tensor) -> Var {
        self.push_leaf(value, true)
    }

    /// Records an input that never receives a gradient.
    pub fn constant(&mut self, value: Tensor) -> Var {
        self.push_leaf(value, false)
    }

    fn push_leaf(&mut self, value: Tensor, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            kind: NodeKind::Leaf,
            inputs: [usize::MAX; 2],
            value,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        self.nodes[v.0].value.shape()
    }

    /// Applies `prim` to `inputs`, recording the result on the tape.
    pub fn apply(&mut self, prim: Primitive, inputs: &[Var]) -> Result<Var> {
        if inputs.len() != prim.arity() {
            return Err(Error::invalid(format!(
                "{} takes {} inputs, got {}",
                prim.name(),
                prim.arity(),
                inputs.len()
            )));
        }
        if let Some(bad) = inputs.iter().find(|v| v.0 >= self.nodes.len()) {
            return Err(Error::invalid(format!("{:?} is not a node of this graph", bad)));
        }
        let a = &self.nodes[inputs[0].0].value;
        let b = inputs.get(1).map(|v| &self.nodes[v.0].value);
        let value = forward(&prim, a, b)?;
        let requires_grad = inputs.iter().any(|v| self.nodes[v.0].requires_grad);
        let mut ids = [usize::MAX; 2];
        for (slot, v) in ids.iter_mut().zip(inputs) {
            *slot = v.0;
        }
        self.nodes.push(Node {
            kind: NodeKind::Op(prim),
            inputs: ids,
            value,
            requires_grad,
        });
        Ok(Var(self.nodes.len() - 1))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.apply(Primitive::MatMul { transpose_rhs: false }, &[a, b])
    }

    /// `a · bᵀ`.
    pub fn matmul_nt(&mut self, a: Var, b: Var) -> Result<Var> {
        self.apply(Primitive::MatMul { transpose_rhs: true }, &[a, b])
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.apply(Primitive::Add, &[a, b])
    }

    pub fn concat(&mut self, axis: usize, a: Var, b: Var) -> Result<Var> {
        self.apply(Primitive::Concat { axis }, &[a, b])
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.apply(Primitive::Mul, &[a, b])
    }

    pub fn reshape(&mut self, a: Var, shape: impl Into<Vec<usize>>) -> Result<Var> {
        self.apply(Primitive::Reshape { shape: shape.into() }, &[a])
    }

    pub fn slice(&mut self, a: Var, axis: usize, start: usize, len: usize) -> Result<Var> {
        self.apply(Primitive::Slice { axis, start, len }, &[a])
    }

    pub fn relu(&mut self, a: Var) -> Result<Var> {
        self.apply(Primitive::Relu, &[a])
    }

    pub fn sigmoid(&mut self, a: Var) -> Result<Var> {
        self.apply(Primitive::Sigmoid, &[a])
    }

    pub fn tanh(&mut self, a: Var) -> Result<Var> {
        self.apply(Primitive::Tanh, &[a])
    }

    pub fn elu(&mut self, a: Var) -> Result<Var> {
        self.apply(Primitive::Elu, &[a])
    }

    pub fn softmax(&mut self, a: Var) -> Result<Var> {
        self.apply(Primitive::Softmax, &[a])
    }

    pub fn log_softmax(&mut self, a: Var) -> Result<Var> {
        self.apply(Primitive::LogSoftmax, &[a])
    }

    pub fn mean(&mut self, a: Var) -> Result<Var> {
        self.apply(Primitive::Mean, &[a])
    }

    pub fn sum_of_squares(&mut self, a: Var) -> Result<Var> {
        self.apply(Primitive::SumOfSquares, &[a])
    }

    /// Reverse pass from a scalar `loss`.
    ///
    /// Every ancestor of `loss` that was recorded with [`Graph::leaf`] (or
    /// derives from one) gets a gradient entry; constants and nodes that do
    /// not feed the loss are absent.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        let root = self
            .nodes
            .get(loss.0)
            .ok_or_else(|| Error::invalid(format!("{loss:?} is not a node of this graph")))?;
        if root.value.len() != 1 {
            return Err(Error::NonScalarLoss(root.value.shape().to_vec()));
        }
        let mut grads: Vec<Option<Tensor>> = (0..self.nodes.len()).map(|_| None).collect();
        if !root.requires_grad {
            return Ok(Gradients { grads });
        }
        grads[loss.0] = Some(Tensor::filled(root.value.shape().to_vec(), 1.0));

        for idx in (0..=loss.0).rev() {
            let Some(upstream) = grads[idx].take() else {
                continue;
            };
            let node = &self.nodes[idx];
            if let NodeKind::Op(prim) = &node.kind {
                let a = &self.nodes[node.inputs[0]];
                let b = (prim.arity() == 2).then(|| &self.nodes[node.inputs[1]]);
                let (ga, gb) = backward_rule(
                    prim,
                    &a.value,
                    b.map(|n| &n.value),
                    &node.value,
                    &upstream,
                    a.requires_grad,
                    b.is_some_and(|n| n.requires_grad),
                )?;
                if let Some(ga) = ga {
                    accumulate(&mut grads[node.inputs[0]], ga);
                }
                if let Some(gb) = gb {
                    accumulate(&mut grads[node.inputs[1]], gb);
                }
            }
            grads[idx] = Some(upstream);
        }
        Ok(Gradients { grads })
    }
}

fn accumulate(slot: &mut Option<Tensor>, g: Tensor) {
    match slot {
        Some(existing) => existing.add_assign(&g),
        None => *slot = Some(g),
    }
}

fn forward(prim: &Primitive, a: &Tensor, b: Option<&Tensor>) -> Result<Tensor> {
    let name = prim.name();
    match prim {
        Primitive::MatMul { transpose_rhs } => {
            let b = b.expect("arity checked");
            let plan = MatMulPlan::new(a.shape(), b.shape(), *transpose_rhs)
                .ok_or_else(|| Error::shape(name, a.shape(), b.shape()))?;
            let mut out = vec![0.0; plan.batch * plan.m * plan.n];
            for bi in 0..plan.batch {
                gemm(
                    plan.m,
                    plan.k,
                    plan.n,
                    &a.data()[bi * plan.m * plan.k..(bi + 1) * plan.m * plan.k],
                    (plan.k as isize, 1),
                    &b.data()[bi * plan.k * plan.n..(bi + 1) * plan.k * plan.n],
                    plan.rhs_strides(),
                    &mut out[bi * plan.m * plan.n..(bi + 1) * plan.m * plan.n],
                );
            }
            Ok(Tensor::from_parts(plan.out_shape.clone(), out))
        }
        Primitive::Add => {
            let b = b.expect("arity checked");
            if a.shape() == b.shape() {
                let data = a.data().iter().zip(b.data()).map(|(x, y)| x + y).collect();
                Ok(Tensor::from_parts(a.shape().to_vec(), data))
            } else if is_bias_add(a.shape(), b.shape()) {
                let n = b.len();
                let data = a
                    .data()
                    .iter()
                    .enumerate()
                    .map(|(i, x)| x + b.data()[i % n])
                    .collect();
                Ok(Tensor::from_parts(a.shape().to_vec(), data))
            } else {
                Err(Error::shape(name, a.shape(), b.shape()))
            }
        }
        Primitive::Concat { axis } => {
            let b = b.expect("arity checked");
            match (*axis, a.rank(), b.rank()) {
                (0, 1, 1) => {
                    let mut data = a.data().to_vec();
                    data.extend_from_slice(b.data());
                    Ok(Tensor::vector(data))
                }
                (1, 2, 2) if a.shape()[0] == b.shape()[0] => {
                    let (rows, wa, wb) = (a.shape()[0], a.shape()[1], b.shape()[1]);
                    let mut data = Vec::with_capacity(rows * (wa + wb));
                    for r in 0..rows {
                        data.extend_from_slice(a.row(r));
                        data.extend_from_slice(b.row(r));
                    }
                    Ok(Tensor::from_parts(vec![rows, wa + wb], data))
                }
                _ => Err(Error::shape(name, a.shape(), b.shape())),
            }
        }
        Primitive::Mul => {
            let b = b.expect("arity checked");
            if a.shape() != b.shape() {
                return Err(Error::shape(name, a.shape(), b.shape()));
            }
            let data = a.data().iter().zip(b.data()).map(|(x, y)| x * y).collect();
            Ok(Tensor::from_parts(a.shape().to_vec(), data))
        }
        Primitive::Reshape { shape } => a.clone().reshaped(shape.clone()),
        Primitive::Slice { axis, start, len } => {
            let (outer, dim, inner) = split_axis(a.shape(), *axis)
                .ok_or_else(|| Error::shape(name, a.shape(), &[*axis]))?;
            if *len == 0 || start + len > dim {
                return Err(Error::shape(name, a.shape(), &[*start, *len]));
            }
            let mut data = Vec::with_capacity(outer * len * inner);
            for o in 0..outer {
                let base = o * dim * inner + start * inner;
                data.extend_from_slice(&a.data()[base..base + len * inner]);
            }
            let mut shape = a.shape().to_vec();
            shape[*axis] = *len;
            Ok(Tensor::from_parts(shape, data))
        }
        Primitive::Relu => Ok(a.map(relu)),
        Primitive::Sigmoid => Ok(a.map(sigmoid)),
        Primitive::Tanh => Ok(a.map(f64::tanh)),
        Primitive::Elu => Ok(a.map(elu)),
        Primitive::Softmax | Primitive::LogSoftmax => {
            let width = *a
                .shape()
                .last()
                .ok_or_else(|| Error::shape(name, a.shape(), &[]))?;
            let mut out = a.data().to_vec();
            let log = matches!(prim, Primitive::LogSoftmax);
            for row in out.chunks_mut(width) {
                if log {
                    log_softmax_in_place(row);
                } else {
                    softmax_in_place(row);
                }
            }
            Ok(Tensor::from_parts(a.shape().to_vec(), out))
        }
        Primitive::Mean => Ok(Tensor::scalar(a.data().iter().sum::<f64>() / a.len() as f64)),
        Primitive::SumOfSquares => Ok(Tensor::scalar(a.data().iter().map(|v| v * v).sum())),
    }
}

/// Returns gradients for the (first, second) inputs; `None` where the input
/// does not require one.
fn backward_rule(
    prim: &Primitive,
    a: &Tensor,
    b: Option<&Tensor>,
    out: &Tensor,
    up: &Tensor,
    need_a: bool,
    need_b: bool,
) -> Result<(Option<Tensor>, Option<Tensor>)> {
    let elementwise = |f: &dyn Fn(f64, f64, f64) -> f64| {
        let data = a
            .data()
            .iter()
            .zip(out.data())
            .zip(up.data())
            .map(|((&x, &y), &g)| f(x, y, g))
            .collect();
        Tensor::from_parts(a.shape().to_vec(), data)
    };
    Ok(match prim {
        Primitive::MatMul { transpose_rhs } => {
            let b = b.expect("arity checked");
            let plan = MatMulPlan::new(a.shape(), b.shape(), *transpose_rhs)
                .expect("validated on forward");
            let (m, k, n) = (plan.m, plan.k, plan.n);
            let ga = need_a.then(|| {
                let mut ga = vec![0.0; a.len()];
                // dA = dC · op(B)ᵀ
                let bt = if *transpose_rhs { (k as isize, 1) } else { (1, n as isize) };
                for bi in 0..plan.batch {
                    gemm(
                        m,
                        n,
                        k,
                        &up.data()[bi * m * n..(bi + 1) * m * n],
                        (n as isize, 1),
                        &b.data()[bi * k * n..(bi + 1) * k * n],
                        bt,
                        &mut ga[bi * m * k..(bi + 1) * m * k],
                    );
                }
                Tensor::from_parts(a.shape().to_vec(), ga)
            });
            let gb = need_b.then(|| {
                let mut gb = vec![0.0; b.len()];
                for bi in 0..plan.batch {
                    let a_blk = &a.data()[bi * m * k..(bi + 1) * m * k];
                    let up_blk = &up.data()[bi * m * n..(bi + 1) * m * n];
                    let gb_blk = &mut gb[bi * k * n..(bi + 1) * k * n];
                    if *transpose_rhs {
                        // d(Bstored) [n,k] = dCᵀ · A
                        gemm(n, m, k, up_blk, (1, n as isize), a_blk, (k as isize, 1), gb_blk);
                    } else {
                        // dB [k,n] = Aᵀ · dC
                        gemm(k, m, n, a_blk, (1, k as isize), up_blk, (n as isize, 1), gb_blk);
                    }
                }
                Tensor::from_parts(b.shape().to_vec(), gb)
            });
            (ga, gb)
        }
        Primitive::Add => {
            let b = b.expect("arity checked");
            let gb = need_b.then(|| {
                if a.shape() == b.shape() {
                    up.clone()
                } else {
                    let n = b.len();
                    let mut gb = vec![0.0; n];
                    for (i, g) in up.data().iter().enumerate() {
                        gb[i % n] += g;
                    }
                    Tensor::from_parts(b.shape().to_vec(), gb)
                }
            });
            (need_a.then(|| up.clone()), gb)
        }
        Primitive::Concat { axis } => {
            let b = b.expect("arity checked");
            if *axis == 0 {
                let na = a.len();
                (
                    need_a.then(|| Tensor::from_parts(a.shape().to_vec(), up.data()[..na].to_vec())),
                    need_b.then(|| Tensor::from_parts(b.shape().to_vec(), up.data()[na..].to_vec())),
                )
            } else {
                let (rows, wa, wb) = (a.shape()[0], a.shape()[1], b.shape()[1]);
                let split = |offset: usize, width: usize, shape: &[usize]| {
                    let mut g = Vec::with_capacity(rows * width);
                    for r in 0..rows {
                        let base = r * (wa + wb) + offset;
                        g.extend_from_slice(&up.data()[base..base + width]);
                    }
                    Tensor::from_parts(shape.to_vec(), g)
                };
                (
                    need_a.then(|| split(0, wa, a.shape())),
                    need_b.then(|| split(wa, wb, b.shape())),
                )
            }
        }
        Primitive::Mul => {
            let b = b.expect("arity checked");
            let prod = |x: &Tensor, shape: &[usize]| {
                let data = x.data().iter().zip(up.data()).map(|(x, g)| x * g).collect();
                Tensor::from_parts(shape.to_vec(), data)
            };
            (need_a.then(|| prod(b, a.shape())), need_b.then(|| prod(a, b.shape())))
        }
        Primitive::Reshape { .. } => (
            Some(Tensor::from_parts(a.shape().to_vec(), up.data().to_vec())),
            None,
        ),
        Primitive::Slice { axis, start, len } => {
            let (outer, dim, inner) = split_axis(a.shape(), *axis).expect("validated on forward");
            let mut g = vec![0.0; a.len()];
            for o in 0..outer {
                let dst = o * dim * inner + start * inner;
                let src = o * len * inner;
                g[dst..dst + len * inner].copy_from_slice(&up.data()[src..src + len * inner]);
            }
            (Some(Tensor::from_parts(a.shape().to_vec(), g)), None)
        }
        Primitive::Relu => (Some(elementwise(&|x, _, g| if x > 0.0 { g } else { 0.0 })), None),
        Primitive::Sigmoid => (Some(elementwise(&|_, y, g| g * y * (1.0 - y))), None),
        Primitive::Tanh => (Some(elementwise(&|_, y, g| g * (1.0 - y * y))), None),
        Primitive::Elu => (
            Some(elementwise(&|x, y, g| if x > 0.0 { g } else { g * (y + 1.0) })),
            None,
        ),
        Primitive::Softmax => {
            let width = *a.shape().last().expect("validated on forward");
            let mut g = vec![0.0; a.len()];
            for ((gr, yr), ur) in g
                .chunks_mut(width)
                .zip(out.data().chunks(width))
                .zip(up.data().chunks(width))
            {
                let dot: f64 = yr.iter().zip(ur).map(|(y, u)| y * u).sum();
                for ((gi, y), u) in gr.iter_mut().zip(yr).zip(ur) {
                    *gi = y * (u - dot);
                }
            }
            (Some(Tensor::from_parts(a.shape().to_vec(), g)), None)
        }
        Primitive::LogSoftmax => {
            let width = *a.shape().last().expect("validated on forward");
            let mut g = vec![0.0; a.len()];
            for ((gr, lr), ur) in g
                .chunks_mut(width)
                .zip(out.data().chunks(width))
                .zip(up.data().chunks(width))
            {
                let total: f64 = ur.iter().sum();
                for ((gi, l), u) in gr.iter_mut().zip(lr).zip(ur) {
                    *gi = u - l.exp() * total;
                }
            }
            (Some(Tensor::from_parts(a.shape().to_vec(), g)), None)
        }
        Primitive::Mean => {
            let g = up.data()[0] / a.len() as f64;
            (Some(Tensor::filled(a.shape().to_vec(), g)), None)
        }
        Primitive::SumOfSquares => {
            let g = up.data()[0];
            (Some(a.map(|x| 2.0 * x * g)), None)
        }
    })
}

pub(crate) fn relu(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        0.0
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

pub(crate) fn elu(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        x.exp_m1()
    }
}

pub(crate) fn softmax_in_place(row: &mut [f64]) {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for v in row.iter_mut() {
        *v = (*v - max).exp();
        total += *v;
    }
    for v in row.iter_mut() {
        *v /= total;
    }
}

pub(crate) fn log_softmax_in_place(row: &mut [f64]) {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
    for v in row.iter_mut() {
        *v -= lse;
    }
}

fn is_bias_add(a: &[usize], b: &[usize]) -> bool {
    b.len() == 1 && a.len() >= 2 && a.last() == b.first()
}

fn split_axis(shape: &[usize], axis: usize) -> Option<(usize, usize, usize)> {
    if axis >= shape.len() {
        return None;
    }
    let outer = shape[..axis].iter().product();
    let inner = shape[axis + 1..].iter().product();
    Some((outer, shape[axis], inner))
}

struct MatMulPlan {
    batch: usize,
    m: usize,
    k: usize,
    n: usize,
    transpose_rhs: bool,
    out_shape: Vec<usize>,
}

impl MatMulPlan {
    fn new(a: &[usize], b: &[usize], transpose_rhs: bool) -> Option<Self> {
        let plan = |batch, m, k, n, out_shape| {
            Some(Self {
                batch,
                m,
                k,
                n,
                transpose_rhs,
                out_shape,
            })
        };
        match (a, b) {
            (&[m, k], &[kb]) if k == kb => plan(1, m, k, 1, vec![m]),
            (&[m, k], &[r, c]) => {
                let (kb, n) = if transpose_rhs { (c, r) } else { (r, c) };
                (k == kb).then_some(())?;
                plan(1, m, k, n, vec![m, n])
            }
            (&[ba, m, k], &[bb, r, c]) if ba == bb => {
                let (kb, n) = if transpose_rhs { (c, r) } else { (r, c) };
                (k == kb).then_some(())?;
                plan(ba, m, k, n, vec![ba, m, n])
            }
            _ => None,
        }
    }

    fn rhs_strides(&self) -> (isize, isize) {
        if self.transpose_rhs {
            (1, self.k as isize)
        } else {
            (self.n as isize, 1)
        }
    }
}

/// `c = a · b` for strided views `a: m×k`, `b: k×n` into a contiguous
/// row-major `c: m×n`, which is overwritten.
#[allow(clippy::too_many_arguments)]
fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    (rsa, csa): (isize, isize),
    b: &[f64],
    (rsb, csb): (isize, isize),
    c: &mut [f64],
) {
    let last = |rows: usize, cols: usize, rs: isize, cs: isize| {
        (rows as isize - 1) * rs + (cols as isize - 1) * cs
    };
    assert!(m > 0 && k > 0 && n > 0);
    assert!(rsa >= 0 && csa >= 0 && rsb >= 0 && csb >= 0);
    assert!((last(m, k, rsa, csa) as usize) < a.len());
    assert!((last(k, n, rsb, csb) as usize) < b.len());
    assert_eq!(c.len(), m * n);
    // SAFETY: the asserts above keep every strided access inside the slices.
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
            0.0,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

/// Central-difference gradient of `f` at `params`.
///
/// Coordinate `i` is `(f(θ + h·eᵢ) − f(θ − h·eᵢ)) / 2h`.
pub fn finite_diff_grad<F>(mut f: F, params: &Tensor, h: f64) -> Result<Tensor>
where
    F: FnMut(&Tensor) -> Result<f64>,
{
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::invalid(format!("step h must be positive, got {h}")));
    }
    let mut probe = params.clone();
    let mut grad = Vec::with_capacity(params.len());
    for i in 0..params.len() {
        let orig = probe.data()[i];
        probe.data_mut()[i] = orig + h;
        let plus = f(&probe)?;
        probe.data_mut()[i] = orig - h;
        let minus = f(&probe)?;
        probe.data_mut()[i] = orig;
        if !plus.is_finite() || !minus.is_finite() {
            return Err(Error::NonFinite(format!(
                "function value at coordinate {i} is {plus} / {minus}"
            )));
        }
        grad.push((plus - minus) / (2.0 * h));
    }
    Ok(Tensor::from_parts(params.shape().to_vec(), grad))
}

/// Largest per-coordinate relative error `|a − n| / max(1, |a|)`.
pub fn max_relative_error(analytic: &Tensor, numeric: &Tensor) -> f64 {
    analytic
        .data()
        .iter()
        .zip(numeric.data())
        .map(|(a, n)| (a - n).abs() / a.abs().max(1.0))
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn v(data: &[f64]) -> Tensor {
        Tensor::vector(data.to_vec())
    }

    #[test]
    fn identity_matmul() {
        let mut g = Graph::new();
        let eye = g.constant(Tensor::matrix(2, 2, vec![1., 0., 0., 1.]).unwrap());
        let x = g.constant(v(&[3., 4.]));
        let y = g.matmul(eye, x).unwrap();
        assert_eq!(g.value(y).data(), &[3., 4.]);
    }

    #[test]
    fn relu_softmax_concat_examples() {
        let mut g = Graph::new();
        let x = g.constant(v(&[-1., 0., 2.]));
        let r = g.relu(x).unwrap();
        assert_eq!(g.value(r).data(), &[0., 0., 2.]);

        let z = g.constant(v(&[0., 0., 0.]));
        let s = g.softmax(z).unwrap();
        for &p in g.value(s).data() {
            assert_abs_diff_eq!(p, 1.0 / 3.0, epsilon = 1e-15);
        }

        let a = g.constant(v(&[1., 2.]));
        let b = g.constant(v(&[3.]));
        let c = g.concat(0, a, b).unwrap();
        assert_eq!(g.value(c).data(), &[1., 2., 3.]);
    }

    #[test]
    fn shape_errors_name_primitive_and_shapes() {
        let mut g = Graph::new();
        let a = g.constant(Tensor::zeros(vec![2, 3]));
        let b = g.constant(Tensor::zeros(vec![2, 3]));
        let err = g.matmul(a, b).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("matmul") && msg.contains("[2, 3]"), "{msg}");
        let c = g.constant(Tensor::zeros(vec![4]));
        assert!(g.add(a, c).unwrap_err().to_string().contains("add"));
        assert!(g.mul(a, c).is_err());
        assert!(g.concat(1, a, c).is_err());
        assert!(g.slice(a, 1, 2, 2).is_err());
        assert!(g.reshape(a, vec![5]).is_err());
    }

    #[test]
    fn sum_of_squares_gradient() {
        let mut g = Graph::new();
        let x = g.leaf(v(&[3.]));
        let loss = g.sum_of_squares(x).unwrap();
        let grads = g.backward(loss).unwrap();
        assert_eq!(grads.get(x).unwrap().data(), &[6.]);
        assert_eq!(grads.get(loss).unwrap().data(), &[1.]);
    }

    #[test]
    fn unreachable_nodes_have_no_gradient() {
        let mut g = Graph::new();
        let x = g.leaf(v(&[1., 2.]));
        let t = g.leaf(v(&[5.]));
        let _unused = g.relu(t).unwrap();
        let loss = g.mean(x).unwrap();
        let grads = g.backward(loss).unwrap();
        assert!(grads.contains(x));
        assert!(!grads.contains(t));
    }

    #[test]
    fn constants_have_no_gradient() {
        let mut g = Graph::new();
        let x = g.leaf(v(&[1., 2.]));
        let c = g.constant(v(&[3., 4.]));
        let p = g.mul(x, c).unwrap();
        let loss = g.mean(p).unwrap();
        let grads = g.backward(loss).unwrap();
        assert_eq!(grads.get(x).unwrap().data(), &[1.5, 2.0]);
        assert!(!grads.contains(c));
    }

    #[test]
    fn non_scalar_loss_rejected() {
        let mut g = Graph::new();
        let x = g.leaf(v(&[1., 2.]));
        assert!(matches!(g.backward(x), Err(Error::NonScalarLoss(_))));
    }

    #[test]
    fn finite_diff_known_derivatives() {
        let sq = finite_diff_grad(|t| Ok(t.data()[0].powi(2)), &v(&[3.]), 1e-5).unwrap();
        assert_abs_diff_eq!(sq.data()[0], 6.0, epsilon = 1e-8);
        let sg = finite_diff_grad(|t| Ok(sigmoid(t.data()[0])), &v(&[0.]), 1e-5).unwrap();
        assert_abs_diff_eq!(sg.data()[0], 0.25, epsilon = 1e-8);
    }

    #[test]
    fn finite_diff_rejects_bad_input() {
        assert!(finite_diff_grad(|_| Ok(0.0), &v(&[1.]), 0.0).is_err());
        let r = finite_diff_grad(|_| Ok(f64::NAN), &v(&[1.]), 1e-5);
        assert!(matches!(r, Err(Error::NonFinite(_))));
    }

    #[test]
    fn mean_matmul_gradient_matches_central_differences() {
        let w0 = Tensor::matrix(2, 3, vec![0.3, -1.2, 0.7, 1.1, 0.05, -0.4]).unwrap();
        let x = v(&[0.5, -1.5, 2.0]);
        let loss_of = |w: &Tensor| -> Result<f64> {
            let mut g = Graph::new();
            let wv = g.constant(w.clone());
            let xv = g.constant(x.clone());
            let y = g.matmul(wv, xv)?;
            let l = g.mean(y)?;
            g.value(l).item()
        };
        let mut g = Graph::new();
        let wv = g.leaf(w0.clone());
        let xv = g.constant(x.clone());
        let y = g.matmul(wv, xv).unwrap();
        let l = g.mean(y).unwrap();
        let grads = g.backward(l).unwrap();
        let numeric = finite_diff_grad(loss_of, &w0, 1e-5).unwrap();
        assert!(max_relative_error(grads.get(wv).unwrap(), &numeric) <= 1e-6);
    }

    #[test]
    fn elu_continuous_at_zero() {
        let eps = 1e-8;
        assert!((elu(eps) - elu(-eps)).abs() <= 1e-7);
    }

    #[test]
    fn log_softmax_is_stable() {
        let mut row = [1000.0, 0.0];
        log_softmax_in_place(&mut row);
        assert!(row.iter().all(|v| v.is_finite()));
        assert_abs_diff_eq!(row[0], 0.0, epsilon = 1e-12);
    }
}
