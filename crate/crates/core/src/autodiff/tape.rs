//! Dynamic computation tape. Every forward op appends a node holding its value and
//! the information needed to push gradients to its parents; `backward` walks the tape
//! in reverse, which is a valid reverse topological order because parents always
//! precede children.

use std::cell::{Ref, RefCell};

use super::Tensor;
use crate::error::{contract_err, shape_err, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone)]
enum Op<S> {
    Leaf,
    MatMul(usize, usize),
    Add(usize, usize),
    Sub(usize, usize),
    Mul(usize, usize),
    Scale(usize, S),
    AddScalar(usize),
    Sigmoid(usize),
    Tanh(usize),
    Relu(usize),
    Abs(usize),
    LogSoftmax { input: usize, axis: usize },
    Concat { parts: Vec<usize>, axis: usize },
    Slice { input: usize, axis: usize, start: usize },
    Sum(usize),
    Mean(usize),
    Transpose(usize),
    Embedding { table: usize, indices: Vec<usize> },
    RepeatRows(usize),
    External { input: usize, grad: Tensor<S> },
}

impl<S> Op<S> {
    fn parents(&self) -> Vec<usize> {
        match self {
            Op::Leaf => vec![],
            Op::MatMul(a, b) | Op::Add(a, b) | Op::Sub(a, b) | Op::Mul(a, b) => vec![*a, *b],
            Op::Scale(a, _)
            | Op::AddScalar(a)
            | Op::Sigmoid(a)
            | Op::Tanh(a)
            | Op::Relu(a)
            | Op::Abs(a)
            | Op::Sum(a)
            | Op::Mean(a)
            | Op::Transpose(a)
            | Op::RepeatRows(a) => vec![*a],
            Op::LogSoftmax { input, .. } | Op::Slice { input, .. } | Op::External { input, .. } => {
                vec![*input]
            }
            Op::Concat { parts, .. } => parts.clone(),
            Op::Embedding { table, .. } => vec![*table],
        }
    }
}

#[derive(Debug)]
struct Node<S> {
    value: Tensor<S>,
    op: Op<S>,
    requires_grad: bool,
}

/// Records operations for one forward pass. Single-threaded; build one tape per
/// utterance (or per shard) and reduce gradients explicitly.
#[derive(Debug, Default)]
pub struct Tape<S> {
    nodes: RefCell<Vec<Node<S>>>,
}

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy)]
pub struct Var<'t, S> {
    tape: &'t Tape<S>,
    id: usize,
}

impl<S> std::fmt::Debug for Var<'_, S> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Var({})", self.id)
    }
}

impl<S: Scalar> Tape<S> {
    pub fn new() -> Self {
        Self {
            nodes: RefCell::new(Vec::new()),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn push(&self, value: Tensor<S>, op: Op<S>) -> Var<'_, S> {
        let mut nodes = self.nodes.borrow_mut();
        let requires_grad = op.parents().iter().any(|&p| nodes[p].requires_grad);
        nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Var {
            tape: self,
            id: nodes.len() - 1,
        }
    }

    fn leaf(&self, value: Tensor<S>, requires_grad: bool) -> Var<'_, S> {
        let mut nodes = self.nodes.borrow_mut();
        nodes.push(Node {
            value,
            op: Op::Leaf,
            requires_grad,
        });
        Var {
            tape: self,
            id: nodes.len() - 1,
        }
    }

    /// Trainable leaf.
    pub fn param(&self, value: Tensor<S>) -> Var<'_, S> {
        self.leaf(value, true)
    }

    /// Leaf that receives no gradient.
    pub fn constant(&self, value: Tensor<S>) -> Var<'_, S> {
        self.leaf(value, false)
    }

    fn value(&self, id: usize) -> Ref<'_, Tensor<S>> {
        Ref::map(self.nodes.borrow(), |n| &n[id].value)
    }

    /// Reverse pass from a one-element `loss`.
    pub fn backward(&self, loss: Var<'_, S>) -> Result<Gradients<S>> {
        let nodes = self.nodes.borrow();
        let n = nodes.len();
        if nodes[loss.id].value.numel() != 1 {
            return contract_err(format!(
                "backward needs a scalar loss, got shape {:?}",
                nodes[loss.id].value.shape()
            ));
        }
        let mut grads: Vec<Option<Tensor<S>>> = vec![None; n];
        let mut visits = vec![0u32; n];
        grads[loss.id] = Some(Tensor::ones(nodes[loss.id].value.shape()));
        for id in (0..=loss.id).rev() {
            if !nodes[id].requires_grad {
                continue;
            }
            let (lower, upper) = grads.split_at_mut(id);
            let Some(g) = upper[0].as_ref() else { continue };
            visits[id] += 1;
            propagate(&nodes, id, g, lower);
        }
        Ok(Gradients { grads, visits })
    }
}

fn slot<'a, S: Scalar>(grads: &'a mut [Option<Tensor<S>>], nodes: &[Node<S>], id: usize) -> Option<&'a mut Tensor<S>> {
    if !nodes[id].requires_grad {
        return None;
    }
    Some(grads[id].get_or_insert_with(|| Tensor::zeros(nodes[id].value.shape())))
}

fn accumulate<S: Scalar>(
    grads: &mut [Option<Tensor<S>>],
    nodes: &[Node<S>],
    id: usize,
    g: &Tensor<S>,
    f: impl Fn(usize, S) -> S,
) {
    if let Some(dst) = slot(grads, nodes, id) {
        if dst.numel() == 1 && g.numel() != 1 {
            // scalar broadcast: reduce
            let s: S = g.data().iter().enumerate().map(|(i, &v)| f(i, v)).sum();
            dst.data_mut()[0] += s;
        } else {
            for (i, (d, &v)) in dst.data_mut().iter_mut().zip(g.data()).enumerate() {
                *d += f(i, v);
            }
        }
    }
}

fn propagate<S: Scalar>(nodes: &[Node<S>], id: usize, g: &Tensor<S>, grads: &mut [Option<Tensor<S>>]) {
    let out = &nodes[id].value;
    match &nodes[id].op {
        Op::Leaf => {}
        Op::MatMul(a, b) => {
            let av = &nodes[*a].value;
            let bv = &nodes[*b].value;
            let (m, k) = av.dims2().unwrap();
            let (_, n) = bv.dims2().unwrap();
            let (ad, bd, gd) = (av.data(), bv.data(), g.data());
            if let Some(da) = slot(grads, nodes, *a) {
                let dd = da.data_mut();
                for i in 0..m {
                    let grow = &gd[i * n..(i + 1) * n];
                    for kk in 0..k {
                        let brow = &bd[kk * n..(kk + 1) * n];
                        dd[i * k + kk] += grow.iter().zip(brow).map(|(&x, &y)| x * y).sum::<S>();
                    }
                }
            }
            if let Some(db) = slot(grads, nodes, *b) {
                let dd = db.data_mut();
                for i in 0..m {
                    let grow = &gd[i * n..(i + 1) * n];
                    for kk in 0..k {
                        let aik = ad[i * k + kk];
                        if aik == S::zero() {
                            continue;
                        }
                        for (d, &x) in dd[kk * n..(kk + 1) * n].iter_mut().zip(grow) {
                            *d += aik * x;
                        }
                    }
                }
            }
        }
        Op::Add(a, b) => {
            accumulate(grads, nodes, *a, g, |_, v| v);
            accumulate(grads, nodes, *b, g, |_, v| v);
        }
        Op::Sub(a, b) => {
            accumulate(grads, nodes, *a, g, |_, v| v);
            accumulate(grads, nodes, *b, g, |_, v| -v);
        }
        Op::Mul(a, b) => {
            let av = &nodes[*a].value;
            let bv = &nodes[*b].value;
            let pick = |t: &Tensor<S>, i: usize| if t.numel() == 1 { t.item() } else { t.data()[i] };
            accumulate(grads, nodes, *a, g, |i, v| v * pick(bv, i));
            accumulate(grads, nodes, *b, g, |i, v| v * pick(av, i));
        }
        Op::Scale(a, k) => accumulate(grads, nodes, *a, g, |_, v| v * *k),
        Op::AddScalar(a) => accumulate(grads, nodes, *a, g, |_, v| v),
        Op::Sigmoid(a) => {
            let y = out.data();
            accumulate(grads, nodes, *a, g, |i, v| v * y[i] * (S::one() - y[i]));
        }
        Op::Tanh(a) => {
            let y = out.data();
            accumulate(grads, nodes, *a, g, |i, v| v * (S::one() - y[i] * y[i]));
        }
        Op::Relu(a) => {
            let x = nodes[*a].value.data();
            accumulate(grads, nodes, *a, g, |i, v| if x[i] > S::zero() { v } else { S::zero() });
        }
        Op::Abs(a) => {
            let x = nodes[*a].value.data();
            accumulate(grads, nodes, *a, g, |i, v| {
                if x[i] > S::zero() {
                    v
                } else if x[i] < S::zero() {
                    -v
                } else {
                    S::zero()
                }
            });
        }
        Op::LogSoftmax { input, axis } => {
            let (r, c) = out.dims2().unwrap();
            let y = out.data();
            let gd = g.data();
            if let Some(dx) = slot(grads, nodes, *input) {
                let dd = dx.data_mut();
                let idx = |i: usize, j: usize| i * c + j;
                if *axis == 1 {
                    for i in 0..r {
                        let s: S = (0..c).map(|j| gd[idx(i, j)]).sum();
                        for j in 0..c {
                            dd[idx(i, j)] += gd[idx(i, j)] - y[idx(i, j)].exp() * s;
                        }
                    }
                } else {
                    for j in 0..c {
                        let s: S = (0..r).map(|i| gd[idx(i, j)]).sum();
                        for i in 0..r {
                            dd[idx(i, j)] += gd[idx(i, j)] - y[idx(i, j)].exp() * s;
                        }
                    }
                }
            }
        }
        Op::Concat { parts, axis } => {
            let (_, c) = out.dims2().unwrap();
            let gd = g.data();
            let mut offset = 0;
            for &p in parts {
                let (pr, pc) = nodes[p].value.dims2().unwrap();
                if let Some(dp) = slot(grads, nodes, p) {
                    let dd = dp.data_mut();
                    for i in 0..pr {
                        for j in 0..pc {
                            let src = if *axis == 0 { (offset + i) * c + j } else { i * c + offset + j };
                            dd[i * pc + j] += gd[src];
                        }
                    }
                }
                offset += if *axis == 0 { pr } else { pc };
            }
        }
        Op::Slice { input, axis, start } => {
            let (_, pc) = nodes[*input].value.dims2().unwrap();
            let (r, c) = out.dims2().unwrap();
            let gd = g.data();
            if let Some(dp) = slot(grads, nodes, *input) {
                let dd = dp.data_mut();
                for i in 0..r {
                    for j in 0..c {
                        let dst = if *axis == 0 { (start + i) * pc + j } else { i * pc + start + j };
                        dd[dst] += gd[i * c + j];
                    }
                }
            }
        }
        Op::Sum(a) => {
            let gv = g.item();
            accumulate_fill(grads, nodes, *a, gv);
        }
        Op::Mean(a) => {
            let count = nodes[*a].value.numel();
            let gv = g.item() / S::of_usize(count);
            accumulate_fill(grads, nodes, *a, gv);
        }
        Op::Transpose(a) => {
            let (r, c) = out.dims2().unwrap();
            let gd = g.data();
            if let Some(dp) = slot(grads, nodes, *a) {
                let dd = dp.data_mut();
                for i in 0..r {
                    for j in 0..c {
                        dd[j * r + i] += gd[i * c + j];
                    }
                }
            }
        }
        Op::Embedding { table, indices } => {
            let (_, d) = nodes[*table].value.dims2().unwrap();
            let gd = g.data();
            if let Some(dt) = slot(grads, nodes, *table) {
                let dd = dt.data_mut();
                for (row, &ix) in indices.iter().enumerate() {
                    for j in 0..d {
                        dd[ix * d + j] += gd[row * d + j];
                    }
                }
            }
        }
        Op::RepeatRows(a) => {
            let (r, c) = out.dims2().unwrap();
            let gd = g.data();
            if let Some(dp) = slot(grads, nodes, *a) {
                let dd = dp.data_mut();
                for i in 0..r {
                    for j in 0..c {
                        dd[j] += gd[i * c + j];
                    }
                }
            }
        }
        Op::External { input, grad } => {
            let gv = g.item();
            accumulate(grads, nodes, *input, grad, |_, v| v * gv);
        }
    }
}

fn accumulate_fill<S: Scalar>(grads: &mut [Option<Tensor<S>>], nodes: &[Node<S>], id: usize, v: S) {
    if let Some(dst) = slot(grads, nodes, id) {
        dst.data_mut().iter_mut().for_each(|d| *d += v);
    }
}

/// Result of a reverse pass.
#[derive(Debug)]
pub struct Gradients<S> {
    grads: Vec<Option<Tensor<S>>>,
    visits: Vec<u32>,
}

impl<S: Scalar> Gradients<S> {
    /// Gradient of the loss with respect to `var`; zeros when `var` did not influence it.
    pub fn wrt(&self, var: Var<'_, S>) -> Tensor<S> {
        match &self.grads[var.id] {
            Some(g) => g.clone(),
            None => Tensor::zeros(var.tape.value(var.id).shape()),
        }
    }

    /// Moves the gradient out, leaving `None` behind.
    pub fn take(&mut self, var: Var<'_, S>) -> Tensor<S> {
        match self.grads[var.id].take() {
            Some(g) => g,
            None => Tensor::zeros(var.tape.value(var.id).shape()),
        }
    }

    /// How many times the reverse pass processed each node (0 or 1).
    pub fn visit_counts(&self) -> &[u32] {
        &self.visits
    }
}

fn binary_shapes<S: Scalar>(a: &Tensor<S>, b: &Tensor<S>, what: &str) -> Result<Vec<usize>> {
    if a.shape() == b.shape() {
        Ok(a.shape().to_vec())
    } else if b.is_scalar() {
        Ok(a.shape().to_vec())
    } else if a.is_scalar() {
        Ok(b.shape().to_vec())
    } else {
        shape_err(format!("{what}: shapes {:?} and {:?} differ", a.shape(), b.shape()))
    }
}

fn zip_broadcast<S: Scalar>(a: &Tensor<S>, b: &Tensor<S>, shape: Vec<usize>, f: impl Fn(S, S) -> S) -> Tensor<S> {
    let n: usize = shape.iter().product();
    let pa = |i: usize| if a.is_scalar() { a.item() } else { a.data()[i] };
    let pb = |i: usize| if b.is_scalar() { b.item() } else { b.data()[i] };
    Tensor::new(shape, (0..n).map(|i| f(pa(i), pb(i))).collect()).unwrap()
}

impl<'t, S: Scalar> Var<'t, S> {
    pub fn id(&self) -> usize {
        self.id
    }

    pub fn tape_ref(&self) -> &'t Tape<S> {
        self.tape
    }

    pub fn value(&self) -> Ref<'t, Tensor<S>> {
        self.tape.value(self.id)
    }

    pub fn shape(&self) -> Vec<usize> {
        self.value().shape().to_vec()
    }

    /// Scalar value of a one-element var.
    pub fn item(&self) -> S {
        self.value().item()
    }

    fn same_tape(&self, other: &Var<'t, S>) -> Result<()> {
        if std::ptr::eq(self.tape, other.tape) {
            Ok(())
        } else {
            contract_err("operands recorded on different tapes")
        }
    }

    fn unary(&self, op: Op<S>, f: impl Fn(S) -> S) -> Var<'t, S> {
        let value = {
            let v = self.value();
            Tensor::new(v.shape().to_vec(), v.data().iter().map(|&x| f(x)).collect()).unwrap()
        };
        self.tape.push(value, op)
    }

    pub fn matmul(&self, other: Var<'t, S>) -> Result<Var<'t, S>> {
        self.same_tape(&other)?;
        let value = {
            let a = self.value();
            let b = other.value();
            let (m, k) = a.dims2()?;
            let (k2, n) = b.dims2()?;
            if k != k2 {
                return shape_err(format!("matmul: {m}x{k} by {k2}x{n}"));
            }
            let (ad, bd) = (a.data(), b.data());
            let mut c = vec![S::zero(); m * n];
            for i in 0..m {
                let crow = &mut c[i * n..(i + 1) * n];
                for kk in 0..k {
                    let aik = ad[i * k + kk];
                    if aik == S::zero() {
                        continue;
                    }
                    for (cv, &bv) in crow.iter_mut().zip(&bd[kk * n..(kk + 1) * n]) {
                        *cv += aik * bv;
                    }
                }
            }
            Tensor::matrix(m, n, c)?
        };
        Ok(self.tape.push(value, Op::MatMul(self.id, other.id)))
    }

    pub fn add(&self, other: Var<'t, S>) -> Result<Var<'t, S>> {
        self.same_tape(&other)?;
        let value = {
            let (a, b) = (self.value(), other.value());
            let shape = binary_shapes(&a, &b, "add")?;
            zip_broadcast(&a, &b, shape, |x, y| x + y)
        };
        Ok(self.tape.push(value, Op::Add(self.id, other.id)))
    }

    pub fn sub(&self, other: Var<'t, S>) -> Result<Var<'t, S>> {
        self.same_tape(&other)?;
        let value = {
            let (a, b) = (self.value(), other.value());
            let shape = binary_shapes(&a, &b, "sub")?;
            zip_broadcast(&a, &b, shape, |x, y| x - y)
        };
        Ok(self.tape.push(value, Op::Sub(self.id, other.id)))
    }

    /// Elementwise product.
    pub fn mul(&self, other: Var<'t, S>) -> Result<Var<'t, S>> {
        self.same_tape(&other)?;
        let value = {
            let (a, b) = (self.value(), other.value());
            let shape = binary_shapes(&a, &b, "mul")?;
            zip_broadcast(&a, &b, shape, |x, y| x * y)
        };
        Ok(self.tape.push(value, Op::Mul(self.id, other.id)))
    }

    pub fn scale(&self, k: S) -> Var<'t, S> {
        self.unary(Op::Scale(self.id, k), |x| x * k)
    }

    pub fn add_scalar(&self, k: S) -> Var<'t, S> {
        self.unary(Op::AddScalar(self.id), |x| x + k)
    }

    pub fn sigmoid(&self) -> Var<'t, S> {
        self.unary(Op::Sigmoid(self.id), |x| {
            if x >= S::zero() {
                S::one() / (S::one() + (-x).exp())
            } else {
                let e = x.exp();
                e / (S::one() + e)
            }
        })
    }

    pub fn tanh(&self) -> Var<'t, S> {
        self.unary(Op::Tanh(self.id), |x| x.tanh())
    }

    pub fn relu(&self) -> Var<'t, S> {
        self.unary(Op::Relu(self.id), |x| x.max(S::zero()))
    }

    pub fn abs(&self) -> Var<'t, S> {
        self.unary(Op::Abs(self.id), |x| x.abs())
    }

    /// Max-stabilized log-softmax of a matrix along `axis` (0: columns, 1: rows).
    pub fn log_softmax(&self, axis: usize) -> Result<Var<'t, S>> {
        let value = {
            let v = self.value();
            let (r, c) = v.dims2()?;
            if axis > 1 {
                return shape_err(format!("log_softmax axis {axis} on a matrix"));
            }
            let d = v.data();
            let mut out = vec![S::zero(); r * c];
            let (outer, inner) = if axis == 1 { (r, c) } else { (c, r) };
            let at = |o: usize, i: usize| if axis == 1 { o * c + i } else { i * c + o };
            for o in 0..outer {
                let max = (0..inner).map(|i| d[at(o, i)]).fold(S::neg_infinity(), S::max);
                let lse = max + (0..inner).map(|i| (d[at(o, i)] - max).exp()).sum::<S>().ln();
                for i in 0..inner {
                    out[at(o, i)] = d[at(o, i)] - lse;
                }
            }
            Tensor::matrix(r, c, out)?
        };
        Ok(self.tape.push(value, Op::LogSoftmax { input: self.id, axis }))
    }

    pub fn sum(&self) -> Var<'t, S> {
        let value = Tensor::scalar(self.value().data().iter().copied().sum());
        self.tape.push(value, Op::Sum(self.id))
    }

    pub fn mean(&self) -> Var<'t, S> {
        let value = {
            let v = self.value();
            Tensor::scalar(v.data().iter().copied().sum::<S>() / S::of_usize(v.numel()))
        };
        self.tape.push(value, Op::Mean(self.id))
    }

    pub fn transpose(&self) -> Result<Var<'t, S>> {
        let value = {
            let v = self.value();
            let (r, c) = v.dims2()?;
            let d = v.data();
            Tensor::matrix(c, r, (0..r * c).map(|i| d[(i % r) * c + i / r]).collect())?
        };
        Ok(self.tape.push(value, Op::Transpose(self.id)))
    }

    /// Sub-matrix `start..start+len` along `axis`.
    pub fn slice(&self, axis: usize, start: usize, len: usize) -> Result<Var<'t, S>> {
        let value = {
            let v = self.value();
            let (r, c) = v.dims2()?;
            let extent = match axis {
                0 => r,
                1 => c,
                _ => return shape_err(format!("slice axis {axis} on a matrix")),
            };
            if len == 0 || start + len > extent {
                return shape_err(format!("slice {start}..{} of extent {extent}", start + len));
            }
            let d = v.data();
            if axis == 0 {
                Tensor::matrix(len, c, d[start * c..(start + len) * c].to_vec())?
            } else {
                let mut out = Vec::with_capacity(r * len);
                for i in 0..r {
                    out.extend_from_slice(&d[i * c + start..i * c + start + len]);
                }
                Tensor::matrix(r, len, out)?
            }
        };
        Ok(self.tape.push(value, Op::Slice { input: self.id, axis, start }))
    }

    /// Copies a `1 x C` row into `n` rows.
    pub fn repeat_rows(&self, n: usize) -> Result<Var<'t, S>> {
        let value = {
            let v = self.value();
            let (r, c) = v.dims2()?;
            if r != 1 || n == 0 {
                return shape_err(format!("repeat_rows needs a 1xC row and n >= 1, got {r}x{c}, n={n}"));
            }
            let mut out = Vec::with_capacity(n * c);
            for _ in 0..n {
                out.extend_from_slice(v.data());
            }
            Tensor::matrix(n, c, out)?
        };
        Ok(self.tape.push(value, Op::RepeatRows(self.id)))
    }

    /// Rows of `self` (a `V x D` table) selected by `indices`.
    pub fn embedding_lookup(&self, indices: &[usize]) -> Result<Var<'t, S>> {
        let value = {
            let v = self.value();
            let (rows, d) = v.dims2()?;
            if indices.is_empty() {
                return shape_err("embedding lookup with no indices");
            }
            let mut out = Vec::with_capacity(indices.len() * d);
            for &ix in indices {
                if ix >= rows {
                    return Err(crate::error::Error::Lookup { index: ix, size: rows });
                }
                out.extend_from_slice(&v.data()[ix * d..(ix + 1) * d]);
            }
            Tensor::matrix(indices.len(), d, out)?
        };
        Ok(self.tape.push(
            value,
            Op::Embedding {
                table: self.id,
                indices: indices.to_vec(),
            },
        ))
    }

    /// Scalar node whose value and local gradient were computed outside the tape.
    pub fn external_scalar(&self, value: S, grad: Tensor<S>) -> Result<Var<'t, S>> {
        if grad.shape() != self.value().shape() {
            return shape_err(format!(
                "external gradient shape {:?} vs input {:?}",
                grad.shape(),
                self.value().shape()
            ));
        }
        Ok(self.tape.push(Tensor::scalar(value), Op::External { input: self.id, grad }))
    }
}

/// Concatenates matrices along `axis`.
pub fn concat<'t, S: Scalar>(parts: &[Var<'t, S>], axis: usize) -> Result<Var<'t, S>> {
    let Some(first) = parts.first() else {
        return shape_err("concat of zero tensors");
    };
    for p in parts {
        first.same_tape(p)?;
    }
    let tape = first.tape;
    let value = {
        let vals: Vec<Ref<'_, Tensor<S>>> = parts.iter().map(|p| p.value()).collect();
        let dims: Vec<(usize, usize)> = vals.iter().map(|v| v.dims2()).collect::<Result<_>>()?;
        match axis {
            0 => {
                let c = dims[0].1;
                if dims.iter().any(|d| d.1 != c) {
                    return shape_err(format!("concat rows: column counts {dims:?}"));
                }
                let r: usize = dims.iter().map(|d| d.0).sum();
                let mut out = Vec::with_capacity(r * c);
                for v in &vals {
                    out.extend_from_slice(v.data());
                }
                Tensor::matrix(r, c, out)?
            }
            1 => {
                let r = dims[0].0;
                if dims.iter().any(|d| d.0 != r) {
                    return shape_err(format!("concat columns: row counts {dims:?}"));
                }
                let c: usize = dims.iter().map(|d| d.1).sum();
                let mut out = Vec::with_capacity(r * c);
                for i in 0..r {
                    for (v, d) in vals.iter().zip(&dims) {
                        out.extend_from_slice(&v.data()[i * d.1..(i + 1) * d.1]);
                    }
                }
                Tensor::matrix(r, c, out)?
            }
            _ => return shape_err(format!("concat axis {axis} on matrices")),
        }
    };
    Ok(tape.push(
        value,
        Op::Concat {
            parts: parts.iter().map(|p| p.id).collect(),
            axis,
        },
    ))
}
