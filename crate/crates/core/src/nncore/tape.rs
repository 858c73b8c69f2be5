use std::collections::HashMap;

use rand::Rng;

use super::{check_rate, ParamId, ParamStore, RunMode, Tensor};
use crate::{Error, Result};

/// Probability clamp applied inside [`Tape::bce`].
pub const BCE_EPS: f64 = 1e-7;

/// Index of a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct NodeId(usize);

#[derive(Debug)]
enum Value {
    Owned(Vec<f64>),
    Param(usize),
}

#[derive(Debug)]
enum Op {
    Leaf,
    MatMul(NodeId, NodeId),
    MatVec(NodeId, NodeId),
    Add(NodeId, NodeId),
    Sub(NodeId, NodeId),
    Mul(NodeId, NodeId),
    AddBias(NodeId, NodeId),
    Affine(NodeId, f64),
    Sigmoid(NodeId),
    Tanh(NodeId),
    Relu(NodeId),
    Softmax(NodeId, usize),
    CumSum(NodeId, usize),
    Cumax(NodeId, usize),
    RepeatEach(NodeId, usize),
    Concat(Vec<NodeId>, usize),
    Reshape(NodeId),
    Sum(NodeId),
    Mean(NodeId),
    Bce { p: NodeId, target: f64, clamped: bool },
}

#[derive(Debug)]
struct Node {
    shape: Vec<usize>,
    value: Value,
    op: Op,
}

/// Records operations in creation order, which is a topological order of
/// the computation graph. Parameters are referenced, not copied.
pub struct Tape<'p> {
    params: Option<&'p ParamStore>,
    nodes: Vec<Node>,
    param_nodes: HashMap<usize, NodeId>,
}

fn softmax_along(xv: &[f64], shape: &[usize], axis: usize) -> Vec<f64> {
    let (outer, len, inner) = axis_layout(shape, axis);
    let mut out = vec![0.0; xv.len()];
    for o in 0..outer {
        for i in 0..inner {
            let at = |k: usize| o * len * inner + k * inner + i;
            let max = (0..len).map(|k| xv[at(k)]).fold(f64::NEG_INFINITY, f64::max);
            let mut total = 0.0;
            for k in 0..len {
                let e = (xv[at(k)] - max).exp();
                out[at(k)] = e;
                total += e;
            }
            for k in 0..len {
                out[at(k)] /= total;
            }
        }
    }
    out
}

/// `(outer, len, inner)` decomposition of `shape` around `axis`.
fn axis_layout(shape: &[usize], axis: usize) -> (usize, usize, usize) {
    let outer = shape[..axis].iter().product();
    let inner = shape[axis + 1..].iter().product();
    (outer, shape[axis], inner)
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

impl Default for Tape<'_> {
    fn default() -> Self {
        Self::new()
    }
}

impl<'p> Tape<'p> {
    /// A tape without parameters; only constants can be leaves.
    pub fn new() -> Self {
        Tape {
            params: None,
            nodes: Vec::new(),
            param_nodes: HashMap::new(),
        }
    }

    pub fn with_params(params: &'p ParamStore) -> Self {
        Tape {
            params: Some(params),
            nodes: Vec::new(),
            param_nodes: HashMap::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, shape: Vec<usize>, data: Vec<f64>, op: Op) -> NodeId {
        debug_assert_eq!(shape.iter().product::<usize>(), data.len());
        self.nodes.push(Node {
            shape,
            value: Value::Owned(data),
            op,
        });
        NodeId(self.nodes.len() - 1)
    }

    pub fn value(&self, id: NodeId) -> &[f64] {
        match &self.nodes[id.0].value {
            Value::Owned(v) => v,
            Value::Param(i) => self.params.expect("param node without store").tensors[*i].data(),
        }
    }

    pub fn shape(&self, id: NodeId) -> &[usize] {
        &self.nodes[id.0].shape
    }

    pub fn tensor(&self, id: NodeId) -> Tensor {
        Tensor::new(self.shape(id).to_vec(), self.value(id).to_vec()).expect("node shape is consistent")
    }

    /// Value of a single-element node.
    pub fn scalar(&self, id: NodeId) -> f64 {
        let v = self.value(id);
        debug_assert_eq!(v.len(), 1);
        v[0]
    }

    pub fn constant(&mut self, t: Tensor) -> NodeId {
        let shape = t.shape().to_vec();
        self.push(shape, t.into_data(), Op::Leaf)
    }

    /// Leaf node for a parameter of the bound store. Repeated calls return the
    /// same node so gradients from every use accumulate in one place.
    pub fn param(&mut self, id: ParamId) -> NodeId {
        if let Some(&n) = self.param_nodes.get(&id.0) {
            return n;
        }
        let store = self.params.expect("tape has no parameter store");
        let shape = store.get(id).shape().to_vec();
        self.nodes.push(Node {
            shape,
            value: Value::Param(id.0),
            op: Op::Leaf,
        });
        let n = NodeId(self.nodes.len() - 1);
        self.param_nodes.insert(id.0, n);
        n
    }

    fn same_shape(&self, op: &'static str, a: NodeId, b: NodeId) -> Result<()> {
        if self.shape(a) != self.shape(b) {
            return Err(Error::shape(op, format!("{:?} vs {:?}", self.shape(a), self.shape(b))));
        }
        Ok(())
    }

    fn check_axis(&self, op: &'static str, x: NodeId, axis: usize) -> Result<()> {
        if axis >= self.shape(x).len() {
            return Err(Error::shape(op, format!("axis {axis} out of range for {:?}", self.shape(x))));
        }
        Ok(())
    }

    fn map(&mut self, x: NodeId, f: impl Fn(f64) -> f64, op: Op) -> NodeId {
        let data = self.value(x).iter().map(|&v| f(v)).collect();
        let shape = self.shape(x).to_vec();
        self.push(shape, data, op)
    }

    fn zip(&mut self, a: NodeId, b: NodeId, f: impl Fn(f64, f64) -> f64, op: Op) -> NodeId {
        let data = self.value(a).iter().zip(self.value(b)).map(|(&x, &y)| f(x, y)).collect();
        let shape = self.shape(a).to_vec();
        self.push(shape, data, op)
    }

    /// `[m×k] · [k×n] → [m×n]`.
    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa.len() != 2 || sb.len() != 2 || sa[1] != sb[0] {
            return Err(Error::shape("matmul", format!("{sa:?} · {sb:?}")));
        }
        let (m, k, n) = (sa[0], sa[1], sb[1]);
        let (av, bv) = (self.value(a), self.value(b));
        let mut out = vec![0.0; m * n];
        for i in 0..m {
            let row = &mut out[i * n..(i + 1) * n];
            for p in 0..k {
                let aip = av[i * k + p];
                for (o, &bpj) in row.iter_mut().zip(&bv[p * n..(p + 1) * n]) {
                    *o += aip * bpj;
                }
            }
        }
        Ok(self.push(vec![m, n], out, Op::MatMul(a, b)))
    }

    /// `[r×c] · [c] → [r]`.
    pub fn matvec(&mut self, m: NodeId, x: NodeId) -> Result<NodeId> {
        let (sm, sx) = (self.shape(m), self.shape(x));
        if sm.len() != 2 || sx.len() != 1 || sm[1] != sx[0] {
            return Err(Error::shape("matvec", format!("{sm:?} · {sx:?}")));
        }
        let (r, c) = (sm[0], sm[1]);
        let (mv, xv) = (self.value(m), self.value(x));
        let out = (0..r)
            .map(|i| mv[i * c..(i + 1) * c].iter().zip(xv).map(|(a, b)| a * b).sum())
            .collect();
        Ok(self.push(vec![r], out, Op::MatVec(m, x)))
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.same_shape("add", a, b)?;
        Ok(self.zip(a, b, |x, y| x + y, Op::Add(a, b)))
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.same_shape("sub", a, b)?;
        Ok(self.zip(a, b, |x, y| x - y, Op::Sub(a, b)))
    }

    /// Elementwise (Hadamard) product.
    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.same_shape("mul", a, b)?;
        Ok(self.zip(a, b, |x, y| x * y, Op::Mul(a, b)))
    }

    /// Adds a vector of length `n` to every length-`n` row of `x`.
    pub fn add_bias(&mut self, x: NodeId, b: NodeId) -> Result<NodeId> {
        let (sx, sb) = (self.shape(x), self.shape(b));
        let n = *sx.last().unwrap_or(&1);
        if sb.len() != 1 || sb[0] != n || sx.is_empty() {
            return Err(Error::shape("add_bias", format!("{sx:?} + {sb:?}")));
        }
        let bv = self.value(b);
        let data = self
            .value(x)
            .chunks_exact(n)
            .flat_map(|row| row.iter().zip(bv).map(|(a, c)| a + c))
            .collect();
        let shape = sx.to_vec();
        Ok(self.push(shape, data, Op::AddBias(x, b)))
    }

    /// `scale · x + shift`.
    pub fn affine(&mut self, x: NodeId, scale: f64, shift: f64) -> NodeId {
        self.map(x, |v| scale * v + shift, Op::Affine(x, scale))
    }

    /// `1 − x`.
    pub fn one_minus(&mut self, x: NodeId) -> NodeId {
        self.affine(x, -1.0, 1.0)
    }

    pub fn sigmoid(&mut self, x: NodeId) -> NodeId {
        self.map(x, sigmoid, Op::Sigmoid(x))
    }

    pub fn tanh(&mut self, x: NodeId) -> NodeId {
        self.map(x, f64::tanh, Op::Tanh(x))
    }

    pub fn relu(&mut self, x: NodeId) -> NodeId {
        self.map(x, |v| v.max(0.0), Op::Relu(x))
    }

    /// Softmax along `axis`, computed with the slice maximum subtracted.
    pub fn softmax(&mut self, x: NodeId, axis: usize) -> Result<NodeId> {
        self.check_axis("softmax", x, axis)?;
        let shape = self.shape(x).to_vec();
        let out = softmax_along(self.value(x), &shape, axis);
        Ok(self.push(shape, out, Op::Softmax(x, axis)))
    }

    /// Running sum along `axis`.
    pub fn cumsum(&mut self, x: NodeId, axis: usize) -> Result<NodeId> {
        self.check_axis("cumsum", x, axis)?;
        let shape = self.shape(x).to_vec();
        let (outer, len, inner) = axis_layout(&shape, axis);
        let mut out = self.value(x).to_vec();
        for o in 0..outer {
            for i in 0..inner {
                for k in 1..len {
                    let at = o * len * inner + k * inner + i;
                    out[at] += out[at - inner];
                }
            }
        }
        Ok(self.push(shape, out, Op::CumSum(x, axis)))
    }

    /// `cumsum(softmax(x))` along `axis`: a nondecreasing profile ending at 1.
    ///
    /// Evaluated as running sums of the shifted exponentials divided by their
    /// total, so every output lies in `(0, 1]` and the last is exactly 1
    /// (summing normalized terms can overshoot 1 by an ulp).
    pub fn cumax(&mut self, x: NodeId, axis: usize) -> Result<NodeId> {
        self.check_axis("cumax", x, axis)?;
        let shape = self.shape(x).to_vec();
        let (outer, len, inner) = axis_layout(&shape, axis);
        let xv = self.value(x);
        let mut out = vec![0.0; xv.len()];
        for o in 0..outer {
            for i in 0..inner {
                let at = |k: usize| o * len * inner + k * inner + i;
                let max = (0..len).map(|k| xv[at(k)]).fold(f64::NEG_INFINITY, f64::max);
                let mut run = 0.0;
                for k in 0..len {
                    run += (xv[at(k)] - max).exp();
                    out[at(k)] = run;
                }
                for k in 0..len {
                    out[at(k)] /= run;
                }
            }
        }
        Ok(self.push(shape, out, Op::Cumax(x, axis)))
    }

    /// Repeats every element of a vector `k` times: `[a, b] → [a, a, b, b]`
    /// for `k = 2`.
    pub fn repeat_each(&mut self, x: NodeId, k: usize) -> Result<NodeId> {
        if self.shape(x).len() != 1 || k == 0 {
            return Err(Error::shape("repeat_each", format!("{:?} × {k}", self.shape(x))));
        }
        let data: Vec<f64> = self
            .value(x)
            .iter()
            .flat_map(|&v| std::iter::repeat_n(v, k))
            .collect();
        Ok(self.push(vec![data.len()], data, Op::RepeatEach(x, k)))
    }

    /// Concatenates tensors that agree on every extent except `axis`.
    pub fn concat(&mut self, xs: &[NodeId], axis: usize) -> Result<NodeId> {
        let first = *xs.first().ok_or_else(|| Error::shape("concat", "no inputs"))?;
        self.check_axis("concat", first, axis)?;
        let base = self.shape(first).to_vec();
        for &x in xs {
            let s = self.shape(x);
            let compatible = s.len() == base.len()
                && s.iter().zip(&base).enumerate().all(|(d, (a, b))| d == axis || a == b);
            if !compatible {
                return Err(Error::shape("concat", format!("{base:?} vs {s:?} on axis {axis}")));
            }
        }
        let total: usize = xs.iter().map(|&x| self.shape(x)[axis]).sum();
        let mut shape = base.clone();
        shape[axis] = total;
        let (outer, _, inner) = axis_layout(&shape, axis);
        let mut out = Vec::with_capacity(outer * total * inner);
        for o in 0..outer {
            for &x in xs {
                let block = self.shape(x)[axis] * inner;
                out.extend_from_slice(&self.value(x)[o * block..(o + 1) * block]);
            }
        }
        Ok(self.push(shape, out, Op::Concat(xs.to_vec(), axis)))
    }

    /// Stacks equally shaped tensors along a new leading axis.
    pub fn stack(&mut self, xs: &[NodeId]) -> Result<NodeId> {
        let rows = xs
            .iter()
            .map(|&x| {
                let mut s = vec![1];
                s.extend_from_slice(self.shape(x));
                self.reshape(x, &s)
            })
            .collect::<Result<Vec<_>>>()?;
        self.concat(&rows, 0)
    }

    pub fn reshape(&mut self, x: NodeId, shape: &[usize]) -> Result<NodeId> {
        if shape.iter().product::<usize>() != self.value(x).len() {
            return Err(Error::shape("reshape", format!("{:?} → {shape:?}", self.shape(x))));
        }
        let data = self.value(x).to_vec();
        Ok(self.push(shape.to_vec(), data, Op::Reshape(x)))
    }

    pub fn sum(&mut self, x: NodeId) -> NodeId {
        let s = self.value(x).iter().sum();
        self.push(Vec::new(), vec![s], Op::Sum(x))
    }

    pub fn mean(&mut self, x: NodeId) -> NodeId {
        let v = self.value(x);
        let m = v.iter().sum::<f64>() / v.len() as f64;
        self.push(Vec::new(), vec![m], Op::Mean(x))
    }

    /// Inverted dropout: in training mode each element is zeroed with
    /// probability `rate` and survivors are scaled by `1 / (1 − rate)`.
    /// Outside training, or with `rate = 0`, returns `x` itself.
    pub fn dropout(&mut self, x: NodeId, rate: f64, mode: &mut RunMode) -> Result<NodeId> {
        check_rate(rate)?;
        if !mode.is_training() || rate == 0.0 {
            return Ok(x);
        }
        let keep = 1.0 / (1.0 - rate);
        let n = self.value(x).len();
        let rng = mode.rng();
        let mask: Vec<f64> = (0..n)
            .map(|_| if rng.gen::<f64>() < rate { 0.0 } else { keep })
            .collect();
        let mask = self.constant(Tensor::new(self.shape(x).to_vec(), mask)?);
        self.mul(x, mask)
    }

    /// Binary cross-entropy of a single probability against a 0/1 target,
    /// with `p` clamped to `[BCE_EPS, 1 − BCE_EPS]`.
    pub fn bce(&mut self, p: NodeId, target: f64) -> Result<NodeId> {
        let v = self.value(p);
        if v.len() != 1 {
            return Err(Error::shape("bce", format!("expected one probability, got {:?}", self.shape(p))));
        }
        let raw = v[0];
        if !raw.is_finite() {
            return Err(Error::NonFinite("loss input probability".into()));
        }
        let q = raw.clamp(BCE_EPS, 1.0 - BCE_EPS);
        let loss = -(target * q.ln() + (1.0 - target) * (1.0 - q).ln());
        let clamped = q != raw;
        Ok(self.push(
            Vec::new(),
            vec![loss],
            Op::Bce {
                p,
                target,
                clamped,
            },
        ))
    }

    /// Reverse-mode sweep from a scalar node. Every node is visited once, in
    /// reverse creation order.
    pub fn backward(&self, loss: NodeId) -> Result<Gradients> {
        if self.value(loss).len() != 1 {
            return Err(Error::shape("backward", format!("loss must be scalar, got {:?}", self.shape(loss))));
        }
        if !self.value(loss)[0].is_finite() {
            return Err(Error::NonFinite("loss".into()));
        }
        let mut grads: Vec<Option<Vec<f64>>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(vec![1.0]);

        for i in (0..=loss.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            self.propagate(i, &g, &mut grads);
            grads[i] = Some(g);
        }
        Ok(Gradients {
            grads,
            param_nodes: self.param_nodes.clone(),
        })
    }

    fn propagate(&self, i: usize, g: &[f64], grads: &mut [Option<Vec<f64>>]) {
        let node = &self.nodes[i];
        let out = self.value(NodeId(i));
        macro_rules! acc {
            ($id:expr) => {{
                let id: NodeId = $id;
                let len = self.value(id).len();
                grads[id.0].get_or_insert_with(|| vec![0.0; len])
            }};
        }
        match &node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                let (sa, sb) = (self.shape(*a), self.shape(*b));
                let (m, k, n) = (sa[0], sa[1], sb[1]);
                let (av, bv) = (self.value(*a), self.value(*b));
                let ga = acc!(*a);
                for i in 0..m {
                    for p in 0..k {
                        ga[i * k + p] += (0..n).map(|j| g[i * n + j] * bv[p * n + j]).sum::<f64>();
                    }
                }
                let gb = acc!(*b);
                for i in 0..m {
                    for p in 0..k {
                        let aip = av[i * k + p];
                        for j in 0..n {
                            gb[p * n + j] += aip * g[i * n + j];
                        }
                    }
                }
            }
            Op::MatVec(m, x) => {
                let c = self.shape(*m)[1];
                let (mv, xv) = (self.value(*m), self.value(*x));
                let gm = acc!(*m);
                for (r, &gr) in g.iter().enumerate() {
                    for (o, &xj) in gm[r * c..(r + 1) * c].iter_mut().zip(xv) {
                        *o += gr * xj;
                    }
                }
                let gx = acc!(*x);
                for (r, &gr) in g.iter().enumerate() {
                    for (o, &w) in gx.iter_mut().zip(&mv[r * c..(r + 1) * c]) {
                        *o += gr * w;
                    }
                }
            }
            Op::Add(a, b) => {
                add_into(acc!(*a), g, 1.0);
                add_into(acc!(*b), g, 1.0);
            }
            Op::Sub(a, b) => {
                add_into(acc!(*a), g, 1.0);
                add_into(acc!(*b), g, -1.0);
            }
            Op::Mul(a, b) => {
                let (av, bv) = (self.value(*a), self.value(*b));
                let ga: Vec<f64> = g.iter().zip(bv).map(|(g, b)| g * b).collect();
                let gb: Vec<f64> = g.iter().zip(av).map(|(g, a)| g * a).collect();
                add_into(acc!(*a), &ga, 1.0);
                add_into(acc!(*b), &gb, 1.0);
            }
            Op::AddBias(x, b) => {
                add_into(acc!(*x), g, 1.0);
                let n = self.shape(*b)[0];
                let gb = acc!(*b);
                for row in g.chunks_exact(n) {
                    add_into(gb, row, 1.0);
                }
            }
            Op::Affine(x, scale) => add_into(acc!(*x), g, *scale),
            Op::Sigmoid(x) => {
                let gx = acc!(*x);
                for ((o, &gi), &y) in gx.iter_mut().zip(g).zip(out) {
                    *o += gi * y * (1.0 - y);
                }
            }
            Op::Tanh(x) => {
                let gx = acc!(*x);
                for ((o, &gi), &y) in gx.iter_mut().zip(g).zip(out) {
                    *o += gi * (1.0 - y * y);
                }
            }
            Op::Relu(x) => {
                let xv = self.value(*x);
                let gx = acc!(*x);
                for ((o, &gi), &v) in gx.iter_mut().zip(g).zip(xv) {
                    if v > 0.0 {
                        *o += gi;
                    }
                }
            }
            Op::Softmax(x, axis) => {
                let (outer, len, inner) = axis_layout(&node.shape, *axis);
                let gx = acc!(*x);
                for o in 0..outer {
                    for i in 0..inner {
                        let at = |k: usize| o * len * inner + k * inner + i;
                        let dot: f64 = (0..len).map(|k| g[at(k)] * out[at(k)]).sum();
                        for k in 0..len {
                            gx[at(k)] += out[at(k)] * (g[at(k)] - dot);
                        }
                    }
                }
            }
            Op::CumSum(x, axis) => {
                let (outer, len, inner) = axis_layout(&node.shape, *axis);
                let gx = acc!(*x);
                for o in 0..outer {
                    for i in 0..inner {
                        let mut run = 0.0;
                        for k in (0..len).rev() {
                            let at = o * len * inner + k * inner + i;
                            run += g[at];
                            gx[at] += run;
                        }
                    }
                }
            }
            Op::Cumax(x, axis) => {
                let (outer, len, inner) = axis_layout(&node.shape, *axis);
                let soft = softmax_along(self.value(*x), &node.shape, *axis);
                let gx = acc!(*x);
                let mut gs = vec![0.0; len];
                for o in 0..outer {
                    for i in 0..inner {
                        let at = |k: usize| o * len * inner + k * inner + i;
                        let mut run = 0.0;
                        for k in (0..len).rev() {
                            run += g[at(k)];
                            gs[k] = run;
                        }
                        let dot: f64 = (0..len).map(|k| gs[k] * soft[at(k)]).sum();
                        for k in 0..len {
                            gx[at(k)] += soft[at(k)] * (gs[k] - dot);
                        }
                    }
                }
            }
            Op::RepeatEach(x, k) => {
                let gx = acc!(*x);
                for (o, chunk) in gx.iter_mut().zip(g.chunks_exact(*k)) {
                    *o += chunk.iter().sum::<f64>();
                }
            }
            Op::Concat(xs, axis) => {
                let (outer, total, inner) = axis_layout(&node.shape, *axis);
                let mut offset = 0;
                for &x in xs {
                    let block = self.shape(x)[*axis] * inner;
                    let gx = acc!(x);
                    for o in 0..outer {
                        let src = o * total * inner + offset;
                        add_into(&mut gx[o * block..(o + 1) * block], &g[src..src + block], 1.0);
                    }
                    offset += block;
                }
            }
            Op::Reshape(x) => add_into(acc!(*x), g, 1.0),
            Op::Sum(x) => acc!(*x).iter_mut().for_each(|o| *o += g[0]),
            Op::Mean(x) => {
                let gx = acc!(*x);
                let s = g[0] / gx.len() as f64;
                gx.iter_mut().for_each(|o| *o += s);
            }
            Op::Bce { p, target, clamped } => {
                if !clamped {
                    let q = self.value(*p)[0];
                    let d = -target / q + (1.0 - target) / (1.0 - q);
                    acc!(*p)[0] += g[0] * d;
                }
            }
        }
    }
}

fn add_into(dst: &mut [f64], src: &[f64], scale: f64) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d += scale * s;
    }
}

/// Result of [`Tape::backward`].
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Vec<f64>>>,
    param_nodes: HashMap<usize, NodeId>,
}

impl Gradients {
    /// Gradient of the loss with respect to a node, if the loss depends on it.
    pub fn wrt(&self, id: NodeId) -> Option<&[f64]> {
        self.grads.get(id.0).and_then(|g| g.as_deref())
    }

    pub fn param(&self, id: ParamId) -> Option<&[f64]> {
        self.param_nodes.get(&id.0).and_then(|n| self.wrt(*n))
    }

    /// One gradient buffer per parameter of `store`, zero where the loss does
    /// not reach the parameter.
    pub fn into_param_grads(mut self, store: &ParamStore) -> Vec<Vec<f64>> {
        store
            .ids()
            .map(|id| {
                self.param_nodes
                    .get(&id.0)
                    .and_then(|n| self.grads[n.0].take())
                    .unwrap_or_else(|| vec![0.0; store.get(id).len()])
            })
            .collect()
    }
}
