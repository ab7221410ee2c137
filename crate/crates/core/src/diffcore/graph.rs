//! Define-by-run computation graph with reverse-mode differentiation.
//!
//! Nodes are appended in evaluation order, so the node list is already a
//! topological order and the graph cannot contain cycles. Every op computes
//! its value eagerly; [`Graph::backward`] walks the list in reverse.

use crate::error::{Error, Result};

use super::tensor::Tensor;

/// Inputs to `log` below this value are clamped before taking the log.
pub const LOG_FLOOR: f64 = 1e-12;

/// Handle to a node inside one [`Graph`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct NodeId(usize);

impl NodeId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Debug)]
enum Op {
    Leaf,
    Affine {
        input: NodeId,
        weights: NodeId,
        bias: NodeId,
    },
    Relu(NodeId),
    Sigmoid(NodeId),
    SoftmaxRows(NodeId),
    Log(NodeId),
    Square(NodeId),
    Add(NodeId, NodeId),
    Sub(NodeId, NodeId),
    Mul(NodeId, NodeId),
    Scale(NodeId, f64),
    Sum(NodeId),
    Mean(NodeId),
    Grl {
        input: NodeId,
        lambda: f64,
    },
    GatherMean {
        input: NodeId,
        groups: Vec<Vec<usize>>,
    },
}

#[derive(Clone, Debug)]
struct Node {
    op: Op,
    value: Tensor,
    grad: Tensor,
}

#[derive(Clone, Debug, Default)]
pub struct Graph {
    nodes: Vec<Node>,
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

    fn push(&mut self, op: Op, value: Tensor) -> NodeId {
        let grad = Tensor::zeros(value.shape());
        self.nodes.push(Node { op, value, grad });
        NodeId(self.nodes.len() - 1)
    }

    /// Adds an input or parameter tensor.
    pub fn leaf(&mut self, value: Tensor) -> NodeId {
        self.push(Op::Leaf, value)
    }

    pub fn value(&self, id: NodeId) -> &Tensor {
        &self.nodes[id.0].value
    }

    pub fn grad(&self, id: NodeId) -> &Tensor {
        &self.nodes[id.0].grad
    }

    pub fn zero_gradients(&mut self) {
        for node in &mut self.nodes {
            node.grad.fill(0.0);
        }
    }

    fn shape(&self, id: NodeId) -> &[usize] {
        self.nodes[id.0].value.shape()
    }

    fn same_shape(&self, op: &'static str, a: NodeId, b: NodeId) -> Result<()> {
        if self.shape(a) != self.shape(b) {
            return Err(Error::ShapeMismatch {
                op,
                left: self.shape(a).to_vec(),
                right: self.shape(b).to_vec(),
            });
        }
        Ok(())
    }

    /// `input [batch × in] · weights [in × out] + bias [out]`.
    pub fn affine(&mut self, input: NodeId, weights: NodeId, bias: NodeId) -> Result<NodeId> {
        let (x, w, b) = (self.value(input), self.value(weights), self.value(bias));
        if x.shape().len() != 2 || w.shape().len() != 2 || x.shape()[1] != w.shape()[0] {
            return Err(Error::ShapeMismatch {
                op: "affine",
                left: x.shape().to_vec(),
                right: w.shape().to_vec(),
            });
        }
        if b.shape() != [w.shape()[1]] {
            return Err(Error::ShapeMismatch {
                op: "affine bias",
                left: w.shape().to_vec(),
                right: b.shape().to_vec(),
            });
        }
        let (n, k, m) = (x.shape()[0], x.shape()[1], w.shape()[1]);
        let mut out = Vec::with_capacity(n * m);
        for r in 0..n {
            out.extend_from_slice(b.data());
            let row = &mut out[r * m..(r + 1) * m];
            for (i, &xi) in x.row(r).iter().enumerate().take(k) {
                if xi == 0.0 {
                    continue;
                }
                for (o, wv) in row.iter_mut().zip(w.row(i)) {
                    *o += xi * wv;
                }
            }
        }
        let value = Tensor::matrix(n, m, out)?;
        Ok(self.push(
            Op::Affine {
                input,
                weights,
                bias,
            },
            value,
        ))
    }

    pub fn relu(&mut self, input: NodeId) -> NodeId {
        let value = self.value(input).map(|v| v.max(0.0));
        self.push(Op::Relu(input), value)
    }

    pub fn sigmoid(&mut self, input: NodeId) -> NodeId {
        let value = self.value(input).map(sigmoid);
        self.push(Op::Sigmoid(input), value)
    }

    /// Row-wise softmax of a `[batch × K]` matrix, `K ≥ 2`.
    pub fn softmax_rows(&mut self, input: NodeId) -> Result<NodeId> {
        let x = self.value(input);
        if x.shape().len() != 2 || x.shape()[1] < 2 {
            return Err(Error::InvalidArgument(format!(
                "softmax_rows needs a [batch × K] input with K ≥ 2, got {:?}",
                x.shape()
            )));
        }
        let mut out = Vec::with_capacity(x.len());
        for row in x.row_iter() {
            out.extend(softmax(row));
        }
        let value = Tensor::new(x.shape().to_vec(), out)?;
        Ok(self.push(Op::SoftmaxRows(input), value))
    }

    /// Elementwise natural log with inputs clamped to [`LOG_FLOOR`].
    pub fn log(&mut self, input: NodeId) -> NodeId {
        let value = self.value(input).map(|v| v.max(LOG_FLOOR).ln());
        self.push(Op::Log(input), value)
    }

    pub fn square(&mut self, input: NodeId) -> NodeId {
        let value = self.value(input).map(|v| v * v);
        self.push(Op::Square(input), value)
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.binary("add", a, b, Op::Add(a, b), |x, y| x + y)
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.binary("sub", a, b, Op::Sub(a, b), |x, y| x - y)
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.binary("mul", a, b, Op::Mul(a, b), |x, y| x * y)
    }

    fn binary(
        &mut self,
        name: &'static str,
        a: NodeId,
        b: NodeId,
        op: Op,
        f: impl Fn(f64, f64) -> f64,
    ) -> Result<NodeId> {
        self.same_shape(name, a, b)?;
        let (x, y) = (self.value(a), self.value(b));
        let data = x.data().iter().zip(y.data()).map(|(&p, &q)| f(p, q)).collect();
        let value = Tensor::new(x.shape().to_vec(), data)?;
        Ok(self.push(op, value))
    }

    pub fn scale(&mut self, input: NodeId, factor: f64) -> NodeId {
        let value = self.value(input).map(|v| v * factor);
        self.push(Op::Scale(input, factor), value)
    }

    pub fn sum(&mut self, input: NodeId) -> NodeId {
        let value = Tensor::scalar(self.value(input).sum());
        self.push(Op::Sum(input), value)
    }

    pub fn mean(&mut self, input: NodeId) -> NodeId {
        let x = self.value(input);
        let value = Tensor::scalar(x.sum() / x.len() as f64);
        self.push(Op::Mean(input), value)
    }

    /// Gradient reversal: identity forward, `-lambda ×` upstream gradient backward.
    pub fn grl(&mut self, input: NodeId, lambda: f64) -> NodeId {
        let value = self.value(input).clone();
        self.push(Op::Grl { input, lambda }, value)
    }

    /// Output row `g` is the mean of the input rows listed in `groups[g]`.
    pub fn gather_mean(&mut self, input: NodeId, groups: Vec<Vec<usize>>) -> Result<NodeId> {
        let x = self.value(input);
        if x.shape().len() != 2 {
            return Err(Error::InvalidArgument(format!(
                "gather_mean needs a matrix, got {:?}",
                x.shape()
            )));
        }
        if groups.is_empty() {
            return Err(Error::Empty("gather_mean groups"));
        }
        let width = x.cols();
        let mut out = Vec::with_capacity(groups.len() * width);
        for group in &groups {
            if group.is_empty() {
                return Err(Error::Empty("gather_mean group"));
            }
            let mut acc = vec![0.0; width];
            for &r in group {
                if r >= x.rows() {
                    return Err(Error::InvalidArgument(format!(
                        "gather_mean row {r} out of range for {} rows",
                        x.rows()
                    )));
                }
                for (a, v) in acc.iter_mut().zip(x.row(r)) {
                    *a += v;
                }
            }
            let n = group.len() as f64;
            out.extend(acc.into_iter().map(|a| a / n));
        }
        let value = Tensor::matrix(groups.len(), width, out)?;
        Ok(self.push(Op::GatherMean { input, groups }, value))
    }

    /// Accumulates `d root / d node` into every node's gradient.
    ///
    /// Gradients add onto whatever is already stored; call
    /// [`Graph::zero_gradients`] between independent passes.
    pub fn backward(&mut self, root: NodeId) -> Result<()> {
        let root_shape = self.shape(root);
        if root_shape.iter().product::<usize>() != 1 {
            return Err(Error::NonScalarRoot(root_shape.to_vec()));
        }
        let mut adj: Vec<Option<Tensor>> = vec![None; root.0 + 1];
        adj[root.0] = Some(Tensor::filled(root_shape, 1.0));

        for idx in (0..=root.0).rev() {
            let Some(upstream) = adj[idx].take() else {
                continue;
            };
            let node = &self.nodes[idx];
            for (target, local) in self.local_grads(&node.op, &node.value, &upstream) {
                match &mut adj[target.0] {
                    Some(acc) => acc.add_assign(&local),
                    slot @ None => *slot = Some(local),
                }
            }
            self.nodes[idx].grad.add_assign(&upstream);
        }
        Ok(())
    }

    fn local_grads(&self, op: &Op, out: &Tensor, up: &Tensor) -> Vec<(NodeId, Tensor)> {
        let zip_map = |a: &Tensor, f: &dyn Fn(f64, f64) -> f64| -> Tensor {
            let data = a.data().iter().zip(up.data()).map(|(&p, &q)| f(p, q)).collect();
            Tensor::new(a.shape().to_vec(), data).expect("shape preserved")
        };
        match *op {
            Op::Leaf => Vec::new(),
            Op::Affine {
                input,
                weights,
                bias,
            } => {
                let (x, w) = (self.value(input), self.value(weights));
                let (n, k, m) = (x.rows(), x.cols(), w.cols());
                let mut dx = vec![0.0; n * k];
                let mut dw = vec![0.0; k * m];
                let mut db = vec![0.0; m];
                for r in 0..n {
                    let g = up.row(r);
                    for (d, gv) in db.iter_mut().zip(g) {
                        *d += gv;
                    }
                    let xr = x.row(r);
                    let dxr = &mut dx[r * k..(r + 1) * k];
                    for i in 0..k {
                        let wr = w.row(i);
                        let mut s = 0.0;
                        for (wv, gv) in wr.iter().zip(g) {
                            s += wv * gv;
                        }
                        dxr[i] = s;
                        let xi = xr[i];
                        if xi != 0.0 {
                            for (d, gv) in dw[i * m..(i + 1) * m].iter_mut().zip(g) {
                                *d += xi * gv;
                            }
                        }
                    }
                }
                vec![
                    (input, Tensor::matrix(n, k, dx).expect("shape")),
                    (weights, Tensor::matrix(k, m, dw).expect("shape")),
                    (bias, Tensor::vector(db).expect("shape")),
                ]
            }
            Op::Relu(input) => {
                let x = self.value(input);
                vec![(input, zip_map(x, &|v, g| if v > 0.0 { g } else { 0.0 }))]
            }
            Op::Sigmoid(input) => vec![(input, zip_map(out, &|s, g| g * s * (1.0 - s)))],
            Op::SoftmaxRows(input) => {
                let mut dx = Vec::with_capacity(out.len());
                for (s, g) in out.row_iter().zip(up.row_iter()) {
                    let dot: f64 = s.iter().zip(g).map(|(a, b)| a * b).sum();
                    dx.extend(s.iter().zip(g).map(|(sv, gv)| sv * (gv - dot)));
                }
                vec![(input, Tensor::new(out.shape().to_vec(), dx).expect("shape"))]
            }
            Op::Log(input) => {
                let x = self.value(input);
                vec![(
                    input,
                    zip_map(x, &|v, g| if v > LOG_FLOOR { g / v } else { 0.0 }),
                )]
            }
            Op::Square(input) => {
                let x = self.value(input);
                vec![(input, zip_map(x, &|v, g| 2.0 * v * g))]
            }
            Op::Add(a, b) => vec![(a, up.clone()), (b, up.clone())],
            Op::Sub(a, b) => vec![(a, up.clone()), (b, up.map(|g| -g))],
            Op::Mul(a, b) => {
                let (x, y) = (self.value(a), self.value(b));
                vec![(a, zip_map(y, &|v, g| v * g)), (b, zip_map(x, &|v, g| v * g))]
            }
            Op::Scale(input, factor) => vec![(input, up.map(|g| g * factor))],
            Op::Sum(input) => {
                let shape = self.shape(input);
                vec![(input, Tensor::filled(shape, up.item()))]
            }
            Op::Mean(input) => {
                let x = self.value(input);
                vec![(input, Tensor::filled(x.shape(), up.item() / x.len() as f64))]
            }
            Op::Grl { input, lambda } => vec![(input, up.map(|g| -lambda * g))],
            Op::GatherMean { input, ref groups } => {
                let x = self.value(input);
                let width = x.cols();
                let mut dx = Tensor::zeros(x.shape());
                let data = dx.data_mut();
                for (gi, group) in groups.iter().enumerate() {
                    let g = up.row(gi);
                    let n = group.len() as f64;
                    for &r in group {
                        for (d, gv) in data[r * width..(r + 1) * width].iter_mut().zip(g) {
                            *d += gv / n;
                        }
                    }
                }
                vec![(input, dx)]
            }
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

/// Max-shifted softmax of one row.
pub(crate) fn softmax(row: &[f64]) -> impl Iterator<Item = f64> + '_ {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let denom: f64 = row.iter().map(|v| (v - max).exp()).sum();
    row.iter().map(move |v| (v - max).exp() / denom)
}
