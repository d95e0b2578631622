//! Define-by-run reverse-mode differentiation over dense matrices.
//!
//! Every forward primitive is appended to a [`Tape`]. [`Tape::backward`]
//! walks the tape in reverse and expresses each vector-Jacobian product with
//! the same primitives, so with `build_graph` set the returned gradients are
//! themselves tape nodes and can be differentiated again (the gradient
//! penalty needs exactly one such second-order pass). Without `build_graph`
//! the backward nodes are discarded once their values have been read out.

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Index of a node on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId(usize);

impl NodeId {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Primitive recorded on the tape. Binary ops broadcast `b` against `a`
/// along any axis where `b` has extent 1 (bias rows, per-row scalars).
#[derive(Clone, Debug, PartialEq)]
pub enum Op {
    Leaf,
    MatMul {
        a: NodeId,
        b: NodeId,
        ta: bool,
        tb: bool,
    },
    Add {
        a: NodeId,
        b: NodeId,
    },
    Sub {
        a: NodeId,
        b: NodeId,
    },
    Mul {
        a: NodeId,
        b: NodeId,
    },
    Scale {
        a: NodeId,
        factor: f64,
    },
    AddScalar {
        a: NodeId,
        value: f64,
    },
    Neg {
        a: NodeId,
    },
    LeakyRelu {
        a: NodeId,
        slope: f64,
    },
    Sigmoid {
        a: NodeId,
    },
    Tanh {
        a: NodeId,
    },
    Exp {
        a: NodeId,
    },
    Log {
        a: NodeId,
    },
    Square {
        a: NodeId,
    },
    Sqrt {
        a: NodeId,
    },
    Reciprocal {
        a: NodeId,
    },
    Softplus {
        a: NodeId,
    },
    Sum {
        a: NodeId,
    },
    Mean {
        a: NodeId,
    },
    /// Per-row sum of squares: `n x d -> n x 1`.
    RowSqNorm {
        a: NodeId,
    },
    /// Sums over the axes where the target extent is 1.
    SumTo {
        a: NodeId,
        rows: usize,
        cols: usize,
    },
    BroadcastTo {
        a: NodeId,
        rows: usize,
        cols: usize,
    },
    ConcatCols {
        a: NodeId,
        b: NodeId,
    },
    SliceCols {
        a: NodeId,
        start: usize,
        len: usize,
    },
    /// Embeds `a` at column `start` of a zero matrix `total` columns wide.
    PadCols {
        a: NodeId,
        start: usize,
        total: usize,
    },
}

impl Op {
    pub fn name(&self) -> &'static str {
        match self {
            Op::Leaf => "leaf",
            Op::MatMul { .. } => "matmul",
            Op::Add { .. } => "add",
            Op::Sub { .. } => "sub",
            Op::Mul { .. } => "mul",
            Op::Scale { .. } => "scale",
            Op::AddScalar { .. } => "add_scalar",
            Op::Neg { .. } => "neg",
            Op::LeakyRelu { .. } => "leaky_relu",
            Op::Sigmoid { .. } => "sigmoid",
            Op::Tanh { .. } => "tanh",
            Op::Exp { .. } => "exp",
            Op::Log { .. } => "log",
            Op::Square { .. } => "square",
            Op::Sqrt { .. } => "sqrt",
            Op::Reciprocal { .. } => "reciprocal",
            Op::Softplus { .. } => "softplus",
            Op::Sum { .. } => "sum",
            Op::Mean { .. } => "mean",
            Op::RowSqNorm { .. } => "row_sq_norm",
            Op::SumTo { .. } => "sum_to",
            Op::BroadcastTo { .. } => "broadcast_to",
            Op::ConcatCols { .. } => "concat_cols",
            Op::SliceCols { .. } => "slice_cols",
            Op::PadCols { .. } => "pad_cols",
        }
    }

    fn inputs(&self) -> [Option<NodeId>; 2] {
        match *self {
            Op::Leaf => [None, None],
            Op::MatMul { a, b, .. }
            | Op::Add { a, b }
            | Op::Sub { a, b }
            | Op::Mul { a, b }
            | Op::ConcatCols { a, b } => [Some(a), Some(b)],
            Op::Scale { a, .. }
            | Op::AddScalar { a, .. }
            | Op::Neg { a }
            | Op::LeakyRelu { a, .. }
            | Op::Sigmoid { a }
            | Op::Tanh { a }
            | Op::Exp { a }
            | Op::Log { a }
            | Op::Square { a }
            | Op::Sqrt { a }
            | Op::Reciprocal { a }
            | Op::Softplus { a }
            | Op::Sum { a }
            | Op::Mean { a }
            | Op::RowSqNorm { a }
            | Op::SumTo { a, .. }
            | Op::BroadcastTo { a, .. }
            | Op::SliceCols { a, .. }
            | Op::PadCols { a, .. } => [Some(a), None],
        }
    }
}

#[derive(Clone, Debug)]
struct Node {
    op: Op,
    value: Tensor,
}

/// Gradients of a scalar output with respect to requested nodes.
#[derive(Clone, Debug)]
pub struct GradientMap {
    entries: Vec<(NodeId, Tensor, Option<NodeId>)>,
    unreachable: Vec<NodeId>,
}

impl GradientMap {
    pub fn get(&self, leaf: NodeId) -> Option<&Tensor> {
        self.entries
            .iter()
            .find(|(id, ..)| *id == leaf)
            .map(|(_, t, _)| t)
    }

    /// Tape node holding the gradient; only present for `build_graph` passes.
    pub fn node(&self, leaf: NodeId) -> Option<NodeId> {
        self.entries
            .iter()
            .find(|(id, ..)| *id == leaf)
            .and_then(|(.., n)| *n)
    }

    /// Requested nodes that the output does not depend on. Their gradient
    /// is reported as exact zeros.
    pub fn unreachable(&self) -> &[NodeId] {
        &self.unreachable
    }

    /// Gradient tensors in the order the leaves were requested.
    pub fn into_values(self) -> Vec<Tensor> {
        self.entries.into_iter().map(|(_, t, _)| t).collect()
    }
}

/// Append-only record of a computation.
#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
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

    pub fn value(&self, id: NodeId) -> &Tensor {
        &self.nodes[id.0].value
    }

    pub fn op(&self, id: NodeId) -> &Op {
        &self.nodes[id.0].op
    }

    /// Records an input. Whether it receives a gradient is decided by the
    /// leaf list passed to [`Tape::backward`].
    pub fn leaf(&mut self, value: Tensor) -> NodeId {
        self.nodes.push(Node {
            op: Op::Leaf,
            value,
        });
        NodeId(self.nodes.len() - 1)
    }

    /// Alias of [`Tape::leaf`] for values that are never differentiated.
    pub fn constant(&mut self, value: Tensor) -> NodeId {
        self.leaf(value)
    }

    /// Evaluates `op` on existing nodes and appends the result.
    pub fn record(&mut self, op: Op) -> Result<NodeId> {
        for id in op.inputs().into_iter().flatten() {
            if id.0 >= self.nodes.len() {
                return Err(Error::UnknownNode(id.0));
            }
        }
        let value = self.eval(&op)?;
        let node = self.nodes.len();
        if !value.is_finite() {
            return Err(Error::NumericOverflow {
                op: op.name(),
                node,
            });
        }
        self.nodes.push(Node { op, value });
        Ok(NodeId(node))
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.record(Op::MatMul {
            a,
            b,
            ta: false,
            tb: false,
        })
    }

    /// `a * b^T`; used for `x W^T` with weights stored `fan_out x fan_in`.
    pub fn matmul_nt(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.record(Op::MatMul {
            a,
            b,
            ta: false,
            tb: true,
        })
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.record(Op::Add { a, b })
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.record(Op::Sub { a, b })
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.record(Op::Mul { a, b })
    }

    pub fn scale(&mut self, a: NodeId, factor: f64) -> Result<NodeId> {
        self.record(Op::Scale { a, factor })
    }

    pub fn add_scalar(&mut self, a: NodeId, value: f64) -> Result<NodeId> {
        self.record(Op::AddScalar { a, value })
    }

    pub fn neg(&mut self, a: NodeId) -> Result<NodeId> {
        self.record(Op::Neg { a })
    }

    pub fn leaky_relu(&mut self, a: NodeId, slope: f64) -> Result<NodeId> {
        self.record(Op::LeakyRelu { a, slope })
    }

    pub fn relu(&mut self, a: NodeId) -> Result<NodeId> {
        self.leaky_relu(a, 0.0)
    }

    pub fn sigmoid(&mut self, a: NodeId) -> Result<NodeId> {
        self.record(Op::Sigmoid { a })
    }

    pub fn tanh(&mut self, a: NodeId) -> Result<NodeId> {
        self.record(Op::Tanh { a })
    }

    pub fn exp(&mut self, a: NodeId) -> Result<NodeId> {
        self.record(Op::Exp { a })
    }

    pub fn log(&mut self, a: NodeId) -> Result<NodeId> {
        self.record(Op::Log { a })
    }

    pub fn square(&mut self, a: NodeId) -> Result<NodeId> {
        self.record(Op::Square { a })
    }

    pub fn sqrt(&mut self, a: NodeId) -> Result<NodeId> {
        self.record(Op::Sqrt { a })
    }

    pub fn reciprocal(&mut self, a: NodeId) -> Result<NodeId> {
        self.record(Op::Reciprocal { a })
    }

    pub fn softplus(&mut self, a: NodeId) -> Result<NodeId> {
        self.record(Op::Softplus { a })
    }

    pub fn sum(&mut self, a: NodeId) -> Result<NodeId> {
        self.record(Op::Sum { a })
    }

    pub fn mean(&mut self, a: NodeId) -> Result<NodeId> {
        self.record(Op::Mean { a })
    }

    pub fn row_sq_norm(&mut self, a: NodeId) -> Result<NodeId> {
        self.record(Op::RowSqNorm { a })
    }

    pub fn sum_to(&mut self, a: NodeId, rows: usize, cols: usize) -> Result<NodeId> {
        self.record(Op::SumTo { a, rows, cols })
    }

    pub fn broadcast_to(&mut self, a: NodeId, rows: usize, cols: usize) -> Result<NodeId> {
        self.record(Op::BroadcastTo { a, rows, cols })
    }

    pub fn concat_cols(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.record(Op::ConcatCols { a, b })
    }

    pub fn slice_cols(&mut self, a: NodeId, start: usize, len: usize) -> Result<NodeId> {
        self.record(Op::SliceCols { a, start, len })
    }

    pub fn pad_cols(&mut self, a: NodeId, start: usize, total: usize) -> Result<NodeId> {
        self.record(Op::PadCols { a, start, total })
    }

    fn eval(&self, op: &Op) -> Result<Tensor> {
        let v = |id: NodeId| &self.nodes[id.0].value;
        let t = match *op {
            Op::Leaf => return Err(Error::InvalidInput("leaf nodes carry no op".into())),
            Op::MatMul { a, b, ta, tb } => Tensor::matmul(v(a), v(b), ta, tb)?,
            Op::Add { a, b } => broadcast_zip("add", v(a), v(b), |x, y| x + y)?,
            Op::Sub { a, b } => broadcast_zip("sub", v(a), v(b), |x, y| x - y)?,
            Op::Mul { a, b } => broadcast_zip("mul", v(a), v(b), |x, y| x * y)?,
            Op::Scale { a, factor } => v(a).map(|x| x * factor),
            Op::AddScalar { a, value } => v(a).map(|x| x + value),
            Op::Neg { a } => v(a).map(|x| -x),
            Op::LeakyRelu { a, slope } => v(a).map(|x| if x > 0.0 { x } else { slope * x }),
            Op::Sigmoid { a } => v(a).map(sigmoid),
            Op::Tanh { a } => v(a).map(f64::tanh),
            Op::Exp { a } => v(a).map(f64::exp),
            Op::Log { a } => v(a).map(f64::ln),
            Op::Square { a } => v(a).map(|x| x * x),
            Op::Sqrt { a } => v(a).map(f64::sqrt),
            Op::Reciprocal { a } => v(a).map(|x| 1.0 / x),
            Op::Softplus { a } => v(a).map(softplus),
            Op::Sum { a } => Tensor::scalar(v(a).sum()),
            Op::Mean { a } => {
                let x = v(a);
                if x.is_empty() {
                    return Err(Error::InvalidInput("mean of an empty tensor".into()));
                }
                Tensor::scalar(x.sum() / x.len() as f64)
            }
            Op::RowSqNorm { a } => {
                let x = v(a);
                let data = x
                    .row_iter()
                    .map(|r| r.iter().map(|e| e * e).sum())
                    .collect();
                Tensor::new(x.rows(), 1, data)?
            }
            Op::SumTo { a, rows, cols } => sum_to(v(a), rows, cols)?,
            Op::BroadcastTo { a, rows, cols } => {
                let x = v(a);
                check_broadcast("broadcast_to", (rows, cols), x.shape())?;
                broadcast_zip("broadcast_to", &Tensor::zeros(rows, cols), x, |_, y| y)?
            }
            Op::ConcatCols { a, b } => {
                let (x, y) = (v(a), v(b));
                if x.rows() != y.rows() {
                    return Err(Error::ShapeMismatch {
                        op: "concat_cols",
                        lhs: x.shape(),
                        rhs: y.shape(),
                    });
                }
                let mut data = Vec::with_capacity(x.len() + y.len());
                for r in 0..x.rows() {
                    data.extend_from_slice(x.row(r));
                    data.extend_from_slice(y.row(r));
                }
                Tensor::new(x.rows(), x.cols() + y.cols(), data)?
            }
            Op::SliceCols { a, start, len } => {
                let x = v(a);
                if start + len > x.cols() {
                    return Err(Error::ShapeMismatch {
                        op: "slice_cols",
                        lhs: x.shape(),
                        rhs: (start, len),
                    });
                }
                let mut data = Vec::with_capacity(x.rows() * len);
                for r in x.row_iter() {
                    data.extend_from_slice(&r[start..start + len]);
                }
                Tensor::new(x.rows(), len, data)?
            }
            Op::PadCols { a, start, total } => {
                let x = v(a);
                if start + x.cols() > total {
                    return Err(Error::ShapeMismatch {
                        op: "pad_cols",
                        lhs: x.shape(),
                        rhs: (start, total),
                    });
                }
                let mut out = Tensor::zeros(x.rows(), total);
                for r in 0..x.rows() {
                    for c in 0..x.cols() {
                        out.set(r, start + c, x.get(r, c));
                    }
                }
                out
            }
        };
        Ok(t)
    }

    /// Gradients of the 1x1 node `output` with respect to each of `leaves`.
    ///
    /// With `build_graph` the backward computation stays on the tape and
    /// [`GradientMap::node`] returns differentiable gradient nodes; otherwise
    /// the tape is restored to its length before the call.
    pub fn backward(
        &mut self,
        output: NodeId,
        leaves: &[NodeId],
        build_graph: bool,
    ) -> Result<GradientMap> {
        if output.0 >= self.nodes.len() {
            return Err(Error::UnknownNode(output.0));
        }
        if let Some(bad) = leaves.iter().find(|l| l.0 >= self.nodes.len()) {
            return Err(Error::UnknownNode(bad.0));
        }
        let (rows, cols) = self.value(output).shape();
        if (rows, cols) != (1, 1) {
            return Err(Error::NonScalarOutput { rows, cols });
        }

        let base_len = self.nodes.len();
        let last = output.0;

        // needs[i]: node i is a requested leaf or depends on one.
        let mut needs = vec![false; last + 1];
        for leaf in leaves {
            if leaf.0 <= last {
                needs[leaf.0] = true;
            }
        }
        for i in 0..=last {
            if !needs[i] {
                needs[i] = self.nodes[i]
                    .op
                    .inputs()
                    .into_iter()
                    .flatten()
                    .any(|id| needs[id.0]);
            }
        }

        let result = self.sweep(output, &needs);
        let grads = match result {
            Ok(g) => g,
            Err(e) => {
                self.nodes.truncate(base_len);
                return Err(e);
            }
        };

        let mut entries = Vec::with_capacity(leaves.len());
        let mut unreachable = Vec::new();
        for &leaf in leaves {
            match grads.get(leaf.0).copied().flatten() {
                Some(g) => {
                    let node = build_graph.then_some(g);
                    entries.push((leaf, self.value(g).clone(), node));
                }
                None => {
                    let (r, c) = self.value(leaf).shape();
                    let node = build_graph.then(|| self.constant(Tensor::zeros(r, c)));
                    entries.push((leaf, Tensor::zeros(r, c), node));
                    unreachable.push(leaf);
                }
            }
        }
        if !build_graph {
            self.nodes.truncate(base_len);
        }
        Ok(GradientMap {
            entries,
            unreachable,
        })
    }

    fn sweep(&mut self, output: NodeId, needs: &[bool]) -> Result<Vec<Option<NodeId>>> {
        let mut grads: Vec<Option<NodeId>> = vec![None; output.0 + 1];
        grads[output.0] = Some(self.constant(Tensor::scalar(1.0)));
        for i in (0..=output.0).rev() {
            let Some(g) = grads[i] else { continue };
            let op = self.nodes[i].op.clone();
            for (input, contribution) in self.vjp(NodeId(i), &op, g, needs)? {
                grads[input.0] = Some(match grads[input.0] {
                    Some(prev) => self.add(prev, contribution)?,
                    None => contribution,
                });
            }
        }
        Ok(grads)
    }

    /// Vector-Jacobian products of one node, as new tape nodes.
    fn vjp(
        &mut self,
        out: NodeId,
        op: &Op,
        g: NodeId,
        needs: &[bool],
    ) -> Result<Vec<(NodeId, NodeId)>> {
        let wants = |id: NodeId| needs[id.0];
        let mut res = Vec::with_capacity(2);
        match *op {
            Op::Leaf => {}
            Op::MatMul { a, b, ta, tb } => {
                if wants(a) {
                    let da = if ta {
                        self.record(Op::MatMul {
                            a: b,
                            b: g,
                            ta: tb,
                            tb: true,
                        })?
                    } else {
                        self.record(Op::MatMul {
                            a: g,
                            b,
                            ta: false,
                            tb: !tb,
                        })?
                    };
                    res.push((a, da));
                }
                if wants(b) {
                    let db = if tb {
                        self.record(Op::MatMul {
                            a: g,
                            b: a,
                            ta: true,
                            tb: ta,
                        })?
                    } else {
                        self.record(Op::MatMul {
                            a,
                            b: g,
                            ta: !ta,
                            tb: false,
                        })?
                    };
                    res.push((b, db));
                }
            }
            Op::Add { a, b } | Op::Sub { a, b } => {
                if wants(a) {
                    res.push((a, g));
                }
                if wants(b) {
                    let mut db = self.reduce_like(g, b)?;
                    if matches!(op, Op::Sub { .. }) {
                        db = self.neg(db)?;
                    }
                    res.push((b, db));
                }
            }
            Op::Mul { a, b } => {
                if wants(a) {
                    res.push((a, self.mul(g, b)?));
                }
                if wants(b) {
                    let prod = self.mul(g, a)?;
                    res.push((b, self.reduce_like(prod, b)?));
                }
            }
            Op::Scale { a, factor } => res.push((a, self.scale(g, factor)?)),
            Op::AddScalar { a, .. } => res.push((a, g)),
            Op::Neg { a } => res.push((a, self.neg(g)?)),
            Op::LeakyRelu { a, slope } => {
                // Slope is used at exactly zero input.
                let mask = self.value(a).map(|x| if x > 0.0 { 1.0 } else { slope });
                let mask = self.constant(mask);
                res.push((a, self.mul(g, mask)?));
            }
            Op::Sigmoid { a } => {
                let one_minus = self.neg(out)?;
                let one_minus = self.add_scalar(one_minus, 1.0)?;
                let local = self.mul(out, one_minus)?;
                res.push((a, self.mul(g, local)?));
            }
            Op::Tanh { a } => {
                let sq = self.square(out)?;
                let local = self.neg(sq)?;
                let local = self.add_scalar(local, 1.0)?;
                res.push((a, self.mul(g, local)?));
            }
            Op::Exp { a } => res.push((a, self.mul(g, out)?)),
            Op::Log { a } => {
                let inv = self.reciprocal(a)?;
                res.push((a, self.mul(g, inv)?));
            }
            Op::Square { a } => {
                let two_x = self.scale(a, 2.0)?;
                res.push((a, self.mul(g, two_x)?));
            }
            Op::Sqrt { a } => {
                let inv = self.reciprocal(out)?;
                let half_inv = self.scale(inv, 0.5)?;
                res.push((a, self.mul(g, half_inv)?));
            }
            Op::Reciprocal { a } => {
                let sq = self.square(out)?;
                let local = self.neg(sq)?;
                res.push((a, self.mul(g, local)?));
            }
            Op::Softplus { a } => {
                let s = self.sigmoid(a)?;
                res.push((a, self.mul(g, s)?));
            }
            Op::Sum { a } => {
                let (r, c) = self.value(a).shape();
                res.push((a, self.broadcast_to(g, r, c)?));
            }
            Op::Mean { a } => {
                let (r, c) = self.value(a).shape();
                let spread = self.broadcast_to(g, r, c)?;
                res.push((a, self.scale(spread, 1.0 / (r * c) as f64)?));
            }
            Op::RowSqNorm { a } => {
                let two_x = self.scale(a, 2.0)?;
                res.push((a, self.mul(two_x, g)?));
            }
            Op::SumTo { a, .. } => {
                let (r, c) = self.value(a).shape();
                res.push((a, self.broadcast_to(g, r, c)?));
            }
            Op::BroadcastTo { a, .. } => {
                let (r, c) = self.value(a).shape();
                res.push((a, self.sum_to(g, r, c)?));
            }
            Op::ConcatCols { a, b } => {
                let ca = self.value(a).cols();
                let cb = self.value(b).cols();
                if wants(a) {
                    res.push((a, self.slice_cols(g, 0, ca)?));
                }
                if wants(b) {
                    res.push((b, self.slice_cols(g, ca, cb)?));
                }
            }
            Op::SliceCols { a, start, .. } => {
                let total = self.value(a).cols();
                res.push((a, self.pad_cols(g, start, total)?));
            }
            Op::PadCols { a, start, .. } => {
                let len = self.value(a).cols();
                res.push((a, self.slice_cols(g, start, len)?));
            }
        }
        res.retain(|(id, _)| wants(*id));
        Ok(res)
    }

    fn reduce_like(&mut self, g: NodeId, target: NodeId) -> Result<NodeId> {
        let (r, c) = self.value(target).shape();
        if self.value(g).shape() == (r, c) {
            Ok(g)
        } else {
            self.sum_to(g, r, c)
        }
    }
}

/// `d sum(f(x)) / dx` row by row, recorded with `build_graph` so the result
/// can be differentiated again. `f` must map `n x d` to `n x 1` with rows
/// evaluated independently.
pub fn grad_wrt_input<F>(tape: &mut Tape, x: NodeId, f: F) -> Result<NodeId>
where
    F: FnOnce(&mut Tape, NodeId) -> Result<NodeId>,
{
    let y = f(tape, x)?;
    let total = tape.sum(y)?;
    let grads = tape.backward(total, &[x], true)?;
    grads
        .node(x)
        .ok_or_else(|| Error::InvalidInput("input gradient missing".into()))
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^x)` without overflow.
pub(crate) fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

fn check_broadcast(op: &'static str, full: (usize, usize), part: (usize, usize)) -> Result<()> {
    let ok = (part.0 == full.0 || part.0 == 1) && (part.1 == full.1 || part.1 == 1);
    if ok {
        Ok(())
    } else {
        Err(Error::ShapeMismatch {
            op,
            lhs: full,
            rhs: part,
        })
    }
}

fn broadcast_zip(
    op: &'static str,
    a: &Tensor,
    b: &Tensor,
    f: impl Fn(f64, f64) -> f64,
) -> Result<Tensor> {
    if a.shape() == b.shape() {
        return Ok(a.zip_map(b, f));
    }
    check_broadcast(op, a.shape(), b.shape())?;
    let (rows, cols) = a.shape();
    let (rb, cb) = b.shape();
    let mut data = Vec::with_capacity(rows * cols);
    for r in 0..rows {
        let br = if rb == 1 { 0 } else { r };
        for c in 0..cols {
            let bc = if cb == 1 { 0 } else { c };
            data.push(f(a.get(r, c), b.get(br, bc)));
        }
    }
    Tensor::new(rows, cols, data)
}

fn sum_to(x: &Tensor, rows: usize, cols: usize) -> Result<Tensor> {
    check_broadcast("sum_to", x.shape(), (rows, cols))?;
    let mut out = Tensor::zeros(rows, cols);
    for r in 0..x.rows() {
        let orow = if rows == 1 { 0 } else { r };
        for c in 0..x.cols() {
            let ocol = if cols == 1 { 0 } else { c };
            let cur = out.get(orow, ocol);
            out.set(orow, ocol, cur + x.get(r, c));
        }
    }
    Ok(out)
}
