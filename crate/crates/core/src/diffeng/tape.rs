//! Reverse-mode differentiation over a tape of dense rank-2 operations.
//!
//! Nodes are appended in evaluation order, so the tape index order is a
//! topological order of the graph. [`Tape::backward`] walks it once in
//! reverse and returns the adjoint of every node with respect to a scalar
//! root.
//!
//! ```
//! use mpts::diffeng::{Tape, Tensor};
//!
//! let mut tape = Tape::new();
//! let x = tape.leaf(Tensor::scalar(3.0));
//! let y = tape.square(x);
//! let grads = tape.backward(y).unwrap();
//! assert_eq!(grads.wrt(x).item(), 6.0);
//! ```

use super::tensor::{ensure_same_shape, Tensor};
use crate::error::{Error, Result};

/// Handle to a node on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Value(usize);

impl Value {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Debug)]
enum Op {
    Leaf,
    Affine { x: Value, w: Value, b: Value },
    Relu(Value),
    Tanh(Value),
    Softplus(Value),
    Add(Value, Value),
    Sub(Value, Value),
    Mul(Value, Value),
    Div(Value, Value),
    Scale(Value, f64),
    Shift(Value),
    MeanRows(Value),
    Sum(Value),
    Square(Value),
    Exp(Value),
    Log(Value),
    BroadcastRows(Value),
    ConcatCols(Value, Value),
}

#[derive(Clone, Debug)]
struct Node {
    value: Tensor,
    op: Op,
}

/// Append-only computation record. One tape per thread of work.
#[derive(Clone, Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// Adjoints of every node on a tape with respect to one scalar root.
#[derive(Clone, Debug)]
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
    shapes: Vec<(usize, usize)>,
}

impl Gradients {
    /// Gradient of the root with respect to leaf `v`. Leaves the root does
    /// not depend on get an all-zero tensor of their own shape.
    pub fn wrt(&self, v: Value) -> Tensor {
        match &self.grads[v.0] {
            Some(g) => g.clone(),
            None => {
                let (r, c) = self.shapes[v.0];
                Tensor::zeros(r, c)
            }
        }
    }

    pub fn take(&mut self, v: Value) -> Tensor {
        match self.grads[v.0].take() {
            Some(g) => g,
            None => {
                let (r, c) = self.shapes[v.0];
                Tensor::zeros(r, c)
            }
        }
    }
}

fn sigmoid(x: f64) -> f64 {
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

    pub fn value(&self, v: Value) -> &Tensor {
        &self.nodes[v.0].value
    }

    fn push(&mut self, value: Tensor, op: Op) -> Value {
        self.nodes.push(Node { value, op });
        Value(self.nodes.len() - 1)
    }

    /// Records an input. Parameters and constants are both leaves; a
    /// constant is simply a leaf whose gradient the caller ignores.
    pub fn leaf(&mut self, t: Tensor) -> Value {
        self.push(t, Op::Leaf)
    }

    /// `x · w + b` with `x: n × in`, `w: in × out`, `b: 1 × out`.
    pub fn affine(&mut self, x: Value, w: Value, b: Value) -> Result<Value> {
        let (xt, wt, bt) = (self.value(x), self.value(w), self.value(b));
        if xt.cols() != wt.rows() {
            return Err(Error::Shape {
                op: "affine",
                left: xt.shape(),
                right: wt.shape(),
            });
        }
        if bt.shape() != (1, wt.cols()) {
            return Err(Error::Shape {
                op: "affine bias",
                left: bt.shape(),
                right: (1, wt.cols()),
            });
        }
        let mut out = xt.matmul(wt)?;
        let cols = out.cols();
        for row in out.data_mut().chunks_mut(cols) {
            for (v, bias) in row.iter_mut().zip(bt.data()) {
                *v += bias;
            }
        }
        Ok(self.push(out, Op::Affine { x, w, b }))
    }

    pub fn relu(&mut self, a: Value) -> Value {
        let out = self.value(a).map(|v| v.max(0.0));
        self.push(out, Op::Relu(a))
    }

    pub fn tanh(&mut self, a: Value) -> Value {
        let out = self.value(a).map(f64::tanh);
        self.push(out, Op::Tanh(a))
    }

    pub fn softplus(&mut self, a: Value) -> Value {
        let out = self.value(a).map(softplus);
        self.push(out, Op::Softplus(a))
    }

    pub fn add(&mut self, a: Value, b: Value) -> Result<Value> {
        ensure_same_shape("add", self.value(a), self.value(b))?;
        let out = self.value(a).zip_map(self.value(b), |x, y| x + y);
        Ok(self.push(out, Op::Add(a, b)))
    }

    pub fn sub(&mut self, a: Value, b: Value) -> Result<Value> {
        ensure_same_shape("sub", self.value(a), self.value(b))?;
        let out = self.value(a).zip_map(self.value(b), |x, y| x - y);
        Ok(self.push(out, Op::Sub(a, b)))
    }

    pub fn mul(&mut self, a: Value, b: Value) -> Result<Value> {
        ensure_same_shape("mul", self.value(a), self.value(b))?;
        let out = self.value(a).zip_map(self.value(b), |x, y| x * y);
        Ok(self.push(out, Op::Mul(a, b)))
    }

    pub fn div(&mut self, a: Value, b: Value) -> Result<Value> {
        ensure_same_shape("div", self.value(a), self.value(b))?;
        let out = self.value(a).zip_map(self.value(b), |x, y| x / y);
        Ok(self.push(out, Op::Div(a, b)))
    }

    /// Multiplies every entry by a constant.
    pub fn scale(&mut self, a: Value, c: f64) -> Value {
        let out = self.value(a).map(|v| v * c);
        self.push(out, Op::Scale(a, c))
    }

    /// Adds a constant to every entry.
    pub fn shift(&mut self, a: Value, c: f64) -> Value {
        let out = self.value(a).map(|v| v + c);
        self.push(out, Op::Shift(a))
    }

    /// Set pooling: `n × d → 1 × d`, summing rows in index order.
    pub fn mean_rows(&mut self, a: Value) -> Result<Value> {
        let t = self.value(a);
        if t.rows() == 0 {
            return Err(Error::invalid("mean over an empty set"));
        }
        let n = t.rows() as f64;
        let out = t.sum_rows().map(|v| v / n);
        Ok(self.push(out, Op::MeanRows(a)))
    }

    /// Sum of all entries as a `1 × 1` value.
    pub fn sum(&mut self, a: Value) -> Value {
        let out = Tensor::scalar(self.value(a).sum());
        self.push(out, Op::Sum(a))
    }

    pub fn square(&mut self, a: Value) -> Value {
        let out = self.value(a).map(|v| v * v);
        self.push(out, Op::Square(a))
    }

    pub fn exp(&mut self, a: Value) -> Value {
        let out = self.value(a).map(f64::exp);
        self.push(out, Op::Exp(a))
    }

    /// Natural log; non-positive entries produce non-finite output.
    pub fn log(&mut self, a: Value) -> Value {
        let out = self.value(a).map(f64::ln);
        self.push(out, Op::Log(a))
    }

    /// Repeats a `1 × d` row `n` times.
    pub fn broadcast_rows(&mut self, a: Value, n: usize) -> Result<Value> {
        let t = self.value(a);
        if t.rows() != 1 {
            return Err(Error::Shape {
                op: "broadcast_rows",
                left: t.shape(),
                right: (1, t.cols()),
            });
        }
        let mut data = Vec::with_capacity(n * t.cols());
        for _ in 0..n {
            data.extend_from_slice(t.data());
        }
        let out = Tensor::new(n, t.cols(), data)?;
        Ok(self.push(out, Op::BroadcastRows(a)))
    }

    /// `[a | b]` along columns.
    pub fn concat_cols(&mut self, a: Value, b: Value) -> Result<Value> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.rows() != tb.rows() {
            return Err(Error::Shape {
                op: "concat_cols",
                left: ta.shape(),
                right: tb.shape(),
            });
        }
        let cols = ta.cols() + tb.cols();
        let mut data = Vec::with_capacity(ta.rows() * cols);
        for r in 0..ta.rows() {
            data.extend_from_slice(ta.row_slice(r));
            data.extend_from_slice(tb.row_slice(r));
        }
        let out = Tensor::new(ta.rows(), cols, data)?;
        Ok(self.push(out, Op::ConcatCols(a, b)))
    }

    /// Reverse sweep from a scalar root. Does not mutate the tape, so
    /// repeated calls return identical gradients.
    pub fn backward(&self, root: Value) -> Result<Gradients> {
        let root_shape = self.value(root).shape();
        if root_shape != (1, 1) {
            return Err(Error::NonScalarRoot(root_shape));
        }
        let mut grads: Vec<Option<Tensor>> = vec![None; root.0 + 1];
        grads[root.0] = Some(Tensor::scalar(1.0));

        for idx in (0..=root.0).rev() {
            let Some(g) = grads[idx].take() else {
                continue;
            };
            let node = &self.nodes[idx];
            if let Op::Leaf = node.op {
                grads[idx] = Some(g);
                continue;
            }
            let out = &node.value;
            let mut acc = |v: Value, delta: Tensor| match &mut grads[v.0] {
                Some(existing) => existing.add_assign(&delta),
                slot @ None => *slot = Some(delta),
            };
            match node.op {
                Op::Leaf => unreachable!(),
                Op::Affine { x, w, b } => {
                    let (xt, wt) = (self.value(x), self.value(w));
                    acc(x, g.matmul_t(wt));
                    acc(w, xt.t_matmul(&g));
                    acc(b, g.sum_rows());
                }
                Op::Relu(a) => {
                    acc(a, g.zip_map(out, |d, y| if y > 0.0 { d } else { 0.0 }));
                }
                Op::Tanh(a) => acc(a, g.zip_map(out, |d, y| d * (1.0 - y * y))),
                Op::Softplus(a) => {
                    acc(a, g.zip_map(self.value(a), |d, x| d * sigmoid(x)));
                }
                Op::Add(a, b) => {
                    acc(a, g.clone());
                    acc(b, g);
                }
                Op::Sub(a, b) => {
                    acc(b, g.map(|d| -d));
                    acc(a, g);
                }
                Op::Mul(a, b) => {
                    acc(a, g.zip_map(self.value(b), |d, y| d * y));
                    acc(b, g.zip_map(self.value(a), |d, x| d * x));
                }
                Op::Div(a, b) => {
                    let bt = self.value(b);
                    acc(a, g.zip_map(bt, |d, y| d / y));
                    let gb = g.zip_map(out, |d, q| d * q).zip_map(bt, |dq, y| -dq / y);
                    acc(b, gb);
                }
                Op::Scale(a, c) => acc(a, g.map(|d| d * c)),
                Op::Shift(a) => acc(a, g),
                Op::MeanRows(a) => {
                    let (n, d) = self.value(a).shape();
                    let scale = 1.0 / n as f64;
                    let mut data = Vec::with_capacity(n * d);
                    for _ in 0..n {
                        data.extend(g.data().iter().map(|v| v * scale));
                    }
                    acc(a, Tensor::new(n, d, data)?);
                }
                Op::Sum(a) => {
                    let (r, c) = self.value(a).shape();
                    acc(a, Tensor::filled(r, c, g.item()));
                }
                Op::Square(a) => acc(a, g.zip_map(self.value(a), |d, x| 2.0 * d * x)),
                Op::Exp(a) => acc(a, g.zip_map(out, |d, y| d * y)),
                Op::Log(a) => acc(a, g.zip_map(self.value(a), |d, x| d / x)),
                Op::BroadcastRows(a) => acc(a, g.sum_rows()),
                Op::ConcatCols(a, b) => {
                    let ca = self.value(a).cols();
                    let cb = self.value(b).cols();
                    let rows = g.rows();
                    let mut ga = Vec::with_capacity(rows * ca);
                    let mut gb = Vec::with_capacity(rows * cb);
                    for r in 0..rows {
                        let row = g.row_slice(r);
                        ga.extend_from_slice(&row[..ca]);
                        gb.extend_from_slice(&row[ca..]);
                    }
                    acc(a, Tensor::new(rows, ca, ga)?);
                    acc(b, Tensor::new(rows, cb, gb)?);
                }
            }
        }

        grads.resize(self.nodes.len(), None);
        Ok(Gradients {
            grads,
            shapes: self.nodes.iter().map(|n| n.value.shape()).collect(),
        })
    }
}
