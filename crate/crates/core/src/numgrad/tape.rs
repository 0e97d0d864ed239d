//! Tape-based reverse-mode differentiation over rank ≤ 2 tensors.
//!
//! Every primitive appends one node holding its operands, output value and
//! enough information to apply its local gradient rule. [`Tape::backward`]
//! walks the nodes in reverse insertion order, which is a valid reverse
//! topological order because operands always precede their consumers.

use super::tensor::{matmul_nt, matmul_raw, matmul_tn, Shape, Tensor};
use super::NumgradError;

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

/// The primitive operations a tape can record.
#[derive(Clone, Debug, PartialEq)]
pub enum Primitive {
    MatMul,
    /// Elementwise, or a `1 × n` right operand broadcast over rows.
    Add,
    Sub,
    Mul,
    Scale(f64),
    LeakyRelu(f64),
    /// Subgradient at 0 is 0.
    Relu,
    Exp,
    Ln,
    /// Row-wise log-softmax.
    LogSoftmax,
    /// Divides each row by its L2 norm. Zero rows are rejected.
    RowNormalize,
    /// Row-wise dot product of two equal-shape operands, `n × 1` output.
    RowDot,
    /// Picks column `idx[i]` from row `i`, `n × 1` output.
    Gather(Vec<usize>),
    Mean,
    Sum,
    Transpose,
}

impl Primitive {
    pub fn name(&self) -> &'static str {
        match self {
            Primitive::MatMul => "matmul",
            Primitive::Add => "add",
            Primitive::Sub => "sub",
            Primitive::Mul => "mul",
            Primitive::Scale(_) => "scale",
            Primitive::LeakyRelu(_) => "leaky_relu",
            Primitive::Relu => "relu",
            Primitive::Exp => "exp",
            Primitive::Ln => "ln",
            Primitive::LogSoftmax => "log_softmax",
            Primitive::RowNormalize => "row_normalize",
            Primitive::RowDot => "row_dot",
            Primitive::Gather(_) => "gather",
            Primitive::Mean => "mean",
            Primitive::Sum => "sum",
            Primitive::Transpose => "transpose",
        }
    }

    fn arity(&self) -> usize {
        match self {
            Primitive::MatMul
            | Primitive::Add
            | Primitive::Sub
            | Primitive::Mul
            | Primitive::RowDot => 2,
            _ => 1,
        }
    }
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Option<(Primitive, Vec<Var>)>,
    trainable: bool,
    needs_grad: bool,
}

/// Single-threaded recording of a forward computation.
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

    /// Trainable leaf.
    pub fn param(&mut self, value: Tensor) -> Var {
        self.push_leaf(value, true)
    }

    /// Non-trainable leaf (inputs, targets, fixed offsets).
    pub fn constant(&mut self, value: Tensor) -> Var {
        self.push_leaf(value, false)
    }

    fn push_leaf(&mut self, value: Tensor, trainable: bool) -> Var {
        self.nodes.push(Node {
            value,
            op: None,
            trainable,
            needs_grad: trainable,
        });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> Shape {
        self.nodes[v.0].value.shape()
    }

    pub fn is_trainable(&self, v: Var) -> bool {
        self.nodes[v.0].trainable
    }

    /// Records `op` applied to `operands` and returns the output handle.
    pub fn record(&mut self, op: Primitive, operands: &[Var]) -> Result<Var, NumgradError> {
        if operands.len() != op.arity() {
            return Err(NumgradError::Arity {
                op: op.name(),
                expected: op.arity(),
                found: operands.len(),
            });
        }
        if let Some(bad) = operands.iter().find(|v| v.0 >= self.nodes.len()) {
            return Err(NumgradError::UnknownVar(bad.0));
        }
        let value = self.forward(&op, operands)?;
        let needs_grad = operands.iter().any(|v| self.nodes[v.0].needs_grad);
        self.nodes.push(Node {
            value,
            op: Some((op, operands.to_vec())),
            trainable: false,
            needs_grad,
        });
        Ok(Var(self.nodes.len() - 1))
    }

    fn forward(&self, op: &Primitive, operands: &[Var]) -> Result<Tensor, NumgradError> {
        let a = &self.nodes[operands[0].0].value;
        let b = operands.get(1).map(|v| &self.nodes[v.0].value);
        let mismatch = |b: &Tensor| NumgradError::ShapeMismatch {
            op: op.name(),
            left: a.shape(),
            right: b.shape(),
        };
        let out = match op {
            Primitive::MatMul => {
                let b = b.expect("arity checked");
                if a.cols() != b.rows() {
                    return Err(mismatch(b));
                }
                matmul_raw(a, b)
            }
            Primitive::Add | Primitive::Sub | Primitive::Mul => {
                let b = b.expect("arity checked");
                let broadcast = broadcast_kind(a.shape(), b.shape()).ok_or_else(|| mismatch(b))?;
                let f: fn(f64, f64) -> f64 = match op {
                    Primitive::Add => |x, y| x + y,
                    Primitive::Sub => |x, y| x - y,
                    _ => |x, y| x * y,
                };
                let cols = a.cols();
                let data = a
                    .data()
                    .iter()
                    .enumerate()
                    .map(|(i, &x)| {
                        let y = if broadcast { b.data()[i % cols] } else { b.data()[i] };
                        f(x, y)
                    })
                    .collect();
                Tensor::from_raw(a.shape(), data)
            }
            Primitive::Scale(c) => map(a, |x| c * x),
            Primitive::LeakyRelu(s) => map(a, |x| if x > 0.0 { x } else { s * x }),
            Primitive::Relu => map(a, |x| if x > 0.0 { x } else { 0.0 }),
            Primitive::Exp => map(a, f64::exp),
            Primitive::Ln => map(a, f64::ln),
            Primitive::LogSoftmax => {
                let mut out = a.clone();
                for r in 0..a.rows() {
                    let row = out.row_slice_mut(r);
                    let m = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                    let lse = m + row.iter().map(|x| (x - m).exp()).sum::<f64>().ln();
                    row.iter_mut().for_each(|x| *x -= lse);
                }
                out
            }
            Primitive::RowNormalize => {
                let mut out = a.clone();
                for r in 0..a.rows() {
                    let row = out.row_slice_mut(r);
                    let norm = l2(row);
                    if norm == 0.0 || !norm.is_finite() {
                        return Err(NumgradError::ZeroNorm { op: op.name(), row: r });
                    }
                    row.iter_mut().for_each(|x| *x /= norm);
                }
                out
            }
            Primitive::RowDot => {
                let b = b.expect("arity checked");
                if a.shape() != b.shape() {
                    return Err(mismatch(b));
                }
                let data = a
                    .iter_rows()
                    .zip(b.iter_rows())
                    .map(|(x, y)| x.iter().zip(y).map(|(p, q)| p * q).sum())
                    .collect();
                Tensor::from_raw(Shape::new(a.rows(), 1), data)
            }
            Primitive::Gather(idx) => {
                if idx.len() != a.rows() {
                    return Err(NumgradError::IndexCount {
                        rows: a.rows(),
                        indices: idx.len(),
                    });
                }
                if let Some(&bad) = idx.iter().find(|&&i| i >= a.cols()) {
                    return Err(NumgradError::IndexOutOfRange {
                        index: bad,
                        cols: a.cols(),
                    });
                }
                let data = idx.iter().enumerate().map(|(r, &c)| a.get(r, c)).collect();
                Tensor::from_raw(Shape::new(a.rows(), 1), data)
            }
            Primitive::Mean => {
                let n = a.shape().len().max(1) as f64;
                Tensor::scalar(a.data().iter().sum::<f64>() / n)
            }
            Primitive::Sum => Tensor::scalar(a.data().iter().sum()),
            Primitive::Transpose => a.transpose(),
        };
        Ok(out)
    }

    /// Reverse pass from a scalar `loss`.
    pub fn backward(&self, loss: Var) -> Result<Gradients, NumgradError> {
        if loss.0 >= self.nodes.len() {
            return Err(NumgradError::UnknownVar(loss.0));
        }
        let shape = self.shape(loss);
        if !shape.is_scalar() {
            return Err(NumgradError::NonScalarLoss(shape));
        }
        let mut grads: Vec<Option<Tensor>> = vec![None; loss.0 + 1];
        grads[loss.0] = Some(Tensor::scalar(1.0));

        for i in (0..=loss.0).rev() {
            let node = &self.nodes[i];
            let Some((op, operands)) = &node.op else { continue };
            if !node.needs_grad {
                continue;
            }
            let Some(g) = grads[i].take() else { continue };
            let contributions = self.local_grads(op, operands, &node.value, &g);
            for (var, contrib) in operands.iter().zip(contributions) {
                if !self.nodes[var.0].needs_grad {
                    continue;
                }
                accumulate(&mut grads[var.0], contrib);
            }
        }

        Ok(Gradients {
            grads: grads
                .into_iter()
                .enumerate()
                .map(|(i, g)| if self.nodes[i].trainable { g } else { None })
                .collect(),
            shapes: self.nodes.iter().map(|n| n.value.shape()).collect(),
        })
    }

    fn local_grads(&self, op: &Primitive, operands: &[Var], out: &Tensor, g: &Tensor) -> Vec<Tensor> {
        let a = &self.nodes[operands[0].0].value;
        let b = operands.get(1).map(|v| &self.nodes[v.0].value);
        match op {
            Primitive::MatMul => {
                let b = b.expect("binary");
                vec![matmul_nt(g, b), matmul_tn(a, g)]
            }
            Primitive::Add | Primitive::Sub => {
                let b = b.expect("binary");
                let sign = if matches!(op, Primitive::Sub) { -1.0 } else { 1.0 };
                let gb = reduce_to(g, b.shape(), sign);
                vec![g.clone(), gb]
            }
            Primitive::Mul => {
                let b = b.expect("binary");
                let cols = a.cols();
                let broadcast = b.shape() != a.shape();
                let ga: Vec<f64> = g
                    .data()
                    .iter()
                    .enumerate()
                    .map(|(i, &gv)| gv * if broadcast { b.data()[i % cols] } else { b.data()[i] })
                    .collect();
                let gab: Vec<f64> = g.data().iter().zip(a.data()).map(|(gv, av)| gv * av).collect();
                let gab = Tensor::from_raw(a.shape(), gab);
                vec![Tensor::from_raw(a.shape(), ga), reduce_to(&gab, b.shape(), 1.0)]
            }
            Primitive::Scale(c) => vec![map(g, |x| c * x)],
            Primitive::LeakyRelu(s) => vec![zip(g, a, |gv, x| if x > 0.0 { gv } else { s * gv })],
            Primitive::Relu => vec![zip(g, a, |gv, x| if x > 0.0 { gv } else { 0.0 })],
            Primitive::Exp => vec![zip(g, out, |gv, y| gv * y)],
            Primitive::Ln => vec![zip(g, a, |gv, x| gv / x)],
            Primitive::LogSoftmax => {
                let mut dx = g.clone();
                for r in 0..g.rows() {
                    let gsum: f64 = g.row_slice(r).iter().sum();
                    let yrow = out.row_slice(r);
                    for (d, y) in dx.row_slice_mut(r).iter_mut().zip(yrow) {
                        *d -= y.exp() * gsum;
                    }
                }
                vec![dx]
            }
            Primitive::RowNormalize => {
                let mut dx = g.clone();
                for r in 0..g.rows() {
                    let norm = l2(a.row_slice(r));
                    let yrow = out.row_slice(r);
                    let proj: f64 = yrow.iter().zip(g.row_slice(r)).map(|(y, gv)| y * gv).sum();
                    for (d, y) in dx.row_slice_mut(r).iter_mut().zip(yrow) {
                        *d = (*d - y * proj) / norm;
                    }
                }
                vec![dx]
            }
            Primitive::RowDot => {
                let b = b.expect("binary");
                let cols = a.cols();
                let ga = a
                    .data()
                    .iter()
                    .enumerate()
                    .map(|(i, _)| g.data()[i / cols] * b.data()[i])
                    .collect();
                let gb = b
                    .data()
                    .iter()
                    .enumerate()
                    .map(|(i, _)| g.data()[i / cols] * a.data()[i])
                    .collect();
                vec![Tensor::from_raw(a.shape(), ga), Tensor::from_raw(b.shape(), gb)]
            }
            Primitive::Gather(idx) => {
                let mut dx = Tensor::zeros(a.rows(), a.cols());
                let cols = a.cols();
                for (r, &c) in idx.iter().enumerate() {
                    dx.data_mut()[r * cols + c] += g.data()[r];
                }
                vec![dx]
            }
            Primitive::Mean => {
                let n = a.shape().len().max(1) as f64;
                vec![Tensor::filled(a.rows(), a.cols(), g.data()[0] / n)]
            }
            Primitive::Sum => vec![Tensor::filled(a.rows(), a.cols(), g.data()[0])],
            Primitive::Transpose => vec![g.transpose()],
        }
    }
}

macro_rules! unary {
    ($($name:ident => $prim:expr),* $(,)?) => {
        impl Tape {
            $(
                pub fn $name(&mut self, a: Var) -> Result<Var, NumgradError> {
                    self.record($prim, &[a])
                }
            )*
        }
    };
}

macro_rules! binary {
    ($($name:ident => $prim:expr),* $(,)?) => {
        impl Tape {
            $(
                pub fn $name(&mut self, a: Var, b: Var) -> Result<Var, NumgradError> {
                    self.record($prim, &[a, b])
                }
            )*
        }
    };
}

unary! {
    relu => Primitive::Relu,
    exp => Primitive::Exp,
    ln => Primitive::Ln,
    log_softmax => Primitive::LogSoftmax,
    row_normalize => Primitive::RowNormalize,
    mean => Primitive::Mean,
    sum => Primitive::Sum,
    transpose => Primitive::Transpose,
}

binary! {
    matmul => Primitive::MatMul,
    add => Primitive::Add,
    sub => Primitive::Sub,
    mul => Primitive::Mul,
    row_dot => Primitive::RowDot,
}

impl Tape {
    pub fn scale(&mut self, a: Var, c: f64) -> Result<Var, NumgradError> {
        self.record(Primitive::Scale(c), &[a])
    }

    pub fn leaky_relu(&mut self, a: Var, slope: f64) -> Result<Var, NumgradError> {
        self.record(Primitive::LeakyRelu(slope), &[a])
    }

    pub fn gather(&mut self, a: Var, idx: Vec<usize>) -> Result<Var, NumgradError> {
        self.record(Primitive::Gather(idx), &[a])
    }
}

/// Gradients of one backward pass. Only trainable leaves carry values; every
/// other query (including unreachable leaves) yields zeros.
#[derive(Debug, Clone)]
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
    shapes: Vec<Shape>,
}

impl Gradients {
    pub fn wrt(&self, v: Var) -> Tensor {
        match self.grads.get(v.0).and_then(Option::as_ref) {
            Some(g) => g.clone(),
            None => {
                let s = self.shapes[v.0];
                Tensor::zeros(s.rows, s.cols)
            }
        }
    }
}

fn broadcast_kind(a: Shape, b: Shape) -> Option<bool> {
    if a == b {
        Some(false)
    } else if b.rows == 1 && b.cols == a.cols {
        Some(true)
    } else {
        None
    }
}

fn reduce_to(g: &Tensor, shape: Shape, sign: f64) -> Tensor {
    if g.shape() == shape {
        return map(g, |x| sign * x);
    }
    let mut out = vec![0.0; shape.cols];
    for row in g.iter_rows() {
        for (o, v) in out.iter_mut().zip(row) {
            *o += v;
        }
    }
    out.iter_mut().for_each(|x| *x *= sign);
    Tensor::from_raw(shape, out)
}

fn accumulate(slot: &mut Option<Tensor>, contrib: Tensor) {
    match slot {
        Some(acc) => acc
            .data_mut()
            .iter_mut()
            .zip(contrib.data())
            .for_each(|(a, c)| *a += c),
        None => *slot = Some(contrib),
    }
}

fn map(t: &Tensor, f: impl Fn(f64) -> f64) -> Tensor {
    Tensor::from_raw(t.shape(), t.data().iter().map(|&x| f(x)).collect())
}

fn zip(g: &Tensor, x: &Tensor, f: impl Fn(f64, f64) -> f64) -> Tensor {
    Tensor::from_raw(
        g.shape(),
        g.data().iter().zip(x.data()).map(|(&a, &b)| f(a, b)).collect(),
    )
}

pub(crate) fn l2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(rows: usize, cols: usize, v: &[f64]) -> Tensor {
        Tensor::new(rows, cols, v.to_vec()).unwrap()
    }

    #[test]
    fn matmul_example() {
        let mut tape = Tape::new();
        let a = tape.constant(t(1, 2, &[1., 2.]));
        let b = tape.constant(t(2, 1, &[3., 4.]));
        let c = tape.matmul(a, b).unwrap();
        assert_eq!(tape.value(c).data(), &[11.0]);
    }

    #[test]
    fn relu_and_log_softmax_examples() {
        let mut tape = Tape::new();
        let a = tape.constant(t(1, 3, &[-1., 0., 2.]));
        let r = tape.relu(a).unwrap();
        assert_eq!(tape.value(r).data(), &[0., 0., 2.]);

        let z = tape.constant(t(1, 2, &[0., 0.]));
        let ls = tape.log_softmax(z).unwrap();
        let expect = -(2f64.ln());
        for v in tape.value(ls).data() {
            assert!((v - expect).abs() < 1e-15);
        }
    }

    #[test]
    fn shape_mismatch_names_primitive_and_shapes() {
        let mut tape = Tape::new();
        let a = tape.constant(Tensor::zeros(2, 3));
        let b = tape.constant(Tensor::zeros(2, 3));
        let err = tape.matmul(a, b).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("matmul") && msg.contains("2x3"), "{msg}");
        let c = tape.constant(Tensor::zeros(2, 2));
        assert!(tape.add(a, c).is_err());
        assert!(tape.row_dot(a, c).is_err());
    }

    #[test]
    fn sum_and_masked_mean_gradients() {
        let mut tape = Tape::new();
        let w = tape.param(t(1, 2, &[1., 2.]));
        let s = tape.sum(w).unwrap();
        let g = tape.backward(s).unwrap();
        assert_eq!(g.wrt(w).data(), &[1., 1.]);

        let mut tape = Tape::new();
        let w = tape.param(t(1, 2, &[-1., 3.]));
        let r = tape.relu(w).unwrap();
        let m = tape.mean(r).unwrap();
        let g = tape.backward(m).unwrap();
        assert_eq!(g.wrt(w).data(), &[0., 0.5]);
    }

    #[test]
    fn relu_subgradient_at_zero_is_zero() {
        let mut tape = Tape::new();
        let w = tape.param(t(1, 1, &[0.0]));
        let r = tape.relu(w).unwrap();
        let s = tape.sum(r).unwrap();
        assert_eq!(tape.backward(s).unwrap().wrt(w).data(), &[0.0]);
    }

    #[test]
    fn non_scalar_loss_rejected() {
        let mut tape = Tape::new();
        let w = tape.param(Tensor::zeros(1, 2));
        assert!(matches!(tape.backward(w), Err(NumgradError::NonScalarLoss(_))));
    }

    #[test]
    fn unreachable_leaf_gets_zero() {
        let mut tape = Tape::new();
        let w = tape.param(t(1, 2, &[1., 2.]));
        let unused = tape.param(t(2, 2, &[1., 2., 3., 4.]));
        let s = tape.sum(w).unwrap();
        let g = tape.backward(s).unwrap();
        assert_eq!(g.wrt(unused), Tensor::zeros(2, 2));
    }

    #[test]
    fn broadcast_add_sums_over_rows() {
        let mut tape = Tape::new();
        let x = tape.constant(t(3, 2, &[1., 2., 3., 4., 5., 6.]));
        let b = tape.param(t(1, 2, &[10., 20.]));
        let y = tape.add(x, b).unwrap();
        assert_eq!(tape.value(y).data(), &[11., 22., 13., 24., 15., 26.]);
        let s = tape.sum(y).unwrap();
        assert_eq!(tape.backward(s).unwrap().wrt(b).data(), &[3., 3.]);
    }

    #[test]
    fn gather_bounds_checked() {
        let mut tape = Tape::new();
        let x = tape.constant(Tensor::zeros(2, 3));
        assert!(tape.gather(x, vec![0]).is_err());
        assert!(tape.gather(x, vec![0, 3]).is_err());
        let g = tape.gather(x, vec![0, 2]).unwrap();
        assert_eq!(tape.shape(g), Shape::new(2, 1));
    }

    #[test]
    fn zero_row_normalize_rejected() {
        let mut tape = Tape::new();
        let x = tape.constant(t(2, 2, &[1., 0., 0., 0.]));
        assert!(matches!(
            tape.row_normalize(x),
            Err(NumgradError::ZeroNorm { row: 1, .. })
        ));
    }
}
