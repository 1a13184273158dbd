use std::fmt;

use super::tensor::{matmul_into, Shape, Tensor};
use super::NumError;

/// Handle to a node recorded on a [`Tape`].
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

/// A differentiable operation defined outside the tape, e.g. the CRF likelihood.
///
/// `backward` receives the forward inputs, the forward output and the gradient flowing
/// into the output, and returns one gradient buffer per input (same length as the input).
pub trait CustomOp {
    fn name(&self) -> &'static str;
    fn backward(&self, inputs: &[&Tensor], output: &Tensor, out_grad: &[f64]) -> Vec<Vec<f64>>;
}

enum Op {
    Leaf { slot: Option<usize> },
    Constant,
    MatMul(Var, Var),
    Add(Var, Var),
    AddRow(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    Tanh(Var),
    Sigmoid(Var),
    Ln(Var),
    SoftmaxRows(Var),
    Sum(Var),
    Transpose(Var),
    SliceCols { src: Var, start: usize },
    SelectRows { src: Var, rows: Vec<Option<usize>> },
    ConcatCols(Vec<Var>),
    ConcatRows(Vec<Var>),
    RepeatRows(Var),
    Pick { src: Var, row: usize, col: usize },
    Custom { inputs: Vec<Var>, op: Box<dyn CustomOp> },
}

impl fmt::Debug for Op {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Op::Leaf { .. } => "leaf",
            Op::Constant => "constant",
            Op::MatMul(..) => "matmul",
            Op::Add(..) => "add",
            Op::AddRow(..) => "add_row",
            Op::Mul(..) => "mul",
            Op::Scale(..) => "scale",
            Op::Tanh(..) => "tanh",
            Op::Sigmoid(..) => "sigmoid",
            Op::Ln(..) => "ln",
            Op::SoftmaxRows(..) => "softmax_rows",
            Op::Sum(..) => "sum",
            Op::Transpose(..) => "transpose",
            Op::SliceCols { .. } => "slice_cols",
            Op::SelectRows { .. } => "select_rows",
            Op::ConcatCols(..) => "concat_cols",
            Op::ConcatRows(..) => "concat_rows",
            Op::RepeatRows(..) => "repeat_rows",
            Op::Pick { .. } => "pick",
            Op::Custom { op, .. } => op.name(),
        };
        f.write_str(name)
    }
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
    // false for constants and anything computed only from constants
    tracked: bool,
}

/// Dynamic reverse-mode gradient tape, rebuilt for every forward pass.
///
/// Nodes are appended in evaluation order, so a node's inputs always precede it and a
/// single reverse sweep visits every node once.
#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// Result of [`Tape::backward`]: one gradient buffer per tracked node.
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Vec<f64>>>,
    slots: Vec<(usize, Var)>,
    shapes: Vec<Shape>,
}

impl Gradients {
    /// Gradient with respect to `var`; all zeros when the loss does not depend on it.
    pub fn wrt(&self, var: Var) -> Vec<f64> {
        match &self.grads[var.0] {
            Some(g) => g.clone(),
            None => vec![0.0; self.shapes[var.0].len()],
        }
    }

    /// Gradients of leaves registered with a parameter slot, as `(slot, grad)` pairs.
    pub fn slots(&self) -> impl Iterator<Item = (usize, Vec<f64>)> + '_ {
        self.slots.iter().map(|&(slot, var)| (slot, self.wrt(var)))
    }
}

impl Tape {
    pub fn new() -> Self {
        Tape { nodes: Vec::with_capacity(1024) }
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

    pub fn shape(&self, v: Var) -> Shape {
        self.nodes[v.0].value.shape()
    }

    fn push(&mut self, value: Tensor, op: Op, tracked: bool) -> Var {
        self.nodes.push(Node { value, op, tracked });
        Var(self.nodes.len() - 1)
    }

    fn tracked(&self, vars: &[Var]) -> bool {
        vars.iter().any(|v| self.nodes[v.0].tracked)
    }

    /// Records a trainable leaf.
    pub fn leaf(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf { slot: None }, true)
    }

    /// Records a trainable leaf tied to an external parameter slot.
    pub fn param_leaf(&mut self, slot: usize, value: Tensor) -> Var {
        self.push(value, Op::Leaf { slot: Some(slot) }, true)
    }

    /// Records a value that never receives a gradient.
    pub fn constant(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Constant, false)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var, NumError> {
        let value = self.value(a).matmul(self.value(b))?;
        let tracked = self.tracked(&[a, b]);
        Ok(self.push(value, Op::MatMul(a, b), tracked))
    }

    fn same_shape(&self, op: &'static str, a: Var, b: Var) -> Result<(), NumError> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa != sb {
            return Err(NumError::Dimension { op, left: sa, right: sb });
        }
        Ok(())
    }

    fn zip_with(&mut self, a: Var, b: Var, f: impl Fn(f64, f64) -> f64) -> Tensor {
        let (ta, tb) = (self.value(a), self.value(b));
        let data = ta.data().iter().zip(tb.data()).map(|(x, y)| f(*x, *y)).collect();
        Tensor::new(ta.shape(), data).expect("same shape")
    }

    fn map(&self, a: Var, f: impl Fn(f64) -> f64) -> Tensor {
        let t = self.value(a);
        Tensor::new(t.shape(), t.data().iter().map(|x| f(*x)).collect()).expect("same shape")
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var, NumError> {
        self.same_shape("add", a, b)?;
        let value = self.zip_with(a, b, |x, y| x + y);
        let tracked = self.tracked(&[a, b]);
        Ok(self.push(value, Op::Add(a, b), tracked))
    }

    /// Adds a `1 × n` row to every row of an `m × n` matrix.
    pub fn add_row(&mut self, a: Var, row: Var) -> Result<Var, NumError> {
        let (sa, sr) = (self.shape(a), self.shape(row));
        if sr.rows != 1 || sr.cols != sa.cols {
            return Err(NumError::Dimension { op: "add_row", left: sa, right: sr });
        }
        let r = self.value(row).data().to_vec();
        let mut value = self.value(a).clone();
        for chunk in value.data_mut().chunks_mut(sa.cols) {
            chunk.iter_mut().zip(&r).for_each(|(x, y)| *x += y);
        }
        let tracked = self.tracked(&[a, row]);
        Ok(self.push(value, Op::AddRow(a, row), tracked))
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var, NumError> {
        self.same_shape("mul", a, b)?;
        let value = self.zip_with(a, b, |x, y| x * y);
        let tracked = self.tracked(&[a, b]);
        Ok(self.push(value, Op::Mul(a, b), tracked))
    }

    pub fn scale(&mut self, a: Var, factor: f64) -> Var {
        let value = self.map(a, |x| x * factor);
        let tracked = self.tracked(&[a]);
        self.push(value, Op::Scale(a, factor), tracked)
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let value = self.map(a, f64::tanh);
        let tracked = self.tracked(&[a]);
        self.push(value, Op::Tanh(a), tracked)
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let value = self.map(a, sigmoid);
        let tracked = self.tracked(&[a]);
        self.push(value, Op::Sigmoid(a), tracked)
    }

    pub fn ln(&mut self, a: Var) -> Var {
        let value = self.map(a, f64::ln);
        let tracked = self.tracked(&[a]);
        self.push(value, Op::Ln(a), tracked)
    }

    /// Row-wise stable softmax.
    pub fn softmax_rows(&mut self, a: Var) -> Result<Var, NumError> {
        let t = self.value(a);
        let mut data = Vec::with_capacity(t.shape().len());
        for r in 0..t.rows() {
            data.extend(super::tensor::softmax(t.row_slice(r))?);
        }
        let value = Tensor::new(t.shape(), data)?;
        let tracked = self.tracked(&[a]);
        Ok(self.push(value, Op::SoftmaxRows(a), tracked))
    }

    /// Sum of all entries as a `1 × 1` tensor.
    pub fn sum(&mut self, a: Var) -> Var {
        let value = Tensor::scalar(self.value(a).data().iter().sum());
        let tracked = self.tracked(&[a]);
        self.push(value, Op::Sum(a), tracked)
    }

    pub fn transpose(&mut self, a: Var) -> Var {
        let value = self.value(a).transpose();
        let tracked = self.tracked(&[a]);
        self.push(value, Op::Transpose(a), tracked)
    }

    /// Columns `start..start + len`.
    pub fn slice_cols(&mut self, a: Var, start: usize, len: usize) -> Result<Var, NumError> {
        let t = self.value(a);
        if len == 0 || start + len > t.cols() {
            return Err(NumError::Contract(format!(
                "slice_cols {start}..{} out of range for {}",
                start + len,
                t.shape()
            )));
        }
        let mut data = Vec::with_capacity(t.rows() * len);
        for r in 0..t.rows() {
            data.extend_from_slice(&t.row_slice(r)[start..start + len]);
        }
        let value = Tensor::new(Shape::new(t.rows(), len), data)?;
        let tracked = self.tracked(&[a]);
        Ok(self.push(value, Op::SliceCols { src: a, start }, tracked))
    }

    /// Gathers rows by index; `None` yields a zero row.
    pub fn select_rows(&mut self, a: Var, rows: &[Option<usize>]) -> Result<Var, NumError> {
        let t = self.value(a);
        if rows.is_empty() {
            return Err(NumError::Contract("select_rows with no rows".into()));
        }
        let cols = t.cols();
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            match r {
                Some(i) if *i < t.rows() => data.extend_from_slice(t.row_slice(*i)),
                Some(i) => {
                    return Err(NumError::Contract(format!(
                        "row {i} out of range for {}",
                        t.shape()
                    )))
                }
                None => data.extend(std::iter::repeat_n(0.0, cols)),
            }
        }
        let value = Tensor::new(Shape::new(rows.len(), cols), data)?;
        let tracked = self.tracked(&[a]);
        Ok(self.push(value, Op::SelectRows { src: a, rows: rows.to_vec() }, tracked))
    }

    pub fn row(&mut self, a: Var, r: usize) -> Result<Var, NumError> {
        self.select_rows(a, &[Some(r)])
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var, NumError> {
        let first = *parts
            .first()
            .ok_or_else(|| NumError::Contract("concat_cols of nothing".into()))?;
        let rows = self.shape(first).rows;
        for p in parts {
            if self.shape(*p).rows != rows {
                return Err(NumError::Dimension {
                    op: "concat_cols",
                    left: self.shape(first),
                    right: self.shape(*p),
                });
            }
        }
        let cols: usize = parts.iter().map(|p| self.shape(*p).cols).sum();
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for p in parts {
                data.extend_from_slice(self.value(*p).row_slice(r));
            }
        }
        let value = Tensor::new(Shape::new(rows, cols), data)?;
        let tracked = self.tracked(parts);
        Ok(self.push(value, Op::ConcatCols(parts.to_vec()), tracked))
    }

    pub fn concat_rows(&mut self, parts: &[Var]) -> Result<Var, NumError> {
        let first = *parts
            .first()
            .ok_or_else(|| NumError::Contract("concat_rows of nothing".into()))?;
        let cols = self.shape(first).cols;
        let mut data = Vec::new();
        let mut rows = 0;
        for p in parts {
            let t = self.value(*p);
            if t.cols() != cols {
                return Err(NumError::Dimension {
                    op: "concat_rows",
                    left: self.shape(first),
                    right: t.shape(),
                });
            }
            rows += t.rows();
            data.extend_from_slice(t.data());
        }
        let value = Tensor::new(Shape::new(rows, cols), data)?;
        let tracked = self.tracked(parts);
        Ok(self.push(value, Op::ConcatRows(parts.to_vec()), tracked))
    }

    /// Stacks `times` copies of a `1 × n` row.
    pub fn repeat_rows(&mut self, a: Var, times: usize) -> Result<Var, NumError> {
        let t = self.value(a);
        if t.rows() != 1 || times == 0 {
            return Err(NumError::Contract(format!(
                "repeat_rows needs a single row and times > 0, got {} x{times}",
                t.shape()
            )));
        }
        let data = t.data().repeat(times);
        let value = Tensor::new(Shape::new(times, t.cols()), data)?;
        let tracked = self.tracked(&[a]);
        Ok(self.push(value, Op::RepeatRows(a), tracked))
    }

    /// Single entry as a `1 × 1` tensor.
    pub fn pick(&mut self, a: Var, row: usize, col: usize) -> Result<Var, NumError> {
        let t = self.value(a);
        if row >= t.rows() || col >= t.cols() {
            return Err(NumError::Contract(format!(
                "index ({row}, {col}) out of range for {}",
                t.shape()
            )));
        }
        let value = Tensor::scalar(t.get(row, col));
        let tracked = self.tracked(&[a]);
        Ok(self.push(value, Op::Pick { src: a, row, col }, tracked))
    }

    /// Records an externally computed value together with its gradient rule.
    pub fn custom(&mut self, inputs: &[Var], value: Tensor, op: Box<dyn CustomOp>) -> Var {
        let tracked = self.tracked(inputs);
        self.push(value, Op::Custom { inputs: inputs.to_vec(), op }, tracked)
    }

    /// Reverse sweep from a scalar `loss`.
    pub fn backward(&self, loss: Var) -> Result<Gradients, NumError> {
        let shape = self.shape(loss);
        if !shape.is_scalar() {
            return Err(NumError::Contract(format!("backward needs a scalar loss, got {shape}")));
        }
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; self.nodes.len()];
        grads[loss.0] = Some(vec![1.0]);

        for idx in (0..=loss.0).rev() {
            let node = &self.nodes[idx];
            if !node.tracked {
                continue;
            }
            let Some(g) = grads[idx].take() else { continue };
            self.propagate(node, &g, &mut grads);
            grads[idx] = Some(g);
        }

        let slots = self
            .nodes
            .iter()
            .enumerate()
            .filter_map(|(i, n)| match n.op {
                Op::Leaf { slot: Some(s) } => Some((s, Var(i))),
                _ => None,
            })
            .collect();
        let shapes = self.nodes.iter().map(|n| n.value.shape()).collect();
        Ok(Gradients { grads, slots, shapes })
    }

    fn propagate(&self, node: &Node, g: &[f64], grads: &mut [Option<Vec<f64>>]) {
        let out = &node.value;
        match &node.op {
            Op::Leaf { .. } | Op::Constant => {}
            Op::MatMul(a, b) => {
                let (ta, tb) = (self.value(*a), self.value(*b));
                let (m, k, n) = (ta.rows(), ta.cols(), tb.cols());
                if self.nodes[a.0].tracked {
                    // dA = dC · Bᵀ
                    let bt = tb.transpose();
                    let mut da = vec![0.0; m * k];
                    matmul_into(g, bt.data(), &mut da, m, n, k);
                    accumulate(grads, *a, &da);
                }
                if self.nodes[b.0].tracked {
                    // dB = Aᵀ · dC
                    let at = ta.transpose();
                    let mut db = vec![0.0; k * n];
                    matmul_into(at.data(), g, &mut db, k, m, n);
                    accumulate(grads, *b, &db);
                }
            }
            Op::Add(a, b) => {
                accumulate(grads, *a, g);
                accumulate(grads, *b, g);
            }
            Op::AddRow(a, row) => {
                accumulate(grads, *a, g);
                let cols = out.cols();
                let mut dr = vec![0.0; cols];
                for chunk in g.chunks(cols) {
                    dr.iter_mut().zip(chunk).for_each(|(d, x)| *d += x);
                }
                accumulate(grads, *row, &dr);
            }
            Op::Mul(a, b) => {
                let (ta, tb) = (self.value(*a), self.value(*b));
                let da: Vec<f64> = g.iter().zip(tb.data()).map(|(x, y)| x * y).collect();
                let db: Vec<f64> = g.iter().zip(ta.data()).map(|(x, y)| x * y).collect();
                accumulate(grads, *a, &da);
                accumulate(grads, *b, &db);
            }
            Op::Scale(a, factor) => {
                let da: Vec<f64> = g.iter().map(|x| x * factor).collect();
                accumulate(grads, *a, &da);
            }
            Op::Tanh(a) => {
                let da: Vec<f64> = g.iter().zip(out.data()).map(|(x, y)| x * (1.0 - y * y)).collect();
                accumulate(grads, *a, &da);
            }
            Op::Sigmoid(a) => {
                let da: Vec<f64> = g.iter().zip(out.data()).map(|(x, y)| x * y * (1.0 - y)).collect();
                accumulate(grads, *a, &da);
            }
            Op::Ln(a) => {
                let ta = self.value(*a);
                let da: Vec<f64> = g.iter().zip(ta.data()).map(|(x, y)| x / y).collect();
                accumulate(grads, *a, &da);
            }
            Op::SoftmaxRows(a) => {
                let cols = out.cols();
                let mut da = Vec::with_capacity(g.len());
                for (gr, yr) in g.chunks(cols).zip(out.data().chunks(cols)) {
                    let dot: f64 = gr.iter().zip(yr).map(|(x, y)| x * y).sum();
                    da.extend(gr.iter().zip(yr).map(|(x, y)| y * (x - dot)));
                }
                accumulate(grads, *a, &da);
            }
            Op::Sum(a) => {
                let da = vec![g[0]; self.shape(*a).len()];
                accumulate(grads, *a, &da);
            }
            Op::Transpose(a) => {
                let gt = Tensor::new(out.shape(), g.to_vec()).expect("shape").transpose();
                accumulate(grads, *a, gt.data());
            }
            Op::SliceCols { src, start } => {
                let s = self.shape(*src);
                let len = out.cols();
                let mut da = vec![0.0; s.len()];
                for r in 0..s.rows {
                    da[r * s.cols + start..r * s.cols + start + len]
                        .copy_from_slice(&g[r * len..(r + 1) * len]);
                }
                accumulate(grads, *src, &da);
            }
            Op::SelectRows { src, rows } => {
                let s = self.shape(*src);
                let mut da = vec![0.0; s.len()];
                for (i, r) in rows.iter().enumerate() {
                    if let Some(r) = r {
                        let dst = &mut da[r * s.cols..(r + 1) * s.cols];
                        dst.iter_mut()
                            .zip(&g[i * s.cols..(i + 1) * s.cols])
                            .for_each(|(d, x)| *d += x);
                    }
                }
                accumulate(grads, *src, &da);
            }
            Op::ConcatCols(parts) => {
                let rows = out.rows();
                let total = out.cols();
                let mut offset = 0;
                for p in parts {
                    let c = self.shape(*p).cols;
                    let mut dp = Vec::with_capacity(rows * c);
                    for r in 0..rows {
                        dp.extend_from_slice(&g[r * total + offset..r * total + offset + c]);
                    }
                    accumulate(grads, *p, &dp);
                    offset += c;
                }
            }
            Op::ConcatRows(parts) => {
                let mut offset = 0;
                for p in parts {
                    let len = self.shape(*p).len();
                    accumulate(grads, *p, &g[offset..offset + len]);
                    offset += len;
                }
            }
            Op::RepeatRows(a) => {
                let cols = out.cols();
                let mut da = vec![0.0; cols];
                for chunk in g.chunks(cols) {
                    da.iter_mut().zip(chunk).for_each(|(d, x)| *d += x);
                }
                accumulate(grads, *a, &da);
            }
            Op::Pick { src, row, col } => {
                let s = self.shape(*src);
                let mut da = vec![0.0; s.len()];
                da[row * s.cols + col] = g[0];
                accumulate(grads, *src, &da);
            }
            Op::Custom { inputs, op } => {
                let values: Vec<&Tensor> = inputs.iter().map(|v| self.value(*v)).collect();
                let input_grads = op.backward(&values, out, g);
                for (v, dv) in inputs.iter().zip(input_grads) {
                    accumulate(grads, *v, &dv);
                }
            }
        }
    }
}

fn accumulate(grads: &mut [Option<Vec<f64>>], v: Var, delta: &[f64]) {
    match &mut grads[v.0] {
        Some(g) => g.iter_mut().zip(delta).for_each(|(a, b)| *a += b),
        slot @ None => *slot = Some(delta.to_vec()),
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}
