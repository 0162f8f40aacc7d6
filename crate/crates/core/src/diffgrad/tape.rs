use std::collections::BTreeMap;

use super::params::{ParamId, ParamStore};
use super::tensor::{self, Tensor};
use super::TensorError;

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

/// User-supplied differentiable operation.
///
/// `backward` returns one gradient per input, shaped like that input.
pub trait CustomOp {
    fn name(&self) -> &'static str;
    fn forward(&self, inputs: &[&Tensor]) -> Result<Tensor, TensorError>;
    fn backward(&self, inputs: &[&Tensor], output: &Tensor, grad: &Tensor) -> Vec<Tensor>;
}

enum Op {
    Leaf(Option<ParamId>),
    MatMul(Var, Var),
    MatMulNt(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    Neg(Var),
    MeanRows(Var),
    SumCols(Var),
    SumAll(Var),
    ConcatRows(Vec<Var>),
    ConcatCols(Vec<Var>),
    Dot(Var, Var),
    Sigmoid(Var),
    Relu(Var),
    SoftmaxRows(Var),
    Log { input: Var, floor: f64 },
    LogSigmoid(Var),
    GatherRows(Var, Vec<usize>),
    PairDots(Var, Vec<(usize, usize)>),
    PickCols(Var, Vec<usize>),
    Custom(Vec<Var>, Box<dyn CustomOp>),
}

struct Node {
    value: Tensor,
    op: Op,
}

/// Linear record of executed operations. Values are computed eagerly;
/// [`Tape::backward`] replays the record in reverse.
#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
    backward_done: bool,
}

/// Gradients produced by one backward pass.
#[derive(Debug, Default)]
pub struct Gradients {
    params: BTreeMap<ParamId, Tensor>,
    leaves: BTreeMap<Var, Tensor>,
}

impl Gradients {
    pub fn param(&self, id: ParamId) -> Option<&Tensor> {
        self.params.get(&id)
    }

    /// Gradient of any leaf recorded with [`Tape::constant`] or [`Tape::param`].
    pub fn leaf(&self, var: Var) -> Option<&Tensor> {
        self.leaves.get(&var)
    }

    /// One gradient per parameter in `store`, zero where the loss did not reach it.
    pub fn dense(&self, store: &ParamStore) -> Vec<Tensor> {
        store
            .iter()
            .map(|(id, _, value)| {
                self.params
                    .get(&id)
                    .cloned()
                    .unwrap_or_else(|| Tensor::zeros(value.rows(), value.cols()))
            })
            .collect()
    }
}

fn same_shape(op: &'static str, a: &Tensor, b: &Tensor) -> Result<(), TensorError> {
    if a.shape() != b.shape() {
        return Err(TensorError::Shape {
            op,
            left: a.shape(),
            right: b.shape(),
        });
    }
    Ok(())
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

    /// Drops every recorded op so the tape can be reused.
    pub fn reset(&mut self) {
        self.nodes.clear();
        self.backward_done = false;
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    fn push(&mut self, name: &'static str, value: Tensor, op: Op) -> Result<Var, TensorError> {
        if !value.is_finite() {
            return Err(TensorError::NonFinite { op: name });
        }
        self.nodes.push(Node { value, op });
        Ok(Var(self.nodes.len() - 1))
    }

    pub fn constant(&mut self, value: Tensor) -> Var {
        self.nodes.push(Node {
            value,
            op: Op::Leaf(None),
        });
        Var(self.nodes.len() - 1)
    }

    pub fn param(&mut self, store: &ParamStore, id: ParamId) -> Var {
        self.nodes.push(Node {
            value: store.get(id).clone(),
            op: Op::Leaf(Some(id)),
        });
        Var(self.nodes.len() - 1)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        let (x, y) = (self.value(a), self.value(b));
        if x.cols() != y.rows() {
            return Err(TensorError::Shape {
                op: "matmul",
                left: x.shape(),
                right: y.shape(),
            });
        }
        let out = tensor::matmul(x, y);
        self.push("matmul", out, Op::MatMul(a, b))
    }

    /// `a · bᵀ`
    pub fn matmul_nt(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        let (x, y) = (self.value(a), self.value(b));
        if x.cols() != y.cols() {
            return Err(TensorError::Shape {
                op: "matmul_nt",
                left: x.shape(),
                right: y.shape(),
            });
        }
        let out = tensor::matmul_nt(x, y);
        self.push("matmul_nt", out, Op::MatMulNt(a, b))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        let (x, y) = (self.value(a), self.value(b));
        same_shape("add", x, y)?;
        let mut out = x.clone();
        out.add_assign(y);
        self.push("add", out, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        let (x, y) = (self.value(a), self.value(b));
        same_shape("sub", x, y)?;
        let mut out = x.clone();
        for (o, v) in out.data_mut().iter_mut().zip(y.data()) {
            *o -= v;
        }
        self.push("sub", out, Op::Sub(a, b))
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        let (x, y) = (self.value(a), self.value(b));
        same_shape("mul", x, y)?;
        let mut out = x.clone();
        for (o, v) in out.data_mut().iter_mut().zip(y.data()) {
            *o *= v;
        }
        self.push("mul", out, Op::Mul(a, b))
    }

    pub fn scale(&mut self, a: Var, factor: f64) -> Result<Var, TensorError> {
        let out = self.value(a).scaled(factor);
        self.push("scale", out, Op::Scale(a, factor))
    }

    pub fn neg(&mut self, a: Var) -> Result<Var, TensorError> {
        let out = self.value(a).scaled(-1.0);
        self.push("neg", out, Op::Neg(a))
    }

    /// `n x d -> 1 x d` column-wise average of the rows.
    pub fn mean_rows(&mut self, a: Var) -> Result<Var, TensorError> {
        let x = self.value(a);
        if x.rows() == 0 {
            return Err(TensorError::Empty { op: "mean_rows" });
        }
        let mut out = Tensor::zeros(1, x.cols());
        for r in 0..x.rows() {
            for (o, v) in out.data_mut().iter_mut().zip(x.row(r)) {
                *o += v;
            }
        }
        let out = out.scaled(1.0 / x.rows() as f64);
        self.push("mean_rows", out, Op::MeanRows(a))
    }

    /// `n x d -> n x 1` row sums.
    pub fn sum_cols(&mut self, a: Var) -> Result<Var, TensorError> {
        let x = self.value(a);
        let data = (0..x.rows()).map(|r| x.row(r).iter().sum()).collect();
        let out = Tensor::new(x.rows(), 1, data)?;
        self.push("sum_cols", out, Op::SumCols(a))
    }

    pub fn sum(&mut self, a: Var) -> Result<Var, TensorError> {
        let out = Tensor::scalar(self.value(a).data().iter().sum());
        self.push("sum", out, Op::SumAll(a))
    }

    pub fn concat_rows(&mut self, parts: &[Var]) -> Result<Var, TensorError> {
        let first = parts.first().ok_or(TensorError::Empty { op: "concat_rows" })?;
        let cols = self.value(*first).cols();
        let mut data = Vec::new();
        let mut rows = 0;
        for &p in parts {
            let x = self.value(p);
            if x.cols() != cols {
                return Err(TensorError::Shape {
                    op: "concat_rows",
                    left: self.value(*first).shape(),
                    right: x.shape(),
                });
            }
            rows += x.rows();
            data.extend_from_slice(x.data());
        }
        let out = Tensor::new(rows, cols, data)?;
        self.push("concat_rows", out, Op::ConcatRows(parts.to_vec()))
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var, TensorError> {
        let first = parts.first().ok_or(TensorError::Empty { op: "concat_cols" })?;
        let rows = self.value(*first).rows();
        let mut cols = 0;
        for &p in parts {
            let x = self.value(p);
            if x.rows() != rows {
                return Err(TensorError::Shape {
                    op: "concat_cols",
                    left: self.value(*first).shape(),
                    right: x.shape(),
                });
            }
            cols += x.cols();
        }
        let mut out = Tensor::zeros(rows, cols);
        let mut offset = 0;
        for &p in parts {
            let x = self.value(p);
            for r in 0..rows {
                out.row_mut(r)[offset..offset + x.cols()].copy_from_slice(x.row(r));
            }
            offset += x.cols();
        }
        self.push("concat_cols", out, Op::ConcatCols(parts.to_vec()))
    }

    /// Inner product of two equally shaped tensors, as a `1 x 1` result.
    pub fn dot(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        let (x, y) = (self.value(a), self.value(b));
        same_shape("dot", x, y)?;
        let v = x.data().iter().zip(y.data()).map(|(p, q)| p * q).sum();
        self.push("dot", Tensor::scalar(v), Op::Dot(a, b))
    }

    pub fn sigmoid(&mut self, a: Var) -> Result<Var, TensorError> {
        let out = self.value(a).map(tensor::sigmoid);
        self.push("sigmoid", out, Op::Sigmoid(a))
    }

    pub fn relu(&mut self, a: Var) -> Result<Var, TensorError> {
        let out = self.value(a).map(|v| v.max(0.0));
        self.push("relu", out, Op::Relu(a))
    }

    pub fn softmax_rows(&mut self, a: Var) -> Result<Var, TensorError> {
        let mut out = self.value(a).clone();
        if out.cols() == 0 {
            return Err(TensorError::Empty { op: "softmax_rows" });
        }
        for r in 0..out.rows() {
            tensor::softmax_in_place(out.row_mut(r));
        }
        self.push("softmax_rows", out, Op::SoftmaxRows(a))
    }

    /// Natural log of `max(x, floor)`; the gradient is zero where the floor applies.
    pub fn log(&mut self, a: Var, floor: f64) -> Result<Var, TensorError> {
        let out = self.value(a).map(|v| v.max(floor).ln());
        self.push("log", out, Op::Log { input: a, floor })
    }

    pub fn log_sigmoid(&mut self, a: Var) -> Result<Var, TensorError> {
        let out = self.value(a).map(tensor::log_sigmoid);
        self.push("log_sigmoid", out, Op::LogSigmoid(a))
    }

    /// Selects rows by index; indices may repeat.
    pub fn gather_rows(&mut self, a: Var, indices: &[usize]) -> Result<Var, TensorError> {
        let x = self.value(a);
        let mut data = Vec::with_capacity(indices.len() * x.cols());
        for &i in indices {
            if i >= x.rows() {
                return Err(TensorError::Index {
                    op: "gather_rows",
                    index: i,
                    bound: x.rows(),
                });
            }
            data.extend_from_slice(x.row(i));
        }
        let out = Tensor::new(indices.len(), x.cols(), data)?;
        self.push("gather_rows", out, Op::GatherRows(a, indices.to_vec()))
    }

    /// `out[k] = a[i_k] . a[j_k]` over row pairs, an `n x 1` column. Same
    /// values as gathering both sides, multiplying and summing columns, with
    /// no `n x d` intermediates.
    pub fn pair_dots(&mut self, a: Var, pairs: &[(usize, usize)]) -> Result<Var, TensorError> {
        let x = self.value(a);
        let mut data = Vec::with_capacity(pairs.len());
        for &(i, j) in pairs {
            if let Some(&bad) = [i, j].iter().find(|&&r| r >= x.rows()) {
                return Err(TensorError::Index {
                    op: "pair_dots",
                    index: bad,
                    bound: x.rows(),
                });
            }
            data.push(x.row(i).iter().zip(x.row(j)).map(|(p, q)| p * q).sum());
        }
        let out = Tensor::new(pairs.len(), 1, data)?;
        self.push("pair_dots", out, Op::PairDots(a, pairs.to_vec()))
    }

    /// `out[r] = a[r, cols[r]]`, an `n x 1` column.
    pub fn pick_cols(&mut self, a: Var, cols: &[usize]) -> Result<Var, TensorError> {
        let x = self.value(a);
        if cols.len() != x.rows() {
            return Err(TensorError::Shape {
                op: "pick_cols",
                left: x.shape(),
                right: (cols.len(), 1),
            });
        }
        let mut data = Vec::with_capacity(cols.len());
        for (r, &c) in cols.iter().enumerate() {
            if c >= x.cols() {
                return Err(TensorError::Index {
                    op: "pick_cols",
                    index: c,
                    bound: x.cols(),
                });
            }
            data.push(x.get(r, c));
        }
        let out = Tensor::new(cols.len(), 1, data)?;
        self.push("pick_cols", out, Op::PickCols(a, cols.to_vec()))
    }

    pub fn custom(&mut self, inputs: &[Var], op: Box<dyn CustomOp>) -> Result<Var, TensorError> {
        let values: Vec<&Tensor> = inputs.iter().map(|&v| self.value(v)).collect();
        let out = op.forward(&values)?;
        let name = op.name();
        self.push(name, out, Op::Custom(inputs.to_vec(), op))
    }

    /// Reverse pass from a scalar `loss`. Each op is visited once, in reverse
    /// recording order.
    pub fn backward(&mut self, loss: Var) -> Result<Gradients, TensorError> {
        if self.backward_done {
            return Err(TensorError::BackwardTwice);
        }
        let shape = self.value(loss).shape();
        if shape != (1, 1) {
            return Err(TensorError::NotScalar { shape });
        }
        self.backward_done = true;

        let mut grads: Vec<Option<Tensor>> = Vec::with_capacity(loss.0 + 1);
        grads.resize_with(loss.0 + 1, || None);
        grads[loss.0] = Some(Tensor::scalar(1.0));
        let mut out = Gradients::default();

        for idx in (0..=loss.0).rev() {
            let Some(g) = grads[idx].take() else {
                continue;
            };
            let node = &self.nodes[idx];
            match &node.op {
                Op::Leaf(param) => {
                    if let Some(id) = param {
                        match out.params.get_mut(id) {
                            Some(acc) => acc.add_assign(&g),
                            None => {
                                out.params.insert(*id, g.clone());
                            }
                        }
                    }
                    out.leaves.insert(Var(idx), g);
                }
                op => self.propagate(op, &node.value, &g, &mut grads),
            }
        }
        Ok(out)
    }

    fn propagate(&self, op: &Op, y: &Tensor, g: &Tensor, grads: &mut [Option<Tensor>]) {
        let nodes = &self.nodes;
        let val = |v: &Var| &nodes[v.0].value;
        // Lazily allocates the gradient slot of `v` and lets `f` add into it.
        let mut acc = |v: Var, f: &mut dyn FnMut(&mut Tensor)| {
            let slot = &mut grads[v.0];
            if slot.is_none() {
                let (r, c) = nodes[v.0].value.shape();
                *slot = Some(Tensor::zeros(r, c));
            }
            f(slot.as_mut().expect("slot allocated"));
        };
        match op {
            Op::Leaf(_) => unreachable!("leaves handled by caller"),
            Op::MatMul(a, b) => {
                let da = tensor::matmul_nt(g, val(b));
                let db = tensor::matmul_tn(val(a), g);
                acc(*a, &mut |t| t.add_assign(&da));
                acc(*b, &mut |t| t.add_assign(&db));
            }
            Op::MatMulNt(a, b) => {
                let da = tensor::matmul(g, val(b));
                let db = tensor::matmul_tn(g, val(a));
                acc(*a, &mut |t| t.add_assign(&da));
                acc(*b, &mut |t| t.add_assign(&db));
            }
            Op::Add(a, b) => {
                acc(*a, &mut |t| t.add_assign(g));
                acc(*b, &mut |t| t.add_assign(g));
            }
            Op::Sub(a, b) => {
                acc(*a, &mut |t| t.add_assign(g));
                acc(*b, &mut |t| {
                    for (o, v) in t.data_mut().iter_mut().zip(g.data()) {
                        *o -= v;
                    }
                });
            }
            Op::Mul(a, b) => {
                let (x, z) = (val(a), val(b));
                acc(*a, &mut |t| {
                    for ((o, gv), zv) in t.data_mut().iter_mut().zip(g.data()).zip(z.data()) {
                        *o += gv * zv;
                    }
                });
                acc(*b, &mut |t| {
                    for ((o, gv), xv) in t.data_mut().iter_mut().zip(g.data()).zip(x.data()) {
                        *o += gv * xv;
                    }
                });
            }
            Op::Scale(a, f) => {
                let f = *f;
                acc(*a, &mut |t| {
                    for (o, gv) in t.data_mut().iter_mut().zip(g.data()) {
                        *o += gv * f;
                    }
                });
            }
            Op::Neg(a) => acc(*a, &mut |t| {
                for (o, gv) in t.data_mut().iter_mut().zip(g.data()) {
                    *o -= gv;
                }
            }),
            Op::MeanRows(a) => {
                let n = val(a).rows();
                let inv = 1.0 / n as f64;
                acc(*a, &mut |t| {
                    for r in 0..n {
                        for (o, gv) in t.row_mut(r).iter_mut().zip(g.data()) {
                            *o += gv * inv;
                        }
                    }
                });
            }
            Op::SumCols(a) => acc(*a, &mut |t| {
                for r in 0..t.rows() {
                    let gv = g.get(r, 0);
                    for o in t.row_mut(r) {
                        *o += gv;
                    }
                }
            }),
            Op::SumAll(a) => {
                let gv = g.item();
                acc(*a, &mut |t| {
                    for o in t.data_mut() {
                        *o += gv;
                    }
                });
            }
            Op::ConcatRows(parts) => {
                let mut row = 0;
                for &p in parts {
                    let n = val(&p).rows();
                    acc(p, &mut |t| {
                        for r in 0..n {
                            for (o, gv) in t.row_mut(r).iter_mut().zip(g.row(row + r)) {
                                *o += gv;
                            }
                        }
                    });
                    row += n;
                }
            }
            Op::ConcatCols(parts) => {
                let mut offset = 0;
                for &p in parts {
                    let w = val(&p).cols();
                    acc(p, &mut |t| {
                        for r in 0..t.rows() {
                            let src = &g.row(r)[offset..offset + w];
                            for (o, gv) in t.row_mut(r).iter_mut().zip(src) {
                                *o += gv;
                            }
                        }
                    });
                    offset += w;
                }
            }
            Op::Dot(a, b) => {
                let gv = g.item();
                let (x, z) = (val(a), val(b));
                acc(*a, &mut |t| {
                    for (o, zv) in t.data_mut().iter_mut().zip(z.data()) {
                        *o += gv * zv;
                    }
                });
                acc(*b, &mut |t| {
                    for (o, xv) in t.data_mut().iter_mut().zip(x.data()) {
                        *o += gv * xv;
                    }
                });
            }
            Op::Sigmoid(a) => acc(*a, &mut |t| {
                for ((o, gv), yv) in t.data_mut().iter_mut().zip(g.data()).zip(y.data()) {
                    *o += gv * yv * (1.0 - yv);
                }
            }),
            Op::Relu(a) => {
                let x = val(a);
                acc(*a, &mut |t| {
                    for ((o, gv), xv) in t.data_mut().iter_mut().zip(g.data()).zip(x.data()) {
                        if *xv > 0.0 {
                            *o += gv;
                        }
                    }
                });
            }
            Op::SoftmaxRows(a) => acc(*a, &mut |t| {
                for r in 0..y.rows() {
                    let (yr, gr) = (y.row(r), g.row(r));
                    let inner: f64 = yr.iter().zip(gr).map(|(p, q)| p * q).sum();
                    for ((o, yv), gv) in t.row_mut(r).iter_mut().zip(yr).zip(gr) {
                        *o += yv * (gv - inner);
                    }
                }
            }),
            Op::Log { input, floor } => {
                let x = val(input);
                let floor = *floor;
                acc(*input, &mut |t| {
                    for ((o, gv), xv) in t.data_mut().iter_mut().zip(g.data()).zip(x.data()) {
                        if *xv > floor {
                            *o += gv / xv;
                        }
                    }
                });
            }
            Op::LogSigmoid(a) => {
                let x = val(a);
                acc(*a, &mut |t| {
                    for ((o, gv), xv) in t.data_mut().iter_mut().zip(g.data()).zip(x.data()) {
                        *o += gv * tensor::sigmoid(-xv);
                    }
                });
            }
            Op::GatherRows(a, indices) => acc(*a, &mut |t| {
                for (r, &i) in indices.iter().enumerate() {
                    for (o, gv) in t.row_mut(i).iter_mut().zip(g.row(r)) {
                        *o += gv;
                    }
                }
            }),
            Op::PairDots(a, pairs) => {
                let x = val(a);
                acc(*a, &mut |t| {
                    for (k, &(i, j)) in pairs.iter().enumerate() {
                        let gv = g.get(k, 0);
                        for (o, v) in t.row_mut(i).iter_mut().zip(x.row(j)) {
                            *o += gv * v;
                        }
                        for (o, v) in t.row_mut(j).iter_mut().zip(x.row(i)) {
                            *o += gv * v;
                        }
                    }
                });
            }
            Op::PickCols(a, cols) => acc(*a, &mut |t| {
                for (r, &c) in cols.iter().enumerate() {
                    let cur = t.get(r, c);
                    t.set(r, c, cur + g.get(r, 0));
                }
            }),
            Op::Custom(inputs, custom) => {
                let values: Vec<&Tensor> = inputs.iter().map(val).collect();
                let local = custom.backward(&values, y, g);
                for (&v, d) in inputs.iter().zip(&local) {
                    acc(v, &mut |t| t.add_assign(d));
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(rows: usize, cols: usize, data: &[f64]) -> Tensor {
        Tensor::new(rows, cols, data.to_vec()).unwrap()
    }

    #[test]
    fn softmax_of_equal_logits_is_uniform() {
        let mut tape = Tape::new();
        let x = tape.constant(t(1, 2, &[0.0, 0.0]));
        let y = tape.softmax_rows(x).unwrap();
        assert_eq!(tape.value(y).data(), &[0.5, 0.5]);
    }

    #[test]
    fn sigmoid_at_zero() {
        let mut tape = Tape::new();
        let x = tape.constant(Tensor::scalar(0.0));
        let y = tape.sigmoid(x).unwrap();
        assert_eq!(tape.value(y).item(), 0.5);
    }

    #[test]
    fn matmul_hand_product() {
        let mut tape = Tape::new();
        let a = tape.constant(t(2, 2, &[1., 2., 3., 4.]));
        let b = tape.constant(t(2, 1, &[1., 1.]));
        let c = tape.matmul(a, b).unwrap();
        assert_eq!(tape.value(c).data(), &[3., 7.]);
        assert_eq!(tape.value(c).shape(), (2, 1));
    }

    #[test]
    fn dot_gradient_is_other_operand() {
        let mut store = ParamStore::new();
        let w = store.insert("w", t(1, 3, &[0.3, -1.0, 2.0])).unwrap();
        let mut tape = Tape::new();
        let wv = tape.param(&store, w);
        let x = tape.constant(t(1, 3, &[4.0, 5.0, -6.0]));
        let loss = tape.dot(wv, x).unwrap();
        let grads = tape.backward(loss).unwrap();
        assert_eq!(grads.param(w).unwrap().data(), &[4.0, 5.0, -6.0]);
    }

    #[test]
    fn sigmoid_gradient_at_zero_is_quarter() {
        let mut store = ParamStore::new();
        let w = store.insert("w", Tensor::scalar(0.0)).unwrap();
        let mut tape = Tape::new();
        let wv = tape.param(&store, w);
        let s = tape.sigmoid(wv).unwrap();
        let loss = tape.scale(s, 3.0).unwrap();
        let grads = tape.backward(loss).unwrap();
        assert!((grads.param(w).unwrap().item() - 0.75).abs() < 1e-15);
    }

    #[test]
    fn unreachable_params_get_zero_gradient() {
        let mut store = ParamStore::new();
        let used = store.insert("used", Tensor::scalar(2.0)).unwrap();
        store.insert("unused", Tensor::zeros(2, 2)).unwrap();
        let mut tape = Tape::new();
        let u = tape.param(&store, used);
        let loss = tape.mul(u, u).unwrap();
        let dense = tape.backward(loss).unwrap().dense(&store);
        assert_eq!(dense[0].item(), 4.0);
        assert_eq!(dense[1], Tensor::zeros(2, 2));
    }

    #[test]
    fn second_backward_is_rejected_until_reset() {
        let mut tape = Tape::new();
        let x = tape.constant(Tensor::scalar(1.0));
        let y = tape.sigmoid(x).unwrap();
        tape.backward(y).unwrap();
        assert!(matches!(tape.backward(y), Err(TensorError::BackwardTwice)));
        tape.reset();
        let x = tape.constant(Tensor::scalar(1.0));
        let y = tape.sigmoid(x).unwrap();
        assert!(tape.backward(y).is_ok());
    }

    #[test]
    fn non_scalar_loss_rejected() {
        let mut tape = Tape::new();
        let x = tape.constant(Tensor::zeros(1, 2));
        assert!(matches!(
            tape.backward(x),
            Err(TensorError::NotScalar { shape: (1, 2) })
        ));
    }

    #[test]
    fn shape_mismatch_and_non_finite_are_errors() {
        let mut tape = Tape::new();
        let a = tape.constant(Tensor::zeros(2, 3));
        let b = tape.constant(Tensor::zeros(2, 3));
        assert!(matches!(tape.matmul(a, b), Err(TensorError::Shape { .. })));
        let big = tape.constant(Tensor::scalar(1e300));
        assert!(matches!(
            tape.mul(big, big),
            Err(TensorError::NonFinite { op: "mul" })
        ));
    }

    #[test]
    fn log_floor_clamps_and_blocks_gradient() {
        let mut tape = Tape::new();
        let x = tape.constant(t(1, 2, &[0.0, 2.0]));
        let y = tape.log(x, 1e-12).unwrap();
        assert!((tape.value(y).data()[0] - 1e-12f64.ln()).abs() < 1e-12);
        let s = tape.sum(y).unwrap();
        let grads = tape.backward(s).unwrap();
        assert_eq!(grads.leaf(x).unwrap().data(), &[0.0, 0.5]);
    }

    #[test]
    fn repeated_gather_accumulates() {
        let mut store = ParamStore::new();
        let table = store.insert("table", t(3, 2, &[1., 2., 3., 4., 5., 6.])).unwrap();
        let mut tape = Tape::new();
        let tv = tape.param(&store, table);
        let rows = tape.gather_rows(tv, &[2, 0, 2]).unwrap();
        let loss = tape.sum(rows).unwrap();
        let grads = tape.backward(loss).unwrap();
        assert_eq!(grads.param(table).unwrap().data(), &[1., 1., 0., 0., 2., 2.]);
    }

    #[test]
    fn pair_dots_match_gathered_products() {
        let mut store = ParamStore::new();
        let table = store.insert("table", t(3, 2, &[1., -2., 0.5, 4., -3., 1.5])).unwrap();
        let pairs = [(0, 1), (2, 2), (1, 0), (2, 0)];
        let weights = t(4, 1, &[1.0, -0.5, 2.0, 0.25]);
        let run = |fused: bool| {
            let mut tape = Tape::new();
            let tv = tape.param(&store, table);
            let dots = if fused {
                tape.pair_dots(tv, &pairs).unwrap()
            } else {
                let a: Vec<usize> = pairs.iter().map(|p| p.0).collect();
                let b: Vec<usize> = pairs.iter().map(|p| p.1).collect();
                let za = tape.gather_rows(tv, &a).unwrap();
                let zb = tape.gather_rows(tv, &b).unwrap();
                let prod = tape.mul(za, zb).unwrap();
                tape.sum_cols(prod).unwrap()
            };
            let w = tape.constant(weights.clone());
            let weighted = tape.mul(dots, w).unwrap();
            let loss = tape.sum(weighted).unwrap();
            let value = tape.value(dots).clone();
            (value, tape.backward(loss).unwrap().param(table).unwrap().clone())
        };
        let (v1, g1) = run(true);
        let (v2, g2) = run(false);
        assert_eq!(v1.data(), v2.data());
        for (x, y) in g1.data().iter().zip(g2.data()) {
            assert!((x - y).abs() < 1e-12);
        }
        let mut tape = Tape::new();
        let tv = tape.param(&store, table);
        assert!(tape.pair_dots(tv, &[(0, 3)]).is_err());
    }
}
