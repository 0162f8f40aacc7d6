//! Segment (ragged) operations used by the neighbor encoders, and a masked
//! row softmax. A segment list is CSR-shaped: row `r` owns the entries
//! `offsets[r]..offsets[r + 1]` of `indices`.

use crate::diffgrad::{CustomOp, Tape, Tensor, TensorError, Var};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Segments {
    offsets: Vec<usize>,
    indices: Vec<usize>,
}

impl Segments {
    pub fn from_sets<I, S>(sets: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: IntoIterator<Item = usize>,
    {
        let mut offsets = vec![0];
        let mut indices = Vec::new();
        for s in sets {
            indices.extend(s);
            offsets.push(indices.len());
        }
        Self { offsets, indices }
    }

    pub fn rows(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    pub fn segment(&self, r: usize) -> &[usize] {
        &self.indices[self.offsets[r]..self.offsets[r + 1]]
    }

    fn range(&self, r: usize) -> std::ops::Range<usize> {
        self.offsets[r]..self.offsets[r + 1]
    }

    pub fn is_empty_row(&self, r: usize) -> bool {
        self.offsets[r] == self.offsets[r + 1]
    }

    /// `1 / |segment|` for every entry.
    pub fn mean_weights(&self) -> Tensor {
        let mut w = Vec::with_capacity(self.nnz());
        for r in 0..self.rows() {
            let n = self.range(r).len();
            w.extend(std::iter::repeat(1.0 / n as f64).take(n));
        }
        Tensor::row_vector(w)
    }

    fn check_table(&self, op: &'static str, table: &Tensor) -> Result<(), TensorError> {
        match self.indices.iter().find(|&&i| i >= table.rows()) {
            Some(&index) => Err(TensorError::Index {
                op,
                index,
                bound: table.rows(),
            }),
            None => Ok(()),
        }
    }
}

/// `out[r] = sum_k w[k] * table[idx[k]]` over the entries of segment `r`;
/// empty segments give zero rows.
struct SegmentWeightedSum(Segments);

impl CustomOp for SegmentWeightedSum {
    fn name(&self) -> &'static str {
        "segment_weighted_sum"
    }

    fn forward(&self, inputs: &[&Tensor]) -> Result<Tensor, TensorError> {
        let (w, table) = (inputs[0], inputs[1]);
        let s = &self.0;
        if w.shape() != (1, s.nnz()) {
            return Err(TensorError::Shape {
                op: self.name(),
                left: w.shape(),
                right: (1, s.nnz()),
            });
        }
        s.check_table(self.name(), table)?;
        let d = table.cols();
        let mut out = Tensor::zeros(s.rows(), d);
        for r in 0..s.rows() {
            let row = out.row_mut(r);
            for k in s.range(r) {
                let wk = w.data()[k];
                for (o, t) in row.iter_mut().zip(table.row(s.indices[k])) {
                    *o += wk * t;
                }
            }
        }
        Ok(out)
    }

    fn backward(&self, inputs: &[&Tensor], _output: &Tensor, grad: &Tensor) -> Vec<Tensor> {
        let (w, table) = (inputs[0], inputs[1]);
        let s = &self.0;
        let mut gw = Tensor::zeros(1, s.nnz());
        let mut gt = Tensor::zeros(table.rows(), table.cols());
        for r in 0..s.rows() {
            let g = grad.row(r);
            for k in s.range(r) {
                let idx = s.indices[k];
                gw.data_mut()[k] = g.iter().zip(table.row(idx)).map(|(a, b)| a * b).sum();
                let wk = w.data()[k];
                for (o, gv) in gt.row_mut(idx).iter_mut().zip(g) {
                    *o += wk * gv;
                }
            }
        }
        vec![gw, gt]
    }
}

/// `out[k] = h[r] . table[idx[k]]` for every entry `k` of segment `r`.
struct SegmentDot(Segments);

impl CustomOp for SegmentDot {
    fn name(&self) -> &'static str {
        "segment_dot"
    }

    fn forward(&self, inputs: &[&Tensor]) -> Result<Tensor, TensorError> {
        let (h, table) = (inputs[0], inputs[1]);
        let s = &self.0;
        if h.rows() != s.rows() || h.cols() != table.cols() {
            return Err(TensorError::Shape {
                op: self.name(),
                left: h.shape(),
                right: table.shape(),
            });
        }
        s.check_table(self.name(), table)?;
        let mut out = Vec::with_capacity(s.nnz());
        for r in 0..s.rows() {
            for k in s.range(r) {
                out.push(h.row(r).iter().zip(table.row(s.indices[k])).map(|(a, b)| a * b).sum());
            }
        }
        Ok(Tensor::row_vector(out))
    }

    fn backward(&self, inputs: &[&Tensor], _output: &Tensor, grad: &Tensor) -> Vec<Tensor> {
        let (h, table) = (inputs[0], inputs[1]);
        let s = &self.0;
        let mut gh = Tensor::zeros(h.rows(), h.cols());
        let mut gt = Tensor::zeros(table.rows(), table.cols());
        for r in 0..s.rows() {
            for k in s.range(r) {
                let g = grad.data()[k];
                let idx = s.indices[k];
                for (o, t) in gh.row_mut(r).iter_mut().zip(table.row(idx)) {
                    *o += g * t;
                }
                for (o, hv) in gt.row_mut(idx).iter_mut().zip(h.row(r)) {
                    *o += g * hv;
                }
            }
        }
        vec![gh, gt]
    }
}

/// Softmax within each segment of a `1 x nnz` row.
struct SegmentSoftmax(Segments);

impl CustomOp for SegmentSoftmax {
    fn name(&self) -> &'static str {
        "segment_softmax"
    }

    fn forward(&self, inputs: &[&Tensor]) -> Result<Tensor, TensorError> {
        let x = inputs[0];
        let s = &self.0;
        if x.shape() != (1, s.nnz()) {
            return Err(TensorError::Shape {
                op: self.name(),
                left: x.shape(),
                right: (1, s.nnz()),
            });
        }
        let mut out = x.data().to_vec();
        for r in 0..s.rows() {
            crate::diffgrad::softmax_in_place(&mut out[s.range(r)]);
        }
        Ok(Tensor::row_vector(out))
    }

    fn backward(&self, _inputs: &[&Tensor], output: &Tensor, grad: &Tensor) -> Vec<Tensor> {
        let s = &self.0;
        let (y, g) = (output.data(), grad.data());
        let mut gx = vec![0.0; s.nnz()];
        for r in 0..s.rows() {
            let range = s.range(r);
            let inner: f64 = range.clone().map(|k| y[k] * g[k]).sum();
            for k in range {
                gx[k] = y[k] * (g[k] - inner);
            }
        }
        vec![Tensor::row_vector(gx)]
    }
}

/// Row softmax restricted to entries where `mask` is set; masked entries and
/// fully masked rows come out as zero.
struct MaskedSoftmax(Vec<bool>);

impl CustomOp for MaskedSoftmax {
    fn name(&self) -> &'static str {
        "masked_softmax"
    }

    fn forward(&self, inputs: &[&Tensor]) -> Result<Tensor, TensorError> {
        let x = inputs[0];
        if x.len() != self.0.len() {
            return Err(TensorError::DataLength {
                rows: x.rows(),
                cols: x.cols(),
                len: self.0.len(),
            });
        }
        let mut out = Tensor::zeros(x.rows(), x.cols());
        for r in 0..x.rows() {
            let mask = &self.0[r * x.cols()..(r + 1) * x.cols()];
            let mut vals: Vec<f64> = x.row(r).iter().zip(mask).filter(|(_, &m)| m).map(|(&v, _)| v).collect();
            crate::diffgrad::softmax_in_place(&mut vals);
            let mut it = vals.into_iter();
            for (o, &m) in out.row_mut(r).iter_mut().zip(mask) {
                if m {
                    *o = it.next().expect("one value per mask bit");
                }
            }
        }
        Ok(out)
    }

    fn backward(&self, _inputs: &[&Tensor], output: &Tensor, grad: &Tensor) -> Vec<Tensor> {
        let mut gx = Tensor::zeros(output.rows(), output.cols());
        for r in 0..output.rows() {
            let (y, g) = (output.row(r), grad.row(r));
            let inner: f64 = y.iter().zip(g).map(|(a, b)| a * b).sum();
            for (j, o) in gx.row_mut(r).iter_mut().enumerate() {
                *o = y[j] * (g[j] - inner);
            }
        }
        vec![gx]
    }
}

pub fn segment_weighted_sum(tape: &mut Tape, weights: Var, table: Var, segs: &Segments) -> Result<Var, TensorError> {
    tape.custom(&[weights, table], Box::new(SegmentWeightedSum(segs.clone())))
}

pub fn segment_dot(tape: &mut Tape, h: Var, table: Var, segs: &Segments) -> Result<Var, TensorError> {
    tape.custom(&[h, table], Box::new(SegmentDot(segs.clone())))
}

pub fn segment_softmax(tape: &mut Tape, x: Var, segs: &Segments) -> Result<Var, TensorError> {
    tape.custom(&[x], Box::new(SegmentSoftmax(segs.clone())))
}

pub fn masked_softmax(tape: &mut Tape, x: Var, mask: Vec<bool>) -> Result<Var, TensorError> {
    tape.custom(&[x], Box::new(MaskedSoftmax(mask)))
}

/// Multiplies row `r` of `m` by `weights[r]` (an `n x 1` column).
pub fn scale_rows(tape: &mut Tape, weights: Var, m: Var) -> Result<Var, TensorError> {
    let d = tape.value(m).cols();
    let ones = tape.constant(Tensor::filled(1, d, 1.0));
    let spread = tape.matmul(weights, ones)?;
    tape.mul(spread, m)
}

/// Column `j` of `m` as an `n x 1` column.
pub fn column(tape: &mut Tape, m: Var, j: usize) -> Result<Var, TensorError> {
    let n = tape.value(m).rows();
    tape.pick_cols(m, &vec![j; n])
}

/// Row-wise dot products of two `n x d` matrices, as `n x 1`.
pub fn row_dots(tape: &mut Tape, a: Var, b: Var) -> Result<Var, TensorError> {
    let p = tape.mul(a, b)?;
    tape.sum_cols(p)
}
