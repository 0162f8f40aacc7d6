//! Model layers on the tape. Every function works on a block of `n` target
//! nodes at once: row `r` of each `n x d` input belongs to target `r`.

use super::config::{Activation, EncoderKind};
use super::ops::{self, Segments};
use crate::diffgrad::{Tape, Tensor, TensorError, Var};

pub fn activate(tape: &mut Tape, x: Var, act: Activation) -> Result<Var, TensorError> {
    match act {
        Activation::Sigmoid => tape.sigmoid(x),
        Activation::Relu => tape.relu(x),
    }
}

/// Mean of the id embedding rows and the projected attributes
/// `x W_A^T` (`W_A` is `d x f`); the id rows alone when there are no
/// attributes.
pub fn base_embedding(tape: &mut Tape, id_rows: Var, attributes: Option<(Var, Var)>) -> Result<Var, TensorError> {
    match attributes {
        None => Ok(id_rows),
        Some((x, w_a)) => {
            let att = tape.matmul_nt(x, w_a)?;
            let sum = tape.add(id_rows, att)?;
            tape.scale(sum, 0.5)
        }
    }
}

/// Encodes each target's neighbor set (rows of `table` listed by `sets`).
/// `h_u` is only read by the weighted encoder and `weight` (`d x d`) only by
/// the nonlinear one. Targets with an empty set get a zero row.
pub fn encode_neighbors(
    tape: &mut Tape,
    kind: EncoderKind,
    act: Activation,
    h_u: Var,
    table: Var,
    sets: &Segments,
    weight: Option<Var>,
) -> Result<Var, TensorError> {
    match kind {
        EncoderKind::Mean => {
            let w = tape.constant(sets.mean_weights());
            ops::segment_weighted_sum(tape, w, table, sets)
        }
        EncoderKind::Weighted => {
            let logits = ops::segment_dot(tape, h_u, table, sets)?;
            let w = ops::segment_softmax(tape, logits, sets)?;
            ops::segment_weighted_sum(tape, w, table, sets)
        }
        EncoderKind::Nonlinear => {
            let weight = weight.expect("nonlinear encoder needs its weight");
            let w = tape.constant(sets.mean_weights());
            let mean = ops::segment_weighted_sum(tape, w, table, sets)?;
            let lin = tape.matmul_nt(mean, weight)?;
            let out = activate(tape, lin, act)?;
            if (0..sets.rows()).all(|r| !sets.is_empty_row(r)) {
                return Ok(out);
            }
            let present: Vec<f64> = (0..sets.rows())
                .map(|r| if sets.is_empty_row(r) { 0.0 } else { 1.0 })
                .collect();
            let present = tape.constant(Tensor::new(sets.rows(), 1, present)?);
            ops::scale_rows(tape, present, out)
        }
    }
}

/// `alpha = softmax(h_u . h_bfs, h_u . h_dfs)` per row and the weighted sum.
/// An empty side is left out of the softmax; rows with both sides empty
/// come out as zeros. Returns `(n x d, alpha as n x 2)`.
pub fn fuse_bfs_dfs(
    tape: &mut Tape,
    h_u: Var,
    h_bfs: Var,
    h_dfs: Var,
    bfs_present: &[bool],
    dfs_present: &[bool],
) -> Result<(Var, Var), TensorError> {
    let e_bfs = ops::row_dots(tape, h_u, h_bfs)?;
    let e_dfs = ops::row_dots(tape, h_u, h_dfs)?;
    let logits = tape.concat_cols(&[e_bfs, e_dfs])?;
    let mask = bfs_present.iter().zip(dfs_present).flat_map(|(&b, &d)| [b, d]).collect();
    let alpha = ops::masked_softmax(tape, logits, mask)?;
    let a0 = ops::column(tape, alpha, 0)?;
    let a1 = ops::column(tape, alpha, 1)?;
    let left = ops::scale_rows(tape, a0, h_bfs)?;
    let right = ops::scale_rows(tape, a1, h_dfs)?;
    Ok((tape.add(left, right)?, alpha))
}

/// Attention over metapaths with query `q` (`1 x d`). `active[r][p]` says
/// whether metapath `p` produced anything for row `r`; inactive ones get
/// zero weight. Returns `(n x d, beta as n x M)`.
pub fn aggregate_metapaths(tape: &mut Tape, hs: &[Var], q: Var, active: &[Vec<bool>]) -> Result<(Var, Var), TensorError> {
    let mut logits = Vec::with_capacity(hs.len());
    for &h in hs {
        logits.push(tape.matmul_nt(h, q)?);
    }
    let logits = tape.concat_cols(&logits)?;
    let beta = ops::masked_softmax(tape, logits, active.concat())?;
    let mut out = None;
    for (p, &h) in hs.iter().enumerate() {
        let b = ops::column(tape, beta, p)?;
        let term = ops::scale_rows(tape, b, h)?;
        out = Some(match out {
            None => term,
            Some(acc) => tape.add(acc, term)?,
        });
    }
    Ok((out.ok_or(TensorError::Empty { op: "aggregate_metapaths" })?, beta))
}

/// Projections of one attention head, each `d x (d/K)`.
#[derive(Clone, Copy, Debug)]
pub struct HeadParams {
    pub query: Var,
    pub key: Var,
    pub value: Var,
}

/// Self-attention across each target's metapath vectors. Per head,
/// `softmax(Q K^T / sqrt(d/K)) V` over the active metapaths; heads are
/// concatenated and the active rows averaged into one vector.
pub fn multihead_self_attention(
    tape: &mut Tape,
    hs: &[Var],
    heads: &[HeadParams],
    active: &[Vec<bool>],
) -> Result<Var, TensorError> {
    let m = hs.len();
    if m == 0 || heads.is_empty() {
        return Err(TensorError::Empty { op: "multihead_self_attention" });
    }
    let n = active.len();
    let mut per_row: Vec<Vec<Var>> = vec![Vec::with_capacity(heads.len()); m];
    for head in heads {
        let mut q = Vec::with_capacity(m);
        let mut k = Vec::with_capacity(m);
        let mut v = Vec::with_capacity(m);
        for &h in hs {
            q.push(tape.matmul(h, head.query)?);
            k.push(tape.matmul(h, head.key)?);
            v.push(tape.matmul(h, head.value)?);
        }
        let dk = tape.value(q[0]).cols();
        let scale = 1.0 / (dk as f64).sqrt();
        for p in 0..m {
            let mut scores = Vec::with_capacity(m);
            for kp in &k {
                let s = ops::row_dots(tape, q[p], *kp)?;
                scores.push(tape.scale(s, scale)?);
            }
            let scores = tape.concat_cols(&scores)?;
            let attn = ops::masked_softmax(tape, scores, active.concat())?;
            let mut out = None;
            for (j, &vj) in v.iter().enumerate() {
                let a = ops::column(tape, attn, j)?;
                let term = ops::scale_rows(tape, a, vj)?;
                out = Some(match out {
                    None => term,
                    Some(acc) => tape.add(acc, term)?,
                });
            }
            per_row[p].push(out.expect("at least one key"));
        }
    }
    let mut result = None;
    for (p, parts) in per_row.into_iter().enumerate() {
        let row = tape.concat_cols(&parts)?;
        let weights: Vec<f64> = active
            .iter()
            .map(|a| {
                let count = a.iter().filter(|&&x| x).count();
                if a[p] {
                    1.0 / count as f64
                } else {
                    0.0
                }
            })
            .collect();
        let w = tape.constant(Tensor::new(n, 1, weights)?);
        let term = ops::scale_rows(tape, w, row)?;
        result = Some(match result {
            None => term,
            Some(acc) => tape.add(acc, term)?,
        });
    }
    Ok(result.expect("at least one metapath"))
}

/// `z = act(W_out h)` for each row.
pub fn output_layer(tape: &mut Tape, h: Var, w_out: Var, act: Activation) -> Result<Var, TensorError> {
    let lin = tape.matmul_nt(h, w_out)?;
    activate(tape, lin, act)
}
