use crate::diffgrad::{Tape, TensorError, Var};

/// Floor applied to the true-class probability before the log.
pub const PROB_FLOOR: f64 = 1e-12;

/// Mean negative log-likelihood of `labels` under row distributions `probs`
/// (`n x C`).
pub fn cross_entropy_loss(tape: &mut Tape, probs: Var, labels: &[usize]) -> Result<Var, TensorError> {
    if labels.is_empty() {
        return Err(TensorError::Empty { op: "cross_entropy_loss" });
    }
    let picked = tape.pick_cols(probs, labels)?;
    let logs = tape.log(picked, PROB_FLOOR)?;
    let total = tape.sum(logs)?;
    tape.scale(total, -1.0 / labels.len() as f64)
}

/// Negative-sampling loss over rows of `z`:
/// `-sum_S log sigma(z_u . z_v) - sum_S- log sigma(-z_u' . z_v')`.
pub fn nce_loss(
    tape: &mut Tape,
    z: Var,
    positives: &[(usize, usize)],
    negatives: &[(usize, usize)],
) -> Result<Var, TensorError> {
    let mut terms = Vec::with_capacity(2);
    for (pairs, sign) in [(positives, 1.0), (negatives, -1.0)] {
        if pairs.is_empty() {
            continue;
        }
        let dots = tape.pair_dots(z, pairs)?;
        let signed = tape.scale(dots, sign)?;
        let ls = tape.log_sigmoid(signed)?;
        terms.push(tape.sum(ls)?);
    }
    let total = match terms.as_slice() {
        [] => return Err(TensorError::Empty { op: "nce_loss" }),
        [one] => *one,
        [a, b] => tape.add(*a, *b)?,
        _ => unreachable!(),
    };
    tape.neg(total)
}
