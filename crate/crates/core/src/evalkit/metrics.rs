use super::EvalError;
use crate::diffgrad::sigmoid;

/// `σ(z_u · z_v)`.
pub fn link_probability(z_u: &[f64], z_v: &[f64]) -> Result<f64, EvalError> {
    if z_u.len() != z_v.len() {
        return Err(EvalError::Input(format!(
            "embedding dims differ: {} vs {}",
            z_u.len(),
            z_v.len()
        )));
    }
    Ok(sigmoid(z_u.iter().zip(z_v).map(|(a, b)| a * b).sum()))
}

/// Scores with binary labels, checked on construction.
#[derive(Clone, Debug, PartialEq)]
pub struct RankedPredictions {
    scores: Vec<f64>,
    labels: Vec<bool>,
}

impl RankedPredictions {
    pub fn new(scores: Vec<f64>, labels: Vec<bool>) -> Result<Self, EvalError> {
        if scores.len() != labels.len() {
            return Err(EvalError::Input(format!(
                "{} scores but {} labels",
                scores.len(),
                labels.len()
            )));
        }
        if scores.is_empty() {
            return Err(EvalError::Empty("predictions"));
        }
        if scores.iter().any(|s| s.is_nan()) {
            return Err(EvalError::Input("NaN score".into()));
        }
        Ok(Self { scores, labels })
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    pub fn labels(&self) -> &[bool] {
        &self.labels
    }

    fn counts(&self) -> (usize, usize) {
        let p = self.labels.iter().filter(|&&l| l).count();
        (p, self.labels.len() - p)
    }

    fn require_both(&self) -> Result<(usize, usize), EvalError> {
        let (p, n) = self.counts();
        if p == 0 || n == 0 {
            return Err(EvalError::SingleClass);
        }
        Ok((p, n))
    }

    /// Cumulative (TP, FP) after each distinct score, highest first.
    fn operating_points(&self) -> Vec<(usize, usize)> {
        let mut order: Vec<usize> = (0..self.scores.len()).collect();
        order.sort_by(|&a, &b| self.scores[b].total_cmp(&self.scores[a]));
        let mut points = Vec::new();
        let (mut tp, mut fp) = (0, 0);
        for (i, &k) in order.iter().enumerate() {
            if self.labels[k] {
                tp += 1;
            } else {
                fp += 1;
            }
            let last_of_tie = order
                .get(i + 1)
                .map_or(true, |&next| self.scores[next] != self.scores[k]);
            if last_of_tie {
                points.push((tp, fp));
            }
        }
        points
    }
}

/// Probability that a random positive outscores a random negative, ties
/// counting one half.
pub fn roc_auc(p: &RankedPredictions) -> Result<f64, EvalError> {
    let (np, nn) = p.require_both()?;
    let mut order: Vec<usize> = (0..p.scores.len()).collect();
    order.sort_by(|&a, &b| p.scores[a].total_cmp(&p.scores[b]));
    // Twice the Mann-Whitney U, kept integral.
    let mut twice_u: u64 = 0;
    let mut negatives_below: u64 = 0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j < order.len() && p.scores[order[j]] == p.scores[order[i]] {
            j += 1;
        }
        let pos = order[i..j].iter().filter(|&&k| p.labels[k]).count() as u64;
        let neg = (j - i) as u64 - pos;
        twice_u += pos * (2 * negatives_below + neg);
        negatives_below += neg;
        i = j;
    }
    Ok(twice_u as f64 / (2 * np * nn) as f64)
}

/// Trapezoidal area under the precision-recall curve, which starts at
/// recall 0 with the precision of the highest threshold.
pub fn pr_auc(p: &RankedPredictions) -> Result<f64, EvalError> {
    let (np, _) = p.require_both()?;
    let points = p.operating_points();
    let prec = |(tp, fp): (usize, usize)| tp as f64 / (tp + fp) as f64;
    let mut area = 0.0;
    let mut prev = (0.0, prec(points[0]));
    for &pt in &points {
        let cur = (pt.0 as f64 / np as f64, prec(pt));
        area += (cur.0 - prev.0) * (cur.1 + prev.1) / 2.0;
        prev = cur;
    }
    Ok(area)
}

/// `Σ (R_k − R_{k−1}) · P_k` over distinct thresholds.
pub fn average_precision(p: &RankedPredictions) -> Result<f64, EvalError> {
    let (np, _) = p.require_both()?;
    let mut ap = 0.0;
    let mut prev_tp = 0;
    for (tp, fp) in p.operating_points() {
        ap += (tp - prev_tp) as f64 / np as f64 * (tp as f64 / (tp + fp) as f64);
        prev_tp = tp;
    }
    Ok(ap)
}

/// F1 of the rule `score >= threshold`; 0 when nothing is a true positive.
pub fn f1_at_threshold(p: &RankedPredictions, threshold: f64) -> f64 {
    let (mut tp, mut fp, mut fnn) = (0usize, 0usize, 0usize);
    for (&s, &l) in p.scores.iter().zip(&p.labels) {
        match (s >= threshold, l) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fnn += 1,
            (false, false) => {}
        }
    }
    f1_from_counts(tp, fp, fnn)
}

fn f1_from_counts(tp: usize, fp: usize, fnn: usize) -> f64 {
    if tp == 0 {
        0.0
    } else {
        2.0 * tp as f64 / (2 * tp + fp + fnn) as f64
    }
}

/// `(micro, macro)` F1 for single-label predictions over `classes` classes.
pub fn micro_macro_f1(predicted: &[usize], truth: &[usize], classes: usize) -> Result<(f64, f64), EvalError> {
    if predicted.len() != truth.len() {
        return Err(EvalError::Input(format!(
            "{} predictions but {} labels",
            predicted.len(),
            truth.len()
        )));
    }
    if predicted.is_empty() || classes == 0 {
        return Err(EvalError::Empty("label predictions"));
    }
    if let Some(&c) = predicted.iter().chain(truth).find(|&&c| c >= classes) {
        return Err(EvalError::Input(format!("class {c} out of range for {classes} classes")));
    }
    let mut tp = vec![0usize; classes];
    let mut fp = vec![0usize; classes];
    let mut fnn = vec![0usize; classes];
    for (&p, &t) in predicted.iter().zip(truth) {
        if p == t {
            tp[p] += 1;
        } else {
            fp[p] += 1;
            fnn[t] += 1;
        }
    }
    let sum = |v: &[usize]| v.iter().sum::<usize>();
    let micro = f1_from_counts(sum(&tp), sum(&fp), sum(&fnn));
    let macro_ = (0..classes).map(|c| f1_from_counts(tp[c], fp[c], fnn[c])).sum::<f64>() / classes as f64;
    Ok((micro, macro_))
}
