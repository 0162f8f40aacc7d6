use rand::seq::SliceRandom;
use serde::Serialize;

use super::{micro_macro_f1, EvalError};
use crate::diffgrad::{softmax_in_place, Tensor};
use crate::hetgraph::{LabelTable, NodeId};
use crate::rng::{stream, DOMAIN_EVAL};

/// Labeled nodes divided into probe-train and probe-test parts.
#[derive(Clone, Debug, PartialEq)]
pub struct ProbeSplit {
    pub train: Vec<(NodeId, usize)>,
    pub test: Vec<(NodeId, usize)>,
    pub train_fraction: f64,
}

/// Stratified split: each class contributes `round(fraction · n_c)` training
/// nodes, kept within `1..n_c` when the class has two or more nodes.
pub fn probe_split(labels: &LabelTable, train_fraction: f64, seed: u64) -> Result<ProbeSplit, EvalError> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(EvalError::Input(format!(
            "training proportion {train_fraction} is outside (0, 1)"
        )));
    }
    let mut by_class: Vec<Vec<(NodeId, usize)>> = vec![Vec::new(); labels.num_classes()];
    for &(n, c) in labels.entries() {
        by_class[c].push((n, c));
    }
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for (c, mut members) in by_class.into_iter().enumerate() {
        members.sort_unstable();
        members.shuffle(&mut stream(seed, &[DOMAIN_EVAL, 1, c as u64]));
        let n = members.len();
        let mut k = (train_fraction * n as f64).round() as usize;
        if n >= 2 {
            k = k.clamp(1, n - 1);
        }
        train.extend_from_slice(&members[..k]);
        test.extend_from_slice(&members[k..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok(ProbeSplit {
        train,
        test,
        train_fraction,
    })
}

#[derive(Clone, Copy, Debug)]
pub struct ProbeConfig {
    pub lr: f64,
    pub tol: f64,
    pub max_iters: usize,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        Self {
            lr: 0.5,
            tol: 1e-6,
            max_iters: 1000,
        }
    }
}

/// Multinomial logistic regression on standardized features, fitted by
/// full-batch gradient descent.
#[derive(Clone, Debug)]
pub struct LogisticProbe {
    mean: Vec<f64>,
    scale: Vec<f64>,
    /// `classes × (dim + 1)`, bias last.
    weights: Tensor,
    pub iterations: usize,
}

impl LogisticProbe {
    pub fn fit(x: &[&[f64]], y: &[usize], classes: usize, cfg: ProbeConfig) -> Result<Self, EvalError> {
        if x.is_empty() || x.len() != y.len() {
            return Err(EvalError::Empty("probe training set"));
        }
        let d = x[0].len();
        if x.iter().any(|r| r.len() != d) {
            return Err(EvalError::Input("ragged feature rows".into()));
        }
        if y.iter().any(|&c| c >= classes) {
            return Err(EvalError::Input("class out of range".into()));
        }
        if y.iter().all(|&c| c == y[0]) {
            return Err(EvalError::SingleClass);
        }
        let n = x.len() as f64;
        let mut mean = vec![0.0; d];
        for r in x {
            for (m, v) in mean.iter_mut().zip(*r) {
                *m += v / n;
            }
        }
        let mut scale = vec![0.0; d];
        for r in x {
            for j in 0..d {
                scale[j] += (r[j] - mean[j]).powi(2) / n;
            }
        }
        for s in &mut scale {
            *s = if *s > 1e-24 { s.sqrt() } else { 1.0 };
        }
        let mut probe = Self {
            mean,
            scale,
            weights: Tensor::zeros(classes, d + 1),
            iterations: 0,
        };
        let feats: Vec<Vec<f64>> = x.iter().map(|r| probe.standardize(r)).collect();
        let mut grad = Tensor::zeros(classes, d + 1);
        for it in 0..cfg.max_iters {
            grad.data_mut().fill(0.0);
            for (f, &c) in feats.iter().zip(y) {
                let p = probe.probabilities_std(f);
                for k in 0..classes {
                    let err = (p[k] - f64::from(u8::from(k == c))) / n;
                    let row = grad.row_mut(k);
                    for j in 0..=d {
                        row[j] += err * f[j];
                    }
                }
            }
            probe.iterations = it + 1;
            if grad.max_abs() < cfg.tol {
                break;
            }
            for (w, g) in probe.weights.data_mut().iter_mut().zip(grad.data()) {
                *w -= cfg.lr * g;
            }
        }
        Ok(probe)
    }

    /// Standardized features with a trailing 1 for the bias.
    fn standardize(&self, r: &[f64]) -> Vec<f64> {
        let mut f: Vec<f64> = r
            .iter()
            .zip(&self.mean)
            .zip(&self.scale)
            .map(|((v, m), s)| (v - m) / s)
            .collect();
        f.push(1.0);
        f
    }

    fn probabilities_std(&self, f: &[f64]) -> Vec<f64> {
        let mut logits: Vec<f64> = (0..self.weights.rows())
            .map(|k| self.weights.row(k).iter().zip(f).map(|(w, v)| w * v).sum())
            .collect();
        softmax_in_place(&mut logits);
        logits
    }

    /// Most probable class; ties go to the lower index.
    pub fn predict(&self, r: &[f64]) -> usize {
        let p = self.probabilities_std(&self.standardize(r));
        let mut best = 0;
        for (k, &v) in p.iter().enumerate() {
            if v > p[best] {
                best = k;
            }
        }
        best
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ProbeReport {
    pub train_fraction: f64,
    pub micro_f1: f64,
    pub macro_f1: f64,
}

/// Fits the probe on the split's training nodes and scores the test nodes.
pub fn logistic_probe(embeddings: &Tensor, split: &ProbeSplit, classes: usize) -> Result<(f64, f64), EvalError> {
    if split.test.is_empty() {
        return Err(EvalError::Empty("probe test set"));
    }
    let row = |n: NodeId| -> Result<&[f64], EvalError> {
        if n.0 < embeddings.rows() {
            Ok(embeddings.row(n.0))
        } else {
            Err(EvalError::Input(format!("node #{} has no embedding", n.0)))
        }
    };
    let x: Vec<&[f64]> = split.train.iter().map(|&(n, _)| row(n)).collect::<Result<_, _>>()?;
    let y: Vec<usize> = split.train.iter().map(|e| e.1).collect();
    let probe = LogisticProbe::fit(&x, &y, classes, ProbeConfig::default())?;
    let mut predicted = Vec::with_capacity(split.test.len());
    for &(n, _) in &split.test {
        predicted.push(probe.predict(row(n)?));
    }
    let truth: Vec<usize> = split.test.iter().map(|e| e.1).collect();
    micro_macro_f1(&predicted, &truth, classes)
}

/// Runs the probe once per training proportion.
pub fn eval_nodeclass(
    embeddings: &Tensor,
    labels: &LabelTable,
    fractions: &[f64],
    seed: u64,
) -> Result<Vec<ProbeReport>, EvalError> {
    fractions
        .iter()
        .map(|&f| {
            let split = probe_split(labels, f, seed)?;
            let (micro_f1, macro_f1) = logistic_probe(embeddings, &split, labels.num_classes())?;
            Ok(ProbeReport {
                train_fraction: f,
                micro_f1,
                macro_f1,
            })
        })
        .collect()
}
