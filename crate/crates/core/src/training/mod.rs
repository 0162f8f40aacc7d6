//! Losses, positive/negative pair construction, early stopping and the
//! epoch loop.

mod losses;
mod pairs;

use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use losses::{cross_entropy_loss, nce_loss, PROB_FLOOR};
pub use pairs::{
    build_pairs, edge_positives, metapath_walks, positive_pairs, split_pairs, window_pairs, with_negatives,
    NegativeSampler, PairSet,
};

use crate::diffgrad::{AdamConfig, AdamState, ParamStore, Tape, Tensor, TensorError, Var};
use crate::hetgraph::{GraphError, HeteroGraph, LabelTable, NodeId};
use crate::mhn::{MhnModel, ModelError, SamplingPlan, INFERENCE_EPOCH};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TrainMode {
    /// Cross-entropy on node labels through a softmax head.
    Supervised,
    /// Negative-sampling loss on node pairs.
    #[default]
    Unsupervised,
}

/// Where unsupervised positive pairs come from.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PairSource {
    /// Graph edges.
    #[default]
    Edges,
    /// Co-occurrence within `window` on metapath-guided walks.
    Walks,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub mode: TrainMode,
    pub lr: f64,
    pub epochs: usize,
    pub patience: usize,
    /// Negatives per positive pair.
    pub negatives: usize,
    pub walk_len: usize,
    pub walks_per_node: usize,
    pub window: usize,
    /// Pairs per gradient chunk; 0 keeps the whole pair set in one chunk.
    /// Chunk gradients are summed, so this never changes the update.
    pub batch_size: usize,
    pub seed: u64,
    /// Share of labels or positive pairs held out for early stopping.
    pub val_fraction: f64,
    pub pair_source: PairSource,
    /// Edge types used as positives in edge mode; empty means all.
    pub positive_edge_types: Vec<String>,
    pub max_negative_retries: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            mode: TrainMode::Unsupervised,
            lr: 0.01,
            epochs: 100,
            patience: 5,
            negatives: 5,
            walk_len: 10,
            walks_per_node: 20,
            window: 5,
            batch_size: 0,
            seed: 0,
            val_fraction: 0.1,
            pair_source: PairSource::Edges,
            positive_edge_types: Vec::new(),
            max_negative_retries: 50,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |m: &str| Err(TrainError::Config(m.to_string()));
        if !(self.lr.is_finite() && self.lr >= 0.0) {
            return bad("learning rate must be finite and non-negative");
        }
        if self.patience == 0 || self.negatives == 0 || self.walks_per_node == 0 || self.window == 0 {
            return bad("patience, negatives, walks per node and window must be positive");
        }
        if self.walk_len < 2 {
            return bad("walk length must be at least 2");
        }
        if !(0.0..1.0).contains(&self.val_fraction) {
            return bad("validation fraction must be in [0, 1)");
        }
        if self.max_negative_retries == 0 {
            return bad("negative sampling needs at least one attempt");
        }
        Ok(())
    }
}

#[derive(Debug, thiserror::Error)]
pub enum TrainError {
    #[error("invalid training setup: {0}")]
    Config(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("loss diverged at epoch {epoch}")]
    Diverged {
        epoch: usize,
        /// Parameters after the last epoch that stayed finite.
        last_finite: Box<MhnModel>,
        history: Vec<EpochRecord>,
    },
    #[error(transparent)]
    Graph(#[from] GraphError),
}

impl From<TensorError> for TrainError {
    fn from(e: TensorError) -> Self {
        TrainError::Model(ModelError::Tensor(e))
    }
}

/// Training signal for one loss evaluation.
#[derive(Clone, Copy, Debug)]
pub enum Objective<'a> {
    Labels(&'a LabelTable),
    Pairs {
        positives: &'a [(NodeId, NodeId)],
        negatives: &'a [(NodeId, NodeId)],
    },
}

/// Records the loss for `objective` on `tape`. Nodes that no metapath
/// reaches under `plan` are left out; `None` means nothing was left.
pub fn record_loss(
    tape: &mut Tape,
    model: &MhnModel,
    store: &ParamStore,
    graph: &HeteroGraph,
    plan: &SamplingPlan,
    objective: Objective<'_>,
) -> Result<Option<Var>, TrainError> {
    let out = model.forward_tape(tape, store, graph, plan)?;
    let ok = |n: NodeId| out.reachable[n.0];
    match objective {
        Objective::Labels(labels) => {
            let head = model
                .classifier_param()
                .ok_or_else(|| TrainError::Config("supervised training needs a classification head".into()))?;
            let (rows, classes): (Vec<usize>, Vec<usize>) = labels
                .entries()
                .iter()
                .filter(|(n, _)| ok(*n))
                .map(|&(n, c)| (n.0, c))
                .unzip();
            if rows.is_empty() {
                return Ok(None);
            }
            let z = tape.gather_rows(out.z, &rows)?;
            let w = tape.param(store, head);
            let logits = tape.matmul_nt(z, w)?;
            let probs = tape.softmax_rows(logits)?;
            Ok(Some(cross_entropy_loss(tape, probs, &classes)?))
        }
        Objective::Pairs { positives, negatives } => {
            let keep = |ps: &[(NodeId, NodeId)]| -> Vec<(usize, usize)> {
                ps.iter().filter(|(a, b)| ok(*a) && ok(*b)).map(|(a, b)| (a.0, b.0)).collect()
            };
            let (p, n) = (keep(positives), keep(negatives));
            if p.is_empty() && n.is_empty() {
                return Ok(None);
            }
            Ok(Some(nce_loss(tape, out.z, &p, &n)?))
        }
    }
}

/// Loss value and dense gradients (one per parameter, store order).
pub fn loss_and_gradients(
    model: &MhnModel,
    graph: &HeteroGraph,
    plan: &SamplingPlan,
    objective: Objective<'_>,
    batch_size: usize,
) -> Result<Option<(f64, Vec<Tensor>)>, TrainError> {
    let store = model.params();
    let run = |obj: Objective<'_>| -> Result<Option<(f64, Vec<Tensor>)>, TrainError> {
        let mut tape = Tape::new();
        match record_loss(&mut tape, model, store, graph, plan, obj)? {
            None => Ok(None),
            Some(loss) => {
                let value = tape.value(loss).item();
                let grads = tape.backward(loss)?.dense(store);
                Ok(Some((value, grads)))
            }
        }
    };
    let chunks: Vec<Objective<'_>> = match objective {
        Objective::Pairs { positives, negatives } if batch_size > 0 && positives.len() + negatives.len() > batch_size => {
            let total = positives.len() + negatives.len();
            (0..total)
                .step_by(batch_size)
                .map(|start| {
                    let end = (start + batch_size).min(total);
                    let p = &positives[start.min(positives.len())..end.min(positives.len())];
                    let n0 = start.saturating_sub(positives.len());
                    let n1 = end.saturating_sub(positives.len());
                    Objective::Pairs {
                        positives: p,
                        negatives: &negatives[n0..n1],
                    }
                })
                .collect()
        }
        other => return run(other),
    };
    let parts: Vec<_> = chunks.into_par_iter().map(run).collect::<Result<_, _>>()?;
    let mut total: Option<(f64, Vec<Tensor>)> = None;
    for (loss, grads) in parts.into_iter().flatten() {
        match &mut total {
            None => total = Some((loss, grads)),
            Some((l, g)) => {
                *l += loss;
                for (acc, x) in g.iter_mut().zip(&grads) {
                    acc.add_assign(x);
                }
            }
        }
    }
    Ok(total)
}

/// Loss only, for validation.
pub fn evaluate_loss(
    model: &MhnModel,
    graph: &HeteroGraph,
    plan: &SamplingPlan,
    objective: Objective<'_>,
) -> Result<Option<f64>, TrainError> {
    let mut tape = Tape::new();
    Ok(record_loss(&mut tape, model, model.params(), graph, plan, objective)?.map(|l| tape.value(l).item()))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StopDecision {
    Improved,
    Continue,
    Stop,
}

/// Stops after `patience` consecutive epochs without a strict improvement
/// of the validation loss.
#[derive(Clone, Debug)]
pub struct EarlyStopping {
    patience: usize,
    best: f64,
    bad_epochs: usize,
}

impl EarlyStopping {
    pub fn new(patience: usize) -> Self {
        Self {
            patience,
            best: f64::INFINITY,
            bad_epochs: 0,
        }
    }

    pub fn best(&self) -> f64 {
        self.best
    }

    pub fn update(&mut self, val_loss: f64) -> StopDecision {
        if val_loss < self.best {
            self.best = val_loss;
            self.bad_epochs = 0;
            StopDecision::Improved
        } else {
            self.bad_epochs += 1;
            if self.bad_epochs >= self.patience {
                StopDecision::Stop
            } else {
                StopDecision::Continue
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    /// 1-based.
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
}

/// Training and validation data.
#[derive(Clone, Debug)]
pub enum Splits {
    Supervised { train: LabelTable, val: LabelTable },
    Unsupervised { train: PairSet, val: PairSet },
}

impl Splits {
    fn train(&self) -> Objective<'_> {
        match self {
            Splits::Supervised { train, .. } => Objective::Labels(train),
            Splits::Unsupervised { train, .. } => Objective::Pairs {
                positives: &train.positives,
                negatives: &train.negatives,
            },
        }
    }

    fn val(&self) -> Option<Objective<'_>> {
        match self {
            Splits::Supervised { val, .. } if !val.is_empty() => Some(Objective::Labels(val)),
            Splits::Unsupervised { val, .. } if !val.is_empty() => Some(Objective::Pairs {
                positives: &val.positives,
                negatives: &val.negatives,
            }),
            _ => None,
        }
    }
}

/// Shuffles labeled nodes and holds out `val_fraction` of them.
pub fn split_labels(labels: &LabelTable, val_fraction: f64, seed: u64) -> (LabelTable, LabelTable) {
    use rand::seq::SliceRandom;
    let mut idx: Vec<usize> = (0..labels.len()).collect();
    idx.shuffle(&mut crate::rng::stream(seed, &[crate::rng::DOMAIN_SPLIT, 2]));
    let n_val = if labels.len() > 1 {
        ((labels.len() as f64 * val_fraction).round() as usize).min(labels.len() - 1)
    } else {
        0
    };
    let (val, train) = idx.split_at(n_val);
    let mut train = train.to_vec();
    let mut val = val.to_vec();
    train.sort_unstable();
    val.sort_unstable();
    (labels.subset(&train), labels.subset(&val))
}

#[derive(Clone, Debug)]
pub struct FitResult {
    /// Parameters from the epoch with the best validation loss (the
    /// initial parameters when no epoch ran).
    pub model: MhnModel,
    pub history: Vec<EpochRecord>,
    /// 0 when no epoch ran.
    pub best_epoch: usize,
    pub stopped_early: bool,
}

/// Epoch loop: forward, loss, backward, Adam step, then validation loss
/// under a fixed sampling plan. Without validation data the training loss
/// drives early stopping.
pub fn fit(graph: &HeteroGraph, mut model: MhnModel, cfg: &TrainConfig, splits: &Splits) -> Result<FitResult, TrainError> {
    cfg.validate()?;
    model.check_graph(graph)?;
    match (cfg.mode, splits) {
        (TrainMode::Supervised, Splits::Supervised { .. }) | (TrainMode::Unsupervised, Splits::Unsupervised { .. }) => {}
        _ => return Err(TrainError::Config("training mode does not match the data splits".into())),
    }
    let mut adam = AdamState::new(
        model.params(),
        AdamConfig {
            lr: cfg.lr,
            ..AdamConfig::default()
        },
    );
    let val_plan = model.sampling_plan(graph, INFERENCE_EPOCH);
    let mut stopper = EarlyStopping::new(cfg.patience);
    let mut history = Vec::new();
    let mut best = model.params().clone();
    let mut best_epoch = 0;
    let mut stopped_early = false;

    for e in 0..cfg.epochs {
        let epoch = e + 1;
        let last_finite = model.clone();
        let diverged = |history: &Vec<EpochRecord>, last: MhnModel| TrainError::Diverged {
            epoch,
            last_finite: Box::new(last),
            history: history.clone(),
        };
        let plan = model.sampling_plan(graph, e as u64);
        let (train_loss, grads) = match loss_and_gradients(&model, graph, &plan, splits.train(), cfg.batch_size) {
            Ok(Some(v)) => v,
            Ok(None) => return Err(TrainError::Config("no training example is reachable by a metapath".into())),
            Err(TrainError::Model(ModelError::Tensor(TensorError::NonFinite { .. }))) => {
                return Err(diverged(&history, last_finite))
            }
            Err(err) => return Err(err),
        };
        if !train_loss.is_finite() {
            return Err(diverged(&history, last_finite));
        }
        if let Err(err) = adam.step(model.params_mut(), &grads) {
            return match err {
                TensorError::NonFinite { .. } => Err(diverged(&history, last_finite)),
                other => Err(other.into()),
            };
        }
        let val_loss = match splits.val() {
            Some(obj) => match evaluate_loss(&model, graph, &val_plan, obj) {
                Ok(Some(v)) => v,
                Ok(None) => train_loss,
                Err(TrainError::Model(ModelError::Tensor(TensorError::NonFinite { .. }))) => {
                    return Err(diverged(&history, last_finite))
                }
                Err(err) => return Err(err),
            },
            None => train_loss,
        };
        if !val_loss.is_finite() {
            return Err(diverged(&history, last_finite));
        }
        history.push(EpochRecord {
            epoch,
            train_loss,
            val_loss,
        });
        log::info!("epoch {epoch}: train {train_loss:.6} val {val_loss:.6}");
        match stopper.update(val_loss) {
            StopDecision::Improved => {
                best = model.params().clone();
                best_epoch = epoch;
            }
            StopDecision::Continue => {}
            StopDecision::Stop => {
                stopped_early = true;
                break;
            }
        }
    }
    *model.params_mut() = best;
    Ok(FitResult {
        model,
        history,
        best_epoch,
        stopped_early,
    })
}

/// `epoch,train_loss,val_loss` rows.
pub fn history_csv(history: &[EpochRecord]) -> String {
    let mut out = String::from("epoch,train_loss,val_loss\n");
    for r in history {
        let _ = writeln!(out, "{},{},{}", r.epoch, r.train_loss, r.val_loss);
    }
    out
}

pub fn write_history(history: &[EpochRecord], path: &Path) -> Result<(), TrainError> {
    crate::hetgraph::write_text(path, &history_csv(history))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mhn::{EncoderKind, ModelConfig};
    use crate::synthetic::{figure1, toy6};

    #[test]
    fn patience_arithmetic() {
        let mut s = EarlyStopping::new(1);
        let seen: Vec<_> = [3.0, 2.0, 2.0, 2.0].iter().map(|&v| s.update(v)).collect();
        assert_eq!(seen[..3], [StopDecision::Improved, StopDecision::Improved, StopDecision::Stop]);
        let mut s = EarlyStopping::new(2);
        assert_eq!(s.update(1.0), StopDecision::Improved);
        assert_eq!(s.update(1.0), StopDecision::Continue);
        assert_eq!(s.update(0.5), StopDecision::Improved);
        assert_eq!(s.update(0.7), StopDecision::Continue);
        assert_eq!(s.update(0.9), StopDecision::Stop);
    }

    fn toy_model(encoder: EncoderKind) -> (crate::synthetic::Dataset, MhnModel) {
        let d = toy6();
        let cfg = ModelConfig {
            dim: 8,
            encoder,
            seed: 1,
            freeze_sampling: true,
            ..Default::default()
        };
        let m = MhnModel::new(&d.graph, d.metapaths.clone(), cfg, Some(2)).unwrap();
        (d, m)
    }

    #[test]
    fn zero_learning_rate_changes_nothing() {
        let (d, m) = toy_model(EncoderKind::Mean);
        let labels = d.labels.clone().unwrap();
        let splits = Splits::Supervised {
            train: labels.clone(),
            val: labels,
        };
        let cfg = TrainConfig {
            mode: TrainMode::Supervised,
            lr: 0.0,
            epochs: 4,
            patience: 10,
            ..Default::default()
        };
        let r = fit(&d.graph, m.clone(), &cfg, &splits).unwrap();
        assert_eq!(r.model.params(), m.params());
        assert_eq!(r.history.len(), 4);
        assert!(r.history.iter().all(|h| h.train_loss == r.history[0].train_loss));
    }

    #[test]
    fn supervised_toy_converges() {
        let (d, m) = toy_model(EncoderKind::Weighted);
        let labels = d.labels.clone().unwrap();
        let splits = Splits::Supervised {
            train: labels.clone(),
            val: labels,
        };
        let cfg = TrainConfig {
            mode: TrainMode::Supervised,
            epochs: 300,
            patience: 300,
            ..Default::default()
        };
        let r = fit(&d.graph, m, &cfg, &splits).unwrap();
        let first = r.history[0].train_loss;
        let last = r.history.last().unwrap().train_loss;
        assert!(last <= 0.1 * first, "{first} -> {last}");
    }

    #[test]
    fn zero_epochs_keeps_initialization() {
        let (d, m) = toy_model(EncoderKind::Mean);
        let labels = d.labels.clone().unwrap();
        let cfg = TrainConfig {
            mode: TrainMode::Supervised,
            epochs: 0,
            ..Default::default()
        };
        let r = fit(&d.graph, m.clone(), &cfg, &Splits::Supervised { train: labels.clone(), val: labels }).unwrap();
        assert_eq!(r.model, m);
        assert!(r.history.is_empty());
    }

    #[test]
    fn chunked_gradients_equal_full_batch() {
        let g = figure1();
        let mp = crate::synthetic::figure1_metapath(&g);
        let cfg = ModelConfig {
            dim: 6,
            seed: 2,
            ..Default::default()
        };
        let m = MhnModel::new(&g, vec![mp], cfg, None).unwrap();
        let u = |n: &str| g.node(n).unwrap();
        let pairs = PairSet {
            positives: vec![(u("user1"), u("user2")), (u("user1"), u("user3")), (u("user2"), u("user3"))],
            negatives: vec![(u("user2"), u("user1")), (u("user3"), u("user2"))],
        };
        let plan = m.sampling_plan(&g, 0);
        let obj = Objective::Pairs {
            positives: &pairs.positives,
            negatives: &pairs.negatives,
        };
        let (l_full, g_full) = loss_and_gradients(&m, &g, &plan, obj, 0).unwrap().unwrap();
        let (l_chunk, g_chunk) = loss_and_gradients(&m, &g, &plan, obj, 2).unwrap().unwrap();
        assert!((l_full - l_chunk).abs() < 1e-12);
        for (a, b) in g_full.iter().zip(&g_chunk) {
            assert!(a.data().iter().zip(b.data()).all(|(x, y)| (x - y).abs() < 1e-12));
        }
    }

    #[test]
    fn mode_mismatch_rejected() {
        let (d, m) = toy_model(EncoderKind::Mean);
        let cfg = TrainConfig {
            mode: TrainMode::Unsupervised,
            ..Default::default()
        };
        let labels = d.labels.unwrap();
        let splits = Splits::Supervised {
            train: labels.clone(),
            val: labels,
        };
        assert!(matches!(fit(&d.graph, m, &cfg, &splits), Err(TrainError::Config(_))));
    }

    #[test]
    fn label_split_is_disjoint() {
        let labels = toy6().labels.unwrap();
        let (tr, va) = split_labels(&labels, 0.25, 3);
        assert_eq!((tr.len(), va.len()), (3, 1));
        assert!(tr.nodes().iter().all(|n| !va.nodes().contains(n)));
    }

    #[test]
    fn history_format() {
        let h = [EpochRecord {
            epoch: 1,
            train_loss: 0.5,
            val_loss: 0.25,
        }];
        assert_eq!(history_csv(&h), "epoch,train_loss,val_loss\n1,0.5,0.25\n");
    }
}
