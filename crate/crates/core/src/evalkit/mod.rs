//! Downstream evaluation over frozen embeddings: ranking metrics, a
//! logistic-regression node classification probe, nearest-neighbor
//! retrieval and the link prediction protocol.

mod knn;
mod linkpred;
mod metrics;
mod probe;

pub use knn::{hit_rate, knn_batch, knn_topk};
pub use linkpred::{add_edges, eval_linkpred, sample_test_negatives, split_edges, EdgeSplit, LinkPredReport, TypedEdge};
pub use metrics::{
    average_precision, f1_at_threshold, link_probability, micro_macro_f1, pr_auc, roc_auc, RankedPredictions,
};
pub use probe::{eval_nodeclass, logistic_probe, probe_split, LogisticProbe, ProbeConfig, ProbeReport, ProbeSplit};

use crate::hetgraph::GraphError;

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("{0}")]
    Input(String),
    #[error("no {0} to evaluate")]
    Empty(&'static str),
    #[error("labels contain a single class")]
    SingleClass,
    #[error(transparent)]
    Graph(#[from] GraphError),
}
