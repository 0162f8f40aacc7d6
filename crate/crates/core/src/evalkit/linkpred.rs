use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{average_precision, f1_at_threshold, link_probability, pr_auc, roc_auc, EvalError, RankedPredictions};
use crate::diffgrad::Tensor;
use crate::hetgraph::{EdgeTypeId, GraphBuilder, HeteroGraph, NodeId};
use crate::rng::{stream, DOMAIN_EVAL};

pub type TypedEdge = (NodeId, NodeId, EdgeTypeId);

/// Metrics in the order ROC-AUC, PR-AUC, F1, AP.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinkPredReport {
    pub roc_auc: f64,
    pub pr_auc: f64,
    pub f1: f64,
    pub ap: f64,
}

/// Scores each pair with `σ(z_u · z_v)` and summarizes positives against
/// negatives.
pub fn eval_linkpred(
    embeddings: &Tensor,
    positives: &[TypedEdge],
    negatives: &[TypedEdge],
    threshold: f64,
) -> Result<LinkPredReport, EvalError> {
    if positives.is_empty() {
        return Err(EvalError::Empty("held-out edges"));
    }
    if negatives.is_empty() {
        return Err(EvalError::Empty("test negatives"));
    }
    let score = |&(a, b, _): &TypedEdge| -> Result<f64, EvalError> {
        let n = embeddings.rows();
        if a.0 >= n || b.0 >= n {
            return Err(EvalError::Input("edge endpoint has no embedding".into()));
        }
        link_probability(embeddings.row(a.0), embeddings.row(b.0))
    };
    let mut scores = Vec::with_capacity(positives.len() + negatives.len());
    for e in positives.iter().chain(negatives) {
        scores.push(score(e)?);
    }
    let labels = (0..scores.len()).map(|i| i < positives.len()).collect();
    let p = RankedPredictions::new(scores, labels)?;
    Ok(LinkPredReport {
        roc_auc: roc_auc(&p)?,
        pr_auc: pr_auc(&p)?,
        f1: f1_at_threshold(&p, threshold),
        ap: average_precision(&p)?,
    })
}

/// A graph with some edges hidden, plus the hidden edges.
#[derive(Clone, Debug)]
pub struct EdgeSplit {
    pub train_graph: HeteroGraph,
    pub test: Vec<TypedEdge>,
}

/// Hides `fraction` of the distinct edges of `edge_types` (all types when
/// empty). Edges are visited in a seeded random order and skipped when
/// hiding them would leave an endpoint without any edge.
pub fn split_edges(
    graph: &HeteroGraph,
    edge_types: &[EdgeTypeId],
    fraction: f64,
    seed: u64,
) -> Result<EdgeSplit, EvalError> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(EvalError::Input(format!("test fraction {fraction} is outside (0, 1)")));
    }
    let all_types: Vec<EdgeTypeId> = (0..graph.schema().edge_types().len()).map(EdgeTypeId).collect();
    let types = if edge_types.is_empty() { &all_types[..] } else { edge_types };
    let mut seen = HashSet::new();
    let mut candidates: Vec<TypedEdge> = Vec::new();
    for &e in types {
        for &(a, b) in graph.edges(e) {
            if a != b && seen.insert((a, b, e)) {
                candidates.push((a, b, e));
            }
        }
    }
    let target = (candidates.len() as f64 * fraction).round() as usize;
    if target == 0 {
        return Err(EvalError::Empty("held-out edges"));
    }
    candidates.shuffle(&mut stream(seed, &[DOMAIN_EVAL, 2]));
    let mut degree: Vec<usize> = graph.nodes().map(|n| graph.degree(n)).collect();
    let mut hidden = HashSet::new();
    let mut test = Vec::with_capacity(target);
    for &(a, b, e) in &candidates {
        if test.len() == target {
            break;
        }
        let copies = graph.neighbors(a, e).iter().filter(|&&x| x == b).count();
        let undirected = graph.schema().edge_type(e).undirected;
        let (da, db) = (copies, if undirected { copies } else { 0 });
        if degree[a.0] > da && degree[b.0] > db {
            degree[a.0] -= da;
            degree[b.0] -= db;
            hidden.insert((a, b, e));
            test.push((a, b, e));
        }
    }
    if test.len() < target {
        log::warn!("held out {} of {} requested edges to keep every node connected", test.len(), target);
    }
    test.sort_unstable();
    let train_graph = rebuild_without(graph, &hidden)?;
    Ok(EdgeSplit { train_graph, test })
}

/// `graph` with `extra` edges added.
pub fn add_edges(graph: &HeteroGraph, extra: &[TypedEdge]) -> Result<HeteroGraph, EvalError> {
    let mut b = copy_nodes(graph)?;
    for e in 0..graph.schema().edge_types().len() {
        let e = EdgeTypeId(e);
        for &(x, y) in graph.edges(e) {
            b.add_edge_ids(x, y, e)?;
        }
    }
    for &(x, y, e) in extra {
        b.add_edge_ids(x, y, e)?;
    }
    Ok(b.build())
}

fn copy_nodes(graph: &HeteroGraph) -> Result<GraphBuilder, EvalError> {
    let mut b = GraphBuilder::new(graph.schema().clone());
    for n in graph.nodes() {
        let t = graph.schema().node_type_name(graph.node_type(n)).to_string();
        b.add_node(graph.node_name(n), &t, graph.node_features(n).unwrap_or(&[]))?;
    }
    Ok(b)
}

fn rebuild_without(graph: &HeteroGraph, hidden: &HashSet<TypedEdge>) -> Result<HeteroGraph, EvalError> {
    let mut b = copy_nodes(graph)?;
    for e in 0..graph.schema().edge_types().len() {
        let e = EdgeTypeId(e);
        for &(x, y) in graph.edges(e) {
            if !hidden.contains(&(x, y, e)) {
                b.add_edge_ids(x, y, e)?;
            }
        }
    }
    Ok(b.build())
}

/// One uniform non-edge per positive, with the same endpoint types and
/// edge type as that positive. Pairs connected in `graph` by any edge
/// type, or already drawn, are rejected.
pub fn sample_test_negatives(
    graph: &HeteroGraph,
    positives: &[TypedEdge],
    seed: u64,
    max_retries: usize,
) -> Vec<TypedEdge> {
    let mut rng = stream(seed, &[DOMAIN_EVAL, 3]);
    let mut drawn = HashSet::new();
    let mut out = Vec::with_capacity(positives.len());
    for &(a, b, e) in positives {
        let pool_a = graph.nodes_of_type(graph.node_type(a));
        let pool_b = graph.nodes_of_type(graph.node_type(b));
        for _ in 0..max_retries {
            let x = pool_a[rng.gen_range(0..pool_a.len())];
            let y = pool_b[rng.gen_range(0..pool_b.len())];
            if x != y && !graph.connected(x, y) && drawn.insert((x, y, e)) {
                out.push((x, y, e));
                break;
            }
        }
    }
    if out.len() < positives.len() {
        log::warn!("sampled {} of {} test negatives", out.len(), positives.len());
    }
    out
}
