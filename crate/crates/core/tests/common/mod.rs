//! Oracles and fixtures shared by the integration tests.

#![allow(dead_code)]

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use mhn::diffgrad::{grad_check, GradCheckReport};
use mhn::hetgraph::{EdgeTypeId, GraphBuilder, HeteroGraph, LabelTable, NodeId, NodeTypeId, Schema};
use mhn::metapath::Metapath;
use mhn::mhn::{EncoderKind, FusionMode, MhnModel, ModelConfig};
use mhn::training::{record_loss, Objective};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random schema with 2 or 3 node types and up to 4 edge types, at most 20
/// nodes, and a few random metapaths of 2 to 4 node types.
pub fn random_graph(seed: u64) -> (HeteroGraph, Vec<Metapath>) {
    let mut r = rng(seed);
    let names = ["A", "B", "C"];
    let n_types = r.gen_range(2..=3);
    let dims: Vec<Option<usize>> = (0..n_types)
        .map(|_| if r.gen_bool(0.5) { Some(r.gen_range(1..=3)) } else { None })
        .collect();
    let node_types: Vec<(&str, Option<usize>)> = (0..n_types).map(|t| (names[t], dims[t])).collect();
    let n_edge_types = r.gen_range(2..=4);
    let mut edge_names = Vec::new();
    let mut edge_defs = Vec::new();
    for e in 0..n_edge_types {
        let s = r.gen_range(0..n_types);
        let d = r.gen_range(0..n_types);
        edge_names.push(format!("e{e}"));
        edge_defs.push((s, d, r.gen_bool(0.6)));
    }
    let edge_types: Vec<(&str, &str, &str, bool)> = edge_defs
        .iter()
        .zip(&edge_names)
        .map(|(&(s, d, u), n)| (n.as_str(), names[s], names[d], u))
        .collect();
    let schema = Schema::new(&node_types, &edge_types).unwrap();
    let mut b = GraphBuilder::new(schema.clone());
    let n_nodes = r.gen_range(6..=20);
    let mut types = Vec::new();
    for i in 0..n_nodes {
        // every type gets at least one node
        let t = if i < n_types { i } else { r.gen_range(0..n_types) };
        let f: Vec<f64> = (0..dims[t].unwrap_or(0)).map(|_| r.gen_range(-1.0..1.0)).collect();
        b.add_node(&format!("n{i}"), names[t], &f).unwrap();
        types.push(t);
    }
    let p = r.gen_range(0.1..0.4);
    for (e, &(s, d, _)) in edge_defs.iter().enumerate() {
        for a in 0..n_nodes {
            for c in 0..n_nodes {
                if a != c && types[a] == s && types[c] == d && r.gen_bool(p) {
                    b.add_edge_ids(NodeId(a), NodeId(c), EdgeTypeId(e)).unwrap();
                }
            }
        }
    }
    let graph = b.build();
    let mut metapaths = Vec::new();
    for k in 0..6 {
        let start = NodeTypeId(r.gen_range(0..n_types));
        let len = r.gen_range(2..=4);
        let mut nt = vec![start];
        let mut et = Vec::new();
        while nt.len() < len {
            let out = schema.outgoing(*nt.last().unwrap());
            if out.is_empty() {
                break;
            }
            let (e, t) = out[r.gen_range(0..out.len())];
            et.push(e);
            nt.push(t);
        }
        if nt.len() >= 2 {
            metapaths.push(Metapath::from_ids(&schema, format!("mp{k}"), nt, et).unwrap());
        }
    }
    (graph, metapaths)
}

/// Whether an edge of type `e` can be walked from `a` to `b`, read off the
/// raw edge lists.
fn step_ok(graph: &HeteroGraph, a: NodeId, b: NodeId, e: EdgeTypeId) -> bool {
    let undirected = graph.schema().edge_type(e).undirected;
    graph
        .edges(e)
        .iter()
        .any(|&(x, y)| (x == a && y == b) || (undirected && x == b && y == a))
}

/// Every node sequence of the metapath's length that starts at `u` and
/// matches its types and edges, found by trying all sequences.
pub fn brute_instances(graph: &HeteroGraph, u: NodeId, mp: &Metapath) -> BTreeSet<Vec<NodeId>> {
    let n = graph.node_count();
    let len = mp.len();
    let mut out = BTreeSet::new();
    let tail = len - 1;
    let total = n.pow(tail as u32);
    for code in 0..total {
        let mut seq = vec![u];
        let mut c = code;
        for _ in 0..tail {
            seq.push(NodeId(c % n));
            c /= n;
        }
        let types_ok = seq
            .iter()
            .zip(mp.node_types())
            .all(|(&x, &t)| graph.node_type(x) == t);
        let edges_ok = (0..tail).all(|i| step_ok(graph, seq[i], seq[i + 1], mp.edge_types()[i]));
        if types_ok && edges_ok {
            out.insert(seq);
        }
    }
    out
}

pub fn brute_bfs(instances: &BTreeSet<Vec<NodeId>>, u: NodeId) -> BTreeSet<NodeId> {
    instances.iter().map(|s| s[1]).filter(|&x| x != u).collect()
}

/// The possible DFS neighbor sets: one per instance.
pub fn brute_dfs_candidates(instances: &BTreeSet<Vec<NodeId>>) -> BTreeSet<BTreeSet<NodeId>> {
    instances.iter().map(|s| s[2..].iter().copied().collect()).collect()
}

/// Pairwise ROC-AUC with ties counting one half.
pub fn brute_roc_auc(scores: &[f64], labels: &[bool]) -> f64 {
    let (mut num, mut den) = (0.0, 0.0);
    for i in 0..scores.len() {
        for j in 0..scores.len() {
            if labels[i] && !labels[j] {
                den += 1.0;
                if scores[i] > scores[j] {
                    num += 1.0;
                } else if scores[i] == scores[j] {
                    num += 0.5;
                }
            }
        }
    }
    num / den
}

/// `(recall, precision)` at every distinct threshold, highest first.
fn brute_curve(scores: &[f64], labels: &[bool]) -> Vec<(f64, f64)> {
    let mut thresholds: Vec<f64> = scores.to_vec();
    thresholds.sort_by(|a, b| b.total_cmp(a));
    thresholds.dedup();
    let positives = labels.iter().filter(|&&l| l).count() as f64;
    thresholds
        .iter()
        .map(|&t| {
            let tp = scores.iter().zip(labels).filter(|&(&s, &l)| s >= t && l).count() as f64;
            let predicted = scores.iter().filter(|&&s| s >= t).count() as f64;
            (tp / positives, tp / predicted)
        })
        .collect()
}

pub fn brute_pr_auc(scores: &[f64], labels: &[bool]) -> f64 {
    let curve = brute_curve(scores, labels);
    let mut prev = (0.0, curve[0].1);
    let mut area = 0.0;
    for &(r, p) in &curve {
        area += (r - prev.0) * (p + prev.1) / 2.0;
        prev = (r, p);
    }
    area
}

pub fn brute_average_precision(scores: &[f64], labels: &[bool]) -> f64 {
    let mut prev = 0.0;
    let mut ap = 0.0;
    for (r, p) in brute_curve(scores, labels) {
        ap += (r - prev) * p;
        prev = r;
    }
    ap
}

fn f1(tp: f64, fp: f64, fnn: f64) -> f64 {
    if tp == 0.0 {
        0.0
    } else {
        2.0 * tp / (2.0 * tp + fp + fnn)
    }
}

pub fn brute_f1(scores: &[f64], labels: &[bool], threshold: f64) -> f64 {
    let count = |pred: bool, truth: bool| {
        scores
            .iter()
            .zip(labels)
            .filter(|&(&s, &l)| (s >= threshold) == pred && l == truth)
            .count() as f64
    };
    f1(count(true, true), count(true, false), count(false, true))
}

/// Micro-F1 from a full confusion matrix, macro as the mean of one-vs-rest
/// F1 over all classes.
pub fn brute_micro_macro(predicted: &[usize], truth: &[usize], classes: usize) -> (f64, f64) {
    let mut confusion = vec![vec![0.0; classes]; classes];
    for (&p, &t) in predicted.iter().zip(truth) {
        confusion[t][p] += 1.0;
    }
    let mut per_class = Vec::new();
    let (mut tp_all, mut fp_all, mut fn_all) = (0.0, 0.0, 0.0);
    for c in 0..classes {
        let tp = confusion[c][c];
        let fp: f64 = (0..classes).filter(|&t| t != c).map(|t| confusion[t][c]).sum();
        let fnn: f64 = (0..classes).filter(|&p| p != c).map(|p| confusion[c][p]).sum();
        per_class.push(f1(tp, fp, fnn));
        tp_all += tp;
        fp_all += fp;
        fn_all += fnn;
    }
    (f1(tp_all, fp_all, fn_all), per_class.iter().sum::<f64>() / classes as f64)
}

/// Nine nodes: four users and three items with attributes, two tags
/// without. Metapaths UIU, UITIU and IUI.
pub fn grad_graph() -> (HeteroGraph, Vec<Metapath>, LabelTable) {
    let schema = Schema::new(
        &[("U", Some(2)), ("I", Some(2)), ("T", None)],
        &[("ui", "U", "I", true), ("it", "I", "T", true)],
    )
    .unwrap();
    let mut b = GraphBuilder::new(schema);
    for (n, f) in [("u1", [1.0, 0.2]), ("u2", [0.8, -0.1]), ("u3", [-0.3, 0.9]), ("u4", [0.1, 1.1])] {
        b.add_node(n, "U", &f).unwrap();
    }
    for (n, f) in [("i1", [0.5, -0.5]), ("i2", [-0.2, 0.7]), ("i3", [0.9, 0.3])] {
        b.add_node(n, "I", &f).unwrap();
    }
    b.add_node("t1", "T", &[]).unwrap();
    b.add_node("t2", "T", &[]).unwrap();
    for (s, d) in [("u1", "i1"), ("u2", "i1"), ("u2", "i2"), ("u3", "i2"), ("u3", "i3"), ("u4", "i3"), ("u1", "i3")] {
        b.add_edge(s, d, "ui").unwrap();
    }
    for (s, d) in [("i1", "t1"), ("i2", "t1"), ("i3", "t2"), ("i2", "t2")] {
        b.add_edge(s, d, "it").unwrap();
    }
    let g = b.build();
    let s = g.schema();
    let mps = vec![
        Metapath::from_names(s, "UIU", &["U", "I", "U"], &["ui", "ui"]).unwrap(),
        Metapath::from_names(s, "UITIU", &["U", "I", "T", "I", "U"], &["ui", "it", "it", "ui"]).unwrap(),
        Metapath::from_names(s, "IUI", &["I", "U", "I"], &["ui", "ui"]).unwrap(),
    ];
    let labels = LabelTable::new(vec![(NodeId(0), 0), (NodeId(1), 0), (NodeId(2), 1), (NodeId(3), 1)], 2).unwrap();
    (g, mps, labels)
}

/// Finite-difference check of the full loss with the epoch-0 samples held
/// fixed. `supervised` picks cross-entropy over the user labels, otherwise
/// the pair loss over user and item pairs.
pub fn model_grad_check(encoder: EncoderKind, fusion: FusionMode, supervised: bool, seed: u64) -> GradCheckReport {
    let (g, mps, labels) = grad_graph();
    let cfg = ModelConfig {
        dim: 6,
        heads: 2,
        encoder,
        fusion,
        seed,
        ..Default::default()
    };
    let classes = if supervised { Some(2) } else { None };
    let model = MhnModel::new(&g, mps, cfg, classes).unwrap();
    let plan = model.sampling_plan(&g, 0);
    let n = |s: &str| g.node(s).unwrap();
    let positives = vec![(n("u1"), n("u2")), (n("u3"), n("u4")), (n("i1"), n("i2"))];
    let negatives = vec![(n("u1"), n("u4")), (n("u2"), n("u3")), (n("i1"), n("i3")), (n("u4"), n("u1"))];
    let objective = if supervised {
        Objective::Labels(&labels)
    } else {
        Objective::Pairs {
            positives: &positives,
            negatives: &negatives,
        }
    };
    grad_check(
        |tape, store| {
            let loss = record_loss(tape, &model, store, &g, &plan, objective).map_err(|e| match e {
                mhn::training::TrainError::Model(mhn::mhn::ModelError::Tensor(t)) => t,
                other => panic!("loss failed: {other}"),
            })?;
            Ok(loss.expect("fixture nodes are reachable"))
        },
        model.params(),
        1e-5,
        1e-3,
    )
    .unwrap()
}
