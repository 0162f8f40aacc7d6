use std::collections::HashSet;

use rand::distributions::{Distribution, WeightedIndex};
use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;

use super::{PairSource, TrainConfig, TrainError};
use crate::hetgraph::{EdgeTypeId, HeteroGraph, NodeId};
use crate::metapath::Metapath;
use crate::rng;

/// Positive pairs `S` and negative pairs `S-`.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct PairSet {
    pub positives: Vec<(NodeId, NodeId)>,
    pub negatives: Vec<(NodeId, NodeId)>,
}

impl PairSet {
    pub fn is_empty(&self) -> bool {
        self.positives.is_empty() && self.negatives.is_empty()
    }
}

/// Draws negative tails from `count^0.75` over the nodes of the tail's type,
/// where `count` is how often a node occurs in the positive pairs.
#[derive(Clone, Debug)]
pub struct NegativeSampler {
    nodes: Vec<Vec<NodeId>>,
    dists: Vec<Option<WeightedIndex<f64>>>,
    observed: HashSet<(NodeId, NodeId)>,
}

impl NegativeSampler {
    pub fn new(graph: &HeteroGraph, positives: &[(NodeId, NodeId)]) -> Self {
        let mut counts = vec![0usize; graph.node_count()];
        let mut observed = HashSet::with_capacity(positives.len() * 2);
        for &(a, b) in positives {
            counts[a.0] += 1;
            counts[b.0] += 1;
            observed.insert((a, b));
            observed.insert((b, a));
        }
        let n_types = graph.schema().node_types().len();
        let mut nodes = Vec::with_capacity(n_types);
        let mut dists = Vec::with_capacity(n_types);
        for t in 0..n_types {
            let members: Vec<NodeId> = graph
                .nodes_of_type(crate::hetgraph::NodeTypeId(t))
                .iter()
                .copied()
                .filter(|n| counts[n.0] > 0)
                .collect();
            let weights: Vec<f64> = members.iter().map(|n| (counts[n.0] as f64).powf(0.75)).collect();
            dists.push(WeightedIndex::new(&weights).ok());
            nodes.push(members);
        }
        Self { nodes, dists, observed }
    }

    /// Up to `k` negatives for the positive `(u, v)`: `u` paired with tails
    /// of `v`'s type that are neither `u`, adjacent to `u`, nor a positive
    /// partner of `u`. Gives up on a draw after `max_retries` rejections.
    pub fn sample<R: Rng + ?Sized>(
        &self,
        graph: &HeteroGraph,
        (u, v): (NodeId, NodeId),
        k: usize,
        max_retries: usize,
        rng: &mut R,
    ) -> Vec<(NodeId, NodeId)> {
        let t = graph.node_type(v).0;
        let Some(dist) = &self.dists[t] else {
            return Vec::new();
        };
        let mut out = Vec::with_capacity(k);
        for _ in 0..k {
            for _ in 0..max_retries.max(1) {
                let cand = self.nodes[t][dist.sample(rng)];
                if cand != u && !graph.connected(u, cand) && !self.observed.contains(&(u, cand)) {
                    out.push((u, cand));
                    break;
                }
            }
        }
        out
    }
}

/// Edges of the selected types (all types when `types` is empty).
pub fn edge_positives(graph: &HeteroGraph, types: &[EdgeTypeId]) -> Vec<(NodeId, NodeId)> {
    let mut out = Vec::new();
    for (i, _) in graph.schema().edge_types().iter().enumerate() {
        let e = EdgeTypeId(i);
        if types.is_empty() || types.contains(&e) {
            out.extend(graph.edges(e).iter().copied());
        }
    }
    out
}

/// Metapath-guided walks of up to `walk_len` nodes, `walks_per_node` from
/// every node whose type starts a metapath. Walk `i` from a node follows its
/// type's metapaths round-robin and repeats the pattern while the metapath
/// ends on its start type; a dead end stops the walk early.
pub fn metapath_walks(
    graph: &HeteroGraph,
    metapaths: &[Metapath],
    walk_len: usize,
    walks_per_node: usize,
    seed: u64,
) -> Vec<Vec<NodeId>> {
    let starts: Vec<NodeId> = graph
        .nodes()
        .filter(|&n| metapaths.iter().any(|m| m.start_type() == graph.node_type(n)))
        .collect();
    starts
        .par_iter()
        .map(|&u| {
            let own: Vec<&Metapath> = metapaths.iter().filter(|m| m.start_type() == graph.node_type(u)).collect();
            let mut r = rng::stream(seed, &[rng::DOMAIN_PAIRS, 1, u.0 as u64]);
            (0..walks_per_node)
                .map(|i| walk_once(graph, own[i % own.len()], u, walk_len, &mut r))
                .collect::<Vec<_>>()
        })
        .flatten()
        .collect()
}

fn walk_once<R: Rng + ?Sized>(graph: &HeteroGraph, mp: &Metapath, u: NodeId, walk_len: usize, rng: &mut R) -> Vec<NodeId> {
    let mut walk = vec![u];
    let steps = mp.edge_types().len();
    let cyclic = mp.node_types().first() == mp.node_types().last();
    let mut step = 0;
    while walk.len() < walk_len {
        if step == steps {
            if !cyclic {
                break;
            }
            step = 0;
        }
        let cur = *walk.last().expect("walk is non-empty");
        let want = mp.node_types()[step + 1];
        let options: Vec<NodeId> = graph
            .neighbors(cur, mp.edge_types()[step])
            .iter()
            .copied()
            .filter(|&n| graph.node_type(n) == want)
            .collect();
        let Some(&next) = options.choose(rng) else { break };
        walk.push(next);
        step += 1;
    }
    walk
}

/// Ordered pairs `(w[i], w[j])` with `0 < j - i <= window`, skipping pairs
/// of a node with itself.
pub fn window_pairs(walks: &[Vec<NodeId>], window: usize) -> Vec<(NodeId, NodeId)> {
    let mut out = Vec::new();
    for w in walks {
        for i in 0..w.len() {
            for j in i + 1..w.len().min(i + window + 1) {
                if w[i] != w[j] {
                    out.push((w[i], w[j]));
                }
            }
        }
    }
    out
}

pub(crate) fn resolve_edge_types(graph: &HeteroGraph, names: &[String]) -> Result<Vec<EdgeTypeId>, TrainError> {
    names
        .iter()
        .map(|n| graph.schema().edge_type_id(n).map_err(|e| TrainError::Config(e.to_string())))
        .collect()
}

/// Positive pairs per `cfg.pair_source`.
pub fn positive_pairs(graph: &HeteroGraph, metapaths: &[Metapath], cfg: &TrainConfig) -> Result<Vec<(NodeId, NodeId)>, TrainError> {
    Ok(match cfg.pair_source {
        PairSource::Edges => edge_positives(graph, &resolve_edge_types(graph, &cfg.positive_edge_types)?),
        PairSource::Walks => {
            let walks = metapath_walks(graph, metapaths, cfg.walk_len, cfg.walks_per_node, cfg.seed);
            window_pairs(&walks, cfg.window)
        }
    })
}

/// Attaches `cfg.negatives` negatives to each positive. `sampler` defines
/// the noise distribution and the observed pairs to reject.
pub fn with_negatives(
    graph: &HeteroGraph,
    positives: Vec<(NodeId, NodeId)>,
    sampler: &NegativeSampler,
    cfg: &TrainConfig,
    stream_tag: u64,
) -> PairSet {
    let mut r = rng::stream(cfg.seed, &[rng::DOMAIN_PAIRS, 2, stream_tag]);
    let mut negatives = Vec::with_capacity(positives.len() * cfg.negatives);
    for &p in &positives {
        negatives.extend(sampler.sample(graph, p, cfg.negatives, cfg.max_negative_retries, &mut r));
    }
    let wanted = positives.len() * cfg.negatives;
    if negatives.len() < wanted {
        log::warn!(
            "negative sampling found {} of {} requested pairs",
            negatives.len(),
            wanted
        );
    }
    PairSet { positives, negatives }
}

/// Positives from `graph` plus type-matched negatives.
pub fn build_pairs(graph: &HeteroGraph, metapaths: &[Metapath], cfg: &TrainConfig) -> Result<PairSet, TrainError> {
    let positives = positive_pairs(graph, metapaths, cfg)?;
    if positives.is_empty() {
        return Err(TrainError::Config("no positive pairs to train on".into()));
    }
    let sampler = NegativeSampler::new(graph, &positives);
    Ok(with_negatives(graph, positives, &sampler, cfg, 0))
}

/// Train/validation pair sets: positives are shuffled and `val_fraction`
/// of them set aside, then each side gets its own negatives.
pub fn split_pairs(graph: &HeteroGraph, metapaths: &[Metapath], cfg: &TrainConfig) -> Result<(PairSet, PairSet), TrainError> {
    let mut positives = positive_pairs(graph, metapaths, cfg)?;
    if positives.is_empty() {
        return Err(TrainError::Config("no positive pairs to train on".into()));
    }
    let sampler = NegativeSampler::new(graph, &positives);
    positives.shuffle(&mut rng::stream(cfg.seed, &[rng::DOMAIN_SPLIT, 1]));
    let n_val = if positives.len() > 1 {
        ((positives.len() as f64 * cfg.val_fraction).round() as usize).min(positives.len() - 1)
    } else {
        0
    };
    let train = positives.split_off(n_val);
    let val = positives;
    Ok((
        with_negatives(graph, train, &sampler, cfg, 1),
        with_negatives(graph, val, &sampler, cfg, 2),
    ))
}
