use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{Metapath, MetapathInstance};
use crate::hetgraph::{HeteroGraph, NodeId};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplingConfig {
    /// Instances requested per (node, metapath).
    pub n_instances: usize,
    /// Total walk attempts, successful or not, before giving up.
    pub max_retries: usize,
    /// Instances drawn (and unioned) for the DFS neighbor set.
    pub dfs_instances_per_node: usize,
}

impl Default for SamplingConfig {
    fn default() -> Self {
        Self {
            n_instances: 10,
            max_retries: 100,
            dfs_instances_per_node: 1,
        }
    }
}

/// BFS/DFS neighborhoods of one node under one metapath.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NeighborSample {
    pub target: NodeId,
    pub metapath: String,
    /// Sorted, deduplicated.
    pub bfs: Vec<NodeId>,
    /// Sorted, deduplicated.
    pub dfs: Vec<NodeId>,
    pub instances: Vec<MetapathInstance>,
}

impl NeighborSample {
    /// A metapath is usable for a node only if sampling found a BFS neighbor.
    pub fn is_active(&self) -> bool {
        !self.bfs.is_empty()
    }
}

fn walk<R: Rng + ?Sized>(graph: &HeteroGraph, u: NodeId, mp: &Metapath, rng: &mut R) -> Option<Vec<NodeId>> {
    let mut nodes = Vec::with_capacity(mp.len());
    nodes.push(u);
    let mut cur = u;
    for (i, &e) in mp.edge_types().iter().enumerate() {
        let want = mp.node_types()[i + 1];
        let next = graph.neighbors(cur, e);
        let &n = next.choose(rng)?;
        if graph.node_type(n) != want {
            return None;
        }
        nodes.push(n);
        cur = n;
    }
    Some(nodes)
}

/// Random metapath-guided walks from `u`. Each step picks uniformly among the
/// neighbors reachable through the metapath's edge type; walks that dead-end
/// are discarded. At most `max_retries` walks are attempted in total, so
/// fewer than `n_instances` (possibly zero) instances may come back.
pub fn sample_instances<R: Rng + ?Sized>(
    graph: &HeteroGraph,
    u: NodeId,
    mp: &Metapath,
    n_instances: usize,
    max_retries: usize,
    rng: &mut R,
) -> Vec<MetapathInstance> {
    let mut out = Vec::new();
    if graph.node_type(u) != mp.start_type() {
        return out;
    }
    let mut attempts = 0;
    while out.len() < n_instances && attempts < max_retries {
        attempts += 1;
        if let Some(nodes) = walk(graph, u, mp, rng) {
            out.push(MetapathInstance { nodes });
        }
    }
    out
}

/// Every instance of `mp` starting at `u`, in lexicographic order.
pub fn enumerate_instances(graph: &HeteroGraph, u: NodeId, mp: &Metapath) -> Vec<MetapathInstance> {
    fn extend(graph: &HeteroGraph, mp: &Metapath, prefix: &mut Vec<NodeId>, out: &mut BTreeSet<Vec<NodeId>>) {
        let i = prefix.len() - 1;
        if i == mp.edge_types().len() {
            out.insert(prefix.clone());
            return;
        }
        let cur = prefix[i];
        for &n in graph.neighbors(cur, mp.edge_types()[i]) {
            if graph.node_type(n) == mp.node_types()[i + 1] {
                prefix.push(n);
                extend(graph, mp, prefix, out);
                prefix.pop();
            }
        }
    }
    let mut out = BTreeSet::new();
    if graph.node_type(u) == mp.start_type() {
        extend(graph, mp, &mut vec![u], &mut out);
    }
    out.into_iter().map(|nodes| MetapathInstance { nodes }).collect()
}

/// Second nodes of the instances, excluding `u`.
pub fn bfs_neighbors(instances: &[MetapathInstance], u: NodeId) -> BTreeSet<NodeId> {
    instances
        .iter()
        .filter_map(|i| i.nodes.get(1).copied())
        .filter(|&n| n != u)
        .collect()
}

/// Nodes of one uniformly chosen instance, minus its first two nodes.
pub fn dfs_neighbors<R: Rng + ?Sized>(instances: &[MetapathInstance], _u: NodeId, rng: &mut R) -> BTreeSet<NodeId> {
    match instances.choose(rng) {
        Some(i) => i.nodes.iter().skip(2).copied().collect(),
        None => BTreeSet::new(),
    }
}

/// Union of `draws` independent [`dfs_neighbors`] draws.
pub fn dfs_neighbors_multi<R: Rng + ?Sized>(
    instances: &[MetapathInstance],
    u: NodeId,
    draws: usize,
    rng: &mut R,
) -> BTreeSet<NodeId> {
    let mut out = BTreeSet::new();
    for _ in 0..draws.max(1) {
        out.extend(dfs_neighbors(instances, u, rng));
    }
    out
}

/// Samples instances and extracts both neighbor sets.
pub fn sample_neighborhood<R: Rng + ?Sized>(
    graph: &HeteroGraph,
    u: NodeId,
    mp: &Metapath,
    cfg: &SamplingConfig,
    rng: &mut R,
) -> NeighborSample {
    let instances = sample_instances(graph, u, mp, cfg.n_instances, cfg.max_retries, rng);
    let bfs = bfs_neighbors(&instances, u).into_iter().collect();
    let dfs = dfs_neighbors_multi(&instances, u, cfg.dfs_instances_per_node, rng)
        .into_iter()
        .collect();
    NeighborSample {
        target: u,
        metapath: mp.id().to_string(),
        bfs,
        dfs,
        instances,
    }
}

/// The sample drawn for `(epoch, u, metapath)` under `seed`; every such
/// triple has its own random stream.
pub fn seeded_neighborhood(
    graph: &HeteroGraph,
    u: NodeId,
    mp: &Metapath,
    cfg: &SamplingConfig,
    seed: u64,
    epoch: u64,
) -> NeighborSample {
    let mut r = crate::rng::stream(seed, &[crate::rng::DOMAIN_SAMPLING, epoch, u.0 as u64, crate::rng::tag(mp.id())]);
    sample_neighborhood(graph, u, mp, cfg, &mut r)
}
