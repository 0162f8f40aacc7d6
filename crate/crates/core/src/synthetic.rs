//! Small fixture graphs and planted-structure generators.
//!
//! The planted generators produce graphs whose ground truth (blocks, latent
//! positions, link rules) is known, so downstream metrics have a known
//! ceiling.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::hetgraph::{GraphBuilder, HeteroGraph, LabelTable, NodeId, Schema};
use crate::metapath::Metapath;
use crate::rng;

/// Graph plus whatever ground truth the generator planted.
#[derive(Clone, Debug)]
pub struct Dataset {
    pub graph: HeteroGraph,
    pub labels: Option<LabelTable>,
    pub metapaths: Vec<Metapath>,
}

/// Three users, four items, user-item and item-item relations:
/// `user1-item1-item2-user2` and `user1-item3-item4-user3` are the only
/// U-I-I-U paths out of `user1`.
pub fn figure1() -> HeteroGraph {
    let schema = Schema::new(
        &[("U", Some(2)), ("I", Some(3))],
        &[("ui", "U", "I", true), ("ii", "I", "I", true)],
    )
    .expect("static schema");
    let mut b = GraphBuilder::new(schema);
    let users = [("user1", [1.0, 0.0]), ("user2", [0.0, 1.0]), ("user3", [0.5, 0.5])];
    for (n, f) in users {
        b.add_node(n, "U", &f).expect("static node");
    }
    let items = [
        ("item1", [1.0, 0.0, 0.0]),
        ("item2", [0.0, 1.0, 0.0]),
        ("item3", [0.0, 0.0, 1.0]),
        ("item4", [0.5, 0.5, 0.0]),
    ];
    for (n, f) in items {
        b.add_node(n, "I", &f).expect("static node");
    }
    for (s, d, e) in [
        ("user1", "item1", "ui"),
        ("user1", "item3", "ui"),
        ("user2", "item2", "ui"),
        ("user3", "item4", "ui"),
        ("item1", "item2", "ii"),
        ("item3", "item4", "ii"),
    ] {
        b.add_edge(s, d, e).expect("static edge");
    }
    b.build()
}

pub fn figure1_metapath(graph: &HeteroGraph) -> Metapath {
    Metapath::from_names(graph.schema(), "UIIU", &["U", "I", "I", "U"], &["ui", "ii", "ui"])
        .expect("figure-1 schema has UIIU")
}

/// Six nodes: four users whose attributes split them into two classes, and
/// two items each shared by one class. Metapath UIU.
pub fn toy6() -> Dataset {
    let schema = Schema::new(&[("U", Some(2)), ("I", Some(2))], &[("ui", "U", "I", true)]).expect("static schema");
    let mut b = GraphBuilder::new(schema);
    for (n, f) in [
        ("u1", [1.0, 0.0]),
        ("u2", [0.9, 0.1]),
        ("u3", [0.0, 1.0]),
        ("u4", [0.1, 0.9]),
    ] {
        b.add_node(n, "U", &f).expect("static node");
    }
    b.add_node("i1", "I", &[1.0, 0.0]).expect("static node");
    b.add_node("i2", "I", &[0.0, 1.0]).expect("static node");
    for (s, d) in [("u1", "i1"), ("u2", "i1"), ("u3", "i2"), ("u4", "i2")] {
        b.add_edge(s, d, "ui").expect("static edge");
    }
    let graph = b.build();
    let labels = LabelTable::new(
        vec![(NodeId(0), 0), (NodeId(1), 0), (NodeId(2), 1), (NodeId(3), 1)],
        2,
    )
    .expect("static labels");
    let metapaths = vec![Metapath::from_names(graph.schema(), "UIU", &["U", "I", "U"], &["ui", "ui"]).expect("UIU")];
    Dataset {
        graph,
        labels: Some(labels),
        metapaths,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SyntheticKind {
    /// Authors/papers in planted blocks with block-revealing attributes;
    /// author labels are the blocks.
    Classification,
    /// Users/items in planted blocks with ring locality inside each block.
    Bipartite,
    /// User-item links that require two independent hub relations to agree.
    Complementary,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticConfig {
    pub kind: SyntheticKind,
    /// Nodes of each of the two main node types.
    pub nodes_per_type: usize,
    pub blocks: usize,
    /// Edge probability inside a block (peak value when locality is on).
    pub p_in: f64,
    pub p_out: f64,
    /// Standard deviation of the Gaussian noise added to attributes.
    pub noise: f64,
    /// Width of the within-block ring kernel; 0 disables it.
    pub locality: f64,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self::classification()
    }
}

impl SyntheticConfig {
    pub fn classification() -> Self {
        Self {
            kind: SyntheticKind::Classification,
            nodes_per_type: 200,
            blocks: 4,
            p_in: 0.15,
            p_out: 0.005,
            noise: 0.1,
            locality: 0.0,
            seed: 0,
        }
    }

    pub fn bipartite() -> Self {
        Self {
            kind: SyntheticKind::Bipartite,
            nodes_per_type: 300,
            blocks: 2,
            p_in: 0.9,
            p_out: 0.002,
            noise: 0.0,
            locality: 0.05,
            seed: 0,
        }
    }

    pub fn complementary() -> Self {
        Self {
            kind: SyntheticKind::Complementary,
            nodes_per_type: 200,
            blocks: 2,
            p_in: 0.12,
            p_out: 0.005,
            noise: 0.0,
            locality: 0.0,
            seed: 0,
        }
    }

    pub fn for_kind(kind: SyntheticKind) -> Self {
        match kind {
            SyntheticKind::Classification => Self::classification(),
            SyntheticKind::Bipartite => Self::bipartite(),
            SyntheticKind::Complementary => Self::complementary(),
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.nodes_per_type == 0 || self.blocks == 0 {
            return Err("nodes per type and block count must be positive".into());
        }
        if self.blocks > self.nodes_per_type {
            return Err("more blocks than nodes".into());
        }
        for (name, p) in [("p_in", self.p_in), ("p_out", self.p_out)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(format!("{name} must be a probability"));
            }
        }
        if self.noise < 0.0 || self.locality < 0.0 {
            return Err("noise and locality must be non-negative".into());
        }
        Ok(())
    }
}

pub fn generate(cfg: &SyntheticConfig) -> Result<Dataset, String> {
    cfg.validate()?;
    Ok(match cfg.kind {
        SyntheticKind::Classification => planted_classification(cfg),
        SyntheticKind::Bipartite => planted_bipartite(cfg),
        SyntheticKind::Complementary => planted_complementary(cfg),
    })
}

fn one_hot_noisy<R: Rng>(block: usize, dim: usize, noise: &Option<Normal<f64>>, rng: &mut R) -> Vec<f64> {
    (0..dim)
        .map(|j| {
            let base = if j == block { 1.0 } else { 0.0 };
            base + noise.as_ref().map_or(0.0, |n| n.sample(rng))
        })
        .collect()
}

/// Connects nodes left without any edge to a random node of the same block.
fn patch_isolated<R: Rng>(degree: &mut [usize], members: &[Vec<usize>], block: &[usize], rng: &mut R) -> Vec<(usize, usize)> {
    let mut extra = Vec::new();
    for (i, d) in degree.iter_mut().enumerate() {
        if *d == 0 {
            if let Some(&j) = members[block[i]].choose(rng) {
                extra.push((i, j));
                *d += 1;
            }
        }
    }
    extra
}

fn ring_distance(a: f64, b: f64) -> f64 {
    let d = (a - b).abs();
    d.min(1.0 - d)
}

/// Two-type bipartite block graph; returns edges as (left index, right index).
fn bipartite_edges<R: Rng>(
    n: usize,
    left_block: &[usize],
    right_block: &[usize],
    left_pos: &[f64],
    right_pos: &[f64],
    cfg: &SyntheticConfig,
    rng: &mut R,
) -> Vec<(usize, usize)> {
    let mut edges = Vec::new();
    let mut left_deg = vec![0; n];
    let mut right_deg = vec![0; n];
    for i in 0..n {
        for j in 0..n {
            let p = if left_block[i] == right_block[j] {
                if cfg.locality > 0.0 {
                    let d = ring_distance(left_pos[i], right_pos[j]) / cfg.locality;
                    cfg.p_in * (-d * d).exp()
                } else {
                    cfg.p_in
                }
            } else {
                cfg.p_out
            };
            if rng.gen::<f64>() < p {
                edges.push((i, j));
                left_deg[i] += 1;
                right_deg[j] += 1;
            }
        }
    }
    let mut right_members = vec![Vec::new(); cfg.blocks];
    let mut left_members = vec![Vec::new(); cfg.blocks];
    for i in 0..n {
        right_members[right_block[i]].push(i);
        left_members[left_block[i]].push(i);
    }
    edges.extend(patch_isolated(&mut left_deg, &right_members, left_block, rng));
    let extra: Vec<_> = patch_isolated(&mut right_deg, &left_members, right_block, rng)
        .into_iter()
        .map(|(j, i)| (i, j))
        .collect();
    edges.extend(extra);
    edges
}

fn planted_classification(cfg: &SyntheticConfig) -> Dataset {
    let mut rng = rng::stream(cfg.seed, &[rng::DOMAIN_SYNTH, 1]);
    let n = cfg.nodes_per_type;
    let dim = cfg.blocks;
    let schema = Schema::new(&[("A", Some(dim)), ("P", Some(dim))], &[("ap", "A", "P", true)]).expect("static schema");
    let noise = (cfg.noise > 0.0).then(|| Normal::new(0.0, cfg.noise).expect("positive sigma"));
    let block: Vec<usize> = (0..n).map(|i| i % cfg.blocks).collect();

    let mut b = GraphBuilder::new(schema);
    for (i, &blk) in block.iter().enumerate() {
        let f = one_hot_noisy(blk, dim, &noise, &mut rng);
        b.add_node(&format!("a{i}"), "A", &f).expect("fresh node");
    }
    for (i, &blk) in block.iter().enumerate() {
        let f = one_hot_noisy(blk, dim, &noise, &mut rng);
        b.add_node(&format!("p{i}"), "P", &f).expect("fresh node");
    }
    let pos = vec![0.0; n];
    let ap = b.schema().edge_type_id("ap").expect("static");
    for (i, j) in bipartite_edges(n, &block, &block, &pos, &pos, cfg, &mut rng) {
        b.add_edge_ids(NodeId(i), NodeId(n + j), ap).expect("typed edge");
    }
    let graph = b.build();
    let labels = LabelTable::new((0..n).map(|i| (NodeId(i), block[i])).collect(), cfg.blocks).expect("valid labels");
    let s = graph.schema();
    let metapaths = vec![
        Metapath::from_names(s, "APA", &["A", "P", "A"], &["ap", "ap"]).expect("APA"),
        Metapath::from_names(s, "PAP", &["P", "A", "P"], &["ap", "ap"]).expect("PAP"),
    ];
    Dataset {
        graph,
        labels: Some(labels),
        metapaths,
    }
}

fn planted_bipartite(cfg: &SyntheticConfig) -> Dataset {
    let mut rng = rng::stream(cfg.seed, &[rng::DOMAIN_SYNTH, 2]);
    let n = cfg.nodes_per_type;
    let feature_dim = if cfg.noise > 0.0 { cfg.blocks } else { 0 };
    let schema = Schema::new(
        &[("U", Some(feature_dim)), ("I", Some(feature_dim))],
        &[("ui", "U", "I", true)],
    )
    .expect("static schema");
    let noise = (cfg.noise > 0.0).then(|| Normal::new(0.0, cfg.noise).expect("positive sigma"));
    let block: Vec<usize> = (0..n).map(|i| i % cfg.blocks).collect();
    let user_pos: Vec<f64> = (0..n).map(|_| rng.gen()).collect();
    let item_pos: Vec<f64> = (0..n).map(|_| rng.gen()).collect();

    let mut b = GraphBuilder::new(schema);
    for (i, &blk) in block.iter().enumerate() {
        let f = one_hot_noisy(blk, feature_dim, &noise, &mut rng);
        b.add_node(&format!("u{i}"), "U", &f).expect("fresh node");
    }
    for (i, &blk) in block.iter().enumerate() {
        let f = one_hot_noisy(blk, feature_dim, &noise, &mut rng);
        b.add_node(&format!("i{i}"), "I", &f).expect("fresh node");
    }
    let ui = b.schema().edge_type_id("ui").expect("static");
    for (i, j) in bipartite_edges(n, &block, &block, &user_pos, &item_pos, cfg, &mut rng) {
        b.add_edge_ids(NodeId(i), NodeId(n + j), ui).expect("typed edge");
    }
    let graph = b.build();
    let labels = LabelTable::new((0..n).map(|i| (NodeId(i), block[i])).collect(), cfg.blocks).expect("valid labels");
    let s = graph.schema();
    let metapaths = vec![
        Metapath::from_names(s, "UIU", &["U", "I", "U"], &["ui", "ui"]).expect("UIU"),
        Metapath::from_names(s, "IUI", &["I", "U", "I"], &["ui", "ui"]).expect("IUI"),
    ];
    Dataset {
        graph,
        labels: Some(labels),
        metapaths,
    }
}

/// Hubs per attribute value in the complementary graph.
const HUBS_PER_VALUE: usize = 4;
/// Hub links per node and attribute.
const HUB_LINKS: usize = 2;

/// Users and items each carry two binary traits. Trait `a` is visible only
/// through A-hubs, trait `b` only through B-hubs; a user-item link is likely
/// only when both traits agree.
fn planted_complementary(cfg: &SyntheticConfig) -> Dataset {
    let mut rng = rng::stream(cfg.seed, &[rng::DOMAIN_SYNTH, 3]);
    let n = cfg.nodes_per_type;
    let schema = Schema::new(
        &[("U", Some(0)), ("I", Some(0)), ("A", Some(0)), ("B", Some(0))],
        &[
            ("ui", "U", "I", true),
            ("ua", "U", "A", true),
            ("ia", "I", "A", true),
            ("ub", "U", "B", true),
            ("ib", "I", "B", true),
        ],
    )
    .expect("static schema");
    let traits = |i: usize| (i % 2, (i / 2) % 2);
    let mut b = GraphBuilder::new(schema);
    for i in 0..n {
        b.add_node(&format!("u{i}"), "U", &[]).expect("fresh node");
    }
    for i in 0..n {
        b.add_node(&format!("i{i}"), "I", &[]).expect("fresh node");
    }
    let hub_count = 2 * HUBS_PER_VALUE;
    for h in 0..hub_count {
        b.add_node(&format!("ha{h}"), "A", &[]).expect("fresh node");
    }
    for h in 0..hub_count {
        b.add_node(&format!("hb{h}"), "B", &[]).expect("fresh node");
    }
    let a_hub = |value: usize, k: usize| NodeId(2 * n + value * HUBS_PER_VALUE + k);
    let b_hub = |value: usize, k: usize| NodeId(2 * n + hub_count + value * HUBS_PER_VALUE + k);
    let et = |name: &str| b.schema().edge_type_id(name).expect("static");
    let (ui, ua, ia, ub, ib) = (et("ui"), et("ua"), et("ia"), et("ub"), et("ib"));

    let hubs: Vec<usize> = (0..HUBS_PER_VALUE).collect();
    for side in 0..2 {
        let (to_a, to_b) = if side == 0 { (ua, ub) } else { (ia, ib) };
        for i in 0..n {
            let node = NodeId(side * n + i);
            let (ta, tb) = traits(i);
            for &k in hubs.choose_multiple(&mut rng, HUB_LINKS) {
                b.add_edge_ids(node, a_hub(ta, k), to_a).expect("typed edge");
            }
            for &k in hubs.choose_multiple(&mut rng, HUB_LINKS) {
                b.add_edge_ids(node, b_hub(tb, k), to_b).expect("typed edge");
            }
        }
    }
    let mut user_deg = vec![0usize; n];
    for u in 0..n {
        for i in 0..n {
            let p = if traits(u) == traits(i) { cfg.p_in } else { cfg.p_out };
            if rng.gen::<f64>() < p {
                b.add_edge_ids(NodeId(u), NodeId(n + i), ui).expect("typed edge");
                user_deg[u] += 1;
            }
        }
    }
    let graph = b.build();
    let s = graph.schema();
    let metapaths = vec![
        Metapath::from_names(s, "UAI", &["U", "A", "I"], &["ua", "ia"]).expect("UAI"),
        Metapath::from_names(s, "UBI", &["U", "B", "I"], &["ub", "ib"]).expect("UBI"),
        Metapath::from_names(s, "IAU", &["I", "A", "U"], &["ia", "ua"]).expect("IAU"),
        Metapath::from_names(s, "IBU", &["I", "B", "U"], &["ib", "ub"]).expect("IBU"),
    ];
    let labels = LabelTable::new(
        (0..n).map(|i| (NodeId(i), traits(i).0 * 2 + traits(i).1)).collect(),
        4,
    )
    .expect("valid labels");
    Dataset {
        graph,
        labels: Some(labels),
        metapaths,
    }
}
