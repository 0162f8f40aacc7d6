use std::collections::{BTreeMap, HashMap};
use std::str::FromStr;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{Metapath, MetapathError};
use crate::hetgraph::{EdgeTypeId, HeteroGraph, NodeId, NodeTypeId, Schema};
use crate::rng;

/// Named filter applied to candidate type sequences.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum MetapathRule {
    /// Every node type of the schema occurs in the metapath.
    AllTypesPresent,
    StartsWith(String),
    EndsWith(String),
    /// Upper bound on the number of node types.
    MaxLength(usize),
    /// Lower bound on the number of node types.
    MinLength(usize),
    /// Node type sequence reads the same both ways.
    Palindrome,
}

impl FromStr for MetapathRule {
    type Err = MetapathError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || MetapathError::InvalidRule(s.to_string());
        let s = s.trim();
        let (name, arg) = match s.split_once('=') {
            Some((n, a)) => (n.trim(), Some(a.trim())),
            None => (s, None),
        };
        let length = |a: Option<&str>| a.and_then(|v| v.parse::<usize>().ok()).ok_or_else(bad);
        match (name, arg) {
            ("all-types", None) | ("all-types-present", None) => Ok(Self::AllTypesPresent),
            ("palindrome", None) => Ok(Self::Palindrome),
            ("starts-with", Some(t)) if !t.is_empty() => Ok(Self::StartsWith(t.to_string())),
            ("ends-with", Some(t)) if !t.is_empty() => Ok(Self::EndsWith(t.to_string())),
            ("max-length", a) => length(a).map(Self::MaxLength),
            ("min-length", a) => length(a).map(Self::MinLength),
            ("length", a) => Err(MetapathError::InvalidRule(format!(
                "{s} (use min-length={0},max-length={0})",
                a.unwrap_or("N")
            ))),
            _ => Err(bad()),
        }
    }
}

/// Parses a comma-separated rule list such as `starts-with=U,ends-with=U,max-length=4`.
pub fn parse_rules(text: &str) -> Result<Vec<MetapathRule>, MetapathError> {
    text.split(',')
        .filter(|r| !r.trim().is_empty())
        .map(MetapathRule::from_str)
        .collect()
}

impl MetapathRule {
    fn accepts(&self, schema: &Schema, types: &[NodeTypeId]) -> bool {
        let name = |t: NodeTypeId| schema.node_type_name(t);
        match self {
            Self::AllTypesPresent => (0..schema.node_types().len()).all(|t| types.contains(&NodeTypeId(t))),
            Self::StartsWith(t) => types.first().is_some_and(|&f| name(f) == t),
            Self::EndsWith(t) => types.last().is_some_and(|&l| name(l) == t),
            Self::MaxLength(n) => types.len() <= *n,
            Self::MinLength(n) => types.len() >= *n,
            Self::Palindrome => types.iter().eq(types.iter().rev()),
        }
    }
}

/// Which node types' occurrence counts form the score ratio. A missing type
/// counts as 1.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScoreConfig {
    pub numerator_type: Option<String>,
    pub denominator_type: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenerateConfig {
    /// Nodes per random walk.
    pub walk_len: usize,
    pub walks_per_node: usize,
    pub rules: Vec<MetapathRule>,
    pub score: ScoreConfig,
    pub top_k: usize,
    pub seed: u64,
}

impl Default for GenerateConfig {
    fn default() -> Self {
        Self {
            walk_len: 10,
            walks_per_node: 5,
            rules: Vec::new(),
            score: ScoreConfig::default(),
            top_k: 10,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MetapathScore {
    pub metapath: Metapath,
    /// Walk prefixes that mapped to this metapath.
    pub instance_count: usize,
    pub type_counts: BTreeMap<String, usize>,
    pub score: f64,
}

/// `ln(c) / (count_u / count_v)`.
pub fn score_metapath(c: usize, count_u: usize, count_v: usize) -> Result<f64, MetapathError> {
    if c == 0 {
        return Err(MetapathError::UndefinedScore("instance count is zero".into()));
    }
    if count_u == 0 || count_v == 0 {
        return Err(MetapathError::UndefinedScore(format!(
            "type counts {count_u}/{count_v} must both be positive"
        )));
    }
    Ok((c as f64).ln() / (count_u as f64 / count_v as f64))
}

type TypeKey = (Vec<NodeTypeId>, Vec<EdgeTypeId>);

fn random_walk(graph: &HeteroGraph, start: NodeId, len: usize, rng: &mut rng::StreamRng) -> TypeKey {
    let mut types = vec![graph.node_type(start)];
    let mut edges = Vec::new();
    let mut cur = start;
    let schema = graph.schema();
    while types.len() < len {
        let mut options: Vec<(NodeId, EdgeTypeId)> = Vec::new();
        for (e, _) in schema.outgoing(graph.node_type(cur)) {
            options.extend(graph.neighbors(cur, e).iter().map(|&n| (n, e)));
        }
        let Some(&(n, e)) = options.choose(rng) else {
            break;
        };
        types.push(graph.node_type(n));
        edges.push(e);
        cur = n;
    }
    (types, edges)
}

fn base_id(schema: &Schema, types: &[NodeTypeId]) -> String {
    let names: Vec<&str> = types.iter().map(|&t| schema.node_type_name(t)).collect();
    if names.iter().all(|n| n.chars().count() == 1) {
        names.concat()
    } else {
        names.join("-")
    }
}

/// Three-stage metapath discovery: unconstrained random walks, mapping of
/// walk prefixes to type sequences filtered by `rules`, and ranking by
/// [`score_metapath`]. Returns at most `top_k` entries, best first, ties
/// broken by id.
pub fn generate_metapaths(graph: &HeteroGraph, cfg: &GenerateConfig) -> Result<Vec<MetapathScore>, MetapathError> {
    if cfg.walk_len < 2 {
        return Err(MetapathError::Config("walk length must be at least 2".into()));
    }
    if cfg.top_k == 0 {
        return Err(MetapathError::Config("top-k must be at least 1".into()));
    }
    let schema = graph.schema();
    for rule in &cfg.rules {
        if let MetapathRule::StartsWith(t) | MetapathRule::EndsWith(t) = rule {
            schema.node_type_id(t)?;
        }
    }
    for t in [&cfg.score.numerator_type, &cfg.score.denominator_type].into_iter().flatten() {
        schema.node_type_id(t)?;
    }

    // Stage 1: walks; every prefix of two or more nodes is a candidate instance.
    let per_node: Vec<Vec<TypeKey>> = graph
        .nodes()
        .collect::<Vec<_>>()
        .par_iter()
        .map(|&n| {
            let mut rng = rng::stream(cfg.seed, &[rng::DOMAIN_WALKS, n.0 as u64]);
            (0..cfg.walks_per_node)
                .map(|_| random_walk(graph, n, cfg.walk_len, &mut rng))
                .collect()
        })
        .collect();

    // Stage 2: collapse to type sequences and filter.
    let mut counts: BTreeMap<TypeKey, usize> = BTreeMap::new();
    for walks in &per_node {
        for (types, edges) in walks {
            for l in 2..=types.len() {
                *counts.entry((types[..l].to_vec(), edges[..l - 1].to_vec())).or_default() += 1;
            }
        }
    }
    let survivors: Vec<(TypeKey, usize)> = counts
        .into_iter()
        .filter(|((types, _), _)| cfg.rules.iter().all(|r| r.accepts(schema, types)))
        .collect();

    let mut by_base: HashMap<String, usize> = HashMap::new();
    for ((types, _), _) in &survivors {
        *by_base.entry(base_id(schema, types)).or_default() += 1;
    }

    // Stage 3: score and rank.
    let lookup = |name: &Option<String>| -> Result<Option<NodeTypeId>, MetapathError> {
        name.as_deref().map(|n| schema.node_type_id(n)).transpose().map_err(Into::into)
    };
    let num = lookup(&cfg.score.numerator_type)?;
    let den = lookup(&cfg.score.denominator_type)?;
    let occurrences = |types: &[NodeTypeId], t: Option<NodeTypeId>| match t {
        Some(t) => types.iter().filter(|&&x| x == t).count(),
        None => 1,
    };

    let mut scored = Vec::new();
    for ((types, edges), c) in survivors {
        let base = base_id(schema, &types);
        let id = if by_base[&base] > 1 {
            let e: Vec<&str> = edges.iter().map(|&e| schema.edge_type(e).name.as_str()).collect();
            format!("{base}[{}]", e.join(","))
        } else {
            base
        };
        let score = match score_metapath(c, occurrences(&types, num), occurrences(&types, den)) {
            Ok(s) => s,
            Err(e) => {
                log::debug!("dropping {id}: {e}");
                continue;
            }
        };
        let mut type_counts = BTreeMap::new();
        for &t in &types {
            *type_counts.entry(schema.node_type_name(t).to_string()).or_default() += 1;
        }
        scored.push(MetapathScore {
            metapath: Metapath::from_ids(schema, id, types, edges)?,
            instance_count: c,
            type_counts,
            score,
        });
    }
    scored.sort_by(|a, b| {
        b.score
            .total_cmp(&a.score)
            .then_with(|| a.metapath.id().cmp(b.metapath.id()))
    });
    scored.truncate(cfg.top_k);
    if scored.is_empty() {
        log::warn!("no metapath survived the rule filters");
    }
    Ok(scored)
}
