//! Metapaths over a typed schema, instance sampling with metapath-based
//! BFS/DFS neighbor extraction, and random-walk metapath discovery.

mod generate;
mod sample;

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::hetgraph::{EdgeTypeId, GraphError, HeteroGraph, NodeId, NodeTypeId, Schema};

pub use generate::{
    generate_metapaths, parse_rules, score_metapath, GenerateConfig, MetapathRule, MetapathScore, ScoreConfig,
};
pub use sample::{
    bfs_neighbors, dfs_neighbors, dfs_neighbors_multi, enumerate_instances, sample_instances,
    sample_neighborhood, seeded_neighborhood, NeighborSample, SamplingConfig,
};

#[derive(Debug, thiserror::Error)]
pub enum MetapathError {
    #[error("invalid metapath {id:?}: {reason}")]
    Invalid { id: String, reason: String },
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("{path}: {message}")]
    Json { path: String, message: String },
    #[error("score undefined: {0}")]
    UndefinedScore(String),
    #[error("invalid rule {0:?}")]
    InvalidRule(String),
    #[error("invalid generation config: {0}")]
    Config(String),
}

/// Alternating node/edge type pattern `A1 -R1-> A2 ... -Rl-> A(l+1)`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Metapath {
    id: String,
    node_types: Vec<NodeTypeId>,
    edge_types: Vec<EdgeTypeId>,
}

/// Concrete node sequence matching a metapath.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MetapathInstance {
    pub nodes: Vec<NodeId>,
}

/// File form of a metapath (`metapaths.json` entries).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetapathSpec {
    pub id: String,
    pub node_types: Vec<String>,
    pub edge_types: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub score: Option<f64>,
}

impl Metapath {
    pub fn from_ids(
        schema: &Schema,
        id: impl Into<String>,
        node_types: Vec<NodeTypeId>,
        edge_types: Vec<EdgeTypeId>,
    ) -> Result<Self, MetapathError> {
        let id = id.into();
        let invalid = |reason: String| MetapathError::Invalid {
            id: id.clone(),
            reason,
        };
        if node_types.len() < 2 {
            return Err(invalid("needs at least two node types".into()));
        }
        if edge_types.len() + 1 != node_types.len() {
            return Err(invalid(format!(
                "{} node types need {} edge types, got {}",
                node_types.len(),
                node_types.len() - 1,
                edge_types.len()
            )));
        }
        for (i, &e) in edge_types.iter().enumerate() {
            let (a, b) = (node_types[i], node_types[i + 1]);
            if !schema.connects(e, a, b) {
                return Err(invalid(format!(
                    "edge type {:?} does not connect {:?} to {:?}",
                    schema.edge_type(e).name,
                    schema.node_type_name(a),
                    schema.node_type_name(b)
                )));
            }
        }
        Ok(Self {
            id,
            node_types,
            edge_types,
        })
    }

    pub fn from_spec(schema: &Schema, spec: &MetapathSpec) -> Result<Self, MetapathError> {
        let node_types = spec
            .node_types
            .iter()
            .map(|n| schema.node_type_id(n))
            .collect::<Result<Vec<_>, _>>()?;
        let edge_types = spec
            .edge_types
            .iter()
            .map(|n| schema.edge_type_id(n))
            .collect::<Result<Vec<_>, _>>()?;
        Self::from_ids(schema, spec.id.clone(), node_types, edge_types)
    }

    /// Parses names, e.g. `(["U","I","I","U"], ["ui","ii","ui"])`.
    pub fn from_names(schema: &Schema, id: &str, node_types: &[&str], edge_types: &[&str]) -> Result<Self, MetapathError> {
        Self::from_spec(
            schema,
            &MetapathSpec {
                id: id.to_string(),
                node_types: node_types.iter().map(|s| s.to_string()).collect(),
                edge_types: edge_types.iter().map(|s| s.to_string()).collect(),
                score: None,
            },
        )
    }

    pub fn to_spec(&self, schema: &Schema) -> MetapathSpec {
        MetapathSpec {
            id: self.id.clone(),
            node_types: self
                .node_types
                .iter()
                .map(|&t| schema.node_type_name(t).to_string())
                .collect(),
            edge_types: self
                .edge_types
                .iter()
                .map(|&e| schema.edge_type(e).name.clone())
                .collect(),
            score: None,
        }
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn node_types(&self) -> &[NodeTypeId] {
        &self.node_types
    }

    pub fn edge_types(&self) -> &[EdgeTypeId] {
        &self.edge_types
    }

    /// Number of node types in the pattern.
    pub fn len(&self) -> usize {
        self.node_types.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn start_type(&self) -> NodeTypeId {
        self.node_types[0]
    }

    /// Whether `nodes` conforms to this metapath in `graph`.
    pub fn matches(&self, graph: &HeteroGraph, nodes: &[NodeId]) -> bool {
        nodes.len() == self.len()
            && nodes
                .iter()
                .zip(&self.node_types)
                .all(|(&n, &t)| graph.node_type(n) == t)
            && nodes
                .windows(2)
                .zip(&self.edge_types)
                .all(|(w, &e)| graph.has_edge(w[0], w[1], e))
    }
}

pub fn parse_metapaths(schema: &Schema, text: &str, origin: &str) -> Result<Vec<Metapath>, MetapathError> {
    let specs: Vec<MetapathSpec> = serde_json::from_str(text).map_err(|e| MetapathError::Json {
        path: origin.to_string(),
        message: e.to_string(),
    })?;
    let mut seen = std::collections::HashSet::new();
    specs
        .iter()
        .map(|s| {
            if !seen.insert(s.id.clone()) {
                return Err(MetapathError::Invalid {
                    id: s.id.clone(),
                    reason: "duplicate id".into(),
                });
            }
            Metapath::from_spec(schema, s)
        })
        .collect()
}

pub fn load_metapaths(schema: &Schema, path: &Path) -> Result<Vec<Metapath>, MetapathError> {
    let text = std::fs::read_to_string(path).map_err(|source| GraphError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_metapaths(schema, &text, &path.display().to_string())
}

/// Pretty JSON array of metapaths, with optional per-entry scores.
pub fn metapaths_to_json(schema: &Schema, metapaths: &[Metapath], scores: Option<&[f64]>) -> String {
    let specs: Vec<MetapathSpec> = metapaths
        .iter()
        .enumerate()
        .map(|(i, m)| MetapathSpec {
            score: scores.map(|s| s[i]),
            ..m.to_spec(schema)
        })
        .collect();
    serde_json::to_string_pretty(&specs).expect("metapaths serialize") + "\n"
}
