use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{EdgeTypeId, GraphError, NodeTypeId};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NodeTypeDef {
    pub name: String,
    /// `None` until declared or inferred from the first node of the type.
    pub feature_dim: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EdgeTypeDef {
    pub name: String,
    pub src: NodeTypeId,
    pub dst: NodeTypeId,
    pub undirected: bool,
}

/// Node and edge type declarations.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Schema {
    node_types: Vec<NodeTypeDef>,
    edge_types: Vec<EdgeTypeDef>,
    node_index: HashMap<String, NodeTypeId>,
    edge_index: HashMap<String, EdgeTypeId>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawNodeType {
    name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    feature_dim: Option<usize>,
}

fn default_undirected() -> bool {
    true
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEdgeType {
    name: String,
    src: String,
    dst: String,
    #[serde(default = "default_undirected")]
    undirected: bool,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSchema {
    node_types: Vec<RawNodeType>,
    #[serde(default)]
    edge_types: Vec<RawEdgeType>,
}

impl Schema {
    /// `edge_types` are `(name, src type, dst type, undirected)`.
    pub fn new(
        node_types: &[(&str, Option<usize>)],
        edge_types: &[(&str, &str, &str, bool)],
    ) -> Result<Self, GraphError> {
        let raw = RawSchema {
            node_types: node_types
                .iter()
                .map(|(n, d)| RawNodeType {
                    name: n.to_string(),
                    feature_dim: *d,
                })
                .collect(),
            edge_types: edge_types
                .iter()
                .map(|(n, s, d, u)| RawEdgeType {
                    name: n.to_string(),
                    src: s.to_string(),
                    dst: d.to_string(),
                    undirected: *u,
                })
                .collect(),
        };
        Self::from_raw(raw)
    }

    pub fn from_json(text: &str) -> Result<Self, GraphError> {
        let raw: RawSchema = serde_json::from_str(text).map_err(|e| GraphError::Schema(e.to_string()))?;
        Self::from_raw(raw)
    }

    fn from_raw(raw: RawSchema) -> Result<Self, GraphError> {
        let mut node_index = HashMap::new();
        let mut node_types = Vec::new();
        for (i, t) in raw.node_types.into_iter().enumerate() {
            if t.name.is_empty() || t.name.contains(char::is_whitespace) {
                return Err(GraphError::Schema(format!("bad node type name {:?}", t.name)));
            }
            if node_index.insert(t.name.clone(), NodeTypeId(i)).is_some() {
                return Err(GraphError::Schema(format!("node type {:?} declared twice", t.name)));
            }
            node_types.push(NodeTypeDef {
                name: t.name,
                feature_dim: t.feature_dim,
            });
        }
        let mut edge_index = HashMap::new();
        let mut edge_types = Vec::new();
        for (i, e) in raw.edge_types.into_iter().enumerate() {
            let resolve = |n: &str| {
                node_index
                    .get(n)
                    .copied()
                    .ok_or_else(|| GraphError::UnknownNodeType(n.to_string()))
            };
            let (src, dst) = (resolve(&e.src)?, resolve(&e.dst)?);
            if edge_index.insert(e.name.clone(), EdgeTypeId(i)).is_some() {
                return Err(GraphError::Schema(format!("edge type {:?} declared twice", e.name)));
            }
            edge_types.push(EdgeTypeDef {
                name: e.name,
                src,
                dst,
                undirected: e.undirected,
            });
        }
        Ok(Self {
            node_types,
            edge_types,
            node_index,
            edge_index,
        })
    }

    pub fn to_json(&self) -> String {
        let raw = RawSchema {
            node_types: self
                .node_types
                .iter()
                .map(|t| RawNodeType {
                    name: t.name.clone(),
                    feature_dim: t.feature_dim,
                })
                .collect(),
            edge_types: self
                .edge_types
                .iter()
                .map(|e| RawEdgeType {
                    name: e.name.clone(),
                    src: self.node_types[e.src.0].name.clone(),
                    dst: self.node_types[e.dst.0].name.clone(),
                    undirected: e.undirected,
                })
                .collect(),
        };
        serde_json::to_string_pretty(&raw).expect("schema serializes")
    }

    /// SHA-256 of the canonical JSON form.
    pub fn digest(&self) -> String {
        hex::encode(Sha256::digest(self.to_json().as_bytes()))
    }

    pub fn node_types(&self) -> &[NodeTypeDef] {
        &self.node_types
    }

    pub fn edge_types(&self) -> &[EdgeTypeDef] {
        &self.edge_types
    }

    pub fn node_type_id(&self, name: &str) -> Result<NodeTypeId, GraphError> {
        self.node_index
            .get(name)
            .copied()
            .ok_or_else(|| GraphError::UnknownNodeType(name.to_string()))
    }

    pub fn edge_type_id(&self, name: &str) -> Result<EdgeTypeId, GraphError> {
        self.edge_index
            .get(name)
            .copied()
            .ok_or_else(|| GraphError::UnknownEdgeType(name.to_string()))
    }

    pub fn node_type_name(&self, t: NodeTypeId) -> &str {
        &self.node_types[t.0].name
    }

    pub fn edge_type(&self, e: EdgeTypeId) -> &EdgeTypeDef {
        &self.edge_types[e.0]
    }

    /// Feature dimension of a node type; 0 when it carries no attributes.
    pub fn feature_dim(&self, t: NodeTypeId) -> usize {
        self.node_types[t.0].feature_dim.unwrap_or(0)
    }

    /// Whether traversing `e` from a node of type `from` lands on type `to`.
    pub fn connects(&self, e: EdgeTypeId, from: NodeTypeId, to: NodeTypeId) -> bool {
        let d = &self.edge_types[e.0];
        (d.src == from && d.dst == to) || (d.undirected && d.src == to && d.dst == from)
    }

    /// Edge types traversable out of a node of type `from`, with the type reached.
    pub fn outgoing(&self, from: NodeTypeId) -> Vec<(EdgeTypeId, NodeTypeId)> {
        let mut out = Vec::new();
        for (i, d) in self.edge_types.iter().enumerate() {
            if d.src == from {
                out.push((EdgeTypeId(i), d.dst));
            } else if d.undirected && d.dst == from {
                out.push((EdgeTypeId(i), d.src));
            }
        }
        out
    }

    pub(super) fn set_feature_dims(&mut self, dims: &[Option<usize>]) {
        for (t, d) in self.node_types.iter_mut().zip(dims) {
            t.feature_dim = Some(d.unwrap_or(0));
        }
    }
}
