//! Typed heterogeneous graph: node types with optional attribute matrices,
//! edge types with an endpoint signature, and per-edge-type adjacency.
//!
//! A [`HeteroGraph`] is immutable once built and can be shared across
//! threads freely.

mod io;
mod labels;
mod schema;

use std::collections::{BTreeMap, HashMap};

use serde::Serialize;

use crate::diffgrad::Tensor;

pub(crate) use io::{data_lines, push_joined, read_text, write_text};
pub use io::{load_graph, load_graph_dir, read_edge_list, write_edge_list, write_graph};
pub use labels::{load_labels, write_labels, LabelTable};
pub use schema::{EdgeTypeDef, NodeTypeDef, Schema};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct NodeId(pub usize);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct NodeTypeId(pub usize);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct EdgeTypeId(pub usize);

#[derive(Debug, thiserror::Error)]
pub enum GraphError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },
    #[error("invalid schema: {0}")]
    Schema(String),
    #[error("unknown node type {0:?}")]
    UnknownNodeType(String),
    #[error("unknown edge type {0:?}")]
    UnknownEdgeType(String),
    #[error("unknown node {0:?}")]
    UnknownNode(String),
    #[error("duplicate node id {0:?}")]
    DuplicateNode(String),
    #[error("node {node:?} of type {node_type:?} has {got} features, expected {expected}")]
    FeatureDim {
        node: String,
        node_type: String,
        expected: usize,
        got: usize,
    },
    #[error("edge {src:?} -> {dst:?} does not match signature of edge type {edge_type:?}")]
    EndpointType {
        src: String,
        dst: String,
        edge_type: String,
    },
    #[error("node {node:?} labeled twice")]
    DuplicateLabel { node: String },
}

impl GraphError {
    /// Attaches a file position to errors raised while building from a file.
    pub(crate) fn at(self, path: &str, line: usize) -> GraphError {
        match self {
            GraphError::Parse { .. } | GraphError::Io { .. } => self,
            other => GraphError::Parse {
                path: path.to_string(),
                line,
                message: other.to_string(),
            },
        }
    }
}

/// Compressed adjacency of one edge type over all nodes.
#[derive(Clone, Debug, PartialEq)]
struct Adjacency {
    offsets: Vec<usize>,
    targets: Vec<NodeId>,
}

impl Adjacency {
    fn build(node_count: usize, pairs: impl Iterator<Item = (NodeId, NodeId)>) -> Self {
        let mut lists: Vec<Vec<NodeId>> = vec![Vec::new(); node_count];
        for (a, b) in pairs {
            lists[a.0].push(b);
        }
        let mut offsets = Vec::with_capacity(node_count + 1);
        let mut targets = Vec::new();
        offsets.push(0);
        for mut l in lists {
            l.sort_unstable();
            targets.extend(l);
            offsets.push(targets.len());
        }
        Self { offsets, targets }
    }

    fn of(&self, node: NodeId) -> &[NodeId] {
        &self.targets[self.offsets[node.0]..self.offsets[node.0 + 1]]
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct HeteroGraph {
    schema: Schema,
    names: Vec<String>,
    node_types: Vec<NodeTypeId>,
    local_index: Vec<usize>,
    by_type: Vec<Vec<NodeId>>,
    name_index: HashMap<String, NodeId>,
    features: Vec<Option<Tensor>>,
    edges: Vec<Vec<(NodeId, NodeId)>>,
    adjacency: Vec<Adjacency>,
}

impl HeteroGraph {
    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn node_count(&self) -> usize {
        self.names.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.iter().map(Vec::len).sum()
    }

    pub fn node(&self, name: &str) -> Result<NodeId, GraphError> {
        self.name_index
            .get(name)
            .copied()
            .ok_or_else(|| GraphError::UnknownNode(name.to_string()))
    }

    pub fn node_name(&self, node: NodeId) -> &str {
        &self.names[node.0]
    }

    pub fn node_names(&self) -> &[String] {
        &self.names
    }

    pub fn node_type(&self, node: NodeId) -> NodeTypeId {
        self.node_types[node.0]
    }

    /// Row of `node` in its type's feature matrix.
    pub fn local_index(&self, node: NodeId) -> usize {
        self.local_index[node.0]
    }

    pub fn nodes(&self) -> impl Iterator<Item = NodeId> {
        (0..self.names.len()).map(NodeId)
    }

    pub fn nodes_of_type(&self, t: NodeTypeId) -> &[NodeId] {
        &self.by_type[t.0]
    }

    /// Attribute matrix of a node type, or `None` when the type has no attributes.
    pub fn features(&self, t: NodeTypeId) -> Option<&Tensor> {
        self.features[t.0].as_ref()
    }

    pub fn node_features(&self, node: NodeId) -> Option<&[f64]> {
        self.features[self.node_type(node).0]
            .as_ref()
            .map(|f| f.row(self.local_index(node)))
    }

    /// Edges of one type exactly as added (duplicates kept).
    pub fn edges(&self, e: EdgeTypeId) -> &[(NodeId, NodeId)] {
        &self.edges[e.0]
    }

    /// Sorted neighbors of `node` through edge type `e`. For directed edge
    /// types these are out-neighbors.
    pub fn neighbors(&self, node: NodeId, e: EdgeTypeId) -> &[NodeId] {
        self.adjacency[e.0].of(node)
    }

    pub fn degree(&self, node: NodeId) -> usize {
        self.adjacency.iter().map(|a| a.of(node).len()).sum()
    }

    /// Whether an edge of type `e` connects `a` to `b` (either way when undirected).
    pub fn has_edge(&self, a: NodeId, b: NodeId, e: EdgeTypeId) -> bool {
        self.neighbors(a, e).binary_search(&b).is_ok()
    }

    /// Whether any edge type connects `a` and `b` in either direction.
    pub fn connected(&self, a: NodeId, b: NodeId) -> bool {
        (0..self.adjacency.len()).any(|e| {
            let e = EdgeTypeId(e);
            self.has_edge(a, b, e) || self.has_edge(b, a, e)
        })
    }

    /// Neighbor lookup by names, checking both.
    pub fn neighbors_by_name(&self, node: &str, edge_type: &str) -> Result<Vec<&str>, GraphError> {
        let n = self.node(node)?;
        let e = self.schema.edge_type_id(edge_type)?;
        Ok(self.neighbors(n, e).iter().map(|&v| self.node_name(v)).collect())
    }

    /// Structural summary of the graph.
    pub fn validate(&self) -> GraphReport {
        let node_counts = self
            .schema
            .node_types()
            .iter()
            .enumerate()
            .map(|(i, t)| (t.name.clone(), self.by_type[i].len()))
            .collect();
        let edge_counts = self
            .schema
            .edge_types()
            .iter()
            .enumerate()
            .map(|(i, t)| (t.name.clone(), self.edges[i].len()))
            .collect();
        let type_total = self.schema.node_types().len() + self.schema.edge_types().len();
        GraphReport {
            nodes: self.node_count(),
            edges: self.edge_count(),
            node_counts,
            edge_counts,
            node_type_count: self.schema.node_types().len(),
            edge_type_count: self.schema.edge_types().len(),
            heterogeneous: type_total > 2,
            isolated_nodes: self.nodes().filter(|&n| self.degree(n) == 0).count(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct GraphReport {
    pub nodes: usize,
    pub edges: usize,
    pub node_counts: BTreeMap<String, usize>,
    pub edge_counts: BTreeMap<String, usize>,
    pub node_type_count: usize,
    pub edge_type_count: usize,
    /// More than two node and edge types in total.
    pub heterogeneous: bool,
    pub isolated_nodes: usize,
}

/// Incremental construction of a [`HeteroGraph`].
#[derive(Debug)]
pub struct GraphBuilder {
    schema: Schema,
    names: Vec<String>,
    node_types: Vec<NodeTypeId>,
    local_index: Vec<usize>,
    by_type: Vec<Vec<NodeId>>,
    name_index: HashMap<String, NodeId>,
    feature_rows: Vec<Vec<f64>>,
    feature_dims: Vec<Option<usize>>,
    edges: Vec<Vec<(NodeId, NodeId)>>,
}

impl GraphBuilder {
    pub fn new(schema: Schema) -> Self {
        let nt = schema.node_types().len();
        let et = schema.edge_types().len();
        let feature_dims = schema.node_types().iter().map(|t| t.feature_dim).collect();
        Self {
            schema,
            names: Vec::new(),
            node_types: Vec::new(),
            local_index: Vec::new(),
            by_type: vec![Vec::new(); nt],
            name_index: HashMap::new(),
            feature_rows: vec![Vec::new(); nt],
            feature_dims,
            edges: vec![Vec::new(); et],
        }
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn add_node(&mut self, name: &str, node_type: &str, features: &[f64]) -> Result<NodeId, GraphError> {
        let t = self.schema.node_type_id(node_type)?;
        if self.name_index.contains_key(name) {
            return Err(GraphError::DuplicateNode(name.to_string()));
        }
        let expected = *self.feature_dims[t.0].get_or_insert(features.len());
        if expected != features.len() {
            return Err(GraphError::FeatureDim {
                node: name.to_string(),
                node_type: node_type.to_string(),
                expected,
                got: features.len(),
            });
        }
        let id = NodeId(self.names.len());
        self.names.push(name.to_string());
        self.node_types.push(t);
        self.local_index.push(self.by_type[t.0].len());
        self.by_type[t.0].push(id);
        self.name_index.insert(name.to_string(), id);
        self.feature_rows[t.0].extend_from_slice(features);
        Ok(id)
    }

    pub fn node(&self, name: &str) -> Result<NodeId, GraphError> {
        self.name_index
            .get(name)
            .copied()
            .ok_or_else(|| GraphError::UnknownNode(name.to_string()))
    }

    pub fn add_edge(&mut self, src: &str, dst: &str, edge_type: &str) -> Result<(), GraphError> {
        let e = self.schema.edge_type_id(edge_type)?;
        let (a, b) = (self.node(src)?, self.node(dst)?);
        self.add_edge_ids(a, b, e)
    }

    /// Adds an edge between existing nodes. Undirected edges given in the
    /// reverse orientation are stored in the declared one.
    pub fn add_edge_ids(&mut self, a: NodeId, b: NodeId, e: EdgeTypeId) -> Result<(), GraphError> {
        let def = &self.schema.edge_types()[e.0];
        let (ta, tb) = (self.node_types[a.0], self.node_types[b.0]);
        let pair = if ta == def.src && tb == def.dst {
            (a, b)
        } else if def.undirected && ta == def.dst && tb == def.src {
            (b, a)
        } else {
            return Err(GraphError::EndpointType {
                src: self.names[a.0].clone(),
                dst: self.names[b.0].clone(),
                edge_type: def.name.clone(),
            });
        };
        self.edges[e.0].push(pair);
        Ok(())
    }

    pub fn build(self) -> HeteroGraph {
        let n = self.names.len();
        let features = self
            .feature_rows
            .into_iter()
            .zip(&self.by_type)
            .zip(&self.feature_dims)
            .map(|((rows, members), dim)| match dim {
                Some(d) if *d > 0 => Some(Tensor::new(members.len(), *d, rows).expect("rows checked on insert")),
                _ => None,
            })
            .collect();
        let adjacency = self
            .edges
            .iter()
            .zip(self.schema.edge_types())
            .map(|(list, def)| {
                let forward = list.iter().copied();
                if def.undirected {
                    let backward = list.iter().filter(|(a, b)| a != b).map(|&(a, b)| (b, a));
                    Adjacency::build(n, forward.chain(backward))
                } else {
                    Adjacency::build(n, forward)
                }
            })
            .collect();
        let mut schema = self.schema;
        schema.set_feature_dims(&self.feature_dims);
        let graph = HeteroGraph {
            schema,
            names: self.names,
            node_types: self.node_types,
            local_index: self.local_index,
            by_type: self.by_type,
            name_index: self.name_index,
            features,
            edges: self.edges,
            adjacency,
        };
        let r = graph.validate();
        if !r.heterogeneous {
            log::warn!(
                "graph has {} node type(s) and {} edge type(s); it is not heterogeneous",
                r.node_type_count,
                r.edge_type_count
            );
        }
        graph
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthetic::figure1;

    #[test]
    fn figure1_counts() {
        let g = figure1();
        let r = g.validate();
        assert_eq!(r.node_counts["U"], 3);
        assert_eq!(r.node_counts["I"], 4);
        assert_eq!(r.edge_counts["ui"], 4);
        assert_eq!(r.edge_counts["ii"], 2);
        assert_eq!(r.nodes, 7);
        assert_eq!(r.edges, 6);
        assert_eq!(r.isolated_nodes, 0);
        assert!(r.heterogeneous);
    }

    #[test]
    fn figure1_neighbors() {
        let g = figure1();
        assert_eq!(g.neighbors_by_name("user1", "ui").unwrap(), vec!["item1", "item3"]);
        assert_eq!(g.neighbors_by_name("item1", "ii").unwrap(), vec!["item2"]);
        assert_eq!(g.neighbors_by_name("item2", "ii").unwrap(), vec!["item1"]);
        assert_eq!(g.neighbors_by_name("item1", "ui").unwrap(), vec!["user1"]);
    }

    #[test]
    fn isolated_node_has_no_neighbors() {
        let schema = Schema::from_json(
            r#"{"node_types":[{"name":"U"},{"name":"I"}],
                "edge_types":[{"name":"ui","src":"U","dst":"I","undirected":true}]}"#,
        )
        .unwrap();
        let mut b = GraphBuilder::new(schema);
        b.add_node("lonely", "U", &[]).unwrap();
        let g = b.build();
        let ui = g.schema().edge_type_id("ui").unwrap();
        assert!(g.neighbors(NodeId(0), ui).is_empty());
        assert_eq!(g.validate().isolated_nodes, 1);
    }

    #[test]
    fn single_node_is_not_heterogeneous() {
        let schema = Schema::from_json(r#"{"node_types":[{"name":"A"}],"edge_types":[]}"#).unwrap();
        let mut b = GraphBuilder::new(schema);
        b.add_node("a", "A", &[]).unwrap();
        let r = b.build().validate();
        assert_eq!((r.nodes, r.edges, r.isolated_nodes), (1, 0, 1));
        assert!(!r.heterogeneous);
    }

    #[test]
    fn directed_edges_are_one_way() {
        let schema = Schema::from_json(
            r#"{"node_types":[{"name":"A"},{"name":"B"}],
                "edge_types":[{"name":"ab","src":"A","dst":"B","undirected":false}]}"#,
        )
        .unwrap();
        let mut b = GraphBuilder::new(schema);
        b.add_node("a", "A", &[]).unwrap();
        b.add_node("b", "B", &[]).unwrap();
        b.add_edge("a", "b", "ab").unwrap();
        assert!(matches!(b.add_edge("b", "a", "ab"), Err(GraphError::EndpointType { .. })));
        let g = b.build();
        assert_eq!(g.neighbors_by_name("a", "ab").unwrap(), vec!["b"]);
        assert!(g.neighbors_by_name("b", "ab").unwrap().is_empty());
    }

    #[test]
    fn feature_dim_mismatch_within_type() {
        let schema = Schema::from_json(r#"{"node_types":[{"name":"A"}],"edge_types":[]}"#).unwrap();
        let mut b = GraphBuilder::new(schema);
        b.add_node("a", "A", &[1.0, 2.0]).unwrap();
        let err = b.add_node("b", "A", &[1.0]).unwrap_err();
        assert!(matches!(err, GraphError::FeatureDim { expected: 2, got: 1, .. }));
    }
}
