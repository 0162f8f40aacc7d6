use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::ModelConfig;
use super::model::MhnModel;
use super::ModelError;
use crate::diffgrad::Tensor;
use crate::hetgraph::{GraphError, HeteroGraph};
use crate::metapath::{Metapath, MetapathSpec};

pub const CHECKPOINT_FORMAT: &str = "mhn-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NamedTensor {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

/// JSON container for a trained model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub config: ModelConfig,
    pub metapaths: Vec<MetapathSpec>,
    pub node_count: usize,
    pub schema_digest: String,
    pub num_classes: Option<usize>,
    pub tensors: Vec<NamedTensor>,
}

impl MhnModel {
    pub fn to_checkpoint(&self, graph: &HeteroGraph) -> Checkpoint {
        Checkpoint {
            format: CHECKPOINT_FORMAT.into(),
            version: CHECKPOINT_VERSION,
            config: self.config.clone(),
            metapaths: self.metapaths.iter().map(|m| m.to_spec(graph.schema())).collect(),
            node_count: self.node_count,
            schema_digest: self.schema_digest.clone(),
            num_classes: self.num_classes,
            tensors: self
                .params
                .iter()
                .map(|(_, name, t)| NamedTensor {
                    name: name.to_string(),
                    rows: t.rows(),
                    cols: t.cols(),
                    data: t.data().to_vec(),
                })
                .collect(),
        }
    }

    /// Rebuilds a model for `graph`; fails if the checkpoint was made for a
    /// different graph or its tensors do not fit the declared config.
    pub fn from_checkpoint(ckpt: &Checkpoint, graph: &HeteroGraph) -> Result<Self, ModelError> {
        if ckpt.format != CHECKPOINT_FORMAT || ckpt.version != CHECKPOINT_VERSION {
            return Err(ModelError::Checkpoint(format!(
                "unsupported checkpoint {} v{}",
                ckpt.format, ckpt.version
            )));
        }
        if ckpt.node_count != graph.node_count() {
            return Err(ModelError::Mismatch(format!(
                "checkpoint has {} nodes, graph has {}",
                ckpt.node_count,
                graph.node_count()
            )));
        }
        if ckpt.schema_digest != graph.schema().digest() {
            return Err(ModelError::Mismatch("schema digest differs from the checkpoint's".into()));
        }
        let metapaths = ckpt
            .metapaths
            .iter()
            .map(|s| Metapath::from_spec(graph.schema(), s))
            .collect::<Result<Vec<_>, _>>()?;
        let mut model = MhnModel::new(graph, metapaths, ckpt.config.clone(), ckpt.num_classes)?;
        if model.params.len() != ckpt.tensors.len() {
            return Err(ModelError::Checkpoint(format!(
                "expected {} tensors, found {}",
                model.params.len(),
                ckpt.tensors.len()
            )));
        }
        for t in &ckpt.tensors {
            let id = model
                .params
                .id(&t.name)
                .ok_or_else(|| ModelError::Checkpoint(format!("unexpected tensor {:?}", t.name)))?;
            let value = Tensor::new(t.rows, t.cols, t.data.clone())?;
            if value.shape() != model.params.get(id).shape() {
                return Err(ModelError::Checkpoint(format!(
                    "tensor {:?} has shape {:?}, expected {:?}",
                    t.name,
                    value.shape(),
                    model.params.get(id).shape()
                )));
            }
            if !value.is_finite() {
                return Err(ModelError::Checkpoint(format!("tensor {:?} is not finite", t.name)));
            }
            *model.params.get_mut(id) = value;
        }
        Ok(model)
    }

    pub fn save(&self, graph: &HeteroGraph, path: &Path) -> Result<(), ModelError> {
        let text = serde_json::to_string(&self.to_checkpoint(graph)).expect("checkpoint serializes") + "\n";
        write_atomic(path, &text)
    }

    pub fn load(path: &Path, graph: &HeteroGraph) -> Result<Self, ModelError> {
        Self::from_checkpoint(&read_checkpoint(path)?, graph)
    }
}

pub fn read_checkpoint(path: &Path) -> Result<Checkpoint, ModelError> {
    let text = crate::hetgraph::read_text(path)?;
    serde_json::from_str(&text).map_err(|e| ModelError::Checkpoint(format!("{}: {e}", path.display())))
}

/// Writes to a sibling temp file, then renames over `path`.
pub(crate) fn write_atomic(path: &Path, text: &str) -> Result<(), ModelError> {
    let tmp = path.with_extension("tmp");
    let io = |source| GraphError::Io {
        path: path.display().to_string(),
        source,
    };
    std::fs::write(&tmp, text).map_err(io)?;
    std::fs::rename(&tmp, path).map_err(io)?;
    Ok(())
}

/// `node_id<TAB>v1,...,vd` per node, in node-id order.
pub fn write_embeddings(graph: &HeteroGraph, values: &Tensor, path: &Path) -> Result<(), ModelError> {
    if values.rows() != graph.node_count() {
        return Err(ModelError::Mismatch(format!(
            "{} embedding rows for {} nodes",
            values.rows(),
            graph.node_count()
        )));
    }
    let mut out = String::new();
    for (i, name) in graph.node_names().iter().enumerate() {
        let _ = write!(out, "{name}\t");
        crate::hetgraph::push_joined(&mut out, values.row(i));
        out.push('\n');
    }
    write_atomic(path, &out)
}

/// Reads an embeddings file; every graph node must appear exactly once.
pub fn read_embeddings(graph: &HeteroGraph, path: &Path) -> Result<Tensor, ModelError> {
    let text = crate::hetgraph::read_text(path)?;
    let name = path.display().to_string();
    let parse_err = |line: usize, message: String| {
        ModelError::Graph(GraphError::Parse {
            path: name.clone(),
            line,
            message,
        })
    };
    let mut rows: Vec<Option<Vec<f64>>> = vec![None; graph.node_count()];
    let mut dim = None;
    for (line, l) in crate::hetgraph::data_lines(&text) {
        let (id, vals) = l
            .split_once('\t')
            .ok_or_else(|| parse_err(line, "expected node id and values".into()))?;
        let node = graph.node(id).map_err(|e| parse_err(line, e.to_string()))?;
        let v = vals
            .split(',')
            .map(|x| x.trim().parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| parse_err(line, e.to_string()))?;
        if *dim.get_or_insert(v.len()) != v.len() {
            return Err(parse_err(line, "inconsistent embedding dimension".into()));
        }
        if rows[node.0].replace(v).is_some() {
            return Err(parse_err(line, format!("duplicate node {id:?}")));
        }
    }
    let dim = dim.unwrap_or(0);
    let mut data = Vec::with_capacity(graph.node_count() * dim);
    for (i, r) in rows.into_iter().enumerate() {
        let r = r.ok_or_else(|| ModelError::Mismatch(format!("no embedding for {:?}", graph.node_name(crate::hetgraph::NodeId(i)))))?;
        data.extend(r);
    }
    Ok(Tensor::new(graph.node_count(), dim, data)?)
}
