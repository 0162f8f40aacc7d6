use rand::Rng;
use rayon::prelude::*;

use super::config::{EncoderKind, FusionMode, ModelConfig};
use super::layers::{self, HeadParams};
use super::ops::{self, Segments};
use super::ModelError;
use crate::diffgrad::{ParamId, ParamStore, Tape, Tensor, Var};
use crate::hetgraph::{HeteroGraph, NodeId, NodeTypeId};
use crate::metapath::{seeded_neighborhood, Metapath, NeighborSample};
use crate::rng;

/// Ids of the trainable tensors inside the model's [`ParamStore`].
#[derive(Clone, Debug, PartialEq)]
pub(crate) struct ParamIds {
    pub embedding: ParamId,
    /// Per node type; `None` for types without attributes.
    pub attr: Vec<Option<ParamId>>,
    /// Per metapath; only for the nonlinear encoder.
    pub encoder: Vec<Option<ParamId>>,
    pub query: Option<ParamId>,
    pub heads: Vec<[ParamId; 3]>,
    pub output: ParamId,
    pub classifier: Option<ParamId>,
}

/// Neighbor samples for every (metapath, start node) pair of one epoch.
#[derive(Clone, Debug, PartialEq)]
pub struct SamplingPlan {
    pub epoch: u64,
    /// Indexed like the model's metapaths; entries follow
    /// `graph.nodes_of_type(start_type)`.
    pub samples: Vec<Vec<NeighborSample>>,
}

impl SamplingPlan {
    pub fn sample(&self, metapath: usize, node: NodeId) -> Option<&NeighborSample> {
        self.samples.get(metapath)?.iter().find(|s| s.target == node)
    }
}

/// Per-node view of one forward pass.
#[derive(Clone, Debug, PartialEq)]
pub struct ForwardTrace {
    pub node: NodeId,
    /// Metapaths starting at the node's type, in model order.
    pub metapaths: Vec<String>,
    pub active: Vec<bool>,
    pub bfs: Vec<Vec<NodeId>>,
    pub dfs: Vec<Vec<NodeId>>,
    /// `h_u^p` per metapath.
    pub metapath_vectors: Vec<Vec<f64>>,
    /// `(alpha_bfs, alpha_dfs)` per metapath; zeros when inactive.
    pub alpha: Vec<[f64; 2]>,
    /// Metapath weights; `None` in multi-head mode.
    pub beta: Option<Vec<f64>>,
    pub z: Vec<f64>,
}

/// Intermediate values for the nodes of one type.
#[derive(Clone, Debug)]
struct TypeBlock {
    nodes: Vec<NodeId>,
    metapaths: Vec<usize>,
    hp: Vec<Var>,
    alpha: Vec<Var>,
    beta: Option<Var>,
    /// `active[row][k]` for metapath `metapaths[k]`.
    active: Vec<Vec<bool>>,
    z: Var,
}

/// Result of [`MhnModel::forward_tape`].
#[derive(Clone, Debug)]
pub struct ForwardOutput {
    /// `|V| x d` output embeddings in node-id order.
    pub z: Var,
    /// Whether a node got at least one non-empty metapath neighborhood.
    /// Unreachable nodes carry the output layer applied to their base
    /// embedding instead.
    pub reachable: Vec<bool>,
    blocks: Vec<TypeBlock>,
    /// `(block, row)` for nodes whose type starts a metapath.
    position: Vec<Option<(usize, usize)>>,
}

/// Sampling epoch used for validation and inference, distinct from every
/// training epoch.
pub const INFERENCE_EPOCH: u64 = u64::MAX;

/// Output embeddings of every node.
#[derive(Clone, Debug, PartialEq)]
pub struct Embeddings {
    pub values: Tensor,
    pub reachable: Vec<bool>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MhnModel {
    pub(crate) config: ModelConfig,
    pub(crate) metapaths: Vec<Metapath>,
    pub(crate) params: ParamStore,
    pub(crate) ids: ParamIds,
    pub(crate) node_count: usize,
    pub(crate) schema_digest: String,
    pub(crate) num_classes: Option<usize>,
}

fn xavier(rows: usize, cols: usize, seed: u64, name: &str) -> Tensor {
    let bound = (6.0 / (rows + cols) as f64).sqrt();
    let mut rng = rng::stream(seed, &[rng::DOMAIN_INIT, rng::tag(name)]);
    let data = (0..rows * cols).map(|_| rng.gen_range(-bound..=bound)).collect();
    Tensor::new(rows, cols, data).expect("sized buffer")
}

impl MhnModel {
    /// Fresh model for `graph`. `num_classes` adds a classification head.
    pub fn new(
        graph: &HeteroGraph,
        metapaths: Vec<Metapath>,
        config: ModelConfig,
        num_classes: Option<usize>,
    ) -> Result<Self, ModelError> {
        config.validate().map_err(ModelError::Config)?;
        if metapaths.is_empty() {
            return Err(ModelError::Config("at least one metapath is required".into()));
        }
        let mut seen = std::collections::HashSet::new();
        for m in &metapaths {
            if !seen.insert(m.id()) {
                return Err(ModelError::Config(format!("duplicate metapath id {:?}", m.id())));
            }
            // re-validate against this graph's schema
            Metapath::from_ids(graph.schema(), m.id(), m.node_types().to_vec(), m.edge_types().to_vec())?;
        }
        if num_classes == Some(0) {
            return Err(ModelError::Config("classifier needs at least one class".into()));
        }
        let d = config.dim;
        let seed = config.seed;
        let schema = graph.schema();
        let mut store = ParamStore::new();
        let add = |store: &mut ParamStore, name: String, rows: usize, cols: usize| {
            let t = xavier(rows, cols, seed, &name);
            store.insert(name, t)
        };

        let embedding = add(&mut store, "embedding.id".into(), graph.node_count(), d)?;
        let mut attr = Vec::new();
        for (t, def) in schema.node_types().iter().enumerate() {
            let f = schema.feature_dim(NodeTypeId(t));
            attr.push(if f > 0 {
                Some(add(&mut store, format!("attr.{}", def.name), d, f)?)
            } else {
                None
            });
        }
        let mut encoder = Vec::new();
        for m in &metapaths {
            encoder.push(if config.encoder == EncoderKind::Nonlinear {
                Some(add(&mut store, format!("encoder.{}.weight", m.id()), d, d)?)
            } else {
                None
            });
        }
        let mut query = None;
        let mut heads = Vec::new();
        match config.fusion {
            FusionMode::MetapathAttention => {
                query = Some(add(&mut store, "attention.query".into(), 1, d)?);
            }
            FusionMode::MultiHead => {
                let dk = config.head_dim();
                for k in 0..config.heads {
                    let mut ids = [ParamId(0); 3];
                    for (slot, part) in ["query", "key", "value"].iter().enumerate() {
                        ids[slot] = add(&mut store, format!("mhsa.head{k}.{part}"), d, dk)?;
                    }
                    heads.push(ids);
                }
            }
        }
        let output = add(&mut store, "output.weight".into(), d, d)?;
        let classifier = match num_classes {
            Some(c) => Some(add(&mut store, "classifier.weight".into(), c, d)?),
            None => None,
        };
        Ok(Self {
            config,
            metapaths,
            params: store,
            ids: ParamIds {
                embedding,
                attr,
                encoder,
                query,
                heads,
                output,
                classifier,
            },
            node_count: graph.node_count(),
            schema_digest: schema.digest(),
            num_classes,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn metapaths(&self) -> &[Metapath] {
        &self.metapaths
    }

    pub fn params(&self) -> &ParamStore {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.params
    }

    pub fn num_classes(&self) -> Option<usize> {
        self.num_classes
    }

    pub fn dim(&self) -> usize {
        self.config.dim
    }

    pub fn classifier_param(&self) -> Option<ParamId> {
        self.ids.classifier
    }

    /// Fails if `graph` is not the graph this model was built for.
    pub fn check_graph(&self, graph: &HeteroGraph) -> Result<(), ModelError> {
        if graph.node_count() != self.node_count {
            return Err(ModelError::Mismatch(format!(
                "model has {} nodes, graph has {}",
                self.node_count,
                graph.node_count()
            )));
        }
        let digest = graph.schema().digest();
        if digest != self.schema_digest {
            return Err(ModelError::Mismatch("schema digest differs from the model's".into()));
        }
        Ok(())
    }

    /// Draws neighbor samples for every metapath and start node. Each
    /// (epoch, node, metapath) pair has its own random stream, so the plan
    /// does not depend on thread count or metapath order.
    pub fn sampling_plan(&self, graph: &HeteroGraph, epoch: u64) -> SamplingPlan {
        let epoch = if self.config.freeze_sampling { 0 } else { epoch };
        let cfg = self.config.sampling;
        let seed = self.config.seed;
        let samples = self
            .metapaths
            .iter()
            .map(|mp| {
                graph
                    .nodes_of_type(mp.start_type())
                    .par_iter()
                    .map(|&u| seeded_neighborhood(graph, u, mp, &cfg, seed, epoch))
                    .collect()
            })
            .collect();
        SamplingPlan { epoch, samples }
    }

    /// Records the full forward pass for every node, reading parameters from
    /// `store` (the model's own store or a perturbed copy).
    pub fn forward_tape(
        &self,
        tape: &mut Tape,
        store: &ParamStore,
        graph: &HeteroGraph,
        plan: &SamplingPlan,
    ) -> Result<ForwardOutput, ModelError> {
        self.check_graph(graph)?;
        if plan.samples.len() != self.metapaths.len() {
            return Err(ModelError::Mismatch("sampling plan does not match the metapath list".into()));
        }
        let cfg = &self.config;
        let schema = graph.schema();
        let n_types = schema.node_types().len();

        // base embeddings for all nodes, grouped by type then permuted to id order
        let embedding = tape.param(store, self.ids.embedding);
        let mut type_base = Vec::with_capacity(n_types);
        let mut order = Vec::with_capacity(graph.node_count());
        for t in 0..n_types {
            let nodes = graph.nodes_of_type(NodeTypeId(t));
            if nodes.is_empty() {
                type_base.push(None);
                continue;
            }
            let idx: Vec<usize> = nodes.iter().map(|n| n.0).collect();
            let id_rows = tape.gather_rows(embedding, &idx)?;
            let attributes = match (self.ids.attr[t], graph.features(NodeTypeId(t))) {
                (Some(w), Some(x)) => {
                    let x = tape.constant(x.clone());
                    Some((x, tape.param(store, w)))
                }
                _ => None,
            };
            type_base.push(Some(layers::base_embedding(tape, id_rows, attributes)?));
            order.extend(idx);
        }
        let present: Vec<Var> = type_base.iter().flatten().copied().collect();
        let stacked = tape.concat_rows(&present)?;
        let mut inverse = vec![0; graph.node_count()];
        for (pos, &u) in order.iter().enumerate() {
            inverse[u] = pos;
        }
        let base = tape.gather_rows(stacked, &inverse)?;

        let w_out = tape.param(store, self.ids.output);
        let query = self.ids.query.map(|q| tape.param(store, q));
        let heads: Vec<HeadParams> = self
            .ids
            .heads
            .iter()
            .map(|[q, k, v]| HeadParams {
                query: tape.param(store, *q),
                key: tape.param(store, *k),
                value: tape.param(store, *v),
            })
            .collect();

        let mut blocks = Vec::new();
        let mut position = vec![None; graph.node_count()];
        let mut reachable = vec![false; graph.node_count()];
        let mut z_parts = Vec::with_capacity(n_types);
        for t in 0..n_types {
            let Some(h_t) = type_base[t] else { continue };
            let nodes = graph.nodes_of_type(NodeTypeId(t)).to_vec();
            let mps: Vec<usize> = (0..self.metapaths.len())
                .filter(|&i| self.metapaths[i].start_type() == NodeTypeId(t))
                .collect();
            let fallback = layers::output_layer(tape, h_t, w_out, cfg.nonlinearity)?;
            if mps.is_empty() {
                z_parts.push(fallback);
                continue;
            }
            let n = nodes.len();
            let mut hp = Vec::with_capacity(mps.len());
            let mut alpha = Vec::with_capacity(mps.len());
            let mut active = vec![Vec::with_capacity(mps.len()); n];
            for &m in &mps {
                let samples = &plan.samples[m];
                if samples.len() != n || samples.iter().zip(&nodes).any(|(s, u)| s.target != *u) {
                    return Err(ModelError::Mismatch(format!(
                        "sampling plan rows do not match nodes for metapath {:?}",
                        self.metapaths[m].id()
                    )));
                }
                let bfs = Segments::from_sets(samples.iter().map(|s| s.bfs.iter().map(|v| v.0).collect::<Vec<_>>()));
                let dfs = Segments::from_sets(samples.iter().map(|s| s.dfs.iter().map(|v| v.0).collect::<Vec<_>>()));
                let weight = self.ids.encoder[m].map(|w| tape.param(store, w));
                let h_bfs = layers::encode_neighbors(tape, cfg.encoder, cfg.nonlinearity, h_t, base, &bfs, weight)?;
                let h_dfs = layers::encode_neighbors(tape, cfg.encoder, cfg.nonlinearity, h_t, base, &dfs, weight)?;
                let bfs_present: Vec<bool> = samples.iter().map(|s| !s.bfs.is_empty()).collect();
                let dfs_present: Vec<bool> = samples
                    .iter()
                    .map(|s| !s.bfs.is_empty() && !s.dfs.is_empty())
                    .collect();
                let (h, a) = layers::fuse_bfs_dfs(tape, h_t, h_bfs, h_dfs, &bfs_present, &dfs_present)?;
                hp.push(h);
                alpha.push(a);
                for (row, &b) in bfs_present.iter().enumerate() {
                    active[row].push(b);
                }
            }
            let (h, beta) = match cfg.fusion {
                FusionMode::MetapathAttention => {
                    let q = query.expect("query exists in attention mode");
                    let (h, b) = layers::aggregate_metapaths(tape, &hp, q, &active)?;
                    (h, Some(b))
                }
                FusionMode::MultiHead => (layers::multihead_self_attention(tape, &hp, &heads, &active)?, None),
            };
            let z_reach = layers::output_layer(tape, h, w_out, cfg.nonlinearity)?;
            let reach: Vec<bool> = active.iter().map(|a| a.iter().any(|&x| x)).collect();
            let z = if reach.iter().all(|&r| r) {
                z_reach
            } else {
                let on: Vec<f64> = reach.iter().map(|&r| if r { 1.0 } else { 0.0 }).collect();
                let off: Vec<f64> = on.iter().map(|v| 1.0 - v).collect();
                let on = tape.constant(Tensor::new(n, 1, on)?);
                let off = tape.constant(Tensor::new(n, 1, off)?);
                let a = ops::scale_rows(tape, on, z_reach)?;
                let b = ops::scale_rows(tape, off, fallback)?;
                tape.add(a, b)?
            };
            for (row, &u) in nodes.iter().enumerate() {
                position[u.0] = Some((blocks.len(), row));
                reachable[u.0] = reach[row];
            }
            blocks.push(TypeBlock {
                nodes,
                metapaths: mps,
                hp,
                alpha,
                beta,
                active,
                z,
            });
            z_parts.push(z);
        }
        let stacked = tape.concat_rows(&z_parts)?;
        let z = tape.gather_rows(stacked, &inverse)?;
        Ok(ForwardOutput {
            z,
            reachable,
            blocks,
            position,
        })
    }

    /// Trace of `u` from a recorded forward pass.
    pub fn trace(&self, tape: &Tape, out: &ForwardOutput, plan: &SamplingPlan, u: NodeId) -> Result<ForwardTrace, ModelError> {
        let (b, row) = out.position.get(u.0).copied().flatten().ok_or_else(|| {
            ModelError::Unreachable(format!("node #{} has no metapath starting at its type", u.0))
        })?;
        let block = &out.blocks[b];
        debug_assert_eq!(block.nodes[row], u);
        if !block.active[row].iter().any(|&a| a) {
            return Err(ModelError::Unreachable(format!("node #{} is unreachable by any metapath", u.0)));
        }
        let mut bfs = Vec::new();
        let mut dfs = Vec::new();
        for &m in &block.metapaths {
            let s = &plan.samples[m][row];
            bfs.push(s.bfs.clone());
            dfs.push(s.dfs.clone());
        }
        Ok(ForwardTrace {
            node: u,
            metapaths: block.metapaths.iter().map(|&m| self.metapaths[m].id().to_string()).collect(),
            active: block.active[row].clone(),
            bfs,
            dfs,
            metapath_vectors: block.hp.iter().map(|&h| tape.value(h).row(row).to_vec()).collect(),
            alpha: block
                .alpha
                .iter()
                .map(|&a| {
                    let r = tape.value(a).row(row);
                    [r[0], r[1]]
                })
                .collect(),
            beta: block.beta.map(|b| tape.value(b).row(row).to_vec()),
            z: tape.value(block.z).row(row).to_vec(),
        })
    }

    /// Single-node forward pass: `z_u` and its trace. Fails when no metapath
    /// yields a neighbor for `u`.
    pub fn forward(&self, graph: &HeteroGraph, u: NodeId, plan: &SamplingPlan) -> Result<ForwardTrace, ModelError> {
        if u.0 >= graph.node_count() {
            return Err(ModelError::Unreachable(format!("node #{} does not exist", u.0)));
        }
        let mut tape = Tape::new();
        let out = self.forward_tape(&mut tape, &self.params, graph, plan)?;
        self.trace(&tape, &out, plan, u)
    }

    /// Output embeddings of all nodes under `plan`.
    pub fn embed(&self, graph: &HeteroGraph, plan: &SamplingPlan) -> Result<Embeddings, ModelError> {
        let mut tape = Tape::new();
        let out = self.forward_tape(&mut tape, &self.params, graph, plan)?;
        Ok(Embeddings {
            values: tape.value(out.z).clone(),
            reachable: out.reachable,
        })
    }

    /// Embeddings under the fixed inference sampling plan.
    pub fn embed_all(&self, graph: &HeteroGraph) -> Result<Embeddings, ModelError> {
        self.embed(graph, &self.sampling_plan(graph, INFERENCE_EPOCH))
    }
}
