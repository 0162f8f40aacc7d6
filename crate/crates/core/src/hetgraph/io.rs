use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{EdgeTypeId, GraphBuilder, GraphError, HeteroGraph, NodeId, Schema};

pub(crate) fn read_text(path: &Path) -> Result<String, GraphError> {
    fs::read_to_string(path).map_err(|source| GraphError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub(crate) fn write_text(path: &Path, text: &str) -> Result<(), GraphError> {
    fs::write(path, text).map_err(|source| GraphError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Non-empty, non-comment lines with their 1-based line numbers.
pub(crate) fn data_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim_end_matches('\r')))
        .filter(|(_, l)| !l.trim().is_empty() && !l.starts_with('#'))
}

fn parse_features(field: &str) -> Result<Vec<f64>, String> {
    let field = field.trim();
    if field.is_empty() {
        return Ok(Vec::new());
    }
    field
        .split(',')
        .map(|v| {
            let v = v.trim();
            match v.parse::<f64>() {
                Ok(x) if x.is_finite() => Ok(x),
                _ => Err(format!("bad feature value {v:?}")),
            }
        })
        .collect()
}

/// Reads `nodes.tsv`, `edges.tsv` and `schema.json` into a validated graph.
pub fn load_graph(nodes_path: &Path, edges_path: &Path, schema_path: &Path) -> Result<HeteroGraph, GraphError> {
    let schema = Schema::from_json(&read_text(schema_path)?)?;
    let mut builder = GraphBuilder::new(schema);

    let nodes_name = nodes_path.display().to_string();
    for (line, text) in data_lines(&read_text(nodes_path)?) {
        let fields: Vec<&str> = text.split('\t').collect();
        if !(2..=3).contains(&fields.len()) {
            return Err(GraphError::Parse {
                path: nodes_name,
                line,
                message: format!("expected 2 or 3 tab-separated fields, got {}", fields.len()),
            });
        }
        let features = match fields.get(2) {
            Some(f) => parse_features(f).map_err(|message| GraphError::Parse {
                path: nodes_name.clone(),
                line,
                message,
            })?,
            None => Vec::new(),
        };
        builder
            .add_node(fields[0], fields[1], &features)
            .map_err(|e| e.at(&nodes_name, line))?;
    }

    let edges_name = edges_path.display().to_string();
    for (line, text) in data_lines(&read_text(edges_path)?) {
        let fields: Vec<&str> = text.split('\t').collect();
        if fields.len() != 3 {
            return Err(GraphError::Parse {
                path: edges_name,
                line,
                message: format!("expected 3 tab-separated fields, got {}", fields.len()),
            });
        }
        builder
            .add_edge(fields[0], fields[1], fields[2])
            .map_err(|e| e.at(&edges_name, line))?;
    }
    Ok(builder.build())
}

/// Loads `nodes.tsv`, `edges.tsv` and `schema.json` from one directory.
pub fn load_graph_dir(dir: &Path) -> Result<HeteroGraph, GraphError> {
    load_graph(&dir.join("nodes.tsv"), &dir.join("edges.tsv"), &dir.join("schema.json"))
}

/// Writes the three graph files into `dir`, which must exist.
pub fn write_graph(graph: &HeteroGraph, dir: &Path) -> Result<(), GraphError> {
    write_text(&dir.join("schema.json"), &(graph.schema().to_json() + "\n"))?;

    let mut nodes = String::new();
    for n in graph.nodes() {
        let t = graph.schema().node_type_name(graph.node_type(n));
        let _ = write!(nodes, "{}\t{}", graph.node_name(n), t);
        if let Some(f) = graph.node_features(n) {
            nodes.push('\t');
            push_joined(&mut nodes, f);
        }
        nodes.push('\n');
    }
    write_text(&dir.join("nodes.tsv"), &nodes)?;

    let mut edges = Vec::new();
    for (i, _) in graph.schema().edge_types().iter().enumerate() {
        for &(a, b) in graph.edges(EdgeTypeId(i)) {
            edges.push((a, b, EdgeTypeId(i)));
        }
    }
    write_edge_list(graph, &edges, &dir.join("edges.tsv"))
}

pub(crate) fn push_joined(out: &mut String, values: &[f64]) {
    for (i, v) in values.iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        let _ = write!(out, "{v}");
    }
}

/// Reads an `edges.tsv`-format file whose endpoints must exist in `graph`.
pub fn read_edge_list(graph: &HeteroGraph, path: &Path) -> Result<Vec<(NodeId, NodeId, EdgeTypeId)>, GraphError> {
    let name = path.display().to_string();
    let mut out = Vec::new();
    for (line, text) in data_lines(&read_text(path)?) {
        let fields: Vec<&str> = text.split('\t').collect();
        if fields.len() != 3 {
            return Err(GraphError::Parse {
                path: name,
                line,
                message: format!("expected 3 tab-separated fields, got {}", fields.len()),
            });
        }
        let parsed = (|| {
            let a = graph.node(fields[0])?;
            let b = graph.node(fields[1])?;
            let e = graph.schema().edge_type_id(fields[2])?;
            let (ta, tb) = (graph.node_type(a), graph.node_type(b));
            if !graph.schema().connects(e, ta, tb) {
                return Err(GraphError::EndpointType {
                    src: fields[0].to_string(),
                    dst: fields[1].to_string(),
                    edge_type: fields[2].to_string(),
                });
            }
            Ok((a, b, e))
        })()
        .map_err(|e: GraphError| e.at(&name, line))?;
        out.push(parsed);
    }
    Ok(out)
}

pub fn write_edge_list(graph: &HeteroGraph, edges: &[(NodeId, NodeId, EdgeTypeId)], path: &Path) -> Result<(), GraphError> {
    let mut text = String::new();
    for &(a, b, e) in edges {
        let _ = writeln!(
            text,
            "{}\t{}\t{}",
            graph.node_name(a),
            graph.node_name(b),
            graph.schema().edge_type(e).name
        );
    }
    write_text(path, &text)
}
