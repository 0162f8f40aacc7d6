use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::Path;

use super::io::{data_lines, read_text, write_text};
use super::{GraphError, HeteroGraph, NodeId};

/// Class assignment for a subset of nodes. Classes are `0..num_classes`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LabelTable {
    entries: Vec<(NodeId, usize)>,
    num_classes: usize,
}

impl LabelTable {
    pub fn new(entries: Vec<(NodeId, usize)>, num_classes: usize) -> Result<Self, GraphError> {
        let mut seen = HashSet::new();
        for &(n, c) in &entries {
            if !seen.insert(n) {
                return Err(GraphError::DuplicateLabel {
                    node: format!("#{}", n.0),
                });
            }
            if c >= num_classes {
                return Err(GraphError::Schema(format!(
                    "class {c} out of range for {num_classes} classes"
                )));
            }
        }
        Ok(Self { entries, num_classes })
    }

    pub fn entries(&self) -> &[(NodeId, usize)] {
        &self.entries
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn nodes(&self) -> Vec<NodeId> {
        self.entries.iter().map(|e| e.0).collect()
    }

    pub fn classes(&self) -> Vec<usize> {
        self.entries.iter().map(|e| e.1).collect()
    }

    /// Rows whose index is in `keep`, in that order.
    pub fn subset(&self, keep: &[usize]) -> LabelTable {
        LabelTable {
            entries: keep.iter().map(|&i| self.entries[i]).collect(),
            num_classes: self.num_classes,
        }
    }
}

/// Reads `labels.tsv`. The class count is `num_classes` when given, else
/// one past the largest class id seen.
pub fn load_labels(graph: &HeteroGraph, path: &Path, num_classes: Option<usize>) -> Result<LabelTable, GraphError> {
    let name = path.display().to_string();
    let mut entries = Vec::new();
    let mut seen = HashSet::new();
    for (line, text) in data_lines(&read_text(path)?) {
        let fields: Vec<&str> = text.split('\t').collect();
        if fields.len() != 2 {
            return Err(GraphError::Parse {
                path: name,
                line,
                message: format!("expected 2 tab-separated fields, got {}", fields.len()),
            });
        }
        let node = graph.node(fields[0]).map_err(|e| e.at(&name, line))?;
        let class: usize = fields[1].trim().parse().map_err(|_| GraphError::Parse {
            path: name.clone(),
            line,
            message: format!("bad class id {:?}", fields[1]),
        })?;
        if !seen.insert(node) {
            return Err(GraphError::DuplicateLabel {
                node: fields[0].to_string(),
            }
            .at(&name, line));
        }
        entries.push((node, class));
    }
    let c = num_classes.unwrap_or_else(|| entries.iter().map(|e| e.1 + 1).max().unwrap_or(0));
    let present: HashSet<usize> = entries.iter().map(|e| e.1).collect();
    if present.len() < c {
        log::warn!("{name}: only {} of {c} classes have labeled nodes", present.len());
    }
    LabelTable::new(entries, c)
}

pub fn write_labels(graph: &HeteroGraph, labels: &LabelTable, path: &Path) -> Result<(), GraphError> {
    let mut text = String::new();
    for &(n, c) in labels.entries() {
        let _ = writeln!(text, "{}\t{}", graph.node_name(n), c);
    }
    write_text(path, &text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthetic::figure1;

    #[test]
    fn load_and_reject_duplicates() {
        let g = figure1();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("labels.tsv");
        std::fs::write(&p, "user1\t0\nuser2\t1\n# c\nuser3\t1\n").unwrap();
        let l = load_labels(&g, &p, None).unwrap();
        assert_eq!(l.num_classes(), 2);
        assert_eq!(l.len(), 3);

        std::fs::write(&p, "user1\t0\nuser1\t1\n").unwrap();
        assert!(load_labels(&g, &p, None).unwrap_err().to_string().contains(":2:"));
        std::fs::write(&p, "nobody\t0\n").unwrap();
        assert!(load_labels(&g, &p, None).is_err());
    }
}
