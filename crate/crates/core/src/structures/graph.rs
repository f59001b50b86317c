use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{LabeledArcIndexer, StructureKind, StructureVec};
use crate::{Error, Result};

/// A labeled bilexical dependency graph over words `1..=n`.
///
/// At most one label per `(head, modifier)` pair, no self-loops. Tokens may
/// have any number of heads, including none.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "GraphRepr", into = "GraphRepr")]
pub struct SemGraph {
    n: usize,
    arcs: BTreeMap<(usize, usize), usize>,
}

impl SemGraph {
    /// An empty graph over `n` words.
    pub fn empty(n: usize) -> Self {
        SemGraph {
            n,
            arcs: BTreeMap::new(),
        }
    }

    /// Builds a graph from `(head, modifier, label)` triples. Heads and
    /// modifiers range over `1..=n`.
    pub fn new(n: usize, triples: impl IntoIterator<Item = (usize, usize, usize)>) -> Result<Self> {
        let mut graph = SemGraph::empty(n);
        for (h, m, l) in triples {
            graph.insert(h, m, l)?;
        }
        Ok(graph)
    }

    pub fn insert(&mut self, head: usize, modifier: usize, label: usize) -> Result<()> {
        if head == 0 || modifier == 0 || head > self.n || modifier > self.n {
            return Err(Error::invalid(format!(
                "arc {head} → {modifier} out of range 1..={}",
                self.n
            )));
        }
        if head == modifier {
            return Err(Error::invalid(format!("self-loop on word {head}")));
        }
        if let Some(&old) = self.arcs.get(&(head, modifier)) {
            if old != label {
                return Err(Error::invalid(format!(
                    "arc {head} → {modifier} carries two labels ({old}, {label})"
                )));
            }
        }
        self.arcs.insert((head, modifier), label);
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.arcs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.arcs.is_empty()
    }

    pub fn label(&self, head: usize, modifier: usize) -> Option<usize> {
        self.arcs.get(&(head, modifier)).copied()
    }

    pub fn contains(&self, head: usize, modifier: usize) -> bool {
        self.arcs.contains_key(&(head, modifier))
    }

    /// Labeled arcs `(head, modifier, label)` in lexicographic order.
    pub fn triples(&self) -> impl Iterator<Item = (usize, usize, usize)> + '_ {
        self.arcs.iter().map(|(&(h, m), &l)| (h, m, l))
    }

    /// Unlabeled arcs `(head, modifier)`.
    pub fn unlabeled(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.arcs.keys().copied()
    }

    /// Joint `[unlabeled | labeled]` vertex encoding.
    pub fn encode(&self, indexer: &LabeledArcIndexer) -> Result<StructureVec> {
        if indexer.base().n() != self.n {
            return Err(Error::DimensionMismatch {
                expected: indexer.base().n(),
                got: self.n,
            });
        }
        let d = indexer.base().len();
        let mut values = vec![0.0; indexer.joint_len()];
        for (h, m, l) in self.triples() {
            let k = indexer
                .base()
                .index(h, m)
                .ok_or_else(|| Error::invalid(format!("arc {h} → {m} is not a candidate arc")))?;
            if l >= indexer.labels() {
                return Err(Error::invalid(format!("label {l} out of range")));
            }
            values[k] = 1.0;
            values[d + k * indexer.labels() + l] = 1.0;
        }
        Ok(StructureVec::from_parts(values, StructureKind::Vertex))
    }

    /// Inverse of [`SemGraph::encode`].
    pub fn decode(v: &StructureVec, indexer: &LabeledArcIndexer) -> Result<Self> {
        if v.kind() != StructureKind::Vertex {
            return Err(Error::invalid("only vertex vectors decode to graphs"));
        }
        crate::error::check_len(indexer.joint_len(), v.len())?;
        let d = indexer.base().len();
        let values = v.values();
        let mut graph = SemGraph::empty(indexer.base().n());
        for (k, h, m) in indexer.base().arcs() {
            let labels: Vec<usize> = indexer
                .labels_of(k)
                .filter(|&q| values[d + q] == 1.0)
                .map(|q| q - k * indexer.labels())
                .collect();
            match (values[k] == 1.0, labels.as_slice()) {
                (false, []) => {}
                (true, [l]) => graph.insert(h, m, *l)?,
                _ => {
                    return Err(Error::invalid(format!(
                        "arc {h} → {m} is inconsistent with its labels"
                    )))
                }
            }
        }
        Ok(graph)
    }
}

#[derive(Serialize, Deserialize)]
struct GraphRepr {
    n: usize,
    arcs: Vec<(usize, usize, usize)>,
}

impl TryFrom<GraphRepr> for SemGraph {
    type Error = Error;

    fn try_from(repr: GraphRepr) -> Result<Self> {
        SemGraph::new(repr.n, repr.arcs)
    }
}

impl From<SemGraph> for GraphRepr {
    fn from(graph: SemGraph) -> Self {
        GraphRepr {
            n: graph.n,
            arcs: graph.triples().collect(),
        }
    }
}
