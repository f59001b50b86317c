//! Index spaces, structure encodings and constraint systems shared by the
//! other modules.

mod constraints;
mod graph;
mod indexer;
pub mod io;
mod tree;
mod vector;

pub use constraints::{feasibility_check, ConstraintSystem, Feasibility, Row, RowKind};
pub use graph::SemGraph;
pub use indexer::{ArcIndexer, LabeledArcIndexer};
pub(crate) use tree::reaches_root;
pub use tree::DepTree;
pub use vector::{StructureKind, StructureVec, FEASIBILITY_TOL};

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// One input sentence with whatever supervision is available for it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SentenceInstance {
    pub id: usize,
    /// Token ids; ids at or beyond the vocabulary size denote unknown words.
    pub tokens: Vec<usize>,
    pub gold_tree: Option<DepTree>,
    pub gold_graph: Option<SemGraph>,
    pub end_label: Option<usize>,
}

impl SentenceInstance {
    /// `id_bound` is one past the largest admissible token id.
    pub fn new(
        id: usize,
        tokens: Vec<usize>,
        id_bound: usize,
        gold_tree: Option<DepTree>,
        gold_graph: Option<SemGraph>,
        end_label: Option<usize>,
    ) -> Result<Self> {
        let n = tokens.len();
        if n == 0 {
            return Err(Error::invalid(format!("instance {id} has no tokens")));
        }
        if let Some(t) = tokens.iter().find(|&&t| t >= id_bound) {
            return Err(Error::invalid(format!(
                "instance {id}: token id {t} outside vocabulary bound {id_bound}"
            )));
        }
        if let Some(tree) = &gold_tree {
            if tree.n() != n {
                return Err(Error::invalid(format!(
                    "instance {id}: tree has {} words, sentence has {n}",
                    tree.n()
                )));
            }
        }
        if let Some(graph) = &gold_graph {
            if graph.n() != n {
                return Err(Error::invalid(format!(
                    "instance {id}: graph has {} words, sentence has {n}",
                    graph.n()
                )));
            }
        }
        Ok(SentenceInstance {
            id,
            tokens,
            gold_tree,
            gold_graph,
            end_label,
        })
    }

    pub fn n(&self) -> usize {
        self.tokens.len()
    }
}
