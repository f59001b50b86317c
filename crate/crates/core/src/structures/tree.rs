use serde::{Deserialize, Serialize};

use super::{ArcIndexer, StructureKind, StructureVec};
use crate::{Error, Result};

/// A dependency tree over words `1..=n` rooted at node `0`.
///
/// Single-headedness holds by construction; [`DepTree::new`] rejects
/// self-loops, out-of-range heads and cycles, so every word is connected to
/// the root. The root may have several children.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct DepTree {
    heads: Vec<usize>,
}

impl DepTree {
    /// Builds a tree from `heads[j - 1] = head of word j`.
    pub fn new(heads: Vec<usize>) -> Result<Self> {
        let n = heads.len();
        if n == 0 {
            return Err(Error::invalid("tree must contain at least one word"));
        }
        for (idx, &h) in heads.iter().enumerate() {
            let m = idx + 1;
            if h > n {
                return Err(Error::invalid(format!(
                    "head {h} of word {m} out of range 0..={n}"
                )));
            }
            if h == m {
                return Err(Error::invalid(format!("word {m} is its own head")));
            }
        }
        if !reaches_root(&heads) {
            return Err(Error::invalid("heads contain a cycle"));
        }
        Ok(DepTree { heads })
    }

    pub fn n(&self) -> usize {
        self.heads.len()
    }

    /// Head of word `modifier` (1-based).
    pub fn head(&self, modifier: usize) -> usize {
        self.heads[modifier - 1]
    }

    /// Heads of words `1..=n`, in order.
    pub fn heads(&self) -> &[usize] {
        &self.heads
    }

    /// Arcs as `(head, modifier)` pairs ordered by modifier.
    pub fn arcs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.heads.iter().enumerate().map(|(i, &h)| (h, i + 1))
    }

    /// Children of `node`, in ascending order.
    pub fn children(&self, node: usize) -> Vec<usize> {
        self.arcs()
            .filter(|&(h, _)| h == node)
            .map(|(_, m)| m)
            .collect()
    }

    /// Whether no two arcs cross when drawn above the sentence (root at
    /// position 0).
    pub fn is_projective(&self) -> bool {
        let spans: Vec<(usize, usize)> = self.arcs().map(|(h, m)| (h.min(m), h.max(m))).collect();
        for (a, &(l1, r1)) in spans.iter().enumerate() {
            for &(l2, r2) in &spans[a + 1..] {
                if (l1 < l2 && l2 < r1 && r1 < r2) || (l2 < l1 && l1 < r2 && r2 < r1) {
                    return false;
                }
            }
        }
        true
    }

    /// Binary encoding over `indexer`: one `1` per modifier.
    pub fn encode(&self, indexer: &ArcIndexer) -> Result<StructureVec> {
        if indexer.n() != self.n() {
            return Err(Error::DimensionMismatch {
                expected: indexer.n(),
                got: self.n(),
            });
        }
        let mut values = vec![0.0; indexer.len()];
        for (h, m) in self.arcs() {
            let k = indexer
                .index(h, m)
                .ok_or_else(|| Error::invalid(format!("arc {h} → {m} is not a candidate arc")))?;
            values[k] = 1.0;
        }
        Ok(StructureVec::from_parts(values, StructureKind::Vertex))
    }

    /// Inverse of [`DepTree::encode`] for vertex vectors.
    pub fn decode(v: &StructureVec, indexer: &ArcIndexer) -> Result<Self> {
        if v.kind() != StructureKind::Vertex {
            return Err(Error::invalid("only vertex vectors decode to trees"));
        }
        crate::error::check_len(indexer.len(), v.len())?;
        let mut heads = Vec::with_capacity(indexer.n());
        for m in 1..=indexer.n() {
            let mut found = None;
            for k in indexer.incoming(m) {
                if v.values()[k] == 1.0 {
                    if found.is_some() {
                        return Err(Error::invalid(format!("word {m} has two heads")));
                    }
                    found = Some(indexer.arc(k).expect("in range").0);
                }
            }
            heads.push(found.ok_or_else(|| Error::invalid(format!("word {m} has no head")))?);
        }
        DepTree::new(heads)
    }

    /// `zᵀs` summed over modifiers in ascending order.
    pub fn score(&self, scores: &[f64], indexer: &ArcIndexer) -> f64 {
        let mut total = 0.0;
        for (h, m) in self.arcs() {
            total += scores[indexer.index(h, m).expect("tree arc is a candidate")];
        }
        total
    }
}

impl TryFrom<Vec<usize>> for DepTree {
    type Error = Error;

    fn try_from(heads: Vec<usize>) -> Result<Self> {
        DepTree::new(heads)
    }
}

impl From<DepTree> for Vec<usize> {
    fn from(tree: DepTree) -> Self {
        tree.heads
    }
}

/// Every word reaches node 0 by following heads.
pub(crate) fn reaches_root(heads: &[usize]) -> bool {
    let n = heads.len();
    // 0 = unvisited, 1 = on current path, 2 = known to reach the root
    let mut state = vec![0u8; n + 1];
    state[0] = 2;
    let mut path = Vec::new();
    for start in 1..=n {
        let mut node = start;
        while state[node] == 0 {
            state[node] = 1;
            path.push(node);
            node = heads[node - 1];
        }
        if state[node] == 1 {
            return false;
        }
        for p in path.drain(..) {
            state[p] = 2;
        }
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn encodes_root_chain() {
        let ix = ArcIndexer::new(2, true).unwrap();
        let tree = DepTree::new(vec![0, 1]).unwrap();
        let v = tree.encode(&ix).unwrap();
        let ones: Vec<usize> = (0..v.len()).filter(|&k| v.values()[k] == 1.0).collect();
        let mut expected = vec![ix.index(0, 1).unwrap(), ix.index(1, 2).unwrap()];
        expected.sort();
        assert_eq!(ones, expected);
    }

    #[test]
    fn encodes_reverse_chain() {
        let ix = ArcIndexer::new(2, true).unwrap();
        let tree = DepTree::new(vec![2, 0]).unwrap();
        let v = tree.encode(&ix).unwrap();
        assert_eq!(v.values()[ix.index(2, 1).unwrap()], 1.0);
        assert_eq!(v.values()[ix.index(0, 2).unwrap()], 1.0);
        assert_eq!(v.values().iter().sum::<f64>(), 2.0);
        assert_eq!(DepTree::decode(&v, &ix).unwrap(), tree);
    }

    #[test]
    fn rejects_cycles_and_self_loops() {
        assert!(DepTree::new(vec![2, 1]).is_err());
        assert!(DepTree::new(vec![1]).is_err());
        assert!(DepTree::new(vec![0, 3, 2]).is_err());
        assert!(DepTree::new(vec![0, 5]).is_err());
        assert!(DepTree::new(vec![]).is_err());
    }

    #[test]
    fn root_arc_needs_root_indexer() {
        let ix = ArcIndexer::new(2, false).unwrap();
        let tree = DepTree::new(vec![0, 1]).unwrap();
        assert!(tree.encode(&ix).is_err());
    }

    #[test]
    fn projectivity() {
        assert!(DepTree::new(vec![0, 1, 2]).unwrap().is_projective());
        // 3 → 1 crosses 0 → 2
        assert!(!DepTree::new(vec![3, 0, 2]).unwrap().is_projective());
        // arcs 2 → 4 and 1 → 3 cross
        assert!(!DepTree::new(vec![0, 0, 1, 2]).unwrap().is_projective());
    }

    #[test]
    fn serde_validates() {
        let t: DepTree = serde_json::from_str("[0, 1, 1]").unwrap();
        assert_eq!(t.heads(), &[0, 1, 1]);
        assert!(serde_json::from_str::<DepTree>("[2, 1]").is_err());
    }
}
