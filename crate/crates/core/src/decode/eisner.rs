//! First-order projective decoding (Eisner's algorithm).
//!
//! Ties are broken deterministically: among all trees whose chart score is
//! maximal, the decoder returns the one whose head vector
//! `(head(1), head(2), …, head(n))` is lexicographically smallest, i.e. it
//! prefers lower head indices for earlier words. The rule decomposes over
//! chart items because every item fixes the heads of a contiguous range of
//! words, and the ranges of the two halves of a split appear in sentence
//! order. Only exact score ties trigger the comparison.

use std::cmp::Ordering;

use super::ArcScores;
use crate::structures::DepTree;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Item {
    /// Span `[s, t]` headed by `s`, finished on the right.
    CompleteRight,
    /// Span `[s, t]` headed by `t`, finished on the left.
    CompleteLeft,
    /// Arc `s → t` with the inside of the span still open.
    IncompleteRight,
    /// Arc `t → s`.
    IncompleteLeft,
}

struct Chart {
    nodes: usize,
    score: [Vec<f64>; 4],
    split: [Vec<usize>; 4],
}

impl Chart {
    fn new(nodes: usize) -> Self {
        let size = nodes * nodes;
        Chart {
            nodes,
            score: std::array::from_fn(|_| vec![f64::NEG_INFINITY; size]),
            split: std::array::from_fn(|_| vec![usize::MAX; size]),
        }
    }

    fn at(&self, item: Item, s: usize, t: usize) -> f64 {
        self.score[item as usize][s * self.nodes + t]
    }

    fn set(&mut self, item: Item, s: usize, t: usize, score: f64, split: usize) {
        self.score[item as usize][s * self.nodes + t] = score;
        self.split[item as usize][s * self.nodes + t] = split;
    }

    fn split_of(&self, item: Item, s: usize, t: usize) -> usize {
        self.split[item as usize][s * self.nodes + t]
    }

    /// Writes the heads assigned by item `(s, t)` into `heads`.
    fn fill(&self, item: Item, s: usize, t: usize, heads: &mut [usize]) {
        if s == t {
            return;
        }
        self.fill_with(item, s, t, self.split_of(item, s, t), heads);
    }

    /// Like [`Chart::fill`] but with the top-level split forced to `r`.
    fn fill_with(&self, item: Item, s: usize, t: usize, r: usize, heads: &mut [usize]) {
        match item {
            Item::IncompleteRight => {
                heads[t] = s;
                self.fill(Item::CompleteRight, s, r, heads);
                self.fill(Item::CompleteLeft, r + 1, t, heads);
            }
            Item::IncompleteLeft => {
                heads[s] = t;
                self.fill(Item::CompleteRight, s, r, heads);
                self.fill(Item::CompleteLeft, r + 1, t, heads);
            }
            Item::CompleteRight => {
                self.fill(Item::IncompleteRight, s, r, heads);
                self.fill(Item::CompleteRight, r, t, heads);
            }
            Item::CompleteLeft => {
                self.fill(Item::CompleteLeft, s, r, heads);
                self.fill(Item::IncompleteLeft, r, t, heads);
            }
        }
    }
}

/// Words whose heads an item determines.
fn covered(item: Item, s: usize, t: usize) -> std::ops::Range<usize> {
    match item {
        Item::CompleteRight | Item::IncompleteRight => s + 1..t + 1,
        Item::CompleteLeft | Item::IncompleteLeft => s..t,
    }
}

struct TieBreaker {
    left: Vec<usize>,
    right: Vec<usize>,
}

impl TieBreaker {
    /// Compares the head assignments produced by splitting `(s, t)` at `a`
    /// versus at `b`.
    fn compare(
        &mut self,
        chart: &Chart,
        item: Item,
        s: usize,
        t: usize,
        a: usize,
        b: usize,
    ) -> Ordering {
        chart.fill_with(item, s, t, a, &mut self.left);
        chart.fill_with(item, s, t, b, &mut self.right);
        let range = covered(item, s, t);
        self.left[range.clone()].cmp(&self.right[range])
    }
}

/// Returns the highest-scoring projective tree under `scores`.
///
/// Requires an indexer with the root node. See the module documentation for
/// the tie-breaking rule.
pub fn eisner_decode(scores: &ArcScores) -> Result<DepTree> {
    let indexer = scores.indexer();
    if !indexer.includes_root() {
        return Err(Error::invalid("Eisner decoding needs a root node"));
    }
    let n = indexer.n();
    let nodes = n + 1;
    let mut chart = Chart::new(nodes);
    let mut ties = TieBreaker {
        left: vec![0; nodes],
        right: vec![0; nodes],
    };

    for s in 0..nodes {
        chart.set(Item::CompleteRight, s, s, 0.0, s);
        chart.set(Item::CompleteLeft, s, s, 0.0, s);
    }

    for width in 1..nodes {
        for s in 0..nodes - width {
            let t = s + width;

            // both incomplete items share the same split maximization
            let mut best = f64::NEG_INFINITY;
            let mut best_r = usize::MAX;
            for r in s..t {
                let v =
                    chart.at(Item::CompleteRight, s, r) + chart.at(Item::CompleteLeft, r + 1, t);
                if v > best {
                    best = v;
                    best_r = r;
                } else if v == best && best_r != usize::MAX {
                    // the arc's own head is fixed; compare the inside only
                    let order = ties.compare(&chart, Item::IncompleteRight, s, t, r, best_r);
                    if order == Ordering::Less {
                        best_r = r;
                    }
                }
            }
            chart.set(Item::IncompleteRight, s, t, best + scores.get(s, t), best_r);
            if s > 0 {
                chart.set(Item::IncompleteLeft, s, t, best + scores.get(t, s), best_r);
            }

            let mut best = f64::NEG_INFINITY;
            let mut best_r = usize::MAX;
            for r in s + 1..=t {
                let v = chart.at(Item::IncompleteRight, s, r) + chart.at(Item::CompleteRight, r, t);
                if v > best {
                    best = v;
                    best_r = r;
                } else if v == best
                    && best_r != usize::MAX
                    && ties.compare(&chart, Item::CompleteRight, s, t, r, best_r) == Ordering::Less
                {
                    best_r = r;
                }
            }
            chart.set(Item::CompleteRight, s, t, best, best_r);

            if s > 0 {
                let mut best = f64::NEG_INFINITY;
                let mut best_r = usize::MAX;
                for r in s..t {
                    let v =
                        chart.at(Item::CompleteLeft, s, r) + chart.at(Item::IncompleteLeft, r, t);
                    if v > best {
                        best = v;
                        best_r = r;
                    } else if v == best
                        && best_r != usize::MAX
                        && ties.compare(&chart, Item::CompleteLeft, s, t, r, best_r)
                            == Ordering::Less
                    {
                        best_r = r;
                    }
                }
                chart.set(Item::CompleteLeft, s, t, best, best_r);
            }
        }
    }

    let mut heads = vec![0; nodes];
    chart.fill(Item::CompleteRight, 0, n, &mut heads);
    DepTree::new(heads[1..].to_vec())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::structures::ArcIndexer;

    #[test]
    fn single_word() {
        let ix = ArcIndexer::new(1, true).unwrap();
        let s = ArcScores::new(ix, vec![-3.0]).unwrap();
        assert_eq!(eisner_decode(&s).unwrap().heads(), &[0]);
    }

    #[test]
    fn all_zero_prefers_lexicographically_first() {
        let ix = ArcIndexer::new(2, true).unwrap();
        let s = ArcScores::new(ix, vec![0.0; ix.len()]).unwrap();
        assert_eq!(eisner_decode(&s).unwrap().heads(), &[0, 0]);
        let ix = ArcIndexer::new(5, true).unwrap();
        let s = ArcScores::new(ix, vec![0.0; ix.len()]).unwrap();
        assert_eq!(eisner_decode(&s).unwrap().heads(), &[0, 0, 0, 0, 0]);
    }

    #[test]
    fn follows_strong_arcs() {
        let ix = ArcIndexer::new(3, true).unwrap();
        let mut v = vec![0.0; ix.len()];
        v[ix.index(0, 2).unwrap()] = 5.0;
        v[ix.index(2, 1).unwrap()] = 5.0;
        v[ix.index(2, 3).unwrap()] = 5.0;
        let s = ArcScores::new(ix, v).unwrap();
        assert_eq!(eisner_decode(&s).unwrap().heads(), &[2, 0, 2]);
    }

    #[test]
    fn never_returns_non_projective() {
        // the best unconstrained tree 3 → 1, 0 → 2, 1 → 3 crosses
        let ix = ArcIndexer::new(3, true).unwrap();
        let mut v = vec![-1.0; ix.len()];
        v[ix.index(3, 1).unwrap()] = 10.0;
        v[ix.index(0, 2).unwrap()] = 10.0;
        v[ix.index(1, 3).unwrap()] = 10.0;
        let s = ArcScores::new(ix, v).unwrap();
        let tree = eisner_decode(&s).unwrap();
        assert!(tree.is_projective());
    }

    #[test]
    fn rejects_rootless_indexer() {
        let ix = ArcIndexer::new(2, false).unwrap();
        let s = ArcScores::new(ix, vec![0.0; 2]).unwrap();
        assert!(eisner_decode(&s).is_err());
    }
}
