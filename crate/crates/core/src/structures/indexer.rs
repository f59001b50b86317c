use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Bijection between candidate arcs `head → modifier` and coordinates of the
/// score and structure vectors.
///
/// Coordinates are laid out modifier-major: all arcs entering modifier 1
/// come first (ordered by ascending head), then those entering modifier 2,
/// and so on. The single-headedness block of each modifier is therefore a
/// contiguous range, see [`ArcIndexer::incoming`].
///
/// Words are numbered `1..=n`. With `includes_root` the artificial root node
/// `0` is an additional candidate head, giving `d = n²` coordinates;
/// without it `d = n(n-1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ArcIndexer {
    n: usize,
    includes_root: bool,
}

impl ArcIndexer {
    pub fn new(n: usize, includes_root: bool) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("sentence length must be at least 1"));
        }
        Ok(ArcIndexer { n, includes_root })
    }

    /// Sentence length (number of words, excluding the root).
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn includes_root(&self) -> bool {
        self.includes_root
    }

    /// Number of coordinates `d`.
    pub fn len(&self) -> usize {
        self.n * self.heads_per_modifier()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Number of candidate heads of every modifier.
    pub fn heads_per_modifier(&self) -> usize {
        if self.includes_root {
            self.n
        } else {
            self.n - 1
        }
    }

    /// Smallest node that may act as a head.
    pub fn first_head(&self) -> usize {
        if self.includes_root {
            0
        } else {
            1
        }
    }

    /// Number of nodes that carry representations (`n + 1`, the root included).
    pub fn node_count(&self) -> usize {
        self.n + 1
    }

    /// Coordinate of the arc `head → modifier`, if it is a candidate arc.
    pub fn index(&self, head: usize, modifier: usize) -> Option<usize> {
        if modifier == 0 || modifier > self.n || head > self.n || head == modifier {
            return None;
        }
        if head < self.first_head() {
            return None;
        }
        let mut rank = head - self.first_head();
        if head > modifier {
            rank -= 1;
        }
        Some((modifier - 1) * self.heads_per_modifier() + rank)
    }

    /// Inverse of [`ArcIndexer::index`]: the `(head, modifier)` pair of a
    /// coordinate.
    pub fn arc(&self, k: usize) -> Option<(usize, usize)> {
        if k >= self.len() {
            return None;
        }
        let per = self.heads_per_modifier();
        let modifier = k / per + 1;
        let mut head = self.first_head() + k % per;
        if head >= modifier {
            head += 1;
        }
        Some((head, modifier))
    }

    /// Coordinates of all arcs entering `modifier`.
    pub fn incoming(&self, modifier: usize) -> Range<usize> {
        assert!(
            (1..=self.n).contains(&modifier),
            "modifier {modifier} out of range 1..={}",
            self.n
        );
        let per = self.heads_per_modifier();
        (modifier - 1) * per..modifier * per
    }

    /// All candidate arcs as `(coordinate, head, modifier)`.
    pub fn arcs(&self) -> impl Iterator<Item = (usize, usize, usize)> + '_ {
        (0..self.len()).map(move |k| {
            let (h, m) = self.arc(k).expect("coordinate in range");
            (k, h, m)
        })
    }
}

/// Bijection between labeled arcs `head →(ℓ) modifier` and coordinates.
///
/// Labeled coordinates are arc-major: `σ(i →(ℓ) j) = σ(i → j) · L + ℓ`.
/// Structured vectors over a semantic graph use the joint layout
/// `[unlabeled (d) | labeled (d·L)]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LabeledArcIndexer {
    base: ArcIndexer,
    labels: usize,
}

impl LabeledArcIndexer {
    pub fn new(base: ArcIndexer, labels: usize) -> Result<Self> {
        if labels == 0 {
            return Err(Error::invalid("label count must be positive"));
        }
        Ok(LabeledArcIndexer { base, labels })
    }

    pub fn base(&self) -> &ArcIndexer {
        &self.base
    }

    pub fn labels(&self) -> usize {
        self.labels
    }

    /// Number of labeled coordinates, `d · L`.
    pub fn len(&self) -> usize {
        self.base.len() * self.labels
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Length of the joint `[unlabeled | labeled]` vector.
    pub fn joint_len(&self) -> usize {
        self.base.len() * (1 + self.labels)
    }

    pub fn index(&self, head: usize, modifier: usize, label: usize) -> Option<usize> {
        if label >= self.labels {
            return None;
        }
        self.base
            .index(head, modifier)
            .map(|k| k * self.labels + label)
    }

    /// Inverse of [`LabeledArcIndexer::index`].
    pub fn arc(&self, k: usize) -> Option<(usize, usize, usize)> {
        if k >= self.len() {
            return None;
        }
        let (h, m) = self.base.arc(k / self.labels)?;
        Some((h, m, k % self.labels))
    }

    /// Range of the labeled coordinates of arc coordinate `arc` inside the
    /// labeled block.
    pub fn labels_of(&self, arc: usize) -> Range<usize> {
        arc * self.labels..(arc + 1) * self.labels
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_words_without_root() {
        let ix = ArcIndexer::new(2, false).unwrap();
        assert_eq!(ix.len(), 2);
        let arcs: Vec<_> = ix.arcs().map(|(_, h, m)| (h, m)).collect();
        assert_eq!(arcs, vec![(2, 1), (1, 2)]);
    }

    #[test]
    fn single_word_with_root() {
        let ix = ArcIndexer::new(1, true).unwrap();
        assert_eq!(ix.len(), 1);
        assert_eq!(ix.arc(0), Some((0, 1)));
        assert_eq!(ix.index(0, 1), Some(0));
    }

    #[test]
    fn three_words_with_root_round_trip() {
        let ix = ArcIndexer::new(3, true).unwrap();
        assert_eq!(ix.len(), 9);
        let k = ix.index(2, 3).unwrap();
        assert_eq!(ix.arc(k), Some((2, 3)));
    }

    #[test]
    fn rejects_empty_sentence() {
        assert!(ArcIndexer::new(0, true).is_err());
    }

    #[test]
    fn rejects_self_loops_and_root_modifier() {
        let ix = ArcIndexer::new(3, true).unwrap();
        assert_eq!(ix.index(2, 2), None);
        assert_eq!(ix.index(1, 0), None);
        let ix = ArcIndexer::new(3, false).unwrap();
        assert_eq!(ix.index(0, 2), None);
    }

    #[test]
    fn incoming_blocks_are_contiguous() {
        let ix = ArcIndexer::new(4, true).unwrap();
        for m in 1..=4 {
            for k in ix.incoming(m) {
                assert_eq!(ix.arc(k).unwrap().1, m);
            }
        }
    }

    #[test]
    fn labeled_round_trip() {
        let ix = LabeledArcIndexer::new(ArcIndexer::new(3, false).unwrap(), 4).unwrap();
        assert_eq!(ix.len(), 6 * 4);
        for k in 0..ix.len() {
            let (h, m, l) = ix.arc(k).unwrap();
            assert_eq!(ix.index(h, m, l), Some(k));
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn bijection(n in 1usize..=12, root in any::<bool>()) {
                let ix = ArcIndexer::new(n, root).unwrap();
                let expected = if root { n * n } else { n * (n - 1) };
                prop_assert_eq!(ix.len(), expected);
                for k in 0..ix.len() {
                    let (h, m) = ix.arc(k).unwrap();
                    prop_assert!(h != m);
                    prop_assert_eq!(ix.index(h, m), Some(k));
                }
            }
        }
    }
}
