//! Exhaustive enumeration, used as a test oracle for the decoders.

use super::ArcScores;
use crate::structures::reaches_root;
use crate::structures::DepTree;
use crate::{Error, Result};

/// Longest sentence the enumerators accept.
pub const MAX_ENUMERATION_LENGTH: usize = 8;

/// All trees over `n` words (every word has one head in `0..=n`, no cycles),
/// optionally restricted to projective ones, in lexicographic order of
/// their head vectors.
pub fn enumerate_trees(n: usize, projective_only: bool) -> Result<Vec<DepTree>> {
    if n == 0 {
        return Err(Error::invalid("sentence length must be at least 1"));
    }
    if n > MAX_ENUMERATION_LENGTH {
        return Err(Error::TooLarge {
            n,
            limit: MAX_ENUMERATION_LENGTH,
        });
    }
    let mut trees = Vec::new();
    let mut heads = vec![0usize; n];
    loop {
        let valid = heads.iter().enumerate().all(|(i, &h)| h != i + 1) && reaches_root(&heads);
        if valid {
            let tree = DepTree::new(heads.clone())?;
            if !projective_only || tree.is_projective() {
                trees.push(tree);
            }
        }
        // odometer with the last word as the fastest digit
        let mut pos = n;
        loop {
            if pos == 0 {
                return Ok(trees);
            }
            pos -= 1;
            if heads[pos] < n {
                heads[pos] += 1;
                break;
            }
            heads[pos] = 0;
        }
    }
}

/// Highest-scoring tree by enumeration. The first maximizer in
/// lexicographic order wins ties.
pub fn brute_force_tree_argmax(
    scores: &ArcScores,
    projective_only: bool,
) -> Result<(DepTree, f64)> {
    let indexer = scores.indexer();
    if !indexer.includes_root() {
        return Err(Error::invalid("tree enumeration needs a root node"));
    }
    let mut best: Option<(DepTree, f64)> = None;
    for tree in enumerate_trees(indexer.n(), projective_only)? {
        let score = tree.score(scores.values(), indexer);
        if best.as_ref().is_none_or(|(_, b)| score > *b) {
            best = Some((tree, score));
        }
    }
    Ok(best.expect("at least one tree exists"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::structures::ArcIndexer;

    #[test]
    fn counts() {
        assert_eq!(enumerate_trees(1, true).unwrap().len(), 1);
        let two: Vec<Vec<usize>> = enumerate_trees(2, true)
            .unwrap()
            .into_iter()
            .map(|t| t.heads().to_vec())
            .collect();
        assert_eq!(two, vec![vec![0, 0], vec![0, 1], vec![2, 0]]);
        // rooted labeled trees with multiple root children: (n+1)^(n-1)
        assert_eq!(enumerate_trees(3, false).unwrap().len(), 16);
        assert_eq!(enumerate_trees(4, false).unwrap().len(), 125);
        // projective trees with a multi-child root: 1, 3, 12, 55, 273
        assert_eq!(enumerate_trees(3, true).unwrap().len(), 12);
        assert_eq!(enumerate_trees(4, true).unwrap().len(), 55);
        assert_eq!(enumerate_trees(5, true).unwrap().len(), 273);
    }

    #[test]
    fn guards_length() {
        assert!(matches!(
            enumerate_trees(9, true),
            Err(Error::TooLarge { .. })
        ));
    }

    #[test]
    fn argmax_dominates_every_tree() {
        let ix = ArcIndexer::new(3, true).unwrap();
        let v: Vec<f64> = (0..ix.len())
            .map(|k| ((k * 7919) % 13) as f64 - 6.0)
            .collect();
        let s = ArcScores::new(ix, v).unwrap();
        let (_, best) = brute_force_tree_argmax(&s, true).unwrap();
        for t in enumerate_trees(3, true).unwrap() {
            assert!(t.score(s.values(), &ix) <= best);
        }
    }
}
