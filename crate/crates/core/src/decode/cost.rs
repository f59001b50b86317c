//! Cost-augmented decoding for max-margin training.
//!
//! With Hamming cost `Σ_k z_k (1 − g_k) + (1 − z_k) g_k`, maximizing
//! `zᵀs + w · Hamming(z, g)` equals decoding with scores `s + w(1 − 2g)`
//! (the remaining constant does not affect the argmax).

use super::{eisner_decode, sdp_decode, ArcScores, SdpScores};
use crate::structures::{DepTree, SemGraph};
use crate::Result;

/// Default Hamming cost weight.
pub const DEFAULT_COST_WEIGHT: f64 = 1.0;

fn hamming_shift(gold: &[f64], weight: f64) -> Vec<f64> {
    gold.iter().map(|g| weight * (1.0 - 2.0 * g)).collect()
}

/// Hamming distance between two vectors of the same layout.
pub fn hamming(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

/// `argmax_z zᵀs + w · Hamming(z, gold)` over projective trees.
pub fn cost_augmented_tree(scores: &ArcScores, gold: &DepTree, weight: f64) -> Result<DepTree> {
    let g = gold.encode(scores.indexer())?;
    let shifted = scores.shifted(&hamming_shift(g.values(), weight))?;
    eisner_decode(&shifted)
}

/// `argmax_z zᵀs + w · Hamming(z, gold)` over labeled graphs, with the
/// Hamming cost counted over both unlabeled and labeled coordinates.
pub fn cost_augmented_graph(scores: &SdpScores, gold: &SemGraph, weight: f64) -> Result<SemGraph> {
    let g = gold.encode(scores.indexer())?;
    let shifted = scores.shifted(&hamming_shift(g.values(), weight))?;
    Ok(sdp_decode(&shifted))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decode::enumerate_trees;
    use crate::structures::ArcIndexer;

    #[test]
    fn zero_weight_is_plain_decoding() {
        let ix = ArcIndexer::new(4, true).unwrap();
        let v: Vec<f64> = (0..ix.len())
            .map(|k| ((k * 37) % 11) as f64 * 0.3 - 1.0)
            .collect();
        let s = ArcScores::new(ix, v).unwrap();
        let gold = DepTree::new(vec![0, 1, 2, 3]).unwrap();
        assert_eq!(
            cost_augmented_tree(&s, &gold, 0.0).unwrap(),
            eisner_decode(&s).unwrap()
        );
    }

    #[test]
    fn large_margin_returns_gold() {
        let ix = ArcIndexer::new(3, true).unwrap();
        let gold = DepTree::new(vec![2, 0, 2]).unwrap();
        let g = gold.encode(&ix).unwrap();
        // margin 10 per arc exceeds the largest possible cost
        let v: Vec<f64> = g.values().iter().map(|x| 10.0 * x).collect();
        let s = ArcScores::new(ix, v).unwrap();
        assert_eq!(cost_augmented_tree(&s, &gold, 1.0).unwrap(), gold);
    }

    #[test]
    fn matches_enumeration() {
        let ix = ArcIndexer::new(4, true).unwrap();
        let gold = DepTree::new(vec![2, 0, 4, 2]).unwrap();
        let g = gold.encode(&ix).unwrap();
        for seed in 0..20u64 {
            let v: Vec<f64> = (0..ix.len())
                .map(|k| (((k as u64 + 3) * (seed + 11) * 2654435761) % 1000) as f64 / 250.0 - 2.0)
                .collect();
            let s = ArcScores::new(ix, v).unwrap();
            let got = cost_augmented_tree(&s, &gold, 1.0).unwrap();
            let objective = |t: &DepTree| {
                let z = t.encode(&ix).unwrap();
                t.score(s.values(), &ix) + hamming(z.values(), g.values())
            };
            let best = enumerate_trees(4, true)
                .unwrap()
                .iter()
                .map(objective)
                .fold(f64::NEG_INFINITY, f64::max);
            assert!((objective(&got) - best).abs() < 1e-9);
        }
    }
}
