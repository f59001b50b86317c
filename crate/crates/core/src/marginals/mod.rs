//! Arc marginals and the log-partition function of the Gibbs distribution
//! `p(z) ∝ exp(zᵀs)` over projective trees.

mod chart;

use serde::{Deserialize, Serialize};

use crate::decode::{enumerate_trees, ArcScores};
use crate::structures::{StructureKind, StructureVec};
use crate::{Error, Result};

use chart::{Dual, Scalar};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginalResult {
    pub arc_marginals: StructureVec,
    pub log_partition: f64,
}

impl MarginalResult {
    fn from_raw(marginals: Vec<f64>, log_partition: f64) -> Self {
        // rounding can leave values a few ulps outside [0, 1]
        let values = marginals.into_iter().map(|x| x.clamp(0.0, 1.0)).collect();
        MarginalResult {
            arc_marginals: StructureVec::from_parts(values, StructureKind::Relaxed),
            log_partition,
        }
    }
}

fn require_root(scores: &ArcScores) -> Result<()> {
    if !scores.indexer().includes_root() {
        return Err(Error::invalid("marginal inference needs a root node"));
    }
    Ok(())
}

/// Exact arc marginals by the inside-outside algorithm in log space.
pub fn inside_outside(scores: &ArcScores) -> Result<MarginalResult> {
    require_root(scores)?;
    let passes = chart::run(scores, |k| scores.values()[k]);
    Ok(MarginalResult::from_raw(
        passes.marginals,
        passes.log_partition,
    ))
}

/// Exact marginals by enumerating every projective tree.
pub fn brute_force_marginals(scores: &ArcScores) -> Result<MarginalResult> {
    require_root(scores)?;
    let indexer = scores.indexer();
    let trees = enumerate_trees(indexer.n(), true)?;
    let tree_scores: Vec<f64> = trees
        .iter()
        .map(|t| t.score(scores.values(), indexer))
        .collect();
    let max = tree_scores
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    let total: f64 = tree_scores.iter().map(|x| (x - max).exp()).sum();
    let log_partition = max + total.ln();
    let mut marginals = vec![0.0; indexer.len()];
    for (tree, score) in trees.iter().zip(&tree_scores) {
        let p = (score - log_partition).exp();
        for (h, m) in tree.arcs() {
            marginals[indexer.index(h, m).expect("tree arc")] += p;
        }
    }
    Ok(MarginalResult::from_raw(marginals, log_partition))
}

/// Vector-Jacobian product of [`inside_outside`]'s marginals with
/// `upstream`.
///
/// The Jacobian of the marginals is the Hessian of `log Z` and hence
/// symmetric, so the product is the directional derivative of the
/// marginals along `upstream`, computed by running both passes on dual
/// numbers.
pub fn marginal_backward(scores: &ArcScores, upstream: &[f64]) -> Result<Vec<f64>> {
    require_root(scores)?;
    crate::error::check_len(scores.indexer().len(), upstream.len())?;
    if upstream.iter().any(|x| !x.is_finite()) {
        return Err(Error::invalid("upstream gradient must be finite"));
    }
    let passes = chart::run(scores, |k| Dual {
        v: scores.values()[k],
        d: upstream[k],
    });
    Ok(passes.marginals.into_iter().map(|x| x.d).collect())
}

/// `log Z` alone.
pub fn log_partition(scores: &ArcScores) -> Result<f64> {
    require_root(scores)?;
    Ok(chart::run(scores, |k| scores.values()[k])
        .log_partition
        .value())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decode::eisner_decode;
    use crate::structures::ArcIndexer;
    use proptest::prelude::*;

    fn scores_from(n: usize, raw: &[f64]) -> ArcScores {
        let ix = ArcIndexer::new(n, true).unwrap();
        ArcScores::new(ix, raw[..ix.len()].to_vec()).unwrap()
    }

    #[test]
    fn single_word() {
        let s = scores_from(1, &[0.7]);
        let r = inside_outside(&s).unwrap();
        assert_eq!(r.arc_marginals.values(), &[1.0]);
        assert!((r.log_partition - 0.7).abs() < 1e-15);
        assert_eq!(marginal_backward(&s, &[1.0]).unwrap(), vec![0.0]);
    }

    #[test]
    fn two_words_uniform() {
        let ix = ArcIndexer::new(2, true).unwrap();
        let s = ArcScores::new(ix, vec![0.0; 4]).unwrap();
        for r in [
            inside_outside(&s).unwrap(),
            brute_force_marginals(&s).unwrap(),
        ] {
            let m = r.arc_marginals.values();
            let at = |h, m_| m[ix.index(h, m_).unwrap()];
            assert!((at(0, 1) - 2.0 / 3.0).abs() < 1e-12);
            assert!((at(0, 2) - 2.0 / 3.0).abs() < 1e-12);
            assert!((at(1, 2) - 1.0 / 3.0).abs() < 1e-12);
            assert!((at(2, 1) - 1.0 / 3.0).abs() < 1e-12);
            assert!((r.log_partition - 3f64.ln()).abs() < 1e-12);
        }
    }

    #[test]
    fn counts_trees_at_zero_scores() {
        for (n, count) in [(3usize, 12.0f64), (4, 55.0), (5, 273.0)] {
            let s = scores_from(n, &vec![0.0; 64]);
            assert!((log_partition(&s).unwrap() - count.ln()).abs() < 1e-12);
        }
    }

    #[test]
    fn survives_large_scores() {
        let raw: Vec<f64> = (0..30).map(|k| 400.0 * ((k % 7) as f64 - 3.0)).collect();
        let r = inside_outside(&scores_from(5, &raw)).unwrap();
        assert!(r.log_partition.is_finite());
        assert!(r.arc_marginals.values().iter().all(|x| x.is_finite()));
    }

    #[test]
    fn zero_upstream_gives_zero() {
        let raw: Vec<f64> = (0..9).map(|k| k as f64 * 0.1).collect();
        let s = scores_from(3, &raw);
        assert!(marginal_backward(&s, &[0.0; 9])
            .unwrap()
            .iter()
            .all(|&x| x == 0.0));
    }

    #[test]
    fn temperature_concentrates_on_argmax() {
        let raw = [
            0.3, -0.2, 0.9, 0.1, -0.7, 0.5, 0.8, -0.4, 0.2, 0.6, -0.1, 0.4, 0.05, 0.7, -0.3, 0.35,
        ];
        let s = scores_from(4, &raw);
        let best = eisner_decode(&s).unwrap();
        let hot = inside_outside(&s.scaled(50.0).unwrap()).unwrap();
        for (h, m) in best.arcs() {
            assert!(hot.arc_marginals.values()[s.indexer().index(h, m).unwrap()] >= 0.99);
        }
    }

    proptest! {
        #[test]
        fn matches_enumeration(n in 1usize..=5, raw in prop::collection::vec(-3.0f64..3.0, 25)) {
            let s = scores_from(n, &raw);
            let fast = inside_outside(&s).unwrap();
            let slow = brute_force_marginals(&s).unwrap();
            prop_assert!((fast.log_partition - slow.log_partition).abs() < 1e-10);
            for (a, b) in fast.arc_marginals.values().iter().zip(slow.arc_marginals.values()) {
                prop_assert!((a - b).abs() < 1e-10);
            }
            for m in 1..=n {
                let total: f64 = s.indexer().incoming(m).map(|k| fast.arc_marginals.values()[k]).sum();
                prop_assert!((total - 1.0).abs() < 1e-10);
            }
        }

        #[test]
        fn modifier_shift_moves_partition(raw in prop::collection::vec(-2.0f64..2.0, 16), c in -3.0f64..3.0) {
            let s = scores_from(4, &raw);
            let mut shifted = s.values().to_vec();
            for k in s.indexer().incoming(3) {
                shifted[k] += c;
            }
            let t = ArcScores::new(*s.indexer(), shifted).unwrap();
            let a = brute_force_marginals(&s).unwrap();
            let b = brute_force_marginals(&t).unwrap();
            prop_assert!((b.log_partition - a.log_partition - c).abs() < 1e-10);
            for (x, y) in a.arc_marginals.values().iter().zip(b.arc_marginals.values()) {
                prop_assert!((x - y).abs() < 1e-10);
            }
        }

        #[test]
        fn backward_matches_finite_differences(raw in prop::collection::vec(-2.0f64..2.0, 9), up in prop::collection::vec(-1.0f64..1.0, 9)) {
            let s = scores_from(3, &raw);
            let analytic = marginal_backward(&s, &up).unwrap();
            let h = 1e-5;
            let objective = |v: &[f64]| -> f64 {
                let r = inside_outside(&ArcScores::new(*s.indexer(), v.to_vec()).unwrap()).unwrap();
                r.arc_marginals.values().iter().zip(&up).map(|(a, b)| a * b).sum()
            };
            let numeric: Vec<f64> = (0..9).map(|k| {
                let mut plus = raw.clone();
                let mut minus = raw.clone();
                plus[k] += h;
                minus[k] -= h;
                (objective(&plus) - objective(&minus)) / (2.0 * h)
            }).collect();
            let diff: f64 = analytic.iter().zip(&numeric).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            let scale = analytic.iter().map(|a| a * a).sum::<f64>().sqrt()
                .max(numeric.iter().map(|a| a * a).sum::<f64>().sqrt())
                .max(1e-6);
            prop_assert!(diff / scale <= 1e-5, "rel err {}", diff / scale);
        }

        #[test]
        fn partition_gradient_is_marginals(raw in prop::collection::vec(-2.0f64..2.0, 16)) {
            let s = scores_from(4, &raw);
            let m = inside_outside(&s).unwrap();
            let h = 1e-6;
            for k in 0..16 {
                let mut plus = raw.clone();
                let mut minus = raw.clone();
                plus[k] += h;
                minus[k] -= h;
                let fd = (log_partition(&ArcScores::new(*s.indexer(), plus).unwrap()).unwrap()
                    - log_partition(&ArcScores::new(*s.indexer(), minus).unwrap()).unwrap()) / (2.0 * h);
                prop_assert!((fd - m.arc_marginals.values()[k]).abs() <= 1e-5 * fd.abs().max(1e-3));
            }
        }
    }
}
