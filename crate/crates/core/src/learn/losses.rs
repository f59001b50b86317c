use crate::decode::{
    cost_augmented_graph, cost_augmented_tree, graph_score, hamming, ArcScores, SdpScores,
};
use crate::marginals::inside_outside;
use crate::structures::{DepTree, SemGraph};
use crate::Result;

/// A scalar loss and its (sub)gradient with respect to the scores.
#[derive(Debug, Clone, PartialEq)]
pub struct LossGrad {
    pub loss: f64,
    pub grad: Vec<f64>,
}

/// Structured hinge loss over projective trees with Hamming cost:
/// `max_z [zᵀs + w·cost(z, gold)] − goldᵀs`, subgradient `z_aug − z_gold`.
pub fn structured_hinge_tree(
    scores: &ArcScores,
    gold: &DepTree,
    cost_weight: f64,
) -> Result<LossGrad> {
    let ix = scores.indexer();
    let aug = cost_augmented_tree(scores, gold, cost_weight)?;
    let z_aug = aug.encode(ix)?;
    let z_gold = gold.encode(ix)?;
    let loss = aug.score(scores.values(), ix)
        + cost_weight * hamming(z_aug.values(), z_gold.values())
        - gold.score(scores.values(), ix);
    let grad = z_aug
        .values()
        .iter()
        .zip(z_gold.values())
        .map(|(a, g)| a - g)
        .collect();
    Ok(LossGrad {
        loss: loss.max(0.0),
        grad,
    })
}

/// Structured hinge loss over labeled graphs; the gradient uses the joint
/// `[unlabeled | labeled]` layout.
pub fn structured_hinge_graph(
    scores: &SdpScores,
    gold: &SemGraph,
    cost_weight: f64,
) -> Result<LossGrad> {
    let ix = scores.indexer();
    let aug = cost_augmented_graph(scores, gold, cost_weight)?;
    let z_aug = aug.encode(ix)?;
    let z_gold = gold.encode(ix)?;
    let loss = graph_score(&aug, scores) + cost_weight * hamming(z_aug.values(), z_gold.values())
        - graph_score(gold, scores);
    let grad = z_aug
        .values()
        .iter()
        .zip(z_gold.values())
        .map(|(a, g)| a - g)
        .collect();
    Ok(LossGrad {
        loss: loss.max(0.0),
        grad,
    })
}

/// Negative log-likelihood of `gold` under `p(z) ∝ exp(zᵀs)` over
/// projective trees; gradient `marginals − z_gold`.
pub fn log_loss_tree(scores: &ArcScores, gold: &DepTree) -> Result<LossGrad> {
    let ix = scores.indexer();
    let result = inside_outside(scores)?;
    let z_gold = gold.encode(ix)?;
    let loss = result.log_partition - gold.score(scores.values(), ix);
    let grad = result
        .arc_marginals
        .values()
        .iter()
        .zip(z_gold.values())
        .map(|(m, g)| m - g)
        .collect();
    Ok(LossGrad {
        loss: loss.max(0.0),
        grad,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::structures::{ArcIndexer, LabeledArcIndexer};
    use proptest::prelude::*;

    fn tree_scores(n: usize, raw: &[f64]) -> ArcScores {
        let ix = ArcIndexer::new(n, true).unwrap();
        ArcScores::new(ix, raw[..ix.len()].to_vec()).unwrap()
    }

    #[test]
    fn margin_gives_zero_loss() {
        let ix = ArcIndexer::new(3, true).unwrap();
        let gold = DepTree::new(vec![0, 1, 1]).unwrap();
        let v: Vec<f64> = gold
            .encode(&ix)
            .unwrap()
            .values()
            .iter()
            .map(|x| 5.0 * x)
            .collect();
        let r = structured_hinge_tree(&ArcScores::new(ix, v).unwrap(), &gold, 1.0).unwrap();
        assert_eq!(r.loss, 0.0);
        assert!(r.grad.iter().all(|&g| g == 0.0));
    }

    #[test]
    fn zero_scores_give_max_cost() {
        let ix = ArcIndexer::new(3, true).unwrap();
        let gold = DepTree::new(vec![0, 1, 2]).unwrap();
        let r =
            structured_hinge_tree(&ArcScores::new(ix, vec![0.0; 9]).unwrap(), &gold, 1.0).unwrap();
        let worst = crate::decode::enumerate_trees(3, true)
            .unwrap()
            .iter()
            .map(|t| {
                hamming(
                    t.encode(&ix).unwrap().values(),
                    gold.encode(&ix).unwrap().values(),
                )
            })
            .fold(0.0, f64::max);
        assert_eq!(r.loss, worst);
    }

    #[test]
    fn graph_hinge_zero_at_margin() {
        let ix = LabeledArcIndexer::new(ArcIndexer::new(3, false).unwrap(), 2).unwrap();
        let gold = SemGraph::new(3, [(1, 2, 1), (3, 1, 0)]).unwrap();
        let z = gold.encode(&ix).unwrap();
        let joint: Vec<f64> = z.values().iter().map(|x| 4.0 * x - 2.0).collect();
        let r = structured_hinge_graph(&SdpScores::from_joint(ix, &joint).unwrap(), &gold, 1.0)
            .unwrap();
        assert_eq!(r.loss, 0.0);
    }

    #[test]
    fn single_word_log_loss_is_zero() {
        let r = log_loss_tree(&tree_scores(1, &[2.5]), &DepTree::new(vec![0]).unwrap()).unwrap();
        assert!(r.loss.abs() < 1e-15);
        assert_eq!(r.grad, vec![0.0]);
    }

    proptest! {
        #[test]
        fn hinge_descends_along_negative_subgradient(raw in prop::collection::vec(-2.0f64..2.0, 16)) {
            let s = tree_scores(4, &raw);
            let gold = DepTree::new(vec![2, 0, 2, 3]).unwrap();
            let r = structured_hinge_tree(&s, &gold, 1.0).unwrap();
            prop_assume!(r.loss > 1e-6);
            let step: Vec<f64> = r.grad.iter().map(|g| -1e-6 * g).collect();
            let moved = structured_hinge_tree(&s.shifted(&step).unwrap(), &gold, 1.0).unwrap();
            prop_assert!(moved.loss < r.loss);
        }

        #[test]
        fn log_loss_nonnegative_and_matches_fd(raw in prop::collection::vec(-2.0f64..2.0, 16)) {
            let s = tree_scores(4, &raw);
            let gold = DepTree::new(vec![0, 1, 4, 1]).unwrap();
            let r = log_loss_tree(&s, &gold).unwrap();
            prop_assert!(r.loss >= 0.0);
            let h = 1e-5;
            for k in 0..16 {
                let mut plus = raw.clone();
                let mut minus = raw.clone();
                plus[k] += h;
                minus[k] -= h;
                let fd = (log_loss_tree(&tree_scores(4, &plus), &gold).unwrap().loss
                    - log_loss_tree(&tree_scores(4, &minus), &gold).unwrap().loss) / (2.0 * h);
                prop_assert!((fd - r.grad[k]).abs() <= 1e-5 * fd.abs().max(1e-2));
            }
        }
    }
}
