use super::SdpScores;
use crate::structures::SemGraph;

/// Exact first-order semantic dependency decoding.
///
/// Arcs are independent once the determinism constraint is dropped: each
/// candidate arc takes its best label `ℓ*` (lowest label on ties) and is
/// kept iff `unlabeled + head + labeled(ℓ*) > 0`.
pub fn sdp_decode(scores: &SdpScores) -> SemGraph {
    let indexer = scores.indexer();
    let labels = indexer.labels();
    let mut graph = SemGraph::empty(indexer.base().n());
    for (k, h, m) in indexer.base().arcs() {
        let block = &scores.labeled()[k * labels..(k + 1) * labels];
        let (best, best_score) =
            block
                .iter()
                .copied()
                .enumerate()
                .fold(
                    (0, f64::NEG_INFINITY),
                    |acc, (l, v)| if v > acc.1 { (l, v) } else { acc },
                );
        if scores.arc_score(k) + best_score > 0.0 {
            graph.insert(h, m, best).expect("decoded arc is valid");
        }
    }
    graph
}

/// `zᵀs` of a graph over the joint layout (head parts included).
pub fn graph_score(graph: &SemGraph, scores: &SdpScores) -> f64 {
    let indexer = scores.indexer();
    graph
        .triples()
        .map(|(h, m, l)| {
            let k = indexer.base().index(h, m).expect("candidate arc");
            scores.arc_score(k) + scores.labeled()[k * indexer.labels() + l]
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::structures::{ArcIndexer, LabeledArcIndexer};

    fn indexer(n: usize, labels: usize) -> LabeledArcIndexer {
        LabeledArcIndexer::new(ArcIndexer::new(n, false).unwrap(), labels).unwrap()
    }

    #[test]
    fn all_negative_is_empty() {
        let ix = indexer(3, 2);
        let s = SdpScores::new(ix, vec![-1.0; 6], vec![-0.5; 12], None).unwrap();
        assert!(sdp_decode(&s).is_empty());
    }

    #[test]
    fn picks_best_label_when_gain_positive() {
        let ix = indexer(2, 2);
        let (k, _) = (ix.base().index(1, 2).unwrap(), ());
        let mut unlabeled = vec![-5.0; 2];
        unlabeled[k] = 0.5;
        let mut labeled = vec![-5.0; 4];
        labeled[k * 2] = -0.1;
        labeled[k * 2 + 1] = 0.3;
        let s = SdpScores::new(ix, unlabeled, labeled, None).unwrap();
        let g = sdp_decode(&s);
        assert_eq!(g.triples().collect::<Vec<_>>(), vec![(1, 2, 1)]);
    }

    #[test]
    fn head_parts_fold_into_arcs() {
        let ix = indexer(2, 1);
        let s = SdpScores::new(
            ix,
            vec![-1.0, -1.0],
            vec![0.5, 0.5],
            Some(vec![0.0, 0.0, 1.0]),
        )
        .unwrap();
        // only arcs leaving word 2 gain the head bonus
        assert_eq!(
            sdp_decode(&s).triples().collect::<Vec<_>>(),
            vec![(2, 1, 0)]
        );
    }
}
