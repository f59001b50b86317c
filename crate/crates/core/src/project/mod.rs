//! Euclidean projections onto the relaxed polytopes, each decomposed into
//! independent low-dimensional problems.

mod oracle;
mod sdp;
mod simplex;

pub use oracle::{generic_qp_oracle, KKT_TOL, MAX_ORACLE_DIM};
pub use simplex::{project_simplex, SimplexTarget};

use crate::structures::{ArcIndexer, LabeledArcIndexer, StructureKind, StructureVec};
use crate::{Error, Result};

fn check_finite(values: &[f64]) -> Result<()> {
    if values.iter().any(|x| !x.is_finite()) {
        return Err(Error::invalid("cannot project non-finite values"));
    }
    Ok(())
}

/// Projects onto the single-headedness relaxation: the incoming
/// coordinates of every modifier are projected onto the unit simplex
/// independently.
pub fn project_dep(p_hat: &StructureVec, indexer: &ArcIndexer) -> Result<StructureVec> {
    project_dep_values(p_hat.values(), indexer)
        .map(|values| StructureVec::from_parts(values, StructureKind::Relaxed))
}

/// [`project_dep`] on a raw slice.
pub fn project_dep_values(values: &[f64], indexer: &ArcIndexer) -> Result<Vec<f64>> {
    crate::error::check_len(indexer.len(), values.len())?;
    check_finite(values)?;
    let mut out = Vec::with_capacity(values.len());
    for m in 1..=indexer.n() {
        let block = values[indexer.incoming(m)].to_vec();
        out.extend(project_simplex(&SimplexTarget::unit(block))?);
    }
    Ok(out)
}

/// Projects a joint `[unlabeled | labeled]` vector onto the label-coupling
/// relaxation, one arc at a time.
pub fn project_sdp(p_hat: &StructureVec, indexer: &LabeledArcIndexer) -> Result<StructureVec> {
    project_sdp_values(p_hat.values(), indexer)
        .map(|values| StructureVec::from_parts(values, StructureKind::Relaxed))
}

/// [`project_sdp`] on a raw slice.
pub fn project_sdp_values(values: &[f64], indexer: &LabeledArcIndexer) -> Result<Vec<f64>> {
    crate::error::check_len(indexer.joint_len(), values.len())?;
    check_finite(values)?;
    let d = indexer.base().len();
    let mut out = vec![0.0; values.len()];
    let (arcs, labels) = out.split_at_mut(d);
    for (k, arc) in arcs.iter_mut().enumerate() {
        let range = indexer.labels_of(k);
        *arc = sdp::project_arc(
            values[k],
            &values[d + range.start..d + range.end],
            &mut labels[range],
        );
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::structures::{ConstraintSystem, DepTree};
    use proptest::prelude::*;

    #[test]
    fn tree_vertices_are_fixed_points() {
        let ix = ArcIndexer::new(4, true).unwrap();
        let z = DepTree::new(vec![2, 0, 4, 2]).unwrap().encode(&ix).unwrap();
        assert_eq!(project_dep(&z, &ix).unwrap().values(), z.values());
    }

    #[test]
    fn rootless_single_candidate_is_forced() {
        let ix = ArcIndexer::new(2, false).unwrap();
        let p = project_dep_values(&[-3.0, 0.2], &ix).unwrap();
        assert_eq!(p, vec![1.0, 1.0]);
    }

    #[test]
    fn sdp_single_label() {
        let ix = LabeledArcIndexer::new(ArcIndexer::new(2, false).unwrap(), 1).unwrap();
        let p = project_sdp_values(&[0.4, 0.0, 0.8, 0.0], &ix).unwrap();
        let want = [0.6, 0.0, 0.6, 0.0];
        assert!(p.iter().zip(want).all(|(a, b)| (a - b).abs() < 1e-12));
    }

    #[test]
    fn rejects_bad_input() {
        let ix = ArcIndexer::new(2, true).unwrap();
        assert!(project_dep_values(&[0.0; 3], &ix).is_err());
        assert!(project_dep_values(&[0.0, f64::NAN, 0.0, 0.0], &ix).is_err());
    }

    proptest! {
        #[test]
        fn dep_matches_oracle(n in 1usize..=5, raw in prop::collection::vec(-2.0f64..2.0, 25)) {
            let ix = ArcIndexer::new(n, true).unwrap();
            let v = &raw[..ix.len()];
            let fast = project_dep_values(v, &ix).unwrap();
            let slow = generic_qp_oracle(v, &ConstraintSystem::dep(&ix)).unwrap();
            for (a, b) in fast.iter().zip(&slow) {
                prop_assert!((a - b).abs() < 1e-8);
            }
        }

        #[test]
        fn sdp_matches_oracle(n in 2usize..=3, labels in 1usize..=3, raw in prop::collection::vec(-1.5f64..2.0, 24)) {
            let ix = LabeledArcIndexer::new(ArcIndexer::new(n, false).unwrap(), labels).unwrap();
            let v = &raw[..ix.joint_len()];
            let fast = project_sdp_values(v, &ix).unwrap();
            let slow = generic_qp_oracle(v, &ConstraintSystem::sdp(&ix)).unwrap();
            for (a, b) in fast.iter().zip(&slow) {
                prop_assert!((a - b).abs() < 1e-8);
            }
            prop_assert!(ConstraintSystem::sdp(&ix).max_violation(&fast).unwrap() <= 1e-8);
        }

        #[test]
        fn idempotent(raw in prop::collection::vec(-3.0f64..3.0, 24)) {
            let ix = LabeledArcIndexer::new(ArcIndexer::new(3, false).unwrap(), 3).unwrap();
            let once = project_sdp_values(&raw, &ix).unwrap();
            let twice = project_sdp_values(&once, &ix).unwrap();
            for (a, b) in once.iter().zip(&twice) {
                prop_assert!((a - b).abs() < 1e-9);
            }
            let ix = ArcIndexer::new(4, true).unwrap();
            let once = project_dep_values(&raw[..16], &ix).unwrap();
            let twice = project_dep_values(&once, &ix).unwrap();
            for (a, b) in once.iter().zip(&twice) {
                prop_assert!((a - b).abs() < 1e-9);
            }
        }
    }
}
