use serde::{Deserialize, Serialize};

use super::{ArcIndexer, LabeledArcIndexer, StructureVec};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RowKind {
    /// `aᵀp = b`
    Eq,
    /// `aᵀp ≤ b`
    Le,
}

/// One sparse constraint row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub coeffs: Vec<(usize, f64)>,
    pub rhs: f64,
    pub kind: RowKind,
}

impl Row {
    pub fn dot(&self, v: &[f64]) -> f64 {
        self.coeffs.iter().map(|&(k, a)| a * v[k]).sum()
    }

    /// Amount by which `v` violates the row (0 when satisfied).
    pub fn violation(&self, v: &[f64]) -> f64 {
        let r = self.dot(v) - self.rhs;
        match self.kind {
            RowKind::Eq => r.abs(),
            RowKind::Le => r.max(0.0),
        }
    }
}

/// Linear description `{p : A p (=|≤) b, 0 ≤ p ≤ 1}` of a relaxed polytope.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstraintSystem {
    pub dim: usize,
    pub rows: Vec<Row>,
    /// Whether the `[0, 1]` box applies to every coordinate.
    pub unit_box: bool,
    /// Auxiliary variables appended after the structure coordinates. Both
    /// shipped polytopes need none.
    pub auxiliary_count: usize,
}

/// Outcome of [`feasibility_check`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Feasibility {
    pub feasible: bool,
    pub max_violation: f64,
}

impl ConstraintSystem {
    /// Single-headedness relaxation: incoming arcs of every modifier sum to 1.
    pub fn dep(indexer: &ArcIndexer) -> Self {
        let rows = (1..=indexer.n())
            .map(|m| Row {
                coeffs: indexer.incoming(m).map(|k| (k, 1.0)).collect(),
                rhs: 1.0,
                kind: RowKind::Eq,
            })
            .collect();
        ConstraintSystem {
            dim: indexer.len(),
            rows,
            unit_box: true,
            auxiliary_count: 0,
        }
    }

    /// Label coupling over the joint `[unlabeled | labeled]` layout: the
    /// labels of every arc sum to the arc's own coordinate.
    pub fn sdp(indexer: &LabeledArcIndexer) -> Self {
        let d = indexer.base().len();
        let rows = (0..d)
            .map(|k| {
                let mut coeffs = vec![(k, -1.0)];
                coeffs.extend(indexer.labels_of(k).map(|q| (d + q, 1.0)));
                Row {
                    coeffs,
                    rhs: 0.0,
                    kind: RowKind::Eq,
                }
            })
            .collect();
        ConstraintSystem {
            dim: indexer.joint_len(),
            rows,
            unit_box: true,
            auxiliary_count: 0,
        }
    }

    /// Largest row or box violation of `v`.
    pub fn max_violation(&self, v: &[f64]) -> Result<f64> {
        crate::error::check_len(self.dim + self.auxiliary_count, v.len())?;
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::invalid("vector contains non-finite values"));
        }
        let mut worst = self
            .rows
            .iter()
            .map(|r| r.violation(v))
            .fold(0.0_f64, f64::max);
        if self.unit_box {
            for &x in &v[..self.dim] {
                worst = worst.max(-x).max(x - 1.0);
            }
        }
        Ok(worst)
    }
}

/// Reports the largest violation of `cs` by `v` and whether it is within
/// `tol`.
pub fn feasibility_check(v: &StructureVec, cs: &ConstraintSystem, tol: f64) -> Result<Feasibility> {
    let max_violation = cs.max_violation(v.values())?;
    Ok(Feasibility {
        feasible: max_violation <= tol,
        max_violation,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::structures::{DepTree, FEASIBILITY_TOL};

    #[test]
    fn tree_is_feasible() {
        let ix = ArcIndexer::new(3, true).unwrap();
        let v = DepTree::new(vec![2, 0, 2]).unwrap().encode(&ix).unwrap();
        let f = feasibility_check(&v, &ConstraintSystem::dep(&ix), FEASIBILITY_TOL).unwrap();
        assert!(f.feasible);
        assert_eq!(f.max_violation, 0.0);
    }

    #[test]
    fn zeros_violate_single_headedness() {
        let ix = ArcIndexer::new(2, true).unwrap();
        let v = StructureVec::relaxed(vec![0.0; ix.len()]).unwrap();
        let f = feasibility_check(&v, &ConstraintSystem::dep(&ix), FEASIBILITY_TOL).unwrap();
        assert!(!f.feasible);
        assert_eq!(f.max_violation, 1.0);
    }

    #[test]
    fn uniform_heads_are_feasible() {
        let ix = ArcIndexer::new(4, true).unwrap();
        let u = 1.0 / ix.heads_per_modifier() as f64;
        let v = StructureVec::relaxed(vec![u; ix.len()]).unwrap();
        let f = feasibility_check(&v, &ConstraintSystem::dep(&ix), FEASIBILITY_TOL).unwrap();
        assert!(f.feasible, "violation {}", f.max_violation);
    }

    #[test]
    fn dimension_mismatch() {
        let ix = ArcIndexer::new(2, true).unwrap();
        let v = StructureVec::relaxed(vec![0.0; 3]).unwrap();
        assert!(feasibility_check(&v, &ConstraintSystem::dep(&ix), 1e-8).is_err());
    }

    #[test]
    fn le_rows() {
        let cs = ConstraintSystem {
            dim: 2,
            rows: vec![Row {
                coeffs: vec![(0, 1.0), (1, 1.0)],
                rhs: 1.0,
                kind: RowKind::Le,
            }],
            unit_box: true,
            auxiliary_count: 0,
        };
        assert_eq!(cs.max_violation(&[0.2, 0.3]).unwrap(), 0.0);
        assert!((cs.max_violation(&[0.9, 0.3]).unwrap() - 0.2).abs() < 1e-12);
    }
}
