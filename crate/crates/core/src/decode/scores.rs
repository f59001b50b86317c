use serde::{Deserialize, Serialize};

use crate::structures::{ArcIndexer, LabeledArcIndexer};
use crate::{Error, Result};

/// Arc-factored scores `s`, one per coordinate of `indexer`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArcScores {
    indexer: ArcIndexer,
    values: Vec<f64>,
}

impl ArcScores {
    pub fn new(indexer: ArcIndexer, values: Vec<f64>) -> Result<Self> {
        crate::error::check_len(indexer.len(), values.len())?;
        check_finite(&values)?;
        Ok(ArcScores { indexer, values })
    }

    /// Builds scores from a dense `(n+1) × (n+1)` matrix indexed
    /// `[head][modifier]`; entries that are not candidate arcs are ignored.
    pub fn from_matrix(matrix: &[Vec<f64>], includes_root: bool) -> Result<Self> {
        let n = matrix
            .len()
            .checked_sub(1)
            .ok_or_else(|| Error::invalid("empty score matrix"))?;
        let indexer = ArcIndexer::new(n, includes_root)?;
        if let Some(row) = matrix.iter().find(|r| r.len() != n + 1) {
            return Err(Error::DimensionMismatch {
                expected: n + 1,
                got: row.len(),
            });
        }
        let values = indexer.arcs().map(|(_, h, m)| matrix[h][m]).collect();
        ArcScores::new(indexer, values)
    }

    pub fn indexer(&self) -> &ArcIndexer {
        &self.indexer
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Score of `head → modifier`; panics if the arc is not a candidate.
    pub fn get(&self, head: usize, modifier: usize) -> f64 {
        self.values[self.indexer.index(head, modifier).expect("candidate arc")]
    }

    /// Scores plus `delta` coordinate-wise.
    pub fn shifted(&self, delta: &[f64]) -> Result<Self> {
        crate::error::check_len(self.values.len(), delta.len())?;
        let values = self.values.iter().zip(delta).map(|(a, b)| a + b).collect();
        ArcScores::new(self.indexer, values)
    }

    /// Scores multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        ArcScores::new(
            self.indexer,
            self.values.iter().map(|x| x * factor).collect(),
        )
    }
}

/// Part scores of a first-order semantic dependency parser: unlabeled arcs,
/// labeled arcs and (optional) head parts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SdpScores {
    indexer: LabeledArcIndexer,
    unlabeled: Vec<f64>,
    labeled: Vec<f64>,
    /// Per-node head scores indexed by node (`0..=n`). Folded into every
    /// arc leaving the node.
    head: Vec<f64>,
}

impl SdpScores {
    pub fn new(
        indexer: LabeledArcIndexer,
        unlabeled: Vec<f64>,
        labeled: Vec<f64>,
        head: Option<Vec<f64>>,
    ) -> Result<Self> {
        crate::error::check_len(indexer.base().len(), unlabeled.len())?;
        crate::error::check_len(indexer.len(), labeled.len())?;
        let head = head.unwrap_or_else(|| vec![0.0; indexer.base().node_count()]);
        crate::error::check_len(indexer.base().node_count(), head.len())?;
        check_finite(&unlabeled)?;
        check_finite(&labeled)?;
        check_finite(&head)?;
        Ok(SdpScores {
            indexer,
            unlabeled,
            labeled,
            head,
        })
    }

    /// Splits a joint `[unlabeled | labeled]` vector.
    pub fn from_joint(indexer: LabeledArcIndexer, joint: &[f64]) -> Result<Self> {
        crate::error::check_len(indexer.joint_len(), joint.len())?;
        let d = indexer.base().len();
        SdpScores::new(indexer, joint[..d].to_vec(), joint[d..].to_vec(), None)
    }

    pub fn indexer(&self) -> &LabeledArcIndexer {
        &self.indexer
    }

    pub fn unlabeled(&self) -> &[f64] {
        &self.unlabeled
    }

    pub fn labeled(&self) -> &[f64] {
        &self.labeled
    }

    pub fn head(&self) -> &[f64] {
        &self.head
    }

    /// Unlabeled score of arc coordinate `k` with the head part folded in.
    pub fn arc_score(&self, k: usize) -> f64 {
        let (h, _) = self.indexer.base().arc(k).expect("coordinate in range");
        self.unlabeled[k] + self.head[h]
    }

    /// Joint `[unlabeled + head | labeled]` vector.
    pub fn joint(&self) -> Vec<f64> {
        let d = self.indexer.base().len();
        let mut out: Vec<f64> = (0..d).map(|k| self.arc_score(k)).collect();
        out.extend_from_slice(&self.labeled);
        out
    }

    /// Scores plus `delta` over the joint layout.
    pub fn shifted(&self, delta: &[f64]) -> Result<Self> {
        crate::error::check_len(self.indexer.joint_len(), delta.len())?;
        let d = self.indexer.base().len();
        let unlabeled = self
            .unlabeled
            .iter()
            .zip(&delta[..d])
            .map(|(a, b)| a + b)
            .collect();
        let labeled = self
            .labeled
            .iter()
            .zip(&delta[d..])
            .map(|(a, b)| a + b)
            .collect();
        SdpScores::new(self.indexer, unlabeled, labeled, Some(self.head.clone()))
    }
}

fn check_finite(values: &[f64]) -> Result<()> {
    if values.iter().any(|x| !x.is_finite()) {
        return Err(Error::invalid("scores must be finite"));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_nan() {
        let ix = ArcIndexer::new(2, true).unwrap();
        assert!(ArcScores::new(ix, vec![0.0, f64::NAN, 0.0, 0.0]).is_err());
        assert!(ArcScores::new(ix, vec![0.0; 3]).is_err());
    }

    #[test]
    fn matrix_layout() {
        let m = vec![
            vec![0.0, 1.0, 2.0],
            vec![0.0, 0.0, 3.0],
            vec![0.0, 4.0, 0.0],
        ];
        let s = ArcScores::from_matrix(&m, true).unwrap();
        assert_eq!(s.get(0, 2), 2.0);
        assert_eq!(s.get(2, 1), 4.0);
        assert_eq!(s.get(1, 2), 3.0);
    }
}
