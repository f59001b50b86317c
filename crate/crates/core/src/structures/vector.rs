use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Absolute tolerance used when checking relaxed coordinates and constraint
/// feasibility.
pub const FEASIBILITY_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StructureKind {
    /// Binary: an actual structure `ẑ`.
    Vertex,
    /// A point of the relaxed polytope, such as a projection or marginals.
    Relaxed,
}

/// A structure vector over the coordinates of an indexer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StructureVec {
    values: Vec<f64>,
    kind: StructureKind,
}

impl StructureVec {
    /// Validated vertex: every coordinate is exactly 0 or 1.
    pub fn vertex(values: Vec<f64>) -> Result<Self> {
        if let Some(x) = values.iter().find(|&&x| x != 0.0 && x != 1.0) {
            return Err(Error::invalid(format!(
                "vertex coordinate {x} is not binary"
            )));
        }
        Ok(StructureVec {
            values,
            kind: StructureKind::Vertex,
        })
    }

    /// Validated relaxed point: every coordinate in `[0, 1]` up to
    /// [`FEASIBILITY_TOL`].
    pub fn relaxed(values: Vec<f64>) -> Result<Self> {
        if let Some(x) = values
            .iter()
            .find(|&&x| !(-FEASIBILITY_TOL..=1.0 + FEASIBILITY_TOL).contains(&x))
        {
            return Err(Error::invalid(format!(
                "relaxed coordinate {x} outside [0, 1]"
            )));
        }
        Ok(StructureVec {
            values,
            kind: StructureKind::Relaxed,
        })
    }

    pub(crate) fn from_parts(values: Vec<f64>, kind: StructureKind) -> Self {
        StructureVec { values, kind }
    }

    pub fn kind(&self) -> StructureKind {
        self.kind
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validation() {
        assert!(StructureVec::vertex(vec![0.0, 1.0]).is_ok());
        assert!(StructureVec::vertex(vec![0.5]).is_err());
        assert!(StructureVec::relaxed(vec![0.5, 1.0 + 1e-9]).is_ok());
        assert!(StructureVec::relaxed(vec![1.1]).is_err());
    }
}
