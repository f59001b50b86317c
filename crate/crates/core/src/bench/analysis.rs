//! Comparing two systems: where do their intermediate predictions agree,
//! and how do the changed heads relate to the semantic graph?

use serde::{Deserialize, Serialize};

use super::eval::{score_predictions, EvalReport};
use super::synth::EvalExample;
use crate::learn::{EndLabel, IntermediatePrediction, Prediction};
use crate::structures::{DepTree, SemGraph};
use crate::Result;

/// How the head changes were counted when categories overlap.
pub const OVERLAP_CONVENTION: &str =
    "a head change matching several categories is counted in each of them";

/// Head changes `h → h'` of modifier `m` between two trees.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct HeadChangeCounts {
    /// `h'` is a semantic head of `m`.
    pub a: usize,
    /// `h'` is a semantic modifier of `m`.
    pub b: usize,
    /// The old head `h` is a semantic modifier of `m`.
    pub c: usize,
    /// Changes matching none of the above.
    pub other: usize,
    pub total: usize,
}

impl std::ops::AddAssign for HeadChangeCounts {
    fn add_assign(&mut self, o: HeadChangeCounts) {
        self.a += o.a;
        self.b += o.b;
        self.c += o.c;
        self.other += o.other;
        self.total += o.total;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CategoryFractions {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub other: f64,
}

impl HeadChangeCounts {
    /// Fractions of all changes; zero when nothing changed.
    pub fn fractions(&self) -> CategoryFractions {
        let f = |x: usize| {
            if self.total == 0 {
                0.0
            } else {
                x as f64 / self.total as f64
            }
        };
        CategoryFractions {
            a: f(self.a),
            b: f(self.b),
            c: f(self.c),
            other: f(self.other),
        }
    }
}

pub fn categorize_head_changes(
    before: &DepTree,
    after: &DepTree,
    semantic: &SemGraph,
) -> Result<HeadChangeCounts> {
    crate::error::check_len(before.n(), after.n())?;
    crate::error::check_len(before.n(), semantic.n())?;
    let mut counts = HeadChangeCounts::default();
    for m in 1..=before.n() {
        let (h, h_new) = (before.head(m), after.head(m));
        if h == h_new {
            continue;
        }
        counts.total += 1;
        let a = h_new > 0 && semantic.contains(h_new, m);
        let b = h_new > 0 && semantic.contains(m, h_new);
        let c = h > 0 && semantic.contains(m, h);
        counts.a += usize::from(a);
        counts.b += usize::from(b);
        counts.c += usize::from(c);
        counts.other += usize::from(!(a || b || c));
    }
    Ok(counts)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionReport {
    pub size: usize,
    pub a: EvalReport,
    pub b: EvalReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgreementReport {
    /// Instances where both systems predict the same intermediate
    /// structure.
    pub same: PartitionReport,
    pub diff: PartitionReport,
    /// Head changes from system `a` to system `b`, when the intermediate
    /// structures are trees and a semantic graph is available.
    pub head_changes: Option<HeadChangeCounts>,
    pub head_change_fractions: Option<CategoryFractions>,
    pub overlap_convention: String,
}

fn same_structure(a: &IntermediatePrediction, b: &IntermediatePrediction) -> bool {
    a == b
}

/// Splits the evaluation set by agreement of the two systems' intermediate
/// predictions and scores each part. Head-change categories use the
/// semantic graph of the end task when there is one.
pub fn partition_by_agreement(
    preds_a: &[Prediction],
    preds_b: &[Prediction],
    data: &[EvalExample],
) -> Result<AgreementReport> {
    crate::error::check_len(data.len(), preds_a.len())?;
    crate::error::check_len(data.len(), preds_b.len())?;
    let mut parts: [(Vec<Prediction>, Vec<Prediction>, Vec<EvalExample>); 2] = Default::default();
    let mut changes: Option<HeadChangeCounts> = None;
    for ((pa, pb), ex) in preds_a.iter().zip(preds_b).zip(data) {
        let idx = usize::from(!same_structure(&pa.intermediate, &pb.intermediate));
        parts[idx].0.push(pa.clone());
        parts[idx].1.push(pb.clone());
        parts[idx].2.push(ex.clone());
        if let (
            IntermediatePrediction::Tree(ta),
            IntermediatePrediction::Tree(tb),
            EndLabel::Graph(g),
        ) = (&pa.intermediate, &pb.intermediate, &ex.end)
        {
            *changes.get_or_insert_with(HeadChangeCounts::default) +=
                categorize_head_changes(ta, tb, g)?;
        }
    }
    let report = |(pa, pb, ex): &(Vec<Prediction>, Vec<Prediction>, Vec<EvalExample>)| -> Result<PartitionReport> {
        Ok(PartitionReport {
            size: ex.len(),
            a: score_predictions(pa, ex)?,
            b: score_predictions(pb, ex)?,
        })
    };
    Ok(AgreementReport {
        same: report(&parts[0])?,
        diff: report(&parts[1])?,
        head_change_fractions: changes.map(|c| c.fractions()),
        head_changes: changes,
        overlap_convention: OVERLAP_CONVENTION.to_string(),
    })
}
