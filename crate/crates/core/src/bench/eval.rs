//! Attachment scores, arc F1 and accuracy.

use serde::{Deserialize, Serialize};

use super::synth::EvalExample;
use crate::learn::{
    EndLabel, EndPrediction, IntermediateGold, IntermediatePrediction, PipelineModel, Prediction,
};
use crate::structures::{DepTree, SemGraph};
use crate::{Error, Result};

/// Additive evaluation counts; metrics are ratios of these.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counts {
    pub heads_correct: usize,
    pub heads_total: usize,
    pub arcs_gold: usize,
    pub arcs_predicted: usize,
    pub arcs_unlabeled_match: usize,
    pub arcs_labeled_match: usize,
    pub labels_correct: usize,
    pub labels_total: usize,
}

impl std::ops::AddAssign for Counts {
    fn add_assign(&mut self, o: Counts) {
        self.heads_correct += o.heads_correct;
        self.heads_total += o.heads_total;
        self.arcs_gold += o.arcs_gold;
        self.arcs_predicted += o.arcs_predicted;
        self.arcs_unlabeled_match += o.arcs_unlabeled_match;
        self.arcs_labeled_match += o.arcs_labeled_match;
        self.labels_correct += o.labels_correct;
        self.labels_total += o.labels_total;
    }
}

/// F1 of `matched` arcs; two empty sets score 1.
pub fn f1(matched: usize, predicted: usize, gold: usize) -> f64 {
    if predicted == 0 && gold == 0 {
        return 1.0;
    }
    if matched == 0 {
        return 0.0;
    }
    let p = matched as f64 / predicted as f64;
    let r = matched as f64 / gold as f64;
    2.0 * p * r / (p + r)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub uas: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub uf: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lf: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub accuracy: Option<f64>,
}

impl Counts {
    pub fn tree(pred: &DepTree, gold: &DepTree) -> Result<Counts> {
        crate::error::check_len(gold.n(), pred.n())?;
        Ok(Counts {
            heads_correct: pred
                .heads()
                .iter()
                .zip(gold.heads())
                .filter(|(a, b)| a == b)
                .count(),
            heads_total: gold.n(),
            ..Counts::default()
        })
    }

    pub fn graph(pred: &SemGraph, gold: &SemGraph) -> Result<Counts> {
        crate::error::check_len(gold.n(), pred.n())?;
        let mut c = Counts {
            arcs_gold: gold.len(),
            arcs_predicted: pred.len(),
            ..Counts::default()
        };
        for (h, m, l) in pred.triples() {
            if let Some(gl) = gold.label(h, m) {
                c.arcs_unlabeled_match += 1;
                if gl == l {
                    c.arcs_labeled_match += 1;
                }
            }
        }
        Ok(c)
    }

    pub fn label(pred: usize, gold: usize) -> Counts {
        Counts {
            labels_correct: usize::from(pred == gold),
            labels_total: 1,
            ..Counts::default()
        }
    }

    /// Metrics backed by at least one counted item.
    pub fn metrics(&self) -> Metrics {
        let ratio = |a: usize, b: usize| (b > 0).then(|| a as f64 / b as f64);
        let graphs = self.arcs_gold + self.arcs_predicted > 0;
        Metrics {
            uas: ratio(self.heads_correct, self.heads_total),
            uf: graphs.then(|| {
                f1(
                    self.arcs_unlabeled_match,
                    self.arcs_predicted,
                    self.arcs_gold,
                )
            }),
            lf: graphs.then(|| f1(self.arcs_labeled_match, self.arcs_predicted, self.arcs_gold)),
            accuracy: ratio(self.labels_correct, self.labels_total),
        }
    }
}

pub fn intermediate_counts(
    pred: &IntermediatePrediction,
    gold: &IntermediateGold,
) -> Result<Counts> {
    match (pred, gold) {
        (IntermediatePrediction::Tree(p), IntermediateGold::Tree(g)) => Counts::tree(p, g),
        (IntermediatePrediction::Graph(p), IntermediateGold::Graph(g)) => Counts::graph(p, g),
        _ => Err(Error::invalid(
            "prediction and gold are different structure types",
        )),
    }
}

pub fn end_counts(pred: &EndPrediction, gold: &EndLabel) -> Result<Counts> {
    match (pred, gold) {
        (EndPrediction::Graph(p), EndLabel::Graph(g)) => Counts::graph(p, g),
        (EndPrediction::Label(p), EndLabel::Class(g)) => Ok(Counts::label(*p, *g)),
        _ => Err(Error::invalid(
            "prediction and gold belong to different end tasks",
        )),
    }
}

/// Summed counts for both tasks.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct EvalCounts {
    pub intermediate: Counts,
    pub end: Counts,
}

impl EvalCounts {
    pub fn add(&mut self, pred: &Prediction, gold: &EvalExample) -> Result<()> {
        self.intermediate += intermediate_counts(&pred.intermediate, &gold.intermediate)?;
        self.end += end_counts(&pred.end, &gold.end)?;
        Ok(())
    }

    pub fn report(&self) -> EvalReport {
        EvalReport {
            intermediate: self.intermediate.metrics(),
            end: self.end.metrics(),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub intermediate: Metrics,
    pub end: Metrics,
}

impl EvalReport {
    /// Named metrics in a fixed order: `intermediate_uas`,
    /// `intermediate_uf`, `intermediate_lf`, `end_uf`, `end_lf`,
    /// `end_accuracy`, keeping only those that apply.
    pub fn named(&self) -> Vec<(&'static str, f64)> {
        let mut out = Vec::new();
        let mut push = |name, v: Option<f64>| {
            if let Some(v) = v {
                out.push((name, v));
            }
        };
        push("intermediate_uas", self.intermediate.uas);
        push("intermediate_uf", self.intermediate.uf);
        push("intermediate_lf", self.intermediate.lf);
        push("end_uf", self.end.uf);
        push("end_lf", self.end.lf);
        push("end_accuracy", self.end.accuracy);
        out
    }

    /// The headline end-task metric: labeled F1 for graphs, else accuracy.
    pub fn end_metric(&self) -> Option<f64> {
        self.end.lf.or(self.end.accuracy)
    }
}

pub fn predict_all(model: &PipelineModel, data: &[EvalExample]) -> Result<Vec<Prediction>> {
    data.iter().map(|ex| model.predict(&ex.tokens)).collect()
}

pub fn score_predictions(preds: &[Prediction], data: &[EvalExample]) -> Result<EvalReport> {
    crate::error::check_len(data.len(), preds.len())?;
    let mut counts = EvalCounts::default();
    for (p, g) in preds.iter().zip(data) {
        counts.add(p, g)?;
    }
    Ok(counts.report())
}

pub fn evaluate(model: &PipelineModel, data: &[EvalExample]) -> Result<EvalReport> {
    score_predictions(&predict_all(model, data)?, data)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_predictions_score_one() {
        let t = DepTree::new(vec![2, 0, 2]).unwrap();
        let g = SemGraph::new(3, [(1, 2, 0), (3, 2, 1)]).unwrap();
        let mut c = Counts::tree(&t, &t).unwrap();
        c += Counts::graph(&g, &g).unwrap();
        c += Counts::label(1, 1);
        let m = c.metrics();
        assert_eq!(
            (m.uas, m.uf, m.lf, m.accuracy),
            (Some(1.0), Some(1.0), Some(1.0), Some(1.0))
        );
    }

    #[test]
    fn empty_prediction_has_zero_f1() {
        let g = SemGraph::new(3, [(1, 2, 0)]).unwrap();
        let m = Counts::graph(&SemGraph::empty(3), &g).unwrap().metrics();
        assert_eq!(m.uf, Some(0.0));
        assert_eq!(m.lf, Some(0.0));
    }

    #[test]
    fn one_wrong_head_in_four() {
        let mut c = Counts::tree(
            &DepTree::new(vec![0, 1]).unwrap(),
            &DepTree::new(vec![0, 1]).unwrap(),
        )
        .unwrap();
        c += Counts::tree(
            &DepTree::new(vec![2, 0]).unwrap(),
            &DepTree::new(vec![0, 0]).unwrap(),
        )
        .unwrap();
        assert_eq!(c.metrics().uas, Some(0.75));
    }

    #[test]
    fn labeled_match_needs_label() {
        let gold = SemGraph::new(3, [(1, 2, 0), (2, 3, 1)]).unwrap();
        let pred = SemGraph::new(3, [(1, 2, 1), (2, 3, 1)]).unwrap();
        let m = Counts::graph(&pred, &gold).unwrap().metrics();
        assert_eq!(m.uf, Some(1.0));
        assert_eq!(m.lf, Some(0.5));
    }
}
