//! The structured argmax layer and its backward strategies.
//!
//! The forward pass always runs an exact decoder (or marginal inference for
//! [`ProxyKind::Sa`]). The backward pass turns a gradient with respect to
//! the structure `ẑ` into a gradient with respect to the scores `s`:
//!
//! * `Pipeline`: zero, nothing flows into the scorer;
//! * `Ste`: the identity, `∇s = ∇ẑ`;
//! * `Spigot`: take the step `p̂ = ẑ − η∇ẑ`, project it back onto the
//!   relaxed polytope to get `z̃`, and return `ẑ − z̃`;
//! * `Sa`: the exact Jacobian of the marginals.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::decode::{eisner_decode, sdp_decode, ArcScores, SdpScores};
use crate::marginals::{inside_outside, marginal_backward};
use crate::project::{project_dep_values, project_sdp_values};
use crate::structures::{ArcIndexer, ConstraintSystem, LabeledArcIndexer, StructureVec};
use crate::{Error, Result};

/// Default SPIGOT step size for tree layers.
pub const DEFAULT_TREE_ETA: f64 = 1.0;
/// Default SPIGOT step size for semantic graph layers.
pub const DEFAULT_GRAPH_ETA: f64 = 5.0 / 32.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ProxyKind {
    Pipeline,
    Ste,
    Spigot { eta: f64 },
    Sa,
}

impl ProxyKind {
    /// SPIGOT with a validated step size.
    pub fn spigot(eta: f64) -> Result<Self> {
        if !(eta.is_finite() && eta > 0.0) {
            return Err(Error::invalid(format!(
                "step size must be positive, got {eta}"
            )));
        }
        Ok(ProxyKind::Spigot { eta })
    }

    pub fn name(&self) -> &'static str {
        match self {
            ProxyKind::Pipeline => "pipeline",
            ProxyKind::Ste => "ste",
            ProxyKind::Spigot { .. } => "spigot",
            ProxyKind::Sa => "sa",
        }
    }

    /// Whether gradients reach the intermediate scorer at all.
    pub fn backpropagates(&self) -> bool {
        !matches!(self, ProxyKind::Pipeline)
    }

    /// Replaces the SPIGOT step size; other variants are returned as is.
    pub fn with_eta(self, eta: f64) -> Result<Self> {
        match self {
            ProxyKind::Spigot { .. } => ProxyKind::spigot(eta),
            other => Ok(other),
        }
    }
}

impl fmt::Display for ProxyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ProxyKind {
    type Err = Error;

    /// Parses `pipeline`, `ste`, `spigot` (tree default step) or `sa`.
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "pipeline" => Ok(ProxyKind::Pipeline),
            "ste" => Ok(ProxyKind::Ste),
            "spigot" => Ok(ProxyKind::Spigot {
                eta: DEFAULT_TREE_ETA,
            }),
            "sa" => Ok(ProxyKind::Sa),
            other => Err(Error::invalid(format!(
                "unknown proxy '{other}' (expected pipeline, ste, spigot or sa)"
            ))),
        }
    }
}

/// Scores fed to the layer.
#[derive(Debug, Clone, PartialEq)]
pub enum LayerScores {
    Tree(ArcScores),
    /// Graph scores; the layer works on the joint `[unlabeled | labeled]`
    /// layout with head parts folded into the unlabeled block.
    Graph(SdpScores),
}

impl LayerScores {
    fn values(&self) -> Vec<f64> {
        match self {
            LayerScores::Tree(s) => s.values().to_vec(),
            LayerScores::Graph(s) => s.joint(),
        }
    }

    fn polytope(&self) -> Polytope {
        match self {
            LayerScores::Tree(s) => Polytope::Dep(*s.indexer()),
            LayerScores::Graph(s) => Polytope::Sdp(*s.indexer()),
        }
    }
}

/// Relaxed polytope used by the SPIGOT projection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Polytope {
    Dep(ArcIndexer),
    Sdp(LabeledArcIndexer),
}

impl Polytope {
    pub fn dim(&self) -> usize {
        match self {
            Polytope::Dep(ix) => ix.len(),
            Polytope::Sdp(ix) => ix.joint_len(),
        }
    }

    pub fn project(&self, values: &[f64]) -> Result<Vec<f64>> {
        match self {
            Polytope::Dep(ix) => project_dep_values(values, ix),
            Polytope::Sdp(ix) => project_sdp_values(values, ix),
        }
    }

    pub fn constraints(&self) -> ConstraintSystem {
        match self {
            Polytope::Dep(ix) => ConstraintSystem::dep(ix),
            Polytope::Sdp(ix) => ConstraintSystem::sdp(ix),
        }
    }
}

/// What [`backward`] needs from the matching [`forward`] call.
#[derive(Debug, Clone)]
pub struct StructuredLayerTape {
    scores: LayerScores,
    z_hat: StructureVec,
    kind: ProxyKind,
    polytope: Polytope,
}

impl StructuredLayerTape {
    pub fn z_hat(&self) -> &StructureVec {
        &self.z_hat
    }

    pub fn kind(&self) -> ProxyKind {
        self.kind
    }

    pub fn polytope(&self) -> Polytope {
        self.polytope
    }

    pub fn scores(&self) -> &LayerScores {
        &self.scores
    }
}

/// Decodes (or, for SA, computes marginals) and records a tape.
pub fn forward(
    scores: LayerScores,
    kind: ProxyKind,
) -> Result<(StructureVec, StructuredLayerTape)> {
    if let ProxyKind::Spigot { eta } = kind {
        ProxyKind::spigot(eta)?;
    }
    let z_hat = match (&scores, kind) {
        (LayerScores::Tree(s), ProxyKind::Sa) => inside_outside(s)?.arc_marginals,
        (LayerScores::Graph(_), ProxyKind::Sa) => {
            return Err(Error::Unsupported(
                "marginal inference is not available for semantic graphs".into(),
            ))
        }
        (LayerScores::Tree(s), _) => eisner_decode(s)?.encode(s.indexer())?,
        (LayerScores::Graph(s), _) => sdp_decode(s).encode(s.indexer())?,
    };
    let polytope = scores.polytope();
    let tape = StructuredLayerTape {
        scores,
        z_hat: z_hat.clone(),
        kind,
        polytope,
    };
    Ok((z_hat, tape))
}

/// Gradient with respect to the layer's scores, given `grad_z = ∇ẑL`.
///
/// For graph layers the result uses the joint layout of
/// [`SdpScores::joint`].
pub fn backward(tape: &StructuredLayerTape, grad_z: &[f64]) -> Result<Vec<f64>> {
    crate::error::check_len(tape.z_hat.len(), grad_z.len())?;
    if grad_z.iter().any(|x| !x.is_finite()) {
        return Err(Error::invalid(
            "gradient with respect to the structure is not finite",
        ));
    }
    match tape.kind {
        ProxyKind::Pipeline => Ok(vec![0.0; grad_z.len()]),
        ProxyKind::Ste => Ok(grad_z.to_vec()),
        ProxyKind::Spigot { eta } => {
            let z_hat = tape.z_hat.values();
            let p_hat: Vec<f64> = z_hat.iter().zip(grad_z).map(|(z, g)| z - eta * g).collect();
            let z_tilde = tape.polytope.project(&p_hat)?;
            Ok(z_hat.iter().zip(&z_tilde).map(|(a, b)| a - b).collect())
        }
        ProxyKind::Sa => match &tape.scores {
            LayerScores::Tree(s) => marginal_backward(s, grad_z),
            LayerScores::Graph(_) => Err(Error::Unsupported(
                "marginal inference is not available for semantic graphs".into(),
            )),
        },
    }
}

/// Scores as a flat vector in the layout [`backward`] returns.
pub fn flat_scores(scores: &LayerScores) -> Vec<f64> {
    scores.values()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::project::generic_qp_oracle;
    use crate::structures::StructureKind;
    use proptest::prelude::*;

    fn tree_scores(n: usize, raw: &[f64]) -> ArcScores {
        let ix = ArcIndexer::new(n, true).unwrap();
        ArcScores::new(ix, raw[..ix.len()].to_vec()).unwrap()
    }

    #[test]
    fn forward_agrees_across_argmax_variants() {
        let s = tree_scores(
            4,
            &(0..16)
                .map(|k| ((k * 5) % 7) as f64 - 3.0)
                .collect::<Vec<_>>(),
        );
        let kinds = [
            ProxyKind::Pipeline,
            ProxyKind::Ste,
            ProxyKind::Spigot { eta: 1.0 },
        ];
        let outs: Vec<_> = kinds
            .iter()
            .map(|&k| forward(LayerScores::Tree(s.clone()), k).unwrap().0)
            .collect();
        assert!(outs.windows(2).all(|w| w[0] == w[1]));
        assert_eq!(outs[0].kind(), StructureKind::Vertex);
    }

    #[test]
    fn sa_single_word() {
        let (z, _) = forward(LayerScores::Tree(tree_scores(1, &[0.3])), ProxyKind::Sa).unwrap();
        assert_eq!(z.values(), &[1.0]);
    }

    #[test]
    fn sa_refused_for_graphs() {
        let ix = LabeledArcIndexer::new(ArcIndexer::new(2, false).unwrap(), 2).unwrap();
        let s = SdpScores::new(ix, vec![0.0; 2], vec![0.0; 4], None).unwrap();
        assert!(matches!(
            forward(LayerScores::Graph(s), ProxyKind::Sa),
            Err(Error::Unsupported(_))
        ));
    }

    #[test]
    fn pipeline_and_ste() {
        let s = tree_scores(2, &[0.1, 0.2, 0.3, 0.4]);
        let g = [1.0, -2.0, 0.5, 3.0];
        let (_, tape) = forward(LayerScores::Tree(s.clone()), ProxyKind::Pipeline).unwrap();
        assert_eq!(backward(&tape, &g).unwrap(), vec![0.0; 4]);
        let (_, tape) = forward(LayerScores::Tree(s), ProxyKind::Ste).unwrap();
        assert_eq!(backward(&tape, &g).unwrap(), g.to_vec());
    }

    #[test]
    fn spigot_rejects_nan_and_bad_eta() {
        let s = tree_scores(2, &[0.1, 0.2, 0.3, 0.4]);
        let (_, tape) =
            forward(LayerScores::Tree(s.clone()), ProxyKind::Spigot { eta: 1.0 }).unwrap();
        assert!(backward(&tape, &[0.0, f64::NAN, 0.0, 0.0]).is_err());
        assert!(forward(LayerScores::Tree(s), ProxyKind::Spigot { eta: 0.0 }).is_err());
        assert!(ProxyKind::spigot(-1.0).is_err());
    }

    #[test]
    fn spigot_zero_gradient_is_fixed_point() {
        let s = tree_scores(3, &[0.5, -0.2, 0.1, 0.9, 0.3, -0.4, 0.2, 0.0, 0.7]);
        let (_, tape) = forward(LayerScores::Tree(s), ProxyKind::Spigot { eta: 1.0 }).unwrap();
        assert!(backward(&tape, &[0.0; 9])
            .unwrap()
            .iter()
            .all(|&x| x == 0.0));
    }

    #[test]
    fn spigot_interior_step_is_scaled_gradient() {
        let s = tree_scores(2, &[1.0, 0.0, 0.0, 1.0]);
        let eta = 0.5;
        let (z, tape) = forward(LayerScores::Tree(s), ProxyKind::Spigot { eta }).unwrap();
        let ix = ArcIndexer::new(2, true).unwrap();
        // move a little mass of each modifier onto its other candidate head
        let mut g = vec![0.0; 4];
        for m in 1..=2 {
            for k in ix.incoming(m) {
                g[k] = if z.values()[k] == 1.0 { 0.2 } else { -0.2 };
            }
        }
        let grad = backward(&tape, &g).unwrap();
        for (a, b) in grad.iter().zip(&g) {
            assert!((a - eta * b).abs() < 1e-12);
        }
    }

    #[test]
    fn spigot_boundary_matches_oracle() {
        let s = tree_scores(2, &[1.0, 0.0, 0.0, 1.0]);
        let (z, tape) = forward(LayerScores::Tree(s), ProxyKind::Spigot { eta: 1.0 }).unwrap();
        let g = [-0.7, 0.4, 0.3, -0.2];
        let p_hat: Vec<f64> = z.values().iter().zip(&g).map(|(a, b)| a - b).collect();
        let want = generic_qp_oracle(&p_hat, &tape.polytope().constraints()).unwrap();
        let grad = backward(&tape, &g).unwrap();
        for k in 0..4 {
            assert!((grad[k] - (z.values()[k] - want[k])).abs() < 1e-8);
        }
    }

    proptest! {
        #[test]
        fn spigot_gradient_is_bounded(raw in prop::collection::vec(-2.0f64..2.0, 16), g in prop::collection::vec(-3.0f64..3.0, 16), eta in 0.05f64..2.0) {
            let s = tree_scores(4, &raw);
            let (_, tape) = forward(LayerScores::Tree(s), ProxyKind::Spigot { eta }).unwrap();
            let grad = backward(&tape, &g).unwrap();
            let lhs = grad.iter().map(|x| x * x).sum::<f64>().sqrt();
            let rhs = eta * g.iter().map(|x| x * x).sum::<f64>().sqrt();
            prop_assert!(lhs <= rhs + 1e-12);
            let z_tilde: Vec<f64> = tape.z_hat().values().iter().zip(&grad).map(|(a, b)| a - b).collect();
            prop_assert!(tape.polytope().constraints().max_violation(&z_tilde).unwrap() <= 1e-8);
        }

        #[test]
        fn spigot_graph_gradient_is_bounded(raw in prop::collection::vec(-2.0f64..2.0, 24), g in prop::collection::vec(-3.0f64..3.0, 24)) {
            let ix = LabeledArcIndexer::new(ArcIndexer::new(3, false).unwrap(), 3).unwrap();
            let s = SdpScores::from_joint(ix, &raw).unwrap();
            let eta = DEFAULT_GRAPH_ETA;
            let (_, tape) = forward(LayerScores::Graph(s), ProxyKind::Spigot { eta }).unwrap();
            let grad = backward(&tape, &g).unwrap();
            let lhs = grad.iter().map(|x| x * x).sum::<f64>().sqrt();
            let rhs = eta * g.iter().map(|x| x * x).sum::<f64>().sqrt();
            prop_assert!(lhs <= rhs + 1e-12);
        }
    }
}
