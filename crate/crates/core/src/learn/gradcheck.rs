//! Central finite-difference checks of every hand-written backward pass.
//!
//! Each check draws random instances and parameters, forms a scalar
//! objective (a random linear functional of the block output, or the
//! block's own loss), and compares the analytic gradient with
//! `(f(x + h) − f(x − h)) / 2h` over all inputs and parameters at once.

use std::fmt;
use std::str::FromStr;

use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::classifier::{Classifier, ClassifierSpec};
use super::encoder::{Activation, Encoder, EncoderSpec};
use super::features::{head_feature_backward, head_feature_concat, HeadMode, RoleInput};
use super::losses::log_loss_tree;
use super::params::Params;
use super::scorer::{PairScorer, ScorerSpec};
use crate::decode::ArcScores;
use crate::marginals::{inside_outside, marginal_backward};
use crate::structures::{ArcIndexer, DepTree};
use crate::{Error, Result};

/// Perturbation used for central differences.
pub const FD_STEP: f64 = 1e-4;
/// Tolerance for ordinary blocks.
pub const DEFAULT_TOLERANCE: f64 = 1e-4;
/// Tolerance for blocks that go through marginal inference.
pub const MARGINAL_TOLERANCE: f64 = 1e-5;
/// Instances drawn per block.
pub const DEFAULT_INSTANCES: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GradBlock {
    Encoder,
    Scorer,
    /// Head features with respect to the token representations.
    HeadFeaturesH,
    /// Head features with respect to the structure vector.
    HeadFeaturesZ,
    Classifier,
    /// Backward pass of the marginal layer.
    StructuredAttention,
    LogLossTree,
}

impl GradBlock {
    pub const ALL: [GradBlock; 7] = [
        GradBlock::Encoder,
        GradBlock::Scorer,
        GradBlock::HeadFeaturesH,
        GradBlock::HeadFeaturesZ,
        GradBlock::Classifier,
        GradBlock::StructuredAttention,
        GradBlock::LogLossTree,
    ];

    pub fn name(self) -> &'static str {
        match self {
            GradBlock::Encoder => "encoder",
            GradBlock::Scorer => "scorer",
            GradBlock::HeadFeaturesH => "head_features_h",
            GradBlock::HeadFeaturesZ => "head_features_z",
            GradBlock::Classifier => "classifier",
            GradBlock::StructuredAttention => "sa",
            GradBlock::LogLossTree => "log_loss_tree",
        }
    }

    pub fn tolerance(self) -> f64 {
        match self {
            GradBlock::StructuredAttention | GradBlock::LogLossTree => MARGINAL_TOLERANCE,
            _ => DEFAULT_TOLERANCE,
        }
    }

    /// Blocks selected by a name: `all`, `head_features`, or a single
    /// block name.
    pub fn select(name: &str) -> Result<Vec<GradBlock>> {
        match name {
            "all" => Ok(GradBlock::ALL.to_vec()),
            "head_features" => Ok(vec![GradBlock::HeadFeaturesH, GradBlock::HeadFeaturesZ]),
            other => Ok(vec![other.parse()?]),
        }
    }
}

impl fmt::Display for GradBlock {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for GradBlock {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        GradBlock::ALL
            .into_iter()
            .find(|b| b.name() == s)
            .ok_or_else(|| Error::invalid(format!("unknown gradient-check block '{s}'")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradCheckResult {
    pub block: GradBlock,
    pub instances: usize,
    /// Largest relative error over the instances.
    pub max_rel_error: f64,
    pub tolerance: f64,
    pub passed: bool,
}

/// `‖a − b‖ / max(‖a‖, ‖b‖, 1e-6)`.
pub fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let diff: f64 = a
        .iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt();
    diff / norm(a).max(norm(b)).max(1e-6)
}

/// Central differences of `f` at `x`.
pub fn central_differences(x: &[f64], mut f: impl FnMut(&[f64]) -> f64) -> Vec<f64> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            probe[i] = x[i] + FD_STEP;
            let plus = f(&probe);
            probe[i] = x[i] - FD_STEP;
            let minus = f(&probe);
            probe[i] = x[i];
            (plus - minus) / (2.0 * FD_STEP)
        })
        .collect()
}

pub fn check_block(block: GradBlock, instances: usize, seed: u64) -> Result<GradCheckResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..instances {
        let err = match block {
            GradBlock::Encoder => check_encoder(&mut rng)?,
            GradBlock::Scorer => check_scorer(&mut rng)?,
            GradBlock::HeadFeaturesH => check_head_features(&mut rng, false)?,
            GradBlock::HeadFeaturesZ => check_head_features(&mut rng, true)?,
            GradBlock::Classifier => check_classifier(&mut rng)?,
            GradBlock::StructuredAttention => check_marginals(&mut rng)?,
            GradBlock::LogLossTree => check_log_loss(&mut rng)?,
        };
        worst = worst.max(err);
    }
    let tolerance = block.tolerance();
    Ok(GradCheckResult {
        block,
        instances,
        max_rel_error: worst,
        tolerance,
        passed: worst <= tolerance,
    })
}

pub fn check_blocks(
    blocks: &[GradBlock],
    instances: usize,
    seed: u64,
) -> Result<Vec<GradCheckResult>> {
    blocks
        .iter()
        .map(|&b| check_block(b, instances, seed))
        .collect()
}

fn uniform(rng: &mut ChaCha8Rng, len: usize, scale: f64) -> Vec<f64> {
    (0..len).map(|_| rng.gen_range(-scale..scale)).collect()
}

fn matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Array2<f64> {
    Array2::from_shape_vec((rows, cols), uniform(rng, rows * cols, 1.0)).expect("shape matches")
}

fn randomize<P: Params>(p: &mut P, rng: &mut ChaCha8Rng) {
    let values = uniform(rng, p.num_params(), 0.5);
    p.assign(&values);
}

fn dot(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    (a * b).sum()
}

fn check_encoder(rng: &mut ChaCha8Rng) -> Result<f64> {
    let spec = EncoderSpec {
        vocab_size: 6,
        embedding_dim: 3,
        window: rng.gen_range(0..=2),
        hidden_dim: 4,
        activation: Activation::Tanh,
    };
    let mut enc = Encoder::new(spec, rng)?;
    randomize(&mut enc, rng);
    let n = rng.gen_range(1..=5);
    let tokens: Vec<usize> = (0..n).map(|_| rng.gen_range(0..8)).collect();
    let (out, cache) = enc.forward(&tokens);
    let r = matrix(rng, out.nrows(), out.ncols());
    let mut grad = enc.zeroed();
    enc.backward(&cache, &r, &mut grad);
    let x = enc.flatten();
    let mut probe = enc.clone();
    let fd = central_differences(&x, |v| {
        probe.assign(v);
        dot(&probe.forward(&tokens).0, &r)
    });
    Ok(relative_error(&grad.flatten(), &fd))
}

fn check_scorer(rng: &mut ChaCha8Rng) -> Result<f64> {
    let spec = ScorerSpec {
        input_dim: 3,
        hidden_dim: 4,
        outputs: 3,
        max_distance: 2,
        activation: Activation::Tanh,
    };
    let mut scorer = PairScorer::new(spec, rng)?;
    randomize(&mut scorer, rng);
    let n = rng.gen_range(1..=4);
    let ix = ArcIndexer::new(n, true)?;
    let pairs: Vec<(usize, usize)> = ix.arcs().map(|(_, h, m)| (h, m)).collect();
    let nodes = matrix(rng, n + 1, 3);
    let (out, cache) = scorer.forward(&nodes, &pairs);
    let r = matrix(rng, out.nrows(), out.ncols());
    let mut grad = scorer.zeroed();
    let mut d_nodes = Array2::zeros(nodes.raw_dim());
    scorer.backward(&cache, &nodes, &r, &mut grad, &mut d_nodes);

    let p = scorer.num_params();
    let mut x = scorer.flatten();
    x.extend(nodes.iter());
    let mut analytic = grad.flatten();
    analytic.extend(d_nodes.iter());
    let mut probe = scorer.clone();
    let fd = central_differences(&x, |v| {
        probe.assign(&v[..p]);
        let nodes = Array2::from_shape_vec(nodes.raw_dim(), v[p..].to_vec()).expect("same shape");
        dot(&probe.forward(&nodes, &pairs).0, &r)
    });
    Ok(relative_error(&analytic, &fd))
}

/// Checks the tree layout in sum mode and the graph layout with role
/// embeddings in average mode, alternating between instances.
fn check_head_features(rng: &mut ChaCha8Rng, wrt_z: bool) -> Result<f64> {
    let graph = rng.gen_bool(0.5);
    let n = rng.gen_range(1..=4);
    let dim = 3;
    let ix = ArcIndexer::new(n, !graph)?;
    let labels = 2;
    let role_dim = 2;
    let h = matrix(rng, ix.node_count(), dim);
    let roles = matrix(rng, labels, role_dim);
    let (mode, z, labeled) = loop {
        let z: Vec<f64> = (0..ix.len()).map(|_| rng.gen_range(0.0..1.0)).collect();
        let labeled: Vec<f64> = (0..ix.len() * labels)
            .map(|_| rng.gen_range(0.0..1.0))
            .collect();
        if !graph {
            break (HeadMode::Sum, z, labeled);
        }
        let near_kink = (1..=n).any(|m| {
            let mass: f64 = ix.incoming(m).map(|k| z[k]).sum();
            (mass - 1.0).abs() < 1e-2
        });
        if !near_kink {
            break (HeadMode::Average, z, labeled);
        }
    };
    let eval =
        |h: &Array2<f64>, z: &[f64], labeled: &[f64], roles: &Array2<f64>| -> Result<Array2<f64>> {
            let ri = graph.then_some(RoleInput {
                labeled,
                embeddings: roles,
            });
            head_feature_concat(h, z, &ix, mode, ri)
        };
    let out = eval(&h, &z, &labeled, &roles)?;
    let r = matrix(rng, out.nrows(), out.ncols());
    let ri = graph.then_some(RoleInput {
        labeled: &labeled,
        embeddings: &roles,
    });
    let g = head_feature_backward(&h, &z, &ix, mode, ri, &r)?;

    if wrt_z {
        let mut x = z.clone();
        let mut analytic = g.z.clone();
        if graph {
            x.extend(&labeled);
            analytic.extend(g.labeled.clone().unwrap_or_default());
        }
        let d = z.len();
        let fd = central_differences(&x, |v| {
            let lab = if graph { &v[d..] } else { &labeled[..] };
            dot(&eval(&h, &v[..d], lab, &roles).expect("valid"), &r)
        });
        Ok(relative_error(&analytic, &fd))
    } else {
        let mut x: Vec<f64> = h.iter().copied().collect();
        let mut analytic: Vec<f64> = g.h.iter().copied().collect();
        if graph {
            x.extend(roles.iter());
            analytic.extend(
                g.roles
                    .clone()
                    .map(|a| a.iter().copied().collect::<Vec<_>>())
                    .unwrap_or_default(),
            );
        }
        let split = h.len();
        let fd = central_differences(&x, |v| {
            let hv = Array2::from_shape_vec(h.raw_dim(), v[..split].to_vec()).expect("same shape");
            let rv = if graph {
                Array2::from_shape_vec(roles.raw_dim(), v[split..].to_vec()).expect("same shape")
            } else {
                roles.clone()
            };
            dot(&eval(&hv, &z, &labeled, &rv).expect("valid"), &r)
        });
        Ok(relative_error(&analytic, &fd))
    }
}

fn check_classifier(rng: &mut ChaCha8Rng) -> Result<f64> {
    let spec = ClassifierSpec {
        input_dim: 3,
        token_dim: 4,
        hidden_dim: 4,
        classes: 3,
    };
    loop {
        let mut c = Classifier::new(spec, rng)?;
        randomize(&mut c, rng);
        let n = rng.gen_range(1..=4);
        let tokens = matrix(rng, n, 3);
        let gold = rng.gen_range(0..3);
        let (_, cache) = c.forward(&tokens)?;
        // Finite differences straddling a ReLU kink are meaningless.
        if cache.kink_distance() < 1e-2 {
            continue;
        }
        let mut grad = c.zeroed();
        let d_tokens = c.backward_loss(&cache, &tokens, gold, &mut grad);
        let p = c.num_params();
        let mut x = c.flatten();
        x.extend(tokens.iter());
        let mut analytic = grad.flatten();
        analytic.extend(d_tokens.iter());
        let mut probe = c.clone();
        let fd = central_differences(&x, |v| {
            probe.assign(&v[..p]);
            let t = Array2::from_shape_vec(tokens.raw_dim(), v[p..].to_vec()).expect("same shape");
            let (lp, _) = probe.forward(&t).expect("valid");
            Classifier::loss(&lp, gold).expect("valid class")
        });
        return Ok(relative_error(&analytic, &fd));
    }
}

fn tree_scores(rng: &mut ChaCha8Rng) -> Result<(ArcIndexer, Vec<f64>)> {
    let n = rng.gen_range(1..=5);
    let ix = ArcIndexer::new(n, true)?;
    Ok((ix, uniform(rng, ix.len(), 2.0)))
}

fn check_marginals(rng: &mut ChaCha8Rng) -> Result<f64> {
    let (ix, s) = tree_scores(rng)?;
    let upstream = Array1::from(uniform(rng, ix.len(), 1.0));
    let analytic = marginal_backward(
        &ArcScores::new(ix, s.clone())?,
        upstream.as_slice().expect("contiguous"),
    )?;
    let fd = central_differences(&s, |v| {
        let m = inside_outside(&ArcScores::new(ix, v.to_vec()).expect("valid")).expect("finite");
        m.arc_marginals
            .values()
            .iter()
            .zip(upstream.iter())
            .map(|(a, b)| a * b)
            .sum()
    });
    Ok(relative_error(&analytic, &fd))
}

fn check_log_loss(rng: &mut ChaCha8Rng) -> Result<f64> {
    let (ix, s) = tree_scores(rng)?;
    let n = ix.n();
    let trees = crate::decode::enumerate_trees(n, true)?;
    let gold: DepTree = trees[rng.gen_range(0..trees.len())].clone();
    let analytic = log_loss_tree(&ArcScores::new(ix, s.clone())?, &gold)?.grad;
    let fd = central_differences(&s, |v| {
        log_loss_tree(&ArcScores::new(ix, v.to_vec()).expect("valid"), &gold)
            .expect("valid")
            .loss
    });
    Ok(relative_error(&analytic, &fd))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_block_passes() {
        for r in check_blocks(&GradBlock::ALL, 5, 11).unwrap() {
            assert!(r.passed, "{} failed with {}", r.block, r.max_rel_error);
        }
    }

    #[test]
    fn catches_a_wrong_gradient() {
        let fd = central_differences(&[1.0, 2.0], |v| v[0] * v[0] + 3.0 * v[1]);
        assert!(relative_error(&[2.0, 3.0], &fd) < 1e-8);
        assert!(relative_error(&[2.0, 3.1], &fd) > 1e-4);
    }

    #[test]
    fn selects_by_name() {
        assert_eq!(GradBlock::select("all").unwrap().len(), 7);
        assert_eq!(
            GradBlock::select("sa").unwrap(),
            vec![GradBlock::StructuredAttention]
        );
        assert!(GradBlock::select("bogus").is_err());
    }
}
