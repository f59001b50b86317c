use ndarray::{s, Array1, Array2};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::classifier::{Classifier, ClassifierCache, ClassifierSpec};
use super::config::ModelConfig;
use super::encoder::{Encoder, EncoderCache, EncoderSpec};
use super::features::{head_feature_backward, head_feature_concat, HeadMode, RoleInput};
use super::losses::structured_hinge_graph;
use super::params::{glorot, impl_params};
use super::scorer::{PairScorer, ScorerCache, ScorerSpec};
use crate::decode::{sdp_decode, ArcScores, SdpScores};
use crate::proxy::{LayerScores, ProxyKind};
use crate::structures::{ArcIndexer, LabeledArcIndexer, SemGraph};
use crate::{Error, Result};

/// Output space of the intermediate model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum IntermediateTask {
    /// Projective dependency trees with a root node.
    Tree,
    /// Labeled semantic dependency graphs over the words.
    Graph { labels: usize },
}

impl IntermediateTask {
    /// Dimension of `ẑ` for an `n`-word sentence.
    pub fn structure_len(&self, n: usize) -> Result<usize> {
        Ok(match self {
            IntermediateTask::Tree => ArcIndexer::new(n, true)?.len(),
            IntermediateTask::Graph { labels } => graph_indexer(n, *labels)?.joint_len(),
        })
    }
}

/// What the end model predicts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum EndTask {
    /// Labeled semantic dependency graphs, trained with structured hinge
    /// loss.
    Graph { labels: usize },
    /// Sentence classification, trained with log-loss.
    Classify { classes: usize },
}

fn graph_indexer(n: usize, labels: usize) -> Result<LabeledArcIndexer> {
    LabeledArcIndexer::new(ArcIndexer::new(n, false)?, labels)
}

/// Intermediate model `φ`: encoder plus arc scorer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntermediateModel {
    pub task: IntermediateTask,
    pub encoder: Encoder,
    pub scorer: PairScorer,
}

impl_params!(IntermediateModel { encoder, scorer });

#[derive(Debug, Clone)]
pub struct IntermediateCache {
    encoder: EncoderCache,
    h: Array2<f64>,
    scorer: ScorerCache,
}

impl IntermediateModel {
    pub fn new<R: Rng>(
        task: IntermediateTask,
        vocab_size: usize,
        cfg: &ModelConfig,
        rng: &mut R,
    ) -> Result<Self> {
        let outputs = match task {
            IntermediateTask::Tree => 1,
            IntermediateTask::Graph { labels } if labels > 0 => 1 + labels,
            IntermediateTask::Graph { .. } => {
                return Err(Error::invalid("graphs need at least one label"))
            }
        };
        let encoder = Encoder::new(encoder_spec(vocab_size, cfg), rng)?;
        let scorer = PairScorer::new(
            ScorerSpec {
                input_dim: cfg.hidden_dim,
                hidden_dim: cfg.scorer_hidden,
                outputs,
                max_distance: cfg.max_distance,
                activation: cfg.activation,
            },
            rng,
        )?;
        Ok(IntermediateModel {
            task,
            encoder,
            scorer,
        })
    }

    /// Part scores for a sentence.
    pub fn scores(&self, tokens: &[usize]) -> Result<(LayerScores, IntermediateCache)> {
        let n = tokens.len();
        let (h, encoder) = self.encoder.forward(tokens);
        let (scores, cache) = match self.task {
            IntermediateTask::Tree => {
                let ix = ArcIndexer::new(n, true)?;
                let pairs: Vec<(usize, usize)> = ix.arcs().map(|(_, h, m)| (h, m)).collect();
                let (s, cache) = self.scorer.forward(&h, &pairs);
                (
                    LayerScores::Tree(ArcScores::new(ix, s.column(0).to_vec())?),
                    cache,
                )
            }
            IntermediateTask::Graph { labels } => {
                let ix = graph_indexer(n, labels)?;
                let pairs: Vec<(usize, usize)> = ix.base().arcs().map(|(_, h, m)| (h, m)).collect();
                let (s, cache) = self.scorer.forward(&h, &pairs);
                let unlabeled = s.column(0).to_vec();
                let labeled = s.slice(s![.., 1..]).iter().copied().collect();
                (
                    LayerScores::Graph(SdpScores::new(ix, unlabeled, labeled, None)?),
                    cache,
                )
            }
        };
        Ok((
            scores,
            IntermediateCache {
                encoder,
                h,
                scorer: cache,
            },
        ))
    }

    /// Accumulates into `grad` the parameter gradient implied by `d_scores`,
    /// given in the flat layout of [`crate::proxy::flat_scores`].
    pub fn backward(
        &self,
        cache: &IntermediateCache,
        d_scores: &[f64],
        grad: &mut IntermediateModel,
    ) -> Result<()> {
        let outputs = self.scorer.spec.outputs;
        let arcs = d_scores.len() / (outputs.max(1));
        crate::error::check_len(arcs * outputs, d_scores.len())?;
        let mut d = Array2::zeros((arcs, outputs));
        d.column_mut(0)
            .assign(&Array1::from(d_scores[..arcs].to_vec()));
        if outputs > 1 {
            let labeled = Array2::from_shape_vec((arcs, outputs - 1), d_scores[arcs..].to_vec())
                .map_err(|e| Error::invalid(e.to_string()))?;
            d.slice_mut(s![.., 1..]).assign(&labeled);
        }
        let mut d_h = Array2::zeros(cache.h.raw_dim());
        self.scorer
            .backward(&cache.scorer, &cache.h, &d, &mut grad.scorer, &mut d_h);
        self.encoder
            .backward(&cache.encoder, &d_h, &mut grad.encoder);
        Ok(())
    }
}

fn encoder_spec(vocab_size: usize, cfg: &ModelConfig) -> EncoderSpec {
    EncoderSpec {
        vocab_size,
        embedding_dim: cfg.embedding_dim,
        window: cfg.window,
        hidden_dim: cfg.hidden_dim,
        activation: cfg.activation,
    }
}

/// End model `θ`: its own encoder, head features from `ẑ`, and a graph
/// parser or classifier on top. Shares no parameters with `φ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EndModel {
    pub task: EndTask,
    pub structure: IntermediateTask,
    pub head_mode: HeadMode,
    pub encoder: Encoder,
    /// Role embeddings for graph structures.
    pub roles: Option<Array2<f64>>,
    pub parser: Option<PairScorer>,
    pub classifier: Option<Classifier>,
}

impl_params!(EndModel {
    encoder,
    roles,
    parser,
    classifier
});

/// Supervision for one end-task instance.
#[derive(Debug, Clone, Copy)]
pub enum EndGold<'a> {
    Graph(&'a SemGraph),
    Label(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub enum EndPrediction {
    Graph(SemGraph),
    Label(usize),
}

enum Head {
    Graph {
        scores: SdpScores,
        nodes: Array2<f64>,
        cache: ScorerCache,
    },
    Classify {
        log_probs: Array1<f64>,
        cache: ClassifierCache,
    },
}

/// Forward state of [`EndModel`] for one sentence.
pub struct EndForward {
    n: usize,
    z: Vec<f64>,
    h: Array2<f64>,
    encoder: EncoderCache,
    features: Array2<f64>,
    head: Head,
}

impl EndForward {
    pub fn features(&self) -> &Array2<f64> {
        &self.features
    }

    /// Distance of the closest ReLU pre-activation from its kink, for
    /// classification heads.
    pub fn kink_distance(&self) -> f64 {
        match &self.head {
            Head::Classify { cache, .. } => cache.kink_distance(),
            Head::Graph { .. } => f64::INFINITY,
        }
    }
}

impl EndModel {
    pub fn new<R: Rng>(
        task: EndTask,
        structure: IntermediateTask,
        vocab_size: usize,
        cfg: &ModelConfig,
        rng: &mut R,
    ) -> Result<Self> {
        let encoder = Encoder::new(encoder_spec(vocab_size, cfg), rng)?;
        let roles = match structure {
            IntermediateTask::Graph { labels } => Some(glorot(labels, cfg.role_dim, rng)),
            IntermediateTask::Tree => None,
        };
        let head_mode = cfg.head_mode.unwrap_or(match structure {
            IntermediateTask::Tree => HeadMode::Sum,
            IntermediateTask::Graph { .. } => HeadMode::Average,
        });
        let input_dim = 2 * cfg.hidden_dim + roles.as_ref().map_or(0, |r| r.ncols());
        let (parser, classifier) = match task {
            EndTask::Graph { labels } => {
                if labels == 0 {
                    return Err(Error::invalid("graphs need at least one label"));
                }
                let spec = ScorerSpec {
                    input_dim,
                    hidden_dim: cfg.scorer_hidden,
                    outputs: 1 + labels,
                    max_distance: cfg.max_distance,
                    activation: cfg.activation,
                };
                (Some(PairScorer::new(spec, rng)?), None)
            }
            EndTask::Classify { classes } => {
                let spec = ClassifierSpec {
                    input_dim,
                    token_dim: cfg.classifier_token_dim,
                    hidden_dim: cfg.classifier_hidden,
                    classes,
                };
                (None, Some(Classifier::new(spec, rng)?))
            }
        };
        Ok(EndModel {
            task,
            structure,
            head_mode,
            encoder,
            roles,
            parser,
            classifier,
        })
    }

    fn split<'a>(
        &'a self,
        n: usize,
        z: &'a [f64],
    ) -> Result<(ArcIndexer, &'a [f64], Option<RoleInput<'a>>)> {
        match self.structure {
            IntermediateTask::Tree => Ok((ArcIndexer::new(n, true)?, z, None)),
            IntermediateTask::Graph { labels } => {
                let ix = graph_indexer(n, labels)?;
                let d = ix.base().len();
                let roles = RoleInput {
                    labeled: &z[d..],
                    embeddings: self.roles.as_ref().expect("graph structures carry roles"),
                };
                Ok((*ix.base(), &z[..d], Some(roles)))
            }
        }
    }

    pub fn forward(&self, tokens: &[usize], z: &[f64]) -> Result<EndForward> {
        let n = tokens.len();
        crate::error::check_len(self.structure.structure_len(n)?, z.len())?;
        let (h, encoder) = self.encoder.forward(tokens);
        let (ix, arcs, roles) = self.split(n, z)?;
        let features = head_feature_concat(&h, arcs, &ix, self.head_mode, roles)?;
        let head = match self.task {
            EndTask::Graph { labels } => {
                let parser = self.parser.as_ref().expect("graph task has a parser");
                let end_ix = graph_indexer(n, labels)?;
                let mut nodes = Array2::zeros((n + 1, features.ncols()));
                nodes.slice_mut(s![1.., ..]).assign(&features);
                let pairs: Vec<(usize, usize)> =
                    end_ix.base().arcs().map(|(_, h, m)| (h, m)).collect();
                let (s, cache) = parser.forward(&nodes, &pairs);
                let unlabeled = s.column(0).to_vec();
                let labeled = s.slice(s![.., 1..]).iter().copied().collect();
                Head::Graph {
                    scores: SdpScores::new(end_ix, unlabeled, labeled, None)?,
                    nodes,
                    cache,
                }
            }
            EndTask::Classify { .. } => {
                let classifier = self
                    .classifier
                    .as_ref()
                    .expect("classification task has a classifier");
                let (log_probs, cache) = classifier.forward(&features)?;
                Head::Classify { log_probs, cache }
            }
        };
        Ok(EndForward {
            n,
            z: z.to_vec(),
            h,
            encoder,
            features,
            head,
        })
    }

    pub fn predict(&self, fwd: &EndForward) -> EndPrediction {
        match &fwd.head {
            Head::Graph { scores, .. } => EndPrediction::Graph(sdp_decode(scores)),
            Head::Classify { log_probs, .. } => {
                let best =
                    log_probs
                        .iter()
                        .enumerate()
                        .fold((0, f64::NEG_INFINITY), |acc, (c, &lp)| {
                            if lp > acc.1 {
                                (c, lp)
                            } else {
                                acc
                            }
                        });
                EndPrediction::Label(best.0)
            }
        }
    }

    /// End loss for `gold`; accumulates `∇θ` into `grad` and returns the
    /// loss with `∇ẑ`.
    pub fn loss_backward(
        &self,
        fwd: &EndForward,
        gold: EndGold,
        cost_weight: f64,
        grad: &mut EndModel,
    ) -> Result<(f64, Vec<f64>)> {
        let (loss, d_features) = match (&fwd.head, gold) {
            (
                Head::Graph {
                    scores,
                    nodes,
                    cache,
                },
                EndGold::Graph(g),
            ) => {
                let parser = self.parser.as_ref().expect("graph task has a parser");
                let lg = structured_hinge_graph(scores, g, cost_weight)?;
                let d_scores = joint_to_matrix(&lg.grad, scores.indexer());
                let mut d_nodes = Array2::zeros(nodes.raw_dim());
                parser.backward(
                    cache,
                    nodes,
                    &d_scores,
                    grad.parser.as_mut().expect("same shape"),
                    &mut d_nodes,
                );
                (lg.loss, d_nodes.slice(s![1.., ..]).to_owned())
            }
            (Head::Classify { log_probs, cache }, EndGold::Label(label)) => {
                let classifier = self
                    .classifier
                    .as_ref()
                    .expect("classification task has a classifier");
                let loss = Classifier::loss(log_probs, label)?;
                let d = classifier.backward_loss(
                    cache,
                    &fwd.features,
                    label,
                    grad.classifier.as_mut().expect("same shape"),
                );
                (loss, d)
            }
            _ => return Err(Error::invalid("supervision does not match the end task")),
        };
        let d_z = self.feature_backward(fwd, &d_features, grad)?;
        Ok((loss, d_z))
    }

    /// Backpropagates a gradient on the head features into `grad` and
    /// returns `∇ẑ`.
    pub fn feature_backward(
        &self,
        fwd: &EndForward,
        d_features: &Array2<f64>,
        grad: &mut EndModel,
    ) -> Result<Vec<f64>> {
        let (ix, arcs, roles) = self.split(fwd.n, &fwd.z)?;
        let g = head_feature_backward(&fwd.h, arcs, &ix, self.head_mode, roles, d_features)?;
        self.encoder.backward(&fwd.encoder, &g.h, &mut grad.encoder);
        let mut d_z = g.z;
        if let (Some(dr), Some(target)) = (g.roles, grad.roles.as_mut()) {
            *target += &dr;
        }
        if let Some(dl) = g.labeled {
            d_z.extend(dl);
        }
        Ok(d_z)
    }
}

/// Rearranges a joint `[unlabeled | labeled]` vector into the
/// `arcs × (1 + labels)` layout of a pair scorer.
fn joint_to_matrix(joint: &[f64], ix: &LabeledArcIndexer) -> Array2<f64> {
    let d = ix.base().len();
    let labels = ix.labels();
    Array2::from_shape_fn((d, 1 + labels), |(k, c)| {
        if c == 0 {
            joint[k]
        } else {
            joint[d + k * labels + c - 1]
        }
    })
}

/// Both models plus the proxy used between them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineModel {
    pub proxy: ProxyKind,
    pub intermediate: IntermediateModel,
    pub end: EndModel,
}

/// Predictions for one sentence.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    /// Decoded intermediate structure (argmax even under structured
    /// attention).
    pub intermediate: IntermediatePrediction,
    pub end: EndPrediction,
}

#[derive(Debug, Clone, PartialEq)]
pub enum IntermediatePrediction {
    Tree(crate::structures::DepTree),
    Graph(SemGraph),
}

impl PipelineModel {
    pub fn new<R: Rng>(
        structure: IntermediateTask,
        task: EndTask,
        vocab_size: usize,
        cfg: &ModelConfig,
        proxy: ProxyKind,
        rng: &mut R,
    ) -> Result<Self> {
        let intermediate = IntermediateModel::new(structure, vocab_size, cfg, rng)?;
        let end = EndModel::new(task, structure, vocab_size, cfg, rng)?;
        Ok(PipelineModel {
            proxy,
            intermediate,
            end,
        })
    }

    pub fn predict(&self, tokens: &[usize]) -> Result<Prediction> {
        let (scores, _) = self.intermediate.scores(tokens)?;
        let intermediate = match &scores {
            LayerScores::Tree(s) => IntermediatePrediction::Tree(crate::decode::eisner_decode(s)?),
            LayerScores::Graph(s) => IntermediatePrediction::Graph(sdp_decode(s)),
        };
        let (z, _) = crate::proxy::forward(scores, self.proxy)?;
        let fwd = self.end.forward(tokens, z.values())?;
        Ok(Prediction {
            intermediate,
            end: self.end.predict(&fwd),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn tree_pipeline_shapes() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let cfg = ModelConfig::default();
        let model = PipelineModel::new(
            IntermediateTask::Tree,
            EndTask::Graph { labels: 3 },
            20,
            &cfg,
            ProxyKind::Spigot { eta: 1.0 },
            &mut rng,
        )
        .unwrap();
        let p = model.predict(&[1, 5, 7, 30]).unwrap();
        match p.intermediate {
            IntermediatePrediction::Tree(t) => assert_eq!(t.n(), 4),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(p.end, EndPrediction::Graph(ref g) if g.n() == 4));
    }

    #[test]
    fn graph_pipeline_classifies() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let cfg = ModelConfig::default();
        let model = PipelineModel::new(
            IntermediateTask::Graph { labels: 2 },
            EndTask::Classify { classes: 2 },
            20,
            &cfg,
            ProxyKind::Spigot { eta: 5.0 / 32.0 },
            &mut rng,
        )
        .unwrap();
        assert!(matches!(model.predict(&[1, 2, 3]).unwrap().end, EndPrediction::Label(c) if c < 2));
    }
}
