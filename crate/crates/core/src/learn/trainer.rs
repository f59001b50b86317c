//! Joint training of an intermediate model and an end model through a
//! structured argmax layer.
//!
//! End-task instances run the full pipeline: decode `ẑ` with `φ`, compute
//! the end loss with `θ`, backpropagate `∇ẑ` through the proxy and into
//! `φ`. Intermediate instances take an ordinary supervised step on `φ`.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::{IntermediateLoss, Sampling, TrainConfig};
use super::losses::{log_loss_tree, structured_hinge_graph, structured_hinge_tree};
use super::model::{
    EndGold, EndModel, EndTask, IntermediateModel, IntermediateTask, PipelineModel,
};
use super::optim::{annealed_rate, Optimizer};
use super::params::{clip_global_norm, Params};
use crate::proxy::{self, LayerScores, ProxyKind};
use crate::structures::{DepTree, SemGraph};
use crate::{Error, Result};

/// Gold structure of an intermediate-task instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "lowercase")]
pub enum IntermediateGold {
    Tree(DepTree),
    Graph(SemGraph),
}

impl IntermediateGold {
    pub fn n(&self) -> usize {
        match self {
            IntermediateGold::Tree(t) => t.n(),
            IntermediateGold::Graph(g) => g.n(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntermediateExample {
    pub id: usize,
    pub tokens: Vec<usize>,
    pub gold: IntermediateGold,
}

/// Supervision of an end-task instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "lowercase")]
pub enum EndLabel {
    Graph(SemGraph),
    Class(usize),
}

impl EndLabel {
    pub fn as_gold(&self) -> EndGold<'_> {
        match self {
            EndLabel::Graph(g) => EndGold::Graph(g),
            EndLabel::Class(c) => EndGold::Label(*c),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EndExample {
    pub id: usize,
    pub tokens: Vec<usize>,
    pub gold: EndLabel,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    /// Intermediate instances only.
    Pretrain,
    Joint,
}

/// Training statistics for one epoch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochReport {
    /// 1-based.
    pub epoch: usize,
    pub phase: Phase,
    pub learning_rate: f64,
    /// Mean intermediate loss, if any intermediate instance was visited.
    pub intermediate_loss: Option<f64>,
    /// Mean end loss, if any end instance was visited.
    pub end_loss: Option<f64>,
    pub intermediate_steps: usize,
    pub end_steps: usize,
    /// Largest pre-clipping gradient norm over the epoch's batches.
    pub max_grad_norm: f64,
}

#[derive(Debug, Clone, Copy)]
enum Item {
    Intermediate(usize),
    End(usize),
}

/// Gradient accumulators for one batch.
struct Grads {
    intermediate: IntermediateModel,
    end: EndModel,
}

fn check_data(
    model: &PipelineModel,
    inter: &[IntermediateExample],
    end: &[EndExample],
) -> Result<()> {
    if end.is_empty() && inter.is_empty() {
        return Err(Error::invalid("no training data"));
    }
    for ex in inter {
        if ex.tokens.is_empty() || ex.gold.n() != ex.tokens.len() {
            return Err(Error::invalid(format!(
                "intermediate instance {} has mismatched length",
                ex.id
            )));
        }
        let matches = matches!(
            (&ex.gold, model.intermediate.task),
            (IntermediateGold::Tree(_), IntermediateTask::Tree)
                | (IntermediateGold::Graph(_), IntermediateTask::Graph { .. })
        );
        if !matches {
            return Err(Error::invalid(format!(
                "intermediate instance {} has the wrong structure type",
                ex.id
            )));
        }
    }
    for ex in end {
        let ok = match (&ex.gold, model.end.task) {
            (EndLabel::Graph(g), EndTask::Graph { .. }) => g.n() == ex.tokens.len(),
            (EndLabel::Class(c), EndTask::Classify { classes }) => *c < classes,
            _ => false,
        };
        if ex.tokens.is_empty() || !ok {
            return Err(Error::invalid(format!(
                "end instance {} does not fit the end task",
                ex.id
            )));
        }
    }
    Ok(())
}

fn intermediate_loss_kind(cfg: &TrainConfig, proxy: ProxyKind) -> IntermediateLoss {
    cfg.intermediate_loss.unwrap_or(match proxy {
        ProxyKind::Sa => IntermediateLoss::LogLoss,
        _ => IntermediateLoss::Hinge,
    })
}

fn schedule(
    phase: Phase,
    cfg: &TrainConfig,
    n_inter: usize,
    n_end: usize,
    rng: &mut ChaCha8Rng,
) -> Vec<Item> {
    let mut items: Vec<Item> = match (phase, cfg.sampling, cfg.alpha) {
        (Phase::Pretrain, _, _) => (0..n_inter).map(Item::Intermediate).collect(),
        (Phase::Joint, Sampling::Union, Some(alpha)) => {
            let mut out = Vec::with_capacity(n_inter + n_end);
            for _ in 0..n_inter + n_end {
                let pick_end = n_inter == 0 || (n_end > 0 && rng.gen_bool(alpha));
                out.push(if pick_end {
                    Item::End(rng.gen_range(0..n_end))
                } else {
                    Item::Intermediate(rng.gen_range(0..n_inter))
                });
            }
            return out;
        }
        (Phase::Joint, Sampling::Union, None) => (0..n_inter)
            .map(Item::Intermediate)
            .chain((0..n_end).map(Item::End))
            .collect(),
        (Phase::Joint, Sampling::PretrainSubsample { fraction, .. }, _) => {
            let mut pool: Vec<usize> = (0..n_inter).collect();
            pool.shuffle(rng);
            let keep = (fraction * n_inter as f64).round() as usize;
            pool.truncate(keep);
            pool.sort_unstable();
            pool.into_iter()
                .map(Item::Intermediate)
                .chain((0..n_end).map(Item::End))
                .collect()
        }
    };
    items.shuffle(rng);
    items
}

/// Trains `model` in place and returns one report per epoch. `on_epoch` is
/// called after every epoch, e.g. to evaluate on held-out data; an error
/// from it stops training.
///
/// The proxy stored in `model` decides how the end loss reaches `φ`; with
/// [`ProxyKind::Pipeline`] only intermediate instances update it.
pub fn train_joint<F>(
    model: &mut PipelineModel,
    inter: &[IntermediateExample],
    end: &[EndExample],
    cfg: &TrainConfig,
    mut on_epoch: F,
) -> Result<Vec<EpochReport>>
where
    F: FnMut(&EpochReport, &PipelineModel) -> Result<()>,
{
    cfg.validate()?;
    check_data(model, inter, end)?;
    let loss_kind = intermediate_loss_kind(cfg, model.proxy);
    if loss_kind == IntermediateLoss::LogLoss
        && matches!(model.intermediate.task, IntermediateTask::Graph { .. })
    {
        return Err(Error::Unsupported(
            "log-loss training is only available for tree intermediates".into(),
        ));
    }
    if model.proxy == ProxyKind::Sa
        && matches!(model.intermediate.task, IntermediateTask::Graph { .. })
    {
        return Err(Error::Unsupported(
            "structured attention needs marginal inference, which is only available for trees"
                .into(),
        ));
    }
    let pretrain_epochs = match cfg.sampling {
        Sampling::PretrainSubsample {
            pretrain_epochs, ..
        } => pretrain_epochs,
        Sampling::Union => 0,
    };
    if pretrain_epochs > 0 && inter.is_empty() {
        return Err(Error::invalid("pretraining needs intermediate data"));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(1);
    let mut opt_inter = Optimizer::new(cfg.optimizer, model.intermediate.num_params());
    let mut opt_end = Optimizer::new(cfg.optimizer, model.end.num_params());
    let mut grads = Grads {
        intermediate: model.intermediate.zeroed(),
        end: model.end.zeroed(),
    };
    let mut reports = Vec::new();
    let mut step = 0usize;

    for epoch in 0..pretrain_epochs + cfg.epochs {
        let phase = if epoch < pretrain_epochs {
            Phase::Pretrain
        } else {
            Phase::Joint
        };
        let lr = annealed_rate(
            cfg.learning_rate,
            cfg.anneal_factor,
            cfg.anneal_every,
            epoch,
        );
        let items = schedule(phase, cfg, inter.len(), end.len(), &mut rng);
        let mut inter_loss = 0.0;
        let mut end_loss = 0.0;
        let mut inter_steps = 0;
        let mut end_steps = 0;
        let mut max_norm: f64 = 0.0;
        for batch in items.chunks(cfg.batch_size) {
            step += 1;
            grads.intermediate.fill(0.0);
            grads.end.fill(0.0);
            for &item in batch {
                let loss = match item {
                    Item::Intermediate(i) => {
                        inter_steps += 1;
                        let l = intermediate_step(
                            &model.intermediate,
                            &inter[i],
                            loss_kind,
                            cfg,
                            &mut grads,
                        )?;
                        inter_loss += l;
                        l
                    }
                    Item::End(i) => {
                        end_steps += 1;
                        let l = end_step(model, &end[i], cfg, &mut grads)?;
                        end_loss += l;
                        l
                    }
                };
                if !loss.is_finite() {
                    return Err(Error::Diverged {
                        epoch: epoch + 1,
                        step,
                        detail: format!("loss became {loss}"),
                    });
                }
            }
            let scale = 1.0 / batch.len() as f64;
            grads.intermediate.scale(scale);
            grads.end.scale(scale);
            if !(grads.intermediate.all_finite() && grads.end.all_finite()) {
                return Err(Error::Diverged {
                    epoch: epoch + 1,
                    step,
                    detail: "non-finite gradient".into(),
                });
            }
            let norm = clip_global_norm(
                &mut [&mut grads.intermediate, &mut grads.end],
                cfg.clip_norm,
            );
            max_norm = max_norm.max(norm);
            opt_inter.step(&mut model.intermediate, &grads.intermediate, lr);
            if phase == Phase::Joint {
                opt_end.step(&mut model.end, &grads.end, lr);
            }
        }
        let mean = |total: f64, count: usize| (count > 0).then(|| total / count as f64);
        let report = EpochReport {
            epoch: epoch + 1,
            phase,
            learning_rate: lr,
            intermediate_loss: mean(inter_loss, inter_steps),
            end_loss: mean(end_loss, end_steps),
            intermediate_steps: inter_steps,
            end_steps,
            max_grad_norm: max_norm,
        };
        on_epoch(&report, model)?;
        reports.push(report);
    }
    Ok(reports)
}

fn intermediate_step(
    model: &IntermediateModel,
    ex: &IntermediateExample,
    loss_kind: IntermediateLoss,
    cfg: &TrainConfig,
    grads: &mut Grads,
) -> Result<f64> {
    let (scores, cache) = model.scores(&ex.tokens)?;
    let lg = match (&scores, &ex.gold, loss_kind) {
        (LayerScores::Tree(s), IntermediateGold::Tree(g), IntermediateLoss::Hinge) => {
            structured_hinge_tree(s, g, cfg.cost_weight)?
        }
        (LayerScores::Tree(s), IntermediateGold::Tree(g), IntermediateLoss::LogLoss) => {
            log_loss_tree(s, g)?
        }
        (LayerScores::Graph(s), IntermediateGold::Graph(g), IntermediateLoss::Hinge) => {
            structured_hinge_graph(s, g, cfg.cost_weight)?
        }
        _ => {
            return Err(Error::invalid(format!(
                "instance {} does not fit the intermediate task",
                ex.id
            )))
        }
    };
    model.backward(&cache, &lg.grad, &mut grads.intermediate)?;
    Ok(lg.loss)
}

fn end_step(
    model: &PipelineModel,
    ex: &EndExample,
    cfg: &TrainConfig,
    grads: &mut Grads,
) -> Result<f64> {
    let (scores, cache) = model.intermediate.scores(&ex.tokens)?;
    let (z, tape) = proxy::forward(scores, model.proxy)?;
    let fwd = model.end.forward(&ex.tokens, z.values())?;
    let (loss, d_z) =
        model
            .end
            .loss_backward(&fwd, ex.gold.as_gold(), cfg.cost_weight, &mut grads.end)?;
    if model.proxy.backpropagates() {
        let d_s = proxy::backward(&tape, &d_z)?;
        model
            .intermediate
            .backward(&cache, &d_s, &mut grads.intermediate)?;
    }
    Ok(loss)
}
