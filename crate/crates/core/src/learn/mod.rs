//! Neural components, losses and the joint training loop.

mod classifier;
mod config;
mod encoder;
mod features;
mod gradcheck;
mod losses;
mod model;
mod optim;
mod params;
mod scorer;
mod trainer;

pub use classifier::{log_softmax, Classifier, ClassifierCache, ClassifierSpec};
pub use config::{IntermediateLoss, KeyValues, ModelConfig, Sampling, TrainConfig};
pub use encoder::{Activation, Encoder, EncoderCache, EncoderSpec};
pub use features::{
    head_feature_backward, head_feature_concat, HeadFeatureGrads, HeadMode, RoleInput,
};
pub use gradcheck::{
    central_differences, check_block, check_blocks, relative_error, GradBlock, GradCheckResult,
    DEFAULT_INSTANCES, DEFAULT_TOLERANCE, FD_STEP, MARGINAL_TOLERANCE,
};
pub use losses::{log_loss_tree, structured_hinge_graph, structured_hinge_tree, LossGrad};
pub use model::{
    EndForward, EndGold, EndModel, EndPrediction, EndTask, IntermediateCache, IntermediateModel,
    IntermediatePrediction, IntermediateTask, PipelineModel, Prediction,
};
pub use optim::{annealed_rate, Optimizer, OptimizerKind};
pub use params::{clip_global_norm, glorot, zeros, Params, ParamsDyn};
pub use scorer::{PairScorer, ScorerCache, ScorerSpec};
pub use trainer::{
    train_joint, EndExample, EndLabel, EpochReport, IntermediateExample, IntermediateGold, Phase,
};
