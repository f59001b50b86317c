//! Synthetic tasks, evaluation, agreement analysis and multi-seed
//! experiments.

mod analysis;
mod eval;
mod experiment;
mod synth;

pub use analysis::{
    categorize_head_changes, partition_by_agreement, AgreementReport, CategoryFractions,
    HeadChangeCounts, PartitionReport, OVERLAP_CONVENTION,
};
pub use eval::{
    end_counts, evaluate, f1, intermediate_counts, predict_all, score_predictions, Counts,
    EvalCounts, EvalReport, Metrics,
};
pub use experiment::{
    median, run_experiment, run_single, Comparison, ExperimentConfig, ExperimentResult, RunResult,
    SeedAnalysis,
};
pub use synth::{
    corrupt_graph, corrupt_tree, end_from_instances, end_label_of, eval_from_instances,
    generate_dataset, intermediate_from_instances, EvalExample, GenerationStats, GroundTruth,
    SyntheticDataset, SyntheticTaskSpec,
};
