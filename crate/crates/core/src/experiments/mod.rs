//! Training, evaluation, repeated random splits, the kNN baseline and the
//! convergence-rate experiment.

mod eval;
mod knn;
mod rate;
mod splits;
mod train;

pub use eval::{argmax, evaluate, evaluate_outputs, Metric};
pub use knn::{knn_baseline, knn_distance_matrix, knn_predict, tune_knn, KnnMetric};
pub use rate::{rate_cell, rate_experiment, RateConfig, RateReport, RateRow};
pub use splits::{
    repeated_splits, run_split, stratified_split, FamilyResult, MetricsReport, SplitIndices,
    SplitResult,
};
pub use train::{
    build_model, train_erm, AtlasConfig, Family, History, ModelConfig, TrainConfig, TrainOutcome,
    TrainedModel,
};
