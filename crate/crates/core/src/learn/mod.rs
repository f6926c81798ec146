//! Classifiers, stratified splitting, grid search and evaluation metrics.
//!
//! All models consume the min-max scaled columns chosen by a
//! [`SelectionModel`](crate::features::SelectionModel); training fits that
//! selection on the training rows only.

mod dense;
mod forest;
mod grid;
mod knn;
mod metrics;
mod model;
mod split;
mod tree;

pub use dense::{encode_labels, Dense};
pub use forest::{bootstrap_indices, RandomForest};
pub use grid::{
    grid_search, table_ii_grid, write_cv_table, CvRow, GridSearchConfig, GridSearchOutcome,
    Scoring,
};
pub use knn::{KnnModel, Metric, Weights};
pub use metrics::{evaluate, ClassMetrics, EvalMode, MetricsReport};
pub use model::{train, train_with_selection, ClassifierSpec, Family, Fitted, TrainedModel};
pub use split::{fold_complement, stratified_kfold, stratified_split};
pub use tree::{Criterion, DecisionTree, MaxFeatures, Node, TreeParams};

/// Which fitting step a set of rows was used for.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FitStage {
    Scaler,
    Selection,
    CvTrain,
    CvValidation,
}

/// Observer of the rows used at each fitting step, for leakage audits.
pub trait FitProbe: Sync {
    fn record(&self, stage: FitStage, session_ids: &[String]);
}
