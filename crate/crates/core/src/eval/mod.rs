//! Repeated stratified cross-validation and the classifier × window
//! experiment matrix.

mod cv;
mod folds;
mod metrics;
mod report;

pub use cv::{
    cv_scores, evaluate_split, experiment_matrix, mean_std, run_repeated_cv, CvDataset, CvPlan,
    EvaluationReport,
};
pub use folds::{grouped_kfold, stratified_kfold, training_indices, Grouping};
pub use metrics::{confusion, f1_score, Confusion};
pub use report::{format_cell, render_table, ResultsFile};
