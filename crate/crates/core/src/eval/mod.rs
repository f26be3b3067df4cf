//! Metrics, significance tests and metric reports.

mod metrics;
mod report;
mod significance;

pub use metrics::{
    average_ranks, mae, mean_ranking_loss, mean_ranking_loss_with, pearson, ranking_accuracy, rmse, spearman,
    RankingResult,
};
pub use report::{
    average_reports, constant_baseline, constant_baseline_with, dataset_task, evaluate, predict_dataset,
    ranking_report, rating_report, score_predictions, MetricReport, Predictions, Task,
};
pub use significance::{bootstrap_compare, student_t_upper_tail, williams_test, WilliamsResult};
