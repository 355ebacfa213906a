//! Metrics and statistical analyses for affinity predictions.

mod metrics;
mod screen;
mod stats;
mod synergy;

pub use metrics::{
    evaluate, grouped_report, monte_carlo_subsample_null, mse_rmse, pearson, rank_average,
    spearman, EvaluationReport, NullDistribution,
};
pub use screen::{
    precision_at_actives, screen_report, topk_recall, ScoreOrientation, ScoredLigand,
    TargetScreen,
};
pub use stats::{mann_whitney_u, welch_t, MannWhitney, UMethod, WelchT};
pub use synergy::{synergy_partition, synergy_partition_among, SynergyGroup, SynergyPartition};
