//! Forecast metrics, evaluation on test windows, report emission and the
//! comparison, ablation and transfer harnesses.

mod evaluate;
mod experiments;
mod metrics;
mod report;

pub use evaluate::{evaluate, DisplayRow, DisplaySample, EvalLabel, Forecaster, Oracle, Persistence, DISPLAY_LEN};
pub use experiments::{
    ablation_from_pairs, check_pair, evaluate_on, median, protocol_hash, rank_by_mape, run_ablation, run_comparison,
    run_transfer, train_variant, AblationResult, AblationSeed, ComparisonResult, TrainedModel, TrainedSet,
    TransferStats, TransferTarget, TRANSFER_LABEL,
};
pub use metrics::{mae, mape, rmse};
pub use report::{MetricsReport, MetricsRow, ReportFormat, Scale, REPORT_HEADER};
