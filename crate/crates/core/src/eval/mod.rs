//! Expanding-window backtest, error metrics, tail scoring, and report output.

mod backtest;
mod evt;
mod metrics;
mod plot;
mod report;

pub use backtest::{
    run_backtest, run_fold, run_weight_ablation, thread_pool, AblationInputs, AblationRow,
    BacktestPlan, BacktestReport, FoldReport, FoldResult, ModelKind, ReportMetadata,
    DEFAULT_ABLATION_ALPHAS, THREADS_ENV,
};
pub use evt::{empirical_quantile, evt_extreme_mae, ExtremeReport};
pub use metrics::{mae, rmae, rmse, MetricSet};
pub use plot::render_fold_svg;
pub use report::{metrics_csv, write_report, METRICS_FILE, REPORT_FILE};
