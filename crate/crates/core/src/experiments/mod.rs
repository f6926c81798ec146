//! One-vs-all and multi-class experiment suites with repetition,
//! aggregation and plot-ready outputs.

mod audit;
mod balance;
mod report;
mod subsample;
mod suites;

pub use audit::LeakageAudit;
pub use balance::{
    build_binary_dataset, negative_order, BalanceConfig, BalanceMode, BinaryDataset,
    NEGATIVE_LABEL, POSITIVE_LABEL,
};
pub use report::{
    aggregate_reports, read_cells_csv, summarize, write_cells_csv, write_figure_tables,
    write_report, write_summary_csv, write_summary_md, Aggregate, CellResult, CellStatus,
    ExperimentReport, MetricStats, SuiteKind, CELLS_HEADER,
};
pub use subsample::{
    max_feasible_hi, normal_targets, subsample_distribution, subsample_multiclass, uniform_bins,
    DatasetSize, DistributionShape, MIN_EV_ROWS,
};
pub use suites::{
    in_pool, run_binary_suite, run_multiclass_suite, BinarySuiteConfig, DatasetSpec, MulticlassSuiteConfig,
    SuiteSettings,
};
