//! Experiment orchestration, metrics and persisted outputs.

mod config;
mod diagnostic;
mod plot;
mod record;
mod runner;

pub use config::{Budget, ExperimentConfig, LearnerKind, StrategySpec};
pub use diagnostic::{diagnostic_csv, entropy_diagnostic, DiagnosticRow, DIAGNOSTIC_HEADER};
pub use plot::{ema_smooth, mean_curve, render_curves, PlotOptions, SmoothedSeries};
pub use record::{csv_string, parse_csv, read_csv, write_atomic, write_csv, Phase, RecordSink, RunRow, CSV_HEADER, METRICS};
pub use runner::{
    default_metrics, evaluate, evaluate_with, final_metrics, mean_and_sample_std, run_cell, run_experiment,
    summary_csv, thread_count, write_outputs, CellOutcome, ExperimentResult, Learner, SummaryRow, SUMMARY_HEADER,
    THREADS_ENV,
};
