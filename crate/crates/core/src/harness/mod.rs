//! Experiment configuration, the training loop, metrics files and
//! cross-run comparison.

mod compare;
mod config;
mod metrics;
mod run;

pub use compare::{compare_methods, render_summary_csv, render_table, MethodSummary, RunSummary, Stat};
pub use config::{ExperimentConfig, FAST_EVAL_SIZE, FAST_ITERATIONS};
pub use metrics::{alpha_column, metrics_columns, render_metrics, render_timing, write_atomic, CsvTable, MetricsRow, METRICS_VERSION};
pub use run::{
    build_eval_set, default_out_dir, frozen_task_set, rank_preservation_probe, run_experiment, run_to_dir, Checkpoint,
    RunOutput, StepStats, Trainer, CHECKPOINT_FILE, CHECKPOINT_VERSION, METRICS_FILE, TIMING_FILE,
};
