//! End-to-end pipeline: dataset, parents, supernetwork, stitches, search, reports.
//!
//! Each step reads the previous step's artifacts from the output directory, so
//! steps can be rerun independently.

mod cli;
mod commands;
mod config;


pub use cli::{resolve_config, run, Cli, Command, Common, SearchArgs};
pub use commands::{
    final_hypervolumes, find_run_dirs, format_stats, gen_data, load_experiment_dataset, load_trained_supernet,
    report, run_dir, search, search_evaluator, search_into, select_population, stats, stitch, sweep, train_parents,
    train_stitches_cmd, write_run, HvSummaryRow, ParentSummary, Report, ReportRow, RunSummary, StitchSummary,
    SweepRow, SweepSummary, Timing, DATASET_FILE, PARENT_FILES, REFERENCE_LABELS, SUPERNET_FILE, TIMING_FILE,
    TRAINED_SUPERNET_FILE,
};
pub use config::{DataConfig, DataKind, ExperimentConfig, ParentsConfig, SearchConfig, StitchConfig, SweepConfig};
