//! End-to-end benchmark pipeline behind the `rainbench` CLI: data ingestion,
//! leakage-free preprocessing, both model fits, and report emission.

mod config;
mod emit;
mod run;

pub use config::{parse_synth, read_config_file, BenchConfig, DataSource, TrainerKind};
pub use emit::{emit_plot_csvs, emit_table, emit_table_stable, PredictionRow};
pub use run::{
    climatology_baseline, read_output, run_benchmark, BenchReport, MarsSummary, ModelResult,
    SweepPoint,
};
