//! Config-driven experiments: paired hybrid and online-only arms over many
//! seeded trials, aggregated into CSV tables and SVG charts, with a manifest
//! that can be replayed bit for bit.

mod config;
mod experiment;
mod manifest;
mod output;

pub use config::{
    AgentSpec, Component, EnvSpec, ExperimentConfig, OutputFormat, PartitionSpec, RandomParams, ResolvedConfig,
    METRIC_NAMES,
};
pub use experiment::{
    run_experiment, ArmPairing, ExperimentManifest, ExperimentOutput, RunOptions, TrialManifest, ARMS,
    MAX_CLASS_SIZE, TETRIS_DEFAULT_RANK, TETRIS_DEFAULT_SPLIT,
};
pub use manifest::{load_manifest, replay, resolve_out_dir, write_outputs, DEFAULT_OUT_DIR, MANIFEST_FILE, OUT_DIR_ENV};
pub use output::{curve_csv, format_number, render_svg, sha256_hex, trials_csv, ChartStyle, SvgSeries};
