//! Inference modes, experiments, factor sweeps and the synthetic corpus.

mod config;
mod experiment;
mod listing;
mod metrics;
mod pipeline;
mod report;
mod sweep;
mod synthetic;

pub use config::{default_k_values, ExperimentConfig, InferenceMode};
pub use experiment::{check_truth_ids, run_experiment};
pub use listing::{ImageRef, Listing, Query, RawText};
pub use metrics::{acc_at_k, AccuracyAtK, MetricsReport, QueryRank, WallClock};
pub use pipeline::{embed_listing, EmbeddingCache, Encoders, Harness};
pub use report::{csv_rows, format_table, reports_to_csv, reports_to_json, write_reports, CsvRow};
pub use sweep::{factor_sweep, SweepCell, SweepGrid, SweepRow};
pub use synthetic::{
    generate_synthetic_corpus, SyntheticCorpus, SyntheticCorpusSpec, QUERY_ID_BASE, SHAPES,
};
