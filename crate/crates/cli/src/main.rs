mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use glyphsearch_core::harness::InferenceMode;
use glyphsearch_core::{Location, Rgb};

use crate::config::UsageError;

/// Render listing titles onto product images, embed, retrieve and evaluate.
#[derive(Debug, Parser)]
#[command(name = "glyphsearch", version)]
struct Cli {
    /// Print machine-readable JSON on stdout.
    #[arg(long, global = true)]
    json: bool,

    /// Log more (-v info, -vv debug). RUST_LOG takes precedence.
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Draw text onto an image and write the result as PNG.
    Render(RenderArgs),
    /// Embed every listing of a manifest and write a vector store.
    Embed(EmbedArgs),
    /// Run one retrieval experiment and report Acc@k.
    Eval(EvalArgs),
    /// Run an experiment for every cell of a typographic factor grid.
    Sweep(SweepArgs),
    /// Write a seeded synthetic corpus with manifests and a starter config.
    Synth(SynthArgs),
}

#[derive(Debug, Args)]
struct RenderFlags {
    /// Font size as a fraction of the largest size that fits.
    #[arg(long)]
    ratio: Option<f64>,
    /// Named color (red, blue, green, orange, black) or #rrggbb.
    #[arg(long)]
    color: Option<Rgb>,
    /// top, center (or middle), bottom.
    #[arg(long)]
    location: Option<Location>,
    /// `builtin:dejavu-sans` or a path to a TTF/OTF file.
    #[arg(long)]
    font: Option<String>,
    #[arg(long)]
    max_width_fraction: Option<f64>,
    #[arg(long)]
    margin_fraction: Option<f64>,
}

#[derive(Debug, Args)]
struct RenderArgs {
    #[arg(long)]
    image: PathBuf,
    #[arg(long)]
    text: String,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    factors: RenderFlags,
}

#[derive(Debug, Args)]
struct ExperimentFlags {
    /// TOML run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    mode: Option<InferenceMode>,
    #[arg(long)]
    seed: Option<u64>,
    /// Comma-separated k values, e.g. `1,3,10`.
    #[arg(long, value_delimiter = ',')]
    k: Option<Vec<usize>>,
    /// Cache root for embeddings; overrides $GLYPHSEARCH_CACHE and the config.
    #[arg(long)]
    cache: Option<PathBuf>,
    #[command(flatten)]
    factors: RenderFlags,
}

#[derive(Debug, Args)]
struct EmbedArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    out_store: PathBuf,
    /// `reference`, or the base URL of an embedding server.
    #[arg(long)]
    encoder: Option<String>,
    /// Model id to request from a remote encoder.
    #[arg(long)]
    model_id: Option<String>,
    #[command(flatten)]
    exp: ExperimentFlags,
}

#[derive(Debug, Args)]
struct DatasetFlags {
    #[arg(long)]
    queries: Option<PathBuf>,
    #[arg(long)]
    products: Option<PathBuf>,
    /// Directory for the JSON and CSV reports.
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[command(flatten)]
    exp: ExperimentFlags,
    #[command(flatten)]
    data: DatasetFlags,
}

#[derive(Debug, Args)]
struct SweepArgs {
    /// TOML grid: ratios, colors, locations, modes.
    #[arg(long)]
    grid: PathBuf,
    #[command(flatten)]
    exp: ExperimentFlags,
    #[command(flatten)]
    data: DatasetFlags,
}

#[derive(Debug, Args)]
struct SynthArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 200)]
    queries: usize,
    #[arg(long, default_value_t = 2000)]
    products: usize,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    #[arg(long, default_value_t = 128)]
    width: u32,
    #[arg(long, default_value_t = 128)]
    height: u32,
    #[arg(long, default_value_t = 10)]
    classes: usize,
}

fn exit_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<UsageError>().is_some() {
        return 2;
    }
    match err.downcast_ref::<glyphsearch_core::Error>() {
        Some(e) if e.is_config() => 2,
        _ => 1,
    }
}

/// The error chain joined with ": ", skipping causes that the preceding
/// message already spells out.
fn describe(err: &anyhow::Error) -> String {
    let mut out = err.to_string();
    for cause in err.chain().skip(1) {
        let text = cause.to_string();
        if !out.contains(&text) {
            out.push_str(": ");
            out.push_str(&text);
        }
    }
    out
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();

    let result = match cli.command {
        Command::Render(a) => commands::render(a),
        Command::Embed(a) => commands::embed(a, cli.json),
        Command::Eval(a) => commands::eval(a, cli.json),
        Command::Sweep(a) => commands::sweep(a, cli.json),
        Command::Synth(a) => commands::synth(a, cli.json),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", describe(&e));
            ExitCode::from(exit_code(&e))
        }
    }
}
