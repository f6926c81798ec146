//! `evprof` command-line front end.
//!
//! [`dispatch`] parses arguments, runs one pipeline stage and returns the
//! process exit code: 0 on success, 1 when the stage fails, 2 on usage
//! errors. Every stage writes a JSON run manifest next to its outputs.

mod manifest;
mod stages;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub use manifest::{sha256_file, InputDigest, RunManifest, StageRecord};

#[derive(Debug, Parser)]
#[command(name = "evprof", version, about = "Charging-session profiling pipeline")]
pub struct Cli {
    /// Worker threads for parallel stages (default: all cores).
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// TOML configuration file; command-line flags take precedence.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Master seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse a session export, apply the admission filters and rewrite it.
    Ingest(IngestArgs),
    /// Locate tails and build delta series for every session.
    Extract(ExtractArgs),
    /// Compute the feature matrix from extracted segments.
    Featurize(FeaturizeArgs),
    /// Run an experiment suite over a feature matrix.
    #[command(subcommand)]
    Experiment(ExperimentCommand),
    /// Generate a synthetic corpus with planted per-EV signatures.
    Synth(SynthArgs),
    /// Build plot-ready tables from an experiment's cells.csv.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// acn-json or csv.
    #[arg(long)]
    pub format: Option<String>,
    #[arg(long)]
    pub min_points: Option<usize>,
    #[arg(long)]
    pub min_sessions: Option<usize>,
    /// Output format (default: same as input).
    #[arg(long)]
    pub out_format: Option<String>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ExtractArgs {
    #[arg(long)]
    pub sessions: PathBuf,
    #[arg(long)]
    pub format: Option<String>,
    /// Segments, one JSON object per line.
    #[arg(long)]
    pub out: PathBuf,
    /// Rejected sessions as CSV.
    #[arg(long)]
    pub rejects: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct FeaturizeArgs {
    #[arg(long)]
    pub segments: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

/// Options shared by every experiment suite.
#[derive(Debug, Args)]
pub struct SuiteArgs {
    #[arg(long)]
    pub features: PathBuf,
    /// Comma-separated families: rf, dt, knn.
    #[arg(long, value_delimiter = ',', alias = "classifier")]
    pub classifiers: Vec<String>,
    /// Number of features kept by the selection step.
    #[arg(long)]
    pub nof: Option<usize>,
    /// chi2 or anova-f.
    #[arg(long)]
    pub scorer: Option<String>,
    #[arg(long)]
    pub reps: Option<usize>,
    #[arg(long)]
    pub k_folds: Option<usize>,
    #[arg(long)]
    pub test_fraction: Option<f64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Subcommand)]
pub enum ExperimentCommand {
    /// One-vs-all classification of every EV at several balance ratios.
    Binary {
        #[command(flatten)]
        suite: SuiteArgs,
        /// q or q-prime.
        #[arg(long, default_value = "q-prime")]
        balance: String,
        #[arg(long, value_delimiter = ',', default_values_t = vec![1.0, 2.0, 3.0, 4.0, 5.0])]
        values: Vec<f64>,
        #[arg(long)]
        min_target_samples: Option<usize>,
    },
    /// Multi-class classification over named dataset sizes.
    Multiclass {
        #[command(flatten)]
        suite: SuiteArgs,
        /// Comma-separated: small, medium, large, complete.
        #[arg(long, value_delimiter = ',', default_value = "small")]
        size: Vec<String>,
    },
    /// Multi-class classification over an EV-count by samples-per-EV grid.
    Grid {
        #[command(flatten)]
        suite: SuiteArgs,
        #[arg(long, value_delimiter = ',', default_values_t = vec![50, 100, 150, 200])]
        evs: Vec<usize>,
        #[arg(long, value_delimiter = ',', default_values_t = vec![10, 25, 50, 75])]
        samples: Vec<usize>,
    },
    /// Multi-class classification over reshaped per-EV sample distributions.
    Distribution {
        #[command(flatten)]
        suite: SuiteArgs,
        /// Comma-separated: regular, normal, uniform.
        #[arg(long, value_delimiter = ',', default_value = "normal")]
        shape: Vec<String>,
    },
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub evs: usize,
    #[arg(long)]
    pub sessions: usize,
    /// well-separated or overlapping.
    #[arg(long)]
    pub separation: Option<String>,
    #[arg(long)]
    pub truncate_prob: Option<f64>,
    #[arg(long)]
    pub noise_sigma: Option<f64>,
    #[arg(long)]
    pub min_len: Option<usize>,
    #[arg(long)]
    pub max_len: Option<usize>,
    /// Planted boundaries per session as CSV.
    #[arg(long)]
    pub truth: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Directory holding cells.csv.
    #[arg(long = "in", alias = "input")]
    pub input: PathBuf,
    /// Output directory (default: `report/` inside the input directory).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Runs the command line `argv` (including the program name) and returns
/// the exit code.
pub fn dispatch<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match stages::run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e:#}");
            1
        }
    }
}
