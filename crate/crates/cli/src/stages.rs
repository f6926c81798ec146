use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use serde::Serialize;

use evprof_core::config::ConfigMap;
use evprof_core::experiments::{
    in_pool, read_cells_csv, run_binary_suite, run_multiclass_suite, write_figure_tables,
    write_report, BalanceMode, BinarySuiteConfig, DatasetSize, DatasetSpec, DistributionShape,
    ExperimentReport, MulticlassSuiteConfig, SuiteKind, SuiteSettings,
};
use evprof_core::features::{extract_matrix, FeatureMatrix, Scorer, SelectionConfig};
use evprof_core::ingest::{apply_primary_filters, dataset_summary, parse_file, write_sessions, Format};
use evprof_core::learn::Family;
use evprof_core::synth::{generate_corpus, Separation, SynthOptions};
use evprof_core::tail::{read_segments, segment_corpus, write_rejects, write_segments};

use crate::manifest::RunManifest;
use crate::{Cli, Command, ExperimentCommand, ExtractArgs, FeaturizeArgs, IngestArgs, ReportArgs, SuiteArgs, SynthArgs};

/// Resolved global settings: flags first, then the config file, then defaults.
struct Settings {
    config: ConfigMap,
    seed: u64,
    workers: Option<usize>,
}

impl Settings {
    fn new(cli: &Cli) -> Result<Self> {
        let config = match &cli.config {
            Some(path) => ConfigMap::load(path).with_context(|| format!("loading {}", path.display()))?,
            None => ConfigMap::default(),
        };
        let seed = match cli.seed {
            Some(s) => s,
            None => config.get_u64("seed")?.unwrap_or(0),
        };
        let workers = match cli.workers {
            Some(w) => Some(w),
            None => config.get_usize("workers")?,
        };
        if workers == Some(0) {
            bail!("--workers must be >= 1");
        }
        Ok(Self {
            config,
            seed,
            workers,
        })
    }

    fn manifest(&self, command: &str) -> RunManifest {
        RunManifest::new(command, Some(self.seed), self.workers)
    }

    fn usize_or(&self, flag: Option<usize>, key: &str, default: usize) -> Result<usize> {
        Ok(match flag {
            Some(v) => v,
            None => self.config.get_usize(key)?.unwrap_or(default),
        })
    }

    fn f64_or(&self, flag: Option<f64>, key: &str, default: f64) -> Result<f64> {
        Ok(match flag {
            Some(v) => v,
            None => self.config.get_f64(key)?.unwrap_or(default),
        })
    }

    fn parsed_or<T>(&self, flag: Option<&str>, key: &str, default: &str) -> Result<T>
    where
        T: FromStr<Err = evprof_core::Error>,
    {
        let text = match flag {
            Some(v) => v.to_string(),
            None => self.config.get_str(key)?.unwrap_or(default).to_string(),
        };
        Ok(text.parse()?)
    }

    fn pool<T: Send>(&self, job: impl FnOnce() -> T + Send) -> Result<T> {
        Ok(in_pool(self.workers, job)?)
    }
}

/// Adds the fields of a serializable parameter struct to the manifest under
/// `prefix`.
fn record_params<T: Serialize>(m: &mut RunManifest, prefix: &str, params: &T) -> Result<()> {
    if let serde_json::Value::Object(map) = serde_json::to_value(params)? {
        for (k, v) in map {
            let v = match v {
                serde_json::Value::String(s) => s,
                other => other.to_string(),
            };
            m.setting(&format!("{prefix}.{k}"), v);
        }
    }
    Ok(())
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent)?;
    }
    Ok(BufWriter::new(
        File::create(path).with_context(|| format!("cannot create {}", path.display()))?,
    ))
}

fn open(path: &Path) -> Result<BufReader<File>> {
    Ok(BufReader::new(
        File::open(path).with_context(|| format!("cannot open {}", path.display()))?,
    ))
}

pub fn run(cli: Cli) -> Result<()> {
    let ctx = Settings::new(&cli)?;
    match cli.command {
        Command::Ingest(args) => ingest(&ctx, args),
        Command::Extract(args) => extract(&ctx, args),
        Command::Featurize(args) => featurize(&ctx, args),
        Command::Experiment(cmd) => experiment(&ctx, cmd),
        Command::Synth(args) => synth(&ctx, args),
        Command::Report(args) => report(&ctx, args),
    }
}

fn ingest(ctx: &Settings, args: IngestArgs) -> Result<()> {
    let mut m = ctx.manifest("ingest");
    let format: Format = ctx.parsed_or(args.format.as_deref(), "ingest.format", "acn-json")?;
    let out_format: Format = match args.out_format.as_deref() {
        Some(f) => f.parse()?,
        None => format,
    };
    let min_points = ctx.usize_or(args.min_points, "ingest.min_points", 100)?;
    let min_sessions = ctx.usize_or(args.min_sessions, "ingest.min_sessions", 10)?;
    m.setting("ingest.format", format);
    m.setting("ingest.out_format", out_format);
    m.setting("ingest.min_points", min_points);
    m.setting("ingest.min_sessions", min_sessions);
    m.input(&args.input)?;

    let t = Instant::now();
    let corpus = parse_file(&args.input, format)?;
    m.stage("parse", corpus.len(), corpus.provenance.stats.dropped_missing, t);
    let t = Instant::now();
    let filtered = apply_primary_filters(&corpus, min_points, min_sessions);
    m.stage("filter", filtered.len(), corpus.len() - filtered.len(), t);
    if let Ok(summary) = dataset_summary(&filtered, 10) {
        log::info!(
            "{} sessions from {} EVs ({:.1} sessions per EV)",
            summary.n_sessions,
            summary.n_evs,
            summary.mean_sessions_per_ev
        );
    }

    let mut out = create(&args.out)?;
    write_sessions(&filtered.sessions, &mut out, out_format)?;
    out.flush()?;
    m.output(&args.out);
    m.write_for(&args.out)?;
    Ok(())
}

fn extract(ctx: &Settings, args: ExtractArgs) -> Result<()> {
    let mut m = ctx.manifest("extract");
    let format: Format = ctx.parsed_or(args.format.as_deref(), "ingest.format", "acn-json")?;
    let filter = ctx.config.filter_params()?;
    let tail = ctx.config.tail_params()?;
    m.setting("ingest.format", format);
    record_params(&mut m, "filter", &filter)?;
    record_params(&mut m, "tail", &tail)?;
    m.input(&args.sessions)?;

    let t = Instant::now();
    let corpus = parse_file(&args.sessions, format)?;
    m.stage("parse", corpus.len(), corpus.provenance.stats.dropped_missing, t);
    let t = Instant::now();
    let seg = ctx.pool(|| segment_corpus(&corpus, &filter, &tail))?;
    m.stage("segment", seg.segments.len(), seg.rejects.len(), t);
    log::info!("{} segments, {} rejected", seg.segments.len(), seg.rejects.len());

    let mut out = create(&args.out)?;
    write_segments(&seg.segments, &mut out)?;
    m.output(&args.out);
    if let Some(path) = &args.rejects {
        write_rejects(&seg.rejects, create(path)?)?;
        m.output(path);
    }
    m.write_for(&args.out)?;
    Ok(())
}

fn featurize(ctx: &Settings, args: FeaturizeArgs) -> Result<()> {
    let mut m = ctx.manifest("featurize");
    m.input(&args.segments)?;
    let t = Instant::now();
    let segments = read_segments(open(&args.segments)?)?;
    m.stage("read", segments.len(), 0, t);
    let t = Instant::now();
    let matrix = ctx.pool(|| extract_matrix(&segments))?;
    m.stage("features", matrix.n_rows(), 0, t);
    matrix.write_csv(create(&args.out)?)?;
    m.output(&args.out);
    m.write_for(&args.out)?;
    Ok(())
}

fn families(names: &[String]) -> Result<Vec<Family>> {
    if names.is_empty() {
        return Ok(vec![Family::RandomForest, Family::DecisionTree, Family::Knn]);
    }
    let mut out: Vec<Family> = Vec::new();
    for n in names {
        let f: Family = n.trim().parse()?;
        if !out.contains(&f) {
            out.push(f);
        }
    }
    Ok(out)
}

/// Reads the feature matrix and assembles settings shared by all suites.
fn suite_setup(
    ctx: &Settings,
    args: &SuiteArgs,
    default_selection: SelectionConfig,
    m: &mut RunManifest,
) -> Result<(FeatureMatrix, SuiteSettings)> {
    m.input(&args.features)?;
    let t = Instant::now();
    let matrix = FeatureMatrix::read_csv(open(&args.features)?)
        .with_context(|| format!("reading {}", args.features.display()))?;
    m.stage("read", matrix.n_rows(), 0, t);

    let scorer_default = match default_selection.scorer {
        Scorer::Chi2 => "chi2",
        Scorer::AnovaF => "anova-f",
    };
    let selection = SelectionConfig {
        nof: ctx.usize_or(args.nof, "selection.nof", default_selection.nof)?,
        scorer: ctx.parsed_or(args.scorer.as_deref(), "selection.scorer", scorer_default)?,
    };
    let mut settings = SuiteSettings::new(families(&args.classifiers)?, selection, ctx.seed);
    settings.repetitions = ctx.usize_or(args.reps, "experiment.reps", settings.repetitions)?;
    settings.k_folds = ctx.usize_or(args.k_folds, "experiment.k_folds", settings.k_folds)?;
    settings.test_fraction =
        ctx.f64_or(args.test_fraction, "experiment.test_fraction", settings.test_fraction)?;
    settings.workers = ctx.workers;

    let names: Vec<&str> = settings.families.iter().map(|f| f.as_str()).collect();
    m.setting("experiment.classifiers", names.join(","));
    m.setting("experiment.reps", settings.repetitions);
    m.setting("experiment.k_folds", settings.k_folds);
    m.setting("experiment.test_fraction", settings.test_fraction);
    record_params(m, "selection", &settings.selection)?;
    Ok((matrix, settings))
}

fn finish_experiment(report: &ExperimentReport, out: &Path, mut m: RunManifest, started: Instant) -> Result<()> {
    let failed = report.cells.iter().filter(|c| !c.is_ok()).count();
    m.stage("suite", report.cells.len(), failed, started);
    write_report(report, out)?;
    for name in ["cells.csv", "summary.csv", "summary.md"] {
        m.output(&out.join(name));
    }
    m.write_for(out)?;
    if failed > 0 {
        log::warn!("{failed} of {} cells failed; see cells.csv", report.cells.len());
    }
    Ok(())
}

fn experiment(ctx: &Settings, cmd: ExperimentCommand) -> Result<()> {
    match cmd {
        ExperimentCommand::Binary {
            suite,
            balance,
            values,
            min_target_samples,
        } => {
            let mut m = ctx.manifest("experiment binary");
            let (matrix, settings) = suite_setup(ctx, &suite, SelectionConfig::binary_default(), &mut m)?;
            let mode: BalanceMode = balance.parse()?;
            let min_target_samples =
                ctx.usize_or(min_target_samples, "experiment.min_target_samples", 50)?;
            m.setting("experiment.balance", balance);
            m.setting(
                "experiment.values",
                values.iter().map(f64::to_string).collect::<Vec<_>>().join(","),
            );
            m.setting("experiment.min_target_samples", min_target_samples);
            let config = BinarySuiteConfig {
                mode,
                values,
                min_target_samples,
                settings,
            };
            let t = Instant::now();
            let report = run_binary_suite(&matrix, &config, None)?;
            finish_experiment(&report, &suite.out, m, t)
        }
        ExperimentCommand::Multiclass { suite, size } => {
            let datasets = size
                .iter()
                .map(|s| Ok(DatasetSpec::Size(s.trim().parse::<DatasetSize>()?)))
                .collect::<Result<Vec<_>>>()?;
            m_run(ctx, "experiment multiclass", &suite, SuiteKind::Multiclass, datasets, size.join(","))
        }
        ExperimentCommand::Grid { suite, evs, samples } => {
            let datasets = evs
                .iter()
                .flat_map(|&n_evs| {
                    samples.iter().map(move |&samples_per_ev| {
                        DatasetSpec::Size(DatasetSize::Fixed {
                            n_evs,
                            samples_per_ev,
                        })
                    })
                })
                .collect();
            let label = format!(
                "evs={};samples={}",
                evs.iter().map(usize::to_string).collect::<Vec<_>>().join(","),
                samples.iter().map(usize::to_string).collect::<Vec<_>>().join(",")
            );
            m_run(ctx, "experiment grid", &suite, SuiteKind::FixedGrid, datasets, label)
        }
        ExperimentCommand::Distribution { suite, shape } => {
            let datasets = shape
                .iter()
                .map(|s| Ok(DatasetSpec::Shape(s.trim().parse::<DistributionShape>()?)))
                .collect::<Result<Vec<_>>>()?;
            m_run(ctx, "experiment distribution", &suite, SuiteKind::Distribution, datasets, shape.join(","))
        }
    }
}

fn m_run(
    ctx: &Settings,
    command: &str,
    args: &SuiteArgs,
    kind: SuiteKind,
    datasets: Vec<DatasetSpec>,
    label: String,
) -> Result<()> {
    let mut m = ctx.manifest(command);
    let (matrix, settings) = suite_setup(ctx, args, SelectionConfig::multiclass_default(), &mut m)?;
    m.setting("experiment.datasets", label);
    let config = MulticlassSuiteConfig {
        suite: kind,
        datasets,
        settings,
    };
    let t = Instant::now();
    let report = run_multiclass_suite(&matrix, &config, None)?;
    finish_experiment(&report, &args.out, m, t)
}

fn synth(ctx: &Settings, args: SynthArgs) -> Result<()> {
    let mut m = ctx.manifest("synth");
    let defaults = SynthOptions::default();
    let noise_sigma = match args.noise_sigma {
        Some(v) => Some(v),
        None => ctx.config.get_f64("synth.noise_sigma")?,
    };
    let options = SynthOptions {
        separation: ctx.parsed_or::<Separation>(args.separation.as_deref(), "synth.separation", "well-separated")?,
        min_len: ctx.usize_or(args.min_len, "synth.min_len", defaults.min_len)?,
        max_len: ctx.usize_or(args.max_len, "synth.max_len", defaults.max_len)?,
        truncate_prob: ctx.f64_or(args.truncate_prob, "synth.truncate_prob", defaults.truncate_prob)?,
        noise_sigma,
    };
    m.setting("synth.evs", args.evs);
    m.setting("synth.sessions", args.sessions);
    record_params(&mut m, "synth", &options)?;

    let t = Instant::now();
    let corpus = generate_corpus(args.evs, args.sessions, ctx.seed, &options)?;
    let truncated = corpus.truth.iter().filter(|t| t.truncated).count();
    m.stage("generate", corpus.corpus.len(), truncated, t);

    let mut out = create(&args.out)?;
    write_sessions(&corpus.corpus.sessions, &mut out, Format::AcnJson)?;
    out.flush()?;
    m.output(&args.out);
    if let Some(path) = &args.truth {
        let mut w = csv::Writer::from_writer(create(path)?);
        w.write_record(["session_id", "ev_label", "cv_onset", "zero_onset", "truncated"])?;
        for (s, truth) in corpus.corpus.sessions.iter().zip(&corpus.truth) {
            w.write_record([
                s.session_id.as_str(),
                s.label().unwrap_or_default(),
                &truth.cv_onset.to_string(),
                &truth.zero_onset.map(|z| z.to_string()).unwrap_or_default(),
                &truth.truncated.to_string(),
            ])?;
        }
        w.flush()?;
        m.output(path);
    }
    m.write_for(&args.out)?;
    Ok(())
}

fn report(ctx: &Settings, args: ReportArgs) -> Result<()> {
    let mut m = ctx.manifest("report");
    let cells_path = args.input.join("cells.csv");
    if !cells_path.is_file() {
        bail!("no cells.csv in {}", args.input.display());
    }
    m.input(&cells_path)?;
    let t = Instant::now();
    let cells = read_cells_csv(open(&cells_path)?)
        .with_context(|| format!("reading {}", cells_path.display()))?;
    if cells.is_empty() {
        bail!("{} contains no cells", cells_path.display());
    }
    let failed = cells.iter().filter(|c| !c.is_ok()).count();
    m.stage("read", cells.len(), failed, t);
    let out: PathBuf = args.out.unwrap_or_else(|| args.input.join("report"));
    let t = Instant::now();
    for path in write_figure_tables(&cells, &out)? {
        m.output(&path);
    }
    m.stage("tables", cells.len(), failed, t);
    m.write_for(&out)?;
    Ok(())
}
