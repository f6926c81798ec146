use std::collections::{BTreeMap, HashSet};
use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::audit::LeakageAudit;
use super::balance::{build_binary_dataset, BalanceConfig, BalanceMode, POSITIVE_LABEL};
use super::report::{summarize, CellResult, CellStatus, ExperimentReport, SuiteKind};
use super::subsample::{subsample_distribution, subsample_multiclass, DatasetSize, DistributionShape};
use crate::error::{Error, Result};
use crate::features::{FeatureMatrix, SelectionConfig};
use crate::learn::{
    evaluate, grid_search, stratified_split, table_ii_grid, ClassifierSpec, EvalMode, Family,
    FitProbe, GridSearchConfig, Scoring,
};
use crate::rng::{derive_seed, hash_str};

/// Settings shared by every suite.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteSettings {
    pub families: Vec<Family>,
    /// Grid per family; families without an entry use their full grid.
    pub grids: BTreeMap<Family, Vec<ClassifierSpec>>,
    pub selection: SelectionConfig,
    pub repetitions: usize,
    pub seed: u64,
    pub k_folds: usize,
    pub test_fraction: f64,
    /// Worker threads; `None` uses the global pool.
    pub workers: Option<usize>,
}

impl SuiteSettings {
    pub fn new(families: Vec<Family>, selection: SelectionConfig, seed: u64) -> Self {
        Self {
            families,
            grids: BTreeMap::new(),
            selection,
            repetitions: 5,
            seed,
            k_folds: 5,
            test_fraction: 0.2,
            workers: None,
        }
    }

    pub fn grid(&self, family: Family) -> Vec<ClassifierSpec> {
        self.grids
            .get(&family)
            .cloned()
            .unwrap_or_else(|| table_ii_grid(family))
    }

    pub fn validate(&self) -> Result<()> {
        if self.repetitions == 0 {
            return Err(Error::Config("repetitions must be >= 1".into()));
        }
        if self.families.is_empty() {
            return Err(Error::Config("at least one classifier family is required".into()));
        }
        if let Some((f, _)) = self.grids.iter().find(|(f, g)| g.is_empty() || g.iter().any(|s| s.family() != **f)) {
            return Err(Error::Config(format!("grid for {f} is empty or mixes families")));
        }
        if self.workers == Some(0) {
            return Err(Error::Config("workers must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BinarySuiteConfig {
    pub mode: BalanceMode,
    pub values: Vec<f64>,
    pub min_target_samples: usize,
    pub settings: SuiteSettings,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DatasetSpec {
    Size(DatasetSize),
    Shape(DistributionShape),
}

impl fmt::Display for DatasetSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DatasetSpec::Size(s) => s.fmt(f),
            DatasetSpec::Shape(s) => s.fmt(f),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MulticlassSuiteConfig {
    pub suite: SuiteKind,
    pub datasets: Vec<DatasetSpec>,
    pub settings: SuiteSettings,
}

/// Runs `job` on a dedicated pool of `workers` threads, or on the global
/// pool when `workers` is `None`.
pub fn in_pool<T: Send>(workers: Option<usize>, job: impl FnOnce() -> T + Send) -> Result<T> {
    match workers {
        None => Ok(job()),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::Config(format!("cannot start {n} workers: {e}")))?;
            Ok(pool.install(job))
        }
    }
}

struct CellKey<'a> {
    suite: SuiteKind,
    config: String,
    repetition: usize,
    target: Option<&'a str>,
}

impl CellKey<'_> {
    fn result(&self, classifier: Family) -> CellResult {
        CellResult {
            suite: self.suite,
            config: self.config.clone(),
            repetition: self.repetition,
            target: self.target.map(str::to_string),
            classifier,
            params: None,
            status: CellStatus::Ok,
            accuracy: None,
            macro_f1: None,
            positive_f1: None,
        }
    }

    fn failed(&self, settings: &SuiteSettings, err: &Error) -> Vec<CellResult> {
        settings
            .families
            .iter()
            .map(|&f| CellResult {
                status: CellStatus::Failed(err.to_string()),
                ..self.result(f)
            })
            .collect()
    }
}

/// Split, then grid search and evaluate each family on one dataset.
fn run_cell(
    key: &CellKey<'_>,
    matrix: &FeatureMatrix,
    labels: &[String],
    settings: &SuiteSettings,
    cell_seed: u64,
    audit: Option<&LeakageAudit>,
) -> Vec<CellResult> {
    let (train, test) = match stratified_split(labels, settings.test_fraction, derive_seed(&[cell_seed, 1])) {
        Ok(s) => s,
        Err(e) => return key.failed(settings, &e),
    };
    let train_m = matrix.subset(&train);
    let test_m = matrix.subset(&test);
    let train_y: Vec<String> = train.iter().map(|&i| labels[i].clone()).collect();
    let test_y: Vec<String> = test.iter().map(|&i| labels[i].clone()).collect();
    let (mode, scoring, positive) = match key.suite {
        SuiteKind::Binary => (
            EvalMode::Binary,
            Scoring::F1Positive(POSITIVE_LABEL.to_string()),
            Some(POSITIVE_LABEL),
        ),
        _ => (EvalMode::Multiclass, Scoring::Accuracy, None),
    };
    let probe = audit.map(|a| {
        let ids: HashSet<String> = test_m.rows().iter().map(|r| r.session_id.clone()).collect();
        let name = format!(
            "{} {} rep={} target={}",
            key.suite,
            key.config,
            key.repetition,
            key.target.unwrap_or("-")
        );
        a.cell(name, ids)
    });
    let grid_config = GridSearchConfig {
        k: settings.k_folds,
        scoring,
        selection: settings.selection,
        seed: derive_seed(&[cell_seed, 2]),
    };
    settings
        .families
        .iter()
        .map(|&family| {
            let outcome = grid_search(
                &settings.grid(family),
                &train_m,
                &train_y,
                &grid_config,
                probe.as_ref().map(|p| p as &dyn FitProbe),
            )
            .and_then(|g| {
                let pred = g.model.predict(&test_m)?;
                Ok((g.best, evaluate(&test_y, &pred, mode, positive)?))
            });
            match outcome {
                Ok((best, m)) => CellResult {
                    params: Some(best.params_string()),
                    accuracy: Some(m.accuracy),
                    macro_f1: Some(m.macro_f1),
                    positive_f1: m.positive_f1,
                    ..key.result(family)
                },
                Err(e) => CellResult {
                    status: CellStatus::Failed(e.to_string()),
                    ..key.result(family)
                },
            }
        })
        .collect()
}

fn finish(suite: SuiteKind, cells: Vec<Vec<CellResult>>) -> Result<ExperimentReport> {
    let cells: Vec<CellResult> = cells.into_iter().flatten().collect();
    let summary = summarize(&cells)?;
    Ok(ExperimentReport {
        suite,
        cells,
        summary,
    })
}

/// One-vs-all suite: every EV with enough rows is a target, for every
/// balance value and repetition.
pub fn run_binary_suite(
    features: &FeatureMatrix,
    config: &BinarySuiteConfig,
    audit: Option<&LeakageAudit>,
) -> Result<ExperimentReport> {
    let settings = &config.settings;
    settings.validate()?;
    if config.values.is_empty() {
        return Err(Error::Config("at least one balance value is required".into()));
    }
    for &v in &config.values {
        BalanceConfig::new(config.mode, v).validate()?;
    }
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for r in features.rows() {
        if !r.ev_label.is_empty() {
            *counts.entry(r.ev_label.as_str()).or_default() += 1;
        }
    }
    let targets: Vec<&str> = counts
        .iter()
        .filter(|(_, &n)| n >= config.min_target_samples)
        .map(|(&ev, _)| ev)
        .collect();
    if targets.len() < 2 {
        return Err(Error::Suite(format!(
            "binary suite needs at least 2 EVs with >= {} rows, found {}",
            config.min_target_samples,
            targets.len()
        )));
    }
    let mut jobs = Vec::new();
    for &value in &config.values {
        for &target in &targets {
            for rep in 0..settings.repetitions {
                jobs.push((value, target, rep));
            }
        }
    }
    let cells = in_pool(settings.workers, || {
        jobs.par_iter()
            .map(|&(value, target, rep)| {
                let key = CellKey {
                    suite: SuiteKind::Binary,
                    config: format!("{}={value}", config.mode.as_str()),
                    repetition: rep,
                    target: Some(target),
                };
                let cell_seed = derive_seed(&[settings.seed, rep as u64, hash_str(target)]);
                let balance = BalanceConfig {
                    mode: config.mode,
                    value,
                    min_target_samples: config.min_target_samples,
                };
                match build_binary_dataset(features, target, &balance, cell_seed) {
                    Ok(d) => run_cell(&key, &d.matrix, &d.labels, settings, cell_seed, audit),
                    Err(e) => key.failed(settings, &e),
                }
            })
            .collect::<Vec<_>>()
    })?;
    finish(SuiteKind::Binary, cells)
}

/// Multi-class suite over one or more derived datasets, each rebuilt per
/// repetition from its own seed.
pub fn run_multiclass_suite(
    features: &FeatureMatrix,
    config: &MulticlassSuiteConfig,
    audit: Option<&LeakageAudit>,
) -> Result<ExperimentReport> {
    let settings = &config.settings;
    settings.validate()?;
    if config.datasets.is_empty() {
        return Err(Error::Config("at least one dataset is required".into()));
    }
    let jobs: Vec<(DatasetSpec, usize)> = config
        .datasets
        .iter()
        .flat_map(|&d| (0..settings.repetitions).map(move |rep| (d, rep)))
        .collect();
    let cells = in_pool(settings.workers, || {
        jobs.par_iter()
            .map(|&(dataset, rep)| {
                let key = CellKey {
                    suite: config.suite,
                    config: dataset.to_string(),
                    repetition: rep,
                    target: None,
                };
                let cell_seed = derive_seed(&[settings.seed, rep as u64, hash_str(&key.config)]);
                let sub_seed = derive_seed(&[cell_seed, 0]);
                let built = match dataset {
                    DatasetSpec::Size(s) => subsample_multiclass(features, s, sub_seed),
                    DatasetSpec::Shape(s) => subsample_distribution(features, &s, sub_seed),
                };
                match built {
                    Ok(m) => {
                        let labels = m.labels();
                        run_cell(&key, &m, &labels, settings, cell_seed, audit)
                    }
                    Err(e) => key.failed(settings, &e),
                }
            })
            .collect::<Vec<_>>()
    })?;
    finish(config.suite, cells)
}
