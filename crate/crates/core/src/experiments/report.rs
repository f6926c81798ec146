use std::fmt;
use std::collections::BTreeSet;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::learn::Family;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SuiteKind {
    Binary,
    Multiclass,
    FixedGrid,
    Distribution,
}

impl SuiteKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SuiteKind::Binary => "binary",
            SuiteKind::Multiclass => "multiclass",
            SuiteKind::FixedGrid => "grid",
            SuiteKind::Distribution => "distribution",
        }
    }
}

impl fmt::Display for SuiteKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for SuiteKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "binary" => Ok(Self::Binary),
            "multiclass" => Ok(Self::Multiclass),
            "grid" => Ok(Self::FixedGrid),
            "distribution" => Ok(Self::Distribution),
            other => Err(Error::Config(format!("unknown suite `{other}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", content = "error", rename_all = "kebab-case")]
pub enum CellStatus {
    Ok,
    Failed(String),
}

/// Outcome of one (configuration, repetition, target, classifier) cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub suite: SuiteKind,
    pub config: String,
    pub repetition: usize,
    pub target: Option<String>,
    pub classifier: Family,
    /// Best hyperparameters found by grid search.
    pub params: Option<String>,
    pub status: CellStatus,
    pub accuracy: Option<f64>,
    pub macro_f1: Option<f64>,
    pub positive_f1: Option<f64>,
}

impl CellResult {
    pub fn is_ok(&self) -> bool {
        self.status == CellStatus::Ok
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricStats {
    pub mean: f64,
    /// Population standard deviation over repetitions.
    pub std: f64,
}

/// Aggregates for one (suite, configuration, classifier) key.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub suite: SuiteKind,
    pub config: String,
    pub classifier: Family,
    /// Repetitions that contributed at least one successful cell.
    pub repetitions: usize,
    pub cells: usize,
    pub failed: usize,
    pub accuracy: Option<MetricStats>,
    pub macro_f1: Option<MetricStats>,
    pub positive_f1: Option<MetricStats>,
}

impl Aggregate {
    /// The metric reported for the suite: positive-class F1 for binary
    /// suites, accuracy otherwise.
    pub fn headline(&self) -> Option<MetricStats> {
        match self.suite {
            SuiteKind::Binary => self.positive_f1,
            _ => self.accuracy,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub suite: SuiteKind,
    pub cells: Vec<CellResult>,
    pub summary: Vec<Aggregate>,
}

fn stats(values: &[f64]) -> Option<MetricStats> {
    if values.is_empty() {
        return None;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    Some(MetricStats {
        mean,
        std: var.sqrt(),
    })
}

/// Mean over targets within each repetition, then mean and standard
/// deviation over repetitions. Failed cells are counted but not averaged.
pub fn aggregate_reports(runs: &[CellResult]) -> Result<Aggregate> {
    let first = runs
        .first()
        .ok_or_else(|| Error::Aggregation("no runs to aggregate".into()))?;
    if let Some(other) = runs.iter().find(|r| {
        (r.suite, &r.config, r.classifier) != (first.suite, &first.config, first.classifier)
    }) {
        return Err(Error::Aggregation(format!(
            "mixed configuration keys: `{} {} {}` and `{} {} {}`",
            first.suite, first.config, first.classifier, other.suite, other.config, other.classifier
        )));
    }
    let mut reps: Vec<usize> = runs.iter().filter(|r| r.is_ok()).map(|r| r.repetition).collect();
    reps.sort_unstable();
    reps.dedup();
    let per_rep = |get: fn(&CellResult) -> Option<f64>| -> Vec<f64> {
        reps.iter()
            .filter_map(|&rep| {
                let v: Vec<f64> = runs
                    .iter()
                    .filter(|r| r.repetition == rep && r.is_ok())
                    .filter_map(get)
                    .collect();
                (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
            })
            .collect()
    };
    Ok(Aggregate {
        suite: first.suite,
        config: first.config.clone(),
        classifier: first.classifier,
        repetitions: reps.len(),
        cells: runs.len(),
        failed: runs.iter().filter(|r| !r.is_ok()).count(),
        accuracy: stats(&per_rep(|r| r.accuracy)),
        macro_f1: stats(&per_rep(|r| r.macro_f1)),
        positive_f1: stats(&per_rep(|r| r.positive_f1)),
    })
}

/// Aggregates every key in order of first appearance.
pub fn summarize(cells: &[CellResult]) -> Result<Vec<Aggregate>> {
    let mut groups: Vec<Vec<CellResult>> = Vec::new();
    for c in cells {
        match groups.iter_mut().find(|g| {
            (g[0].suite, &g[0].config, g[0].classifier) == (c.suite, &c.config, c.classifier)
        }) {
            Some(g) => g.push(c.clone()),
            None => groups.push(vec![c.clone()]),
        }
    }
    groups.iter().map(|g| aggregate_reports(g)).collect()
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub const CELLS_HEADER: [&str; 11] = [
    "suite",
    "config",
    "repetition",
    "target",
    "classifier",
    "params",
    "status",
    "accuracy",
    "macro_f1",
    "positive_f1",
    "error",
];

pub fn write_cells_csv<W: Write>(cells: &[CellResult], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CELLS_HEADER)?;
    for c in cells {
        let (status, error) = match &c.status {
            CellStatus::Ok => ("ok", String::new()),
            CellStatus::Failed(e) => ("failed", e.clone()),
        };
        w.write_record([
            c.suite.as_str(),
            &c.config,
            &c.repetition.to_string(),
            c.target.as_deref().unwrap_or(""),
            c.classifier.as_str(),
            c.params.as_deref().unwrap_or(""),
            status,
            &opt(c.accuracy),
            &opt(c.macro_f1),
            &opt(c.positive_f1),
            &error,
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_summary_csv<W: Write>(summary: &[Aggregate], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "suite",
        "config",
        "classifier",
        "repetitions",
        "cells",
        "failed",
        "accuracy_mean",
        "accuracy_std",
        "macro_f1_mean",
        "macro_f1_std",
        "positive_f1_mean",
        "positive_f1_std",
    ])?;
    for a in summary {
        let m = |s: Option<MetricStats>| (opt(s.map(|s| s.mean)), opt(s.map(|s| s.std)));
        let (am, asd) = m(a.accuracy);
        let (fm, fsd) = m(a.macro_f1);
        let (pm, psd) = m(a.positive_f1);
        w.write_record([
            a.suite.as_str(),
            &a.config,
            a.classifier.as_str(),
            &a.repetitions.to_string(),
            &a.cells.to_string(),
            &a.failed.to_string(),
            &am,
            &asd,
            &fm,
            &fsd,
            &pm,
            &psd,
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_summary_md<W: Write>(summary: &[Aggregate], mut out: W) -> Result<()> {
    let mut suites: Vec<SuiteKind> = summary.iter().map(|a| a.suite).collect();
    suites.dedup();
    for suite in suites {
        let metric = match suite {
            SuiteKind::Binary => "positive-class F1",
            _ => "accuracy",
        };
        writeln!(out, "## {suite} suite\n")?;
        writeln!(out, "| config | classifier | {metric} (mean ± std) | macro-F1 | runs | failed |")?;
        writeln!(out, "|---|---|---|---|---|---|")?;
        for a in summary.iter().filter(|a| a.suite == suite) {
            let h = a
                .headline()
                .map_or("n/a".to_string(), |s| format!("{:.3} ± {:.3}", s.mean, s.std));
            let f = a.macro_f1.map_or("n/a".to_string(), |s| format!("{:.3}", s.mean));
            writeln!(
                out,
                "| {} | {} | {} | {} | {} | {} |",
                a.config, a.classifier, h, f, a.cells, a.failed
            )?;
        }
        writeln!(out)?;
    }
    Ok(())
}

fn parse_opt<T: std::str::FromStr>(field: &str, row: usize, name: &str) -> Result<Option<T>> {
    if field.is_empty() {
        return Ok(None);
    }
    field.parse().map(Some).map_err(|_| Error::Parse {
        record: row,
        message: format!("bad {name} `{field}`"),
    })
}

/// Reads a file written by [`write_cells_csv`].
pub fn read_cells_csv<R: Read>(input: R) -> Result<Vec<CellResult>> {
    let mut r = csv::Reader::from_reader(input);
    let header: Vec<String> = r.headers()?.iter().map(String::from).collect();
    if header != CELLS_HEADER {
        return Err(Error::Parse {
            record: 0,
            message: format!("unexpected cells header {header:?}"),
        });
    }
    let mut cells = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let row = i + 1;
        let bad = |what: &str, e: Error| Error::Parse {
            record: row,
            message: format!("{what}: {e}"),
        };
        let status = match &rec[6] {
            "ok" => CellStatus::Ok,
            "failed" => CellStatus::Failed(rec[10].to_string()),
            other => {
                return Err(Error::Parse {
                    record: row,
                    message: format!("unknown status `{other}`"),
                })
            }
        };
        let text = |s: &str| (!s.is_empty()).then(|| s.to_string());
        cells.push(CellResult {
            suite: rec[0].parse().map_err(|e| bad("suite", e))?,
            config: rec[1].to_string(),
            repetition: parse_opt(&rec[2], row, "repetition")?.unwrap_or(0),
            target: text(&rec[3]),
            classifier: rec[4].parse().map_err(|e| bad("classifier", e))?,
            params: text(&rec[5]),
            status,
            accuracy: parse_opt(&rec[7], row, "accuracy")?,
            macro_f1: parse_opt(&rec[8], row, "macro_f1")?,
            positive_f1: parse_opt(&rec[9], row, "positive_f1")?,
        });
    }
    Ok(cells)
}

/// Splits a `key=value;key=value` configuration string.
fn config_fields(config: &str) -> Vec<(&str, &str)> {
    config
        .split(';')
        .filter_map(|kv| kv.split_once('='))
        .collect()
}

fn field<'a>(config: &'a str, key: &str) -> &'a str {
    config_fields(config)
        .into_iter()
        .find(|(k, _)| *k == key)
        .map_or("", |(_, v)| v)
}

fn write_metric_table<W: Write>(
    summary: &[Aggregate],
    suite: SuiteKind,
    columns: &[&str],
    out: W,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let metric = if suite == SuiteKind::Binary {
        "positive_f1"
    } else {
        "accuracy"
    };
    let mut header = vec!["classifier".to_string()];
    header.extend(columns.iter().map(|c| c.to_string()));
    header.extend(["repetitions".into(), format!("{metric}_mean"), format!("{metric}_std")]);
    w.write_record(&header)?;
    for a in summary.iter().filter(|a| a.suite == suite) {
        let fields = config_fields(&a.config);
        let mut row = vec![a.classifier.as_str().to_string()];
        for c in columns {
            let v = fields.iter().find(|(k, _)| k == c).map_or("", |(_, v)| v);
            row.push(v.to_string());
        }
        let h = a.headline();
        row.extend([
            a.repetitions.to_string(),
            opt(h.map(|s| s.mean)),
            opt(h.map(|s| s.std)),
        ]);
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

fn write_balance_table<W: Write>(summary: &[Aggregate], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "classifier",
        "balance",
        "value",
        "repetitions",
        "positive_f1_mean",
        "positive_f1_std",
    ])?;
    for a in summary.iter().filter(|a| a.suite == SuiteKind::Binary) {
        let (mode, value) = config_fields(&a.config).first().copied().unwrap_or(("", ""));
        let h = a.headline();
        w.write_record([
            a.classifier.as_str(),
            mode,
            value,
            &a.repetitions.to_string(),
            &opt(h.map(|s| s.mean)),
            &opt(h.map(|s| s.std)),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Accuracy of the fixed-grid suite, one row per (classifier, EV count) and
/// one column per samples-per-EV value.
fn write_grid_table<W: Write>(summary: &[Aggregate], out: W) -> Result<()> {
    let grid: Vec<&Aggregate> = summary.iter().filter(|a| a.suite == SuiteKind::FixedGrid).collect();
    let num = |s: &str| s.parse::<usize>().unwrap_or(usize::MAX);
    let samples: BTreeSet<usize> = grid.iter().map(|a| num(field(&a.config, "samples"))).collect();
    let rows: BTreeSet<(Family, usize)> = grid
        .iter()
        .map(|a| (a.classifier, num(field(&a.config, "evs"))))
        .collect();
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["classifier".to_string(), "evs".to_string()];
    header.extend(samples.iter().map(|s| format!("samples={s}")));
    w.write_record(&header)?;
    for (family, evs) in rows {
        let mut row = vec![family.as_str().to_string(), evs.to_string()];
        for &s in &samples {
            let cell = grid.iter().find(|a| {
                a.classifier == family
                    && num(field(&a.config, "evs")) == evs
                    && num(field(&a.config, "samples")) == s
            });
            row.push(opt(cell.and_then(|a| a.accuracy).map(|m| m.mean)));
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Plot-ready tables derived from experiment cells, written into `dir`:
/// `f1_vs_qprime.csv`, `accuracy_vs_size.csv`, `accuracy_grid.csv`,
/// `accuracy_vs_distribution.csv` and `summary.md`. Returns the paths written.
pub fn write_figure_tables(cells: &[CellResult], dir: &Path) -> Result<Vec<PathBuf>> {
    if cells.is_empty() {
        return Err(Error::Aggregation("no experiment cells to report".into()));
    }
    let summary = summarize(cells)?;
    std::fs::create_dir_all(dir)?;
    let path = |name: &str| dir.join(name);
    let create = |name: &str| std::fs::File::create(path(name));
    write_balance_table(&summary, create("f1_vs_qprime.csv")?)?;
    write_metric_table(&summary, SuiteKind::Multiclass, &["size"], create("accuracy_vs_size.csv")?)?;
    write_grid_table(&summary, create("accuracy_grid.csv")?)?;
    write_metric_table(
        &summary,
        SuiteKind::Distribution,
        &["shape"],
        create("accuracy_vs_distribution.csv")?,
    )?;
    write_summary_md(&summary, create("summary.md")?)?;
    Ok([
        "f1_vs_qprime.csv",
        "accuracy_vs_size.csv",
        "accuracy_grid.csv",
        "accuracy_vs_distribution.csv",
        "summary.md",
    ]
    .iter()
    .map(|n| path(n))
    .collect())
}

/// Writes `cells.csv`, `summary.csv` and `summary.md` into `dir`.
pub fn write_report(report: &ExperimentReport, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    write_cells_csv(&report.cells, std::fs::File::create(dir.join("cells.csv"))?)?;
    write_summary_csv(&report.summary, std::fs::File::create(dir.join("summary.csv"))?)?;
    write_summary_md(&report.summary, std::fs::File::create(dir.join("summary.md"))?)?;
    Ok(())
}
