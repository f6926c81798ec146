//! Loading charging-session corpora and the admission filters applied before
//! any signal processing.
//!
//! Two interchange formats are understood:
//!
//! * `acn-json`: newline-delimited JSON, one object per session with the keys
//!   `sessionID`, `userID`, `stationID`, `connectionTime`, `samplePeriodSec`,
//!   `pilotSignal` and `chargingCurrent`.
//! * `csv`: the same fields as columns, with both signals stored as
//!   `;`-joined decimal lists.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;
use std::str::FromStr;

use chrono::{DateTime, FixedOffset};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::series::TimeSeries;

/// Sample period assumed when a record does not carry one.
pub const DEFAULT_SAMPLE_PERIOD: f64 = 1.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Format {
    AcnJson,
    Csv,
}

impl FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "acn-json" => Ok(Format::AcnJson),
            "csv" => Ok(Format::Csv),
            other => Err(Error::Config(format!(
                "unknown session format `{other}` (expected acn-json or csv)"
            ))),
        }
    }
}

impl fmt::Display for Format {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Format::AcnJson => "acn-json",
            Format::Csv => "csv",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChargingSession {
    pub session_id: String,
    pub ev_label: Option<String>,
    pub station_id: String,
    pub connect_time: Option<DateTime<FixedOffset>>,
    pub pilot: TimeSeries,
    pub current: TimeSeries,
}

impl ChargingSession {
    /// Builds a session, enforcing the equal-length and non-negative current
    /// invariants. Mismatched signals are truncated to the shorter one.
    pub fn new(
        session_id: impl Into<String>,
        ev_label: Option<String>,
        station_id: impl Into<String>,
        connect_time: Option<DateTime<FixedOffset>>,
        mut pilot: TimeSeries,
        mut current: TimeSeries,
    ) -> Result<Self> {
        if pilot.sample_period() != current.sample_period() {
            return Err(Error::Param(
                "pilot and current must share a sample period".into(),
            ));
        }
        let n = pilot.len().min(current.len());
        pilot.truncate(n);
        current.truncate(n);
        current.clamp_negative();
        Ok(Self {
            session_id: session_id.into(),
            ev_label,
            station_id: station_id.into(),
            connect_time,
            pilot,
            current,
        })
    }

    pub fn len(&self) -> usize {
        self.current.len()
    }

    pub fn is_empty(&self) -> bool {
        self.current.is_empty()
    }

    /// The EV label, if present and non-blank.
    pub fn label(&self) -> Option<&str> {
        self.ev_label.as_deref().filter(|l| !l.trim().is_empty())
    }
}

/// Counters collected while parsing.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestStats {
    pub records: usize,
    pub dropped_missing: usize,
    pub truncated_mismatch: usize,
    pub clamped_samples: usize,
    pub unparsed_timestamps: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub source: String,
    pub stats: IngestStats,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Corpus {
    pub sessions: Vec<ChargingSession>,
    pub provenance: Provenance,
}

impl Corpus {
    /// Wraps sessions, rejecting duplicate ids.
    pub fn new(sessions: Vec<ChargingSession>, source: impl Into<String>) -> Result<Self> {
        check_unique(&sessions)?;
        Ok(Self {
            sessions,
            provenance: Provenance {
                source: source.into(),
                stats: IngestStats::default(),
            },
        })
    }

    pub fn len(&self) -> usize {
        self.sessions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sessions.is_empty()
    }

    /// Labeled session counts per EV, in label order.
    pub fn sessions_per_ev(&self) -> BTreeMap<String, usize> {
        let mut counts = BTreeMap::new();
        for s in &self.sessions {
            if let Some(l) = s.label() {
                *counts.entry(l.to_string()).or_insert(0) += 1;
            }
        }
        counts
    }
}

fn check_unique(sessions: &[ChargingSession]) -> Result<()> {
    let mut seen = HashSet::with_capacity(sessions.len());
    for s in sessions {
        if !seen.insert(s.session_id.as_str()) {
            return Err(Error::DuplicateSession(s.session_id.clone()));
        }
    }
    Ok(())
}

#[derive(Debug, Default, Deserialize, Serialize)]
struct RawRecord {
    #[serde(rename = "sessionID", default)]
    session_id: Option<String>,
    #[serde(rename = "userID", default)]
    user_id: Option<String>,
    #[serde(rename = "stationID", default)]
    station_id: Option<String>,
    #[serde(rename = "connectionTime", default)]
    connection_time: Option<String>,
    #[serde(rename = "samplePeriodSec", default)]
    sample_period: Option<f64>,
    #[serde(rename = "pilotSignal", default)]
    pilot: Option<Vec<f64>>,
    #[serde(rename = "chargingCurrent", default)]
    current: Option<Vec<f64>>,
}

fn parse_timestamp(raw: &str) -> Option<DateTime<FixedOffset>> {
    DateTime::parse_from_rfc3339(raw)
        .or_else(|_| DateTime::parse_from_rfc2822(raw))
        .ok()
}

/// Converts one raw record; `Ok(None)` means the record was dropped.
fn admit(raw: RawRecord, record: usize, stats: &mut IngestStats) -> Result<Option<ChargingSession>> {
    stats.records += 1;
    let (Some(session_id), Some(pilot), Some(current)) = (raw.session_id, raw.pilot, raw.current)
    else {
        stats.dropped_missing += 1;
        return Ok(None);
    };
    if session_id.is_empty() || pilot.is_empty() || current.is_empty() {
        stats.dropped_missing += 1;
        return Ok(None);
    }
    let period = raw.sample_period.unwrap_or(DEFAULT_SAMPLE_PERIOD);
    let bad = |e: Error| Error::Parse {
        record,
        message: e.to_string(),
    };
    if pilot.len() != current.len() {
        stats.truncated_mismatch += 1;
    }
    stats.clamped_samples += current.iter().filter(|v| **v < 0.0).count();
    let pilot = TimeSeries::new(pilot, period).map_err(bad)?;
    let current = TimeSeries::new(current, period).map_err(bad)?;
    let connect_time = match raw.connection_time.as_deref() {
        None | Some("") => None,
        Some(ts) => {
            let parsed = parse_timestamp(ts);
            if parsed.is_none() {
                stats.unparsed_timestamps += 1;
            }
            parsed
        }
    };
    let ev_label = raw.user_id.filter(|u| !u.is_empty());
    ChargingSession::new(
        session_id,
        ev_label,
        raw.station_id.unwrap_or_default(),
        connect_time,
        pilot,
        current,
    )
    .map(Some)
    .map_err(bad)
}

/// Parses a corpus from a reader.
pub fn parse_sessions<R: Read>(input: R, format: Format, source: &str) -> Result<Corpus> {
    let mut stats = IngestStats::default();
    let mut sessions = Vec::new();
    match format {
        Format::AcnJson => {
            for (i, line) in BufReader::new(input).lines().enumerate() {
                let line = line?;
                if line.trim().is_empty() {
                    continue;
                }
                let raw: RawRecord = serde_json::from_str(&line).map_err(|e| Error::Parse {
                    record: i + 1,
                    message: e.to_string(),
                })?;
                if let Some(s) = admit(raw, i + 1, &mut stats)? {
                    sessions.push(s);
                }
            }
        }
        Format::Csv => {
            let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
            for (i, row) in reader.records().enumerate() {
                let record = i + 1;
                let row = row.map_err(|e| Error::Parse {
                    record,
                    message: e.to_string(),
                })?;
                let raw = csv_record(&row, record)?;
                if let Some(s) = admit(raw, record, &mut stats)? {
                    sessions.push(s);
                }
            }
        }
    }
    let mut corpus = Corpus::new(sessions, source)?;
    corpus.provenance.stats = stats;
    Ok(corpus)
}

pub fn parse_file(path: &Path, format: Format) -> Result<Corpus> {
    let file = File::open(path)?;
    parse_sessions(file, format, &path.display().to_string())
}

const CSV_HEADER: [&str; 7] = [
    "sessionID",
    "userID",
    "stationID",
    "connectionTime",
    "samplePeriodSec",
    "pilotSignal",
    "chargingCurrent",
];

fn csv_record(row: &csv::StringRecord, record: usize) -> Result<RawRecord> {
    if row.len() != CSV_HEADER.len() {
        return Err(Error::Parse {
            record,
            message: format!("expected {} fields, found {}", CSV_HEADER.len(), row.len()),
        });
    }
    let text = |i: usize| Some(row[i].to_string()).filter(|s| !s.is_empty());
    let list = |i: usize| -> Result<Option<Vec<f64>>> {
        let field = row[i].trim();
        if field.is_empty() {
            return Ok(None);
        }
        field
            .split(';')
            .map(|v| {
                v.trim().parse::<f64>().map_err(|e| Error::Parse {
                    record,
                    message: format!("{}: `{v}`: {e}", CSV_HEADER[i]),
                })
            })
            .collect::<Result<Vec<_>>>()
            .map(Some)
    };
    let sample_period = match row[4].trim() {
        "" => None,
        v => Some(v.parse::<f64>().map_err(|e| Error::Parse {
            record,
            message: format!("samplePeriodSec: {e}"),
        })?),
    };
    Ok(RawRecord {
        session_id: text(0),
        user_id: text(1),
        station_id: text(2),
        connection_time: text(3),
        sample_period,
        pilot: list(5)?,
        current: list(6)?,
    })
}

fn to_raw(s: &ChargingSession) -> RawRecord {
    RawRecord {
        session_id: Some(s.session_id.clone()),
        user_id: s.ev_label.clone(),
        station_id: Some(s.station_id.clone()),
        connection_time: s.connect_time.map(|t| t.to_rfc3339()),
        sample_period: Some(s.current.sample_period()),
        pilot: Some(s.pilot.values().to_vec()),
        current: Some(s.current.values().to_vec()),
    }
}

fn join(values: &[f64]) -> String {
    values
        .iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join(";")
}

/// Writes sessions in either interchange format.
pub fn write_sessions<W: Write>(sessions: &[ChargingSession], out: W, format: Format) -> Result<()> {
    match format {
        Format::AcnJson => {
            let mut out = std::io::BufWriter::new(out);
            for s in sessions {
                serde_json::to_writer(&mut out, &to_raw(s))?;
                out.write_all(b"\n")?;
            }
            out.flush()?;
        }
        Format::Csv => {
            let mut w = csv::Writer::from_writer(out);
            w.write_record(CSV_HEADER)?;
            for s in sessions {
                w.write_record([
                    s.session_id.clone(),
                    s.ev_label.clone().unwrap_or_default(),
                    s.station_id.clone(),
                    s.connect_time.map(|t| t.to_rfc3339()).unwrap_or_default(),
                    s.current.sample_period().to_string(),
                    join(s.pilot.values()),
                    join(s.current.values()),
                ])?;
            }
            w.flush()?;
        }
    }
    Ok(())
}

/// Keeps sessions with at least `min_points` samples and a usable label,
/// then drops EVs left with fewer than `min_sessions` sessions.
pub fn apply_primary_filters(corpus: &Corpus, min_points: usize, min_sessions: usize) -> Corpus {
    let long_enough: Vec<&ChargingSession> = corpus
        .sessions
        .iter()
        .filter(|s| s.label().is_some() && s.pilot.len() >= min_points && s.current.len() >= min_points)
        .collect();
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for s in &long_enough {
        *counts.entry(s.label().unwrap_or_default()).or_insert(0) += 1;
    }
    let sessions = long_enough
        .into_iter()
        .filter(|s| counts[s.label().unwrap_or_default()] >= min_sessions)
        .cloned()
        .collect();
    Corpus {
        sessions,
        provenance: corpus.provenance.clone(),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub bin_width: usize,
    /// EV count per `[i * bin_width, (i + 1) * bin_width)` sessions-per-EV bin.
    pub bins: Vec<usize>,
    pub n_evs: usize,
    pub n_sessions: usize,
    pub n_unlabeled: usize,
    pub mean_sessions_per_ev: f64,
}

/// Histogram of EVs by number of sessions.
pub fn dataset_summary(corpus: &Corpus, bin_width: usize) -> Result<DatasetSummary> {
    if bin_width == 0 {
        return Err(Error::Config("bin width must be positive".into()));
    }
    let counts = corpus.sessions_per_ev();
    let n_labeled: usize = counts.values().sum();
    let max = counts.values().copied().max();
    let mut bins = match max {
        Some(m) => vec![0; m / bin_width + 1],
        None => Vec::new(),
    };
    for &c in counts.values() {
        bins[c / bin_width] += 1;
    }
    let n_evs = counts.len();
    Ok(DatasetSummary {
        bin_width,
        bins,
        n_evs,
        n_sessions: corpus.len(),
        n_unlabeled: corpus.len() - n_labeled,
        mean_sessions_per_ev: if n_evs == 0 {
            0.0
        } else {
            n_labeled as f64 / n_evs as f64
        },
    })
}
