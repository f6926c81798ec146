//! Locating the constant-voltage tail of a charging session.
//!
//! A session's filtered current is scanned backwards: first for the steady
//! zero region at the end (`t_s`), then from `t_s` towards the start while the
//! current keeps rising (read backwards). The walk ends once `t_max`
//! consecutive steps fail to rise by more than `epsilon` above the level of
//! the last accepted sample. Everything before the tail is the
//! constant-current phase from which the delta series is built.

use std::fmt;
use std::io::{BufRead, BufReader, Read, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{ChargingSession, Corpus};
use crate::series::TimeSeries;
use crate::signal::{delta_series, moving_median, FilterParams};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TailParams {
    /// Samples at or below this level count as zero.
    pub zero_eps: f64,
    pub min_zero_run: usize,
    /// Non-zero runs shorter than this between zero runs are treated as spikes.
    pub max_spike_len: usize,
    pub epsilon: f64,
    pub t_max: usize,
    pub min_len: usize,
    pub max_len: usize,
}

impl Default for TailParams {
    fn default() -> Self {
        Self {
            zero_eps: 0.5,
            min_zero_run: 5,
            max_spike_len: 3,
            epsilon: 0.2,
            t_max: 4,
            min_len: 20,
            max_len: 2000,
        }
    }
}

impl TailParams {
    pub fn validate(&self) -> Result<()> {
        if self.zero_eps.is_nan() || self.zero_eps < 0.0 {
            return Err(Error::Param("tail.zero_eps must be >= 0".into()));
        }
        if self.epsilon.is_nan() || self.epsilon <= 0.0 {
            return Err(Error::Param("tail.epsilon must be > 0".into()));
        }
        if self.t_max < 1 {
            return Err(Error::Param("tail.t_max must be >= 1".into()));
        }
        if !(0 < self.min_len && self.min_len < self.max_len) {
            return Err(Error::Param("tail lengths need 0 < min_len < max_len".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RejectionCode {
    NoZeroAnchor,
    TailTooShort,
    TailTooLong,
    DeltaTooShort,
    DeltaTooLong,
    ZeroValuedSegment,
    EmptyCc,
}

impl RejectionCode {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::NoZeroAnchor => "no-zero-anchor",
            Self::TailTooShort => "tail-too-short",
            Self::TailTooLong => "tail-too-long",
            Self::DeltaTooShort => "delta-too-short",
            Self::DeltaTooLong => "delta-too-long",
            Self::ZeroValuedSegment => "zero-valued-segment",
            Self::EmptyCc => "empty-cc",
        }
    }
}

impl fmt::Display for RejectionCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RejectionReason {
    pub code: RejectionCode,
    pub detail: String,
}

impl RejectionReason {
    fn new(code: RejectionCode, detail: impl Into<String>) -> Self {
        Self {
            code,
            detail: detail.into(),
        }
    }
}

impl fmt::Display for RejectionReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.code, self.detail)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SegmentPair {
    pub session_id: String,
    pub ev_label: Option<String>,
    pub tail: TimeSeries,
    pub delta: TimeSeries,
    pub t_start: usize,
    pub t_s: usize,
}

/// Finds the start of the terminal zero region.
///
/// Zero runs separated by short non-zero spikes are merged, so an isolated
/// blip inside the idle period after charging does not hide the real end of
/// the tail.
pub fn find_zero_anchor(
    series: &TimeSeries,
    params: &TailParams,
) -> std::result::Result<usize, RejectionReason> {
    let x = series.values();
    let is_zero = |v: f64| v <= params.zero_eps;
    let mut i = x.len();
    let mut zeros = 0;
    let mut anchor = None;
    loop {
        let end = i;
        while i > 0 && is_zero(x[i - 1]) {
            i -= 1;
        }
        if end > i {
            zeros += end - i;
            anchor = Some(i);
        }
        if i == 0 {
            break;
        }
        let mut j = i;
        while j > 0 && !is_zero(x[j - 1]) {
            j -= 1;
        }
        // a spike only merges when zeros lie on both sides of it
        if i - j < params.max_spike_len && j > 0 {
            i = j;
            continue;
        }
        break;
    }
    match anchor {
        Some(_) if zeros < params.min_zero_run => Err(RejectionReason::new(
            RejectionCode::NoZeroAnchor,
            format!("terminal zero region has {zeros} samples, need {}", params.min_zero_run),
        )),
        Some(0) => Err(RejectionReason::new(
            RejectionCode::NoZeroAnchor,
            "series is zero throughout",
        )),
        Some(t_s) => Ok(t_s),
        None => Err(RejectionReason::new(
            RejectionCode::NoZeroAnchor,
            "series does not end in a zero region",
        )),
    }
}

/// Walks backwards from `t_s` and returns `(t_start, tail)` with
/// `tail = series[t_start..t_s]`.
///
/// A backward step is accepted when the earlier sample exceeds the reference
/// level (the last accepted sample) by more than `epsilon`; it then becomes
/// the new reference. The walk stops after `t_max` consecutive rejected steps,
/// and the tail starts one past the last accepted sample. Reaching the start
/// of the series with no pending rejections yields `t_start = 0`.
pub fn extract_tail(
    series: &TimeSeries,
    t_s: usize,
    params: &TailParams,
) -> std::result::Result<(usize, TimeSeries), RejectionReason> {
    let y = series.values();
    if t_s == 0 || t_s > y.len() {
        return Err(RejectionReason::new(
            RejectionCode::TailTooShort,
            format!("no samples before zero anchor {t_s}"),
        ));
    }
    let mut reference = y[t_s - 1];
    let mut last_accepted = t_s - 1;
    let mut pending = 0;
    let mut t = t_s - 1;
    while t > 0 {
        let prev = y[t - 1];
        if prev - reference > params.epsilon {
            reference = prev;
            last_accepted = t - 1;
            pending = 0;
        } else {
            pending += 1;
            if pending >= params.t_max {
                break;
            }
        }
        t -= 1;
    }
    let t_start = if pending == 0 { last_accepted } else { last_accepted + 1 };
    if t_start >= t_s {
        return Err(RejectionReason::new(
            RejectionCode::TailTooShort,
            "no decaying samples before the zero anchor",
        ));
    }
    let tail = series
        .slice(t_start, t_s)
        .map_err(|e| RejectionReason::new(RejectionCode::TailTooShort, e.to_string()))?;
    Ok((t_start, tail))
}

fn max_abs(s: &TimeSeries) -> f64 {
    s.values().iter().fold(0.0_f64, |m, v| m.max(v.abs()))
}

/// Length and content checks on an extracted pair.
pub fn validate_segments(
    tail: &TimeSeries,
    delta: &TimeSeries,
    params: &TailParams,
) -> std::result::Result<(), RejectionReason> {
    use RejectionCode::*;
    let bounds = |len: usize, short: RejectionCode, long: RejectionCode, what: &str| {
        if len < params.min_len {
            Err(RejectionReason::new(short, format!("{what} has {len} samples, min {}", params.min_len)))
        } else if len > params.max_len {
            Err(RejectionReason::new(long, format!("{what} has {len} samples, max {}", params.max_len)))
        } else {
            Ok(())
        }
    };
    bounds(tail.len(), TailTooShort, TailTooLong, "tail")?;
    bounds(delta.len(), DeltaTooShort, DeltaTooLong, "delta")?;
    if max_abs(tail) <= params.zero_eps {
        return Err(RejectionReason::new(ZeroValuedSegment, "tail is zero-valued"));
    }
    if max_abs(delta) <= params.zero_eps {
        return Err(RejectionReason::new(ZeroValuedSegment, "delta is zero-valued"));
    }
    Ok(())
}

/// The series the tail walk runs on: runs shorter than `max_spike_len` are
/// removed by a median of width `2 * max_spike_len - 1` before filtering, so
/// that smoothing cannot spread them into bumps the walk would stop at.
fn despiked(
    session: &ChargingSession,
    filter: &FilterParams,
    params: &TailParams,
) -> std::result::Result<TimeSeries, RejectionReason> {
    let width = (2 * params.max_spike_len).saturating_sub(1);
    let raw = if width >= 3 {
        moving_median(&session.current, width)
            .map_err(|e| RejectionReason::new(RejectionCode::NoZeroAnchor, e.to_string()))?
    } else {
        session.current.clone()
    };
    filter
        .apply(&raw)
        .map_err(|e| RejectionReason::new(RejectionCode::NoZeroAnchor, e.to_string()))
}

/// Runs filtering, anchor search, tail extraction, delta construction and
/// validation for one session.
pub fn segment_session(
    session: &ChargingSession,
    filter: &FilterParams,
    params: &TailParams,
) -> std::result::Result<SegmentPair, RejectionReason> {
    let filtered = filter
        .apply(&session.current)
        .map_err(|e| RejectionReason::new(RejectionCode::NoZeroAnchor, e.to_string()))?;
    let t_s = find_zero_anchor(&filtered, params)?;
    let walked = despiked(session, filter, params)?;
    let (t_start, _) = extract_tail(&walked, t_s, params)?;
    let tail = filtered
        .slice(t_start, t_s)
        .map_err(|e| RejectionReason::new(RejectionCode::TailTooShort, e.to_string()))?;
    if t_start == 0 {
        return Err(RejectionReason::new(
            RejectionCode::EmptyCc,
            "tail reaches the start of the session",
        ));
    }
    let delta = match delta_series(&session.pilot, &session.current, filter.delta_window, t_start) {
        Ok(d) => d,
        Err(Error::EmptyCc(_)) => {
            return Err(RejectionReason::new(RejectionCode::EmptyCc, "empty constant-current phase"))
        }
        Err(e) => return Err(RejectionReason::new(RejectionCode::EmptyCc, e.to_string())),
    };
    validate_segments(&tail, &delta, params)?;
    Ok(SegmentPair {
        session_id: session.session_id.clone(),
        ev_label: session.ev_label.clone(),
        tail,
        delta,
        t_start,
        t_s,
    })
}

/// Outcome of segmenting a whole corpus, in corpus order.
#[derive(Clone, Debug, Default)]
pub struct Segmentation {
    pub segments: Vec<SegmentPair>,
    pub rejects: Vec<(String, RejectionReason)>,
}

pub fn segment_corpus(corpus: &Corpus, filter: &FilterParams, params: &TailParams) -> Segmentation {
    let results: Vec<_> = corpus
        .sessions
        .par_iter()
        .map(|s| (s.session_id.clone(), segment_session(s, filter, params)))
        .collect();
    let mut out = Segmentation::default();
    for (id, r) in results {
        match r {
            Ok(seg) => out.segments.push(seg),
            Err(reason) => out.rejects.push((id, reason)),
        }
    }
    out
}

/// Writes segments as newline-delimited JSON, one pair per line.
pub fn write_segments<W: Write>(segments: &[SegmentPair], mut out: W) -> Result<()> {
    for seg in segments {
        serde_json::to_writer(&mut out, seg)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_segments<R: Read>(input: R) -> Result<Vec<SegmentPair>> {
    let mut segments = Vec::new();
    for (i, line) in BufReader::new(input).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let seg = serde_json::from_str(&line)
            .map_err(|e| Error::Parse {
                record: i + 1,
                message: e.to_string(),
            })?;
        segments.push(seg);
    }
    Ok(segments)
}

/// Rejected sessions as CSV: `session_id,code,detail`.
pub fn write_rejects<W: Write>(rejects: &[(String, RejectionReason)], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["session_id", "code", "detail"])?;
    for (id, reason) in rejects {
        w.write_record([id.as_str(), reason.code.as_str(), reason.detail.as_str()])?;
    }
    w.flush()?;
    Ok(())
}
