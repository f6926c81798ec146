//! Smoothing filters for current signals and the CC-phase delta series.
//!
//! All window filters use centred windows of odd size `N` that are truncated
//! at the series edges, so the output always has the input's length and each
//! point is computed from the samples that actually exist.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::series::TimeSeries;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FilterKind {
    MovingAverage,
    MovingMedian,
    LowPass,
}

impl std::str::FromStr for FilterKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "moving-average" => Ok(Self::MovingAverage),
            "moving-median" => Ok(Self::MovingMedian),
            "low-pass" => Ok(Self::LowPass),
            other => Err(Error::Config(format!("unknown filter kind `{other}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FilterParams {
    pub kind: FilterKind,
    /// Window for smoothing the current before tail detection.
    pub window: usize,
    /// Window of the median applied to the current when building the delta series.
    pub delta_window: usize,
    pub low_pass_alpha: f64,
}

impl Default for FilterParams {
    fn default() -> Self {
        Self {
            kind: FilterKind::MovingAverage,
            window: 5,
            delta_window: 7,
            low_pass_alpha: 0.3,
        }
    }
}

impl FilterParams {
    pub fn validate(&self) -> Result<()> {
        check_window(self.window)?;
        check_window(self.delta_window)?;
        check_alpha(self.low_pass_alpha)
    }

    /// Smooths `series` with the configured filter.
    pub fn apply(&self, series: &TimeSeries) -> Result<TimeSeries> {
        match self.kind {
            FilterKind::MovingAverage => moving_average(series, self.window),
            FilterKind::MovingMedian => moving_median(series, self.window),
            FilterKind::LowPass => low_pass(series, self.low_pass_alpha),
        }
    }
}

fn check_window(n: usize) -> Result<()> {
    if n < 3 || n.is_multiple_of(2) {
        return Err(Error::Param(format!("window must be odd and >= 3, got {n}")));
    }
    Ok(())
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::Param(format!("low-pass alpha must be in (0, 1], got {alpha}")));
    }
    Ok(())
}

/// Inclusive window bounds around `t`, truncated to `[0, len)`.
#[inline]
fn window_bounds(t: usize, half: usize, len: usize) -> (usize, usize) {
    (t.saturating_sub(half), (t + half).min(len - 1))
}

pub fn moving_average(series: &TimeSeries, n: usize) -> Result<TimeSeries> {
    check_window(n)?;
    let x = series.values();
    let half = n / 2;
    let mut prefix = Vec::with_capacity(x.len() + 1);
    prefix.push(0.0);
    let mut acc = 0.0;
    for v in x {
        acc += v;
        prefix.push(acc);
    }
    let out = (0..x.len())
        .map(|t| {
            let (lo, hi) = window_bounds(t, half, x.len());
            (prefix[hi + 1] - prefix[lo]) / (hi + 1 - lo) as f64
        })
        .collect();
    Ok(series.with_values(out))
}

fn median_of_sorted(w: &[f64]) -> f64 {
    let m = w.len() / 2;
    if w.len() % 2 == 1 {
        w[m]
    } else {
        0.5 * (w[m - 1] + w[m])
    }
}

fn median_filter(x: &[f64], n: usize) -> Vec<f64> {
    let half = n / 2;
    let len = x.len();
    let mut window: Vec<f64> = Vec::with_capacity(n);
    let insert = |w: &mut Vec<f64>, v: f64| {
        let pos = w.partition_point(|a| a.total_cmp(&v).is_lt());
        w.insert(pos, v);
    };
    for &v in &x[..=half.min(len - 1)] {
        insert(&mut window, v);
    }
    let mut out = Vec::with_capacity(len);
    for t in 0..len {
        if t > 0 {
            if t + half < len {
                insert(&mut window, x[t + half]);
            }
            if t > half {
                let old = x[t - half - 1];
                let pos = window.partition_point(|a| a.total_cmp(&old).is_lt());
                window.remove(pos);
            }
        }
        out.push(median_of_sorted(&window));
    }
    out
}

/// Moving median; even-sized edge windows take the mean of the central pair.
pub fn moving_median(series: &TimeSeries, n: usize) -> Result<TimeSeries> {
    check_window(n)?;
    Ok(series.with_values(median_filter(series.values(), n)))
}

/// First-order exponential smoothing.
pub fn low_pass(series: &TimeSeries, alpha: f64) -> Result<TimeSeries> {
    check_alpha(alpha)?;
    let x = series.values();
    if alpha == 1.0 {
        return Ok(series.clone());
    }
    let mut out = Vec::with_capacity(x.len());
    let mut y = x[0];
    out.push(y);
    // incremental form keeps constant inputs exact
    for &v in &x[1..] {
        y += alpha * (v - y);
        out.push(y);
    }
    Ok(series.with_values(out))
}

/// Pilot minus median-filtered current over the constant-current phase
/// `[0, cc_end)`. The median windows are truncated to that phase.
pub fn delta_series(
    pilot: &TimeSeries,
    current: &TimeSeries,
    n: usize,
    cc_end: usize,
) -> Result<TimeSeries> {
    check_window(n)?;
    if pilot.len() != current.len() {
        return Err(Error::Param(format!(
            "pilot ({}) and current ({}) lengths differ",
            pilot.len(),
            current.len()
        )));
    }
    if cc_end == 0 {
        return Err(Error::EmptyCc("<delta>".into()));
    }
    if cc_end > current.len() {
        return Err(Error::Param(format!(
            "cc_end {cc_end} beyond series length {}",
            current.len()
        )));
    }
    let med = median_filter(&current.values()[..cc_end], n);
    let out = pilot.values()[..cc_end]
        .iter()
        .zip(med)
        .map(|(p, m)| p - m)
        .collect();
    Ok(current.with_values(out))
}
