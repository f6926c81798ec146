use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// An evenly sampled real-valued signal.
///
/// Values are always finite and non-empty. The sample period is carried for
/// provenance; the pipeline itself works in sample indices.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    values: Vec<f64>,
    sample_period: f64,
}

impl TimeSeries {
    pub fn new(values: Vec<f64>, sample_period: f64) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Param("time series must have at least one sample".into()));
        }
        if !(sample_period.is_finite() && sample_period > 0.0) {
            return Err(Error::Param(format!(
                "sample period must be positive, got {sample_period}"
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Param(format!("non-finite sample at index {i}")));
        }
        Ok(Self {
            values,
            sample_period,
        })
    }

    /// Unit sample period; convenient for tests and derived series.
    pub fn from_values(values: Vec<f64>) -> Result<Self> {
        Self::new(values, 1.0)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn sample_period(&self) -> f64 {
        self.sample_period
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    /// Always false; kept for API symmetry with slices.
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Copies `[start, end)` into a new series with the same period.
    pub fn slice(&self, start: usize, end: usize) -> Result<Self> {
        if start >= end || end > self.values.len() {
            return Err(Error::Param(format!(
                "invalid slice [{start}, {end}) of series with {} samples",
                self.values.len()
            )));
        }
        Ok(Self {
            values: self.values[start..end].to_vec(),
            sample_period: self.sample_period,
        })
    }

    pub(crate) fn with_values(&self, values: Vec<f64>) -> Self {
        debug_assert!(!values.is_empty());
        Self {
            values,
            sample_period: self.sample_period,
        }
    }

    pub(crate) fn truncate(&mut self, len: usize) {
        self.values.truncate(len.max(1));
    }

    pub(crate) fn clamp_negative(&mut self) -> usize {
        let mut n = 0;
        for v in &mut self.values {
            if *v < 0.0 {
                *v = 0.0;
                n += 1;
            }
        }
        n
    }
}
