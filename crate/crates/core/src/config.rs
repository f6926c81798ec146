//! Flat key-value run configuration.
//!
//! Files are TOML; nested tables and dotted keys are flattened, so
//! `[tail]\nt_max = 6` and `"tail.t_max" = 6` are the same setting.

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::signal::FilterParams;
use crate::tail::TailParams;

/// Every key a configuration file may set.
pub const KNOWN_KEYS: &[&str] = &[
    "seed",
    "workers",
    "ingest.format",
    "ingest.min_points",
    "ingest.min_sessions",
    "filter.kind",
    "filter.window",
    "filter.delta_window",
    "filter.low_pass_alpha",
    "tail.zero_eps",
    "tail.min_zero_run",
    "tail.max_spike_len",
    "tail.epsilon",
    "tail.t_max",
    "tail.min_len",
    "tail.max_len",
    "selection.nof",
    "selection.scorer",
    "experiment.reps",
    "experiment.k_folds",
    "experiment.test_fraction",
    "experiment.min_target_samples",
    "synth.separation",
    "synth.min_len",
    "synth.max_len",
    "synth.truncate_prob",
    "synth.noise_sigma",
];

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ConfigMap {
    values: BTreeMap<String, toml::Value>,
}

fn flatten(prefix: &str, table: &toml::Table, out: &mut BTreeMap<String, toml::Value>) {
    for (k, v) in table {
        let key = if prefix.is_empty() {
            k.clone()
        } else {
            format!("{prefix}.{k}")
        };
        match v {
            toml::Value::Table(t) => flatten(&key, t, out),
            other => {
                out.insert(key, other.clone());
            }
        }
    }
}

impl ConfigMap {
    pub fn parse(text: &str) -> Result<Self> {
        let table: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| Error::Config(format!("invalid config: {e}")))?;
        let mut values = BTreeMap::new();
        flatten("", &table, &mut values);
        if let Some(k) = values.keys().find(|k| !KNOWN_KEYS.contains(&k.as_str())) {
            return Err(Error::Config(format!("unknown config key `{k}`")));
        }
        Ok(Self { values })
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Resolved settings as `key = value` lines, sorted by key.
    pub fn entries(&self) -> BTreeMap<String, String> {
        self.values
            .iter()
            .map(|(k, v)| (k.clone(), v.to_string()))
            .collect()
    }

    pub fn set(&mut self, key: &str, value: toml::Value) {
        self.values.insert(key.to_string(), value);
    }

    pub fn get_f64(&self, key: &str) -> Result<Option<f64>> {
        match self.values.get(key) {
            None => Ok(None),
            Some(toml::Value::Float(f)) => Ok(Some(*f)),
            Some(toml::Value::Integer(i)) => Ok(Some(*i as f64)),
            Some(other) => Err(Error::Config(format!("`{key}` must be a number, got {other}"))),
        }
    }

    pub fn get_usize(&self, key: &str) -> Result<Option<usize>> {
        match self.values.get(key) {
            None => Ok(None),
            Some(toml::Value::Integer(i)) if *i >= 0 => Ok(Some(*i as usize)),
            Some(other) => Err(Error::Config(format!(
                "`{key}` must be a non-negative integer, got {other}"
            ))),
        }
    }

    pub fn get_u64(&self, key: &str) -> Result<Option<u64>> {
        Ok(self.get_usize(key)?.map(|v| v as u64))
    }

    pub fn get_str(&self, key: &str) -> Result<Option<&str>> {
        match self.values.get(key) {
            None => Ok(None),
            Some(toml::Value::String(s)) => Ok(Some(s)),
            Some(other) => Err(Error::Config(format!("`{key}` must be a string, got {other}"))),
        }
    }

    pub fn get_parsed<T: FromStr<Err = Error>>(&self, key: &str) -> Result<Option<T>> {
        self.get_str(key)?.map(str::parse).transpose()
    }

    pub fn filter_params(&self) -> Result<FilterParams> {
        let mut p = FilterParams::default();
        if let Some(k) = self.get_parsed("filter.kind")? {
            p.kind = k;
        }
        if let Some(v) = self.get_usize("filter.window")? {
            p.window = v;
        }
        if let Some(v) = self.get_usize("filter.delta_window")? {
            p.delta_window = v;
        }
        if let Some(v) = self.get_f64("filter.low_pass_alpha")? {
            p.low_pass_alpha = v;
        }
        p.validate()?;
        Ok(p)
    }

    pub fn tail_params(&self) -> Result<TailParams> {
        let mut p = TailParams::default();
        if let Some(v) = self.get_f64("tail.zero_eps")? {
            p.zero_eps = v;
        }
        if let Some(v) = self.get_usize("tail.min_zero_run")? {
            p.min_zero_run = v;
        }
        if let Some(v) = self.get_usize("tail.max_spike_len")? {
            p.max_spike_len = v;
        }
        if let Some(v) = self.get_f64("tail.epsilon")? {
            p.epsilon = v;
        }
        if let Some(v) = self.get_usize("tail.t_max")? {
            p.t_max = v;
        }
        if let Some(v) = self.get_usize("tail.min_len")? {
            p.min_len = v;
        }
        if let Some(v) = self.get_usize("tail.max_len")? {
            p.max_len = v;
        }
        p.validate()?;
        Ok(p)
    }
}
