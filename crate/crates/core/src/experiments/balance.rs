use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::FeatureMatrix;
use crate::rng::rng_from;

pub const POSITIVE_LABEL: &str = "target";
pub const NEGATIVE_LABEL: &str = "other";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BalanceMode {
    /// Target rows divided by other rows.
    Q,
    /// Other rows divided by target rows.
    QPrime,
}

impl BalanceMode {
    pub fn as_str(self) -> &'static str {
        match self {
            BalanceMode::Q => "q",
            BalanceMode::QPrime => "q-prime",
        }
    }
}

impl std::str::FromStr for BalanceMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "q" => Ok(Self::Q),
            "q-prime" => Ok(Self::QPrime),
            other => Err(Error::Config(format!("unknown balance mode `{other}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BalanceConfig {
    pub mode: BalanceMode,
    pub value: f64,
    pub min_target_samples: usize,
}

impl BalanceConfig {
    pub fn new(mode: BalanceMode, value: f64) -> Self {
        Self {
            mode,
            value,
            min_target_samples: 50,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(1.0..=5.0).contains(&self.value) {
            return Err(Error::Config(format!(
                "balance value must be in [1, 5], got {}",
                self.value
            )));
        }
        Ok(())
    }

    /// Number of negative rows paired with `n_target` positives.
    pub fn negatives_for(&self, n_target: usize) -> usize {
        match self.mode {
            BalanceMode::QPrime => (self.value * n_target as f64).floor() as usize,
            BalanceMode::Q => (n_target as f64 / self.value).floor() as usize,
        }
    }
}

/// A one-vs-all dataset: the target EV's rows against sampled other rows.
#[derive(Clone, Debug)]
pub struct BinaryDataset {
    pub matrix: FeatureMatrix,
    /// `target` or `other` per row of `matrix`.
    pub labels: Vec<String>,
    pub n_positive: usize,
    pub n_negative: usize,
}

/// Every other EV's rows, EVs and rows shuffled by `seed`, interleaved
/// round-robin. A prefix of this order is the negative sample, so larger
/// ratios extend smaller ones.
pub fn negative_order(features: &FeatureMatrix, target: &str, seed: u64) -> Vec<usize> {
    let mut by_ev: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, r) in features.rows().iter().enumerate() {
        if r.ev_label != target && !r.ev_label.is_empty() {
            by_ev.entry(r.ev_label.as_str()).or_default().push(i);
        }
    }
    let mut rng = rng_from(seed);
    let mut evs: Vec<Vec<usize>> = by_ev.into_values().collect();
    for rows in &mut evs {
        rows.shuffle(&mut rng);
    }
    evs.shuffle(&mut rng);
    let longest = evs.iter().map(Vec::len).max().unwrap_or(0);
    let mut order = Vec::new();
    for round in 0..longest {
        for rows in &evs {
            if let Some(&r) = rows.get(round) {
                order.push(r);
            }
        }
    }
    order
}

pub fn build_binary_dataset(
    features: &FeatureMatrix,
    target: &str,
    balance: &BalanceConfig,
    seed: u64,
) -> Result<BinaryDataset> {
    balance.validate()?;
    let positives: Vec<usize> = features
        .rows()
        .iter()
        .enumerate()
        .filter(|(_, r)| r.ev_label == target)
        .map(|(i, _)| i)
        .collect();
    if positives.len() < balance.min_target_samples {
        return Err(Error::Balance(format!(
            "target `{target}` has {} rows, need at least {}",
            positives.len(),
            balance.min_target_samples
        )));
    }
    let need = balance.negatives_for(positives.len());
    let pool = negative_order(features, target, seed);
    if pool.len() < need {
        return Err(Error::Balance(format!(
            "target `{target}` needs {need} negative rows but only {} are available (short by {})",
            pool.len(),
            need - pool.len()
        )));
    }
    let mut rows: Vec<usize> = positives.iter().copied().chain(pool[..need].iter().copied()).collect();
    rows.sort_unstable();
    let matrix = features.subset(&rows);
    let labels = matrix
        .rows()
        .iter()
        .map(|r| {
            if r.ev_label == target {
                POSITIVE_LABEL
            } else {
                NEGATIVE_LABEL
            }
            .to_string()
        })
        .collect();
    Ok(BinaryDataset {
        matrix,
        labels,
        n_positive: positives.len(),
        n_negative: need,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::FeatureVector;

    fn corpus(spec: &[(&str, usize)]) -> FeatureMatrix {
        let mut rows = Vec::new();
        for (ev, n) in spec {
            for j in 0..*n {
                rows.push(FeatureVector {
                    session_id: format!("{ev}-{j}"),
                    ev_label: ev.to_string(),
                    values: vec![j as f64],
                });
            }
        }
        FeatureMatrix::new(vec!["f".into()], rows).unwrap()
    }

    #[test]
    fn q_prime_three() {
        let m = corpus(&[("T", 50), ("A", 100), ("B", 100)]);
        let d = build_binary_dataset(&m, "T", &BalanceConfig::new(BalanceMode::QPrime, 3.0), 1).unwrap();
        assert_eq!((d.n_positive, d.n_negative), (50, 150));
        assert_eq!(d.labels.iter().filter(|l| *l == POSITIVE_LABEL).count(), 50);
        let a = d.matrix.rows().iter().filter(|r| r.ev_label == "A").count();
        assert_eq!(a, 75);
    }

    #[test]
    fn legacy_q_five() {
        let m = corpus(&[("T", 50), ("A", 100)]);
        let d = build_binary_dataset(&m, "T", &BalanceConfig::new(BalanceMode::Q, 5.0), 1).unwrap();
        assert_eq!(d.n_negative, 10);
    }

    #[test]
    fn unit_ratios_coincide() {
        let m = corpus(&[("T", 50), ("A", 100)]);
        let a = build_binary_dataset(&m, "T", &BalanceConfig::new(BalanceMode::Q, 1.0), 1).unwrap();
        let b = build_binary_dataset(&m, "T", &BalanceConfig::new(BalanceMode::QPrime, 1.0), 1).unwrap();
        assert_eq!((a.n_positive, a.n_negative), (b.n_positive, b.n_negative));
        assert_eq!(a.n_negative, 50);
    }

    #[test]
    fn shortfall_is_reported() {
        let m = corpus(&[("T", 50), ("A", 20)]);
        let err = build_binary_dataset(&m, "T", &BalanceConfig::new(BalanceMode::QPrime, 2.0), 1).unwrap_err();
        assert!(err.to_string().contains("short by 80"), "{err}");
        let small = corpus(&[("T", 10), ("A", 20)]);
        assert!(build_binary_dataset(&small, "T", &BalanceConfig::new(BalanceMode::QPrime, 1.0), 1).is_err());
    }

    #[test]
    fn negatives_nest_across_ratios() {
        let m = corpus(&[("T", 50), ("A", 200), ("B", 30), ("C", 200)]);
        let ids = |v: f64| -> Vec<String> {
            build_binary_dataset(&m, "T", &BalanceConfig::new(BalanceMode::QPrime, v), 8)
                .unwrap()
                .matrix
                .rows()
                .iter()
                .map(|r| r.session_id.clone())
                .collect()
        };
        let one = ids(1.0);
        let three = ids(3.0);
        assert!(one.iter().all(|s| three.contains(s)));
    }
}
