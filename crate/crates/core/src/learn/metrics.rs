use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EvalMode {
    Binary,
    Multiclass,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub label: String,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub accuracy: f64,
    pub macro_f1: f64,
    /// F1 of the positive class; only set in binary mode.
    pub positive_f1: Option<f64>,
    pub per_class: Vec<ClassMetrics>,
    /// Labels indexing both axes of `confusion`, sorted.
    pub labels: Vec<String>,
    /// `confusion[true][predicted]`.
    pub confusion: Vec<Vec<usize>>,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Scores predictions against the truth. Labels are the sorted union of
/// both sequences, so an unseen label gets its own row and column.
pub fn evaluate(
    truth: &[String],
    predicted: &[String],
    mode: EvalMode,
    positive: Option<&str>,
) -> Result<MetricsReport> {
    if truth.is_empty() {
        return Err(Error::Prediction("cannot evaluate an empty test set".into()));
    }
    if truth.len() != predicted.len() {
        return Err(Error::Prediction(format!(
            "{} predictions for {} test rows",
            predicted.len(),
            truth.len()
        )));
    }
    let mut labels: Vec<String> = truth.iter().chain(predicted).cloned().collect();
    labels.sort();
    labels.dedup();
    let pos = |l: &String| labels.binary_search(l).expect("label in union");
    let k = labels.len();
    let mut confusion = vec![vec![0usize; k]; k];
    for (t, p) in truth.iter().zip(predicted) {
        confusion[pos(t)][pos(p)] += 1;
    }
    let total = truth.len();
    let trace: usize = (0..k).map(|i| confusion[i][i]).sum();
    let per_class: Vec<ClassMetrics> = (0..k)
        .map(|c| {
            let tp = confusion[c][c];
            let support: usize = confusion[c].iter().sum();
            let predicted_c: usize = confusion.iter().map(|r| r[c]).sum();
            let precision = ratio(tp, predicted_c);
            let recall = ratio(tp, support);
            let f1 = ratio(2 * tp, support + predicted_c);
            ClassMetrics {
                label: labels[c].clone(),
                precision,
                recall,
                f1,
                support,
            }
        })
        .collect();
    let macro_f1 = per_class.iter().map(|c| c.f1).sum::<f64>() / k as f64;
    let positive_f1 = match mode {
        EvalMode::Multiclass => None,
        EvalMode::Binary => {
            let p = positive.ok_or_else(|| {
                Error::Prediction("binary evaluation needs a positive label".into())
            })?;
            Some(per_class.iter().find(|c| c.label == p).map_or(0.0, |c| c.f1))
        }
    };
    Ok(MetricsReport {
        accuracy: ratio(trace, total),
        macro_f1,
        positive_f1,
        per_class,
        labels,
        confusion,
    })
}
