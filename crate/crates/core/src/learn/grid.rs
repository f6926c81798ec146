use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::knn::{Metric, Weights};
use super::metrics::{evaluate, EvalMode};
use super::model::{train_with_selection, ClassifierSpec, Family, TrainedModel};
use super::split::{fold_complement, stratified_kfold};
use super::tree::Criterion;
use super::{FitProbe, FitStage};
use crate::error::{Error, Result};
use crate::features::{fit_selection, FeatureMatrix, SelectionConfig, SelectionModel};
use crate::rng::derive_seed;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scoring {
    /// F1 of the given positive label.
    F1Positive(String),
    Accuracy,
}

impl Scoring {
    pub fn score(&self, truth: &[String], predicted: &[String]) -> Result<f64> {
        Ok(match self {
            Scoring::F1Positive(p) => evaluate(truth, predicted, EvalMode::Binary, Some(p))?
                .positive_f1
                .unwrap_or(0.0),
            Scoring::Accuracy => evaluate(truth, predicted, EvalMode::Multiclass, None)?.accuracy,
        })
    }
}

/// The full hyperparameter grid searched for one family.
pub fn table_ii_grid(family: Family) -> Vec<ClassifierSpec> {
    match family {
        Family::RandomForest => {
            let mut g = Vec::new();
            for n_estimators in [5, 10, 15, 20, 30, 50] {
                for max_depth in [None, Some(3), Some(5), Some(10), Some(15), Some(25)] {
                    g.push(ClassifierSpec::RandomForest {
                        n_estimators,
                        max_depth,
                    });
                }
            }
            g
        }
        Family::Knn => {
            let mut g = Vec::new();
            for n_neighbors in [3, 5, 7, 9, 11, 13, 15] {
                for metric in [Metric::Euclidean, Metric::Manhattan, Metric::Cosine] {
                    for weights in [Weights::Uniform, Weights::Distance] {
                        g.push(ClassifierSpec::Knn {
                            n_neighbors,
                            metric,
                            weights,
                        });
                    }
                }
            }
            g
        }
        Family::DecisionTree => {
            let mut g = Vec::new();
            for criterion in [Criterion::Gini, Criterion::Entropy] {
                for max_depth in [None, Some(6), Some(10), Some(18)] {
                    g.push(ClassifierSpec::DecisionTree {
                        criterion,
                        max_depth,
                    });
                }
            }
            g
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CvRow {
    pub family: Family,
    pub params: String,
    pub fold: usize,
    pub score: f64,
}

#[derive(Clone, Debug)]
pub struct GridSearchOutcome {
    pub best: ClassifierSpec,
    pub best_score: f64,
    /// Mean CV score per grid entry, in grid order.
    pub mean_scores: Vec<f64>,
    pub model: TrainedModel,
    pub table: Vec<CvRow>,
}

#[derive(Clone, Debug)]
pub struct GridSearchConfig {
    pub k: usize,
    pub scoring: Scoring,
    pub selection: SelectionConfig,
    pub seed: u64,
}

pub fn write_cv_table<W: Write>(rows: &[CvRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["family", "params", "fold", "score"])?;
    for r in rows {
        w.write_record([
            r.family.as_str(),
            &r.params,
            &r.fold.to_string(),
            &r.score.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

struct Fold {
    train: Vec<usize>,
    val: Vec<usize>,
    selection: Result<SelectionModel>,
}

fn cv_score(
    spec: &ClassifierSpec,
    fold: &Fold,
    matrix: &FeatureMatrix,
    labels: &[String],
    scoring: &Scoring,
    seed: u64,
) -> Result<f64> {
    let sel = match &fold.selection {
        Ok(s) => s.clone(),
        Err(e) => return Err(Error::Training(format!("fold selection failed: {e}"))),
    };
    let train_m = matrix.subset(&fold.train);
    let train_y: Vec<String> = fold.train.iter().map(|&i| labels[i].clone()).collect();
    let model = train_with_selection(spec, sel, &train_m, &train_y, seed)?;
    let pred = model.predict(&matrix.subset(&fold.val))?;
    let truth: Vec<String> = fold.val.iter().map(|&i| labels[i].clone()).collect();
    scoring.score(&truth, &pred)
}

/// Exhaustive stratified k-fold search over `grid`, followed by a refit of
/// the best entry on all rows. Feature selection is refitted inside every
/// fold on that fold's training rows only.
pub fn grid_search(
    grid: &[ClassifierSpec],
    matrix: &FeatureMatrix,
    labels: &[String],
    config: &GridSearchConfig,
    probe: Option<&dyn FitProbe>,
) -> Result<GridSearchOutcome> {
    if grid.is_empty() {
        return Err(Error::Config("grid search needs a non-empty grid".into()));
    }
    if labels.len() != matrix.n_rows() {
        return Err(Error::Training(format!(
            "{} labels for {} rows",
            labels.len(),
            matrix.n_rows()
        )));
    }
    let folds = stratified_kfold(labels, config.k, derive_seed(&[config.seed, 0xF01D]))?;
    let ids = |idx: &[usize]| -> Vec<String> {
        idx.iter()
            .map(|&i| matrix.rows()[i].session_id.clone())
            .collect()
    };
    let folds: Vec<Fold> = (0..folds.len())
        .into_par_iter()
        .map(|i| {
            let train = fold_complement(&folds, i);
            let val = folds[i].clone();
            let train_y: Vec<String> = train.iter().map(|&r| labels[r].clone()).collect();
            let selection = fit_selection(&matrix.subset(&train), &train_y, &config.selection);
            Fold {
                train,
                val,
                selection,
            }
        })
        .collect();
    if let Some(p) = probe {
        for f in &folds {
            let tr = ids(&f.train);
            p.record(FitStage::CvTrain, &tr);
            p.record(FitStage::CvValidation, &ids(&f.val));
            p.record(FitStage::Scaler, &tr);
            p.record(FitStage::Selection, &tr);
        }
    }

    let per_combo: Vec<Vec<f64>> = grid
        .par_iter()
        .map(|spec| {
            let mut scores = Vec::with_capacity(folds.len());
            for (i, f) in folds.iter().enumerate() {
                let seed = derive_seed(&[config.seed, i as u64]);
                match cv_score(spec, f, matrix, labels, &config.scoring, seed) {
                    Ok(s) => scores.push(s),
                    Err(e) => {
                        log::debug!("grid entry {spec} failed: {e}");
                        return vec![f64::NEG_INFINITY; folds.len()];
                    }
                }
            }
            scores
        })
        .collect();

    let mean_scores: Vec<f64> = per_combo
        .iter()
        .map(|s| s.iter().sum::<f64>() / s.len() as f64)
        .collect();
    let mut best = 0;
    for (i, &m) in mean_scores.iter().enumerate() {
        if m > mean_scores[best] {
            best = i;
        }
    }
    let mut table = Vec::with_capacity(grid.len() * folds.len());
    for (spec, scores) in grid.iter().zip(&per_combo) {
        for (fold, &score) in scores.iter().enumerate() {
            table.push(CvRow {
                family: spec.family(),
                params: spec.params_string(),
                fold,
                score,
            });
        }
    }
    let model = super::model::train(
        &grid[best],
        matrix,
        labels,
        &config.selection,
        config.seed,
        probe,
    )?;
    Ok(GridSearchOutcome {
        best: grid[best],
        best_score: mean_scores[best],
        mean_scores,
        model,
        table,
    })
}
