use std::fmt;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::dense::{encode_labels, Dense};
use super::forest::RandomForest;
use super::knn::{KnnModel, Metric, Weights};
use super::tree::{Criterion, DecisionTree, MaxFeatures, TreeParams};
use super::{FitProbe, FitStage};
use crate::error::{Error, Result};
use crate::features::{fit_selection, FeatureMatrix, SelectionConfig, SelectionModel};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    Knn,
    DecisionTree,
    RandomForest,
}

impl Family {
    pub fn as_str(self) -> &'static str {
        match self {
            Family::Knn => "knn",
            Family::DecisionTree => "decision-tree",
            Family::RandomForest => "random-forest",
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "knn" => Ok(Family::Knn),
            "dt" | "decision-tree" => Ok(Family::DecisionTree),
            "rf" | "random-forest" => Ok(Family::RandomForest),
            other => Err(Error::Config(format!("unknown classifier family `{other}`"))),
        }
    }
}

/// A classifier family with one concrete hyperparameter assignment.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum ClassifierSpec {
    Knn {
        n_neighbors: usize,
        metric: Metric,
        weights: Weights,
    },
    DecisionTree {
        criterion: Criterion,
        max_depth: Option<usize>,
    },
    RandomForest {
        n_estimators: usize,
        max_depth: Option<usize>,
    },
}

fn depth_str(d: Option<usize>) -> String {
    d.map_or_else(|| "none".to_string(), |v| v.to_string())
}

impl ClassifierSpec {
    pub fn family(&self) -> Family {
        match self {
            ClassifierSpec::Knn { .. } => Family::Knn,
            ClassifierSpec::DecisionTree { .. } => Family::DecisionTree,
            ClassifierSpec::RandomForest { .. } => Family::RandomForest,
        }
    }

    /// Hyperparameters as `name=value` pairs joined by `;`.
    pub fn params_string(&self) -> String {
        match *self {
            ClassifierSpec::Knn {
                n_neighbors,
                metric,
                weights,
            } => {
                let metric = match metric {
                    Metric::Euclidean => "euclidean",
                    Metric::Manhattan => "manhattan",
                    Metric::Cosine => "cosine",
                };
                let weights = match weights {
                    Weights::Uniform => "uniform",
                    Weights::Distance => "distance",
                };
                format!("n_neighbors={n_neighbors};metric={metric};weights={weights}")
            }
            ClassifierSpec::DecisionTree {
                criterion,
                max_depth,
            } => {
                let c = match criterion {
                    Criterion::Gini => "gini",
                    Criterion::Entropy => "entropy",
                };
                format!("criterion={c};max_depth={}", depth_str(max_depth))
            }
            ClassifierSpec::RandomForest {
                n_estimators,
                max_depth,
            } => format!("n_estimators={n_estimators};max_depth={}", depth_str(max_depth)),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = match *self {
            ClassifierSpec::Knn { n_neighbors, .. } => (n_neighbors == 0).then_some("n_neighbors"),
            ClassifierSpec::DecisionTree { max_depth, .. } => {
                (max_depth == Some(0)).then_some("max_depth")
            }
            ClassifierSpec::RandomForest {
                n_estimators,
                max_depth,
            } => {
                if n_estimators == 0 {
                    Some("n_estimators")
                } else {
                    (max_depth == Some(0)).then_some("max_depth")
                }
            }
        };
        match bad {
            Some(name) => Err(Error::Config(format!("{name} must be >= 1"))),
            None => Ok(()),
        }
    }
}

impl fmt::Display for ClassifierSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}({})", self.family(), self.params_string())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "state", rename_all = "kebab-case")]
pub enum Fitted {
    Knn(KnnModel),
    Tree(DecisionTree),
    Forest(RandomForest),
}

impl Fitted {
    pub fn fit(spec: &ClassifierSpec, x: Dense, y: Vec<usize>, n_classes: usize, seed: u64) -> Self {
        match *spec {
            ClassifierSpec::Knn {
                n_neighbors,
                metric,
                weights,
            } => Fitted::Knn(KnnModel::fit(n_neighbors, metric, weights, x, y, n_classes)),
            ClassifierSpec::DecisionTree {
                criterion,
                max_depth,
            } => {
                let params = TreeParams {
                    criterion,
                    max_depth,
                    max_features: MaxFeatures::All,
                };
                let all: Vec<usize> = (0..x.n_rows()).collect();
                Fitted::Tree(DecisionTree::fit(&x, &y, n_classes, &all, params, None))
            }
            ClassifierSpec::RandomForest {
                n_estimators,
                max_depth,
            } => Fitted::Forest(RandomForest::fit(
                &x,
                &y,
                n_classes,
                n_estimators,
                max_depth,
                MaxFeatures::Sqrt,
                seed,
            )),
        }
    }

    pub fn predict_row(&self, row: &[f64]) -> usize {
        match self {
            Fitted::Knn(m) => m.predict_row(row),
            Fitted::Tree(m) => m.predict_row(row),
            Fitted::Forest(m) => m.predict_row(row),
        }
    }
}

/// A classifier together with the feature selection it was trained on.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub spec: ClassifierSpec,
    pub selection: SelectionModel,
    pub classes: Vec<String>,
    pub fitted: Fitted,
    pub seed: u64,
}

fn check_training_labels(n_rows: usize, labels: &[String]) -> Result<()> {
    if n_rows == 0 {
        return Err(Error::Training("empty training matrix".into()));
    }
    if labels.len() != n_rows {
        return Err(Error::Training(format!(
            "{} labels for {n_rows} rows",
            labels.len()
        )));
    }
    let mut classes: Vec<&String> = labels.iter().collect();
    classes.sort();
    classes.dedup();
    if classes.len() < 2 {
        return Err(Error::Training("training data has a single class".into()));
    }
    Ok(())
}

/// Fits selection on `matrix` and trains the classifier on the selected,
/// scaled columns.
pub fn train(
    spec: &ClassifierSpec,
    matrix: &FeatureMatrix,
    labels: &[String],
    selection: &SelectionConfig,
    seed: u64,
    probe: Option<&dyn FitProbe>,
) -> Result<TrainedModel> {
    check_training_labels(matrix.n_rows(), labels)?;
    if let Some(p) = probe {
        let ids: Vec<String> = matrix.rows().iter().map(|r| r.session_id.clone()).collect();
        p.record(FitStage::Scaler, &ids);
        p.record(FitStage::Selection, &ids);
    }
    let sel = fit_selection(matrix, labels, selection)?;
    train_with_selection(spec, sel, matrix, labels, seed)
}

/// Trains on `matrix` using an already fitted selection.
pub fn train_with_selection(
    spec: &ClassifierSpec,
    selection: SelectionModel,
    matrix: &FeatureMatrix,
    labels: &[String],
    seed: u64,
) -> Result<TrainedModel> {
    spec.validate()?;
    check_training_labels(matrix.n_rows(), labels)?;
    let x = Dense::from_rows(&selection.transform(matrix)?)?;
    let (classes, y) = encode_labels(labels);
    let fitted = Fitted::fit(spec, x, y, classes.len(), seed);
    Ok(TrainedModel {
        spec: *spec,
        selection,
        classes,
        fitted,
        seed,
    })
}

impl TrainedModel {
    pub fn predict(&self, matrix: &FeatureMatrix) -> Result<Vec<String>> {
        let x = self.selection.transform(matrix)?;
        Ok(x
            .iter()
            .map(|r| self.classes[self.fitted.predict_row(r)].clone())
            .collect())
    }

    pub fn save_json<W: Write>(&self, out: W) -> Result<()> {
        serde_json::to_writer_pretty(out, self)?;
        Ok(())
    }

    pub fn load_json<R: Read>(input: R) -> Result<Self> {
        Ok(serde_json::from_reader(input)?)
    }
}
