//! Exhaustive hyperparameter search scored by mean leave-one-out accuracy,
//! and the search for a minority-class cost weight.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::aggregate::{class_counts, AggregatedSample, Label};
use crate::error::{Error, Result};
use crate::evaluate::{loocv, EvalOptions, EvalReport};
use crate::exec::{Executor, Serial};
use crate::learners::{ClassifierKind, ClassifierSpec, ParamMap, ParamValue};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub name: String,
    pub values: Vec<ParamValue>,
}

/// Ordered axes; cells enumerate row-major with the first axis slowest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamGrid {
    pub kind: ClassifierKind,
    pub axes: Vec<Axis>,
}

impl ParamGrid {
    pub fn new(kind: ClassifierKind) -> Self {
        ParamGrid { kind, axes: Vec::new() }
    }

    pub fn axis(mut self, name: &str, values: impl IntoIterator<Item = ParamValue>) -> Self {
        self.axes.push(Axis {
            name: name.to_string(),
            values: values.into_iter().collect(),
        });
        self
    }

    pub fn n_cells(&self) -> usize {
        self.axes.iter().map(|a| a.values.len()).product()
    }

    pub fn cells(&self) -> Vec<ParamMap> {
        let mut out = vec![ParamMap::new()];
        for axis in &self.axes {
            out = out
                .into_iter()
                .flat_map(|cell| {
                    axis.values.iter().map(move |v| {
                        let mut c = cell.clone();
                        c.insert(axis.name.clone(), v.clone());
                        c
                    })
                })
                .collect();
        }
        out
    }

    pub fn contains(&self, cell: &ParamMap) -> bool {
        cell.len() == self.axes.len()
            && self
                .axes
                .iter()
                .all(|a| cell.get(&a.name).is_some_and(|v| a.values.contains(v)))
    }
}

fn ints(values: &[i64]) -> Vec<ParamValue> {
    values.iter().map(|v| ParamValue::Int(*v)).collect()
}

fn floats(values: &[f64]) -> Vec<ParamValue> {
    values.iter().map(|v| ParamValue::Float(*v)).collect()
}

fn strs(values: &[&str]) -> Vec<ParamValue> {
    values.iter().map(|v| ParamValue::str(v)).collect()
}

fn with_none(mut v: Vec<ParamValue>) -> Vec<ParamValue> {
    v.push(ParamValue::Null);
    v
}

/// The published search grid of a classifier. The boosted forest has none.
pub fn builtin_grid(kind: ClassifierKind) -> Result<ParamGrid> {
    let g = ParamGrid::new(kind);
    Ok(match kind {
        ClassifierKind::Knn => g
            .axis("algorithm", strs(&["auto", "ball_tree", "kd_tree", "brute"]))
            .axis("weights", strs(&["uniform", "distance"]))
            .axis("p", ints(&[1, 2]))
            .axis("n_neighbors", ints(&[1, 2, 3, 4, 5, 6, 7])),
        ClassifierKind::GradBoost => g
            .axis("booster", strs(&["gbtree", "linear", "dart"]))
            .axis("n_estimators", ints(&[20, 50, 75, 100, 200]))
            .axis("learning_rate", floats(&[0.1, 0.5, 0.6, 0.7, 0.8, 1.0])),
        ClassifierKind::Svm => g
            .axis("kernel", strs(&["poly", "linear", "sigmoid", "rbf"]))
            .axis("C", ints(&[1, 10, 100, 1000]))
            .axis("gamma", strs(&["auto", "scale"])),
        ClassifierKind::GaussianNb => g.axis(
            "var_smoothing",
            floats(&[1e-5, 1e-6, 1e-7, 1e-8, 1e-9, 1e-10, 1e-11, 1e-12, 1e-15]),
        ),
        ClassifierKind::RandomForest => g
            .axis("bootstrap", [ParamValue::Bool(true), ParamValue::Bool(false)])
            .axis("n_estimators", ints(&[10, 50, 100, 200]))
            .axis("max_features", with_none(strs(&["log2", "sqrt"])))
            .axis("max_depth", with_none(ints(&[10, 20, 30, 40, 50, 60, 70, 80, 90, 100])))
            .axis("min_samples_leaf", ints(&[1, 2, 4]))
            .axis("min_samples_split", ints(&[2, 5, 10])),
        ClassifierKind::DecisionTree => {
            let mut features = ints(&[5, 6, 7, 8, 9, 10, 11, 12, 13]);
            features.extend(strs(&["sqrt", "log2"]));
            g.axis("criterion", strs(&["gini", "entropy"]))
                .axis("max_depth", with_none(ints(&[5, 8, 10, 20, 30, 40, 50, 60, 70, 80, 90, 100])))
                .axis("max_features", with_none(features))
                .axis("min_samples_leaf", ints(&[1, 2, 4]))
                .axis("min_samples_split", ints(&[2, 5, 10]))
        }
        ClassifierKind::AdaBoostRf => return Err(Error::UnknownKind(format!("no builtin grid for {kind}"))),
    })
}

/// Which published configuration to load.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dataset {
    #[serde(rename = "2018")]
    D2018,
    #[serde(rename = "2021")]
    D2021,
    Joined,
}

impl FromStr for Dataset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Dataset> {
        match s.to_ascii_lowercase().as_str() {
            "2018" | "t2018" => Ok(Dataset::D2018),
            "2021" | "t2021" => Ok(Dataset::D2021),
            "joined" | "pooled" => Ok(Dataset::Joined),
            _ => Err(Error::InvalidParam {
                name: "dataset".into(),
                reason: format!("expected 2018, 2021 or joined, got {s}"),
            }),
        }
    }
}

impl fmt::Display for Dataset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Dataset::D2018 => "2018",
            Dataset::D2021 => "2021",
            Dataset::Joined => "joined",
        })
    }
}

fn cell(pairs: &[(&str, ParamValue)]) -> ParamMap {
    pairs.iter().map(|(k, v)| (k.to_string(), v.clone())).collect()
}

fn opt(v: Option<i64>) -> ParamValue {
    v.map_or(ParamValue::Null, ParamValue::Int)
}

/// The selected configuration for a classifier on a dataset. The boosted
/// forest reuses the forest selection with the default number of rounds.
pub fn builtin_best(kind: ClassifierKind, dataset: Dataset) -> ParamMap {
    use ParamValue::{Bool, Float, Int};
    let s = ParamValue::str;
    let d = dataset as usize;
    match kind {
        ClassifierKind::Knn => {
            let (w, p, k) = [("uniform", 1, 2), ("distance", 2, 4), ("distance", 1, 6)][d];
            cell(&[("algorithm", s("auto")), ("weights", s(w)), ("p", Int(p)), ("n_neighbors", Int(k))])
        }
        ClassifierKind::GradBoost => {
            let (n, lr) = [(20, 0.6), (50, 0.6), (200, 0.8)][d];
            cell(&[("booster", s("gbtree")), ("n_estimators", Int(n)), ("learning_rate", Float(lr))])
        }
        ClassifierKind::Svm => {
            let c = [1, 10, 1][d];
            cell(&[("kernel", s("rbf")), ("C", Int(c)), ("gamma", s("auto"))])
        }
        ClassifierKind::GaussianNb => cell(&[("var_smoothing", Float(1e-11))]),
        ClassifierKind::RandomForest | ClassifierKind::AdaBoostRf => {
            let (b, n, f, depth, leaf, split) = [
                (true, 50, None, None, 2, 10),
                (true, 100, Some("sqrt"), Some(60), 2, 10),
                (false, 100, Some("sqrt"), Some(90), 1, 10),
            ][d];
            let mut m = cell(&[
                ("bootstrap", Bool(b)),
                ("n_estimators", Int(n)),
                ("max_features", f.map_or(ParamValue::Null, s)),
                ("max_depth", opt(depth)),
                ("min_samples_leaf", Int(leaf)),
                ("min_samples_split", Int(split)),
            ]);
            if kind == ClassifierKind::AdaBoostRf {
                m.insert("boost_rounds".into(), Int(10));
            }
            m
        }
        ClassifierKind::DecisionTree => {
            let (depth, f, leaf, split) = [
                (Some(90), s("sqrt"), 1, 5),
                (Some(5), s("sqrt"), 1, 5),
                (None, Int(9), 4, 10),
            ][d]
            .clone();
            cell(&[
                ("criterion", s("gini")),
                ("max_depth", opt(depth)),
                ("max_features", f),
                ("min_samples_leaf", Int(leaf)),
                ("min_samples_split", Int(split)),
            ])
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeaderboardEntry {
    pub params: ParamMap,
    /// Mean accuracy; `None` scores as negative infinity.
    pub score: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuneResult {
    pub best_spec: ClassifierSpec,
    pub best_score: f64,
    pub options: EvalOptions,
    /// Every cell in enumeration order.
    pub leaderboard: Vec<LeaderboardEntry>,
}

fn recorded_failure(e: &Error) -> bool {
    match e {
        Error::UnsupportedParam { .. } | Error::Convergence(_) => true,
        Error::Fold { source, .. } => recorded_failure(source),
        _ => false,
    }
}

/// Score every cell of `grid` by mean leave-one-out accuracy. `base` supplies
/// the class weights and master seed. Cells fail softly on unsupported
/// parameters or solver non-convergence; the first best cell wins ties.
pub fn grid_search<E: Executor>(
    samples: &[AggregatedSample],
    base: &ClassifierSpec,
    grid: &ParamGrid,
    options: EvalOptions,
    exec: &E,
) -> Result<TuneResult> {
    let cells = grid.cells();
    if grid.axes.is_empty() || cells.is_empty() {
        return Err(Error::EmptyGrid);
    }
    let spec_of = |params: &ParamMap| {
        let mut s = base.clone();
        s.kind = grid.kind;
        s.params = params.clone();
        s
    };
    let outcomes = exec.map(cells.len(), |c| loocv(samples, &spec_of(&cells[c]), options, &Serial));
    let mut leaderboard = Vec::with_capacity(cells.len());
    let mut best: Option<(f64, usize)> = None;
    for (c, outcome) in outcomes.into_iter().enumerate() {
        let entry = match outcome {
            Ok(report) => {
                let acc = report.mean_metrics.accuracy;
                if let Some(a) = acc {
                    if best.is_none_or(|(b, _)| a > b) {
                        best = Some((a, c));
                    }
                }
                LeaderboardEntry {
                    params: cells[c].clone(),
                    score: acc,
                    error: None,
                }
            }
            Err(e) if recorded_failure(&e) => LeaderboardEntry {
                params: cells[c].clone(),
                score: None,
                error: Some(e.to_string()),
            },
            Err(e) => return Err(e),
        };
        leaderboard.push(entry);
    }
    let (best_score, c) = best.ok_or(Error::NoViableCell)?;
    Ok(TuneResult {
        best_spec: spec_of(&cells[c]),
        best_score,
        options,
        leaderboard,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostWeightResult {
    pub minority: Label,
    pub best_weight: f64,
    pub best_score: f64,
    /// `(weight, mean accuracy)` per candidate, in input order.
    pub scores: Vec<(f64, f64)>,
    pub report: EvalReport,
}

/// The less frequent label; a balanced set counts Above as the minority.
pub fn minority_label(samples: &[AggregatedSample]) -> Label {
    let [below, above] = class_counts(samples);
    if below < above {
        Label::Below
    } else {
        Label::Above
    }
}

/// Try each candidate as the minority-class weight and keep the most
/// accurate, the first on ties.
pub fn cost_weight_search<E: Executor>(
    samples: &[AggregatedSample],
    spec: &ClassifierSpec,
    candidates: &[f64],
    options: EvalOptions,
    exec: &E,
) -> Result<CostWeightResult> {
    if !candidates.contains(&1.0) {
        return Err(Error::MissingUnitWeight);
    }
    let minority = minority_label(samples);
    let mut scores = Vec::with_capacity(candidates.len());
    let mut best: Option<(f64, f64, EvalReport)> = None;
    for &w in candidates {
        let report = loocv(samples, &spec.clone().with_class_weight(minority, w), options, exec)?;
        let acc = report.accuracy();
        scores.push((w, acc));
        if best.as_ref().is_none_or(|(_, b, _)| acc > *b) {
            best = Some((w, acc, report));
        }
    }
    let (best_weight, best_score, report) = best.expect("candidates include 1.0");
    Ok(CostWeightResult {
        minority,
        best_weight,
        best_score,
        scores,
        report,
    })
}
