//! Native binary classifiers.
//!
//! Every learner accepts per-sample weights, folded together with the class
//! weights of its [`ClassifierSpec`], and exposes a class-1 score in `[0, 1]`.
//! Hard labels are always `score >= 0.5`, so the two views never disagree.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::aggregate::Label;
use crate::error::{Error, Result};

pub mod forest;
pub mod gradboost;
pub mod impurity;
pub mod kernel;
pub mod knn;
pub mod naive_bayes;
pub mod samme;
pub mod svm;
pub mod tree;

mod params;

pub use impurity::{entropy, gini, Criterion};
pub use kernel::{Gamma, Kernel};
pub use samme::samme_stage;

/// Version tag written into serialized models.
pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassifierKind {
    DecisionTree,
    RandomForest,
    Svm,
    GaussianNb,
    Knn,
    AdaBoostRf,
    GradBoost,
}

impl ClassifierKind {
    pub const ALL: [ClassifierKind; 7] = [
        ClassifierKind::DecisionTree,
        ClassifierKind::RandomForest,
        ClassifierKind::Svm,
        ClassifierKind::GaussianNb,
        ClassifierKind::Knn,
        ClassifierKind::AdaBoostRf,
        ClassifierKind::GradBoost,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ClassifierKind::DecisionTree => "decision_tree",
            ClassifierKind::RandomForest => "random_forest",
            ClassifierKind::Svm => "svm",
            ClassifierKind::GaussianNb => "gaussian_nb",
            ClassifierKind::Knn => "knn",
            ClassifierKind::AdaBoostRf => "ada_boost_rf",
            ClassifierKind::GradBoost => "grad_boost",
        }
    }

    /// Whether fitting consumes randomness at all. Deterministic kinds give
    /// identical results for every seed.
    pub fn is_randomized(self, params: &ParamMap) -> bool {
        match self {
            ClassifierKind::Svm | ClassifierKind::GaussianNb | ClassifierKind::Knn | ClassifierKind::GradBoost => false,
            ClassifierKind::DecisionTree => !matches!(
                params.get("max_features"),
                None | Some(ParamValue::Null)
            ),
            ClassifierKind::RandomForest | ClassifierKind::AdaBoostRf => true,
        }
    }
}

impl fmt::Display for ClassifierKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ClassifierKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm: String = s
            .chars()
            .filter(|c| c.is_ascii_alphanumeric())
            .map(|c| c.to_ascii_lowercase())
            .collect();
        Ok(match norm.as_str() {
            "decisiontree" | "dt" | "tree" => ClassifierKind::DecisionTree,
            "randomforest" | "rf" | "forest" => ClassifierKind::RandomForest,
            "svm" | "svc" => ClassifierKind::Svm,
            "gaussiannb" | "nb" | "naivebayes" => ClassifierKind::GaussianNb,
            "knn" | "kneighbors" => ClassifierKind::Knn,
            "adaboostrf" | "adaboost" | "samme" => ClassifierKind::AdaBoostRf,
            "gradboost" | "xgboost" | "gbt" => ClassifierKind::GradBoost,
            _ => return Err(Error::UnknownKind(s.to_string())),
        })
    }
}

/// One hyperparameter value as it appears in a grid or config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamValue {
    Null,
    Bool(bool),
    Int(i64),
    Float(f64),
    Str(String),
}

impl ParamValue {
    pub fn str(s: &str) -> ParamValue {
        ParamValue::Str(s.to_string())
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            ParamValue::Int(i) => Some(*i as f64),
            ParamValue::Float(f) => Some(*f),
            _ => None,
        }
    }
}

impl fmt::Display for ParamValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParamValue::Null => f.write_str("None"),
            ParamValue::Bool(b) => write!(f, "{b}"),
            ParamValue::Int(i) => write!(f, "{i}"),
            ParamValue::Float(x) => write!(f, "{x}"),
            ParamValue::Str(s) => f.write_str(s),
        }
    }
}

pub type ParamMap = BTreeMap<String, ParamValue>;

/// Build a [`ParamMap`] from `(name, value)` pairs.
pub fn param_map<'a>(pairs: impl IntoIterator<Item = (&'a str, ParamValue)>) -> ParamMap {
    pairs.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
}

/// Which classifier to fit, with what hyperparameters, class weights and seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierSpec {
    pub kind: ClassifierKind,
    #[serde(default)]
    pub params: ParamMap,
    /// Multipliers for `[Below, Above]` sample weights.
    #[serde(default = "unit_class_weight")]
    pub class_weight: [f64; 2],
    #[serde(default)]
    pub seed: u64,
}

fn unit_class_weight() -> [f64; 2] {
    [1.0, 1.0]
}

impl ClassifierSpec {
    pub fn new(kind: ClassifierKind) -> Self {
        ClassifierSpec {
            kind,
            params: ParamMap::new(),
            class_weight: unit_class_weight(),
            seed: 0,
        }
    }

    pub fn with_params(mut self, params: ParamMap) -> Self {
        self.params = params;
        self
    }

    pub fn with_param(mut self, key: &str, value: ParamValue) -> Self {
        self.params.insert(key.to_string(), value);
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_class_weight(mut self, label: Label, weight: f64) -> Self {
        self.class_weight[label.index()] = weight;
        self
    }

    /// Parse and range-check the hyperparameters without fitting.
    pub fn validate(&self) -> Result<()> {
        if self.class_weight.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
            return Err(Error::InvalidParam {
                name: "class_weight".to_string(),
                reason: "class weights must be positive".to_string(),
            });
        }
        match self.kind {
            ClassifierKind::DecisionTree => tree::TreeParams::from_map(&self.params).map(|_| ()),
            ClassifierKind::RandomForest => forest::ForestParams::from_map(&self.params).map(|_| ()),
            ClassifierKind::Svm => svm::SvmParams::from_map(&self.params).map(|_| ()),
            ClassifierKind::GaussianNb => naive_bayes::NbParams::from_map(&self.params).map(|_| ()),
            ClassifierKind::Knn => knn::KnnParams::from_map(&self.params).map(|_| ()),
            ClassifierKind::AdaBoostRf => samme::SammeParams::from_map(&self.params).map(|_| ()),
            ClassifierKind::GradBoost => gradboost::GbParams::from_map(&self.params).map(|_| ()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelState {
    DecisionTree(tree::DecisionTree),
    RandomForest(forest::RandomForest),
    Svm(svm::SvmModel),
    GaussianNb(naive_bayes::GaussianNb),
    Knn(knn::KnnModel),
    AdaBoostRf(samme::SammeModel),
    GradBoost(gradboost::GradBoostModel),
}

/// A fitted classifier. Immutable after [`fit`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub format_version: u32,
    pub spec: ClassifierSpec,
    pub n_features: usize,
    pub state: ModelState,
}

/// Check shapes and fold sample and class weights into one vector. Class
/// weights only redistribute mass: the result sums to the total sample
/// weight, which is the number of samples when none are given.
pub(crate) fn effective_weights(
    x: &[Vec<f64>],
    y: &[Label],
    w: Option<&[f64]>,
    class_weight: [f64; 2],
) -> Result<Vec<f64>> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch {
            left: x.len(),
            right: y.len(),
        });
    }
    if x.len() < 2 {
        return Err(Error::TooFewSamples {
            needed: 2,
            found: x.len(),
        });
    }
    let d = x[0].len();
    if let Some(bad) = x.iter().find(|r| r.len() != d) {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: bad.len(),
        });
    }
    if x.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::InvalidParam {
            name: "X".to_string(),
            reason: "non-finite feature value".to_string(),
        });
    }
    if class_weight.iter().any(|c| !(c.is_finite() && *c > 0.0)) {
        return Err(Error::InvalidParam {
            name: "class_weight".to_string(),
            reason: "class weights must be positive".to_string(),
        });
    }
    let raw: Vec<f64> = match w {
        Some(w) => {
            if w.len() != x.len() {
                return Err(Error::LengthMismatch {
                    left: x.len(),
                    right: w.len(),
                });
            }
            if w.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
                return Err(Error::InvalidWeights("weights must be finite and non-negative".to_string()));
            }
            w.to_vec()
        }
        None => alloc::vec![1.0; x.len()],
    };
    let eff: Vec<f64> = raw
        .iter()
        .zip(y)
        .map(|(wi, yi)| wi * class_weight[yi.index()])
        .collect();
    let mut per_class = [0.0; 2];
    for (wi, yi) in eff.iter().zip(y) {
        per_class[yi.index()] += wi;
    }
    if per_class[0] <= 0.0 || per_class[1] <= 0.0 {
        return Err(Error::SingleClass);
    }
    let factor = raw.iter().sum::<f64>() / (per_class[0] + per_class[1]);
    Ok(eff.into_iter().map(|v| v * factor).collect())
}

/// Fit a classifier.
pub fn fit(spec: &ClassifierSpec, x: &[Vec<f64>], y: &[Label], w: Option<&[f64]>) -> Result<TrainedModel> {
    let weights = effective_weights(x, y, w, spec.class_weight)?;
    let state = match spec.kind {
        ClassifierKind::DecisionTree => {
            let p = tree::TreeParams::from_map(&spec.params)?;
            ModelState::DecisionTree(tree::DecisionTree::fit(x, y, &weights, &p, spec.seed))
        }
        ClassifierKind::RandomForest => {
            let p = forest::ForestParams::from_map(&spec.params)?;
            ModelState::RandomForest(forest::RandomForest::fit(x, y, &weights, &p, spec.seed))
        }
        ClassifierKind::Svm => {
            let p = svm::SvmParams::from_map(&spec.params)?;
            ModelState::Svm(svm::SvmModel::fit(x, y, &weights, &p)?)
        }
        ClassifierKind::GaussianNb => {
            let p = naive_bayes::NbParams::from_map(&spec.params)?;
            ModelState::GaussianNb(naive_bayes::GaussianNb::fit(x, y, &weights, &p))
        }
        ClassifierKind::Knn => {
            let p = knn::KnnParams::from_map(&spec.params)?;
            ModelState::Knn(knn::KnnModel::fit(x, y, &weights, &p))
        }
        ClassifierKind::AdaBoostRf => {
            let p = samme::SammeParams::from_map(&spec.params)?;
            ModelState::AdaBoostRf(samme::SammeModel::fit(x, y, &weights, &p, spec.seed))
        }
        ClassifierKind::GradBoost => {
            let p = gradboost::GbParams::from_map(&spec.params)?;
            ModelState::GradBoost(gradboost::GradBoostModel::fit(x, y, &weights, &p))
        }
    };
    Ok(TrainedModel {
        format_version: MODEL_FORMAT_VERSION,
        spec: spec.clone(),
        n_features: x[0].len(),
        state,
    })
}

impl TrainedModel {
    fn check_dims(&self, x: &[Vec<f64>]) -> Result<()> {
        match x.iter().find(|r| r.len() != self.n_features) {
            Some(r) => Err(Error::DimensionMismatch {
                expected: self.n_features,
                found: r.len(),
            }),
            None => Ok(()),
        }
    }

    fn score_one(&self, row: &[f64]) -> f64 {
        match &self.state {
            ModelState::DecisionTree(m) => m.score(row),
            ModelState::RandomForest(m) => m.score(row),
            ModelState::Svm(m) => m.score(row),
            ModelState::GaussianNb(m) => m.score(row),
            ModelState::Knn(m) => m.score(row),
            ModelState::AdaBoostRf(m) => m.score(row),
            ModelState::GradBoost(m) => m.score(row),
        }
    }

    /// Class-1 scores in `[0, 1]`.
    pub fn decision_score(&self, x: &[Vec<f64>]) -> Result<Vec<f64>> {
        self.check_dims(x)?;
        Ok(x.iter().map(|r| self.score_one(r)).collect())
    }

    pub fn predict(&self, x: &[Vec<f64>]) -> Result<Vec<Label>> {
        Ok(self
            .decision_score(x)?
            .into_iter()
            .map(|s| Label::from_bool(s >= 0.5))
            .collect())
    }
}

/// Convenience for fitting and then scoring in one go.
pub fn fit_predict(
    spec: &ClassifierSpec,
    x: &[Vec<f64>],
    y: &[Label],
    w: Option<&[f64]>,
    test: &[Vec<f64>],
) -> Result<Vec<f64>> {
    fit(spec, x, y, w)?.decision_score(test)
}

pub(crate) fn unsupported(name: &str, value: &ParamValue) -> Error {
    Error::UnsupportedParam {
        name: name.to_string(),
        value: format!("{value}"),
    }
}
