//! Second-order gradient boosting of regression trees on logistic loss.

use alloc::boxed::Box;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::params::{check_keys, f64_or, opt_usize_or, str_or, usize_or};
use super::tree::{midpoint, Node};
use super::{ParamMap, ParamValue};
use crate::aggregate::Label;
use crate::error::{Error, Result};
use crate::float::{ln, sigmoid};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbTreeParams {
    pub max_depth: Option<usize>,
    /// Minimum hessian mass on each side of a split.
    pub min_child_weight: f64,
    /// L2 penalty on leaf values.
    pub reg_lambda: f64,
}

impl Default for GbTreeParams {
    fn default() -> Self {
        GbTreeParams {
            max_depth: Some(6),
            min_child_weight: 1.0,
            reg_lambda: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbParams {
    pub n_estimators: usize,
    pub learning_rate: f64,
    pub tree: GbTreeParams,
}

impl GbParams {
    pub fn from_map(map: &ParamMap) -> Result<GbParams> {
        check_keys(
            map,
            &["booster", "learning_rate", "max_depth", "min_child_weight", "n_estimators", "reg_lambda"],
        )?;
        let booster = str_or(map, "booster", "gbtree")?;
        if booster != "gbtree" {
            return Err(super::unsupported("booster", &ParamValue::str(booster)));
        }
        let non_negative = |key: &str, v: f64| {
            if v >= 0.0 {
                Ok(v)
            } else {
                Err(Error::InvalidParam {
                    name: key.into(),
                    reason: "must be non-negative".into(),
                })
            }
        };
        Ok(GbParams {
            n_estimators: usize_or(map, "n_estimators", 100)?,
            learning_rate: non_negative("learning_rate", f64_or(map, "learning_rate", 0.3)?)?,
            tree: GbTreeParams {
                max_depth: opt_usize_or(map, "max_depth", Some(6))?,
                min_child_weight: non_negative("min_child_weight", f64_or(map, "min_child_weight", 1.0)?)?,
                reg_lambda: non_negative("reg_lambda", f64_or(map, "reg_lambda", 1.0)?)?,
            },
        })
    }
}

/// Gains closer than this, relative to the parent score, count as ties.
const TIE_TOL: f64 = 1e-10;

struct Grower<'a> {
    x: &'a [Vec<f64>],
    g: &'a [f64],
    h: &'a [f64],
    params: &'a GbTreeParams,
    buf: Vec<(f64, usize)>,
}

impl Grower<'_> {
    fn leaf_value(&self, gs: f64, hs: f64) -> f64 {
        let denom = hs + self.params.reg_lambda;
        if denom > 0.0 {
            -gs / denom
        } else {
            0.0
        }
    }

    fn score(&self, gs: f64, hs: f64) -> f64 {
        let denom = hs + self.params.reg_lambda;
        if denom > 0.0 {
            gs * gs / denom
        } else {
            0.0
        }
    }

    fn grow(&mut self, idx: &mut [usize], depth: usize) -> Node {
        let gs: f64 = idx.iter().map(|&i| self.g[i]).sum();
        let hs: f64 = idx.iter().map(|&i| self.h[i]).sum();
        let leaf = Node::Leaf {
            value: self.leaf_value(gs, hs),
        };
        if self.params.max_depth.is_some_and(|m| depth >= m) || idx.len() < 2 {
            return leaf;
        }
        let Some((feature, threshold)) = self.best_split(idx, gs, hs) else {
            return leaf;
        };
        let mut split = 0;
        for j in 0..idx.len() {
            if self.x[idx[j]][feature] <= threshold {
                idx.swap(split, j);
                split += 1;
            }
        }
        let (l, r) = idx.split_at_mut(split);
        let left = Box::new(self.grow(l, depth + 1));
        let right = Box::new(self.grow(r, depth + 1));
        Node::Split {
            feature,
            threshold,
            left,
            right,
        }
    }

    /// Split maximizing `1/2 [G_L^2/(H_L+l) + G_R^2/(H_R+l) - G^2/(H+l)]`,
    /// provided the gain is positive.
    fn best_split(&mut self, idx: &[usize], gs: f64, hs: f64) -> Option<(usize, f64)> {
        let n = idx.len();
        let parent = self.score(gs, hs);
        let mcw = self.params.min_child_weight;
        let tol = TIE_TOL * (1.0 + parent);
        let mut best: Option<(f64, usize, f64)> = None;
        for f in 0..self.x[0].len() {
            self.buf.clear();
            self.buf.extend(idx.iter().map(|&i| (self.x[i][f], i)));
            self.buf.sort_by(|a, b| a.0.total_cmp(&b.0));
            let (mut gl, mut hl) = (0.0, 0.0);
            for p in 0..n - 1 {
                let (v, i) = self.buf[p];
                gl += self.g[i];
                hl += self.h[i];
                let next = self.buf[p + 1].0;
                let hr = hs - hl;
                if v == next || hl < mcw - tol || hr < mcw - tol {
                    continue;
                }
                let gain = 0.5 * (self.score(gl, hl) + self.score(gs - gl, hr) - parent);
                if gain > tol && best.is_none_or(|b| gain > b.0 + tol) {
                    best = Some((gain, f, midpoint(v, next)));
                }
            }
        }
        best.map(|(_, f, t)| (f, t))
    }
}

/// Weighted logistic loss of log-odds `scores`, averaged by weight.
pub fn logistic_loss(scores: &[f64], y: &[Label], w: &[f64]) -> f64 {
    let total: f64 = w.iter().sum();
    scores
        .iter()
        .zip(y)
        .zip(w)
        .map(|((s, l), wi)| {
            // log(1 + e^-m) with margin m = +-s
            let m = if l.is_positive() { *s } else { -*s };
            let term = if m > 0.0 {
                libm::log1p(libm::exp(-m))
            } else {
                -m + libm::log1p(libm::exp(m))
            };
            wi * term
        })
        .sum::<f64>()
        / total
}

/// Fit one regression tree to the gradient statistics of `scores` and return
/// it together with the scores moved by `learning_rate` times its output.
pub fn gradboost_stage(
    x: &[Vec<f64>],
    scores: &[f64],
    y: &[Label],
    w: &[f64],
    learning_rate: f64,
    params: &GbTreeParams,
) -> (Node, Vec<f64>) {
    let mut g = Vec::with_capacity(scores.len());
    let mut h = Vec::with_capacity(scores.len());
    for ((s, l), wi) in scores.iter().zip(y).zip(w) {
        let p = sigmoid(*s);
        g.push(wi * (p - if l.is_positive() { 1.0 } else { 0.0 }));
        h.push(wi * p * (1.0 - p));
    }
    let mut idx: Vec<usize> = (0..x.len()).filter(|&i| w[i] > 0.0).collect();
    let mut grower = Grower {
        x,
        g: &g,
        h: &h,
        params,
        buf: Vec::with_capacity(idx.len()),
    };
    let tree = grower.grow(&mut idx, 0);
    let next = scores
        .iter()
        .zip(x)
        .map(|(s, r)| s + learning_rate * tree.eval(r))
        .collect();
    (tree, next)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradBoostModel {
    /// Log-odds of the weighted class-1 share.
    pub base_score: f64,
    pub learning_rate: f64,
    pub trees: Vec<Node>,
    /// Training loss before the first stage and after each stage.
    pub train_loss: Vec<f64>,
}

impl GradBoostModel {
    pub fn fit(x: &[Vec<f64>], y: &[Label], w: &[f64], params: &GbParams) -> GradBoostModel {
        let total: f64 = w.iter().sum();
        let prior = w.iter().zip(y).filter(|(_, l)| l.is_positive()).map(|(v, _)| v).sum::<f64>() / total;
        let base_score = ln(prior / (1.0 - prior));
        let mut scores = alloc::vec![base_score; x.len()];
        let mut train_loss = alloc::vec![logistic_loss(&scores, y, w)];
        let mut trees = Vec::with_capacity(params.n_estimators);
        for _ in 0..params.n_estimators {
            let (tree, next) = gradboost_stage(x, &scores, y, w, params.learning_rate, &params.tree);
            scores = next;
            train_loss.push(logistic_loss(&scores, y, w));
            trees.push(tree);
        }
        GradBoostModel {
            base_score,
            learning_rate: params.learning_rate,
            trees,
            train_loss,
        }
    }

    pub fn margin(&self, row: &[f64]) -> f64 {
        self.base_score + self.learning_rate * self.trees.iter().map(|t| t.eval(row)).sum::<f64>()
    }

    pub fn score(&self, row: &[f64]) -> f64 {
        sigmoid(self.margin(row))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learners::{fit, param_map, ClassifierKind, ClassifierSpec};
    use alloc::vec;

    fn toy() -> (Vec<Vec<f64>>, Vec<Label>) {
        let x: Vec<Vec<f64>> = (0..12).map(|i| vec![i as f64, ((i * 7) % 5) as f64]).collect();
        let y = [0, 0, 1, 0, 0, 1, 1, 0, 1, 1, 1, 0].map(|b| Label::from_bool(b == 1)).to_vec();
        (x, y)
    }

    #[test]
    fn zero_stages_predict_the_prior() {
        let (x, y) = toy();
        let spec = ClassifierSpec::new(ClassifierKind::GradBoost).with_params(param_map([("n_estimators", ParamValue::Int(0))]));
        let m = fit(&spec, &x, &y, None).unwrap();
        let s = m.decision_score(&x[..1]).unwrap()[0];
        assert!((s - 0.5).abs() < 1e-12);
    }

    #[test]
    fn zero_learning_rate_leaves_scores() {
        let (x, y) = toy();
        let w = vec![1.0; x.len()];
        let scores = vec![0.3; x.len()];
        let (_, next) = gradboost_stage(&x, &scores, &y, &w, 0.0, &GbTreeParams::default());
        assert_eq!(next, scores);
    }

    #[test]
    fn loss_does_not_increase() {
        let (x, y) = toy();
        let w = vec![1.0; x.len()];
        let p = GbParams::from_map(&param_map([("n_estimators", ParamValue::Int(30))])).unwrap();
        let m = GradBoostModel::fit(&x, &y, &w, &p);
        assert_eq!(m.train_loss.len(), 31);
        for pair in m.train_loss.windows(2) {
            assert!(pair[1] <= pair[0] + 1e-12, "{pair:?}");
        }
    }

    #[test]
    fn only_gbtree() {
        for b in ["gblinear", "linear", "dart"] {
            assert!(matches!(
                GbParams::from_map(&param_map([("booster", ParamValue::str(b))])),
                Err(Error::UnsupportedParam { .. })
            ));
        }
    }
}
