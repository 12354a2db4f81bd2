//! CART classification trees on weighted samples.

use alloc::boxed::Box;
use alloc::string::ToString;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::impurity::Criterion;
use super::params::{at_least, check_keys, opt_usize_or, str_or, usize_or};
use super::{ParamMap, ParamValue};
use crate::aggregate::Label;
use crate::error::{Error, Result};
use crate::rng::{self, Rng};

/// A binary decision tree node; samples with `x[feature] <= threshold` go left.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Node {
    Leaf {
        value: f64,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: Box<Node>,
        right: Box<Node>,
    },
}

impl Node {
    #[inline]
    pub fn eval(&self, row: &[f64]) -> f64 {
        let mut node = self;
        loop {
            match node {
                Node::Leaf { value } => return *value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    node = if row[*feature] <= *threshold { left } else { right };
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            Node::Leaf { .. } => 0,
            Node::Split { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }

    pub fn n_leaves(&self) -> usize {
        match self {
            Node::Leaf { .. } => 1,
            Node::Split { left, right, .. } => left.n_leaves() + right.n_leaves(),
        }
    }
}

/// Number of candidate features examined per split.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaxFeatures {
    All,
    Sqrt,
    Log2,
    Count(usize),
}

impl MaxFeatures {
    pub fn resolve(self, d: usize) -> usize {
        let k = match self {
            MaxFeatures::All => d,
            MaxFeatures::Sqrt => libm::floor(libm::sqrt(d as f64)) as usize,
            MaxFeatures::Log2 => libm::floor(libm::log2(d as f64)) as usize,
            MaxFeatures::Count(k) => k,
        };
        k.clamp(1, d.max(1))
    }

    pub(crate) fn from_value(v: Option<&ParamValue>, default: MaxFeatures) -> Result<MaxFeatures> {
        match v {
            None => Ok(default),
            Some(ParamValue::Null) => Ok(MaxFeatures::All),
            Some(ParamValue::Str(s)) if s == "sqrt" || s == "auto" => Ok(MaxFeatures::Sqrt),
            Some(ParamValue::Str(s)) if s == "log2" => Ok(MaxFeatures::Log2),
            Some(ParamValue::Int(k)) if *k >= 1 => Ok(MaxFeatures::Count(*k as usize)),
            Some(v) => Err(Error::InvalidParam {
                name: "max_features".to_string(),
                reason: alloc::format!("expected sqrt, log2, None or a positive integer, got {v}"),
            }),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeParams {
    pub criterion: Criterion,
    pub max_depth: Option<usize>,
    pub max_features: MaxFeatures,
    pub min_samples_leaf: usize,
    pub min_samples_split: usize,
}

impl Default for TreeParams {
    fn default() -> Self {
        TreeParams {
            criterion: Criterion::Gini,
            max_depth: None,
            max_features: MaxFeatures::All,
            min_samples_leaf: 1,
            min_samples_split: 2,
        }
    }
}

pub(crate) const TREE_KEYS: &[&str] = &[
    "criterion",
    "max_depth",
    "max_features",
    "min_samples_leaf",
    "min_samples_split",
];

impl TreeParams {
    pub fn from_map(map: &ParamMap) -> Result<TreeParams> {
        check_keys(map, TREE_KEYS)?;
        Self::read(map, MaxFeatures::All)
    }

    /// Read the tree keys of `map`, ignoring any others.
    pub(crate) fn read(map: &ParamMap, default_features: MaxFeatures) -> Result<TreeParams> {
        let criterion = match str_or(map, "criterion", "gini")? {
            "gini" => Criterion::Gini,
            "entropy" => Criterion::Entropy,
            other => {
                return Err(Error::InvalidParam {
                    name: "criterion".to_string(),
                    reason: alloc::format!("unknown criterion {other}"),
                })
            }
        };
        Ok(TreeParams {
            criterion,
            max_depth: opt_usize_or(map, "max_depth", None)?,
            max_features: MaxFeatures::from_value(map.get("max_features"), default_features)?,
            min_samples_leaf: at_least("min_samples_leaf", usize_or(map, "min_samples_leaf", 1)?, 1)?,
            min_samples_split: at_least("min_samples_split", usize_or(map, "min_samples_split", 2)?, 2)?,
        })
    }
}

/// Relative impurity gap below which two splits count as equally good, so
/// the earlier candidate wins regardless of rounding in the weight sums.
const TIE_TOL: f64 = 1e-10;

struct Grower<'a> {
    x: &'a [Vec<f64>],
    y: &'a [Label],
    w: &'a [f64],
    params: &'a TreeParams,
    k: usize,
    rng: &'a mut Rng,
    buf: Vec<(f64, usize)>,
}

impl Grower<'_> {
    fn counts(&self, idx: &[usize]) -> [f64; 2] {
        let mut c = [0.0; 2];
        for &i in idx {
            c[self.y[i].index()] += self.w[i];
        }
        c
    }

    fn grow(&mut self, idx: &mut [usize], depth: usize) -> Node {
        let counts = self.counts(idx);
        let leaf = Node::Leaf {
            value: counts[1] / (counts[0] + counts[1]),
        };
        let p = self.params;
        if counts[0] <= 0.0
            || counts[1] <= 0.0
            || p.max_depth.is_some_and(|m| depth >= m)
            || idx.len() < p.min_samples_split
            || idx.len() < 2 * p.min_samples_leaf
        {
            return leaf;
        }
        let Some((feature, threshold)) = self.best_split(idx, counts) else {
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

    fn best_split(&mut self, idx: &[usize], counts: [f64; 2]) -> Option<(usize, f64)> {
        let d = self.x[0].len();
        let mut features: Vec<usize> = (0..d).collect();
        if self.k < d {
            features.shuffle(self.rng);
        }
        let n = idx.len();
        let msl = self.params.min_samples_leaf;
        let crit = self.params.criterion;
        let mut best: Option<(f64, usize, f64)> = None;
        let mut visited = 0;
        for &f in &features {
            if visited >= self.k {
                break;
            }
            self.buf.clear();
            self.buf.extend(idx.iter().map(|&i| (self.x[i][f], i)));
            self.buf.sort_by(|a, b| a.0.total_cmp(&b.0));
            if self.buf[0].0 == self.buf[n - 1].0 {
                continue;
            }
            visited += 1;
            let mut left = [0.0; 2];
            for p in 0..n - 1 {
                let (v, i) = self.buf[p];
                left[self.y[i].index()] += self.w[i];
                let next = self.buf[p + 1].0;
                if v == next || p + 1 < msl || n - p - 1 < msl {
                    continue;
                }
                let right = [(counts[0] - left[0]).max(0.0), (counts[1] - left[1]).max(0.0)];
                let (wl, wr) = (left[0] + left[1], right[0] + right[1]);
                if wl <= 0.0 || wr <= 0.0 {
                    continue;
                }
                let child = wl * crit.of(&left) + wr * crit.of(&right);
                if best.is_none_or(|b| child < b.0 - TIE_TOL * (wl + wr)) {
                    best = Some((child, f, midpoint(v, next)));
                }
            }
        }
        best.map(|(_, f, t)| (f, t))
    }
}

#[inline]
pub(crate) fn midpoint(a: f64, b: f64) -> f64 {
    let m = a + (b - a) / 2.0;
    if m >= b {
        a
    } else {
        m
    }
}

/// Grow a classification tree on the samples in `idx`. Leaves hold the
/// weighted fraction of class 1.
pub(crate) fn grow_classifier(
    x: &[Vec<f64>],
    y: &[Label],
    w: &[f64],
    idx: &mut [usize],
    params: &TreeParams,
    rng: &mut Rng,
) -> Node {
    let k = params.max_features.resolve(x[0].len());
    let mut g = Grower {
        x,
        y,
        w,
        params,
        k,
        rng,
        buf: Vec::with_capacity(idx.len()),
    };
    g.grow(idx, 0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    pub root: Node,
}

impl DecisionTree {
    pub fn fit(x: &[Vec<f64>], y: &[Label], w: &[f64], params: &TreeParams, seed: u64) -> DecisionTree {
        let mut idx: Vec<usize> = (0..x.len()).filter(|&i| w[i] > 0.0).collect();
        let mut rng = rng::stream(seed, &[0]);
        DecisionTree {
            root: grow_classifier(x, y, w, &mut idx, params, &mut rng),
        }
    }

    #[inline]
    pub fn score(&self, row: &[f64]) -> f64 {
        self.root.eval(row)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learners::{fit, param_map, ClassifierKind, ClassifierSpec};
    use alloc::vec;

    fn xor() -> (Vec<Vec<f64>>, Vec<Label>) {
        let x = vec![vec![0.0, 0.0], vec![0.0, 1.0], vec![1.0, 0.0], vec![1.0, 1.0]];
        let y = vec![Label::Below, Label::Above, Label::Above, Label::Below];
        (x, y)
    }

    #[test]
    fn unrestricted_tree_memorizes_xor() {
        let (x, y) = xor();
        let m = fit(&ClassifierSpec::new(ClassifierKind::DecisionTree), &x, &y, None).unwrap();
        assert_eq!(m.predict(&x).unwrap(), y);
    }

    #[test]
    fn unrestricted_tree_memorizes_with_feature_subsampling() {
        let (x, y) = xor();
        let spec = ClassifierSpec::new(ClassifierKind::DecisionTree)
            .with_params(param_map([("max_features", ParamValue::Int(1))]));
        for seed in 0..10 {
            let m = fit(&spec.clone().with_seed(seed), &x, &y, None).unwrap();
            assert_eq!(m.predict(&x).unwrap(), y);
        }
    }

    #[test]
    fn depth_limit_and_min_split() {
        let (x, y) = xor();
        let spec = ClassifierSpec::new(ClassifierKind::DecisionTree)
            .with_params(param_map([("max_depth", ParamValue::Int(0))]));
        let m = fit(&spec, &x, &y, None).unwrap();
        assert_eq!(m.decision_score(&x).unwrap(), vec![0.5; 4]);
        let spec = ClassifierSpec::new(ClassifierKind::DecisionTree)
            .with_params(param_map([("min_samples_split", ParamValue::Int(100))]));
        let m = fit(&spec, &x, &y, None).unwrap();
        assert!(matches!(&m.state, crate::learners::ModelState::DecisionTree(t) if t.root.n_leaves() == 1));
    }

    #[test]
    fn min_samples_leaf_is_respected() {
        let x: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64]).collect();
        let y: Vec<Label> = (0..10).map(|i| Label::from_bool(i % 2 == 0)).collect();
        let spec = ClassifierSpec::new(ClassifierKind::DecisionTree)
            .with_params(param_map([("min_samples_leaf", ParamValue::Int(3))]));
        let m = fit(&spec, &x, &y, None).unwrap();
        let crate::learners::ModelState::DecisionTree(t) = &m.state else { unreachable!() };
        // at most floor(10 / 3) leaves
        assert!(t.root.n_leaves() <= 3);
    }

    #[test]
    fn midpoint_never_reaches_upper_value() {
        let a = 1.0f64;
        let b = f64::from_bits(a.to_bits() + 1);
        assert_eq!(midpoint(a, b), a);
        assert_eq!(midpoint(1.0, 3.0), 2.0);
    }

    #[test]
    fn max_features_resolution() {
        assert_eq!(MaxFeatures::Sqrt.resolve(14), 3);
        assert_eq!(MaxFeatures::Log2.resolve(14), 3);
        assert_eq!(MaxFeatures::All.resolve(14), 14);
        assert_eq!(MaxFeatures::Count(20).resolve(14), 14);
        assert_eq!(MaxFeatures::Log2.resolve(1), 1);
    }
}
