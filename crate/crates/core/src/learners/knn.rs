use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::params::{at_least, check_keys, str_or, usize_or};
use super::{ParamMap, ParamValue};
use crate::aggregate::Label;
use crate::error::{Error, Result};
use crate::float::sqrt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KnnWeights {
    Uniform,
    Distance,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnnParams {
    pub n_neighbors: usize,
    pub weights: KnnWeights,
    /// Minkowski exponent, 1 or 2.
    pub p: u32,
    /// Search strategy hint. Every strategy is an exact search here, so it
    /// never changes a prediction.
    pub algorithm: String,
}

impl KnnParams {
    pub fn from_map(map: &ParamMap) -> Result<KnnParams> {
        check_keys(map, &["algorithm", "n_neighbors", "p", "weights"])?;
        let weights = match str_or(map, "weights", "uniform")? {
            "uniform" => KnnWeights::Uniform,
            "distance" => KnnWeights::Distance,
            other => {
                return Err(Error::InvalidParam {
                    name: "weights".into(),
                    reason: alloc::format!("unknown weighting {other}"),
                })
            }
        };
        let algorithm = str_or(map, "algorithm", "auto")?;
        if !["auto", "ball_tree", "kd_tree", "brute"].contains(&algorithm) {
            return Err(Error::InvalidParam {
                name: "algorithm".into(),
                reason: alloc::format!("unknown algorithm {algorithm}"),
            });
        }
        let p = usize_or(map, "p", 2)?;
        if p != 1 && p != 2 {
            return Err(super::unsupported("p", &ParamValue::Int(p as i64)));
        }
        Ok(KnnParams {
            n_neighbors: at_least("n_neighbors", usize_or(map, "n_neighbors", 5)?, 1)?,
            weights,
            p: p as u32,
            algorithm: algorithm.into(),
        })
    }
}

/// Stored training set. Samples with zero weight are dropped at fit time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnnModel {
    pub params: KnnParams,
    pub x: Vec<Vec<f64>>,
    pub y: Vec<Label>,
    pub w: Vec<f64>,
}

impl KnnModel {
    pub fn fit(x: &[Vec<f64>], y: &[Label], w: &[f64], params: &KnnParams) -> KnnModel {
        let keep: Vec<usize> = (0..x.len()).filter(|&i| w[i] > 0.0).collect();
        KnnModel {
            params: params.clone(),
            x: keep.iter().map(|&i| x[i].clone()).collect(),
            y: keep.iter().map(|&i| y[i]).collect(),
            w: keep.iter().map(|&i| w[i]).collect(),
        }
    }

    fn distance(&self, a: &[f64], b: &[f64]) -> f64 {
        match self.params.p {
            1 => a.iter().zip(b).map(|(u, v)| (u - v).abs()).sum(),
            _ => sqrt(a.iter().zip(b).map(|(u, v)| (u - v) * (u - v)).sum()),
        }
    }

    /// Indices of the `k` nearest stored samples; equal distances resolve to
    /// the lower index.
    pub fn neighbors(&self, row: &[f64]) -> Vec<(usize, f64)> {
        let mut d: Vec<(usize, f64)> = self.x.iter().map(|r| self.distance(r, row)).enumerate().collect();
        d.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
        d.truncate(self.params.n_neighbors.min(d.len()));
        d
    }

    /// Weighted share of class-1 neighbors. Under distance weighting, exact
    /// matches take the whole vote.
    pub fn score(&self, row: &[f64]) -> f64 {
        let nb = self.neighbors(row);
        let exact = self.params.weights == KnnWeights::Distance && nb.iter().any(|(_, d)| *d == 0.0);
        let (mut pos, mut total) = (0.0, 0.0);
        for (i, d) in nb {
            let vote = match self.params.weights {
                KnnWeights::Uniform => self.w[i],
                KnnWeights::Distance if exact => {
                    if d == 0.0 {
                        self.w[i]
                    } else {
                        0.0
                    }
                }
                KnnWeights::Distance => self.w[i] / d,
            };
            total += vote;
            if self.y[i].is_positive() {
                pos += vote;
            }
        }
        pos / total
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learners::{fit, param_map, ClassifierKind, ClassifierSpec};
    use alloc::vec;

    #[test]
    fn three_nn_vote_fraction() {
        let x = vec![vec![0.0], vec![1.0], vec![2.0], vec![10.0]];
        let y = vec![Label::Above, Label::Above, Label::Below, Label::Below];
        let spec = ClassifierSpec::new(ClassifierKind::Knn).with_params(param_map([("n_neighbors", ParamValue::Int(3))]));
        let m = fit(&spec, &x, &y, None).unwrap();
        assert!((m.decision_score(&[vec![0.5]]).unwrap()[0] - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn one_nn_memorizes() {
        let x = vec![vec![0.0, 1.0], vec![1.0, 0.0], vec![5.0, 5.0]];
        let y = vec![Label::Above, Label::Below, Label::Above];
        let spec = ClassifierSpec::new(ClassifierKind::Knn).with_params(param_map([("n_neighbors", ParamValue::Int(1))]));
        let m = fit(&spec, &x, &y, None).unwrap();
        assert_eq!(m.predict(&x).unwrap(), y);
        assert_eq!(m.predict(&[]).unwrap(), vec![]);
    }

    #[test]
    fn distance_weighting_with_exact_match() {
        let x = vec![vec![0.0], vec![1.0], vec![1.5]];
        let y = vec![Label::Below, Label::Above, Label::Above];
        let spec = ClassifierSpec::new(ClassifierKind::Knn).with_params(param_map([
            ("n_neighbors", ParamValue::Int(3)),
            ("weights", ParamValue::str("distance")),
        ]));
        let m = fit(&spec, &x, &y, None).unwrap();
        assert_eq!(m.decision_score(&[vec![0.0]]).unwrap()[0], 0.0);
        // weights 1/0.5, 1/0.5, 1/1 toward (0, 1, 1.5) from 0.5
        let s = m.decision_score(&[vec![0.5]]).unwrap()[0];
        assert!((s - 3.0 / 5.0).abs() < 1e-15);
    }

    #[test]
    fn p_outside_one_two_is_unsupported() {
        assert!(matches!(
            KnnParams::from_map(&param_map([("p", ParamValue::Int(3))])),
            Err(Error::UnsupportedParam { .. })
        ));
    }
}
