use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::params::{check_keys, f64_or};
use super::ParamMap;
use crate::aggregate::Label;
use crate::error::{Error, Result};
use crate::float::{ln, sigmoid};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NbParams {
    pub var_smoothing: f64,
}

impl NbParams {
    pub fn from_map(map: &ParamMap) -> Result<NbParams> {
        check_keys(map, &["var_smoothing"])?;
        let var_smoothing = f64_or(map, "var_smoothing", 1e-9)?;
        if var_smoothing < 0.0 {
            return Err(Error::InvalidParam {
                name: "var_smoothing".into(),
                reason: "must be non-negative".into(),
            });
        }
        Ok(NbParams { var_smoothing })
    }
}

/// Gaussian naive Bayes with weighted class statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianNb {
    /// Class priors, indexed by label.
    pub priors: [f64; 2],
    pub means: [Vec<f64>; 2],
    /// Per-class variances after smoothing.
    pub variances: [Vec<f64>; 2],
}

fn weighted_moments(x: &[Vec<f64>], w: &[f64], keep: impl Fn(usize) -> bool) -> (f64, Vec<f64>, Vec<f64>) {
    let d = x[0].len();
    let mut total = 0.0;
    let mut mean = vec![0.0; d];
    for (i, row) in x.iter().enumerate().filter(|(i, _)| keep(*i)) {
        total += w[i];
        for (m, v) in mean.iter_mut().zip(row) {
            *m += w[i] * v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= total);
    let mut var = vec![0.0; d];
    for (i, row) in x.iter().enumerate().filter(|(i, _)| keep(*i)) {
        for k in 0..d {
            let dev = row[k] - mean[k];
            var[k] += w[i] * dev * dev;
        }
    }
    var.iter_mut().for_each(|v| *v /= total);
    (total, mean, var)
}

impl GaussianNb {
    /// The smoothing term is `var_smoothing` times the largest weighted
    /// feature variance of the whole training set.
    pub fn fit(x: &[Vec<f64>], y: &[Label], w: &[f64], params: &NbParams) -> GaussianNb {
        let (_, _, all_var) = weighted_moments(x, w, |_| true);
        let eps = params.var_smoothing * all_var.iter().copied().fold(0.0, f64::max);
        let stats = [Label::Below, Label::Above].map(|c| weighted_moments(x, w, |i| y[i] == c));
        let total = stats[0].0 + stats[1].0;
        let [(w0, m0, v0), (w1, m1, v1)] = stats;
        let smooth = |v: Vec<f64>| -> Vec<f64> {
            v.into_iter()
                .map(|s| {
                    let s = s + eps;
                    // a class with zero spread and no smoothing still needs a density
                    if s > 0.0 {
                        s
                    } else {
                        f64::MIN_POSITIVE
                    }
                })
                .collect()
        };
        GaussianNb {
            priors: [w0 / total, w1 / total],
            means: [m0, m1],
            variances: [smooth(v0), smooth(v1)],
        }
    }

    fn log_joint(&self, c: usize, row: &[f64]) -> f64 {
        let mut acc = ln(self.priors[c]);
        for ((x, m), v) in row.iter().zip(&self.means[c]).zip(&self.variances[c]) {
            acc -= 0.5 * ln(2.0 * core::f64::consts::PI * v) + (x - m) * (x - m) / (2.0 * v);
        }
        acc
    }

    /// Posterior `P(Above | row)`.
    pub fn score(&self, row: &[f64]) -> f64 {
        sigmoid(self.log_joint(1, row) - self.log_joint(0, row))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learners::{fit, param_map, ClassifierKind, ClassifierSpec, ModelState, ParamValue};

    #[test]
    fn two_cluster_means() {
        let x = vec![vec![0.0], vec![0.0], vec![1.0], vec![1.0]];
        let y = vec![Label::Below, Label::Below, Label::Above, Label::Above];
        let m = fit(&ClassifierSpec::new(ClassifierKind::GaussianNb), &x, &y, None).unwrap();
        let ModelState::GaussianNb(nb) = &m.state else { unreachable!() };
        assert_eq!(nb.means[0], vec![0.0]);
        assert_eq!(nb.means[1], vec![1.0]);
        assert_eq!(nb.priors, [0.5, 0.5]);
    }

    #[test]
    fn midpoint_of_symmetric_classes_is_half() {
        let x = vec![vec![-2.0], vec![0.0], vec![2.0], vec![4.0]];
        let y = vec![Label::Below, Label::Below, Label::Above, Label::Above];
        let m = fit(&ClassifierSpec::new(ClassifierKind::GaussianNb), &x, &y, None).unwrap();
        assert!((m.decision_score(&[vec![1.0]]).unwrap()[0] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn negative_smoothing_rejected() {
        let p = param_map([("var_smoothing", ParamValue::Float(-1.0))]);
        assert!(NbParams::from_map(&p).is_err());
    }
}
