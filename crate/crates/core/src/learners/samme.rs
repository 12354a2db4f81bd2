//! Binary AdaBoost-SAMME with a random-forest base learner.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::forest::{ForestParams, RandomForest, FOREST_KEYS};
use super::params::{at_least, check_keys, usize_or};
use super::tree::TREE_KEYS;
use super::ParamMap;
use crate::aggregate::Label;
use crate::error::{Error, Result};
use crate::float::{exp, ln};
use crate::rng;

/// Stage weight given to a base learner with zero training error.
pub const MAX_ALPHA: f64 = 23.025_850_929_940_457; // ln(1e10)

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SammeParams {
    /// Number of boosting stages attempted.
    pub boost_rounds: usize,
    pub base: ForestParams,
}

impl SammeParams {
    pub fn from_map(map: &ParamMap) -> Result<SammeParams> {
        let allowed: Vec<&str> = TREE_KEYS
            .iter()
            .chain(FOREST_KEYS)
            .chain(&["boost_rounds"])
            .copied()
            .collect();
        check_keys(map, &allowed)?;
        Ok(SammeParams {
            boost_rounds: at_least("boost_rounds", usize_or(map, "boost_rounds", 10)?, 1)?,
            base: ForestParams::read(map)?,
        })
    }
}

/// One SAMME reweighting step for `K` classes.
///
/// `miss[i]` marks samples the stage misclassified. Returns the stage weight
/// `ln((1-err)/err) + ln(K-1)` and the updated weights, normalized to the
/// same total as `w`. An error rate of exactly `1 - 1/K` yields a zero stage
/// weight; zero error or anything worse than chance is a
/// [`Error::DegenerateStage`].
pub fn samme_stage(miss: &[bool], w: &[f64], k: usize) -> Result<(f64, Vec<f64>)> {
    if miss.len() != w.len() {
        return Err(Error::LengthMismatch {
            left: miss.len(),
            right: w.len(),
        });
    }
    if k < 2 {
        return Err(Error::InvalidParam {
            name: "K".into(),
            reason: "need at least two classes".into(),
        });
    }
    let total: f64 = w.iter().sum();
    if !(total > 0.0) || w.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(Error::InvalidWeights("stage weights must be non-negative with a positive sum".into()));
    }
    let err = miss.iter().zip(w).filter(|(m, _)| **m).map(|(_, v)| v).sum::<f64>() / total;
    let chance = 1.0 - 1.0 / k as f64;
    if err <= 0.0 || err > chance {
        return Err(Error::DegenerateStage(err));
    }
    let alpha = if err == chance {
        0.0
    } else {
        ln((1.0 - err) / err) + ln((k - 1) as f64)
    };
    let boost = exp(alpha);
    let mut next: Vec<f64> = w.iter().zip(miss).map(|(v, m)| if *m { v * boost } else { *v }).collect();
    let new_total: f64 = next.iter().sum();
    next.iter_mut().for_each(|v| *v *= total / new_total);
    Ok((alpha, next))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SammeStage {
    pub alpha: f64,
    pub forest: RandomForest,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SammeModel {
    pub stages: Vec<SammeStage>,
    /// Weighted class-1 share, used when no stage survived.
    pub prior: f64,
    /// Weighted training error of every attempted stage, kept or not.
    pub stage_errors: Vec<f64>,
}

impl SammeModel {
    /// Stage `t` grows its forest from seed `(seed, t)`. A stage no better
    /// than chance is dropped and the weights return to their initial
    /// values; a perfect stage is kept with [`MAX_ALPHA`] and ends boosting.
    pub fn fit(x: &[Vec<f64>], y: &[Label], w: &[f64], params: &SammeParams, seed: u64) -> SammeModel {
        let total: f64 = w.iter().sum();
        let prior = w.iter().zip(y).filter(|(_, l)| l.is_positive()).map(|(v, _)| v).sum::<f64>() / total;
        let mut weights = w.to_vec();
        let mut stages = Vec::new();
        let mut stage_errors = Vec::new();
        for t in 0..params.boost_rounds {
            let forest = RandomForest::fit(x, y, &weights, &params.base, rng::derive(seed, &[t as u64]));
            let miss: Vec<bool> = x
                .iter()
                .zip(y)
                .map(|(r, l)| (forest.score(r) >= 0.5) != l.is_positive())
                .collect();
            let sum: f64 = weights.iter().sum();
            let err = miss.iter().zip(&weights).filter(|(m, _)| **m).map(|(_, v)| v).sum::<f64>() / sum;
            stage_errors.push(err);
            if err <= 0.0 {
                stages.push(SammeStage {
                    alpha: MAX_ALPHA,
                    forest,
                });
                break;
            }
            match samme_stage(&miss, &weights, 2) {
                Ok((alpha, next)) if alpha > 0.0 => {
                    stages.push(SammeStage { alpha, forest });
                    weights = next;
                }
                _ => weights = w.to_vec(),
            }
        }
        SammeModel {
            stages,
            prior,
            stage_errors,
        }
    }

    /// Stage-weight share of class-1 votes.
    pub fn score(&self, row: &[f64]) -> f64 {
        let total: f64 = self.stages.iter().map(|s| s.alpha).sum();
        if self.stages.is_empty() || !(total > 0.0) {
            return self.prior;
        }
        self.stages
            .iter()
            .filter(|s| s.forest.score(row) >= 0.5)
            .map(|s| s.alpha)
            .sum::<f64>()
            / total
    }
}
