use alloc::vec::Vec;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use serde::{Deserialize, Serialize};

use super::params::{at_least, bool_or, check_keys, usize_or};
use super::tree::{grow_classifier, MaxFeatures, Node, TreeParams, TREE_KEYS};
use super::ParamMap;
use crate::aggregate::Label;
use crate::error::Result;
use crate::rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestParams {
    pub n_estimators: usize,
    pub bootstrap: bool,
    pub tree: TreeParams,
}

pub(crate) const FOREST_KEYS: &[&str] = &["bootstrap", "n_estimators"];

impl ForestParams {
    pub fn from_map(map: &ParamMap) -> Result<ForestParams> {
        let allowed: Vec<&str> = TREE_KEYS.iter().chain(FOREST_KEYS).copied().collect();
        check_keys(map, &allowed)?;
        Self::read(map)
    }

    pub(crate) fn read(map: &ParamMap) -> Result<ForestParams> {
        Ok(ForestParams {
            n_estimators: at_least("n_estimators", usize_or(map, "n_estimators", 100)?, 1)?,
            bootstrap: bool_or(map, "bootstrap", true)?,
            tree: TreeParams::read(map, MaxFeatures::Sqrt)?,
        })
    }
}

/// Bagged CART trees with per-split feature subsampling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomForest {
    pub trees: Vec<Node>,
}

impl RandomForest {
    /// Tree `t` draws from its own stream `(seed, t)`. With bootstrap each
    /// tree makes `n` draws with probability proportional to weight, and
    /// every draw carries weight `sum(w) / n`.
    pub fn fit(x: &[Vec<f64>], y: &[Label], w: &[f64], params: &ForestParams, seed: u64) -> RandomForest {
        let n = x.len();
        let total: f64 = w.iter().sum();
        let sampler = WeightedIndex::new(w).ok();
        let trees = (0..params.n_estimators)
            .map(|t| {
                let mut rng = rng::stream(seed, &[t as u64]);
                let tree_w: Vec<f64> = match (&sampler, params.bootstrap) {
                    (Some(sampler), true) => {
                        let mut counts = alloc::vec![0u32; n];
                        for _ in 0..n {
                            counts[sampler.sample(&mut rng)] += 1;
                        }
                        counts.iter().map(|c| *c as f64 * total / n as f64).collect()
                    }
                    _ => w.to_vec(),
                };
                let mut idx: Vec<usize> = (0..n).filter(|&i| tree_w[i] > 0.0).collect();
                grow_classifier(x, y, &tree_w, &mut idx, &params.tree, &mut rng)
            })
            .collect();
        RandomForest { trees }
    }

    /// Mean class-1 leaf fraction over trees.
    pub fn score(&self, row: &[f64]) -> f64 {
        self.trees.iter().map(|t| t.eval(row)).sum::<f64>() / self.trees.len() as f64
    }
}
