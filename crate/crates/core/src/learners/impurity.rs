use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::float::ln;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Criterion {
    Gini,
    Entropy,
}

impl Criterion {
    /// Impurity of weighted class counts; the caller guarantees a positive
    /// total.
    #[inline]
    pub(crate) fn of(self, counts: &[f64]) -> f64 {
        let total: f64 = counts.iter().sum();
        match self {
            Criterion::Gini => 1.0 - counts.iter().map(|c| (c / total) * (c / total)).sum::<f64>(),
            Criterion::Entropy => -counts
                .iter()
                .filter(|c| **c > 0.0)
                .map(|c| {
                    let p = c / total;
                    p * ln(p) / core::f64::consts::LN_2
                })
                .sum::<f64>(),
        }
    }
}

fn checked(counts: &[f64]) -> Result<()> {
    let total: f64 = counts.iter().sum();
    if counts.iter().any(|c| *c < 0.0) || !(total > 0.0) {
        return Err(Error::EmptyNode);
    }
    Ok(())
}

/// Gini impurity `1 - sum p_i^2`.
pub fn gini(counts: &[f64]) -> Result<f64> {
    checked(counts)?;
    Ok(Criterion::Gini.of(counts))
}

/// Shannon entropy in bits, with `0 log 0 = 0`.
pub fn entropy(counts: &[f64]) -> Result<f64> {
    checked(counts)?;
    Ok(Criterion::Entropy.of(counts))
}
