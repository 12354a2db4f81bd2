use alloc::string::ToString;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::float::exp;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kernel {
    Linear,
    Poly,
    Rbf,
    Sigmoid,
}

impl Kernel {
    pub fn parse(s: &str) -> Result<Kernel> {
        match s {
            "linear" => Ok(Kernel::Linear),
            "poly" => Ok(Kernel::Poly),
            "rbf" => Ok(Kernel::Rbf),
            "sigmoid" => Ok(Kernel::Sigmoid),
            other => Err(Error::InvalidParam {
                name: "kernel".to_string(),
                reason: alloc::format!("unknown kernel {other}"),
            }),
        }
    }
}

/// Kernel width before it is resolved against training data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Gamma {
    /// `1 / d`
    Auto,
    /// `1 / (d * mean per-feature variance)`
    Scale,
    Value(f64),
}

impl Gamma {
    pub fn resolve(self, x: &[Vec<f64>]) -> f64 {
        let d = x.first().map_or(1, |r| r.len()).max(1) as f64;
        match self {
            Gamma::Auto => 1.0 / d,
            Gamma::Value(g) => g,
            Gamma::Scale => {
                let n = x.len() as f64;
                let dims = x[0].len();
                let mut var_sum = 0.0;
                for k in 0..dims {
                    let mean = x.iter().map(|r| r[k]).sum::<f64>() / n;
                    var_sum += x.iter().map(|r| (r[k] - mean) * (r[k] - mean)).sum::<f64>() / n;
                }
                let var = var_sum / d;
                if var > 0.0 {
                    1.0 / (d * var)
                } else {
                    1.0
                }
            }
        }
    }
}

fn check(a: &[f64], b: &[f64]) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            found: b.len(),
        });
    }
    Ok(())
}

#[inline]
pub(crate) fn dot_unchecked(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub(crate) fn sq_dist_unchecked(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

pub fn linear_kernel(a: &[f64], b: &[f64]) -> Result<f64> {
    check(a, b)?;
    Ok(dot_unchecked(a, b))
}

pub fn rbf_kernel(a: &[f64], b: &[f64], gamma: f64) -> Result<f64> {
    check(a, b)?;
    Ok(exp(-gamma * sq_dist_unchecked(a, b)))
}

pub fn poly_kernel(a: &[f64], b: &[f64], gamma: f64, coef0: f64, degree: u32) -> Result<f64> {
    check(a, b)?;
    Ok(libm::pow(gamma * dot_unchecked(a, b) + coef0, degree as f64))
}

pub fn sigmoid_kernel(a: &[f64], b: &[f64], gamma: f64, coef0: f64) -> Result<f64> {
    check(a, b)?;
    Ok(libm::tanh(gamma * dot_unchecked(a, b) + coef0))
}

/// A kernel with its parameters resolved.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelFn {
    pub kernel: Kernel,
    pub gamma: f64,
    pub coef0: f64,
    pub degree: u32,
}

impl KernelFn {
    #[inline]
    pub fn eval(&self, a: &[f64], b: &[f64]) -> f64 {
        match self.kernel {
            Kernel::Linear => dot_unchecked(a, b),
            Kernel::Rbf => exp(-self.gamma * sq_dist_unchecked(a, b)),
            Kernel::Poly => libm::pow(self.gamma * dot_unchecked(a, b) + self.coef0, self.degree as f64),
            Kernel::Sigmoid => libm::tanh(self.gamma * dot_unchecked(a, b) + self.coef0),
        }
    }
}
