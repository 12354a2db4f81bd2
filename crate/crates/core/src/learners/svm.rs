//! C-SVM trained by sequential minimal optimization.
//!
//! The dual `min 1/2 a'Qa - e'a, 0 <= a_i <= C_i, y'a = 0` is solved two
//! variables at a time, picking the pair by maximal violation and second
//! order gain. Per-sample bounds are `C * w_i`, which is how class and sample
//! weights enter.

use alloc::string::ToString;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::kernel::{Gamma, Kernel, KernelFn};
use super::params::{check_keys, f64_or, positive, usize_or};
use super::{ParamMap, ParamValue};
use crate::aggregate::Label;
use crate::error::{Error, Result};
use crate::float::sigmoid;

const TAU: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmParams {
    pub kernel: Kernel,
    pub c: f64,
    pub gamma: Gamma,
    pub degree: u32,
    pub coef0: f64,
    pub tol: f64,
}

impl SvmParams {
    pub fn from_map(map: &ParamMap) -> Result<SvmParams> {
        check_keys(map, &["kernel", "C", "gamma", "degree", "coef0", "tol"])?;
        let kernel = Kernel::parse(super::params::str_or(map, "kernel", "rbf")?)?;
        let gamma = match map.get("gamma") {
            None => Gamma::Scale,
            Some(ParamValue::Str(s)) if s == "auto" => Gamma::Auto,
            Some(ParamValue::Str(s)) if s == "scale" => Gamma::Scale,
            Some(v) => match v.as_f64() {
                Some(g) if g > 0.0 => Gamma::Value(g),
                _ => {
                    return Err(Error::InvalidParam {
                        name: "gamma".to_string(),
                        reason: alloc::format!("expected auto, scale or a positive number, got {v}"),
                    })
                }
            },
        };
        Ok(SvmParams {
            kernel,
            c: positive("C", f64_or(map, "C", 1.0)?)?,
            gamma,
            degree: usize_or(map, "degree", 3)? as u32,
            coef0: f64_or(map, "coef0", 0.0)?,
            tol: positive("tol", f64_or(map, "tol", 1e-3)?)?,
        })
    }
}

/// Fitted SVM. `decision(x) = sum_s dual_coef[s] K(sv_s, x) + intercept`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmModel {
    pub kernel: KernelFn,
    /// Indices of the support vectors in the training set.
    pub support_indices: Vec<usize>,
    /// `alpha_i * y_i` for each support vector.
    pub dual_coef: Vec<f64>,
    pub support_vectors: Vec<Vec<f64>>,
    pub intercept: f64,
    pub iterations: usize,
}

/// Dual solution: multipliers, offset `rho` (decision uses `-rho`), and the
/// number of SMO iterations spent.
pub(crate) struct DualSolution {
    pub alpha: Vec<f64>,
    pub rho: f64,
    pub iterations: usize,
}

/// Solve the C-SVM dual for kernel matrix `k`, labels `y` in {-1, +1} and
/// per-sample upper bounds `c`.
pub(crate) fn solve_dual(k: &[Vec<f64>], y: &[f64], c: &[f64], eps: f64, max_iter: usize) -> Result<DualSolution> {
    let n = y.len();
    let mut alpha = vec![0.0; n];
    let mut grad = vec![-1.0; n];
    let qd: Vec<f64> = (0..n).map(|i| k[i][i]).collect();
    let q = |i: usize, j: usize| y[i] * y[j] * k[i][j];
    let at_upper = |a: &[f64], i: usize| a[i] >= c[i];
    let at_lower = |a: &[f64], i: usize| a[i] <= 0.0;

    let mut iter = 0;
    loop {
        // i maximizes -y_i grad_i over I_up
        let mut gmax = f64::NEG_INFINITY;
        let mut i_sel = None;
        for t in 0..n {
            if y[t] > 0.0 {
                if !at_upper(&alpha, t) && -grad[t] >= gmax {
                    gmax = -grad[t];
                    i_sel = Some(t);
                }
            } else if !at_lower(&alpha, t) && grad[t] >= gmax {
                gmax = grad[t];
                i_sel = Some(t);
            }
        }
        let mut gmax2 = f64::NEG_INFINITY;
        let mut j_sel = None;
        let mut obj_min = f64::INFINITY;
        if let Some(i) = i_sel {
            for t in 0..n {
                if y[t] > 0.0 {
                    if !at_lower(&alpha, t) {
                        let diff = gmax + grad[t];
                        if grad[t] >= gmax2 {
                            gmax2 = grad[t];
                        }
                        if diff > 0.0 {
                            let quad = qd[i] + qd[t] - 2.0 * y[i] * q(i, t);
                            let obj = -(diff * diff) / if quad > 0.0 { quad } else { TAU };
                            if obj <= obj_min {
                                j_sel = Some(t);
                                obj_min = obj;
                            }
                        }
                    }
                } else if !at_upper(&alpha, t) {
                    let diff = gmax - grad[t];
                    if -grad[t] >= gmax2 {
                        gmax2 = -grad[t];
                    }
                    if diff > 0.0 {
                        let quad = qd[i] + qd[t] + 2.0 * y[i] * q(i, t);
                        let obj = -(diff * diff) / if quad > 0.0 { quad } else { TAU };
                        if obj <= obj_min {
                            j_sel = Some(t);
                            obj_min = obj;
                        }
                    }
                }
            }
        }
        let (Some(i), Some(j)) = (i_sel, j_sel) else {
            break;
        };
        if gmax + gmax2 < eps {
            break;
        }
        if iter >= max_iter {
            return Err(Error::Convergence(max_iter));
        }
        iter += 1;

        let (old_i, old_j) = (alpha[i], alpha[j]);
        let (ci, cj) = (c[i], c[j]);
        let qij = q(i, j);
        if y[i] != y[j] {
            let mut quad = qd[i] + qd[j] + 2.0 * qij;
            if quad <= 0.0 {
                quad = TAU;
            }
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > ci - cj {
                if alpha[i] > ci {
                    alpha[i] = ci;
                    alpha[j] = ci - diff;
                }
            } else if alpha[j] > cj {
                alpha[j] = cj;
                alpha[i] = cj + diff;
            }
        } else {
            let mut quad = qd[i] + qd[j] - 2.0 * qij;
            if quad <= 0.0 {
                quad = TAU;
            }
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > ci {
                if alpha[i] > ci {
                    alpha[i] = ci;
                    alpha[j] = sum - ci;
                }
            } else if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > cj {
                if alpha[j] > cj {
                    alpha[j] = cj;
                    alpha[i] = sum - cj;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }
        let (di, dj) = (alpha[i] - old_i, alpha[j] - old_j);
        for t in 0..n {
            grad[t] += q(i, t) * di + q(j, t) * dj;
        }
    }

    // offset: average over free vectors, else midpoint of the feasible range
    let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut n_free, mut sum_free) = (0usize, 0.0);
    for t in 0..n {
        let yg = y[t] * grad[t];
        if at_upper(&alpha, t) && !at_lower(&alpha, t) {
            if y[t] < 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if at_lower(&alpha, t) {
            if y[t] > 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            n_free += 1;
            sum_free += yg;
        }
    }
    let rho = if n_free > 0 {
        sum_free / n_free as f64
    } else if ub.is_finite() && lb.is_finite() {
        (ub + lb) / 2.0
    } else if ub.is_finite() {
        ub
    } else if lb.is_finite() {
        lb
    } else {
        0.0
    };
    Ok(DualSolution {
        alpha,
        rho,
        iterations: iter,
    })
}

impl SvmModel {
    pub fn fit(x: &[Vec<f64>], y: &[Label], w: &[f64], params: &SvmParams) -> Result<SvmModel> {
        let n = x.len();
        let kernel = KernelFn {
            kernel: params.kernel,
            gamma: params.gamma.resolve(x),
            coef0: params.coef0,
            degree: params.degree,
        };
        let k: Vec<Vec<f64>> = (0..n)
            .map(|i| (0..n).map(|j| kernel.eval(&x[i], &x[j])).collect())
            .collect();
        let ys: Vec<f64> = y.iter().map(|l| if l.is_positive() { 1.0 } else { -1.0 }).collect();
        let c: Vec<f64> = w.iter().map(|wi| params.c * wi).collect();
        let sol = solve_dual(&k, &ys, &c, params.tol, 10 * n * n)?;
        let support_indices: Vec<usize> = (0..n).filter(|&i| sol.alpha[i] > 0.0).collect();
        Ok(SvmModel {
            kernel,
            dual_coef: support_indices.iter().map(|&i| sol.alpha[i] * ys[i]).collect(),
            support_vectors: support_indices.iter().map(|&i| x[i].clone()).collect(),
            support_indices,
            intercept: -sol.rho,
            iterations: sol.iterations,
        })
    }

    /// Signed margin.
    pub fn decision(&self, row: &[f64]) -> f64 {
        self.support_vectors
            .iter()
            .zip(&self.dual_coef)
            .map(|(sv, a)| a * self.kernel.eval(sv, row))
            .sum::<f64>()
            + self.intercept
    }

    /// Logistic squashing of the margin with unit slope.
    pub fn score(&self, row: &[f64]) -> f64 {
        sigmoid(self.decision(row))
    }
}
