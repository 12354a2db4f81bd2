//! Leave-one-out evaluation, repeated-run averaging and classification
//! metrics. The positive class is [`Label::Above`].

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::aggregate::{AggregatedSample, Label, Standardizer};
use crate::error::{Error, Result};
use crate::exec::Executor;
use crate::learners::{fit, ClassifierSpec};
use crate::record::{StudentId, TrialId};
use crate::rng;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        f64::NAN
    } else {
        num as f64 / den as f64
    }
}

impl ConfusionMatrix {
    pub fn new(tp: u64, fp: u64, tn: u64, fn_: u64) -> Self {
        ConfusionMatrix { tp, fp, tn, fn_ }
    }

    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.tn + self.fn_
    }

    pub fn positives(&self) -> u64 {
        self.tp + self.fn_
    }

    pub fn negatives(&self) -> u64 {
        self.tn + self.fp
    }

    /// `tp / (tp + fn)`; NaN without positives.
    pub fn sensitivity(&self) -> f64 {
        ratio(self.tp, self.positives())
    }

    /// `tn / (tn + fp)`; NaN without negatives.
    pub fn specificity(&self) -> f64 {
        ratio(self.tn, self.negatives())
    }

    pub fn accuracy(&self) -> f64 {
        ratio(self.tp + self.tn, self.total())
    }

    pub fn record(&mut self, truth: Label, predicted: Label) {
        match (truth.is_positive(), predicted.is_positive()) {
            (true, true) => self.tp += 1,
            (false, true) => self.fp += 1,
            (false, false) => self.tn += 1,
            (true, false) => self.fn_ += 1,
        }
    }
}

pub fn confusion(y_true: &[Label], y_pred: &[Label]) -> Result<ConfusionMatrix> {
    if y_true.len() != y_pred.len() {
        return Err(Error::LengthMismatch {
            left: y_true.len(),
            right: y_pred.len(),
        });
    }
    let mut m = ConfusionMatrix::default();
    for (t, p) in y_true.iter().zip(y_pred) {
        m.record(*t, *p);
    }
    Ok(m)
}

/// A confusion matrix with its derived rates. Undefined rates serialize as
/// `null`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub confusion: ConfusionMatrix,
    pub sensitivity: Option<f64>,
    pub specificity: Option<f64>,
    pub accuracy: Option<f64>,
}

fn defined(v: f64) -> Option<f64> {
    if v.is_nan() {
        None
    } else {
        Some(v)
    }
}

impl From<ConfusionMatrix> for RunMetrics {
    fn from(m: ConfusionMatrix) -> Self {
        RunMetrics {
            confusion: m,
            sensitivity: defined(m.sensitivity()),
            specificity: defined(m.specificity()),
            accuracy: defined(m.accuracy()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanMetrics {
    pub sensitivity: Option<f64>,
    pub specificity: Option<f64>,
    pub accuracy: Option<f64>,
}

impl MeanMetrics {
    /// Arithmetic means over runs. A rate undefined in any run is undefined
    /// in the mean; a rate equal in every run is returned as is.
    pub fn of(runs: &[RunMetrics]) -> MeanMetrics {
        let avg = |f: fn(&RunMetrics) -> Option<f64>| -> Option<f64> {
            if runs.is_empty() {
                return None;
            }
            let first = f(&runs[0])?;
            let mut sum = 0.0;
            let mut constant = true;
            for r in runs {
                let v = f(r)?;
                constant &= v == first;
                sum += v;
            }
            Some(if constant { first } else { sum / runs.len() as f64 })
        };
        MeanMetrics {
            sensitivity: avg(|r| r.sensitivity),
            specificity: avg(|r| r.specificity),
            accuracy: avg(|r| r.accuracy),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub fpr: f64,
    pub tpr: f64,
}

fn class_totals(y: &[Label]) -> Result<(f64, f64)> {
    let pos = y.iter().filter(|l| l.is_positive()).count();
    let neg = y.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::SingleClass);
    }
    Ok((pos as f64, neg as f64))
}

/// ROC points from sweeping a threshold down through the distinct scores,
/// starting at `(0, 0)` and ending at `(1, 1)`. Tied scores move both rates
/// at once, and the trapezoid area counts such ties as one half.
pub fn roc_auc(scores: &[f64], y: &[Label]) -> Result<(Vec<RocPoint>, f64)> {
    if scores.len() != y.len() {
        return Err(Error::LengthMismatch {
            left: scores.len(),
            right: y.len(),
        });
    }
    let (p, n) = class_totals(y)?;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut points = vec![RocPoint { fpr: 0.0, tpr: 0.0 }];
    let (mut tp, mut fp) = (0u64, 0u64);
    let mut area = 0.0;
    let mut k = 0;
    while k < order.len() {
        let s = scores[order[k]];
        while k < order.len() && scores[order[k]] == s {
            if y[order[k]].is_positive() {
                tp += 1;
            } else {
                fp += 1;
            }
            k += 1;
        }
        let prev = *points.last().unwrap();
        let next = RocPoint {
            fpr: fp as f64 / n,
            tpr: tp as f64 / p,
        };
        area += (next.fpr - prev.fpr) * (next.tpr + prev.tpr) / 2.0;
        points.push(next);
    }
    Ok((points, area))
}

/// Mann-Whitney AUC from mid-ranks: the probability that a random positive
/// outscores a random negative, ties counting one half.
pub fn rank_auc(scores: &[f64], y: &[Label]) -> Result<f64> {
    if scores.len() != y.len() {
        return Err(Error::LengthMismatch {
            left: scores.len(),
            right: y.len(),
        });
    }
    let (p, n) = class_totals(y)?;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut rank_sum = 0.0;
    let mut k = 0;
    while k < order.len() {
        let mut end = k;
        while end < order.len() && scores[order[end]] == scores[order[k]] {
            end += 1;
        }
        // ranks k+1..=end share their mean
        let mid = (k + 1 + end) as f64 / 2.0;
        rank_sum += mid * order[k..end].iter().filter(|&&i| y[i].is_positive()).count() as f64;
        k = end;
    }
    Ok((rank_sum - p * (p + 1.0) / 2.0) / (p * n))
}

/// Which scores feed the ROC curve when several runs were made.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum RocSource {
    #[default]
    LastRun,
    MeanScore,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalOptions {
    pub n_runs: usize,
    /// z-score features with statistics of the training part of each fold.
    pub standardize: bool,
    pub roc_source: RocSource,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions {
            n_runs: 10,
            standardize: false,
            roc_source: RocSource::LastRun,
        }
    }
}

impl EvalOptions {
    pub fn runs(n_runs: usize) -> Self {
        EvalOptions {
            n_runs,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub student_id: StudentId,
    pub trial_id: TrialId,
    pub window_index: u32,
    #[serde(rename = "true")]
    pub truth: Label,
    pub predicted: Label,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub spec: ClassifierSpec,
    pub options: EvalOptions,
    pub n_samples: usize,
    pub per_run: Vec<RunMetrics>,
    pub mean_metrics: MeanMetrics,
    pub roc_points: Vec<RocPoint>,
    /// `None` when the evaluated samples hold a single class.
    pub auc: Option<f64>,
    /// Per-sample outcome of the last run.
    pub predictions: Vec<Prediction>,
    pub warnings: Vec<String>,
}

impl EvalReport {
    pub fn accuracy(&self) -> f64 {
        self.mean_metrics.accuracy.unwrap_or(f64::NAN)
    }
}

fn features(samples: &[AggregatedSample]) -> Vec<Vec<f64>> {
    samples.iter().map(|s| s.features.to_vec()).collect()
}

fn labels(samples: &[AggregatedSample]) -> Vec<Label> {
    samples.iter().map(|s| s.label).collect()
}

fn run_spec(spec: &ClassifierSpec, run: usize) -> ClassifierSpec {
    let mut s = spec.clone();
    s.seed = rng::derive(spec.seed, &[run as u64]);
    s
}

/// Fit on `train` rows and score `test` rows, optionally z-scoring with
/// training statistics.
fn fit_score(
    spec: &ClassifierSpec,
    train_x: &[Vec<f64>],
    train_y: &[Label],
    test_x: &[Vec<f64>],
    standardize: bool,
) -> Result<Vec<f64>> {
    if standardize {
        let z = Standardizer::fit(train_x);
        let tx: Vec<Vec<f64>> = train_x.iter().map(|r| z.apply(r)).collect();
        let ex: Vec<Vec<f64>> = test_x.iter().map(|r| z.apply(r)).collect();
        fit(spec, &tx, train_y, None)?.decision_score(&ex)
    } else {
        fit(spec, train_x, train_y, None)?.decision_score(test_x)
    }
}

fn assemble(
    spec: &ClassifierSpec,
    options: EvalOptions,
    test: &[AggregatedSample],
    run_scores: Vec<Vec<f64>>,
    replicated: bool,
    mut warnings: Vec<String>,
) -> EvalReport {
    let y = labels(test);
    let per_computed: Vec<RunMetrics> = run_scores
        .iter()
        .map(|scores| {
            let mut m = ConfusionMatrix::default();
            for (s, t) in scores.iter().zip(&y) {
                m.record(*t, Label::from_bool(*s >= 0.5));
            }
            RunMetrics::from(m)
        })
        .collect();
    let per_run = if replicated {
        vec![per_computed[0]; options.n_runs]
    } else {
        per_computed
    };
    let last = run_scores.last().expect("at least one run");
    let roc_scores: Vec<f64> = match options.roc_source {
        RocSource::LastRun => last.clone(),
        RocSource::MeanScore => (0..y.len())
            .map(|i| run_scores.iter().map(|r| r[i]).sum::<f64>() / run_scores.len() as f64)
            .collect(),
    };
    let (roc_points, auc) = match roc_auc(&roc_scores, &y) {
        Ok((pts, a)) => (pts, Some(a)),
        Err(_) => {
            warnings.push("ROC undefined: evaluated samples hold a single class".into());
            (Vec::new(), None)
        }
    };
    let predictions = test
        .iter()
        .zip(last)
        .map(|(s, score)| Prediction {
            student_id: s.student_id.clone(),
            trial_id: s.trial_id.clone(),
            window_index: s.window_index,
            truth: s.label,
            predicted: Label::from_bool(*score >= 0.5),
            score: *score,
        })
        .collect();
    EvalReport {
        spec: spec.clone(),
        options,
        n_samples: test.len(),
        mean_metrics: MeanMetrics::of(&per_run),
        per_run,
        roc_points,
        auc,
        predictions,
        warnings,
    }
}

fn check_runs(options: &EvalOptions) -> Result<()> {
    if options.n_runs == 0 {
        return Err(Error::InvalidParam {
            name: "n_runs".into(),
            reason: "must be at least 1".into(),
        });
    }
    Ok(())
}

/// Leave-one-out evaluation repeated `options.n_runs` times. Run `r` fits
/// every fold with seed `derive(spec.seed, [r])`. Classifiers that consume no
/// randomness are computed once and the run replicated.
pub fn loocv<E: Executor>(
    samples: &[AggregatedSample],
    spec: &ClassifierSpec,
    options: EvalOptions,
    exec: &E,
) -> Result<EvalReport> {
    let (run_scores, replicated) = loocv_scores(samples, spec, options, exec)?;
    Ok(assemble(spec, options, samples, run_scores, replicated, Vec::new()))
}

/// Per-run leave-one-out scores, and whether a single computed run stands in
/// for all of them.
pub(crate) fn loocv_scores<E: Executor>(
    samples: &[AggregatedSample],
    spec: &ClassifierSpec,
    options: EvalOptions,
    exec: &E,
) -> Result<(Vec<Vec<f64>>, bool)> {
    check_runs(&options)?;
    spec.validate()?;
    let n = samples.len();
    if n < 3 {
        return Err(Error::TooFewSamples { needed: 3, found: n });
    }
    let x = features(samples);
    let y = labels(samples);
    class_totals(&y)?;
    let replicated = !spec.kind.is_randomized(&spec.params);
    let computed = if replicated { 1 } else { options.n_runs };
    let specs: Vec<ClassifierSpec> = (0..computed).map(|r| run_spec(spec, r)).collect();
    let flat = exec.map(computed * n, |k| {
        let (r, i) = (k / n, k % n);
        let mut tx = Vec::with_capacity(n - 1);
        let mut ty = Vec::with_capacity(n - 1);
        for j in (0..n).filter(|&j| j != i) {
            tx.push(x[j].clone());
            ty.push(y[j]);
        }
        fit_score(&specs[r], &tx, &ty, core::slice::from_ref(&x[i]), options.standardize)
            .map(|s| s[0])
            .map_err(|e| e.in_fold(i))
    });
    let mut run_scores = vec![Vec::with_capacity(n); computed];
    for (k, s) in flat.into_iter().enumerate() {
        run_scores[k / n].push(s?);
    }
    Ok((run_scores, replicated))
}

/// Train on one sample set and test on another, once per run.
pub fn cross_eval<E: Executor>(
    train: &[AggregatedSample],
    test: &[AggregatedSample],
    spec: &ClassifierSpec,
    options: EvalOptions,
    exec: &E,
) -> Result<EvalReport> {
    check_runs(&options)?;
    spec.validate()?;
    if test.is_empty() {
        return Err(Error::EmptyTestSet);
    }
    let mut warnings = Vec::new();
    if train == test {
        warnings.push("training and test samples are identical".into());
    } else if train.iter().any(|a| test.iter().any(|b| a.trial_id == b.trial_id)) {
        warnings.push(format!("training and test sets share a trial"));
    }
    let tx = features(train);
    let ty = labels(train);
    let ex = features(test);
    let replicated = !spec.kind.is_randomized(&spec.params);
    let computed = if replicated { 1 } else { options.n_runs };
    let run_scores = exec
        .map(computed, |r| fit_score(&run_spec(spec, r), &tx, &ty, &ex, options.standardize))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    Ok(assemble(spec, options, test, run_scores, replicated, warnings))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labels_of(bits: &[u8]) -> Vec<Label> {
        bits.iter().map(|b| Label::from_bool(*b == 1)).collect()
    }

    #[test]
    fn hand_counted_confusion() {
        let m = confusion(&labels_of(&[1, 0, 1, 0]), &labels_of(&[1, 1, 0, 0])).unwrap();
        assert_eq!(m, ConfusionMatrix::new(1, 1, 1, 1));
    }

    #[test]
    fn all_positive_predictions() {
        let m = confusion(&labels_of(&[1, 0, 1, 0]), &labels_of(&[1, 1, 1, 1])).unwrap();
        assert_eq!(m.sensitivity(), 1.0);
        assert_eq!(m.specificity(), 0.0);
    }

    #[test]
    fn length_mismatch() {
        assert!(matches!(confusion(&labels_of(&[1]), &[]), Err(Error::LengthMismatch { .. })));
    }

    #[test]
    fn roc_examples() {
        let y = labels_of(&[1, 0, 1, 0]);
        let (_, a) = roc_auc(&[0.9, 0.8, 0.4, 0.3], &y).unwrap();
        assert!((a - 0.75).abs() < 1e-12);
        let (_, a) = roc_auc(&[0.9, 0.1, 0.8, 0.2], &y).unwrap();
        assert_eq!(a, 1.0);
        let (pts, a) = roc_auc(&[0.5; 4], &y).unwrap();
        assert_eq!(a, 0.5);
        assert_eq!(pts.len(), 2);
        assert_eq!(rank_auc(&[0.5; 4], &y).unwrap(), 0.5);
        assert!(matches!(roc_auc(&[0.1, 0.2], &labels_of(&[1, 1])), Err(Error::SingleClass)));
    }
}
