//! Decision-level fusion: every prediction of a student is replaced by the
//! median of all that student's predictions.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::aggregate::{AggregatedSample, Label};
use crate::error::{Error, Result};
use crate::evaluate::{confusion, loocv_scores, ConfusionMatrix, EvalOptions, MeanMetrics, RunMetrics};
use crate::exec::Executor;
use crate::learners::ClassifierSpec;
use crate::record::{StudentId, TrialId};

/// How a median of exactly 0.5 resolves.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TieRule {
    /// `median >= 0.5` votes Above.
    #[default]
    Ge,
    /// `median > 0.5` votes Above.
    Gt,
}

impl TieRule {
    pub fn decide(self, median: f64) -> Label {
        Label::from_bool(match self {
            TieRule::Ge => median >= 0.5,
            TieRule::Gt => median > 0.5,
        })
    }
}

/// Median of a multiset of 0/1 values; mean of the two middle values for an
/// even count.
pub fn binary_median(values: &[Label]) -> f64 {
    let mut v: Vec<f64> = values.iter().map(|l| l.index() as f64).collect();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

/// Replace each prediction by the median of its group's predictions. The
/// medians are computed from the input, and the result is a new vector.
pub fn median_vote<K: Ord>(predictions: &[Label], groups: &[K], rule: TieRule) -> Result<Vec<Label>> {
    if predictions.len() != groups.len() {
        return Err(Error::LengthMismatch {
            left: predictions.len(),
            right: groups.len(),
        });
    }
    let mut members: BTreeMap<&K, Vec<Label>> = BTreeMap::new();
    for (p, g) in predictions.iter().zip(groups) {
        members.entry(g).or_default().push(*p);
    }
    let decided: BTreeMap<&K, Label> = members
        .into_iter()
        .map(|(g, ps)| (g, rule.decide(binary_median(&ps))))
        .collect();
    Ok(groups.iter().map(|g| decided[g]).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VotedMetrics {
    pub per_run: Vec<RunMetrics>,
    pub mean_metrics: MeanMetrics,
}

impl VotedMetrics {
    fn new(per_run: Vec<RunMetrics>) -> Self {
        VotedMetrics {
            mean_metrics: MeanMetrics::of(&per_run),
            per_run,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VotedPrediction {
    pub student_id: StudentId,
    pub trial_id: TrialId,
    pub window_index: u32,
    #[serde(rename = "true")]
    pub truth: Label,
    pub predicted: Label,
    pub voted: Label,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VoteReport {
    pub spec: ClassifierSpec,
    pub options: EvalOptions,
    pub tie_rule: TieRule,
    /// Per-sample metrics before voting.
    pub raw: VotedMetrics,
    /// Per-sample metrics after voting.
    pub weekly: VotedMetrics,
    /// One `(true, voted)` pair per student.
    pub by_student: VotedMetrics,
    /// Last run.
    pub predictions: Vec<VotedPrediction>,
}

/// Metrics of one set of predictions before and after voting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VoteOutcome {
    /// Voted prediction per sample.
    pub predictions: Vec<Label>,
    pub raw: RunMetrics,
    pub voted: RunMetrics,
    pub by_student: RunMetrics,
}

/// Vote `predictions` within `groups` and score the result against `truth`,
/// per sample and per group. Each group takes the truth of its first sample.
pub fn vote_outcome<K: Ord>(truth: &[Label], predictions: &[Label], groups: &[K], rule: TieRule) -> Result<VoteOutcome> {
    if truth.len() != predictions.len() {
        return Err(Error::LengthMismatch {
            left: truth.len(),
            right: predictions.len(),
        });
    }
    let voted = median_vote(predictions, groups, rule)?;
    let mut per_group: BTreeMap<&K, (Label, Label)> = BTreeMap::new();
    for ((g, t), v) in groups.iter().zip(truth).zip(&voted) {
        per_group.entry(g).or_insert((*t, *v));
    }
    let mut m = ConfusionMatrix::default();
    for (t, v) in per_group.values() {
        m.record(*t, *v);
    }
    Ok(VoteOutcome {
        raw: RunMetrics::from(confusion(truth, predictions)?),
        voted: RunMetrics::from(confusion(truth, &voted)?),
        by_student: RunMetrics::from(m),
        predictions: voted,
    })
}

/// Leave-one-out predictions fused per student, with metrics before and
/// after voting and per student. Students are keyed by trial as well, so
/// pooled trials never merge.
pub fn vote_pipeline<E: Executor>(
    samples: &[AggregatedSample],
    spec: &ClassifierSpec,
    options: EvalOptions,
    rule: TieRule,
    exec: &E,
) -> Result<VoteReport> {
    let (run_scores, replicated) = loocv_scores(samples, spec, options, exec)?;
    let keys: Vec<(&TrialId, &StudentId)> = samples.iter().map(|s| (&s.trial_id, &s.student_id)).collect();
    let truth: Vec<Label> = samples.iter().map(|s| s.label).collect();
    let mut raw = Vec::new();
    let mut weekly = Vec::new();
    let mut by_student = Vec::new();
    let mut last = (Vec::new(), Vec::new());
    for scores in &run_scores {
        let pred: Vec<Label> = scores.iter().map(|s| Label::from_bool(*s >= 0.5)).collect();
        let outcome = vote_outcome(&truth, &pred, &keys, rule)?;
        raw.push(outcome.raw);
        weekly.push(outcome.voted);
        by_student.push(outcome.by_student);
        last = (pred, outcome.predictions);
    }
    let widen = |v: Vec<RunMetrics>| {
        if replicated {
            alloc::vec![v[0]; options.n_runs]
        } else {
            v
        }
    };
    let predictions = samples
        .iter()
        .zip(last.0.iter().zip(&last.1))
        .map(|(s, (p, v))| VotedPrediction {
            student_id: s.student_id.clone(),
            trial_id: s.trial_id.clone(),
            window_index: s.window_index,
            truth: s.label,
            predicted: *p,
            voted: *v,
        })
        .collect();
    Ok(VoteReport {
        spec: spec.clone(),
        options,
        tie_rule: rule,
        raw: VotedMetrics::new(widen(raw)),
        weekly: VotedMetrics::new(widen(weekly)),
        by_student: VotedMetrics::new(widen(by_student)),
        predictions,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn l(bits: &[u8]) -> Vec<Label> {
        bits.iter().map(|b| Label::from_bool(*b == 1)).collect()
    }

    #[test]
    fn examples() {
        assert_eq!(median_vote(&l(&[1, 0, 1]), &["a"; 3], TieRule::Ge).unwrap(), l(&[1, 1, 1]));
        assert_eq!(median_vote(&l(&[1, 0]), &["a"; 2], TieRule::Ge).unwrap(), l(&[1, 1]));
        assert_eq!(median_vote(&l(&[1, 0]), &["a"; 2], TieRule::Gt).unwrap(), l(&[0, 0]));
        assert_eq!(
            median_vote(&l(&[0, 0, 1, 1, 1]), &["a", "a", "a", "b", "b"], TieRule::Ge).unwrap(),
            l(&[0, 0, 0, 1, 1])
        );
    }

    #[test]
    fn length_mismatch() {
        assert!(matches!(median_vote(&l(&[1]), &["a", "b"], TieRule::Ge), Err(Error::LengthMismatch { .. })));
    }
}
