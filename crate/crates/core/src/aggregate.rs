//! Daily records to windowed, labeled samples.
//!
//! Records are first averaged per student and day, then per student and
//! window (consecutive 7-day blocks from the trial start, or the whole trial).
//! Labels come from a median split of each trial's grades; pooled datasets
//! are always labeled trial by trial.

use alloc::collections::BTreeMap;
use alloc::string::ToString;
use alloc::vec::Vec;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::record::{GradeRecord, StudentId, Trial, TrialId};
use crate::N_FEATURES;

pub type FeatureVec = [f64; N_FEATURES];
type PartialVec = [Option<f64>; N_FEATURES];

/// Binary performance class. `Above` is the positive class everywhere.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(into = "u8", try_from = "u8")]
pub enum Label {
    Below = 0,
    Above = 1,
}

impl Label {
    #[inline]
    pub fn index(self) -> usize {
        self as usize
    }

    #[inline]
    pub fn from_bool(positive: bool) -> Label {
        if positive {
            Label::Above
        } else {
            Label::Below
        }
    }

    #[inline]
    pub fn is_positive(self) -> bool {
        self == Label::Above
    }

    pub fn other(self) -> Label {
        match self {
            Label::Above => Label::Below,
            Label::Below => Label::Above,
        }
    }
}

impl From<Label> for u8 {
    fn from(l: Label) -> u8 {
        l as u8
    }
}

impl TryFrom<u8> for Label {
    type Error = &'static str;
    fn try_from(v: u8) -> core::result::Result<Self, Self::Error> {
        match v {
            0 => Ok(Label::Below),
            1 => Ok(Label::Above),
            _ => Err("label must be 0 or 1"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WindowKind {
    Weekly,
    Monthly,
}

/// What to do with a field that is missing on every day of a window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Imputation {
    /// Drop the sample.
    DropMissing,
    /// Fill with the field's mean over all student-days of the trial.
    TrialMean,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowPolicy {
    pub kind: WindowKind,
    pub min_days: usize,
    pub imputation: Imputation,
}

impl WindowPolicy {
    pub fn weekly() -> Self {
        WindowPolicy {
            kind: WindowKind::Weekly,
            min_days: 1,
            imputation: Imputation::DropMissing,
        }
    }

    pub fn monthly() -> Self {
        WindowPolicy {
            kind: WindowKind::Monthly,
            ..Self::weekly()
        }
    }

    pub fn window_of(&self, start: NaiveDate, date: NaiveDate) -> u32 {
        match self.kind {
            WindowKind::Weekly => ((date - start).num_days() / 7) as u32,
            WindowKind::Monthly => 0,
        }
    }
}

/// Per student-day feature means of one trial.
#[derive(Debug, Clone, PartialEq)]
pub struct DailyMeans {
    pub trial_id: TrialId,
    pub start_date: NaiveDate,
    pub days: BTreeMap<(StudentId, NaiveDate), PartialVec>,
}

#[derive(Clone, Copy, Default)]
struct Acc {
    sum: f64,
    n: usize,
}

impl Acc {
    fn push(&mut self, v: Option<f64>) {
        if let Some(v) = v {
            self.sum += v;
            self.n += 1;
        }
    }

    fn mean(&self) -> Option<f64> {
        (self.n > 0).then(|| self.sum / self.n as f64)
    }
}

/// Average every student's records per calendar day. Missing survey answers
/// are left out of their field's mean.
pub fn daily_means(trial: &Trial) -> DailyMeans {
    let mut acc: BTreeMap<(StudentId, NaiveDate), [Acc; N_FEATURES]> = BTreeMap::new();
    for r in &trial.records {
        let slot = acc
            .entry((r.student_id.clone(), r.date))
            .or_insert([Acc::default(); N_FEATURES]);
        for (a, v) in slot.iter_mut().zip(r.features()) {
            a.push(v);
        }
    }
    DailyMeans {
        trial_id: trial.trial_id.clone(),
        start_date: trial.start_date,
        days: acc
            .into_iter()
            .map(|(k, a)| (k, a.map(|x| x.mean())))
            .collect(),
    }
}

/// A windowed feature mean before labels are attached.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowSample {
    pub student_id: StudentId,
    pub trial_id: TrialId,
    pub window_index: u32,
    pub features: FeatureVec,
    pub n_days: usize,
}

/// Average the daily means of each student over each window.
pub fn window_aggregate(daily: &DailyMeans, policy: &WindowPolicy) -> Result<Vec<WindowSample>> {
    let mut windows: BTreeMap<(StudentId, u32), ([Acc; N_FEATURES], usize)> = BTreeMap::new();
    let mut trial_acc = [Acc::default(); N_FEATURES];
    for ((student, date), v) in &daily.days {
        let w = policy.window_of(daily.start_date, *date);
        let slot = windows
            .entry((student.clone(), w))
            .or_insert(([Acc::default(); N_FEATURES], 0));
        for (k, x) in v.iter().enumerate() {
            slot.0[k].push(*x);
            trial_acc[k].push(*x);
        }
        slot.1 += 1;
    }
    let trial_mean = trial_acc.map(|a| a.mean());

    let mut out = Vec::new();
    'windows: for ((student, w), (acc, n_days)) in windows {
        if n_days < policy.min_days.max(1) {
            continue;
        }
        let mut features = [0.0; N_FEATURES];
        for k in 0..N_FEATURES {
            features[k] = match (acc[k].mean(), policy.imputation) {
                (Some(m), _) => m,
                (None, Imputation::TrialMean) => match trial_mean[k] {
                    Some(m) => m,
                    None => continue 'windows,
                },
                (None, Imputation::DropMissing) => continue 'windows,
            };
        }
        out.push(WindowSample {
            student_id: student,
            trial_id: daily.trial_id.clone(),
            window_index: w,
            features,
            n_days,
        });
    }
    if out.is_empty() {
        return Err(Error::EmptyWindowSet);
    }
    Ok(out)
}

/// Per-trial median split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelMap {
    pub median: f64,
    pub labels: BTreeMap<StudentId, Label>,
}

impl LabelMap {
    pub fn count(&self, label: Label) -> usize {
        self.labels.values().filter(|l| **l == label).count()
    }
}

/// Sample median of the grades; students at or above it are `Above`.
pub fn median_split_labels(grades: &[GradeRecord]) -> Result<LabelMap> {
    if grades.len() < 2 {
        return Err(Error::InsufficientGrades(grades.len()));
    }
    let mut sorted: Vec<f64> = grades.iter().map(|g| g.grade).collect();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let median = if n % 2 == 1 {
        sorted[n / 2]
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
    };
    let labels = grades
        .iter()
        .map(|g| (g.student_id.clone(), Label::from_bool(g.grade >= median)))
        .collect();
    Ok(LabelMap { median, labels })
}

/// A labeled, windowed sample: the unit every classifier sees.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregatedSample {
    pub student_id: StudentId,
    pub trial_id: TrialId,
    pub window_index: u32,
    pub features: FeatureVec,
    pub label: Label,
    pub n_days: usize,
}

pub fn label_samples(samples: Vec<WindowSample>, labels: &LabelMap) -> Result<Vec<AggregatedSample>> {
    samples
        .into_iter()
        .map(|s| {
            let label = *labels
                .labels
                .get(&s.student_id)
                .ok_or_else(|| Error::MissingLabel(s.student_id.to_string()))?;
            Ok(AggregatedSample {
                student_id: s.student_id,
                trial_id: s.trial_id,
                window_index: s.window_index,
                features: s.features,
                label,
                n_days: s.n_days,
            })
        })
        .collect()
}

/// Aggregate and label one trial.
pub fn prepare(trial: &Trial, policy: &WindowPolicy) -> Result<Vec<AggregatedSample>> {
    let labels = median_split_labels(&trial.grades)?;
    let windows = window_aggregate(&daily_means(trial), policy)?;
    label_samples(windows, &labels)
}

/// Aggregate several trials, labeling each against its own median, and pool
/// the result in argument order.
pub fn prepare_pooled(trials: &[Trial], policy: &WindowPolicy) -> Result<Vec<AggregatedSample>> {
    let mut out = Vec::new();
    for t in trials {
        out.extend(prepare(t, policy)?);
    }
    Ok(out)
}

/// Samples per class as `[below, above]`.
pub fn class_counts(samples: &[AggregatedSample]) -> [usize; 2] {
    let mut c = [0usize; 2];
    for s in samples {
        c[s.label.index()] += 1;
    }
    c
}

/// Column-wise z-scoring fitted on a training fold.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer {
    mean: Vec<f64>,
    scale: Vec<f64>,
}

impl Standardizer {
    pub fn fit(x: &[Vec<f64>]) -> Standardizer {
        let d = x.first().map_or(0, |r| r.len());
        let n = x.len().max(1) as f64;
        let mut mean = alloc::vec![0.0; d];
        for row in x {
            for (m, v) in mean.iter_mut().zip(row) {
                *m += v / n;
            }
        }
        let mut var = alloc::vec![0.0; d];
        for row in x {
            for k in 0..d {
                let dv = row[k] - mean[k];
                var[k] += dv * dv / n;
            }
        }
        let scale = var
            .into_iter()
            .map(|v| {
                let s = crate::float::sqrt(v);
                if s > 0.0 {
                    s
                } else {
                    1.0
                }
            })
            .collect();
        Standardizer { mean, scale }
    }

    pub fn apply(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .zip(self.mean.iter().zip(&self.scale))
            .map(|(v, (m, s))| (v - m) / s)
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::record::{build_trial, DailyRecord};
    use alloc::format;
    use alloc::vec;

    fn day(d: u32) -> NaiveDate {
        NaiveDate::from_ymd_opt(2021, 3, d).unwrap()
    }

    fn rec(student: &str, d: u32, sleep: Option<f64>) -> DailyRecord {
        let mut r = DailyRecord::empty(StudentId::new(student), TrialId::T2021, day(d));
        r.pct_still = 0.25;
        r.pct_house = 0.5;
        r.sleep_hours = sleep;
        r.study_hours = Some(2.0);
        r.arousal = Some(0.5);
        r.valence = Some(0.0);
        r.sociability = Some(1.0);
        r.sleep_quality = Some(3.0);
        r.exercise_hours = Some(0.5);
        r
    }

    fn grade(student: &str, g: f64) -> GradeRecord {
        GradeRecord {
            student_id: StudentId::new(student),
            trial_id: TrialId::T2021,
            grade: g,
        }
    }

    fn trial(records: Vec<DailyRecord>, grades: Vec<GradeRecord>) -> Trial {
        build_trial(records, grades, TrialId::T2021, day(1), day(31)).unwrap()
    }

    #[test]
    fn single_record_day_is_identity() {
        let r = rec("a", 2, Some(6.5));
        let t = trial(vec![r.clone()], vec![grade("a", 14.0), grade("b", 16.0)]);
        let dm = daily_means(&t);
        assert_eq!(dm.days[&(StudentId::new("a"), day(2))], r.features());
    }

    #[test]
    fn same_day_records_average() {
        let t = trial(
            vec![rec("a", 2, Some(6.0)), rec("a", 2, Some(8.0)), rec("a", 2, None)],
            vec![grade("a", 14.0), grade("b", 16.0)],
        );
        let dm = daily_means(&t);
        assert_eq!(dm.days[&(StudentId::new("a"), day(2))][11], Some(7.0));
    }

    #[test]
    fn identical_week_gives_that_vector() {
        let t = trial(
            (1..=7).map(|d| rec("a", d, Some(7.0))).collect(),
            vec![grade("a", 14.0), grade("b", 16.0)],
        );
        let s = window_aggregate(&daily_means(&t), &WindowPolicy::weekly()).unwrap();
        assert_eq!(s.len(), 1);
        let expected: Vec<f64> = rec("a", 1, Some(7.0)).features().iter().map(|v| v.unwrap_or(f64::NAN)).collect();
        for (k, v) in s[0].features.iter().enumerate() {
            if expected[k].is_nan() {
                continue;
            }
            assert_eq!(*v, expected[k]);
        }
    }

    #[test]
    fn all_missing_field_policies() {
        let records: Vec<_> = (1..=7)
            .map(|d| {
                let mut r = rec("a", d, Some(7.0));
                r.arousal = None;
                r
            })
            .collect();
        let t = trial(records, vec![grade("a", 14.0), grade("b", 16.0)]);
        let dm = daily_means(&t);
        // arousal is missing everywhere, so DropMissing keeps nothing
        assert_eq!(window_aggregate(&dm, &WindowPolicy::weekly()), Err(Error::EmptyWindowSet));
    }

    #[test]
    fn trial_mean_imputation() {
        let mut records = Vec::new();
        for d in 1..=14 {
            let mut r = rec("a", d, if d <= 7 { Some(6.0) } else { None });
            r.arousal = Some(0.5);
            r.valence = Some(0.0);
            r.sociability = Some(1.0);
            r.sleep_quality = Some(2.0);
            r.exercise_hours = Some(1.0);
            records.push(r);
        }
        let t = trial(records, vec![grade("a", 14.0), grade("b", 16.0)]);
        let dm = daily_means(&t);
        let drop = window_aggregate(&dm, &WindowPolicy::weekly()).unwrap();
        assert_eq!(drop.len(), 1);
        assert_eq!(drop[0].window_index, 0);
        let policy = WindowPolicy {
            imputation: Imputation::TrialMean,
            ..WindowPolicy::weekly()
        };
        let imputed = window_aggregate(&dm, &policy).unwrap();
        assert_eq!(imputed.len(), 2);
        assert_eq!(imputed[1].features[11], 6.0);
    }

    #[test]
    fn weeks_with_data_only() {
        // days in weeks 0 and 2 only
        let records = vec![rec("a", 1, Some(7.0)), rec("a", 6, Some(7.0)), rec("a", 16, Some(7.0))];
        let t = trial(records.clone(), vec![grade("a", 14.0), grade("b", 16.0)]);
        let s = window_aggregate(&daily_means(&t), &WindowPolicy::weekly()).unwrap();
        // oracle: (date - start) / 7
        let mut expected: Vec<u32> = records.iter().map(|r| ((r.date - day(1)).num_days() / 7) as u32).collect();
        expected.dedup();
        assert_eq!(s.iter().map(|x| x.window_index).collect::<Vec<_>>(), expected);
        assert_eq!(s[0].n_days, 2);
    }

    #[test]
    fn min_days_drops_short_windows() {
        let records = vec![rec("a", 1, Some(7.0)), rec("a", 2, Some(7.0)), rec("a", 9, Some(7.0))];
        let t = trial(records, vec![grade("a", 14.0), grade("b", 16.0)]);
        let policy = WindowPolicy {
            min_days: 2,
            ..WindowPolicy::weekly()
        };
        let s = window_aggregate(&daily_means(&t), &policy).unwrap();
        assert_eq!(s.len(), 1);
        assert_eq!(s[0].window_index, 0);
    }

    #[test]
    fn monthly_gives_one_sample_per_student() {
        let mut records = Vec::new();
        for i in 0..5 {
            for d in 1..=31 {
                records.push(rec(&format!("s{i}"), d, Some(7.0)));
            }
        }
        let grades = (0..5).map(|i| grade(&format!("s{i}"), 12.0 + i as f64)).collect();
        let t = trial(records, grades);
        let s = prepare(&t, &WindowPolicy::monthly()).unwrap();
        assert_eq!(s.len(), 5);
        let w = prepare(&t, &WindowPolicy::weekly()).unwrap();
        // 31 days: four full weeks and a 3-day tail
        assert_eq!(w.len(), 25);
    }

    #[test]
    fn two_point_median() {
        let m = median_split_labels(&[grade("a", 10.0), grade("b", 14.0)]).unwrap();
        assert_eq!(m.median, 12.0);
        assert_eq!(m.labels[&StudentId::new("a")], Label::Below);
        assert_eq!(m.labels[&StudentId::new("b")], Label::Above);
    }

    #[test]
    fn median_tie_goes_above() {
        let m = median_split_labels(&[grade("a", 10.0), grade("b", 12.6), grade("c", 14.0)]).unwrap();
        assert_eq!(m.median, 12.6);
        assert_eq!(m.labels[&StudentId::new("b")], Label::Above);
    }

    #[test]
    fn median_needs_two_grades() {
        assert_eq!(median_split_labels(&[grade("a", 10.0)]), Err(Error::InsufficientGrades(1)));
    }

    #[test]
    fn label_join() {
        let t = trial(
            (1..=28).map(|d| rec("a", d, Some(7.0))).collect(),
            vec![grade("a", 16.0), grade("b", 10.0)],
        );
        let s = prepare(&t, &WindowPolicy::weekly()).unwrap();
        assert_eq!(s.len(), 4);
        assert!(s.iter().all(|x| x.label == Label::Above));

        let labels = LabelMap {
            median: 0.0,
            labels: BTreeMap::new(),
        };
        let w = window_aggregate(&daily_means(&t), &WindowPolicy::weekly()).unwrap();
        assert_eq!(label_samples(w, &labels), Err(Error::MissingLabel("a".into())));
    }

    #[test]
    fn standardizer_uses_fit_statistics() {
        let x = vec![vec![1.0, 5.0], vec![3.0, 5.0]];
        let s = Standardizer::fit(&x);
        assert_eq!(s.apply(&[2.0, 5.0]), vec![0.0, 0.0]);
        assert_eq!(s.apply(&[3.0, 6.0]), vec![1.0, 1.0]);
    }
}
