#![allow(dead_code)]

use chrono::{Days, NaiveDate};
use perfpipe_core::record::{build_trial, DailyRecord, GradeRecord, StudentId, Trial, TrialId};
use perfpipe_core::{AggregatedSample, Label, N_FEATURES};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn start() -> NaiveDate {
    NaiveDate::from_ymd_opt(2018, 5, 12).unwrap()
}

/// A valid feature vector from seven uniforms in `[0, 1)` and survey
/// answers.
pub fn features(u: &[f64; 7], survey: [Option<f64>; 7]) -> [Option<f64>; N_FEATURES] {
    let mut f = [None; N_FEATURES];
    f[0] = Some(u[0] * 0.5);
    f[1] = Some(u[1] * 0.5);
    for k in 2..7 {
        f[k] = Some(u[k] * 0.2);
    }
    f[7..].copy_from_slice(&survey);
    f
}

pub fn record(student: &str, trial: &TrialId, day: u64, f: [Option<f64>; N_FEATURES]) -> DailyRecord {
    let mut r = DailyRecord::empty(StudentId::new(student), trial.clone(), start() + Days::new(day));
    r.set_features(&f);
    r
}

fn sam() -> impl Strategy<Value = Option<f64>> {
    prop_oneof![Just(None), (0..5u8).prop_map(|k| Some(k as f64 * 0.5 - 1.0))]
}

fn hours() -> impl Strategy<Value = Option<f64>> {
    prop_oneof![1 => Just(None), 4 => (0.0..10.0f64).prop_map(Some)]
}

fn day_features() -> impl Strategy<Value = [Option<f64>; N_FEATURES]> {
    (
        prop::array::uniform7(0.0..1.0f64),
        sam(),
        sam(),
        prop::array::uniform5(hours()),
    )
        .prop_map(|(u, a, v, h)| features(&u, [a, v, h[0], h[1], h[2], h[3], h[4]]))
}

/// Random trials: 2 to 6 students, each with a random subset of 28 days and
/// possibly several records per day.
pub fn trial_strategy(trial: TrialId) -> impl Strategy<Value = Trial> {
    let student = (
        prop::collection::vec((0..28u64, day_features()), 1..20),
        0.0..20.0f64,
    );
    prop::collection::vec(student, 2..7).prop_map(move |students| {
        let mut records = Vec::new();
        let mut grades = Vec::new();
        for (s, (days, grade)) in students.into_iter().enumerate() {
            let id = format!("s{s}");
            for (day, f) in days {
                records.push(record(&id, &trial, day, f));
            }
            grades.push(GradeRecord {
                student_id: StudentId::new(id),
                trial_id: trial.clone(),
                grade: (grade * 100.0).round() / 100.0,
            });
        }
        build_trial(records, grades, trial.clone(), start(), start() + Days::new(27)).unwrap()
    })
}

/// Points with labels from two Gaussian blobs.
pub fn blobs(n: usize, d: usize, sep: f64, seed: u64) -> (Vec<Vec<f64>>, Vec<Label>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    for i in 0..n {
        let label = Label::from_bool(i % 2 == 0);
        let c = if label.is_positive() { sep / 2.0 } else { -sep / 2.0 };
        x.push((0..d).map(|_| c + rng.random_range(-1.0..1.0)).collect());
        y.push(label);
    }
    (x, y)
}

/// Wrap feature rows as aggregated samples, one student per row.
pub fn samples(x: &[Vec<f64>], y: &[Label]) -> Vec<AggregatedSample> {
    x.iter()
        .zip(y)
        .enumerate()
        .map(|(i, (row, label))| {
            let mut features = [0.0; N_FEATURES];
            features[..row.len()].copy_from_slice(row);
            AggregatedSample {
                student_id: StudentId::new(format!("p{i:03}")),
                trial_id: TrialId::Custom("points".into()),
                window_index: 0,
                features,
                label: *label,
                n_days: 1,
            }
        })
        .collect()
}
