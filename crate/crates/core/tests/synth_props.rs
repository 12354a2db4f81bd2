use std::collections::BTreeMap;

use perfpipe_core::aggregate::{daily_means, prepare, window_aggregate, WindowPolicy};
use perfpipe_core::evaluate::{loocv, EvalOptions};
use perfpipe_core::learners::{param_map, ClassifierKind, ClassifierSpec, ParamValue};
use perfpipe_core::synth::{bayes_accuracy, generate, Regime, TrialConfig};
use perfpipe_core::{Label, Serial};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn generated_trials_are_valid_and_seeded(
        n_students in 4usize..12,
        n_days in 7usize..30,
        sep in 0.0..4.0f64,
        burst in 0.0..1.0f64,
        remote in any::<bool>(),
        seed in any::<u64>(),
    ) {
        let cfg = TrialConfig {
            n_students,
            n_days,
            class_sep: sep,
            burst_prob: burst,
            regime: if remote { Regime::Remote } else { Regime::InPerson },
            seed,
            ..TrialConfig::default()
        };
        let (trial, truth) = generate(&cfg).unwrap();
        prop_assert!(trial.validate().is_ok());
        for r in &trial.records {
            prop_assert!(r.check().is_ok(), "{r:?}");
        }
        prop_assert_eq!(trial.records.len(), n_students * n_days);
        prop_assert!((0.5 - 0.02..=1.0).contains(&truth.bayes_accuracy));
        let (again, _) = generate(&cfg).unwrap();
        prop_assert_eq!(again, trial);
    }
}

fn bayes(sep: f64) -> f64 {
    let cfg = TrialConfig {
        class_sep: sep,
        ..TrialConfig::default()
    };
    bayes_accuracy(&cfg, 100_000).0
}

#[test]
fn no_separation_means_chance() {
    let cfg = TrialConfig {
        class_sep: 0.0,
        ..TrialConfig::default()
    };
    let (p, se) = bayes_accuracy(&cfg, 100_000);
    assert!((p - 0.5).abs() < 4.0 * se, "{p} ± {se}");
}

#[test]
fn bayes_grows_with_separation() {
    let sweep: Vec<f64> = [0.0, 1.0, 2.0, 3.0, 4.0].iter().map(|s| bayes(*s)).collect();
    // Two estimates from 1e5 draws differ by noise of about 0.002.
    for w in sweep.windows(2) {
        assert!(w[1] >= w[0] - 0.005, "{sweep:?}");
    }
    assert!(sweep[4] > sweep[0] + 0.3, "{sweep:?}");
}

#[test]
fn noiseless_generator_is_separable() {
    let cfg = TrialConfig {
        n_students: 12,
        n_days: 14,
        class_sep: 2.0,
        noise: [0.0; perfpipe_core::N_FEATURES],
        grade_noise: 0.0,
        seed: 5,
        ..TrialConfig::default()
    };
    let (trial, _) = generate(&cfg).unwrap();
    let samples = prepare(&trial, &WindowPolicy::weekly()).unwrap();
    for kind in [ClassifierKind::Knn, ClassifierKind::GaussianNb, ClassifierKind::DecisionTree, ClassifierKind::Svm] {
        let spec = ClassifierSpec::new(kind);
        let r = loocv(&samples, &spec, EvalOptions::runs(1), &Serial).unwrap();
        assert_eq!(r.accuracy(), 1.0, "{kind}");
    }
}

/// Between-class gap in the mean over students of each student's largest
/// window mean of `pct_house`.
fn burst_gap(trial: &perfpipe_core::record::Trial, policy: &WindowPolicy, low: &BTreeMap<String, bool>) -> f64 {
    let windows = window_aggregate(&daily_means(trial), policy).unwrap();
    let mut peak: BTreeMap<String, f64> = BTreeMap::new();
    for w in windows {
        let v = w.features[1];
        let e = peak.entry(w.student_id.0.clone()).or_insert(f64::MIN);
        *e = e.max(v);
    }
    let mean = |want: bool| {
        let vals: Vec<f64> = peak.iter().filter(|(s, _)| low[*s] == want).map(|(_, v)| *v).collect();
        vals.iter().sum::<f64>() / vals.len() as f64
    };
    mean(true) - mean(false)
}

#[test]
fn bursts_stand_out_more_in_weekly_windows() {
    for seed in 0..5 {
        let cfg = TrialConfig {
            burst_prob: 0.5,
            class_sep: 0.0,
            seed,
            ..TrialConfig::default()
        };
        let (trial, truth) = generate(&cfg).unwrap();
        let low: BTreeMap<String, bool> =
            truth.students.iter().map(|s| (s.student_id.0.clone(), s.archetype == Label::Below)).collect();
        let weekly = burst_gap(&trial, &WindowPolicy::weekly(), &low);
        let monthly = burst_gap(&trial, &WindowPolicy::monthly(), &low);
        assert!(weekly > monthly, "seed {seed}: weekly {weekly} monthly {monthly}");
    }
}

#[test]
fn one_nn_tracks_the_bayes_oracle() {
    let spec = ClassifierSpec::new(ClassifierKind::Knn).with_params(param_map([("n_neighbors", ParamValue::Int(1))]));
    let mut acc = 0.0;
    let mut oracle = 0.0;
    for seed in 0..20 {
        let cfg = TrialConfig {
            seed,
            ..TrialConfig::default()
        };
        let (trial, truth) = generate(&cfg).unwrap();
        let samples = prepare(&trial, &WindowPolicy::weekly()).unwrap();
        acc += loocv(&samples, &spec, EvalOptions::runs(1), &Serial).unwrap().accuracy() / 20.0;
        oracle += truth.bayes_accuracy / 20.0;
    }
    assert!((acc - oracle).abs() <= 0.1, "1-NN {acc} vs Bayes {oracle}");
}
