mod common;

use perfpipe_core::learners::gradboost::{GbParams, GradBoostModel};
use perfpipe_core::learners::{fit, param_map, samme_stage, ClassifierKind, ClassifierSpec, ModelState, ParamMap, ParamValue};
use perfpipe_core::Label;
use proptest::prelude::*;

fn dataset() -> impl Strategy<Value = (Vec<Vec<f64>>, Vec<Label>)> {
    prop::collection::vec((prop::collection::vec(-5.0..5.0f64, 3), any::<bool>()), 6..30)
        .prop_filter("both classes", |v| v.iter().any(|p| p.1) && v.iter().any(|p| !p.1))
        .prop_map(|v| {
            let x = v.iter().map(|p| p.0.clone()).collect();
            let y = v.iter().map(|p| Label::from_bool(p.1)).collect();
            (x, y)
        })
}

fn small_spec(kind: ClassifierKind) -> ClassifierSpec {
    let params: ParamMap = match kind {
        ClassifierKind::RandomForest => param_map([("n_estimators", ParamValue::Int(5))]),
        ClassifierKind::AdaBoostRf => param_map([("n_estimators", ParamValue::Int(3)), ("boost_rounds", ParamValue::Int(3))]),
        ClassifierKind::GradBoost => param_map([("n_estimators", ParamValue::Int(10))]),
        _ => ParamMap::new(),
    };
    ClassifierSpec::new(kind).with_params(params).with_seed(17)
}

/// Deterministic forest base: every tree sees all samples and features.
fn exact_forest() -> ParamMap {
    param_map([
        ("n_estimators", ParamValue::Int(3)),
        ("bootstrap", ParamValue::Bool(false)),
        ("max_features", ParamValue::Null),
    ])
}

fn scores(spec: &ClassifierSpec, x: &[Vec<f64>], y: &[Label], w: Option<&[f64]>, q: &[Vec<f64>]) -> Vec<f64> {
    fit(spec, x, y, w).unwrap().decision_score(q).unwrap()
}

fn queries() -> Vec<Vec<f64>> {
    (0..25).map(|i| vec![(i % 5) as f64 * 2.0 - 4.0, (i / 5) as f64 * 2.0 - 4.0, 0.5]).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn labels_are_thresholded_scores((x, y) in dataset()) {
        let q = queries();
        for kind in ClassifierKind::ALL {
            let m = fit(&small_spec(kind), &x, &y, None).unwrap();
            let s = m.decision_score(&q).unwrap();
            let p = m.predict(&q).unwrap();
            for (si, pi) in s.iter().zip(&p) {
                prop_assert!((0.0..=1.0).contains(si), "{kind}: {si}");
                prop_assert_eq!(*pi, Label::from_bool(*si >= 0.5));
            }
            let again = fit(&small_spec(kind), &x, &y, None).unwrap();
            prop_assert_eq!(again.decision_score(&q).unwrap(), s);
        }
    }

    #[test]
    fn duplicating_equals_doubling((x, y) in dataset(), pick in any::<prop::sample::Index>()) {
        let i = pick.index(x.len());
        let mut xd = x.clone();
        let mut yd = y.clone();
        xd.push(x[i].clone());
        yd.push(y[i]);
        let mut w = vec![1.0; x.len()];
        w[i] = 2.0;
        let q = queries();
        let specs = [
            ClassifierSpec::new(ClassifierKind::DecisionTree).with_params(param_map([("max_features", ParamValue::Null)])),
            ClassifierSpec::new(ClassifierKind::GaussianNb),
            ClassifierSpec::new(ClassifierKind::AdaBoostRf).with_params(exact_forest()),
            ClassifierSpec::new(ClassifierKind::GradBoost).with_params(param_map([("n_estimators", ParamValue::Int(10))])),
        ];
        for spec in specs {
            let a = scores(&spec, &xd, &yd, None, &q);
            let b = scores(&spec, &x, &y, Some(&w), &q);
            for (u, v) in a.iter().zip(&b) {
                prop_assert!((u - v).abs() < 1e-9, "{}: {u} vs {v}", spec.kind);
            }
        }
    }

    #[test]
    fn knn_algorithm_is_only_a_hint((x, y) in dataset(), k in 1i64..6, distance in any::<bool>(), p in 1i64..3) {
        let q = queries();
        let weights = if distance { "distance" } else { "uniform" };
        let run = |algorithm: &str| {
            let spec = ClassifierSpec::new(ClassifierKind::Knn).with_params(param_map([
                ("n_neighbors", ParamValue::Int(k)),
                ("weights", ParamValue::str(weights)),
                ("p", ParamValue::Int(p)),
                ("algorithm", ParamValue::str(algorithm)),
            ]));
            scores(&spec, &x, &y, None, &q)
        };
        let auto = run("auto");
        for a in ["ball_tree", "kd_tree", "brute"] {
            prop_assert_eq!(run(a), auto.clone());
        }
    }

    #[test]
    fn boosting_loss_never_rises((x, y) in dataset(), lr in 0.0..1.0f64, depth in 1i64..5) {
        let params = GbParams::from_map(&param_map([
            ("n_estimators", ParamValue::Int(15)),
            ("learning_rate", ParamValue::Float(lr)),
            ("max_depth", ParamValue::Int(depth)),
        ]))
        .unwrap();
        let w = vec![1.0; x.len()];
        let m = GradBoostModel::fit(&x, &y, &w, &params);
        for pair in m.train_loss.windows(2) {
            prop_assert!(pair[1] <= pair[0] + 1e-12, "{:?}", pair);
        }
    }

    #[test]
    fn unrestricted_tree_memorizes(points in prop::collection::btree_map((-50i32..50, -50i32..50), any::<bool>(), 4..40)) {
        prop_assume!(points.values().any(|b| *b) && points.values().any(|b| !*b));
        let x: Vec<Vec<f64>> = points.keys().map(|(a, b)| vec![*a as f64, *b as f64]).collect();
        let y: Vec<Label> = points.values().map(|b| Label::from_bool(*b)).collect();
        let spec = ClassifierSpec::new(ClassifierKind::DecisionTree).with_seed(3);
        prop_assert_eq!(fit(&spec, &x, &y, None).unwrap().predict(&x).unwrap(), y);
    }

    #[test]
    fn samme_raises_misclassified_weights(
        rows in prop::collection::vec((any::<bool>(), 0.1..3.0f64), 2..30),
    ) {
        let miss: Vec<bool> = rows.iter().map(|r| r.0).collect();
        let w: Vec<f64> = rows.iter().map(|r| r.1).collect();
        let total: f64 = w.iter().sum();
        let err = miss.iter().zip(&w).filter(|(m, _)| **m).map(|(_, v)| v).sum::<f64>() / total;
        match samme_stage(&miss, &w, 2) {
            Ok((alpha, next)) => {
                prop_assert!((alpha - ((1.0 - err) / err).ln()).abs() < 1e-9);
                prop_assert!((next.iter().sum::<f64>() - total).abs() < 1e-9 * total);
                if alpha > 0.0 {
                    for ((m, a), b) in miss.iter().zip(&w).zip(&next) {
                        if *m {
                            prop_assert!(b > a);
                        } else {
                            prop_assert!(b < a);
                        }
                    }
                }
            }
            Err(_) => prop_assert!(err == 0.0 || err > 0.5),
        }
    }
}

#[test]
fn chance_stage_has_zero_weight() {
    let (alpha, next) = samme_stage(&[true, false, true, false], &[1.0; 4], 2).unwrap();
    assert_eq!(alpha, 0.0);
    assert_eq!(next, vec![1.0; 4]);
}

#[test]
fn forest_duplicate_matches_double_weight_on_average() {
    let x: Vec<Vec<f64>> = [0.0, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0].iter().map(|v| vec![*v]).collect();
    let y: Vec<Label> = [0, 0, 1, 0, 1, 1, 0, 1].iter().map(|b| Label::from_bool(*b == 1)).collect();
    let mut xd = x.clone();
    xd.push(x[3].clone());
    let mut yd = y.clone();
    yd.push(y[3]);
    let mut w = vec![1.0; x.len()];
    w[3] = 2.0;
    let q: Vec<Vec<f64>> = (0..8).map(|v| vec![v as f64 + 0.25]).collect();
    let seeds = 400;
    let mut a = vec![0.0; q.len()];
    let mut b = vec![0.0; q.len()];
    for seed in 0..seeds {
        let spec = ClassifierSpec::new(ClassifierKind::RandomForest)
            .with_params(param_map([("n_estimators", ParamValue::Int(10))]))
            .with_seed(seed);
        for (acc, s) in a.iter_mut().zip(scores(&spec, &xd, &yd, None, &q)) {
            *acc += s / seeds as f64;
        }
        for (acc, s) in b.iter_mut().zip(scores(&spec, &x, &y, Some(&w), &q)) {
            *acc += s / seeds as f64;
        }
    }
    for (u, v) in a.iter().zip(&b) {
        assert!((u - v).abs() < 0.08, "{a:?}\n{b:?}");
    }
}

#[test]
fn samme_fits_separable_data() {
    let x: Vec<Vec<f64>> = (0..12).map(|i| vec![i as f64, (i % 3) as f64]).collect();
    let y: Vec<Label> = (0..12).map(|i| Label::from_bool(i >= 6)).collect();
    let spec = ClassifierSpec::new(ClassifierKind::AdaBoostRf)
        .with_params(param_map([("n_estimators", ParamValue::Int(5)), ("boost_rounds", ParamValue::Int(5))]))
        .with_seed(1);
    let m = fit(&spec, &x, &y, None).unwrap();
    assert_eq!(m.predict(&x).unwrap(), y);
    let ModelState::AdaBoostRf(s) = &m.state else { panic!("wrong state") };
    assert!(s.stage_errors.len() <= 5);
    assert_eq!(*s.stage_errors.last().unwrap(), 0.0);
}

/// Log density of a normal distribution, written out by hand.
fn log_normal(x: f64, mean: f64, var: f64) -> f64 {
    -0.5 * (2.0 * std::f64::consts::PI * var).ln() - (x - mean).powi(2) / (2.0 * var)
}

#[test]
fn naive_bayes_posterior_matches_hand_computation() {
    // Class 0: (0,1), (2,3) with means (1,2), variances (1,1).
    // Class 1: (3,0), (5,4) with means (4,2), variances (1,4).
    let x = vec![vec![0.0, 1.0], vec![2.0, 3.0], vec![3.0, 0.0], vec![5.0, 4.0]];
    let y = [0, 0, 1, 1].map(|b| Label::from_bool(b == 1)).to_vec();
    let spec = ClassifierSpec::new(ClassifierKind::GaussianNb).with_params(param_map([("var_smoothing", ParamValue::Float(0.0))]));
    let m = fit(&spec, &x, &y, None).unwrap();
    for q in [[2.0, 2.0], [2.5, 2.0], [0.0, 0.0], [4.0, 5.0]] {
        let l0 = 0.5f64.ln() + log_normal(q[0], 1.0, 1.0) + log_normal(q[1], 2.0, 1.0);
        let l1 = 0.5f64.ln() + log_normal(q[0], 4.0, 1.0) + log_normal(q[1], 2.0, 4.0);
        let posterior = l1.exp() / (l0.exp() + l1.exp());
        let got = m.decision_score(&[q.to_vec()]).unwrap()[0];
        assert!((got - posterior).abs() < 1e-9, "{q:?}: {got} vs {posterior}");
    }
}

#[test]
fn zero_stage_boosting_predicts_weighted_majority() {
    let x: Vec<Vec<f64>> = (0..5).map(|i| vec![i as f64]).collect();
    let y = [1, 1, 0, 0, 0].map(|b| Label::from_bool(b == 1)).to_vec();
    let spec = ClassifierSpec::new(ClassifierKind::GradBoost).with_params(param_map([("n_estimators", ParamValue::Int(0))]));
    assert!(fit(&spec, &x, &y, None).unwrap().predict(&x).unwrap().iter().all(|l| *l == Label::Below));
    let w = [3.0, 3.0, 1.0, 1.0, 1.0];
    assert!(fit(&spec, &x, &y, Some(&w)).unwrap().predict(&x).unwrap().iter().all(|l| *l == Label::Above));
}

#[test]
fn empty_queries_give_empty_predictions() {
    let (x, y) = common::blobs(10, 2, 2.0, 0);
    for kind in ClassifierKind::ALL {
        let m = fit(&small_spec(kind), &x, &y, None).unwrap();
        assert!(m.predict(&[]).unwrap().is_empty());
    }
}

#[test]
fn rbf_svm_separates_separable_points() {
    let (x, y) = common::blobs(20, 2, 4.0, 12);
    let spec = ClassifierSpec::new(ClassifierKind::Svm).with_params(param_map([
        ("kernel", ParamValue::str("rbf")),
        ("C", ParamValue::Int(1)),
        ("gamma", ParamValue::str("auto")),
    ]));
    assert_eq!(fit(&spec, &x, &y, None).unwrap().predict(&x).unwrap(), y);
}

#[test]
fn one_nn_predicts_training_labels() {
    let (x, y) = common::blobs(15, 3, 0.0, 4);
    let spec = ClassifierSpec::new(ClassifierKind::Knn).with_params(param_map([("n_neighbors", ParamValue::Int(1))]));
    assert_eq!(fit(&spec, &x, &y, None).unwrap().predict(&x).unwrap(), y);
}
