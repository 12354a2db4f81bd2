mod common;

use std::collections::BTreeMap;

use perfpipe_core::evaluate::EvalOptions;
use perfpipe_core::learners::{param_map, ClassifierKind, ClassifierSpec, ParamValue};
use perfpipe_core::vote::{median_vote, vote_pipeline, TieRule};
use perfpipe_core::{Label, Serial};
use proptest::prelude::*;

fn labels(bits: &[bool]) -> Vec<Label> {
    bits.iter().map(|b| Label::from_bool(*b)).collect()
}

fn votes() -> impl Strategy<Value = (Vec<Label>, Vec<u8>)> {
    prop::collection::vec((any::<bool>(), 0u8..6), 0..40)
        .prop_map(|v| (labels(&v.iter().map(|p| p.0).collect::<Vec<_>>()), v.iter().map(|p| p.1).collect()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn voting_twice_changes_nothing((p, s) in votes()) {
        for rule in [TieRule::Ge, TieRule::Gt] {
            let once = median_vote(&p, &s, rule).unwrap();
            prop_assert_eq!(median_vote(&once, &s, rule).unwrap(), once);
        }
    }

    #[test]
    fn one_verdict_per_student((p, s) in votes()) {
        let out = median_vote(&p, &s, TieRule::Ge).unwrap();
        let mut verdict = BTreeMap::new();
        for (g, v) in s.iter().zip(&out) {
            prop_assert_eq!(*verdict.entry(g).or_insert(*v), *v);
        }
    }

    #[test]
    fn permuting_inputs_permutes_outputs((p, s) in votes(), seed in any::<u64>()) {
        use rand::seq::SliceRandom;
        use rand::SeedableRng;
        let mut order: Vec<usize> = (0..p.len()).collect();
        order.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
        let pp: Vec<Label> = order.iter().map(|i| p[*i]).collect();
        let ss: Vec<u8> = order.iter().map(|i| s[*i]).collect();
        let out = median_vote(&p, &s, TieRule::Ge).unwrap();
        let permuted = median_vote(&pp, &ss, TieRule::Ge).unwrap();
        for (k, i) in order.iter().enumerate() {
            prop_assert_eq!(permuted[k], out[*i]);
        }
    }

    #[test]
    fn median_is_majority_with_ties_above((p, s) in votes()) {
        let out = median_vote(&p, &s, TieRule::Ge).unwrap();
        for (i, g) in s.iter().enumerate() {
            let ones = s.iter().zip(&p).filter(|(h, l)| *h == g && l.is_positive()).count();
            let total = s.iter().filter(|h| *h == g).count();
            prop_assert_eq!(out[i], Label::from_bool(2 * ones >= total));
        }
    }

    #[test]
    fn tie_rule_only_matters_for_balanced_students((p, s) in votes()) {
        let ge = median_vote(&p, &s, TieRule::Ge).unwrap();
        let gt = median_vote(&p, &s, TieRule::Gt).unwrap();
        for (i, g) in s.iter().enumerate() {
            let ones = s.iter().zip(&p).filter(|(h, l)| *h == g && l.is_positive()).count();
            let total = s.iter().filter(|h| *h == g).count();
            prop_assert_eq!(ge[i] != gt[i], 2 * ones == total);
        }
    }
}

#[test]
fn singleton_students_keep_their_predictions() {
    let (x, y) = common::blobs(30, 2, 1.0, 3);
    let samples = common::samples(&x, &y);
    let spec = ClassifierSpec::new(ClassifierKind::Knn).with_params(param_map([("n_neighbors", ParamValue::Int(3))]));
    let r = vote_pipeline(&samples, &spec, EvalOptions::runs(1), TieRule::Ge, &Serial).unwrap();
    assert_eq!(r.raw, r.weekly);
    assert_eq!(r.raw.per_run, r.by_student.per_run);
    assert!(r.predictions.iter().all(|p| p.predicted == p.voted));
}

#[test]
fn unanimous_students_are_unchanged() {
    // Each student owns two copies of one point, so 1-NN predicts the
    // student's own label for both and the predictions are unanimous.
    let (x, y) = common::blobs(20, 2, 4.0, 9);
    let mut samples = common::samples(&x, &y);
    let copies: Vec<_> = samples
        .iter()
        .map(|s| {
            let mut c = s.clone();
            c.window_index = 1;
            c
        })
        .collect();
    samples.extend(copies);
    let spec = ClassifierSpec::new(ClassifierKind::Knn).with_params(param_map([("n_neighbors", ParamValue::Int(1))]));
    let r = vote_pipeline(&samples, &spec, EvalOptions::runs(1), TieRule::Ge, &Serial).unwrap();
    assert!(r.predictions.iter().all(|p| p.predicted == p.voted));
    assert_eq!(r.raw, r.weekly);
}

/// Per-window predictions right with probability 0.75, independently, four
/// windows per student. The binomial majority with ties counted as Above is
/// right with probability about 0.95 for Above students and 0.74 for Below
/// students, so voted accuracy should beat 0.75 in almost every draw.
#[test]
fn voting_independent_errors_beats_single_windows() {
    use perfpipe_core::vote::vote_outcome;
    use rand::{Rng, SeedableRng};
    let mut wins = 0;
    for seed in 0..20u64 {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut truth = Vec::new();
        let mut pred = Vec::new();
        let mut group = Vec::new();
        for s in 0..40u32 {
            let t = Label::from_bool(s % 2 == 0);
            for _ in 0..4 {
                truth.push(t);
                pred.push(if rng.random_bool(0.75) { t } else { t.other() });
                group.push(s);
            }
        }
        let o = vote_outcome(&truth, &pred, &group, TieRule::Ge).unwrap();
        if o.by_student.accuracy.unwrap() > 0.75 {
            wins += 1;
        }
    }
    assert!(wins >= 18, "{wins}/20");
}
