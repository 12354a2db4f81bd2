//! Synthetic trials with known ground truth.
//!
//! Each student belongs to a high or a low performer archetype. A day is
//! drawn in a latent space as
//!
//! ```text
//! z = a * (sep / 2) * c * v  +  u  +  e
//! ```
//!
//! with `a = +-1` the archetype, `v` a unit signal direction, `e ~ N(0, I)`
//! daily noise and `c = sqrt(1/7)`. The per-student offset `u` is drawn
//! from `N(0, s^2)` on the features that carry no signal and is zero on the
//! rest, so students differ in habits unrelated to performance. A 7-day
//! window mean then has standard deviation `c` along `v` and the two
//! archetype means sit `sep` apart in Mahalanobis distance. Feature `k` is
//! `base_k + unit_k * signal_k + noise_k * noise_k_latent`, followed by
//! clipping into the record domains. With `noise == unit` (the default) the
//! latent and feature geometries agree.

use alloc::vec::Vec;

use chrono::{Days, NaiveDate};
use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::aggregate::{AggregatedSample, Label};
use crate::error::{Error, Result};
use crate::float::sqrt;
use crate::record::{DailyRecord, GradeRecord, StudentId, Trial, TrialId, MAX_GRADE, SAM_GRID};
use crate::rng::{self, Rng};
use crate::N_FEATURES;

const PCT_OTHER: usize = 0;
const PCT_HOUSE: usize = 1;
const ACTIVITY: core::ops::Range<usize> = 2..7;
const AROUSAL: usize = 7;
const VALENCE: usize = 8;

/// Grade means of the high and low archetypes.
pub const HIGH_GRADE: f64 = 15.0;
pub const LOW_GRADE: f64 = 11.0;

/// Feature units per latent unit.
pub const UNIT: [f64; N_FEATURES] = [
    0.08, 0.08, 0.08, 0.02, 0.02, 0.03, 0.02, 0.5, 0.5, 1.0, 0.8, 1.0, 0.3, 1.2,
];

const BASE_IN_PERSON: [f64; N_FEATURES] = [
    0.35, 0.55, 0.55, 0.05, 0.05, 0.10, 0.05, 0.0, 0.25, 3.0, 3.0, 7.0, 0.5, 4.0,
];

/// Unnormalized signal weights: study, sleep and exercise favour the high
/// archetype; time at home and tilting favour the low one.
pub const DEFAULT_SIGNAL: [f64; N_FEATURES] = [
    0.0, -0.6, 0.0, 0.5, 0.0, 0.0, -0.4, 0.0, 0.0, 0.0, 0.6, 0.6, 0.0, 1.0,
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    InPerson,
    /// Classes attended from home: location mass moves to the house.
    Remote,
}

impl Regime {
    pub fn base(self) -> [f64; N_FEATURES] {
        let mut b = BASE_IN_PERSON;
        if self == Regime::Remote {
            b[PCT_HOUSE] = 0.75;
            b[PCT_OTHER] = 0.15;
        }
        b
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrialConfig {
    pub n_students: usize,
    pub n_days: usize,
    pub trial_id: TrialId,
    pub start_date: NaiveDate,
    pub regime: Regime,
    /// Mahalanobis distance between archetype means of 7-day windows.
    pub class_sep: f64,
    /// Per-feature noise standard deviations, in feature units.
    pub noise: [f64; N_FEATURES],
    /// Per-feature signal weights; normalized to unit length.
    pub signal: [f64; N_FEATURES],
    /// Latent standard deviation of the per-student offset on the features
    /// without signal.
    pub student_spread: f64,
    /// Chance that a low performer has one bad week.
    pub burst_prob: f64,
    /// Extra share of the day spent at home during a bad week.
    pub burst_shift: f64,
    pub grade_noise: f64,
    pub seed: u64,
}

impl Default for TrialConfig {
    fn default() -> Self {
        TrialConfig {
            n_students: 40,
            n_days: 28,
            trial_id: TrialId::T2018,
            start_date: NaiveDate::from_ymd_opt(2018, 5, 12).expect("valid date"),
            regime: Regime::InPerson,
            class_sep: 2.0,
            noise: UNIT,
            signal: DEFAULT_SIGNAL,
            student_spread: 2.0,
            burst_prob: 0.0,
            burst_shift: 0.25,
            grade_noise: 1.0,
            seed: 0,
        }
    }
}

fn config_error(msg: &str) -> Error {
    Error::Config(msg.into())
}

impl TrialConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_students < 4 {
            return Err(config_error("n_students must be at least 4"));
        }
        if self.n_days < 7 {
            return Err(config_error("n_days must be at least 7"));
        }
        if !(self.class_sep >= 0.0 && self.class_sep.is_finite()) {
            return Err(config_error("class_sep must be finite and non-negative"));
        }
        if self.noise.iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
            return Err(config_error("noise must be finite and non-negative"));
        }
        if self.signal.iter().any(|v| !v.is_finite()) || self.signal.iter().all(|v| *v == 0.0) {
            return Err(config_error("signal needs a finite, non-zero weight"));
        }
        if !(0.0..=1.0).contains(&self.burst_prob) {
            return Err(config_error("burst_prob must lie in [0, 1]"));
        }
        for (name, v) in [
            ("student_spread", self.student_spread),
            ("burst_shift", self.burst_shift),
            ("grade_noise", self.grade_noise),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Config(alloc::format!("{name} must be finite and non-negative")));
            }
        }
        Ok(())
    }

    fn direction(&self) -> [f64; N_FEATURES] {
        let norm = sqrt(self.signal.iter().map(|v| v * v).sum());
        self.signal.map(|v| v / norm)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudentTruth {
    pub student_id: StudentId,
    /// Archetype: Above for the high performer.
    pub archetype: Label,
    pub grade: f64,
    /// Index of the bad week, if any.
    pub burst_week: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub students: Vec<StudentTruth>,
    pub bayes_accuracy: f64,
    pub bayes_std_error: f64,
}

fn normal(rng: &mut Rng) -> f64 {
    StandardNormal.sample(rng)
}

fn snap_sam(v: f64) -> f64 {
    let mut best = SAM_GRID[0];
    for g in SAM_GRID {
        if (v - g).abs() < (v - best).abs() {
            best = g;
        }
    }
    best
}

/// Push raw values into the record domains.
fn clip(mut f: [f64; N_FEATURES]) -> [f64; N_FEATURES] {
    for k in 0..7 {
        f[k] = f[k].clamp(0.0, 1.0);
    }
    let loc = f[PCT_OTHER] + f[PCT_HOUSE];
    if loc > 1.0 {
        f[PCT_OTHER] /= loc;
        f[PCT_HOUSE] /= loc;
    }
    let act: f64 = f[ACTIVITY].iter().sum();
    if act > 1.0 {
        f[ACTIVITY].iter_mut().for_each(|v| *v /= act);
    }
    f[AROUSAL] = snap_sam(f[AROUSAL]);
    f[VALENCE] = snap_sam(f[VALENCE]);
    for v in &mut f[9..] {
        *v = v.max(0.0);
    }
    f
}

/// Daily feature vectors of one student, after clipping.
fn student_days(cfg: &TrialConfig, archetype: Label, burst_week: Option<usize>, n_days: usize, rng: &mut Rng) -> Vec<[f64; N_FEATURES]> {
    let base = cfg.regime.base();
    let v = cfg.direction();
    let a = if archetype.is_positive() { 1.0 } else { -1.0 };
    let shift = a * cfg.class_sep / 2.0 * sqrt(1.0 / 7.0);
    let offset: [f64; N_FEATURES] = core::array::from_fn(|k| {
        let u = cfg.student_spread * normal(rng);
        if v[k] == 0.0 {
            u
        } else {
            0.0
        }
    });
    (0..n_days)
        .map(|day| {
            let mut f: [f64; N_FEATURES] =
                core::array::from_fn(|k| base[k] + UNIT[k] * shift * v[k] + cfg.noise[k] * (offset[k] + normal(rng)));
            if burst_week == Some(day / 7) {
                f[PCT_HOUSE] += cfg.burst_shift;
                f[PCT_OTHER] -= cfg.burst_shift;
            }
            clip(f)
        })
        .collect()
}

fn draw_grade(cfg: &TrialConfig, archetype: Label, rng: &mut Rng) -> f64 {
    let mean = if archetype.is_positive() { HIGH_GRADE } else { LOW_GRADE };
    let g = (mean + cfg.grade_noise * normal(rng)).clamp(0.0, MAX_GRADE);
    libm::round(g * 100.0) / 100.0
}

fn draw_burst(cfg: &TrialConfig, archetype: Label, n_days: usize, rng: &mut Rng) -> Option<usize> {
    let fired = rng.random_bool(cfg.burst_prob);
    let weeks = (n_days / 7).max(1);
    let week = rng.random_range(0..weeks);
    (fired && !archetype.is_positive()).then_some(week)
}

/// Draws used by [`bayes_accuracy`].
pub const BAYES_DRAWS: usize = 100_000;

/// Monte Carlo accuracy of the plug-in Bayes rule on single 7-day windows of
/// fresh students, labeled by whether their grade clears the midpoint of
/// the archetype grade means. Windows go through the same generator and
/// clipping as [`generate`]; the rule is the linear discriminant of the
/// latent Gaussian mixture. Returns the estimate and its standard error.
pub fn bayes_accuracy(cfg: &TrialConfig, draws: usize) -> (f64, f64) {
    let base = cfg.regime.base();
    let v = cfg.direction();
    let w: [f64; N_FEATURES] = core::array::from_fn(|k| v[k] * UNIT[k] / (cfg.noise[k] * cfg.noise[k]).max(1e-24));
    let cut = (HIGH_GRADE + LOW_GRADE) / 2.0;
    let mut hits = 0usize;
    let mut rng = rng::stream(cfg.seed, &[0xBA7E5]);
    for _ in 0..draws {
        let archetype = Label::from_bool(rng.random_bool(0.5));
        let burst = draw_burst(cfg, archetype, 7, &mut rng);
        let days = student_days(cfg, archetype, burst, 7, &mut rng);
        let grade = draw_grade(cfg, archetype, &mut rng);
        let score: f64 = (0..N_FEATURES)
            .map(|k| w[k] * (days.iter().map(|d| d[k]).sum::<f64>() / 7.0 - base[k]))
            .sum();
        if (score >= 0.0) == (grade >= cut) {
            hits += 1;
        }
    }
    let p = hits as f64 / draws as f64;
    (p, sqrt(p * (1.0 - p) / draws as f64))
}

/// Generate a trial: one record per student-day, exactly half of the
/// students (rounded down) high performers.
pub fn generate(cfg: &TrialConfig) -> Result<(Trial, GroundTruth)> {
    cfg.validate()?;
    let n = cfg.n_students;
    let mut archetypes: Vec<Label> = (0..n).map(|i| Label::from_bool(i < n / 2)).collect();
    archetypes.shuffle(&mut rng::stream(cfg.seed, &[0]));
    let width = if n >= 1000 { 4 } else { 3 };
    let mut records = Vec::with_capacity(n * cfg.n_days);
    let mut grades = Vec::with_capacity(n);
    let mut students = Vec::with_capacity(n);
    for (s, archetype) in archetypes.into_iter().enumerate() {
        let mut rng = rng::stream(cfg.seed, &[1, s as u64]);
        let id = StudentId::new(alloc::format!("s{:0width$}", s + 1));
        let burst_week = draw_burst(cfg, archetype, cfg.n_days, &mut rng);
        let days = student_days(cfg, archetype, burst_week, cfg.n_days, &mut rng);
        for (d, f) in days.iter().enumerate() {
            let date = cfg.start_date + Days::new(d as u64);
            let mut r = DailyRecord::empty(id.clone(), cfg.trial_id.clone(), date);
            r.set_features(&f.map(Some));
            records.push(r);
        }
        let grade = draw_grade(cfg, archetype, &mut rng);
        grades.push(GradeRecord {
            student_id: id.clone(),
            trial_id: cfg.trial_id.clone(),
            grade,
        });
        students.push(StudentTruth {
            student_id: id,
            archetype,
            grade,
            burst_week,
        });
    }
    let end = cfg.start_date + Days::new(cfg.n_days as u64 - 1);
    let trial = crate::record::build_trial(records, grades, cfg.trial_id.clone(), cfg.start_date, end)?;
    let (bayes_accuracy, bayes_std_error) = bayes_accuracy(cfg, BAYES_DRAWS);
    Ok((
        trial,
        GroundTruth {
            students,
            bayes_accuracy,
            bayes_std_error,
        },
    ))
}

/// Two overlapping Gaussian classes, one sample per synthetic student:
/// `n_minority` Below samples centred at `-sep/2` and the rest Above at
/// `+sep/2` along the first feature, unit variance everywhere.
pub fn imbalanced_gaussian(n: usize, n_minority: usize, sep: f64, seed: u64) -> Vec<AggregatedSample> {
    let mut rng = rng::stream(seed, &[2]);
    (0..n)
        .map(|i| {
            let label = Label::from_bool(i >= n_minority);
            let centre = if label.is_positive() { sep / 2.0 } else { -sep / 2.0 };
            let mut features = [0.0; N_FEATURES];
            for (k, f) in features.iter_mut().enumerate() {
                *f = normal(&mut rng) + if k == 0 { centre } else { 0.0 };
            }
            AggregatedSample {
                student_id: StudentId::new(alloc::format!("g{i:04}")),
                trial_id: TrialId::Custom("gauss".into()),
                window_index: 0,
                features,
                label,
                n_days: 1,
            }
        })
        .collect()
}
