//! Student-performance classification pipeline.
//!
//! Daily behavioral records are averaged into per-student weekly or monthly
//! samples, labeled by a per-trial median split of final grades, and fed to
//! one of seven native classifiers evaluated with leave-one-out
//! cross-validation. Per-sample predictions can then be fused per student by
//! median voting.
//!
//! The crate is `no_std` (it needs `alloc`). File formats, parallel execution
//! and the command line live in the `perfpipe` companion crate.

#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod aggregate;
pub mod error;
pub mod evaluate;
pub mod exec;
pub mod learners;
pub mod record;
pub mod rng;
pub mod synth;
pub mod tune;
pub mod vote;

mod float;

pub use aggregate::{AggregatedSample, Imputation, Label, WindowKind, WindowPolicy};
pub use error::{Error, Result};
pub use evaluate::{ConfusionMatrix, EvalOptions, EvalReport};
pub use exec::{Executor, Serial};
pub use learners::{ClassifierKind, ClassifierSpec, ParamMap, ParamValue, TrainedModel};
pub use record::{DailyRecord, GradeRecord, StudentId, Trial, TrialId};
pub use vote::TieRule;

/// Number of features carried by a daily record and an aggregated sample.
pub const N_FEATURES: usize = 14;

/// Feature names in canonical (CSV) order.
pub const FEATURE_NAMES: [&str; N_FEATURES] = [
    "pct_other",
    "pct_house",
    "pct_still",
    "pct_exercise",
    "pct_in_vehicle",
    "pct_unknown",
    "pct_tilting",
    "arousal",
    "valence",
    "sociability",
    "sleep_quality",
    "sleep_hours",
    "exercise_hours",
    "study_hours",
];
