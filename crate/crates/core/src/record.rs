//! Trial data model: daily behavioral records, final grades, and the
//! validated [`Trial`] that bundles them.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::cmp::Ordering;
use core::fmt;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::N_FEATURES;

/// Anonymized student identifier.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct StudentId(pub String);

impl StudentId {
    pub fn new(id: impl Into<String>) -> Self {
        StudentId(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for StudentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Which data-collection trial a record belongs to.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(from = "String", into = "String")]
pub enum TrialId {
    T2018,
    T2021,
    Custom(String),
}

impl From<String> for TrialId {
    fn from(s: String) -> Self {
        TrialId::parse(&s)
    }
}

impl From<TrialId> for String {
    fn from(t: TrialId) -> Self {
        t.to_string()
    }
}

impl TrialId {
    pub fn parse(s: &str) -> TrialId {
        match s.trim() {
            "2018" | "T2018" => TrialId::T2018,
            "2021" | "T2021" => TrialId::T2021,
            other => TrialId::Custom(other.to_string()),
        }
    }
}

impl fmt::Display for TrialId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TrialId::T2018 => f.write_str("2018"),
            TrialId::T2021 => f.write_str("2021"),
            TrialId::Custom(s) => f.write_str(s),
        }
    }
}

/// Valid values of the arousal/valence scales (0..=4 mapped onto -1..=1).
pub const SAM_GRID: [f64; 5] = [-1.0, -0.5, 0.0, 0.5, 1.0];

const SUM_SLACK: f64 = 1e-9;

/// One student-day.
///
/// Passive percentages come from the phone and are always present; survey
/// answers are prompted and may be missing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DailyRecord {
    pub student_id: StudentId,
    pub trial_id: TrialId,
    pub date: NaiveDate,
    pub pct_other: f64,
    pub pct_house: f64,
    pub pct_still: f64,
    pub pct_exercise: f64,
    pub pct_in_vehicle: f64,
    pub pct_unknown: f64,
    pub pct_tilting: f64,
    pub arousal: Option<f64>,
    pub valence: Option<f64>,
    pub sociability: Option<f64>,
    pub sleep_quality: Option<f64>,
    pub sleep_hours: Option<f64>,
    pub exercise_hours: Option<f64>,
    pub study_hours: Option<f64>,
}

/// A single invariant violation found by [`DailyRecord::check`].
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub field: &'static str,
    pub value: f64,
    pub reason: &'static str,
}

impl Violation {
    pub fn at_row(self, row: usize) -> Error {
        Error::Range {
            row,
            field: self.field.to_string(),
            value: format!("{}", self.value),
            reason: self.reason.to_string(),
        }
    }
}

impl DailyRecord {
    /// Record with all passive fields zero and no survey answers.
    pub fn empty(student_id: StudentId, trial_id: TrialId, date: NaiveDate) -> Self {
        DailyRecord {
            student_id,
            trial_id,
            date,
            pct_other: 0.0,
            pct_house: 0.0,
            pct_still: 0.0,
            pct_exercise: 0.0,
            pct_in_vehicle: 0.0,
            pct_unknown: 0.0,
            pct_tilting: 0.0,
            arousal: None,
            valence: None,
            sociability: None,
            sleep_quality: None,
            sleep_hours: None,
            exercise_hours: None,
            study_hours: None,
        }
    }

    /// Feature values in canonical order; `None` marks a missing survey answer.
    pub fn features(&self) -> [Option<f64>; N_FEATURES] {
        [
            Some(self.pct_other),
            Some(self.pct_house),
            Some(self.pct_still),
            Some(self.pct_exercise),
            Some(self.pct_in_vehicle),
            Some(self.pct_unknown),
            Some(self.pct_tilting),
            self.arousal,
            self.valence,
            self.sociability,
            self.sleep_quality,
            self.sleep_hours,
            self.exercise_hours,
            self.study_hours,
        ]
    }

    /// Overwrite the feature fields from a canonical-order vector. Passive
    /// slots must be `Some`.
    pub fn set_features(&mut self, f: &[Option<f64>; N_FEATURES]) {
        let passive = |v: Option<f64>| v.unwrap_or(0.0);
        self.pct_other = passive(f[0]);
        self.pct_house = passive(f[1]);
        self.pct_still = passive(f[2]);
        self.pct_exercise = passive(f[3]);
        self.pct_in_vehicle = passive(f[4]);
        self.pct_unknown = passive(f[5]);
        self.pct_tilting = passive(f[6]);
        self.arousal = f[7];
        self.valence = f[8];
        self.sociability = f[9];
        self.sleep_quality = f[10];
        self.sleep_hours = f[11];
        self.exercise_hours = f[12];
        self.study_hours = f[13];
    }

    /// Check the record's domain invariants.
    pub fn check(&self) -> core::result::Result<(), Violation> {
        let names = crate::FEATURE_NAMES;
        let feats = self.features();
        for (i, v) in feats.iter().enumerate() {
            if let Some(v) = v {
                if !v.is_finite() {
                    return Err(Violation {
                        field: names[i],
                        value: *v,
                        reason: "not finite",
                    });
                }
            }
        }
        for (i, v) in feats.iter().take(7).enumerate() {
            let v = v.unwrap_or(0.0);
            if !(0.0..=1.0).contains(&v) {
                return Err(Violation {
                    field: names[i],
                    value: v,
                    reason: "fraction outside [0, 1]",
                });
            }
        }
        let activity =
            self.pct_still + self.pct_exercise + self.pct_in_vehicle + self.pct_unknown + self.pct_tilting;
        if activity > 1.0 + SUM_SLACK {
            return Err(Violation {
                field: "pct_still",
                value: activity,
                reason: "activity fractions sum above 1",
            });
        }
        let location = self.pct_other + self.pct_house;
        if location > 1.0 + SUM_SLACK {
            return Err(Violation {
                field: "pct_other",
                value: location,
                reason: "location fractions sum above 1",
            });
        }
        for (name, v) in [("arousal", self.arousal), ("valence", self.valence)] {
            if let Some(v) = v {
                if !SAM_GRID.iter().any(|g| (g - v).abs() < SUM_SLACK) {
                    return Err(Violation {
                        field: name,
                        value: v,
                        reason: "not on the 5-point SAM grid",
                    });
                }
            }
        }
        for (i, v) in feats.iter().enumerate().skip(9) {
            if let Some(v) = v {
                if *v < 0.0 {
                    return Err(Violation {
                        field: names[i],
                        value: *v,
                        reason: "negative",
                    });
                }
            }
        }
        Ok(())
    }

    fn total_cmp(&self, other: &Self) -> Ordering {
        self.student_id
            .cmp(&other.student_id)
            .then(self.date.cmp(&other.date))
            .then(self.trial_id.cmp(&other.trial_id))
            .then_with(|| {
                let (a, b) = (self.features(), other.features());
                a.iter()
                    .zip(b.iter())
                    .map(|(x, y)| match (x, y) {
                        (None, None) => Ordering::Equal,
                        (None, Some(_)) => Ordering::Less,
                        (Some(_), None) => Ordering::Greater,
                        (Some(x), Some(y)) => x.total_cmp(y),
                    })
                    .find(|o| *o != Ordering::Equal)
                    .unwrap_or(Ordering::Equal)
            })
    }
}

/// Highest grade on the 0-20 scale.
pub const MAX_GRADE: f64 = 20.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradeRecord {
    pub student_id: StudentId,
    pub trial_id: TrialId,
    pub grade: f64,
}

impl GradeRecord {
    pub fn check(&self) -> core::result::Result<(), Violation> {
        if !(0.0..=MAX_GRADE).contains(&self.grade) {
            return Err(Violation {
                field: "grade",
                value: self.grade,
                reason: "grade outside [0, 20]",
            });
        }
        Ok(())
    }
}

/// A validated trial: every record dated inside the window and belonging to
/// a graded student. Records and grades are kept sorted, so two trials built
/// from the same rows in any order compare equal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trial {
    pub trial_id: TrialId,
    pub start_date: NaiveDate,
    pub end_date: NaiveDate,
    pub records: Vec<DailyRecord>,
    pub grades: Vec<GradeRecord>,
}

impl Trial {
    pub fn grade_of(&self, student: &StudentId) -> Option<f64> {
        self.grades
            .binary_search_by(|g| g.student_id.cmp(student))
            .ok()
            .map(|i| self.grades[i].grade)
    }

    pub fn students(&self) -> impl Iterator<Item = &StudentId> {
        self.grades.iter().map(|g| &g.student_id)
    }

    /// Re-run every invariant check, e.g. after deserializing a bundle.
    pub fn validate(&self) -> Result<()> {
        build_trial(
            self.records.clone(),
            self.grades.clone(),
            self.trial_id.clone(),
            self.start_date,
            self.end_date,
        )
        .map(|_| ())
    }
}

/// Assemble and validate a trial.
pub fn build_trial(
    mut records: Vec<DailyRecord>,
    mut grades: Vec<GradeRecord>,
    trial_id: TrialId,
    start: NaiveDate,
    end: NaiveDate,
) -> Result<Trial> {
    if start > end {
        return Err(Error::InvalidParam {
            name: "end_date".to_string(),
            reason: format!("{end} precedes start {start}"),
        });
    }
    let mut graded = BTreeSet::new();
    for (i, g) in grades.iter().enumerate() {
        if g.trial_id != trial_id {
            return Err(Error::TrialMismatch {
                expected: trial_id.to_string(),
                found: g.trial_id.to_string(),
            });
        }
        g.check().map_err(|v| v.at_row(i + 1))?;
        if !graded.insert(g.student_id.clone()) {
            return Err(Error::Duplicate {
                row: i + 1,
                key: format!("grade for {}", g.student_id),
            });
        }
    }
    for (i, r) in records.iter().enumerate() {
        if r.trial_id != trial_id {
            return Err(Error::TrialMismatch {
                expected: trial_id.to_string(),
                found: r.trial_id.to_string(),
            });
        }
        r.check().map_err(|v| v.at_row(i + 1))?;
        if r.date < start || r.date > end {
            return Err(Error::Date {
                student: r.student_id.to_string(),
                date: r.date.to_string(),
                start: start.to_string(),
                end: end.to_string(),
            });
        }
        if !graded.contains(&r.student_id) {
            return Err(Error::OrphanRecord {
                student: r.student_id.to_string(),
                date: r.date.to_string(),
            });
        }
    }
    records.sort_by(DailyRecord::total_cmp);
    grades.sort_by(|a, b| a.student_id.cmp(&b.student_id));
    Ok(Trial {
        trial_id,
        start_date: start,
        end_date: end,
        records,
        grades,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn day(d: u32) -> NaiveDate {
        NaiveDate::from_ymd_opt(2018, 5, d).unwrap()
    }

    fn rec(student: &str, d: u32) -> DailyRecord {
        let mut r = DailyRecord::empty(StudentId::new(student), TrialId::T2018, day(d));
        r.pct_still = 0.5;
        r.pct_house = 0.4;
        r.pct_other = 0.6;
        r
    }

    fn grade(student: &str, g: f64) -> GradeRecord {
        GradeRecord {
            student_id: StudentId::new(student),
            trial_id: TrialId::T2018,
            grade: g,
        }
    }

    #[test]
    fn twenty_eight_graded_students_build() {
        let grades: Vec<_> = (0..28).map(|i| grade(&format!("s{i:02}"), 10.0 + i as f64 * 0.15)).collect();
        let records: Vec<_> = (0..28)
            .flat_map(|i| (12..=31).map(move |d| rec(&format!("s{i:02}"), d)))
            .collect();
        let t = build_trial(records, grades, TrialId::T2018, day(12), NaiveDate::from_ymd_opt(2018, 6, 12).unwrap())
            .unwrap();
        assert_eq!(t.students().count(), 28);
        assert_eq!(t.records.len(), 28 * 20);
    }

    #[test]
    fn record_before_start_is_date_error() {
        let err = build_trial(vec![rec("a", 11)], vec![grade("a", 12.0)], TrialId::T2018, day(12), day(30))
            .unwrap_err();
        assert!(matches!(err, Error::Date { .. }));
    }

    #[test]
    fn ungraded_student_is_orphan() {
        let err = build_trial(vec![rec("b", 13)], vec![grade("a", 12.0)], TrialId::T2018, day(12), day(30))
            .unwrap_err();
        assert!(matches!(err, Error::OrphanRecord { .. }));
    }

    #[test]
    fn duplicate_grade_rejected() {
        let err = build_trial(vec![], vec![grade("a", 12.0), grade("a", 13.0)], TrialId::T2018, day(12), day(30))
            .unwrap_err();
        assert!(matches!(err, Error::Duplicate { row: 2, .. }));
    }

    #[test]
    fn grade_above_twenty_rejected() {
        let err = build_trial(vec![], vec![grade("a", 21.0)], TrialId::T2018, day(12), day(30)).unwrap_err();
        assert!(matches!(err, Error::Range { .. }));
    }

    #[test]
    fn record_invariants() {
        let mut r = rec("a", 12);
        assert!(r.check().is_ok());
        r.pct_still = 1.2;
        assert_eq!(r.check().unwrap_err().field, "pct_still");
        let mut r = rec("a", 12);
        r.pct_exercise = 0.6;
        assert!(r.check().is_err(), "activity sum 1.1");
        let mut r = rec("a", 12);
        r.pct_house = 0.5;
        assert!(r.check().is_err(), "location sum 1.1");
        let mut r = rec("a", 12);
        r.arousal = Some(0.5);
        assert!(r.check().is_ok());
        r.arousal = Some(0.3);
        assert_eq!(r.check().unwrap_err().field, "arousal");
        let mut r = rec("a", 12);
        r.sleep_hours = Some(-1.0);
        assert_eq!(r.check().unwrap_err().field, "sleep_hours");
    }

    #[test]
    fn row_order_does_not_matter() {
        let records = vec![rec("a", 12), rec("b", 13), rec("a", 14), rec("b", 12)];
        let mut shuffled = records.clone();
        shuffled.reverse();
        let grades = vec![grade("a", 12.0), grade("b", 14.0)];
        let mut g2 = grades.clone();
        g2.reverse();
        let t1 = build_trial(records, grades, TrialId::T2018, day(12), day(30)).unwrap();
        let t2 = build_trial(shuffled, g2, TrialId::T2018, day(12), day(30)).unwrap();
        assert_eq!(t1, t2);
    }
}
