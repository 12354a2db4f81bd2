//! CSV and JSON file formats.
//!
//! Row numbers in errors are 1-based file lines, so the header is line 1
//! and the first data row is line 2.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use chrono::NaiveDate;
use perfpipe_core::aggregate::AggregatedSample;
use perfpipe_core::evaluate::RocPoint;
use perfpipe_core::record::{DailyRecord, GradeRecord, StudentId, Trial, TrialId};
use perfpipe_core::{Error, Label, FEATURE_NAMES, N_FEATURES};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

/// Exact header of the daily records file.
pub const DAILY_HEADER: [&str; 17] = [
    "student_id",
    "trial_id",
    "date",
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

/// Exact header of the grades file.
pub const GRADES_HEADER: [&str; 3] = ["student_id", "trial_id", "grade"];

const PASSIVE: usize = 7;

/// Column positions keyed by name, after checking the header against the
/// required and optional names.
struct Columns(BTreeMap<String, usize>);

impl Columns {
    fn check(header: &csv::StringRecord, required: &[&str], optional: &[&str]) -> perfpipe_core::Result<Columns> {
        let mut map = BTreeMap::new();
        for (i, name) in header.iter().enumerate() {
            let name = name.trim();
            if !required.contains(&name) && !optional.contains(&name) {
                return Err(Error::Schema(format!("unknown column {name:?}")));
            }
            if map.insert(name.to_string(), i).is_some() {
                return Err(Error::Schema(format!("duplicate column {name:?}")));
            }
        }
        if let Some(missing) = required.iter().find(|c| !map.contains_key(**c)) {
            return Err(Error::Schema(format!("missing column {missing:?}")));
        }
        Ok(Columns(map))
    }

    fn get<'r>(&self, row: &'r csv::StringRecord, name: &str) -> Option<&'r str> {
        self.0.get(name).and_then(|i| row.get(*i)).map(str::trim)
    }
}

fn range(row: usize, field: &str, value: &str, reason: &str) -> Error {
    Error::Range {
        row,
        field: field.to_string(),
        value: format!("{value:?}"),
        reason: reason.to_string(),
    }
}

fn number(row: usize, field: &str, cell: &str) -> perfpipe_core::Result<f64> {
    match cell.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(range(row, field, cell, "not a finite number")),
    }
}

fn reader<R: Read>(input: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new().has_headers(true).flexible(false).from_reader(input)
}

fn csv_error(e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line());
    Error::Schema(format!("line {line}: {e}"))
}

fn rows<R: Read>(
    input: R,
    required: &[&str],
    optional: &[&str],
    mut each: impl FnMut(usize, &Columns, &csv::StringRecord) -> perfpipe_core::Result<()>,
) -> perfpipe_core::Result<()> {
    let mut rdr = reader(input);
    let header = rdr.headers().map_err(csv_error)?.clone();
    let cols = Columns::check(&header, required, optional)?;
    let mut row = csv::StringRecord::new();
    while rdr.read_record(&mut row).map_err(csv_error)? {
        let line = row.position().map_or(0, |p| p.line()) as usize;
        each(line, &cols, &row)?;
    }
    Ok(())
}

fn student(line: usize, cell: Option<&str>) -> perfpipe_core::Result<StudentId> {
    match cell {
        Some(s) if !s.is_empty() => Ok(StudentId::new(s)),
        _ => Err(range(line, "student_id", "", "empty identifier")),
    }
}

fn trial(line: usize, cell: Option<&str>) -> perfpipe_core::Result<TrialId> {
    match cell {
        Some(s) if !s.is_empty() => Ok(TrialId::parse(s)),
        _ => Err(range(line, "trial_id", "", "empty identifier")),
    }
}

/// Parse daily records. Passive cells are mandatory; an empty survey cell
/// is a missing answer.
pub fn parse_daily<R: Read>(input: R) -> perfpipe_core::Result<Vec<DailyRecord>> {
    let mut out = Vec::new();
    let mut seen = BTreeMap::new();
    rows(input, &DAILY_HEADER, &[], |line, cols, row| {
        let student_id = student(line, cols.get(row, "student_id"))?;
        let trial_id = trial(line, cols.get(row, "trial_id"))?;
        let date_cell = cols.get(row, "date").unwrap_or("");
        let date = NaiveDate::parse_from_str(date_cell, "%Y-%m-%d")
            .map_err(|_| range(line, "date", date_cell, "not an ISO-8601 date"))?;
        let mut features = [None; N_FEATURES];
        for (k, name) in FEATURE_NAMES.iter().enumerate() {
            let cell = cols.get(row, name).unwrap_or("");
            features[k] = if cell.is_empty() {
                if k < PASSIVE {
                    return Err(range(line, name, cell, "passive value is mandatory"));
                }
                None
            } else {
                Some(number(line, name, cell)?)
            };
        }
        let mut r = DailyRecord::empty(student_id, trial_id, date);
        r.set_features(&features);
        r.check().map_err(|v| v.at_row(line))?;
        let key = (r.student_id.clone(), r.trial_id.clone(), r.date);
        if let Some(first) = seen.insert(key, line) {
            return Err(Error::Duplicate {
                row: line,
                key: format!("{} on {} (first at row {first})", r.student_id, r.date),
            });
        }
        out.push(r);
        Ok(())
    })?;
    Ok(out)
}

/// Parse final grades, one per student and trial.
pub fn parse_grades<R: Read>(input: R) -> perfpipe_core::Result<Vec<GradeRecord>> {
    let mut out = Vec::new();
    let mut seen = BTreeMap::new();
    rows(input, &GRADES_HEADER, &[], |line, cols, row| {
        let cell = cols.get(row, "grade").unwrap_or("");
        let g = GradeRecord {
            student_id: student(line, cols.get(row, "student_id"))?,
            trial_id: trial(line, cols.get(row, "trial_id"))?,
            grade: number(line, "grade", cell)?,
        };
        g.check().map_err(|v| v.at_row(line))?;
        if let Some(first) = seen.insert((g.student_id.clone(), g.trial_id.clone()), line) {
            return Err(Error::Duplicate {
                row: line,
                key: format!("grade for {} (first at row {first})", g.student_id),
            });
        }
        out.push(g);
        Ok(())
    })?;
    Ok(out)
}

fn open(path: &Path) -> Result<fs::File> {
    fs::File::open(path).map_err(|e| CliError::io(path, e))
}

fn in_file<T>(path: &Path, r: perfpipe_core::Result<T>) -> Result<T> {
    r.map_err(|e| match e {
        Error::Schema(m) => CliError::Core(Error::Schema(format!("{}: {m}", path.display()))),
        other => CliError::Core(other),
    })
}

pub fn read_daily_csv(path: &Path) -> Result<Vec<DailyRecord>> {
    in_file(path, parse_daily(open(path)?))
}

pub fn read_grades_csv(path: &Path) -> Result<Vec<GradeRecord>> {
    in_file(path, parse_grades(open(path)?))
}

fn cell(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn write_daily<W: Write>(out: W, records: &[DailyRecord]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(DAILY_HEADER)?;
    for r in records {
        let mut row = vec![r.student_id.to_string(), r.trial_id.to_string(), r.date.to_string()];
        row.extend(r.features().iter().map(|v| cell(*v)));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_grades<W: Write>(out: W, grades: &[GradeRecord]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(GRADES_HEADER)?;
    for g in grades {
        w.write_record([g.student_id.to_string(), g.trial_id.to_string(), g.grade.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// Labeled samples: provenance columns, the 14 features and `label`.
pub fn write_samples<W: Write>(out: W, samples: &[AggregatedSample]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["student_id", "trial_id", "window_index", "n_days"];
    header.extend(FEATURE_NAMES);
    header.push("label");
    w.write_record(&header)?;
    for s in samples {
        let mut row = vec![
            s.student_id.to_string(),
            s.trial_id.to_string(),
            s.window_index.to_string(),
            s.n_days.to_string(),
        ];
        row.extend(s.features.iter().map(f64::to_string));
        row.push(s.label.index().to_string());
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_roc<W: Write>(out: W, points: &[RocPoint]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["fpr", "tpr"])?;
    for p in points {
        w.write_record([p.fpr.to_string(), p.tpr.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// One row of a predictions file.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct PredictionRow {
    pub student_id: StudentId,
    /// Present when the file carries a `trial_id` column.
    pub trial_id: Option<TrialId>,
    pub window_index: u32,
    pub truth: Label,
    pub predicted: Label,
    pub voted: Option<Label>,
}

const PREDICTION_COLUMNS: [&str; 4] = ["student_id", "window_index", "true", "predicted"];

fn label(line: usize, field: &str, cell: &str) -> perfpipe_core::Result<Label> {
    match cell {
        "0" => Ok(Label::Below),
        "1" => Ok(Label::Above),
        _ => Err(range(line, field, cell, "label must be 0 or 1")),
    }
}

/// Parse a predictions file: `student_id,window_index,true,predicted`, with
/// optional `trial_id` and `voted` columns.
pub fn parse_predictions<R: Read>(input: R) -> perfpipe_core::Result<Vec<PredictionRow>> {
    let mut out = Vec::new();
    rows(input, &PREDICTION_COLUMNS, &["trial_id", "voted"], |line, cols, row| {
        let window = cols.get(row, "window_index").unwrap_or("");
        out.push(PredictionRow {
            student_id: student(line, cols.get(row, "student_id"))?,
            trial_id: match cols.get(row, "trial_id") {
                Some(_) => Some(trial(line, cols.get(row, "trial_id"))?),
                None => None,
            },
            window_index: window
                .parse()
                .map_err(|_| range(line, "window_index", window, "not a non-negative integer"))?,
            truth: label(line, "true", cols.get(row, "true").unwrap_or(""))?,
            predicted: label(line, "predicted", cols.get(row, "predicted").unwrap_or(""))?,
            voted: match cols.get(row, "voted") {
                None | Some("") => None,
                Some(v) => Some(label(line, "voted", v)?),
            },
        });
        Ok(())
    })?;
    Ok(out)
}

pub fn read_predictions_csv(path: &Path) -> Result<Vec<PredictionRow>> {
    in_file(path, parse_predictions(open(path)?))
}

/// Write predictions. The `trial_id` and `voted` columns are written only
/// when some row carries them.
pub fn write_predictions<W: Write>(out: W, rows: &[PredictionRow]) -> csv::Result<()> {
    let with_trial = rows.iter().any(|r| r.trial_id.is_some());
    let with_voted = rows.iter().any(|r| r.voted.is_some());
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["student_id"];
    if with_trial {
        header.push("trial_id");
    }
    header.extend(["window_index", "true", "predicted"]);
    if with_voted {
        header.push("voted");
    }
    w.write_record(&header)?;
    for r in rows {
        let mut row = vec![r.student_id.to_string()];
        if with_trial {
            row.push(r.trial_id.as_ref().map(|t| t.to_string()).unwrap_or_default());
        }
        row.push(r.window_index.to_string());
        row.push(r.truth.index().to_string());
        row.push(r.predicted.index().to_string());
        if with_voted {
            row.push(r.voted.map(|v| v.index().to_string()).unwrap_or_default());
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

const BUNDLE_FORMAT: &str = "perfpipe-trial";
const BUNDLE_VERSION: u32 = 1;

/// A validated trial on disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bundle {
    pub format: String,
    pub version: u32,
    pub trial: Trial,
}

impl Bundle {
    pub fn new(trial: Trial) -> Self {
        Bundle {
            format: BUNDLE_FORMAT.to_string(),
            version: BUNDLE_VERSION,
            trial,
        }
    }
}

/// Read a bundle and re-check every trial invariant.
pub fn read_bundle(path: &Path) -> Result<Trial> {
    let bytes = fs::read(path).map_err(|e| CliError::io(path, e))?;
    let bundle: Bundle = serde_json::from_slice(&bytes).map_err(|e| CliError::format(path, e))?;
    if bundle.format != BUNDLE_FORMAT || bundle.version != BUNDLE_VERSION {
        return Err(CliError::format(
            path,
            format!("unsupported bundle {} v{}", bundle.format, bundle.version),
        ));
    }
    bundle.trial.validate()?;
    Ok(bundle.trial)
}

/// Read a JSON file into `T`; malformed content is a schema error.
pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let bytes = fs::read(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_slice(&bytes).map_err(|e| CliError::format(path, e))
}

/// Pretty JSON with a trailing newline.
pub fn to_json<T: Serialize>(value: &T) -> Vec<u8> {
    let mut v = serde_json::to_vec_pretty(value).expect("report types serialize");
    v.push(b'\n');
    v
}

/// Write `bytes` to `path` through a temporary sibling, so readers never see
/// a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension(match path.extension() {
        Some(e) => format!("{}.tmp", e.to_string_lossy()),
        None => "tmp".to_string(),
    });
    fs::write(&tmp, bytes).map_err(|e| CliError::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| CliError::io(path, e))
}

/// Render a CSV writer into memory.
pub fn csv_bytes(f: impl FnOnce(&mut Vec<u8>) -> csv::Result<()>) -> Vec<u8> {
    let mut buf = Vec::new();
    f(&mut buf).expect("writing CSV into memory");
    buf
}

/// Distinct trials in a record set, in order.
pub fn trial_ids(records: &[DailyRecord], grades: &[GradeRecord]) -> BTreeSet<TrialId> {
    records
        .iter()
        .map(|r| r.trial_id.clone())
        .chain(grades.iter().map(|g| g.trial_id.clone()))
        .collect()
}
