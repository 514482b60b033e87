//! Event/student data model and JSONL ingestion.
//!
//! A student's history is a time-ordered list of `(action, day)` events.
//! Days are integers counted from a fixed epoch; sub-day precision is
//! truncated by data producers before ingestion. Actions are opaque names
//! mapped to contiguous indices by a [`Vocabulary`].
//!
//! The wire format is JSONL with two line shapes, distinguished by their
//! fields:
//!
//! ```text
//! {"student_id":"s1","enrollment_day":10,"graduated_day":60}
//! {"student_id":"s1","action":"view_0","day":10}
//! ```
//!
//! Every student must have exactly one enrollment line; `graduated_day` is
//! optional and its presence (before an optional deadline) defines the
//! positive label. Unknown fields are ignored.

use std::collections::HashMap;
use std::io::BufRead;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// One student action at day granularity.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Event {
    /// Index into the owning dataset's [`Vocabulary`].
    pub action_id: usize,
    /// Calendar day, integer days since a fixed epoch. Non-negative.
    pub timestamp: i64,
}

/// One student's time-ordered events plus the binary graduation label.
///
/// Events are sorted by timestamp; ties keep ingestion order. The raw
/// `graduated_day` is retained so labels can be re-derived against a
/// different deadline with [`relabel_with_deadline`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StudentRecord {
    pub student_id: String,
    pub enrollment_day: i64,
    pub events: Vec<Event>,
    pub graduated_day: Option<i64>,
    /// `true` = graduated (before the deadline, when one was applied).
    pub label: bool,
}

/// Bijection between action names and contiguous indices `0..len()`.
///
/// Built by first-appearance order over the deterministically ordered
/// record set (students in order of first appearance in the stream, events
/// in time-sorted order within each student). Building from the record set
/// rather than the raw line order makes parse → serialize → parse the
/// identity on both records and index assignments.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Vocabulary {
    names: Vec<String>,
    index: HashMap<String, usize>,
}

impl Vocabulary {
    /// Number of known actions.
    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    /// Index of a known action name.
    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    /// Name of a known index.
    pub fn name_of(&self, index: usize) -> Option<&str> {
        self.names.get(index).map(String::as_str)
    }

    /// The reserved index for actions never seen at vocabulary-build time.
    ///
    /// It sits one past the last real action, so encoders that admit
    /// unknowns work over an alphabet of `len() + 1` action indices.
    pub fn unknown_index(&self) -> usize {
        self.names.len()
    }

    /// Inserts a name if absent and returns its index.
    pub fn intern(&mut self, name: &str) -> usize {
        if let Some(&i) = self.index.get(name) {
            return i;
        }
        let i = self.names.len();
        self.names.push(name.to_string());
        self.index.insert(name.to_string(), i);
        i
    }
}

/// Summary counts for a parsed dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetStats {
    pub student_count: usize,
    pub graduate_count: usize,
    /// `graduate_count / student_count`; 0 for an empty dataset.
    pub graduation_rate: f64,
    pub min_events: usize,
    pub mean_events: f64,
    pub max_events: usize,
    pub unique_actions: usize,
}

#[derive(Debug, Error)]
pub enum ParseError {
    #[error("line {line}: malformed record: {message}")]
    MalformedLine { line: usize, message: String },
    #[error("line {line}: negative day {value} in field `{field}`")]
    NegativeDay {
        line: usize,
        field: &'static str,
        value: i64,
    },
    #[error("line {line}: duplicate enrollment line for student `{student_id}`")]
    DuplicateEnrollment { line: usize, student_id: String },
    #[error("student `{student_id}` has event lines but no enrollment line")]
    MissingEnrollment { student_id: String },
    #[error("i/o error while reading event log: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Deserialize)]
struct EventLine {
    student_id: String,
    action: String,
    day: i64,
}

#[derive(Debug, Deserialize)]
struct EnrollmentLine {
    student_id: String,
    enrollment_day: i64,
    #[serde(default)]
    graduated_day: Option<i64>,
}

#[derive(Debug, Serialize)]
struct EventLineOut<'a> {
    student_id: &'a str,
    action: &'a str,
    day: i64,
}

#[derive(Debug, Serialize)]
struct EnrollmentLineOut<'a> {
    student_id: &'a str,
    enrollment_day: i64,
    #[serde(skip_serializing_if = "Option::is_none")]
    graduated_day: Option<i64>,
}

struct PendingStudent {
    student_id: String,
    enrollment: Option<(i64, Option<i64>)>,
    // (day, name, arrival) triples; arrival breaks no ties, it preserves them.
    events: Vec<(i64, String, usize)>,
}

/// Parses a JSONL event log into per-student records and the action
/// vocabulary.
///
/// Records come back in order of each student's first appearance, with
/// events time-sorted (ties keep ingestion order). Duplicate
/// (student, day, action) triples are retained.
pub fn parse_event_log<R: BufRead>(
    reader: R,
) -> Result<(Vec<StudentRecord>, Vocabulary), ParseError> {
    let mut order: Vec<String> = Vec::new();
    let mut students: HashMap<String, PendingStudent> = HashMap::new();
    let mut arrivals = 0usize;

    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        // An event line always has `action`; an enrollment line never does.
        if let Ok(ev) = serde_json::from_str::<EventLine>(&line) {
            if ev.day < 0 {
                return Err(ParseError::NegativeDay {
                    line: line_no,
                    field: "day",
                    value: ev.day,
                });
            }
            let entry = entry_for(&mut students, &mut order, &ev.student_id);
            entry.events.push((ev.day, ev.action, arrivals));
            arrivals += 1;
        } else {
            let en = serde_json::from_str::<EnrollmentLine>(&line).map_err(|e| {
                ParseError::MalformedLine {
                    line: line_no,
                    message: e.to_string(),
                }
            })?;
            if en.enrollment_day < 0 {
                return Err(ParseError::NegativeDay {
                    line: line_no,
                    field: "enrollment_day",
                    value: en.enrollment_day,
                });
            }
            if let Some(d) = en.graduated_day {
                if d < 0 {
                    return Err(ParseError::NegativeDay {
                        line: line_no,
                        field: "graduated_day",
                        value: d,
                    });
                }
            }
            let entry = entry_for(&mut students, &mut order, &en.student_id);
            if entry.enrollment.is_some() {
                return Err(ParseError::DuplicateEnrollment {
                    line: line_no,
                    student_id: en.student_id,
                });
            }
            entry.enrollment = Some((en.enrollment_day, en.graduated_day));
        }
    }

    let mut vocab = Vocabulary::default();
    let mut records = Vec::with_capacity(order.len());
    for id in &order {
        let mut pending = students.remove(id).expect("student recorded in order");
        let (enrollment_day, graduated_day) =
            pending
                .enrollment
                .ok_or_else(|| ParseError::MissingEnrollment {
                    student_id: id.clone(),
                })?;
        pending.events.sort_by_key(|&(day, _, arrival)| (day, arrival));
        let events = pending
            .events
            .iter()
            .map(|(day, name, _)| Event {
                action_id: vocab.intern(name),
                timestamp: *day,
            })
            .collect();
        records.push(StudentRecord {
            student_id: pending.student_id,
            enrollment_day,
            events,
            graduated_day,
            label: graduated_day.is_some(),
        });
    }
    Ok((records, vocab))
}

fn entry_for<'a>(
    students: &'a mut HashMap<String, PendingStudent>,
    order: &mut Vec<String>,
    id: &str,
) -> &'a mut PendingStudent {
    if !students.contains_key(id) {
        order.push(id.to_string());
        students.insert(
            id.to_string(),
            PendingStudent {
                student_id: id.to_string(),
                enrollment: None,
                events: Vec::new(),
            },
        );
    }
    students.get_mut(id).expect("just inserted")
}

/// Writes records back to the JSONL wire format.
///
/// Emits one enrollment line per student followed by its events in stored
/// order. Parsing the output reproduces the records and the vocabulary's
/// index assignments exactly.
pub fn serialize_event_log(records: &[StudentRecord], vocab: &Vocabulary) -> String {
    let mut out = String::new();
    for record in records {
        let enrollment = EnrollmentLineOut {
            student_id: &record.student_id,
            enrollment_day: record.enrollment_day,
            graduated_day: record.graduated_day,
        };
        out.push_str(&serde_json::to_string(&enrollment).expect("serializable"));
        out.push('\n');
        for event in &record.events {
            let line = EventLineOut {
                student_id: &record.student_id,
                action: vocab.name_of(event.action_id).expect("id within vocabulary"),
                day: event.timestamp,
            };
            out.push_str(&serde_json::to_string(&line).expect("serializable"));
            out.push('\n');
        }
    }
    out
}

/// Drops every event that happened before the student's enrollment day.
///
/// Event order is otherwise preserved; the record may legally become
/// empty. Idempotent.
pub fn filter_pre_enrollment(record: &StudentRecord) -> StudentRecord {
    let mut filtered = record.clone();
    filtered
        .events
        .retain(|e| e.timestamp >= record.enrollment_day);
    filtered
}

/// Binary label: graduated strictly before the deadline.
pub fn derive_label(graduation_timestamp: Option<i64>, deadline: i64) -> bool {
    matches!(graduation_timestamp, Some(day) if day < deadline)
}

/// Re-derives every label against the given deadline.
pub fn relabel_with_deadline(records: &mut [StudentRecord], deadline: i64) {
    for record in records {
        record.label = derive_label(record.graduated_day, deadline);
    }
}

/// Exact summary counts; the mean keeps full precision.
pub fn dataset_stats(records: &[StudentRecord]) -> DatasetStats {
    if records.is_empty() {
        return DatasetStats {
            student_count: 0,
            graduate_count: 0,
            graduation_rate: 0.0,
            min_events: 0,
            mean_events: 0.0,
            max_events: 0,
            unique_actions: 0,
        };
    }
    let student_count = records.len();
    let graduate_count = records.iter().filter(|r| r.label).count();
    let mut min_events = usize::MAX;
    let mut max_events = 0usize;
    let mut total_events = 0usize;
    let mut seen = std::collections::HashSet::new();
    for record in records {
        let n = record.events.len();
        min_events = min_events.min(n);
        max_events = max_events.max(n);
        total_events += n;
        for event in &record.events {
            seen.insert(event.action_id);
        }
    }
    DatasetStats {
        student_count,
        graduate_count,
        graduation_rate: graduate_count as f64 / student_count as f64,
        min_events,
        mean_events: total_events as f64 / student_count as f64,
        max_events,
        unique_actions: seen.len(),
    }
}
