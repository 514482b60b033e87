//! Graduation prediction from raw student event streams.
//!
//! The crate turns timestamped activity logs into graduation-probability
//! scores. It contains:
//!
//! * [`events`] — the event/student data model, JSONL ingestion, label
//!   derivation, pre-enrollment filtering, and dataset statistics.
//! * [`encoding`] — the sequence input representation (action tokens paired
//!   with discretized inter-event day gaps, pre-padded to a common length)
//!   and the order-free bag-of-words counts used by the baseline.
//! * [`baseline`] — L2-regularized logistic regression over bag-of-words
//!   counts, with optional chi-square feature selection.
//! * [`model`] — the sequence network: an embedding table, a bidirectional
//!   LSTM, global max pooling over valid timesteps, and a dense sigmoid
//!   head, trained with minibatch SGD via exact backpropagation through
//!   time. A finite-difference gradient checker ships with the crate.
//! * [`eval`] — ROC/AUC with Mann–Whitney tie handling, deterministic
//!   stratified k-fold assignment, and the per-week cross-validation
//!   protocol.
//! * [`harness`] — experiment configuration, a synthetic event-log
//!   generator with a tunable order/timing signal, the baseline-vs-network
//!   comparison runner, and report emission.
//!
//! Every seeded entry point is deterministic: the same seed produces the
//! same bytes, fold assignments, parameter draws, and dropout masks.
//!
//! ```
//! use gritnet::events::{parse_event_log, filter_pre_enrollment};
//!
//! let log = r#"{"student_id":"s1","enrollment_day":10,"graduated_day":60}
//! {"student_id":"s1","action":"view_0","day":10}
//! {"student_id":"s1","action":"quiz_0","day":12}
//! "#;
//! let (records, vocab) = parse_event_log(log.as_bytes()).unwrap();
//! let record = filter_pre_enrollment(&records[0]);
//! assert_eq!(record.events.len(), 2);
//! assert_eq!(vocab.len(), 2);
//! ```

pub mod baseline;
pub mod encoding;
pub mod eval;
pub mod events;
pub mod harness;
pub mod model;

mod book;
