//! Sequence and bag-of-words input representations.
//!
//! A student's events become a sequence of [`TokenPair`]s: the action index
//! plus a discretized inter-event day gap. The gap alphabet is bounded by
//! clamping at `delta_max`, so a token pair addresses an alphabet of
//! `L + delta_max + 1` one-hot positions (actions first, then gap buckets).
//! Sequences in a batch are pre-padded — pad tokens go *before* the real
//! tokens — and the pad token is reserved outside the real alphabet; its
//! embedding is defined to be the zero vector.
//!
//! The baseline sees none of this: [`bow_featurize`] counts how often each
//! action occurs and ignores timestamps entirely.

use thiserror::Error;

use crate::events::{StudentRecord, Vocabulary};

/// Default clamp for inter-event day gaps; gaps of 30 days or more share
/// one overflow bucket.
pub const DEFAULT_DELTA_MAX: usize = 30;

/// One timestep: an action index paired with a discretized gap bucket.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TokenPair {
    pub action_index: usize,
    pub delta_index: usize,
}

impl TokenPair {
    /// The reserved padding token. Sits outside every real alphabet and
    /// embeds to the zero vector.
    pub const PAD: TokenPair = TokenPair {
        action_index: usize::MAX,
        delta_index: usize::MAX,
    };

    pub fn is_pad(&self) -> bool {
        *self == Self::PAD
    }
}

/// A token sequence with an explicit count of real (non-pad) timesteps.
///
/// Padding, when present, occupies the leading positions; the real tokens
/// are always the suffix.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncodedSequence {
    tokens: Vec<TokenPair>,
    valid_length: usize,
}

impl EncodedSequence {
    /// Wraps unpadded tokens; every position counts as valid.
    pub fn new(tokens: Vec<TokenPair>) -> Self {
        let valid_length = tokens.len();
        EncodedSequence {
            tokens,
            valid_length,
        }
    }

    pub fn tokens(&self) -> &[TokenPair] {
        &self.tokens
    }

    pub fn valid_length(&self) -> usize {
        self.valid_length
    }

    pub fn total_length(&self) -> usize {
        self.tokens.len()
    }

    /// The real tokens, without padding.
    pub fn valid_tokens(&self) -> &[TokenPair] {
        &self.tokens[self.tokens.len() - self.valid_length..]
    }
}

/// Per-student activity counts; `counts[j]` is how many events carry
/// action index `j`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BowVector {
    pub counts: Vec<u64>,
}

impl BowVector {
    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }
}

#[derive(Debug, Error)]
pub enum EncodingError {
    #[error("action id {action_id} is outside the vocabulary (size {vocab_size})")]
    UnknownAction { action_id: usize, vocab_size: usize },
    #[error("cannot pre-pad to {target_length}: a sequence has {valid_length} valid tokens")]
    TargetLengthTooSmall {
        valid_length: usize,
        target_length: usize,
    },
}

/// Discretized gaps between adjacent events, clamped at `delta_max`.
///
/// The first event has no predecessor; its gap is defined as 0.
pub fn discretize_deltas(events: &[crate::events::Event], delta_max: usize) -> Vec<usize> {
    let mut deltas = Vec::with_capacity(events.len());
    for (t, event) in events.iter().enumerate() {
        if t == 0 {
            deltas.push(0);
        } else {
            let gap = event.timestamp - events[t - 1].timestamp;
            debug_assert!(gap >= 0, "events must be time-sorted");
            deltas.push((gap as usize).min(delta_max));
        }
    }
    deltas
}

/// Encodes a record into an unpadded token sequence.
///
/// Strict about the vocabulary: an action id outside it is an error. Use
/// [`encode_sequence_with_unknown`] when scoring data that may contain
/// actions unseen at vocabulary-build time.
pub fn encode_sequence(
    record: &StudentRecord,
    vocab: &Vocabulary,
    delta_max: usize,
) -> Result<EncodedSequence, EncodingError> {
    for event in &record.events {
        if event.action_id >= vocab.len() {
            return Err(EncodingError::UnknownAction {
                action_id: event.action_id,
                vocab_size: vocab.len(),
            });
        }
    }
    Ok(encode_sequence_with_unknown(record, vocab, delta_max))
}

/// Encodes a record, mapping any out-of-vocabulary action id to the
/// reserved unknown index `vocab.unknown_index()`.
pub fn encode_sequence_with_unknown(
    record: &StudentRecord,
    vocab: &Vocabulary,
    delta_max: usize,
) -> EncodedSequence {
    let deltas = discretize_deltas(&record.events, delta_max);
    let tokens = record
        .events
        .iter()
        .zip(deltas)
        .map(|(event, delta_index)| TokenPair {
            action_index: if event.action_id < vocab.len() {
                event.action_id
            } else {
                vocab.unknown_index()
            },
            delta_index,
        })
        .collect();
    EncodedSequence::new(tokens)
}

/// Pre-pads every sequence to `target_length`. Never truncates.
pub fn pre_pad_batch(
    sequences: &[EncodedSequence],
    target_length: usize,
) -> Result<Vec<EncodedSequence>, EncodingError> {
    for seq in sequences {
        if seq.valid_length() > target_length {
            return Err(EncodingError::TargetLengthTooSmall {
                valid_length: seq.valid_length(),
                target_length,
            });
        }
    }
    Ok(sequences
        .iter()
        .map(|seq| {
            let mut tokens = vec![TokenPair::PAD; target_length - seq.valid_length()];
            tokens.extend_from_slice(seq.valid_tokens());
            EncodedSequence {
                tokens,
                valid_length: seq.valid_length(),
            }
        })
        .collect())
}

/// Restricts a record to its first `week` weeks after enrollment.
///
/// Week windows are half-open: week `w` keeps events with
/// `timestamp < enrollment_day + 7 * w`. The label is unchanged.
pub fn truncate_to_week(record: &StudentRecord, week: u32) -> StudentRecord {
    let cutoff = record.enrollment_day + 7 * i64::from(week);
    let mut truncated = record.clone();
    truncated.events.retain(|e| e.timestamp < cutoff);
    truncated
}

/// Order-free activity counts for the baseline. Timestamps are ignored.
pub fn bow_featurize(
    record: &StudentRecord,
    vocab: &Vocabulary,
) -> Result<BowVector, EncodingError> {
    let mut counts = vec![0u64; vocab.len()];
    for event in &record.events {
        if event.action_id >= vocab.len() {
            return Err(EncodingError::UnknownAction {
                action_id: event.action_id,
                vocab_size: vocab.len(),
            });
        }
        counts[event.action_id] += 1;
    }
    Ok(BowVector { counts })
}
