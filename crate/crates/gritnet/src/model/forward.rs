//! Forward pass: embedding lookup, per-direction LSTM recurrence, global
//! max pooling, dropout, dense sigmoid head.
//!
//! Pad positions never enter the recurrence: both directions start from
//! zero state at the first valid timestep, so inference output is
//! bit-identical under any amount of pre-padding.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::baseline::sigmoid;
use crate::encoding::{EncodedSequence, TokenPair};

use super::mat::Mat;
use super::params::{EmbeddingMatrix, GritNetModel, LstmDirectionParams};
use super::ModelError;

/// Everything [`super::backward`] needs to reproduce the forward pass
/// exactly: per-timestep gate activations and states for both directions,
/// the pooled vector with its argmax routing, and the dropout mask.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    pub(super) tokens: Vec<TokenPair>,
    pub(super) embedded: Mat,
    pub(super) fwd: DirectionCache,
    pub(super) bwd: DirectionCache,
    pub(super) pooled: Vec<f64>,
    /// Earliest maximizing valid timestep per pooled coordinate
    /// (0 = first valid timestep). Empty for an all-pad sequence.
    pub(super) argmax: Vec<usize>,
    pub(super) dropout_mask: Vec<f64>,
    pub(super) dropped: Vec<f64>,
    pub(super) probability: f64,
}

impl ForwardCache {
    pub fn probability(&self) -> f64 {
        self.probability
    }

    pub fn valid_length(&self) -> usize {
        self.tokens.len()
    }

    pub fn pooled(&self) -> &[f64] {
        &self.pooled
    }

    /// Argmax valid-timestep index per pooled coordinate.
    pub fn argmax(&self) -> &[usize] {
        &self.argmax
    }

    pub fn dropout_mask(&self) -> &[f64] {
        &self.dropout_mask
    }
}

#[derive(Debug, Clone)]
pub(super) struct DirectionCache {
    /// In iteration order: index 0 is the first step the direction took.
    pub steps: Vec<StepState>,
}

#[derive(Debug, Clone)]
pub(super) struct StepState {
    /// Post-activation gates, gate-major: `i | f | g | o`.
    pub gates: Vec<f64>,
    pub cell: Vec<f64>,
    pub tanh_cell: Vec<f64>,
    pub hidden: Vec<f64>,
}

/// One LSTM cell update with the standard forget-gate equations.
pub(super) fn step_full(
    params: &LstmDirectionParams,
    x: &[f64],
    h_prev: &[f64],
    c_prev: &[f64],
) -> StepState {
    let h = params.hidden_dim();
    let mut gates = params.bias.clone();
    params.w_input.matvec_add(x, &mut gates);
    params.w_recurrent.matvec_add(h_prev, &mut gates);
    for g in &mut gates[..2 * h] {
        *g = sigmoid(*g);
    }
    for g in &mut gates[2 * h..3 * h] {
        *g = g.tanh();
    }
    for g in &mut gates[3 * h..] {
        *g = sigmoid(*g);
    }

    let mut cell = vec![0.0; h];
    let mut tanh_cell = vec![0.0; h];
    let mut hidden = vec![0.0; h];
    for j in 0..h {
        let c = gates[h + j] * c_prev[j] + gates[j] * gates[2 * h + j];
        cell[j] = c;
        tanh_cell[j] = c.tanh();
        hidden[j] = gates[3 * h + j] * tanh_cell[j];
    }
    StepState {
        gates,
        cell,
        tanh_cell,
        hidden,
    }
}

/// Single LSTM step: `i,f,o = sigmoid`, `g = tanh`,
/// `c = f*c_prev + i*g`, `h = o*tanh(c)`. Returns `(h, c)`.
pub fn lstm_step(
    x: &[f64],
    h_prev: &[f64],
    c_prev: &[f64],
    params: &LstmDirectionParams,
) -> (Vec<f64>, Vec<f64>) {
    let state = step_full(params, x, h_prev, c_prev);
    (state.hidden, state.cell)
}

fn run_direction<'a>(
    params: &LstmDirectionParams,
    rows: impl Iterator<Item = &'a [f64]>,
) -> DirectionCache {
    let h = params.hidden_dim();
    let zero = vec![0.0; h];
    let mut steps: Vec<StepState> = Vec::new();
    for x in rows {
        let state = match steps.last() {
            Some(prev) => step_full(params, x, &prev.hidden, &prev.cell),
            None => step_full(params, x, &zero, &zero),
        };
        steps.push(state);
    }
    DirectionCache { steps }
}

/// Embeds a (possibly pre-padded) sequence into a `T x E` matrix. Pad rows
/// are zero; real rows are `action_table[a] + delta_table[d]`.
pub fn embed_tokens(
    sequence: &EncodedSequence,
    embedding: &EmbeddingMatrix,
) -> Result<Mat, ModelError> {
    let e = embedding.embed_dim();
    let mut out = Mat::zeros(sequence.total_length(), e);
    for (t, token) in sequence.tokens().iter().enumerate() {
        if token.is_pad() {
            continue;
        }
        if token.action_index >= embedding.action_table.rows() {
            return Err(ModelError::IndexOutOfRange {
                what: "action",
                index: token.action_index,
                size: embedding.action_table.rows(),
            });
        }
        if token.delta_index >= embedding.delta_table.rows() {
            return Err(ModelError::IndexOutOfRange {
                what: "delta bucket",
                index: token.delta_index,
                size: embedding.delta_table.rows(),
            });
        }
        let row = out.row_mut(t);
        for (o, (a, d)) in row.iter_mut().zip(
            embedding
                .action_table
                .row(token.action_index)
                .iter()
                .zip(embedding.delta_table.row(token.delta_index)),
        ) {
            *o = a + d;
        }
    }
    Ok(out)
}

/// Runs both directions over the valid suffix of `embedded` and
/// concatenates their per-timestep outputs. Row `t` of the result is
/// `[h_fwd(t); h_bwd(t)]`; pad rows are zero.
pub fn blstm_forward(
    embedded: &Mat,
    valid_length: usize,
    fwd: &LstmDirectionParams,
    bwd: &LstmDirectionParams,
) -> Mat {
    assert!(valid_length <= embedded.rows());
    let h = fwd.hidden_dim();
    let total = embedded.rows();
    let start = total - valid_length;

    let fwd_cache = run_direction(fwd, (start..total).map(|t| embedded.row(t)));
    let bwd_cache = run_direction(bwd, (start..total).rev().map(|t| embedded.row(t)));

    let mut out = Mat::zeros(total, 2 * h);
    for k in 0..valid_length {
        let row = out.row_mut(start + k);
        row[..h].copy_from_slice(&fwd_cache.steps[k].hidden);
        row[h..].copy_from_slice(&bwd_cache.steps[valid_length - 1 - k].hidden);
    }
    out
}

/// Coordinate-wise max over the valid suffix rows, with the earliest
/// maximizing row index per coordinate. An all-pad input pools to the
/// zero vector and an empty argmax.
pub fn global_max_pool(outputs: &Mat, valid_length: usize) -> (Vec<f64>, Vec<usize>) {
    assert!(valid_length <= outputs.rows());
    let cols = outputs.cols();
    if valid_length == 0 {
        return (vec![0.0; cols], Vec::new());
    }
    let start = outputs.rows() - valid_length;
    let mut pooled = outputs.row(start).to_vec();
    let mut argmax = vec![start; cols];
    for t in start + 1..outputs.rows() {
        for (j, &v) in outputs.row(t).iter().enumerate() {
            if v > pooled[j] {
                pooled[j] = v;
                argmax[j] = t;
            }
        }
    }
    (pooled, argmax)
}

/// Binary cross entropy with the probability clamped to
/// `[1e-12, 1 - 1e-12]`.
pub fn bce_loss(p: f64, y: bool) -> f64 {
    let p = p.clamp(1e-12, 1.0 - 1e-12);
    if y {
        -p.ln()
    } else {
        -(1.0 - p).ln()
    }
}

/// Full forward pass. Dropout applies to the pooled vector only when
/// `training` is set and the model's rate is positive, with inverted
/// scaling `1/(1-rate)`; the mask is drawn from `rng_seed` alone, so the
/// pass is deterministic.
///
/// Panics if the sequence indexes outside the model's alphabet.
pub fn forward(
    model: &GritNetModel,
    sequence: &EncodedSequence,
    training: bool,
    rng_seed: u64,
) -> (f64, ForwardCache) {
    let tokens = sequence.valid_tokens().to_vec();
    let valid = tokens.len();
    let e = model.embed_dim();
    let h = model.hidden_dim();

    let mut embedded = Mat::zeros(valid, e);
    for (k, token) in tokens.iter().enumerate() {
        assert!(
            token.action_index < model.action_count()
                && token.delta_index < model.delta_count(),
            "sequence must be encoded against the model's alphabet"
        );
        let row = embedded.row_mut(k);
        for (o, (a, d)) in row.iter_mut().zip(
            model
                .embedding
                .action_table
                .row(token.action_index)
                .iter()
                .zip(model.embedding.delta_table.row(token.delta_index)),
        ) {
            *o = a + d;
        }
    }

    let fwd = run_direction(&model.forward_lstm, (0..valid).map(|k| embedded.row(k)));
    let bwd = run_direction(
        &model.backward_lstm,
        (0..valid).rev().map(|k| embedded.row(k)),
    );

    let mut pooled = vec![0.0; 2 * h];
    let mut argmax = Vec::new();
    if valid > 0 {
        argmax = vec![0; 2 * h];
        for j in 0..2 * h {
            let value_at = |k: usize| {
                if j < h {
                    fwd.steps[k].hidden[j]
                } else {
                    bwd.steps[valid - 1 - k].hidden[j - h]
                }
            };
            let mut best = value_at(0);
            let mut best_k = 0;
            for k in 1..valid {
                let v = value_at(k);
                if v > best {
                    best = v;
                    best_k = k;
                }
            }
            pooled[j] = best;
            argmax[j] = best_k;
        }
    }

    let rate = model.dropout_rate;
    let dropout_mask = if training && rate > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
        let scale = 1.0 / (1.0 - rate);
        (0..2 * h)
            .map(|_| if rng.gen::<f64>() < rate { 0.0 } else { scale })
            .collect()
    } else {
        vec![1.0; 2 * h]
    };
    let dropped: Vec<f64> = pooled
        .iter()
        .zip(&dropout_mask)
        .map(|(p, m)| p * m)
        .collect();

    let z = model
        .dense_weights
        .iter()
        .zip(&dropped)
        .map(|(w, u)| w * u)
        .sum::<f64>()
        + model.dense_bias;
    let probability = sigmoid(z);

    (
        probability,
        ForwardCache {
            tokens,
            embedded,
            fwd,
            bwd,
            pooled,
            argmax,
            dropout_mask,
            dropped,
            probability,
        },
    )
}
