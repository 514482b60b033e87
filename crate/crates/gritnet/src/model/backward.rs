//! Exact backpropagation through time.
//!
//! The pooled path is sparse: each pooled coordinate sends its gradient to
//! the single timestep that won the max, per the cached argmax. From there
//! the usual LSTM recurrences run backwards per direction, and the
//! per-timestep input gradients scatter-add into the two embedding tables
//! (each token touched its action row and its delta row once).

use crate::encoding::TokenPair;

use super::forward::{DirectionCache, ForwardCache};
use super::mat::Mat;
use super::params::{EmbeddingMatrix, GritNetModel, LstmDirectionParams};

/// Gradient of the per-example loss for every parameter block, in the
/// same shapes as [`GritNetModel`].
#[derive(Debug, Clone)]
pub struct Gradients {
    pub embedding: EmbeddingMatrix,
    pub forward_lstm: LstmDirectionParams,
    pub backward_lstm: LstmDirectionParams,
    pub dense_weights: Vec<f64>,
    pub dense_bias: f64,
}

impl Gradients {
    pub fn zeros_like(model: &GritNetModel) -> Self {
        let e = model.embed_dim();
        let h = model.hidden_dim();
        let direction = || LstmDirectionParams {
            w_input: Mat::zeros(4 * h, e),
            w_recurrent: Mat::zeros(4 * h, h),
            bias: vec![0.0; 4 * h],
        };
        Gradients {
            embedding: EmbeddingMatrix {
                action_table: Mat::zeros(model.action_count(), e),
                delta_table: Mat::zeros(model.delta_count(), e),
            },
            forward_lstm: direction(),
            backward_lstm: direction(),
            dense_weights: vec![0.0; 2 * h],
            dense_bias: 0.0,
        }
    }

    /// Same block order as [`GritNetModel::BLOCK_NAMES`].
    pub fn param_block(&self, block: usize) -> &[f64] {
        match block {
            0 => self.embedding.action_table.data(),
            1 => self.embedding.delta_table.data(),
            2 => self.forward_lstm.w_input.data(),
            3 => self.forward_lstm.w_recurrent.data(),
            4 => &self.forward_lstm.bias,
            5 => self.backward_lstm.w_input.data(),
            6 => self.backward_lstm.w_recurrent.data(),
            7 => &self.backward_lstm.bias,
            8 => &self.dense_weights,
            9 => std::slice::from_ref(&self.dense_bias),
            _ => panic!("no parameter block {block}"),
        }
    }

    pub fn add_assign(&mut self, other: &Gradients) {
        self.embedding
            .action_table
            .scaled_add(&other.embedding.action_table, 1.0);
        self.embedding
            .delta_table
            .scaled_add(&other.embedding.delta_table, 1.0);
        for (mine, theirs) in [
            (&mut self.forward_lstm, &other.forward_lstm),
            (&mut self.backward_lstm, &other.backward_lstm),
        ] {
            mine.w_input.scaled_add(&theirs.w_input, 1.0);
            mine.w_recurrent.scaled_add(&theirs.w_recurrent, 1.0);
            for (b, o) in mine.bias.iter_mut().zip(&theirs.bias) {
                *b += o;
            }
        }
        for (w, o) in self.dense_weights.iter_mut().zip(&other.dense_weights) {
            *w += o;
        }
        self.dense_bias += other.dense_bias;
    }

    pub fn scale(&mut self, s: f64) {
        for m in [
            &mut self.embedding.action_table,
            &mut self.embedding.delta_table,
            &mut self.forward_lstm.w_input,
            &mut self.forward_lstm.w_recurrent,
            &mut self.backward_lstm.w_input,
            &mut self.backward_lstm.w_recurrent,
        ] {
            for v in m.data_mut() {
                *v *= s;
            }
        }
        for v in self
            .forward_lstm
            .bias
            .iter_mut()
            .chain(self.backward_lstm.bias.iter_mut())
            .chain(self.dense_weights.iter_mut())
        {
            *v *= s;
        }
        self.dense_bias *= s;
    }

    pub fn is_finite(&self) -> bool {
        (0..GritNetModel::BLOCK_NAMES.len())
            .all(|b| self.param_block(b).iter().all(|v| v.is_finite()))
    }
}

/// Runs one direction's recurrence backwards, accumulating parameter
/// gradients and per-timestep input gradients.
///
/// `injected` holds dL/dh at each iteration step (from the pooled path);
/// `row_of_step` maps iteration step -> packed embedded row.
fn bptt_direction(
    params: &LstmDirectionParams,
    cache: &DirectionCache,
    injected: &Mat,
    embedded: &Mat,
    row_of_step: impl Fn(usize) -> usize,
    grads: &mut LstmDirectionParams,
    d_embedded: &mut Mat,
) {
    let h = params.hidden_dim();
    let steps = cache.steps.len();
    let zeros = vec![0.0; h];
    let mut dh_carry = vec![0.0; h];
    let mut dc_carry = vec![0.0; h];
    let mut dz = vec![0.0; 4 * h];

    for k in (0..steps).rev() {
        let step = &cache.steps[k];
        let (h_prev, c_prev): (&[f64], &[f64]) = if k > 0 {
            (&cache.steps[k - 1].hidden, &cache.steps[k - 1].cell)
        } else {
            (&zeros, &zeros)
        };

        for j in 0..h {
            let dh = injected.row(k)[j] + dh_carry[j];
            let i = step.gates[j];
            let f = step.gates[h + j];
            let g = step.gates[2 * h + j];
            let o = step.gates[3 * h + j];
            let tc = step.tanh_cell[j];

            let dc = dc_carry[j] + dh * o * (1.0 - tc * tc);
            dz[j] = dc * g * i * (1.0 - i);
            dz[h + j] = dc * c_prev[j] * f * (1.0 - f);
            dz[2 * h + j] = dc * i * (1.0 - g * g);
            dz[3 * h + j] = dh * tc * o * (1.0 - o);
            dc_carry[j] = dc * f;
        }

        let row = row_of_step(k);
        grads.w_input.outer_add(&dz, embedded.row(row));
        grads.w_recurrent.outer_add(&dz, h_prev);
        for (b, z) in grads.bias.iter_mut().zip(&dz) {
            *b += z;
        }
        params.w_input.t_matvec_add(&dz, d_embedded.row_mut(row));
        dh_carry.iter_mut().for_each(|v| *v = 0.0);
        params.w_recurrent.t_matvec_add(&dz, &mut dh_carry);
    }
}

/// Exact gradient of `bce_loss(p, y)` with respect to every parameter,
/// for the forward pass that produced `cache`.
pub fn backward(model: &GritNetModel, cache: &ForwardCache, y: bool) -> Gradients {
    let h = model.hidden_dim();
    let valid = cache.tokens.len();
    let mut grads = Gradients::zeros_like(model);

    let dz_out = cache.probability - if y { 1.0 } else { 0.0 };
    grads.dense_bias = dz_out;
    for (g, u) in grads.dense_weights.iter_mut().zip(&cache.dropped) {
        *g = dz_out * u;
    }
    if valid == 0 {
        return grads;
    }

    // Through dropout back to the pooled vector, then max-routing.
    let mut injected_fwd = Mat::zeros(valid, h);
    let mut injected_bwd = Mat::zeros(valid, h);
    for j in 0..2 * h {
        let dpooled = dz_out * model.dense_weights[j] * cache.dropout_mask[j];
        let packed = cache.argmax[j];
        if j < h {
            injected_fwd.row_mut(packed)[j] += dpooled;
        } else {
            injected_bwd.row_mut(valid - 1 - packed)[j - h] += dpooled;
        }
    }

    let mut d_embedded = Mat::zeros(valid, model.embed_dim());
    bptt_direction(
        &model.forward_lstm,
        &cache.fwd,
        &injected_fwd,
        &cache.embedded,
        |k| k,
        &mut grads.forward_lstm,
        &mut d_embedded,
    );
    bptt_direction(
        &model.backward_lstm,
        &cache.bwd,
        &injected_bwd,
        &cache.embedded,
        |k| valid - 1 - k,
        &mut grads.backward_lstm,
        &mut d_embedded,
    );

    for (row, token) in cache.tokens.iter().enumerate() {
        let TokenPair {
            action_index,
            delta_index,
        } = *token;
        let dx = d_embedded.row(row);
        for (g, v) in grads
            .embedding
            .action_table
            .row_mut(action_index)
            .iter_mut()
            .zip(dx)
        {
            *g += v;
        }
        for (g, v) in grads
            .embedding
            .delta_table
            .row_mut(delta_index)
            .iter_mut()
            .zip(dx)
        {
            *g += v;
        }
    }

    grads
}
