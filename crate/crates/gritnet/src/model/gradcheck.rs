//! Finite-difference verification of [`super::backward`].
//!
//! The oracle only ever calls the forward pass and the loss: each
//! parameter is nudged by ±eps and the centered difference of the loss is
//! compared against the analytic gradient. Dropout is safe to check
//! because the mask depends on the seed alone, not on parameter values.
//!
//! Relative error uses a floored denominator,
//! `|a - n| / max(|a| + |n|, 1e-6)`, so exactly-zero gradient pairs
//! compare cleanly.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::encoding::{pre_pad_batch, EncodedSequence, TokenPair};

use super::backward::backward;
use super::forward::{bce_loss, forward};
use super::params::GritNetModel;

/// Worst relative error seen in one parameter block.
#[derive(Debug, Clone)]
pub struct BlockReport {
    pub block: &'static str,
    pub max_rel_error: f64,
}

/// Outcome of a multi-trial gradient check.
#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub trials: usize,
    pub tolerance: f64,
    pub per_block: Vec<BlockReport>,
    pub max_rel_error: f64,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.max_rel_error <= self.tolerance
    }

    /// One line per block plus a verdict, for terminal output.
    pub fn render(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "gradient check: {} trials, tolerance {:.0e}\n",
            self.trials, self.tolerance
        ));
        for block in &self.per_block {
            out.push_str(&format!(
                "  {:<28} max rel error {:.3e}\n",
                block.block, block.max_rel_error
            ));
        }
        out.push_str(&format!(
            "overall max rel error {:.3e} -> {}\n",
            self.max_rel_error,
            if self.passed() { "PASS" } else { "FAIL" }
        ));
        out
    }
}

fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / (analytic.abs() + numeric.abs()).max(1e-6)
}

/// Checks every parameter coordinate of one model/sequence instance.
/// Returns the worst relative error per block.
pub fn check_instance(
    model: &mut GritNetModel,
    sequence: &EncodedSequence,
    label: bool,
    training: bool,
    rng_seed: u64,
    eps: f64,
) -> Vec<(&'static str, f64)> {
    let (_, cache) = forward(model, sequence, training, rng_seed);
    let grads = backward(model, &cache, label);

    let mut worst = Vec::new();
    for block in 0..GritNetModel::BLOCK_NAMES.len() {
        let len = model.param_block(block).len();
        let mut block_worst = 0.0f64;
        for i in 0..len {
            let original = model.param_block(block)[i];

            model.param_block_mut(block)[i] = original + eps;
            let (p_plus, _) = forward(model, sequence, training, rng_seed);
            let loss_plus = bce_loss(p_plus, label);

            model.param_block_mut(block)[i] = original - eps;
            let (p_minus, _) = forward(model, sequence, training, rng_seed);
            let loss_minus = bce_loss(p_minus, label);

            model.param_block_mut(block)[i] = original;

            let numeric = (loss_plus - loss_minus) / (2.0 * eps);
            let analytic = grads.param_block(block)[i];
            block_worst = block_worst.max(relative_error(analytic, numeric));
        }
        worst.push((GritNetModel::BLOCK_NAMES[block], block_worst));
    }
    worst
}

/// Runs `trials` random tiny instances (embedding dim 4, hidden dim 3,
/// up to 6 timesteps, random pre-padding, dropout active on odd trials)
/// and aggregates the worst relative error per block.
pub fn run(trials: usize, seed: u64) -> GradCheckReport {
    const EPS: f64 = 1e-5;
    const TOLERANCE: f64 = 1e-5;

    let mut per_block: Vec<BlockReport> = GritNetModel::BLOCK_NAMES
        .iter()
        .map(|&block| BlockReport {
            block,
            max_rel_error: 0.0,
        })
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for trial in 0..trials {
        let action_count = rng.gen_range(3..=6);
        let delta_count = rng.gen_range(3..=5);
        let timesteps = rng.gen_range(1..=6);
        let dropout_trial = trial % 2 == 1;
        let dropout_rate = if dropout_trial { 0.3 } else { 0.0 };
        let mut model = GritNetModel::new(
            action_count,
            delta_count,
            4,
            3,
            dropout_rate,
            rng.gen(),
        );

        let tokens: Vec<TokenPair> = (0..timesteps)
            .map(|_| TokenPair {
                action_index: rng.gen_range(0..action_count),
                delta_index: rng.gen_range(0..delta_count),
            })
            .collect();
        let sequence = EncodedSequence::new(tokens);
        let padding = rng.gen_range(0..=3);
        let sequence = pre_pad_batch(std::slice::from_ref(&sequence), timesteps + padding)
            .expect("padding only grows")
            .remove(0);

        let label = rng.gen_bool(0.5);
        let rng_seed: u64 = rng.gen();

        for (idx, (_, rel)) in
            check_instance(&mut model, &sequence, label, dropout_trial, rng_seed, EPS)
                .into_iter()
                .enumerate()
        {
            per_block[idx].max_rel_error = per_block[idx].max_rel_error.max(rel);
        }
    }

    let max_rel_error = per_block
        .iter()
        .map(|b| b.max_rel_error)
        .fold(0.0, f64::max);
    GradCheckReport {
        trials,
        tolerance: TOLERANCE,
        per_block,
        max_rel_error,
    }
}
