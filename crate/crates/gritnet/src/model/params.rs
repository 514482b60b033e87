//! Model parameters: embedding tables, per-direction LSTM weights, dense
//! head. Also the block-indexed parameter view shared by the gradient
//! checker and the text serializer.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::mat::Mat;
use super::ModelError;

/// Additive embedding: a token `(a, d)` embeds as
/// `action_table[a] + delta_table[d]`, which equals the concatenated
/// `(A + D) x E` table multiplied by the token's two-hot vector. The pad
/// token embeds as the zero vector by definition.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    /// One row per action index (including the reserved unknown slot when
    /// the model is built for inference on unseen actions).
    pub action_table: Mat,
    /// One row per gap bucket `0..=delta_max`.
    pub delta_table: Mat,
}

impl EmbeddingMatrix {
    pub fn embed_dim(&self) -> usize {
        self.action_table.cols()
    }
}

/// One direction's LSTM weights, gate-major: rows `0..H` are the input
/// gate, `H..2H` the forget gate, `2H..3H` the candidate, `3H..4H` the
/// output gate.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmDirectionParams {
    /// `4H x E`.
    pub w_input: Mat,
    /// `4H x H`.
    pub w_recurrent: Mat,
    /// `4H`.
    pub bias: Vec<f64>,
}

impl LstmDirectionParams {
    pub fn hidden_dim(&self) -> usize {
        self.bias.len() / 4
    }

    fn zeros(embed_dim: usize, hidden_dim: usize) -> Self {
        LstmDirectionParams {
            w_input: Mat::zeros(4 * hidden_dim, embed_dim),
            w_recurrent: Mat::zeros(4 * hidden_dim, hidden_dim),
            bias: vec![0.0; 4 * hidden_dim],
        }
    }
}

/// The full network.
#[derive(Debug, Clone, PartialEq)]
pub struct GritNetModel {
    pub embedding: EmbeddingMatrix,
    pub forward_lstm: LstmDirectionParams,
    pub backward_lstm: LstmDirectionParams,
    /// `2H`: forward hidden block first, then backward.
    pub dense_weights: Vec<f64>,
    pub dense_bias: f64,
    /// Applied to the pooled vector during training, inverted scaling.
    pub dropout_rate: f64,
}

impl GritNetModel {
    /// Fresh model with seeded uniform initialization: `±1/sqrt(H)` for
    /// LSTM and dense blocks, `±0.05` for embeddings, and `+1` added to
    /// the forget-gate bias.
    pub fn new(
        action_count: usize,
        delta_count: usize,
        embed_dim: usize,
        hidden_dim: usize,
        dropout_rate: f64,
        seed: u64,
    ) -> Self {
        assert!(action_count > 0 && delta_count > 0 && embed_dim > 0 && hidden_dim > 0);
        assert!((0.0..1.0).contains(&dropout_rate));
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let k = 1.0 / (hidden_dim as f64).sqrt();
        let mut uniform = |bound: f64| rng.gen_range(-bound..bound);

        let embedding = EmbeddingMatrix {
            action_table: Mat::from_fn(action_count, embed_dim, |_, _| uniform(0.05)),
            delta_table: Mat::from_fn(delta_count, embed_dim, |_, _| uniform(0.05)),
        };
        let mut direction = |uniform: &mut dyn FnMut(f64) -> f64| {
            let mut p = LstmDirectionParams {
                w_input: Mat::from_fn(4 * hidden_dim, embed_dim, |_, _| uniform(k)),
                w_recurrent: Mat::from_fn(4 * hidden_dim, hidden_dim, |_, _| uniform(k)),
                bias: (0..4 * hidden_dim).map(|_| uniform(k)).collect(),
            };
            for b in &mut p.bias[hidden_dim..2 * hidden_dim] {
                *b += 1.0;
            }
            p
        };
        let forward_lstm = direction(&mut uniform);
        let backward_lstm = direction(&mut uniform);
        let dense_weights = (0..2 * hidden_dim).map(|_| uniform(k)).collect();
        let dense_bias = uniform(k);

        GritNetModel {
            embedding,
            forward_lstm,
            backward_lstm,
            dense_weights,
            dense_bias,
            dropout_rate,
        }
    }

    pub fn action_count(&self) -> usize {
        self.embedding.action_table.rows()
    }

    pub fn delta_count(&self) -> usize {
        self.embedding.delta_table.rows()
    }

    pub fn embed_dim(&self) -> usize {
        self.embedding.embed_dim()
    }

    pub fn hidden_dim(&self) -> usize {
        self.forward_lstm.hidden_dim()
    }

    /// Parameter block names, in the fixed order used by the serializer,
    /// the gradient checker, and SGD updates.
    pub const BLOCK_NAMES: [&'static str; 10] = [
        "embedding.action_table",
        "embedding.delta_table",
        "forward.w_input",
        "forward.w_recurrent",
        "forward.bias",
        "backward.w_input",
        "backward.w_recurrent",
        "backward.bias",
        "dense.weights",
        "dense.bias",
    ];

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

    pub fn param_block_mut(&mut self, block: usize) -> &mut [f64] {
        match block {
            0 => self.embedding.action_table.data_mut(),
            1 => self.embedding.delta_table.data_mut(),
            2 => self.forward_lstm.w_input.data_mut(),
            3 => self.forward_lstm.w_recurrent.data_mut(),
            4 => &mut self.forward_lstm.bias,
            5 => self.backward_lstm.w_input.data_mut(),
            6 => self.backward_lstm.w_recurrent.data_mut(),
            7 => &mut self.backward_lstm.bias,
            8 => &mut self.dense_weights,
            9 => std::slice::from_mut(&mut self.dense_bias),
            _ => panic!("no parameter block {block}"),
        }
    }

    /// `param -= learning_rate * gradient`, block by block.
    pub fn apply_gradients(&mut self, grads: &super::Gradients, learning_rate: f64) {
        for block in 0..Self::BLOCK_NAMES.len() {
            let g = grads.param_block(block);
            for (w, gi) in self.param_block_mut(block).iter_mut().zip(g) {
                *w -= learning_rate * gi;
            }
        }
    }

    /// Versioned flat text form: a header with the dimensions, then the
    /// parameter blocks in [`Self::BLOCK_NAMES`] order, one value per
    /// line at full round-trip precision.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str("gritnet-model v1\n");
        out.push_str(&format!("actions {}\n", self.action_count()));
        out.push_str(&format!("delta_buckets {}\n", self.delta_count()));
        out.push_str(&format!("embed_dim {}\n", self.embed_dim()));
        out.push_str(&format!("hidden_dim {}\n", self.hidden_dim()));
        out.push_str(&format!("dropout {}\n", self.dropout_rate));
        for block in 0..Self::BLOCK_NAMES.len() {
            out.push_str(&format!("block {}\n", Self::BLOCK_NAMES[block]));
            for v in self.param_block(block) {
                out.push_str(&format!("{v}\n"));
            }
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self, ModelError> {
        let bad = |msg: String| ModelError::MalformedModel(msg);
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| bad("empty input".into()))?;
        if header != "gritnet-model v1" {
            return Err(bad(format!("unsupported header `{header}`")));
        }
        let mut dim = |name: &str| -> Result<usize, ModelError> {
            let line = lines.next().ok_or_else(|| bad(format!("missing {name}")))?;
            let value = line
                .strip_prefix(&format!("{name} "))
                .ok_or_else(|| bad(format!("expected `{name} <n>`, got `{line}`")))?;
            value.parse().map_err(|e| bad(format!("{name}: {e}")))
        };
        let actions = dim("actions")?;
        let delta_buckets = dim("delta_buckets")?;
        let embed_dim = dim("embed_dim")?;
        let hidden_dim = dim("hidden_dim")?;
        let dropout_line = lines
            .next()
            .ok_or_else(|| bad("missing dropout".into()))?;
        let dropout_rate: f64 = dropout_line
            .strip_prefix("dropout ")
            .ok_or_else(|| bad(format!("expected `dropout <r>`, got `{dropout_line}`")))?
            .parse()
            .map_err(|e| bad(format!("dropout: {e}")))?;

        let mut model = GritNetModel {
            embedding: EmbeddingMatrix {
                action_table: Mat::zeros(actions, embed_dim),
                delta_table: Mat::zeros(delta_buckets, embed_dim),
            },
            forward_lstm: LstmDirectionParams::zeros(embed_dim, hidden_dim),
            backward_lstm: LstmDirectionParams::zeros(embed_dim, hidden_dim),
            dense_weights: vec![0.0; 2 * hidden_dim],
            dense_bias: 0.0,
            dropout_rate,
        };
        for block in 0..Self::BLOCK_NAMES.len() {
            let name = Self::BLOCK_NAMES[block];
            let marker = lines
                .next()
                .ok_or_else(|| bad(format!("missing block `{name}`")))?;
            if marker != format!("block {name}") {
                return Err(bad(format!("expected `block {name}`, got `{marker}`")));
            }
            for (i, slot) in model.param_block_mut(block).iter_mut().enumerate() {
                let line = lines
                    .next()
                    .ok_or_else(|| bad(format!("block `{name}` truncated at value {i}")))?;
                *slot = line
                    .parse()
                    .map_err(|e| bad(format!("block `{name}` value {i}: {e}")))?;
            }
        }
        if lines.next().is_some() {
            return Err(bad("trailing content after last block".into()));
        }
        Ok(model)
    }
}
