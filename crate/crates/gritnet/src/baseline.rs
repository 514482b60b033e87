//! Bag-of-words logistic regression baseline.
//!
//! Trains by full-batch gradient descent on the mean binary cross entropy
//! plus an L2 penalty `(alpha / M) * ||theta||^2`; the bias is not
//! penalized. Full-batch descent keeps the alpha sweep deterministic and
//! is cheap at the feature dimensions a bag-of-words produces.
//!
//! Optional chi-square feature selection scores each feature's binarized
//! presence (count > 0) against the label over a 2x2 contingency table.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::encoding::BowVector;

/// A trained logistic-regression model.
#[derive(Debug, Clone, PartialEq)]
pub struct LogRegModel {
    pub theta: Vec<f64>,
    pub bias: f64,
    pub alpha: f64,
    /// When present, inputs to [`logreg_predict`] are projected onto these
    /// feature indices before the dot product.
    pub selected_features: Option<Vec<usize>>,
}

#[derive(Debug, Error)]
pub enum BaselineError {
    #[error("feature vector has {got} entries, model expects {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("training needs at least one example")]
    EmptyTrainingSet,
    #[error("training loss became non-finite at epoch {epoch}")]
    Diverged { epoch: usize },
    #[error("training loss increased at epoch {epoch}; use a smaller learning rate")]
    LearningRateTooLarge { epoch: usize },
    #[error("selected feature index {index} is outside the {size}-dim input")]
    SelectionOutOfRange { index: usize, size: usize },
    #[error("chi-square selection needs 1 <= k <= feature count, got k={k} with {features} features")]
    BadSelectionCount { k: usize, features: usize },
    #[error("malformed model text: {0}")]
    MalformedModel(String),
}

/// Numerically stable logistic function; never overflows.
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

const BCE_EPS: f64 = 1e-12;

fn bce(p: f64, y: f64) -> f64 {
    let p = p.clamp(BCE_EPS, 1.0 - BCE_EPS);
    -(y * p.ln() + (1.0 - y) * (1.0 - p).ln())
}

fn dot(theta: &[f64], x: &BowVector) -> f64 {
    theta
        .iter()
        .zip(&x.counts)
        .map(|(w, &c)| w * c as f64)
        .sum()
}

/// Mean BCE plus `(alpha / M) * ||theta||^2`.
fn regularized_loss(
    theta: &[f64],
    bias: f64,
    features: &[BowVector],
    labels: &[bool],
    alpha: f64,
) -> f64 {
    let m = features.len() as f64;
    let data: f64 = features
        .iter()
        .zip(labels)
        .map(|(x, &y)| bce(sigmoid(dot(theta, x) + bias), if y { 1.0 } else { 0.0 }))
        .sum();
    let penalty: f64 = theta.iter().map(|w| w * w).sum();
    data / m + alpha * penalty / m
}

/// Exact gradient of [`regularized_loss`] in theta and the bias.
fn loss_gradient(
    theta: &[f64],
    bias: f64,
    features: &[BowVector],
    labels: &[bool],
    alpha: f64,
) -> (Vec<f64>, f64) {
    let m = features.len() as f64;
    let mut grad = vec![0.0; theta.len()];
    let mut grad_bias = 0.0;
    for (x, &y) in features.iter().zip(labels) {
        let residual = sigmoid(dot(theta, x) + bias) - if y { 1.0 } else { 0.0 };
        for (g, &c) in grad.iter_mut().zip(&x.counts) {
            *g += residual * c as f64;
        }
        grad_bias += residual;
    }
    for (g, w) in grad.iter_mut().zip(theta) {
        *g = *g / m + 2.0 * alpha * w / m;
    }
    (grad, grad_bias / m)
}

/// Trains by full-batch gradient descent. Deterministic given the seed,
/// which only drives the (small, uniform) initial weights.
pub fn logreg_train(
    features: &[BowVector],
    labels: &[bool],
    alpha: f64,
    learning_rate: f64,
    epochs: usize,
    seed: u64,
) -> Result<LogRegModel, BaselineError> {
    if features.is_empty() {
        return Err(BaselineError::EmptyTrainingSet);
    }
    let n = features[0].len();
    for x in features {
        if x.len() != n {
            return Err(BaselineError::DimensionMismatch {
                expected: n,
                got: x.len(),
            });
        }
    }
    assert_eq!(features.len(), labels.len(), "one label per feature row");
    assert!(alpha >= 0.0, "alpha must be non-negative");

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut theta: Vec<f64> = (0..n).map(|_| rng.gen_range(-0.01..0.01)).collect();
    let mut bias = 0.0;

    let mut prev_loss = regularized_loss(&theta, bias, features, labels, alpha);
    if !prev_loss.is_finite() {
        return Err(BaselineError::Diverged { epoch: 0 });
    }
    for epoch in 1..=epochs {
        let (grad, grad_bias) = loss_gradient(&theta, bias, features, labels, alpha);
        for (w, g) in theta.iter_mut().zip(&grad) {
            *w -= learning_rate * g;
        }
        bias -= learning_rate * grad_bias;

        let loss = regularized_loss(&theta, bias, features, labels, alpha);
        if !loss.is_finite() {
            return Err(BaselineError::Diverged { epoch });
        }
        // Tolerate float noise on flat stretches, not genuine ascent.
        if loss > prev_loss + 1e-12 * prev_loss.abs().max(1.0) {
            return Err(BaselineError::LearningRateTooLarge { epoch });
        }
        prev_loss = loss;
    }

    Ok(LogRegModel {
        theta,
        bias,
        alpha,
        selected_features: None,
    })
}

/// Scores one feature vector.
pub fn logreg_predict(model: &LogRegModel, features: &BowVector) -> Result<f64, BaselineError> {
    let z = match &model.selected_features {
        None => {
            if features.len() != model.theta.len() {
                return Err(BaselineError::DimensionMismatch {
                    expected: model.theta.len(),
                    got: features.len(),
                });
            }
            dot(&model.theta, features)
        }
        Some(indices) => {
            let mut acc = 0.0;
            for (w, &idx) in model.theta.iter().zip(indices) {
                let c = *features.counts.get(idx).ok_or(
                    BaselineError::SelectionOutOfRange {
                        index: idx,
                        size: features.len(),
                    },
                )?;
                acc += w * c as f64;
            }
            acc
        }
    };
    Ok(sigmoid(z + model.bias))
}

/// Chi-square score of binarized presence (count > 0) against the label.
///
/// A degenerate column (all present or all absent) scores 0.
fn chi_square_score(features: &[BowVector], labels: &[bool], j: usize) -> f64 {
    let mut table = [[0.0f64; 2]; 2]; // [presence][label]
    for (x, &y) in features.iter().zip(labels) {
        let present = usize::from(x.counts[j] > 0);
        table[present][usize::from(y)] += 1.0;
    }
    let (a, b) = (table[1][1], table[1][0]);
    let (c, d) = (table[0][1], table[0][0]);
    let m = a + b + c + d;
    let denom = (a + b) * (c + d) * (a + c) * (b + d);
    if denom == 0.0 {
        return 0.0;
    }
    let det = a * d - b * c;
    m * det * det / denom
}

/// Indices of the `k` highest-scoring features, in rank order.
/// Ties go to the lower index.
pub fn chi_square_select(
    features: &[BowVector],
    labels: &[bool],
    k: usize,
) -> Result<Vec<usize>, BaselineError> {
    if features.is_empty() {
        return Err(BaselineError::EmptyTrainingSet);
    }
    let n = features[0].len();
    if k == 0 || k > n {
        return Err(BaselineError::BadSelectionCount { k, features: n });
    }
    let mut ranked: Vec<(usize, f64)> = (0..n)
        .map(|j| (j, chi_square_score(features, labels, j)))
        .collect();
    ranked.sort_by(|(i, s), (i2, s2)| s2.partial_cmp(s).unwrap().then(i.cmp(i2)));
    Ok(ranked.into_iter().take(k).map(|(j, _)| j).collect())
}

/// Projects feature rows onto a selected index subset.
pub fn project_features(features: &[BowVector], indices: &[usize]) -> Vec<BowVector> {
    features
        .iter()
        .map(|x| BowVector {
            counts: indices.iter().map(|&j| x.counts[j]).collect(),
        })
        .collect()
}

impl LogRegModel {
    /// Marks the model as trained on a projected feature subset, so
    /// predictions project full-width inputs the same way.
    pub fn with_selected_features(mut self, indices: Vec<usize>) -> Self {
        assert_eq!(
            indices.len(),
            self.theta.len(),
            "one weight per selected feature"
        );
        self.selected_features = Some(indices);
        self
    }

    /// Flat text form: the dimension, alpha, bias, then one weight per
    /// line, at full round-trip precision.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("{}\n", self.theta.len()));
        out.push_str(&format!("{}\n", self.alpha));
        out.push_str(&format!("{}\n", self.bias));
        for w in &self.theta {
            out.push_str(&format!("{w}\n"));
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self, BaselineError> {
        let mut lines = text.lines();
        let mut next = |what: &str| {
            lines
                .next()
                .ok_or_else(|| BaselineError::MalformedModel(format!("missing {what}")))
        };
        let n: usize = next("dimension")?
            .trim()
            .parse()
            .map_err(|e| BaselineError::MalformedModel(format!("dimension: {e}")))?;
        let alpha: f64 = next("alpha")?
            .trim()
            .parse()
            .map_err(|e| BaselineError::MalformedModel(format!("alpha: {e}")))?;
        let bias: f64 = next("bias")?
            .trim()
            .parse()
            .map_err(|e| BaselineError::MalformedModel(format!("bias: {e}")))?;
        let mut theta = Vec::with_capacity(n);
        for i in 0..n {
            let w: f64 = next("weight")?
                .trim()
                .parse()
                .map_err(|e| BaselineError::MalformedModel(format!("weight {i}: {e}")))?;
            theta.push(w);
        }
        Ok(LogRegModel {
            theta,
            bias,
            alpha,
            selected_features: None,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bows(rows: &[&[u64]]) -> Vec<BowVector> {
        rows.iter()
            .map(|r| BowVector { counts: r.to_vec() })
            .collect()
    }

    #[test]
    fn sigmoid_at_zero_is_half() {
        assert_eq!(sigmoid(0.0), 0.5);
    }

    #[test]
    fn sigmoid_symmetry() {
        for z in [-7.5, -1.0, 0.3, 2.0, 11.0] {
            assert!((sigmoid(z) + sigmoid(-z) - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn sigmoid_matches_high_precision_value() {
        // 1 / (1 + e^{-2}) evaluated at high precision.
        assert!((sigmoid(2.0) - 0.880_797_077_977_882_3).abs() < 1e-6);
    }

    #[test]
    fn sigmoid_is_stable_at_extremes() {
        assert_eq!(sigmoid(500.0), 1.0);
        assert_eq!(sigmoid(-500.0), 0.0);
        assert!(sigmoid(-500.0) >= 0.0 && sigmoid(500.0) <= 1.0);
    }

    #[test]
    fn separable_data_reaches_full_training_accuracy() {
        let features = bows(&[&[0], &[1], &[4], &[5]]);
        let labels = [false, false, true, true];
        let model = logreg_train(&features, &labels, 0.0, 0.5, 3000, 7).unwrap();
        for (x, &y) in features.iter().zip(&labels) {
            let p = logreg_predict(&model, x).unwrap();
            assert_eq!(p >= 0.5, y, "p={p} for counts {:?}", x.counts);
        }
    }

    #[test]
    fn huge_alpha_shrinks_weights_to_the_base_rate() {
        let features = bows(&[&[0], &[1], &[4], &[5]]);
        let labels = [false, true, true, true];
        let model = logreg_train(&features, &labels, 1e7, 0.01, 2000, 7).unwrap();
        let norm: f64 = model.theta.iter().map(|w| w * w).sum::<f64>().sqrt();
        assert!(norm < 1e-3, "theta norm {norm} should be crushed");
        let p = logreg_predict(&model, &features[0]).unwrap();
        assert!((p - 0.75).abs() < 0.05, "p={p} should sit near the base rate");
    }

    #[test]
    fn xor_counts_stay_near_chance() {
        let features = bows(&[&[0, 0], &[0, 1], &[1, 0], &[1, 1]]);
        let labels = [false, true, true, false];
        let model = logreg_train(&features, &labels, 0.0, 0.1, 2000, 7).unwrap();
        let scores: Vec<f64> = features
            .iter()
            .map(|x| logreg_predict(&model, x).unwrap())
            .collect();
        // Enumerate the 4 positive-negative pairs by hand.
        let mut wins = 0.0;
        for (i, &yi) in labels.iter().enumerate() {
            for (j, &yj) in labels.iter().enumerate() {
                if yi && !yj {
                    if scores[i] > scores[j] {
                        wins += 1.0;
                    } else if scores[i] == scores[j] {
                        wins += 0.5;
                    }
                }
            }
        }
        let auc = wins / 4.0;
        assert!((auc - 0.5).abs() <= 0.1, "auc={auc}");
    }

    #[test]
    fn predict_with_zero_model_is_half() {
        let model = LogRegModel {
            theta: vec![0.0, 0.0],
            bias: 0.0,
            alpha: 0.0,
            selected_features: None,
        };
        let p = logreg_predict(&model, &BowVector { counts: vec![9, 3] }).unwrap();
        assert_eq!(p, 0.5);
    }

    #[test]
    fn increasing_a_positively_weighted_count_raises_the_score() {
        let model = LogRegModel {
            theta: vec![0.7, -0.2],
            bias: 0.1,
            alpha: 0.0,
            selected_features: None,
        };
        let low = logreg_predict(&model, &BowVector { counts: vec![1, 2] }).unwrap();
        let high = logreg_predict(&model, &BowVector { counts: vec![2, 2] }).unwrap();
        assert!(high > low);
    }

    #[test]
    fn hand_set_model_matches_the_dot_product() {
        let model = LogRegModel {
            theta: vec![1.0, -1.0],
            bias: 0.0,
            alpha: 0.0,
            selected_features: None,
        };
        let p = logreg_predict(&model, &BowVector { counts: vec![3, 1] }).unwrap();
        assert!((p - 0.880_797_077_977_882_3).abs() < 1e-6);
    }

    #[test]
    fn predict_rejects_dimension_mismatch() {
        let model = LogRegModel {
            theta: vec![1.0, -1.0],
            bias: 0.0,
            alpha: 0.0,
            selected_features: None,
        };
        let err = logreg_predict(&model, &BowVector { counts: vec![3] }).unwrap_err();
        assert!(matches!(err, BaselineError::DimensionMismatch { .. }));
    }

    #[test]
    fn gradient_matches_central_finite_differences() {
        use rand::Rng;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(99);
        let m = 12;
        let n = 5;
        let features: Vec<BowVector> = (0..m)
            .map(|_| BowVector {
                counts: (0..n).map(|_| rng.gen_range(0..6)).collect(),
            })
            .collect();
        let labels: Vec<bool> = (0..m).map(|_| rng.gen_bool(0.5)).collect();
        let alpha = 0.3;

        for _ in 0..10 {
            let theta: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let bias: f64 = rng.gen_range(-1.0..1.0);
            let (grad, grad_bias) = loss_gradient(&theta, bias, &features, &labels, alpha);

            let eps = 1e-6;
            for j in 0..=n {
                let mut plus = theta.clone();
                let mut minus = theta.clone();
                let (bias_plus, bias_minus) = if j == n {
                    (bias + eps, bias - eps)
                } else {
                    plus[j] += eps;
                    minus[j] -= eps;
                    (bias, bias)
                };
                let fd = (regularized_loss(&plus, bias_plus, &features, &labels, alpha)
                    - regularized_loss(&minus, bias_minus, &features, &labels, alpha))
                    / (2.0 * eps);
                let analytic = if j == n { grad_bias } else { grad[j] };
                let rel = (fd - analytic).abs() / (fd.abs() + analytic.abs()).max(1e-8);
                assert!(rel < 1e-6, "coordinate {j}: fd={fd} analytic={analytic} rel={rel}");
            }
        }
    }

    #[test]
    fn loss_descends_monotonically_on_separable_data() {
        // alpha = 0, convex regime: every accepted epoch must not increase
        // the loss (the trainer errors out otherwise), and the final loss
        // should approach zero.
        let features = bows(&[&[0], &[1], &[4], &[5]]);
        let labels = [false, false, true, true];
        let model = logreg_train(&features, &labels, 0.0, 0.5, 5000, 3).unwrap();
        let final_loss = regularized_loss(&model.theta, model.bias, &features, &labels, 0.0);
        assert!(final_loss < 0.05, "final loss {final_loss}");
    }

    #[test]
    fn oversized_learning_rate_is_reported() {
        let features = bows(&[&[0], &[100], &[400], &[500]]);
        let labels = [false, false, true, true];
        let err = logreg_train(&features, &labels, 0.0, 50.0, 50, 3).unwrap_err();
        assert!(matches!(
            err,
            BaselineError::LearningRateTooLarge { .. } | BaselineError::Diverged { .. }
        ));
    }

    #[test]
    fn chi_square_picks_the_label_copy() {
        let features = bows(&[&[1, 3], &[0, 2], &[1, 5], &[0, 1]]);
        let labels = [true, false, true, false];
        let selected = chi_square_select(&features, &labels, 1).unwrap();
        assert_eq!(selected, [0]);
    }

    #[test]
    fn independent_feature_scores_zero() {
        // Presence split evenly across both labels.
        let features = bows(&[&[1], &[0], &[1], &[0]]);
        let labels = [true, true, false, false];
        assert!(chi_square_score(&features, &labels, 0) < 1e-12);
    }

    #[test]
    fn constant_column_never_outranks_a_signal_column() {
        let features = bows(&[&[1, 1], &[1, 0], &[1, 1], &[1, 0]]);
        let labels = [true, false, true, false];
        let ranked = chi_square_select(&features, &labels, 2).unwrap();
        assert_eq!(ranked[0], 1, "signal column first");
        assert_eq!(ranked[1], 0, "degenerate column last");
    }

    #[test]
    fn ranking_matches_a_contingency_table_oracle() {
        let features = bows(&[
            &[1, 0, 2],
            &[0, 1, 0],
            &[3, 0, 1],
            &[0, 1, 0],
            &[2, 1, 3],
            &[0, 0, 0],
        ]);
        let labels = [true, false, true, false, true, false];

        // Oracle: enumerate each 2x2 table cell by cell.
        let mut oracle_scores = Vec::new();
        for j in 0..3 {
            let (mut a, mut b, mut c, mut d) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
            for (x, &y) in features.iter().zip(&labels) {
                match (x.counts[j] > 0, y) {
                    (true, true) => a += 1.0,
                    (true, false) => b += 1.0,
                    (false, true) => c += 1.0,
                    (false, false) => d += 1.0,
                }
            }
            let m = a + b + c + d;
            let denom = (a + b) * (c + d) * (a + c) * (b + d);
            let score = if denom == 0.0 {
                0.0
            } else {
                m * (a * d - b * c).powi(2) / denom
            };
            oracle_scores.push((j, score));
        }
        oracle_scores.sort_by(|(i, s), (i2, s2)| s2.partial_cmp(s).unwrap().then(i.cmp(i2)));
        let oracle_ranking: Vec<usize> = oracle_scores.into_iter().map(|(j, _)| j).collect();

        let ranked = chi_square_select(&features, &labels, 3).unwrap();
        assert_eq!(ranked, oracle_ranking);
    }

    #[test]
    fn selection_is_permutation_equivariant() {
        let features = bows(&[
            &[1, 0, 2, 0],
            &[0, 1, 0, 1],
            &[3, 0, 1, 0],
            &[0, 1, 0, 0],
            &[2, 0, 3, 1],
            &[0, 1, 0, 0],
        ]);
        let labels = [true, false, true, false, true, false];
        let k = 2;
        let selected = chi_square_select(&features, &labels, k).unwrap();

        // Permute the columns and re-select.
        let perm = [2usize, 0, 3, 1]; // new column p holds old column perm[p]
        let permuted: Vec<BowVector> = features
            .iter()
            .map(|x| BowVector {
                counts: perm.iter().map(|&old| x.counts[old]).collect(),
            })
            .collect();
        let selected_perm = chi_square_select(&permuted, &labels, k).unwrap();
        let mapped: Vec<usize> = selected_perm.iter().map(|&p| perm[p]).collect();
        assert_eq!(mapped, selected);
    }

    #[test]
    fn selected_model_projects_full_vectors() {
        let features = bows(&[&[1, 9, 0], &[0, 9, 1], &[1, 9, 0], &[0, 9, 1]]);
        let labels = [true, false, true, false];
        let selected = chi_square_select(&features, &labels, 2).unwrap();
        let projected = project_features(&features, &selected);
        let model = logreg_train(&projected, &labels, 0.0, 0.5, 1500, 1)
            .unwrap()
            .with_selected_features(selected);
        let p_pos = logreg_predict(&model, &features[0]).unwrap();
        let p_neg = logreg_predict(&model, &features[1]).unwrap();
        assert!(p_pos > 0.5 && p_neg < 0.5, "p_pos={p_pos} p_neg={p_neg}");
    }

    #[test]
    fn text_round_trip_is_bit_exact() {
        let model = LogRegModel {
            theta: vec![0.1, -2.5e-17, std::f64::consts::PI, 1.0 / 3.0],
            bias: -0.037,
            alpha: 0.01,
            selected_features: None,
        };
        let text = model.to_text();
        let parsed = LogRegModel::from_text(&text).unwrap();
        assert_eq!(model, parsed);
        assert_eq!(text, parsed.to_text());
    }

    #[test]
    fn malformed_model_text_is_rejected() {
        assert!(LogRegModel::from_text("2\n0.1\n").is_err());
        assert!(LogRegModel::from_text("two\n0.1\n0.0\n").is_err());
    }
}
