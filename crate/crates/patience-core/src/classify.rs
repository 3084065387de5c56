//! Feature ranking, a probabilistic scorer, and ROC threshold machinery
//! for separating silent abandonments from silently served conversations.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::math;
use crate::types::UncertainKind;
use crate::{Error, Result};

/// Default decision threshold on scores (score ≥ threshold ⟹ silent
/// abandonment).
pub const DEFAULT_THRESHOLD: f64 = 0.47;
/// Reference operating point: sensitivity at the default threshold.
pub const REFERENCE_SENSITIVITY: f64 = 0.85;
/// Reference operating point: specificity at the default threshold.
pub const REFERENCE_SPECIFICITY: f64 = 0.76;

/// Which side of the conversation a token column counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Party {
    Customer,
    Agent,
}

/// Column kind: token frequency for a party, or a metadata measurement
/// (queue time, durations, ...). Metadata columns are always retained by
/// feature selection.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ColumnKind {
    Token(Party),
    Metadata,
}

/// A named feature column.
#[derive(Debug, Clone, PartialEq)]
pub struct Column {
    pub name: String,
    pub kind: ColumnKind,
}

/// Dense feature matrix: one row per conversation, nonnegative counts or
/// measurements per column, optional boolean labels (silent abandonment is
/// the positive class).
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub columns: Vec<Column>,
    /// Row-major values; every row has `columns.len()` entries.
    pub rows: Vec<Vec<f64>>,
    pub labels: Option<Vec<bool>>,
}

impl FeatureMatrix {
    /// Validate shape invariants.
    pub fn validate(&self) -> Result<()> {
        for (i, row) in self.rows.iter().enumerate() {
            if row.len() != self.columns.len() {
                return Err(Error::invalid(alloc::format!(
                    "row {i} has {} values, expected {}",
                    row.len(),
                    self.columns.len()
                )));
            }
        }
        if let Some(labels) = &self.labels {
            if labels.len() != self.rows.len() {
                return Err(Error::invalid("label count does not match row count"));
            }
        }
        let mut seen: Vec<&str> = self.columns.iter().map(|c| c.name.as_str()).collect();
        seen.sort_unstable();
        if seen.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::invalid("column names must be unique"));
        }
        Ok(())
    }

    /// Values of column `j` across rows.
    pub fn column(&self, j: usize) -> Vec<f64> {
        self.rows.iter().map(|r| r[j]).collect()
    }
}

/// Plug-in mutual information (nats) between the binarized presence of a
/// feature (value > 0) and the boolean label. Constant columns score 0.
pub fn mutual_information(feature: &[f64], labels: &[bool]) -> Result<f64> {
    if feature.is_empty() || feature.len() != labels.len() {
        return Err(Error::invalid("feature and label lengths must match and be nonzero"));
    }
    let n = feature.len() as f64;
    let mut counts = [[0.0f64; 2]; 2];
    for (x, y) in feature.iter().zip(labels) {
        counts[usize::from(*x > 0.0)][usize::from(*y)] += 1.0;
    }
    let px = [counts[0][0] + counts[0][1], counts[1][0] + counts[1][1]];
    let py = [counts[0][0] + counts[1][0], counts[0][1] + counts[1][1]];
    let mut mi = 0.0;
    for a in 0..2 {
        for b in 0..2 {
            let pxy = counts[a][b] / n;
            if pxy > 0.0 {
                mi += pxy * math::ln(pxy / (px[a] / n * (py[b] / n)));
            }
        }
    }
    // Clamp tiny negative rounding noise.
    Ok(mi.max(0.0))
}

/// Keep the `k_per_party` highest-MI token columns for each party (ties
/// broken by lexicographically smaller name) plus every metadata column.
/// Column order of the input does not affect the selected set; output
/// preserves input order. When a party has at most `k_per_party` tokens,
/// all are kept.
pub fn select_top_k(matrix: &FeatureMatrix, k_per_party: usize) -> Result<FeatureMatrix> {
    matrix.validate()?;
    let labels = matrix
        .labels
        .as_ref()
        .ok_or_else(|| Error::invalid("feature selection needs labels"))?;
    // (party, MI, name, index) for token columns.
    let mut scored: Vec<(Party, f64, &str, usize)> = Vec::new();
    for (j, col) in matrix.columns.iter().enumerate() {
        if let ColumnKind::Token(party) = col.kind {
            let mi = mutual_information(&matrix.column(j), labels)?;
            scored.push((party, mi, col.name.as_str(), j));
        }
    }
    let mut keep = vec![false; matrix.columns.len()];
    for (j, col) in matrix.columns.iter().enumerate() {
        if col.kind == ColumnKind::Metadata {
            keep[j] = true;
        }
    }
    for party in [Party::Customer, Party::Agent] {
        let mut cols: Vec<&(Party, f64, &str, usize)> =
            scored.iter().filter(|c| c.0 == party).collect();
        // Descending MI, then ascending name.
        cols.sort_by(|a, b| {
            b.1.partial_cmp(&a.1).expect("finite MI").then_with(|| a.2.cmp(b.2))
        });
        for c in cols.into_iter().take(k_per_party) {
            keep[c.3] = true;
        }
    }
    let indices: Vec<usize> = (0..matrix.columns.len()).filter(|&j| keep[j]).collect();
    Ok(FeatureMatrix {
        columns: indices.iter().map(|&j| matrix.columns[j].clone()).collect(),
        rows: matrix
            .rows
            .iter()
            .map(|r| indices.iter().map(|&j| r[j]).collect())
            .collect(),
        labels: matrix.labels.clone(),
    })
}

/// Training hyperparameters of the logistic scorer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScorerConfig {
    /// L2 penalty on weights (not the bias).
    pub l2: f64,
    /// Gradient-descent learning rate.
    pub learning_rate: f64,
    /// Full-batch gradient steps.
    pub iterations: usize,
}

impl Default for ScorerConfig {
    fn default() -> Self {
        ScorerConfig { l2: 1e-4, learning_rate: 0.5, iterations: 2000 }
    }
}

/// A trained logistic scorer: π̂(x) = sigmoid(b + wᵀx̃) where x̃ is the
/// input standardized by the stored training moments.
#[derive(Debug, Clone, PartialEq)]
pub struct LogisticModel {
    pub feature_names: Vec<String>,
    pub weights: Vec<f64>,
    pub bias: f64,
    /// Per-feature training means, for standardization at scoring time.
    pub means: Vec<f64>,
    /// Per-feature training scales (standard deviation, floored at 1e-12).
    pub scales: Vec<f64>,
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + math::exp(-z))
    } else {
        let e = math::exp(z);
        e / (1.0 + e)
    }
}

impl LogisticModel {
    /// Probability the row is a silent abandonment.
    pub fn score(&self, row: &[f64]) -> f64 {
        let mut z = self.bias;
        for j in 0..self.weights.len() {
            z += self.weights[j] * (row[j] - self.means[j]) / self.scales[j];
        }
        sigmoid(z)
    }

    /// Scores for every row of a matrix (columns must align with
    /// `feature_names`).
    pub fn score_matrix(&self, matrix: &FeatureMatrix) -> Result<Vec<f64>> {
        if matrix.columns.len() != self.feature_names.len()
            || matrix
                .columns
                .iter()
                .zip(&self.feature_names)
                .any(|(c, n)| &c.name != n)
        {
            return Err(Error::invalid("feature columns do not match the trained model"));
        }
        Ok(matrix.rows.iter().map(|r| self.score(r)).collect())
    }
}

/// Train the regularized logistic scorer by deterministic full-batch
/// gradient descent. Both classes must be present.
pub fn train_scorer(matrix: &FeatureMatrix, config: &ScorerConfig) -> Result<LogisticModel> {
    matrix.validate()?;
    let labels = matrix
        .labels
        .as_ref()
        .ok_or_else(|| Error::invalid("training needs labels"))?;
    let n_pos = labels.iter().filter(|l| **l).count();
    if n_pos == 0 || n_pos == labels.len() {
        return Err(Error::degenerate("training labels contain a single class"));
    }
    let n = matrix.rows.len();
    let p = matrix.columns.len();
    let mut means = vec![0.0; p];
    let mut scales = vec![0.0; p];
    for j in 0..p {
        let mean = matrix.rows.iter().map(|r| r[j]).sum::<f64>() / n as f64;
        let var =
            matrix.rows.iter().map(|r| (r[j] - mean) * (r[j] - mean)).sum::<f64>() / n as f64;
        means[j] = mean;
        scales[j] = math::sqrt(var).max(1e-12);
    }
    let mut weights = vec![0.0; p];
    let mut bias = 0.0;
    for _ in 0..config.iterations {
        let mut gw = vec![0.0; p];
        let mut gb = 0.0;
        for (row, label) in matrix.rows.iter().zip(labels) {
            let mut z = bias;
            for j in 0..p {
                z += weights[j] * (row[j] - means[j]) / scales[j];
            }
            let err = sigmoid(z) - f64::from(u8::from(*label));
            for j in 0..p {
                gw[j] += err * (row[j] - means[j]) / scales[j];
            }
            gb += err;
        }
        for j in 0..p {
            weights[j] -= config.learning_rate * (gw[j] / n as f64 + config.l2 * weights[j]);
        }
        bias -= config.learning_rate * gb / n as f64;
    }
    Ok(LogisticModel {
        feature_names: matrix.columns.iter().map(|c| c.name.clone()).collect(),
        weights,
        bias,
        means,
        scales,
    })
}

/// ROC curve, AUC, and threshold choices for a score/label set.
#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdReport {
    /// (fpr, tpr, threshold) points from (0,0) at threshold +∞ to (1,1),
    /// one point per distinct score (ties grouped).
    pub roc: Vec<(f64, f64, f64)>,
    /// Trapezoidal area under the stored points.
    pub auc: f64,
    /// Threshold maximizing sensitivity + specificity − 1.
    pub youden_c: f64,
    pub youden_sensitivity: f64,
    pub youden_specificity: f64,
    /// Threshold maximizing F1.
    pub f1_c: f64,
    pub f1_value: f64,
    /// (FP + FN) / N at `youden_c`.
    pub error_rate: f64,
}

/// Build the ROC by a descending-score sweep with tie grouping, integrate
/// the AUC by trapezoids, and pick the Youden-index and F1-maximizing
/// thresholds (classification rule: score ≥ threshold ⟹ positive).
pub fn roc_and_thresholds(scores: &[f64], labels: &[bool]) -> Result<ThresholdReport> {
    if scores.len() != labels.len() || scores.is_empty() {
        return Err(Error::invalid("scores and labels must be nonempty and equal-length"));
    }
    let n_pos = labels.iter().filter(|l| **l).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::degenerate("both classes are required for a ROC curve"));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).expect("finite scores"));

    let mut roc = vec![(0.0, 0.0, f64::INFINITY)];
    let mut tp = 0usize;
    let mut fp = 0usize;
    let mut best_youden = (f64::NEG_INFINITY, f64::INFINITY, 0.0, 1.0); // (J, c, sens, spec)
    let mut best_f1 = (0.0f64, f64::INFINITY); // (F1, c)
    let mut i = 0;
    while i < order.len() {
        let c = scores[order[i]];
        // Consume the whole tie group at score c.
        while i < order.len() && scores[order[i]] == c {
            if labels[order[i]] {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        let tpr = tp as f64 / n_pos as f64;
        let fpr = fp as f64 / n_neg as f64;
        roc.push((fpr, tpr, c));
        let sens = tpr;
        let spec = 1.0 - fpr;
        let j = sens + spec - 1.0;
        if j > best_youden.0 {
            best_youden = (j, c, sens, spec);
        }
        let fn_ = n_pos - tp;
        let f1 = if 2 * tp + fp + fn_ > 0 {
            2.0 * tp as f64 / (2 * tp + fp + fn_) as f64
        } else {
            0.0
        };
        if f1 > best_f1.0 {
            best_f1 = (f1, c);
        }
    }
    let auc = roc
        .windows(2)
        .map(|w| (w[1].0 - w[0].0) * (w[1].1 + w[0].1) / 2.0)
        .sum::<f64>();

    // Error rate at the Youden threshold.
    let c = best_youden.1;
    let mut errors = 0usize;
    for (s, l) in scores.iter().zip(labels) {
        let predicted = *s >= c;
        if predicted != *l {
            errors += 1;
        }
    }
    Ok(ThresholdReport {
        roc,
        auc,
        youden_c: best_youden.1,
        youden_sensitivity: best_youden.2,
        youden_specificity: best_youden.3,
        f1_c: best_f1.1,
        f1_value: best_f1.0,
        error_rate: errors as f64 / labels.len() as f64,
    })
}

/// Hard labels from scores: score ≥ threshold classifies the conversation
/// as a silent abandonment, otherwise as silently served.
pub fn classify_scores(scores: &[f64], threshold: f64) -> Result<Vec<UncertainKind>> {
    if !(0.0..=1.0).contains(&threshold) {
        return Err(Error::invalid("threshold must lie in [0, 1]"));
    }
    Ok(scores
        .iter()
        .map(|s| {
            if *s >= threshold {
                UncertainKind::SilentAbandon
            } else {
                UncertainKind::ServedSilent
            }
        })
        .collect())
}

/// Score a feature matrix with a trained model and return per-row scores
/// and hard labels at the threshold.
pub fn classify_usab(
    matrix: &FeatureMatrix,
    model: &LogisticModel,
    threshold: f64,
) -> Result<Vec<(f64, UncertainKind)>> {
    let scores = model.score_matrix(matrix)?;
    let labels = classify_scores(&scores, threshold)?;
    Ok(scores.into_iter().zip(labels).collect())
}
