//! Synthetic data generation under the exponential patience/wait model and
//! the Monte Carlo validation harness (estimator accuracy grid, sensitivity
//! to initialization, robustness subsampling).

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::baselines::{self, UsabPolicy};
use crate::em::{self, EmInit};
use crate::types::{ClassLabel, Dataset, ObservationTriple, TimeUnit, UncertainKind};
use crate::{Error, Result};

/// Default observations per sample.
pub const DEFAULT_N: usize = 2000;
/// Default replications per grid cell.
pub const DEFAULT_SAMPLES: usize = 200;
/// Reference classifier accuracy on silent abandonments.
pub const REFERENCE_SAB_ACCURACY: f64 = 0.85;
/// Reference classifier accuracy on silently served conversations.
pub const REFERENCE_SR1_ACCURACY: f64 = 0.76;

/// Generator parameters. Rates are per `unit`.
#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    /// Patience rate θ.
    pub theta: f64,
    /// Virtual-wait rate γ.
    pub gamma: f64,
    /// Signaling probability q.
    pub q: f64,
    /// Observations per sample.
    pub n: usize,
    /// Probability that a served customer is recorded with a missing
    /// outcome. `None` ties the recording to the customer's own signaling
    /// draw: a served customer's outcome is missing exactly when they would
    /// not have signaled (probability 1 − q), which makes the uncertain
    /// class an exact mixture the EM posterior matches. `Some(p)` forces an
    /// independent Bernoulli(p) instead (0 disables silently-served
    /// records entirely).
    pub p_sr1: Option<f64>,
    /// Master seed.
    pub seed: u64,
    /// Time unit of the generated durations (rates are per this unit).
    pub unit: TimeUnit,
}

impl SimConfig {
    /// Validate parameter ranges.
    pub fn validate(&self) -> Result<()> {
        if !(self.theta > 0.0) || !(self.gamma > 0.0) {
            return Err(Error::invalid("rates must be positive"));
        }
        if !(0.0..=1.0).contains(&self.q) {
            return Err(Error::invalid("q must lie in [0, 1]"));
        }
        if let Some(p) = self.p_sr1 {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::invalid("p_sr1 must lie in [0, 1]"));
            }
        }
        if self.n == 0 {
            return Err(Error::invalid("n must be at least 1"));
        }
        Ok(())
    }

    /// Ground-truth probability of a silent abandonment,
    /// (θ/(θ+γ))·(1−q).
    pub fn p_sab(&self) -> f64 {
        self.theta / (self.theta + self.gamma) * (1.0 - self.q)
    }
}

/// A generated sample: the observable dataset plus the ground truth the
/// observer does not see.
#[derive(Debug, Clone, PartialEq)]
pub struct SimData {
    /// Observable dataset (uncertain observations have missing outcomes).
    pub dataset: Dataset,
    /// True class per observation; uncertain entries carry their
    /// resolution.
    pub labels: Vec<ClassLabel>,
}

#[inline]
fn draw_exp(rng: &mut ChaCha8Rng, rate: f64) -> f64 {
    // Inverse CDF on (0, 1]; 1−U avoids ln(0).
    -crate::math::ln(1.0 - rng.gen::<f64>()) / rate
}

/// Generate one sample. Per customer: patience τ ~ Exp(θ), virtual wait
/// W ~ Exp(γ), signaling draw Y ~ Bernoulli(q). Abandonment Δ = 1{τ ≤ W}.
/// Signaled abandonments record U = τ; silent abandonments and served
/// customers record U = W. Outcome recording follows [`SimConfig::p_sr1`].
/// Byte-identical output for identical `(config)` including the seed.
pub fn gen_dataset(config: &SimConfig) -> Result<SimData> {
    config.validate()?;
    let mut rng = crate::rng::stream(config.seed, 0xDA7A, 0);
    let mut observations = Vec::with_capacity(config.n);
    let mut labels = Vec::with_capacity(config.n);
    for _ in 0..config.n {
        let tau = draw_exp(&mut rng, config.theta);
        let w = draw_exp(&mut rng, config.gamma);
        let y = rng.gen::<f64>() < config.q;
        if tau <= w {
            if y {
                observations.push(ObservationTriple::signaled_abandon(tau));
                labels.push(ClassLabel::SignaledAbandon);
            } else {
                observations.push(ObservationTriple::uncertain(w));
                labels.push(ClassLabel::Uncertain(Some(UncertainKind::SilentAbandon)));
            }
        } else {
            let hide = match config.p_sr1 {
                None => !y,
                Some(p) => rng.gen::<f64>() < p,
            };
            if hide {
                observations.push(ObservationTriple::uncertain(w));
                labels.push(ClassLabel::Uncertain(Some(UncertainKind::ServedSilent)));
            } else {
                observations.push(ObservationTriple::served(w));
                labels.push(ClassLabel::Served);
            }
        }
    }
    Ok(SimData { dataset: Dataset::new(observations, config.unit)?, labels })
}

/// Estimators compared on the accuracy grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EstimatorId {
    /// The EM fit.
    Em,
    /// Event-count estimator, uncertain treated as served.
    M1AsServed,
    /// Event-count estimator, uncertain treated as abandoned.
    M1AsAbandoned,
    /// Censored-difference estimator, uncertain treated as served.
    M2AsServed,
    /// Censored-difference estimator, uncertain treated as silent
    /// abandonment.
    M2AsSab,
    /// Censored-difference estimator fed imperfect classifier labels
    /// (silent abandonments recognized with probability 0.85, silently
    /// served with 0.76).
    M2Scores,
}

impl EstimatorId {
    /// All six estimators in report order.
    pub const ALL: [EstimatorId; 6] = [
        EstimatorId::Em,
        EstimatorId::M1AsServed,
        EstimatorId::M1AsAbandoned,
        EstimatorId::M2AsServed,
        EstimatorId::M2AsSab,
        EstimatorId::M2Scores,
    ];

    /// Stable identifier used in CSV/JSON output.
    pub fn name(self) -> &'static str {
        match self {
            EstimatorId::Em => "em",
            EstimatorId::M1AsServed => "m1-as-served",
            EstimatorId::M1AsAbandoned => "m1-as-abandoned",
            EstimatorId::M2AsServed => "m2-as-served",
            EstimatorId::M2AsSab => "m2-as-sab",
            EstimatorId::M2Scores => "m2-scores",
        }
    }

    /// Whether the estimator reports a signaling probability.
    pub fn estimates_q(self) -> bool {
        matches!(self, EstimatorId::Em)
    }
}

/// Noisy per-observation classifier labels for uncertain observations:
/// each true label flips independently with the complementary accuracy.
pub fn misclassified_labels(
    sim: &SimData,
    sab_accuracy: f64,
    sr1_accuracy: f64,
    rng: &mut ChaCha8Rng,
) -> Vec<Option<UncertainKind>> {
    sim.labels
        .iter()
        .map(|label| match label {
            ClassLabel::Uncertain(Some(kind)) => {
                let correct = match kind {
                    UncertainKind::SilentAbandon => rng.gen::<f64>() < sab_accuracy,
                    UncertainKind::ServedSilent => rng.gen::<f64>() < sr1_accuracy,
                };
                Some(if correct {
                    *kind
                } else {
                    match kind {
                        UncertainKind::SilentAbandon => UncertainKind::ServedSilent,
                        UncertainKind::ServedSilent => UncertainKind::SilentAbandon,
                    }
                })
            }
            _ => None,
        })
        .collect()
}

/// One estimator's parameter estimates on one sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimateTriple {
    pub theta: f64,
    pub gamma: f64,
    /// NaN for estimators that do not report q.
    pub q: f64,
}

/// Run one estimator on one generated sample. `rep_rng` drives the
/// estimator's own randomness (EM initialization, classifier noise).
pub fn run_estimator(
    id: EstimatorId,
    sim: &SimData,
    rep_rng: &mut ChaCha8Rng,
    epsilon: f64,
    max_iter: usize,
) -> Result<EstimateTriple> {
    let d = &sim.dataset;
    match id {
        EstimatorId::Em => {
            let fit = em::fit_em(d, &EmInit::Random { seed: rep_rng.gen() }, epsilon, max_iter)?;
            Ok(EstimateTriple { theta: fit.theta, gamma: fit.gamma, q: fit.q })
        }
        EstimatorId::M1AsServed => {
            let est = baselines::method1(d, &UsabPolicy::AsServed)?;
            Ok(EstimateTriple { theta: est.theta, gamma: est.gamma, q: f64::NAN })
        }
        EstimatorId::M1AsAbandoned => {
            let est = baselines::method1(d, &UsabPolicy::AsAbandoned)?;
            Ok(EstimateTriple { theta: est.theta, gamma: est.gamma, q: f64::NAN })
        }
        EstimatorId::M2AsServed => {
            let est = baselines::method2(d, &UsabPolicy::AsServed)?;
            Ok(EstimateTriple { theta: est.theta, gamma: est.gamma, q: f64::NAN })
        }
        EstimatorId::M2AsSab => {
            let est = baselines::method2(d, &UsabPolicy::AsSab)?;
            Ok(EstimateTriple { theta: est.theta, gamma: est.gamma, q: f64::NAN })
        }
        EstimatorId::M2Scores => {
            let labels = misclassified_labels(
                sim,
                REFERENCE_SAB_ACCURACY,
                REFERENCE_SR1_ACCURACY,
                rep_rng,
            );
            let est = baselines::method2(d, &UsabPolicy::FromLabels(labels))?;
            Ok(EstimateTriple { theta: est.theta, gamma: est.gamma, q: f64::NAN })
        }
    }
}

/// One grid cell's summary for one estimator.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkRow {
    /// Generator configuration of the cell (seed field is the master seed).
    pub config: SimConfig,
    pub estimator: EstimatorId,
    /// Replications that succeeded / were attempted.
    pub succeeded: usize,
    pub attempted: usize,
    pub mean_theta: f64,
    pub sd_theta: f64,
    /// Normal-approximation 95% CI of the mean.
    pub ci_theta: (f64, f64),
    pub mse_theta: f64,
    pub mean_gamma: f64,
    pub sd_gamma: f64,
    pub ci_gamma: (f64, f64),
    pub mse_gamma: f64,
    /// NaN for estimators that do not report q.
    pub mean_q: f64,
    pub sd_q: f64,
    pub ci_q: (f64, f64),
    pub mse_q: f64,
    /// Ground-truth silent-abandonment share of the cell.
    pub p_sab: f64,
}

fn summarize_column(values: &[f64], truth: f64) -> (f64, f64, (f64, f64), f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = if values.len() > 1 {
        values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    let sd = crate::math::sqrt(var);
    let half = 1.959963984540054 * sd / crate::math::sqrt(n);
    let mse = values.iter().map(|v| (v - truth) * (v - truth)).sum::<f64>() / n;
    (mean, sd, (mean - half, mean + half), mse)
}

/// The default validation grid: q from 1.0 down to 0.1 at (θ=4, γ=10),
/// plus (γ, q) ∈ {(9, 0.1), (7, 0.1), (5, 0.1), (4.1, 0.1)}; rates per
/// hour. 14 cells.
pub fn default_grid(n: usize, seed: u64) -> Vec<SimConfig> {
    let mut grid = Vec::new();
    for i in 0..10 {
        let q = 1.0 - 0.1 * i as f64;
        grid.push(SimConfig {
            theta: 4.0,
            gamma: 10.0,
            q,
            n,
            p_sr1: None,
            seed,
            unit: TimeUnit::Hours,
        });
    }
    for gamma in [9.0, 7.0, 5.0, 4.1] {
        grid.push(SimConfig {
            theta: 4.0,
            gamma,
            q: 0.1,
            n,
            p_sr1: None,
            seed,
            unit: TimeUnit::Hours,
        });
    }
    grid
}

/// The RNG stream feeding estimator randomness for `(cell, replicate)`.
pub fn replicate_rng(seed: u64, cell: u64, replicate: u64) -> ChaCha8Rng {
    crate::rng::stream(seed ^ 0x5EED_0001, cell, replicate)
}

/// Seed of the generated sample for `(master seed, cell, replicate)`.
pub fn replicate_seed(seed: u64, cell: u64, replicate: u64) -> u64 {
    // Distinct from the estimator stream so estimator noise never aliases
    // the data.
    cell.wrapping_mul(0x9e37_79b9_7f4a_7c15)
        .wrapping_add(replicate)
        .wrapping_mul(0x2545_f491_4f6c_dd1d)
        ^ seed
}

/// All per-replicate estimates for one grid cell (row-major over
/// replicates, one entry per requested estimator; failures are `Err`).
/// Exposed so callers can parallelize replicates; combine with
/// [`summarize_cell`].
pub fn run_cell_replicate(
    config: &SimConfig,
    cell: u64,
    replicate: u64,
    estimators: &[EstimatorId],
    epsilon: f64,
    max_iter: usize,
) -> Vec<Result<EstimateTriple>> {
    let mut cfg = config.clone();
    cfg.seed = replicate_seed(config.seed, cell, replicate);
    let sim = match gen_dataset(&cfg) {
        Ok(s) => s,
        Err(e) => return estimators.iter().map(|_| Err(e.clone())).collect(),
    };
    let mut rng = replicate_rng(config.seed, cell, replicate);
    estimators
        .iter()
        .map(|id| run_estimator(*id, &sim, &mut rng, epsilon, max_iter))
        .collect()
}

/// Aggregate per-replicate estimates of one cell into [`BenchmarkRow`]s.
pub fn summarize_cell(
    config: &SimConfig,
    estimators: &[EstimatorId],
    replicates: &[Vec<Result<EstimateTriple>>],
) -> Vec<BenchmarkRow> {
    estimators
        .iter()
        .enumerate()
        .map(|(e, id)| {
            let ok: Vec<&EstimateTriple> =
                replicates.iter().filter_map(|row| row[e].as_ref().ok()).collect();
            let thetas: Vec<f64> = ok.iter().map(|t| t.theta).collect();
            let gammas: Vec<f64> = ok.iter().map(|t| t.gamma).collect();
            let (mean_theta, sd_theta, ci_theta, mse_theta) =
                summarize_column(&thetas, config.theta);
            let (mean_gamma, sd_gamma, ci_gamma, mse_gamma) =
                summarize_column(&gammas, config.gamma);
            let (mean_q, sd_q, ci_q, mse_q) = if id.estimates_q() {
                let qs: Vec<f64> = ok.iter().map(|t| t.q).collect();
                summarize_column(&qs, config.q)
            } else {
                (f64::NAN, f64::NAN, (f64::NAN, f64::NAN), f64::NAN)
            };
            BenchmarkRow {
                config: config.clone(),
                estimator: *id,
                succeeded: ok.len(),
                attempted: replicates.len(),
                mean_theta,
                sd_theta,
                ci_theta,
                mse_theta,
                mean_gamma,
                sd_gamma,
                ci_gamma,
                mse_gamma,
                mean_q,
                sd_q,
                ci_q,
                mse_q,
                p_sab: config.p_sab(),
            }
        })
        .collect()
}

/// Sequential accuracy benchmark over a grid: `samples` replications per
/// cell, each generating a fresh dataset and running every estimator.
/// (The CLI parallelizes replicates with the same per-replicate streams,
/// so results are independent of worker count.)
pub fn run_accuracy_benchmark(
    grid: &[SimConfig],
    estimators: &[EstimatorId],
    samples: usize,
    epsilon: f64,
    max_iter: usize,
) -> Result<Vec<BenchmarkRow>> {
    if samples == 0 {
        return Err(Error::invalid("samples must be at least 1"));
    }
    let mut rows = Vec::new();
    for (cell, config) in grid.iter().enumerate() {
        let replicates: Vec<Vec<Result<EstimateTriple>>> = (0..samples as u64)
            .map(|r| run_cell_replicate(config, cell as u64, r, estimators, epsilon, max_iter))
            .collect();
        rows.extend(summarize_cell(config, estimators, &replicates));
    }
    Ok(rows)
}

/// Initialization variants compared by the sensitivity study.
#[derive(Debug, Clone, PartialEq)]
pub enum InitVariant {
    AllSab,
    AllSr,
    Half,
    /// Classifier-like scores: true silent abandonments score 1 with the
    /// given sensitivity, silently served score 1 with 1 − specificity.
    Classifier { sensitivity: f64, specificity: f64 },
}

impl InitVariant {
    pub fn name(&self) -> &'static str {
        match self {
            InitVariant::AllSab => "all-sab",
            InitVariant::AllSr => "all-sr",
            InitVariant::Half => "half",
            InitVariant::Classifier { .. } => "classifier",
        }
    }
}

/// One sensitivity-study row: per-variant mean estimates over the
/// replications, plus the spread of mean θ̂ across variants.
#[derive(Debug, Clone, PartialEq)]
pub struct SensitivityReport {
    pub variants: Vec<(String, f64, f64, f64)>, // (name, mean θ̂, mean q̂, mean γ̂)
    pub theta_spread: f64,
}

/// Fit every initialization variant on `samples` fresh datasets from
/// `config` and report per-variant means. The classifier variant scores
/// uncertain observations from their (noisily observed) ground truth.
pub fn run_sensitivity(
    config: &SimConfig,
    variants: &[InitVariant],
    samples: usize,
    epsilon: f64,
    max_iter: usize,
) -> Result<SensitivityReport> {
    if variants.is_empty() || samples == 0 {
        return Err(Error::invalid("need at least one variant and one sample"));
    }
    let mut sums = vec![(0.0f64, 0.0f64, 0.0f64); variants.len()];
    for r in 0..samples as u64 {
        let mut cfg = config.clone();
        cfg.seed = replicate_seed(config.seed, 0xF1, r);
        let sim = gen_dataset(&cfg)?;
        let mut rng = replicate_rng(config.seed, 0xF1, r);
        for (v, variant) in variants.iter().enumerate() {
            let init = match variant {
                InitVariant::AllSab => EmInit::AllSab,
                InitVariant::AllSr => EmInit::AllSr,
                InitVariant::Half => EmInit::Half,
                InitVariant::Classifier { sensitivity, specificity } => {
                    let scores = sim
                        .labels
                        .iter()
                        .map(|label| match label {
                            ClassLabel::Uncertain(Some(UncertainKind::SilentAbandon)) => {
                                if rng.gen::<f64>() < *sensitivity {
                                    1.0
                                } else {
                                    0.0
                                }
                            }
                            ClassLabel::Uncertain(Some(UncertainKind::ServedSilent)) => {
                                if rng.gen::<f64>() < *specificity {
                                    0.0
                                } else {
                                    1.0
                                }
                            }
                            _ => 0.0,
                        })
                        .collect();
                    EmInit::Scores(scores)
                }
            };
            let fit = em::fit_em(&sim.dataset, &init, epsilon, max_iter)?;
            sums[v].0 += fit.theta;
            sums[v].1 += fit.q;
            sums[v].2 += fit.gamma;
        }
    }
    let m = samples as f64;
    let variants_out: Vec<(String, f64, f64, f64)> = variants
        .iter()
        .zip(&sums)
        .map(|(v, s)| (String::from(v.name()), s.0 / m, s.1 / m, s.2 / m))
        .collect();
    let mean_thetas: Vec<f64> = variants_out.iter().map(|v| v.1).collect();
    let theta_spread = mean_thetas.iter().fold(f64::NEG_INFINITY, |a, b| a.max(*b))
        - mean_thetas.iter().fold(f64::INFINITY, |a, b| a.min(*b));
    Ok(SensitivityReport { variants: variants_out, theta_spread })
}

/// One split's fit from the robustness study.
#[derive(Debug, Clone, PartialEq)]
pub struct RobustnessReport {
    /// Full-data fit.
    pub full: em::EmFit,
    /// Per-split fits, in split order.
    pub splits: Vec<em::EmFit>,
    /// Split sizes (a partition of the dataset).
    pub sizes: Vec<usize>,
    /// Standard deviation of θ̂ across splits.
    pub theta_sd: f64,
}

/// Partition the dataset into `n_splits` random disjoint subsets of
/// near-equal size and fit the EM on each; compare with the full-data fit.
pub fn run_robustness(
    dataset: &Dataset,
    n_splits: usize,
    seed: u64,
    epsilon: f64,
    max_iter: usize,
) -> Result<RobustnessReport> {
    if n_splits == 0 || dataset.len() < n_splits {
        return Err(Error::invalid(alloc::format!(
            "cannot split {} observations into {n_splits} nonempty parts",
            dataset.len()
        )));
    }
    // Fisher–Yates shuffle of indices.
    let mut idx: Vec<usize> = (0..dataset.len()).collect();
    let mut rng = crate::rng::stream(seed, 0x5117, 0);
    for i in (1..idx.len()).rev() {
        let j = rng.gen_range(0..=i);
        idx.swap(i, j);
    }
    let full = em::fit_em(dataset, &EmInit::Half, epsilon, max_iter)?;
    let mut splits = Vec::with_capacity(n_splits);
    let mut sizes = Vec::with_capacity(n_splits);
    for s in 0..n_splits {
        let members: Vec<ObservationTriple> = idx
            .iter()
            .skip(s)
            .step_by(n_splits)
            .map(|&i| {
                let mut o = dataset.observations[i].clone();
                o.covariates = None;
                o
            })
            .collect();
        sizes.push(members.len());
        let part = Dataset::new(members, dataset.unit)?;
        splits.push(em::fit_em(&part, &EmInit::Half, epsilon, max_iter)?);
    }
    let mean = splits.iter().map(|f| f.theta).sum::<f64>() / n_splits as f64;
    let var = splits.iter().map(|f| (f.theta - mean) * (f.theta - mean)).sum::<f64>()
        / (n_splits as f64 - 1.0).max(1.0);
    Ok(RobustnessReport { full, splits, sizes, theta_sd: crate::math::sqrt(var) })
}
