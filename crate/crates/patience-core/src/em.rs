//! EM estimation of (θ, q, γ) under missing abandonment labels.
//!
//! # Model
//!
//! Patience τ ~ Exp(θ) and virtual wait W ~ Exp(γ) are independent; an
//! abandoning customer signals with probability q. Served observations and
//! signaled abandonments are fully labeled; uncertain observations carry a
//! wait time `U = W` but a missing abandonment outcome (they are either
//! silent abandonments or silently served). The E-step computes posterior
//! membership weights per observation:
//!
//! * c₃ᵢ = 1{Mᵢ=0} · (1 − e^(−θ·Uᵢ))   (silent abandonment),
//! * c₂ᵢ = 1{Mᵢ=2}                      (signaled abandonment),
//! * c₁ᵢ = (1 − c₃ᵢ)·1{Mᵢ=0} + 1{Mᵢ=1} (served).
//!
//! The M-step has closed forms q = ΣC₂/Σ(1−C₁) and γ = Σ(1−C₂)/ΣU, while θ
//! solves
//!
//! ```text
//! θ·Σ(C₃−1)Uᵢ + ΣC₂ + Σ C₃ · θUᵢ e^(−θUᵢ)/(1 − e^(−θUᵢ)) = 0,
//! ```
//!
//! whose left side is strictly decreasing in θ with a positive limit at 0⁺,
//! so the root is unique and found by bracket expansion plus safeguarded
//! iteration. Iteration stops when |Δθ| + |Δq| + |Δγ| ≤ ε.
//!
//! Rates are per the dataset's time unit.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::math;
use crate::root::solve_positive_to_negative;
use crate::types::{Dataset, WeightClass};
use crate::{Error, Result};

/// Default convergence tolerance on |Δθ| + |Δq| + |Δγ|.
pub const DEFAULT_EPSILON: f64 = 1e-6;
/// Default iteration ceiling.
pub const DEFAULT_MAX_ITER: usize = 10_000;
/// Bracket expansion bounds for the θ root (per minute).
const THETA_BRACKET_LO: f64 = 1e-12;
const THETA_BRACKET_HI: f64 = 1e6;
/// Relative tolerance of the θ root refinement.
const THETA_REL_TOL: f64 = 1e-10;

/// Posterior membership weights, one (c₁, c₂, c₃) triple per observation.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassWeights {
    pub c1: Vec<f64>,
    pub c2: Vec<f64>,
    pub c3: Vec<f64>,
}

impl ClassWeights {
    /// Number of observations covered.
    pub fn len(&self) -> usize {
        self.c1.len()
    }

    /// True when no observations are covered.
    pub fn is_empty(&self) -> bool {
        self.c1.is_empty()
    }

    /// Verify per-observation normalization c₁+c₂+c₃ = 1 within `tol`.
    pub fn is_normalized(&self, tol: f64) -> bool {
        self.c1
            .iter()
            .zip(&self.c2)
            .zip(&self.c3)
            .all(|((a, b), c)| math::abs(a + b + c - 1.0) <= tol)
    }
}

/// Initialization of the silent-abandonment weights for uncertain
/// observations.
#[derive(Debug, Clone, PartialEq)]
pub enum EmInit {
    /// π̂ᵢ ~ Uniform(0, 1) independently per uncertain observation.
    Random { seed: u64 },
    /// Every uncertain observation starts as a silent abandonment (π̂ᵢ = 1).
    AllSab,
    /// Every uncertain observation starts as served (π̂ᵢ = 0).
    AllSr,
    /// π̂ᵢ = 0.5 everywhere.
    Half,
    /// Caller-supplied scores in [0, 1], indexed by observation position
    /// (consulted only at uncertain observations).
    Scores(Vec<f64>),
}

impl Default for EmInit {
    fn default() -> Self {
        EmInit::Random { seed: 0 }
    }
}

/// One iteration record of an EM run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TracePoint {
    pub theta: f64,
    pub q: f64,
    pub gamma: f64,
    pub loglik: f64,
}

/// Converged (or iteration-capped) EM parameters with diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct EmFit {
    /// Patience rate θ̂ per dataset time unit.
    pub theta: f64,
    /// Virtual-wait rate γ̂ per dataset time unit.
    pub gamma: f64,
    /// Signaling probability q̂ ∈ [0, 1].
    pub q: f64,
    /// Iterations performed (M-step count, including the initial one).
    pub iterations: usize,
    /// Whether the stopping rule was met before `max_iter`.
    pub converged: bool,
    /// Parameters and observed log-likelihood after every M-step.
    pub trace: Vec<TracePoint>,
    /// Weights from the final E-step.
    pub final_weights: ClassWeights,
    /// Set when the data carries no abandonment evidence, forcing
    /// θ̂ = q̂ = 0 by convention rather than estimation.
    pub degenerate: bool,
}

impl EmFit {
    /// Implied mean patience 1/θ̂ in dataset time units.
    pub fn mean_patience(&self) -> f64 {
        if self.theta > 0.0 {
            1.0 / self.theta
        } else {
            f64::INFINITY
        }
    }
}

/// Posterior weights at patience rate `theta_t` (> 0).
pub fn e_step(dataset: &Dataset, theta_t: f64) -> ClassWeights {
    let n = dataset.len();
    let mut w = ClassWeights { c1: vec![0.0; n], c2: vec![0.0; n], c3: vec![0.0; n] };
    for (i, obs) in dataset.observations.iter().enumerate() {
        match obs.weight_class() {
            WeightClass::Served => w.c1[i] = 1.0,
            WeightClass::SignaledAbandon => w.c2[i] = 1.0,
            WeightClass::Uncertain => {
                let c3 = -math::expm1(-theta_t * obs.u);
                w.c3[i] = c3;
                w.c1[i] = 1.0 - c3;
            }
        }
    }
    w
}

/// Closed-form signaling probability and wait rate given weights. Returns
/// `(q, gamma, degenerate)`; with no abandonment evidence q is 0 by
/// convention and the flag is set.
pub fn m_step_qgamma(dataset: &Dataset, weights: &ClassWeights) -> Result<(f64, f64, bool)> {
    let total_u = dataset.total_exposure();
    if !(total_u > 0.0) {
        return Err(Error::degenerate("zero total exposure"));
    }
    let sum_c2: f64 = weights.c2.iter().sum();
    let sum_not_c1: f64 = weights.c1.iter().map(|c| 1.0 - c).sum();
    let (q, degenerate) = if sum_not_c1 > 0.0 { (sum_c2 / sum_not_c1, false) } else { (0.0, true) };
    let gamma = weights.c2.iter().map(|c| 1.0 - c).sum::<f64>() / total_u;
    Ok((q.clamp(0.0, 1.0), gamma, degenerate))
}

/// The rate equation solved by [`m_step_theta`], evaluated at `theta`.
/// Strictly decreasing on (0, ∞) whenever some weight lies off the served
/// class.
pub fn theta_equation(dataset: &Dataset, weights: &ClassWeights, theta: f64) -> f64 {
    let mut acc = 0.0;
    for (i, obs) in dataset.observations.iter().enumerate() {
        acc += theta * (weights.c3[i] - 1.0) * obs.u;
        acc += weights.c2[i];
        if weights.c3[i] > 0.0 {
            acc += weights.c3[i] * math::x_over_expm1(theta * obs.u);
        }
    }
    acc
}

/// Patience rate given weights: the unique positive root of the rate
/// equation. Returns `(theta, degenerate)`; without abandonment evidence
/// (ΣC₂ = ΣC₃ = 0) θ is 0 by convention and the flag is set.
pub fn m_step_theta(dataset: &Dataset, weights: &ClassWeights) -> Result<(f64, bool)> {
    let evidence: f64 =
        weights.c2.iter().sum::<f64>() + weights.c3.iter().sum::<f64>();
    if evidence <= 0.0 {
        return Ok((0.0, true));
    }
    let theta = solve_positive_to_negative(
        |t| theta_equation(dataset, weights, t),
        THETA_BRACKET_LO,
        1.0,
        THETA_BRACKET_HI,
        THETA_REL_TOL,
    )?;
    Ok((theta, false))
}

/// Log-likelihood of the observed data at (θ, q, γ). Uncertain observations
/// contribute the sum of their served and silent-abandonment branch
/// densities: log[e^(−θU)·γe^(−γU) + (1−q)(1−e^(−θU))·γe^(−γU)].
/// Returns −∞ for configurations assigning zero density to any observation.
pub fn observed_loglik(dataset: &Dataset, theta: f64, q: f64, gamma: f64) -> f64 {
    if theta < 0.0 || gamma <= 0.0 || !(0.0..=1.0).contains(&q) {
        return f64::NEG_INFINITY;
    }
    let ln_gamma = math::ln(gamma);
    let mut total = 0.0;
    for obs in &dataset.observations {
        let u = obs.u;
        let term = match obs.weight_class() {
            WeightClass::Served => ln_gamma - gamma * u - theta * u,
            WeightClass::SignaledAbandon => {
                if theta <= 0.0 || q <= 0.0 {
                    return f64::NEG_INFINITY;
                }
                math::ln(q) + math::ln(theta) - theta * u - gamma * u
            }
            WeightClass::Uncertain => {
                // log[e^(−θu) + (1−q)(1−e^(−θu))] + log γ − γu.
                let served_branch = -theta * u;
                let mix = if q >= 1.0 || theta <= 0.0 {
                    served_branch
                } else {
                    let silent_branch =
                        math::ln_1p(-q) + math::ln(-math::expm1(-theta * u));
                    math::log_add_exp(served_branch, silent_branch)
                };
                ln_gamma - gamma * u + mix
            }
        };
        total += term;
    }
    total
}

/// Initial silent-abandonment weights per the chosen variant.
fn initial_weights(dataset: &Dataset, init: &EmInit) -> Result<ClassWeights> {
    let n = dataset.len();
    let mut w = ClassWeights { c1: vec![0.0; n], c2: vec![0.0; n], c3: vec![0.0; n] };
    let mut rng = match init {
        EmInit::Random { seed } => Some(crate::rng::stream(*seed, 0x0e11, 0)),
        _ => None,
    };
    for (i, obs) in dataset.observations.iter().enumerate() {
        match obs.weight_class() {
            WeightClass::Served => w.c1[i] = 1.0,
            WeightClass::SignaledAbandon => w.c2[i] = 1.0,
            WeightClass::Uncertain => {
                let pi = match init {
                    EmInit::Random { .. } => rng.as_mut().expect("rng set").gen::<f64>(),
                    EmInit::AllSab => 1.0,
                    EmInit::AllSr => 0.0,
                    EmInit::Half => 0.5,
                    EmInit::Scores(scores) => *scores.get(i).ok_or_else(|| {
                        Error::invalid("score vector shorter than the dataset")
                    })?,
                };
                if !(0.0..=1.0).contains(&pi) {
                    return Err(Error::invalid("initial weights must lie in [0, 1]"));
                }
                w.c3[i] = pi;
                w.c1[i] = 1.0 - pi;
            }
        }
    }
    Ok(w)
}

/// Run the EM iteration to convergence.
///
/// Deterministic given `(dataset, init)`. Non-convergence at `max_iter`
/// yields `converged = false` rather than an error; datasets with no
/// abandonment evidence yield the flagged θ̂ = q̂ = 0 convention.
pub fn fit_em(
    dataset: &Dataset,
    init: &EmInit,
    epsilon: f64,
    max_iter: usize,
) -> Result<EmFit> {
    if dataset.is_empty() {
        return Err(Error::degenerate("empty dataset"));
    }
    if !(epsilon > 0.0) {
        return Err(Error::invalid("epsilon must be positive"));
    }

    let (_, _, signaled) = dataset.class_counts();
    if signaled == 0 {
        // Without a single signaled abandonment the patience rate is
        // unidentified: once the weights come from the same θ, every θ
        // solves the rate equation (the uncertain terms cancel exactly),
        // and the observed likelihood is flat in θ at q = 0. Report the
        // flagged θ̂ = q̂ = 0 convention instead of an init-dependent value.
        let total_u = dataset.total_exposure();
        if !(total_u > 0.0) {
            return Err(Error::degenerate("zero total exposure"));
        }
        let gamma = dataset.len() as f64 / total_u;
        let weights = e_step(dataset, 0.0);
        let trace = vec![TracePoint {
            theta: 0.0,
            q: 0.0,
            gamma,
            loglik: observed_loglik(dataset, 0.0, 0.0, gamma),
        }];
        return Ok(EmFit {
            theta: 0.0,
            gamma,
            q: 0.0,
            iterations: 1,
            converged: true,
            trace,
            final_weights: weights,
            degenerate: true,
        });
    }

    let mut weights = initial_weights(dataset, init)?;
    let (mut theta, theta_flag) = m_step_theta(dataset, &weights)?;
    let (mut q, mut gamma, q_flag) = m_step_qgamma(dataset, &weights)?;
    let mut trace =
        vec![TracePoint { theta, q, gamma, loglik: observed_loglik(dataset, theta, q, gamma) }];

    if theta_flag {
        // No abandonment evidence anywhere; the model collapses to a pure
        // service-rate fit and iteration cannot change it.
        return Ok(EmFit {
            theta,
            gamma,
            q,
            iterations: 1,
            converged: true,
            trace,
            final_weights: weights,
            degenerate: true,
        });
    }

    let mut converged = false;
    let mut iterations = 1;
    while iterations < max_iter {
        weights = e_step(dataset, theta);
        let (theta_next, _) = m_step_theta(dataset, &weights)?;
        let (q_next, gamma_next, _) = m_step_qgamma(dataset, &weights)?;
        iterations += 1;
        trace.push(TracePoint {
            theta: theta_next,
            q: q_next,
            gamma: gamma_next,
            loglik: observed_loglik(dataset, theta_next, q_next, gamma_next),
        });
        let delta = math::abs(theta_next - theta)
            + math::abs(q_next - q)
            + math::abs(gamma_next - gamma);
        theta = theta_next;
        q = q_next;
        gamma = gamma_next;
        if delta <= epsilon {
            converged = true;
            break;
        }
    }

    let final_weights = e_step(dataset, theta);
    Ok(EmFit {
        theta,
        gamma,
        q,
        iterations,
        converged,
        trace,
        final_weights,
        degenerate: q_flag && q == 0.0,
    })
}
