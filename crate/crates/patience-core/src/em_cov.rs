//! EM estimation with a log-linear patience model.
//!
//! Each observation carries covariates X and its own patience rate
//! θ(X) = e^(−(β₀+βᵀX)), so mean patience is e^(β₀+βᵀX) and a coefficient
//! β_j scales mean patience by the multiplier e^(β_j) per unit of X_j. The
//! E-step is unchanged except that it uses per-observation rates; the M-step
//! keeps the closed forms for (q, γ) and solves the k+1 estimating equations
//!
//! ```text
//! Σᵢ (−X_{i,j}) · [ Ĉ₂ᵢ + log Gᵢ · (Ĉ₁ᵢ + Ĉ₂ᵢ − Ĉ₃ᵢ Gᵢ/(1−Gᵢ)) ] = 0,
//! ```
//!
//! for j = 0..k with X_{i,0} ≡ 1 and Gᵢ = e^(−Uᵢθᵢ). Writing xᵢ = Uᵢθᵢ the
//! bracket is Ĉ₂ᵢ − xᵢ(Ĉ₁ᵢ+Ĉ₂ᵢ) + Ĉ₃ᵢ·xᵢ/(e^{xᵢ}−1), which stays finite as
//! θᵢ → 0. The equations are the gradient of the surrogate objective, solved
//! by damped Newton with a numerical Jacobian and a gradient-ascent fallback.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::em::{self, ClassWeights, EmInit, TracePoint};
use crate::math;
use crate::types::{Dataset, WeightClass};
use crate::{Error, Result};

/// Residual tolerance (∞-norm, scaled by total abandonment evidence) at
/// which the estimating equations count as solved.
const RESIDUAL_TOL: f64 = 1e-10;
/// Damped-Newton iteration ceiling per M-step.
const NEWTON_MAX_ITER: usize = 50;
/// Step-halving ceiling within one Newton or gradient step.
const MAX_HALVINGS: usize = 50;

/// Initialization of the coefficient vector.
#[derive(Debug, Clone, PartialEq)]
pub enum CovInit {
    /// Start at the nested intercept-only optimum: β₀ = −ln θ̂ from a plain
    /// EM fit, β_j = 0.
    Nested,
    /// Start from caller-supplied coefficients (e.g. a previous fit, for
    /// warm-started bootstrap refits).
    Warm { beta0: f64, beta: Vec<f64> },
}

impl Default for CovInit {
    fn default() -> Self {
        CovInit::Nested
    }
}

/// Converged covariate-model parameters with diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct CovariateFit {
    /// Intercept β₀ (mean patience at X = 0 is e^(β₀), in dataset units).
    pub beta0: f64,
    /// Coefficients β₁..β_k, one per covariate column.
    pub beta: Vec<f64>,
    /// Virtual-wait rate γ̂ per dataset time unit.
    pub gamma: f64,
    /// Signaling probability q̂ ∈ [0, 1].
    pub q: f64,
    /// Patience multipliers e^(β_j), aligned with `beta`.
    pub multipliers: Vec<f64>,
    /// Iterations performed (M-step count, including the initial one).
    pub iterations: usize,
    /// Whether the stopping rule was met before `max_iter`.
    pub converged: bool,
    /// Per-iteration (θ at the mean covariate, q, γ, observed loglik).
    pub trace: Vec<TracePoint>,
    /// Weights from the final E-step.
    pub final_weights: ClassWeights,
    /// Set when the data carries no abandonment evidence; θ → 0 has no
    /// finite coefficient representation, so β₀ is +∞ by convention.
    pub degenerate: bool,
}

impl CovariateFit {
    /// Patience rate implied at covariate vector `x`.
    pub fn theta_at(&self, x: &[f64]) -> f64 {
        math::exp(-self.linear_predictor(x))
    }

    /// Mean patience e^(β₀+βᵀx) implied at covariate vector `x`.
    pub fn mean_patience_at(&self, x: &[f64]) -> f64 {
        math::exp(self.linear_predictor(x))
    }

    fn linear_predictor(&self, x: &[f64]) -> f64 {
        self.beta0 + self.beta.iter().zip(x).map(|(b, v)| b * v).sum::<f64>()
    }
}

/// Covariate row of observation `i` with the implicit leading 1.
#[inline]
fn design_value(dataset: &Dataset, i: usize, j: usize) -> f64 {
    if j == 0 {
        1.0
    } else {
        dataset.observations[i].covariates.as_ref().expect("validated covariates")[j - 1]
    }
}

/// θᵢ = e^(−βᵀXᵢ) with `beta_full = [β₀, β₁, ..., β_k]`.
fn theta_i(dataset: &Dataset, i: usize, beta_full: &[f64]) -> f64 {
    let mut lp = 0.0;
    for (j, b) in beta_full.iter().enumerate() {
        lp += b * design_value(dataset, i, j);
    }
    math::exp(-lp)
}

/// Posterior weights at per-observation rates implied by `beta_full`.
pub fn e_step_cov(dataset: &Dataset, beta_full: &[f64]) -> ClassWeights {
    let n = dataset.len();
    let mut w = ClassWeights { c1: vec![0.0; n], c2: vec![0.0; n], c3: vec![0.0; n] };
    for (i, obs) in dataset.observations.iter().enumerate() {
        match obs.weight_class() {
            WeightClass::Served => w.c1[i] = 1.0,
            WeightClass::SignaledAbandon => w.c2[i] = 1.0,
            WeightClass::Uncertain => {
                let c3 = -math::expm1(-theta_i(dataset, i, beta_full) * obs.u);
                w.c3[i] = c3;
                w.c1[i] = 1.0 - c3;
            }
        }
    }
    w
}

/// Left sides of the k+1 estimating equations at `beta_full` (equal to the
/// surrogate-objective gradient).
fn residuals(dataset: &Dataset, weights: &ClassWeights, beta_full: &[f64]) -> Vec<f64> {
    let p = beta_full.len();
    let mut r = vec![0.0; p];
    for i in 0..dataset.len() {
        let x = theta_i(dataset, i, beta_full) * dataset.observations[i].u;
        let mut bracket = weights.c2[i] - x * (weights.c1[i] + weights.c2[i]);
        if weights.c3[i] > 0.0 {
            bracket += weights.c3[i] * math::x_over_expm1(x);
        }
        for (j, rj) in r.iter_mut().enumerate() {
            *rj -= design_value(dataset, i, j) * bracket;
        }
    }
    r
}

/// Surrogate objective in β (the γ/q terms are constant within this
/// M-step); used by the gradient-ascent fallback line search.
fn surrogate(dataset: &Dataset, weights: &ClassWeights, beta_full: &[f64]) -> f64 {
    let mut total = 0.0;
    for i in 0..dataset.len() {
        let theta = theta_i(dataset, i, beta_full);
        let x = theta * dataset.observations[i].u;
        total += weights.c1[i] * (-x);
        if weights.c2[i] > 0.0 {
            total += weights.c2[i] * (math::ln(theta) - x);
        }
        if weights.c3[i] > 0.0 {
            total += weights.c3[i] * math::ln(-math::expm1(-x));
        }
    }
    total
}

fn norm_l2(v: &[f64]) -> f64 {
    math::sqrt(v.iter().map(|x| x * x).sum())
}

fn norm_inf(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(math::abs(*x)))
}

/// Solve A z = b in place by Gaussian elimination with partial pivoting.
/// Returns `None` when A is numerically singular.
fn solve_linear(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let p = b.len();
    for col in 0..p {
        let pivot_row = (col..p)
            .max_by(|&r1, &r2| {
                math::abs(a[r1][col]).partial_cmp(&math::abs(a[r2][col])).expect("finite")
            })
            .expect("nonempty");
        if math::abs(a[pivot_row][col]) < 1e-300 {
            return None;
        }
        a.swap(col, pivot_row);
        b.swap(col, pivot_row);
        for row in (col + 1)..p {
            let factor = a[row][col] / a[col][col];
            for k in col..p {
                a[row][k] -= factor * a[col][k];
            }
            b[row] -= factor * b[col];
        }
    }
    let mut z = vec![0.0; p];
    for col in (0..p).rev() {
        let mut s = b[col];
        for k in (col + 1)..p {
            s -= a[col][k] * z[k];
        }
        z[col] = s / a[col][col];
        if !z[col].is_finite() {
            return None;
        }
    }
    Some(z)
}

/// Verify the augmented design [1 | X] has full column rank; on failure the
/// error names the offending column.
fn check_design_rank(dataset: &Dataset) -> Result<()> {
    let k = dataset.covariate_count();
    let p = k + 1;
    let n = dataset.len() as f64;
    let mut gram = vec![vec![0.0; p]; p];
    for i in 0..dataset.len() {
        for j in 0..p {
            let xj = design_value(dataset, i, j);
            for l in j..p {
                gram[j][l] += xj * design_value(dataset, i, l) / n;
            }
        }
    }
    for j in 0..p {
        for l in 0..j {
            gram[j][l] = gram[l][j];
        }
    }
    let scale = (0..p).fold(0.0f64, |m, j| m.max(gram[j][j])).max(1e-300);
    // Gaussian elimination on the Gram matrix; a vanished pivot names a
    // column linearly dependent on its predecessors.
    for col in 0..p {
        if gram[col][col] <= 1e-10 * scale {
            let name = if col == 0 {
                String::from("intercept")
            } else {
                dataset
                    .covariate_names
                    .as_ref()
                    .and_then(|names| names.get(col - 1).cloned())
                    .unwrap_or_else(|| format!("x{col}"))
            };
            return Err(Error::degenerate(format!(
                "design matrix is rank-deficient: column '{name}' is collinear with earlier columns"
            )));
        }
        for row in (col + 1)..p {
            let factor = gram[row][col] / gram[col][col];
            for kk in col..p {
                gram[row][kk] -= factor * gram[col][kk];
            }
        }
    }
    Ok(())
}

/// Solve the k+1 estimating equations for β given the current weights,
/// starting from `beta_init` (full vector, intercept first).
///
/// Damped Newton with a forward-difference Jacobian; each step is halved
/// until the residual norm decreases, and on persistent Newton failure a
/// line search along the surrogate gradient takes over for one step.
pub fn solve_beta(
    dataset: &Dataset,
    weights: &ClassWeights,
    beta_init: &[f64],
) -> Result<Vec<f64>> {
    let evidence: f64 = weights.c2.iter().sum::<f64>() + weights.c3.iter().sum::<f64>();
    if evidence <= 0.0 {
        return Err(Error::degenerate(
            "no abandonment evidence: the patience equations have no finite solution",
        ));
    }
    let p = beta_init.len();
    let tol = RESIDUAL_TOL * evidence.max(1.0);
    let mut beta = beta_init.to_vec();
    let mut r = residuals(dataset, weights, &beta);

    for _ in 0..NEWTON_MAX_ITER {
        if norm_inf(&r) <= tol {
            return Ok(beta);
        }
        // Forward-difference Jacobian J[j][l] = ∂r_j/∂β_l.
        let mut jac = vec![vec![0.0; p]; p];
        for l in 0..p {
            let h = 1e-7 * (1.0 + math::abs(beta[l]));
            let mut shifted = beta.clone();
            shifted[l] += h;
            let r_shift = residuals(dataset, weights, &shifted);
            for j in 0..p {
                jac[j][l] = (r_shift[j] - r[j]) / h;
            }
        }
        let newton_dir =
            solve_linear(jac, r.iter().map(|x| -x).collect()).filter(|d| norm_l2(d).is_finite());

        let r_norm = norm_l2(&r);
        let mut advanced = false;
        if let Some(dir) = newton_dir {
            let mut t = 1.0;
            for _ in 0..MAX_HALVINGS {
                let cand: Vec<f64> =
                    beta.iter().zip(&dir).map(|(b, d)| b + t * d).collect();
                let r_cand = residuals(dataset, weights, &cand);
                if norm_l2(&r_cand) < r_norm {
                    beta = cand;
                    r = r_cand;
                    advanced = true;
                    break;
                }
                t *= 0.5;
            }
        }
        if !advanced {
            // Gradient ascent on the surrogate: r is its gradient.
            let q0 = surrogate(dataset, weights, &beta);
            let mut eta = 1.0 / (1.0 + r_norm);
            for _ in 0..MAX_HALVINGS {
                let cand: Vec<f64> =
                    beta.iter().zip(&r).map(|(b, g)| b + eta * g).collect();
                if surrogate(dataset, weights, &cand) > q0 {
                    r = residuals(dataset, weights, &cand);
                    beta = cand;
                    advanced = true;
                    break;
                }
                eta *= 0.5;
            }
        }
        if !advanced {
            return Err(Error::numerical(
                "coefficient solver stalled: neither Newton nor gradient steps improve the residual",
            ));
        }
    }
    if norm_inf(&r) <= tol * 1e2 {
        // Close enough for the outer EM loop to proceed; the fixed point is
        // still verified by the stationarity checks.
        return Ok(beta);
    }
    Err(Error::numerical(format!(
        "coefficient solver did not converge: residual ∞-norm {:e}",
        norm_inf(&r)
    )))
}

/// Observed-data log-likelihood under per-observation rates
/// θᵢ = e^(−βᵀXᵢ).
pub fn observed_loglik_cov(dataset: &Dataset, beta_full: &[f64], q: f64, gamma: f64) -> f64 {
    if gamma <= 0.0 || !(0.0..=1.0).contains(&q) {
        return f64::NEG_INFINITY;
    }
    let ln_gamma = math::ln(gamma);
    let mut total = 0.0;
    for (i, obs) in dataset.observations.iter().enumerate() {
        let theta = theta_i(dataset, i, beta_full);
        let u = obs.u;
        total += match obs.weight_class() {
            WeightClass::Served => ln_gamma - gamma * u - theta * u,
            WeightClass::SignaledAbandon => {
                if q <= 0.0 {
                    return f64::NEG_INFINITY;
                }
                math::ln(q) + math::ln(theta) - theta * u - gamma * u
            }
            WeightClass::Uncertain => {
                let served_branch = -theta * u;
                let mix = if q >= 1.0 {
                    served_branch
                } else {
                    math::log_add_exp(
                        served_branch,
                        math::ln_1p(-q) + math::ln(-math::expm1(-theta * u)),
                    )
                };
                ln_gamma - gamma * u + mix
            }
        };
    }
    total
}

/// Fit the covariate model by EM.
///
/// Convergence requires both the scalar rule |Δθ(x̄)| + |Δq| + |Δγ| ≤ ε
/// (with θ evaluated at the mean covariate vector) and max_j |Δβ_j| ≤ ε.
pub fn fit_em_cov(
    dataset: &Dataset,
    init: &CovInit,
    epsilon: f64,
    max_iter: usize,
) -> Result<CovariateFit> {
    if dataset.is_empty() {
        return Err(Error::degenerate("empty dataset"));
    }
    if !(epsilon > 0.0) {
        return Err(Error::invalid("epsilon must be positive"));
    }
    let k = dataset.covariate_count();
    if k > 0 {
        check_design_rank(dataset)?;
    }
    let p = k + 1;

    let (_, _, n2) = dataset.class_counts();
    // Without a single signaled abandonment the patience coefficients are
    // unidentified (see `fit_em`); θ → 0 has no finite intercept.
    if n2 == 0 {
        // No abandonment evidence: θ → 0, which has no finite intercept.
        let gamma = dataset.len() as f64 / dataset.total_exposure();
        let weights = e_step_cov(dataset, &vec![f64::INFINITY; 1]);
        return Ok(CovariateFit {
            beta0: f64::INFINITY,
            beta: vec![0.0; k],
            gamma,
            q: 0.0,
            multipliers: vec![1.0; k],
            iterations: 1,
            converged: true,
            trace: vec![TracePoint { theta: 0.0, q: 0.0, gamma, loglik: f64::NEG_INFINITY }],
            final_weights: weights,
            degenerate: true,
        });
    }

    let mut beta_full: Vec<f64> = match init {
        CovInit::Nested => {
            let base = em::fit_em(dataset, &EmInit::Half, epsilon, max_iter)?;
            if base.theta <= 0.0 {
                return Err(Error::degenerate("intercept-only fit is degenerate"));
            }
            let mut b = vec![0.0; p];
            b[0] = -math::ln(base.theta);
            b
        }
        CovInit::Warm { beta0, beta } => {
            if beta.len() != k {
                return Err(Error::invalid(format!(
                    "warm start has {} coefficients, dataset has {k} covariates",
                    beta.len()
                )));
            }
            let mut b = vec![*beta0];
            b.extend_from_slice(beta);
            b
        }
    };

    let mut x_mean = vec![1.0; p];
    for i in 0..dataset.len() {
        for j in 1..p {
            x_mean[j] += (design_value(dataset, i, j) - x_mean[j]) / (i as f64 + 1.0);
        }
    }
    let theta_at_mean = |b: &[f64]| {
        math::exp(-b.iter().zip(&x_mean).map(|(bj, xj)| bj * xj).sum::<f64>())
    };

    let mut weights = e_step_cov(dataset, &beta_full);
    let (mut q, mut gamma, _) = em::m_step_qgamma(dataset, &weights)?;
    beta_full = solve_beta(dataset, &weights, &beta_full)?;
    let mut theta_mean = theta_at_mean(&beta_full);
    let mut trace = vec![TracePoint {
        theta: theta_mean,
        q,
        gamma,
        loglik: observed_loglik_cov(dataset, &beta_full, q, gamma),
    }];

    let mut converged = false;
    let mut iterations = 1;
    while iterations < max_iter {
        weights = e_step_cov(dataset, &beta_full);
        let (q_next, gamma_next, _) = em::m_step_qgamma(dataset, &weights)?;
        let beta_next = solve_beta(dataset, &weights, &beta_full)?;
        let theta_mean_next = theta_at_mean(&beta_next);
        iterations += 1;
        trace.push(TracePoint {
            theta: theta_mean_next,
            q: q_next,
            gamma: gamma_next,
            loglik: observed_loglik_cov(dataset, &beta_next, q_next, gamma_next),
        });
        let scalar_delta = math::abs(theta_mean_next - theta_mean)
            + math::abs(q_next - q)
            + math::abs(gamma_next - gamma);
        let beta_delta = beta_full
            .iter()
            .zip(&beta_next)
            .fold(0.0f64, |m, (a, b)| m.max(math::abs(a - b)));
        theta_mean = theta_mean_next;
        q = q_next;
        gamma = gamma_next;
        beta_full = beta_next;
        if scalar_delta <= epsilon && beta_delta <= epsilon {
            converged = true;
            break;
        }
    }

    let final_weights = e_step_cov(dataset, &beta_full);
    let beta = beta_full[1..].to_vec();
    let multipliers = beta.iter().map(|b| math::exp(*b)).collect();
    Ok(CovariateFit {
        beta0: beta_full[0],
        beta,
        gamma,
        q,
        multipliers,
        iterations,
        converged,
        trace,
        final_weights,
        degenerate: false,
    })
}

/// One per-bucket fit from [`group_patience`].
#[derive(Debug, Clone, PartialEq)]
pub struct BucketFit {
    /// Human-readable bucket label, e.g. `<=1`, `(1,10]`, `>50`.
    pub label: String,
    /// Inclusive lower edge (−∞ for the first bucket).
    pub lower: f64,
    /// Inclusive upper edge (+∞ for the last bucket).
    pub upper: f64,
    /// Observations in the bucket.
    pub n: usize,
    /// Plain EM fit over the bucket (covariates dropped).
    pub fit: em::EmFit,
}

/// Split the dataset by one covariate into intervals
/// (−∞, e₁], (e₁, e₂], ..., (e_m, ∞) and fit the basic EM per bucket.
/// Empty buckets are skipped. Deterministic (buckets use the 0.5-weight
/// initialization).
pub fn group_patience(
    dataset: &Dataset,
    cov_index: usize,
    upper_edges: &[f64],
    epsilon: f64,
    max_iter: usize,
) -> Result<Vec<BucketFit>> {
    if cov_index >= dataset.covariate_count() {
        return Err(Error::invalid(format!(
            "covariate index {cov_index} out of range (dataset has {})",
            dataset.covariate_count()
        )));
    }
    if upper_edges.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::invalid("bucket edges must be strictly increasing"));
    }
    let mut out = Vec::new();
    for b in 0..=upper_edges.len() {
        let lower = if b == 0 { f64::NEG_INFINITY } else { upper_edges[b - 1] };
        let upper = if b == upper_edges.len() { f64::INFINITY } else { upper_edges[b] };
        let obs: Vec<_> = dataset
            .observations
            .iter()
            .filter(|o| {
                let v = o.covariates.as_ref().expect("validated covariates")[cov_index];
                v > lower && v <= upper
            })
            .map(|o| {
                let mut stripped = o.clone();
                stripped.covariates = None;
                stripped
            })
            .collect();
        if obs.is_empty() {
            continue;
        }
        let n = obs.len();
        let bucket = Dataset::new(obs, dataset.unit)?;
        let fit = em::fit_em(&bucket, &EmInit::Half, epsilon, max_iter)?;
        let label = if upper_edges.is_empty() {
            String::from("all")
        } else if b == 0 {
            format!("<={}", upper_edges[0])
        } else if b == upper_edges.len() {
            format!(">{}", upper_edges[b - 1])
        } else {
            format!("({},{}]", upper_edges[b - 1], upper_edges[b])
        };
        out.push(BucketFit { label, lower, upper, n, fit });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::em::{fit_em, DEFAULT_MAX_ITER};
    use crate::types::{ObservationTriple, TimeUnit};
    use alloc::string::ToString;
    use approx::assert_relative_eq;
    use rand::Rng;

    fn cov_ds(obs: Vec<ObservationTriple>, names: &[&str]) -> Dataset {
        Dataset::with_covariates(
            obs,
            TimeUnit::Minutes,
            names.iter().map(|s| s.to_string()).collect(),
        )
        .unwrap()
    }

    /// Generator with per-observation rates θᵢ = e^(−(β₀+β₁xᵢ)), binary x,
    /// signaling probability q, wait rate γ; silent observations (signal
    /// withheld) are recorded as uncertain.
    fn simulate_cov(
        beta0: f64,
        beta1: f64,
        gamma: f64,
        q: f64,
        n: usize,
        seed: u64,
    ) -> Dataset {
        let mut rng = crate::rng::stream(seed, 0xC0F, 0);
        let obs = (0..n)
            .map(|_| {
                let x = if rng.gen::<f64>() < 0.5 { 1.0 } else { 0.0 };
                let theta = (-(beta0 + beta1 * x)).exp();
                let tau = -(1.0 - rng.gen::<f64>()).ln() / theta;
                let w = -(1.0 - rng.gen::<f64>()).ln() / gamma;
                let y = rng.gen::<f64>() < q;
                let base = if tau <= w {
                    if y {
                        ObservationTriple::signaled_abandon(tau)
                    } else {
                        ObservationTriple::uncertain(w)
                    }
                } else if y {
                    ObservationTriple::served(w)
                } else {
                    ObservationTriple::uncertain(w)
                };
                base.with_covariates(alloc::vec![x])
            })
            .collect();
        cov_ds(obs, &["x1"])
    }

    #[test]
    fn solve_beta_intercept_only_single_signaled_abandon() {
        // One signaled abandonment, U = 1, c2 = 1: the intercept equation
        // reduces to −1 + U·e^(−β₀) = 0, so β₀ = 0 and θ = 1.
        let d = Dataset::new(
            alloc::vec![ObservationTriple::signaled_abandon(1.0)],
            TimeUnit::Minutes,
        )
        .unwrap();
        let w = ClassWeights {
            c1: alloc::vec![0.0],
            c2: alloc::vec![1.0],
            c3: alloc::vec![0.0],
        };
        let beta = solve_beta(&d, &w, &[0.5]).unwrap();
        assert_relative_eq!(beta[0], 0.0, epsilon = 1e-8);
    }

    #[test]
    fn solve_beta_no_evidence_is_degenerate() {
        let d = Dataset::new(alloc::vec![ObservationTriple::served(1.0)], TimeUnit::Minutes)
            .unwrap();
        let w = ClassWeights {
            c1: alloc::vec![1.0],
            c2: alloc::vec![0.0],
            c3: alloc::vec![0.0],
        };
        assert!(matches!(solve_beta(&d, &w, &[0.0]), Err(Error::DegenerateData(_))));
    }

    #[test]
    fn solve_beta_residual_norm_small_on_random_instances() {
        for seed in 0..10u64 {
            let d = simulate_cov(1.0, 0.7, 0.5, 0.6, 30, seed);
            let w = e_step_cov(&d, &[1.0, 0.0]);
            let beta = solve_beta(&d, &w, &[1.0, 0.0]).unwrap();
            let r = residuals(&d, &w, &beta);
            assert!(norm_l2(&r) < 1e-8, "residual {:e}", norm_l2(&r));
        }
    }

    #[test]
    fn intercept_only_matches_plain_em() {
        let d = simulate_cov(2.0, 0.0, 0.5, 0.5, 400, 5);
        let plain = fit_em(&d, &EmInit::Half, 1e-9, DEFAULT_MAX_ITER).unwrap();
        // Same data, no covariate columns.
        let no_cov = Dataset::new(
            d.observations
                .iter()
                .map(|o| {
                    let mut s = o.clone();
                    s.covariates = None;
                    s
                })
                .collect(),
            TimeUnit::Minutes,
        )
        .unwrap();
        let fit = fit_em_cov(&no_cov, &CovInit::Nested, 1e-9, DEFAULT_MAX_ITER).unwrap();
        assert!(fit.converged);
        assert_relative_eq!((-fit.beta0).exp(), plain.theta, epsilon = 1e-6);
        assert_relative_eq!(fit.q, plain.q, epsilon = 1e-6);
        assert_relative_eq!(fit.gamma, plain.gamma, epsilon = 1e-6);
    }

    #[test]
    fn recovers_binary_covariate_effect() {
        // Rates in minutes: β₀ = 3.44 ⟹ mean patience ≈ 31 min at x = 0.
        let d = simulate_cov(3.44, 1.05, 0.115, 0.5, 8000, 42);
        let fit = fit_em_cov(&d, &CovInit::Nested, 1e-7, DEFAULT_MAX_ITER).unwrap();
        assert!(fit.converged);
        assert!((fit.beta0 - 3.44).abs() < 0.2, "beta0 = {}", fit.beta0);
        assert!((fit.beta[0] - 1.05).abs() < 0.3, "beta1 = {}", fit.beta[0]);
        assert!((fit.q - 0.5).abs() < 0.05);
        assert!((fit.gamma - 0.115).abs() < 0.01);
    }

    #[test]
    fn multiplier_is_exp_of_coefficient() {
        let d = simulate_cov(2.5, 0.8, 0.3, 0.6, 1500, 9);
        let fit = fit_em_cov(&d, &CovInit::Nested, 1e-7, DEFAULT_MAX_ITER).unwrap();
        assert_eq!(fit.multipliers[0], fit.beta[0].exp());
        // Mean patience at x equals e^(β₀+βᵀx) by definition.
        let x = [0.37];
        assert_relative_eq!(
            fit.mean_patience_at(&x),
            (fit.beta0 + fit.beta[0] * 0.37).exp(),
            max_relative = 1e-12
        );
        assert_relative_eq!(fit.theta_at(&x) * fit.mean_patience_at(&x), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn monotone_ascent_along_trace() {
        let d = simulate_cov(2.0, 0.6, 0.4, 0.5, 800, 17);
        let fit = fit_em_cov(&d, &CovInit::Nested, 1e-8, DEFAULT_MAX_ITER).unwrap();
        for pair in fit.trace.windows(2) {
            assert!(
                pair[1].loglik >= pair[0].loglik - 1e-9,
                "log-likelihood decreased: {} -> {}",
                pair[0].loglik,
                pair[1].loglik
            );
        }
    }

    #[test]
    fn location_shift_covariance() {
        let d = simulate_cov(2.0, 0.9, 0.4, 0.5, 1200, 23);
        let fit = fit_em_cov(&d, &CovInit::Nested, 1e-9, DEFAULT_MAX_ITER).unwrap();
        let c = 1.7;
        let shifted = cov_ds(
            d.observations
                .iter()
                .map(|o| {
                    let mut s = o.clone();
                    let x = s.covariates.as_ref().unwrap()[0];
                    s.covariates = Some(alloc::vec![x + c]);
                    s
                })
                .collect(),
            &["x1"],
        );
        let fit_s = fit_em_cov(&shifted, &CovInit::Nested, 1e-9, DEFAULT_MAX_ITER).unwrap();
        assert_relative_eq!(fit_s.beta[0], fit.beta[0], epsilon = 1e-5);
        assert_relative_eq!(fit_s.beta0, fit.beta0 - c * fit.beta[0], epsilon = 1e-4);
    }

    #[test]
    fn collinear_column_named_in_error() {
        let obs = alloc::vec![
            ObservationTriple::served(1.0).with_covariates(alloc::vec![1.0, 2.0]),
            ObservationTriple::signaled_abandon(2.0).with_covariates(alloc::vec![2.0, 4.0]),
            ObservationTriple::uncertain(3.0).with_covariates(alloc::vec![3.0, 6.0]),
        ];
        let d = cov_ds(obs, &["a", "b"]);
        let err = fit_em_cov(&d, &CovInit::Nested, 1e-6, 100).unwrap_err();
        let msg = alloc::format!("{err}");
        assert!(msg.contains('b'), "error should name the collinear column: {msg}");
    }

    #[test]
    fn no_evidence_yields_degenerate_fit() {
        let obs = alloc::vec![
            ObservationTriple::served(1.0).with_covariates(alloc::vec![0.0]),
            ObservationTriple::served(2.0).with_covariates(alloc::vec![1.0]),
        ];
        let d = cov_ds(obs, &["x1"]);
        let fit = fit_em_cov(&d, &CovInit::Nested, 1e-6, 100).unwrap();
        assert!(fit.degenerate);
        assert_eq!(fit.q, 0.0);
        assert_relative_eq!(fit.gamma, 2.0 / 3.0);
    }

    #[test]
    fn warm_start_reaches_same_fixed_point() {
        let d = simulate_cov(2.0, 0.5, 0.4, 0.5, 600, 31);
        let cold = fit_em_cov(&d, &CovInit::Nested, 1e-9, DEFAULT_MAX_ITER).unwrap();
        let warm = fit_em_cov(
            &d,
            &CovInit::Warm { beta0: cold.beta0 + 0.1, beta: alloc::vec![cold.beta[0] - 0.1] },
            1e-9,
            DEFAULT_MAX_ITER,
        )
        .unwrap();
        assert_relative_eq!(warm.beta0, cold.beta0, epsilon = 1e-5);
        assert_relative_eq!(warm.beta[0], cold.beta[0], epsilon = 1e-5);
        assert!(warm.iterations <= cold.iterations);
    }

    #[test]
    fn group_patience_single_bucket_equals_full_fit() {
        let d = simulate_cov(2.0, 0.5, 0.4, 0.5, 500, 7);
        let buckets = group_patience(&d, 0, &[], 1e-8, DEFAULT_MAX_ITER).unwrap();
        assert_eq!(buckets.len(), 1);
        let stripped = Dataset::new(
            d.observations
                .iter()
                .map(|o| {
                    let mut s = o.clone();
                    s.covariates = None;
                    s
                })
                .collect(),
            TimeUnit::Minutes,
        )
        .unwrap();
        let full = fit_em(&stripped, &EmInit::Half, 1e-8, DEFAULT_MAX_ITER).unwrap();
        assert_eq!(buckets[0].fit.theta, full.theta);
        assert_eq!(buckets[0].n, d.len());
    }

    #[test]
    fn group_patience_partitions_and_labels() {
        let d = simulate_cov(2.0, 0.5, 0.4, 0.5, 400, 13);
        let buckets = group_patience(&d, 0, &[0.5], 1e-7, DEFAULT_MAX_ITER).unwrap();
        assert_eq!(buckets.len(), 2);
        assert_eq!(buckets.iter().map(|b| b.n).sum::<usize>(), d.len());
        assert_eq!(buckets[0].label, "<=0.5");
        assert_eq!(buckets[1].label, ">0.5");
    }
}
