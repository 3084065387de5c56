//! Closed-form rate estimators under explicit resolution policies for the
//! uncertain class.
//!
//! Both estimators need every observation resolved to an effective
//! `(y, delta)` pair, so uncertain observations (`M = 0`) are first mapped to
//! served or abandoned according to a [`UsabPolicy`].
//!
//! * [`method1`] — event-count estimator: θ̂ = ΣYᵢΔᵢ/ΣUᵢ, γ̂ = Σ(1−Δᵢ)/ΣUᵢ.
//!   Treats every abandonment as exactly observed, so it has no notion of a
//!   left-censored (silent) abandonment; its policies are only
//!   `as_served`/`as_abandoned`.
//! * [`method2`] — censored-difference estimator:
//!   θ̂ = Σ(1−Δᵢ)/ΣUᵢ(1−Δᵢ) − (n−ΣYᵢΔᵢ)/ΣUᵢ, γ̂ = (n−ΣYᵢΔᵢ)/ΣUᵢ. The first
//!   term estimates θ+γ from the served observations; subtracting γ̂ can go
//!   negative on finite samples, in which case θ̂ is clamped to 0 and the
//!   result flagged degenerate.
//!
//! Δ here is the abandonment indicator (Δ = 1 when patience ran out before
//! the virtual wait).

use alloc::format;
use alloc::vec::Vec;

use crate::types::{Dataset, UncertainKind, WeightClass};
use crate::{Error, Result};

/// How to resolve uncertain (`M = 0`) observations before summation.
#[derive(Debug, Clone, PartialEq)]
pub enum UsabPolicy {
    /// Treat every uncertain observation as served: (y, Δ) = (0, 0).
    AsServed,
    /// Treat every uncertain observation as a signaled abandonment:
    /// (y, Δ) = (1, 1). Only meaningful for [`method1`].
    AsAbandoned,
    /// Treat every uncertain observation as a silent abandonment:
    /// (y, Δ) = (0, 1). Only meaningful for [`method2`].
    AsSab,
    /// Resolve each uncertain observation from a supplied label. The slice
    /// is indexed by observation position and must be `Some` at every
    /// uncertain observation.
    FromLabels(Vec<Option<UncertainKind>>),
    /// Resolve each uncertain observation by thresholding a score in [0, 1]
    /// (score ≥ threshold ⟹ silent abandonment). The slice is indexed by
    /// observation position.
    FromScores { scores: Vec<f64>, threshold: f64 },
}

/// Closed-form rate estimates, in units of 1/(dataset time unit).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateEstimate {
    /// Patience (abandonment) rate θ̂ ≥ 0.
    pub theta: f64,
    /// Virtual-wait rate γ̂ ≥ 0.
    pub gamma: f64,
    /// Implied mean patience 1/θ̂ (infinite when θ̂ = 0).
    pub mean_patience: f64,
    /// Set when a negative θ̂ was clamped to 0 or a term was undefined on
    /// this sample.
    pub degenerate: bool,
}

impl RateEstimate {
    fn new(theta: f64, gamma: f64, degenerate: bool) -> Self {
        let (theta, degenerate) =
            if theta < 0.0 { (0.0, true) } else { (theta, degenerate) };
        let mean_patience = if theta > 0.0 { 1.0 / theta } else { f64::INFINITY };
        RateEstimate { theta, gamma, mean_patience, degenerate }
    }
}

/// Effective (y, Δ) after policy resolution.
fn resolve(dataset: &Dataset, policy: &UsabPolicy) -> Result<Vec<(bool, bool)>> {
    if let UsabPolicy::FromScores { threshold, .. } = policy {
        if !(0.0..=1.0).contains(threshold) {
            return Err(Error::invalid(format!("threshold {threshold} outside [0, 1]")));
        }
    }
    dataset
        .observations
        .iter()
        .enumerate()
        .map(|(i, obs)| match obs.weight_class() {
            WeightClass::Served => Ok((false, false)),
            WeightClass::SignaledAbandon => Ok((true, true)),
            WeightClass::Uncertain => match policy {
                UsabPolicy::AsServed => Ok((false, false)),
                UsabPolicy::AsAbandoned => Ok((true, true)),
                UsabPolicy::AsSab => Ok((false, true)),
                UsabPolicy::FromLabels(labels) => {
                    match labels.get(i).copied().flatten() {
                        Some(UncertainKind::ServedSilent) => Ok((false, false)),
                        Some(UncertainKind::SilentAbandon) => Ok((false, true)),
                        None => Err(Error::invalid(format!(
                            "label map does not cover uncertain observation {i}"
                        ))),
                    }
                }
                UsabPolicy::FromScores { scores, threshold } => match scores.get(i) {
                    Some(s) => Ok((false, *s >= *threshold)),
                    None => Err(Error::invalid(format!(
                        "score map does not cover uncertain observation {i}"
                    ))),
                },
            },
        })
        .collect()
}

fn require_nonempty(dataset: &Dataset) -> Result<()> {
    if dataset.is_empty() {
        return Err(Error::degenerate("empty dataset"));
    }
    Ok(())
}

/// Event-count estimator. `policy` must be
/// [`UsabPolicy::AsServed`] or [`UsabPolicy::AsAbandoned`].
pub fn method1(dataset: &Dataset, policy: &UsabPolicy) -> Result<RateEstimate> {
    require_nonempty(dataset)?;
    if !matches!(policy, UsabPolicy::AsServed | UsabPolicy::AsAbandoned) {
        return Err(Error::invalid(
            "the event-count estimator resolves uncertain observations only to served or abandoned",
        ));
    }
    let resolved = resolve(dataset, policy)?;
    let total_u = dataset.total_exposure();
    if !(total_u > 0.0) {
        return Err(Error::degenerate("zero total exposure"));
    }
    let abandons = resolved.iter().filter(|(y, d)| *y && *d).count() as f64;
    let served = resolved.iter().filter(|(_, d)| !*d).count() as f64;
    Ok(RateEstimate::new(abandons / total_u, served / total_u, false))
}

/// Censored-difference estimator. `policy` must not be
/// [`UsabPolicy::AsAbandoned`] (a silent abandonment carries no signal).
pub fn method2(dataset: &Dataset, policy: &UsabPolicy) -> Result<RateEstimate> {
    require_nonempty(dataset)?;
    if matches!(policy, UsabPolicy::AsAbandoned) {
        return Err(Error::invalid(
            "the censored-difference estimator resolves uncertain observations to served or silent-abandoned",
        ));
    }
    let resolved = resolve(dataset, policy)?;
    let n = dataset.len() as f64;
    let total_u = dataset.total_exposure();
    if !(total_u > 0.0) {
        return Err(Error::degenerate("zero total exposure"));
    }
    let mut served_count = 0.0;
    let mut served_u = 0.0;
    let mut signaled = 0.0;
    for ((y, d), obs) in resolved.iter().zip(&dataset.observations) {
        if !*d {
            served_count += 1.0;
            served_u += obs.u;
        }
        if *y && *d {
            signaled += 1.0;
        }
    }
    if served_count > 0.0 && !(served_u > 0.0) {
        return Err(Error::degenerate("served observations with zero total exposure"));
    }
    let gamma = (n - signaled) / total_u;
    let (completion_rate, degenerate) = if served_count > 0.0 {
        (served_count / served_u, false)
    } else {
        // No served observations: the θ+γ term is undefined.
        (0.0, true)
    };
    Ok(RateEstimate::new(completion_rate - gamma, gamma, degenerate))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::{ObservationTriple, TimeUnit};
    use alloc::vec;
    use approx::assert_relative_eq;

    fn ds(obs: Vec<ObservationTriple>) -> Dataset {
        Dataset::new(obs, TimeUnit::Minutes).unwrap()
    }

    #[test]
    fn method1_direct_substitution() {
        // {served u=2} ∪ {signaled abandon u=1} → θ̂ = 1/3, γ̂ = 1/3.
        let d = ds(vec![ObservationTriple::served(2.0), ObservationTriple::signaled_abandon(1.0)]);
        let est = method1(&d, &UsabPolicy::AsServed).unwrap();
        assert_relative_eq!(est.theta, 1.0 / 3.0);
        assert_relative_eq!(est.gamma, 1.0 / 3.0);
        assert_relative_eq!(est.mean_patience, 3.0);
    }

    #[test]
    fn method1_all_served_is_zero_theta() {
        let d = ds(vec![ObservationTriple::served(2.0), ObservationTriple::served(3.0)]);
        let est = method1(&d, &UsabPolicy::AsServed).unwrap();
        assert_eq!(est.theta, 0.0);
        assert_eq!(est.mean_patience, f64::INFINITY);
    }

    #[test]
    fn method2_hand_example() {
        // {served u=1} ∪ {signaled u=2} ∪ {silent-abandon u=4}:
        // θ̂ = 1/1 − 2/7 = 5/7, γ̂ = 2/7.
        let d = ds(vec![
            ObservationTriple::served(1.0),
            ObservationTriple::signaled_abandon(2.0),
            ObservationTriple::uncertain(4.0),
        ]);
        let labels = vec![None, None, Some(UncertainKind::SilentAbandon)];
        let est = method2(&d, &UsabPolicy::FromLabels(labels)).unwrap();
        assert_relative_eq!(est.theta, 5.0 / 7.0, max_relative = 1e-12);
        assert_relative_eq!(est.gamma, 2.0 / 7.0, max_relative = 1e-12);
        assert!(!est.degenerate);
        // as_sab resolves the single uncertain observation the same way.
        let est2 = method2(&d, &UsabPolicy::AsSab).unwrap();
        assert_eq!(est2, est);
    }

    #[test]
    fn method2_all_served_cancels() {
        let d = ds(vec![ObservationTriple::served(1.5), ObservationTriple::served(2.5)]);
        let est = method2(&d, &UsabPolicy::AsServed).unwrap();
        assert_relative_eq!(est.theta, 0.0);
        assert_relative_eq!(est.gamma, 2.0 / 4.0);
    }

    #[test]
    fn method2_negative_theta_clamped_and_flagged() {
        // Many short silent abandonments inflate γ̂ past the served
        // completion rate: 1/1 − 11/1.1 = −9 → clamped.
        let mut obs = vec![ObservationTriple::served(1.0)];
        obs.extend((0..10).map(|_| ObservationTriple::uncertain(0.01)));
        let est = method2(&ds(obs), &UsabPolicy::AsSab).unwrap();
        assert_eq!(est.theta, 0.0);
        assert!(est.degenerate);
    }

    #[test]
    fn methods_agree_without_silent_abandonments_on_balanced_times() {
        // With equal observed times the served-group mean equals the overall
        // mean, so the censored-difference estimator collapses to the
        // event-count form ΣYΔ/ΣU.
        let d = ds(vec![
            ObservationTriple::served(3.0),
            ObservationTriple::signaled_abandon(3.0),
        ]);
        let a = method1(&d, &UsabPolicy::AsServed).unwrap();
        let b = method2(&d, &UsabPolicy::AsServed).unwrap();
        assert_relative_eq!(a.theta, b.theta, max_relative = 1e-12);
        assert_relative_eq!(a.gamma, b.gamma, max_relative = 1e-12);
    }

    #[test]
    fn policy_validation() {
        let d = ds(vec![ObservationTriple::uncertain(1.0)]);
        assert!(method1(&d, &UsabPolicy::AsSab).is_err());
        assert!(method2(&d, &UsabPolicy::AsAbandoned).is_err());
        assert!(method2(&d, &UsabPolicy::FromLabels(vec![None])).is_err());
        assert!(method2(
            &d,
            &UsabPolicy::FromScores { scores: vec![0.5], threshold: 1.5 }
        )
        .is_err());
        assert!(method1(&Dataset::default(), &UsabPolicy::AsServed).is_err());
    }

    #[test]
    fn from_scores_threshold_is_inclusive() {
        let d = ds(vec![
            ObservationTriple::uncertain(2.0),
            ObservationTriple::served(1.0),
            ObservationTriple::signaled_abandon(1.0),
        ]);
        // Score exactly at the threshold counts as silent abandonment.
        let est = method2(
            &d,
            &UsabPolicy::FromScores { scores: vec![0.47, 0.0, 0.0], threshold: 0.47 },
        )
        .unwrap();
        let est_sab = method2(&d, &UsabPolicy::AsSab).unwrap();
        assert_eq!(est, est_sab);
    }
}
