//! Percentile bootstrap confidence intervals by case resampling.

use alloc::vec::Vec;

use rand::Rng;

use crate::types::Dataset;
use crate::{Error, Result};

/// Default resample count.
pub const DEFAULT_RESAMPLES: usize = 500;
/// Failure share above which the interval is marked unreliable.
const UNRELIABLE_FAILURE_SHARE: f64 = 0.10;

/// Percentile bootstrap intervals, one (lower, upper) pair per parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct BootstrapCi {
    /// 2.5% percentile per parameter.
    pub lower: Vec<f64>,
    /// 97.5% percentile per parameter.
    pub upper: Vec<f64>,
    /// Resamples requested.
    pub requested: usize,
    /// Resamples whose refit succeeded.
    pub succeeded: usize,
    /// True when more than 10% of refits failed.
    pub unreliable: bool,
    /// Seed the resampling streams derive from.
    pub seed: u64,
}

/// Draw `dataset.len()` observations with replacement, using the RNG
/// stream derived from `(seed, replicate)` so replicates are independent
/// and order-insensitive.
pub fn resample(dataset: &Dataset, seed: u64, replicate: u64) -> Dataset {
    let mut rng = crate::rng::stream(seed, 0xB007, replicate);
    let n = dataset.len();
    let observations =
        (0..n).map(|_| dataset.observations[rng.gen_range(0..n)].clone()).collect();
    Dataset { observations, unit: dataset.unit, covariate_names: dataset.covariate_names.clone() }
}

/// Linear-interpolation quantile of an ascending-sorted slice.
fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let pos = p * (n - 1) as f64;
    let lo = pos as usize;
    let hi = (lo + 1).min(n - 1);
    let frac = pos - lo as f64;
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

/// Percentile 95% intervals from pre-computed per-replicate parameter
/// vectors (entries are `Err` for failed refits). Use this when replicates
/// were fitted in parallel by the caller; [`bootstrap_ci`] wraps the
/// sequential case.
pub fn summarize(
    replicates: Vec<Result<Vec<f64>>>,
    seed: u64,
) -> Result<BootstrapCi> {
    let requested = replicates.len();
    let successes: Vec<Vec<f64>> = replicates.into_iter().filter_map(|r| r.ok()).collect();
    let succeeded = successes.len();
    if succeeded < 2 {
        return Err(Error::degenerate(
            "fewer than 2 bootstrap refits succeeded; no interval is available",
        ));
    }
    let dim = successes[0].len();
    if successes.iter().any(|v| v.len() != dim) {
        return Err(Error::invalid("bootstrap refits returned inconsistent parameter counts"));
    }
    let mut lower = Vec::with_capacity(dim);
    let mut upper = Vec::with_capacity(dim);
    for j in 0..dim {
        let mut col: Vec<f64> = successes.iter().map(|v| v[j]).collect();
        col.sort_by(|a, b| a.partial_cmp(b).expect("finite parameter"));
        lower.push(quantile_sorted(&col, 0.025));
        upper.push(quantile_sorted(&col, 0.975));
    }
    let unreliable =
        (requested - succeeded) as f64 > UNRELIABLE_FAILURE_SHARE * requested as f64;
    Ok(BootstrapCi { lower, upper, requested, succeeded, unreliable, seed })
}

/// Resample-and-refit percentile bootstrap: `b` case resamples of the
/// dataset, refit by `fitter` (which returns the parameter vector), 95%
/// percentile bounds per parameter. Deterministic given `seed`; failed
/// refits are excluded and counted.
pub fn bootstrap_ci<F>(dataset: &Dataset, b: usize, seed: u64, fitter: F) -> Result<BootstrapCi>
where
    F: Fn(&Dataset) -> Result<Vec<f64>>,
{
    if b < 2 {
        return Err(Error::invalid("bootstrap needs at least 2 resamples"));
    }
    if dataset.is_empty() {
        return Err(Error::degenerate("empty dataset"));
    }
    let replicates =
        (0..b as u64).map(|r| fitter(&resample(dataset, seed, r))).collect();
    summarize(replicates, seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::{ObservationTriple, TimeUnit};
    use alloc::vec;

    fn identical_dataset(n: usize) -> Dataset {
        Dataset::new(
            (0..n).map(|_| ObservationTriple::signaled_abandon(2.0)).collect(),
            TimeUnit::Minutes,
        )
        .unwrap()
    }

    #[test]
    fn identical_observations_give_zero_width_intervals() {
        let d = identical_dataset(25);
        let ci = bootstrap_ci(&d, 50, 1, |ds| {
            Ok(vec![ds.len() as f64 / ds.total_exposure()])
        })
        .unwrap();
        assert_eq!(ci.lower, ci.upper);
        assert_eq!(ci.succeeded, 50);
        assert!(!ci.unreliable);
    }

    #[test]
    fn deterministic_given_seed() {
        let d = Dataset::new(
            (0..40)
                .map(|i| ObservationTriple::signaled_abandon(1.0 + (i as f64) * 0.1))
                .collect(),
            TimeUnit::Minutes,
        )
        .unwrap();
        let fit = |ds: &Dataset| Ok(vec![ds.total_exposure()]);
        let a = bootstrap_ci(&d, 100, 7, fit).unwrap();
        let b = bootstrap_ci(&d, 100, 7, fit).unwrap();
        assert_eq!(a, b);
        let c = bootstrap_ci(&d, 100, 8, fit).unwrap();
        assert_ne!(a.lower, c.lower);
    }

    #[test]
    fn failures_counted_and_flagged() {
        let replicates: Vec<crate::Result<Vec<f64>>> = (0..10)
            .map(|i| {
                if i % 2 == 0 {
                    Ok(vec![i as f64])
                } else {
                    Err(crate::Error::degenerate("synthetic failure"))
                }
            })
            .collect();
        let ci = summarize(replicates, 0).unwrap();
        assert_eq!(ci.succeeded, 5);
        assert!(ci.unreliable);
    }

    #[test]
    fn percentiles_bracket_the_sample() {
        let replicates: Vec<crate::Result<Vec<f64>>> =
            (0..1000).map(|i| Ok(vec![i as f64])).collect();
        let ci = summarize(replicates, 0).unwrap();
        assert!((ci.lower[0] - 24.975).abs() < 1e-9);
        assert!((ci.upper[0] - 974.025).abs() < 1e-9);
    }
}
