//! Rayon-based runners whose results are independent of worker count:
//! every unit of work derives its own RNG stream from (seed, indices), so
//! scheduling order cannot change any number.

use anyhow::Result;
use patience_core::bootstrap::{self, BootstrapCi};
use patience_core::simulate::{
    run_cell_replicate, summarize_cell, BenchmarkRow, EstimateTriple, EstimatorId, SimConfig,
};
use patience_core::types::Dataset;
use rayon::prelude::*;

/// Run `f` inside a dedicated pool of `jobs` threads, or on the global pool
/// when `jobs` is `None`.
pub fn with_jobs<T: Send>(jobs: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match jobs {
        None => Ok(f()),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build()?;
            Ok(pool.install(f))
        }
    }
}

/// Parallel accuracy benchmark: replicates of every cell fan out across the
/// current rayon pool; summaries are computed per cell from the
/// deterministic per-replicate results.
pub fn run_benchmark(
    grid: &[SimConfig],
    estimators: &[EstimatorId],
    samples: usize,
    epsilon: f64,
    max_iter: usize,
) -> Vec<BenchmarkRow> {
    let mut rows = Vec::new();
    for (cell, config) in grid.iter().enumerate() {
        let replicates: Vec<Vec<patience_core::Result<EstimateTriple>>> = (0..samples as u64)
            .into_par_iter()
            .map(|r| run_cell_replicate(config, cell as u64, r, estimators, epsilon, max_iter))
            .collect();
        rows.extend(summarize_cell(config, estimators, &replicates));
    }
    rows
}

/// Parallel percentile bootstrap: resample replicates fan out across the
/// current rayon pool; the interval summary is order-independent.
pub fn run_bootstrap<F>(
    dataset: &Dataset,
    b: usize,
    seed: u64,
    fitter: F,
) -> patience_core::Result<BootstrapCi>
where
    F: Fn(&Dataset) -> patience_core::Result<Vec<f64>> + Sync,
{
    let replicates: Vec<patience_core::Result<Vec<f64>>> = (0..b as u64)
        .into_par_iter()
        .map(|r| fitter(&bootstrap::resample(dataset, seed, r)))
        .collect();
    bootstrap::summarize(replicates, seed)
}
