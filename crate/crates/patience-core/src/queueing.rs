//! Steady-state analysis of the M/M/n queue with exponential abandonment,
//! staffing search, and capacity-waste accounting.

use alloc::format;
use alloc::vec::Vec;

use crate::math;
use crate::{Error, Result};

/// State-space ceiling for the stationary recursion.
const MAX_STATES: usize = 10_000_000;
/// Log-weight drop (relative to the running maximum) past the server count
/// at which the tail is negligible (< 1e-12 of the total mass, with margin).
const LOG_TAIL_CUTOFF: f64 = -64.0;

/// Inputs of the abandonment queue. All rates share one time unit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErlangAInput {
    /// Arrival rate λ.
    pub lambda: f64,
    /// Per-server service rate μ.
    pub mu: f64,
    /// Abandonment (impatience) rate θ of waiting customers.
    pub theta_ab: f64,
    /// Server count.
    pub n: u32,
}

impl ErlangAInput {
    fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0) || !(self.mu > 0.0) || !(self.theta_ab > 0.0) {
            return Err(Error::invalid("all rates must be positive"));
        }
        if self.n == 0 {
            return Err(Error::invalid("server count must be at least 1"));
        }
        Ok(())
    }
}

/// Steady-state performance measures.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErlangAOutput {
    /// P(an arriving customer finds all servers busy), P(j ≥ n).
    pub p_wait: f64,
    /// Long-run abandonment probability, (θ/λ)·E[(j−n)⁺].
    pub p_abandon: f64,
    /// Mean wait E[(j−n)⁺]/λ (same time unit as the rates).
    pub mean_wait: f64,
    /// Server occupancy λ(1−p_abandon)/(nμ).
    pub occupancy: f64,
}

/// Stationary distribution of the birth–death chain with up-rate λ and
/// down-rate min(j, n)μ + max(0, j−n)θ, computed by the log-space ratio
/// recursion and truncated once the tail mass is below 1e-12.
pub fn erlang_a(input: &ErlangAInput) -> Result<ErlangAOutput> {
    input.validate()?;
    let ErlangAInput { lambda, mu, theta_ab, n } = *input;
    let n_usize = n as usize;
    let ln_lambda = math::ln(lambda);

    // Log-weights w_j with w_0 = 0; normalization deferred.
    let mut log_w = Vec::with_capacity(n_usize * 2);
    log_w.push(0.0f64);
    let mut w_max = 0.0f64;
    let mut j = 0usize;
    loop {
        j += 1;
        if j > MAX_STATES {
            return Err(Error::numerical(format!(
                "state space exceeded {MAX_STATES} states before truncation; \
                 rescale the time unit"
            )));
        }
        let down = if j <= n_usize {
            j as f64 * mu
        } else {
            n as f64 * mu + (j - n_usize) as f64 * theta_ab
        };
        let next = log_w[j - 1] + ln_lambda - math::ln(down);
        log_w.push(next);
        w_max = w_max.max(next);
        // Beyond the servers the weights decay at least geometrically, so a
        // big drop below the maximum bounds the remaining tail.
        if j > n_usize && next < w_max + LOG_TAIL_CUTOFF {
            break;
        }
    }

    let mut norm = 0.0;
    let mut mass_wait = 0.0;
    let mut excess = 0.0; // E[(j−n)⁺], unnormalized
    for (state, lw) in log_w.iter().enumerate() {
        let w = math::exp(lw - w_max);
        norm += w;
        if state >= n_usize {
            mass_wait += w;
        }
        if state > n_usize {
            excess += (state - n_usize) as f64 * w;
        }
    }
    let p_wait = mass_wait / norm;
    let mean_excess = excess / norm;
    let p_abandon = theta_ab / lambda * mean_excess;
    Ok(ErlangAOutput {
        p_wait,
        p_abandon,
        mean_wait: mean_excess / lambda,
        occupancy: lambda * (1.0 - p_abandon) / (n as f64 * mu),
    })
}

/// Service-level target for [`staffing_search`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StaffingTarget {
    /// Require p_abandon ≤ the bound.
    MaxAbandon(f64),
    /// Require p_wait ≤ the bound.
    MaxWait(f64),
}

impl StaffingTarget {
    fn met(&self, out: &ErlangAOutput) -> bool {
        match self {
            StaffingTarget::MaxAbandon(p) => out.p_abandon <= *p,
            StaffingTarget::MaxWait(p) => out.p_wait <= *p,
        }
    }
}

/// Smallest server count meeting the target (both measures are monotone
/// nonincreasing in n, so the feasible region is an up-set): double n until
/// feasible, then binary-search the boundary.
pub fn staffing_search(
    lambda: f64,
    mu: f64,
    theta_ab: f64,
    target: StaffingTarget,
    max_n: u32,
) -> Result<u32> {
    let bound = match target {
        StaffingTarget::MaxAbandon(p) | StaffingTarget::MaxWait(p) => p,
    };
    if !(0.0..=1.0).contains(&bound) {
        return Err(Error::invalid("target probability must lie in [0, 1]"));
    }
    let eval = |n: u32| erlang_a(&ErlangAInput { lambda, mu, theta_ab, n });
    let mut hi = 1u32;
    loop {
        let out = eval(hi)?;
        if target.met(&out) {
            break;
        }
        if hi >= max_n {
            return Err(Error::degenerate(format!(
                "target not reachable with {max_n} servers (achieved p_wait={:.6}, \
                 p_abandon={:.6})",
                out.p_wait, out.p_abandon
            )));
        }
        hi = hi.saturating_mul(2).min(max_n);
    }
    let mut lo = hi / 2; // infeasible or zero
    while lo + 1 < hi {
        let mid = lo + (hi - lo) / 2;
        if mid == 0 || !target.met(&eval(mid.max(1))?) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(hi)
}

/// Per-class inputs of the capacity-waste computation: population share and
/// (service, closure) durations in minutes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassLoad {
    pub share: f64,
    pub service_minutes: f64,
    pub closure_minutes: f64,
}

impl ClassLoad {
    fn total(&self) -> f64 {
        self.service_minutes + self.closure_minutes
    }
}

/// Fraction of agent handling capacity spent on silent abandonments:
/// share·duration of the silent-abandonment class over the share-weighted
/// duration of all classes. `classes` is (silent-abandon, silently-served,
/// served).
pub fn capacity_waste(classes: &[ClassLoad; 3]) -> Result<f64> {
    let share_sum: f64 = classes.iter().map(|c| c.share).sum();
    if classes.iter().any(|c| c.share < 0.0 || c.service_minutes < 0.0 || c.closure_minutes < 0.0)
    {
        return Err(Error::invalid("shares and durations must be nonnegative"));
    }
    if math::abs(share_sum - 1.0) > 1e-9 {
        return Err(Error::invalid(format!("class shares must sum to 1, got {share_sum}")));
    }
    let denom: f64 = classes.iter().map(|c| c.share * c.total()).sum();
    if denom <= 0.0 {
        return Err(Error::degenerate("all class durations are zero"));
    }
    Ok(classes[0].share * classes[0].total() / denom)
}

/// Annual cost of the wasted capacity per agent.
pub fn sab_cost(waste_fraction: f64, annual_wage: f64) -> Result<f64> {
    if waste_fraction < 0.0 || annual_wage < 0.0 {
        return Err(Error::invalid("inputs must be nonnegative"));
    }
    Ok(waste_fraction * annual_wage)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::Rng;

    /// P(Poisson(a) ≥ n) by direct summation.
    fn poisson_tail(a: f64, n: u32) -> f64 {
        let mut pmf = (-a).exp();
        let mut cdf = 0.0;
        for k in 0..n {
            cdf += pmf;
            pmf *= a / (k + 1) as f64;
        }
        1.0 - cdf
    }

    /// Erlang-C waiting probability (no abandonment).
    fn erlang_c(lambda: f64, mu: f64, n: u32) -> f64 {
        let a = lambda / mu;
        let rho = a / n as f64;
        assert!(rho < 1.0);
        let mut term = 1.0; // a^k / k!
        let mut sum = 0.0;
        for k in 0..n {
            sum += term;
            term *= a / (k + 1) as f64;
        }
        // term is now a^n / n!
        let c = term / (1.0 - rho);
        c / (sum + c)
    }

    #[test]
    fn matches_poisson_when_abandonment_equals_service_rate() {
        // θ = μ makes every state's down-rate jμ, i.e. Poisson(λ/μ).
        let out =
            erlang_a(&ErlangAInput { lambda: 4.0, mu: 1.0, theta_ab: 1.0, n: 5 }).unwrap();
        assert_relative_eq!(out.p_wait, poisson_tail(4.0, 5), epsilon = 1e-10);
    }

    #[test]
    fn poisson_identity_across_random_configurations() {
        let mut rng = crate::rng::stream(4, 0xE7A, 0);
        for _ in 0..50 {
            let lambda = 0.5 + 20.0 * rng.gen::<f64>();
            let mu = 0.2 + 3.0 * rng.gen::<f64>();
            let n = rng.gen_range(1..40u32);
            let out =
                erlang_a(&ErlangAInput { lambda, mu, theta_ab: mu, n }).unwrap();
            assert_relative_eq!(out.p_wait, poisson_tail(lambda / mu, n), epsilon = 1e-10);
        }
    }

    #[test]
    fn vanishing_abandonment_approaches_erlang_c() {
        let out =
            erlang_a(&ErlangAInput { lambda: 10.0, mu: 1.0, theta_ab: 1e-9, n: 13 }).unwrap();
        assert_relative_eq!(out.p_wait, erlang_c(10.0, 1.0, 13), epsilon = 1e-6);
    }

    #[test]
    fn empty_system_limit() {
        let out =
            erlang_a(&ErlangAInput { lambda: 1e-6, mu: 1.0, theta_ab: 2.0, n: 3 }).unwrap();
        assert!(out.p_wait < 1e-18);
        assert!(out.p_abandon < 1e-18);
    }

    #[test]
    fn monotone_in_servers_and_throughput_bounded() {
        let mut prev_wait = f64::INFINITY;
        let mut prev_ab = f64::INFINITY;
        for n in 1..30 {
            let out =
                erlang_a(&ErlangAInput { lambda: 12.0, mu: 1.0, theta_ab: 0.7, n }).unwrap();
            assert!(out.p_wait <= prev_wait + 1e-12);
            assert!(out.p_abandon <= prev_ab + 1e-12);
            prev_wait = out.p_wait;
            prev_ab = out.p_abandon;
            assert!(12.0 * (1.0 - out.p_abandon) <= n as f64 * 1.0 + 1e-9);
            assert!((0.0..=1.0).contains(&out.p_wait));
            assert!((0.0..=1.0).contains(&out.p_abandon));
        }
    }

    #[test]
    fn staffing_search_minimality_by_exhaustive_scan() {
        for (lambda, mu, theta, p) in
            [(12.0, 1.0, 0.7, 0.05), (6.0, 0.5, 1.2, 0.02), (30.0, 2.0, 0.4, 0.1)]
        {
            let n =
                staffing_search(lambda, mu, theta, StaffingTarget::MaxAbandon(p), 10_000)
                    .unwrap();
            let feasible = |k: u32| {
                erlang_a(&ErlangAInput { lambda, mu, theta_ab: theta, n: k })
                    .unwrap()
                    .p_abandon
                    <= p
            };
            assert!(feasible(n));
            if n > 1 {
                assert!(!feasible(n - 1));
            }
            // Exhaustive confirmation below the answer.
            for k in 1..n {
                assert!(!feasible(k));
            }
        }
    }

    #[test]
    fn tightening_target_never_reduces_staffing() {
        let mut prev = 0;
        for p in [0.2, 0.1, 0.05, 0.02, 0.01] {
            let n = staffing_search(15.0, 1.0, 0.8, StaffingTarget::MaxWait(p), 10_000)
                .unwrap();
            assert!(n >= prev);
            prev = n;
        }
    }

    #[test]
    fn capacity_waste_reference_inputs() {
        // Class order: silent abandonment, silently served, served.
        let classes = [
            ClassLoad { share: 0.133, service_minutes: 20.06, closure_minutes: 113.64 },
            ClassLoad { share: 0.124, service_minutes: 53.67, closure_minutes: 94.98 },
            ClassLoad { share: 0.743, service_minutes: 48.57, closure_minutes: 59.18 },
        ];
        let waste = capacity_waste(&classes).unwrap();
        assert!((waste - 0.153).abs() < 0.0005, "waste = {waste}");
        // Annual cost at the rounded waste fraction.
        let cost = sab_cost((waste * 1000.0).round() / 1000.0, 35_664.0).unwrap();
        assert!((cost - 5457.0).abs() <= 1.0, "cost = {cost}");
    }

    #[test]
    fn capacity_waste_edge_cases() {
        let zero_sab = [
            ClassLoad { share: 0.0, service_minutes: 10.0, closure_minutes: 10.0 },
            ClassLoad { share: 0.5, service_minutes: 10.0, closure_minutes: 10.0 },
            ClassLoad { share: 0.5, service_minutes: 10.0, closure_minutes: 10.0 },
        ];
        assert_eq!(capacity_waste(&zero_sab).unwrap(), 0.0);
        let identical = [
            ClassLoad { share: 0.2, service_minutes: 7.0, closure_minutes: 3.0 },
            ClassLoad { share: 0.3, service_minutes: 7.0, closure_minutes: 3.0 },
            ClassLoad { share: 0.5, service_minutes: 7.0, closure_minutes: 3.0 },
        ];
        assert_relative_eq!(capacity_waste(&identical).unwrap(), 0.2, epsilon = 1e-12);
        assert_eq!(sab_cost(0.0, 35_664.0).unwrap(), 0.0);
        assert_eq!(sab_cost(0.153, 0.0).unwrap(), 0.0);
    }
}
