//! Estimation of customer patience from censored, partially labeled queue
//! abandonment data.
//!
//! A waiting customer either receives service after a virtual wait `W` or
//! abandons once their patience `τ` runs out. Abandonments split into those
//! the system observes (the customer signals when leaving) and silent ones,
//! which are indistinguishable from short service interactions in the event
//! metadata. This crate provides:
//!
//! * domain types for observations and conversation event logs ([`types`],
//!   [`events`]),
//! * closed-form baseline estimators under explicit resolution policies for
//!   the uncertain class ([`baselines`]),
//! * an EM estimator of the patience rate θ, the wait rate γ, and the
//!   signaling probability q under missing abandonment labels ([`em`]),
//! * a covariate extension with a log-linear patience model and bootstrap
//!   confidence intervals ([`em_cov`], [`bootstrap`]),
//! * a synthetic-data generator and validation harness ([`simulate`]),
//! * feature ranking, a probabilistic scorer, and ROC threshold machinery
//!   ([`classify`]),
//! * an Erlang-A steady-state calculator with staffing search and capacity
//!   waste accounting ([`queueing`]).
//!
//! The crate is `no_std` + `alloc`; all functions are pure and deterministic
//! given their inputs (randomized routines take explicit seeds), so values
//! may be shared freely across threads.
//!
//! Rates are stored per minute internally. Use [`types::TimeUnit`] helpers
//! when presenting per-hour figures.
#![cfg_attr(not(test), no_std)]
#![forbid(unsafe_code)]

extern crate alloc;

pub mod baselines;
pub mod bootstrap;
pub mod classify;
pub mod em;
pub mod em_cov;
mod error;
pub mod events;
pub mod queueing;
mod root;
pub mod simulate;
pub mod types;

pub use error::Error;

/// Crate-wide result alias.
pub type Result<T> = core::result::Result<T, Error>;

pub(crate) mod math {
    //! Thin wrappers so the crate builds without `std` float intrinsics.

    #[inline]
    pub fn exp(x: f64) -> f64 {
        libm::exp(x)
    }

    #[inline]
    pub fn expm1(x: f64) -> f64 {
        libm::expm1(x)
    }

    #[inline]
    pub fn ln(x: f64) -> f64 {
        libm::log(x)
    }

    #[inline]
    pub fn ln_1p(x: f64) -> f64 {
        libm::log1p(x)
    }

    #[inline]
    pub fn sqrt(x: f64) -> f64 {
        libm::sqrt(x)
    }

    #[inline]
    pub fn abs(x: f64) -> f64 {
        libm::fabs(x)
    }

    /// x e^{-x} / (1 - e^{-x}) = x / (e^x - 1), the censoring kernel of the
    /// rate equation. A series branch avoids cancellation for tiny x.
    #[inline]
    pub fn x_over_expm1(x: f64) -> f64 {
        debug_assert!(x >= 0.0);
        if x < 1e-5 {
            1.0 - x / 2.0 + x * x / 12.0
        } else {
            x / expm1(x)
        }
    }

    /// log(e^a + e^b) without overflow.
    #[inline]
    pub fn log_add_exp(a: f64, b: f64) -> f64 {
        if a == f64::NEG_INFINITY {
            return b;
        }
        if b == f64::NEG_INFINITY {
            return a;
        }
        let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
        hi + ln_1p(exp(lo - hi))
    }
}

pub(crate) mod rng {
    //! Deterministic seed derivation for independent substreams.

    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// SplitMix64 finalizer; decorrelates structured seed inputs.
    fn mix(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    }

    /// RNG for substream `(a, b)` of a master seed. Distinct `(seed, a, b)`
    /// triples yield independent, reproducible streams.
    pub fn stream(seed: u64, a: u64, b: u64) -> ChaCha8Rng {
        let s = mix(seed ^ mix(a.wrapping_add(0x517c_c1b7_2722_0a95)) ^ mix(b.rotate_left(17)));
        ChaCha8Rng::seed_from_u64(s)
    }
}
