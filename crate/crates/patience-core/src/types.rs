//! Core domain types: censored observations, class labels, and datasets.
//!
//! One observation records a customer's time in queue `u`, an explicit
//! abandonment signal `y`, and the abandonment outcome `delta`, which is
//! missing when the metadata cannot distinguish a silent abandonment from a
//! short service interaction. The derived weight class `M` drives every
//! estimator:
//!
//! | M | meaning                  | y     | delta   |
//! |---|--------------------------|-------|---------|
//! | 1 | served (outcome known)   | false | Some(false) |
//! | 2 | signaled abandonment     | true  | Some(true)  |
//! | 0 | uncertain (outcome missing) | false | None    |

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::{Error, Result};

/// Unit in which observation durations are expressed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TimeUnit {
    /// Durations in minutes (the internal convention for rates).
    #[default]
    Minutes,
    /// Durations in hours.
    Hours,
}

impl TimeUnit {
    /// Minutes per one unit of this kind.
    pub fn minutes_per_unit(self) -> f64 {
        match self {
            TimeUnit::Minutes => 1.0,
            TimeUnit::Hours => 60.0,
        }
    }
}

/// Convert a per-minute rate to a per-hour rate.
pub fn per_minute_to_per_hour(rate: f64) -> f64 {
    rate * 60.0
}

/// Derived weight class of an observation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WeightClass {
    /// `M = 0`: abandonment outcome missing.
    Uncertain,
    /// `M = 1`: served, outcome known.
    Served,
    /// `M = 2`: abandonment explicitly signaled.
    SignaledAbandon,
}

impl WeightClass {
    /// Numeric code used in reports (0, 1, or 2).
    pub fn code(self) -> u8 {
        match self {
            WeightClass::Uncertain => 0,
            WeightClass::Served => 1,
            WeightClass::SignaledAbandon => 2,
        }
    }
}

/// Resolution of an uncertain conversation into its true kind.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UncertainKind {
    /// Actually served; the customer simply never wrote again.
    ServedSilent,
    /// Abandoned without a signal.
    SilentAbandon,
}

/// Observable conversation class, with an optional resolution for the
/// uncertain class (available from ground truth or a classifier).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClassLabel {
    /// Served and known to be served.
    Served,
    /// Abandoned with an explicit signal.
    SignaledAbandon,
    /// Metadata cannot tell served-silent from silent abandonment.
    Uncertain(Option<UncertainKind>),
}

/// One customer's censored datum.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationTriple {
    /// Observed time in queue, strictly positive, in the dataset's unit.
    pub u: f64,
    /// Explicit abandonment signal.
    pub y: bool,
    /// Abandonment outcome; `None` encodes missing.
    pub delta: Option<bool>,
    /// Optional covariate vector (length fixed per dataset).
    pub covariates: Option<Vec<f64>>,
}

impl ObservationTriple {
    /// A served observation (`M = 1`).
    pub fn served(u: f64) -> Self {
        ObservationTriple { u, y: false, delta: Some(false), covariates: None }
    }

    /// A signaled abandonment (`M = 2`).
    pub fn signaled_abandon(u: f64) -> Self {
        ObservationTriple { u, y: true, delta: Some(true), covariates: None }
    }

    /// An uncertain observation (`M = 0`).
    pub fn uncertain(u: f64) -> Self {
        ObservationTriple { u, y: false, delta: None, covariates: None }
    }

    /// Attach covariates.
    pub fn with_covariates(mut self, x: Vec<f64>) -> Self {
        self.covariates = Some(x);
        self
    }

    /// Derived weight class `M`.
    pub fn weight_class(&self) -> WeightClass {
        match (self.y, self.delta) {
            (true, Some(true)) => WeightClass::SignaledAbandon,
            (false, Some(false)) => WeightClass::Served,
            (false, None) => WeightClass::Uncertain,
            // Excluded by `validate`; classify conservatively if reached.
            (false, Some(true)) => WeightClass::Uncertain,
            (true, _) => WeightClass::SignaledAbandon,
        }
    }

    /// Check the row invariants: `u > 0`; `y ⟹ delta = true`;
    /// `delta` missing ⟹ `y = false`; the `(y, delta)` pair is one of the
    /// three permitted combinations.
    pub fn validate(&self) -> Result<()> {
        if !(self.u > 0.0) || !self.u.is_finite() {
            return Err(Error::invalid(format!("observed time must be positive, got {}", self.u)));
        }
        match (self.y, self.delta) {
            (true, Some(true)) | (false, Some(false)) | (false, None) => Ok(()),
            (y, delta) => Err(Error::invalid(format!(
                "inadmissible (y, delta) combination: ({y}, {delta:?})"
            ))),
        }
    }
}

/// An ordered collection of observations sharing a time unit and covariate
/// schema. Immutable after construction.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Dataset {
    /// The observations, in input order.
    pub observations: Vec<ObservationTriple>,
    /// Unit of every `u` in the dataset.
    pub unit: TimeUnit,
    /// Names of the covariate columns, when covariates are present.
    pub covariate_names: Option<Vec<String>>,
}

impl Dataset {
    /// Build a dataset in the given unit, checking all row and schema
    /// invariants.
    pub fn new(observations: Vec<ObservationTriple>, unit: TimeUnit) -> Result<Self> {
        let ds = Dataset { observations, unit, covariate_names: None };
        ds.check_rows()?;
        Ok(ds)
    }

    /// Build a dataset with named covariates; every observation must carry a
    /// vector of matching length.
    pub fn with_covariates(
        observations: Vec<ObservationTriple>,
        unit: TimeUnit,
        covariate_names: Vec<String>,
    ) -> Result<Self> {
        let k = covariate_names.len();
        for (i, obs) in observations.iter().enumerate() {
            let got = obs.covariates.as_ref().map(Vec::len);
            if got != Some(k) {
                return Err(Error::invalid(format!(
                    "observation {i}: expected {k} covariates, found {got:?}"
                )));
            }
        }
        let ds = Dataset { observations, unit, covariate_names: Some(covariate_names) };
        ds.check_rows()?;
        Ok(ds)
    }

    fn check_rows(&self) -> Result<()> {
        for (i, obs) in self.observations.iter().enumerate() {
            obs.validate()
                .map_err(|e| Error::invalid(format!("observation {i}: {e}")))?;
        }
        Ok(())
    }

    /// Number of observations.
    pub fn len(&self) -> usize {
        self.observations.len()
    }

    /// True when there are no observations.
    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }

    /// Number of covariates per observation (0 when none).
    pub fn covariate_count(&self) -> usize {
        self.covariate_names.as_ref().map_or(0, Vec::len)
    }

    /// Sum of all observed times.
    pub fn total_exposure(&self) -> f64 {
        self.observations.iter().map(|o| o.u).sum()
    }

    /// Count of observations in each weight class `(M=0, M=1, M=2)`.
    pub fn class_counts(&self) -> (usize, usize, usize) {
        let mut counts = (0usize, 0usize, 0usize);
        for obs in &self.observations {
            match obs.weight_class() {
                WeightClass::Uncertain => counts.0 += 1,
                WeightClass::Served => counts.1 += 1,
                WeightClass::SignaledAbandon => counts.2 += 1,
            }
        }
        counts
    }

    /// The same data re-expressed in another unit (durations rescaled).
    pub fn converted_to(&self, unit: TimeUnit) -> Dataset {
        let scale = self.unit.minutes_per_unit() / unit.minutes_per_unit();
        let observations = self
            .observations
            .iter()
            .map(|o| ObservationTriple { u: o.u * scale, ..o.clone() })
            .collect();
        Dataset { observations, unit, covariate_names: self.covariate_names.clone() }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn weight_class_matches_permitted_rows() {
        assert_eq!(ObservationTriple::served(1.0).weight_class(), WeightClass::Served);
        assert_eq!(
            ObservationTriple::signaled_abandon(1.0).weight_class(),
            WeightClass::SignaledAbandon
        );
        assert_eq!(ObservationTriple::uncertain(1.0).weight_class(), WeightClass::Uncertain);
    }

    #[test]
    fn inadmissible_rows_rejected() {
        let bad = ObservationTriple { u: 1.0, y: true, delta: Some(false), covariates: None };
        assert!(bad.validate().is_err());
        let bad = ObservationTriple { u: 1.0, y: true, delta: None, covariates: None };
        assert!(bad.validate().is_err());
        let bad = ObservationTriple { u: 0.0, y: false, delta: Some(false), covariates: None };
        assert!(bad.validate().is_err());
        let bad = ObservationTriple { u: 1.0, y: false, delta: Some(true), covariates: None };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn covariate_length_enforced() {
        let obs = vec![
            ObservationTriple::served(1.0).with_covariates(vec![1.0]),
            ObservationTriple::served(2.0),
        ];
        assert!(Dataset::with_covariates(obs, TimeUnit::Minutes, vec!["x1".into()]).is_err());
    }

    #[test]
    fn unit_conversion_rescales_durations() {
        let ds = Dataset::new(vec![ObservationTriple::served(120.0)], TimeUnit::Minutes).unwrap();
        let hours = ds.converted_to(TimeUnit::Hours);
        assert_eq!(hours.observations[0].u, 2.0);
        let back = hours.converted_to(TimeUnit::Minutes);
        assert_eq!(back.observations[0].u, 120.0);
    }
}
