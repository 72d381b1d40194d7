//! Value types shared across the crate: class-probability vectors, their
//! cumulative form, closed real intervals and per-feature interval sets.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance used when checking that an internal vector sums to one.
pub const SUM_TOLERANCE: f64 = 1e-9;
/// Entries more negative than this are rejected on ingestion.
pub const NEGATIVE_TOLERANCE: f64 = 1e-9;

/// A point of the unit simplex over `C >= 2` classes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct ProbabilityDistribution {
    probs: Vec<f64>,
}

impl ProbabilityDistribution {
    /// Strict constructor: entries must already be nonnegative and sum to one
    /// within [`SUM_TOLERANCE`].
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.len() < 2 {
            return Err(Error::InvalidDistribution(format!(
                "need at least 2 classes, got {}",
                probs.len()
            )));
        }
        if let Some(p) = probs.iter().find(|p| !p.is_finite() || **p < 0.0) {
            return Err(Error::InvalidDistribution(format!("entry {p} is not a probability")));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > SUM_TOLERANCE {
            return Err(Error::InvalidDistribution(format!("entries sum to {sum}")));
        }
        Ok(Self { probs })
    }

    pub fn uniform(classes: usize) -> Result<Self> {
        Self::new(vec![1.0 / classes as f64; classes])
    }

    pub fn one_hot(classes: usize, class: usize) -> Result<Self> {
        if class >= classes {
            return Err(Error::InvalidInput(format!(
                "class {class} out of range for {classes} classes"
            )));
        }
        let mut probs = vec![0.0; classes];
        probs[class] = 1.0;
        Self::new(probs)
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn classes(&self) -> usize {
        self.probs.len()
    }

    /// Index of the largest probability, lowest index on ties.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, &p) in self.probs.iter().enumerate() {
            if p > self.probs[best] {
                best = i;
            }
        }
        best
    }

    pub fn cumulative(&self) -> CumulativeDistribution {
        cumulative(self)
    }
}

impl TryFrom<Vec<f64>> for ProbabilityDistribution {
    type Error = Error;

    fn try_from(value: Vec<f64>) -> Result<Self> {
        Self::new(value)
    }
}

impl From<ProbabilityDistribution> for Vec<f64> {
    fn from(value: ProbabilityDistribution) -> Self {
        value.probs
    }
}

/// Builds a distribution from raw model output.
///
/// Entries slightly below zero (down to `-1e-9`) are clamped, then the vector
/// is rescaled to sum to one.
pub fn make_distribution(values: &[f64]) -> Result<ProbabilityDistribution> {
    if values.len() < 2 {
        return Err(Error::InvalidDistribution(format!(
            "need at least 2 classes, got {}",
            values.len()
        )));
    }
    if let Some(v) = values.iter().find(|v| !v.is_finite()) {
        return Err(Error::InvalidDistribution(format!("non-finite entry {v}")));
    }
    if let Some(v) = values.iter().find(|v| **v < -NEGATIVE_TOLERANCE) {
        return Err(Error::InvalidDistribution(format!("negative entry {v}")));
    }
    let clamped: Vec<f64> = values.iter().map(|v| v.max(0.0)).collect();
    let sum: f64 = clamped.iter().sum();
    if sum <= 0.0 {
        return Err(Error::InvalidDistribution("all entries are zero".into()));
    }
    let probs = if sum == 1.0 {
        clamped
    } else {
        clamped.iter().map(|v| v / sum).collect()
    };
    ProbabilityDistribution::new(probs)
}

/// Partial sums of a class distribution; the last entry is exactly one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CumulativeDistribution {
    cum: Vec<f64>,
}

impl CumulativeDistribution {
    pub fn values(&self) -> &[f64] {
        &self.cum
    }

    /// The free coordinates, i.e. everything but the pinned last entry.
    pub fn free(&self) -> &[f64] {
        &self.cum[..self.cum.len() - 1]
    }
}

pub fn cumulative(p: &ProbabilityDistribution) -> CumulativeDistribution {
    let mut acc = 0.0;
    let mut cum: Vec<f64> = p
        .probs()
        .iter()
        .map(|x| {
            acc += x;
            acc.min(1.0)
        })
        .collect();
    let last = cum.len() - 1;
    cum[last] = 1.0;
    // rounding can break monotonicity only at the pinned end
    for i in (0..last).rev() {
        if cum[i] > cum[i + 1] {
            cum[i] = cum[i + 1];
        }
    }
    CumulativeDistribution { cum }
}

/// Closed real interval `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    #[serde(with = "crate::report::float_repr")]
    pub lo: f64,
    #[serde(with = "crate::report::float_repr")]
    pub hi: f64,
}

impl Interval {
    pub const ORDER_TOLERANCE: f64 = 1e-12;

    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if lo.is_nan() || hi.is_nan() || lo > hi + Self::ORDER_TOLERANCE {
            return Err(Error::InvalidInput(format!("[{lo}, {hi}] is not an interval")));
        }
        Ok(Self { lo, hi })
    }

    pub fn point(x: f64) -> Self {
        Self { lo: x, hi: x }
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    pub fn contains(&self, x: f64, tol: f64) -> bool {
        x >= self.lo - tol && x <= self.hi + tol
    }

    pub fn is_subset_of(&self, other: &Interval, tol: f64) -> bool {
        self.lo >= other.lo - tol && self.hi <= other.hi + tol
    }

    pub fn overlaps(&self, other: &Interval) -> bool {
        self.lo <= other.hi && other.lo <= self.hi
    }

    pub fn neg(&self) -> Self {
        Self {
            lo: -self.hi,
            hi: -self.lo,
        }
    }
}

/// Per-feature output of an imprecise explanation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapleyIntervalSet {
    pub raw: Vec<Interval>,
    pub reduced: Vec<Interval>,
    pub precise: Vec<f64>,
    pub total_gain: Interval,
}

impl ShapleyIntervalSet {
    pub fn features(&self) -> usize {
        self.raw.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn make_distribution_examples() {
        assert_eq!(make_distribution(&[0.5, 0.5]).unwrap().probs(), &[0.5, 0.5]);
        assert_eq!(make_distribution(&[2.0, 2.0]).unwrap().probs(), &[0.5, 0.5]);
        assert_eq!(make_distribution(&[1.0, 0.0, 0.0]).unwrap().probs(), &[1.0, 0.0, 0.0]);
    }

    #[test]
    fn make_distribution_rejects_bad_input() {
        assert!(make_distribution(&[1.0]).is_err());
        assert!(make_distribution(&[0.0, 0.0]).is_err());
        assert!(make_distribution(&[1.0, -0.1]).is_err());
        assert!(make_distribution(&[f64::NAN, 1.0]).is_err());
        // tiny negative noise is clamped
        let p = make_distribution(&[1.0, -1e-12]).unwrap();
        assert_eq!(p.probs(), &[1.0, 0.0]);
    }

    #[test]
    fn cumulative_examples() {
        let c = cumulative(&make_distribution(&[0.2, 0.3, 0.5]).unwrap());
        assert!((c.values()[0] - 0.2).abs() < 1e-15);
        assert!((c.values()[1] - 0.5).abs() < 1e-15);
        assert_eq!(c.values()[2], 1.0);
        let c = cumulative(&make_distribution(&[1.0, 0.0]).unwrap());
        assert_eq!(c.values(), &[1.0, 1.0]);
        let c = cumulative(&ProbabilityDistribution::uniform(4).unwrap());
        assert_eq!(c.values(), &[0.25, 0.5, 0.75, 1.0]);
    }

    #[test]
    fn interval_rejects_reversed_bounds() {
        assert!(Interval::new(1.0, 0.0).is_err());
        assert!(Interval::new(0.0, -1e-13).is_ok());
    }

    #[test]
    fn argmax_prefers_lowest_index() {
        let p = make_distribution(&[0.4, 0.4, 0.2]).unwrap();
        assert_eq!(p.argmax(), 0);
    }

    proptest! {
        #[test]
        fn cumulative_is_monotone_and_ends_at_one(raw in prop::collection::vec(0.0f64..1.0, 2..12)) {
            prop_assume!(raw.iter().sum::<f64>() > 1e-6);
            let p = make_distribution(&raw).unwrap();
            let c = cumulative(&p);
            prop_assert_eq!(*c.values().last().unwrap(), 1.0);
            for w in c.values().windows(2) {
                prop_assert!(w[0] <= w[1]);
            }
        }

        #[test]
        fn make_distribution_is_idempotent(raw in prop::collection::vec(0.0f64..10.0, 2..12)) {
            prop_assume!(raw.iter().sum::<f64>() > 1e-6);
            let p = make_distribution(&raw).unwrap();
            let q = make_distribution(p.probs()).unwrap();
            for (a, b) in p.probs().iter().zip(q.probs()) {
                prop_assert!((a - b).abs() <= 1e-12);
            }
        }
    }
}
