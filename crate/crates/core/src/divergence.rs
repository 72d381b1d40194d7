//! Distances between class-probability vectors.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::ProbabilityDistribution;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum DivergenceKind {
    #[default]
    KolmogorovSmirnov,
    KullbackLeibler,
    ChiSquared,
}

impl DivergenceKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            DivergenceKind::KolmogorovSmirnov => "ks",
            DivergenceKind::KullbackLeibler => "kl",
            DivergenceKind::ChiSquared => "chi2",
        }
    }

    pub fn evaluate(&self, p: &ProbabilityDistribution, q: &ProbabilityDistribution) -> Result<f64> {
        match self {
            DivergenceKind::KolmogorovSmirnov => ks_distance(p, q),
            DivergenceKind::KullbackLeibler => kl_divergence(p, q),
            DivergenceKind::ChiSquared => chi2_divergence(p, q),
        }
    }
}

impl fmt::Display for DivergenceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DivergenceKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ks" | "kolmogorov_smirnov" | "kolmogorov-smirnov" => Ok(Self::KolmogorovSmirnov),
            "kl" | "kullback_leibler" | "kullback-leibler" => Ok(Self::KullbackLeibler),
            "chi2" | "chi_squared" | "chi-squared" => Ok(Self::ChiSquared),
            other => Err(Error::InvalidInput(format!("unknown distance '{other}'"))),
        }
    }
}

fn check_lengths(p: &ProbabilityDistribution, q: &ProbabilityDistribution) -> Result<()> {
    if p.classes() != q.classes() {
        return Err(Error::DimensionMismatch {
            expected: p.classes(),
            found: q.classes(),
        });
    }
    Ok(())
}

/// Largest gap between the two cumulative distributions over the first
/// `C - 1` coordinates.
pub fn ks_distance(p: &ProbabilityDistribution, q: &ProbabilityDistribution) -> Result<f64> {
    check_lengths(p, q)?;
    let (cp, cq) = (p.cumulative(), q.cumulative());
    Ok(cp
        .free()
        .iter()
        .zip(cq.free())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max))
}

/// `sum p_i ln(p_i / q_i)`; terms with `p_i = 0` vanish and a positive `p_i`
/// against `q_i = 0` yields `+inf`.
pub fn kl_divergence(p: &ProbabilityDistribution, q: &ProbabilityDistribution) -> Result<f64> {
    check_lengths(p, q)?;
    let mut total = 0.0;
    for (&pi, &qi) in p.probs().iter().zip(q.probs()) {
        if pi == 0.0 {
            continue;
        }
        if qi == 0.0 {
            return Ok(f64::INFINITY);
        }
        total += pi * (pi / qi).ln();
    }
    Ok(total.max(0.0))
}

/// Csiszar form `sum q_i f(p_i / q_i)` with `f(u) = (1 - u)^2 / u`, which
/// reduces to `sum (q_i - p_i)^2 / p_i`. A class where exactly one of the two
/// distributions has zero mass makes the divergence `+inf`.
pub fn chi2_divergence(p: &ProbabilityDistribution, q: &ProbabilityDistribution) -> Result<f64> {
    check_lengths(p, q)?;
    let mut total = 0.0;
    for (&pi, &qi) in p.probs().iter().zip(q.probs()) {
        match (pi == 0.0, qi == 0.0) {
            (true, true) => {}
            (true, false) | (false, true) => return Ok(f64::INFINITY),
            (false, false) => {
                let u = pi / qi;
                total += qi * (1.0 - u).powi(2) / u;
            }
        }
    }
    Ok(total)
}

/// `D(p, q) - D(r, q)`: how much closer `r` is to the reference than `p`.
///
/// Identical `p` and `r` give exactly zero, even when the divergence itself is
/// infinite.
pub fn marginal_difference(
    p: &ProbabilityDistribution,
    r: &ProbabilityDistribution,
    q: &ProbabilityDistribution,
    kind: DivergenceKind,
) -> Result<f64> {
    check_lengths(p, r)?;
    check_lengths(p, q)?;
    if p == r {
        return Ok(0.0);
    }
    Ok(kind.evaluate(p, q)? - kind.evaluate(r, q)?)
}
