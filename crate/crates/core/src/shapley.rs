//! Exact coalition enumeration for distance-based Shapley values, their
//! interval-valued counterparts under contamination, and post-processing of
//! the resulting intervals.

use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::contamination::{build_credal_box, CredalBox};
use crate::divergence::DivergenceKind;
use crate::error::{Error, Result};
use crate::forest::Classifier;
use crate::ks_bounds::{difference_bounds, total_gain_bounds, BoundProblemInputs};
use crate::lp::{solve, LinearProgram, LpStatus, Relation, Sense};
use crate::montecarlo::{mc_difference_bounds, mc_distance_bounds};
use crate::types::{Interval, ProbabilityDistribution, ShapleyIntervalSet};

/// Exact enumeration visits `2^m` coalitions; beyond this it stops being cheap.
pub const MAX_FEATURES: usize = 15;
pub const MIN_MC_SAMPLES: usize = 100;
/// Slack allowed when the clamped total-gain interval comes out empty.
pub const GAIN_EMPTY_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// distance to the full prediction
    #[default]
    Distribution,
    /// distance to the one-hot predicted class
    Class,
    /// negated distance to the uniform distribution
    Certainty,
}

impl Mode {
    pub fn as_str(&self) -> &'static str {
        match self {
            Mode::Distribution => "distribution",
            Mode::Class => "class",
            Mode::Certainty => "certainty",
        }
    }

    fn sign(&self) -> f64 {
        match self {
            Mode::Certainty => -1.0,
            _ => 1.0,
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "distribution" => Ok(Mode::Distribution),
            "class" => Ok(Mode::Class),
            "certainty" => Ok(Mode::Certainty),
            other => Err(Error::InvalidInput(format!("unknown mode '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum BoundMethod {
    #[default]
    LpKs,
    MonteCarlo,
}

impl BoundMethod {
    pub fn as_str(&self) -> &'static str {
        match self {
            BoundMethod::LpKs => "lp_ks",
            BoundMethod::MonteCarlo => "monte_carlo",
        }
    }
}

impl fmt::Display for BoundMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for BoundMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lp" | "lp_ks" => Ok(BoundMethod::LpKs),
            "mc" | "monte_carlo" => Ok(BoundMethod::MonteCarlo),
            other => Err(Error::InvalidInput(format!("unknown bound method '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExplanationConfig {
    pub mode: Mode,
    pub distance: DivergenceKind,
    pub epsilon: f64,
    pub bound_method: BoundMethod,
    pub mc_samples: usize,
    pub seed: u64,
}

impl Default for ExplanationConfig {
    fn default() -> Self {
        Self {
            mode: Mode::Distribution,
            distance: DivergenceKind::KolmogorovSmirnov,
            epsilon: 0.0,
            bound_method: BoundMethod::LpKs,
            mc_samples: 1000,
            seed: 0,
        }
    }
}

impl ExplanationConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.epsilon) {
            return Err(Error::InvalidInput(format!("epsilon {} outside [0, 1]", self.epsilon)));
        }
        match self.bound_method {
            BoundMethod::LpKs if self.distance != DivergenceKind::KolmogorovSmirnov => Err(Error::InvalidInput(format!(
                "the LP bound method needs the KS distance, got {}",
                self.distance
            ))),
            BoundMethod::MonteCarlo if self.mc_samples < MIN_MC_SAMPLES => Err(Error::InvalidInput(format!(
                "monte carlo needs at least {MIN_MC_SAMPLES} samples, got {}",
                self.mc_samples
            ))),
            _ => Ok(()),
        }
    }
}

/// `|S|! (m - |S| - 1)! / m!`, the Shapley weight of a coalition not
/// containing the feature.
pub fn coalition_weight(s_size: usize, m: usize) -> Result<f64> {
    if m == 0 || s_size >= m {
        return Err(Error::InvalidInput(format!("coalition size {s_size} invalid for {m} features")));
    }
    // 1 / (m * binom(m - 1, s))
    let k = s_size.min(m - 1 - s_size);
    let mut binom = 1.0;
    for j in 0..k {
        binom = binom * (m - 1 - j) as f64 / (j + 1) as f64;
    }
    Ok(1.0 / (m as f64 * binom))
}

enum Source<'a> {
    Model(&'a dyn Classifier),
    Table,
}

/// Instance, baseline and a lazily filled prediction cache indexed by
/// coalition bitmask (bit `j` set means feature `j` keeps its value).
pub struct CoalitionContext<'a> {
    source: Source<'a>,
    instance: Vec<f64>,
    baseline: Vec<f64>,
    classes: usize,
    cache: Vec<OnceLock<ProbabilityDistribution>>,
}

impl<'a> CoalitionContext<'a> {
    pub fn new(model: &'a dyn Classifier, instance: &[f64], baseline: &[f64]) -> Result<Self> {
        let m = model.n_features();
        for v in [instance, baseline] {
            if v.len() != m {
                return Err(Error::DimensionMismatch {
                    expected: m,
                    found: v.len(),
                });
            }
        }
        check_feature_count(m)?;
        if instance.iter().chain(baseline).any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("instance and baseline must be finite".into()));
        }
        Ok(Self {
            source: Source::Model(model),
            instance: instance.to_vec(),
            baseline: baseline.to_vec(),
            classes: model.n_classes(),
            cache: (0..1usize << m).map(|_| OnceLock::new()).collect(),
        })
    }

    /// Context over a fixed table of `2^m` coalition predictions.
    pub fn from_table(table: Vec<ProbabilityDistribution>) -> Result<Self> {
        let m = table.len().trailing_zeros() as usize;
        if table.is_empty() || !table.len().is_power_of_two() || m == 0 {
            return Err(Error::InvalidInput(format!(
                "prediction table needs 2^m entries with m >= 1, got {}",
                table.len()
            )));
        }
        check_feature_count(m)?;
        let classes = table[0].classes();
        if let Some(p) = table.iter().find(|p| p.classes() != classes) {
            return Err(Error::DimensionMismatch {
                expected: classes,
                found: p.classes(),
            });
        }
        Ok(Self {
            source: Source::Table,
            instance: vec![f64::NAN; m],
            baseline: vec![f64::NAN; m],
            classes,
            cache: table.into_iter().map(OnceLock::from).collect(),
        })
    }

    pub fn features(&self) -> usize {
        self.cache.len().trailing_zeros() as usize
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn full_mask(&self) -> u32 {
        (self.cache.len() - 1) as u32
    }

    pub fn instance(&self) -> &[f64] {
        &self.instance
    }

    pub fn baseline(&self) -> &[f64] {
        &self.baseline
    }

    /// Model input for a coalition.
    pub fn masked_input(&self, mask: u32) -> Vec<f64> {
        (0..self.features())
            .map(|j| if mask >> j & 1 == 1 { self.instance[j] } else { self.baseline[j] })
            .collect()
    }

    pub fn predict(&self, mask: u32) -> Result<&ProbabilityDistribution> {
        let slot = self
            .cache
            .get(mask as usize)
            .ok_or_else(|| Error::InvalidInput(format!("coalition {mask:#b} out of range")))?;
        if let Some(p) = slot.get() {
            return Ok(p);
        }
        let Source::Model(model) = self.source else {
            unreachable!("tables are fully populated");
        };
        let p = model.predict_proba(&self.masked_input(mask)).map_err(|e| Error::Model {
            coalition: mask,
            source: Box::new(e),
        })?;
        if p.classes() != self.classes {
            return Err(Error::Model {
                coalition: mask,
                source: Box::new(Error::DimensionMismatch {
                    expected: self.classes,
                    found: p.classes(),
                }),
            });
        }
        Ok(slot.get_or_init(|| p))
    }

    /// Fills every cache slot, in parallel.
    pub fn populate(&self) -> Result<()> {
        (0..self.cache.len() as u32)
            .into_par_iter()
            .try_for_each(|mask| self.predict(mask).map(|_| ()))
    }

    /// The distribution all coalitions are measured against.
    pub fn reference(&self, mode: Mode) -> Result<ProbabilityDistribution> {
        let full = self.predict(self.full_mask())?;
        match mode {
            Mode::Distribution => Ok(full.clone()),
            Mode::Class => ProbabilityDistribution::one_hot(self.classes, full.argmax()),
            Mode::Certainty => ProbabilityDistribution::uniform(self.classes),
        }
    }
}

fn check_feature_count(m: usize) -> Result<()> {
    if m == 0 || m > MAX_FEATURES {
        return Err(Error::InvalidInput(format!(
            "exact enumeration supports 1..={MAX_FEATURES} features, got {m}"
        )));
    }
    Ok(())
}

pub fn predict_coalition<'c>(ctx: &'c CoalitionContext<'_>, mask: u32) -> Result<&'c ProbabilityDistribution> {
    ctx.predict(mask)
}

/// `(feature, coalition)` pairs in a fixed order, with their weights.
fn terms(m: usize) -> Result<Vec<(usize, u32, f64)>> {
    let mut out = Vec::with_capacity(m << (m - 1));
    for i in 0..m {
        for mask in 0..1u32 << m {
            if mask >> i & 1 == 0 {
                out.push((i, mask, coalition_weight(mask.count_ones() as usize, m)?));
            }
        }
    }
    Ok(out)
}

/// Point-valued Shapley values of `sign * D(P_S, ref)` gains.
pub fn precise_shapley(ctx: &CoalitionContext<'_>, config: &ExplanationConfig) -> Result<Vec<f64>> {
    ctx.populate()?;
    let m = ctx.features();
    let reference = ctx.reference(config.mode)?;
    let dist: Vec<f64> = (0..1u32 << m)
        .map(|mask| {
            let d = config.distance.evaluate(ctx.predict(mask)?, &reference)?;
            if d.is_finite() {
                Ok(d)
            } else {
                Err(Error::NonFiniteDivergence { coalition: mask })
            }
        })
        .collect::<Result<_>>()?;
    let sign = config.mode.sign();
    let mut phi = vec![0.0; m];
    for (i, mask, w) in terms(m)? {
        phi[i] += w * sign * (dist[mask as usize] - dist[(mask | 1 << i) as usize]);
    }
    Ok(phi)
}

/// Everything an imprecise run produces beyond the interval set.
#[derive(Debug, Clone, PartialEq)]
pub struct ImpreciseOutcome {
    pub intervals: ShapleyIntervalSet,
    /// set when the reachable-interval reduction had to be skipped
    pub warning: Option<String>,
    /// Monte-Carlo evaluations that came out infinite, summed over terms
    pub infinite_samples: usize,
}

fn term_seed(seed: u64, i: usize, mask: u32) -> u64 {
    let key = ((i as u64) << 32 | mask as u64).wrapping_add(1);
    seed ^ key.wrapping_mul(0xD1B5_4A32_D192_ED03)
}

pub fn imprecise_shapley(ctx: &CoalitionContext<'_>, config: &ExplanationConfig) -> Result<ImpreciseOutcome> {
    config.validate()?;
    let precise = precise_shapley(ctx, config)?;
    let m = ctx.features();
    let eps = config.epsilon;
    let full = ctx.full_mask();

    let boxes: Vec<CredalBox> = (0..=full)
        .map(|mask| build_credal_box(ctx.predict(mask)?, eps))
        .collect::<Result<_>>()?;
    // only the full prediction is itself uncertain; one-hot and uniform
    // references are fixed
    let reference_box = match config.mode {
        Mode::Distribution => boxes[full as usize].clone(),
        mode => build_credal_box(&ctx.reference(mode)?, 0.0)?,
    };
    let sign = config.mode.sign();

    let term_list = terms(m)?;
    let bounds: Vec<(Interval, usize)> = term_list
        .par_iter()
        .map(|&(i, mask, _)| {
            let (bp, br) = (&boxes[mask as usize], &boxes[(mask | 1 << i) as usize]);
            let (iv, inf) = match config.bound_method {
                BoundMethod::LpKs => (difference_bounds(&BoundProblemInputs::from_boxes(bp, br, &reference_box)?)?, 0),
                BoundMethod::MonteCarlo => {
                    let mc = mc_difference_bounds(bp, br, &reference_box, config.distance, config.mc_samples, term_seed(config.seed, i, mask))?;
                    (mc.interval, mc.infinite_samples)
                }
            };
            Ok((if sign < 0.0 { iv.neg() } else { iv }, inf))
        })
        .collect::<Result<_>>()?;

    let mut raw = vec![Interval::point(0.0); m];
    let mut infinite_samples = 0;
    for (&(i, _, w), (iv, inf)) in term_list.iter().zip(&bounds) {
        raw[i].lo += w * iv.lo;
        raw[i].hi += w * iv.hi;
        infinite_samples += inf;
    }

    let total_gain = total_gain_interval(ctx, config, &boxes, &reference_box)?;
    let (reduced, warning) = if raw.iter().chain([&total_gain]).all(|iv| iv.lo.is_finite() && iv.hi.is_finite()) {
        let r = reachable_reduction(&raw, total_gain)?;
        (r.reduced, r.warning)
    } else {
        (raw.clone(), Some("non-finite bounds, reduction skipped".to_string()))
    };

    Ok(ImpreciseOutcome {
        intervals: ShapleyIntervalSet {
            raw,
            reduced,
            precise,
            total_gain,
        },
        warning,
        infinite_samples,
    })
}

// bounds on sign * (D(P_empty, ref) - D(P_N, ref))
fn total_gain_interval(ctx: &CoalitionContext<'_>, config: &ExplanationConfig, boxes: &[CredalBox], reference_box: &CredalBox) -> Result<Interval> {
    let empty = &boxes[0];
    let full = &boxes[ctx.full_mask() as usize];
    let seed = term_seed(config.seed, usize::MAX >> 32, u32::MAX);
    let iv = match (config.mode, config.bound_method) {
        // D(P_N, P_N) = 0, so only D(P_empty, Q) for Q in the P_N box remains
        (Mode::Distribution, BoundMethod::LpKs) => {
            total_gain_bounds(empty.free_cumulative_bounds(), full.free_cumulative_bounds())?
        }
        (Mode::Distribution, BoundMethod::MonteCarlo) => mc_distance_bounds(empty, full, config.distance, config.mc_samples, seed)?.interval,
        (_, BoundMethod::LpKs) => difference_bounds(&BoundProblemInputs::from_boxes(empty, full, reference_box)?)?,
        (_, BoundMethod::MonteCarlo) => mc_difference_bounds(empty, full, reference_box, config.distance, config.mc_samples, seed)?.interval,
    };
    Ok(if config.mode.sign() < 0.0 { iv.neg() } else { iv })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Reduction {
    pub reduced: Vec<Interval>,
    /// the total-gain interval after clamping to the attainable sums
    pub gain: Interval,
    pub warning: Option<String>,
}

/// Tightens each interval to the values that extend to a full vector inside
/// the boxes whose sum lies in `gain`.
pub fn reachable_reduction(raw: &[Interval], gain: Interval) -> Result<Reduction> {
    if raw.is_empty() {
        return Err(Error::InvalidInput("no intervals to reduce".into()));
    }
    if let Some(iv) = raw.iter().find(|iv| !(iv.lo <= iv.hi + Interval::ORDER_TOLERANCE)) {
        return Err(Error::InvalidInput(format!("[{}, {}] is not a proper interval", iv.lo, iv.hi)));
    }
    let sum_lo: f64 = raw.iter().map(|iv| iv.lo).sum();
    let sum_hi: f64 = raw.iter().map(|iv| iv.hi).sum();
    let (mut g_lo, mut g_hi) = (gain.lo.max(sum_lo), gain.hi.min(sum_hi));
    if g_lo > g_hi {
        if g_lo - g_hi > GAIN_EMPTY_TOLERANCE {
            return Ok(Reduction {
                reduced: raw.to_vec(),
                gain,
                warning: Some(format!(
                    "total gain [{}, {}] does not meet the attainable sums [{sum_lo}, {sum_hi}]; reduction skipped",
                    gain.lo, gain.hi
                )),
            });
        }
        let mid = 0.5 * (g_lo + g_hi);
        (g_lo, g_hi) = (mid, mid);
    }

    // The closed forms assume nonnegative variables. Shifting by
    // c = min lo (phi' = phi - c, gain' = gain - m c) makes them so, and c
    // cancels from both formulas, so they are evaluated unshifted. An
    // inactive side of the sum constraint leaves its endpoints untouched.
    let upper_active = gain.hi < sum_hi;
    let lower_active = gain.lo > sum_lo;
    let reduced = raw
        .iter()
        .enumerate()
        .map(|(k, iv)| {
            let others = |f: fn(&Interval) -> f64| -> f64 {
                raw.iter().enumerate().filter(|(i, _)| *i != k).map(|(_, v)| f(v)).sum()
            };
            let up = if upper_active { iv.hi.min(g_hi - others(|v| v.lo)) } else { iv.hi };
            let down = if lower_active { iv.lo.max(g_lo - others(|v| v.hi)) } else { iv.lo };
            let up = up.clamp(iv.lo, iv.hi);
            let down = down.clamp(iv.lo, up);
            Interval { lo: down, hi: up }
        })
        .collect();
    Ok(Reduction {
        reduced,
        gain: Interval { lo: g_lo, hi: g_hi },
        warning: None,
    })
}

/// Range of `<a, phi>` over `phi` in the boxes with `sum phi` in `gain`.
pub fn linear_functional_bounds(a: &[f64], raw: &[Interval], gain: Interval) -> Result<Interval> {
    if a.len() != raw.len() {
        return Err(Error::DimensionMismatch {
            expected: raw.len(),
            found: a.len(),
        });
    }
    let m = raw.len();
    let mut out = [0.0; 2];
    for (slot, sense) in [Sense::Minimize, Sense::Maximize].into_iter().enumerate() {
        let mut lp = LinearProgram::new(sense, a.to_vec());
        for (j, iv) in raw.iter().enumerate() {
            lp.set_bounds(j, iv.lo, iv.hi);
        }
        lp.add_constraint(vec![1.0; m], Relation::Ge, gain.lo);
        lp.add_constraint(vec![1.0; m], Relation::Le, gain.hi);
        let sol = solve(&lp)?;
        match (sol.status, sol.objective_value) {
            (LpStatus::Optimal, Some(v)) => out[slot] = v,
            (status, _) => {
                return Err(Error::LpFailure {
                    context: "linear functional bound".into(),
                    reason: format!("{status:?}: gain interval incompatible with the boxes"),
                })
            }
        }
    }
    Ok(Interval {
        lo: out[0],
        hi: out[1].max(out[0]),
    })
}

/// Feature maximising `eta * lo + (1 - eta) * hi`; ties go to the lowest index.
pub fn decision_strategy(intervals: &[Interval], eta: f64) -> Result<usize> {
    if intervals.is_empty() {
        return Err(Error::InvalidInput("no features to choose from".into()));
    }
    if !(0.0..=1.0).contains(&eta) {
        return Err(Error::InvalidInput(format!("eta {eta} outside [0, 1]")));
    }
    let score = |iv: &Interval| eta * iv.lo + (1.0 - eta) * iv.hi;
    let mut best = 0;
    for (i, iv) in intervals.iter().enumerate().skip(1) {
        if score(iv) > score(&intervals[best]) {
            best = i;
        }
    }
    Ok(best)
}
