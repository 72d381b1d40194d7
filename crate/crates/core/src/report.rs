//! Serializable explanation reports and epsilon sweeps.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::divergence::DivergenceKind;
use crate::error::{Error, Result};
use crate::forest::Classifier;
use crate::shapley::{decision_strategy, imprecise_shapley, BoundMethod, CoalitionContext, ExplanationConfig, Mode};
use crate::types::Interval;

pub const SCHEMA_VERSION: u32 = 1;
/// Strategy parameters always reported alongside the user's choice.
pub const STANDARD_ETAS: [f64; 3] = [0.0, 0.5, 1.0];

/// Serde helper writing non-finite floats as the strings `"inf"`, `"-inf"`
/// and `"nan"`, since JSON numbers cannot hold them.
pub mod float_repr {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else if v.is_nan() {
            s.serialize_str("nan")
        } else if *v > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_str("-inf")
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Text(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(v),
            Repr::Text(t) => match t.as_str() {
                "inf" => Ok(f64::INFINITY),
                "-inf" => Ok(f64::NEG_INFINITY),
                "nan" => Ok(f64::NAN),
                other => Err(serde::de::Error::custom(format!("unexpected float '{other}'"))),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigEcho {
    pub mode: Mode,
    pub distance: DivergenceKind,
    pub epsilon: f64,
    pub bound_method: BoundMethod,
    pub mc_samples: usize,
    pub seed: u64,
    pub eta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureRecord {
    pub name: String,
    pub precise: f64,
    pub raw: Interval,
    pub reduced: Interval,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategyPick {
    pub eta: f64,
    pub feature_index: usize,
    pub feature_name: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExplanationReport {
    pub schema_version: u32,
    pub instance: Vec<f64>,
    pub baseline: Vec<f64>,
    pub config: ConfigEcho,
    pub prediction: Vec<f64>,
    pub empty_prediction: Vec<f64>,
    pub features: Vec<FeatureRecord>,
    pub total_gain: Interval,
    pub strategies: Vec<StrategyPick>,
    pub warning: Option<String>,
    pub infinite_samples: usize,
    pub timing_ms: f64,
}

impl ExplanationReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let r: Self = serde_json::from_str(text)?;
        if r.schema_version != SCHEMA_VERSION {
            return Err(Error::InvalidInput(format!("unsupported report schema version {}", r.schema_version)));
        }
        Ok(r)
    }
}

fn check_names(names: &[String], m: usize) -> Result<()> {
    if names.len() != m {
        return Err(Error::DimensionMismatch {
            expected: m,
            found: names.len(),
        });
    }
    Ok(())
}

/// Runs one imprecise explanation and packages it as a report.
pub fn explain(
    model: &dyn Classifier,
    instance: &[f64],
    baseline: &[f64],
    feature_names: &[String],
    config: &ExplanationConfig,
    eta: f64,
) -> Result<ExplanationReport> {
    let start = Instant::now();
    config.validate()?;
    check_names(feature_names, model.n_features())?;
    let ctx = CoalitionContext::new(model, instance, baseline)?;
    let out = imprecise_shapley(&ctx, config)?;
    let set = &out.intervals;

    let mut strategies = Vec::new();
    for e in STANDARD_ETAS.iter().copied().chain((!STANDARD_ETAS.contains(&eta)).then_some(eta)) {
        let k = decision_strategy(&set.reduced, e)?;
        strategies.push(StrategyPick {
            eta: e,
            feature_index: k,
            feature_name: feature_names[k].clone(),
        });
    }

    Ok(ExplanationReport {
        schema_version: SCHEMA_VERSION,
        instance: instance.to_vec(),
        baseline: baseline.to_vec(),
        config: ConfigEcho {
            mode: config.mode,
            distance: config.distance,
            epsilon: config.epsilon,
            bound_method: config.bound_method,
            mc_samples: config.mc_samples,
            seed: config.seed,
            eta,
        },
        prediction: ctx.predict(ctx.full_mask())?.probs().to_vec(),
        empty_prediction: ctx.predict(0)?.probs().to_vec(),
        features: feature_names
            .iter()
            .enumerate()
            .map(|(k, name)| FeatureRecord {
                name: name.clone(),
                precise: set.precise[k],
                raw: set.raw[k],
                reduced: set.reduced[k],
            })
            .collect(),
        total_gain: set.total_gain,
        strategies,
        warning: out.warning,
        infinite_samples: out.infinite_samples,
        timing_ms: start.elapsed().as_secs_f64() * 1e3,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub feature: String,
    pub epsilon: f64,
    pub precise: f64,
    pub raw_lo: f64,
    pub raw_hi: f64,
    pub reduced_lo: f64,
    pub reduced_hi: f64,
    pub gain_lo: f64,
    pub gain_hi: f64,
}

pub fn check_epsilon_grid(epsilons: &[f64]) -> Result<()> {
    if epsilons.is_empty() {
        return Err(Error::InvalidInput("empty epsilon list".into()));
    }
    if let Some(e) = epsilons.iter().find(|e| !(0.0..=1.0).contains(*e)) {
        return Err(Error::InvalidInput(format!("epsilon {e} outside [0, 1]")));
    }
    if let Some(w) = epsilons.windows(2).find(|w| w[1] <= w[0]) {
        return Err(Error::InvalidInput(format!(
            "epsilon list must be strictly increasing ({} then {})",
            w[0], w[1]
        )));
    }
    Ok(())
}

/// Interval bounds for each feature across an increasing epsilon grid,
/// ordered by feature then epsilon. Predictions are shared across the grid.
pub fn sweep(
    model: &dyn Classifier,
    instance: &[f64],
    baseline: &[f64],
    feature_names: &[String],
    config: &ExplanationConfig,
    epsilons: &[f64],
) -> Result<(Vec<SweepRow>, Vec<String>)> {
    check_epsilon_grid(epsilons)?;
    check_names(feature_names, model.n_features())?;
    let ctx = CoalitionContext::new(model, instance, baseline)?;
    let mut per_eps = Vec::with_capacity(epsilons.len());
    let mut warnings = Vec::new();
    for &epsilon in epsilons {
        let out = imprecise_shapley(&ctx, &ExplanationConfig { epsilon, ..*config })?;
        if let Some(w) = out.warning {
            warnings.push(format!("epsilon {epsilon}: {w}"));
        }
        per_eps.push(out.intervals);
    }
    let mut rows = Vec::new();
    for (k, name) in feature_names.iter().enumerate() {
        for (&epsilon, set) in epsilons.iter().zip(&per_eps) {
            rows.push(SweepRow {
                feature: name.clone(),
                epsilon,
                precise: set.precise[k],
                raw_lo: set.raw[k].lo,
                raw_hi: set.raw[k].hi,
                reduced_lo: set.reduced[k].lo,
                reduced_hi: set.reduced[k].hi,
                gain_lo: set.total_gain.lo,
                gain_hi: set.total_gain.hi,
            });
        }
    }
    Ok((rows, warnings))
}

pub fn write_sweep_csv<W: std::io::Write>(rows: &[SweepRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}
