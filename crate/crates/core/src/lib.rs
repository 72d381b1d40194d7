//! Interval-valued Shapley explanations of class-probability predictions.
//!
//! Each coalition prediction is widened into an epsilon-contamination credal
//! set; distance-based Shapley values then become intervals whose endpoints
//! come from linear programs (Kolmogorov-Smirnov distance) or from Monte-Carlo
//! sampling (any supported divergence).

pub mod contamination;
pub mod dataset;
pub mod divergence;
pub mod error;
pub mod forest;
pub mod ks_bounds;
pub mod lp;
pub mod montecarlo;
pub mod report;
pub mod shapley;
pub mod types;

pub use contamination::{build_credal_box, epsilon_from_idm, extreme_points, CredalBox};
pub use dataset::{generate_dataset, load_csv, read_csv, Dataset, SyntheticKind, SyntheticSplit};
pub use divergence::{chi2_divergence, kl_divergence, ks_distance, marginal_difference, DivergenceKind};
pub use error::{Error, Result};
pub use forest::{fit_random_forest, Classifier, FnClassifier, ForestParams, RandomForestModel};
pub use ks_bounds::{binary_difference_bounds, difference_bounds, total_gain_bounds, BoundProblemInputs};
pub use montecarlo::{mc_difference_bounds, mc_distance_bounds, sample_credal, sample_simplex, McBounds};
pub use report::{explain, sweep, ExplanationReport, SweepRow};
pub use shapley::{
    coalition_weight, decision_strategy, imprecise_shapley, linear_functional_bounds, precise_shapley, predict_coalition,
    reachable_reduction, BoundMethod, CoalitionContext, ExplanationConfig, Mode,
};
pub use types::{cumulative, make_distribution, CumulativeDistribution, Interval, ProbabilityDistribution, ShapleyIntervalSet};
