//! Fixtures shared by the benchmarks in `benches/`.

use impshap::{build_credal_box, make_distribution, CredalBox, FnClassifier, ProbabilityDistribution, Result};

/// Smooth, strictly positive distribution over `c` classes, varied by `k`.
pub fn fixture_distribution(c: usize, k: usize) -> ProbabilityDistribution {
    let raw: Vec<f64> = (0..c).map(|i| 1.0 + ((i * 7 + k * 3) as f64 * 0.37).sin().abs()).collect();
    make_distribution(&raw).expect("positive weights")
}

/// Three contamination boxes of `c` classes each.
pub fn credal_triple(c: usize, epsilon: f64) -> [CredalBox; 3] {
    [0, 1, 2].map(|k| build_credal_box(&fixture_distribution(c, k), epsilon).expect("valid epsilon"))
}

/// A three-class model over `m` features.
pub fn fixture_model(m: usize) -> FnClassifier<impl Fn(&[f64]) -> Result<ProbabilityDistribution> + Sync> {
    FnClassifier::new(m, 3, |x: &[f64]| {
        let s: f64 = x.iter().enumerate().map(|(j, v)| (j + 1) as f64 * v).sum();
        make_distribution(&[1.0 + s.sin().abs(), 1.0 + (0.5 * s).cos().powi(2), 0.5 + x[0].abs()])
    })
}
