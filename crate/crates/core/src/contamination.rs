//! Linear-vacuous (epsilon-contamination) credal sets.
//!
//! A credal box around `P` holds every `(1 - eps) P + eps H` with `H` an
//! arbitrary distribution. Its class marginals are
//! `[(1 - eps) p_i, (1 - eps) p_i + eps]`, and the same bound applies to any
//! event, in particular to the cumulative events `{1, .., i}`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{cumulative, Interval, ProbabilityDistribution};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CredalBox {
    epsilon: f64,
    center: ProbabilityDistribution,
    class_bounds: Vec<Interval>,
    cumulative_bounds: Vec<Interval>,
}

impl CredalBox {
    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn center(&self) -> &ProbabilityDistribution {
        &self.center
    }

    pub fn classes(&self) -> usize {
        self.center.classes()
    }

    pub fn class_bounds(&self) -> &[Interval] {
        &self.class_bounds
    }

    /// Bounds on the cumulative probabilities; the last one is `[1, 1]`.
    pub fn cumulative_bounds(&self) -> &[Interval] {
        &self.cumulative_bounds
    }

    /// Cumulative bounds without the pinned last coordinate.
    pub fn free_cumulative_bounds(&self) -> &[Interval] {
        &self.cumulative_bounds[..self.cumulative_bounds.len() - 1]
    }

    /// Whether `p` satisfies every class bound within `tol`.
    pub fn contains(&self, p: &ProbabilityDistribution, tol: f64) -> bool {
        p.classes() == self.classes()
            && self
                .class_bounds
                .iter()
                .zip(p.probs())
                .all(|(b, &x)| b.contains(x, tol))
    }
}

pub fn build_credal_box(center: &ProbabilityDistribution, epsilon: f64) -> Result<CredalBox> {
    if !(0.0..=1.0).contains(&epsilon) {
        return Err(Error::InvalidInput(format!("epsilon {epsilon} outside [0, 1]")));
    }
    let keep = 1.0 - epsilon;
    let class_bounds = center
        .probs()
        .iter()
        .map(|&p| Interval {
            lo: keep * p,
            hi: keep * p + epsilon,
        })
        .collect();
    let cum = cumulative(center);
    let last = cum.values().len() - 1;
    let cumulative_bounds = cum
        .values()
        .iter()
        .enumerate()
        .map(|(i, &c)| {
            if i == last {
                Interval::point(1.0)
            } else {
                let lo = (keep * c).clamp(0.0, 1.0);
                Interval {
                    lo,
                    hi: (keep * c + epsilon).clamp(lo, 1.0),
                }
            }
        })
        .collect();
    Ok(CredalBox {
        epsilon,
        center: center.clone(),
        class_bounds,
        cumulative_bounds,
    })
}

/// The `C` vertices of the box: vertex `k` puts all contaminating mass on
/// class `k`.
pub fn extreme_points(b: &CredalBox) -> Vec<ProbabilityDistribution> {
    let keep = 1.0 - b.epsilon;
    let base: Vec<f64> = b.center.probs().iter().map(|p| keep * p).collect();
    (0..b.classes())
        .map(|k| {
            let mut v = base.clone();
            v[k] += b.epsilon;
            normalize_vertex(v)
        })
        .collect()
}

// The vertex sums to one up to rounding; rescale so it passes the strict check.
fn normalize_vertex(v: Vec<f64>) -> ProbabilityDistribution {
    let sum: f64 = v.iter().sum();
    let v = if (sum - 1.0).abs() > 0.0 {
        v.iter().map(|x| x / sum).collect()
    } else {
        v
    };
    ProbabilityDistribution::new(v).expect("vertex of a credal box is a distribution")
}

/// Contamination level matching an imprecise Dirichlet model with prior
/// strength `s` after `n` observations.
pub fn epsilon_from_idm(s: f64, n: u64) -> Result<f64> {
    if !(s > 0.0) || !s.is_finite() {
        return Err(Error::InvalidInput(format!("IDM strength s must be positive, got {s}")));
    }
    Ok(s / (n as f64 + s))
}

/// Default prior strength used when only the sample size is known.
pub const DEFAULT_IDM_STRENGTH: f64 = 1.0;

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::make_distribution;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn dist(v: &[f64]) -> ProbabilityDistribution {
        make_distribution(v).unwrap()
    }

    #[test]
    fn zero_epsilon_collapses_bounds() {
        let b = build_credal_box(&dist(&[0.5, 0.3, 0.2]), 0.0).unwrap();
        for (iv, p) in b.class_bounds().iter().zip([0.5, 0.3, 0.2]) {
            assert_eq!(iv.lo, p);
            assert_eq!(iv.hi, p);
        }
        for iv in b.cumulative_bounds() {
            assert_eq!(iv.lo, iv.hi);
        }
    }

    #[test]
    fn vacuous_box_is_whole_simplex() {
        let b = build_credal_box(&dist(&[0.5, 0.3, 0.2]), 1.0).unwrap();
        for iv in b.class_bounds() {
            assert_eq!((iv.lo, iv.hi), (0.0, 1.0));
        }
        assert_eq!(b.cumulative_bounds()[0], Interval { lo: 0.0, hi: 1.0 });
        assert_eq!(b.cumulative_bounds()[2], Interval::point(1.0));
    }

    #[test]
    fn class_bounds_at_tenth() {
        let b = build_credal_box(&dist(&[0.5, 0.3, 0.2]), 0.1).unwrap();
        let expected = [(0.45, 0.55), (0.27, 0.37), (0.18, 0.28)];
        for (iv, (lo, hi)) in b.class_bounds().iter().zip(expected) {
            assert!((iv.lo - lo).abs() < 1e-12 && (iv.hi - hi).abs() < 1e-12);
        }
        // the extreme points attain each bound
        let pts = extreme_points(&b);
        for k in 0..3 {
            let max = pts.iter().map(|p| p.probs()[k]).fold(f64::MIN, f64::max);
            let min = pts.iter().map(|p| p.probs()[k]).fold(f64::MAX, f64::min);
            assert!((max - expected[k].1).abs() < 1e-12);
            assert!((min - expected[k].0).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_epsilon_out_of_range() {
        assert!(build_credal_box(&dist(&[0.5, 0.5]), -0.1).is_err());
        assert!(build_credal_box(&dist(&[0.5, 0.5]), 1.5).is_err());
    }

    #[test]
    fn extreme_point_examples() {
        let pts = extreme_points(&build_credal_box(&dist(&[0.5, 0.5]), 0.2).unwrap());
        assert!((pts[0].probs()[0] - 0.6).abs() < 1e-12);
        assert!((pts[1].probs()[0] - 0.4).abs() < 1e-12);

        let p = dist(&[0.1, 0.6, 0.3]);
        for v in extreme_points(&build_credal_box(&p, 0.0).unwrap()) {
            assert_eq!(v, p);
        }

        let pts = extreme_points(&build_credal_box(&dist(&[1.0, 0.0]), 1.0).unwrap());
        assert_eq!(pts[0].probs(), &[1.0, 0.0]);
        assert_eq!(pts[1].probs(), &[0.0, 1.0]);
    }

    #[test]
    fn idm_bridge() {
        assert_eq!(epsilon_from_idm(2.0, 0).unwrap(), 1.0);
        assert!((epsilon_from_idm(2.0, 98).unwrap() - 0.02).abs() < 1e-15);
        assert!((epsilon_from_idm(1.0, 999).unwrap() - 0.001).abs() < 1e-15);
        assert!(epsilon_from_idm(0.0, 5).is_err());
        assert!(epsilon_from_idm(-1.0, 5).is_err());
    }

    #[test]
    fn convex_combinations_stay_in_box() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let c = rng.random_range(2..7);
            let raw: Vec<f64> = (0..c).map(|_| rng.random::<f64>()).collect();
            let p = dist(&raw);
            let b = build_credal_box(&p, rng.random::<f64>()).unwrap();
            let pts = extreme_points(&b);
            for v in &pts {
                assert!(b.contains(v, 1e-12));
            }
            for _ in 0..1000 {
                let lam: Vec<f64> = (0..c).map(|_| rng.random::<f64>()).collect();
                let s: f64 = lam.iter().sum();
                let mut mix = vec![0.0; c];
                for (l, v) in lam.iter().zip(&pts) {
                    for (m, x) in mix.iter_mut().zip(v.probs()) {
                        *m += l / s * x;
                    }
                }
                assert!(b.contains(&make_distribution(&mix).unwrap(), 1e-12));
            }
        }
    }

    #[test]
    fn bounds_nest_in_epsilon() {
        let p = dist(&[0.15, 0.25, 0.05, 0.55]);
        let grid = [0.0, 0.01, 0.05, 0.1, 0.3, 0.7, 1.0];
        for w in grid.windows(2) {
            let small = build_credal_box(&p, w[0]).unwrap();
            let large = build_credal_box(&p, w[1]).unwrap();
            for (a, b) in small.class_bounds().iter().zip(large.class_bounds()) {
                assert!(a.is_subset_of(b, 1e-15));
            }
            for (a, b) in small.cumulative_bounds().iter().zip(large.cumulative_bounds()) {
                assert!(a.is_subset_of(b, 1e-15));
            }
        }
    }

    #[test]
    fn cumulative_bounds_follow_partial_sums() {
        let p = dist(&[0.2, 0.3, 0.4, 0.1]);
        let eps = 0.25;
        let b = build_credal_box(&p, eps).unwrap();
        let mut acc = 0.0;
        for (i, iv) in b.free_cumulative_bounds().iter().enumerate() {
            acc += p.probs()[i];
            assert!((iv.lo - (1.0 - eps) * acc).abs() < 1e-12);
            assert!((iv.hi - ((1.0 - eps) * acc + eps).min(1.0)).abs() < 1e-12);
        }
    }
}
