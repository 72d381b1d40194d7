//! Bounds on `D_KS(P, Q) - D_KS(R, Q)` when `P`, `R` and `Q` range over
//! boxes of cumulative probabilities, plus bounds on `D_KS(T, Q)` alone.
//!
//! The non-convex min/max splits into one linear program per coordinate `k`
//! and per sign of the dominating gap. For the lower bound the gap
//! `max_i |tau_i - alpha_i|` is replaced either by `tau_k^U - alpha_k` or by
//! `alpha_k - tau_k^L` together with constraints making that term the
//! largest of its family. Every subproblem objective over-estimates the true
//! objective on its feasible region and the regions cover the whole box, so
//! the minimum over feasible subproblems is the exact lower bound. The upper
//! bound is symmetric with the roles of `pi` and `tau` exchanged.

use crate::contamination::CredalBox;
use crate::error::{Error, Result};
use crate::lp::{solve, LinearProgram, LpStatus, Relation, Sense};
use crate::types::Interval;

const CASE_TOLERANCE: f64 = 1e-12;

/// Cumulative boxes over the free coordinates `1..C-1` for the three
/// distributions of a marginal-difference term: `pi` for `P`, `tau` for `R`
/// and `alpha` for the reference `Q`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundProblemInputs {
    pub pi: Vec<Interval>,
    pub tau: Vec<Interval>,
    pub alpha: Vec<Interval>,
}

impl BoundProblemInputs {
    pub fn new(pi: Vec<Interval>, tau: Vec<Interval>, alpha: Vec<Interval>) -> Result<Self> {
        let n = pi.len();
        if n == 0 {
            return Err(Error::InvalidInput("need at least one free cumulative coordinate".into()));
        }
        for v in [&tau, &alpha] {
            if v.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: v.len(),
                });
            }
        }
        for iv in pi.iter().chain(&tau).chain(&alpha) {
            if iv.lo < -CASE_TOLERANCE || iv.hi > 1.0 + CASE_TOLERANCE || iv.lo > iv.hi + CASE_TOLERANCE {
                return Err(Error::InvalidInput(format!(
                    "cumulative bound [{}, {}] is not inside [0, 1]",
                    iv.lo, iv.hi
                )));
            }
        }
        Ok(Self { pi, tau, alpha })
    }

    pub fn from_boxes(p: &CredalBox, r: &CredalBox, q: &CredalBox) -> Result<Self> {
        Self::new(
            p.free_cumulative_bounds().to_vec(),
            r.free_cumulative_bounds().to_vec(),
            q.free_cumulative_bounds().to_vec(),
        )
    }

    pub fn coordinates(&self) -> usize {
        self.pi.len()
    }
}

/// Variables `[B, x_1..x_n, alpha_1..alpha_n]` with `B >= |x_i - alpha_i|`,
/// both sequences nondecreasing and inside their boxes.
struct GapProblem {
    n: usize,
}

impl GapProblem {
    fn b(&self) -> usize {
        0
    }
    fn x(&self, i: usize) -> usize {
        1 + i
    }
    fn alpha(&self, i: usize) -> usize {
        1 + self.n + i
    }

    fn base(&self, sense: Sense, x_box: &[Interval], alpha_box: &[Interval]) -> LinearProgram {
        let n = self.n;
        let mut lp = LinearProgram::new(sense, vec![0.0; 1 + 2 * n]);
        for i in 0..n {
            lp.set_bounds(self.x(i), x_box[i].lo, x_box[i].hi.max(x_box[i].lo));
            lp.set_bounds(self.alpha(i), alpha_box[i].lo, alpha_box[i].hi.max(alpha_box[i].lo));
            lp.add_sparse(&[(self.b(), 1.0), (self.x(i), -1.0), (self.alpha(i), 1.0)], Relation::Ge, 0.0);
            lp.add_sparse(&[(self.b(), 1.0), (self.x(i), 1.0), (self.alpha(i), -1.0)], Relation::Ge, 0.0);
        }
        for i in 0..n.saturating_sub(1) {
            lp.add_sparse(&[(self.x(i), 1.0), (self.x(i + 1), -1.0)], Relation::Le, 0.0);
            lp.add_sparse(&[(self.alpha(i), 1.0), (self.alpha(i + 1), -1.0)], Relation::Le, 0.0);
        }
        lp
    }
}

/// Which side of the reference box dominates the gap in a case subproblem.
#[derive(Debug, Clone, Copy)]
enum Side {
    /// the gap is `upper_k - alpha_k`
    Above,
    /// the gap is `alpha_k - lower_k`
    Below,
}

/// Adds the case constraints making the `side` gap at `k` nonnegative and the
/// largest of its family, and returns the LP. Returns `None` when the case is
/// infeasible by the interval test alone.
fn case_problem(
    shape: &GapProblem,
    sense: Sense,
    x_box: &[Interval],
    fixed: &[Interval],
    alpha_box: &[Interval],
    k: usize,
    side: Side,
) -> Option<LinearProgram> {
    let mut lp = shape.base(sense, x_box, alpha_box);
    let ak = shape.alpha(k);
    match side {
        Side::Above => {
            if fixed[k].hi < alpha_box[k].lo - CASE_TOLERANCE {
                return None;
            }
            lp.add_sparse(&[(ak, 1.0)], Relation::Le, fixed[k].hi);
            for i in (0..shape.n).filter(|&i| i != k) {
                // fixed_k^U - alpha_k >= fixed_i^U - alpha_i
                lp.add_sparse(&[(shape.alpha(i), 1.0), (ak, -1.0)], Relation::Ge, fixed[i].hi - fixed[k].hi);
            }
        }
        Side::Below => {
            if fixed[k].lo > alpha_box[k].hi + CASE_TOLERANCE {
                return None;
            }
            lp.add_sparse(&[(ak, 1.0)], Relation::Ge, fixed[k].lo);
            for i in (0..shape.n).filter(|&i| i != k) {
                // alpha_k - fixed_k^L >= alpha_i - fixed_i^L
                lp.add_sparse(&[(ak, 1.0), (shape.alpha(i), -1.0)], Relation::Ge, fixed[k].lo - fixed[i].lo);
            }
        }
    }
    Some(lp)
}

fn solve_case(lp: &LinearProgram, what: &str) -> Result<Option<f64>> {
    let sol = solve(lp)?;
    match sol.status {
        LpStatus::Optimal => Ok(sol.objective_value),
        LpStatus::Infeasible => Ok(None),
        LpStatus::Unbounded => Err(Error::LpFailure {
            context: what.to_string(),
            reason: "unbounded over a bounded box".into(),
        }),
    }
}

/// Smallest value of `max_i |pi_i - alpha_i| - max_i |tau_i - alpha_i|`.
pub fn lower_difference_bound(inp: &BoundProblemInputs) -> Result<f64> {
    let n = inp.coordinates();
    let shape = GapProblem { n };
    let mut best: Option<f64> = None;
    for k in 0..n {
        for side in [Side::Above, Side::Below] {
            let Some(mut lp) = case_problem(&shape, Sense::Minimize, &inp.pi, &inp.tau, &inp.alpha, k, side) else {
                continue;
            };
            lp.objective[shape.b()] = 1.0;
            let (alpha_coef, constant) = match side {
                // B - (tau_k^U - alpha_k)
                Side::Above => (1.0, -inp.tau[k].hi),
                // B - (alpha_k - tau_k^L)
                Side::Below => (-1.0, inp.tau[k].lo),
            };
            lp.objective[shape.alpha(k)] = alpha_coef;
            if let Some(v) = solve_case(&lp, "lower KS difference bound")? {
                let v = v + constant;
                best = Some(best.map_or(v, |b: f64| b.min(v)));
            }
        }
    }
    best.ok_or(Error::AllSubproblemsInfeasible {
        bound: "lower",
        count: 2 * n,
    })
}

/// Largest value of `max_i |pi_i - alpha_i| - max_i |tau_i - alpha_i|`.
pub fn upper_difference_bound(inp: &BoundProblemInputs) -> Result<f64> {
    let n = inp.coordinates();
    let shape = GapProblem { n };
    let mut best: Option<f64> = None;
    for k in 0..n {
        for side in [Side::Above, Side::Below] {
            let Some(mut lp) = case_problem(&shape, Sense::Maximize, &inp.tau, &inp.pi, &inp.alpha, k, side) else {
                continue;
            };
            lp.objective[shape.b()] = -1.0;
            let (alpha_coef, constant) = match side {
                // (pi_k^U - alpha_k) - B
                Side::Above => (-1.0, inp.pi[k].hi),
                // (alpha_k - pi_k^L) - B
                Side::Below => (1.0, -inp.pi[k].lo),
            };
            lp.objective[shape.alpha(k)] = alpha_coef;
            if let Some(v) = solve_case(&lp, "upper KS difference bound")? {
                let v = v + constant;
                best = Some(best.map_or(v, |b: f64| b.max(v)));
            }
        }
    }
    best.ok_or(Error::AllSubproblemsInfeasible {
        bound: "upper",
        count: 2 * n,
    })
}

/// Both bounds of the difference as one interval.
pub fn difference_bounds(inp: &BoundProblemInputs) -> Result<Interval> {
    let lo = lower_difference_bound(inp)?;
    let hi = upper_difference_bound(inp)?;
    Ok(Interval { lo, hi: hi.max(lo) })
}

fn distance_to(x: f64, iv: &Interval) -> f64 {
    if x < iv.lo {
        iv.lo - x
    } else if x > iv.hi {
        x - iv.hi
    } else {
        0.0
    }
}

fn farthest_gap(x: f64, iv: &Interval) -> f64 {
    (iv.hi - x).max(x - iv.lo)
}

/// Closed-form bounds for two classes, where each distribution has a single
/// free cumulative coordinate.
///
/// For a fixed reference value `a` the lower objective is
/// `dist(a, pi) - farthest(a, tau)`, piecewise linear with convex kinks only
/// at the ends of `pi`, so its minimum over the `alpha` interval sits at an
/// end of `alpha` or at an end of `pi` clipped into `alpha`. The upper
/// objective `farthest(a, pi) - dist(a, tau)` likewise peaks at an end of
/// `alpha` or of `tau`. The classical four-case table
/// (`2 alpha^L - pi^U - tau^U`, `pi^L - tau^U`, `tau^L - pi^U`,
/// `pi^L + tau^L - 2 alpha^U` and their mirrors) evaluates the same vertices
/// but misses configurations where `alpha` starts inside `pi`.
pub fn binary_difference_bounds(pi: Interval, tau: Interval, alpha: Interval) -> Result<Interval> {
    for iv in [pi, tau, alpha] {
        if !(iv.lo <= iv.hi + CASE_TOLERANCE) {
            return Err(Error::InvalidInput(format!(
                "inconsistent binary bound [{}, {}]",
                iv.lo, iv.hi
            )));
        }
    }
    let clip = |x: f64| x.clamp(alpha.lo, alpha.hi.max(alpha.lo));
    let lower = [alpha.lo, alpha.hi, clip(pi.lo), clip(pi.hi)]
        .into_iter()
        .map(|a| distance_to(a, &pi) - farthest_gap(a, &tau))
        .fold(f64::INFINITY, f64::min);
    let upper = [alpha.lo, alpha.hi, clip(tau.lo), clip(tau.hi)]
        .into_iter()
        .map(|a| farthest_gap(a, &pi) - distance_to(a, &tau))
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(Interval {
        lo: lower,
        hi: upper.max(lower),
    })
}

/// Bounds on `D_KS(T, Q)` for `T` in the `pi` box (empty coalition) and `Q`
/// in the `alpha` box (full prediction).
pub fn total_gain_bounds(pi: &[Interval], alpha: &[Interval]) -> Result<Interval> {
    let n = pi.len();
    if n == 0 || alpha.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: alpha.len(),
        });
    }
    let shape = GapProblem { n };
    let mut lp = shape.base(Sense::Minimize, pi, alpha);
    lp.objective[shape.b()] = 1.0;
    let lower = solve_case(&lp, "total gain lower bound")?.ok_or_else(|| Error::LpFailure {
        context: "total gain lower bound".into(),
        reason: "infeasible cumulative boxes".into(),
    })?;
    let upper = pi
        .iter()
        .zip(alpha)
        .map(|(p, a)| (p.hi - a.lo).max(a.hi - p.lo))
        .fold(0.0, f64::max);
    let lower = lower.clamp(0.0, 1.0);
    Ok(Interval {
        lo: lower,
        hi: upper.clamp(lower, 1.0),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::contamination::build_credal_box;
    use crate::divergence::ks_distance;
    use crate::types::{make_distribution, ProbabilityDistribution};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn iv(lo: f64, hi: f64) -> Interval {
        Interval::new(lo, hi).unwrap()
    }

    fn random_dist(rng: &mut impl Rng, c: usize) -> ProbabilityDistribution {
        let raw: Vec<f64> = (0..c).map(|_| rng.random::<f64>()).collect();
        make_distribution(&raw).unwrap()
    }

    fn inputs(p: &ProbabilityDistribution, r: &ProbabilityDistribution, q: &ProbabilityDistribution, eps: f64) -> BoundProblemInputs {
        BoundProblemInputs::from_boxes(
            &build_credal_box(p, eps).unwrap(),
            &build_credal_box(r, eps).unwrap(),
            &build_credal_box(q, eps).unwrap(),
        )
        .unwrap()
    }

    // exhaustive 1-D grid over (pi, tau, alpha)
    fn binary_grid(pi: Interval, tau: Interval, alpha: Interval, step: f64) -> (f64, f64) {
        let pts = |i: Interval| {
            let n = ((i.hi - i.lo) / step).ceil() as usize;
            let mut v: Vec<f64> = (0..=n).map(|k| (i.lo + k as f64 * step).min(i.hi)).collect();
            v.push(i.hi);
            v
        };
        let (ps, ts, al) = (pts(pi), pts(tau), pts(alpha));
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for &a in &al {
            for &p in &ps {
                for &t in &ts {
                    let v = (p - a).abs() - (t - a).abs();
                    lo = lo.min(v);
                    hi = hi.max(v);
                }
            }
        }
        (lo, hi)
    }

    #[test]
    fn precise_boxes_reproduce_the_difference() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..200 {
            let c = rng.random_range(2..7);
            let (p, r, q) = (random_dist(&mut rng, c), random_dist(&mut rng, c), random_dist(&mut rng, c));
            let exact = ks_distance(&p, &q).unwrap() - ks_distance(&r, &q).unwrap();
            let inp = inputs(&p, &r, &q, 0.0);
            let lo = lower_difference_bound(&inp).unwrap();
            let hi = upper_difference_bound(&inp).unwrap();
            assert!((lo - exact).abs() < 1e-12, "{lo} vs {exact}");
            assert!((hi - exact).abs() < 1e-12, "{hi} vs {exact}");
        }
    }

    #[test]
    fn same_box_for_both_sides_gives_nonpositive_lower() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..100 {
            let c = rng.random_range(2..6);
            let (p, q) = (random_dist(&mut rng, c), random_dist(&mut rng, c));
            let inp = inputs(&p, &p, &q, rng.random_range(0.0..0.5));
            assert!(lower_difference_bound(&inp).unwrap() <= 1e-12);
            assert!(upper_difference_bound(&inp).unwrap() >= -1e-12);
        }
    }

    #[test]
    fn binary_degenerate_is_zero() {
        let x = iv(0.4, 0.4);
        let b = binary_difference_bounds(x, x, x).unwrap();
        assert_eq!((b.lo, b.hi), (0.0, 0.0));
    }

    #[test]
    fn binary_example_matches_grid() {
        let (pi, tau, alpha) = (iv(0.1, 0.2), iv(0.1, 0.2), iv(0.5, 0.6));
        let b = binary_difference_bounds(pi, tau, alpha).unwrap();
        let (glo, ghi) = binary_grid(pi, tau, alpha, 1e-4);
        assert!((b.lo - glo).abs() < 1e-9 && (b.lo + 0.1).abs() < 1e-12);
        assert!((b.hi - ghi).abs() < 1e-9 && (b.hi - 0.1).abs() < 1e-12);
    }

    #[test]
    fn binary_handles_reference_starting_inside_pi() {
        // no row of the four-case table applies here
        let (pi, tau, alpha) = (iv(0.3, 0.5), iv(0.7, 0.9), iv(0.35, 0.55));
        let b = binary_difference_bounds(pi, tau, alpha).unwrap();
        let (glo, ghi) = binary_grid(pi, tau, alpha, 1e-3);
        assert!((b.lo - glo).abs() < 1e-9, "{} vs {glo}", b.lo);
        assert!((b.hi - ghi).abs() < 1e-9, "{} vs {ghi}", b.hi);
        assert!((b.lo + 0.55).abs() < 1e-12);
    }

    #[test]
    fn binary_closed_form_matches_grid_on_random_boxes() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let rand_iv = |rng: &mut ChaCha8Rng| {
            let a: f64 = rng.random_range(0.0..1.0);
            let b: f64 = rng.random_range(0.0..1.0);
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            // snap to the grid so the oracle is exact
            iv((lo * 50.0).round() / 50.0, (hi * 50.0).round() / 50.0)
        };
        for _ in 0..300 {
            let (pi, tau, alpha) = (rand_iv(&mut rng), rand_iv(&mut rng), rand_iv(&mut rng));
            let b = binary_difference_bounds(pi, tau, alpha).unwrap();
            let (glo, ghi) = binary_grid(pi, tau, alpha, 0.02);
            assert!((b.lo - glo).abs() < 1e-9);
            assert!((b.hi - ghi).abs() < 1e-9);
        }
    }

    #[test]
    fn total_gain_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let c = rng.random_range(2..7);
            let (t, q) = (random_dist(&mut rng, c), random_dist(&mut rng, c));
            let exact = ks_distance(&t, &q).unwrap();
            let g = total_gain_bounds(
                build_credal_box(&t, 0.0).unwrap().free_cumulative_bounds(),
                build_credal_box(&q, 0.0).unwrap().free_cumulative_bounds(),
            )
            .unwrap();
            assert!((g.lo - exact).abs() < 1e-12 && (g.hi - exact).abs() < 1e-12);

            let same = build_credal_box(&t, 0.1).unwrap();
            let g = total_gain_bounds(same.free_cumulative_bounds(), same.free_cumulative_bounds()).unwrap();
            assert!(g.lo.abs() < 1e-12);
            assert!(g.hi <= 1.0 && g.lo <= g.hi);
        }
    }

    #[test]
    fn rejects_out_of_range_inputs() {
        assert!(BoundProblemInputs::new(vec![iv(0.0, 1.2)], vec![iv(0.0, 0.1)], vec![iv(0.0, 0.1)]).is_err());
        assert!(BoundProblemInputs::new(vec![iv(0.0, 0.2)], vec![], vec![iv(0.0, 0.1)]).is_err());
    }
}
