//! Dense two-phase primal simplex for the small programs that appear in the
//! bound computations (a few dozen variables at most).
//!
//! Bland's rule picks both the entering and the leaving variable, so the
//! iteration is finite and the result is a deterministic function of the
//! input.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const FEASIBILITY_TOLERANCE: f64 = 1e-8;
pub const PIVOT_TOLERANCE: f64 = 1e-10;
const REDUCED_COST_TOLERANCE: f64 = 1e-10;
const MAX_ITERATIONS: usize = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sense {
    Minimize,
    Maximize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Relation {
    Le,
    Ge,
    Eq,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Constraint {
    pub coeffs: Vec<f64>,
    pub relation: Relation,
    pub rhs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearProgram {
    pub sense: Sense,
    pub objective: Vec<f64>,
    pub constraints: Vec<Constraint>,
    /// Per-variable `(lo, hi)`; either side may be infinite.
    pub bounds: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LpSolution {
    pub status: LpStatus,
    pub objective_value: Option<f64>,
    pub point: Option<Vec<f64>>,
}

impl LpSolution {
    fn without_point(status: LpStatus) -> Self {
        Self {
            status,
            objective_value: None,
            point: None,
        }
    }

    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }
}

impl LinearProgram {
    /// New program over `objective.len()` variables, each bounded to `[0, inf)`.
    pub fn new(sense: Sense, objective: Vec<f64>) -> Self {
        let n = objective.len();
        Self {
            sense,
            objective,
            constraints: Vec::new(),
            bounds: vec![(0.0, f64::INFINITY); n],
        }
    }

    pub fn dim(&self) -> usize {
        self.objective.len()
    }

    pub fn set_bounds(&mut self, var: usize, lo: f64, hi: f64) -> &mut Self {
        self.bounds[var] = (lo, hi);
        self
    }

    pub fn add_constraint(&mut self, coeffs: Vec<f64>, relation: Relation, rhs: f64) -> &mut Self {
        self.constraints.push(Constraint {
            coeffs,
            relation,
            rhs,
        });
        self
    }

    /// Sparse form of [`add_constraint`](Self::add_constraint).
    pub fn add_sparse(&mut self, terms: &[(usize, f64)], relation: Relation, rhs: f64) -> &mut Self {
        let mut coeffs = vec![0.0; self.dim()];
        for &(j, a) in terms {
            coeffs[j] += a;
        }
        self.add_constraint(coeffs, relation, rhs)
    }

    pub fn objective_at(&self, x: &[f64]) -> f64 {
        dot(&self.objective, x)
    }

    /// Largest violation of any bound or constraint at `x`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        for (&xi, &(lo, hi)) in x.iter().zip(&self.bounds) {
            worst = worst.max(lo - xi).max(xi - hi);
        }
        for c in &self.constraints {
            let lhs = dot(&c.coeffs, x);
            let v = match c.relation {
                Relation::Le => lhs - c.rhs,
                Relation::Ge => c.rhs - lhs,
                Relation::Eq => (lhs - c.rhs).abs(),
            };
            worst = worst.max(v);
        }
        worst
    }

    fn validate(&self) -> Result<()> {
        let n = self.dim();
        if self.bounds.len() != n {
            return Err(Error::MalformedLp(format!(
                "{} bounds for {} variables",
                self.bounds.len(),
                n
            )));
        }
        if self.objective.iter().any(|c| !c.is_finite()) {
            return Err(Error::MalformedLp("non-finite objective coefficient".into()));
        }
        for (i, c) in self.constraints.iter().enumerate() {
            if c.coeffs.len() != n {
                return Err(Error::MalformedLp(format!(
                    "constraint {i} has {} coefficients, expected {n}",
                    c.coeffs.len()
                )));
            }
            if c.coeffs.iter().any(|a| !a.is_finite()) || !c.rhs.is_finite() {
                return Err(Error::MalformedLp(format!("constraint {i} is not finite")));
            }
        }
        for (j, &(lo, hi)) in self.bounds.iter().enumerate() {
            if lo.is_nan() || hi.is_nan() || lo == f64::INFINITY || hi == f64::NEG_INFINITY {
                return Err(Error::MalformedLp(format!("variable {j} has bounds [{lo}, {hi}]")));
            }
        }
        Ok(())
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// How an original variable maps onto the nonnegative tableau columns.
#[derive(Debug, Clone, Copy)]
enum VarMap {
    Fixed(f64),
    /// `x = lo + y`
    Shifted { lo: f64, col: usize },
    /// `x = hi - y`
    Reflected { hi: f64, col: usize },
    /// `x = y+ - y-`
    Free { pos: usize, neg: usize },
}

pub fn solve(lp: &LinearProgram) -> Result<LpSolution> {
    lp.validate()?;
    if lp.bounds.iter().any(|&(lo, hi)| lo > hi) {
        return Ok(LpSolution::without_point(LpStatus::Infeasible));
    }

    // column layout of the structural part
    let mut maps = Vec::with_capacity(lp.dim());
    let mut ncols = 0;
    let mut upper_rows: Vec<(usize, f64)> = Vec::new();
    for &(lo, hi) in &lp.bounds {
        let m = if lo == hi {
            VarMap::Fixed(lo)
        } else if lo.is_finite() {
            let col = ncols;
            ncols += 1;
            if hi.is_finite() {
                upper_rows.push((col, hi - lo));
            }
            VarMap::Shifted { lo, col }
        } else if hi.is_finite() {
            let col = ncols;
            ncols += 1;
            VarMap::Reflected { hi, col }
        } else {
            let (pos, neg) = (ncols, ncols + 1);
            ncols += 2;
            VarMap::Free { pos, neg }
        };
        maps.push(m);
    }

    // rows in terms of the structural columns
    let mut rows: Vec<(Vec<f64>, Relation, f64)> = Vec::with_capacity(lp.constraints.len() + upper_rows.len());
    for c in &lp.constraints {
        let mut coeffs = vec![0.0; ncols];
        let mut rhs = c.rhs;
        for (a, m) in c.coeffs.iter().zip(&maps) {
            match *m {
                VarMap::Fixed(v) => rhs -= a * v,
                VarMap::Shifted { lo, col } => {
                    rhs -= a * lo;
                    coeffs[col] += a;
                }
                VarMap::Reflected { hi, col } => {
                    rhs -= a * hi;
                    coeffs[col] -= a;
                }
                VarMap::Free { pos, neg } => {
                    coeffs[pos] += a;
                    coeffs[neg] -= a;
                }
            }
        }
        rows.push((coeffs, c.relation, rhs));
    }
    for &(col, width) in &upper_rows {
        let mut coeffs = vec![0.0; ncols];
        coeffs[col] = 1.0;
        rows.push((coeffs, Relation::Le, width));
    }

    // objective over structural columns, always minimised
    let sign = match lp.sense {
        Sense::Minimize => 1.0,
        Sense::Maximize => -1.0,
    };
    let mut cost = vec![0.0; ncols];
    for (c, m) in lp.objective.iter().zip(&maps) {
        let c = sign * c;
        match *m {
            VarMap::Fixed(_) => {}
            VarMap::Shifted { col, .. } => cost[col] += c,
            VarMap::Reflected { col, .. } => cost[col] -= c,
            VarMap::Free { pos, neg } => {
                cost[pos] += c;
                cost[neg] -= c;
            }
        }
    }

    let y = match run_two_phase(rows, &cost, ncols)? {
        Outcome::Optimal(y) => y,
        Outcome::Infeasible => return Ok(LpSolution::without_point(LpStatus::Infeasible)),
        Outcome::Unbounded => return Ok(LpSolution::without_point(LpStatus::Unbounded)),
    };

    let x: Vec<f64> = maps
        .iter()
        .zip(&lp.bounds)
        .map(|(m, &(lo, hi))| {
            let v = match *m {
                VarMap::Fixed(v) => v,
                VarMap::Shifted { lo, col } => lo + y[col],
                VarMap::Reflected { hi, col } => hi - y[col],
                VarMap::Free { pos, neg } => y[pos] - y[neg],
            };
            v.clamp(lo, hi)
        })
        .collect();
    Ok(LpSolution {
        status: LpStatus::Optimal,
        objective_value: Some(lp.objective_at(&x)),
        point: Some(x),
    })
}

enum Outcome {
    Optimal(Vec<f64>),
    Infeasible,
    Unbounded,
}

struct Tableau {
    width: usize,
    /// row-major, `width + 1` entries per row, rhs last
    a: Vec<f64>,
    basis: Vec<usize>,
}

impl Tableau {
    fn rows(&self) -> usize {
        self.basis.len()
    }

    fn at(&self, r: usize, c: usize) -> f64 {
        self.a[r * (self.width + 1) + c]
    }

    fn rhs(&self, r: usize) -> f64 {
        self.at(r, self.width)
    }

    fn row(&self, r: usize) -> &[f64] {
        let s = self.width + 1;
        &self.a[r * s..(r + 1) * s]
    }

    fn pivot(&mut self, r: usize, c: usize, obj: &mut [f64]) {
        let s = self.width + 1;
        let p = self.at(r, c);
        for v in &mut self.a[r * s..(r + 1) * s] {
            *v /= p;
        }
        let pivot_row: Vec<f64> = self.row(r).to_vec();
        for i in 0..self.rows() {
            if i == r {
                continue;
            }
            let f = self.at(i, c);
            if f != 0.0 {
                for (v, pr) in self.a[i * s..(i + 1) * s].iter_mut().zip(&pivot_row) {
                    *v -= f * pr;
                }
                self.a[i * s + c] = 0.0;
            }
        }
        let f = obj[c];
        if f != 0.0 {
            for (v, pr) in obj.iter_mut().zip(&pivot_row) {
                *v -= f * pr;
            }
            obj[c] = 0.0;
        }
        self.basis[r] = c;
    }

    /// Bland-rule simplex over columns `< allowed`. `obj` holds reduced costs
    /// with minus the objective value in its last slot.
    fn optimize(&mut self, obj: &mut [f64], allowed: usize) -> Result<bool> {
        for _ in 0..MAX_ITERATIONS {
            let Some(enter) = (0..allowed).find(|&j| obj[j] < -REDUCED_COST_TOLERANCE) else {
                return Ok(true);
            };
            let mut leave: Option<(usize, f64)> = None;
            for r in 0..self.rows() {
                let a = self.at(r, enter);
                if a > PIVOT_TOLERANCE {
                    let ratio = self.rhs(r).max(0.0) / a;
                    leave = match leave {
                        None => Some((r, ratio)),
                        Some((br, bratio)) => {
                            if ratio < bratio || (ratio == bratio && self.basis[r] < self.basis[br]) {
                                Some((r, ratio))
                            } else {
                                Some((br, bratio))
                            }
                        }
                    };
                }
            }
            match leave {
                None => return Ok(false),
                Some((r, _)) => self.pivot(r, enter, obj),
            }
        }
        Err(Error::LpFailure {
            context: "simplex".into(),
            reason: format!("no convergence after {MAX_ITERATIONS} pivots"),
        })
    }
}

fn run_two_phase(rows: Vec<(Vec<f64>, Relation, f64)>, cost: &[f64], nstruct: usize) -> Result<Outcome> {
    let m = rows.len();
    if m == 0 {
        // only nonnegativity: optimum at zero unless some cost is negative
        if cost.iter().any(|&c| c < -REDUCED_COST_TOLERANCE) {
            return Ok(Outcome::Unbounded);
        }
        return Ok(Outcome::Optimal(vec![0.0; nstruct]));
    }

    // rhs >= 0 after a possible sign flip
    let rows: Vec<(Vec<f64>, Relation, f64)> = rows
        .into_iter()
        .map(|(coeffs, rel, rhs)| {
            if rhs < 0.0 {
                let flipped = match rel {
                    Relation::Le => Relation::Ge,
                    Relation::Ge => Relation::Le,
                    Relation::Eq => Relation::Eq,
                };
                (coeffs.iter().map(|a| -a).collect(), flipped, -rhs)
            } else {
                (coeffs, rel, rhs)
            }
        })
        .collect();

    let nslack = rows.iter().filter(|r| r.1 != Relation::Eq).count();
    let nart = rows.iter().filter(|r| r.1 != Relation::Le).count();
    let art_start = nstruct + nslack;
    let width = art_start + nart;

    let mut a = vec![0.0; m * (width + 1)];
    let mut basis = vec![0; m];
    let (mut next_slack, mut next_art) = (nstruct, art_start);
    for (r, (coeffs, rel, rhs)) in rows.iter().enumerate() {
        let base = r * (width + 1);
        a[base..base + nstruct].copy_from_slice(coeffs);
        a[base + width] = *rhs;
        match rel {
            Relation::Le => {
                a[base + next_slack] = 1.0;
                basis[r] = next_slack;
                next_slack += 1;
            }
            Relation::Ge => {
                a[base + next_slack] = -1.0;
                next_slack += 1;
                a[base + next_art] = 1.0;
                basis[r] = next_art;
                next_art += 1;
            }
            Relation::Eq => {
                a[base + next_art] = 1.0;
                basis[r] = next_art;
                next_art += 1;
            }
        }
    }
    let mut t = Tableau { width, a, basis };

    if nart > 0 {
        let mut obj = vec![0.0; width + 1];
        for v in &mut obj[art_start..width] {
            *v = 1.0;
        }
        for r in 0..m {
            if t.basis[r] >= art_start {
                for (o, v) in obj.iter_mut().zip(t.row(r)) {
                    *o -= v;
                }
            }
        }
        t.optimize(&mut obj, width)?;
        if -obj[width] > FEASIBILITY_TOLERANCE {
            return Ok(Outcome::Infeasible);
        }
        // drive remaining artificials out of the basis; drop redundant rows
        let mut r = 0;
        while r < t.rows() {
            if t.basis[r] >= art_start {
                match (0..art_start).find(|&j| t.at(r, j).abs() > PIVOT_TOLERANCE) {
                    Some(j) => {
                        t.pivot(r, j, &mut obj);
                        r += 1;
                    }
                    None => {
                        let s = width + 1;
                        t.a.drain(r * s..(r + 1) * s);
                        t.basis.remove(r);
                    }
                }
            } else {
                r += 1;
            }
        }
    }

    let mut obj = vec![0.0; width + 1];
    obj[..nstruct].copy_from_slice(cost);
    for r in 0..t.rows() {
        let cb = if t.basis[r] < nstruct { cost[t.basis[r]] } else { 0.0 };
        if cb != 0.0 {
            for (o, v) in obj.iter_mut().zip(t.row(r)) {
                *o -= cb * v;
            }
        }
    }
    if !t.optimize(&mut obj, art_start)? {
        return Ok(Outcome::Unbounded);
    }

    let mut y = vec![0.0; nstruct];
    for r in 0..t.rows() {
        if t.basis[r] < nstruct {
            y[t.basis[r]] = t.rhs(r).max(0.0);
        }
    }
    Ok(Outcome::Optimal(y))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn bound_active_minimum() {
        let mut lp = LinearProgram::new(Sense::Minimize, vec![1.0]);
        lp.set_bounds(0, 0.0, 1.0).add_constraint(vec![1.0], Relation::Ge, 0.5);
        let s = solve(&lp).unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        assert!((s.objective_value.unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn tightest_constraint_wins() {
        let mut lp = LinearProgram::new(Sense::Maximize, vec![1.0]);
        lp.add_constraint(vec![1.0], Relation::Le, 0.3)
            .add_constraint(vec![1.0], Relation::Le, 0.7);
        let s = solve(&lp).unwrap();
        assert!((s.objective_value.unwrap() - 0.3).abs() < 1e-12);
    }

    #[test]
    fn contradictory_constraints_are_infeasible() {
        let mut lp = LinearProgram::new(Sense::Minimize, vec![1.0]);
        lp.add_constraint(vec![1.0], Relation::Ge, 1.0)
            .add_constraint(vec![1.0], Relation::Le, 0.0);
        assert_eq!(solve(&lp).unwrap().status, LpStatus::Infeasible);
    }

    #[test]
    fn detects_unbounded() {
        let mut lp = LinearProgram::new(Sense::Maximize, vec![1.0, 1.0]);
        lp.add_constraint(vec![1.0, -1.0], Relation::Le, 1.0);
        assert_eq!(solve(&lp).unwrap().status, LpStatus::Unbounded);
    }

    #[test]
    fn free_and_reflected_variables() {
        // min x + y, x free with x >= -2 via constraint, y <= 3 with no lower bound, y >= -1 via constraint
        let mut lp = LinearProgram::new(Sense::Minimize, vec![1.0, 1.0]);
        lp.set_bounds(0, f64::NEG_INFINITY, f64::INFINITY)
            .set_bounds(1, f64::NEG_INFINITY, 3.0)
            .add_constraint(vec![1.0, 0.0], Relation::Ge, -2.0)
            .add_constraint(vec![0.0, 1.0], Relation::Ge, -1.0);
        let s = solve(&lp).unwrap();
        assert!((s.objective_value.unwrap() + 3.0).abs() < 1e-12);
    }

    #[test]
    fn equality_and_fixed_variables() {
        // max 2a + b s.t. a + b + c = 1, c fixed at 0.25, a <= 0.5
        let mut lp = LinearProgram::new(Sense::Maximize, vec![2.0, 1.0, 0.0]);
        lp.set_bounds(0, 0.0, 0.5)
            .set_bounds(2, 0.25, 0.25)
            .add_constraint(vec![1.0, 1.0, 1.0], Relation::Eq, 1.0);
        let s = solve(&lp).unwrap();
        assert!((s.objective_value.unwrap() - 1.25).abs() < 1e-12);
        assert!(lp.max_violation(s.point.as_ref().unwrap()) < 1e-12);
    }

    #[test]
    fn rejects_malformed_input() {
        let mut lp = LinearProgram::new(Sense::Minimize, vec![1.0, 1.0]);
        lp.add_constraint(vec![1.0], Relation::Le, 1.0);
        assert!(matches!(solve(&lp), Err(Error::MalformedLp(_))));
        let mut lp = LinearProgram::new(Sense::Minimize, vec![1.0]);
        lp.set_bounds(0, f64::INFINITY, f64::INFINITY);
        assert!(matches!(solve(&lp), Err(Error::MalformedLp(_))));
    }

    #[test]
    fn redundant_equalities() {
        let mut lp = LinearProgram::new(Sense::Minimize, vec![1.0, 2.0]);
        lp.add_constraint(vec![1.0, 1.0], Relation::Eq, 1.0)
            .add_constraint(vec![2.0, 2.0], Relation::Eq, 2.0);
        let s = solve(&lp).unwrap();
        assert!((s.objective_value.unwrap() - 1.0).abs() < 1e-12);
    }

    fn random_box_lp(rng: &mut impl Rng) -> LinearProgram {
        let n = rng.random_range(1..7);
        let sense = if rng.random::<bool>() { Sense::Minimize } else { Sense::Maximize };
        let obj = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mut lp = LinearProgram::new(sense, obj);
        for j in 0..n {
            let lo = rng.random_range(-1.0..0.5);
            lp.set_bounds(j, lo, lo + rng.random_range(0.0..1.0));
        }
        for _ in 0..rng.random_range(0..6) {
            let coeffs = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let rel = match rng.random_range(0..3) {
                0 => Relation::Le,
                1 => Relation::Ge,
                _ => Relation::Eq,
            };
            lp.add_constraint(coeffs, rel, rng.random_range(-0.5..0.5));
        }
        lp
    }

    #[test]
    fn optimal_points_are_feasible_and_not_beaten_by_samples() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut optimal = 0;
        for _ in 0..2000 {
            let lp = random_box_lp(&mut rng);
            let s = solve(&lp).unwrap();
            // bounded variables never give an unbounded program
            assert_ne!(s.status, LpStatus::Unbounded);
            if s.status != LpStatus::Optimal {
                continue;
            }
            optimal += 1;
            let x = s.point.as_ref().unwrap();
            assert!(lp.max_violation(x) <= FEASIBILITY_TOLERANCE, "violation {}", lp.max_violation(x));
            let best = s.objective_value.unwrap();
            // any feasible sampled point is no better than the reported optimum
            for _ in 0..200 {
                let cand: Vec<f64> = lp.bounds.iter().map(|&(lo, hi)| rng.random_range(lo..=hi)).collect();
                if lp.max_violation(&cand) <= 0.0 {
                    let v = lp.objective_at(&cand);
                    match lp.sense {
                        Sense::Minimize => assert!(v >= best - 1e-8),
                        Sense::Maximize => assert!(v <= best + 1e-8),
                    }
                }
            }
        }
        assert!(optimal > 200);
    }

    #[test]
    fn deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..100 {
            let lp = random_box_lp(&mut rng);
            let a = solve(&lp).unwrap();
            let b = solve(&lp).unwrap();
            assert_eq!(a.status, b.status);
            assert_eq!(
                a.objective_value.map(f64::to_bits),
                b.objective_value.map(f64::to_bits)
            );
        }
    }
}
