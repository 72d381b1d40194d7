//! Sampling-based bounds that work with any divergence.
//!
//! Points of a credal box are mixtures of its extreme points with weights
//! drawn uniformly from the simplex (normalised unit exponentials). The
//! resulting min/max over sampled triples is an inner approximation of the
//! true range.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use crate::contamination::{extreme_points, CredalBox};
use crate::divergence::DivergenceKind;
use crate::error::{Error, Result};
use crate::types::{Interval, ProbabilityDistribution};

/// Above this many classes the exhaustive vertex triples are skipped.
const MAX_CLASSES_FOR_VERTEX_TRIPLES: usize = 10;

/// Mixture weights over `r` extreme points.
#[derive(Debug, Clone, PartialEq)]
pub struct SimplexSample {
    pub weights: Vec<f64>,
}

/// Deterministic stream of uniform simplex points.
pub struct SimplexSampler {
    k: usize,
    rng: ChaCha8Rng,
}

impl SimplexSampler {
    pub fn new(k: usize, seed: u64) -> Result<Self> {
        if k < 2 {
            return Err(Error::InvalidInput(format!("simplex dimension must be >= 2, got {k}")));
        }
        Ok(Self {
            k,
            rng: ChaCha8Rng::seed_from_u64(seed),
        })
    }

    pub fn next_sample(&mut self) -> SimplexSample {
        let mut weights: Vec<f64> = (0..self.k).map(|_| Exp1.sample(&mut self.rng)).collect();
        let total: f64 = weights.iter().sum();
        for w in &mut weights {
            *w /= total;
        }
        SimplexSample { weights }
    }
}

pub fn sample_simplex(k: usize, count: usize, seed: u64) -> Result<Vec<SimplexSample>> {
    let mut s = SimplexSampler::new(k, seed)?;
    Ok((0..count).map(|_| s.next_sample()).collect())
}

fn mix(vertices: &[ProbabilityDistribution], weights: &[f64]) -> ProbabilityDistribution {
    let c = vertices[0].classes();
    let mut out = vec![0.0; c];
    for (v, &w) in vertices.iter().zip(weights) {
        for (o, x) in out.iter_mut().zip(v.probs()) {
            *o += w * x;
        }
    }
    let total: f64 = out.iter().sum();
    for o in &mut out {
        *o /= total;
    }
    ProbabilityDistribution::new(out).expect("mixture of distributions")
}

/// Draws points of a credal box; draws from a degenerate box return the center.
pub struct CredalSampler {
    vertices: Vec<ProbabilityDistribution>,
    degenerate: bool,
    center: ProbabilityDistribution,
}

impl CredalSampler {
    pub fn new(b: &CredalBox) -> Self {
        Self {
            vertices: extreme_points(b),
            degenerate: b.epsilon() == 0.0,
            center: b.center().clone(),
        }
    }

    pub fn vertices(&self) -> &[ProbabilityDistribution] {
        &self.vertices
    }

    pub fn draw(&self, sampler: &mut SimplexSampler) -> ProbabilityDistribution {
        let lambda = sampler.next_sample();
        if self.degenerate {
            self.center.clone()
        } else {
            mix(&self.vertices, &lambda.weights)
        }
    }
}

pub fn sample_credal(b: &CredalBox, count: usize, seed: u64) -> Result<Vec<ProbabilityDistribution>> {
    let cs = CredalSampler::new(b);
    let mut s = SimplexSampler::new(b.classes(), seed)?;
    Ok((0..count).map(|_| cs.draw(&mut s)).collect())
}

/// Sampled range of a divergence expression plus bookkeeping on
/// non-finite evaluations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McBounds {
    pub interval: Interval,
    /// samples where the expression was `+-inf`
    pub infinite_samples: usize,
    /// samples where it was undefined (`inf - inf`) and got skipped
    pub undefined_samples: usize,
    pub evaluated: usize,
}

struct Range {
    lo: f64,
    hi: f64,
    infinite: usize,
    undefined: usize,
    evaluated: usize,
}

impl Range {
    fn new() -> Self {
        Self {
            lo: f64::INFINITY,
            hi: f64::NEG_INFINITY,
            infinite: 0,
            undefined: 0,
            evaluated: 0,
        }
    }

    fn push(&mut self, v: f64) {
        self.evaluated += 1;
        if v.is_nan() {
            self.undefined += 1;
            return;
        }
        if v.is_infinite() {
            self.infinite += 1;
        }
        self.lo = self.lo.min(v);
        self.hi = self.hi.max(v);
    }

    fn finish(self) -> Result<McBounds> {
        if self.lo > self.hi {
            return Err(Error::InvalidInput("every sampled divergence was undefined".into()));
        }
        Ok(McBounds {
            interval: Interval {
                lo: self.lo,
                hi: self.hi,
            },
            infinite_samples: self.infinite,
            undefined_samples: self.undefined,
            evaluated: self.evaluated,
        })
    }
}

fn difference(kind: DivergenceKind, p: &ProbabilityDistribution, r: &ProbabilityDistribution, q: &ProbabilityDistribution) -> Result<f64> {
    if p == r {
        return Ok(0.0);
    }
    Ok(kind.evaluate(p, q)? - kind.evaluate(r, q)?)
}

fn check_boxes(boxes: &[&CredalBox], count: usize) -> Result<()> {
    if count == 0 {
        return Err(Error::InvalidInput("sample count must be positive".into()));
    }
    let c = boxes[0].classes();
    for b in boxes {
        if b.classes() != c {
            return Err(Error::DimensionMismatch {
                expected: c,
                found: b.classes(),
            });
        }
    }
    Ok(())
}

/// Sampled min and max of `D(P, Q) - D(R, Q)` over independent draws from
/// the three boxes.
///
/// The centre triple and, for up to ten classes, every triple of extreme
/// points are evaluated before the `count` random triples.
pub fn mc_difference_bounds(
    box_p: &CredalBox,
    box_r: &CredalBox,
    box_q: &CredalBox,
    kind: DivergenceKind,
    count: usize,
    seed: u64,
) -> Result<McBounds> {
    check_boxes(&[box_p, box_r, box_q], count)?;
    let (sp, sr, sq) = (CredalSampler::new(box_p), CredalSampler::new(box_r), CredalSampler::new(box_q));
    let mut range = Range::new();

    range.push(difference(kind, box_p.center(), box_r.center(), box_q.center())?);
    if box_p.classes() <= MAX_CLASSES_FOR_VERTEX_TRIPLES {
        for p in sp.vertices() {
            for r in sr.vertices() {
                for q in sq.vertices() {
                    range.push(difference(kind, p, r, q)?);
                }
            }
        }
    }

    let mut stream = SimplexSampler::new(box_p.classes(), seed)?;
    for _ in 0..count {
        let p = sp.draw(&mut stream);
        let r = sr.draw(&mut stream);
        let q = sq.draw(&mut stream);
        range.push(difference(kind, &p, &r, &q)?);
    }
    range.finish()
}

/// Sampled min and max of `D(T, Q)` for `T` and `Q` drawn from two boxes.
pub fn mc_distance_bounds(box_t: &CredalBox, box_q: &CredalBox, kind: DivergenceKind, count: usize, seed: u64) -> Result<McBounds> {
    check_boxes(&[box_t, box_q], count)?;
    let (st, sq) = (CredalSampler::new(box_t), CredalSampler::new(box_q));
    let mut range = Range::new();
    range.push(kind.evaluate(box_t.center(), box_q.center())?);
    for t in st.vertices() {
        for q in sq.vertices() {
            range.push(kind.evaluate(t, q)?);
        }
    }
    let mut stream = SimplexSampler::new(box_t.classes(), seed)?;
    for _ in 0..count {
        let t = st.draw(&mut stream);
        let q = sq.draw(&mut stream);
        range.push(kind.evaluate(&t, &q)?);
    }
    range.finish()
}
