//! The discrete N-particle collision model and the independent-set finder
//! built on it.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{GraphSpec, VertexSet};
use crate::stats::stream_rng;

/// Particle counts per vertex.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct OccupationVector(Vec<u64>);

impl OccupationVector {
    pub fn new(counts: Vec<u64>) -> Self {
        OccupationVector(counts)
    }

    pub fn counts(&self) -> &[u64] {
        &self.0
    }

    pub fn total(&self) -> u64 {
        self.0.iter().sum()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn occupied(&self) -> VertexSet {
        VertexSet::from_sorted_unchecked((0..self.0.len()).filter(|&i| self.0[i] > 0).collect())
    }

    /// `n / N`.
    pub fn rescaled(&self) -> Vec<f64> {
        let total = self.total() as f64;
        self.0.iter().map(|&c| c as f64 / total).collect()
    }

    fn from_positions(r: usize, positions: &[usize]) -> Self {
        let mut counts = vec![0; r];
        for &p in positions {
            counts[p] += 1;
        }
        OccupationVector(counts)
    }
}

/// True when some edge joins two occupied vertices.
fn has_adjacent_pair(g: &GraphSpec, counts: &[u64]) -> bool {
    g.edges().any(|(i, j)| counts[i] > 0 && counts[j] > 0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FinderConfig {
    pub particles: u64,
    pub threshold: u64,
    pub seed: u64,
}

impl FinderConfig {
    /// Threshold `50 N^2`.
    pub fn new(particles: u64, seed: u64) -> Self {
        FinderConfig {
            particles,
            threshold: default_threshold(particles),
            seed,
        }
    }

    pub fn with_threshold(mut self, threshold: u64) -> Self {
        self.threshold = threshold;
        self
    }

    fn validate(&self, g: &GraphSpec) -> Result<()> {
        let r = g.vertex_count() as u64;
        if self.particles < r {
            return Err(Error::InvalidParameter(format!(
                "need at least one particle per vertex: {} particles for {r} vertices",
                self.particles
            )));
        }
        if self.threshold == 0 {
            return Err(Error::InvalidParameter("threshold must be at least 1".into()));
        }
        Ok(())
    }
}

pub fn default_threshold(particles: u64) -> u64 {
    particles.saturating_mul(particles).saturating_mul(50)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FinderResult {
    pub set: VertexSet,
    pub iterations: u64,
    /// False when the threshold was reached while adjacent vertices were
    /// still occupied.
    pub converged: bool,
    pub particles: u64,
    pub threshold: u64,
}

/// One run on stream 0 of `cfg.seed`.
pub fn find_independent_set(g: &GraphSpec, cfg: &FinderConfig) -> Result<FinderResult> {
    cfg.validate(g)?;
    Ok(finder_run(g, cfg, &mut stream_rng(cfg.seed, 0)))
}

/// `runs` independent runs; run `k` uses stream `k` of `cfg.seed`.
pub fn find_independent_sets(g: &GraphSpec, cfg: &FinderConfig, runs: u64) -> Result<Vec<FinderResult>> {
    cfg.validate(g)?;
    Ok((0..runs)
        .into_par_iter()
        .map(|k| finder_run(g, cfg, &mut stream_rng(cfg.seed, k)))
        .collect())
}

fn finder_run<R: Rng + ?Sized>(g: &GraphSpec, cfg: &FinderConfig, rng: &mut R) -> FinderResult {
    let r = g.vertex_count();
    let n = cfg.particles as usize;
    let mut position: Vec<usize> = (0..n)
        .map(|p| if p < r { p } else { rng.random_range(0..r) })
        .collect();
    let mut counts = OccupationVector::from_positions(r, &position).0;
    let mut absorbed = !has_adjacent_pair(g, &counts);
    let mut c = 0u64;
    let mut iterations = 0u64;
    while c < cfg.threshold {
        if absorbed {
            // no adjacent pair left: every remaining draw is a non-collision
            iterations += cfg.threshold - c;
            break;
        }
        iterations += 1;
        match compromise_step(g, &mut position, &mut counts, rng) {
            Some(from) => {
                c = 0;
                if counts[from] == 0 {
                    absorbed = !has_adjacent_pair(g, &counts);
                }
            }
            None => c += 1,
        }
    }
    FinderResult {
        set: OccupationVector(counts.clone()).occupied(),
        iterations,
        converged: !has_adjacent_pair(g, &counts),
        particles: cfg.particles,
        threshold: cfg.threshold,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryPoint {
    pub step: u64,
    /// `step / (N (N - 1) / 2)`.
    pub time: f64,
    pub x: Vec<f64>,
}

/// Diffusion time per collision step.
pub fn time_per_step(total: u64) -> f64 {
    if total < 2 {
        0.0
    } else {
        2.0 / (total as f64 * (total - 1) as f64)
    }
}

fn check_occupation(g: &GraphSpec, n0: &OccupationVector) -> Result<()> {
    if n0.len() != g.vertex_count() {
        return Err(Error::DimensionMismatch {
            expected: g.vertex_count(),
            found: n0.len(),
        });
    }
    if n0.total() == 0 {
        return Err(Error::InvalidParameter("no particles".into()));
    }
    Ok(())
}

fn positions_of(n0: &OccupationVector) -> Vec<usize> {
    n0.counts()
        .iter()
        .enumerate()
        .flat_map(|(i, &c)| std::iter::repeat_n(i, c as usize))
        .collect()
}

/// One step: two distinct particles; if their vertices are adjacent, one
/// of them joins the other with probability 1/2 each way. Returns the
/// vertex a particle left.
fn compromise_step<R: Rng + ?Sized>(g: &GraphSpec, position: &mut [usize], counts: &mut [u64], rng: &mut R) -> Option<usize> {
    let n = position.len();
    let p = rng.random_range(0..n);
    let mut q = rng.random_range(0..n - 1);
    if q >= p {
        q += 1;
    }
    let (u, v) = (position[p], position[q]);
    if !g.is_adjacent(u, v) {
        return None;
    }
    let (from, to, mover) = if rng.random::<bool>() { (v, u, q) } else { (u, v, p) };
    position[mover] = to;
    counts[from] -= 1;
    counts[to] += 1;
    Some(from)
}

/// The collision dynamics without a stopping rule, recording `n / N` at
/// step 0 and every `record_every` steps.
pub fn run_compromise_process<R: Rng + ?Sized>(
    g: &GraphSpec,
    n0: &OccupationVector,
    steps: u64,
    record_every: u64,
    rng: &mut R,
) -> Result<Vec<TrajectoryPoint>> {
    check_occupation(g, n0)?;
    if record_every == 0 {
        return Err(Error::InvalidParameter("record_every must be at least 1".into()));
    }
    let total = n0.total();
    let dt = time_per_step(total);
    let mut position = positions_of(n0);
    let mut counts = n0.counts().to_vec();
    let record = |step: u64, counts: &[u64]| TrajectoryPoint {
        step,
        time: step as f64 * dt,
        x: counts.iter().map(|&c| c as f64 / total as f64).collect(),
    };
    let mut out = vec![record(0, &counts)];
    for step in 1..=steps {
        if total >= 2 {
            compromise_step(g, &mut position, &mut counts, rng);
        }
        if step % record_every == 0 {
            out.push(record(step, &counts));
        }
    }
    Ok(out)
}

/// Diffusion time until the occupied set is independent, or `None` if that
/// takes more than `max_steps` steps.
pub fn compromise_absorption_time<R: Rng + ?Sized>(
    g: &GraphSpec,
    n0: &OccupationVector,
    max_steps: u64,
    rng: &mut R,
) -> Result<Option<f64>> {
    check_occupation(g, n0)?;
    let total = n0.total();
    let mut position = positions_of(n0);
    let mut counts = n0.counts().to_vec();
    if !has_adjacent_pair(g, &counts) {
        return Ok(Some(0.0));
    }
    for step in 1..=max_steps {
        if compromise_step(g, &mut position, &mut counts, rng).is_some() && !has_adjacent_pair(g, &counts) {
            return Ok(Some(step as f64 * time_per_step(total)));
        }
    }
    Ok(None)
}
