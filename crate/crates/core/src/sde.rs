//! Euler–Maruyama simulation of the simplex diffusion, with and without the
//! linear drift, used to cross-check the exact modules.

use std::collections::BTreeMap;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{is_independent_set, GraphSpec, VertexSet};
use crate::simplex::SimplexPoint;
use crate::stats::{stream_rng, Welford};

pub const DEFAULT_DT: f64 = 1e-4;
/// Coordinates at or below this are "gone" in a support profile.
pub const DEFAULT_SUPPORT_EPS: f64 = 1e-6;
/// Share of clipped steps above which a report carries a warning.
pub const CLIP_WARNING_FRACTION: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryPolicy {
    /// Negative coordinates are set to zero and stay there.
    AbsorbAtZero,
    /// Negative coordinates are set to zero and the drift may revive them.
    ReflectClip,
}

#[derive(Debug, Clone, Copy)]
pub struct SdeConfig<'g> {
    graph: &'g GraphSpec,
    alpha: f64,
    dt: f64,
    policy: BoundaryPolicy,
}

impl<'g> SdeConfig<'g> {
    /// Step `DEFAULT_DT`; absorbing boundary when `alpha = 0`, clipping
    /// otherwise.
    pub fn new(graph: &'g GraphSpec, alpha: f64) -> Result<Self> {
        let policy = if alpha == 0.0 {
            BoundaryPolicy::AbsorbAtZero
        } else {
            BoundaryPolicy::ReflectClip
        };
        Self::with_options(graph, alpha, DEFAULT_DT, policy)
    }

    pub fn with_options(graph: &'g GraphSpec, alpha: f64, dt: f64, policy: BoundaryPolicy) -> Result<Self> {
        if !(alpha >= 0.0) || !alpha.is_finite() {
            return Err(Error::InvalidParameter(format!("alpha must be non-negative, got {alpha}")));
        }
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::InvalidParameter(format!("dt must be positive, got {dt}")));
        }
        if policy == BoundaryPolicy::AbsorbAtZero && alpha > 0.0 {
            return Err(Error::InvalidParameter("absorb_at_zero needs alpha = 0".into()));
        }
        Ok(SdeConfig {
            graph,
            alpha,
            dt,
            policy,
        })
    }

    pub fn with_dt(self, dt: f64) -> Result<Self> {
        Self::with_options(self.graph, self.alpha, dt, self.policy)
    }

    pub fn graph(&self) -> &'g GraphSpec {
        self.graph
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn boundary_policy(&self) -> BoundaryPolicy {
        self.policy
    }
}

/// Step statistics of one or more paths.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SdeReport {
    pub steps: u64,
    pub clipped_steps: u64,
    /// Largest `|sum x - 1|` removed by renormalising an unclipped step.
    pub max_renormalization: f64,
}

impl SdeReport {
    pub fn clip_fraction(&self) -> f64 {
        if self.steps == 0 {
            0.0
        } else {
            self.clipped_steps as f64 / self.steps as f64
        }
    }

    pub fn warning(&self) -> Option<String> {
        let f = self.clip_fraction();
        (f > CLIP_WARNING_FRACTION).then(|| format!("{:.1}% of steps needed clipping; dt is probably too large", 100.0 * f))
    }

    pub fn merge(&mut self, other: &SdeReport) {
        self.steps += other.steps;
        self.clipped_steps += other.clipped_steps;
        self.max_renormalization = self.max_renormalization.max(other.max_renormalization);
    }
}

struct Stepper<'a> {
    cfg: SdeConfig<'a>,
    edges: Vec<(usize, usize)>,
    x: Vec<f64>,
    dx: Vec<f64>,
    z: Vec<f64>,
    /// Undrifted and the support is independent: nothing can move again.
    settled: bool,
    report: SdeReport,
}

impl<'a> Stepper<'a> {
    fn new(cfg: SdeConfig<'a>, x0: &SimplexPoint) -> Self {
        let mut s = Stepper {
            cfg,
            edges: cfg.graph.edges().collect(),
            x: x0.coords().to_vec(),
            dx: vec![0.0; x0.dim()],
            z: vec![0.0; cfg.graph.edge_count()],
            settled: false,
            report: SdeReport::default(),
        };
        s.settled = s.support_is_frozen();
        s
    }

    fn support_is_frozen(&self) -> bool {
        self.cfg.alpha == 0.0 && !self.edges.iter().any(|&(i, j)| self.x[i] > 0.0 && self.x[j] > 0.0)
    }

    /// Advances by one step; returns whether some coordinate was clipped.
    fn step<R: Rng + ?Sized>(&mut self, rng: &mut R) -> bool {
        if self.settled {
            self.report.steps += 1;
            return false;
        }
        for z in &mut self.z {
            *z = rng.sample(StandardNormal);
        }
        let z = std::mem::take(&mut self.z);
        let clipped = self.step_with(&z);
        self.z = z;
        clipped
    }

    /// One step driven by the standard normals `z`, one per edge.
    fn step_with(&mut self, z: &[f64]) -> bool {
        self.report.steps += 1;
        if self.settled {
            return false;
        }
        let dt = self.cfg.dt;
        let sqrt_dt = dt.sqrt();
        let r = self.x.len() as f64;
        for (d, &xi) in self.dx.iter_mut().zip(&self.x) {
            *d = 0.5 * self.cfg.alpha * (1.0 - r * xi) * dt;
        }
        for (&(i, j), &z) in self.edges.iter().zip(z) {
            let incr = (self.x[i].max(0.0) * self.x[j].max(0.0)).sqrt() * sqrt_dt * z;
            self.dx[i] += incr;
            self.dx[j] -= incr;
        }
        let mut clipped = false;
        let mut sum = 0.0;
        for (xi, d) in self.x.iter_mut().zip(&self.dx) {
            if *xi == 0.0 && self.cfg.policy == BoundaryPolicy::AbsorbAtZero {
                continue;
            }
            *xi += d;
            if *xi <= 0.0 {
                if *xi < 0.0 || self.cfg.policy == BoundaryPolicy::AbsorbAtZero {
                    clipped = true;
                }
                *xi = 0.0;
            }
            sum += *xi;
        }
        if !clipped {
            self.report.max_renormalization = self.report.max_renormalization.max((sum - 1.0).abs());
        }
        for xi in &mut self.x {
            *xi /= sum;
        }
        if clipped {
            self.report.clipped_steps += 1;
            self.settled = self.support_is_frozen();
        }
        clipped
    }

    fn point(&self) -> SimplexPoint {
        SimplexPoint::from_raw(self.x.clone())
    }
}

fn check_start(cfg: &SdeConfig<'_>, x0: &SimplexPoint, t_end: f64) -> Result<()> {
    if x0.dim() != cfg.graph.vertex_count() {
        return Err(Error::DimensionMismatch {
            expected: cfg.graph.vertex_count(),
            found: x0.dim(),
        });
    }
    if !(t_end >= 0.0) || !t_end.is_finite() {
        return Err(Error::InvalidParameter(format!("end time must be non-negative, got {t_end}")));
    }
    Ok(())
}

fn step_count(cfg: &SdeConfig<'_>, t_end: f64) -> u64 {
    (t_end / cfg.dt).round() as u64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SdePath {
    pub times: Vec<f64>,
    pub points: Vec<SimplexPoint>,
    pub report: SdeReport,
}

/// One path on `[0, t_end]`, recording `x0` and every `record_every`-th
/// step, plus the final point.
pub fn simulate_sde<R: Rng + ?Sized>(
    cfg: &SdeConfig<'_>,
    x0: &SimplexPoint,
    t_end: f64,
    record_every: u64,
    rng: &mut R,
) -> Result<SdePath> {
    check_start(cfg, x0, t_end)?;
    if record_every == 0 {
        return Err(Error::InvalidParameter("record_every must be at least 1".into()));
    }
    let steps = step_count(cfg, t_end);
    let mut s = Stepper::new(*cfg, x0);
    let mut times = vec![0.0];
    let mut points = vec![x0.clone()];
    for k in 1..=steps {
        s.step(rng);
        if k % record_every == 0 || k == steps {
            times.push(k as f64 * cfg.dt);
            points.push(s.point());
        }
    }
    Ok(SdePath {
        times,
        points,
        report: s.report,
    })
}

fn merge_runs<T>(runs: Vec<(T, SdeReport)>) -> (Vec<T>, SdeReport) {
    let mut report = SdeReport::default();
    let mut out = Vec::with_capacity(runs.len());
    for (v, r) in runs {
        report.merge(&r);
        out.push(v);
    }
    (out, report)
}

/// Endpoints at `t_end` of `paths` independent paths; path `k` uses stream
/// `k` of `seed`.
pub fn sample_endpoints(
    cfg: &SdeConfig<'_>,
    x0: &SimplexPoint,
    t_end: f64,
    paths: u64,
    seed: u64,
) -> Result<(Vec<SimplexPoint>, SdeReport)> {
    check_start(cfg, x0, t_end)?;
    let steps = step_count(cfg, t_end);
    let runs = (0..paths)
        .into_par_iter()
        .map(|k| {
            let mut rng = stream_rng(seed, k);
            let mut s = Stepper::new(*cfg, x0);
            for _ in 0..steps {
                if s.settled {
                    break;
                }
                s.step(&mut rng);
            }
            (s.point(), s.report)
        })
        .collect();
    Ok(merge_runs(runs))
}

/// Exit times of a face; `None` marks a path still inside at `t_max`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExitSamples {
    pub face: VertexSet,
    pub t_max: f64,
    pub times: Vec<Option<f64>>,
    pub report: SdeReport,
}

impl ExitSamples {
    /// Empirical `P(tau > t)` with its binomial standard error.
    pub fn survival(&self, t: f64) -> (f64, f64) {
        let n = self.times.len() as f64;
        let alive = self.times.iter().filter(|s| s.is_none_or(|tau| tau > t)).count() as f64;
        let p = alive / n;
        (p, (p * (1.0 - p) / n).sqrt())
    }
}

fn check_exit(cfg: &SdeConfig<'_>, x0: &SimplexPoint, face: &VertexSet, t_max: f64) -> Result<()> {
    check_start(cfg, x0, t_max)?;
    if cfg.alpha != 0.0 {
        return Err(Error::Precondition("exit times need the undrifted diffusion".into()));
    }
    if is_independent_set(cfg.graph, face)? {
        return Err(Error::Precondition(format!("face {face} is independent, so it is never left")));
    }
    let support = VertexSet::from_sorted_unchecked(x0.support());
    if &support != face {
        return Err(Error::Precondition(format!("x0 is not strictly inside the face {face}")));
    }
    Ok(())
}

fn has_left(s: &Stepper<'_>, face: &VertexSet) -> bool {
    face.members().iter().any(|&i| s.x[i] == 0.0)
}

/// Monte Carlo exit times of the face `U` for the undrifted diffusion
/// started strictly inside it.
pub fn empirical_exit_time(
    cfg: &SdeConfig<'_>,
    x0: &SimplexPoint,
    face: &VertexSet,
    paths: u64,
    t_max: f64,
    seed: u64,
) -> Result<ExitSamples> {
    check_exit(cfg, x0, face, t_max)?;
    let steps = step_count(cfg, t_max);
    let runs = (0..paths)
        .into_par_iter()
        .map(|k| {
            let mut rng = stream_rng(seed, k);
            let mut s = Stepper::new(*cfg, x0);
            for n in 1..=steps {
                s.step(&mut rng);
                if has_left(&s, face) {
                    return (Some(n as f64 * cfg.dt), s.report);
                }
            }
            (None, s.report)
        })
        .collect();
    let (times, report) = merge_runs(runs);
    Ok(ExitSamples {
        face: face.clone(),
        t_max,
        times,
        report,
    })
}

/// `(prod_{i in U} x_i) |U|^|U| exp(-t |E_U|)`, a lower bound on the
/// survival of the face.
pub fn exit_survival_lower_bound(g: &GraphSpec, x0: &SimplexPoint, face: &VertexSet, t: f64) -> f64 {
    let s = face.len() as f64;
    let c: f64 = face.members().iter().map(|&i| x0[i]).product::<f64>() * s.powf(s);
    c * (-t * g.induced_edge_count(face) as f64).exp()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SupportProfile {
    pub paths: u64,
    pub t_end: f64,
    pub eps: f64,
    #[serde(serialize_with = "counts_as_rows")]
    pub counts: BTreeMap<VertexSet, u64>,
    pub report: SdeReport,
}

/// JSON object keys must be strings, so supports go out as rows.
fn counts_as_rows<S: serde::Serializer>(counts: &BTreeMap<VertexSet, u64>, s: S) -> std::result::Result<S::Ok, S::Error> {
    #[derive(Serialize)]
    struct Row<'a> {
        support: &'a VertexSet,
        count: u64,
    }
    s.collect_seq(counts.iter().map(|(support, &count)| Row { support, count }))
}

impl SupportProfile {
    fn from_endpoints(ends: &[SimplexPoint], t_end: f64, eps: f64, report: SdeReport) -> Self {
        let mut counts = BTreeMap::new();
        for p in ends {
            let set = VertexSet::from_sorted_unchecked((0..p.dim()).filter(|&i| p[i] > eps).collect());
            *counts.entry(set).or_insert(0) += 1;
        }
        SupportProfile {
            paths: ends.len() as u64,
            t_end,
            eps,
            counts,
            report,
        }
    }

    /// Share of paths ending with support `set`, with its standard error.
    pub fn frequency(&self, set: &VertexSet) -> (f64, f64) {
        let n = self.paths as f64;
        let p = self.counts.get(set).copied().unwrap_or(0) as f64 / n;
        (p, (p * (1.0 - p) / n).sqrt())
    }
}

/// How often each support `{i : x_i(t_end) > eps}` occurs.
pub fn empirical_support_profile(
    cfg: &SdeConfig<'_>,
    x0: &SimplexPoint,
    t_end: f64,
    paths: u64,
    eps: f64,
    seed: u64,
) -> Result<SupportProfile> {
    if cfg.alpha != 0.0 {
        return Err(Error::Precondition("support profiles need the undrifted diffusion".into()));
    }
    let (ends, report) = sample_endpoints(cfg, x0, t_end, paths, seed)?;
    Ok(SupportProfile::from_endpoints(&ends, t_end, eps, report))
}

/// One result at step `dt` and one at `dt / 2`. Both are driven by the same
/// Brownian path, so their difference reflects the step size rather than
/// sampling noise.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepPair<T> {
    pub coarse: T,
    pub fine: T,
}

struct CoupledPath<'a> {
    coarse: Stepper<'a>,
    fine: Stepper<'a>,
    coarse_exit: Option<f64>,
    fine_exit: Option<f64>,
}

/// Runs `steps` coarse steps alongside `2 steps` fine ones; each coarse
/// increment is the normalised sum of the two fine increments it spans.
/// With a `face`, each run stops once it leaves it.
fn run_coupled<'a, R: Rng + ?Sized>(
    cfg: &SdeConfig<'a>,
    x0: &SimplexPoint,
    steps: u64,
    face: Option<&VertexSet>,
    rng: &mut R,
) -> CoupledPath<'a> {
    let half = SdeConfig { dt: cfg.dt / 2.0, ..*cfg };
    let mut p = CoupledPath {
        coarse: Stepper::new(*cfg, x0),
        fine: Stepper::new(half, x0),
        coarse_exit: None,
        fine_exit: None,
    };
    let m = cfg.graph.edge_count();
    let (mut z1, mut z2, mut zc) = (vec![0.0; m], vec![0.0; m], vec![0.0; m]);
    let left = |s: &Stepper<'_>| face.is_some_and(|f| has_left(s, f));
    for k in 1..=steps {
        let coarse_done = p.coarse.settled || p.coarse_exit.is_some();
        let fine_done = p.fine.settled || p.fine_exit.is_some();
        if coarse_done && fine_done {
            break;
        }
        for e in 0..m {
            z1[e] = rng.sample(StandardNormal);
            z2[e] = rng.sample(StandardNormal);
            zc[e] = (z1[e] + z2[e]) * std::f64::consts::FRAC_1_SQRT_2;
        }
        if !fine_done {
            p.fine.step_with(&z1);
            if left(&p.fine) {
                p.fine_exit = Some((k as f64 - 0.5) * cfg.dt);
            } else {
                p.fine.step_with(&z2);
                if left(&p.fine) {
                    p.fine_exit = Some(k as f64 * cfg.dt);
                }
            }
        }
        if !coarse_done {
            p.coarse.step_with(&zc);
            if left(&p.coarse) {
                p.coarse_exit = Some(k as f64 * cfg.dt);
            }
        }
    }
    p
}

fn split_pairs<T>(runs: Vec<((T, SdeReport), (T, SdeReport))>) -> StepPair<(Vec<T>, SdeReport)> {
    let (coarse, fine): (Vec<_>, Vec<_>) = runs.into_iter().unzip();
    StepPair {
        coarse: merge_runs(coarse),
        fine: merge_runs(fine),
    }
}

/// `sample_endpoints` at `dt` and `dt / 2` on shared Brownian paths.
pub fn coupled_endpoints(
    cfg: &SdeConfig<'_>,
    x0: &SimplexPoint,
    t_end: f64,
    paths: u64,
    seed: u64,
) -> Result<StepPair<(Vec<SimplexPoint>, SdeReport)>> {
    check_start(cfg, x0, t_end)?;
    let steps = step_count(cfg, t_end);
    let runs = (0..paths)
        .into_par_iter()
        .map(|k| {
            let p = run_coupled(cfg, x0, steps, None, &mut stream_rng(seed, k));
            ((p.coarse.point(), p.coarse.report), (p.fine.point(), p.fine.report))
        })
        .collect();
    Ok(split_pairs(runs))
}

/// `empirical_support_profile` at `dt` and `dt / 2` on shared Brownian
/// paths.
pub fn coupled_support_profile(
    cfg: &SdeConfig<'_>,
    x0: &SimplexPoint,
    t_end: f64,
    paths: u64,
    eps: f64,
    seed: u64,
) -> Result<StepPair<SupportProfile>> {
    if cfg.alpha != 0.0 {
        return Err(Error::Precondition("support profiles need the undrifted diffusion".into()));
    }
    let pair = coupled_endpoints(cfg, x0, t_end, paths, seed)?;
    Ok(StepPair {
        coarse: SupportProfile::from_endpoints(&pair.coarse.0, t_end, eps, pair.coarse.1),
        fine: SupportProfile::from_endpoints(&pair.fine.0, t_end, eps, pair.fine.1),
    })
}

/// `empirical_exit_time` at `dt` and `dt / 2` on shared Brownian paths.
pub fn coupled_exit_time(
    cfg: &SdeConfig<'_>,
    x0: &SimplexPoint,
    face: &VertexSet,
    paths: u64,
    t_max: f64,
    seed: u64,
) -> Result<StepPair<ExitSamples>> {
    check_exit(cfg, x0, face, t_max)?;
    let steps = step_count(cfg, t_max);
    let runs = (0..paths)
        .into_par_iter()
        .map(|k| {
            let p = run_coupled(cfg, x0, steps, Some(face), &mut stream_rng(seed, k));
            ((p.coarse_exit, p.coarse.report), (p.fine_exit, p.fine.report))
        })
        .collect();
    let pair = split_pairs(runs);
    let wrap = |(times, report): (Vec<Option<f64>>, SdeReport)| ExitSamples {
        face: face.clone(),
        t_max,
        times,
        report,
    };
    Ok(StepPair {
        coarse: wrap(pair.coarse),
        fine: wrap(pair.fine),
    })
}

/// Per-coordinate mean and second moment over endpoints.
pub fn endpoint_moments(points: &[SimplexPoint]) -> Vec<(Welford, Welford)> {
    let r = points.first().map_or(0, |p| p.dim());
    let mut acc = vec![(Welford::new(), Welford::new()); r];
    for p in points {
        for (i, (m1, m2)) in acc.iter_mut().enumerate() {
            m1.push(p[i]);
            m2.push(p[i] * p[i]);
        }
    }
    acc
}
