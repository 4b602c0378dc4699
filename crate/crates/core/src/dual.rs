//! The dual Markov chains on multi-indices: the collision chain and the
//! collision chain with erasure, their rates and killing functionals, exact
//! transition laws and event-driven path simulation.

use std::collections::{BTreeMap, HashMap, VecDeque};

use rand::Rng;
use rand_distr::Exp1;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::GraphSpec;
use crate::linalg::{expmv, SparseMatrix};
use crate::partition::PartitionVector;
use crate::stats::stream_rng;

/// Largest reachable state space the exact solver will enumerate.
pub const STATE_LIMIT: usize = 100_000;

/// Default cap on simulated events per path.
pub const DEFAULT_EVENT_BUDGET: u64 = 10_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChainVariant {
    Collision,
    CollisionWithErasure,
}

/// A chain on a graph, with erasure at rate `alpha * a_i / 2` when drifted.
#[derive(Debug, Clone, Copy)]
pub struct ChainConfig<'g> {
    graph: &'g GraphSpec,
    alpha: f64,
    variant: ChainVariant,
}

impl<'g> ChainConfig<'g> {
    pub fn new(graph: &'g GraphSpec, alpha: f64, variant: ChainVariant) -> Result<Self> {
        if !alpha.is_finite() || alpha < 0.0 {
            return Err(Error::InvalidParameter(format!("alpha must be finite and non-negative, got {alpha}")));
        }
        match variant {
            ChainVariant::CollisionWithErasure if alpha == 0.0 => Err(Error::InvalidParameter(
                "the chain with erasure needs alpha > 0".into(),
            )),
            ChainVariant::Collision if alpha != 0.0 => Err(Error::InvalidParameter(
                "the collision chain has no drift; alpha must be 0".into(),
            )),
            _ => Ok(ChainConfig { graph, alpha, variant }),
        }
    }

    pub fn undrifted(graph: &'g GraphSpec) -> Self {
        ChainConfig {
            graph,
            alpha: 0.0,
            variant: ChainVariant::Collision,
        }
    }

    pub fn drifted(graph: &'g GraphSpec, alpha: f64) -> Result<Self> {
        Self::new(graph, alpha, ChainVariant::CollisionWithErasure)
    }

    /// Drifted when `alpha > 0`, undrifted when it is zero.
    pub fn for_alpha(graph: &'g GraphSpec, alpha: f64) -> Result<Self> {
        if alpha == 0.0 {
            Ok(Self::undrifted(graph))
        } else {
            Self::drifted(graph, alpha)
        }
    }

    pub fn graph(&self) -> &'g GraphSpec {
        self.graph
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn variant(&self) -> ChainVariant {
        self.variant
    }

    pub fn is_drifted(&self) -> bool {
        self.variant == ChainVariant::CollisionWithErasure
    }

    fn check(&self, a: &PartitionVector) -> Result<()> {
        if a.len() != self.graph.vertex_count() {
            return Err(Error::DimensionMismatch {
                expected: self.graph.vertex_count(),
                found: a.len(),
            });
        }
        Ok(())
    }
}

/// Outgoing transitions of one state.
#[derive(Debug, Clone, PartialEq)]
pub struct RateRow {
    pub moves: Vec<(PartitionVector, f64)>,
    pub total_rate: f64,
}

impl RateRow {
    pub fn diagonal(&self) -> f64 {
        -self.total_rate
    }
}

/// Collision moves first (by source vertex, then neighbour), then erasures.
pub fn rate_row(cfg: &ChainConfig<'_>, a: &PartitionVector) -> Result<RateRow> {
    cfg.check(a)?;
    let g = cfg.graph;
    let mut moves = Vec::new();
    let mut total = 0.0;
    for i in 0..g.vertex_count() {
        let ai = a[i] as f64;
        if a[i] >= 2 {
            let rate = ai * (ai - 1.0) / 2.0;
            for &j in g.neighbours(i) {
                moves.push((a.moved(i, j), rate));
                total += rate;
            }
        }
    }
    if cfg.is_drifted() {
        for i in 0..g.vertex_count() {
            if a[i] >= 1 {
                let rate = cfg.alpha * a[i] as f64 / 2.0;
                moves.push((a.erased(i), rate));
                total += rate;
            }
        }
    }
    Ok(RateRow { moves, total_rate: total })
}

/// The killing rate `k(a)`, plus `alpha (r-1) |a| / 2` for the drifted chain.
pub fn killing_rate(cfg: &ChainConfig<'_>, a: &PartitionVector) -> Result<f64> {
    cfg.check(a)?;
    Ok(killing_of(cfg, a.counts()))
}

fn killing_of(cfg: &ChainConfig<'_>, a: &[u32]) -> f64 {
    let g = cfg.graph;
    let mut k = 0.0;
    for (i, &ai) in a.iter().enumerate() {
        if ai == 0 {
            continue;
        }
        let ai = ai as f64;
        let neighbour_mass: u32 = g.neighbours(i).iter().map(|&j| a[j]).sum();
        k += ai * neighbour_mass as f64 / 2.0 - g.degree(i) as f64 * ai * (ai - 1.0) / 2.0;
    }
    if cfg.is_drifted() {
        let order: u32 = a.iter().sum();
        k += cfg.alpha * (g.vertex_count() as f64 - 1.0) * order as f64 / 2.0;
    }
    k
}

/// True when no transition leaves `a`.
pub fn is_absorbing(cfg: &ChainConfig<'_>, a: &PartitionVector) -> bool {
    if cfg.is_drifted() {
        a.order() == 0
    } else {
        a.is_binary()
    }
}

/// Event-driven stepping with the interval layout of one slot per
/// (vertex, neighbour) pair followed by one erasure slot per vertex.
pub(crate) struct Kernel<'g> {
    cfg: ChainConfig<'g>,
    /// `(i, Some(j))` for a collision slot, `(i, None)` for erasure.
    slots: Vec<(usize, Option<usize>)>,
    cumulative: Vec<f64>,
    pub(crate) state: Vec<u32>,
}

pub(crate) struct Event {
    /// Killing rate of that state.
    pub killing: f64,
    pub slot: usize,
}

impl<'g> Kernel<'g> {
    pub(crate) fn new(cfg: ChainConfig<'g>) -> Self {
        let g = cfg.graph;
        let mut slots = Vec::with_capacity(2 * g.edge_count() + g.vertex_count());
        for i in 0..g.vertex_count() {
            for &j in g.neighbours(i) {
                slots.push((i, Some(j)));
            }
        }
        if cfg.is_drifted() {
            for i in 0..g.vertex_count() {
                slots.push((i, None));
            }
        }
        let cumulative = vec![0.0; slots.len()];
        Kernel {
            cfg,
            slots,
            cumulative,
            state: vec![0; g.vertex_count()],
        }
    }

    pub(crate) fn reset(&mut self, a: &[u32]) {
        self.state.copy_from_slice(a);
    }

    /// Rebuilds the interval weights; returns `(total rate, killing rate)`.
    fn weigh(&mut self) -> (f64, f64) {
        let a = &self.state;
        let mut acc = 0.0;
        for (slot, &(i, j)) in self.slots.iter().enumerate() {
            let ai = a[i] as f64;
            acc += match j {
                Some(_) => ai * (ai - 1.0),
                None => self.cfg.alpha * ai,
            };
            self.cumulative[slot] = acc;
        }
        (acc / 2.0, killing_of(&self.cfg, a))
    }

    /// Draws the holding time and the next move without applying it.
    /// `None` when the current state is absorbing.
    pub(crate) fn draw<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Option<(f64, Event)> {
        let (rate, killing) = self.weigh();
        if rate <= 0.0 {
            return None;
        }
        let hold: f64 = rng.sample::<f64, _>(Exp1) / rate;
        let total = *self.cumulative.last().unwrap();
        let u = rng.random::<f64>() * total;
        let slot = self
            .cumulative
            .iter()
            .position(|&c| u < c)
            .unwrap_or(self.slots.len() - 1);
        // a zero-width slot can only be hit through rounding at the top end
        let slot = self.skip_empty(slot);
        Some((hold, Event { killing, slot }))
    }

    fn skip_empty(&self, slot: usize) -> usize {
        let width = |s: usize| self.cumulative[s] - if s == 0 { 0.0 } else { self.cumulative[s - 1] };
        if width(slot) > 0.0 {
            return slot;
        }
        (0..self.slots.len()).rev().find(|&s| width(s) > 0.0).unwrap()
    }

    pub(crate) fn apply(&mut self, slot: usize) {
        let (i, j) = self.slots[slot];
        self.state[i] -= 1;
        if let Some(j) = j {
            self.state[j] += 1;
        }
    }
}

/// When a simulated path stops.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Horizon {
    Time(f64),
    Absorption,
}

/// A simulated trajectory with its per-segment killing increments.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChainPath {
    pub states: Vec<PartitionVector>,
    pub holding_times: Vec<f64>,
    pub killing_increments: Vec<f64>,
    pub seed: u64,
    pub stream: u64,
}

/// One line of a path export.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathSegment {
    pub state: PartitionVector,
    pub holding_time: Option<f64>,
    pub killing_increment: Option<f64>,
}

impl ChainPath {
    pub fn event_count(&self) -> usize {
        self.states.len() - 1
    }

    pub fn final_state(&self) -> &PartitionVector {
        self.states.last().expect("a path holds its initial state")
    }

    /// Total simulated time.
    pub fn duration(&self) -> f64 {
        self.holding_times.iter().sum()
    }

    /// `int_0^T k(a(s)) ds`.
    pub fn killing_integral(&self) -> f64 {
        self.killing_increments.iter().sum()
    }

    pub fn segments(&self) -> Vec<PathSegment> {
        self.states
            .iter()
            .enumerate()
            .map(|(k, s)| PathSegment {
                state: s.clone(),
                holding_time: self.holding_times.get(k).copied(),
                killing_increment: self.killing_increments.get(k).copied(),
            })
            .collect()
    }
}

/// Simulates one path on random stream `stream` of `seed`.
pub fn simulate_path(
    cfg: &ChainConfig<'_>,
    a0: &PartitionVector,
    horizon: Horizon,
    seed: u64,
    stream: u64,
) -> Result<ChainPath> {
    let mut rng = stream_rng(seed, stream);
    let mut path = simulate_path_with(cfg, a0, horizon, &mut rng, DEFAULT_EVENT_BUDGET)?;
    path.seed = seed;
    path.stream = stream;
    Ok(path)
}

/// Path simulation driven by a caller-supplied generator.
pub fn simulate_path_with<R: Rng + ?Sized>(
    cfg: &ChainConfig<'_>,
    a0: &PartitionVector,
    horizon: Horizon,
    rng: &mut R,
    budget: u64,
) -> Result<ChainPath> {
    cfg.check(a0)?;
    match horizon {
        Horizon::Time(t) if !(t > 0.0) || !t.is_finite() => {
            return Err(Error::InvalidParameter(format!("horizon must be positive, got {t}")));
        }
        Horizon::Absorption if !cfg.is_drifted() && a0.order() as usize > cfg.graph.vertex_count() => {
            return Err(Error::CannotAbsorb(a0.to_string()));
        }
        _ => {}
    }
    let mut kernel = Kernel::new(*cfg);
    kernel.reset(a0.counts());
    let mut path = ChainPath {
        states: vec![a0.clone()],
        holding_times: Vec::new(),
        killing_increments: Vec::new(),
        seed: 0,
        stream: 0,
    };
    let mut elapsed = 0.0;
    let mut events = 0u64;
    loop {
        let drawn = kernel.draw(rng);
        let Some((hold, event)) = drawn else {
            if let Horizon::Time(t) = horizon {
                let rest = t - elapsed;
                path.holding_times.push(rest);
                path.killing_increments.push(killing_of(cfg, &kernel.state) * rest);
            }
            return Ok(path);
        };
        if let Horizon::Time(t) = horizon {
            if elapsed + hold >= t {
                let rest = t - elapsed;
                path.holding_times.push(rest);
                path.killing_increments.push(event.killing * rest);
                return Ok(path);
            }
        }
        if events == budget {
            return Err(Error::EventBudgetExceeded { budget });
        }
        events += 1;
        elapsed += hold;
        path.holding_times.push(hold);
        path.killing_increments.push(event.killing * hold);
        kernel.apply(event.slot);
        path.states.push(PartitionVector::new(kernel.state.clone()));
    }
}

/// State of the chain at time `t`, without recording the path.
pub fn sample_state<R: Rng + ?Sized>(cfg: &ChainConfig<'_>, a0: &PartitionVector, t: f64, rng: &mut R) -> Result<PartitionVector> {
    cfg.check(a0)?;
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::InvalidParameter(format!("time must be non-negative, got {t}")));
    }
    let mut kernel = Kernel::new(*cfg);
    kernel.reset(a0.counts());
    let mut elapsed = 0.0;
    let mut events = 0u64;
    while let Some((hold, event)) = kernel.draw(rng) {
        elapsed += hold;
        if elapsed >= t {
            break;
        }
        if events == DEFAULT_EVENT_BUDGET {
            return Err(Error::EventBudgetExceeded {
                budget: DEFAULT_EVENT_BUDGET,
            });
        }
        events += 1;
        kernel.apply(event.slot);
    }
    Ok(PartitionVector::new(kernel.state))
}

/// Absorption time, event count and absorbing state, without recording
/// the path.
pub fn sample_absorption<R: Rng + ?Sized>(
    cfg: &ChainConfig<'_>,
    a0: &PartitionVector,
    rng: &mut R,
) -> Result<(f64, u64, PartitionVector)> {
    cfg.check(a0)?;
    if !cfg.is_drifted() && a0.order() as usize > cfg.graph.vertex_count() {
        return Err(Error::CannotAbsorb(a0.to_string()));
    }
    let mut kernel = Kernel::new(*cfg);
    kernel.reset(a0.counts());
    let mut elapsed = 0.0;
    let mut events = 0u64;
    while let Some((hold, event)) = kernel.draw(rng) {
        if events == DEFAULT_EVENT_BUDGET {
            return Err(Error::EventBudgetExceeded {
                budget: DEFAULT_EVENT_BUDGET,
            });
        }
        elapsed += hold;
        events += 1;
        kernel.apply(event.slot);
    }
    Ok((elapsed, events, PartitionVector::new(kernel.state)))
}

/// Breadth-first enumeration of the states reachable from `a0`.
pub fn reachable_states(cfg: &ChainConfig<'_>, a0: &PartitionVector) -> Result<Vec<PartitionVector>> {
    cfg.check(a0)?;
    let mut seen: HashMap<PartitionVector, usize> = HashMap::new();
    let mut order = vec![a0.clone()];
    seen.insert(a0.clone(), 0);
    let mut queue = VecDeque::from([a0.clone()]);
    while let Some(a) = queue.pop_front() {
        for (b, _) in rate_row(cfg, &a)?.moves {
            if !seen.contains_key(&b) {
                if order.len() == STATE_LIMIT {
                    return Err(Error::TooLarge {
                        what: "reachable state space",
                        size: STATE_LIMIT as u128 + 1,
                        limit: STATE_LIMIT as u128,
                    });
                }
                seen.insert(b.clone(), order.len());
                order.push(b.clone());
                queue.push_back(b);
            }
        }
    }
    Ok(order)
}

/// `P_{a0}(a(t) = b)` for every reachable `b`, via the matrix exponential of
/// the generator restricted to the reachable set.
pub fn transition_probabilities_exact(
    cfg: &ChainConfig<'_>,
    a0: &PartitionVector,
    t: f64,
) -> Result<BTreeMap<PartitionVector, f64>> {
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::InvalidParameter(format!("time must be finite and non-negative, got {t}")));
    }
    let states = reachable_states(cfg, a0)?;
    let index: HashMap<&PartitionVector, usize> = states.iter().enumerate().map(|(k, a)| (a, k)).collect();
    let mut triplets = Vec::new();
    for (k, a) in states.iter().enumerate() {
        let row = rate_row(cfg, a)?;
        // transposed generator: column k holds the rates out of state k
        for (b, rate) in &row.moves {
            triplets.push((index[b], k, *rate));
        }
        triplets.push((k, k, row.diagonal()));
    }
    let qt = SparseMatrix::from_triplets(states.len(), triplets);
    let mut start = vec![0.0; states.len()];
    start[0] = 1.0;
    let p = expmv(&qt, t, &start);
    Ok(states.into_iter().zip(p).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LongRun {
    /// Absorbed into a 0/1 vector.
    AbsorbsIntoBinary,
    /// Converges to the uniform law on positive partitions of `|a0|`.
    UniformOnPositivePartitions,
}

pub fn classify_long_run(cfg: &ChainConfig<'_>, a0: &PartitionVector) -> Result<LongRun> {
    if cfg.is_drifted() {
        return Err(Error::WrongVariant { expected: "collision" });
    }
    cfg.check(a0)?;
    if a0.order() as usize <= cfg.graph.vertex_count() {
        Ok(LongRun::AbsorbsIntoBinary)
    } else {
        Ok(LongRun::UniformOnPositivePartitions)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{self, is_independent_set, VertexSet};
    use crate::partition::enumerate_partitions;
    use proptest::prelude::*;

    fn pv(v: &[u32]) -> PartitionVector {
        PartitionVector::new(v.to_vec())
    }

    #[test]
    fn sampled_states_follow_exact_law() {
        let g = graph::star(2).unwrap();
        let cfg = ChainConfig::undrifted(&g);
        let a0 = pv(&[2, 1, 1]);
        let exact = transition_probabilities_exact(&cfg, &a0, 0.4).unwrap();
        let n = 40_000;
        let mut counts: BTreeMap<PartitionVector, u64> = BTreeMap::new();
        let mut rng = stream_rng(31, 0);
        for _ in 0..n {
            *counts.entry(sample_state(&cfg, &a0, 0.4, &mut rng).unwrap()).or_insert(0) += 1;
        }
        for (state, p) in &exact {
            let f = counts.get(state).copied().unwrap_or(0) as f64 / n as f64;
            let se = (p * (1.0 - p) / n as f64).sqrt();
            assert!((f - p).abs() < 4.0 * se + 1e-9, "{state}: {f} vs {p}");
        }
        assert!(counts.keys().all(|s| exact.contains_key(s)));
    }

    #[test]
    fn drifted_absorption_time_mean() {
        let g = graph::cycle(4).unwrap();
        let alpha = 1.5;
        let cfg = ChainConfig::drifted(&g, alpha).unwrap();
        let a0 = pv(&[2, 0, 1, 0]);
        let mut rng = stream_rng(4, 0);
        let mut sum = 0.0;
        let n = 20_000;
        for _ in 0..n {
            let (t, events, end) = sample_absorption(&cfg, &a0, &mut rng).unwrap();
            assert_eq!(end.order(), 0);
            assert!(events >= 3);
            sum += t;
        }
        // erasures fire at total rate alpha |a| / 2 whatever the layout
        let target = 2.0 / alpha * (1.0 + 0.5 + 1.0 / 3.0);
        assert!((sum / n as f64 / target - 1.0).abs() < 0.03);
        assert!(matches!(
            sample_absorption(&ChainConfig::undrifted(&g), &pv(&[3, 0, 2, 0]), &mut rng),
            Err(Error::CannotAbsorb(_))
        ));
    }

    fn sorted(mut moves: Vec<(PartitionVector, f64)>) -> Vec<(PartitionVector, f64)> {
        moves.sort_by(|a, b| a.0.cmp(&b.0));
        moves
    }

    #[test]
    fn cycle_rate_rows() {
        let c4 = graph::cycle(4).unwrap();
        let cfg = ChainConfig::undrifted(&c4);
        let row = rate_row(&cfg, &pv(&[0, 2, 0, 1])).unwrap();
        assert_eq!(
            sorted(row.moves),
            vec![(pv(&[0, 1, 1, 1]), 1.0), (pv(&[1, 1, 0, 1]), 1.0)]
        );
        assert_eq!(row.total_rate, 2.0);
        assert!(rate_row(&cfg, &pv(&[1, 0, 1, 1])).unwrap().moves.is_empty());

        let alpha = 0.7;
        let drifted = ChainConfig::drifted(&c4, alpha).unwrap();
        let row = rate_row(&drifted, &pv(&[1, 1, 0, 0])).unwrap();
        assert_eq!(
            sorted(row.moves),
            vec![(pv(&[0, 1, 0, 0]), alpha / 2.0), (pv(&[1, 0, 0, 0]), alpha / 2.0)]
        );
    }

    #[test]
    fn cycle_killing_rates() {
        let c4 = graph::cycle(4).unwrap();
        let cfg = ChainConfig::undrifted(&c4);
        assert_eq!(killing_rate(&cfg, &pv(&[0, 2, 0, 1])).unwrap(), -2.0);
        assert_eq!(killing_rate(&cfg, &pv(&[1, 1, 0, 1])).unwrap(), 2.0);
        assert_eq!(killing_rate(&cfg, &pv(&[0, 1, 1, 1])).unwrap(), 2.0);
        let alpha = 1.3;
        let drifted = ChainConfig::drifted(&c4, alpha).unwrap();
        assert!((killing_rate(&drifted, &pv(&[1, 1, 0, 0])).unwrap() - (1.0 + 3.0 * alpha)).abs() < 1e-15);
        assert!((killing_rate(&drifted, &pv(&[1, 0, 0, 0])).unwrap() - 1.5 * alpha).abs() < 1e-15);
    }

    #[test]
    fn config_validation() {
        let k2 = graph::complete(2).unwrap();
        assert!(ChainConfig::drifted(&k2, 0.0).is_err());
        assert!(ChainConfig::new(&k2, 1.0, ChainVariant::Collision).is_err());
        assert!(ChainConfig::drifted(&k2, f64::NAN).is_err());
        let cfg = ChainConfig::undrifted(&k2);
        assert!(matches!(rate_row(&cfg, &pv(&[1, 1, 1])), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn star_fourth_order_transitions() {
        let s2 = graph::star(2).unwrap();
        let cfg = ChainConfig::undrifted(&s2);
        let a0 = pv(&[2, 1, 1]);
        for t in [0.0, 0.05, 0.4, 1.0, 3.0] {
            let p = transition_probabilities_exact(&cfg, &a0, t).unwrap();
            let decay = (-3.0 * t).exp();
            assert!((p[&a0] - (1.0 / 3.0 + 2.0 / 3.0 * decay)).abs() < 1e-12);
            assert!((p[&pv(&[1, 2, 1])] - (1.0 / 3.0 - decay / 3.0)).abs() < 1e-12);
            assert!((p[&pv(&[1, 1, 2])] - (1.0 / 3.0 - decay / 3.0)).abs() < 1e-12);
        }
    }

    #[test]
    fn exact_law_converges_to_uniform() {
        for g in [graph::cycle(4).unwrap(), graph::star(2).unwrap(), graph::path(4).unwrap()] {
            let r = g.vertex_count();
            let cfg = ChainConfig::undrifted(&g);
            let mut a0 = vec![0u32; r];
            a0[0] = r as u32 + 1;
            let p = transition_probabilities_exact(&cfg, &pv(&a0), 200.0).unwrap();
            let positive = enumerate_partitions(r as u32 + 1, r, true).unwrap();
            for a in &positive {
                assert!((p[a] - 1.0 / positive.len() as f64).abs() < 1e-9, "{}", g.label());
            }
            let total: f64 = p.values().sum();
            assert!((total - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn drifted_law_ends_at_zero() {
        let c4 = graph::cycle(4).unwrap();
        let cfg = ChainConfig::drifted(&c4, 1.0).unwrap();
        let p = transition_probabilities_exact(&cfg, &pv(&[2, 0, 1, 0]), 60.0).unwrap();
        assert!((p[&pv(&[0, 0, 0, 0])] - 1.0).abs() < 1e-10);
    }

    #[test]
    fn time_zero_is_point_mass() {
        let c4 = graph::cycle(4).unwrap();
        let cfg = ChainConfig::undrifted(&c4);
        let a0 = pv(&[3, 0, 1, 0]);
        let p = transition_probabilities_exact(&cfg, &a0, 0.0).unwrap();
        for (a, v) in p {
            assert_eq!(v, if a == a0 { 1.0 } else { 0.0 });
        }
    }

    #[test]
    fn absorbing_start_has_no_events() {
        let c4 = graph::cycle(4).unwrap();
        let cfg = ChainConfig::undrifted(&c4);
        let a0 = pv(&[1, 1, 0, 1]);
        let path = simulate_path(&cfg, &a0, Horizon::Absorption, 3, 0).unwrap();
        assert_eq!(path.states, vec![a0.clone()]);
        assert!(path.holding_times.is_empty());
        let path = simulate_path(&cfg, &a0, Horizon::Time(2.0), 3, 0).unwrap();
        assert_eq!(path.states.len(), 1);
        assert_eq!(path.holding_times, vec![2.0]);
        assert_eq!(path.killing_increments, vec![2.0 * killing_rate(&cfg, &a0).unwrap()]);
    }

    #[test]
    fn undrifted_overfull_start_cannot_absorb() {
        let c4 = graph::cycle(4).unwrap();
        let cfg = ChainConfig::undrifted(&c4);
        assert!(matches!(
            simulate_path(&cfg, &pv(&[5, 0, 0, 0]), Horizon::Absorption, 1, 0),
            Err(Error::CannotAbsorb(_))
        ));
    }

    #[test]
    fn paths_are_reproducible() {
        let k4 = graph::complete(4).unwrap();
        let cfg = ChainConfig::drifted(&k4, 0.5).unwrap();
        let a0 = pv(&[3, 1, 0, 2]);
        let p = simulate_path(&cfg, &a0, Horizon::Absorption, 99, 4).unwrap();
        let q = simulate_path(&cfg, &a0, Horizon::Absorption, 99, 4).unwrap();
        assert_eq!(p, q);
        assert_eq!(p.final_state().order(), 0);
        assert_eq!(p.states.len(), p.holding_times.len() + 1);
        let truncated = simulate_path(&cfg, &a0, Horizon::Time(0.3), 99, 4).unwrap();
        assert_eq!(truncated.states.len(), truncated.holding_times.len());
        assert!((truncated.duration() - 0.3).abs() < 1e-12);
    }

    #[test]
    fn first_collision_leaves_maximal_face() {
        // {1,3} is a maximal independent set of the 4-cycle
        let c4 = graph::cycle(4).unwrap();
        let cfg = ChainConfig::undrifted(&c4);
        let face = VertexSet::new(vec![0, 2]).unwrap();
        for stream in 0..200 {
            let path = simulate_path(&cfg, &pv(&[3, 0, 1, 0]), Horizon::Time(5.0), 8, stream).unwrap();
            if let Some(next) = path.states.get(1) {
                assert!(!next.support().is_subset_of(&face));
            }
        }
    }

    #[test]
    fn long_run_classification() {
        let c4 = graph::cycle(4).unwrap();
        let cfg = ChainConfig::undrifted(&c4);
        assert_eq!(classify_long_run(&cfg, &pv(&[1, 1, 1, 1])).unwrap(), LongRun::AbsorbsIntoBinary);
        assert_eq!(
            classify_long_run(&cfg, &pv(&[2, 1, 1, 1])).unwrap(),
            LongRun::UniformOnPositivePartitions
        );
        let drifted = ChainConfig::drifted(&c4, 1.0).unwrap();
        assert_eq!(
            classify_long_run(&drifted, &pv(&[1, 0, 0, 0])),
            Err(Error::WrongVariant { expected: "collision" })
        );
    }

    fn arb_graph() -> impl Strategy<Value = GraphSpec> {
        prop_oneof![
            (2usize..6).prop_map(|r| graph::complete(r).unwrap()),
            (3usize..7).prop_map(|r| graph::cycle(r).unwrap()),
            (2usize..5).prop_map(|k| graph::star(k).unwrap()),
            (2usize..6).prop_map(|r| graph::path(r).unwrap()),
            Just(graph::complete_bipartite(3, 2).unwrap()),
        ]
    }

    fn arb_config() -> impl Strategy<Value = (GraphSpec, Vec<u32>, f64)> {
        arb_graph().prop_flat_map(|g| {
            let r = g.vertex_count();
            (Just(g), prop::collection::vec(0u32..4, r), prop_oneof![Just(0.0), 0.1f64..3.0])
        })
    }

    proptest! {
        #[test]
        fn rate_totals((g, a, alpha) in arb_config()) {
            let cfg = ChainConfig::for_alpha(&g, alpha).unwrap();
            let a = PartitionVector::new(a);
            let row = rate_row(&cfg, &a).unwrap();
            let collisions: f64 = (0..g.vertex_count())
                .map(|i| g.degree(i) as f64 * a[i] as f64 * (a[i] as f64 - 1.0).max(0.0) / 2.0)
                .sum();
            let erasures = alpha * a.order() as f64 / 2.0;
            prop_assert!((row.total_rate - collisions - erasures).abs() < 1e-12);
            prop_assert!((row.moves.iter().map(|m| m.1).sum::<f64>() - row.total_rate).abs() < 1e-12);
        }

        #[test]
        fn killing_non_positive_on_independent_support((g, a, _) in arb_config()) {
            let cfg = ChainConfig::undrifted(&g);
            let a = PartitionVector::new(a);
            if is_independent_set(&g, &a.support()).unwrap() {
                prop_assert!(killing_rate(&cfg, &a).unwrap() <= 0.0);
            }
        }

        #[test]
        fn paths_take_legal_moves((g, a, alpha) in arb_config(), seed in 0u64..1000) {
            let cfg = ChainConfig::for_alpha(&g, alpha).unwrap();
            let a = PartitionVector::new(a);
            let path = simulate_path(&cfg, &a, Horizon::Time(3.0), seed, 0).unwrap();
            for w in path.states.windows(2) {
                let (from, to) = (&w[0], &w[1]);
                let legal = rate_row(&cfg, from).unwrap().moves.iter().any(|(b, _)| b == to);
                prop_assert!(legal);
                if cfg.is_drifted() {
                    prop_assert!(to.order() <= from.order());
                } else {
                    prop_assert_eq!(to.order(), from.order());
                }
            }
            prop_assert!(path.holding_times.iter().all(|&h| h >= 0.0));
        }

        #[test]
        fn exact_rows_are_stochastic((g, a, alpha) in arb_config(), t in 0.0f64..5.0) {
            let cfg = ChainConfig::for_alpha(&g, alpha).unwrap();
            let p = transition_probabilities_exact(&cfg, &PartitionVector::new(a), t).unwrap();
            let total: f64 = p.values().sum();
            prop_assert!((total - 1.0).abs() < 1e-10);
            prop_assert!(p.values().all(|&v| v > -1e-12));
        }
    }
}
