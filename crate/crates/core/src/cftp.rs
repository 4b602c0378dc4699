//! Unbiased estimation of stationary moments by simulating the dual chain
//! with erasure until every particle is gone, plus expected sample
//! probabilities and Bayes factors between candidate graphs.

use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dual::{ChainConfig, Kernel, DEFAULT_EVENT_BUDGET};
use crate::error::{Error, Result};
use crate::graph::GraphSpec;
use crate::moments::{solve_stationary_recurrence_exact, MomentValue};
use crate::partition::{big_to_f64, multinomial, PartitionVector};
use crate::stats::{run_batched, Welford, BATCH_SIZE};

/// What an estimate refers to.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateTarget {
    pub graph: String,
    pub a: PartitionVector,
    pub alpha: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateResult {
    pub mean: f64,
    pub std_error: f64,
    pub samples: u64,
    pub seed: u64,
    pub target: EstimateTarget,
}

impl EstimateResult {
    /// True when the raw mean left `[0, 1]`, which points at too few samples.
    pub fn outside_unit_interval(&self) -> bool {
        !(0.0..=1.0).contains(&self.mean)
    }
}

fn check_input(g: &GraphSpec, a: &PartitionVector, alpha: f64) -> Result<()> {
    if a.len() != g.vertex_count() {
        return Err(Error::DimensionMismatch {
            expected: g.vertex_count(),
            found: a.len(),
        });
    }
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(Error::InvalidParameter(format!("alpha must be positive, got {alpha}")));
    }
    if a.order() == 0 {
        return Err(Error::InvalidParameter("the sample must contain at least one particle".into()));
    }
    Ok(())
}

/// One draw of `exp(-int_0^tau k(a(s)) ds)` together with the number of
/// events it took.
fn draw<R: Rng + ?Sized>(kernel: &mut Kernel<'_>, a: &[u32], rng: &mut R) -> Result<(f64, u64)> {
    kernel.reset(a);
    let mut k = 0.0;
    let mut events = 0u64;
    while let Some((hold, event)) = kernel.draw(rng) {
        if events == DEFAULT_EVENT_BUDGET {
            return Err(Error::EventBudgetExceeded {
                budget: DEFAULT_EVENT_BUDGET,
            });
        }
        k += event.killing * hold;
        kernel.apply(event.slot);
        events += 1;
    }
    Ok(((-k).exp(), events))
}

/// A single realisation of the estimator; its mean is `m_a(alpha)`.
pub fn cftp_sample<R: Rng + ?Sized>(g: &GraphSpec, a: &PartitionVector, alpha: f64, rng: &mut R) -> Result<f64> {
    check_input(g, a, alpha)?;
    let mut kernel = Kernel::new(ChainConfig::drifted(g, alpha)?);
    draw(&mut kernel, a.counts(), rng).map(|(v, _)| v)
}

/// Runs `samples` draws in fixed batches; batch `b` uses stream
/// `stream_base + b` so distinct estimates under one seed never share
/// random numbers.
fn batched<F>(g: &GraphSpec, a: &PartitionVector, alpha: f64, samples: u64, seed: u64, stream_base: u64, f: F) -> Result<Welford>
where
    F: Fn(f64, u64) -> f64 + Sync,
{
    let cfg = ChainConfig::drifted(g, alpha)?;
    let merged = run_batched(
        seed,
        samples,
        |_, first, len| -> Result<Welford> {
            let mut rng = crate::stats::stream_rng(seed, stream_base + first / BATCH_SIZE);
            let mut kernel = Kernel::new(cfg);
            let mut w = Welford::new();
            for _ in 0..len {
                let (value, events) = draw(&mut kernel, a.counts(), &mut rng)?;
                w.push(f(value, events));
            }
            Ok(w)
        },
        |acc, part| {
            let mut acc = acc?;
            acc.merge(&part?);
            Ok(acc)
        },
        Ok(Welford::new()),
    )?;
    Ok(merged)
}

/// Mean and standard error of `samples` independent draws.
pub fn estimate_moment(g: &GraphSpec, a: &PartitionVector, alpha: f64, samples: u64, seed: u64) -> Result<EstimateResult> {
    estimate_on_streams(g, a, alpha, samples, seed, 0)
}

fn estimate_on_streams(
    g: &GraphSpec,
    a: &PartitionVector,
    alpha: f64,
    samples: u64,
    seed: u64,
    stream_base: u64,
) -> Result<EstimateResult> {
    check_input(g, a, alpha)?;
    if samples < 2 {
        return Err(Error::InvalidParameter(format!("need at least 2 samples, got {samples}")));
    }
    let w = batched(g, a, alpha, samples, seed, stream_base, |v, _| v)?;
    Ok(EstimateResult {
        mean: w.mean(),
        std_error: w.std_error(),
        samples: w.count(),
        seed,
        target: EstimateTarget {
            graph: g.label(),
            a: a.clone(),
            alpha,
        },
    })
}

/// Mean number of events per draw.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepCounts {
    pub mean: f64,
    pub std_error: f64,
    pub samples: u64,
}

pub fn step_count_statistics(g: &GraphSpec, a: &PartitionVector, alpha: f64, samples: u64, seed: u64) -> Result<StepCounts> {
    check_input(g, a, alpha)?;
    if samples < 2 {
        return Err(Error::InvalidParameter(format!("need at least 2 samples, got {samples}")));
    }
    let w = batched(g, a, alpha, samples, seed, 0, |_, events| events as f64)?;
    Ok(StepCounts {
        mean: w.mean(),
        std_error: w.std_error(),
        samples: w.count(),
    })
}

/// `n + n (n - 1) / (2 alpha)`, the growth of the expected number of events.
pub fn step_count_shape(n: u32, alpha: f64) -> f64 {
    let n = n as f64;
    n + n * (n - 1.0) / (2.0 * alpha)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum SampleMode {
    Exact,
    MonteCarlo { samples: u64, seed: u64 },
}

/// An expected sample probability `C(n; a) m_a(alpha)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SampleProbability {
    pub value: MomentValue,
    /// Present in Monte Carlo mode.
    pub std_error: Option<f64>,
}

/// `C(n; a) m_a(alpha)`, exactly or by simulation.
pub fn expected_sample_probability(
    g: &GraphSpec,
    a: &PartitionVector,
    alpha: &BigRational,
    mode: SampleMode,
) -> Result<SampleProbability> {
    sample_probability_on_streams(g, a, alpha, mode, 0)
}

fn sample_probability_on_streams(
    g: &GraphSpec,
    a: &PartitionVector,
    alpha: &BigRational,
    mode: SampleMode,
    stream_base: u64,
) -> Result<SampleProbability> {
    let coefficient = multinomial(a);
    match mode {
        SampleMode::Exact => {
            if a.len() != g.vertex_count() {
                return Err(Error::DimensionMismatch {
                    expected: g.vertex_count(),
                    found: a.len(),
                });
            }
            let table = solve_stationary_recurrence_exact(g, alpha, a.order())?;
            let m = table.get(a)?.as_exact().expect("exact backend").clone();
            let c = BigRational::from_integer(coefficient.into());
            Ok(SampleProbability {
                value: MomentValue::Exact(c * m),
                std_error: None,
            })
        }
        SampleMode::MonteCarlo { samples, seed } => {
            let alpha = alpha.to_f64().unwrap_or(f64::NAN);
            let est = estimate_on_streams(g, a, alpha, samples, seed, stream_base)?;
            let c = big_to_f64(&coefficient);
            Ok(SampleProbability {
                value: MomentValue::Float(c * est.mean),
                std_error: Some(c * est.std_error),
            })
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Candidate {
    pub graph: String,
    pub probability: SampleProbability,
}

/// Expected sample probabilities of every candidate and the matrix of
/// Bayes factors `B[g][h] = p_g / p_h`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SelectionReport {
    pub sample: PartitionVector,
    pub alpha: f64,
    pub candidates: Vec<Candidate>,
    pub bayes_factors: Vec<Vec<MomentValue>>,
    /// Delta-method standard errors, Monte Carlo mode only.
    pub bayes_factor_std_errors: Option<Vec<Vec<f64>>>,
}

impl SelectionReport {
    /// Index of the candidate with the largest expected sample probability.
    pub fn best(&self) -> usize {
        (0..self.candidates.len())
            .max_by(|&i, &j| {
                let p = self.candidates[i].probability.value.to_f64();
                let q = self.candidates[j].probability.value.to_f64();
                p.total_cmp(&q)
            })
            .unwrap_or(0)
    }
}

/// Candidate `k` in Monte Carlo mode draws from streams starting at
/// `k * 2^32`.
const CANDIDATE_STREAM_STRIDE: u64 = 1 << 32;

pub fn select_graph(
    candidates: &[GraphSpec],
    a: &PartitionVector,
    alpha: &BigRational,
    mode: SampleMode,
) -> Result<SelectionReport> {
    if candidates.is_empty() {
        return Err(Error::InvalidParameter("no candidate graphs".into()));
    }
    for g in candidates {
        if g.vertex_count() != a.len() {
            return Err(Error::DimensionMismatch {
                expected: a.len(),
                found: g.vertex_count(),
            });
        }
    }
    let mut probs = Vec::with_capacity(candidates.len());
    for (k, g) in candidates.iter().enumerate() {
        probs.push(Candidate {
            graph: g.label(),
            probability: sample_probability_on_streams(g, a, alpha, mode, k as u64 * CANDIDATE_STREAM_STRIDE)?,
        });
    }
    let n = probs.len();
    let mut factors = vec![Vec::with_capacity(n); n];
    let mut errors = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            let (p, q) = (&probs[i].probability, &probs[j].probability);
            let ratio = match (&p.value, &q.value) {
                (MomentValue::Exact(x), MomentValue::Exact(y)) => {
                    if y.is_zero() {
                        return Err(Error::Precondition(format!("{} gives the sample probability zero", probs[j].graph)));
                    }
                    MomentValue::Exact(x / y)
                }
                _ => MomentValue::Float(p.value.to_f64() / q.value.to_f64()),
            };
            if let (Some(sp), Some(sq)) = (p.std_error, q.std_error) {
                let (vp, vq) = (p.value.to_f64(), q.value.to_f64());
                errors[i][j] = if i == j {
                    0.0
                } else {
                    ratio.to_f64().abs() * ((sp / vp).powi(2) + (sq / vq).powi(2)).sqrt()
                };
            }
            factors[i].push(ratio);
        }
    }
    Ok(SelectionReport {
        sample: a.clone(),
        alpha: alpha.to_f64().unwrap_or(f64::NAN),
        candidates: probs,
        bayes_factors: factors,
        bayes_factor_std_errors: matches!(mode, SampleMode::MonteCarlo { .. }).then_some(errors),
    })
}
