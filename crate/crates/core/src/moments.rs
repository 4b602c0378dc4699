//! Moments of the diffusion: the closed linear ODE for each order without
//! drift, the stationary recurrence with drift, the martingale invariants,
//! and closed forms for complete graphs and the two-leaf star.

use std::collections::HashMap;
use std::fmt;
use std::ops::{Add, Div, Mul, Sub};

use nalgebra::{Complex, DMatrix, DVector};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use serde::ser::SerializeStruct;
use serde::{Deserialize, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::graph::{is_independent_set, GraphSpec};
use crate::linalg::{expmv, solve_exact, solve_float, strongly_connected_components, SparseMatrix};
use crate::partition::{
    enumerate_partitions, invariant_coefficients, monomial, partition_count, InvariantSpec, PartitionIndex,
    PartitionVector,
};
use crate::simplex::SimplexPoint;

/// Largest number of moments a single solve may involve.
pub const MOMENT_STATE_LIMIT: u128 = 100_000;

/// Largest face handled by the inclusion-exclusion exit formula.
pub const EXIT_FACE_LIMIT: usize = 12;

/// Cap on the number of eigen-series terms.
pub const SERIES_TERM_LIMIT: usize = 100_000;

pub const DEFAULT_SERIES_TOL: f64 = 1e-10;

/// A moment value in one of the two arithmetic backends.
#[derive(Debug, Clone, PartialEq)]
pub enum MomentValue {
    Exact(BigRational),
    Float(f64),
}

impl MomentValue {
    pub fn to_f64(&self) -> f64 {
        match self {
            MomentValue::Exact(q) => ratio_to_f64(q),
            MomentValue::Float(v) => *v,
        }
    }

    pub fn as_exact(&self) -> Option<&BigRational> {
        match self {
            MomentValue::Exact(q) => Some(q),
            MomentValue::Float(_) => None,
        }
    }
}

impl fmt::Display for MomentValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MomentValue::Exact(q) => write!(f, "{}/{}", q.numer(), q.denom()),
            MomentValue::Float(v) => write!(f, "{v}"),
        }
    }
}

/// Rationals serialize as `"p/q"` strings, floats as numbers.
impl Serialize for MomentValue {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            MomentValue::Exact(_) => s.serialize_str(&self.to_string()),
            MomentValue::Float(v) => s.serialize_f64(*v),
        }
    }
}

pub(crate) fn ratio_to_f64(q: &BigRational) -> f64 {
    q.to_f64().unwrap_or(f64::NAN)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MomentKind {
    TimeDependent { t: f64 },
    Stationary { alpha: f64 },
}

/// Moments keyed by multi-index.
///
/// Time-dependent tables hold every `a` of one order; stationary tables hold
/// every order from 0 up to `order`.
#[derive(Debug, Clone)]
pub struct MomentTable {
    order: u32,
    kind: MomentKind,
    entries: Vec<(PartitionVector, MomentValue)>,
    index: HashMap<PartitionVector, usize>,
}

impl MomentTable {
    fn new(order: u32, kind: MomentKind, entries: Vec<(PartitionVector, MomentValue)>) -> Self {
        let index = entries.iter().enumerate().map(|(k, (a, _))| (a.clone(), k)).collect();
        MomentTable {
            order,
            kind,
            entries,
            index,
        }
    }

    pub fn order(&self) -> u32 {
        self.order
    }

    pub fn kind(&self) -> MomentKind {
        self.kind
    }

    pub fn entries(&self) -> &[(PartitionVector, MomentValue)] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, a: &PartitionVector) -> Result<&MomentValue> {
        if let Some(&k) = self.index.get(a) {
            return Ok(&self.entries[k].1);
        }
        let width = self.entries.first().map_or(0, |(b, _)| b.len());
        if a.len() != width {
            return Err(Error::DimensionMismatch {
                expected: width,
                found: a.len(),
            });
        }
        Err(Error::OrderNotComputed {
            requested: a.order(),
            computed: self.order,
        })
    }

    pub fn value(&self, a: &PartitionVector) -> Result<f64> {
        self.get(a).map(MomentValue::to_f64)
    }
}

#[derive(Serialize)]
struct Row<'a> {
    a: &'a PartitionVector,
    value: &'a MomentValue,
}

impl Serialize for MomentTable {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let rows: Vec<Row<'_>> = self.entries.iter().map(|(a, value)| Row { a, value }).collect();
        let mut st = s.serialize_struct("MomentTable", 3)?;
        st.serialize_field("order", &self.order)?;
        st.serialize_field("kind", &self.kind)?;
        st.serialize_field("rows", &rows)?;
        st.end()
    }
}

fn guard(states: u128) -> Result<()> {
    if states > MOMENT_STATE_LIMIT {
        return Err(Error::TooLarge {
            what: "moment system",
            size: states,
            limit: MOMENT_STATE_LIMIT,
        });
    }
    Ok(())
}

/// Fails with `TooLarge` when the moments of order up to `n` on `r`
/// vertices exceed `MOMENT_STATE_LIMIT` states.
pub fn check_moment_order(r: usize, n: u32) -> Result<()> {
    guard((0..=n).map(|k| partition_count(k, r)).sum())
}

/// `sum_i sum_{j in N(i)} a_i a_j / 2`.
fn neighbour_pairs(g: &GraphSpec, a: &[u32]) -> u64 {
    let twice: u64 = (0..a.len())
        .map(|i| a[i] as u64 * g.neighbours(i).iter().map(|&j| a[j] as u64).sum::<u64>())
        .sum();
    twice / 2
}

/// Collision targets of `a` with their rates `a_i (a_i - 1) / 2`.
fn collisions(g: &GraphSpec, a: &PartitionVector) -> Vec<(PartitionVector, u64)> {
    let mut out = Vec::new();
    for i in 0..a.len() {
        if a[i] >= 2 {
            let rate = a[i] as u64 * (a[i] as u64 - 1) / 2;
            for &j in g.neighbours(i) {
                out.push((a.moved(i, j), rate));
            }
        }
    }
    out
}

/// The matrix `A` of `m' = A m` over all `a` with `|a| = n`, in
/// colexicographic order.
pub fn moment_ode_matrix(g: &GraphSpec, n: u32) -> Result<(PartitionIndex, SparseMatrix)> {
    let r = g.vertex_count();
    guard(partition_count(n, r))?;
    let index = PartitionIndex::new(enumerate_partitions(n, r, false)?);
    let mut triplets = Vec::new();
    for (k, a) in index.states().iter().enumerate() {
        for (b, rate) in collisions(g, a) {
            triplets.push((k, index.get(&b).expect("collisions preserve the order"), rate as f64));
        }
        triplets.push((k, k, -(neighbour_pairs(g, a.counts()) as f64)));
    }
    let m = SparseMatrix::from_triplets(index.len(), triplets);
    Ok((index, m))
}

/// Eigenvalues of the moment matrix restricted to `block`, which must be
/// closed under collisions.
pub fn block_eigenvalues(g: &GraphSpec, block: &[PartitionVector]) -> Result<Vec<Complex<f64>>> {
    let index = PartitionIndex::new(block.to_vec());
    let n = block.len();
    let mut m = DMatrix::zeros(n, n);
    for (k, a) in block.iter().enumerate() {
        if a.len() != g.vertex_count() {
            return Err(Error::DimensionMismatch {
                expected: g.vertex_count(),
                found: a.len(),
            });
        }
        for (b, rate) in collisions(g, a) {
            let Some(j) = index.get(&b) else {
                return Err(Error::Precondition(format!("block is not closed: {a} moves to {b}")));
            };
            m[(k, j)] += rate as f64;
        }
        m[(k, k)] -= neighbour_pairs(g, a.counts()) as f64;
    }
    let mut eig: Vec<Complex<f64>> = m.complex_eigenvalues().iter().copied().collect();
    eig.sort_by(|x, y| x.re.total_cmp(&y.re).then(x.im.total_cmp(&y.im)));
    Ok(eig)
}

/// `m_a(t) = E_x x(t)^a` for every `|a| = n` at each time in `t_grid`.
pub fn solve_moment_ode(g: &GraphSpec, x0: &SimplexPoint, n: u32, t_grid: &[f64]) -> Result<Vec<MomentTable>> {
    if n == 0 {
        return Err(Error::InvalidParameter("moment order must be at least 1".into()));
    }
    if x0.dim() != g.vertex_count() {
        return Err(Error::DimensionMismatch {
            expected: g.vertex_count(),
            found: x0.dim(),
        });
    }
    if let Some(t) = t_grid.iter().find(|t| !(**t >= 0.0) || !t.is_finite()) {
        return Err(Error::InvalidParameter(format!("time {t} must be finite and non-negative")));
    }
    let (index, a) = moment_ode_matrix(g, n)?;
    let m0: Vec<f64> = index.states().iter().map(|s| monomial(x0.coords(), s.counts())).collect();
    Ok(t_grid
        .iter()
        .map(|&t| {
            let m = expmv(&a, t, &m0);
            let entries = index
                .states()
                .iter()
                .cloned()
                .zip(m.into_iter().map(MomentValue::Float))
                .collect();
            MomentTable::new(n, MomentKind::TimeDependent { t }, entries)
        })
        .collect())
}

/// Largest `|I(t) - I(0)|` over `t_grid` for the invariant polynomial
/// `I = sum_a f(n, a) m_a`.
pub fn invariant_drift_check(g: &GraphSpec, spec: &InvariantSpec, x0: &SimplexPoint, t_grid: &[f64]) -> Result<f64> {
    let r = g.vertex_count();
    let set = spec.independent_set();
    if let Some(&v) = set.members().iter().find(|&&v| v >= r) {
        return Err(Error::VertexOutOfRange { vertex: v + 1, count: r });
    }
    if !is_independent_set(g, set)? {
        return Err(Error::Precondition(format!("{set} is not an independent set")));
    }
    let shares_neighbour = (0..r).any(|j| set.members().iter().all(|&i| g.is_adjacent(i, j)));
    if !shares_neighbour {
        return Err(Error::Precondition(format!("{set} has no common neighbour")));
    }
    let coeffs: Vec<(PartitionVector, f64)> = invariant_coefficients(spec)
        .into_iter()
        .map(|(a, c)| (a.lift(set, r), c))
        .collect();
    let initial: f64 = coeffs.iter().map(|(a, c)| c * monomial(x0.coords(), a.counts())).sum();
    let tables = solve_moment_ode(g, x0, spec.order(), t_grid)?;
    let mut worst = 0.0f64;
    for table in &tables {
        let mut value = 0.0;
        for (a, c) in &coeffs {
            value += c * table.value(a)?;
        }
        worst = worst.max((value - initial).abs());
    }
    Ok(worst)
}

/// Field operations needed by the stationary recurrence.
trait Scalar:
    Clone + Zero + One + Add<Output = Self> + Sub<Output = Self> + Mul<Output = Self> + Div<Output = Self>
{
    fn from_ratio(num: u64, den: u64) -> Self;
    fn solve(a: Vec<Vec<Self>>, b: Vec<Self>) -> Option<Vec<Self>>;
    fn into_value(self) -> MomentValue;
}

impl Scalar for f64 {
    fn from_ratio(num: u64, den: u64) -> Self {
        num as f64 / den as f64
    }

    fn solve(a: Vec<Vec<f64>>, b: Vec<f64>) -> Option<Vec<f64>> {
        let n = b.len();
        let m = DMatrix::from_fn(n, n, |i, j| a[i][j]);
        solve_float(m, DVector::from_vec(b)).map(|x| x.as_slice().to_vec())
    }

    fn into_value(self) -> MomentValue {
        MomentValue::Float(self)
    }
}

impl Scalar for BigRational {
    fn from_ratio(num: u64, den: u64) -> Self {
        BigRational::new(BigInt::from(num), BigInt::from(den))
    }

    fn solve(a: Vec<Vec<Self>>, b: Vec<Self>) -> Option<Vec<Self>> {
        solve_exact(&a, &b)
    }

    fn into_value(self) -> MomentValue {
        MomentValue::Exact(self)
    }
}

/// Solves the stationary recurrence order by order. Within one order the
/// equations are grouped into strongly connected components of the
/// collision graph and solved sinks first.
fn stationary<T: Scalar>(g: &GraphSpec, alpha: T, n: u32) -> Result<Vec<(PartitionVector, T)>> {
    let r = g.vertex_count();
    let total: u128 = (0..=n).map(|k| partition_count(k, r)).sum();
    guard(total)?;
    let half_alpha = alpha.clone() * T::from_ratio(1, 2);
    let mut out: Vec<(PartitionVector, T)> = vec![(PartitionVector::zeros(r), T::one())];
    let mut lower: HashMap<PartitionVector, T> = HashMap::from([(PartitionVector::zeros(r), T::one())]);
    for k in 1..=n {
        let index = PartitionIndex::new(enumerate_partitions(k, r, false)?);
        let states = index.states();
        let moves: Vec<Vec<(usize, u64)>> = states
            .iter()
            .map(|a| collisions(g, a).into_iter().map(|(b, c)| (index.get(&b).unwrap(), c)).collect())
            .collect();
        let diag: Vec<T> = states
            .iter()
            .map(|a| {
                T::from_ratio(neighbour_pairs(g, a.counts()), 1) + half_alpha.clone() * T::from_ratio(r as u64 * k as u64, 1)
            })
            .collect();
        let rhs: Vec<T> = states
            .iter()
            .map(|a| {
                let mut acc = T::zero();
                for i in 0..r {
                    if a[i] > 0 {
                        acc = acc + T::from_ratio(a[i] as u64, 1) * lower[&a.erased(i)].clone();
                    }
                }
                half_alpha.clone() * acc
            })
            .collect();
        let succ: Vec<Vec<usize>> = moves.iter().map(|m| m.iter().map(|&(j, _)| j).collect()).collect();
        let mut solved: Vec<Option<T>> = vec![None; states.len()];
        for comp in strongly_connected_components(&succ) {
            let local: HashMap<usize, usize> = comp.iter().enumerate().map(|(p, &s)| (s, p)).collect();
            let size = comp.len();
            let mut mat = vec![vec![T::zero(); size]; size];
            let mut b = Vec::with_capacity(size);
            for (p, &s) in comp.iter().enumerate() {
                mat[p][p] = diag[s].clone();
                let mut known = rhs[s].clone();
                for &(j, c) in &moves[s] {
                    let c = T::from_ratio(c, 1);
                    match local.get(&j) {
                        Some(&q) => mat[p][q] = mat[p][q].clone() - c,
                        None => known = known + c * solved[j].clone().expect("reachable components are solved first"),
                    }
                }
                b.push(known);
            }
            let x = T::solve(mat, b).ok_or(Error::Singular { order: k })?;
            for (p, &s) in comp.iter().enumerate() {
                solved[s] = Some(x[p].clone());
            }
        }
        lower = states
            .iter()
            .cloned()
            .zip(solved.into_iter().map(Option::unwrap))
            .collect();
        for a in states {
            out.push((a.clone(), lower[a].clone()));
        }
    }
    Ok(out)
}

/// Stationary moments `m_a(alpha)` for every `|a| <= n` in floating point.
pub fn solve_stationary_recurrence(g: &GraphSpec, alpha: f64, n: u32) -> Result<MomentTable> {
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(Error::InvalidParameter(format!("alpha must be positive, got {alpha}")));
    }
    let rows = stationary(g, alpha, n)?;
    Ok(MomentTable::new(
        n,
        MomentKind::Stationary { alpha },
        rows.into_iter().map(|(a, v)| (a, v.into_value())).collect(),
    ))
}

/// Stationary moments in exact rational arithmetic.
pub fn solve_stationary_recurrence_exact(g: &GraphSpec, alpha: &BigRational, n: u32) -> Result<MomentTable> {
    if *alpha <= BigRational::zero() {
        return Err(Error::InvalidParameter(format!("alpha must be positive, got {alpha}")));
    }
    let rows = stationary(g, alpha.clone(), n)?;
    Ok(MomentTable::new(
        n,
        MomentKind::Stationary {
            alpha: ratio_to_f64(alpha),
        },
        rows.into_iter().map(|(a, v)| (a, v.into_value())).collect(),
    ))
}

/// Parses `"3"`, `"-1/4"` or `"0.125"` into an exact rational.
pub fn parse_rational(s: &str) -> Result<BigRational> {
    let bad = || Error::InvalidParameter(format!("`{s}` is not a rational number"));
    let t = s.trim();
    if let Some((p, q)) = t.split_once('/') {
        let p: BigInt = p.trim().parse().map_err(|_| bad())?;
        let q: BigInt = q.trim().parse().map_err(|_| bad())?;
        if q.is_zero() {
            return Err(bad());
        }
        return Ok(BigRational::new(p, q));
    }
    let (negative, digits) = match t.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, t.strip_prefix('+').unwrap_or(t)),
    };
    let (whole, frac) = digits.split_once('.').unwrap_or((digits, ""));
    if whole.is_empty() && frac.is_empty() || !whole.chars().chain(frac.chars()).all(|c| c.is_ascii_digit()) {
        return Err(bad());
    }
    let numer: BigInt = format!("{whole}{frac}").parse().map_err(|_| bad())?;
    let denom = num_traits::pow(BigInt::from(10), frac.len());
    let q = BigRational::new(numer, denom);
    Ok(if negative { -q } else { q })
}

/// `(z)_k = z (z+1) ... (z+k-1)`.
pub fn rising_factorial(z: f64, k: u32) -> f64 {
    (0..k).map(|l| z + l as f64).product()
}

fn rising_factorial_exact(z: &BigRational, k: u32) -> BigRational {
    (0..k).fold(BigRational::one(), |acc, l| acc * (z + BigRational::from_integer(l.into())))
}

/// Moments of the symmetric Dirichlet law: `prod (alpha)_{a_i} / (r alpha)_n`.
pub fn dirichlet_moment(r: usize, alpha: f64, a: &PartitionVector) -> f64 {
    let num: f64 = a.counts().iter().map(|&k| rising_factorial(alpha, k)).product();
    num / rising_factorial(r as f64 * alpha, a.order())
}

pub fn dirichlet_moment_exact(r: usize, alpha: &BigRational, a: &PartitionVector) -> BigRational {
    let num = a
        .counts()
        .iter()
        .fold(BigRational::one(), |acc, &k| acc * rising_factorial_exact(alpha, k));
    let total = alpha * BigRational::from_integer(r.into());
    num / rising_factorial_exact(&total, a.order())
}

/// Ewens sampling formula `theta^l / (theta)_n * prod (a_i - 1)!` over the
/// occupied blocks `a`.
pub fn ewens_probability(theta: f64, a: &PartitionVector) -> Result<f64> {
    if !(theta > 0.0) || !theta.is_finite() {
        return Err(Error::InvalidParameter(format!("theta must be positive, got {theta}")));
    }
    if a.is_empty() || !a.is_positive() {
        return Err(Error::InvalidParameter(format!("{a} must have every block occupied")));
    }
    let factorials: f64 = a
        .counts()
        .iter()
        .map(|&k| (1..k).map(|v| v as f64).product::<f64>())
        .product();
    Ok(theta.powi(a.len() as i32) / rising_factorial(theta, a.order()) * factorials)
}

/// Long-run masses of the two-leaf star: the three vertices and the
/// leaf edge `{2,3}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StarMasses {
    pub p1: f64,
    pub p2: f64,
    pub p3: f64,
    pub p23: f64,
}

pub fn s2_absorption_masses(x: &SimplexPoint) -> Result<StarMasses> {
    if x.dim() != 3 {
        return Err(Error::DimensionMismatch { expected: 3, found: x.dim() });
    }
    let x1 = x[0];
    if !(x1 > 0.0 && x1 < 1.0) {
        return Err(Error::Precondition(format!("centre mass must lie in (0,1), got {x1}")));
    }
    let leaf = |xi: f64| x1 / 2.0 * ((2.0 - x1) / ((2.0 - x1).powi(2) - 4.0 * xi).sqrt() - 1.0);
    let (p2, p3) = (leaf(x[1]), leaf(x[2]));
    Ok(StarMasses {
        p1: x1,
        p2,
        p3,
        p23: 1.0 - x1 - p2 - p3,
    })
}

/// `2F1(-m, m+3; 2; x)` through the Gegenbauer polynomial `C_m^{(3/2)}`.
pub(crate) fn kimura_hypergeometric(m: usize, x: f64) -> f64 {
    let z = 1.0 - 2.0 * x;
    let (mut prev, mut cur) = (1.0, 3.0 * z);
    if m == 0 {
        return 1.0;
    }
    for k in 2..=m {
        let kf = k as f64;
        let next = (2.0 * z * (kf + 0.5) * cur - (kf + 1.0) * prev) / kf;
        prev = cur;
        cur = next;
    }
    2.0 * cur / ((m as f64 + 1.0) * (m as f64 + 2.0))
}

/// Probability that the two-type diffusion started at `x` has fixed at the
/// first type by time `t`, truncated once the next term's bound is below
/// `tol` relative to the partial sum (and at least `min_terms` terms).
fn kimura_fixation(x: f64, t: f64, tol: f64, min_terms: usize) -> Result<(f64, usize)> {
    if x <= 0.0 || x >= 1.0 {
        return Ok((x.clamp(0.0, 1.0), 0));
    }
    let scale = x * (x - 1.0);
    let mut sum = x;
    let mut i = 2usize;
    loop {
        let fi = i as f64;
        let decay = (-fi * (fi - 1.0) * t / 2.0).exp();
        let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
        sum += (2.0 * fi - 1.0) * sign * decay * scale * kimura_hypergeometric(i - 2, x);
        let nf = fi + 1.0;
        let bound = (2.0 * nf - 1.0) * (-nf * (nf - 1.0) * t / 2.0).exp() * scale.abs();
        if i >= min_terms && bound < tol * sum.abs().max(f64::MIN_POSITIVE) {
            return Ok((sum, i - 1));
        }
        if i >= SERIES_TERM_LIMIT {
            return Err(Error::SeriesDiverged { terms: SERIES_TERM_LIMIT });
        }
        i += 1;
    }
}

/// Exit probability from the interior of a face of a complete graph.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExitSurvival {
    /// `P_x(tau_U > t)` clamped to `[0, 1]`.
    pub value: f64,
    /// The unclamped series value.
    pub raw: f64,
    /// Largest number of series terms used for any sub-face.
    pub terms: usize,
    /// True when the raw value left `[0, 1]` by more than `10 * tol`.
    pub flagged: bool,
}

/// `P_x(tau_U > t)` on `K_r` for a face `U` of size `s`, with `x` the
/// coordinates on that face.
pub fn complete_graph_exit_cdf(r: usize, s: usize, x: &[f64], t: f64, tol: f64) -> Result<ExitSurvival> {
    if s < 2 || s > r {
        return Err(Error::InvalidParameter(format!("face size {s} must be between 2 and {r}")));
    }
    if s > EXIT_FACE_LIMIT {
        return Err(Error::TooLarge {
            what: "exit face",
            size: s as u128,
            limit: EXIT_FACE_LIMIT as u128,
        });
    }
    if x.len() != s {
        return Err(Error::DimensionMismatch { expected: s, found: x.len() });
    }
    if x.iter().any(|v| !(*v > 0.0)) || (x.iter().sum::<f64>() - 1.0).abs() > 1e-12 {
        return Err(Error::Precondition("x must lie strictly inside the face".into()));
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter(format!("series tolerance must be positive, got {tol}")));
    }
    if t <= 0.0 {
        return Ok(ExitSurvival {
            value: 1.0,
            raw: 1.0,
            terms: 0,
            flagged: false,
        });
    }
    let mut raw = 0.0;
    let mut terms = 0;
    for mask in 1u32..(1 << s) {
        let size = mask.count_ones() as usize;
        let mass: f64 = (0..s).filter(|&i| mask & (1 << i) != 0).map(|i| x[i]).sum();
        let (p, used) = if size == s {
            (1.0, 0)
        } else {
            kimura_fixation(mass, t, tol, s + 5)?
        };
        terms = terms.max(used);
        let sign = if (s - size) % 2 == 0 { 1.0 } else { -1.0 };
        raw += sign * p;
    }
    let flagged = raw < -10.0 * tol || raw > 1.0 + 10.0 * tol;
    Ok(ExitSurvival {
        value: raw.clamp(0.0, 1.0),
        raw,
        terms,
        flagged,
    })
}
