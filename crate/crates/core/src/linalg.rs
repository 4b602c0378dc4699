//! Matrix exponentials, exact linear solves and strongly connected
//! components.

use nalgebra::{DMatrix, DVector};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};

/// Systems up to this size use the dense Padé exponential; larger ones use
/// the sparse Taylor action.
pub const DENSE_LIMIT: usize = 200;

const THETA_13: f64 = 5.371920351148152;

const PADE_13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];

fn norm1(a: &DMatrix<f64>) -> f64 {
    a.column_iter()
        .map(|c| c.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// `e^A` by degree-13 Padé approximation with scaling and squaring.
pub fn expm(a: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "expm needs a square matrix");
    if n == 0 {
        return a.clone();
    }
    let norm = norm1(a);
    let squarings = if norm > THETA_13 {
        (norm / THETA_13).log2().ceil() as i32
    } else {
        0
    };
    let a = a / 2f64.powi(squarings);
    let b = &PADE_13;
    let ident = DMatrix::<f64>::identity(n, n);
    let a2 = &a * &a;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;
    let u_inner = &a6 * (&a6 * b[13] + &a4 * b[11] + &a2 * b[9]) + &a6 * b[7] + &a4 * b[5] + &a2 * b[3] + &ident * b[1];
    let u = &a * u_inner;
    let v = &a6 * (&a6 * b[12] + &a4 * b[10] + &a2 * b[8]) + &a6 * b[6] + &a4 * b[4] + &a2 * b[2] + &ident * b[0];
    let p = &v + &u;
    let q = &v - &u;
    let mut r = q.lu().solve(&p).expect("Padé denominator is nonsingular after scaling");
    for _ in 0..squarings {
        r = &r * &r;
    }
    r
}

/// Compressed sparse row matrix.
#[derive(Debug, Clone)]
pub struct SparseMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl SparseMatrix {
    /// Builds an `n x n` matrix from `(row, col, value)` triplets; repeated
    /// positions are summed.
    pub fn from_triplets(n: usize, mut triplets: Vec<(usize, usize, f64)>) -> Self {
        triplets.sort_by_key(|&(i, j, _)| (i, j));
        let mut row_ptr = vec![0; n + 1];
        let mut cols: Vec<usize> = Vec::with_capacity(triplets.len());
        let mut vals: Vec<f64> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for (i, j, v) in triplets {
            if last == Some((i, j)) {
                *vals.last_mut().unwrap() += v;
                continue;
            }
            cols.push(j);
            vals.push(v);
            row_ptr[i + 1] += 1;
            last = Some((i, j));
        }
        for i in 0..n {
            row_ptr[i + 1] += row_ptr[i];
        }
        SparseMatrix { n, row_ptr, cols, vals }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.n, self.n);
        for i in 0..self.n {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                m[(i, self.cols[k])] += self.vals[k];
            }
        }
        m
    }

    pub fn transpose(&self) -> Self {
        let mut t = Vec::with_capacity(self.vals.len());
        for i in 0..self.n {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                t.push((self.cols[k], i, self.vals[k]));
            }
        }
        SparseMatrix::from_triplets(self.n, t)
    }

    fn trace(&self) -> f64 {
        (0..self.n)
            .map(|i| {
                (self.row_ptr[i]..self.row_ptr[i + 1])
                    .filter(|&k| self.cols[k] == i)
                    .map(|k| self.vals[k])
                    .sum::<f64>()
            })
            .sum()
    }

    /// Maximum absolute column sum of `self - shift * I`.
    fn shifted_norm1(&self, shift: f64) -> f64 {
        let mut col = vec![0.0; self.n];
        let mut diag = vec![0.0; self.n];
        for i in 0..self.n {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                if self.cols[k] == i {
                    diag[i] += self.vals[k];
                } else {
                    col[self.cols[k]] += self.vals[k].abs();
                }
            }
        }
        (0..self.n).map(|j| col[j] + (diag[j] - shift).abs()).fold(0.0, f64::max)
    }

    /// `out = (self - shift * I) v`.
    fn shifted_mul(&self, shift: f64, v: &[f64], out: &mut [f64]) {
        for i in 0..self.n {
            let mut acc = -shift * v[i];
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                acc += self.vals[k] * v[self.cols[k]];
            }
            out[i] = acc;
        }
    }
}

/// `e^{tA} v` using truncated Taylor series on substeps small enough that
/// `||h (A - mu I)||_1 <= 1`.
pub fn expmv_sparse(a: &SparseMatrix, t: f64, v: &[f64]) -> Vec<f64> {
    let n = a.dim();
    if n == 0 || t == 0.0 {
        return v.to_vec();
    }
    let mu = a.trace() / n as f64;
    let norm = a.shifted_norm1(mu) * t.abs();
    let steps = norm.ceil().max(1.0) as usize;
    let h = t / steps as f64;
    let scale = (h * mu).exp();
    let mut current = v.to_vec();
    let mut term = vec![0.0; n];
    let mut next = vec![0.0; n];
    for _ in 0..steps {
        term.copy_from_slice(&current);
        let mut sum = current.clone();
        for k in 1..=100 {
            a.shifted_mul(mu, &term, &mut next);
            let inv = h / k as f64;
            let mut term_max = 0.0f64;
            let mut sum_max = 0.0f64;
            for i in 0..n {
                term[i] = next[i] * inv;
                sum[i] += term[i];
                term_max = term_max.max(term[i].abs());
                sum_max = sum_max.max(sum[i].abs());
            }
            if term_max <= 1e-17 * sum_max {
                break;
            }
        }
        for (c, s) in current.iter_mut().zip(&sum) {
            *c = s * scale;
        }
    }
    current
}

/// `e^{tA} v`, dense or sparse depending on the size of `A`.
pub fn expmv(a: &SparseMatrix, t: f64, v: &[f64]) -> Vec<f64> {
    if a.dim() <= DENSE_LIMIT {
        let e = expm(&(a.to_dense() * t));
        (e * DVector::from_column_slice(v)).as_slice().to_vec()
    } else {
        expmv_sparse(a, t, v)
    }
}

/// Solves `A x = b` exactly by Bareiss fraction-free elimination.
///
/// Each row is first scaled to integers. Returns `None` when `A` is
/// singular.
pub fn solve_exact(a: &[Vec<BigRational>], b: &[BigRational]) -> Option<Vec<BigRational>> {
    let n = b.len();
    let mut m: Vec<Vec<BigInt>> = Vec::with_capacity(n);
    for (row, rhs) in a.iter().zip(b) {
        let lcm = row
            .iter()
            .chain(std::iter::once(rhs))
            .fold(BigInt::one(), |acc, v| num_integer::Integer::lcm(&acc, v.denom()));
        m.push(
            row.iter()
                .chain(std::iter::once(rhs))
                .map(|v| v.numer() * (&lcm / v.denom()))
                .collect(),
        );
    }
    let mut prev = BigInt::one();
    for k in 0..n {
        let pivot = (k..n).find(|&i| !m[i][k].is_zero())?;
        m.swap(k, pivot);
        for i in k + 1..n {
            for j in k + 1..=n {
                let v = (&m[i][j] * &m[k][k] - &m[i][k] * &m[k][j]) / &prev;
                m[i][j] = v;
            }
            m[i][k] = BigInt::zero();
        }
        prev = m[k][k].clone();
    }
    let mut x = vec![BigRational::zero(); n];
    for i in (0..n).rev() {
        let mut acc = BigRational::from_integer(m[i][n].clone());
        for j in i + 1..n {
            acc -= BigRational::from_integer(m[i][j].clone()) * &x[j];
        }
        x[i] = acc / BigRational::from_integer(m[i][i].clone());
    }
    Some(x)
}

/// Solves a small dense float system by LU; `None` when singular.
pub fn solve_float(a: DMatrix<f64>, b: DVector<f64>) -> Option<DVector<f64>> {
    let lu = a.lu();
    let x = lu.solve(&b)?;
    if x.iter().all(|v| v.is_finite()) {
        Some(x)
    } else {
        None
    }
}

/// Strongly connected components of the digraph `succ` (Tarjan).
///
/// A component is emitted only after every component reachable from it.
pub fn strongly_connected_components(succ: &[Vec<usize>]) -> Vec<Vec<usize>> {
    let n = succ.len();
    const UNSEEN: usize = usize::MAX;
    let mut index = vec![UNSEEN; n];
    let mut low = vec![0; n];
    let mut on_stack = vec![false; n];
    let mut stack = Vec::new();
    let mut out = Vec::new();
    let mut counter = 0;
    let mut call: Vec<(usize, usize)> = Vec::new();
    for root in 0..n {
        if index[root] != UNSEEN {
            continue;
        }
        call.push((root, 0));
        index[root] = counter;
        low[root] = counter;
        counter += 1;
        stack.push(root);
        on_stack[root] = true;
        while let Some(&mut (v, ref mut edge)) = call.last_mut() {
            if *edge < succ[v].len() {
                let w = succ[v][*edge];
                *edge += 1;
                if index[w] == UNSEEN {
                    index[w] = counter;
                    low[w] = counter;
                    counter += 1;
                    stack.push(w);
                    on_stack[w] = true;
                    call.push((w, 0));
                } else if on_stack[w] {
                    low[v] = low[v].min(index[w]);
                }
                continue;
            }
            call.pop();
            if let Some(&(parent, _)) = call.last() {
                low[parent] = low[parent].min(low[v]);
            }
            if low[v] == index[v] {
                let mut comp = Vec::new();
                loop {
                    let w = stack.pop().unwrap();
                    on_stack[w] = false;
                    comp.push(w);
                    if w == v {
                        break;
                    }
                }
                comp.sort_unstable();
                out.push(comp);
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn close(a: &DMatrix<f64>, b: &DMatrix<f64>, tol: f64) -> bool {
        (a - b).iter().all(|v| v.abs() <= tol)
    }

    /// Oracle: eigen-decomposition of a symmetric matrix.
    fn expm_symmetric(a: &DMatrix<f64>) -> DMatrix<f64> {
        let eig = a.clone().symmetric_eigen();
        let d = DMatrix::from_diagonal(&eig.eigenvalues.map(f64::exp));
        &eig.eigenvectors * d * eig.eigenvectors.transpose()
    }

    #[test]
    fn expm_of_rotation_generator() {
        let t = 2.5f64;
        let a = DMatrix::from_row_slice(2, 2, &[0.0, -t, t, 0.0]);
        let e = expm(&a);
        let want = DMatrix::from_row_slice(2, 2, &[t.cos(), -t.sin(), t.sin(), t.cos()]);
        assert!(close(&e, &want, 1e-13));
    }

    #[test]
    fn expm_of_nilpotent_and_large_norm() {
        let a = DMatrix::from_row_slice(3, 3, &[0.0, 1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0]);
        let want = DMatrix::from_row_slice(3, 3, &[1.0, 1.0, 0.5, 0.0, 1.0, 1.0, 0.0, 0.0, 1.0]);
        assert!(close(&expm(&a), &want, 1e-15));
        // two-state generator: P(stay) = (b + a e^{-(a+b)t})/(a+b)
        let (p, q, t) = (3.0, 1.0, 40.0);
        let g = DMatrix::from_row_slice(2, 2, &[-p, p, q, -q]) * t;
        let e = expm(&g);
        assert!((e[(0, 0)] - (q + p * (-(p + q) * t).exp()) / (p + q)).abs() < 1e-12);
    }

    #[test]
    fn sparse_action_matches_dense() {
        // a birth-death generator with killing, large enough for several substeps
        let n = 30;
        let mut trip = Vec::new();
        for i in 0..n {
            if i + 1 < n {
                trip.push((i, i + 1, 1.5));
                trip.push((i + 1, i, 0.5 + i as f64 * 0.1));
            }
            trip.push((i, i, -2.0 - 0.2 * i as f64));
        }
        let a = SparseMatrix::from_triplets(n, trip);
        let v: Vec<f64> = (0..n).map(|i| 1.0 / (1.0 + i as f64)).collect();
        for t in [0.01, 0.7, 6.0] {
            let dense = (expm(&(a.to_dense() * t)) * DVector::from_column_slice(&v)).as_slice().to_vec();
            let sparse = expmv_sparse(&a, t, &v);
            for (x, y) in dense.iter().zip(&sparse) {
                assert!((x - y).abs() <= 1e-12 * (1.0 + x.abs()), "t={t}: {x} vs {y}");
            }
        }
    }

    #[test]
    fn triplets_sum_duplicates() {
        let m = SparseMatrix::from_triplets(2, vec![(0, 1, 1.0), (1, 0, 2.0), (0, 1, 3.0)]);
        assert_eq!(m.to_dense(), DMatrix::from_row_slice(2, 2, &[0.0, 4.0, 2.0, 0.0]));
        assert_eq!(m.transpose().to_dense(), DMatrix::from_row_slice(2, 2, &[0.0, 2.0, 4.0, 0.0]));
    }

    fn q(n: i64, d: i64) -> BigRational {
        BigRational::new(n.into(), d.into())
    }

    #[test]
    fn exact_solve() {
        let a = vec![vec![q(0, 1), q(2, 3), q(1, 1)], vec![q(1, 2), q(1, 1), q(0, 1)], vec![q(1, 1), q(0, 1), q(-1, 5)]];
        let x = vec![q(3, 7), q(-1, 2), q(5, 3)];
        let b: Vec<BigRational> = a
            .iter()
            .map(|row| row.iter().zip(&x).map(|(p, v)| p * v).sum())
            .collect();
        assert_eq!(solve_exact(&a, &b).unwrap(), x);
        let singular = vec![vec![q(1, 1), q(2, 1)], vec![q(1, 2), q(1, 1)]];
        assert!(solve_exact(&singular, &[q(1, 1), q(0, 1)]).is_none());
    }

    #[test]
    fn scc_order() {
        // 0 -> 1 <-> 2 -> 3, 4 isolated
        let succ = vec![vec![1], vec![2], vec![1, 3], vec![], vec![]];
        let comps = strongly_connected_components(&succ);
        assert_eq!(comps, vec![vec![3], vec![1, 2], vec![0], vec![4]]);
    }

    proptest! {
        #[test]
        fn expm_symmetric_matches_eigen(entries in prop::collection::vec(-3.0f64..3.0, 16)) {
            let m = DMatrix::from_row_slice(4, 4, &entries);
            let s = (&m + m.transpose()) * 0.5;
            let e = expm(&s);
            let want = expm_symmetric(&s);
            let scale = want.iter().fold(1.0f64, |a, v| a.max(v.abs()));
            prop_assert!(close(&e, &want, 1e-11 * scale));
        }

        #[test]
        fn components_respect_reachability(edges in prop::collection::vec((0usize..8, 0usize..8), 0..20)) {
            let mut succ = vec![Vec::new(); 8];
            for (a, b) in edges {
                succ[a].push(b);
            }
            let comps = strongly_connected_components(&succ);
            let mut position = vec![0; 8];
            for (k, c) in comps.iter().enumerate() {
                for &v in c {
                    position[v] = k;
                }
            }
            prop_assert_eq!(comps.iter().map(Vec::len).sum::<usize>(), 8);
            for v in 0..8 {
                for &w in &succ[v] {
                    prop_assert!(position[w] <= position[v]);
                }
            }
        }
    }
}
