//! Dense real matrix primitives: a cyclic Jacobi eigensolver for symmetric
//! matrices, integer matrix powers and the stationary-distribution solve.
//!
//! Matrices here are small (a few hundred rows at most), so everything is
//! stored row-major in a flat `Vec<f64>` and nothing is blocked.

use std::collections::VecDeque;
use std::fmt;
use std::ops::{Index, IndexMut};

use crate::error::{Error, Result};

/// Default tolerance used throughout the crate.
pub const DEFAULT_TOL: f64 = 1e-10;

const MAX_JACOBI_SWEEPS: usize = 100;
const MAX_POWER_ITERS: usize = 20_000;
const POWER_TOL: f64 = 1e-12;

/// Square matrix of finite `f64` values, row-major.
#[derive(Clone, PartialEq)]
pub struct DenseMatrix {
    n: usize,
    data: Vec<f64>,
}

impl fmt::Debug for DenseMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.rows()).finish()
    }
}

impl DenseMatrix {
    /// Builds a matrix from a flat row-major buffer of length `n * n`.
    pub fn from_vec(n: usize, data: Vec<f64>) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidParameter("matrix dimension must be >= 1".into()));
        }
        if data.len() != n * n {
            return Err(Error::InvalidParameter(format!(
                "expected {} entries for a {n}x{n} matrix, got {}",
                n * n,
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "non-finite entry at ({}, {})",
                pos / n,
                pos % n
            )));
        }
        Ok(Self { n, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != n) {
            return Err(Error::InvalidParameter(format!(
                "row {i} has {} entries, expected {n}",
                r.len()
            )));
        }
        Self::from_vec(n, rows.concat())
    }

    pub fn zeros(n: usize) -> Self {
        assert!(n >= 1, "matrix dimension must be >= 1");
        Self { n, data: vec![0.0; n * n] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.n)
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.rows().map(<[f64]>::to_vec).collect()
    }

    pub fn transpose(&self) -> Self {
        let n = self.n;
        let mut t = Self::zeros(n);
        for i in 0..n {
            for j in 0..n {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn trace(&self) -> f64 {
        (0..self.n).map(|i| self[(i, i)]).sum()
    }

    pub fn row_sums(&self) -> Vec<f64> {
        self.rows().map(|r| r.iter().sum()).collect()
    }

    /// Largest `|m_ij - m_ji|`.
    pub fn max_asymmetry(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.n {
            for j in (i + 1)..self.n {
                worst = worst.max((self[(i, j)] - self[(j, i)]).abs());
            }
        }
        worst
    }

    /// Largest absolute entrywise difference against `other`.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!(self.n, other.n, "dimension mismatch");
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// `(m + m^T) / 2`.
    pub fn symmetrized(&self) -> Self {
        let n = self.n;
        let mut s = self.clone();
        for i in 0..n {
            for j in (i + 1)..n {
                let v = 0.5 * (self[(i, j)] + self[(j, i)]);
                s[(i, j)] = v;
                s[(j, i)] = v;
            }
        }
        s
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.n, other.n, "dimension mismatch");
        let n = self.n;
        let mut out = Self::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                let src = other.row(k);
                let dst = &mut out.data[i * n..(i + 1) * n];
                for (d, s) in dst.iter_mut().zip(src) {
                    *d += a * s;
                }
            }
        }
        out
    }

    /// Row vector times matrix: `v^T m`.
    pub fn left_mul(&self, v: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut out = vec![0.0; n];
        for (vi, row) in v.iter().zip(self.rows()) {
            if *vi == 0.0 {
                continue;
            }
            for (o, m) in out.iter_mut().zip(row) {
                *o += vi * m;
            }
        }
        out
    }
}

impl Index<(usize, usize)> for DenseMatrix {
    type Output = f64;

    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.n + j]
    }
}

impl IndexMut<(usize, usize)> for DenseMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.n + j]
    }
}

fn off_diagonal_norm(a: &DenseMatrix) -> f64 {
    let n = a.dim();
    let mut s = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            s += a[(i, j)] * a[(i, j)];
        }
    }
    (2.0 * s).sqrt()
}

/// All eigenvalues of a symmetric matrix, sorted descending.
///
/// Cyclic Jacobi rotations. The iteration stops once the Frobenius norm of
/// the off-diagonal part is well below `tol`; by Weyl's inequality every
/// diagonal entry is then within `tol` of a true eigenvalue.
pub fn symmetric_eigenvalues(m: &DenseMatrix, tol: f64) -> Result<Vec<f64>> {
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter(format!("tolerance must be positive, got {tol}")));
    }
    let asymmetry = m.max_asymmetry();
    if asymmetry > tol {
        return Err(Error::NotSymmetric { asymmetry, tol });
    }
    let n = m.dim();
    let mut a = m.symmetrized();
    let scale = a.data.iter().map(|v| v * v).sum::<f64>().sqrt();
    let target = (tol * 1e-3).max(4.0 * f64::EPSILON * scale);

    let mut residual = off_diagonal_norm(&a);
    let mut sweeps = 0;
    while residual > target {
        if sweeps == MAX_JACOBI_SWEEPS {
            if residual <= tol {
                break;
            }
            return Err(Error::NoConvergence { sweeps, residual });
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = if theta.abs() > 1e150 {
                    0.5 / theta
                } else {
                    theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
                };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                rotate(&mut a, p, q, c, s);
                a[(p, q)] = 0.0;
                a[(q, p)] = 0.0;
            }
        }
        sweeps += 1;
        residual = off_diagonal_norm(&a);
    }

    let mut eig: Vec<f64> = (0..n).map(|i| a[(i, i)]).collect();
    eig.sort_by(|x, y| y.total_cmp(x));
    Ok(eig)
}

// A <- J^T A J with J the (p, q) plane rotation [[c, s], [-s, c]].
fn rotate(a: &mut DenseMatrix, p: usize, q: usize, c: f64, s: f64) {
    let n = a.dim();
    for k in 0..n {
        let akp = a[(k, p)];
        let akq = a[(k, q)];
        a[(k, p)] = c * akp - s * akq;
        a[(k, q)] = s * akp + c * akq;
    }
    for k in 0..n {
        let apk = a[(p, k)];
        let aqk = a[(q, k)];
        a[(p, k)] = c * apk - s * aqk;
        a[(q, k)] = s * apk + c * aqk;
    }
}

/// `m^a` by repeated squaring.
pub fn matrix_power(m: &DenseMatrix, a: u64) -> Result<DenseMatrix> {
    if a == 0 {
        return Err(Error::InvalidParameter("matrix power exponent must be >= 1".into()));
    }
    let mut result: Option<DenseMatrix> = None;
    let mut base = m.clone();
    let mut e = a;
    loop {
        if e & 1 == 1 {
            result = Some(match result {
                None => base.clone(),
                Some(r) => r.matmul(&base),
            });
        }
        e >>= 1;
        if e == 0 {
            break;
        }
        base = base.matmul(&base);
    }
    Ok(result.expect("exponent >= 1 sets at least one bit"))
}

/// Checks that every row is non-negative and sums to one within `tol`.
pub fn check_stochastic(m: &DenseMatrix, tol: f64) -> Result<()> {
    for (i, row) in m.rows().enumerate() {
        let sum: f64 = row.iter().sum();
        if (sum - 1.0).abs() > tol || row.iter().any(|&v| v < 0.0) {
            return Err(Error::NotStochastic { row: i, sum });
        }
    }
    Ok(())
}

fn reachable(m: &DenseMatrix, start: usize, forward: bool) -> Vec<bool> {
    let n = m.dim();
    let mut seen = vec![false; n];
    let mut queue = VecDeque::from([start]);
    seen[start] = true;
    while let Some(i) = queue.pop_front() {
        for j in 0..n {
            let w = if forward { m[(i, j)] } else { m[(j, i)] };
            if w > 0.0 && !seen[j] {
                seen[j] = true;
                queue.push_back(j);
            }
        }
    }
    seen
}

/// Whether the transition graph (edges where `m_ij > 0`) is strongly connected.
pub fn is_irreducible(m: &DenseMatrix) -> bool {
    reachable(m, 0, true).into_iter().all(|b| b) && reachable(m, 0, false).into_iter().all(|b| b)
}

/// Stationary distribution of an irreducible row-stochastic matrix.
///
/// Power iteration on the transpose first; slowly mixing or periodic chains
/// fall back to Gaussian elimination on `pi^T (P - I) = 0, sum(pi) = 1`.
pub fn stationary_distribution(m: &DenseMatrix, tol: f64) -> Result<Vec<f64>> {
    check_stochastic(m, tol)?;
    if !is_irreducible(m) {
        return Err(Error::Reducible("transition graph is not strongly connected".into()));
    }
    let n = m.dim();

    let mut pi = vec![1.0 / n as f64; n];
    let mut converged = false;
    for _ in 0..MAX_POWER_ITERS {
        let mut next = m.left_mul(&pi);
        let total: f64 = next.iter().sum();
        next.iter_mut().for_each(|v| *v /= total);
        let diff: f64 = next.iter().zip(&pi).map(|(a, b)| (a - b).abs()).sum();
        pi = next;
        if diff < POWER_TOL {
            converged = true;
            break;
        }
    }
    if !converged || fixed_point_residual(m, &pi) > tol {
        pi = solve_stationary_linear(m)?;
    }

    if pi.iter().any(|&v| v <= 0.0) {
        return Err(Error::Reducible("stationary solve produced a zero-mass state".into()));
    }
    let total: f64 = pi.iter().sum();
    pi.iter_mut().for_each(|v| *v /= total);
    Ok(pi)
}

/// `max_j |(pi^T m)_j - pi_j|`.
pub fn fixed_point_residual(m: &DenseMatrix, pi: &[f64]) -> f64 {
    m.left_mul(pi)
        .iter()
        .zip(pi)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max)
}

fn solve_stationary_linear(m: &DenseMatrix) -> Result<Vec<f64>> {
    let n = m.dim();
    // Rows of the system are the equations (P^T - I) pi = 0, with the last
    // one replaced by the normalization sum(pi) = 1.
    let mut a = vec![vec![0.0; n + 1]; n];
    for (i, eq) in a.iter_mut().enumerate().take(n - 1) {
        for j in 0..n {
            eq[j] = m[(j, i)] - if i == j { 1.0 } else { 0.0 };
        }
    }
    a[n - 1][..n].fill(1.0);
    a[n - 1][n] = 1.0;

    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&x, &y| a[x][col].abs().total_cmp(&a[y][col].abs()))
            .expect("non-empty pivot range");
        if a[pivot][col].abs() < 1e-14 {
            return Err(Error::Reducible("singular stationary system (non-unique fixed point)".into()));
        }
        a.swap(col, pivot);
        for r in 0..n {
            if r == col {
                continue;
            }
            let f = a[r][col] / a[col][col];
            if f == 0.0 {
                continue;
            }
            for c in col..=n {
                a[r][c] -= f * a[col][c];
            }
        }
    }
    Ok((0..n).map(|i| (a[i][n] / a[i][i]).max(0.0)).collect())
}
