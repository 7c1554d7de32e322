//! Reversible Markov chains, the exact spectral-gap oracle and the chain
//! families used in tests and experiments.

use std::f64::consts::PI;
use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, DenseMatrix, DEFAULT_TOL};

/// Detailed-balance tolerance for chains loaded from files.
pub const EXTERNAL_REVERSIBILITY_TOL: f64 = 1e-8;

/// Spectral gap `1 - lambda_2`, always in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct GapValue(f64);

impl GapValue {
    pub fn new(gamma: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&gamma) {
            return Err(Error::InvalidParameter(format!("gap must lie in [0, 1], got {gamma}")));
        }
        Ok(Self(gamma))
    }

    pub fn get(self) -> f64 {
        self.0
    }
}

/// Gap of the `a`-step chain: `1 - (1 - gamma)^a`.
pub fn skipped_gap(gamma: GapValue, a: u64) -> Result<GapValue> {
    if a == 0 {
        return Err(Error::InvalidParameter("skip factor must be >= 1".into()));
    }
    Ok(GapValue(skipped_gap_value(gamma.0, a as f64)))
}

// 1 - (1-g)^a through log1p/expm1 so small gaps keep full precision.
pub(crate) fn skipped_gap_value(gamma: f64, a: f64) -> f64 {
    if gamma >= 1.0 {
        return 1.0;
    }
    (-(a * (-gamma).ln_1p()).exp_m1()).clamp(0.0, 1.0)
}

/// An ergodic, reversible, positive-semidefinite Markov chain with its
/// stationary distribution cached.
#[derive(Debug, Clone)]
pub struct MarkovChain {
    kernel: DenseMatrix,
    pi: Vec<f64>,
    pi_star: f64,
    label: String,
}

impl MarkovChain {
    /// Validates `kernel` and computes its stationary distribution.
    pub fn from_matrix(kernel: DenseMatrix, label: impl Into<String>) -> Result<Self> {
        let pi = linalg::stationary_distribution(&kernel, DEFAULT_TOL)?;
        Self::with_stationary(kernel, pi, label, EXTERNAL_REVERSIBILITY_TOL)
    }

    /// Validates a kernel against a supplied stationary distribution.
    pub fn with_stationary(
        kernel: DenseMatrix,
        pi: Vec<f64>,
        label: impl Into<String>,
        reversibility_tol: f64,
    ) -> Result<Self> {
        let n = kernel.dim();
        if n < 2 {
            return Err(Error::InvalidParameter("a chain needs at least 2 states".into()));
        }
        if pi.len() != n {
            return Err(Error::Validation(format!(
                "stationary vector has {} entries, chain has {n} states",
                pi.len()
            )));
        }
        linalg::check_stochastic(&kernel, DEFAULT_TOL)?;
        if let Some(i) = pi.iter().position(|&v| !(v > 0.0) || !v.is_finite()) {
            return Err(Error::Validation(format!("stationary mass of state {i} is not positive")));
        }
        let mass: f64 = pi.iter().sum();
        if (mass - 1.0).abs() > 1e-9 {
            return Err(Error::Validation(format!("stationary vector sums to {mass}")));
        }
        let fixed = linalg::fixed_point_residual(&kernel, &pi);
        if fixed > reversibility_tol.max(DEFAULT_TOL) {
            return Err(Error::Validation(format!(
                "supplied distribution is not stationary (residual {fixed:e})"
            )));
        }
        let residual = detailed_balance_residual(&kernel, &pi);
        if residual > reversibility_tol {
            return Err(Error::NotReversible { residual, tol: reversibility_tol });
        }
        let pi_star = pi.iter().copied().fold(f64::INFINITY, f64::min);
        let chain = Self { kernel, pi, pi_star, label: label.into() };
        let min_eigenvalue = *chain
            .symmetrized_spectrum()?
            .last()
            .expect("n >= 2");
        if min_eigenvalue < -DEFAULT_TOL {
            return Err(Error::NotPositive { min_eigenvalue });
        }
        Ok(chain)
    }

    pub fn kernel(&self) -> &DenseMatrix {
        &self.kernel
    }

    pub fn pi(&self) -> &[f64] {
        &self.pi
    }

    pub fn pi_star(&self) -> f64 {
        self.pi_star
    }

    pub fn n(&self) -> usize {
        self.kernel.dim()
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// `D^{1/2} P D^{-1/2}` with `D = diag(pi)`, symmetrized to remove
    /// rounding asymmetry.
    pub fn symmetrized_kernel(&self) -> DenseMatrix {
        let n = self.n();
        let sqrt_pi: Vec<f64> = self.pi.iter().map(|v| v.sqrt()).collect();
        let mut s = DenseMatrix::zeros(n);
        for i in 0..n {
            for j in 0..n {
                s[(i, j)] = sqrt_pi[i] * self.kernel[(i, j)] / sqrt_pi[j];
            }
        }
        s.symmetrized()
    }

    /// Eigenvalues of the symmetrized kernel, descending.
    pub fn symmetrized_spectrum(&self) -> Result<Vec<f64>> {
        linalg::symmetric_eigenvalues(&self.symmetrized_kernel(), DEFAULT_TOL)
    }

    pub fn detailed_balance_residual(&self) -> f64 {
        detailed_balance_residual(&self.kernel, &self.pi)
    }

    /// Parses the JSON chain format `{"n": .., "P": [[..]], "pi": [..]?}`.
    pub fn from_json_str(s: &str) -> Result<Self> {
        let file: ChainFile = serde_json::from_str(s)?;
        if file.n != file.kernel.len() {
            return Err(Error::Validation(format!(
                "declared n={} but P has {} rows",
                file.n,
                file.kernel.len()
            )));
        }
        let kernel = DenseMatrix::from_rows(&file.kernel)
            .map_err(|e| Error::Validation(e.to_string()))?;
        let label = file.label.unwrap_or_else(|| format!("file(n={})", file.n));
        match file.pi {
            Some(pi) => Self::with_stationary(kernel, pi, label, EXTERNAL_REVERSIBILITY_TOL),
            None => Self::from_matrix(kernel, label),
        }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json_str(&fs::read_to_string(path)?)
    }

    pub fn to_json_string(&self) -> Result<String> {
        let file = ChainFile {
            n: self.n(),
            kernel: self.kernel.to_rows(),
            pi: Some(self.pi.clone()),
            label: Some(self.label.clone()),
        };
        Ok(serde_json::to_string_pretty(&file)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_json_string()?)?;
        Ok(())
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct ChainFile {
    n: usize,
    #[serde(rename = "P")]
    kernel: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pi: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    label: Option<String>,
}

fn detailed_balance_residual(kernel: &DenseMatrix, pi: &[f64]) -> f64 {
    let n = kernel.dim();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in (i + 1)..n {
            worst = worst.max((pi[i] * kernel[(i, j)] - pi[j] * kernel[(j, i)]).abs());
        }
    }
    worst
}

/// `1 - lambda_2` of the symmetrized kernel.
pub fn exact_gap(c: &MarkovChain) -> Result<GapValue> {
    let eig = c.symmetrized_spectrum()?;
    Ok(GapValue((1.0 - eig[1]).clamp(0.0, 1.0)))
}

/// The chain observed every `a` steps: kernel `P^a`, same stationary law.
pub fn skip_chain(c: &MarkovChain, a: u64) -> Result<MarkovChain> {
    if a == 0 {
        return Err(Error::InvalidParameter("skip factor must be >= 1".into()));
    }
    if a == 1 {
        return Ok(c.clone());
    }
    let kernel = linalg::matrix_power(&c.kernel, a)?;
    MarkovChain::with_stationary(
        kernel,
        c.pi.clone(),
        format!("{}^{a}", c.label),
        EXTERNAL_REVERSIBILITY_TOL,
    )
}

/// `P = [[1-p, p], [q, 1-q]]`; gap `p + q`.
pub fn make_two_state(p: f64, q: f64) -> Result<MarkovChain> {
    if !(p > 0.0 && q > 0.0 && p + q <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "two-state chain needs p, q > 0 and p + q <= 1 (got p={p}, q={q})"
        )));
    }
    let kernel = DenseMatrix::from_rows(&[vec![1.0 - p, p], vec![q, 1.0 - q]])?;
    let pi = vec![q / (p + q), p / (p + q)];
    MarkovChain::with_stationary(kernel, pi, format!("two-state(p={p},q={q})"), DEFAULT_TOL)
}

/// Lazy simple random walk on the n-cycle: `I/2 + (S + S^-1)/4`.
pub fn make_lazy_cycle(n: usize) -> Result<MarkovChain> {
    if n < 3 {
        return Err(Error::InvalidParameter(format!("lazy cycle needs n >= 3, got {n}")));
    }
    let mut kernel = DenseMatrix::zeros(n);
    for i in 0..n {
        kernel[(i, i)] += 0.5;
        kernel[(i, (i + 1) % n)] += 0.25;
        kernel[(i, (i + n - 1) % n)] += 0.25;
    }
    MarkovChain::with_stationary(kernel, vec![1.0 / n as f64; n], format!("lazy-cycle(n={n})"), DEFAULT_TOL)
}

/// Closed-form gap of the lazy n-cycle, `(1 - cos(2 pi / n)) / 2`.
pub fn lazy_cycle_gap(n: usize) -> f64 {
    (1.0 - (2.0 * PI / n as f64).cos()) / 2.0
}

/// Independent uniform draws every step: `P = J / n`, gap 1.
pub fn make_complete_graph(n: usize) -> Result<MarkovChain> {
    if n < 2 {
        return Err(Error::InvalidParameter(format!("complete graph needs n >= 2, got {n}")));
    }
    let kernel = DenseMatrix::from_vec(n, vec![1.0 / n as f64; n * n])?;
    MarkovChain::with_stationary(kernel, vec![1.0 / n as f64; n], format!("complete(n={n})"), DEFAULT_TOL)
}

/// Random walk on a complete graph with random symmetric positive weights,
/// made lazy with holding probability `laziness`.
pub fn make_random_reversible(n: usize, seed: u64, laziness: f64) -> Result<MarkovChain> {
    if n < 2 {
        return Err(Error::InvalidParameter(format!("random chain needs n >= 2, got {n}")));
    }
    if !(0.5..1.0).contains(&laziness) {
        return Err(Error::InvalidParameter(format!("laziness must lie in [0.5, 1), got {laziness}")));
    }
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed);
    let mut w = DenseMatrix::zeros(n);
    for i in 0..n {
        for j in i..n {
            let v = 0.05 + 0.95 * rng.gen::<f64>();
            w[(i, j)] = v;
            w[(j, i)] = v;
        }
    }
    let row_sums = w.row_sums();
    let total: f64 = row_sums.iter().sum();
    let mut kernel = DenseMatrix::zeros(n);
    for i in 0..n {
        for j in 0..n {
            let hold = if i == j { laziness } else { 0.0 };
            kernel[(i, j)] = hold + (1.0 - laziness) * w[(i, j)] / row_sums[i];
        }
    }
    let pi = row_sums.iter().map(|r| r / total).collect();
    MarkovChain::with_stationary(
        kernel,
        pi,
        format!("random-reversible(n={n},seed={seed},laziness={laziness})"),
        DEFAULT_TOL,
    )
}
