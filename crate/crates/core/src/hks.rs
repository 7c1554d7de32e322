//! Plug-in spectral gap estimator from a single trajectory, with the
//! explicit error bound `M(t)` and the step threshold `t1` it implies.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, DenseMatrix, DEFAULT_TOL};
use crate::trajectory::Trajectory;

/// Transition counts of a trajectory.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EmpiricalModel {
    n: usize,
    /// Row-major `n x n`; `counts[i * n + j] = #{s : X_s = i, X_{s+1} = j}`.
    counts: Vec<u64>,
    /// Visits to each state among `X_0, ..., X_{t-1}`.
    visit_counts: Vec<u64>,
    t: u64,
}

impl EmpiricalModel {
    pub fn from_trajectory(tr: &Trajectory, n: usize) -> Result<Self> {
        if tr.len() < 2 {
            return Err(Error::TooShort { len: tr.len(), needed: 2 });
        }
        tr.check_indices(n)?;
        let mut counts = vec![0u64; n * n];
        let mut visit_counts = vec![0u64; n];
        for w in tr.states.windows(2) {
            let (i, j) = (w[0] as usize, w[1] as usize);
            counts[i * n + j] += 1;
            visit_counts[i] += 1;
        }
        Ok(Self { n, counts, visit_counts, t: tr.steps() as u64 })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn count(&self, i: usize, j: usize) -> u64 {
        self.counts[i * self.n + j]
    }

    pub fn visit_counts(&self) -> &[u64] {
        &self.visit_counts
    }

    pub fn transitions(&self) -> u64 {
        self.t
    }

    /// States with at least one outgoing transition.
    pub fn visited_states(&self) -> Vec<usize> {
        (0..self.n).filter(|&i| self.visit_counts[i] > 0).collect()
    }

    /// `Sym(D^{-1/2} Q D^{-1/2})` over the visited states, where `Q = N / t`
    /// and `D = diag(visits / t)`. The `1/t` factors cancel, leaving
    /// `N_ij / sqrt(v_i v_j)`.
    pub fn symmetrized_kernel(&self) -> Option<DenseMatrix> {
        let visited = self.visited_states();
        let m = visited.len();
        if m == 0 {
            return None;
        }
        let sqrt_v: Vec<f64> = visited.iter().map(|&i| (self.visit_counts[i] as f64).sqrt()).collect();
        let mut l = DenseMatrix::zeros(m);
        for (a, &i) in visited.iter().enumerate() {
            for (b, &j) in visited.iter().enumerate() {
                l[(a, b)] = self.count(i, j) as f64 / (sqrt_v[a] * sqrt_v[b]);
            }
        }
        Some(l.symmetrized())
    }
}

/// A point estimate of a spectral gap with diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapEstimate {
    pub gamma_hat: f64,
    /// `1 - lambda_2` before clamping to `[0, 1]`.
    pub raw_gamma: f64,
    /// Transitions in the trajectory the estimate was formed from.
    pub t_used: u64,
    pub skip: u64,
    pub clamped: bool,
    pub unvisited_states: usize,
}

/// Plug-in estimate of the spectral gap from the trajectory's transitions.
pub fn estimate_gap(tr: &Trajectory, n: usize) -> Result<GapEstimate> {
    let model = EmpiricalModel::from_trajectory(tr, n)?;
    let visited = model.visited_states().len();
    if visited < 2 {
        return Err(Error::DegenerateData(format!(
            "only {visited} distinct state(s) visited; the gap estimate needs at least 2"
        )));
    }
    let sym = model.symmetrized_kernel().expect("at least two visited states");
    let eig = linalg::symmetric_eigenvalues(&sym, DEFAULT_TOL)?;
    let raw_gamma = 1.0 - eig[1];
    let gamma_hat = raw_gamma.clamp(0.0, 1.0);
    Ok(GapEstimate {
        gamma_hat,
        raw_gamma,
        t_used: model.transitions(),
        skip: 1,
        clamped: gamma_hat != raw_gamma,
        unvisited_states: n - visited,
    })
}

/// Inputs to the error bound `M` and to `t1`. `gamma` and `pi_star` are
/// properties of the true chain, so these are only available when the
/// chain is known.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HksParams {
    /// Absolute constant of the error bound.
    pub c: f64,
    pub delta: f64,
    pub n: usize,
    pub pi_star: f64,
    pub gamma: f64,
    pub epsilon: f64,
}

impl HksParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidParameter(what.to_string()));
        if !(self.c > 0.0 && self.c.is_finite()) {
            return bad("C must be positive");
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return bad("delta must lie in (0, 1)");
        }
        if self.n == 0 {
            return bad("n must be >= 1");
        }
        if !(self.pi_star > 0.0 && self.pi_star <= 1.0) {
            return bad("pi_star must lie in (0, 1]");
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return bad("gamma must lie in (0, 1]");
        }
        if !(self.epsilon > 0.0 && self.epsilon <= 1.0) {
            return bad("epsilon must lie in (0, 1]");
        }
        Ok(())
    }
}

fn positive_log(x: f64, what: &str) -> Result<f64> {
    if !(x >= 1.0) || !x.is_finite() {
        return Err(Error::InvalidParameter(format!("log argument for {what} must be >= 1, got {x}")));
    }
    Ok(x.ln())
}

/// `C * ( sqrt(log(n/delta) log(t/(pi* delta)) / (pi* gamma t)) + log(1/gamma) / (gamma t) )`.
pub fn error_bound_m(t: f64, p: &HksParams) -> Result<f64> {
    p.validate()?;
    if !(t >= 2.0) {
        return Err(Error::InvalidParameter(format!("t must be >= 2, got {t}")));
    }
    let log_n = positive_log(p.n as f64 / p.delta, "n/delta")?;
    let log_t = positive_log(t / (p.pi_star * p.delta), "t/(pi_star delta)")?;
    let log_gamma = positive_log(1.0 / p.gamma, "1/gamma")?;
    let variance_term = (log_n * log_t / (p.pi_star * p.gamma * t)).sqrt();
    let bias_term = log_gamma / (p.gamma * t);
    Ok(p.c * (variance_term + bias_term))
}

/// `t1` before rounding up.
pub fn t1_real(p: &HksParams) -> Result<f64> {
    p.validate()?;
    let c2 = 12.0 * p.c * p.c;
    let eps2 = p.epsilon * p.epsilon;
    let log_n = positive_log(p.n as f64 / p.delta, "n/delta")?;
    let log_inner = positive_log(
        c2 / (eps2 * p.pi_star * p.pi_star * p.gamma * p.delta),
        "12C^2/(eps^2 pi*^2 gamma delta)",
    )?;
    Ok(c2 * log_n * log_inner / (p.pi_star * p.gamma * eps2))
}

/// Steps after which the error bound is at most `epsilon`.
pub fn t1_steps(p: &HksParams) -> Result<u64> {
    ceil_to_steps(t1_real(p)?)
}

pub(crate) fn ceil_to_steps(x: f64) -> Result<u64> {
    let up = x.ceil();
    if !up.is_finite() || up >= u64::MAX as f64 {
        return Err(Error::InvalidParameter(format!("step count {x:e} does not fit in u64")));
    }
    Ok(up as u64)
}

/// Whether `M(t1) <= epsilon` holds numerically for these parameters.
pub fn verify_t1_inequality(p: &HksParams) -> bool {
    let check = || -> Result<bool> {
        let t1 = t1_steps(p)?;
        Ok(error_bound_m(t1 as f64, p)? <= p.epsilon)
    };
    check().unwrap_or(false)
}
