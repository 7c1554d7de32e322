//! Deterministic numeric suites behind `gapestim selfcheck`: the identities
//! and inequalities the estimator's guarantees rest on, evaluated over fixed
//! parameter grids.

use serde::Serialize;

use crate::chain::skipped_gap_value;
use crate::doubling::{self, SampleSizeParams};
use crate::hks::{self, HksParams};

/// Outcome of one suite.
#[derive(Debug, Clone, Serialize)]
pub struct SuiteReport {
    pub name: &'static str,
    pub cells: usize,
    pub violations: usize,
    /// Largest observed value of the checked quantity (suite specific).
    pub worst: f64,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.violations == 0 && self.cells > 0
    }
}

/// `n`, `delta`, `epsilon`, `gamma` grid shared by the `t1` and `t0` suites,
/// with `pi_star = 1/n` and `C = 1`.
pub fn t1_grid() -> Vec<HksParams> {
    let mut grid = Vec::new();
    for gamma in [0.01, 0.1, 0.5] {
        for n in [2usize, 10, 100] {
            for delta in [0.05, 0.2] {
                for epsilon in [0.05, 0.2] {
                    grid.push(HksParams { c: 1.0, delta, n, pi_star: 1.0 / n as f64, gamma, epsilon });
                }
            }
        }
    }
    grid
}

/// `M(t1) <= epsilon` over [`t1_grid`].
pub fn t1_inequality() -> SuiteReport {
    let grid = t1_grid();
    let mut worst = f64::NEG_INFINITY;
    let mut violations = 0;
    for p in &grid {
        if !hks::verify_t1_inequality(p) {
            violations += 1;
        }
        if let Ok(t1) = hks::t1_steps(p) {
            if let Ok(m) = hks::error_bound_m(t1 as f64, p) {
                worst = worst.max(m / p.epsilon);
            }
        }
    }
    SuiteReport { name: "t1 inequality M(t1) <= eps", cells: grid.len(), violations, worst }
}

/// `t0(eps) == t1(eps/44; delta_gamma)` up to one step of rounding.
pub fn t0_identity() -> SuiteReport {
    let grid = t1_grid();
    let mut worst = 0.0f64;
    let mut violations = 0;
    for p in &grid {
        let sample = SampleSizeParams {
            epsilon: p.epsilon,
            delta: p.delta,
            gamma: p.gamma,
            pi_star: p.pi_star,
            n: p.n,
            c: p.c,
        };
        let shrunk = doubling::delta_split(p.delta, p.gamma).map(|delta| HksParams {
            epsilon: p.epsilon / 44.0,
            delta,
            ..*p
        });
        match (doubling::t0_steps(&sample), shrunk.and_then(|q| hks::t1_steps(&q))) {
            (Ok(t0), Ok(t1)) => {
                let diff = t0.abs_diff(t1) as f64;
                worst = worst.max(diff);
                if diff > 1.0 {
                    violations += 1;
                }
            }
            _ => violations += 1,
        }
    }
    SuiteReport { name: "t0 identity t0(eps) = t1(eps/44)", cells: grid.len(), violations, worst }
}

/// `skipped_gap(h(x, A), A) == x` for `x` on a `1e-3` grid of `[0, 1)` and
/// `A = 2^0 .. 2^20`.
pub fn h_round_trip() -> SuiteReport {
    let mut cells = 0;
    let mut violations = 0;
    let mut worst = 0.0f64;
    for k in 0..=20 {
        let a = 1u64 << k;
        for i in 0..1000 {
            let x = i as f64 / 1000.0;
            cells += 1;
            let err = match doubling::back_transform_h(x, a) {
                Ok(h) => (skipped_gap_value(h, a as f64) - x).abs(),
                Err(_) => f64::INFINITY,
            };
            worst = worst.max(err);
            if err > 1e-12 {
                violations += 1;
            }
        }
    }
    SuiteReport { name: "h round trip skipped_gap(h(x)) = x", cells, violations, worst }
}

/// Skip factors for the derivative-bound suite: `1..=16` plus powers of two
/// up to `2^15`.
pub fn derivative_bound_factors() -> Vec<u64> {
    let mut factors: Vec<u64> = (1..=16).chain((5..=15).map(|k| 1u64 << k)).collect();
    factors.dedup();
    factors
}

/// `max d/dx log h <= 11` on `[0.29, 0.55]`.
pub fn derivative_bound() -> SuiteReport {
    let factors = derivative_bound_factors();
    let values: Vec<f64> = factors.iter().map(|&a| doubling::log_h_derivative_bound_check(a)).collect();
    SuiteReport {
        name: "log h derivative <= 11 on [0.29, 0.55]",
        cells: factors.len(),
        violations: values.iter().filter(|&&v| !(v <= 11.0)).count(),
        worst: values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
    }
}

/// `1 - (1-gamma)^a >= a gamma / 2` whenever `a gamma <= 1`, for `gamma` on
/// a 100-point log grid of `[1e-3, 1]` and integer `a <= 1000`.
pub fn lemma_grid() -> SuiteReport {
    let mut cells = 0;
    let mut violations = 0;
    let mut worst = f64::INFINITY;
    for j in 0..100 {
        let gamma = 10f64.powf(-3.0 + 3.0 * j as f64 / 99.0);
        for a in 1..=1000u32 {
            if a as f64 * gamma > 1.0 {
                break;
            }
            cells += 1;
            let ratio = skipped_gap_value(gamma, a as f64) / (a as f64 * gamma / 2.0);
            worst = worst.min(ratio);
            if ratio < 1.0 {
                violations += 1;
            }
        }
    }
    SuiteReport { name: "skipped gap >= a*gamma/2 when a*gamma <= 1", cells, violations, worst }
}

/// `1 - (1-gamma)^{2^K} >= 0.39` with `K = floor(log2(1/gamma))`.
pub fn termination_bound() -> SuiteReport {
    let mut gammas: Vec<f64> = (1..=100_000).map(|i| 0.5 * i as f64 / 100_000.0).collect();
    gammas.extend((0..=200).map(|j| 10f64.powf(-9.0 + 8.0 * j as f64 / 200.0)));
    gammas.extend((1..=30).map(|k| 0.5f64.powi(k)));
    let mut violations = 0;
    let mut worst = f64::INFINITY;
    for &gamma in &gammas {
        let k = doubling::k_gamma(gamma).expect("gamma in (0, 0.5]");
        let g = skipped_gap_value(gamma, 2f64.powi(k as i32));
        worst = worst.min(g);
        if g < 0.39 - 1e-12 {
            violations += 1;
        }
    }
    SuiteReport { name: "termination bound gamma_{2^K} >= 0.39", cells: gammas.len(), violations, worst }
}

/// `|h(g + s eps/22) / h(g) - 1| <= eps` for `g in [0.30, 0.54]`,
/// `A = 2..=1024`, `s = +-1`.
pub fn relative_error_transfer() -> SuiteReport {
    let epsilons = [0.001, 0.002, 0.005, 0.01, 0.02, 0.05, 0.1, 0.15, 0.2];
    let mut cells = 0;
    let mut violations = 0;
    let mut worst = 0.0f64;
    for a in 2..=1024u64 {
        for i in 0..=24 {
            let gamma_a = 0.30 + 0.01 * i as f64;
            let truth = doubling::back_transform_h(gamma_a, a).expect("in domain");
            for &eps in &epsilons {
                for sign in [-1.0, 1.0] {
                    cells += 1;
                    let perturbed = gamma_a + sign * eps / 22.0;
                    let est = doubling::back_transform_h(perturbed, a).expect("in domain");
                    let rel = (est / truth - 1.0).abs() / eps;
                    worst = worst.max(rel);
                    if rel > 1.0 {
                        violations += 1;
                    }
                }
            }
        }
    }
    SuiteReport { name: "relative error transfer |h ratio - 1| <= eps", cells, violations, worst }
}

/// Every suite, in a fixed order.
pub fn run_all() -> Vec<SuiteReport> {
    vec![
        t1_inequality(),
        t0_identity(),
        h_round_trip(),
        derivative_bound(),
        lemma_grid(),
        termination_bound(),
        relative_error_transfer(),
    ]
}
