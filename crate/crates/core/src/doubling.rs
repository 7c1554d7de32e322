//! Skip-factor doubling: find the first `A = 2^k` at which the skipped
//! chain's estimated gap clears a constant threshold, then map the skipped
//! estimate back through `h(x) = 1 - (1 - x)^{1/A}`.
//!
//! Also home to the sample-size formulas `t0` and `L` and the confidence
//! split `delta_gamma`, which need the true gap and therefore only apply
//! when the chain is known.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hks::{self, HksParams};
use crate::trajectory::{self, Trajectory};

/// Multiplier relating `C0` to the bound's absolute constant `C`.
pub const C0_FACTOR: f64 = 23232.0;

/// Tuning of the doubling search.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DoublingConfig {
    /// Stop at the first level whose estimate exceeds this.
    pub threshold_stop: f64,
    pub band_low: f64,
    pub band_high: f64,
    pub epsilon: f64,
    pub delta: f64,
    pub c: f64,
    /// Highest level to try. `None` derives it from the trajectory length.
    pub max_k: Option<u32>,
    /// Fewest skipped observations a level may be estimated from.
    pub min_skipped_length: usize,
}

impl Default for DoublingConfig {
    fn default() -> Self {
        Self {
            threshold_stop: 0.31,
            band_low: 0.30,
            band_high: 0.54,
            epsilon: 0.1,
            delta: 0.1,
            c: 1.0,
            max_k: None,
            min_skipped_length: 100,
        }
    }
}

impl DoublingConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0 < self.band_low
            && self.band_low < self.threshold_stop
            && self.threshold_stop < self.band_high
            && self.band_high < 1.0)
        {
            return Err(Error::InvalidParameter(format!(
                "need 0 < band_low < threshold_stop < band_high < 1, got {} / {} / {}",
                self.band_low, self.threshold_stop, self.band_high
            )));
        }
        if !(self.epsilon > 0.0 && self.epsilon <= 1.0) {
            return Err(Error::InvalidParameter(format!("epsilon must lie in (0, 1], got {}", self.epsilon)));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::InvalidParameter(format!("delta must lie in (0, 1), got {}", self.delta)));
        }
        if !(self.c > 0.0 && self.c.is_finite()) {
            return Err(Error::InvalidParameter(format!("C must be positive, got {}", self.c)));
        }
        if self.min_skipped_length == 0 {
            return Err(Error::InvalidParameter("min_skipped_length must be >= 1".into()));
        }
        Ok(())
    }

    /// The level cap for a trajectory of `t` transitions.
    pub fn effective_max_k(&self, t: usize) -> u32 {
        let by_length = floor_log2((t / self.min_skipped_length).max(1));
        let hard = floor_log2(t.max(1));
        self.max_k.unwrap_or(by_length).min(hard)
    }
}

fn floor_log2(x: usize) -> u32 {
    usize::BITS - 1 - x.leading_zeros()
}

/// One rung of the doubling ladder.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Level {
    pub k: u32,
    pub a: u64,
    /// Transitions of the skipped trajectory.
    pub steps_used: u64,
    pub gamma_hat: f64,
    pub clamped: bool,
    pub unvisited_states: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DoublingResult {
    /// Selected skip factor `2^k`.
    #[serde(rename = "A")]
    pub a: u64,
    pub per_level: Vec<Level>,
    /// Back-transformed estimate; `None` until `estimate_gamma` fills it.
    pub gamma_tilde: Option<f64>,
    pub terminated_normally: bool,
    /// Set when the back-transform saw a skipped estimate of 1.
    pub clamped: bool,
    pub warning: Option<String>,
}

impl DoublingResult {
    /// Estimate at the selected level.
    pub fn gamma_hat_a(&self) -> f64 {
        self.per_level.last().expect("at least one level").gamma_hat
    }
}

/// Runs the doubling search over `tr`.
pub fn select_skip(tr: &Trajectory, n: usize, cfg: &DoublingConfig) -> Result<DoublingResult> {
    cfg.validate()?;
    let t = tr.steps();
    if t == 0 {
        return Err(Error::DegenerateData("trajectory has no transitions".into()));
    }
    let max_k = cfg.effective_max_k(t);
    let mut per_level = Vec::new();
    for k in 0..=max_k {
        let a = 1usize << k;
        let skipped = trajectory::skip(tr, a)?;
        let mut est = hks::estimate_gap(&skipped, n)?;
        est.skip = a as u64;
        per_level.push(Level {
            k,
            a: a as u64,
            steps_used: est.t_used,
            gamma_hat: est.gamma_hat,
            clamped: est.clamped,
            unvisited_states: est.unvisited_states,
        });
        if est.gamma_hat > cfg.threshold_stop {
            return Ok(DoublingResult {
                a: a as u64,
                per_level,
                gamma_tilde: None,
                terminated_normally: true,
                clamped: false,
                warning: None,
            });
        }
    }
    let last = per_level.last().expect("level 0 always runs");
    let warning = format!(
        "no level up to k={max_k} exceeded {}; trajectory too short for a reliable estimate \
         (last level a={} used {} steps)",
        cfg.threshold_stop, last.a, last.steps_used
    );
    Ok(DoublingResult {
        a: last.a,
        per_level,
        gamma_tilde: None,
        terminated_normally: false,
        clamped: false,
        warning: Some(warning),
    })
}

/// `h(x) = 1 - (1 - x)^{1/A}`, the inverse of the skipped-gap map.
pub fn back_transform_h(x: f64, a: u64) -> Result<f64> {
    if a == 0 {
        return Err(Error::InvalidParameter("skip factor must be >= 1".into()));
    }
    if x == 1.0 {
        return Ok(1.0);
    }
    if !(0.0..1.0).contains(&x) {
        return Err(Error::InvalidParameter(format!("h is defined on [0, 1], got {x}")));
    }
    Ok(-((-x).ln_1p() / a as f64).exp_m1())
}

/// Doubling search followed by the back-transform of the selected level.
pub fn estimate_gamma(tr: &Trajectory, n: usize, cfg: &DoublingConfig) -> Result<DoublingResult> {
    let mut res = select_skip(tr, n, cfg)?;
    let x = res.gamma_hat_a();
    res.clamped = x >= 1.0;
    res.gamma_tilde = Some(back_transform_h(x, res.a)?.clamp(0.0, 1.0));
    Ok(res)
}

/// `floor(log2(1/gamma))`, computed exactly as the largest `k` with
/// `2^k gamma <= 1`.
pub fn k_gamma(gamma: f64) -> Result<u32> {
    if !(gamma > 0.0 && gamma <= 1.0) {
        return Err(Error::InvalidParameter(format!("gamma must lie in (0, 1], got {gamma}")));
    }
    let mut k = 0;
    let mut scaled = gamma * 2.0;
    while scaled <= 1.0 {
        k += 1;
        scaled *= 2.0;
    }
    Ok(k)
}

/// `delta / (floor(log2(1/gamma)) + 1)`: the per-level confidence budget.
pub fn delta_split(delta: f64, gamma: f64) -> Result<f64> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidParameter(format!("delta must lie in (0, 1), got {delta}")));
    }
    Ok(delta / (k_gamma(gamma)? as f64 + 1.0))
}

/// Parameters of the sample-size formulas `t0` and `L`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampleSizeParams {
    pub epsilon: f64,
    pub delta: f64,
    pub gamma: f64,
    pub pi_star: f64,
    pub n: usize,
    pub c: f64,
}

impl SampleSizeParams {
    fn validate(&self) -> Result<()> {
        HksParams {
            c: self.c,
            delta: self.delta,
            n: self.n,
            pi_star: self.pi_star,
            gamma: self.gamma,
            epsilon: self.epsilon,
        }
        .validate()
    }

    pub fn c0(&self) -> f64 {
        C0_FACTOR * self.c
    }
}

/// `log(C0 (K+1) / (eps^2 pi*^2 gamma delta)) * log(n (K+1) / delta)`.
pub fn compute_l(p: &SampleSizeParams) -> Result<f64> {
    p.validate()?;
    let levels = k_gamma(p.gamma)? as f64 + 1.0;
    let first = p.c0() * levels / (p.epsilon * p.epsilon * p.pi_star * p.pi_star * p.gamma * p.delta);
    let second = p.n as f64 * levels / p.delta;
    if first < 1.0 || second < 1.0 {
        return Err(Error::InvalidParameter("log factors of L must be non-negative".into()));
    }
    Ok(first.ln() * second.ln())
}

/// `t0` before rounding up.
pub fn t0_real(p: &SampleSizeParams) -> Result<f64> {
    let l = compute_l(p)?;
    Ok(p.c0() * l / (p.pi_star * p.gamma * p.epsilon * p.epsilon))
}

/// Trajectory length beyond which the relative-error guarantee holds.
pub fn t0_steps(p: &SampleSizeParams) -> Result<u64> {
    hks::ceil_to_steps(t0_real(p)?)
}

/// `max_{x in [0.29, 0.55]} d/dx log h(x)` on a `1e-4` grid.
pub fn log_h_derivative_bound_check(a: u64) -> f64 {
    assert!(a >= 1, "skip factor must be >= 1");
    let a = a as f64;
    let steps = ((0.55 - 0.29) / 1e-4f64).round() as usize;
    (0..=steps)
        .map(|i| {
            let x = 0.29 + i as f64 * 1e-4;
            let log_root = (-x).ln_1p() / a;
            // (1/A) (1-x)^{1/A - 1} / (1 - (1-x)^{1/A})
            log_root.exp() / ((1.0 - x) * a * -log_root.exp_m1())
        })
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Result of checking a known chain and trajectory length against `t0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GuaranteeCheck {
    pub t: u64,
    pub t0: u64,
    pub k_gamma: u32,
    pub delta_gamma: f64,
    pub sufficient: bool,
    pub warnings: Vec<String>,
}

/// Guarantee-mode bookkeeping for a chain with known `gamma` and `pi_star`.
pub fn guarantee_check(cfg: &DoublingConfig, gamma: f64, pi_star: f64, n: usize, t: u64) -> Result<GuaranteeCheck> {
    let params = SampleSizeParams { epsilon: cfg.epsilon, delta: cfg.delta, gamma, pi_star, n, c: cfg.c };
    let t0 = t0_steps(&params)?;
    let mut warnings = Vec::new();
    if cfg.epsilon / 22.0 >= 0.01 {
        warnings.push(format!(
            "epsilon={} is outside the regime epsilon/22 < 0.01 where the level bands are guaranteed",
            cfg.epsilon
        ));
    }
    if t <= t0 {
        warnings.push(format!("t={t} does not exceed t0={t0}; no accuracy guarantee applies"));
    }
    Ok(GuaranteeCheck {
        t,
        t0,
        k_gamma: k_gamma(gamma)?,
        delta_gamma: delta_split(cfg.delta, gamma)?,
        sufficient: t > t0,
        warnings,
    })
}
