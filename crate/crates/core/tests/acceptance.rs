//! Acceptance criteria. Each test prints one `[PASS]` / `[FAIL]` line; run
//! with `cargo test --test acceptance -- --nocapture --test-threads=1` to
//! see them all in order.

use std::time::{Duration, Instant};

use gapestim::chain::{
    exact_gap, lazy_cycle_gap, make_complete_graph, make_lazy_cycle, make_random_reversible, make_two_state,
    skip_chain, skipped_gap, GapValue, MarkovChain,
};
use gapestim::doubling::{self, back_transform_h, log_h_derivative_bound_check, DoublingConfig, SampleSizeParams};
use gapestim::experiment::{run_experiment, ChainSpec, Estimator, ExperimentReport, ExperimentSpec};
use gapestim::hks::{self, HksParams};
use gapestim::trajectory::{simulate, Start};

fn report(id: u32, name: &str, pass: bool, detail: String, elapsed: Duration, limit: Duration) {
    let in_time = elapsed <= limit;
    let verdict = if pass && in_time { "PASS" } else { "FAIL" };
    println!(
        "[{verdict}] AC-{id:02} {name}: {detail} ({:.2}s, limit {}s)",
        elapsed.as_secs_f64(),
        limit.as_secs()
    );
    assert!(pass, "AC-{id:02} {name} failed: {detail}");
    assert!(in_time, "AC-{id:02} {name} exceeded its runtime limit");
}

fn secs(s: u64) -> Duration {
    Duration::from_secs(s)
}

fn families() -> Vec<MarkovChain> {
    let mut chains = vec![
        make_two_state(0.25, 0.25).unwrap(),
        make_two_state(0.2, 0.1).unwrap(),
        make_two_state(0.05, 0.3).unwrap(),
        make_two_state(0.5, 0.5).unwrap(),
    ];
    chains.extend([3, 4, 8, 17, 30].map(|n| make_lazy_cycle(n).unwrap()));
    chains.extend([2, 3, 5].map(|n| make_complete_graph(n).unwrap()));
    chains.extend([(2, 1, 0.5), (6, 1, 0.5), (10, 7, 0.6), (25, 3, 0.75)].map(|(n, s, l)| {
        make_random_reversible(n, s, l).unwrap()
    }));
    chains
}

fn t1_grid() -> Vec<HksParams> {
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

fn sweep(chain: ChainSpec, estimator: Estimator, lengths: Vec<usize>, replicas: usize) -> ExperimentReport {
    run_experiment(&ExperimentSpec {
        version: 1,
        chain,
        lengths,
        replicas,
        base_seed: 1000,
        estimator,
        start: Start::Stationary,
        config: DoublingConfig::default(),
        output: None,
    })
    .unwrap()
}

#[test]
fn ac01_exact_gap_oracle() {
    let started = Instant::now();
    let mut worst = 0.0f64;
    let mut pass = true;
    for (p, q) in [(0.25, 0.25), (0.2, 0.1), (0.01, 0.02), (0.5, 0.5), (0.3, 0.6), (0.001, 0.999)] {
        let err = (exact_gap(&make_two_state(p, q).unwrap()).unwrap().get() - (p + q)).abs();
        worst = worst.max(err);
        pass &= err <= 1e-10;
    }
    for n in 3..=64 {
        let err = (exact_gap(&make_lazy_cycle(n).unwrap()).unwrap().get() - lazy_cycle_gap(n)).abs();
        worst = worst.max(err);
        pass &= err <= 1e-10;
    }
    for n in 2..=20 {
        let err = (exact_gap(&make_complete_graph(n).unwrap()).unwrap().get() - 1.0).abs();
        worst = worst.max(err);
        pass &= err <= 1e-12;
    }
    report(1, "exact-gap oracle", pass, format!("max error {worst:.3e}"), started.elapsed(), secs(1));
}

#[test]
fn ac02_skipped_gap_identity() {
    let started = Instant::now();
    let mut worst = 0.0f64;
    let mut cells = 0;
    for c in families() {
        let gamma = exact_gap(&c).unwrap();
        for a in [1u64, 2, 4, 8, 16] {
            let direct = exact_gap(&skip_chain(&c, a).unwrap()).unwrap().get();
            let formula = 1.0 - (1.0 - gamma.get()).powi(a as i32);
            worst = worst.max((direct - formula).abs());
            cells += 1;
        }
    }
    report(
        2,
        "skipped-gap identity",
        worst <= 1e-9,
        format!("{cells} (chain, a) pairs, max error {worst:.3e}"),
        started.elapsed(),
        secs(5),
    );
}

#[test]
fn ac03_lemma_grid() {
    let started = Instant::now();
    let mut cells = 0;
    let mut violations = 0;
    // 10^4 gamma values on [1e-3, 1] against every integer a <= 1000 with a*gamma <= 1.
    for i in 0..10_000 {
        let gamma = 10f64.powf(-3.0 + 3.0 * i as f64 / 9_999.0);
        let g = GapValue::new(gamma).unwrap();
        for a in 1..=1000u64 {
            if a as f64 * gamma > 1.0 {
                break;
            }
            cells += 1;
            if skipped_gap(g, a).unwrap().get() < a as f64 * gamma / 2.0 {
                violations += 1;
            }
        }
    }
    report(
        3,
        "lemma grid",
        violations == 0 && cells >= 10_000,
        format!("{cells} cells, {violations} violations"),
        started.elapsed(),
        secs(1),
    );
}

#[test]
fn ac04_termination_bound() {
    let started = Instant::now();
    let mut gammas: Vec<f64> = (1..=100_000).map(|i| 0.5 * i as f64 / 100_000.0).collect();
    gammas.extend((0..=400).map(|j| 10f64.powf(-10.0 + 9.0 * j as f64 / 400.0)));
    gammas.extend((1..=40).map(|k| 0.5f64.powi(k)));
    let mut violations = 0;
    let mut worst = f64::INFINITY;
    for &gamma in &gammas {
        let k = (1.0 / gamma).log2().floor() as i32;
        // floor(log2) of an exact power of two is exact; elsewhere guard rounding at the boundary.
        let k = if 2f64.powi(k + 1) * gamma <= 1.0 { k + 1 } else if 2f64.powi(k) * gamma > 1.0 { k - 1 } else { k };
        let g = skipped_gap(GapValue::new(gamma).unwrap(), 1u64 << k).unwrap().get();
        worst = worst.min(g);
        if g < 0.39 - 1e-12 {
            violations += 1;
        }
    }
    report(
        4,
        "termination bound",
        violations == 0,
        format!("{} gammas, {violations} violations, min {worst:.6}", gammas.len()),
        started.elapsed(),
        secs(1),
    );
}

#[test]
fn ac05_h_round_trip() {
    let started = Instant::now();
    let gammas: Vec<f64> = (0..=60).map(|j| 10f64.powf(-4.0 + (0.99f64.log10() + 4.0) * j as f64 / 60.0)).collect();
    let mut cells = 0;
    let mut violations = 0;
    let mut saturated = 0;
    let mut worst = 0.0f64;
    for &gamma in &gammas {
        for k in 0..=20 {
            let a = 1u64 << k;
            cells += 1;
            let forward = skipped_gap(GapValue::new(gamma).unwrap(), a).unwrap().get();
            if forward == 1.0 {
                saturated += 1;
            }
            let err = (back_transform_h(forward, a).unwrap() - gamma).abs();
            worst = worst.max(err);
            if err > 1e-12 {
                violations += 1;
            }
        }
    }
    report(
        5,
        "h round trip",
        violations == 0,
        format!(
            "{cells} cells, {violations} violations (max error {worst:.3e}); \
             {saturated} cells have 1-(1-gamma)^A round to exactly 1.0 in f64"
        ),
        started.elapsed(),
        secs(1),
    );
}

#[test]
fn ac06_derivative_bound() {
    let started = Instant::now();
    let factors: Vec<u64> = (1..=32).chain((6..=15).map(|k| 1u64 << k)).collect();
    let values: Vec<f64> = factors.iter().map(|&a| log_h_derivative_bound_check(a)).collect();
    let worst = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let violations = values.iter().filter(|&&v| !(v <= 11.0)).count();
    report(
        6,
        "log-h derivative bound",
        violations == 0,
        format!("{} skip factors, max {worst:.4}", factors.len()),
        started.elapsed(),
        secs(10),
    );
}

#[test]
fn ac07_t1_inequality() {
    let started = Instant::now();
    let grid = t1_grid();
    let failures = grid.iter().filter(|p| !hks::verify_t1_inequality(p)).count();
    report(
        7,
        "t1 inequality",
        failures == 0,
        format!("{} cells, {failures} failures", grid.len()),
        started.elapsed(),
        secs(1),
    );
}

#[test]
fn ac08_t0_identity() {
    let started = Instant::now();
    let grid = t1_grid();
    let mut worst = 0u64;
    for p in &grid {
        let t0 = doubling::t0_steps(&SampleSizeParams {
            epsilon: p.epsilon,
            delta: p.delta,
            gamma: p.gamma,
            pi_star: p.pi_star,
            n: p.n,
            c: p.c,
        })
        .unwrap();
        let delta_gamma = doubling::delta_split(p.delta, p.gamma).unwrap();
        let t1 = hks::t1_steps(&HksParams { epsilon: p.epsilon / 44.0, delta: delta_gamma, ..*p }).unwrap();
        worst = worst.max(t0.abs_diff(t1));
    }
    report(
        8,
        "t0 identity",
        worst <= 1,
        format!("{} cells, max |t0 - t1(eps/44)| = {worst}", grid.len()),
        started.elapsed(),
        secs(1),
    );
}

#[test]
fn ac09_hks_consistency() {
    let started = Instant::now();
    let rep = sweep(ChainSpec::TwoState { p: 0.25, q: 0.25 }, Estimator::Hks, vec![100_000, 1_000_000], 200);
    let gamma = rep.gamma;
    let abs_errors = |row: usize| -> Vec<f64> {
        rep.rows[row].outcomes.iter().map(|o| o.estimate.map_or(f64::INFINITY, |e| (e - gamma).abs())).collect()
    };
    let within = abs_errors(0).iter().filter(|&&e| e <= 0.05).count() as f64 / 200.0;
    let mut big = abs_errors(1);
    big.sort_by(f64::total_cmp);
    let median = gapestim::experiment::quantile(&big, 0.5);
    report(
        9,
        "HKS estimator consistency",
        within >= 0.95 && median <= 0.01,
        format!("t=1e5: {:.1}% within 0.05; t=1e6: median |error| {median:.5}", 100.0 * within),
        started.elapsed(),
        secs(120),
    );
}

#[test]
fn ac10_doubling_selection() {
    let started = Instant::now();
    let cycle = sweep(ChainSpec::LazyCycle { n: 30 }, Estimator::Doubling, vec![1_000_000], 100);
    let gamma = GapValue::new(cycle.gamma).unwrap();
    let row = &cycle.rows[0];
    let in_band = row
        .outcomes
        .iter()
        .filter(|o| {
            o.skip.is_some_and(|a| {
                let g = skipped_gap(gamma, a).unwrap().get();
                g > 0.30 && g < 0.54
            })
        })
        .count() as f64
        / row.replicas as f64;
    let median = row.median_rel_error;

    let two = sweep(ChainSpec::TwoState { p: 0.25, q: 0.25 }, Estimator::Doubling, vec![100_000], 200);
    let ones = two.rows[0].outcomes.iter().filter(|o| o.skip == Some(1)).count() as f64 / 200.0;

    report(
        10,
        "doubling selection",
        in_band >= 0.80 && median <= 0.2 && ones >= 0.95,
        format!(
            "cycle n=30: {:.0}% with gamma_A in (0.30, 0.54), median rel error {median:.4}, \
             {} failures; two-state: A=1 in {:.1}%",
            100.0 * in_band,
            row.failed,
            100.0 * ones
        ),
        started.elapsed(),
        secs(300),
    );
}

#[test]
fn ac11_monotone_improvement() {
    let started = Instant::now();
    let rep = sweep(ChainSpec::LazyCycle { n: 30 }, Estimator::Doubling, vec![10_000, 100_000, 1_000_000], 100);
    let medians: Vec<f64> = rep.rows.iter().map(|r| r.median_rel_error).collect();
    let monotone = medians.windows(2).all(|w| w[1] <= w[0]);
    report(
        11,
        "monotone improvement",
        monotone,
        format!("median rel errors at t=1e4,1e5,1e6: {medians:.4?}"),
        started.elapsed(),
        secs(360),
    );
}

#[test]
fn ac12_relative_error_transfer() {
    let started = Instant::now();
    let epsilons: Vec<f64> = (0..=40).map(|j| 10f64.powf(-3.0 + (0.2f64.log10() + 3.0) * j as f64 / 40.0)).collect();
    let mut cells = 0;
    let mut violations = 0;
    let mut worst = 0.0f64;
    for a in 2..=1024u64 {
        for i in 0..=24 {
            let gamma_a = 0.30 + 0.01 * i as f64;
            let truth = back_transform_h(gamma_a, a).unwrap();
            for &eps in &epsilons {
                for sign in [-1.0, 1.0] {
                    cells += 1;
                    let est = back_transform_h(gamma_a + sign * eps / 22.0, a).unwrap();
                    let rel = (est / truth - 1.0).abs();
                    worst = worst.max(rel / eps);
                    if rel > eps {
                        violations += 1;
                    }
                }
            }
        }
    }
    report(
        12,
        "relative-error transfer",
        violations == 0,
        format!("{cells} cells, {violations} violations, max |ratio-1|/eps {worst:.4}"),
        started.elapsed(),
        secs(5),
    );
}

#[test]
fn ac13_determinism() {
    let started = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let c = make_lazy_cycle(12).unwrap();
    let paths = [dir.path().join("a.traj"), dir.path().join("b.traj")];
    for p in &paths {
        simulate(&c, 50_000, 77, Start::Stationary).unwrap().save(p).unwrap();
    }
    let traj_same = std::fs::read(&paths[0]).unwrap() == std::fs::read(&paths[1]).unwrap();

    let spec = ExperimentSpec {
        version: 1,
        chain: ChainSpec::LazyCycle { n: 12 },
        lengths: vec![5_000, 20_000],
        replicas: 16,
        base_seed: 3,
        estimator: Estimator::Doubling,
        start: Start::Stationary,
        config: DoublingConfig::default(),
        output: None,
    };
    let mut csvs = Vec::new();
    for name in ["r1", "r2"] {
        let (csv, _) = run_experiment(&spec).unwrap().write_outputs(&dir.path().join(name)).unwrap();
        csvs.push(std::fs::read(csv).unwrap());
    }
    let csv_same = csvs[0] == csvs[1];
    report(
        13,
        "determinism",
        traj_same && csv_same,
        format!("trajectory files identical: {traj_same}; report CSVs identical: {csv_same}"),
        started.elapsed(),
        secs(10),
    );
}
