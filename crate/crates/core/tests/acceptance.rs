//! Acceptance battery. Runs without the libtest harness so that every
//! criterion prints its PASS/FAIL line; exits non-zero if any fails.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use hawkes_regen::concentration::{deviation_bound, epsilon_eta, ConcentrationInput};
use hawkes_regen::estimators::{PairKernelW, WindowFunctional};
use hawkes_regen::par::Execution;
use hawkes_regen::queue::{self, ServiceCdf};
use hawkes_regen::stats::{self, batch_means, mean_se};
use hawkes_regen::validate::{
    self, cluster_samples, cycle_lengths, cycle_summary, domination_report, ergodic_cross_check, identity_residuals,
    path_averages, queue_cycle_lengths,
};
use hawkes_regen::TransferFunction;

const SEED: u64 = 20_240_601;
const EXEC: Execution = Execution::Parallel;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: String) -> Outcome {
    Outcome { passed, detail }
}

fn exp_kernel() -> TransferFunction {
    TransferFunction::exponential(0.5, 1.0).unwrap()
}

fn within(observed: f64, expected: f64, se: f64) -> bool {
    (observed - expected).abs() <= 3.0 * se
}

fn c1_degenerate_takacs() -> Outcome {
    let taus = cycle_lengths(1.0, &TransferFunction::Zero, 1.0, 100_000, SEED, EXEC, 64).unwrap();
    let mean = batch_means(&taus, validate::N_BATCHES);
    let lt: Vec<f64> = taus.iter().map(|t| (-t).exp()).collect();
    let lt = batch_means(&lt, validate::N_BATCHES);
    let svc = ServiceCdf::degenerate(1.0).unwrap();
    let formula = queue::laplace_tau(&svc, 1.0, 1.0).unwrap().value;
    let e = std::f64::consts::E;
    let ok = within(mean.value, e, mean.se) && within(lt.value, formula, lt.se);
    outcome(
        ok,
        format!(
            "E[tau] = {:.5} ± {:.5} (e = {e:.5}); E[e^-tau] = {:.5} ± {:.5} (formula {formula:.5})",
            mean.value, mean.se, lt.value, lt.se
        ),
    )
}

fn c2_kummer() -> Outcome {
    let j = queue::kummer_j(1.0, 1.0, 1.0).unwrap().value;
    let j_ok = (j - (1.0 - (-1.0f64).exp())).abs() < 1e-10;
    let svc = ServiceCdf::exp_dom(1.0, 0.0).unwrap();
    let lt = queue::laplace_tau(&svc, 1.0, 1.0).unwrap().value;
    let i_quad = queue::integral_i_quadrature(&svc, 1.0, 1.0).unwrap().value;
    let lt_quad = 1.0 - 1.0 / (2.0 * i_quad);
    let route_ok = (lt - lt_quad).abs() < 1e-8;
    let taus = queue_cycle_lengths(1.0, &svc, 1_000_000, SEED, EXEC, 64);
    let v: Vec<f64> = taus.iter().map(|t| (-t).exp()).collect();
    let emp = batch_means(&v, validate::N_BATCHES);
    let mc_ok = within(emp.value, lt, emp.se);
    outcome(
        j_ok && route_ok && mc_ok,
        format!(
            "J(1) err {:.1e}; series {lt:.10} vs quadrature {lt_quad:.10} (diff {:.1e}); MC {:.5} ± {:.5}",
            (j - (1.0 - (-1.0f64).exp())).abs(),
            (lt - lt_quad).abs(),
            emp.value,
            emp.se
        ),
    )
}

fn c3_domination() -> Outcome {
    let h = exp_kernel();
    let theta_star = h.theta_star(1e-12).unwrap();
    let theta_ok = (theta_star - 0.5).abs() < 1e-6;
    let report = domination_report(&h, &[theta_star], &[1.0, 2.0, 4.0, 8.0], 100_000, SEED, EXEC).unwrap();
    let worst = report.rows.iter().map(|r| r.margin).fold(f64::INFINITY, f64::min);
    outcome(
        theta_ok && report.passed(),
        format!("theta* = {theta_star:.9}; min margin of P(L>x) <= e^(-theta x) + 3SE: {worst:.4}"),
    )
}

fn c4_mean_size() -> Outcome {
    let sizes: Vec<f64> = cluster_samples(&exp_kernel(), 100_000, SEED, EXEC, 64)
        .unwrap()
        .into_iter()
        .map(|(_, n)| n as f64)
        .collect();
    let e = mean_se(&sizes);
    outcome(within(e.value, 2.0, e.se), format!("mean size {:.4} ± {:.4} (expected 2)", e.value, e.se))
}

fn c5_identity() -> Outcome {
    let w = PairKernelW::constant(1.0, 1.0).unwrap();
    let terms = identity_residuals(1.0, &exp_kernel(), 2.0, &w, 50.0, 100, SEED, EXEC).unwrap();
    let worst = terms.iter().map(|t| t.residual.abs() / (1.0 + t.lhs.abs())).fold(0.0, f64::max);
    outcome(worst < 1e-9, format!("max |residual|/(1+|LHS|) over {} paths = {worst:.2e}", terms.len()))
}

fn c6_ergodic() -> Outcome {
    let r = ergodic_cross_check(1.0, &exp_kernel(), 1.0, &WindowFunctional::Count, 5000.0, 20_000, SEED, EXEC).unwrap();
    outcome(
        r.verdict.passed,
        format!(
            "time average {:.4} ± {:.4}, cycles {:.4} ± {:.4}",
            r.time_average.value, r.time_average.se, r.cycle_estimate.estimate, r.cycle_estimate.std_error
        ),
    )
}

fn c7_iid_cycles() -> Outcome {
    // one chunk: consecutive cycles of a single path
    let xs = cycle_lengths(1.0, &exp_kernel(), 1.0, 10_000, SEED, Execution::Sequential, 1).unwrap();
    let n = xs.len();
    let rho = stats::lag1_autocorrelation(&xs);
    let rho_ok = rho.abs() <= 3.0 / (n as f64).sqrt();
    let (first, second) = xs.split_at(n / 2);
    let d = stats::ks_two_sample(first, second);
    let crit = stats::ks_two_sample_critical_1pct(first.len(), second.len());
    outcome(
        rho_ok && d <= crit,
        format!("lag-1 rho = {rho:.4} (limit {:.4}); KS halves D = {d:.4} (crit {crit:.4})", 3.0 / (n as f64).sqrt()),
    )
}

fn c8_concentration() -> Outcome {
    // round trip: λ=1, A=0, [a,b]=[0,1], T=1000, E[τ]=1, E[e^{ατ}] from the θ=0.5 dominating queue.
    // α = 0.1 because E[e^{ατ^{0.5,0}}] diverges for α ≥ 0.1126.
    let m = queue::exp_moment_tau(1.0, 0.5, 0.0, 0.1).unwrap();
    let input = ConcentrationInput::exact(1.0, 0.0, 0.1, 0.5, (0.0, 1.0), 1000.0, 1.0, m).unwrap();
    let mut worst_rel = 0.0f64;
    for eta in [0.5, 0.1, 0.01] {
        let eps = epsilon_eta(&input, eta).unwrap();
        worst_rel = worst_rel.max((deviation_bound(&input, eps) - eta).abs() / eta);
    }
    let round_trip_ok = worst_rel < 1e-9;

    // empirical validity on 200 paths, bound mode with θ = θ* = 0.5
    let h = exp_kernel();
    let (window, horizon) = (1.0, 2000.0);
    let f = WindowFunctional::clamped(WindowFunctional::Count, 0.0, 5.0).unwrap();
    let bound = ConcentrationInput::bound(1.0, 0.5, window, 0.04, (0.0, 5.0), horizon).unwrap();
    let pi = cycle_summary(1.0, &h, window, &f, 200_000, SEED ^ 0xC0, EXEC).unwrap().pi.estimate;
    let avgs = path_averages(1.0, &h, window, &f, horizon, 200, SEED, EXEC).unwrap();
    let mut grid: Vec<f64> = (1..=200).map(|i| 0.025 * i as f64).collect();
    grid.extend([0.9, 0.5, 0.1, 0.01].iter().map(|&eta| epsilon_eta(&bound, eta).unwrap()));
    let mut checked = 0;
    let mut violations = 0;
    for &eps in &grid {
        let b = deviation_bound(&bound, eps);
        if b < 1.0 {
            checked += 1;
            let freq = avgs.iter().filter(|a| (*a - pi).abs() >= eps).count() as f64 / avgs.len() as f64;
            if freq > b {
                violations += 1;
            }
        }
    }
    let max_dev = avgs.iter().map(|a| (a - pi).abs()).fold(0.0, f64::max);
    outcome(
        round_trip_ok && violations == 0,
        format!(
            "round trip max rel err {worst_rel:.1e}; {checked} grid points with bound < 1 (eps_0.5 = {:.3}), \
             {violations} violations; max |avg - pi| = {max_dev:.4}",
            epsilon_eta(&bound, 0.5).unwrap()
        ),
    )
}

fn c9_transform_domination() -> Outcome {
    let h = exp_kernel();
    let theta_star = h.theta_star(1e-12).unwrap();
    let lengths: Vec<f64> = cluster_samples(&h, 100_000, SEED ^ 0x9, EXEC, 64).unwrap().into_iter().map(|(l, _)| l).collect();
    let mut min_gap = f64::INFINITY;
    for window in [0.0, 1.0] {
        let emp = ServiceCdf::empirical(lengths.clone(), window).unwrap();
        let dom = ServiceCdf::exp_dom(theta_star, window).unwrap();
        for s in [0.25, 0.5, 1.0, 2.0] {
            let a = queue::laplace_tau(&emp, 1.0, s).unwrap().value;
            let b = queue::laplace_tau(&dom, 1.0, s).unwrap().value;
            min_gap = min_gap.min(a - b);
        }
    }
    outcome(min_gap >= 0.0, format!("min over (A, s) of Empirical - ExpDom transform = {min_gap:.3e}"))
}

fn c10_shift_relations() -> Outcome {
    let mut worst = 0.0f64;
    for lambda in [0.5, 1.0, 2.0] {
        for service in [Some(0.5), Some(2.0), None] {
            let make = |window: f64| match service {
                Some(theta) => ServiceCdf::exp_dom(theta, window).unwrap(),
                None => ServiceCdf::degenerate(window).unwrap(),
            };
            for window in [0.0, 0.5, 1.5] {
                for s in [0.25, 1.0, 4.0] {
                    let base = queue::laplace_tau(&make(0.0), lambda, s).unwrap().value;
                    let (tau_a, busy_a) = queue::shift_relations(lambda, window, s, base).unwrap();
                    let svc = make(window);
                    let direct_tau = queue::laplace_tau(&svc, lambda, s).unwrap().value;
                    let direct_busy = queue::laplace_busy_ratio(&svc, lambda, s).unwrap().value;
                    worst = worst.max((tau_a - direct_tau).abs()).max((busy_a - direct_busy).abs());
                }
            }
        }
    }
    outcome(worst < 1e-10, format!("max |direct - shift route| over 81 points = {worst:.2e}"))
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome, Duration); 10] = [
        ("degenerate-service Takacs check", c1_degenerate_takacs, Duration::from_secs(30)),
        ("M/M/inf Kummer check", c2_kummer, Duration::from_secs(120)),
        ("cluster domination", c3_domination, Duration::from_secs(60)),
        ("cluster mean size", c4_mean_size, Duration::from_secs(60)),
        ("boundary identity", c5_identity, Duration::from_secs(60)),
        ("ergodic cross-check", c6_ergodic, Duration::from_secs(120)),
        ("regeneration i.i.d. properties", c7_iid_cycles, Duration::from_secs(60)),
        ("concentration round trip and validity", c8_concentration, Duration::from_secs(600)),
        ("domination of transforms", c9_transform_domination, Duration::from_secs(60)),
        ("shift-relation consistency", c10_shift_relations, Duration::from_secs(10)),
    ];
    let mut failures = 0;
    for (i, (name, run, limit)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let out = run();
        let elapsed = start.elapsed();
        let passed = out.passed && elapsed < *limit;
        if !passed {
            failures += 1;
        }
        println!(
            "[{}] {:>2}. {name}: {} ({:.2}s, limit {}s)",
            if passed { "PASS" } else { "FAIL" },
            i + 1,
            out.detail,
            elapsed.as_secs_f64(),
            limit.as_secs()
        );
    }
    println!("acceptance: {}/{} criteria passed", criteria.len() - failures, criteria.len());
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
