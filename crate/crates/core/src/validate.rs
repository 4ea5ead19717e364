//! Monte Carlo checks of the renewal formulas against simulation.
//!
//! Every comparison records the rule it used. Two-sided checks pass when
//! `|observed - expected| ≤ 3·SE`, one-sided checks when
//! `observed ≤ bound + 3·SE`; the margin is the slack left in the rule.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::estimators::{
    self, cycle_rewards, ratio_estimate, sliding_average, EstimatorError, PairKernelW, PiEstimate, WindowFunctional,
};
use crate::par::{chunk_sizes, map_chunks, Execution};
use crate::queue::{self, QueueError, ServiceCdf, ServiceKind};
use crate::regen::{extract_cycles, regeneration_times, Cycle, RegenError};
use crate::simulate::{sample_cluster, simulate_cycles, simulate_path, SimError};
use crate::stats::{self, batch_means, Estimate};
use crate::transfer::{TransferError, TransferFunction};
use crate::Rng;

pub const SCHEMA_VERSION: u32 = 1;
pub const N_BATCHES: usize = 50;
pub const MIN_REPLICATIONS: usize = 100;
/// Tolerance used when computing `θ*` for domination checks.
pub const THETA_STAR_TOL: f64 = 1e-12;

/// Seed offsets keeping the independent stages on disjoint streams.
const CLUSTER_STREAM: u64 = 0x5EED_C1A5_0000_0000;
const PATH_STREAM: u64 = 0x5EED_9A74_0000_0000;
const PI_STREAM: u64 = 0x5EED_0071_0000_0000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ValidateError {
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Regen(#[from] RegenError),
    #[error(transparent)]
    Queue(#[from] QueueError),
    #[error(transparent)]
    Estimator(#[from] EstimatorError),
    #[error(transparent)]
    Transfer(#[from] TransferError),
    #[error("outside the domain of the check: {0}")]
    OutOfDomain(String),
    #[error("invalid validation config: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub name: String,
    pub rule: String,
    pub observed: f64,
    pub expected: f64,
    pub tolerance: f64,
    pub margin: f64,
    pub passed: bool,
}

impl Verdict {
    /// `|observed - expected| ≤ 3·se`.
    pub fn within_3se(name: impl Into<String>, observed: f64, expected: f64, se: f64) -> Self {
        let tolerance = 3.0 * se;
        let margin = tolerance - (observed - expected).abs();
        Self { name: name.into(), rule: "|obs - exp| <= 3*SE".into(), observed, expected, tolerance, margin, passed: margin >= 0.0 }
    }

    /// `observed ≤ bound + 3·se`.
    pub fn below_3se(name: impl Into<String>, observed: f64, bound: f64, se: f64) -> Self {
        let tolerance = 3.0 * se;
        let margin = bound + tolerance - observed;
        Self { name: name.into(), rule: "obs <= bound + 3*SE".into(), observed, expected: bound, tolerance, margin, passed: margin >= 0.0 }
    }

    /// `|observed - expected| ≤ tolerance`.
    pub fn absolute(name: impl Into<String>, observed: f64, expected: f64, tolerance: f64) -> Self {
        let margin = tolerance - (observed - expected).abs();
        Self { name: name.into(), rule: format!("|obs - exp| <= {tolerance:e}"), observed, expected, tolerance, margin, passed: margin >= 0.0 }
    }

    /// `observed ≤ critical`.
    pub fn at_most(name: impl Into<String>, rule: impl Into<String>, observed: f64, critical: f64) -> Self {
        let margin = critical - observed;
        Self { name: name.into(), rule: rule.into(), observed, expected: critical, tolerance: critical, margin, passed: margin >= 0.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LaplacePoint {
    pub s: f64,
    pub value: f64,
    pub se: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McReport {
    pub n: usize,
    pub seed: u64,
    pub mean: Estimate,
    pub second_moment: Estimate,
    pub laplace_grid: Vec<LaplacePoint>,
    /// Formula values; `se` is the spread due to the estimated cluster-length law.
    pub formula_mean: Estimate,
    pub formula_second_moment: Estimate,
    pub formula_grid: Vec<LaplacePoint>,
    pub verdicts: Vec<Verdict>,
}

impl McReport {
    pub fn passed(&self) -> bool {
        self.verdicts.iter().all(|v| v.passed)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McOptions {
    pub seed: u64,
    pub exec: Execution,
    pub n_chunks: usize,
    pub s_grid: Vec<f64>,
    /// Clusters used to build the empirical length law.
    pub n_formula_clusters: usize,
    /// Groups used to estimate the formula's sampling spread.
    pub formula_groups: usize,
}

impl Default for McOptions {
    fn default() -> Self {
        Self {
            seed: 0,
            exec: Execution::default(),
            n_chunks: 64,
            s_grid: vec![0.25, 0.5, 1.0, 2.0],
            n_formula_clusters: 100_000,
            formula_groups: 10,
        }
    }
}

fn check_replications(n: usize) -> Result<(), ValidateError> {
    if n < MIN_REPLICATIONS {
        return Err(ValidateError::InvalidConfig(format!("need at least {MIN_REPLICATIONS} replications, got {n}")));
    }
    Ok(())
}

fn concat<T>(parts: Vec<Result<Vec<T>, ValidateError>>) -> Result<Vec<T>, ValidateError> {
    let mut out = Vec::new();
    for p in parts {
        out.extend(p?);
    }
    Ok(out)
}

/// Lengths of `n` consecutive regeneration cycles of null-start paths,
/// found by the regeneration sweep on simulated clusters.
pub fn cycle_lengths(
    lambda: f64,
    h: &TransferFunction,
    window: f64,
    n: usize,
    seed: u64,
    exec: Execution,
    n_chunks: usize,
) -> Result<Vec<f64>, ValidateError> {
    let sizes = chunk_sizes(n, n_chunks);
    concat(map_chunks(exec, seed, sizes.len(), |i, rng| {
        if sizes[i] == 0 {
            return Ok(Vec::new());
        }
        let path = simulate_cycles(lambda, h, window, sizes[i], rng)?;
        let report = regeneration_times(&path, window)?;
        debug_assert_eq!(report.n_cycles(), sizes[i]);
        Ok(report.cycle_lengths)
    }))
}

/// Complete cycles (with their window heads) of null-start paths.
pub fn simulate_cycle_records(
    lambda: f64,
    h: &TransferFunction,
    window: f64,
    n: usize,
    seed: u64,
    exec: Execution,
    n_chunks: usize,
) -> Result<Vec<Cycle>, ValidateError> {
    let sizes = chunk_sizes(n, n_chunks);
    concat(map_chunks(exec, seed, sizes.len(), |i, rng| {
        if sizes[i] == 0 {
            return Ok(Vec::new());
        }
        let path = simulate_cycles(lambda, h, window, sizes[i], rng)?;
        let report = regeneration_times(&path, window)?;
        Ok(extract_cycles(&path, &report)?.cycles)
    }))
}

fn sample_service<R: rand::Rng + ?Sized>(svc: &ServiceCdf, rng: &mut R) -> f64 {
    svc.window
        + match &svc.kind {
            ServiceKind::Degenerate => 0.0,
            ServiceKind::ExpDom { theta } => -(1.0 - rng.random::<f64>()).ln() / theta,
            ServiceKind::Empirical { lengths } => {
                let s = lengths.samples();
                s[rng.random_range(0..s.len())]
            }
        }
}

/// Renewal cycles of an M/G/∞ queue with arrival rate `λ` and the given service law.
pub fn simulate_queue_cycles<R: rand::Rng + ?Sized>(lambda: f64, svc: &ServiceCdf, n: usize, rng: &mut R) -> Vec<f64> {
    let mut out = Vec::with_capacity(n);
    let gap = |rng: &mut R| -(1.0 - rng.random::<f64>()).ln() / lambda;
    let mut cycle_start = 0.0;
    let mut t = gap(rng);
    while out.len() < n {
        let mut end = t + sample_service(svc, rng);
        t += gap(rng);
        while t < end {
            end = end.max(t + sample_service(svc, rng));
            t += gap(rng);
        }
        out.push(end - cycle_start);
        cycle_start = end;
    }
    out
}

pub fn queue_cycle_lengths(
    lambda: f64,
    svc: &ServiceCdf,
    n: usize,
    seed: u64,
    exec: Execution,
    n_chunks: usize,
) -> Vec<f64> {
    let sizes = chunk_sizes(n, n_chunks);
    map_chunks(exec, seed, sizes.len(), |i, rng| simulate_queue_cycles(lambda, svc, sizes[i], rng)).concat()
}

/// `(length, size)` of `n` independent clusters.
pub fn cluster_samples(
    h: &TransferFunction,
    n: usize,
    seed: u64,
    exec: Execution,
    n_chunks: usize,
) -> Result<Vec<(f64, usize)>, ValidateError> {
    let sizes = chunk_sizes(n, n_chunks);
    concat(map_chunks(exec, seed, sizes.len(), |i, rng: &mut Rng| {
        (0..sizes[i])
            .map(|_| {
                let c = sample_cluster(h, rng)?;
                Ok((c.length, c.len()))
            })
            .collect()
    }))
}

/// Empirical moments and transform of `τ^A` against the Takács formulas fed
/// with the empirical law of independently sampled cluster lengths.
pub fn mc_regen_moments(
    lambda: f64,
    h: &TransferFunction,
    window: f64,
    n_cycles: usize,
    opts: &McOptions,
) -> Result<McReport, ValidateError> {
    check_replications(n_cycles)?;
    h.check_subcritical()?;
    let taus = cycle_lengths(lambda, h, window, n_cycles, opts.seed, opts.exec, opts.n_chunks)?;
    let lengths: Vec<f64> = cluster_samples(h, opts.n_formula_clusters.max(1), opts.seed ^ CLUSTER_STREAM, opts.exec, opts.n_chunks)?
        .into_iter()
        .map(|(l, _)| l)
        .collect();

    let mean = batch_means(&taus, N_BATCHES);
    let squares: Vec<f64> = taus.iter().map(|t| t * t).collect();
    let second_moment = batch_means(&squares, N_BATCHES);
    let laplace_grid: Vec<LaplacePoint> = opts
        .s_grid
        .iter()
        .map(|&s| {
            let v: Vec<f64> = taus.iter().map(|t| (-s * t).exp()).collect();
            let e = batch_means(&v, N_BATCHES);
            LaplacePoint { s, value: e.value, se: e.se }
        })
        .collect();

    // formula values on the full sample, spread from disjoint groups
    let groups = opts.formula_groups.clamp(2, lengths.len().max(2));
    let group_sizes = chunk_sizes(lengths.len(), groups);
    let formulas = |sample: Vec<f64>| -> Result<Vec<f64>, ValidateError> {
        let svc = ServiceCdf::empirical(sample, window)?;
        let mut out = vec![
            queue::mean_tau(lambda, svc.mean_length(), window)?,
            queue::second_moment_tau(lambda, &svc)?,
        ];
        for &s in &opts.s_grid {
            out.push(queue::laplace_tau(&svc, lambda, s)?.value);
        }
        Ok(out)
    };
    let full = formulas(lengths.clone())?;
    let mut start = 0;
    let mut per_group = Vec::with_capacity(groups);
    for &k in &group_sizes {
        if k > 0 {
            per_group.push(formulas(lengths[start..start + k].to_vec())?);
        }
        start += k;
    }
    let spread = |j: usize| {
        let vals: Vec<f64> = per_group.iter().map(|g| g[j]).collect();
        if vals.len() < 2 {
            return 0.0;
        }
        stats::mean_se(&vals).se
    };
    let formula_est = |j: usize| Estimate { value: full[j], se: spread(j) };
    let formula_mean = formula_est(0);
    let formula_second_moment = formula_est(1);
    let formula_grid: Vec<LaplacePoint> = opts
        .s_grid
        .iter()
        .enumerate()
        .map(|(k, &s)| {
            let e = formula_est(2 + k);
            LaplacePoint { s, value: e.value, se: e.se }
        })
        .collect();

    let joint = |a: f64, b: f64| a.hypot(b);
    let mut verdicts = vec![
        Verdict::within_3se("mean_tau", mean.value, formula_mean.value, joint(mean.se, formula_mean.se)),
        Verdict::within_3se(
            "second_moment_tau",
            second_moment.value,
            formula_second_moment.value,
            joint(second_moment.se, formula_second_moment.se),
        ),
    ];
    for (emp, form) in laplace_grid.iter().zip(&formula_grid) {
        verdicts.push(Verdict::within_3se(
            format!("laplace_tau(s={})", emp.s),
            emp.value,
            form.value,
            joint(emp.se, form.se),
        ));
    }
    Ok(McReport {
        n: n_cycles,
        seed: opts.seed,
        mean,
        second_moment,
        laplace_grid,
        formula_mean,
        formula_second_moment,
        formula_grid,
        verdicts,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DominationRow {
    pub theta: f64,
    pub x: f64,
    pub p_hat: f64,
    pub se: f64,
    /// `e^{-θx}`.
    pub bound: f64,
    /// `e^{1-p} e^{-θx}` with `p = ‖h‖₁`.
    pub looser_bound: f64,
    pub passed: bool,
    pub margin: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DominationReport {
    pub theta_star: f64,
    pub l1_norm: f64,
    pub n_clusters: usize,
    pub seed: u64,
    pub rows: Vec<DominationRow>,
}

impl DominationReport {
    pub fn passed(&self) -> bool {
        self.rows.iter().all(|r| r.passed)
    }
}

/// One-sided checks `P̂(L > x) ≤ e^{-θx} + 3·SE` for `θ ≤ θ*`.
pub fn domination_report(
    h: &TransferFunction,
    thetas: &[f64],
    xs: &[f64],
    n_clusters: usize,
    seed: u64,
    exec: Execution,
) -> Result<DominationReport, ValidateError> {
    check_replications(n_clusters)?;
    let theta_star = h.theta_star(THETA_STAR_TOL)?;
    if let Some(&bad) = thetas.iter().find(|&&t| !(t > 0.0 && t <= theta_star * (1.0 + 1e-9))) {
        return Err(ValidateError::OutOfDomain(format!("theta = {bad} must lie in (0, θ* = {theta_star}]")));
    }
    let lengths: Vec<f64> = cluster_samples(h, n_clusters, seed, exec, 64)?.into_iter().map(|(l, _)| l).collect();
    let n = lengths.len() as f64;
    let p = h.l1_norm();
    let mut rows = Vec::new();
    for &theta in thetas {
        for &x in xs {
            let p_hat = lengths.iter().filter(|&&l| l > x).count() as f64 / n;
            let se = (p_hat * (1.0 - p_hat) / n).sqrt();
            let bound = (-theta * x).exp();
            let margin = bound + 3.0 * se - p_hat;
            rows.push(DominationRow {
                theta,
                x,
                p_hat,
                se,
                bound,
                looser_bound: (1.0 - p).exp() * bound,
                passed: margin >= 0.0,
                margin,
            });
        }
    }
    Ok(DominationReport { theta_star, l1_norm: p, n_clusters, seed, rows })
}

/// `σ²(f) = E[(R - π τ)²] / E[τ]` with a batch-means standard error.
pub fn clt_sigma2(cycles: &[Cycle], f: &WindowFunctional, window: f64, pi_hat: f64) -> Result<Estimate, ValidateError> {
    if cycles.len() < MIN_REPLICATIONS {
        return Err(EstimatorError::InsufficientCycles { needed: MIN_REPLICATIONS, got: cycles.len() }.into());
    }
    let rewards = cycle_rewards(cycles, f, window)?;
    Ok(sigma2_from_rewards(&rewards, pi_hat))
}

fn sigma2_from_rewards(rewards: &[(f64, f64)], pi_hat: f64) -> Estimate {
    let sq: Vec<(f64, f64)> = rewards.iter().map(|(r, t)| ((r - pi_hat * t).powi(2), *t)).collect();
    let value = sq.iter().map(|q| q.0).sum::<f64>() / sq.iter().map(|q| q.1).sum::<f64>();
    let sizes = chunk_sizes(sq.len(), N_BATCHES.min(sq.len() / 2).max(1));
    let mut start = 0;
    let batch: Vec<f64> = sizes
        .iter()
        .map(|&k| {
            let part = &sq[start..start + k];
            start += k;
            part.iter().map(|q| q.0).sum::<f64>() / part.iter().map(|q| q.1).sum::<f64>()
        })
        .collect();
    let se = if batch.len() < 2 { f64::NAN } else { stats::mean_se(&batch).se };
    Estimate { value, se }
}

/// Renewal-reward `π^A f` and `σ²(f)` from `n` cycles.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CycleSummary {
    pub pi: PiEstimate,
    pub sigma2: Estimate,
    pub mean_cycle: f64,
}

pub fn cycle_summary(
    lambda: f64,
    h: &TransferFunction,
    window: f64,
    f: &WindowFunctional,
    n_cycles: usize,
    seed: u64,
    exec: Execution,
) -> Result<CycleSummary, ValidateError> {
    check_replications(n_cycles)?;
    f.check(window)?;
    let sizes = chunk_sizes(n_cycles, 64);
    let rewards = concat(map_chunks(exec, seed, sizes.len(), |i, rng| {
        if sizes[i] == 0 {
            return Ok(Vec::new());
        }
        let path = simulate_cycles(lambda, h, window, sizes[i], rng)?;
        let report = regeneration_times(&path, window)?;
        Ok(cycle_rewards(&extract_cycles(&path, &report)?.cycles, f, window)?)
    }))?;
    let pi = ratio_estimate(&rewards);
    let sigma2 = sigma2_from_rewards(&rewards, pi.estimate);
    let mean_cycle = stats::mean(&rewards.iter().map(|r| r.1).collect::<Vec<_>>());
    Ok(CycleSummary { pi, sigma2, mean_cycle })
}

/// Sliding averages over `[0, T]` of independent null-start paths.
#[allow(clippy::too_many_arguments)]
pub fn path_averages(
    lambda: f64,
    h: &TransferFunction,
    window: f64,
    f: &WindowFunctional,
    horizon: f64,
    n_paths: usize,
    seed: u64,
    exec: Execution,
) -> Result<Vec<f64>, ValidateError> {
    map_chunks(exec, seed, n_paths, |_, rng| {
        let path = simulate_path(lambda, h, &[], horizon, rng)?;
        Ok(sliding_average(&path, f, window, horizon)?)
    })
    .into_iter()
    .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErgodicReport {
    pub horizon: f64,
    /// `(1/T)∫ f` on one path, SE `√(σ̂²/T)`.
    pub time_average: Estimate,
    pub cycle_estimate: PiEstimate,
    pub sigma2: Estimate,
    pub verdict: Verdict,
}

/// Time average on one long path against the renewal-reward estimate from
/// independent cycles.
#[allow(clippy::too_many_arguments)]
pub fn ergodic_cross_check(
    lambda: f64,
    h: &TransferFunction,
    window: f64,
    f: &WindowFunctional,
    horizon: f64,
    n_cycles: usize,
    seed: u64,
    exec: Execution,
) -> Result<ErgodicReport, ValidateError> {
    let summary = cycle_summary(lambda, h, window, f, n_cycles, seed ^ PI_STREAM, exec)?;
    let avg = path_averages(lambda, h, window, f, horizon, 1, seed ^ PATH_STREAM, exec)?[0];
    let time_average = Estimate { value: avg, se: (summary.sigma2.value / horizon).sqrt() };
    let verdict = Verdict::within_3se(
        "time_average_vs_cycles",
        time_average.value,
        summary.pi.estimate,
        time_average.se.hypot(summary.pi.std_error),
    );
    Ok(ErgodicReport { horizon, time_average, cycle_estimate: summary.pi, sigma2: summary.sigma2, verdict })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CltReport {
    pub horizon: f64,
    pub n_paths: usize,
    pub pi: f64,
    pub sigma2: f64,
    pub ks_statistic: f64,
    pub verdict: Verdict,
}

/// KS test of `√T(avg - π̂)/σ̂` over independent paths against `N(0, 1)`.
#[allow(clippy::too_many_arguments)]
pub fn clt_check(
    lambda: f64,
    h: &TransferFunction,
    window: f64,
    f: &WindowFunctional,
    horizon: f64,
    n_paths: usize,
    n_cycles: usize,
    seed: u64,
    exec: Execution,
) -> Result<CltReport, ValidateError> {
    check_replications(n_paths)?;
    let summary = cycle_summary(lambda, h, window, f, n_cycles, seed ^ PI_STREAM, exec)?;
    let (pi, sigma2) = (summary.pi.estimate, summary.sigma2.value);
    if !(sigma2 > 0.0) {
        return Err(ValidateError::OutOfDomain("σ²(f) = 0; the normalised error is degenerate".into()));
    }
    let z: Vec<f64> = path_averages(lambda, h, window, f, horizon, n_paths, seed ^ PATH_STREAM, exec)?
        .into_iter()
        .map(|a| horizon.sqrt() * (a - pi) / sigma2.sqrt())
        .collect();
    let d = stats::ks_statistic(&z, stats::standard_normal_cdf);
    let verdict = Verdict::at_most("clt_ks_normal", "KS <= 1.628/sqrt(n) (1% level)", d, stats::ks_critical_1pct(n_paths));
    Ok(CltReport { horizon, n_paths, pi, sigma2, ks_statistic: d, verdict })
}

/// Boundary-identity residuals on independent null-start paths.
#[allow(clippy::too_many_arguments)]
pub fn identity_residuals(
    lambda: f64,
    h: &TransferFunction,
    window: f64,
    w: &PairKernelW,
    horizon: f64,
    n_paths: usize,
    seed: u64,
    exec: Execution,
) -> Result<Vec<estimators::IdentityTerms>, ValidateError> {
    map_chunks(exec, seed, n_paths, |_, rng| {
        let path = simulate_path(lambda, h, &[], horizon, rng)?;
        Ok(estimators::boundary_identity(&path, w, window, horizon)?)
    })
    .into_iter()
    .collect()
}

/// Battery run by [`full_report`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ValidateConfig {
    pub lambda: f64,
    pub transfer: TransferFunction,
    #[serde(rename = "A")]
    pub window: f64,
    pub seed: u64,
    pub exec: Execution,
    pub n_cycles: usize,
    pub n_clusters: usize,
    /// Defaults to `[θ*]`.
    pub theta_grid: Option<Vec<f64>>,
    pub x_grid: Vec<f64>,
    pub s_grid: Vec<f64>,
    pub identity_paths: usize,
    pub identity_horizon: f64,
    pub ergodic_horizon: f64,
    pub clt_paths: usize,
    pub clt_horizon: f64,
}

impl Default for ValidateConfig {
    fn default() -> Self {
        Self {
            lambda: 1.0,
            transfer: TransferFunction::Exponential { alpha: 0.5, beta: 1.0 },
            window: 1.0,
            seed: 1,
            exec: Execution::default(),
            n_cycles: 20_000,
            n_clusters: 100_000,
            theta_grid: None,
            x_grid: vec![1.0, 2.0, 4.0, 8.0],
            s_grid: vec![0.25, 0.5, 1.0, 2.0],
            identity_paths: 100,
            identity_horizon: 50.0,
            ergodic_horizon: 5000.0,
            clt_paths: 500,
            clt_horizon: 2000.0,
        }
    }
}

impl ValidateConfig {
    pub fn check(&self) -> Result<(), ValidateError> {
        if !(self.lambda.is_finite() && self.lambda > 0.0) {
            return Err(ValidateError::InvalidConfig(format!("lambda must be > 0, got {}", self.lambda)));
        }
        if !(self.window.is_finite() && self.window >= 0.0) {
            return Err(ValidateError::InvalidConfig(format!("A must be ≥ 0, got {}", self.window)));
        }
        for (name, n) in [
            ("n_cycles", self.n_cycles),
            ("n_clusters", self.n_clusters),
            ("identity_paths", self.identity_paths),
            ("clt_paths", self.clt_paths),
        ] {
            if n < MIN_REPLICATIONS {
                return Err(ValidateError::InvalidConfig(format!("{name} must be ≥ {MIN_REPLICATIONS}, got {n}")));
            }
        }
        if !(self.identity_horizon > 0.0 && self.ergodic_horizon > 0.0 && self.clt_horizon > 0.0) {
            return Err(ValidateError::InvalidConfig("horizons must be > 0".into()));
        }
        self.transfer.check_subcritical()?;
        Ok(())
    }

    /// `w ≡ 1` on `[-A/2, 0]`, or on `[-1, 0]` when `A > 2`.
    fn pair_kernel(&self) -> Result<PairKernelW, ValidateError> {
        let support = if self.window > 2.0 { 1.0 } else { self.window / 2.0 };
        Ok(PairKernelW::constant(1.0, support)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentitySummary {
    pub n_paths: usize,
    pub max_residual: f64,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FullReport {
    pub schema: u32,
    pub seed: u64,
    pub config: ValidateConfig,
    pub moments: Option<McReport>,
    pub domination: Option<DominationReport>,
    pub identity: Option<IdentitySummary>,
    pub ergodic: Option<ErgodicReport>,
    pub clt: Option<CltReport>,
    /// Errors of sub-checks that could not run.
    pub findings: Vec<String>,
    pub passed: bool,
}

/// Runs the whole battery; a failing sub-check is recorded, not fatal.
pub fn full_report(config: &ValidateConfig) -> Result<FullReport, ValidateError> {
    config.check()?;
    let (lambda, h, window, seed, exec) = (config.lambda, &config.transfer, config.window, config.seed, config.exec);
    let mut findings = Vec::new();
    let mut record = |name: &str, e: ValidateError| findings.push(format!("{name}: {e}"));

    let opts = McOptions { seed, exec, s_grid: config.s_grid.clone(), n_formula_clusters: config.n_clusters, ..McOptions::default() };
    let moments = mc_regen_moments(lambda, h, window, config.n_cycles, &opts).map_err(|e| record("moments", e)).ok();

    let domination = h
        .theta_star(THETA_STAR_TOL)
        .map_err(ValidateError::from)
        .and_then(|ts| {
            let thetas = config.theta_grid.clone().unwrap_or_else(|| vec![ts]);
            domination_report(h, &thetas, &config.x_grid, config.n_clusters, seed ^ CLUSTER_STREAM, exec)
        })
        .map_err(|e| record("domination", e))
        .ok();

    let identity = config
        .pair_kernel()
        .and_then(|w| {
            identity_residuals(lambda, h, window, &w, config.identity_horizon, config.identity_paths, seed ^ PATH_STREAM, exec)
        })
        .map(|terms| {
            let worst = terms.iter().map(|t| t.residual.abs() / (1.0 + t.lhs.abs())).fold(0.0, f64::max);
            IdentitySummary {
                n_paths: terms.len(),
                max_residual: worst,
                verdict: Verdict::at_most("boundary_identity", "|residual|/(1+|LHS|) <= 1e-9", worst, 1e-9),
            }
        })
        .map_err(|e| record("identity", e))
        .ok();

    let f = WindowFunctional::Count;
    let ergodic = ergodic_cross_check(lambda, h, window, &f, config.ergodic_horizon, config.n_cycles, seed, exec)
        .map_err(|e| record("ergodic", e))
        .ok();
    let clt = clt_check(lambda, h, window, &f, config.clt_horizon, config.clt_paths, config.n_cycles, seed, exec)
        .map_err(|e| record("clt", e))
        .ok();

    let passed = findings.is_empty()
        && moments.as_ref().is_some_and(McReport::passed)
        && domination.as_ref().is_some_and(DominationReport::passed)
        && identity.as_ref().is_some_and(|i| i.verdict.passed)
        && ergodic.as_ref().is_some_and(|e| e.verdict.passed)
        && clt.as_ref().is_some_and(|c| c.verdict.passed);
    Ok(FullReport { schema: SCHEMA_VERSION, seed, config: config.clone(), moments, domination, identity, ergodic, clt, findings, passed })
}
