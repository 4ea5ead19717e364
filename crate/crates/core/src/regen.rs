//! A-regeneration times of simulated paths.
//!
//! `τ_k` is the end of a busy period of the M/G/∞ queue whose jobs are the
//! ancestors, each served for `L_n + A`. The genealogy recorded in a
//! [`PathRecord`] makes this exact; event times alone do not determine it.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::simulate::PathRecord;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RegenError {
    #[error("job arrivals are not sorted (index {index})")]
    UnsortedInput { index: usize },
    #[error("invalid job or window: {0}")]
    InvalidInput(String),
    #[error("report does not belong to this path (horizon {report} vs {path})")]
    MismatchedReport { report: f64, path: f64 },
}

/// Maximal busy intervals of an M/G/∞ queue fed with `(arrival, service)` jobs.
///
/// An arrival exactly at the running end of a busy period opens a new one.
pub fn busy_sweep(jobs: &[(f64, f64)]) -> Result<Vec<(f64, f64)>, RegenError> {
    if let Some(index) = jobs.windows(2).position(|w| w[1].0 < w[0].0) {
        return Err(RegenError::UnsortedInput { index: index + 1 });
    }
    if jobs.iter().any(|(a, s)| !a.is_finite() || !(s.is_finite() && *s >= 0.0)) {
        return Err(RegenError::InvalidInput("jobs need finite arrivals and services ≥ 0".into()));
    }
    let mut periods: Vec<(f64, f64)> = Vec::new();
    for &(arrival, service) in jobs {
        let end = arrival + service;
        match periods.last_mut() {
            Some(current) if arrival < current.1 => current.1 = current.1.max(end),
            _ => periods.push((arrival, end)),
        }
    }
    Ok(periods)
}

/// Regeneration times of one path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegenReport {
    #[serde(rename = "A")]
    pub window: f64,
    pub tau0: f64,
    /// `τ_1 < τ_2 < …`, all within the path horizon.
    pub taus: Vec<f64>,
    pub cycle_lengths: Vec<f64>,
    /// The path continues past the last reported regeneration time.
    pub incomplete_tail: bool,
    pub horizon: f64,
}

impl RegenReport {
    pub fn n_cycles(&self) -> usize {
        self.taus.len()
    }

    /// Number of regenerations `τ_k` (k ≥ 1) at or before `t`.
    pub fn count_by(&self, t: f64) -> usize {
        self.taus.partition_point(|&tau| tau <= t)
    }

    fn last_regeneration(&self) -> f64 {
        self.taus.last().copied().unwrap_or(self.tau0)
    }
}

fn check_window(window: f64) -> Result<(), RegenError> {
    if !(window.is_finite() && window >= 0.0) {
        return Err(RegenError::InvalidInput(format!("window A must be ≥ 0, got {window}")));
    }
    Ok(())
}

/// Service of the job standing for `D₀`, if `D₀` still matters on `(-A, ∞)`.
fn initial_service(path: &PathRecord, window: f64) -> Option<f64> {
    path.initial_last_point().map(|u| u + window).filter(|s| *s > 0.0)
}

fn jobs(path: &PathRecord, window: f64) -> Vec<(f64, f64)> {
    initial_service(path, window)
        .map(|s| (0.0, s))
        .into_iter()
        .chain(path.ancestors.iter().map(|a| (a.arrival, a.cluster.length + window)))
        .collect()
}

/// A-regeneration times `τ₀ < τ₁ < …` of `path`, truncated at its horizon.
pub fn regeneration_times(path: &PathRecord, window: f64) -> Result<RegenReport, RegenError> {
    check_window(window)?;
    let has_initial = initial_service(path, window).is_some();
    let periods = busy_sweep(&jobs(path, window))?;
    let mut ends = periods.into_iter().map(|(_, end)| end);
    let tau0 = if has_initial { ends.next().expect("initial job opens a period") } else { 0.0 };
    let taus: Vec<f64> = if tau0 <= path.horizon {
        ends.take_while(|&end| end <= path.horizon).collect()
    } else {
        Vec::new()
    };
    let cycle_lengths = std::iter::once(tau0)
        .chain(taus.iter().copied())
        .collect::<Vec<_>>()
        .windows(2)
        .map(|w| w[1] - w[0])
        .collect();
    let mut report =
        RegenReport { window, tau0, taus, cycle_lengths, incomplete_tail: false, horizon: path.horizon };
    report.incomplete_tail = path.horizon > report.last_regeneration();
    Ok(report)
}

/// Checks every reported time directly against the genealogy: all clusters
/// of ancestors arrived by `τ` (and all of `D₀`) have died out before `τ - A`
/// in the sense `T_n + (L_n + A) ≤ τ`, and for `k ≥ 1` the bound is attained.
pub fn certify(path: &PathRecord, report: &RegenReport) -> bool {
    let window = report.window;
    let mut prefix_max = Vec::with_capacity(path.ancestors.len() + 1);
    prefix_max.push(f64::NEG_INFINITY);
    for a in &path.ancestors {
        let end = a.arrival + (a.cluster.length + window);
        prefix_max.push(prefix_max.last().unwrap().max(end));
    }
    let initial_end = initial_service(path, window).map(|s| 0.0 + s).unwrap_or(f64::NEG_INFINITY);
    let latest_end = |tau: f64| {
        let k = path.ancestors.partition_point(|a| a.arrival <= tau);
        prefix_max[k].max(initial_end)
    };
    if latest_end(report.tau0) > report.tau0 {
        return false;
    }
    report.taus.iter().all(|&tau| latest_end(tau) == tau)
        && report.taus.windows(2).all(|w| w[0] < w[1])
        && report.taus.first().is_none_or(|&t| t > report.tau0)
}

/// One regeneration cycle: the events of `(start - A, start + length]`, shifted by `-start`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cycle {
    pub start: f64,
    pub length: f64,
    pub window: f64,
    /// Sorted times in `(-window, length]`.
    pub times: Vec<f64>,
}

/// The delay `N|(-A, τ₀]` and the complete cycles of a path.
#[derive(Debug, Clone, PartialEq)]
pub struct Decomposition {
    pub delay: Vec<f64>,
    pub cycles: Vec<Cycle>,
}

fn slice_between(times: &[f64], lo: f64, hi: f64) -> &[f64] {
    let a = times.partition_point(|&t| t <= lo);
    let b = times.partition_point(|&t| t <= hi);
    &times[a..b.max(a)]
}

/// Splits a path into its delay and complete cycles.
pub fn extract_cycles(path: &PathRecord, report: &RegenReport) -> Result<Decomposition, RegenError> {
    if report.horizon != path.horizon {
        return Err(RegenError::MismatchedReport { report: report.horizon, path: path.horizon });
    }
    let times = path.event_times();
    let window = report.window;
    let delay = slice_between(&times, -window, report.tau0).to_vec();
    let mut cycles = Vec::with_capacity(report.taus.len());
    let mut start = report.tau0;
    for &end in &report.taus {
        let shifted = slice_between(&times, start - window, end).iter().map(|t| t - start).collect();
        cycles.push(Cycle { start, length: end - start, window, times: shifted });
        start = end;
    }
    Ok(Decomposition { delay, cycles })
}
