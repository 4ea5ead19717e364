//! Sliding-window functionals, the pair statistic and renewal-reward estimates.
//!
//! A functional sees the path through the window `(t - A, t]`. All kinds
//! here depend on the window only through its point count or through
//! differences of its points, so they are evaluated on absolute times.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::regen::Cycle;
use crate::simulate::PathRecord;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EstimatorError {
    #[error("horizon {t} exceeds the simulated horizon {horizon}")]
    HorizonExceeded { t: f64, horizon: f64 },
    #[error("window A = {window} must exceed the kernel support {support}")]
    SupportViolation { support: f64, window: f64 },
    #[error("need at least {needed} complete cycles, got {got}")]
    InsufficientCycles { needed: usize, got: usize },
    #[error("cycle window {cycle} differs from requested window {window}")]
    WindowMismatch { cycle: f64, window: f64 },
    #[error("invalid estimator input: {0}")]
    InvalidInput(String),
}

/// Shape of `w` on `[-A', 0]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PairShape {
    Constant { value: f64 },
    /// Piecewise linear through `(grid[i], values[i])`, grid increasing from `-A'` to `0`.
    Tabulated { grid: Vec<f64>, values: Vec<f64> },
}

/// Kernel `w` of the pair statistic, vanishing outside `[-support_len, 0]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PairKernelSpec", into = "PairKernelSpec")]
pub struct PairKernelW {
    support_len: f64,
    shape: PairShape,
    sup_norm: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PairKernelSpec {
    pub support_len: f64,
    pub shape: PairShape,
}

impl TryFrom<PairKernelSpec> for PairKernelW {
    type Error = EstimatorError;

    fn try_from(spec: PairKernelSpec) -> Result<Self, Self::Error> {
        PairKernelW::new(spec.support_len, spec.shape)
    }
}

impl From<PairKernelW> for PairKernelSpec {
    fn from(w: PairKernelW) -> Self {
        PairKernelSpec { support_len: w.support_len, shape: w.shape }
    }
}

impl PairKernelW {
    pub fn new(support_len: f64, shape: PairShape) -> Result<Self, EstimatorError> {
        if !(support_len.is_finite() && support_len >= 0.0) {
            return Err(EstimatorError::InvalidInput(format!("support length must be ≥ 0, got {support_len}")));
        }
        let sup_norm = match &shape {
            PairShape::Constant { value } => {
                if !value.is_finite() {
                    return Err(EstimatorError::InvalidInput("w must be finite".into()));
                }
                value.abs()
            }
            PairShape::Tabulated { grid, values } => {
                if grid.len() < 2 || grid.len() != values.len() {
                    return Err(EstimatorError::InvalidInput("tabulated w needs ≥ 2 matching points".into()));
                }
                if grid.windows(2).any(|g| !(g[1] > g[0])) || values.iter().any(|v| !v.is_finite()) {
                    return Err(EstimatorError::InvalidInput("tabulated w needs an increasing grid".into()));
                }
                let (first, last) = (grid[0], grid[grid.len() - 1]);
                if (first + support_len).abs() > 1e-12 || last.abs() > 1e-12 {
                    return Err(EstimatorError::InvalidInput(format!(
                        "tabulated w grid must span [-{support_len}, 0], got [{first}, {last}]"
                    )));
                }
                values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
            }
        };
        Ok(Self { support_len, shape, sup_norm })
    }

    pub fn constant(value: f64, support_len: f64) -> Result<Self, EstimatorError> {
        Self::new(support_len, PairShape::Constant { value })
    }

    pub fn support_len(&self) -> f64 {
        self.support_len
    }

    pub fn sup_norm(&self) -> f64 {
        self.sup_norm
    }

    pub fn shape(&self) -> &PairShape {
        &self.shape
    }

    /// `w(u)`, zero outside `[-A', 0]`.
    pub fn value(&self, u: f64) -> f64 {
        if !(u <= 0.0 && u >= -self.support_len) {
            return 0.0;
        }
        match &self.shape {
            PairShape::Constant { value } => *value,
            PairShape::Tabulated { grid, values } => {
                let k = grid.partition_point(|&g| g <= u).clamp(1, grid.len() - 1);
                let (g0, g1) = (grid[k - 1], grid[k]);
                let r = ((u - g0) / (g1 - g0)).clamp(0.0, 1.0);
                values[k - 1] + r * (values[k] - values[k - 1])
            }
        }
    }

    pub fn is_nonnegative(&self) -> bool {
        match &self.shape {
            PairShape::Constant { value } => *value >= 0.0,
            PairShape::Tabulated { values, .. } => values.iter().all(|v| *v >= 0.0),
        }
    }

    fn check_window(&self, window: f64) -> Result<(), EstimatorError> {
        if window <= self.support_len {
            return Err(EstimatorError::SupportViolation { support: self.support_len, window });
        }
        Ok(())
    }
}

/// `f` applied to the window contents `μ = N|(t-A, t]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum WindowFunctional {
    Constant { value: f64 },
    /// `μ((-A, 0])`.
    Count,
    /// `1{μ((-A, 0]) = k}`.
    CountIndicator { k: usize },
    /// `f_w`.
    PairKernel { w: PairKernelW },
    /// `max(a, min(b, inner))`.
    Clamped { inner: Box<WindowFunctional>, a: f64, b: f64 },
}

impl WindowFunctional {
    pub fn clamped(inner: WindowFunctional, a: f64, b: f64) -> Result<Self, EstimatorError> {
        if !(a <= b) {
            return Err(EstimatorError::InvalidInput(format!("clamp needs a ≤ b, got [{a}, {b}]")));
        }
        Ok(Self::Clamped { inner: Box::new(inner), a, b })
    }

    /// Rejects functionals that cannot be evaluated with window `A`.
    pub fn check(&self, window: f64) -> Result<(), EstimatorError> {
        if !(window.is_finite() && window >= 0.0) {
            return Err(EstimatorError::InvalidInput(format!("window A must be ≥ 0, got {window}")));
        }
        match self {
            Self::PairKernel { w } => w.check_window(window),
            Self::Clamped { inner, a, b } if a <= b => inner.check(window),
            Self::Clamped { a, b, .. } => {
                Err(EstimatorError::InvalidInput(format!("clamp needs a ≤ b, got [{a}, {b}]")))
            }
            _ => Ok(()),
        }
    }

    /// Value on the sorted window contents, all within a span shorter than `A`.
    pub fn eval(&self, window_points: &[f64], window: f64) -> f64 {
        match self {
            Self::Constant { value } => *value,
            Self::Count => window_points.len() as f64,
            Self::CountIndicator { k } => f64::from(u8::from(window_points.len() == *k)),
            Self::PairKernel { w } => pair_sum(window_points, w, |y, x| 1.0 / (y - x + window)),
            Self::Clamped { inner, a, b } => {
                let v = inner.eval(window_points, window).clamp(*a, *b);
                debug_assert!(v >= *a && v <= *b);
                v
            }
        }
    }
}

/// `Σ_{y ≤ x} w(y - x) g(y, x)` over ordered pairs of the sorted `points`, diagonal included.
fn pair_sum(points: &[f64], w: &PairKernelW, g: impl Fn(f64, f64) -> f64) -> f64 {
    let mut total = 0.0;
    for (j, &x) in points.iter().enumerate() {
        let lo = points[..=j].partition_point(|&y| y < x - w.support_len);
        // ties with later indices also satisfy y ≤ x
        let hi = j + 1 + points[j + 1..].partition_point(|&y| y <= x);
        for &y in &points[lo..hi] {
            let wv = w.value(y - x);
            if wv != 0.0 {
                total += wv * g(y, x);
            }
        }
    }
    total
}

/// `f_w(μ) = Σ_{-A<y≤x≤0} w(y-x)/(y-x+A)` for window contents `μ` given relative to `t`.
pub fn f_w_functional(mu: &[f64], w: &PairKernelW, window: f64) -> Result<f64, EstimatorError> {
    w.check_window(window)?;
    let mut points: Vec<f64> = mu.iter().copied().filter(|&x| x > -window && x <= 0.0).collect();
    points.sort_by(f64::total_cmp);
    Ok(pair_sum(&points, w, |y, x| 1.0 / (y - x + window)))
}

/// `∫_{t0}^{t1} f(N|(t-A, t]) dt` for sorted `times`, exact.
///
/// The window contents only change at event times and at event times plus
/// `A`, so the integral is a finite sum over those breakpoints.
pub fn window_integral(times: &[f64], f: &WindowFunctional, window: f64, t0: f64, t1: f64) -> f64 {
    if !(t1 > t0) {
        return 0.0;
    }
    // a point e is in the window exactly for t in [e, e + A), with e + A as computed here
    let lo = times.partition_point(|&e| e + window <= t0);
    let hi = times.partition_point(|&e| e <= t1);
    let relevant = &times[lo..hi.max(lo)];
    let mut breaks: Vec<f64> = Vec::with_capacity(2 * relevant.len() + 2);
    breaks.push(t0);
    breaks.extend(relevant.iter().flat_map(|&e| [e, e + window]).filter(|&b| b > t0 && b < t1));
    breaks.push(t1);
    breaks.sort_by(f64::total_cmp);
    breaks.dedup();

    let mut total = 0.0;
    for seg in breaks.windows(2) {
        let t = seg[0];
        let a = relevant.partition_point(|&e| e + window <= t);
        let b = relevant.partition_point(|&e| e <= t);
        total += f.eval(&relevant[a..b.max(a)], window) * (seg[1] - t);
    }
    total
}

/// `(1/T) ∫_0^T f(N|(t-A, t]) dt`.
pub fn sliding_average(path: &PathRecord, f: &WindowFunctional, window: f64, horizon: f64) -> Result<f64, EstimatorError> {
    f.check(window)?;
    if !(horizon > 0.0) {
        return Err(EstimatorError::InvalidInput(format!("T must be > 0, got {horizon}")));
    }
    if horizon > path.horizon {
        return Err(EstimatorError::HorizonExceeded { t: horizon, horizon: path.horizon });
    }
    Ok(window_integral(&path.event_times(), f, window, 0.0, horizon) / horizon)
}

/// `(1/T) Σ_{-A<y≤x≤T} w(y - x)`, diagonal included.
pub fn pair_statistic(path: &PathRecord, w: &PairKernelW, window: f64, horizon: f64) -> Result<f64, EstimatorError> {
    if !(horizon > 0.0) {
        return Err(EstimatorError::InvalidInput(format!("T must be > 0, got {horizon}")));
    }
    let times = path.event_times();
    let lo = times.partition_point(|&e| e <= -window);
    let hi = times.partition_point(|&e| e <= horizon);
    Ok(pair_sum(&times[lo..hi], w, |_, _| 1.0) / horizon)
}

/// Terms of the exact identity linking the pair statistic to the sliding
/// average of `f_w` on `[0, T]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IdentityTerms {
    /// Pair statistic minus sliding average of `f_w`.
    pub lhs: f64,
    /// `(1/T) Σ_{T-A<y≤x≤T} ((y-T+A)/(y-x+A)) w(y-x)`.
    pub tail: f64,
    /// `(1/T) Σ_{-A<y≤x<0} ((-x)/(y-x+A)) w(y-x)`; vanishes without points in `(-A, 0)`.
    pub head: f64,
    pub residual: f64,
}

pub fn boundary_identity(path: &PathRecord, w: &PairKernelW, window: f64, horizon: f64) -> Result<IdentityTerms, EstimatorError> {
    w.check_window(window)?;
    let f = WindowFunctional::PairKernel { w: w.clone() };
    let lhs = pair_statistic(path, w, window, horizon)? - sliding_average(path, &f, window, horizon)?;
    let times = path.event_times();
    let slice = |lo: f64, hi: f64| {
        let a = times.partition_point(|&e| e <= lo);
        let b = times.partition_point(|&e| e <= hi);
        &times[a..b.max(a)]
    };
    let tail = pair_sum(slice(horizon - window, horizon), w, |y, x| (y - horizon + window) / (y - x + window)) / horizon;
    let head = pair_sum(slice(-window, 0.0), w, |y, x| -x / (y - x + window)) / horizon;
    Ok(IdentityTerms { lhs, tail, head, residual: lhs - tail - head })
}

/// `LHS - RHS` of the boundary identity; zero up to rounding for every path.
pub fn boundary_identity_residual(path: &PathRecord, w: &PairKernelW, window: f64, horizon: f64) -> Result<f64, EstimatorError> {
    Ok(boundary_identity(path, w, window, horizon)?.residual)
}

/// `(R_k, τ_k)`: the reward `∫ f` over each cycle and its length.
pub fn cycle_rewards(cycles: &[Cycle], f: &WindowFunctional, window: f64) -> Result<Vec<(f64, f64)>, EstimatorError> {
    f.check(window)?;
    cycles
        .iter()
        .map(|c| {
            if c.window != window {
                return Err(EstimatorError::WindowMismatch { cycle: c.window, window });
            }
            Ok((window_integral(&c.times, f, window, 0.0, c.length), c.length))
        })
        .collect()
}

/// Renewal-reward estimate of `π^A f` with its delta-method standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PiEstimate {
    pub estimate: f64,
    pub std_error: f64,
    pub n_cycles: usize,
}

pub fn estimate_pi_cycles(cycles: &[Cycle], f: &WindowFunctional, window: f64) -> Result<PiEstimate, EstimatorError> {
    if cycles.len() < 2 {
        return Err(EstimatorError::InsufficientCycles { needed: 2, got: cycles.len() });
    }
    Ok(ratio_estimate(&cycle_rewards(cycles, f, window)?))
}

pub(crate) fn ratio_estimate(rewards: &[(f64, f64)]) -> PiEstimate {
    let n = rewards.len() as f64;
    let mean_r = rewards.iter().map(|r| r.0).sum::<f64>() / n;
    let mean_tau = rewards.iter().map(|r| r.1).sum::<f64>() / n;
    let estimate = mean_r / mean_tau;
    let resid_var = rewards.iter().map(|(r, t)| (r - estimate * t).powi(2)).sum::<f64>() / (n - 1.0);
    PiEstimate { estimate, std_error: (resid_var / n).sqrt() / mean_tau, n_cycles: rewards.len() }
}
