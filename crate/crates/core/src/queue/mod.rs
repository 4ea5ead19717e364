//! Renewal time `τ^A` of the M/G/∞ queue behind A-regeneration.
//!
//! Arrivals have rate `λ` and service `L + A`. Everything here is built on
//! the compensator `C(t) = ∫_0^t (1 - F^A(u)) du` and the integral
//!
//! ```text
//! I(s) = ∫_0^∞ exp(-s t - λ C(t)) dt,     E[e^{-sτ}] = 1 - 1 / ((λ + s) I(s)).
//! ```
//!
//! For the degenerate and empirical service laws `C` is piecewise linear, so
//! `I` and the second-moment integral are sums of exact exponential pieces.
//! For the exponential dominating law `G^θ` the integral is a Kummer-type
//! series, which also continues the transform to negative `s` down to its
//! convergence abscissa (see [`tau_abscissa`]); an adaptive Gauss–Kronrod
//! route is kept alongside as an independent check.

pub mod kummer;
pub mod quadrature;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use kummer::SeriesError;
use quadrature::{integrate, QuadOptions};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum QueueError {
    #[error("invalid queue input: {0}")]
    InvalidInput(String),
    #[error("integral diverges at s = {s}")]
    Divergent { s: f64 },
    #[error("quadrature did not converge (estimate {value}, error {abs_error})")]
    NonConvergent { value: f64, abs_error: f64 },
    #[error("series has a pole at s = {s}")]
    PoleAt { s: f64 },
    #[error("outside the domain of the formula: {0}")]
    OutOfDomain(String),
    #[error("degenerate denominator: base transform equals 1")]
    DegenerateDenominator,
}

/// Survival below this level is treated as the exponential tail.
pub const TAIL_TOL: f64 = 1e-14;

/// Sorted sample of cluster lengths.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct EmpiricalLengths {
    sorted: Vec<f64>,
}

impl TryFrom<Vec<f64>> for EmpiricalLengths {
    type Error = QueueError;

    fn try_from(mut sample: Vec<f64>) -> Result<Self, Self::Error> {
        if sample.is_empty() {
            return Err(QueueError::InvalidInput("empirical law needs at least one sample".into()));
        }
        if sample.iter().any(|l| !(l.is_finite() && *l >= 0.0)) {
            return Err(QueueError::InvalidInput("cluster lengths must be finite and ≥ 0".into()));
        }
        sample.sort_by(f64::total_cmp);
        Ok(Self { sorted: sample })
    }
}

impl From<EmpiricalLengths> for Vec<f64> {
    fn from(e: EmpiricalLengths) -> Self {
        e.sorted
    }
}

impl EmpiricalLengths {
    pub fn new(sample: Vec<f64>) -> Result<Self, QueueError> {
        Self::try_from(sample)
    }

    pub fn samples(&self) -> &[f64] {
        &self.sorted
    }

    pub fn mean(&self) -> f64 {
        self.sorted.iter().sum::<f64>() / self.sorted.len() as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ServiceKind {
    /// `L ≡ 0`.
    Degenerate,
    /// `L ~ Exp(θ)`, CDF `G^θ`.
    ExpDom { theta: f64 },
    /// Right-continuous step CDF of a sample of cluster lengths.
    Empirical { lengths: EmpiricalLengths },
}

/// Service law `F^A(x) = F(x - A)` of the queue.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ServiceCdf {
    pub kind: ServiceKind,
    #[serde(rename = "A")]
    pub window: f64,
}

/// Piece of a piecewise-linear compensator: on `[start, start + len)`,
/// `C(t) = offset + slope (t - start)`. The last piece has infinite length.
#[derive(Debug, Clone, Copy)]
struct Piece {
    start: f64,
    len: f64,
    offset: f64,
    slope: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LaplaceResult<V = f64> {
    pub value: V,
    pub abs_error_estimate: f64,
}

impl ServiceCdf {
    fn checked(kind: ServiceKind, window: f64) -> Result<Self, QueueError> {
        if !(window.is_finite() && window >= 0.0) {
            return Err(QueueError::InvalidInput(format!("window A must be ≥ 0, got {window}")));
        }
        if let ServiceKind::ExpDom { theta } = kind {
            if !(theta.is_finite() && theta > 0.0) {
                return Err(QueueError::InvalidInput(format!("theta must be > 0, got {theta}")));
            }
        }
        Ok(Self { kind, window })
    }

    pub fn degenerate(window: f64) -> Result<Self, QueueError> {
        Self::checked(ServiceKind::Degenerate, window)
    }

    pub fn exp_dom(theta: f64, window: f64) -> Result<Self, QueueError> {
        Self::checked(ServiceKind::ExpDom { theta }, window)
    }

    pub fn empirical(lengths: Vec<f64>, window: f64) -> Result<Self, QueueError> {
        Self::checked(ServiceKind::Empirical { lengths: EmpiricalLengths::new(lengths)? }, window)
    }

    /// `E[L]`.
    pub fn mean_length(&self) -> f64 {
        match &self.kind {
            ServiceKind::Degenerate => 0.0,
            ServiceKind::ExpDom { theta } => 1.0 / theta,
            ServiceKind::Empirical { lengths } => lengths.mean(),
        }
    }

    /// `E[L] + A`, the total integral of `1 - F^A`.
    pub fn mean_service(&self) -> f64 {
        self.mean_length() + self.window
    }

    /// `F^A(x) = F(x - A)`.
    pub fn cdf(&self, x: f64) -> f64 {
        let y = x - self.window;
        if y < 0.0 {
            return 0.0;
        }
        match &self.kind {
            ServiceKind::Degenerate => 1.0,
            ServiceKind::ExpDom { theta } => -(-theta * y).exp_m1(),
            ServiceKind::Empirical { lengths } => {
                lengths.sorted.partition_point(|&l| l <= y) as f64 / lengths.sorted.len() as f64
            }
        }
    }

    /// `∫_0^t (1 - F^A(u)) du`.
    pub fn compensator(&self, t: f64) -> f64 {
        let t = t.max(0.0);
        let a = self.window;
        let tail = (t - a).max(0.0);
        t.min(a)
            + match &self.kind {
                ServiceKind::Degenerate => 0.0,
                ServiceKind::ExpDom { theta } => -(-theta * tail).exp_m1() / theta,
                ServiceKind::Empirical { lengths } => {
                    // mean of min(tail, L_i)
                    let s = &lengths.sorted;
                    let k = s.partition_point(|&l| l <= tail);
                    (s[..k].iter().sum::<f64>() + (s.len() - k) as f64 * tail) / s.len() as f64
                }
            }
    }

    /// Exact pieces of `C` for the piecewise-linear kinds.
    fn pieces(&self) -> Option<Vec<Piece>> {
        let a = self.window;
        // (breakpoint, survival after it)
        let knots: Vec<(f64, f64)> = match &self.kind {
            ServiceKind::ExpDom { .. } => return None,
            ServiceKind::Degenerate => vec![(a, 0.0)],
            ServiceKind::Empirical { lengths } => {
                let s = &lengths.sorted;
                let n = s.len() as f64;
                let mut knots = Vec::new();
                let mut i = 0;
                while i < s.len() {
                    let mut j = i;
                    while j < s.len() && s[j] == s[i] {
                        j += 1;
                    }
                    knots.push((a + s[i], (s.len() - j) as f64 / n));
                    i = j;
                }
                knots
            }
        };
        let mut pieces = Vec::with_capacity(knots.len() + 1);
        let (mut start, mut offset, mut slope) = (0.0, 0.0, 1.0);
        for (knot, survival) in knots {
            let len = knot - start;
            if len > 0.0 {
                pieces.push(Piece { start, len, offset, slope });
                offset += slope * len;
            }
            start = knot;
            slope = survival;
        }
        pieces.push(Piece { start, len: f64::INFINITY, offset, slope });
        Some(pieces)
    }

    /// Where `1 - F^A` drops below [`TAIL_TOL`] for the exponential kind.
    fn tail_start(&self, theta: f64) -> f64 {
        self.window + (1.0 / TAIL_TOL).ln() / theta
    }
}

fn check_rate(lambda: f64) -> Result<(), QueueError> {
    if !(lambda.is_finite() && lambda > 0.0) {
        return Err(QueueError::InvalidInput(format!("lambda must be > 0, got {lambda}")));
    }
    Ok(())
}

/// `∫_0^d e^{-κu} du`, with `d = ∞` allowed when `Re κ > 0`.
fn exp_piece(kappa: Complex64, d: f64) -> Complex64 {
    if d.is_infinite() {
        return kappa.inv();
    }
    let x = kappa * d;
    if x.norm() < 1e-5 {
        return d * (1.0 - x / 2.0 + x * x / 6.0);
    }
    let one_minus = if x.im == 0.0 { Complex64::new(-(-x.re).exp_m1(), 0.0) } else { 1.0 - (-x).exp() };
    one_minus / kappa
}

/// `Σ_pieces weight(slope) ∫ e^{-s t - λ C(t)} dt` over exact pieces.
fn piecewise_transform(pieces: &[Piece], lambda: f64, s: Complex64, weight: impl Fn(f64) -> f64) -> LaplaceResult<Complex64> {
    let mut total = Complex64::new(0.0, 0.0);
    let mut magnitude = 0.0;
    for p in pieces {
        let w = weight(p.slope);
        if w == 0.0 {
            continue;
        }
        let head = (-s * p.start - lambda * p.offset).exp();
        let term = w * head * exp_piece(s + lambda * p.slope, p.len);
        magnitude += term.norm();
        total += term;
    }
    let abs_error_estimate = 8.0 * f64::EPSILON * magnitude * (pieces.len() as f64).sqrt().max(1.0);
    LaplaceResult { value: total, abs_error_estimate }
}

fn series_error(s: f64, e: SeriesError) -> QueueError {
    match e {
        SeriesError::Pole => QueueError::PoleAt { s },
        SeriesError::NotConverged(sum) => QueueError::NonConvergent { value: sum.value.re, abs_error: sum.abs_error },
    }
}

/// `J(s) = ∫_0^∞ exp(-s t - λ ∫_0^t (1 - G^θ)) dt` by its Kummer series.
pub fn kummer_j(lambda: f64, theta: f64, s: f64) -> Result<LaplaceResult, QueueError> {
    if !(lambda.is_finite() && lambda >= 0.0) || !(theta.is_finite() && theta > 0.0) {
        return Err(QueueError::InvalidInput(format!("need lambda ≥ 0, theta > 0 (got {lambda}, {theta})")));
    }
    let sum = kummer::renewal_integral(lambda, theta, Complex64::new(s, 0.0)).map_err(|e| series_error(s, e))?;
    Ok(LaplaceResult { value: sum.value.re, abs_error_estimate: sum.abs_error })
}

fn kummer_j_complex(lambda: f64, theta: f64, s: Complex64) -> Result<LaplaceResult<Complex64>, QueueError> {
    let sum = kummer::renewal_integral(lambda, theta, s).map_err(|e| series_error(s.re, e))?;
    Ok(LaplaceResult { value: sum.value, abs_error_estimate: sum.abs_error })
}

/// Shifts an `A = 0` integral to window `A`:
/// `I^A = (1 - e^{-(λ+s)A})/(λ+s) + e^{-(λ+s)A} I^0`.
fn shift_integral(lambda: f64, window: f64, s: Complex64, base: LaplaceResult<Complex64>) -> LaplaceResult<Complex64> {
    let k = lambda + s;
    let decay = (-k * window).exp();
    let idle = if window == 0.0 { Complex64::new(0.0, 0.0) } else { exp_piece(k, window) };
    LaplaceResult { value: idle + decay * base.value, abs_error_estimate: decay.norm() * base.abs_error_estimate }
}

fn check_transform_domain(svc: &ServiceCdf, lambda: f64, s: Complex64) -> Result<(), QueueError> {
    match svc.kind {
        ServiceKind::ExpDom { theta } => {
            if s.re < 0.0 {
                if s.im != 0.0 {
                    return Err(QueueError::OutOfDomain(format!("complex s needs Re(s) > 0, got {s}")));
                }
                let abscissa = tau_abscissa(lambda, theta, svc.window)?;
                if s.re <= abscissa {
                    return Err(QueueError::OutOfDomain(format!(
                        "s = {} is at or left of the convergence abscissa {abscissa}",
                        s.re
                    )));
                }
            }
            Ok(())
        }
        _ if s.re < 0.0 => Err(QueueError::OutOfDomain(format!(
            "negative s = {} is only available for the exponential dominating law",
            s.re
        ))),
        _ if s.re == 0.0 => Err(QueueError::Divergent { s: s.re }),
        _ => Ok(()),
    }
}

/// Continued `I^{θ,A}(s)` for real `s`, without domain checks.
fn expdom_integral(lambda: f64, theta: f64, window: f64, s: f64) -> Result<f64, QueueError> {
    let j = kummer_j_complex(lambda, theta, Complex64::new(s, 0.0))?;
    Ok(shift_integral(lambda, window, Complex64::new(s, 0.0), j).value.re)
}

/// Abscissa of convergence of `E[e^{-sτ^{θ,A}}]`: the transform is finite
/// exactly for real `s` greater than the returned value.
///
/// `τ` is an `Exp(λ)` idle period plus a busy period whose transform has a
/// pole at the first zero of the continued `I(s)` left of 0, so the result
/// is `max(-λ, s₀)`. That zero lies in `(-θ, 0)`, and for `λ ≈ θ` it is
/// well inside: `s₀ ≈ -0.4503` for `λ = θ = 1`, `A = 0`.
pub fn tau_abscissa(lambda: f64, theta: f64, window: f64) -> Result<f64, QueueError> {
    check_rate(lambda)?;
    if !(theta.is_finite() && theta > 0.0) || !(window.is_finite() && window >= 0.0) {
        return Err(QueueError::InvalidInput(format!("need theta > 0, A ≥ 0 (got {theta}, {window})")));
    }
    let span = lambda.min(theta);
    let f = |s: f64| expdom_integral(lambda, theta, window, s);
    // I(0⁻) = -∞; walk left to the first sign change
    const STEPS: usize = 2000;
    let mut hi = -span / STEPS as f64;
    if f(hi)? >= 0.0 {
        hi /= 1e3;
    }
    for i in 1..STEPS {
        let lo = -span * (i as f64 + 1.0) / STEPS as f64;
        if lo <= -span {
            break;
        }
        if f(lo)? > 0.0 {
            let (mut a, mut b) = (lo, hi);
            for _ in 0..200 {
                let mid = 0.5 * (a + b);
                if mid <= a || mid >= b {
                    break;
                }
                if f(mid)? > 0.0 {
                    a = mid;
                } else {
                    b = mid;
                }
            }
            return Ok(b.max(-lambda));
        }
        hi = lo;
    }
    Ok(-span)
}

fn integral_i_complex(svc: &ServiceCdf, lambda: f64, s: Complex64) -> Result<LaplaceResult<Complex64>, QueueError> {
    check_transform_domain(svc, lambda, s)?;
    match svc.kind {
        ServiceKind::ExpDom { theta } => {
            let j = kummer_j_complex(lambda, theta, s)?;
            Ok(shift_integral(lambda, svc.window, s, j))
        }
        _ => Ok(piecewise_transform(&svc.pieces().expect("piecewise kind"), lambda, s, |_| 1.0)),
    }
}

/// `I(s) = ∫_0^∞ exp(-s t - λ ∫_0^t (1 - F^A)) dt`.
///
/// Exact piecewise sums for the degenerate and empirical laws; for the
/// exponential law the Kummer series (which also covers
/// `-min(λ, θ) < s ≤ 0` by continuation).
pub fn integral_i(svc: &ServiceCdf, lambda: f64, s: f64) -> Result<LaplaceResult, QueueError> {
    check_rate(lambda)?;
    let r = integral_i_complex(svc, lambda, Complex64::new(s, 0.0))?;
    Ok(LaplaceResult { value: r.value.re, abs_error_estimate: r.abs_error_estimate })
}

/// `I(s)` by adaptive Gauss–Kronrod quadrature for real `s > 0`, with the
/// tail beyond the last breakpoint (or where `1 - F^A < 1e-14`) completed
/// in closed form.
pub fn integral_i_quadrature(svc: &ServiceCdf, lambda: f64, s: f64) -> Result<LaplaceResult, QueueError> {
    check_rate(lambda)?;
    if !(s > 0.0) {
        return Err(QueueError::Divergent { s });
    }
    let integrand = |t: f64| (-s * t - lambda * svc.compensator(t)).exp();
    let mut knots = vec![0.0];
    let (tail_from, tail_bound) = match &svc.kind {
        ServiceKind::ExpDom { theta } => {
            let t_star = svc.tail_start(*theta);
            knots.push(svc.window);
            // λ ∫_{t*}^∞ (1 - F^A) bounds the neglected compensator increment
            (t_star, lambda * TAIL_TOL / theta)
        }
        ServiceKind::Degenerate => (svc.window, 0.0),
        ServiceKind::Empirical { lengths } => {
            knots.extend(lengths.sorted.iter().map(|l| l + svc.window));
            (svc.window + lengths.sorted.last().unwrap(), 0.0)
        }
    };
    knots.push(tail_from);
    knots.dedup();
    let opts = QuadOptions { rel_tol: 1e-13, ..QuadOptions::default() };
    let mut value = 0.0;
    let mut abs_error = 0.0;
    for w in knots.windows(2) {
        match integrate(integrand, w[0], w[1], opts) {
            Ok(q) => {
                value += q.value;
                abs_error += q.abs_error;
            }
            Err(q) => return Err(QueueError::NonConvergent { value: q.value, abs_error: q.abs_error }),
        }
    }
    let tail = (-s * tail_from - lambda * svc.mean_service()).exp() / s;
    value += tail;
    abs_error += tail * tail_bound.exp_m1();
    Ok(LaplaceResult { value, abs_error_estimate: abs_error })
}

fn tau_from_integral(lambda: f64, s: Complex64, i: LaplaceResult<Complex64>) -> LaplaceResult<Complex64> {
    let k = lambda + s;
    let value = 1.0 - (k * i.value).inv();
    let abs_error_estimate = i.abs_error_estimate / (k.norm() * i.value.norm_sqr());
    LaplaceResult { value, abs_error_estimate }
}

/// `E[e^{-sτ^A}]` by the Takács formula.
///
/// Evaluated as `(λ/(λ+s)) ∫ F^A e^{-st-λC} / ∫ e^{-st-λC}`, which equals
/// `1 - 1/((λ+s) I(s))` but keeps full relative precision when the
/// transform is tiny. Negative `s` is accepted only for the exponential
/// law, down to its convergence abscissa (exclusive). `s = 0` gives exactly 1.
pub fn laplace_tau(svc: &ServiceCdf, lambda: f64, s: f64) -> Result<LaplaceResult, QueueError> {
    check_rate(lambda)?;
    if s == 0.0 {
        return Ok(LaplaceResult { value: 1.0, abs_error_estimate: 0.0 });
    }
    let busy = laplace_busy_ratio(svc, lambda, s)?;
    let idle = lambda / (lambda + s);
    Ok(LaplaceResult { value: idle * busy.value, abs_error_estimate: idle.abs() * busy.abs_error_estimate })
}

/// `E[e^{-sτ^A}]` for complex `s` with `Re(s) > 0`.
pub fn laplace_tau_complex(svc: &ServiceCdf, lambda: f64, s: Complex64) -> Result<LaplaceResult<Complex64>, QueueError> {
    check_rate(lambda)?;
    if !(s.re > 0.0) {
        return Err(QueueError::OutOfDomain(format!("complex s needs Re(s) > 0, got {s}")));
    }
    Ok(tau_from_integral(lambda, s, integral_i_complex(svc, lambda, s)?))
}

/// `E[e^{-sβ^A}] = ((λ + s)/λ)(1 - 1/((λ+s) I(s)))`, the busy-period transform.
pub fn laplace_busy(svc: &ServiceCdf, lambda: f64, s: f64) -> Result<LaplaceResult, QueueError> {
    check_rate(lambda)?;
    if s == 0.0 {
        return Ok(LaplaceResult { value: 1.0, abs_error_estimate: 0.0 });
    }
    let sc = Complex64::new(s, 0.0);
    let tau = tau_from_integral(lambda, sc, integral_i_complex(svc, lambda, sc)?);
    let factor = (lambda + s) / lambda;
    Ok(LaplaceResult { value: factor * tau.value.re, abs_error_estimate: factor.abs() * tau.abs_error_estimate })
}

/// Busy-period transform as `∫ F^A e^{-st - λC} dt / ∫ e^{-st - λC} dt`.
pub fn laplace_busy_ratio(svc: &ServiceCdf, lambda: f64, s: f64) -> Result<LaplaceResult, QueueError> {
    check_rate(lambda)?;
    let sc = Complex64::new(s, 0.0);
    check_transform_domain(svc, lambda, sc)?;
    let (num, den) = match svc.kind {
        ServiceKind::ExpDom { theta } => {
            // ∫ F^A e^{…} = e^{-(λ+s)A} (J(s) - J(s + θ))
            let j0 = kummer_j(lambda, theta, s)?;
            let j1 = kummer_j(lambda, theta, s + theta)?;
            let decay = (-(lambda + s) * svc.window).exp();
            let num = LaplaceResult {
                value: decay * (j0.value - j1.value),
                abs_error_estimate: decay * (j0.abs_error_estimate + j1.abs_error_estimate),
            };
            let den = integral_i(svc, lambda, s)?;
            (num, den)
        }
        _ => {
            let pieces = svc.pieces().expect("piecewise kind");
            let num = piecewise_transform(&pieces, lambda, sc, |slope| 1.0 - slope);
            let den = piecewise_transform(&pieces, lambda, sc, |_| 1.0);
            (
                LaplaceResult { value: num.value.re, abs_error_estimate: num.abs_error_estimate },
                LaplaceResult { value: den.value.re, abs_error_estimate: den.abs_error_estimate },
            )
        }
    };
    let value = num.value / den.value;
    let abs_error_estimate =
        (num.abs_error_estimate + value.abs() * den.abs_error_estimate) / den.value.abs();
    Ok(LaplaceResult { value, abs_error_estimate })
}

/// Transforms at window `A` from the `A = 0` renewal transform `E[e^{-sτ^0}]`.
///
/// Returns `(E[e^{-sτ^A}], E[e^{-sβ^A}])`, the busy-period value obtained
/// from `E[e^{-sβ^0}] = ((λ+s)/λ) E[e^{-sτ^0}]` by the busy-period shift.
pub fn shift_relations(lambda: f64, window: f64, s: f64, tau_zero: f64) -> Result<(f64, f64), QueueError> {
    check_rate(lambda)?;
    if !(window.is_finite() && window >= 0.0) {
        return Err(QueueError::InvalidInput(format!("window A must be ≥ 0, got {window}")));
    }
    if tau_zero == 1.0 {
        return Err(QueueError::DegenerateDenominator);
    }
    let k = lambda + s;
    let grow = (k * window).exp();
    let tau_a = 1.0 - grow / ((k * window).exp_m1() + 1.0 / (1.0 - tau_zero));
    let busy_zero = k / lambda * tau_zero;
    let decay = (-k * window).exp();
    let idle = if window == 0.0 { 0.0 } else { -(-k * window).exp_m1() / k };
    let busy_a = k / lambda - 1.0 / (lambda * (idle + decay / (k - lambda * busy_zero)));
    Ok((tau_a, busy_a))
}

/// `E[e^{-sβ^A}]` from the `A = 0` integrals `I^0 = ∫ e^{-st-λC⁰}` and
/// `N^0 = ∫ F e^{-st-λC⁰}`: `(λ+s) N^0 / (e^{(λ+s)A} - 1 + (λ+s) I^0)`.
pub fn busy_from_zero_integrals(lambda: f64, window: f64, s: f64, i_zero: f64, n_zero: f64) -> f64 {
    let k = lambda + s;
    k * n_zero / ((k * window).exp_m1() + k * i_zero)
}

/// `E[τ^A] = e^{λ(E[L] + A)} / λ`.
pub fn mean_tau(lambda: f64, mean_length: f64, window: f64) -> Result<f64, QueueError> {
    check_rate(lambda)?;
    if !(mean_length >= 0.0 && window >= 0.0) {
        return Err(QueueError::InvalidInput("mean length and window must be ≥ 0".into()));
    }
    Ok((lambda * (mean_length + window)).exp() / lambda)
}

/// `∫_0^∞ (e^{-λC(t)} - e^{-λ(E[L]+A)}) dt` with its error estimate.
fn second_moment_integral(svc: &ServiceCdf, lambda: f64) -> Result<(f64, f64, f64), QueueError> {
    match &svc.kind {
        ServiceKind::ExpDom { theta } => {
            let m = svc.mean_service();
            let floor = (-lambda * m).exp();
            let integrand = |t: f64| (-lambda * svc.compensator(t)).exp() - floor;
            let t_star = svc.tail_start(*theta);
            // the integrand is at most 1, so this is negligible next to 2/λ² e^{λm}
            let opts = QuadOptions { rel_tol: 1e-12, abs_tol: 1e-15 * (t_star + 1.0 / lambda), ..QuadOptions::default() };
            let mut value = 0.0;
            let mut abs_error = 0.0;
            for (a, b) in [(0.0, svc.window), (svc.window, t_star)] {
                let q = integrate(integrand, a, b, opts)
                    .map_err(|q| QueueError::NonConvergent { value: q.value, abs_error: q.abs_error })?;
                value += q.value;
                abs_error += q.abs_error;
            }
            // beyond t*: e^{-λm}(e^{λδ(t)} - 1) with δ(t) = e^{-θ(t-A)}/θ
            let delta_star = (-theta * (t_star - svc.window)).exp() / theta;
            let tail = floor * lambda * delta_star / theta;
            value += tail;
            abs_error += tail * lambda * delta_star;
            Ok((value, abs_error, m))
        }
        _ => {
            let pieces = svc.pieces().expect("piecewise kind");
            let m = pieces.last().unwrap().offset;
            let floor = (-lambda * m).exp();
            let mut value = 0.0;
            let mut magnitude = 0.0;
            for p in &pieces[..pieces.len() - 1] {
                let head = (-lambda * p.offset).exp();
                let term = head * exp_piece(Complex64::new(lambda * p.slope, 0.0), p.len).re - floor * p.len;
                magnitude += head * p.len;
                value += term;
            }
            Ok((value, 8.0 * f64::EPSILON * magnitude * (pieces.len() as f64).sqrt(), m))
        }
    }
}

/// `E[(τ^A)²] = (2/λ) e^{2λm} ∫_0^∞ (e^{-λC(t)} - e^{-λm}) dt + (2/λ²) e^{λm}`, `m = E[L] + A`.
pub fn second_moment_tau(lambda: f64, svc: &ServiceCdf) -> Result<f64, QueueError> {
    check_rate(lambda)?;
    let (integral, _, m) = second_moment_integral(svc, lambda)?;
    let g = (lambda * m).exp();
    Ok(2.0 / lambda * g * g * integral + 2.0 / (lambda * lambda) * g)
}

/// `E[e^{ατ^{θ,A}}]`, the value of the M/M/∞-type transform at `s = -α`.
///
/// This bounds `E[e^{ατ^A}]` for every kernel with `∫ e^{θt} h ≤ 1`.
pub fn exp_moment_tau(lambda: f64, theta: f64, window: f64, alpha: f64) -> Result<f64, QueueError> {
    check_rate(lambda)?;
    let bound = lambda.min(theta);
    if !(alpha >= 0.0 && alpha < bound) {
        return Err(QueueError::OutOfDomain(format!("alpha = {alpha} must lie in [0, min(λ, θ) = {bound})")));
    }
    let upper = -tau_abscissa(lambda, theta, window)?;
    if alpha >= upper {
        return Err(QueueError::OutOfDomain(format!(
            "E[exp(alpha tau)] diverges for alpha = {alpha} ≥ {upper}"
        )));
    }
    if alpha == 0.0 {
        return Ok(1.0);
    }
    Ok(laplace_tau(&ServiceCdf::exp_dom(theta, window)?, lambda, -alpha)?.value)
}

/// Bound `E[(τ^{θ,A})²] / (2 E[τ^{θ,A}])` on the delay `E[τ₀^A]` for a
/// stationary-dominated initial condition.
pub fn delay_bound(lambda: f64, theta: f64, window: f64) -> Result<f64, QueueError> {
    delay_bound_for(lambda, &ServiceCdf::exp_dom(theta, window)?)
}

/// `E[τ²] / (2 E[τ])` for any service law, the mean of `U[τ]*`.
pub fn delay_bound_for(lambda: f64, svc: &ServiceCdf) -> Result<f64, QueueError> {
    let second = second_moment_tau(lambda, svc)?;
    let mean = mean_tau(lambda, svc.mean_length(), svc.window)?;
    Ok(second / (2.0 * mean))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    const E: f64 = std::f64::consts::E;

    #[test]
    fn compensator_examples() {
        assert_eq!(ServiceCdf::degenerate(1.0).unwrap().compensator(3.0), 1.0);
        let svc = ServiceCdf::exp_dom(1.0, 0.0).unwrap();
        assert_relative_eq!(svc.compensator(1e3), 1.0, epsilon = 1e-15);
        let svc = ServiceCdf::exp_dom(2.0, 1.0).unwrap();
        assert_relative_eq!(svc.compensator(1.5), 1.0 + 0.5 * (1.0 - (-1.0f64).exp()), epsilon = 1e-15);
        assert_relative_eq!(svc.compensator(1.5), 1.316_060_279_414_278_8, epsilon = 1e-12);
    }

    #[test]
    fn empirical_compensator_is_mean_of_minima() {
        let svc = ServiceCdf::empirical(vec![0.5, 2.0, 1.0, 1.0], 0.5).unwrap();
        // t = 2: min(t, A) = 0.5, tail 1.5 → mean(min(1.5, L)) = (0.5 + 1.5 + 1 + 1)/4
        assert_relative_eq!(svc.compensator(2.0), 0.5 + 1.0);
        assert_relative_eq!(svc.compensator(100.0), svc.mean_service());
        assert_eq!(svc.cdf(0.4), 0.0);
        assert_eq!(svc.cdf(1.5), 0.75);
    }

    #[test]
    fn degenerate_integral() {
        let svc = ServiceCdf::degenerate(1.0).unwrap();
        let i = integral_i(&svc, 1.0, 1.0).unwrap().value;
        let expected = (1.0 - (-2.0f64).exp()) / 2.0 + (-2.0f64).exp();
        assert_relative_eq!(i, expected, epsilon = 1e-15);
        assert_relative_eq!(i, 0.567_667_641_618_306_3, epsilon = 1e-12);
    }

    #[test]
    fn vanishing_rate_integral() {
        for svc in [ServiceCdf::degenerate(1.0).unwrap(), ServiceCdf::exp_dom(1.0, 0.5).unwrap()] {
            let i = integral_i(&svc, 1e-12, 2.0).unwrap().value;
            assert_relative_eq!(i, 0.5, epsilon = 1e-10);
        }
    }

    #[test]
    fn expdom_integral_matches_quadrature_and_closed_form() {
        let svc = ServiceCdf::exp_dom(1.0, 0.0).unwrap();
        let i = integral_i(&svc, 1.0, 1.0).unwrap().value;
        assert_relative_eq!(i, 1.0 - (-1.0f64).exp(), epsilon = 1e-15);
        let q = integral_i_quadrature(&svc, 1.0, 1.0).unwrap().value;
        assert_relative_eq!(q, i, epsilon = 1e-12);
    }

    #[test]
    fn kummer_matches_quadrature_on_grid() {
        for &theta in &[1.0, 0.5] {
            for &ratio in &[0.5, 2.0] {
                let lambda = ratio * theta;
                let svc = ServiceCdf::exp_dom(theta, 0.0).unwrap();
                for &s in &[0.1, 1.0, 10.0] {
                    let j = kummer_j(lambda, theta, s).unwrap().value;
                    let q = integral_i_quadrature(&svc, lambda, s).unwrap().value;
                    assert!((j - q).abs() <= 1e-8, "θ={theta} λ={lambda} s={s}: {j} vs {q}");
                }
            }
        }
    }

    #[test]
    fn kummer_examples() {
        assert_relative_eq!(kummer_j(0.0, 1.0, 3.0).unwrap().value, 1.0 / 3.0, epsilon = 1e-16);
        assert_relative_eq!(kummer_j(1.0, 1.0, 1.0).unwrap().value, 0.632_120_558_828_557_7, epsilon = 1e-15);
        assert_eq!(kummer_j(1.0, 1.0, -1.0), Err(QueueError::PoleAt { s: -1.0 }));
        assert!(kummer_j(1.0, 1.0, -0.5).unwrap().value.is_finite());
    }

    #[test]
    fn takacs_examples() {
        let svc = ServiceCdf::exp_dom(1.0, 0.0).unwrap();
        let v = laplace_tau(&svc, 1.0, 1.0).unwrap().value;
        assert_relative_eq!(v, 1.0 - 0.5 / (1.0 - (-1.0f64).exp()), epsilon = 1e-15);
        assert!((v - 0.20899).abs() < 5e-5);
        let svc = ServiceCdf::degenerate(1.0).unwrap();
        let v = laplace_tau(&svc, 1.0, 1.0).unwrap().value;
        assert_relative_eq!(v, 0.119_202_922_022_118, epsilon = 1e-13);
        for svc in [ServiceCdf::degenerate(0.7).unwrap(), ServiceCdf::exp_dom(1.3, 0.2).unwrap()] {
            assert!((laplace_tau(&svc, 1.0, 1e-8).unwrap().value - 1.0).abs() < 1e-6);
            assert_eq!(laplace_tau(&svc, 1.0, 0.0).unwrap().value, 1.0);
        }
    }

    #[test]
    fn negative_s_domain() {
        let svc = ServiceCdf::degenerate(1.0).unwrap();
        assert!(matches!(laplace_tau(&svc, 1.0, -0.1), Err(QueueError::OutOfDomain(_))));
        let svc = ServiceCdf::empirical(vec![1.0], 0.0).unwrap();
        assert!(matches!(laplace_tau(&svc, 1.0, -0.1), Err(QueueError::OutOfDomain(_))));
        let svc = ServiceCdf::exp_dom(2.0, 0.0).unwrap();
        assert!(matches!(laplace_tau(&svc, 1.0, -1.0), Err(QueueError::OutOfDomain(_))));
        assert!(laplace_tau(&svc, 1.0, -0.9).unwrap().value > 1.0);
        assert!(matches!(integral_i_quadrature(&svc, 1.0, -0.5), Err(QueueError::Divergent { .. })));
    }

    #[test]
    fn busy_forms_agree() {
        let svc = ServiceCdf::exp_dom(1.0, 0.0).unwrap();
        let a = laplace_busy(&svc, 1.0, 1.0).unwrap().value;
        let b = laplace_busy_ratio(&svc, 1.0, 1.0).unwrap().value;
        assert!((a - b).abs() < 1e-8);
        for svc in [
            ServiceCdf::degenerate(0.8).unwrap(),
            ServiceCdf::exp_dom(0.7, 1.5).unwrap(),
            ServiceCdf::empirical(vec![0.1, 0.4, 0.4, 2.5], 0.3).unwrap(),
        ] {
            for s in [0.2, 1.0, 3.0] {
                let a = laplace_busy(&svc, 1.3, s).unwrap().value;
                let b = laplace_busy_ratio(&svc, 1.3, s).unwrap().value;
                assert!((a - b).abs() < 1e-10, "{svc:?} s={s}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn degenerate_busy_period_is_a_point() {
        let svc = ServiceCdf::degenerate(0.0).unwrap();
        for s in [0.1, 1.0, 5.0] {
            assert_relative_eq!(laplace_busy(&svc, 1.0, s).unwrap().value, 1.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn busy_period_at_least_window() {
        for svc in [ServiceCdf::degenerate(1.2).unwrap(), ServiceCdf::exp_dom(0.9, 1.2).unwrap()] {
            for s in [0.1, 1.0, 4.0] {
                assert!(laplace_busy(&svc, 0.8, s).unwrap().value <= (-s * 1.2f64).exp() + 1e-14);
            }
        }
    }

    #[test]
    fn shift_identity_at_zero_window() {
        let svc = ServiceCdf::exp_dom(1.0, 0.0).unwrap();
        let t0 = laplace_tau(&svc, 1.0, 0.7).unwrap().value;
        let (ta, ba) = shift_relations(1.0, 0.0, 0.7, t0).unwrap();
        assert_relative_eq!(ta, t0, epsilon = 1e-15);
        assert_relative_eq!(ba, 1.7 * t0, epsilon = 1e-14);
        assert_eq!(shift_relations(1.0, 1.0, 0.0, 1.0), Err(QueueError::DegenerateDenominator));
    }

    #[test]
    fn shift_route_matches_direct() {
        let lambda = 1.0;
        let s = 1.0;
        // degenerate: τ^0 ~ Exp(λ)
        let (ta, _) = shift_relations(lambda, 1.0, s, lambda / (lambda + s)).unwrap();
        let direct = laplace_tau(&ServiceCdf::degenerate(1.0).unwrap(), lambda, s).unwrap().value;
        assert!((ta - direct).abs() < 1e-12);
        assert!((ta - 0.11921).abs() < 1e-5);

        let base = laplace_tau(&ServiceCdf::exp_dom(1.0, 0.0).unwrap(), lambda, s).unwrap().value;
        let (ta, ba) = shift_relations(lambda, 0.5, s, base).unwrap();
        let svc = ServiceCdf::exp_dom(1.0, 0.5).unwrap();
        assert!((ta - laplace_tau(&svc, lambda, s).unwrap().value).abs() < 1e-10);
        assert!((ba - laplace_busy_ratio(&svc, lambda, s).unwrap().value).abs() < 1e-10);
    }

    #[test]
    fn busy_from_zero_integrals_matches() {
        let (lambda, window, s) = (1.2, 0.6, 0.8);
        let zero = ServiceCdf::empirical(vec![0.3, 0.9, 1.7], 0.0).unwrap();
        let pieces = zero.pieces().unwrap();
        let sc = Complex64::new(s, 0.0);
        let i0 = piecewise_transform(&pieces, lambda, sc, |_| 1.0).value.re;
        let n0 = piecewise_transform(&pieces, lambda, sc, |r| 1.0 - r).value.re;
        let shifted = ServiceCdf::empirical(vec![0.3, 0.9, 1.7], window).unwrap();
        let direct = laplace_busy(&shifted, lambda, s).unwrap().value;
        assert!((busy_from_zero_integrals(lambda, window, s, i0, n0) - direct).abs() < 1e-12);
    }

    #[test]
    fn mean_tau_examples() {
        assert_eq!(mean_tau(1.0, 0.0, 0.0).unwrap(), 1.0);
        assert_relative_eq!(mean_tau(1.0, 0.0, 1.0).unwrap(), E, epsilon = 1e-15);
        assert_relative_eq!(mean_tau(2.0, 0.5, 0.0).unwrap(), 0.5 * E, epsilon = 1e-15);
    }

    #[test]
    fn second_moment_examples() {
        let m = second_moment_tau(1.0, &ServiceCdf::degenerate(0.0).unwrap()).unwrap();
        assert_relative_eq!(m, 2.0, epsilon = 1e-14);
        // 2e²∫_0^1 (e^{-t} - e^{-1}) dt + 2e = 2e² (1 - 2/e) + 2e = 2e² - 2e
        let m = second_moment_tau(1.0, &ServiceCdf::degenerate(1.0).unwrap()).unwrap();
        assert_relative_eq!(m, 2.0 * E * E - 2.0 * E, epsilon = 1e-12);
    }

    /// `∫_0^∞ (e^{-z(1-e^{-θu})} - e^{-z}) du = (e^{-z}/θ) Σ_{n≥1} z^n/(n·n!)`.
    fn expdom_second_moment_series(lambda: f64, theta: f64, window: f64) -> f64 {
        let z = lambda / theta;
        let mut ein = 0.0;
        let mut power = 1.0;
        for n in 1..200 {
            power *= z / n as f64;
            ein += power / n as f64;
        }
        let m = 1.0 / theta + window;
        let d = -(-lambda * window).exp_m1() / lambda - window * (-lambda * m).exp()
            + (-lambda * window).exp() * (-z).exp() / theta * ein;
        let g = (lambda * m).exp();
        2.0 / lambda * g * g * d + 2.0 / (lambda * lambda) * g
    }

    #[test]
    fn expdom_second_moment_matches_series() {
        for &(lambda, theta, window) in &[(1.0, 1.0, 0.0), (1.0, 0.5, 1.0), (2.0, 3.0, 0.3), (0.5, 2.0, 2.0)] {
            let q = second_moment_tau(lambda, &ServiceCdf::exp_dom(theta, window).unwrap()).unwrap();
            let series = expdom_second_moment_series(lambda, theta, window);
            assert_relative_eq!(q, series, max_relative = 1e-9);
        }
    }

    #[test]
    fn moments_from_transform_derivatives() {
        for svc in [
            ServiceCdf::exp_dom(1.0, 0.5).unwrap(),
            ServiceCdf::degenerate(1.0).unwrap(),
            ServiceCdf::empirical(vec![0.2, 0.5, 1.5, 3.0], 0.4).unwrap(),
        ] {
            let lambda = 1.0;
            let f = |s: f64| laplace_tau(&svc, lambda, s).unwrap().value;
            let h = 1e-4;
            // one-sided (s ≥ 0) differences so every kind is in its domain
            let d1 = -(-3.0 * f(0.0) + 4.0 * f(h) - f(2.0 * h)) / (2.0 * h);
            let mean = mean_tau(lambda, svc.mean_length(), svc.window).unwrap();
            assert_relative_eq!(d1, mean, max_relative = 1e-4);
            let h = 1e-3;
            let d2 = (2.0 * f(0.0) - 5.0 * f(h) + 4.0 * f(2.0 * h) - f(3.0 * h)) / (h * h);
            let second = second_moment_tau(lambda, &svc).unwrap();
            assert_relative_eq!(d2, second, max_relative = 1e-3);
        }
    }

    #[test]
    fn transform_bounds_and_monotone() {
        for svc in [
            ServiceCdf::exp_dom(1.0, 0.5).unwrap(),
            ServiceCdf::degenerate(1.0).unwrap(),
            ServiceCdf::empirical(vec![0.2, 0.5, 1.5], 0.0).unwrap(),
        ] {
            let lambda = 1.5;
            let mut last = 1.0;
            for i in 1..=40 {
                let s = 0.1 * i as f64;
                let v = laplace_tau(&svc, lambda, s).unwrap().value;
                assert!(v > 0.0 && v < lambda / (lambda + s));
                assert!(v < last);
                last = v;
            }
        }
    }

    #[test]
    fn complex_transform_conjugate_and_real_axis() {
        let svc = ServiceCdf::exp_dom(1.0, 0.3).unwrap();
        let real = laplace_tau(&svc, 1.0, 0.8).unwrap().value;
        let c = laplace_tau_complex(&svc, 1.0, Complex64::new(0.8, 0.0)).unwrap().value;
        assert_relative_eq!(c.re, real, epsilon = 1e-15);
        let up = laplace_tau_complex(&svc, 1.0, Complex64::new(0.8, 0.6)).unwrap().value;
        let down = laplace_tau_complex(&svc, 1.0, Complex64::new(0.8, -0.6)).unwrap().value;
        assert_relative_eq!(up.re, down.re, epsilon = 1e-14);
        assert_relative_eq!(up.im, -down.im, epsilon = 1e-14);
        assert!(up.norm() <= real);
        let emp = ServiceCdf::empirical(vec![0.5, 1.0], 0.2).unwrap();
        let z = laplace_tau_complex(&emp, 1.0, Complex64::new(1.0, 2.0)).unwrap().value;
        assert!(z.norm() < laplace_tau(&emp, 1.0, 1.0).unwrap().value);
        assert!(laplace_tau_complex(&emp, 1.0, Complex64::new(0.0, 1.0)).is_err());
    }

    #[test]
    fn abscissa_values() {
        assert!((tau_abscissa(1.0, 1.0, 0.0).unwrap() + 0.450_265_027_495_998).abs() < 1e-9);
        assert!((tau_abscissa(1.0, 0.5, 0.0).unwrap() + 0.112_582_686_615_779).abs() < 1e-9);
        assert!((tau_abscissa(1.0, 0.5, 1.0).unwrap() + 0.049_288_042_361_399).abs() < 1e-9);
        assert_eq!(tau_abscissa(1.0, 2.0, 0.0).unwrap(), -1.0);
        // the transform blows up approaching the abscissa from the right
        let svc = ServiceCdf::exp_dom(1.0, 0.0).unwrap();
        let a = tau_abscissa(1.0, 1.0, 0.0).unwrap();
        assert!(laplace_tau(&svc, 1.0, a + 1e-6).unwrap().value > 1e4);
        assert!(matches!(laplace_tau(&svc, 1.0, a - 1e-3), Err(QueueError::OutOfDomain(_))));
    }

    #[test]
    fn exp_moment_and_delay() {
        assert!((exp_moment_tau(1.0, 1.0, 0.0, 1e-9).unwrap() - 1.0).abs() < 1e-7);
        assert!(exp_moment_tau(1.0, 1.0, 0.0, 0.4).unwrap() > 1.0);
        assert!(matches!(exp_moment_tau(1.0, 1.0, 0.0, 0.5), Err(QueueError::OutOfDomain(_))));
        assert!(matches!(exp_moment_tau(1.0, 1.0, 0.0, 1.0), Err(QueueError::OutOfDomain(_))));
        assert!(matches!(exp_moment_tau(2.0, 0.5, 0.0, 0.5), Err(QueueError::OutOfDomain(_))));
        let d = delay_bound_for(1.0, &ServiceCdf::degenerate(0.0).unwrap()).unwrap();
        assert_relative_eq!(d, 1.0, epsilon = 1e-14);
        let big_theta = delay_bound(1.0, 1e9, 0.0).unwrap();
        assert!((big_theta - 1.0).abs() < 1e-6);
        assert!(delay_bound(1.0, 1.0, 1.0).unwrap() > delay_bound(1.0, 1.0, 0.0).unwrap());
    }
}
