//! Non-asymptotic deviation bound for sliding averages of bounded functionals.
//!
//! For `f` with values in `[a, b]`, a null start and `α > 0` small enough
//! that `E[e^{ατ^A}] < ∞`,
//!
//! ```text
//! P(|avg_T f - π^A f| ≥ ε) ≤ 4 exp(-x² / (4(2v + c x))),   x = Tε - |b-a| E[τ^A],
//! v = (2(b-a)²/α²) ⌊T/E[τ^A]⌋ E[e^{ατ^A}] e^{αE[τ^A]},     c = |b-a|/α.
//! ```

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::queue::{self, QueueError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConcentrationError {
    #[error("alpha = {alpha} must lie in (0, {upper})")]
    AlphaOutOfRange { alpha: f64, upper: f64 },
    #[error("invalid moments: {0}")]
    InvalidMoments(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error(transparent)]
    Queue(#[from] QueueError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConcentrationMode {
    /// Moments of `τ^A` supplied directly (e.g. Monte Carlo).
    Exact,
    /// Moments replaced by domination bounds.
    Bound,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConcentrationInput {
    pub lambda: f64,
    #[serde(rename = "A")]
    pub window: f64,
    pub alpha: f64,
    pub a: f64,
    pub b: f64,
    #[serde(rename = "T")]
    pub horizon: f64,
    /// `E[τ^A]`, or an upper bound in bound mode.
    pub mean_tau: f64,
    /// Value used inside `⌊T/E[τ^A]⌋`; a lower bound in bound mode.
    pub floor_mean_tau: f64,
    /// `E[e^{ατ^A}]`, or an upper bound in bound mode.
    pub exp_moment: f64,
    pub mode: ConcentrationMode,
}

/// `e^{λA}/λ`, the mean idle period plus the minimal service `A`.
pub fn mean_tau_lower_bound(lambda: f64, window: f64) -> f64 {
    (lambda * window).exp() / lambda
}

impl ConcentrationInput {
    /// Exact mode; `alpha_upper` is `min(λ, θ*)` when known, `λ` otherwise.
    #[allow(clippy::too_many_arguments)]
    pub fn exact(
        lambda: f64,
        window: f64,
        alpha: f64,
        alpha_upper: f64,
        (a, b): (f64, f64),
        horizon: f64,
        mean_tau: f64,
        exp_moment: f64,
    ) -> Result<Self, ConcentrationError> {
        let input = Self {
            lambda,
            window,
            alpha,
            a,
            b,
            horizon,
            mean_tau,
            floor_mean_tau: mean_tau,
            exp_moment,
            mode: ConcentrationMode::Exact,
        };
        input.validate(alpha_upper.min(lambda))?;
        Ok(input)
    }

    /// Bound mode from the dominating queue with service `Exp(θ)`, `θ ≤ θ*`.
    pub fn bound(
        lambda: f64,
        theta: f64,
        window: f64,
        alpha: f64,
        (a, b): (f64, f64),
        horizon: f64,
    ) -> Result<Self, ConcentrationError> {
        // E[e^{ατ^{θ,A}}] is finite only below the transform's abscissa
        let upper = (-queue::tau_abscissa(lambda, theta, window)?).min(theta);
        if !(alpha > 0.0 && alpha < upper) {
            return Err(ConcentrationError::AlphaOutOfRange { alpha, upper });
        }
        let input = Self {
            lambda,
            window,
            alpha,
            a,
            b,
            horizon,
            mean_tau: queue::mean_tau(lambda, 1.0 / theta, window)?,
            floor_mean_tau: mean_tau_lower_bound(lambda, window),
            exp_moment: queue::exp_moment_tau(lambda, theta, window, alpha)?,
            mode: ConcentrationMode::Bound,
        };
        input.validate(upper)?;
        Ok(input)
    }

    fn validate(&self, alpha_upper: f64) -> Result<(), ConcentrationError> {
        if !(self.lambda > 0.0 && self.window >= 0.0 && self.horizon > 0.0) {
            return Err(ConcentrationError::InvalidInput("need λ > 0, A ≥ 0, T > 0".into()));
        }
        if !(self.a <= self.b) {
            return Err(ConcentrationError::InvalidInput(format!("need a ≤ b, got [{}, {}]", self.a, self.b)));
        }
        if !(self.alpha > 0.0 && self.alpha < alpha_upper) {
            return Err(ConcentrationError::AlphaOutOfRange { alpha: self.alpha, upper: alpha_upper });
        }
        let floor = mean_tau_lower_bound(self.lambda, self.window);
        if self.mean_tau < floor * (1.0 - 1e-12) {
            return Err(ConcentrationError::InvalidMoments(format!(
                "E[τ] = {} is below e^(λA)/λ = {floor}",
                self.mean_tau
            )));
        }
        if !(self.floor_mean_tau > 0.0 && self.floor_mean_tau <= self.mean_tau) {
            return Err(ConcentrationError::InvalidMoments("floor mean must lie in (0, E[τ]]".into()));
        }
        if !(self.exp_moment >= 1.0 && self.exp_moment.is_finite()) {
            return Err(ConcentrationError::InvalidMoments(format!(
                "E[e^(ατ)] must be finite and ≥ 1, got {}",
                self.exp_moment
            )));
        }
        Ok(())
    }

    fn range(&self) -> f64 {
        (self.b - self.a).abs()
    }
}

/// `(v, c)`.
pub fn bound_terms(input: &ConcentrationInput) -> (f64, f64) {
    let range = input.range();
    let alpha = input.alpha;
    let cycles = (input.horizon / input.floor_mean_tau).floor();
    let v = 2.0 * range * range / (alpha * alpha) * cycles * input.exp_moment * (alpha * input.mean_tau).exp();
    (v, range / alpha)
}

/// `4 exp(-x²/(4(2v + cx)))` without the cap; 4 when `x ≤ 0`.
pub fn deviation_bound_raw(input: &ConcentrationInput, epsilon: f64) -> f64 {
    let (v, c) = bound_terms(input);
    let x = input.horizon * epsilon - input.range() * input.mean_tau;
    if x <= 0.0 {
        return 4.0;
    }
    let denom = 4.0 * (2.0 * v + c * x);
    if denom == 0.0 {
        return 0.0;
    }
    4.0 * (-x * x / denom).exp()
}

/// Bound on `P(|avg_T f - π^A f| ≥ ε)`, capped at 1.
pub fn deviation_bound(input: &ConcentrationInput, epsilon: f64) -> f64 {
    deviation_bound_raw(input, epsilon).min(1.0)
}

/// Smallest `ε` with `deviation_bound(ε) = η`.
pub fn epsilon_eta(input: &ConcentrationInput, eta: f64) -> Result<f64, ConcentrationError> {
    if !(eta > 0.0 && eta < 1.0) {
        return Err(ConcentrationError::InvalidInput(format!("eta must lie in (0, 1), got {eta}")));
    }
    let (v, c) = bound_terms(input);
    let log = (eta / 4.0).ln();
    let root = (4.0 * c * c * log * log - 8.0 * v * log).sqrt();
    Ok((input.range() * input.mean_tau - 2.0 * c * log + root) / input.horizon)
}
