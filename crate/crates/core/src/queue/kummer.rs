//! Series for the M/M/∞ renewal integral
//!
//! ```text
//! J(s) = ∫_0^∞ exp(-s t - (λ/θ)(1 - e^{-θt})) dt
//!      = (e^{-z}/θ) ∫_0^1 x^{a-1} e^{z x} dx      (z = λ/θ, a = s/θ)
//!      = (e^{-z}/θ) Σ_{n≥0} z^n / (n! (a + n)),
//! ```
//!
//! i.e. `e^{-z} M(a, a+1, z) / s` in Kummer notation. The series converges
//! for every `a` off the nonpositive integers and continues `J` to `s < 0`.

use num_complex::Complex64;

/// Relative size below which a term ends the series.
pub const TERM_TOL: f64 = 1e-16;
pub const MAX_TERMS: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesSum {
    pub value: Complex64,
    pub abs_error: f64,
    pub terms: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SeriesError {
    /// `a` is a nonpositive integer.
    Pole,
    NotConverged(SeriesSum),
}

/// `Σ_{n≥0} z^n / (n! (a + n))` for real `z ≥ 0`.
pub(crate) fn shifted_series(a: Complex64, z: f64) -> Result<SeriesSum, SeriesError> {
    let is_pole = |c: Complex64| c.im == 0.0 && c.re <= 0.0 && c.re.fract() == 0.0;
    let mut power = 1.0f64; // z^n / n!
    let mut sum = Complex64::new(0.0, 0.0);
    for n in 0..MAX_TERMS {
        let denom = a + n as f64;
        if is_pole(denom) {
            return Err(SeriesError::Pole);
        }
        let term = power / denom;
        sum += term;
        let next_power = power * z / (n as f64 + 1.0);
        // terms decrease geometrically once n + 1 > z
        if (n as f64 + 1.0) > z && term.norm() <= TERM_TOL * sum.norm() {
            let ratio = z / (n as f64 + 2.0);
            let tail = next_power / (a + (n + 1) as f64).norm() / (1.0 - ratio).max(f64::EPSILON);
            let rounding = (n as f64 + 1.0) * f64::EPSILON * sum.norm();
            return Ok(SeriesSum { value: sum, abs_error: tail + rounding, terms: n + 1 });
        }
        power = next_power;
    }
    Err(SeriesError::NotConverged(SeriesSum { value: sum, abs_error: f64::INFINITY, terms: MAX_TERMS }))
}

/// `J(s)` for the M/M/∞ queue with arrival rate `lambda` and service rate `theta`.
pub(crate) fn renewal_integral(lambda: f64, theta: f64, s: Complex64) -> Result<SeriesSum, SeriesError> {
    let z = lambda / theta;
    let series = shifted_series(s / theta, z)?;
    let scale = (-z).exp() / theta;
    Ok(SeriesSum { value: series.value * scale, abs_error: series.abs_error * scale, terms: series.terms })
}
