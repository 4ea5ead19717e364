//! Transfer functions `h ≥ 0` and the quantities derived from them.

use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TransferError {
    #[error("invalid transfer function: {0}")]
    InvalidParameter(String),
    #[error("kernel is not sub-critical: ∫h = {l1} ≥ 1")]
    NotSubcritical { l1: f64 },
    #[error("kernel has zero mass, no delay law to sample from")]
    ZeroKernel,
}

/// Nonnegative transfer function of a linear Hawkes process.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TransferFunction {
    Zero,
    /// `h(t) = alpha · e^{-beta t}`.
    Exponential { alpha: f64, beta: f64 },
    /// `h(t) = height · 1_{(0, support]}(t)`.
    UniformBox { height: f64, support: f64 },
    Tabulated(Tabulated),
}

/// Piecewise-linear kernel through `(grid[i], values[i])`, zero outside `[grid[0], grid[last]]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TabulatedPoints", into = "TabulatedPoints")]
pub struct Tabulated {
    grid: Vec<f64>,
    values: Vec<f64>,
    /// `cumulative[i] = ∫_{grid[0]}^{grid[i]} h`.
    cumulative: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct TabulatedPoints {
    grid: Vec<f64>,
    values: Vec<f64>,
}

impl TryFrom<TabulatedPoints> for Tabulated {
    type Error = TransferError;

    fn try_from(p: TabulatedPoints) -> Result<Self, Self::Error> {
        Tabulated::new(p.grid, p.values)
    }
}

impl From<Tabulated> for TabulatedPoints {
    fn from(t: Tabulated) -> Self {
        TabulatedPoints { grid: t.grid, values: t.values }
    }
}

impl Tabulated {
    pub fn new(grid: Vec<f64>, values: Vec<f64>) -> Result<Self, TransferError> {
        let bad = |msg: &str| Err(TransferError::InvalidParameter(msg.to_string()));
        if grid.len() != values.len() {
            return bad("grid and values differ in length");
        }
        if grid.len() < 2 {
            return bad("tabulated kernel needs at least two grid points");
        }
        if !grid.iter().all(|t| t.is_finite()) || grid[0] < 0.0 {
            return bad("grid must be finite and start at t ≥ 0");
        }
        if grid.windows(2).any(|w| w[1] <= w[0]) {
            return bad("grid must be strictly increasing");
        }
        if !values.iter().all(|v| v.is_finite() && *v >= 0.0) {
            return bad("kernel values must be finite and nonnegative");
        }
        let mut cumulative = Vec::with_capacity(grid.len());
        cumulative.push(0.0);
        for i in 1..grid.len() {
            let seg = 0.5 * (values[i - 1] + values[i]) * (grid[i] - grid[i - 1]);
            cumulative.push(cumulative[i - 1] + seg);
        }
        Ok(Self { grid, values, cumulative })
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    fn total(&self) -> f64 {
        *self.cumulative.last().unwrap()
    }

    /// Segment index `k` with `grid[k] <= t < grid[k+1]`, if `t` is inside the grid.
    fn segment(&self, t: f64) -> Option<usize> {
        if t < self.grid[0] || t >= *self.grid.last().unwrap() {
            return None;
        }
        Some(self.grid.partition_point(|&g| g <= t) - 1)
    }

    fn slope(&self, k: usize) -> f64 {
        (self.values[k + 1] - self.values[k]) / (self.grid[k + 1] - self.grid[k])
    }

    fn value(&self, t: f64) -> f64 {
        match self.segment(t) {
            Some(k) => self.values[k] + self.slope(k) * (t - self.grid[k]),
            None if t == *self.grid.last().unwrap() => *self.values.last().unwrap(),
            None => 0.0,
        }
    }

    /// `∫_0^x h`.
    fn mass_to(&self, x: f64) -> f64 {
        if x <= self.grid[0] {
            return 0.0;
        }
        match self.segment(x) {
            Some(k) => {
                let d = x - self.grid[k];
                self.cumulative[k] + self.values[k] * d + 0.5 * self.slope(k) * d * d
            }
            None => self.total(),
        }
    }

    /// Smallest `x` with `∫_0^x h = m`, for `m ∈ [0, total]`.
    fn inverse_mass(&self, m: f64) -> f64 {
        let last = self.grid.len() - 1;
        if m >= self.total() {
            // step back over trailing zero segments
            let k = self.cumulative.partition_point(|&c| c < self.total());
            return self.grid[k.min(last)];
        }
        let k = (self.cumulative.partition_point(|&c| c <= m) - 1).min(last - 1);
        let r = m - self.cumulative[k];
        if r <= 0.0 {
            return self.grid[k];
        }
        let (v, q) = (self.values[k], self.slope(k));
        // v d + q d²/2 = r, stable root
        let d = 2.0 * r / (v + (v * v + 2.0 * q * r).max(0.0).sqrt());
        (self.grid[k] + d).min(self.grid[k + 1])
    }

    fn mean_moment(&self) -> f64 {
        (0..self.grid.len() - 1)
            .map(|k| {
                let (a, d) = (self.grid[k], self.grid[k + 1] - self.grid[k]);
                let (p, q) = (self.values[k], self.slope(k));
                // ∫_0^d (a + u)(p + q u) du
                a * p * d + (a * q + p) * d * d / 2.0 + q * d * d * d / 3.0
            })
            .sum()
    }

    fn exp_moment(&self, theta: f64) -> f64 {
        (0..self.grid.len() - 1)
            .map(|k| {
                let (a, d) = (self.grid[k], self.grid[k + 1] - self.grid[k]);
                let (p, q) = (self.values[k], self.slope(k));
                let x = theta * d;
                let e0 = x.exp_m1() / theta;
                let e1 = if x < 1e-3 {
                    d * d * (0.5 + x / 3.0 + x * x / 8.0 + x * x * x / 30.0)
                } else {
                    (d * x.exp() - e0) / theta
                };
                (theta * a).exp() * (p * e0 + q * e1)
            })
            .sum()
    }
}

fn poisson_count<R: rand::Rng + ?Sized>(mean: f64, rng: &mut R) -> usize {
    if mean <= 0.0 {
        return 0;
    }
    Poisson::new(mean).expect("finite positive mean").sample(rng) as usize
}

/// Uniform on `(0, 1]`.
fn open_unit<R: rand::Rng + ?Sized>(rng: &mut R) -> f64 {
    1.0 - rng.random::<f64>()
}

impl TransferFunction {
    pub fn exponential(alpha: f64, beta: f64) -> Result<Self, TransferError> {
        if !(alpha.is_finite() && alpha >= 0.0) || !(beta.is_finite() && beta > 0.0) {
            return Err(TransferError::InvalidParameter(format!(
                "exponential kernel needs alpha ≥ 0, beta > 0 (got {alpha}, {beta})"
            )));
        }
        Ok(Self::Exponential { alpha, beta })
    }

    pub fn uniform_box(height: f64, support: f64) -> Result<Self, TransferError> {
        if !(height.is_finite() && height >= 0.0) || !(support.is_finite() && support > 0.0) {
            return Err(TransferError::InvalidParameter(format!(
                "box kernel needs height ≥ 0, support > 0 (got {height}, {support})"
            )));
        }
        Ok(Self::UniformBox { height, support })
    }

    pub fn tabulated(grid: Vec<f64>, values: Vec<f64>) -> Result<Self, TransferError> {
        Tabulated::new(grid, values).map(Self::Tabulated)
    }

    /// `h(t)`.
    pub fn value(&self, t: f64) -> f64 {
        if t <= 0.0 && !matches!(self, Self::Tabulated(_)) {
            return 0.0;
        }
        match self {
            Self::Zero => 0.0,
            Self::Exponential { alpha, beta } => alpha * (-beta * t).exp(),
            Self::UniformBox { height, support } => {
                if t <= *support {
                    *height
                } else {
                    0.0
                }
            }
            Self::Tabulated(tab) => {
                if t <= 0.0 {
                    0.0
                } else {
                    tab.value(t)
                }
            }
        }
    }

    /// `∫_0^∞ h`, the mean offspring count.
    pub fn l1_norm(&self) -> f64 {
        match self {
            Self::Zero => 0.0,
            Self::Exponential { alpha, beta } => alpha / beta,
            Self::UniformBox { height, support } => height * support,
            Self::Tabulated(tab) => tab.total(),
        }
    }

    /// `∫_0^∞ t h(t) dt`.
    pub fn mean_moment(&self) -> f64 {
        match self {
            Self::Zero => 0.0,
            Self::Exponential { alpha, beta } => alpha / (beta * beta),
            Self::UniformBox { height, support } => height * support * support / 2.0,
            Self::Tabulated(tab) => tab.mean_moment(),
        }
    }

    /// `∫_0^∞ e^{θt} h(t) dt`; `f64::INFINITY` when the integral diverges.
    pub fn exp_moment(&self, theta: f64) -> f64 {
        if theta == 0.0 {
            return self.l1_norm();
        }
        match self {
            Self::Zero => 0.0,
            Self::Exponential { alpha, beta } => {
                if theta >= *beta {
                    f64::INFINITY
                } else {
                    alpha / (beta - theta)
                }
            }
            Self::UniformBox { height, support } => height * (theta * support).exp_m1() / theta,
            Self::Tabulated(tab) => tab.exp_moment(theta),
        }
    }

    /// `∫_depth^∞ h`.
    pub fn tail_mass(&self, depth: f64) -> f64 {
        let depth = depth.max(0.0);
        match self {
            Self::Zero => 0.0,
            Self::Exponential { alpha, beta } => alpha / beta * (-beta * depth).exp(),
            Self::UniformBox { height, support } => height * (support - depth).max(0.0),
            Self::Tabulated(tab) => (tab.total() - tab.mass_to(depth)).max(0.0),
        }
    }

    pub fn check_subcritical(&self) -> Result<(), TransferError> {
        let l1 = self.l1_norm();
        if l1 < 1.0 {
            Ok(())
        } else {
            Err(TransferError::NotSubcritical { l1 })
        }
    }

    /// `θ* = sup{θ > 0 : ∫ e^{θt} h ≤ 1}` to absolute accuracy `tol`.
    ///
    /// The bracket doubles from `tol` until the exponential moment reaches 1
    /// (or diverges), then bisects. A kernel whose exponential moment never
    /// reaches 1 (only the zero kernel among the built-in kinds) gives
    /// `f64::INFINITY`.
    pub fn theta_star(&self, tol: f64) -> Result<f64, TransferError> {
        if !(tol > 0.0) {
            return Err(TransferError::InvalidParameter(format!("tol must be > 0, got {tol}")));
        }
        self.check_subcritical()?;
        if self.l1_norm() == 0.0 {
            return Ok(f64::INFINITY);
        }
        let mut lo = 0.0;
        let mut hi = tol;
        while self.exp_moment(hi) < 1.0 {
            lo = hi;
            hi *= 2.0;
            if hi > 1e300 {
                return Ok(f64::INFINITY);
            }
        }
        while hi - lo > tol {
            let mid = 0.5 * (lo + hi);
            if self.exp_moment(mid) < 1.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(0.5 * (lo + hi))
    }

    /// One delay from the density `h / ∫h`.
    pub fn sample_delay<R: rand::Rng + ?Sized>(&self, rng: &mut R) -> Result<f64, TransferError> {
        if self.l1_norm() <= 0.0 {
            return Err(TransferError::ZeroKernel);
        }
        Ok(self.sample_beyond(0.0, rng))
    }

    /// `U - depth` where `U` has density proportional to `h` on `(depth, ∞)`.
    /// The tail mass beyond `depth` must be positive.
    fn sample_beyond<R: rand::Rng + ?Sized>(&self, depth: f64, rng: &mut R) -> f64 {
        match self {
            Self::Zero => unreachable!("zero kernel has no delay law"),
            Self::Exponential { beta, .. } => -open_unit(rng).ln() / beta,
            Self::UniformBox { support, .. } => (support - depth) * open_unit(rng),
            Self::Tabulated(tab) => {
                let from = tab.mass_to(depth);
                let m = from + (tab.total() - from) * open_unit(rng);
                (tab.inverse_mass(m) - depth).max(f64::MIN_POSITIVE)
            }
        }
    }

    /// First-generation births on `(0, ∞)` of an initial point at `-depth`,
    /// as times relative to 0.
    pub fn truncated_offspring<R: rand::Rng + ?Sized>(&self, depth: f64, rng: &mut R) -> Vec<f64> {
        let n = poisson_count(self.tail_mass(depth), rng);
        (0..n).map(|_| self.sample_beyond(depth.max(0.0), rng)).collect()
    }

    /// Number of direct offspring of one individual.
    pub(crate) fn offspring_count<R: rand::Rng + ?Sized>(&self, rng: &mut R) -> usize {
        poisson_count(self.l1_norm(), rng)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stream;
    use approx::assert_relative_eq;

    fn exp_kernel() -> TransferFunction {
        TransferFunction::exponential(0.5, 1.0).unwrap()
    }

    fn box_kernel() -> TransferFunction {
        TransferFunction::uniform_box(0.3, 2.0).unwrap()
    }

    #[test]
    fn closed_form_norms() {
        assert_eq!(exp_kernel().l1_norm(), 0.5);
        assert_relative_eq!(box_kernel().l1_norm(), 0.6, epsilon = 1e-15);
        assert_eq!(TransferFunction::Zero.l1_norm(), 0.0);
        assert_eq!(exp_kernel().mean_moment(), 0.5);
        assert_relative_eq!(box_kernel().mean_moment(), 0.6, epsilon = 1e-15);
        assert_eq!(TransferFunction::Zero.mean_moment(), 0.0);
    }

    #[test]
    fn exp_moment_values() {
        assert_relative_eq!(exp_kernel().exp_moment(0.5), 1.0, epsilon = 1e-15);
        assert!(exp_kernel().exp_moment(1.2).is_infinite());
        assert!(exp_kernel().exp_moment(1.0).is_infinite());
        assert_eq!(TransferFunction::Zero.exp_moment(3.0), 0.0);
    }

    #[test]
    fn theta_star_values() {
        let t = exp_kernel().theta_star(1e-10).unwrap();
        assert!((t - 0.5).abs() <= 1e-10);
        // 0.3 (e^{2θ} - 1)/θ = 1 solved independently by bisection in f64: 0.47418...
        let b = box_kernel().theta_star(1e-9).unwrap();
        assert!((b - 0.474).abs() < 1e-3, "{b}");
        assert!((box_kernel().exp_moment(b) - 1.0).abs() < 1e-8);
        assert!(TransferFunction::Zero.theta_star(1e-6).unwrap().is_infinite());
        let crit = TransferFunction::exponential(1.0, 1.0).unwrap();
        assert!(matches!(crit.theta_star(1e-6), Err(TransferError::NotSubcritical { .. })));
    }

    #[test]
    fn invalid_parameters_rejected() {
        assert!(TransferFunction::exponential(-1.0, 1.0).is_err());
        assert!(TransferFunction::exponential(0.5, 0.0).is_err());
        assert!(TransferFunction::uniform_box(0.3, -2.0).is_err());
        assert!(TransferFunction::tabulated(vec![0.0, 1.0, 1.0], vec![1.0, 1.0, 0.0]).is_err());
        assert!(TransferFunction::tabulated(vec![0.0, 1.0], vec![1.0, -1.0]).is_err());
        assert!(TransferFunction::tabulated(vec![0.0], vec![1.0]).is_err());
    }

    fn tabulated_exponential(alpha: f64, beta: f64, tmax: f64, n: usize) -> TransferFunction {
        let grid: Vec<f64> = (0..=n).map(|i| tmax * i as f64 / n as f64).collect();
        let values = grid.iter().map(|t| alpha * (-beta * t).exp()).collect();
        TransferFunction::tabulated(grid, values).unwrap()
    }

    #[test]
    fn tabulated_matches_closed_forms() {
        let tab = tabulated_exponential(0.5, 1.0, 40.0, 40_000);
        assert_relative_eq!(tab.l1_norm(), 0.5, max_relative = 1e-4);
        assert_relative_eq!(tab.mean_moment(), 0.5, max_relative = 1e-4);
        assert_relative_eq!(tab.exp_moment(0.3), 0.5 / 0.7, max_relative = 1e-4);
        assert_relative_eq!(tab.exp_moment(1e-7), 0.5, max_relative = 1e-4);
        let t = tab.theta_star(1e-9).unwrap();
        assert!((t - 0.5).abs() < 1e-3);
    }

    #[test]
    fn tabulated_mass_inversion_round_trip() {
        let tab = Tabulated::new(vec![0.5, 1.0, 2.0, 3.0], vec![0.0, 0.4, 0.1, 0.1]).unwrap();
        for &x in &[0.6, 0.9, 1.0, 1.3, 2.5, 2.99] {
            let m = tab.mass_to(x);
            assert_relative_eq!(tab.inverse_mass(m), x, max_relative = 1e-12);
        }
        assert_eq!(tab.mass_to(0.2), 0.0);
        assert_relative_eq!(tab.mass_to(10.0), tab.total());
    }

    #[test]
    fn tabulated_zero_beyond_grid() {
        let tab = TransferFunction::tabulated(vec![1.0, 2.0], vec![1.0, 1.0]).unwrap();
        assert_eq!(tab.value(0.5), 0.0);
        assert_eq!(tab.value(1.5), 1.0);
        assert_eq!(tab.value(2.5), 0.0);
        assert_eq!(tab.tail_mass(3.0), 0.0);
        assert_relative_eq!(tab.tail_mass(1.5), 0.5);
    }

    #[test]
    fn sample_delay_zero_kernel() {
        let mut rng = stream(1, 0);
        assert_eq!(TransferFunction::Zero.sample_delay(&mut rng), Err(TransferError::ZeroKernel));
    }

    #[test]
    fn box_delays_within_support() {
        let mut rng = stream(2, 0);
        let h = box_kernel();
        for _ in 0..10_000 {
            let d = h.sample_delay(&mut rng).unwrap();
            assert!(d > 0.0 && d <= 2.0);
        }
    }

    #[test]
    fn truncated_beyond_support_is_empty() {
        let mut rng = stream(3, 0);
        let h = box_kernel();
        for _ in 0..1000 {
            assert!(h.truncated_offspring(2.0, &mut rng).is_empty());
            assert!(h.truncated_offspring(5.0, &mut rng).is_empty());
        }
    }

    #[test]
    fn truncated_offspring_positive_and_in_support() {
        let mut rng = stream(4, 0);
        let h = box_kernel();
        for _ in 0..2000 {
            for u in h.truncated_offspring(1.5, &mut rng) {
                assert!(u > 0.0 && u <= 0.5);
            }
        }
    }
}
