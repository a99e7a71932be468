use crate::numeric::reproducible_sum;
use crate::trajectory::ClosedRange;

use super::{in_support, FitError, FitResult, Model};

const MAX_ITERATIONS: usize = 200;
/// Per-sample score tolerance, in units of the variable.
const SCORE_TOL: f64 = 1e-10;

/// Exponential law with rate `λ` conditioned on `[lo, hi]` (`hi` may be infinite).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExponentialModel {
    rate: f64,
    support: ClosedRange,
}

impl ExponentialModel {
    pub fn new(rate: f64, support: ClosedRange) -> Result<Self, FitError> {
        if !(rate > 0.0 && rate.is_finite()) {
            return Err(FitError::BadParameter(format!("rate must be positive and finite, got {rate}")));
        }
        if !(support.lo >= 0.0) {
            return Err(FitError::BadSupport(format!("lower bound {} must be non-negative", support.lo)));
        }
        Ok(Self { rate, support })
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    pub fn support(&self) -> ClosedRange {
        self.support
    }

    fn width(&self) -> f64 {
        self.support.width()
    }

    /// `1 - e^{-λw}`, the probability mass of the untruncated law inside the support.
    fn mass(&self) -> f64 {
        let w = self.width();
        if w.is_infinite() {
            1.0
        } else {
            -(-self.rate * w).exp_m1()
        }
    }

    pub fn pdf(&self, t: f64) -> Result<f64, FitError> {
        if !self.support.contains(t) {
            return Err(FitError::OutOfSupport { x: t, lo: self.support.lo, hi: self.support.hi });
        }
        Ok(self.rate * (-self.rate * (t - self.support.lo)).exp() / self.mass())
    }

    pub fn cdf(&self, t: f64) -> f64 {
        if t <= self.support.lo {
            return 0.0;
        }
        if t >= self.support.hi {
            return 1.0;
        }
        -(-self.rate * (t - self.support.lo)).exp_m1() / self.mass()
    }

    /// Inverse CDF; `u = 0` maps to the lower bound, `u = 1` to the upper.
    pub fn quantile(&self, u: f64) -> f64 {
        let u = u.clamp(0.0, 1.0);
        if u == 1.0 {
            return self.support.hi;
        }
        let w = self.width();
        let excess = if w.is_infinite() {
            -(-u).ln_1p() / self.rate
        } else {
            -(u * (-self.rate * w).exp_m1()).ln_1p() / self.rate
        };
        (self.support.lo + excess).min(self.support.hi)
    }

    /// Analytic mean of the truncated law.
    pub fn mean(&self) -> f64 {
        truncated_mean(self.rate, self.support.lo, self.width())
    }

    pub fn log_likelihood(&self, samples: &[f64]) -> f64 {
        let n = samples.len() as f64;
        let excess = reproducible_sum(samples, |&t| t - self.support.lo);
        n * self.rate.ln() - self.rate * excess - n * self.mass().ln()
    }
}

/// `E[T]` for rate `λ` on `[lo, lo + w]`.
pub(crate) fn truncated_mean(rate: f64, lo: f64, w: f64) -> f64 {
    if w.is_infinite() {
        return lo + 1.0 / rate;
    }
    let x = rate * w;
    if x < 1e-4 {
        // 1/λ - w/(e^{λw} - 1) = w/2 - λw²/12 + λ³w⁴/720 - ...
        return lo + w * (0.5 - x / 12.0 + x.powi(3) / 720.0);
    }
    lo + 1.0 / rate - w / x.exp_m1()
}

/// `Var[T]` for rate `λ` on a window of width `w`.
fn truncated_variance(rate: f64, w: f64) -> f64 {
    if w.is_infinite() {
        return 1.0 / (rate * rate);
    }
    let x = rate * w;
    if x < 1e-3 {
        return w * w * (1.0 / 12.0 - x * x / 240.0);
    }
    let s = (0.5 * x).sinh();
    1.0 / (rate * rate) - w * w / (4.0 * s * s)
}

/// Maximum-likelihood rate for samples on `support`.
///
/// The per-sample score is `E_λ[T] - mean(T)`, which is monotone in `λ`, so
/// the root is found by safeguarded Newton iteration on a bracket. When the
/// sample mean reaches the support midpoint the likelihood increases all the
/// way to `λ → 0⁺`; the fit then returns the bracket floor.
pub fn fit_exponential(samples: &[f64], support: ClosedRange) -> Result<FitResult, FitError> {
    if !(support.lo >= 0.0) {
        return Err(FitError::BadSupport(format!("lower bound {} must be non-negative", support.lo)));
    }
    let data = in_support(samples, support);
    if data.len() < 2 {
        return Err(FitError::InsufficientData { needed: 2, found: data.len() });
    }
    let first = data[0];
    if data.iter().all(|&x| x == first) && (first == support.lo || first == support.hi) {
        return Err(FitError::Degenerate { value: first });
    }

    let lo = support.lo;
    let w = support.width();
    let mean = reproducible_sum(&data, |&x| x) / data.len() as f64;
    let excess = mean - lo;

    if w.is_infinite() {
        let model = ExponentialModel::new(1.0 / excess, support)?;
        return Ok(FitResult::finish(Model::Exponential(model), &data, true, 1));
    }

    let score = |rate: f64| truncated_mean(rate, lo, w) - mean;
    let floor = 1e-9 / w;
    if score(floor) <= 0.0 {
        // Flat (or rising) data: the likelihood is maximized at the boundary.
        let model = ExponentialModel::new(floor, support)?;
        return Ok(FitResult::finish(Model::Exponential(model), &data, true, 0));
    }
    // E[T] <= lo + 1/λ, so the score is negative at 2/excess.
    let (mut a, mut b) = (floor, 2.0 / excess);
    let mut rate = (1.0 / excess).clamp(a, b);
    let mut converged = false;
    let mut iterations = 0;
    while iterations < MAX_ITERATIONS {
        iterations += 1;
        let g = score(rate);
        if g.abs() < SCORE_TOL {
            converged = true;
            break;
        }
        if g > 0.0 {
            a = rate;
        } else {
            b = rate;
        }
        let newton = rate + g / truncated_variance(rate, w);
        rate = if newton > a && newton < b { newton } else { (a * b).sqrt() };
        if (b - a) <= 4.0 * f64::EPSILON * b {
            converged = score(rate).abs() < SCORE_TOL * 1e3;
            break;
        }
    }
    let model = ExponentialModel::new(rate, support)?;
    Ok(FitResult::finish(Model::Exponential(model), &data, converged, iterations))
}
