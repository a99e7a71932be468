//! Power law with exponential cutoff, `(r + r₀)^{-β} e^{-r/κ}`, on a finite support.
//!
//! In natural parameters `(β, θ = 1/κ)` this is an exponential family with
//! sufficient statistics `(-ln(r + r₀), -r)`, so for fixed `r₀` the
//! log-likelihood is concave and Newton's method with the model covariance as
//! Hessian converges from any interior start. Normalization and moments come
//! from adaptive quadrature in `u = ln(r + r₀)`, where the integrand is smooth
//! over the many decades the support spans.

use crate::numeric::{integrate, reproducible_sum};
use crate::trajectory::ClosedRange;

use super::{in_support, FitError, FitResult, Model};

const QUAD_TOL: f64 = 1e-13;
const QUAD_MAX_SEGMENTS: usize = 4000;
const MAX_ITERATIONS: usize = 200;
const STEP_TOL: f64 = 1e-8;
const MIN_SAMPLES: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum R0 {
    Fixed(f64),
    /// Maximize the profile likelihood over `r₀ ∈ [0, r_hi]`.
    Free,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerLawOptions {
    pub r0: R0,
    /// Hold `β` at this value instead of fitting it.
    pub beta: Option<f64>,
}

impl Default for PowerLawOptions {
    fn default() -> Self {
        Self { r0: R0::Fixed(0.0), beta: None }
    }
}

/// Integration variable: `u = ln(r + r₀)` when `r_lo + r₀ > 0`, plain `r` otherwise.
#[derive(Debug, Clone, Copy, PartialEq)]
enum Domain {
    Log { lo: f64, hi: f64 },
    Linear { lo: f64, hi: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Shape {
    beta: f64,
    theta: f64,
    r0: f64,
    domain: Domain,
}

impl Shape {
    fn new(beta: f64, theta: f64, r0: f64, support: ClosedRange) -> Result<Self, FitError> {
        if !(support.lo >= 0.0 && support.hi.is_finite()) {
            return Err(FitError::BadSupport(format!(
                "displacement support must be finite and non-negative, got [{}, {}]",
                support.lo, support.hi
            )));
        }
        let domain = if support.lo + r0 > 0.0 {
            Domain::Log { lo: (support.lo + r0).ln(), hi: (support.hi + r0).ln() }
        } else if beta == 0.0 {
            Domain::Linear { lo: support.lo, hi: support.hi }
        } else {
            return Err(FitError::BadSupport(
                "support touches 0 with r0 = 0 and beta > 0; use r0 > 0 or r_lo > 0".into(),
            ));
        };
        Ok(Self { beta, theta, r0, domain })
    }

    fn bounds(&self) -> (f64, f64) {
        match self.domain {
            Domain::Log { lo, hi } | Domain::Linear { lo, hi } => (lo, hi),
        }
    }

    /// Log of the integrand in the domain variable, and the matching `(ln(r + r₀), r)`.
    #[inline]
    fn eval(&self, v: f64) -> (f64, f64, f64) {
        match self.domain {
            Domain::Log { .. } => {
                let r = v.exp() - self.r0;
                ((1.0 - self.beta) * v - self.theta * r, v, r)
            }
            Domain::Linear { .. } => (-self.theta * v, (v + self.r0).ln(), v),
        }
    }

    fn to_domain(&self, r: f64) -> f64 {
        match self.domain {
            Domain::Log { .. } => (r + self.r0).ln(),
            Domain::Linear { .. } => r,
        }
    }

    /// Largest value of the log-integrand on the domain.
    fn log_peak(&self) -> f64 {
        let (lo, hi) = self.bounds();
        let mut peak = self.eval(lo).0.max(self.eval(hi).0);
        if let Domain::Log { .. } = self.domain {
            if self.beta < 1.0 && self.theta > 0.0 {
                let v = ((1.0 - self.beta) / self.theta).ln();
                if v > lo && v < hi {
                    peak = peak.max(self.eval(v).0);
                }
            }
        }
        peak
    }

    fn log_partition(&self) -> f64 {
        let peak = self.log_peak();
        let (lo, hi) = self.bounds();
        let q = integrate(|v| [(self.eval(v).0 - peak).exp()], lo, hi, QUAD_TOL, QUAD_MAX_SEGMENTS);
        peak + q.value[0].ln()
    }

    fn moments(&self) -> Moments {
        let peak = self.log_peak();
        let (lo, hi) = self.bounds();
        let q = integrate(
            |v| {
                let (h, l, r) = self.eval(v);
                let w = (h - peak).exp();
                [w, w * l, w * r, w * l * l, w * l * r, w * r * r]
            },
            lo,
            hi,
            QUAD_TOL,
            QUAD_MAX_SEGMENTS,
        );
        let [z, sl, sr, sll, slr, srr] = q.value;
        let (mean_l, mean_r) = (sl / z, sr / z);
        Moments {
            mean_l,
            mean_r,
            var_l: (sll / z - mean_l * mean_l).max(0.0),
            cov_lr: slr / z - mean_l * mean_r,
            var_r: (srr / z - mean_r * mean_r).max(0.0),
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Moments {
    mean_l: f64,
    mean_r: f64,
    var_l: f64,
    cov_lr: f64,
    var_r: f64,
}

/// Normalized truncated power law with exponential cutoff.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncatedPowerLawModel {
    beta: f64,
    kappa: f64,
    r0: f64,
    support: ClosedRange,
    shape: Shape,
    log_norm: f64,
}

impl TruncatedPowerLawModel {
    /// `kappa = +inf` gives a pure truncated power law.
    pub fn new(beta: f64, kappa: f64, r0: f64, support: ClosedRange) -> Result<Self, FitError> {
        if !(beta >= 0.0 && beta.is_finite()) {
            return Err(FitError::BadParameter(format!("beta must be finite and >= 0, got {beta}")));
        }
        if !(kappa > 0.0) {
            return Err(FitError::BadParameter(format!("kappa must be positive, got {kappa}")));
        }
        if !(r0 >= 0.0 && r0.is_finite()) {
            return Err(FitError::BadParameter(format!("r0 must be finite and >= 0, got {r0}")));
        }
        let shape = Shape::new(beta, 1.0 / kappa, r0, support)?;
        let log_norm = shape.log_partition();
        if !log_norm.is_finite() {
            return Err(FitError::BadParameter("density cannot be normalized".into()));
        }
        Ok(Self { beta, kappa, r0, support, shape, log_norm })
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn r0(&self) -> f64 {
        self.r0
    }

    pub fn support(&self) -> ClosedRange {
        self.support
    }

    #[inline]
    fn log_density(&self, r: f64) -> f64 {
        let power = if self.beta == 0.0 { 0.0 } else { -self.beta * (r + self.r0).ln() };
        power - self.shape.theta * r - self.log_norm
    }

    pub fn pdf(&self, r: f64) -> Result<f64, FitError> {
        if !self.support.contains(r) {
            return Err(FitError::OutOfSupport { x: r, lo: self.support.lo, hi: self.support.hi });
        }
        Ok(self.log_density(r).exp())
    }

    fn mass_between(&self, a: f64, b: f64) -> f64 {
        if b <= a {
            return 0.0;
        }
        let (va, vb) = (self.shape.to_domain(a), self.shape.to_domain(b));
        // A single 15-point rule is exact to rounding over short spans of the smooth integrand.
        let max_segments = if vb - va < 0.05 { 1 } else { 200 };
        let q = integrate(|v| [(self.shape.eval(v).0 - self.log_norm).exp()], va, vb, 1e-12, max_segments);
        q.value[0]
    }

    pub fn cdf(&self, r: f64) -> f64 {
        if r <= self.support.lo {
            return 0.0;
        }
        if r >= self.support.hi {
            return 1.0;
        }
        self.mass_between(self.support.lo, r).clamp(0.0, 1.0)
    }

    /// CDF at ascending points, integrating only between neighbours.
    pub fn cdf_sorted(&self, sorted: &[f64]) -> Vec<f64> {
        let mut out = Vec::with_capacity(sorted.len());
        let mut prev = self.support.lo;
        let mut acc = 0.0;
        for &x in sorted {
            let x = x.clamp(self.support.lo, self.support.hi);
            acc += self.mass_between(prev, x);
            prev = x;
            out.push(acc.min(1.0));
        }
        out
    }

    /// `nodes + 1` points spaced evenly in the integration variable, with the
    /// CDF at each. The first CDF value is 0 and the last exactly 1.
    pub fn cdf_table(&self, nodes: usize) -> (Vec<f64>, Vec<f64>) {
        let nodes = nodes.max(1);
        let (lo, hi) = self.shape.bounds();
        let step = (hi - lo) / nodes as f64;
        let mut rs: Vec<f64> = (0..=nodes)
            .map(|k| {
                let v = lo + step * k as f64;
                match self.shape.domain {
                    Domain::Log { .. } => v.exp() - self.r0,
                    Domain::Linear { .. } => v,
                }
            })
            .collect();
        rs[0] = self.support.lo;
        rs[nodes] = self.support.hi;
        for k in 1..nodes {
            rs[k] = rs[k].clamp(rs[k - 1], self.support.hi);
        }
        let mut fs = Vec::with_capacity(nodes + 1);
        fs.push(0.0);
        let mut acc = 0.0;
        for w in rs.windows(2) {
            acc += self.mass_between(w[0], w[1]);
            fs.push(acc);
        }
        let total = acc;
        fs.iter_mut().for_each(|f| *f /= total);
        fs[nodes] = 1.0;
        (rs, fs)
    }

    pub fn log_likelihood(&self, samples: &[f64]) -> f64 {
        reproducible_sum(samples, |&r| self.log_density(r))
    }
}

#[derive(Debug, Clone, Copy)]
struct Profile {
    beta: f64,
    theta: f64,
    /// Mean log-likelihood per sample.
    objective: f64,
    iterations: usize,
    converged: bool,
}

struct SufficientStats {
    mean_log: f64,
    mean_r: f64,
}

fn sufficient_stats(data: &[f64], r0: f64, need_log: bool) -> SufficientStats {
    let n = data.len() as f64;
    let mean_log = if need_log { reproducible_sum(data, |&r| (r + r0).ln()) / n } else { 0.0 };
    SufficientStats { mean_log, mean_r: reproducible_sum(data, |&r| r) / n }
}

fn objective(stats: &SufficientStats, shape: &Shape) -> f64 {
    let power = if shape.beta == 0.0 { 0.0 } else { -shape.beta * stats.mean_log };
    power - shape.theta * stats.mean_r - shape.log_partition()
}

fn fit_profile(
    data: &[f64],
    support: ClosedRange,
    r0: f64,
    beta_fixed: Option<f64>,
) -> Result<Profile, FitError> {
    let stats = sufficient_stats(data, r0, beta_fixed != Some(0.0));
    let mut beta = beta_fixed.unwrap_or(1.0);
    let mut theta = 1.0 / (support.hi - support.lo);
    let mut shape = Shape::new(beta, theta, r0, support)?;
    let mut current = objective(&stats, &shape);
    let mut converged = false;
    let mut iterations = 0;

    while iterations < MAX_ITERATIONS {
        iterations += 1;
        let m = shape.moments();
        let g_beta = m.mean_l - stats.mean_log;
        let g_theta = m.mean_r - stats.mean_r;

        let theta_only = |g_theta: f64| if m.var_r > 0.0 { g_theta / m.var_r } else { 0.0 };
        let (mut d_beta, mut d_theta) = if beta_fixed.is_some() {
            (0.0, theta_only(g_theta))
        } else {
            let det = m.var_l * m.var_r - m.cov_lr * m.cov_lr;
            if det > 1e-14 * m.var_l * m.var_r {
                ((m.var_r * g_beta - m.cov_lr * g_theta) / det, (m.var_l * g_theta - m.cov_lr * g_beta) / det)
            } else {
                (g_beta / m.var_l.max(f64::MIN_POSITIVE), theta_only(g_theta))
            }
        };
        // Active bounds: β >= 0, θ >= 0.
        if beta_fixed.is_none() && beta == 0.0 && d_beta < 0.0 {
            d_beta = 0.0;
            d_theta = theta_only(g_theta);
        }
        if theta == 0.0 && d_theta < 0.0 {
            d_theta = 0.0;
            if beta_fixed.is_none() && m.var_l > 0.0 {
                d_beta = g_beta / m.var_l;
            }
        }

        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..60 {
            let nb = if beta_fixed.is_some() { beta } else { (beta + t * d_beta).max(0.0) };
            let nt = (theta + t * d_theta).max(0.0);
            if let Ok(cand) = Shape::new(nb, nt, r0, support) {
                let value = objective(&stats, &cand);
                if value.is_finite() && value >= current - 1e-15 * current.abs() {
                    accepted = Some((cand, value));
                    break;
                }
            }
            t *= 0.5;
        }
        let Some((cand, value)) = accepted else {
            // No ascent possible from here: stationary up to rounding.
            converged = g_beta.abs() < 1e-6 && g_theta.abs() < 1e-6 * stats.mean_r.max(1.0);
            break;
        };
        let step_beta = (cand.beta - beta).abs();
        let step_theta = (cand.theta - theta).abs();
        beta = cand.beta;
        theta = cand.theta;
        shape = cand;
        current = value;
        if step_beta <= STEP_TOL * beta.abs().max(1.0) && step_theta <= STEP_TOL * theta {
            converged = true;
            break;
        }
    }
    Ok(Profile { beta, theta, objective: current, iterations, converged })
}

/// Maximum-likelihood `(β, κ)` (and optionally `r₀`) for samples on a finite support.
pub fn fit_power_law_cutoff(
    samples: &[f64],
    support: ClosedRange,
    options: PowerLawOptions,
) -> Result<FitResult, FitError> {
    if !support.hi.is_finite() {
        return Err(FitError::BadSupport("the displacement support needs a finite upper bound".into()));
    }
    if !(support.lo >= 0.0) {
        return Err(FitError::BadSupport(format!("lower bound {} must be non-negative", support.lo)));
    }
    if let Some(b) = options.beta {
        if !(b >= 0.0 && b.is_finite()) {
            return Err(FitError::BadParameter(format!("fixed beta must be finite and >= 0, got {b}")));
        }
    }
    let data = in_support(samples, support);
    if data.len() < MIN_SAMPLES {
        return Err(FitError::InsufficientData { needed: MIN_SAMPLES, found: data.len() });
    }

    let (r0, profile, outer) = match options.r0 {
        R0::Fixed(r0) => {
            if !(r0 >= 0.0 && r0.is_finite()) {
                return Err(FitError::BadParameter(format!("r0 must be finite and >= 0, got {r0}")));
            }
            (r0, fit_profile(&data, support, r0, options.beta)?, 0)
        }
        R0::Free => {
            let floor = if support.lo > 0.0 { 0.0 } else { 1e-6 * support.hi };
            let (r0, outer) = golden_section_max(
                |s| {
                    let r0 = s.exp_m1();
                    fit_profile(&data, support, r0, options.beta).map_or(f64::NEG_INFINITY, |p| p.objective)
                },
                floor.ln_1p(),
                support.hi.ln_1p(),
            );
            let r0 = r0.exp_m1();
            (r0, fit_profile(&data, support, r0, options.beta)?, outer)
        }
    };

    let kappa = if profile.theta > 0.0 { 1.0 / profile.theta } else { f64::INFINITY };
    let model = TruncatedPowerLawModel::new(profile.beta, kappa, r0, support)?;
    Ok(FitResult::finish(Model::PowerLawCutoff(model), &data, profile.converged, profile.iterations + outer))
}

fn golden_section_max<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64) -> (f64, usize) {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    let mut iterations = 0;
    while (b - a) > 1e-9 * (1.0 + a.abs() + b.abs()) && iterations < 200 {
        iterations += 1;
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    let best = if fc >= fd { c } else { d };
    // The bracket ends are candidates too (profile may peak at a bound).
    let candidates = [(a, f(a)), (best, fc.max(fd)), (b, f(b))];
    let (x, _) = candidates.into_iter().fold((best, f64::NEG_INFINITY), |acc, (x, v)| if v > acc.1 { (x, v) } else { acc });
    (x, iterations)
}
