//! Maximum-likelihood fitting of the waiting-time and displacement laws on
//! truncated supports, with Kolmogorov–Smirnov goodness of fit.
//!
//! Two families are provided:
//!
//! * [`ExponentialModel`]: `p(t) = λ e^{-λt} / (e^{-λ t_lo} - e^{-λ t_hi})` on `[t_lo, t_hi]`.
//! * [`TruncatedPowerLawModel`]: `p(r) ∝ (r + r₀)^{-β} e^{-r/κ}` on `[r_lo, r_hi]`,
//!   normalized by adaptive quadrature.

mod exponential;
mod power_law;
mod regression;

pub use exponential::{fit_exponential, ExponentialModel};
pub use power_law::{fit_power_law_cutoff, PowerLawOptions, R0, TruncatedPowerLawModel};
pub use regression::{fit_exponential_histogram, fit_power_law_histogram, HistogramFit};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::trajectory::ClosedRange;

#[derive(Debug, Error, PartialEq)]
pub enum FitError {
    #[error("need at least {needed} samples inside the support, found {found}")]
    InsufficientData { needed: usize, found: usize },
    #[error("no samples")]
    NoData,
    #[error("all samples equal {value}, at the support edge")]
    Degenerate { value: f64 },
    #[error("bad support: {0}")]
    BadSupport(String),
    #[error("invalid model parameter: {0}")]
    BadParameter(String),
    #[error("{x} lies outside the support [{lo}, {hi}]")]
    OutOfSupport { x: f64, lo: f64, hi: f64 },
    #[error("histogram regression failed: {0}")]
    Regression(String),
}

/// A fitted (or hand-built) model of either family.
#[derive(Debug, Clone, PartialEq)]
pub enum Model {
    Exponential(ExponentialModel),
    PowerLawCutoff(TruncatedPowerLawModel),
}

impl Model {
    pub fn support(&self) -> ClosedRange {
        match self {
            Model::Exponential(m) => m.support(),
            Model::PowerLawCutoff(m) => m.support(),
        }
    }

    pub fn pdf(&self, x: f64) -> Result<f64, FitError> {
        match self {
            Model::Exponential(m) => m.pdf(x),
            Model::PowerLawCutoff(m) => m.pdf(x),
        }
    }

    /// CDF at each of `sorted` (ascending, inside the support).
    pub fn cdf_sorted(&self, sorted: &[f64]) -> Vec<f64> {
        match self {
            Model::Exponential(m) => sorted.iter().map(|&x| m.cdf(x)).collect(),
            Model::PowerLawCutoff(m) => m.cdf_sorted(sorted),
        }
    }

    pub fn log_likelihood(&self, samples: &[f64]) -> f64 {
        match self {
            Model::Exponential(m) => m.log_likelihood(samples),
            Model::PowerLawCutoff(m) => m.log_likelihood(samples),
        }
    }

    pub fn kind(&self) -> ModelKind {
        match self {
            Model::Exponential(_) => ModelKind::Exponential,
            Model::PowerLawCutoff(_) => ModelKind::PowerLawCutoff,
        }
    }
}

/// Normalized density at `x`; errors outside the support.
pub fn model_pdf(model: &Model, x: f64) -> Result<f64, FitError> {
    model.pdf(x)
}

/// Densities at many points (e.g. bin centres for overlays).
pub fn model_pdf_many(model: &Model, xs: &[f64]) -> Result<Vec<f64>, FitError> {
    xs.iter().map(|&x| model.pdf(x)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Exponential,
    PowerLawCutoff,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub model: Model,
    pub n_samples: usize,
    pub log_likelihood: f64,
    /// Present only for converged fits.
    pub ks_statistic: Option<f64>,
    pub converged: bool,
    pub iterations: usize,
}

impl FitResult {
    /// Scores `model` on `samples`; KS is computed only when `converged`.
    pub fn finish(model: Model, samples: &[f64], converged: bool, iterations: usize) -> Self {
        let log_likelihood = model.log_likelihood(samples);
        let ks_statistic = converged.then(|| ks_statistic(samples, &model));
        FitResult { model, n_samples: samples.len(), log_likelihood, ks_statistic, converged, iterations }
    }

    pub fn to_record(&self) -> FitRecord {
        let support = self.model.support();
        let params = match &self.model {
            Model::Exponential(m) => FitParams::Exponential { lambda: m.rate() },
            Model::PowerLawCutoff(m) => FitParams::PowerLawCutoff {
                beta: m.beta(),
                kappa: m.kappa().is_finite().then_some(m.kappa()),
                r0: m.r0(),
            },
        };
        FitRecord {
            target: None,
            model: self.model.kind(),
            params,
            support: (support.lo, support.hi.is_finite().then_some(support.hi)),
            n: self.n_samples,
            log_likelihood: self.log_likelihood,
            ks: self.ks_statistic,
            converged: self.converged,
            iterations: self.iterations,
        }
    }
}

/// Exact two-sided KS distance between the empirical CDF of `samples` and
/// the model CDF, evaluated at the sample points.
pub fn ks_statistic(samples: &[f64], model: &Model) -> f64 {
    if samples.is_empty() {
        return 0.0;
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let cdf = model.cdf_sorted(&sorted);
    let n = sorted.len() as f64;
    cdf.iter()
        .enumerate()
        .map(|(i, &f)| {
            let above = (i + 1) as f64 / n - f;
            let below = f - i as f64 / n;
            above.max(below)
        })
        .fold(0.0, f64::max)
}

/// Fit parameters as written to `fits.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FitParams {
    Exponential { lambda: f64 },
    /// `kappa = null` encodes an infinite cutoff scale.
    PowerLawCutoff { beta: f64, kappa: Option<f64>, r0: f64 },
}

/// One entry of `fits.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitRecord {
    /// `"dt"` or `"dr"` when produced by the pipeline.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<String>,
    pub model: ModelKind,
    pub params: FitParams,
    /// `[lo, hi]`; `hi = null` means unbounded.
    pub support: (f64, Option<f64>),
    pub n: usize,
    pub log_likelihood: f64,
    pub ks: Option<f64>,
    pub converged: bool,
    #[serde(default)]
    pub iterations: usize,
}

impl FitRecord {
    /// Rebuilds the model described by this record.
    pub fn to_model(&self) -> Result<Model, FitError> {
        let support = ClosedRange::new(self.support.0, self.support.1.unwrap_or(f64::INFINITY))
            .map_err(|e| FitError::BadSupport(e.to_string()))?;
        match (&self.model, &self.params) {
            (ModelKind::Exponential, FitParams::Exponential { lambda }) => {
                Ok(Model::Exponential(ExponentialModel::new(*lambda, support)?))
            }
            (ModelKind::PowerLawCutoff, FitParams::PowerLawCutoff { beta, kappa, r0 }) => Ok(Model::PowerLawCutoff(
                TruncatedPowerLawModel::new(*beta, kappa.unwrap_or(f64::INFINITY), *r0, support)?,
            )),
            _ => Err(FitError::BadParameter("model kind does not match its parameters".into())),
        }
    }
}

/// Samples inside the closed support.
pub(crate) fn in_support(samples: &[f64], support: ClosedRange) -> Vec<f64> {
    samples.iter().copied().filter(|&x| support.contains(x)).collect()
}
