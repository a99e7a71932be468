//! Least-squares fits of `ln pdf` against bin centres, kept as a cross-check
//! on the likelihood fits.

use crate::stats::Histogram;
use crate::trajectory::ClosedRange;

use super::{ExponentialModel, FitError, TruncatedPowerLawModel};

/// Result of a histogram regression.
#[derive(Debug, Clone, PartialEq)]
pub struct HistogramFit<M> {
    pub model: M,
    /// Bins with positive density inside the support.
    pub bins_used: usize,
    /// Residual sum of squares in `ln pdf`.
    pub residual: f64,
}

fn usable_bins(hist: &Histogram, support: ClosedRange) -> Vec<(f64, f64)> {
    hist.centers()
        .into_iter()
        .zip(&hist.pdf)
        .filter(|&(c, &p)| p > 0.0 && support.contains(c))
        .map(|(c, &p)| (c, p.ln()))
        .collect()
}

/// Ordinary least squares `y ≈ b₀ + Σ b_k x_k` via the normal equations,
/// solved by Gaussian elimination with partial pivoting.
fn least_squares<const K: usize>(rows: &[([f64; K], f64)]) -> Result<([f64; K], f64, f64), FitError> {
    let dim = K + 1;
    let mut a = vec![vec![0.0; dim + 1]; dim];
    for (x, y) in rows {
        let mut v = vec![1.0];
        v.extend_from_slice(x);
        for i in 0..dim {
            for j in 0..dim {
                a[i][j] += v[i] * v[j];
            }
            a[i][dim] += v[i] * y;
        }
    }
    for col in 0..dim {
        let pivot = (col..dim).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs())).unwrap();
        if a[pivot][col].abs() < 1e-300 {
            return Err(FitError::Regression("design matrix is singular".into()));
        }
        a.swap(col, pivot);
        for row in 0..dim {
            if row != col {
                let f = a[row][col] / a[col][col];
                for k in col..=dim {
                    a[row][k] -= f * a[col][k];
                }
            }
        }
    }
    let coef: Vec<f64> = (0..dim).map(|i| a[i][dim] / a[i][i]).collect();
    let mut slopes = [0.0; K];
    slopes.copy_from_slice(&coef[1..]);
    let residual = rows
        .iter()
        .map(|(x, y)| {
            let pred = coef[0] + x.iter().zip(&slopes).map(|(a, b)| a * b).sum::<f64>();
            (y - pred).powi(2)
        })
        .sum();
    Ok((slopes, coef[0], residual))
}

/// Rate from the slope of `ln pdf` against `t`.
pub fn fit_exponential_histogram(hist: &Histogram, support: ClosedRange) -> Result<HistogramFit<ExponentialModel>, FitError> {
    let bins = usable_bins(hist, support);
    if bins.len() < 2 {
        return Err(FitError::InsufficientData { needed: 2, found: bins.len() });
    }
    let rows: Vec<([f64; 1], f64)> = bins.iter().map(|&(c, y)| ([c], y)).collect();
    let ([slope], _, residual) = least_squares(&rows)?;
    let model = ExponentialModel::new(-slope, support)
        .map_err(|_| FitError::Regression(format!("non-decaying slope {slope}")))?;
    Ok(HistogramFit { model, bins_used: bins.len(), residual })
}

/// `(β, κ)` from regressing `ln pdf` on `ln(r + r₀)` and `r`.
pub fn fit_power_law_histogram(
    hist: &Histogram,
    support: ClosedRange,
    r0: f64,
) -> Result<HistogramFit<TruncatedPowerLawModel>, FitError> {
    let bins = usable_bins(hist, support);
    if bins.len() < 3 {
        return Err(FitError::InsufficientData { needed: 3, found: bins.len() });
    }
    let rows: Vec<([f64; 2], f64)> = bins.iter().map(|&(c, y)| ([(c + r0).ln(), c], y)).collect();
    let ([a, b], _, residual) = least_squares(&rows)?;
    let beta = (-a).max(0.0);
    let kappa = if b < 0.0 { -1.0 / b } else { f64::INFINITY };
    let model = TruncatedPowerLawModel::new(beta, kappa, r0, support)?;
    Ok(HistogramFit { model, bins_used: bins.len(), residual })
}
