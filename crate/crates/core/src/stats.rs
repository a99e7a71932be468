//! Empirical distributions of interval samples: histograms, per-day curve
//! families, activity density and per-subscriber waiting-time means.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::TrajectoryStore;
use crate::numeric::compensated_sum;
use crate::trajectory::{ClosedRange, IntervalSample};

/// Default resolution of logarithmic binning.
pub const DEFAULT_BINS_PER_DECADE: u32 = 50;

#[derive(Debug, Error, PartialEq)]
pub enum StatsError {
    #[error("histogram needs at least two edges")]
    TooFewEdges,
    #[error("bin edges must be finite and strictly increasing")]
    NonIncreasingEdges,
    #[error("cutoff {cutoff} lies below the last bin edge {last_edge}")]
    CutoffBelowLastEdge { cutoff: f64, last_edge: f64 },
    #[error("invalid binning range {lo}..{hi}")]
    BadRange { lo: f64, hi: f64 },
    #[error("no data")]
    NoData,
}

/// Binned distribution with explicit edges.
///
/// Bins are half-open `[lo, hi)` except the last, which is closed. Samples
/// `>= cutoff` never enter a bin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub bin_edges: Vec<f64>,
    pub counts: Vec<u64>,
    pub probabilities: Vec<f64>,
    pub pdf: Vec<f64>,
    pub cutoff: f64,
    /// Samples below the first edge.
    pub underflow: u64,
    /// Samples at or beyond the cutoff, or above the last edge.
    pub overflow: u64,
}

impl Histogram {
    pub fn from_counts(bin_edges: Vec<f64>, counts: Vec<u64>, cutoff: f64, underflow: u64, overflow: u64) -> Self {
        let total: u64 = counts.iter().sum();
        let probabilities: Vec<f64> = if total == 0 {
            vec![0.0; counts.len()]
        } else {
            counts.iter().map(|&c| c as f64 / total as f64).collect()
        };
        let pdf = probabilities
            .iter()
            .zip(bin_edges.windows(2))
            .map(|(p, w)| p / (w[1] - w[0]))
            .collect();
        Self { bin_edges, counts, probabilities, pdf, cutoff, underflow, overflow }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn bin_count(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.total() == 0
    }

    /// Geometric bin centres where the left edge is positive, arithmetic otherwise.
    pub fn centers(&self) -> Vec<f64> {
        bin_centers(&self.bin_edges)
    }
}

pub fn bin_centers(edges: &[f64]) -> Vec<f64> {
    edges
        .windows(2)
        .map(|w| if w[0] > 0.0 { (w[0] * w[1]).sqrt() } else { 0.5 * (w[0] + w[1]) })
        .collect()
}

fn validate_edges(edges: &[f64], cutoff: f64) -> Result<(), StatsError> {
    if edges.len() < 2 {
        return Err(StatsError::TooFewEdges);
    }
    if edges.iter().any(|e| !e.is_finite()) || edges.windows(2).any(|w| w[0] >= w[1]) {
        return Err(StatsError::NonIncreasingEdges);
    }
    let last_edge = *edges.last().expect("len >= 2");
    if cutoff.is_nan() || cutoff < last_edge {
        return Err(StatsError::CutoffBelowLastEdge { cutoff, last_edge });
    }
    Ok(())
}

#[derive(Clone, Copy)]
enum Slot {
    Bin(usize),
    Under,
    Over,
}

#[inline]
fn locate(edges: &[f64], cutoff: f64, x: f64) -> Slot {
    let last = edges.len() - 1;
    if x.is_nan() || x >= cutoff || x > edges[last] {
        Slot::Over
    } else if x < edges[0] {
        Slot::Under
    } else if x == edges[last] {
        Slot::Bin(last - 1)
    } else {
        Slot::Bin(edges.partition_point(|&e| e <= x) - 1)
    }
}

const HIST_CHUNK: usize = 1 << 15;

pub fn make_histogram(samples: &[f64], edges: Vec<f64>, cutoff: f64) -> Result<Histogram, StatsError> {
    validate_edges(&edges, cutoff)?;
    let bins = edges.len() - 1;
    let (counts, under, over) = samples
        .par_chunks(HIST_CHUNK)
        .map(|chunk| {
            let mut counts = vec![0u64; bins];
            let (mut under, mut over) = (0u64, 0u64);
            for &x in chunk {
                match locate(&edges, cutoff, x) {
                    Slot::Bin(i) => counts[i] += 1,
                    Slot::Under => under += 1,
                    Slot::Over => over += 1,
                }
            }
            (counts, under, over)
        })
        .reduce(
            || (vec![0u64; bins], 0, 0),
            |(mut a, ua, oa), (b, ub, ob)| {
                a.iter_mut().zip(&b).for_each(|(x, y)| *x += y);
                (a, ua + ub, oa + ob)
            },
        );
    Ok(Histogram::from_counts(edges, counts, cutoff, under, over))
}

/// Bin layout for a positive variable.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Binning {
    Log { per_decade: u32 },
    Linear { bins: u32 },
}

impl Default for Binning {
    fn default() -> Self {
        Binning::Log { per_decade: DEFAULT_BINS_PER_DECADE }
    }
}

impl Binning {
    pub fn edges(&self, lo: f64, hi: f64) -> Result<Vec<f64>, StatsError> {
        match *self {
            Binning::Log { per_decade } => log_edges(lo, hi, per_decade),
            Binning::Linear { bins } => linear_edges(lo, hi, bins),
        }
    }
}

/// `ceil(per_decade * decades)` log-spaced bins from `lo` to exactly `hi`.
pub fn log_edges(lo: f64, hi: f64, per_decade: u32) -> Result<Vec<f64>, StatsError> {
    if !(lo > 0.0 && hi > lo && hi.is_finite()) || per_decade == 0 {
        return Err(StatsError::BadRange { lo, hi });
    }
    let decades = (hi / lo).log10();
    let n = ((decades * f64::from(per_decade)).ceil() as usize).max(1);
    let ratio = (hi / lo).ln() / n as f64;
    let mut edges: Vec<f64> = (0..n).map(|i| lo * (ratio * i as f64).exp()).collect();
    edges.push(hi);
    Ok(edges)
}

pub fn linear_edges(lo: f64, hi: f64, bins: u32) -> Result<Vec<f64>, StatsError> {
    if !(lo.is_finite() && hi.is_finite() && hi > lo) || bins == 0 {
        return Err(StatsError::BadRange { lo, hi });
    }
    let w = (hi - lo) / f64::from(bins);
    let mut edges: Vec<f64> = (0..bins).map(|i| lo + w * f64::from(i)).collect();
    edges.push(hi);
    Ok(edges)
}

/// Largest admitted Δt and Δr.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cutoffs {
    pub dt_max_obs: f64,
    pub dr_max_obs: f64,
}

pub fn observed_cutoffs(samples: &[IntervalSample]) -> Result<Cutoffs, StatsError> {
    if samples.is_empty() {
        return Err(StatsError::NoData);
    }
    let (dt, dr) = samples
        .iter()
        .fold((f64::NEG_INFINITY, f64::NEG_INFINITY), |(dt, dr), s| (dt.max(s.dt), dr.max(s.dr)));
    Ok(Cutoffs { dt_max_obs: dt, dr_max_obs: dr })
}

/// Minimum and maximum of Δt and Δr.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Extremes {
    pub dt_min: f64,
    pub dt_max: f64,
    pub dr_min: f64,
    pub dr_max: f64,
}

pub fn extremes<'a>(samples: impl IntoIterator<Item = &'a IntervalSample>) -> Option<Extremes> {
    samples.into_iter().fold(None, |acc, s| {
        Some(match acc {
            None => Extremes { dt_min: s.dt, dt_max: s.dt, dr_min: s.dr, dr_max: s.dr },
            Some(e) => Extremes {
                dt_min: e.dt_min.min(s.dt),
                dt_max: e.dt_max.max(s.dt),
                dr_min: e.dr_min.min(s.dr),
                dr_max: e.dr_max.max(s.dr),
            },
        })
    })
}

/// Per-subscriber mean waiting time ΔT_a, minutes.
#[derive(Debug, Clone, PartialEq)]
pub struct MeanInterEvent {
    /// `(subscriber index, mean)` sorted by subscriber.
    pub means: Vec<(u32, f64)>,
    /// Subscribers whose samples all fell outside the window.
    pub omitted: usize,
}

pub fn mean_inter_event_per_subscriber(samples: &[IntervalSample], dt_window: ClosedRange) -> MeanInterEvent {
    let mut acc: BTreeMap<u32, Vec<f64>> = BTreeMap::new();
    for s in samples {
        let entry = acc.entry(s.subscriber).or_default();
        if dt_window.contains(s.dt) {
            entry.push(s.dt);
        }
    }
    let mut omitted = 0;
    let means = acc
        .into_iter()
        .filter_map(|(sub, dts)| {
            if dts.is_empty() {
                omitted += 1;
                None
            } else {
                Some((sub, compensated_sum(dts.iter().copied()) / dts.len() as f64))
            }
        })
        .collect();
    MeanInterEvent { means, omitted }
}

/// Mean of per-subscriber means; every subscriber weighs the same.
pub fn population_mean(means: &MeanInterEvent) -> Result<f64, StatsError> {
    if means.means.is_empty() {
        return Err(StatsError::NoData);
    }
    Ok(compensated_sum(means.means.iter().map(|&(_, m)| m)) / means.means.len() as f64)
}

/// Mean over all admitted samples pooled together.
pub fn pooled_mean(samples: &[IntervalSample], dt_window: ClosedRange) -> Result<f64, StatsError> {
    let admitted: Vec<f64> = samples.iter().map(|s| s.dt).filter(|&dt| dt_window.contains(dt)).collect();
    if admitted.is_empty() {
        return Err(StatsError::NoData);
    }
    Ok(compensated_sum(admitted.iter().copied()) / admitted.len() as f64)
}

/// Per-day histograms on shared edges and their pointwise mean.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveFamily {
    pub bin_edges: Vec<f64>,
    pub per_day: Vec<Histogram>,
    /// Mean over all days of the per-day probabilities; empty days count as zero curves.
    pub day_average: Vec<f64>,
    pub empty_days: Vec<u32>,
}

impl CurveFamily {
    pub fn day_average_pdf(&self) -> Vec<f64> {
        self.day_average
            .iter()
            .zip(self.bin_edges.windows(2))
            .map(|(p, w)| p / (w[1] - w[0]))
            .collect()
    }
}

/// `per_day[d]` holds the sample values of day `d`.
pub fn curve_family(per_day: &[Vec<f64>], edges: Vec<f64>, cutoff: f64) -> Result<CurveFamily, StatsError> {
    validate_edges(&edges, cutoff)?;
    if per_day.is_empty() {
        return Err(StatsError::NoData);
    }
    let hists = per_day
        .iter()
        .map(|v| make_histogram(v, edges.clone(), cutoff))
        .collect::<Result<Vec<_>, _>>()?;
    let days = hists.len() as f64;
    let day_average = (0..edges.len() - 1)
        .map(|i| compensated_sum(hists.iter().map(|h| h.probabilities[i])) / days)
        .collect();
    let empty_days = hists
        .iter()
        .enumerate()
        .filter(|(_, h)| h.is_empty())
        .map(|(d, _)| d as u32)
        .collect();
    Ok(CurveFamily { bin_edges: edges, per_day: hists, day_average, empty_days })
}

/// Stored events per hour of the observation window.
pub fn hourly_activity_density(store: &TrajectoryStore) -> Vec<u64> {
    let window = store.window();
    let mut table = vec![0u64; window.hour_count()];
    for e in store.events() {
        if let Some(h) = window.hour_of(e.t) {
            table[h] += 1;
        }
    }
    table
}
