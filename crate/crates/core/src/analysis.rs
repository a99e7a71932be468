//! End-to-end analysis of an ingested store: interval samples, histograms,
//! per-day curve families, activity cohorts, hourly density and gyration.

use serde::{Deserialize, Serialize};

use crate::fit::{fit_exponential, fit_power_law_cutoff, FitError, FitResult, PowerLawOptions};
use crate::ingest::TrajectoryStore;
use crate::stats::{
    curve_family, extremes, hourly_activity_density, linear_edges, make_histogram, mean_inter_event_per_subscriber,
    pooled_mean, population_mean, Binning, Cutoffs, CurveFamily, Extremes, Histogram,
    MeanInterEvent, StatsError,
};
use crate::trajectory::{
    assign_cohorts, build_trajectories, collect_samples, radius_of_gyration, ActivityCohort, ClosedRange, CohortSpec,
    IntervalSample, TrajectoryMode, DEFAULT_DR_PAIR_WINDOW, DEFAULT_DT_WINDOW,
};

/// Upper edge of the bin that holds zero (and other sub-10 m) displacements.
pub const DR_ZERO_BIN_M: f64 = 10.0;
/// Default lower bound of the displacement fit support, meters.
pub const DEFAULT_DR_FIT_LO: f64 = 20.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisConfig {
    /// Δt window for waiting-time statistics, minutes.
    pub dt_window: ClosedRange,
    /// Δt window a pair must satisfy to enter displacement statistics, minutes.
    pub dr_pair_window: ClosedRange,
    /// Upper Δr admitted; `None` keeps everything up to the observed maximum.
    pub dr_max: Option<f64>,
    pub mode: TrajectoryMode,
    pub binning: Binning,
    pub cohorts: CohortSpec,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self {
            dt_window: DEFAULT_DT_WINDOW,
            dr_pair_window: DEFAULT_DR_PAIR_WINDOW,
            dr_max: None,
            mode: TrajectoryMode::WholeWindow,
            binning: Binning::default(),
            cohorts: CohortSpec::default(),
        }
    }
}

impl AnalysisConfig {
    pub fn admits_dt(&self, s: &IntervalSample) -> bool {
        self.dt_window.contains(s.dt)
    }

    pub fn admits_dr(&self, s: &IntervalSample) -> bool {
        self.dr_pair_window.contains(s.dt) && self.dr_max.is_none_or(|m| s.dr <= m)
    }
}

/// Admitted waiting times, minutes.
pub fn dt_values(samples: &[IntervalSample], config: &AnalysisConfig) -> Vec<f64> {
    samples.iter().filter(|s| config.admits_dt(s)).map(|s| s.dt).collect()
}

/// Admitted displacements, meters.
pub fn dr_values(samples: &[IntervalSample], config: &AnalysisConfig) -> Vec<f64> {
    samples.iter().filter(|s| config.admits_dr(s)).map(|s| s.dr).collect()
}

/// Exclusive cutoff that keeps the observed maximum inside the last (closed) bin.
fn cutoff_above(max_obs: f64) -> f64 {
    max_obs.next_up()
}

/// Waiting-time edges over `[dt_lo, dt_max_obs]`.
pub fn dt_edges(config: &AnalysisConfig, dt_max_obs: f64) -> Result<Vec<f64>, StatsError> {
    let hi = if dt_max_obs > config.dt_window.lo { dt_max_obs } else { config.dt_window.lo.next_up() };
    config.binning.edges(config.dt_window.lo, hi)
}

/// Displacement edges: `[0, 10 m)` then the configured binning up to `dr_max_obs`.
pub fn dr_edges(config: &AnalysisConfig, dr_max_obs: f64) -> Result<Vec<f64>, StatsError> {
    if dr_max_obs <= DR_ZERO_BIN_M {
        return linear_edges(0.0, DR_ZERO_BIN_M, 1);
    }
    let mut edges = vec![0.0];
    edges.extend(config.binning.edges(DR_ZERO_BIN_M, dr_max_obs)?);
    Ok(edges)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CohortCurve {
    pub cohort: ActivityCohort,
    pub subscribers: usize,
    pub histogram: Histogram,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Gyration {
    pub subscriber: u32,
    pub day: Option<u32>,
    pub radius_m: f64,
}

/// Scalar results, written as `analysis.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisSummary {
    pub config: AnalysisConfig,
    pub subscribers: usize,
    pub events: usize,
    pub trajectories: usize,
    pub dropped_single: usize,
    pub samples_raw: usize,
    pub samples_dt: usize,
    pub samples_dr: usize,
    pub cutoffs: Cutoffs,
    /// Before any window filter.
    pub extremes_raw: Option<Extremes>,
    /// Δt over the waiting-time set, Δr over the displacement set.
    pub extremes_admitted: Extremes,
    /// Mean of per-subscriber means, minutes.
    pub population_mean_dt: f64,
    /// Mean of all admitted Δt pooled, minutes.
    pub pooled_mean_dt: f64,
    pub mean_omitted_subscribers: usize,
    pub empty_days_dt: Vec<u32>,
    pub empty_days_dr: Vec<u32>,
}

#[derive(Debug, Clone)]
pub struct Analysis {
    pub summary: AnalysisSummary,
    pub samples: Vec<IntervalSample>,
    pub dt_histogram: Histogram,
    pub dr_histogram: Histogram,
    /// Histogram of per-subscriber mean waiting times.
    pub dta_histogram: Histogram,
    pub dt_curves: CurveFamily,
    pub dr_curves: CurveFamily,
    pub cohorts_dt: Vec<CohortCurve>,
    pub density: Vec<u64>,
    pub gyration: Vec<Gyration>,
    pub mean_inter_event: MeanInterEvent,
}

fn split_by_day(samples: &[IntervalSample], days: usize, admit: impl Fn(&IntervalSample) -> bool, value: impl Fn(&IntervalSample) -> f64) -> Vec<Vec<f64>> {
    let mut per_day = vec![Vec::new(); days];
    for s in samples.iter().filter(|s| admit(s)) {
        if let Some(v) = per_day.get_mut(s.day_index as usize) {
            v.push(value(s));
        }
    }
    per_day
}

pub fn analyze(store: &TrajectoryStore, config: &AnalysisConfig) -> Result<Analysis, StatsError> {
    let set = build_trajectories(store, config.mode);
    let samples = collect_samples(&set, store);
    let dt = dt_values(&samples, config);
    let dr = dr_values(&samples, config);
    if dt.is_empty() || dr.is_empty() {
        return Err(StatsError::NoData);
    }
    let dt_max_obs = dt.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let dr_max_obs = dr.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let dr_min_obs = dr.iter().copied().fold(f64::INFINITY, f64::min);
    let dt_min_obs = dt.iter().copied().fold(f64::INFINITY, f64::min);
    let cutoffs = Cutoffs { dt_max_obs, dr_max_obs };

    let dt_e = dt_edges(config, dt_max_obs)?;
    let dr_e = dr_edges(config, dr_max_obs)?;
    let dt_cut = cutoff_above(dt_max_obs).max(*dt_e.last().expect("edges"));
    let dr_cut = cutoff_above(dr_max_obs).max(*dr_e.last().expect("edges"));
    let dt_histogram = make_histogram(&dt, dt_e.clone(), dt_cut)?;
    let dr_histogram = make_histogram(&dr, dr_e.clone(), dr_cut)?;

    let days = store.window().day_count();
    let dt_curves = curve_family(&split_by_day(&samples, days, |s| config.admits_dt(s), |s| s.dt), dt_e.clone(), dt_cut)?;
    let dr_curves = curve_family(&split_by_day(&samples, days, |s| config.admits_dr(s), |s| s.dr), dr_e, dr_cut)?;

    let mean_inter_event = mean_inter_event_per_subscriber(&samples, config.dt_window);
    let means: Vec<f64> = mean_inter_event.means.iter().map(|&(_, m)| m).collect();
    let dta_hi = config.dt_window.hi;
    let dta_histogram = make_histogram(&means, config.binning.edges(config.dt_window.lo, dta_hi)?, dta_hi.next_up())?;

    // Activity counts over the whole window, for subscribers with >= 2 events.
    let counts = store
        .iter()
        .filter(|(_, ev)| ev.len() >= 2)
        .map(|(sub, ev)| (sub, ev.len() as u64));
    let members = assign_cohorts(counts, &config.cohorts);
    let mut cohort_of = vec![usize::MAX; store.subscriber_count()];
    for (c, subs) in members.iter().enumerate() {
        for &s in subs {
            cohort_of[s as usize] = c;
        }
    }
    let mut cohort_dt = vec![Vec::new(); members.len()];
    for s in samples.iter().filter(|s| config.admits_dt(s)) {
        if let Some(v) = cohort_dt.get_mut(cohort_of[s.subscriber as usize]) {
            v.push(s.dt);
        }
    }
    let cohorts_dt = config
        .cohorts
        .cohorts()
        .iter()
        .zip(&members)
        .zip(&cohort_dt)
        .map(|((cohort, subs), values)| {
            Ok(CohortCurve {
                cohort: cohort.clone(),
                subscribers: subs.len(),
                histogram: make_histogram(values, dt_e.clone(), dt_cut)?,
            })
        })
        .collect::<Result<Vec<_>, StatsError>>()?;

    let gyration = set
        .trajectories
        .iter()
        .map(|t| Gyration { subscriber: t.subscriber, day: t.day, radius_m: radius_of_gyration(t, store.coords()) })
        .collect();

    let summary = AnalysisSummary {
        config: config.clone(),
        subscribers: store.subscriber_count(),
        events: store.event_count(),
        trajectories: set.trajectories.len(),
        dropped_single: set.dropped_single,
        samples_raw: samples.len(),
        samples_dt: dt.len(),
        samples_dr: dr.len(),
        cutoffs,
        extremes_raw: extremes(&samples),
        extremes_admitted: Extremes { dt_min: dt_min_obs, dt_max: dt_max_obs, dr_min: dr_min_obs, dr_max: dr_max_obs },
        population_mean_dt: population_mean(&mean_inter_event)?,
        pooled_mean_dt: pooled_mean(&samples, config.dt_window)?,
        mean_omitted_subscribers: mean_inter_event.omitted,
        empty_days_dt: dt_curves.empty_days.clone(),
        empty_days_dr: dr_curves.empty_days.clone(),
    };

    Ok(Analysis {
        summary,
        samples,
        dt_histogram,
        dr_histogram,
        dta_histogram,
        dt_curves,
        dr_curves,
        cohorts_dt,
        density: hourly_activity_density(store),
        gyration,
        mean_inter_event,
    })
}

/// Default fit supports: Δt over the analysis window, Δr from 20 m to the observed maximum.
pub fn default_supports(config: &AnalysisConfig, dr_max_obs: f64) -> (ClosedRange, ClosedRange) {
    (config.dt_window, ClosedRange { lo: DEFAULT_DR_FIT_LO, hi: dr_max_obs.max(DEFAULT_DR_FIT_LO) })
}

/// Exponential fit of the waiting times and power-law-cutoff fit of the displacements.
pub fn fit_defaults(samples: &[IntervalSample], config: &AnalysisConfig) -> Result<(FitResult, FitResult), FitError> {
    let dt = dt_values(samples, config);
    let dr = dr_values(samples, config);
    let dr_max = dr.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if dt.is_empty() || dr.is_empty() {
        return Err(FitError::NoData);
    }
    let (dt_support, dr_support) = default_supports(config, dr_max);
    let exp = fit_exponential(&dt, dt_support)?;
    let plc = fit_power_law_cutoff(&dr, dr_support, PowerLawOptions::default())?;
    Ok((exp, plc))
}
