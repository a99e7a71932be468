//! Per-subscriber trajectories and their (Δt, Δr) interval samples.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::coords::{self, CoordSystem};
use crate::ingest::{Event, TrajectoryStore};
use crate::window::ObservationWindow;

/// Waiting-time window for Δt analysis, minutes.
pub const DEFAULT_DT_WINDOW: ClosedRange = ClosedRange { lo: 15.0, hi: 1440.0 };
/// Waiting-time window that pairs with Δr in displacement analysis, minutes.
pub const DEFAULT_DR_PAIR_WINDOW: ClosedRange = ClosedRange { lo: 20.0, hi: 1440.0 };

#[derive(Debug, Error, PartialEq)]
pub enum RangeError {
    #[error("range {lo}..{hi} must satisfy lo < hi with a finite lower bound")]
    Invalid { lo: f64, hi: f64 },
}

/// Closed interval `[lo, hi]`; `hi` may be `+inf`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClosedRange {
    pub lo: f64,
    pub hi: f64,
}

impl ClosedRange {
    pub fn new(lo: f64, hi: f64) -> Result<Self, RangeError> {
        if lo.is_finite() && !hi.is_nan() && lo < hi {
            Ok(Self { lo, hi })
        } else {
            Err(RangeError::Invalid { lo, hi })
        }
    }

    pub fn contains(&self, v: f64) -> bool {
        self.lo <= v && v <= self.hi
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrajectoryMode {
    /// One trajectory per subscriber over the whole window; intervals that
    /// straddle a day boundary belong to the earlier event's day.
    #[default]
    WholeWindow,
    /// One trajectory per (subscriber, day); straddling intervals are dropped.
    PerDay,
}

/// A time-ordered event sequence of one subscriber.
#[derive(Debug, Clone, Copy)]
pub struct Trajectory<'s> {
    pub subscriber: u32,
    /// Set in [`TrajectoryMode::PerDay`].
    pub day: Option<u32>,
    pub events: &'s [Event],
}

impl Trajectory<'_> {
    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn positions(&self) -> Vec<(f64, f64)> {
        self.events.iter().map(|e| (e.x, e.y)).collect()
    }
}

#[derive(Debug, Clone)]
pub struct TrajectorySet<'s> {
    pub trajectories: Vec<Trajectory<'s>>,
    /// Single-event subscribers (or subscriber-days) removed.
    pub dropped_single: usize,
}

/// Groups stored events into trajectories, removing single-occurrence ones.
pub fn build_trajectories(store: &TrajectoryStore, mode: TrajectoryMode) -> TrajectorySet<'_> {
    let mut trajectories = Vec::with_capacity(store.subscriber_count());
    let mut dropped_single = 0;
    let window = store.window();
    for (sub, events) in store.iter() {
        match mode {
            TrajectoryMode::WholeWindow => {
                if events.len() >= 2 {
                    trajectories.push(Trajectory { subscriber: sub, day: None, events });
                } else {
                    dropped_single += 1;
                }
            }
            TrajectoryMode::PerDay => {
                for chunk in events.chunk_by(|a, b| window.day_of(a.t) == window.day_of(b.t)) {
                    if chunk.len() >= 2 {
                        let day = window.day_of(chunk[0].t);
                        trajectories.push(Trajectory { subscriber: sub, day, events: chunk });
                    } else {
                        dropped_single += 1;
                    }
                }
            }
        }
    }
    TrajectorySet { trajectories, dropped_single }
}

/// One consecutive pair of events.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntervalSample {
    pub subscriber: u32,
    /// Day of the earlier event.
    pub day_index: u32,
    /// Minutes.
    pub dt: f64,
    /// Meters.
    pub dr: f64,
}

pub fn interval_samples(traj: &Trajectory<'_>, window: &ObservationWindow, coords: CoordSystem) -> Vec<IntervalSample> {
    traj.events
        .windows(2)
        .map(|pair| {
            let (a, b) = (&pair[0], &pair[1]);
            IntervalSample {
                subscriber: traj.subscriber,
                day_index: window.day_of(a.t).expect("stored events lie inside the window"),
                dt: (b.t - a.t) as f64 / 60.0,
                dr: coords.distance((a.x, a.y), (b.x, b.y)),
            }
        })
        .collect()
}

/// Samples of every trajectory, in trajectory order.
pub fn collect_samples(set: &TrajectorySet<'_>, store: &TrajectoryStore) -> Vec<IntervalSample> {
    let window = store.window();
    let coords = store.coords();
    let per_traj: Vec<Vec<IntervalSample>> = set
        .trajectories
        .par_iter()
        .with_min_len(256)
        .map(|t| interval_samples(t, window, coords))
        .collect();
    let total = per_traj.iter().map(Vec::len).sum();
    let mut out = Vec::with_capacity(total);
    for v in per_traj {
        out.extend(v);
    }
    out
}

/// Keeps samples with `dt` in the closed `dt_window` and, when given, `dr <= dr_max`.
pub fn filter_samples(samples: &[IntervalSample], dt_window: ClosedRange, dr_max: Option<f64>) -> Vec<IntervalSample> {
    samples
        .iter()
        .filter(|s| admits(s, dt_window, dr_max))
        .copied()
        .collect()
}

#[inline]
pub fn admits(s: &IntervalSample, dt_window: ClosedRange, dr_max: Option<f64>) -> bool {
    dt_window.contains(s.dt) && dr_max.is_none_or(|m| s.dr <= m)
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CohortError {
    #[error("cohort specification is empty")]
    Empty,
    #[error("cohorts must start at an activity count of 2, found {0}")]
    BadStart(u64),
    #[error("cohort {label:?} has min {min} > max {max}")]
    Inverted { label: String, min: u64, max: u64 },
    #[error("gap or overlap between cohorts {prev:?} and {next:?}")]
    NotContiguous { prev: String, next: String },
    #[error("the last cohort must be open-ended")]
    Bounded,
    #[error("only the last cohort may be open-ended")]
    OpenInMiddle,
}

/// Activity-count bucket; `max = None` means unbounded.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActivityCohort {
    pub label: String,
    pub min_activity_count: u64,
    pub max_activity_count: Option<u64>,
}

impl ActivityCohort {
    pub fn new(min: u64, max: Option<u64>) -> Self {
        let label = match max {
            Some(m) => format!("{min}-{m}"),
            None => format!("{min}+"),
        };
        Self { label, min_activity_count: min, max_activity_count: max }
    }

    pub fn contains(&self, count: u64) -> bool {
        count >= self.min_activity_count && self.max_activity_count.is_none_or(|m| count <= m)
    }
}

/// A partition of activity counts `>= 2` into contiguous cohorts.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CohortSpec {
    cohorts: Vec<ActivityCohort>,
}

impl CohortSpec {
    pub fn new(cohorts: Vec<ActivityCohort>) -> Result<Self, CohortError> {
        let first = cohorts.first().ok_or(CohortError::Empty)?;
        if first.min_activity_count != 2 {
            return Err(CohortError::BadStart(first.min_activity_count));
        }
        for (i, c) in cohorts.iter().enumerate() {
            match c.max_activity_count {
                Some(m) if m < c.min_activity_count => {
                    return Err(CohortError::Inverted { label: c.label.clone(), min: c.min_activity_count, max: m })
                }
                None if i + 1 != cohorts.len() => return Err(CohortError::OpenInMiddle),
                _ => {}
            }
        }
        for w in cohorts.windows(2) {
            if w[0].max_activity_count.map(|m| m + 1) != Some(w[1].min_activity_count) {
                return Err(CohortError::NotContiguous { prev: w[0].label.clone(), next: w[1].label.clone() });
            }
        }
        if cohorts.last().is_some_and(|c| c.max_activity_count.is_some()) {
            return Err(CohortError::Bounded);
        }
        Ok(Self { cohorts })
    }

    /// Decade cohorts: 2–9, 10–99, 100–999, 1000+.
    pub fn logarithmic() -> Self {
        Self::new(vec![
            ActivityCohort::new(2, Some(9)),
            ActivityCohort::new(10, Some(99)),
            ActivityCohort::new(100, Some(999)),
            ActivityCohort::new(1000, None),
        ])
        .expect("static spec is valid")
    }

    pub fn cohorts(&self) -> &[ActivityCohort] {
        &self.cohorts
    }

    /// Index of the cohort holding `count`; `None` for counts below 2.
    pub fn index_of(&self, count: u64) -> Option<usize> {
        self.cohorts.iter().position(|c| c.contains(count))
    }
}

impl Default for CohortSpec {
    fn default() -> Self {
        Self::logarithmic()
    }
}

/// Subscriber indices per cohort, keyed by each subscriber's total event count.
pub fn assign_cohorts(counts: impl IntoIterator<Item = (u32, u64)>, spec: &CohortSpec) -> Vec<Vec<u32>> {
    let mut members = vec![Vec::new(); spec.cohorts().len()];
    for (sub, count) in counts {
        if let Some(i) = spec.index_of(count) {
            members[i].push(sub);
        }
    }
    members
}

pub fn radius_of_gyration(traj: &Trajectory<'_>, coords: CoordSystem) -> f64 {
    coords::radius_of_gyration(coords, &traj.positions())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{IngestConfig, StoreBuilder, CdrRecord};

    fn store_of(events: &[(u64, i64, f64, f64)]) -> TrajectoryStore {
        let window = ObservationWindow::daily(0, 3).unwrap();
        let mut b = StoreBuilder::new(&IngestConfig::new(window));
        for &(s, t, x, y) in events {
            b.push_record(&CdrRecord { subscriber: s.into(), timestamp: t, tower_id: "T".into(), x, y }).unwrap();
        }
        b.finish().0
    }

    #[test]
    fn single_occurrence_subscribers_are_dropped() {
        let store = store_of(&[(1, 10, 0.0, 0.0), (2, 10, 0.0, 0.0), (2, 20, 0.0, 0.0), (3, 1, 0.0, 0.0),
            (3, 2, 0.0, 0.0), (3, 3, 0.0, 0.0), (3, 4, 0.0, 0.0), (3, 5, 0.0, 0.0)]);
        let set = build_trajectories(&store, TrajectoryMode::WholeWindow);
        assert_eq!(set.trajectories.len(), 2);
        assert_eq!(set.dropped_single, 1);
    }

    #[test]
    fn events_come_out_sorted() {
        let store = store_of(&[(1, 100, 0.0, 0.0), (1, 50, 0.0, 0.0)]);
        let set = build_trajectories(&store, TrajectoryMode::WholeWindow);
        let ts: Vec<i64> = set.trajectories[0].events.iter().map(|e| e.t).collect();
        assert_eq!(ts, vec![50, 100]);
    }

    #[test]
    fn samples_from_pairs() {
        let store = store_of(&[(1, 0, 0.0, 0.0), (1, 900, 0.0, 0.0)]);
        let set = build_trajectories(&store, TrajectoryMode::WholeWindow);
        let s = interval_samples(&set.trajectories[0], store.window(), CoordSystem::Planar);
        assert_eq!(s, vec![IntervalSample { subscriber: 0, day_index: 0, dt: 15.0, dr: 0.0 }]);

        let store = store_of(&[(1, 0, 0.0, 0.0), (1, 3600, 3000.0, 4000.0)]);
        let set = build_trajectories(&store, TrajectoryMode::WholeWindow);
        let s = interval_samples(&set.trajectories[0], store.window(), CoordSystem::Planar);
        assert_eq!((s[0].dt, s[0].dr), (60.0, 5000.0));

        let store = store_of(&[(1, 0, 0.0, 0.0), (1, 600, 0.0, 0.0), (1, 1800, 0.0, 0.0)]);
        let set = build_trajectories(&store, TrajectoryMode::WholeWindow);
        let s = interval_samples(&set.trajectories[0], store.window(), CoordSystem::Planar);
        assert_eq!(s.iter().map(|s| s.dt).collect::<Vec<_>>(), vec![10.0, 20.0]);
    }

    #[test]
    fn straddling_interval_belongs_to_earlier_day() {
        let store = store_of(&[(1, 86_000, 0.0, 0.0), (1, 87_000, 0.0, 0.0)]);
        let set = build_trajectories(&store, TrajectoryMode::WholeWindow);
        let s = interval_samples(&set.trajectories[0], store.window(), CoordSystem::Planar);
        assert_eq!(s[0].day_index, 0);

        let per_day = build_trajectories(&store, TrajectoryMode::PerDay);
        assert!(per_day.trajectories.is_empty());
        assert_eq!(per_day.dropped_single, 2);
    }

    #[test]
    fn per_day_splits() {
        let store = store_of(&[(1, 0, 0.0, 0.0), (1, 1000, 0.0, 0.0), (1, 90_000, 0.0, 0.0), (1, 91_000, 0.0, 0.0)]);
        let set = build_trajectories(&store, TrajectoryMode::PerDay);
        assert_eq!(set.trajectories.len(), 2);
        assert_eq!(set.trajectories[1].day, Some(1));
    }

    #[test]
    fn filter_boundaries() {
        let mk = |dt, dr| IntervalSample { subscriber: 0, day_index: 0, dt, dr };
        let w = DEFAULT_DT_WINDOW;
        assert!(filter_samples(&[mk(14.9, 0.0)], w, None).is_empty());
        assert_eq!(filter_samples(&[mk(1440.0, 0.0)], w, None).len(), 1);
        assert_eq!(filter_samples(&[mk(15.0, 0.0)], w, None).len(), 1);
        let mixed = [mk(1.0, 0.0), mk(20.0, 5.0), mk(2000.0, 0.0), mk(100.0, 9.0), mk(1440.5, 0.0)];
        let kept = filter_samples(&mixed, w, None);
        assert_eq!(kept, vec![mixed[1], mixed[3]]);
        assert_eq!(filter_samples(&mixed, w, Some(6.0)), vec![mixed[1]]);
    }

    #[test]
    fn range_validation() {
        assert!(ClosedRange::new(15.0, 1440.0).is_ok());
        assert!(ClosedRange::new(10.0, 10.0).is_err());
        assert!(ClosedRange::new(f64::NAN, 10.0).is_err());
        assert!(ClosedRange::new(0.0, f64::INFINITY).is_ok());
    }

    #[test]
    fn cohort_mapping() {
        let spec = CohortSpec::new(vec![ActivityCohort::new(2, Some(10)), ActivityCohort::new(11, None)]).unwrap();
        let m = assign_cohorts([(0, 3), (1, 300)], &spec);
        assert_eq!(m, vec![vec![0], vec![1]]);
        let m = assign_cohorts([(0, 2), (1, 2), (2, 2)], &CohortSpec::default());
        assert_eq!(m[0], vec![0, 1, 2]);
        assert!(m[1..].iter().all(Vec::is_empty));
    }

    #[test]
    fn cohort_spec_validation() {
        use ActivityCohort as C;
        assert_eq!(CohortSpec::new(vec![]), Err(CohortError::Empty));
        assert_eq!(CohortSpec::new(vec![C::new(3, None)]), Err(CohortError::BadStart(3)));
        assert!(matches!(
            CohortSpec::new(vec![C::new(2, Some(10)), C::new(12, None)]),
            Err(CohortError::NotContiguous { .. })
        ));
        assert!(matches!(
            CohortSpec::new(vec![C::new(2, Some(10)), C::new(10, None)]),
            Err(CohortError::NotContiguous { .. })
        ));
        assert_eq!(CohortSpec::new(vec![C::new(2, Some(10))]), Err(CohortError::Bounded));
        assert_eq!(CohortSpec::new(vec![C::new(2, None), C::new(3, None)]), Err(CohortError::OpenInMiddle));
    }

    #[test]
    fn gyration_cases() {
        let store = store_of(&[(1, 0, 0.0, 0.0), (1, 10, 2.0, 0.0)]);
        let set = build_trajectories(&store, TrajectoryMode::WholeWindow);
        assert_eq!(radius_of_gyration(&set.trajectories[0], CoordSystem::Planar), 1.0);
    }
}
