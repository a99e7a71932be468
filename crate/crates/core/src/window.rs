//! Observation window and its partition into analysis days.

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const SECONDS_PER_DAY: i64 = 86_400;
pub const SECONDS_PER_HOUR: i64 = 3_600;

/// 2008-07-04 00:00:00 UTC, a Friday.
pub const DEFAULT_START: i64 = 1_215_129_600;
/// Friday 4th through Tuesday 15th of July inclusive.
pub const DEFAULT_DAYS: u32 = 12;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum WindowError {
    #[error("window start {start} must precede end {end}")]
    Empty { start: i64, end: i64 },
    #[error("day boundaries must start at the window start and be strictly increasing inside the window")]
    BadBoundaries,
    #[error("a window needs at least one day")]
    NoDays,
}

/// Closed time interval `[t_start, t_end]` in epoch seconds, partitioned into
/// days by `day_boundaries`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObservationWindow {
    t_start: i64,
    t_end: i64,
    day_boundaries: Vec<i64>,
}

impl ObservationWindow {
    pub fn new(t_start: i64, t_end: i64, day_boundaries: Vec<i64>) -> Result<Self, WindowError> {
        if t_start >= t_end {
            return Err(WindowError::Empty { start: t_start, end: t_end });
        }
        if day_boundaries.first() != Some(&t_start)
            || day_boundaries.windows(2).any(|w| w[0] >= w[1])
            || day_boundaries.last().is_some_and(|&b| b >= t_end)
        {
            return Err(WindowError::BadBoundaries);
        }
        Ok(Self { t_start, t_end, day_boundaries })
    }

    /// `days` consecutive 24 h days starting at `t_start`.
    pub fn daily(t_start: i64, days: u32) -> Result<Self, WindowError> {
        if days == 0 {
            return Err(WindowError::NoDays);
        }
        let t_end = t_start + i64::from(days) * SECONDS_PER_DAY;
        let bounds = (0..i64::from(days)).map(|d| t_start + d * SECONDS_PER_DAY).collect();
        Self::new(t_start, t_end, bounds)
    }

    /// Arbitrary `[t_start, t_end]`, cut into 24 h days from `t_start`; the
    /// last day may be partial.
    pub fn from_range(t_start: i64, t_end: i64) -> Result<Self, WindowError> {
        if t_start >= t_end {
            return Err(WindowError::Empty { start: t_start, end: t_end });
        }
        let bounds = (0..)
            .map(|d| t_start + d * SECONDS_PER_DAY)
            .take_while(|&b| b < t_end)
            .collect();
        Self::new(t_start, t_end, bounds)
    }

    pub fn t_start(&self) -> i64 {
        self.t_start
    }

    pub fn t_end(&self) -> i64 {
        self.t_end
    }

    pub fn day_boundaries(&self) -> &[i64] {
        &self.day_boundaries
    }

    pub fn day_count(&self) -> usize {
        self.day_boundaries.len()
    }

    pub fn contains(&self, t: i64) -> bool {
        (self.t_start..=self.t_end).contains(&t)
    }

    /// 0-based day owning `t`. `t_end` belongs to the last day.
    /// Returns `None` outside the window.
    pub fn day_of(&self, t: i64) -> Option<u32> {
        if !self.contains(t) {
            return None;
        }
        let idx = self.day_boundaries.partition_point(|&b| b <= t) - 1;
        Some(idx as u32)
    }

    /// Number of whole or partial hours covered by the window.
    pub fn hour_count(&self) -> usize {
        let span = self.t_end - self.t_start;
        ((span + SECONDS_PER_HOUR - 1) / SECONDS_PER_HOUR) as usize
    }

    /// Hour slot of `t` counted from `t_start`; `t_end` folds into the last slot.
    pub fn hour_of(&self, t: i64) -> Option<usize> {
        if !self.contains(t) {
            return None;
        }
        let idx = ((t - self.t_start) / SECONDS_PER_HOUR) as usize;
        Some(idx.min(self.hour_count() - 1))
    }
}

impl Default for ObservationWindow {
    fn default() -> Self {
        Self::daily(DEFAULT_START, DEFAULT_DAYS).expect("default window is valid")
    }
}
