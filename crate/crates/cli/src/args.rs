//! Value parsers and shared flag groups.

use clap::{Args, ValueEnum};
use serde::Serialize;

use mobilis_core::coords::CoordSystem;
use mobilis_core::ingest::ErrorPolicy;
use mobilis_core::trajectory::ClosedRange;
use mobilis_core::window::{ObservationWindow, DEFAULT_DAYS, DEFAULT_START};

use crate::CliError;

/// `lo..hi` with finite or `inf` bounds.
pub fn parse_range(s: &str) -> Result<(f64, f64), String> {
    let (lo, hi) = s.split_once("..").ok_or_else(|| format!("expected lo..hi, got {s:?}"))?;
    let lo = parse_f64(lo)?;
    let hi = parse_f64(hi)?;
    if !(lo < hi) {
        return Err(format!("range {s:?} must satisfy lo < hi"));
    }
    Ok((lo, hi))
}

pub fn parse_f64(s: &str) -> Result<f64, String> {
    let s = s.trim();
    match s {
        "inf" | "+inf" | "infinity" => Ok(f64::INFINITY),
        _ => s.parse::<f64>().map_err(|_| format!("not a number: {s:?}")).and_then(|v| {
            if v.is_nan() {
                Err("NaN is not allowed".into())
            } else {
                Ok(v)
            }
        }),
    }
}

/// `start..end` in epoch seconds.
pub fn parse_epoch_range(s: &str) -> Result<(i64, i64), String> {
    let (a, b) = s.split_once("..").ok_or_else(|| format!("expected start..end, got {s:?}"))?;
    let a: i64 = a.trim().parse().map_err(|_| format!("bad start {a:?}"))?;
    let b: i64 = b.trim().parse().map_err(|_| format!("bad end {b:?}"))?;
    Ok((a, b))
}

/// `WIDTHxHEIGHT` in meters.
pub fn parse_arena(s: &str) -> Result<(f64, f64), String> {
    let (w, h) = s.split_once(['x', 'X']).ok_or_else(|| format!("expected WIDTHxHEIGHT, got {s:?}"))?;
    Ok((parse_f64(w)?, parse_f64(h)?))
}

pub fn closed_range((lo, hi): (f64, f64)) -> Result<ClosedRange, CliError> {
    ClosedRange::new(lo, hi).map_err(|e| CliError::Config(e.to_string()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum OnError {
    Abort,
    Skip,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Coords {
    Planar,
    Geo,
}

impl From<Coords> for CoordSystem {
    fn from(c: Coords) -> Self {
        match c {
            Coords::Planar => CoordSystem::Planar,
            Coords::Geo => CoordSystem::Geo,
        }
    }
}

/// Flags shared by every command that reads raw CDR files.
#[derive(Debug, Clone, Args, Serialize)]
pub struct WindowArgs {
    /// Observation window `start..end` in epoch seconds, cut into 24 h days from start.
    #[arg(long, value_parser = parse_epoch_range, conflicts_with_all = ["start", "days"])]
    pub window: Option<(i64, i64)>,
    /// Window start, epoch seconds (with --days).
    #[arg(long)]
    pub start: Option<i64>,
    /// Number of 24 h days in the window.
    #[arg(long)]
    pub days: Option<u32>,
    #[arg(long, value_enum, default_value_t = Coords::Planar)]
    pub coords: Coords,
    #[arg(long, value_enum, default_value_t = OnError::Abort)]
    pub on_error: OnError,
    /// With `--on-error skip`, abort once this many lines have failed.
    #[arg(long)]
    pub max_errors: Option<u64>,
}

impl WindowArgs {
    pub fn observation_window(&self) -> Result<ObservationWindow, CliError> {
        let w = match self.window {
            Some((a, b)) => ObservationWindow::from_range(a, b),
            None => ObservationWindow::daily(self.start.unwrap_or(DEFAULT_START), self.days.unwrap_or(DEFAULT_DAYS)),
        };
        w.map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn error_policy(&self) -> ErrorPolicy {
        match self.on_error {
            OnError::Abort => ErrorPolicy::Abort,
            OnError::Skip => ErrorPolicy::Skip { max_errors: self.max_errors },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ranges() {
        assert_eq!(parse_range("15..1440").unwrap(), (15.0, 1440.0));
        assert_eq!(parse_range("0..inf").unwrap(), (0.0, f64::INFINITY));
        assert!(parse_range("5..5").is_err());
        assert!(parse_range("5-6").is_err());
        assert_eq!(parse_epoch_range("10..20").unwrap(), (10, 20));
        assert_eq!(parse_arena("8e4x8e4").unwrap(), (8e4, 8e4));
    }
}
