//! CSV tables written by `analyze` and read back by `fit` and `report`.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use mobilis_core::analysis::{CohortCurve, Gyration};
use mobilis_core::ingest::TrajectoryStore;
use mobilis_core::stats::{CurveFamily, Histogram, MeanInterEvent};
use mobilis_core::trajectory::IntervalSample;

use crate::CliError;

pub const HISTOGRAM_HEADER: &str = "bin_left,bin_right,count,probability,pdf";
pub const CURVES_HEADER: &str = "day_index,bin_left,bin_right,count,probability,pdf";
pub const COHORTS_HEADER: &str = "cohort,min_count,max_count,subscribers,bin_left,bin_right,count,probability,pdf";
pub const SAMPLES_HEADER: &str = "subscriber_id,day_index,dt_min,dr_m";
/// Day index used for the day-average rows of a curve family.
pub const DAY_AVERAGE: i64 = -1;

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    Ok(BufWriter::with_capacity(1 << 20, File::create(path).map_err(CliError::io(path))?))
}

fn write_with(path: &Path, body: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>) -> Result<(), CliError> {
    let mut w = create(path)?;
    body(&mut w).and_then(|()| w.flush()).map_err(CliError::io(path))
}

fn histogram_rows(w: &mut impl Write, prefix: &str, h: &Histogram) -> std::io::Result<()> {
    for (i, e) in h.bin_edges.windows(2).enumerate() {
        writeln!(w, "{prefix}{},{},{},{},{}", e[0], e[1], h.counts[i], h.probabilities[i], h.pdf[i])?;
    }
    Ok(())
}

pub fn write_histogram(path: &Path, h: &Histogram) -> Result<(), CliError> {
    write_with(path, |w| {
        writeln!(w, "{HISTOGRAM_HEADER}")?;
        histogram_rows(w, "", h)
    })
}

/// Per-day rows followed by the day-average rows (`day_index = -1`).
pub fn write_curves(path: &Path, c: &CurveFamily) -> Result<(), CliError> {
    write_with(path, |w| {
        writeln!(w, "{CURVES_HEADER}")?;
        for (d, h) in c.per_day.iter().enumerate() {
            histogram_rows(w, &format!("{d},"), h)?;
        }
        let avg_pdf = c.day_average_pdf();
        for (i, e) in c.bin_edges.windows(2).enumerate() {
            let count: u64 = c.per_day.iter().map(|h| h.counts[i]).sum();
            writeln!(w, "{DAY_AVERAGE},{},{},{},{},{}", e[0], e[1], count, c.day_average[i], avg_pdf[i])?;
        }
        Ok(())
    })
}

pub fn write_cohorts(path: &Path, cohorts: &[CohortCurve]) -> Result<(), CliError> {
    write_with(path, |w| {
        writeln!(w, "{COHORTS_HEADER}")?;
        for c in cohorts {
            let max = c.cohort.max_activity_count.map_or_else(String::new, |m| m.to_string());
            let prefix = format!("{},{},{},{},", c.cohort.label, c.cohort.min_activity_count, max, c.subscribers);
            histogram_rows(w, &prefix, &c.histogram)?;
        }
        Ok(())
    })
}

pub fn write_density(path: &Path, density: &[u64]) -> Result<(), CliError> {
    write_with(path, |w| {
        writeln!(w, "hour_index,count")?;
        for (h, c) in density.iter().enumerate() {
            writeln!(w, "{h},{c}")?;
        }
        Ok(())
    })
}

pub fn write_samples(path: &Path, store: &TrajectoryStore, samples: &[IntervalSample]) -> Result<(), CliError> {
    write_with(path, |w| {
        writeln!(w, "{SAMPLES_HEADER}")?;
        for s in samples {
            writeln!(w, "{},{},{},{}", store.subscriber(s.subscriber), s.day_index, s.dt, s.dr)?;
        }
        Ok(())
    })
}

pub fn write_gyration(path: &Path, store: &TrajectoryStore, rows: &[Gyration]) -> Result<(), CliError> {
    write_with(path, |w| {
        writeln!(w, "subscriber_id,day_index,radius_m")?;
        for g in rows {
            let day = g.day.map_or(DAY_AVERAGE, i64::from);
            writeln!(w, "{},{},{}", store.subscriber(g.subscriber), day, g.radius_m)?;
        }
        Ok(())
    })
}

pub fn write_means(path: &Path, store: &TrajectoryStore, means: &MeanInterEvent) -> Result<(), CliError> {
    write_with(path, |w| {
        writeln!(w, "subscriber_id,mean_dt_min")?;
        for &(sub, m) in &means.means {
            writeln!(w, "{},{}", store.subscriber(sub), m)?;
        }
        Ok(())
    })
}

/// One `samples.csv` row, without the subscriber id.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampleRow {
    pub day_index: u32,
    pub dt: f64,
    pub dr: f64,
}

pub fn read_samples(reader: impl Read, label: &str) -> Result<Vec<SampleRow>, CliError> {
    let mut rows = Vec::new();
    let mut lines = BufReader::with_capacity(1 << 20, reader).lines();
    match lines.next() {
        Some(Ok(h)) if h.trim_end() == SAMPLES_HEADER => {}
        Some(Err(e)) => return Err(CliError::Io { path: label.into(), source: e }),
        _ => return Err(CliError::Data(format!("{label}: missing header {SAMPLES_HEADER:?}"))),
    }
    for (n, line) in lines.enumerate() {
        let line = line.map_err(|e| CliError::Io { path: label.into(), source: e })?;
        if line.trim().is_empty() {
            continue;
        }
        let bad = || CliError::Data(format!("{label}:{}: malformed sample row", n + 2));
        let mut f = line.rsplitn(4, ',');
        let dr: f64 = f.next().ok_or_else(bad)?.parse().map_err(|_| bad())?;
        let dt: f64 = f.next().ok_or_else(bad)?.parse().map_err(|_| bad())?;
        let day_index: u32 = f.next().ok_or_else(bad)?.parse().map_err(|_| bad())?;
        if f.next().is_none() || !dt.is_finite() || !dr.is_finite() {
            return Err(bad());
        }
        rows.push(SampleRow { day_index, dt, dr });
    }
    Ok(rows)
}

/// A numeric CSV table with a header.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn read(path: &Path) -> Result<Self, CliError> {
        let file = File::open(path).map_err(CliError::io(path))?;
        let mut lines = BufReader::new(file).lines();
        let header = match lines.next() {
            Some(h) => h.map_err(CliError::io(path))?.split(',').map(str::to_string).collect(),
            None => return Err(CliError::Data(format!("{}: empty table", path.display()))),
        };
        let mut rows = Vec::new();
        for line in lines {
            let line = line.map_err(CliError::io(path))?;
            if !line.is_empty() {
                rows.push(line.split(',').map(str::to_string).collect());
            }
        }
        Ok(Self { header, rows })
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }

    /// Column parsed as `f64`.
    pub fn floats(&self, name: &str) -> Result<Vec<f64>, CliError> {
        let i = self.column(name).ok_or_else(|| CliError::Data(format!("table has no column {name:?}")))?;
        self.rows
            .iter()
            .map(|r| {
                r.get(i)
                    .and_then(|v| v.parse::<f64>().ok())
                    .ok_or_else(|| CliError::Data(format!("non-numeric value in column {name:?}")))
            })
            .collect()
    }
}
