use std::path::PathBuf;

use clap::{Args, ValueEnum};
use serde::Serialize;

use mobilis_core::analysis::{analyze, AnalysisConfig};
use mobilis_core::stats::{Binning, DEFAULT_BINS_PER_DECADE};
use mobilis_core::trajectory::{ActivityCohort, CohortSpec, TrajectoryMode};

use crate::args::{closed_range, parse_f64, parse_range, WindowArgs};
use crate::manifest::Run;
use crate::tables;
use crate::CliError;

use super::{ensure_dir, load_store, write_json};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum BinningKind {
    Log,
    Linear,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct AnalyzeArgs {
    /// CDR CSV file, or a directory holding `records.csv` from `ingest`.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub window: WindowArgs,
    /// Δt window for waiting-time statistics, minutes.
    #[arg(long, value_parser = parse_range, default_value = "15..1440")]
    pub dt_window: (f64, f64),
    /// Δt window for pairs entering displacement statistics, minutes.
    #[arg(long, value_parser = parse_range, default_value = "20..1440")]
    pub dr_window_dt: (f64, f64),
    /// Largest admitted Δr, meters (default: observed maximum).
    #[arg(long, value_parser = parse_f64)]
    pub dr_max: Option<f64>,
    /// One trajectory per subscriber and day instead of one over the whole window.
    #[arg(long)]
    pub per_day: bool,
    #[arg(long, value_enum, default_value_t = BinningKind::Log)]
    pub binning: BinningKind,
    #[arg(long, default_value_t = DEFAULT_BINS_PER_DECADE)]
    pub bins_per_decade: u32,
    /// Bin count with `--binning linear`.
    #[arg(long, default_value_t = 100)]
    pub linear_bins: u32,
    /// Activity cohorts, e.g. `2-9,10-99,100-999,1000+`.
    #[arg(long, default_value = "2-9,10-99,100-999,1000+")]
    pub cohorts: String,
}

pub fn parse_cohorts(s: &str) -> Result<CohortSpec, CliError> {
    let bad = |part: &str| CliError::Config(format!("bad cohort {part:?}; expected MIN-MAX or MIN+"));
    let cohorts = s
        .split(',')
        .map(str::trim)
        .map(|part| {
            if let Some(min) = part.strip_suffix('+') {
                Ok(ActivityCohort::new(min.parse().map_err(|_| bad(part))?, None))
            } else {
                let (a, b) = part.split_once('-').ok_or_else(|| bad(part))?;
                Ok(ActivityCohort::new(a.parse().map_err(|_| bad(part))?, Some(b.parse().map_err(|_| bad(part))?)))
            }
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    CohortSpec::new(cohorts).map_err(|e| CliError::Config(e.to_string()))
}

impl AnalyzeArgs {
    pub fn analysis_config(&self) -> Result<AnalysisConfig, CliError> {
        if let Some(m) = self.dr_max {
            if !(m >= 0.0) {
                return Err(CliError::Config(format!("--dr-max must be non-negative, got {m}")));
            }
        }
        Ok(AnalysisConfig {
            dt_window: closed_range(self.dt_window)?,
            dr_pair_window: closed_range(self.dr_window_dt)?,
            dr_max: self.dr_max,
            mode: if self.per_day { TrajectoryMode::PerDay } else { TrajectoryMode::WholeWindow },
            binning: match self.binning {
                BinningKind::Log => Binning::Log { per_decade: self.bins_per_decade },
                BinningKind::Linear => Binning::Linear { bins: self.linear_bins },
            },
            cohorts: parse_cohorts(&self.cohorts)?,
        })
    }
}

pub fn run(args: AnalyzeArgs, threads: usize) -> Result<(), CliError> {
    let mut run = Run::start("analyze", threads);
    let config = args.analysis_config()?;
    ensure_dir(&args.out)?;
    let (store, _, digest) = load_store(&args.input, &args.window)?;
    run.input(digest);
    let a = analyze(&store, &config).map_err(|e| CliError::Data(format!("analysis failed: {e}")))?;
    let out = &args.out;

    let mut emit = |name: &str, write: &dyn Fn(&std::path::Path) -> Result<(), CliError>| {
        let path = out.join(name);
        write(&path)?;
        run.output(path);
        Ok::<_, CliError>(())
    };
    emit("samples.csv", &|p| tables::write_samples(p, &store, &a.samples))?;
    emit("histogram_dt.csv", &|p| tables::write_histogram(p, &a.dt_histogram))?;
    emit("histogram_dr.csv", &|p| tables::write_histogram(p, &a.dr_histogram))?;
    emit("histogram_dta.csv", &|p| tables::write_histogram(p, &a.dta_histogram))?;
    emit("curves_dt.csv", &|p| tables::write_curves(p, &a.dt_curves))?;
    emit("curves_dr.csv", &|p| tables::write_curves(p, &a.dr_curves))?;
    emit("cohorts_dt.csv", &|p| tables::write_cohorts(p, &a.cohorts_dt))?;
    emit("density.csv", &|p| tables::write_density(p, &a.density))?;
    emit("gyration.csv", &|p| tables::write_gyration(p, &store, &a.gyration))?;
    emit("mean_inter_event.csv", &|p| tables::write_means(p, &store, &a.mean_inter_event))?;
    emit("analysis.json", &|p| write_json(p, &a.summary))?;

    let s = &a.summary;
    eprintln!(
        "analyze: {} trajectories ({} single-event dropped), {} dt samples, {} dr samples, max dt {} min, max dr {} m",
        s.trajectories, s.dropped_single, s.samples_dt, s.samples_dr, s.cutoffs.dt_max_obs, s.cutoffs.dr_max_obs
    );
    if !s.empty_days_dt.is_empty() {
        log::warn!("days without waiting-time samples: {:?}", s.empty_days_dt);
    }
    run.finish(out, &args)
}
