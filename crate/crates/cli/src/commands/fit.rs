use std::fs::File;
use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use serde::Serialize;

use mobilis_core::analysis::DEFAULT_DR_FIT_LO;
use mobilis_core::fit::{
    fit_exponential, fit_exponential_histogram, fit_power_law_cutoff, fit_power_law_histogram, FitError, FitRecord,
    FitResult, Model, PowerLawOptions, R0,
};
use mobilis_core::stats::{make_histogram, Binning, DEFAULT_BINS_PER_DECADE};
use mobilis_core::trajectory::ClosedRange;

use crate::args::{closed_range, parse_f64, parse_range};
use crate::manifest::{HashingReader, Run};
use crate::tables::{read_samples, SampleRow};
use crate::CliError;

use super::{ensure_dir, write_json};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Target {
    Dt,
    Dr,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelArg {
    Exp,
    Plc,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    /// Maximum likelihood on raw samples.
    Mle,
    /// Least squares on the log-binned histogram.
    Hist,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct FitArgs {
    /// `samples.csv`, or a directory containing it.
    #[arg(long)]
    pub input: PathBuf,
    /// Output directory (default: the input directory).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Fit one target only (default: Δt with exp and Δr with plc).
    #[arg(long, value_enum)]
    pub target: Option<Target>,
    /// Model family (default: exp for dt, plc for dr).
    #[arg(long, value_enum)]
    pub model: Option<ModelArg>,
    /// Fit support `lo..hi` (default: the Δt window, or 20 m to the observed max Δr).
    #[arg(long, value_parser = parse_range)]
    pub support: Option<(f64, f64)>,
    /// Offset r₀ in meters, or `free` to fit it.
    #[arg(long, default_value = "0")]
    pub r0: String,
    /// Hold β at this value.
    #[arg(long, value_parser = parse_f64)]
    pub beta: Option<f64>,
    #[arg(long, value_enum, default_value_t = Method::Mle)]
    pub method: Method,
    #[arg(long, default_value_t = DEFAULT_BINS_PER_DECADE)]
    pub bins_per_decade: u32,
    /// Δt window that admits waiting-time samples, minutes.
    #[arg(long, value_parser = parse_range, default_value = "15..1440")]
    pub dt_window: (f64, f64),
    /// Δt window that admits displacement samples, minutes.
    #[arg(long, value_parser = parse_range, default_value = "20..1440")]
    pub dr_window_dt: (f64, f64),
}

fn resolve_samples(input: &Path) -> Result<PathBuf, CliError> {
    let path = if input.is_dir() { input.join("samples.csv") } else { input.to_path_buf() };
    if path.is_file() {
        Ok(path)
    } else {
        Err(CliError::Data(format!("{}: samples file not found", path.display())))
    }
}

fn fit_error(target: Target, e: FitError) -> CliError {
    let name = match target {
        Target::Dt => "dt",
        Target::Dr => "dr",
    };
    CliError::Data(format!("{name} fit failed: {e}"))
}

struct Job {
    target: Target,
    model: ModelArg,
    values: Vec<f64>,
    support: ClosedRange,
}

fn fit_one(args: &FitArgs, job: &Job) -> Result<FitResult, FitError> {
    let r0 = match args.r0.as_str() {
        "free" => R0::Free,
        s => R0::Fixed(parse_f64(s).map_err(FitError::BadParameter)?),
    };
    match (args.method, job.model) {
        (Method::Mle, ModelArg::Exp) => fit_exponential(&job.values, job.support),
        (Method::Mle, ModelArg::Plc) => {
            fit_power_law_cutoff(&job.values, job.support, PowerLawOptions { r0, beta: args.beta })
        }
        (Method::Hist, model) => {
            let lo = job.support.lo.max(1e-9);
            let edges = Binning::Log { per_decade: args.bins_per_decade }
                .edges(lo, job.support.hi)
                .map_err(|e| FitError::Regression(e.to_string()))?;
            let hist = make_histogram(&job.values, edges, job.support.hi.next_up())
                .map_err(|e| FitError::Regression(e.to_string()))?;
            let inside: Vec<f64> = job.values.iter().copied().filter(|&v| job.support.contains(v)).collect();
            let model = match model {
                ModelArg::Exp => Model::Exponential(fit_exponential_histogram(&hist, job.support)?.model),
                ModelArg::Plc => {
                    let r0 = match r0 {
                        R0::Fixed(v) => v,
                        R0::Free => return Err(FitError::BadParameter("--r0 free needs --method mle".into())),
                    };
                    Model::PowerLawCutoff(fit_power_law_histogram(&hist, job.support, r0)?.model)
                }
            };
            Ok(FitResult::finish(model, &inside, true, 0))
        }
    }
}

pub fn run(args: FitArgs, threads: usize) -> Result<(), CliError> {
    let mut run = Run::start("fit", threads);
    let dt_window = closed_range(args.dt_window)?;
    let dr_window = closed_range(args.dr_window_dt)?;
    if args.r0 != "free" {
        parse_f64(&args.r0).map_err(|e| CliError::Config(format!("--r0: {e}")))?;
    }
    let support = args.support.map(closed_range).transpose()?;
    if support.is_some() && args.target.is_none() {
        return Err(CliError::Config("--support needs --target".into()));
    }

    let path = resolve_samples(&args.input)?;
    let out = match &args.out {
        Some(o) => o.clone(),
        None => path.parent().map_or_else(|| PathBuf::from("."), Path::to_path_buf),
    };
    ensure_dir(&out)?;
    let file = File::open(&path).map_err(CliError::io(&path))?;
    let mut reader = HashingReader::new(file);
    let label = path.display().to_string();
    let rows: Vec<SampleRow> = read_samples(&mut reader, &label)?;
    run.input(reader.finish(label).map_err(CliError::io(&path))?);
    if rows.is_empty() {
        return Err(CliError::Data(format!("{}: NoData, the samples file has no rows", path.display())));
    }

    let dt: Vec<f64> = rows.iter().filter(|r| dt_window.contains(r.dt)).map(|r| r.dt).collect();
    let dr: Vec<f64> = rows.iter().filter(|r| dr_window.contains(r.dt)).map(|r| r.dr).collect();
    let dr_max = dr.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let default_support = |t: Target| match t {
        Target::Dt => Ok(dt_window),
        Target::Dr => closed_range((DEFAULT_DR_FIT_LO, dr_max.max(DEFAULT_DR_FIT_LO.next_up()))),
    };
    let targets: Vec<(Target, ModelArg)> = match args.target {
        None => vec![(Target::Dt, args.model.unwrap_or(ModelArg::Exp)), (Target::Dr, args.model.unwrap_or(ModelArg::Plc))],
        Some(Target::Dt) => vec![(Target::Dt, args.model.unwrap_or(ModelArg::Exp))],
        Some(Target::Dr) => vec![(Target::Dr, args.model.unwrap_or(ModelArg::Plc))],
    };

    let mut records = Vec::new();
    for (target, model) in targets {
        let values = match target {
            Target::Dt => dt.clone(),
            Target::Dr => dr.clone(),
        };
        if values.is_empty() {
            return Err(fit_error(target, FitError::NoData));
        }
        let support = match support {
            Some(s) => s,
            None => default_support(target)?,
        };
        let job = Job { target, model, values, support };
        let fit = fit_one(&args, &job).map_err(|e| fit_error(job.target, e))?;
        if !fit.converged {
            log::warn!("{:?} fit did not converge after {} iterations", target, fit.iterations);
        }
        let mut record: FitRecord = fit.to_record();
        record.target = Some(match target {
            Target::Dt => "dt".into(),
            Target::Dr => "dr".into(),
        });
        eprintln!("fit {}: {:?} n={} converged={}", record.target.as_deref().unwrap_or(""), record.params, record.n, record.converged);
        records.push(record);
    }

    let fits = out.join("fits.json");
    write_json(&fits, &records)?;
    run.output(fits);
    run.finish(&out, &args)
}
