use std::fs::File;
use std::io::BufWriter;
use std::path::PathBuf;

use clap::{Args, ValueEnum};
use serde::Serialize;

use mobilis_core::fit::{ExponentialModel, TruncatedPowerLawModel};
use mobilis_core::generate::{
    parse_towers, write_population_csv, Arena, Diurnal, GenerateError, GeneratorConfig, OutputOrder, TowerIndex,
    Towers, DEFAULT_CELL_M,
};
use mobilis_core::window::{ObservationWindow, DEFAULT_START};

use crate::args::{closed_range, parse_arena, parse_f64, parse_range};
use crate::manifest::{digest_file, Run};
use crate::{CliError, SEED_ENV};

use super::{ensure_dir, write_json};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Order {
    Chunked,
    Sorted,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct GenerateArgs {
    #[arg(long)]
    pub out: PathBuf,
    /// Number of subscribers.
    #[arg(long, default_value_t = 10_000)]
    pub n: u64,
    #[arg(long, default_value_t = 12)]
    pub days: u32,
    /// Window start, epoch seconds.
    #[arg(long, default_value_t = DEFAULT_START)]
    pub start: i64,
    /// Waiting-time rate, per minute.
    #[arg(long, value_parser = parse_f64, default_value = "0.01")]
    pub lambda: f64,
    #[arg(long, value_parser = parse_range, default_value = "15..1440")]
    pub wait_support: (f64, f64),
    #[arg(long, value_parser = parse_f64, default_value = "1.75")]
    pub beta: f64,
    /// Cutoff scale in meters (`inf` for none).
    #[arg(long, value_parser = parse_f64, default_value = "1e4")]
    pub kappa: f64,
    #[arg(long, value_parser = parse_f64, default_value = "0")]
    pub r0: f64,
    #[arg(long, value_parser = parse_range, default_value = "20..72295.15")]
    pub step_support: (f64, f64),
    /// Arena `WIDTHxHEIGHT` in meters.
    #[arg(long, value_parser = parse_arena, default_value = "8e4x8e4")]
    pub arena: (f64, f64),
    /// Overridden by the MOBILIS_SEED environment variable.
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    /// `none`, `auto` (1 km grid) or a `tower_id,x,y` CSV file.
    #[arg(long, default_value = "none")]
    pub towers: String,
    #[arg(long, value_enum, default_value_t = Order::Chunked)]
    pub order: Order,
    /// Keep night-time arrivals with this probability (enables the diurnal profile).
    #[arg(long, value_parser = parse_f64)]
    pub night_weight: Option<f64>,
    /// Daytime hours `from..to` for the diurnal profile.
    #[arg(long, value_parser = parse_range, default_value = "8..20")]
    pub day_hours: (f64, f64),
}

fn config_error(e: impl std::fmt::Display) -> CliError {
    CliError::Config(e.to_string())
}

pub fn run(mut args: GenerateArgs, threads: usize) -> Result<(), CliError> {
    let mut run = Run::start("generate", threads);
    if let Ok(seed) = std::env::var(SEED_ENV) {
        args.seed = seed.trim().parse().map_err(|_| CliError::Config(format!("{SEED_ENV}={seed:?} is not a u64")))?;
    }
    let window = ObservationWindow::daily(args.start, args.days).map_err(config_error)?;
    let waiting_model = ExponentialModel::new(args.lambda, closed_range(args.wait_support)?).map_err(config_error)?;
    let step_model =
        TruncatedPowerLawModel::new(args.beta, args.kappa, args.r0, closed_range(args.step_support)?).map_err(config_error)?;
    let arena = Arena::new(args.arena.0, args.arena.1).map_err(config_error)?;
    let towers = match args.towers.as_str() {
        "none" => Towers::None,
        "auto" => Towers::Grid { spacing: DEFAULT_CELL_M },
        path => {
            let text = std::fs::read_to_string(path).map_err(CliError::io(path))?;
            run.input(digest_file(path.as_ref(), path)?);
            Towers::List(TowerIndex::new(parse_towers(&text).map_err(config_error)?).map_err(config_error)?)
        }
    };
    let diurnal = match args.night_weight {
        None => None,
        Some(w) => {
            let (a, b) = args.day_hours;
            if a.fract() != 0.0 || b.fract() != 0.0 || a < 0.0 {
                return Err(CliError::Config("--day-hours must be whole hours".into()));
            }
            Some(Diurnal { day_from_hour: a as u32, day_to_hour: b as u32, night_weight: w })
        }
    };
    let config = GeneratorConfig {
        n_subscribers: args.n,
        window,
        waiting_model,
        step_model,
        arena,
        towers,
        seed: args.seed,
        order: match args.order {
            Order::Chunked => OutputOrder::Chunked,
            Order::Sorted => OutputOrder::Sorted,
        },
        diurnal,
    };

    ensure_dir(&args.out)?;
    let cdr = args.out.join("cdr.csv");
    let file = File::create(&cdr).map_err(CliError::io(&cdr))?;
    let mut writer = BufWriter::with_capacity(1 << 20, file);
    let truth = write_population_csv(&config, &mut writer).map_err(|e| match e {
        GenerateError::Io(source) => CliError::Io { path: cdr.clone(), source },
        other => config_error(other),
    })?;
    drop(writer);
    run.output(cdr);

    let truth_path = args.out.join("truth.json");
    write_json(&truth_path, &truth)?;
    run.output(truth_path);
    eprintln!(
        "generate: {} subscribers, {} events, {:.4} single-event fraction",
        args.n, truth.total_events, truth.single_event_fraction
    );
    run.finish(&args.out, &args)
}
