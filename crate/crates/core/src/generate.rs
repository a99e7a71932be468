//! Synthetic CDR populations from a continuous-time random walk.
//!
//! Each subscriber starts at a uniform position in the arena, waits a time
//! drawn from the waiting model, jumps an isotropic step drawn from the step
//! model (reflecting off the arena walls) and emits one record per arrival.
//! Every subscriber owns a ChaCha stream keyed by `(seed, index)`, so output
//! does not depend on how subscribers are scheduled across threads.

use std::f64::consts::TAU;
use std::io::{self, Write};

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fit::{ExponentialModel, TruncatedPowerLawModel};
use crate::ingest::{CdrRecord, SubscriberId, CSV_HEADER};
use crate::window::{ObservationWindow, SECONDS_PER_HOUR};

/// Nodes in the tabulated step-length CDF.
pub const STEP_TABLE_NODES: usize = 10_000;
/// Cell size for tower ids when positions are not snapped, and grid spacing for `--towers auto`.
pub const DEFAULT_CELL_M: f64 = 1000.0;
/// Subscribers generated per parallel batch.
const BATCH: usize = 2048;

#[derive(Debug, Error)]
pub enum GenerateError {
    #[error("arena must have positive finite area, got {width} x {height}")]
    DegenerateArena { width: f64, height: f64 },
    #[error("invalid generator configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Axis-aligned box `[0, width] × [0, height]` in meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Arena {
    pub width: f64,
    pub height: f64,
}

impl Arena {
    pub fn new(width: f64, height: f64) -> Result<Self, GenerateError> {
        if !(width > 0.0 && height > 0.0 && width.is_finite() && height.is_finite()) {
            return Err(GenerateError::DegenerateArena { width, height });
        }
        Ok(Self { width, height })
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        (0.0..=self.width).contains(&x) && (0.0..=self.height).contains(&y)
    }
}

/// Folds a coordinate back into `[0, len]` by repeated mirror reflection.
pub fn reflect(v: f64, len: f64) -> f64 {
    let period = 2.0 * len;
    let m = v.rem_euclid(period);
    if m > len {
        period - m
    } else {
        m
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tower {
    pub id: String,
    pub x: f64,
    pub y: f64,
}

/// Nearest-tower lookup over a bucket grid.
#[derive(Debug, Clone)]
pub struct TowerIndex {
    towers: Vec<Tower>,
    origin: (f64, f64),
    cell: f64,
    dims: (usize, usize),
    buckets: Vec<Vec<u32>>,
}

impl TowerIndex {
    pub fn new(towers: Vec<Tower>) -> Result<Self, GenerateError> {
        if towers.is_empty() {
            return Err(GenerateError::Config("tower list is empty".into()));
        }
        if towers.iter().any(|t| !(t.x.is_finite() && t.y.is_finite())) {
            return Err(GenerateError::Config("tower coordinates must be finite".into()));
        }
        let (mut x0, mut y0, mut x1, mut y1) = (f64::MAX, f64::MAX, f64::MIN, f64::MIN);
        for t in &towers {
            x0 = x0.min(t.x);
            y0 = y0.min(t.y);
            x1 = x1.max(t.x);
            y1 = y1.max(t.y);
        }
        let area = ((x1 - x0) * (y1 - y0)).max(1.0);
        let cell = (area / towers.len() as f64).sqrt().max(1.0);
        let nx = (((x1 - x0) / cell) as usize + 1).min(4096);
        let ny = (((y1 - y0) / cell) as usize + 1).min(4096);
        let cell = cell.max((x1 - x0) / nx as f64).max((y1 - y0) / ny as f64);
        let mut buckets = vec![Vec::new(); nx * ny];
        let mut index = Self { towers, origin: (x0, y0), cell, dims: (nx, ny), buckets: Vec::new() };
        for (i, t) in index.towers.iter().enumerate() {
            let (cx, cy) = index.cell_of(t.x, t.y);
            buckets[cy * nx + cx].push(i as u32);
        }
        index.buckets = buckets;
        Ok(index)
    }

    pub fn towers(&self) -> &[Tower] {
        &self.towers
    }

    fn cell_of(&self, x: f64, y: f64) -> (usize, usize) {
        let cx = ((x - self.origin.0) / self.cell).floor().clamp(0.0, (self.dims.0 - 1) as f64) as usize;
        let cy = ((y - self.origin.1) / self.cell).floor().clamp(0.0, (self.dims.1 - 1) as f64) as usize;
        (cx, cy)
    }

    /// Index of the nearest tower; ties go to the lower index.
    pub fn nearest(&self, x: f64, y: f64) -> usize {
        let (cx, cy) = self.cell_of(x, y);
        let (nx, ny) = self.dims;
        let mut best = (f64::INFINITY, usize::MAX);
        for ring in 0..nx.max(ny) {
            let (lo_x, hi_x) = (cx.saturating_sub(ring), (cx + ring).min(nx - 1));
            let (lo_y, hi_y) = (cy.saturating_sub(ring), (cy + ring).min(ny - 1));
            for by in lo_y..=hi_y {
                for bx in lo_x..=hi_x {
                    let on_ring = bx.abs_diff(cx) == ring || by.abs_diff(cy) == ring;
                    if !on_ring {
                        continue;
                    }
                    for &i in &self.buckets[by * nx + bx] {
                        let t = &self.towers[i as usize];
                        let d = (t.x - x).hypot(t.y - y);
                        if d < best.0 || (d == best.0 && (i as usize) < best.1) {
                            best = (d, i as usize);
                        }
                    }
                }
            }
            // Every unvisited bucket is at least `ring * cell` away from the query.
            if best.1 != usize::MAX && best.0 < ring as f64 * self.cell {
                break;
            }
        }
        best.1
    }
}

/// Parses `tower_id,x,y` lines; a leading header line is skipped.
pub fn parse_towers(text: &str) -> Result<Vec<Tower>, GenerateError> {
    let mut towers = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || (n == 0 && line.starts_with("tower_id")) {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        let bad = || GenerateError::Config(format!("tower file line {}: expected tower_id,x,y", n + 1));
        if fields.len() != 3 || fields[0].is_empty() {
            return Err(bad());
        }
        let x: f64 = fields[1].trim().parse().map_err(|_| bad())?;
        let y: f64 = fields[2].trim().parse().map_err(|_| bad())?;
        towers.push(Tower { id: fields[0].to_string(), x, y });
    }
    Ok(towers)
}

#[derive(Debug, Clone)]
pub enum Towers {
    /// Positions kept as drawn; tower id names the 1 km cell.
    None,
    /// Square grid with towers at cell centres.
    Grid { spacing: f64 },
    List(TowerIndex),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputOrder {
    /// Subscriber by subscriber, each in time order.
    #[default]
    Chunked,
    /// Globally by timestamp, then subscriber.
    Sorted,
}

/// Time-of-day thinning: arrivals outside `[day_from_hour, day_to_hour)` are
/// recorded with probability `night_weight`. The walk itself is unaffected.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Diurnal {
    pub day_from_hour: u32,
    pub day_to_hour: u32,
    pub night_weight: f64,
}

impl Diurnal {
    fn is_day(&self, hour: u32) -> bool {
        (self.day_from_hour..self.day_to_hour).contains(&hour)
    }
}

#[derive(Debug, Clone)]
pub struct GeneratorConfig {
    pub n_subscribers: u64,
    pub window: ObservationWindow,
    pub waiting_model: ExponentialModel,
    pub step_model: TruncatedPowerLawModel,
    pub arena: Arena,
    pub towers: Towers,
    pub seed: u64,
    pub order: OutputOrder,
    pub diurnal: Option<Diurnal>,
}

impl GeneratorConfig {
    fn validate(&self) -> Result<(), GenerateError> {
        Arena::new(self.arena.width, self.arena.height)?;
        if let Towers::Grid { spacing } = self.towers {
            if !(spacing > 0.0 && spacing.is_finite()) {
                return Err(GenerateError::Config(format!("tower spacing must be positive, got {spacing}")));
            }
        }
        if let Some(d) = self.diurnal {
            if d.day_from_hour >= d.day_to_hour || d.day_to_hour > 24 || !(0.0..=1.0).contains(&d.night_weight) {
                return Err(GenerateError::Config("diurnal profile needs 0 <= from < to <= 24 and weight in [0, 1]".into()));
            }
        }
        Ok(())
    }
}

/// Inverse-CDF draw from the truncated exponential, in minutes.
pub fn sample_waiting_time<R: Rng + ?Sized>(model: &ExponentialModel, rng: &mut R) -> f64 {
    model.quantile(rng.random::<f64>())
}

/// Tabulated inverse CDF of a step-length model.
///
/// Nodes are evenly spaced in `ln(r + r₀)` and the CDF is interpolated
/// linearly between them; the interpolation error in CDF is below 1e-6 for
/// the default models (checked in tests against the exact CDF, bound 1e-4).
#[derive(Debug, Clone)]
pub struct StepSampler {
    r: Vec<f64>,
    cdf: Vec<f64>,
}

impl StepSampler {
    pub fn new(model: &TruncatedPowerLawModel) -> Self {
        Self::with_nodes(model, STEP_TABLE_NODES)
    }

    pub fn with_nodes(model: &TruncatedPowerLawModel, nodes: usize) -> Self {
        let (r, cdf) = model.cdf_table(nodes);
        Self { r, cdf }
    }

    /// Quantile at `u ∈ [0, 1]`; `u = 0` gives the lower bound and `u = 1` the upper.
    pub fn quantile(&self, u: f64) -> f64 {
        let u = u.clamp(0.0, 1.0);
        let last = self.r.len() - 1;
        if u >= 1.0 {
            return self.r[last];
        }
        // First node with cdf > u; the cell is [k - 1, k].
        let k = self.cdf.partition_point(|&f| f <= u).clamp(1, last);
        let (f0, f1) = (self.cdf[k - 1], self.cdf[k]);
        let (r0, r1) = (self.r[k - 1], self.r[k]);
        if f1 <= f0 {
            return r0;
        }
        r0 + (r1 - r0) * ((u - f0) / (f1 - f0))
    }

    /// CDF of the interpolated law at `r`.
    pub fn table_cdf(&self, r: f64) -> f64 {
        let last = self.r.len() - 1;
        if r <= self.r[0] {
            return 0.0;
        }
        if r >= self.r[last] {
            return 1.0;
        }
        let k = self.r.partition_point(|&x| x <= r).clamp(1, last);
        let (r0, r1) = (self.r[k - 1], self.r[k]);
        self.cdf[k - 1] + (self.cdf[k] - self.cdf[k - 1]) * (r - r0) / (r1 - r0)
    }

    pub fn nodes(&self) -> &[f64] {
        &self.r
    }
}

pub fn sample_step<R: Rng + ?Sized>(sampler: &StepSampler, rng: &mut R) -> f64 {
    sampler.quantile(rng.random::<f64>())
}

/// One generated arrival before formatting.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeneratedEvent {
    pub subscriber: u64,
    pub t: i64,
    pub x: f64,
    pub y: f64,
    /// Grid cell (or tower list index in `.0` with `.1 = u32::MAX`).
    cell: (u32, u32),
}

fn round_mm(v: f64) -> f64 {
    (v * 1000.0).round() / 1000.0
}

fn place(config: &GeneratorConfig, x: f64, y: f64) -> (f64, f64, (u32, u32)) {
    match &config.towers {
        Towers::None => {
            let cx = (x / DEFAULT_CELL_M).floor() as u32;
            let cy = (y / DEFAULT_CELL_M).floor() as u32;
            (x, y, (cx, cy))
        }
        Towers::Grid { spacing } => {
            let nx = (config.arena.width / spacing).ceil().max(1.0) as u32;
            let ny = (config.arena.height / spacing).ceil().max(1.0) as u32;
            let cx = ((x / spacing).floor() as u32).min(nx - 1);
            let cy = ((y / spacing).floor() as u32).min(ny - 1);
            ((cx as f64 + 0.5) * spacing, (cy as f64 + 0.5) * spacing, (cx, cy))
        }
        Towers::List(index) => {
            let i = index.nearest(x, y);
            let t = &index.towers()[i];
            (t.x, t.y, (i as u32, u32::MAX))
        }
    }
}

fn tower_id(config: &GeneratorConfig, cell: (u32, u32)) -> String {
    match &config.towers {
        Towers::None => format!("C{}_{}", cell.0, cell.1),
        Towers::Grid { .. } => format!("T{}_{}", cell.0, cell.1),
        Towers::List(index) => index.towers()[cell.0 as usize].id.clone(),
    }
}

/// Random stream for one subscriber.
pub fn subscriber_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Walk of subscriber `index`: always at least one event.
pub fn generate_subscriber(config: &GeneratorConfig, sampler: &StepSampler, index: u64) -> Vec<GeneratedEvent> {
    let mut rng = subscriber_rng(config.seed, index);
    let window = &config.window;
    let span = window.t_end() - window.t_start();
    let first_span = ((config.waiting_model.support().hi * 60.0).min(span as f64)).max(1.0);
    let mut t = window.t_start() + (rng.random::<f64>() * first_span).floor() as i64;
    let mut x = round_mm(rng.random::<f64>() * config.arena.width);
    let mut y = round_mm(rng.random::<f64>() * config.arena.height);

    let mut out = Vec::new();
    let mut emit = |t: i64, x: f64, y: f64, keep_draw: f64, first: bool| {
        if let Some(d) = config.diurnal {
            let day_start = window.day_of(t).map_or(window.t_start(), |k| window.day_boundaries()[k as usize]);
            let hour = ((t - day_start) / SECONDS_PER_HOUR) as u32;
            if !first && !d.is_day(hour) && keep_draw >= d.night_weight {
                return;
            }
        }
        let (px, py, cell) = place(config, x, y);
        out.push(GeneratedEvent { subscriber: index, t, x: px, y: py, cell });
    };
    let keep = if config.diurnal.is_some() { rng.random::<f64>() } else { 0.0 };
    emit(t, x, y, keep, true);
    loop {
        let wait = (sample_waiting_time(&config.waiting_model, &mut rng) * 60.0).round() as i64;
        let step = sample_step(sampler, &mut rng);
        let angle = TAU * rng.random::<f64>();
        let keep = if config.diurnal.is_some() { rng.random::<f64>() } else { 0.0 };
        t += wait;
        if t > window.t_end() {
            break;
        }
        x = round_mm(reflect(x + step * angle.cos(), config.arena.width));
        y = round_mm(reflect(y + step * angle.sin(), config.arena.height));
        emit(t, x, y, keep, false);
    }
    out
}

/// Exact parameters of a generated dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthParams {
    pub n_subscribers: u64,
    pub window_start: i64,
    pub window_end: i64,
    pub day_boundaries: Vec<i64>,
    pub lambda: f64,
    pub wait_support: (f64, f64),
    pub beta: f64,
    /// `None` means an infinite cutoff scale.
    pub kappa: Option<f64>,
    pub r0: f64,
    pub step_support: (f64, f64),
    pub arena: Arena,
    pub towers: TowerSpec,
    pub order: OutputOrder,
    pub diurnal: Option<Diurnal>,
    pub step_table_nodes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum TowerSpec {
    None { cell_m: f64 },
    Grid { spacing_m: f64 },
    List { towers: Vec<Tower> },
}

/// Ground truth written next to every generated dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticTruth {
    pub params: TruthParams,
    pub seed: u64,
    pub total_events: u64,
    pub single_event_subscribers: u64,
    pub single_event_fraction: f64,
    /// Events per subscriber, indexed by subscriber id.
    pub event_counts: Vec<u64>,
}

fn truth_params(config: &GeneratorConfig) -> TruthParams {
    let w = config.waiting_model.support();
    let s = config.step_model.support();
    let kappa = config.step_model.kappa();
    TruthParams {
        n_subscribers: config.n_subscribers,
        window_start: config.window.t_start(),
        window_end: config.window.t_end(),
        day_boundaries: config.window.day_boundaries().to_vec(),
        lambda: config.waiting_model.rate(),
        wait_support: (w.lo, w.hi),
        beta: config.step_model.beta(),
        kappa: kappa.is_finite().then_some(kappa),
        r0: config.step_model.r0(),
        step_support: (s.lo, s.hi),
        arena: config.arena,
        towers: match &config.towers {
            Towers::None => TowerSpec::None { cell_m: DEFAULT_CELL_M },
            Towers::Grid { spacing } => TowerSpec::Grid { spacing_m: *spacing },
            Towers::List(index) => TowerSpec::List { towers: index.towers().to_vec() },
        },
        order: config.order,
        diurnal: config.diurnal,
        step_table_nodes: STEP_TABLE_NODES,
    }
}

fn finish_truth(config: &GeneratorConfig, event_counts: Vec<u64>) -> SyntheticTruth {
    let total_events = event_counts.iter().sum();
    let single = event_counts.iter().filter(|&&c| c == 1).count() as u64;
    let n = event_counts.len().max(1) as f64;
    SyntheticTruth {
        params: truth_params(config),
        seed: config.seed,
        total_events,
        single_event_subscribers: single,
        single_event_fraction: single as f64 / n,
        event_counts,
    }
}

/// Calls `sink` with consecutive batches of subscribers, in subscriber order.
fn for_each_batch<F>(config: &GeneratorConfig, mut sink: F) -> Result<Vec<u64>, GenerateError>
where
    F: FnMut(Vec<Vec<GeneratedEvent>>) -> Result<(), GenerateError>,
{
    config.validate()?;
    let sampler = StepSampler::new(&config.step_model);
    let mut counts = Vec::with_capacity(config.n_subscribers as usize);
    let mut start = 0u64;
    while start < config.n_subscribers {
        let end = (start + BATCH as u64).min(config.n_subscribers);
        let batch: Vec<Vec<GeneratedEvent>> =
            (start..end).into_par_iter().map(|i| generate_subscriber(config, &sampler, i)).collect();
        counts.extend(batch.iter().map(|b| b.len() as u64));
        sink(batch)?;
        start = end;
    }
    Ok(counts)
}

fn to_record(config: &GeneratorConfig, e: &GeneratedEvent) -> CdrRecord {
    CdrRecord {
        subscriber: SubscriberId::Numeric(e.subscriber),
        timestamp: e.t,
        tower_id: tower_id(config, e.cell),
        x: e.x,
        y: e.y,
    }
}

fn sort_key(a: &GeneratedEvent, b: &GeneratedEvent) -> std::cmp::Ordering {
    a.t.cmp(&b.t).then(a.subscriber.cmp(&b.subscriber))
}

/// All records in memory, in the configured order.
pub fn generate_population(config: &GeneratorConfig) -> Result<(Vec<CdrRecord>, SyntheticTruth), GenerateError> {
    let mut events = Vec::new();
    let counts = for_each_batch(config, |batch| {
        events.extend(batch.into_iter().flatten());
        Ok(())
    })?;
    if config.order == OutputOrder::Sorted {
        events.par_sort_by(sort_key);
    }
    let records = events.iter().map(|e| to_record(config, e)).collect();
    Ok((records, finish_truth(config, counts)))
}

/// Streams the canonical CSV (with header) to `out`. Chunked order keeps only
/// one batch in memory; sorted order buffers compact events for the final sort.
pub fn write_population_csv<W: Write>(config: &GeneratorConfig, out: &mut W) -> Result<SyntheticTruth, GenerateError> {
    writeln!(out, "{CSV_HEADER}")?;
    let mut pending = Vec::new();
    let counts = for_each_batch(config, |batch| {
        match config.order {
            OutputOrder::Chunked => {
                let mut buf = String::new();
                for e in batch.iter().flatten() {
                    buf.push_str(&to_record(config, e).to_csv_line());
                    buf.push('\n');
                }
                out.write_all(buf.as_bytes())?;
            }
            OutputOrder::Sorted => pending.extend(batch.into_iter().flatten()),
        }
        Ok(())
    })?;
    if config.order == OutputOrder::Sorted {
        pending.par_sort_by(sort_key);
        for e in &pending {
            writeln!(out, "{}", to_record(config, e).to_csv_line())?;
        }
    }
    out.flush()?;
    Ok(finish_truth(config, counts))
}
