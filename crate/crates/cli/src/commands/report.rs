//! Figure bundles: one `figN.dat` plus a gnuplot `figN.gp` per figure.
//!
//! Data files hold gnuplot index blocks separated by two blank lines, each
//! introduced by a `# label` comment.

use std::fmt::Write as _;
use std::path::PathBuf;

use clap::Args;
use serde::Serialize;

use mobilis_core::analysis::AnalysisSummary;
use mobilis_core::fit::{FitRecord, Model};

use crate::manifest::Run;
use crate::tables::{Table, DAY_AVERAGE};
use crate::CliError;

use super::ensure_dir;

const REQUIRED: [&str; 8] = [
    "density.csv",
    "histogram_dta.csv",
    "histogram_dt.csv",
    "cohorts_dt.csv",
    "curves_dt.csv",
    "histogram_dr.csv",
    "curves_dr.csv",
    "analysis.json",
];

#[derive(Debug, Clone, Args, Serialize)]
pub struct ReportArgs {
    /// Directory written by `analyze` (and optionally `fit`).
    #[arg(long)]
    pub input: PathBuf,
    /// Output directory (default: the input directory).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn centre(l: f64, r: f64) -> f64 {
    if l > 0.0 {
        (l * r).sqrt()
    } else {
        0.5 * (l + r)
    }
}

/// `(centre, probability, pdf)` rows of a histogram-shaped table, optionally
/// restricted to rows whose `key` column equals `value`.
fn bins(table: &Table, key: Option<(&str, &str)>) -> Result<Vec<(f64, f64, f64)>, CliError> {
    let col = |n: &str| table.column(n).ok_or_else(|| CliError::Data(format!("table lacks column {n:?}")));
    let (l, r, p, d) = (col("bin_left")?, col("bin_right")?, col("probability")?, col("pdf")?);
    let filter = key.map(|(k, v)| col(k).map(|i| (i, v))).transpose()?;
    let num = |row: &[String], i: usize| {
        row.get(i)
            .and_then(|v| v.parse::<f64>().ok())
            .ok_or_else(|| CliError::Data("non-numeric histogram cell".into()))
    };
    table
        .rows
        .iter()
        .filter(|row| filter.is_none_or(|(i, v)| row.get(i).map(String::as_str) == Some(v)))
        .map(|row| Ok((centre(num(row, l)?, num(row, r)?), num(row, p)?, num(row, d)?)))
        .collect()
}

fn block(out: &mut String, label: &str, rows: &[(f64, f64, f64)]) {
    if !out.is_empty() {
        out.push_str("\n\n");
    }
    let _ = writeln!(out, "# {label}");
    let _ = writeln!(out, "# centre probability pdf");
    for (c, p, d) in rows {
        let _ = writeln!(out, "{c} {p} {d}");
    }
}

fn overlay(out: &mut String, label: &str, model: &Model, centres: &[f64]) {
    out.push_str("\n\n");
    let _ = writeln!(out, "# {label}");
    let _ = writeln!(out, "# centre model_pdf");
    for &c in centres {
        if let Ok(p) = model.pdf(c) {
            let _ = writeln!(out, "{c} {p}");
        }
    }
}

/// Block labels of a curve family: days in order, then the day average.
fn curve_blocks(table: &Table, out: &mut String) -> Result<usize, CliError> {
    let day = table.column("day_index").ok_or_else(|| CliError::Data("curves lack day_index".into()))?;
    let mut days: Vec<i64> = table.rows.iter().filter_map(|r| r.get(day)?.parse().ok()).collect();
    days.sort_unstable();
    days.dedup();
    days.retain(|&d| d != DAY_AVERAGE);
    for &d in &days {
        block(out, &format!("day {d}"), &bins(table, Some(("day_index", &d.to_string())))?);
    }
    block(out, "DayAve", &bins(table, Some(("day_index", &DAY_AVERAGE.to_string())))?);
    Ok(days.len())
}

fn gp(name: &str, title: &str, xlabel: &str, ylabel: &str, logscale: &str, extra: &str, plot: &str) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "set terminal pngcairo size 900,650");
    let _ = writeln!(s, "set output '{name}.png'");
    let _ = writeln!(s, "set title \"{title}\"");
    let _ = writeln!(s, "set xlabel \"{xlabel}\"");
    let _ = writeln!(s, "set ylabel \"{ylabel}\"");
    if !logscale.is_empty() {
        let _ = writeln!(s, "set logscale {logscale}");
    }
    s.push_str(extra);
    let _ = writeln!(s, "plot {plot}");
    s
}

fn index_plots(file: &str, blocks: usize, column: u32, titles: impl Fn(usize) -> String) -> String {
    (0..blocks)
        .map(|i| format!("'{file}' index {i} using 1:{column} with linespoints title \"{}\"", titles(i)))
        .collect::<Vec<_>>()
        .join(", \\\n     ")
}

pub fn run(args: ReportArgs, threads: usize) -> Result<(), CliError> {
    let mut run = Run::start("report", threads);
    let dir = &args.input;
    let missing: Vec<&str> = REQUIRED.iter().copied().filter(|f| !dir.join(f).is_file()).collect();
    if !missing.is_empty() {
        return Err(CliError::Data(format!("{}: missing artifacts: {}", dir.display(), missing.join(", "))));
    }
    let out = args.out.clone().unwrap_or_else(|| dir.clone());
    ensure_dir(&out)?;

    let summary_path = dir.join("analysis.json");
    let text = std::fs::read_to_string(&summary_path).map_err(CliError::io(&summary_path))?;
    let summary: AnalysisSummary =
        serde_json::from_str(&text).map_err(|e| CliError::Data(format!("{}: {e}", summary_path.display())))?;

    let fits_path = dir.join("fits.json");
    let fits: Vec<FitRecord> = if fits_path.is_file() {
        let text = std::fs::read_to_string(&fits_path).map_err(CliError::io(&fits_path))?;
        serde_json::from_str(&text).map_err(|e| CliError::Data(format!("{}: {e}", fits_path.display())))?
    } else {
        log::warn!("{} not found; figures 3 and 5 are emitted without fitted overlays", fits_path.display());
        eprintln!("warning: no fits.json in {}, figures 3 and 5 have no model overlay", dir.display());
        Vec::new()
    };
    let model_for = |target: &str| -> Result<Option<Model>, CliError> {
        fits.iter()
            .find(|f| f.target.as_deref() == Some(target))
            .map(|f| f.to_model().map_err(|e| CliError::Data(format!("fits.json: {e}"))))
            .transpose()
    };
    let dt_model = model_for("dt")?;
    let dr_model = model_for("dr")?;
    let read = |name: &str| Table::read(&dir.join(name));

    let mut emit = |name: &str, data: String, script: String| -> Result<(), CliError> {
        for (ext, body) in [("dat", data), ("gp", script)] {
            let path = out.join(format!("{name}.{ext}"));
            std::fs::write(&path, body).map_err(CliError::io(&path))?;
            run.output(path);
        }
        Ok(())
    };

    // Fig. 1: activity per hour of the window.
    let density = read("density.csv")?;
    let mut data = String::from("# hour_index count\n");
    for (h, c) in density.floats("hour_index")?.iter().zip(density.floats("count")?) {
        let _ = writeln!(data, "{h} {c}");
    }
    emit("fig1", data, gp("fig1", "Activity density per hour", "hour of window", "events", "", "set style fill solid 0.6\n", "'fig1.dat' using 1:2 with boxes notitle"))?;

    // Fig. 2: per-subscriber mean waiting time, and pooled waiting time.
    let mut data = String::new();
    block(&mut data, "mean inter-event time per subscriber", &bins(&read("histogram_dta.csv")?, None)?);
    block(&mut data, "pooled inter-event time", &bins(&read("histogram_dt.csv")?, None)?);
    let plot = "'fig2.dat' index 0 using 1:2 with boxes title \"per-subscriber mean\", \\\n     'fig2.dat' index 1 using 1:2 with linespoints title \"pooled\"";
    emit("fig2", data, gp("fig2", "Average inter-event time", "minutes", "probability", "x", "set style fill transparent solid 0.4\n", plot))?;

    // Fig. 3: waiting time by activity cohort, with the fitted law.
    let cohorts = read("cohorts_dt.csv")?;
    let ci = cohorts.column("cohort").ok_or_else(|| CliError::Data("cohorts lack a cohort column".into()))?;
    let mut labels: Vec<String> = Vec::new();
    for row in &cohorts.rows {
        if labels.last() != row.get(ci) {
            labels.push(row[ci].clone());
        }
    }
    let mut data = String::new();
    for l in &labels {
        block(&mut data, &format!("cohort {l}"), &bins(&cohorts, Some(("cohort", l)))?);
    }
    let centres: Vec<f64> = bins(&read("histogram_dt.csv")?, None)?.iter().map(|b| b.0).collect();
    let mut plot = index_plots("fig3.dat", labels.len(), 3, |i| format!("{} events", labels[i]));
    if let Some(m) = &dt_model {
        overlay(&mut data, "fitted waiting-time law", m, &centres);
        let _ = write!(plot, ", \\\n     'fig3.dat' index {} using 1:2 with lines lw 2 title \"fit\"", labels.len());
    }
    emit("fig3", data, gp("fig3", "Waiting time distribution by cohort", "dt (minutes)", "P(dt)", "xy", "", &plot))?;

    // Fig. 4: per-day waiting-time curves and their average.
    let mut data = String::new();
    let days = curve_blocks(&read("curves_dt.csv")?, &mut data)?;
    let plot = index_plots("fig4.dat", days + 1, 2, |i| if i < days { format!("day {i}") } else { "DayAve".into() });
    emit("fig4", data, gp("fig4", "Waiting time per day", "dt (minutes)", "probability", "xy", "", &plot))?;

    // Fig. 5: displacement distribution, fitted law and cutoff marker.
    let hist = bins(&read("histogram_dr.csv")?, None)?;
    let mut data = String::new();
    block(&mut data, "displacement", &hist);
    let cutoff = summary.cutoffs.dr_max_obs;
    let extra = format!("set arrow from {cutoff}, graph 0 to {cutoff}, graph 1 nohead dt 2\nset label \"cutoff {cutoff} m\" at {cutoff}, graph 0.95 right\n");
    let mut plot = String::from("'fig5.dat' index 0 using 1:3 with linespoints title \"empirical\"");
    if let Some(m) = &dr_model {
        let centres: Vec<f64> = hist.iter().map(|b| b.0).collect();
        overlay(&mut data, "fitted displacement law", m, &centres);
        plot.push_str(", \\\n     'fig5.dat' index 1 using 1:2 with lines lw 2 title \"fit\"");
    }
    emit("fig5", data, gp("fig5", "Displacement distribution", "dr (m)", "P(dr)", "xy", &extra, &plot))?;

    // Fig. 6: per-day displacement curves and their average.
    let mut data = String::new();
    let days = curve_blocks(&read("curves_dr.csv")?, &mut data)?;
    let plot = index_plots("fig6.dat", days + 1, 2, |i| if i < days { format!("day {i}") } else { "DayAve".into() });
    emit("fig6", data, gp("fig6", "Displacement per day", "dr (m)", "probability", "xy", "", &plot))?;

    eprintln!("report: 6 figure bundles written to {}", out.display());
    run.finish(&out, &args)
}
