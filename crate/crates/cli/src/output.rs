use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use dispersia_core::harness::{ErrorRecord, GroupFit};
use dispersia_core::SpectralField;
use serde::Serialize;

/// 17 significant digits, round-trip exact.
pub fn num(v: f64) -> String {
    format!("{v:.16e}")
}

pub const RESULTS_HEADER: [&str; 10] = [
    "scheme",
    "kappa",
    "alpha",
    "epsilon",
    "tau",
    "z_final",
    "j",
    "error_x",
    "normalized_error",
    "walltime_s",
];

pub fn write_results(path: &Path, records: &[ErrorRecord], timing: bool) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("cannot write {}", path.display()))?;
    w.write_record(RESULTS_HEADER)?;
    for r in records {
        w.write_record([
            r.scheme.short_name().to_string(),
            r.kappa.to_string(),
            num(r.alpha),
            num(r.epsilon),
            num(r.tau),
            num(r.z_final),
            r.j.to_string(),
            num(r.error_x),
            num(r.normalized_error),
            num(if timing { r.wall_time } else { 0.0 }),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_rates(path: &Path, fits: &[GroupFit]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("cannot write {}", path.display()))?;
    w.write_record(["group", "slope", "r_squared"])?;
    for g in fits {
        w.write_record([g.key.clone(), num(g.fit.slope), num(g.fit.r_squared)])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_state(path: &Path, field: &SpectralField) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("cannot write {}", path.display()))?;
    w.write_record(["x", "re", "im"])?;
    let grid = field.grid();
    for (j, v) in field.values().iter().enumerate() {
        w.write_record([num(grid.node(j)), num(v.re), num(v.im)])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    fs::write(path, text + "\n").with_context(|| format!("cannot write {}", path.display()))
}

/// Which variable goes on the horizontal axis of the plot.
#[derive(Clone, Copy)]
pub enum PlotAxis {
    Tau,
    Epsilon,
}

/// Gnuplot script drawing one log-log curve per `(scheme, ε)` (or per
/// scheme for `ε` plots) from `results.csv`.
pub fn write_plot(path: &Path, records: &[ErrorRecord], axis: PlotAxis) -> Result<()> {
    let mut curves: Vec<(String, String)> = Vec::new();
    for r in records {
        let (title, filter, column) = match axis {
            PlotAxis::Tau => (
                format!("{} eps={}", r.scheme, r.epsilon),
                format!("strcol(1) eq \"{}\" && $4 == {}", r.scheme, num(r.epsilon)),
                5,
            ),
            PlotAxis::Epsilon => (
                format!("{} tau={}", r.scheme, r.tau),
                format!("strcol(1) eq \"{}\" && $5 == {}", r.scheme, num(r.tau)),
                4,
            ),
        };
        if curves.iter().all(|c| c.0 != title) {
            curves.push((title.clone(), format!("'results.csv' using ({filter} ? ${column} : 1/0):9 with linespoints title '{title}'")));
        }
    }
    let xlabel = match axis {
        PlotAxis::Tau => "tau",
        PlotAxis::Epsilon => "epsilon",
    };
    let mut script = String::new();
    script.push_str("set datafile separator ','\n");
    script.push_str("set key autotitle columnhead outside\n");
    script.push_str("set logscale xy\n");
    script.push_str(&format!("set xlabel '{xlabel}'\nset ylabel 'normalized error'\n"));
    script.push_str("set terminal pngcairo size 900,600\nset output 'results.png'\n");
    let lines: Vec<_> = curves.into_iter().map(|c| c.1).collect();
    script.push_str(&format!("plot {}\n", lines.join(", \\\n     ")));
    fs::write(path, script).with_context(|| format!("cannot write {}", path.display()))
}
