//! CSV writers for solver, benchmark and simulation artifacts.
//!
//! Floats are written in shortest round-trip form, so every value reads back
//! bit-exactly.

use std::io::Write;

use serde::Serialize;

use crate::analysis::{ComparisonTable, ConvergenceReport};
use crate::benchmark::BarrierSolution;
use crate::error::{Error, Result};
use crate::mc::TracePoint;
use crate::surface::ValueSurface;
use crate::verify::{foc_residual, HjbReport};

fn write_rows<W: Write, T: Serialize>(out: W, what: &'static str, rows: impl IntoIterator<Item = T>) -> Result<()> {
    let fail = |e: csv::Error| Error::Export { what, message: e.to_string() };
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row).map_err(fail)?;
    }
    w.flush().map_err(|e| Error::Export { what, message: e.to_string() })
}

#[derive(Serialize)]
struct ThresholdRow {
    level_index: usize,
    c: f64,
    z_star: f64,
    a_star: f64,
    theta1: f64,
    foc_residual: Option<f64>,
}

pub fn write_thresholds<W: Write>(out: W, surface: &ValueSurface) -> Result<()> {
    let rows = (0..=surface.solved()).map(|i| ThresholdRow {
        level_index: i,
        c: surface.grid().rate(i),
        z_star: surface.z_star()[i],
        a_star: surface.a_star()[i],
        theta1: surface.theta1()[i],
        foc_residual: if i == 0 { None } else { foc_residual(surface, i).ok() },
    });
    write_rows(out, "thresholds", rows)
}

#[derive(Serialize)]
struct SweepRow {
    mu: f64,
    level_index: usize,
    c: f64,
    z_star: f64,
}

/// Threshold curves of several surfaces in one table keyed by drift.
pub fn write_threshold_sweep<W: Write>(out: W, surfaces: &[ValueSurface]) -> Result<()> {
    let rows = surfaces.iter().flat_map(|s| {
        (0..=s.solved()).map(move |i| SweepRow {
            mu: s.params().mu,
            level_index: i,
            c: s.grid().rate(i),
            z_star: s.z_star()[i],
        })
    });
    write_rows(out, "threshold sweep", rows)
}

#[derive(Serialize)]
struct CurveRow {
    x: f64,
    value: f64,
    slope: f64,
}

/// `V(x, c_bar)` and its slope on `x_grid`.
pub fn write_value_curve<W: Write>(out: W, surface: &ValueSurface, x_grid: &[f64]) -> Result<()> {
    let rows = x_grid
        .iter()
        .map(|&x| {
            let (value, slope) = surface.surface_eval(x, surface.solved())?;
            Ok(CurveRow { x, value, slope })
        })
        .collect::<Result<Vec<_>>>()?;
    write_rows(out, "value curve", rows)
}

pub fn write_benchmark_curve<W: Write>(out: W, barrier: &BarrierSolution, x_grid: &[f64]) -> Result<()> {
    let rows = x_grid.iter().map(|&x| CurveRow { x, value: barrier.value(x), slope: barrier.slope(x) });
    write_rows(out, "benchmark curve", rows)
}

pub fn write_hjb_report<W: Write>(out: W, reports: &[HjbReport]) -> Result<()> {
    write_rows(out, "hjb report", reports)
}

pub fn write_trace<W: Write>(out: W, trace: &[TracePoint]) -> Result<()> {
    write_rows(out, "path trace", trace)
}

pub fn write_comparison<W: Write>(out: W, table: &ComparisonTable) -> Result<()> {
    write_rows(out, "comparison", &table.rows)
}

#[derive(Serialize)]
struct ConvergenceRow {
    n_coarse: usize,
    n_fine: usize,
    sup_diff: f64,
    min_increment: f64,
    ratio: Option<f64>,
}

pub fn write_convergence<W: Write>(out: W, report: &ConvergenceReport) -> Result<()> {
    let rows = (0..report.sup_diffs.len()).map(|k| ConvergenceRow {
        n_coarse: report.mesh_sizes[k],
        n_fine: report.mesh_sizes[k + 1],
        sup_diff: report.sup_diffs[k],
        min_increment: report.min_increments[k],
        ratio: if k == 0 { None } else { Some(report.ratios[k - 1]) },
    });
    write_rows(out, "convergence", rows)
}
