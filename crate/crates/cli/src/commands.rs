use std::path::Path;

use serde::Serialize;

use ratchet_core::analysis::{
    compare_strategies, convergence_study, uniform_grid, ComparisonTable, ConvergenceReport, StrategyKind,
};
use ratchet_core::export;
use ratchet_core::mc::{linear_schedule, simulate, trace_path, McRun, StrategySpec};
use ratchet_core::verify::{
    coefficient_band_violations, coefficient_upper_band_violations, foc_residual, hjb_verify,
    threshold_inflection, HjbTolerance, Inflection, Region,
};
use ratchet_core::{optimal_barrier, solve_surface, RateGrid, ValueSurface, ZeroThresholdRegion};

use crate::config::RunConfig;
use crate::error::CliError;
use crate::output::Artifacts;

/// Relative first-order residual accepted at interior thresholds.
const FOC_TOL: f64 = 1e-5;

fn solve(cfg: &RunConfig) -> Result<ValueSurface, CliError> {
    let grid = RateGrid::uniform(cfg.model.c_bar, cfg.grid_n)?;
    Ok(solve_surface(cfg.model, grid)?)
}

#[derive(Serialize)]
struct SolveSummary {
    levels: usize,
    value_at_x0: f64,
    slope_at_x0: f64,
    zero_threshold_region: ZeroThresholdRegion,
    all_thresholds_positive: bool,
    zero_threshold_levels: usize,
    largest_zero_threshold_rate: Option<f64>,
    hjb_points: usize,
    hjb_failures: usize,
    max_emit_residual: f64,
    max_reduce_gap: f64,
    foc_interior_levels: usize,
    foc_max_relative: f64,
    /// Levels outside `0 < a* < exp(theta1 z*)`.
    strict_band_violations: usize,
    /// Levels outside `0 < a* <= exp(-theta1 z*)`.
    upper_band_violations: usize,
    monotonicity_violations: Vec<usize>,
    inflection: Option<Inflection>,
    barrier: Option<f64>,
    barrier_value_at_x0: Option<f64>,
    verification_ok: bool,
}

pub fn cmd_solve(cfg: &RunConfig, out: &Path) -> Result<(), CliError> {
    let s = solve(cfg)?;
    let x_grid = uniform_grid(cfg.x_max, cfg.x_points);
    let reports = hjb_verify(&s, &x_grid, HjbTolerance::default());
    let z = s.z_star();
    let zero_levels: Vec<usize> = (1..=s.top()).filter(|&i| z[i] == 0.0).collect();

    let mut foc_levels = 0;
    let mut foc_max = 0.0_f64;
    for i in 1..=s.top() {
        if let Ok(r) = foc_residual(&s, i) {
            foc_levels += 1;
            foc_max = foc_max.max(r.abs() / cfg.model.perpetuity(s.grid().rate(i)));
        }
    }
    let hjb_failures = reports.iter().filter(|r| !r.ok).count();
    let max_of = |region: Region, f: fn(&ratchet_core::verify::HjbReport) -> f64| {
        reports.iter().filter(|r| r.classification == region).map(f).fold(0.0, f64::max)
    };
    let upper = coefficient_upper_band_violations(&s);
    let barrier = optimal_barrier(&cfg.model).ok();
    let (value_at_x0, slope_at_x0) = s.surface_eval(cfg.x0, s.top())?;
    let verification_ok = hjb_failures == 0 && foc_max < FOC_TOL && upper.is_empty();
    let summary = SolveSummary {
        levels: s.top(),
        value_at_x0,
        slope_at_x0,
        zero_threshold_region: s.zero_region(),
        all_thresholds_positive: zero_levels.is_empty(),
        zero_threshold_levels: zero_levels.len(),
        largest_zero_threshold_rate: zero_levels.last().map(|&i| s.grid().rate(i)),
        hjb_points: reports.len(),
        hjb_failures,
        max_emit_residual: max_of(Region::EmitRegion, |r| r.generator_residual.abs()),
        max_reduce_gap: max_of(Region::ReduceRegion, |r| r.complementarity_gap.map_or(0.0, f64::abs)),
        foc_interior_levels: foc_levels,
        foc_max_relative: foc_max,
        strict_band_violations: coefficient_band_violations(&s).len(),
        upper_band_violations: upper.len(),
        monotonicity_violations: s.monotonicity_violations(),
        inflection: threshold_inflection(&s),
        barrier: barrier.map(|b| b.b),
        barrier_value_at_x0: barrier.map(|b| b.value(cfg.x0)),
        verification_ok,
    };

    let art = Artifacts::create(out, "solve", cfg)?;
    art.csv("thresholds.csv", |w| export::write_thresholds(w, &s))?;
    art.csv("value_curve.csv", |w| export::write_value_curve(w, &s, &x_grid))?;
    art.csv("hjb_report.csv", |w| export::write_hjb_report(w, &reports))?;
    if let Some(b) = &barrier {
        art.csv("benchmark_curve.csv", |w| export::write_benchmark_curve(w, b, &x_grid))?;
    }
    art.json("summary.json", &summary)?;
    if !verification_ok {
        return Err(CliError::Verification(format!(
            "{hjb_failures} HJB points fail, max relative FOC residual {foc_max:e}, {} levels outside the coefficient band",
            upper.len()
        )));
    }
    Ok(())
}

#[derive(Serialize)]
struct Estimate<'a> {
    strategy: StrategyKind,
    x0: f64,
    seed: u64,
    /// Strategy parameters actually simulated.
    rate: Option<f64>,
    slope: Option<f64>,
    barrier: Option<f64>,
    analytic_value: Option<f64>,
    #[serde(flatten)]
    run: &'a McRun,
}

pub fn cmd_simulate(cfg: &RunConfig, out: &Path) -> Result<(), CliError> {
    let p = &cfg.model;
    let surface;
    let (mut rate, mut slope, mut barrier, mut analytic) = (None, None, None, None);
    let strategy = match cfg.strategy {
        StrategyKind::Optimal => {
            surface = solve(cfg)?;
            analytic = Some(surface.surface_eval(cfg.x0, surface.top())?.0);
            StrategySpec::MultiThreshold(&surface)
        }
        StrategyKind::Linear => {
            let (m, _) = linear_schedule(p.c_bar, cfg.x0)?;
            slope = Some(m);
            StrategySpec::LinearSchedule { c_bar: p.c_bar, slope: m }
        }
        StrategyKind::Constant => {
            rate = Some(p.c_bar);
            analytic = Some(ratchet_core::constant_rate_value(p, p.c_bar, cfg.x0)?);
            StrategySpec::ConstantRate(p.c_bar)
        }
        StrategyKind::Barrier => {
            let b = optimal_barrier(p)?;
            barrier = Some(b.b);
            analytic = Some(b.value(cfg.x0));
            StrategySpec::Barrier { b: b.b, c_bar: p.c_bar }
        }
        StrategyKind::NoEmission => {
            rate = Some(0.0);
            analytic = Some(ratchet_core::no_emission_value(p, cfg.x0)?);
            StrategySpec::NoEmission
        }
    };
    let run = simulate(p, &strategy, cfg.x0, &cfg.mc)?;
    let trace = match cfg.trace_path {
        Some(i) => Some(trace_path(p, &strategy, cfg.x0, &cfg.mc, i)?),
        None => None,
    };
    let art = Artifacts::create(out, "simulate", cfg)?;
    let estimate = Estimate {
        strategy: cfg.strategy,
        x0: cfg.x0,
        seed: cfg.mc.seed,
        rate,
        slope,
        barrier,
        analytic_value: analytic,
        run: &run,
    };
    art.json("estimate.json", &estimate)?;
    if let Some(t) = trace {
        art.csv("path_trace.csv", |w| export::write_trace(w, &t))?;
    }
    Ok(())
}

#[derive(Serialize)]
struct Comparison<'a> {
    table: &'a ComparisonTable,
    ordering_violations: Vec<(StrategyKind, StrategyKind)>,
}

pub fn cmd_compare(cfg: &RunConfig, out: &Path) -> Result<(), CliError> {
    let s = solve(cfg)?;
    let table = compare_strategies(&cfg.model, &s, cfg.x0, &cfg.mc, &cfg.strategies)?;
    let sweep = cfg
        .mu_sweep
        .iter()
        .map(|&mu| {
            let grid = RateGrid::uniform(cfg.model.c_bar, cfg.grid_n)?;
            solve_surface(cfg.model.with_mu(mu), grid)
        })
        .collect::<ratchet_core::Result<Vec<_>>>()?;

    let art = Artifacts::create(out, "compare", cfg)?;
    let hash = art.hash().to_string();
    art.csv(&format!("comparison-{hash}.csv"), |w| export::write_comparison(w, &table))?;
    art.json(
        &format!("comparison-{hash}.json"),
        &Comparison { table: &table, ordering_violations: table.ordering_violations() },
    )?;
    if !sweep.is_empty() {
        art.csv(&format!("threshold_sweep-{hash}.csv"), |w| export::write_threshold_sweep(w, &sweep))?;
    }
    Ok(())
}

#[derive(Serialize)]
struct Convergence<'a> {
    #[serde(flatten)]
    report: &'a ConvergenceReport,
    sup_diffs_decreasing: bool,
}

pub fn cmd_converge(cfg: &RunConfig, out: &Path) -> Result<(), CliError> {
    let x_grid = uniform_grid(cfg.x_max, cfg.x_points);
    let report = convergence_study(&cfg.model, &cfg.n_list, &x_grid)?;
    let art = Artifacts::create(out, "converge", cfg)?;
    let hash = art.hash().to_string();
    art.csv(&format!("convergence-{hash}.csv"), |w| export::write_convergence(w, &report))?;
    art.json(
        &format!("convergence-{hash}.json"),
        &Convergence { report: &report, sup_diffs_decreasing: report.sup_diffs_decreasing() },
    )?;
    if !report.monotone_ok {
        return Err(CliError::Verification(format!(
            "refinement decreased the value by up to {:e}",
            -report.min_increments.iter().cloned().fold(0.0, f64::min)
        )));
    }
    Ok(())
}
