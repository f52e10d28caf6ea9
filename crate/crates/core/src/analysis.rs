//! Mesh refinement studies and strategy comparison tables.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::benchmark::optimal_barrier;
use crate::error::{Error, Result};
use crate::mc::{linear_schedule, simulate, McConfig, McRun, StrategySpec};
use crate::model::{constant_rate_value, no_emission_value, ModelParams};
use crate::surface::{solve_uniform, ValueSurface};

/// Default evaluation grid: 200 uniform points on `[0, x_max]`.
pub fn default_x_grid(x_max: f64) -> Vec<f64> {
    uniform_grid(x_max, 200)
}

/// `points` uniform points from 0 to `x_max` inclusive.
pub fn uniform_grid(x_max: f64, points: usize) -> Vec<f64> {
    match points {
        0 => Vec::new(),
        1 => vec![0.0],
        _ => (0..points)
            .map(|k| x_max * k as f64 / (points - 1) as f64)
            .collect(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub mesh_sizes: Vec<usize>,
    /// `sup_x |V^{n_{k+1}}(x, c_bar) - V^{n_k}(x, c_bar)|`.
    pub sup_diffs: Vec<f64>,
    /// Smallest `V^{n_{k+1}} - V^{n_k}` over the grid, per refinement.
    pub min_increments: Vec<f64>,
    /// Every refinement is pointwise non-decreasing up to `MONOTONE_TOL`.
    pub monotone_ok: bool,
    /// `sup_diffs[k+1] / sup_diffs[k]`.
    pub ratios: Vec<f64>,
}

pub const MONOTONE_TOL: f64 = 1e-10;

impl ConvergenceReport {
    pub fn sup_diffs_decreasing(&self) -> bool {
        self.sup_diffs.windows(2).all(|w| w[1] < w[0])
    }
}

fn check_nested(n_list: &[usize]) -> Result<()> {
    if n_list.is_empty() {
        return Err(Error::InvalidParameter {
            name: "n_list",
            value: 0.0,
            reason: "needs at least one mesh size",
        });
    }
    let nested = n_list[0] > 0 && n_list.windows(2).all(|w| w[1] > w[0] && w[1] % w[0] == 0);
    if nested {
        Ok(())
    } else {
        Err(Error::NonNestedMeshes(n_list.to_vec()))
    }
}

/// Solve on each mesh of `n_list` and compare consecutive refinements at `c_bar`.
pub fn convergence_study(params: &ModelParams, n_list: &[usize], x_grid: &[f64]) -> Result<ConvergenceReport> {
    check_nested(n_list)?;
    let curves: Vec<Result<Vec<f64>>> = n_list
        .par_iter()
        .map(|&n| {
            let s = solve_uniform(*params, n)?;
            x_grid
                .iter()
                .map(|&x| s.surface_eval(x, s.top()).map(|(v, _)| v))
                .collect()
        })
        .collect();
    let curves = curves.into_iter().collect::<Result<Vec<_>>>()?;
    let mut sup_diffs = Vec::new();
    let mut min_increments = Vec::new();
    for pair in curves.windows(2) {
        let mut sup = 0.0_f64;
        let mut low = f64::INFINITY;
        for (a, b) in pair[0].iter().zip(&pair[1]) {
            sup = sup.max((b - a).abs());
            low = low.min(b - a);
        }
        sup_diffs.push(sup);
        min_increments.push(low);
    }
    let ratios = sup_diffs.windows(2).map(|w| w[1] / w[0]).collect();
    Ok(ConvergenceReport {
        mesh_sizes: n_list.to_vec(),
        monotone_ok: min_increments.iter().all(|&d| d >= -MONOTONE_TOL),
        sup_diffs,
        min_increments,
        ratios,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StrategyKind {
    Optimal,
    Barrier,
    Linear,
    Constant,
    NoEmission,
}

impl StrategyKind {
    pub const ALL: [StrategyKind; 5] = [
        StrategyKind::Optimal,
        StrategyKind::Barrier,
        StrategyKind::Linear,
        StrategyKind::Constant,
        StrategyKind::NoEmission,
    ];

    pub fn name(self) -> &'static str {
        match self {
            StrategyKind::Optimal => "optimal",
            StrategyKind::Barrier => "barrier",
            StrategyKind::Linear => "linear",
            StrategyKind::Constant => "constant",
            StrategyKind::NoEmission => "no_emission",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Analytic,
    MonteCarlo,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub strategy: StrategyKind,
    pub method: Method,
    pub value: f64,
    pub half_width_95: Option<f64>,
    /// Mean depletion time of the paths that deplete before the horizon.
    pub depletion_time: Option<f64>,
    pub depletion_half_width_95: Option<f64>,
    pub censored_fraction: Option<f64>,
    /// `value / unconstrained barrier value`.
    pub efficiency: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonTable {
    pub x0: f64,
    pub barrier: f64,
    pub barrier_value: f64,
    pub rows: Vec<ComparisonRow>,
}

impl ComparisonTable {
    pub fn row(&self, strategy: StrategyKind, method: Method) -> Option<&ComparisonRow> {
        self.rows.iter().find(|r| r.strategy == strategy && r.method == method)
    }

    /// Pairs violating `no_emission <= linear <= optimal <= barrier`, allowing
    /// for the Monte Carlo half-widths.
    pub fn ordering_violations(&self) -> Vec<(StrategyKind, StrategyKind)> {
        let chain = [
            StrategyKind::NoEmission,
            StrategyKind::Linear,
            StrategyKind::Optimal,
            StrategyKind::Barrier,
        ];
        let mut out = Vec::new();
        for (i, &lo) in chain.iter().enumerate() {
            for &hi in &chain[i + 1..] {
                for a in self.rows.iter().filter(|r| r.strategy == lo) {
                    for b in self.rows.iter().filter(|r| r.strategy == hi) {
                        let slack = a.half_width_95.unwrap_or(0.0) + b.half_width_95.unwrap_or(0.0);
                        if a.value > b.value + slack && !out.contains(&(lo, hi)) {
                            out.push((lo, hi));
                        }
                    }
                }
            }
        }
        out
    }
}

fn mc_row(strategy: StrategyKind, run: &McRun, reference: f64) -> ComparisonRow {
    ComparisonRow {
        strategy,
        method: Method::MonteCarlo,
        value: run.value.mean,
        half_width_95: Some(run.value.half_width_95),
        depletion_time: run.depletion.depleted.map(|d| d.mean),
        depletion_half_width_95: run.depletion.depleted.map(|d| d.half_width_95),
        censored_fraction: Some(run.depletion.censored_fraction),
        efficiency: run.value.mean / reference,
    }
}

fn analytic_row(strategy: StrategyKind, value: f64, reference: f64) -> ComparisonRow {
    ComparisonRow {
        strategy,
        method: Method::Analytic,
        value,
        half_width_95: None,
        depletion_time: None,
        depletion_half_width_95: None,
        censored_fraction: None,
        efficiency: value / reference,
    }
}

/// Value of each requested strategy from budget `x0`, relative to the
/// unconstrained barrier benchmark. `surface` supplies the optimal policy
/// and must be solved for `params`.
pub fn compare_strategies(
    params: &ModelParams,
    surface: &ValueSurface,
    x0: f64,
    cfg: &McConfig,
    strategies: &[StrategyKind],
) -> Result<ComparisonTable> {
    params.require_diffusion()?;
    if strategies.is_empty() {
        return Err(Error::InvalidParameter {
            name: "strategies",
            value: 0.0,
            reason: "nothing to compare",
        });
    }
    let barrier = optimal_barrier(params)?;
    let reference = barrier.value(x0);
    let mut rows = Vec::new();
    for &kind in strategies {
        match kind {
            StrategyKind::Optimal => {
                let (v, _) = surface.surface_eval(x0, surface.top())?;
                rows.push(analytic_row(kind, v, reference));
                let run = simulate(params, &StrategySpec::MultiThreshold(surface), x0, cfg)?;
                rows.push(mc_row(kind, &run, reference));
            }
            StrategyKind::Barrier => rows.push(analytic_row(kind, reference, reference)),
            StrategyKind::Linear => {
                let (slope, _) = linear_schedule(params.c_bar, x0)?;
                let strategy = StrategySpec::LinearSchedule { c_bar: params.c_bar, slope };
                let run = simulate(params, &strategy, x0, cfg)?;
                rows.push(mc_row(kind, &run, reference));
            }
            StrategyKind::Constant => {
                let v = constant_rate_value(params, params.c_bar, x0)?;
                rows.push(analytic_row(kind, v, reference));
                let run = simulate(params, &StrategySpec::ConstantRate(params.c_bar), x0, cfg)?;
                rows.push(mc_row(kind, &run, reference));
            }
            StrategyKind::NoEmission => {
                rows.push(analytic_row(kind, no_emission_value(params, x0)?, reference));
            }
        }
    }
    Ok(ComparisonTable { x0, barrier: barrier.b, barrier_value: reference, rows })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn moderate(mu: f64) -> ModelParams {
        ModelParams::new(mu, 1.0, 0.1, 1.5, 2.0).unwrap()
    }

    #[test]
    fn grid_endpoints() {
        let g = default_x_grid(10.0);
        assert_eq!(g.len(), 200);
        assert_eq!(g[0], 0.0);
        assert_eq!(g[199], 10.0);
    }

    #[test]
    fn rejects_non_nested_meshes() {
        let p = moderate(1.0);
        let x = default_x_grid(10.0);
        assert_eq!(
            convergence_study(&p, &[25, 40], &x),
            Err(Error::NonNestedMeshes(vec![25, 40]))
        );
        assert!(matches!(convergence_study(&p, &[50, 25], &x), Err(Error::NonNestedMeshes(_))));
        assert!(convergence_study(&p, &[], &x).is_err());
    }

    #[test]
    fn single_mesh_is_vacuous() {
        let r = convergence_study(&moderate(1.0), &[25], &default_x_grid(10.0)).unwrap();
        assert!(r.sup_diffs.is_empty());
        assert!(r.monotone_ok);
    }

    #[test]
    fn refinement_is_monotone() {
        let r = convergence_study(&moderate(1.0), &[10, 20, 40], &default_x_grid(10.0)).unwrap();
        assert!(r.monotone_ok, "{r:?}");
        assert!(r.sup_diffs_decreasing(), "{r:?}");
    }

    #[test]
    fn comparison_table_rows() {
        let p = moderate(0.0);
        let s = solve_uniform(p, 50).unwrap();
        let cfg = McConfig { dt: 1e-2, n_paths: 2000, seed: 3, ..McConfig::default() };
        let t = compare_strategies(&p, &s, 5.0, &cfg, &StrategyKind::ALL).unwrap();
        assert_eq!(t.rows.len(), 7);
        let none = t.row(StrategyKind::NoEmission, Method::Analytic).unwrap();
        assert_eq!(none.value, no_emission_value(&p, 5.0).unwrap());
        assert_eq!(t.row(StrategyKind::Barrier, Method::Analytic).unwrap().efficiency, 1.0);
        // never emitting beats the linear schedule here, the rest of the chain holds
        assert_eq!(
            t.ordering_violations(),
            vec![(StrategyKind::NoEmission, StrategyKind::Linear)],
            "{t:?}"
        );
        assert!(compare_strategies(&p, &s, 5.0, &cfg, &[]).is_err());
    }
}
