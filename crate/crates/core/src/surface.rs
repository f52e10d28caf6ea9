//! The discrete rate grid and the recursive multi-threshold value surface.
//!
//! Level 0 is the no-emission value. Level `i` emits `c_i` while the budget is
//! above its threshold `z*(c_i)` and falls back to level `i - 1` at or below
//! it, so above the threshold the value is the bounded closed form
//! `(c_i + lambda)/q * (1 - a*(c_i) exp(theta1(c_i) x))`. Each threshold is the
//! smallest minimizer of
//!
//! ```text
//! G_i(y) = (1 - q/(c_i + lambda) * W(y, c_{i-1})) * exp(-theta1(c_i) y)
//! ```
//!
//! and `a*(c_i)` is the minimum value.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    roots_unchecked, zero_threshold_bound, BoundedSolution, ModelParams,
    ZeroThresholdRegion,
};
use crate::search::minimize_half_line;

/// Threshold accuracy of the per-level minimization.
pub const THRESHOLD_TOL: f64 = 1e-8;

/// Mesh used by the reference computations.
pub const DEFAULT_LEVELS: usize = 500;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateGrid {
    rates: Vec<f64>,
}

impl RateGrid {
    /// `n + 1` equally spaced rates from 0 to `c_bar`.
    pub fn uniform(c_bar: f64, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidParameter {
                name: "n",
                value: 0.0,
                reason: "grid needs at least one positive rate",
            });
        }
        if !(c_bar.is_finite() && c_bar > 0.0) {
            return Err(Error::InvalidParameter {
                name: "c_bar",
                value: c_bar,
                reason: "must be finite and > 0",
            });
        }
        let mut rates: Vec<f64> = (0..=n).map(|i| c_bar * i as f64 / n as f64).collect();
        rates[n] = c_bar;
        Ok(Self { rates })
    }

    /// Arbitrary grid; must start at exactly 0 and increase strictly.
    pub fn from_rates(rates: Vec<f64>) -> Result<Self> {
        if rates.len() < 2 || rates[0] != 0.0 {
            return Err(Error::InvalidParameter {
                name: "rates",
                value: rates.first().copied().unwrap_or(f64::NAN),
                reason: "grid must start at 0 and contain a positive rate",
            });
        }
        if let Some(w) = rates.windows(2).find(|w| !(w[1] > w[0]) || !w[1].is_finite()) {
            return Err(Error::InvalidParameter {
                name: "rates",
                value: w[1],
                reason: "rates must be finite and strictly increasing",
            });
        }
        Ok(Self { rates })
    }

    pub fn rates(&self) -> &[f64] {
        &self.rates
    }

    /// Index of the top level, `n`.
    pub fn top(&self) -> usize {
        self.rates.len() - 1
    }

    pub fn c_bar(&self) -> f64 {
        self.rates[self.top()]
    }

    pub fn rate(&self, i: usize) -> f64 {
        self.rates[i]
    }

    /// Largest spacing between consecutive rates.
    pub fn mesh_size(&self) -> f64 {
        self.rates
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(0.0, f64::max)
    }

    /// Index of the largest grid rate `<= c`.
    pub fn floor_index(&self, c: f64) -> usize {
        self.rates.partition_point(|&r| r <= c).saturating_sub(1)
    }
}

/// Solution of one level's minimization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LevelSolution {
    pub z_star: f64,
    pub a_star: f64,
}

/// Value surface of the multi-threshold strategy, possibly still under
/// construction (`solved < top`).
#[derive(Debug, Clone, PartialEq)]
pub struct ValueSurface {
    params: ModelParams,
    grid: RateGrid,
    theta1: Vec<f64>,
    z_star: Vec<f64>,
    a_star: Vec<f64>,
    solved: usize,
    zero_region: ZeroThresholdRegion,
    // (start, level): `level` is active at the latest solved level for x > start
    envelope: Vec<(f64, usize)>,
}

impl ValueSurface {
    /// A surface with only level 0 (no emission) solved.
    pub fn new(params: ModelParams, grid: RateGrid) -> Result<Self> {
        params.validate()?;
        params.require_diffusion()?;
        if (grid.c_bar() - params.c_bar).abs() > 1e-12 * params.c_bar {
            return Err(Error::InvalidParameter {
                name: "grid",
                value: grid.c_bar(),
                reason: "top grid rate must equal c_bar",
            });
        }
        let theta1 = grid
            .rates()
            .iter()
            .map(|&c| roots_unchecked(&params, c).theta1)
            .collect();
        let levels = grid.rates().len();
        let mut z_star = vec![0.0; levels];
        let mut a_star = vec![1.0; levels];
        z_star[0] = 0.0;
        a_star[0] = 1.0;
        Ok(Self {
            zero_region: zero_threshold_bound(&params),
            params,
            grid,
            theta1,
            z_star,
            a_star,
            solved: 0,
            envelope: vec![(f64::NEG_INFINITY, 0)],
        })
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn grid(&self) -> &RateGrid {
        &self.grid
    }

    pub fn top(&self) -> usize {
        self.grid.top()
    }

    /// Highest level solved so far.
    pub fn solved(&self) -> usize {
        self.solved
    }

    pub fn is_complete(&self) -> bool {
        self.solved == self.top()
    }

    /// Thresholds `z*(c_i)` for the solved levels.
    pub fn z_star(&self) -> &[f64] {
        &self.z_star[..=self.solved]
    }

    /// Coefficients `a*(c_i)` for the solved levels.
    pub fn a_star(&self) -> &[f64] {
        &self.a_star[..=self.solved]
    }

    pub fn theta1(&self) -> &[f64] {
        &self.theta1
    }

    pub fn zero_region(&self) -> ZeroThresholdRegion {
        self.zero_region
    }

    /// Closed form used by level `k` above its threshold.
    pub fn closed_form(&self, k: usize) -> BoundedSolution {
        BoundedSolution {
            level: self.params.perpetuity(self.grid.rate(k)),
            coeff: self.a_star[k],
            theta: self.theta1[k],
        }
    }

    fn check_level(&self, i: usize) -> Result<()> {
        if i > self.top() {
            return Err(Error::LevelOutOfRange {
                level: i,
                max: self.top(),
            });
        }
        if i > self.solved {
            return Err(Error::LevelOrder {
                requested: i,
                solved: self.solved,
            });
        }
        Ok(())
    }

    /// Level whose closed form is in force at `(x, c_i)`: descend while the
    /// budget is at or below the current level's threshold.
    pub fn active_level(&self, x: f64, i: usize) -> Result<usize> {
        self.check_level(i)?;
        if i == self.solved {
            return Ok(self.envelope_level(x));
        }
        Ok(self.descend(x, i))
    }

    #[inline]
    pub(crate) fn descend(&self, x: f64, mut k: usize) -> usize {
        while k > 0 && x <= self.z_star[k] {
            k -= 1;
        }
        k
    }

    #[inline]
    fn envelope_level(&self, x: f64) -> usize {
        let idx = self.envelope.partition_point(|&(start, _)| start < x);
        self.envelope[idx.saturating_sub(1)].1
    }

    /// `(W(x, c_i), dW/dx)`, by level descent.
    pub fn surface_eval(&self, x: f64, i: usize) -> Result<(f64, f64)> {
        if !(x.is_finite() && x >= 0.0) {
            return Err(Error::InvalidParameter {
                name: "x",
                value: x,
                reason: "budget must be finite and >= 0",
            });
        }
        self.check_level(i)?;
        let form = self.closed_form(self.descend(x, i));
        Ok((form.value(x), form.slope(x)))
    }

    /// `(W, W', W'')` at `(x, c_i)`; second derivative of the active piece.
    pub fn derivatives(&self, x: f64, i: usize) -> Result<(f64, f64, f64)> {
        let k = self.active_level(x, i)?;
        Ok(self.closed_form(k).derivatives(x))
    }

    /// Value at `(x, c_i)` without argument checks.
    #[inline]
    pub(crate) fn value_unchecked(&self, x: f64, i: usize) -> f64 {
        let k = if i == self.solved {
            self.envelope_level(x)
        } else {
            self.descend(x, i)
        };
        self.closed_form(k).value(x)
    }

    /// Value at `(x, c)` for an off-grid rate, using the largest grid rate `<= c`.
    pub fn value_at_rate(&self, x: f64, c: f64) -> Result<f64> {
        let i = self.grid.floor_index(c).min(self.solved);
        Ok(self.surface_eval(x, i)?.0)
    }

    /// The objective `G_i(y)` whose smallest minimizer is `z*(c_i)`.
    pub fn gi_evaluate(&self, i: usize, y: f64) -> Result<f64> {
        if i == 0 {
            return Err(Error::NotApplicable("G_i is defined for levels i >= 1"));
        }
        if i > self.top() {
            return Err(Error::LevelOutOfRange {
                level: i,
                max: self.top(),
            });
        }
        if i - 1 > self.solved {
            return Err(Error::LevelOrder {
                requested: i,
                solved: self.solved,
            });
        }
        if !(y.is_finite() && y >= 0.0) {
            return Err(Error::InvalidParameter {
                name: "y",
                value: y,
                reason: "candidate threshold must be finite and >= 0",
            });
        }
        Ok(self.gi_unchecked(i, y))
    }

    #[inline]
    fn gi_unchecked(&self, i: usize, y: f64) -> f64 {
        let scale = self.params.q / (self.grid.rate(i) + self.params.lambda);
        let lower = self.value_unchecked(y, i - 1);
        (1.0 - scale * lower) * (-self.theta1[i] * y).exp()
    }

    /// Smallest global minimizer of `G_i` and the minimum value.
    pub fn minimize_gi(&self, i: usize) -> Result<LevelSolution> {
        self.gi_evaluate(i, 0.0)?;
        if self.zero_region.covers(self.grid.rate(i)) {
            debug_assert!(
                self.gi_unchecked(i, 1e-6) >= 1.0 - 1e-12,
                "G_{i} decreases at the origin inside the zero-threshold region"
            );
            return Ok(LevelSolution {
                z_star: 0.0,
                a_star: 1.0,
            });
        }
        let min = minimize_half_line(|y| self.gi_unchecked(i, y), THRESHOLD_TOL).map_err(|e| {
            Error::AtLevel {
                level: i,
                source: Box::new(e),
            }
        })?;
        Ok(LevelSolution {
            z_star: min.x,
            a_star: min.fx,
        })
    }

    /// Solve the next level in ascending order.
    pub fn solve_next(&mut self) -> Result<LevelSolution> {
        let i = self.solved + 1;
        if i > self.top() {
            return Err(Error::LevelOutOfRange {
                level: i,
                max: self.top(),
            });
        }
        let sol = self.minimize_gi(i)?;
        self.z_star[i] = sol.z_star;
        self.a_star[i] = sol.a_star;
        while let Some(&(start, level)) = self.envelope.last() {
            if level != 0 && start >= sol.z_star {
                self.envelope.pop();
            } else {
                break;
            }
        }
        self.envelope.push((sol.z_star, i));
        self.solved = i;
        Ok(sol)
    }

    /// Thresholds that drop below an earlier level's threshold, as level indices.
    pub fn monotonicity_violations(&self) -> Vec<usize> {
        self.z_star()
            .windows(2)
            .enumerate()
            .filter(|(_, w)| w[1] < w[0])
            .map(|(k, _)| k + 1)
            .collect()
    }

    /// `U_i(x) - W(x, c_{i-1})`, where `U_i` is level i's closed form on the whole half-line.
    pub fn obstacle_gap(&self, i: usize, x: f64) -> Result<f64> {
        if i == 0 {
            return Err(Error::NotApplicable("level 0 has no obstacle"));
        }
        self.check_level(i)?;
        Ok(self.closed_form(i).value(x) - self.value_unchecked(x, i - 1))
    }

    /// Breakpoints of the top solved level: `(start, level)` pairs, level active for `x > start`.
    pub fn breakpoints(&self) -> &[(f64, usize)] {
        &self.envelope
    }
}

/// Solve every level of `grid` in ascending order.
pub fn solve_surface(params: ModelParams, grid: RateGrid) -> Result<ValueSurface> {
    let mut surface = ValueSurface::new(params, grid)?;
    while !surface.is_complete() {
        surface.solve_next()?;
    }
    Ok(surface)
}

/// Solve on the uniform grid with `n` steps.
pub fn solve_uniform(params: ModelParams, n: usize) -> Result<ValueSurface> {
    solve_surface(params, RateGrid::uniform(params.c_bar, n)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::no_emission_value;

    fn moderate(mu: f64) -> ModelParams {
        ModelParams::new(mu, 1.0, 0.1, 1.5, 2.0).unwrap()
    }

    #[test]
    fn uniform_grid_examples() {
        let g = RateGrid::uniform(2.0, 4).unwrap();
        assert_eq!(g.rates(), &[0.0, 0.5, 1.0, 1.5, 2.0]);
        let g = RateGrid::uniform(4.0, 500).unwrap();
        assert_eq!(g.rates().len(), 501);
        assert!((g.mesh_size() - 0.008).abs() < 1e-15);
        assert_eq!(g.c_bar(), 4.0);
        assert_eq!(RateGrid::uniform(2.0, 1).unwrap().rates(), &[0.0, 2.0]);
        assert!(RateGrid::uniform(2.0, 0).is_err());
    }

    #[test]
    fn custom_grid_validation() {
        assert!(RateGrid::from_rates(vec![0.0, 1.0, 0.5]).is_err());
        assert!(RateGrid::from_rates(vec![0.1, 1.0]).is_err());
        let g = RateGrid::from_rates(vec![0.0, 0.3, 2.0]).unwrap();
        assert_eq!(g.floor_index(0.29), 0);
        assert_eq!(g.floor_index(0.3), 1);
        assert_eq!(g.floor_index(5.0), 2);
    }

    #[test]
    fn gi_at_origin_is_one() {
        let s = ValueSurface::new(moderate(1.0), RateGrid::uniform(2.0, 500).unwrap()).unwrap();
        assert_eq!(s.gi_evaluate(1, 0.0).unwrap(), 1.0);
        assert!(s.gi_evaluate(1, 200.0).unwrap() > 1e3);
    }

    #[test]
    fn gi_level_one_matches_direct_composition() {
        // G_1(1) = (1 - q/(c_1 + lambda) * lambda/q (1 - e^{theta1(0)})) e^{-theta1(c_1)},
        // with the roots written out from the quadratic formula.
        let p = moderate(1.0);
        let s = ValueSurface::new(p, RateGrid::uniform(2.0, 500).unwrap()).unwrap();
        let c1 = 0.004_f64;
        let t0 = (-1.0 - (1.0f64 + 0.2).sqrt()) / 1.0;
        let t1 = (c1 - 1.0 - ((c1 - 1.0) * (c1 - 1.0) + 0.2).sqrt()) / 1.0;
        let lower = 1.5 / 0.1 * (1.0 - t0.exp());
        let expect = (1.0 - 0.1 / (c1 + 1.5) * lower) * (-t1).exp();
        let got = s.gi_evaluate(1, 1.0).unwrap();
        assert!((got - expect).abs() < 1e-13, "{got} vs {expect}");
        assert!((got - 1.011_194_690_787_246_4).abs() < 1e-12, "{got}");
    }

    #[test]
    fn level_order_is_enforced() {
        let s = ValueSurface::new(moderate(1.0), RateGrid::uniform(2.0, 10).unwrap()).unwrap();
        assert!(matches!(s.gi_evaluate(3, 1.0), Err(Error::LevelOrder { .. })));
        assert!(matches!(s.minimize_gi(2), Err(Error::LevelOrder { .. })));
        assert!(matches!(s.surface_eval(1.0, 1), Err(Error::LevelOrder { .. })));
        assert!(matches!(s.surface_eval(1.0, 11), Err(Error::LevelOutOfRange { .. })));
    }

    #[test]
    fn level_zero_is_no_emission_value() {
        let p = moderate(0.5);
        let s = solve_uniform(p, 50).unwrap();
        for k in 0..1000 {
            let x = k as f64 * 0.0123;
            let (v, _) = s.surface_eval(x, 0).unwrap();
            assert_eq!(v, no_emission_value(&p, x).unwrap());
        }
    }

    #[test]
    fn descent_and_breakpoints_agree() {
        let s = solve_uniform(moderate(1.0), 200).unwrap();
        let top = s.top();
        for k in 0..4000 {
            let x = k as f64 * 0.0025;
            assert_eq!(s.descend(x, top), s.envelope_level(x), "x = {x}");
        }
        for &z in s.z_star() {
            assert_eq!(s.descend(z, top), s.envelope_level(z));
        }
    }

    #[test]
    fn value_is_c1_across_thresholds() {
        let s = solve_uniform(moderate(1.0), 100).unwrap();
        for i in 1..=s.top() {
            let z = s.z_star()[i];
            if z <= 1e-6 {
                continue;
            }
            let (v_lo, d_lo) = s.surface_eval(z - 1e-7, i).unwrap();
            let (v_hi, d_hi) = s.surface_eval(z + 1e-7, i).unwrap();
            assert!((v_hi - v_lo - 2e-7 * d_lo).abs() < 1e-9, "level {i}: {v_lo} vs {v_hi}");
            assert!((d_hi - d_lo).abs() < 1e-4, "level {i}: {d_lo} vs {d_hi}");
        }
    }

    #[test]
    fn boundary_values() {
        let p = moderate(1.0);
        let s = solve_uniform(p, 100).unwrap();
        for i in 0..=s.top() {
            let (v0, d0) = s.surface_eval(0.0, i).unwrap();
            assert_eq!(v0, 0.0);
            assert!(d0 > 0.0);
            let (v_far, _) = s.surface_eval(400.0, i).unwrap();
            assert!((v_far - p.perpetuity(s.grid().rate(i))).abs() < 1e-6);
        }
    }

    #[test]
    fn zero_threshold_regime_for_zero_reward() {
        let p = ModelParams::new(1.0, 1.0, 0.1, 0.0, 2.0).unwrap();
        let s = solve_uniform(p, 500).unwrap();
        for (i, &c) in s.grid().rates().iter().enumerate() {
            if c <= 0.6 {
                assert_eq!(s.z_star()[i], 0.0, "c = {c}");
            } else if c > 0.6 + 2.0 / 500.0 {
                assert!(s.z_star()[i] > 0.0, "c = {c}");
            }
        }
    }

    #[test]
    fn never_reducing_when_drift_and_reward_are_negative() {
        let p = ModelParams::new(-1.0, 1.0, 0.1, 0.5, 2.0).unwrap();
        let s = solve_uniform(p, 20).unwrap();
        assert!(s.z_star().iter().all(|&z| z == 0.0));
        assert!(s.a_star().iter().all(|&a| a == 1.0));
    }

    #[test]
    fn minimizer_matches_brute_force_scan() {
        let mut s = ValueSurface::new(moderate(0.5), RateGrid::uniform(2.0, 40).unwrap()).unwrap();
        while !s.is_complete() {
            let i = s.solved() + 1;
            let sol = s.minimize_gi(i).unwrap();
            // independent scan at step 1e-4 over a generous range
            let mut best = (0.0, f64::INFINITY);
            for k in 0..=120_000 {
                let y = k as f64 * 1e-4;
                let g = s.gi_evaluate(i, y).unwrap();
                if g < best.1 {
                    best = (y, g);
                }
            }
            assert!((sol.z_star - best.0).abs() < 1e-3, "level {i}: {} vs {}", sol.z_star, best.0);
            assert!(sol.a_star <= best.1 + 1e-14);
            s.solve_next().unwrap();
        }
    }

    #[test]
    fn breakpoints_are_sorted_by_start() {
        let s = solve_uniform(moderate(-0.5), 60).unwrap();
        assert!(s
            .breakpoints()
            .windows(2)
            .all(|w| w[0].0 < w[1].0 && w[0].1 < w[1].1));
        assert_eq!(s.breakpoints().last().unwrap().1, s.top());
    }
}
