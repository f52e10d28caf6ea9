//! Optimality diagnostics for a solved surface: HJB complementarity residuals,
//! the first-order condition at interior thresholds, the coefficient band and
//! the threshold-curve inflection estimate.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::generator_apply;
use crate::surface::{ValueSurface, THRESHOLD_TOL};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Region {
    /// Budget above the threshold: emit at the level's rate.
    EmitRegion,
    /// Budget below the threshold: reduce to the level below.
    ReduceRegion,
    /// On the threshold itself, or at zero budget.
    Boundary,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HjbTolerance {
    /// Bound on `|L|` in the emit region and on `L` in the reduce region.
    pub residual: f64,
    /// Bound on `|W(x, c_i) - W(x, c_{i-1})|` in the reduce region.
    pub gap: f64,
}

impl Default for HjbTolerance {
    fn default() -> Self {
        Self {
            residual: 1e-8,
            gap: 1e-10,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HjbReport {
    pub level: usize,
    pub x: f64,
    /// `L^{c_i}` applied to `W(., c_i)` at `x`.
    pub generator_residual: f64,
    /// `W(x, c_i) - W(x, c_{i-1})`; absent at level 0.
    pub complementarity_gap: Option<f64>,
    pub classification: Region,
    pub ok: bool,
}

/// Check the discrete HJB complementarity at every level and every budget in
/// `x_grid`. Violations are reported through `ok`, not as errors.
pub fn hjb_verify(surface: &ValueSurface, x_grid: &[f64], tol: HjbTolerance) -> Vec<HjbReport> {
    let params = surface.params();
    let mut out = Vec::with_capacity(x_grid.len() * (surface.solved() + 1));
    for i in 0..=surface.solved() {
        let c = surface.grid().rate(i);
        let z = surface.z_star()[i];
        for &x in x_grid {
            let k = surface.descend(x, i);
            let (v, vx, vxx) = surface.closed_form(k).derivatives(x);
            let residual = generator_apply(params, c, v, vx, vxx);
            let gap = (i > 0).then(|| v - surface.value_unchecked(x, i - 1));
            let classification = if x <= 0.0 || (i > 0 && x == z) {
                Region::Boundary
            } else if i == 0 || x > z {
                Region::EmitRegion
            } else {
                Region::ReduceRegion
            };
            let ok = match classification {
                Region::Boundary => true,
                Region::EmitRegion => {
                    residual.abs() <= tol.residual && gap.map_or(true, |g| g >= -tol.gap)
                }
                Region::ReduceRegion => {
                    residual <= tol.residual && gap.map_or(true, |g| g.abs() <= tol.gap)
                }
            };
            out.push(HjbReport {
                level: i,
                x,
                generator_residual: residual,
                complementarity_gap: gap,
                classification,
                ok,
            });
        }
    }
    out
}

/// `theta1(c_i) W(z*, c_{i-1}) - dW/dx(z*, c_{i-1}) - theta1(c_i) (c_i + lambda)/q`,
/// which vanishes when `z*(c_i)` is an interior minimizer of `G_i`.
pub fn foc_residual(surface: &ValueSurface, i: usize) -> Result<f64> {
    if i == 0 {
        return Err(Error::NotApplicable("level 0 has no threshold"));
    }
    if i > surface.solved() {
        return Err(Error::LevelOrder {
            requested: i,
            solved: surface.solved(),
        });
    }
    let z = surface.z_star()[i];
    if z <= THRESHOLD_TOL {
        return Err(Error::NotApplicable(
            "first-order condition is an inequality at a zero threshold",
        ));
    }
    foc_residual_at(surface, i, z)
}

/// The first-order expression evaluated at an arbitrary candidate `y`.
pub fn foc_residual_at(surface: &ValueSurface, i: usize, y: f64) -> Result<f64> {
    let theta = surface.theta1()[i];
    let (w, wx) = surface.surface_eval(y, i - 1)?;
    let level = surface.params().perpetuity(surface.grid().rate(i));
    Ok(theta * w - wx - theta * level)
}

/// Levels (>= 1) whose coefficient leaves `0 < a* < exp(theta1 z*)`.
pub fn coefficient_band_violations(surface: &ValueSurface) -> Vec<usize> {
    (1..=surface.solved())
        .filter(|&i| {
            let a = surface.a_star()[i];
            let bound = (surface.theta1()[i] * surface.z_star()[i]).exp();
            !(a > 0.0 && a < bound)
        })
        .collect()
}

/// Levels (>= 1) whose coefficient leaves `0 < a* <= exp(-theta1 z*)`, the
/// band implied by `0 <= W(z*, c_{i-1}) < (c_i + lambda)/q`.
pub fn coefficient_upper_band_violations(surface: &ValueSurface) -> Vec<usize> {
    (1..=surface.solved())
        .filter(|&i| {
            let a = surface.a_star()[i];
            let bound = (-surface.theta1()[i] * surface.z_star()[i]).exp();
            !(a > 0.0 && a <= bound)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Inflection {
    /// Estimated rate at which the threshold curve turns from convex to concave.
    pub c_e: f64,
    /// Level index just above the change point.
    pub level: usize,
}

/// Rate at which the second difference of `z*(c)` changes sign from positive
/// to negative.
///
/// Uses the longest run of strictly positive thresholds; the change point is
/// the split maximizing (positive second differences before) plus (negative
/// after), which is robust to isolated sign flips from rounding.
pub fn threshold_inflection(surface: &ValueSurface) -> Option<Inflection> {
    let z = surface.z_star();
    let rates = surface.grid().rates();
    let (start, len) = longest_positive_run(z);
    if len < 5 {
        return None;
    }
    let run = &z[start..start + len];
    let second: Vec<f64> = run.windows(3).map(|w| w[2] - 2.0 * w[1] + w[0]).collect();
    let signs: Vec<i32> = second
        .iter()
        .map(|&d| if d > 0.0 { 1 } else if d < 0.0 { -1 } else { 0 })
        .collect();
    if !signs.contains(&1) || !signs.contains(&-1) {
        return None;
    }
    // score(k) = #pos in [0, k) + #neg in [k, m)
    let total_neg = signs.iter().filter(|&&s| s < 0).count() as i64;
    let mut best_k = 0;
    let mut best_score = i64::MIN;
    let (mut pos_before, mut neg_before) = (0i64, 0i64);
    for k in 0..=signs.len() {
        let score = pos_before + (total_neg - neg_before);
        if score > best_score {
            best_score = score;
            best_k = k;
        }
        if k < signs.len() {
            match signs[k] {
                1 => pos_before += 1,
                -1 => neg_before += 1,
                _ => {}
            }
        }
    }
    if best_k == 0 || best_k == signs.len() {
        return None;
    }
    // second[k] is centred on run index k + 1; the change lies between the
    // centres of second[best_k - 1] and second[best_k]
    let level = start + best_k + 1;
    let c_e = 0.5 * (rates[level - 1] + rates[level]);
    Some(Inflection { c_e, level })
}

fn longest_positive_run(z: &[f64]) -> (usize, usize) {
    let (mut best, mut cur_start, mut cur_len) = ((0, 0), 0, 0);
    for (k, &v) in z.iter().enumerate() {
        if v > 0.0 {
            if cur_len == 0 {
                cur_start = k;
            }
            cur_len += 1;
            if cur_len > best.1 {
                best = (cur_start, cur_len);
            }
        } else {
            cur_len = 0;
        }
    }
    best
}

/// Smallest `K` with `0 <= V(x2, c2) - V(x1, c1) <= K ((x2 - x1) + (c2 - c1))`
/// over the sampled pairs, where `c` indexes grid rates. `None` if some pair
/// violates the lower bound or every pair has zero separation.
pub fn lipschitz_estimate(surface: &ValueSurface, pairs: &[((f64, usize), (f64, usize))]) -> Option<f64> {
    let rates = surface.grid().rates();
    let mut k_max: f64 = 0.0;
    let mut any = false;
    for &((x1, i1), (x2, i2)) in pairs {
        let v1 = surface.surface_eval(x1, i1).ok()?.0;
        let v2 = surface.surface_eval(x2, i2).ok()?.0;
        let diff = v2 - v1;
        if diff < -1e-12 {
            return None;
        }
        let sep = (x2 - x1) + (rates[i2] - rates[i1]);
        if sep > 0.0 {
            any = true;
            k_max = k_max.max(diff / sep);
        }
    }
    any.then_some(k_max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModelParams;
    use crate::surface::solve_uniform;

    fn solved(mu: f64, n: usize) -> ValueSurface {
        solve_uniform(ModelParams::new(mu, 1.0, 0.1, 1.5, 2.0).unwrap(), n).unwrap()
    }

    fn x_grid() -> Vec<f64> {
        (0..200).map(|k| 10.0 * k as f64 / 199.0).collect()
    }

    #[test]
    fn hjb_holds_on_moderate_drift() {
        let s = solved(1.0, 100);
        let reports = hjb_verify(&s, &x_grid(), HjbTolerance::default());
        let bad: Vec<_> = reports.iter().filter(|r| !r.ok).collect();
        assert!(bad.is_empty(), "{:?}", &bad[..bad.len().min(5)]);
        for r in reports.iter().filter(|r| r.level == 0 && r.x > 0.0) {
            assert_eq!(r.classification, Region::EmitRegion);
            assert!(r.generator_residual.abs() < 1e-8);
        }
        assert!(reports
            .iter()
            .any(|r| r.classification == Region::ReduceRegion));
    }

    #[test]
    fn reduce_region_has_zero_gap() {
        let s = solved(0.0, 60);
        for r in hjb_verify(&s, &x_grid(), HjbTolerance::default()) {
            if r.classification == Region::ReduceRegion {
                assert!(r.complementarity_gap.unwrap().abs() < 1e-12);
                assert!(r.generator_residual <= 1e-8);
            }
        }
    }

    #[test]
    fn foc_vanishes_at_interior_thresholds() {
        let s = solved(0.5, 100);
        for i in 1..=s.top() {
            let level = s.params().perpetuity(s.grid().rate(i));
            let r = foc_residual(&s, i).unwrap();
            assert!(r.abs() < 1e-5 * level, "level {i}: {r}");
        }
    }

    #[test]
    fn foc_departs_monotonically_near_threshold() {
        let s = solved(1.0, 50);
        for i in [10, 25, 50] {
            let z = s.z_star()[i];
            let offsets = [0.0, 0.0025, 0.005, 0.0075, 0.01];
            let vals: Vec<f64> = offsets
                .iter()
                .map(|d| foc_residual_at(&s, i, z + d).unwrap().abs())
                .collect();
            assert!(vals.windows(2).all(|w| w[1] > w[0]), "level {i}: {vals:?}");
        }
    }

    #[test]
    fn foc_not_applicable_at_zero_threshold() {
        let s = solve_uniform(ModelParams::new(1.0, 1.0, 0.1, 0.0, 2.0).unwrap(), 20).unwrap();
        assert!(matches!(foc_residual(&s, 1), Err(Error::NotApplicable(_))));
    }

    #[test]
    fn inflection_none_without_positive_thresholds() {
        let s = solve_uniform(ModelParams::new(-1.0, 1.0, 0.1, 0.5, 2.0).unwrap(), 20).unwrap();
        assert_eq!(threshold_inflection(&s), None);
    }

    #[test]
    fn inflection_stable_under_refinement() {
        let coarse = threshold_inflection(&solved(1.0, 100)).unwrap();
        let fine = threshold_inflection(&solved(1.0, 400)).unwrap();
        assert!((coarse.c_e - fine.c_e).abs() < 0.05, "{coarse:?} {fine:?}");
    }

    #[test]
    fn upper_band_holds() {
        let s = solved(-0.5, 100);
        assert!(coefficient_upper_band_violations(&s).is_empty());
    }

    #[test]
    fn lipschitz_constant_is_finite() {
        let s = solved(1.0, 50);
        let mut pairs = Vec::new();
        for a in 0..20 {
            for b in a..20 {
                let (x1, x2) = (a as f64 * 0.4, b as f64 * 0.4);
                pairs.push(((x1, a.min(50)), (x2, (b * 2).min(50))));
            }
        }
        let k = lipschitz_estimate(&s, &pairs).unwrap();
        assert!(k.is_finite() && k > 0.0);
    }
}
