//! Model parameters, the characteristic roots of the constant-rate generator
//! and the single-rate closed-form value functions.
//!
//! The budget follows `dX = (mu - C) dt + sigma dW` and a strategy earns
//! `(C + lambda)` per unit time, discounted at rate `q`, until the budget is
//! depleted. For a constant rate `c` the bounded solutions of
//!
//! ```text
//! L^c(W) = sigma^2/2 W'' + (mu - c) W' - q W + c + lambda = 0
//! ```
//!
//! are `(c + lambda)/q * (1 - a exp(theta1(c) x))`, where `theta1 < 0 < theta2`
//! are the roots of `sigma^2/2 z^2 + (mu - c) z - q = 0`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Below this exponent `exp` only produces subnormal noise, so it is treated as 0.
const EXP_UNDERFLOW: f64 = -745.0;

#[inline]
pub(crate) fn clamped_exp(t: f64) -> f64 {
    if t < EXP_UNDERFLOW {
        0.0
    } else {
        t.exp()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// Drift of the budget per unit time.
    pub mu: f64,
    /// Volatility per square-root time. Zero selects the deterministic mode.
    pub sigma: f64,
    /// Discount rate.
    pub q: f64,
    /// Reward per unit time while the budget is undepleted.
    pub lambda: f64,
    /// Maximum emission rate.
    pub c_bar: f64,
}

impl ModelParams {
    pub fn new(mu: f64, sigma: f64, q: f64, lambda: f64, c_bar: f64) -> Result<Self> {
        let params = Self {
            mu,
            sigma,
            q,
            lambda,
            c_bar,
        };
        params.validate()?;
        Ok(params)
    }

    /// Every violated invariant, in field order. Empty means valid.
    pub fn violations(&self) -> Vec<Error> {
        let mut out = Vec::new();
        let mut check = |ok: bool, name, value, reason| {
            if !ok {
                out.push(Error::InvalidParameter {
                    name,
                    value,
                    reason,
                });
            }
        };
        check(self.mu.is_finite(), "mu", self.mu, "must be finite");
        check(
            self.sigma.is_finite() && self.sigma >= 0.0,
            "sigma",
            self.sigma,
            "must be finite and >= 0",
        );
        check(
            self.q.is_finite() && self.q > 0.0,
            "q",
            self.q,
            "must be finite and > 0",
        );
        check(
            self.lambda.is_finite() && self.lambda >= 0.0,
            "lambda",
            self.lambda,
            "must be finite and >= 0",
        );
        check(
            self.c_bar.is_finite() && self.c_bar > 0.0,
            "c_bar",
            self.c_bar,
            "must be finite and > 0",
        );
        out
    }

    pub fn validate(&self) -> Result<()> {
        match self.violations().into_iter().next() {
            Some(err) => Err(err),
            None => Ok(()),
        }
    }

    pub fn is_deterministic(&self) -> bool {
        self.sigma == 0.0
    }

    pub(crate) fn require_diffusion(&self) -> Result<()> {
        if self.is_deterministic() {
            Err(Error::DegenerateVolatility)
        } else {
            Ok(())
        }
    }

    /// Discounted value of earning `c + lambda` forever.
    pub fn perpetuity(&self, c: f64) -> f64 {
        (c + self.lambda) / self.q
    }

    /// The global upper bound `(c_bar + lambda)/q` of every value function.
    pub fn value_ceiling(&self) -> f64 {
        self.perpetuity(self.c_bar)
    }

    pub fn with_mu(&self, mu: f64) -> Self {
        Self { mu, ..*self }
    }

    pub fn with_lambda(&self, lambda: f64) -> Self {
        Self { lambda, ..*self }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Roots {
    pub theta1: f64,
    pub theta2: f64,
}

/// Roots of `sigma^2/2 z^2 + (mu - c) z - q = 0`.
///
/// The root whose closed form involves a difference of nearly equal terms is
/// recovered from the product `theta1 * theta2 = -2q/sigma^2` instead.
pub fn characteristic_roots(params: &ModelParams, c: f64) -> Result<Roots> {
    params.require_diffusion()?;
    check_rate(c)?;
    Ok(roots_unchecked(params, c))
}

pub(crate) fn roots_unchecked(params: &ModelParams, c: f64) -> Roots {
    let s2 = params.sigma * params.sigma;
    let d = c - params.mu;
    let r = (d * d + 2.0 * params.q * s2).sqrt();
    if d > 0.0 {
        Roots {
            theta1: -2.0 * params.q / (d + r),
            theta2: (d + r) / s2,
        }
    } else {
        Roots {
            theta1: (d - r) / s2,
            theta2: 2.0 * params.q / (r - d),
        }
    }
}

fn check_rate(c: f64) -> Result<()> {
    if c.is_finite() && c >= 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name: "c",
            value: c,
            reason: "emission rate must be finite and >= 0",
        })
    }
}

fn check_budget(x: f64) -> Result<()> {
    if x.is_finite() && x >= 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name: "x",
            value: x,
            reason: "budget must be finite and >= 0",
        })
    }
}

/// A bounded solution `level * (1 - coeff * exp(theta * x))` of `L^c(W) = 0`,
/// with `level = (c + lambda)/q` and `theta = theta1(c)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundedSolution {
    pub level: f64,
    pub coeff: f64,
    pub theta: f64,
}

impl BoundedSolution {
    #[inline]
    pub fn value(&self, x: f64) -> f64 {
        self.level * (1.0 - self.coeff * clamped_exp(self.theta * x))
    }

    #[inline]
    pub fn slope(&self, x: f64) -> f64 {
        -self.theta * self.level * self.coeff * clamped_exp(self.theta * x)
    }

    #[inline]
    pub fn curvature(&self, x: f64) -> f64 {
        -self.theta * self.theta * self.level * self.coeff * clamped_exp(self.theta * x)
    }

    /// `(value, first derivative, second derivative)` at `x`.
    #[inline]
    pub fn derivatives(&self, x: f64) -> (f64, f64, f64) {
        let e = self.level * self.coeff * clamped_exp(self.theta * x);
        (
            self.level - e,
            -self.theta * e,
            -self.theta * self.theta * e,
        )
    }
}

/// The constant-rate value `W^c` as a closed form with its derivatives.
pub fn constant_rate_solution(params: &ModelParams, c: f64) -> Result<BoundedSolution> {
    let roots = characteristic_roots(params, c)?;
    Ok(BoundedSolution {
        level: params.perpetuity(c),
        coeff: 1.0,
        theta: roots.theta1,
    })
}

/// Value of emitting at constant rate `c` until depletion:
/// `(c + lambda)/q * (1 - exp(theta1(c) x))`.
pub fn constant_rate_value(params: &ModelParams, c: f64, x: f64) -> Result<f64> {
    check_budget(x)?;
    Ok(constant_rate_solution(params, c)?.value(x))
}

/// Value of never emitting, `lambda/q * (1 - exp(theta1(0) x))`.
pub fn no_emission_value(params: &ModelParams, x: f64) -> Result<f64> {
    constant_rate_value(params, 0.0, x)
}

/// Rates for which the optimal threshold is known to vanish.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "c_crit", rename_all = "snake_case")]
pub enum ZeroThresholdRegion {
    /// `lambda + mu <= 0`: the rate is never reduced.
    AllRatesZeroThreshold,
    /// Zero threshold for every `c` in `[0, c_crit]`.
    ZeroUpTo(f64),
    /// `lambda > sqrt(mu^2 + 2 q sigma^2)`: no interval with zero threshold.
    NoZeroInterval,
}

impl ZeroThresholdRegion {
    /// Whether the rate `c` lies in the zero-threshold region. The upper end
    /// carries a relative slack of a few ulps so that a grid rate computed as
    /// `c_bar * i / n` still matches a critical rate it equals mathematically.
    pub fn covers(&self, c: f64) -> bool {
        match *self {
            Self::AllRatesZeroThreshold => true,
            Self::ZeroUpTo(c_crit) => c <= c_crit + 8.0 * f64::EPSILON * c_crit.abs(),
            Self::NoZeroInterval => false,
        }
    }
}

pub fn zero_threshold_bound(params: &ModelParams) -> ZeroThresholdRegion {
    let ModelParams {
        mu,
        sigma,
        q,
        lambda,
        ..
    } = *params;
    if lambda + mu <= 0.0 {
        return ZeroThresholdRegion::AllRatesZeroThreshold;
    }
    let spread = mu * mu + 2.0 * q * sigma * sigma;
    if lambda * lambda <= spread {
        ZeroThresholdRegion::ZeroUpTo((spread - lambda * lambda) / (2.0 * (lambda + mu)))
    } else {
        ZeroThresholdRegion::NoZeroInterval
    }
}

/// Optimal value for `sigma = 0`, `mu >= 0`: emit `c` until the budget is
/// exhausted at `x/(c - mu)`, then continue forever at the sustainable rate `mu`.
pub fn deterministic_limit_value(params: &ModelParams, x: f64, c: f64) -> Result<f64> {
    if !params.is_deterministic() {
        return Err(Error::NotDeterministic(params.sigma));
    }
    if params.mu < 0.0 {
        return Err(Error::InvalidParameter {
            name: "mu",
            value: params.mu,
            reason: "deterministic limit is only defined for mu >= 0",
        });
    }
    check_budget(x)?;
    check_rate(c)?;
    let perpetuity = params.perpetuity(c);
    if c <= params.mu {
        return Ok(perpetuity);
    }
    let excess = c - params.mu;
    Ok(perpetuity - excess / params.q * clamped_exp(-params.q * x / excess))
}

/// `sigma^2/2 vxx + (mu - c) vx - q v + c + lambda`.
pub fn generator_apply(params: &ModelParams, c: f64, v: f64, vx: f64, vxx: f64) -> f64 {
    0.5 * params.sigma * params.sigma * vxx + (params.mu - c) * vx - params.q * v + c + params.lambda
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn strong_reward() -> ModelParams {
        ModelParams::new(3.0, 2.0, 0.1, 4.0, 4.0).unwrap()
    }

    #[test]
    fn roots_match_high_precision_values() {
        // d = 1, r = sqrt(1.8); theta = (1 -+ sqrt(1.8)) / 4
        let r = characteristic_roots(&strong_reward(), 4.0).unwrap();
        assert_relative_eq!(r.theta1, -0.085_410_196_624_968_45, max_relative = 1e-12);
        assert_relative_eq!(r.theta2, 0.585_410_196_624_968_5, max_relative = 1e-12);
    }

    #[test]
    fn roots_at_zero_excess_drift_are_symmetric() {
        let p = strong_reward();
        let r = characteristic_roots(&p, p.mu).unwrap();
        let expect = (2.0 * p.q).sqrt() / p.sigma;
        assert_relative_eq!(r.theta1, -expect, max_relative = 1e-14);
        assert_relative_eq!(r.theta2, expect, max_relative = 1e-14);
    }

    #[test]
    fn roots_stay_accurate_far_from_the_drift() {
        let p = ModelParams::new(0.0, 1e-3, 0.1, 1.0, 1e4).unwrap();
        for c in [1e4, 0.0] {
            let r = characteristic_roots(&p, c).unwrap();
            let s2 = p.sigma * p.sigma;
            for theta in [r.theta1, r.theta2] {
                let poly = 0.5 * s2 * theta * theta + (p.mu - c) * theta - p.q;
                let scale = (0.5 * s2 * theta * theta)
                    .abs()
                    .max(((p.mu - c) * theta).abs())
                    .max(p.q);
                assert!((poly / scale).abs() < 1e-10, "c={c} theta={theta}");
            }
            assert_relative_eq!(r.theta1 * r.theta2, -2.0 * p.q / s2, max_relative = 1e-10);
        }
    }

    #[test]
    fn diffusion_operations_reject_zero_sigma() {
        let p = ModelParams::new(1.0, 0.0, 0.1, 1.5, 2.0).unwrap();
        assert_eq!(characteristic_roots(&p, 1.0), Err(Error::DegenerateVolatility));
        assert_eq!(constant_rate_value(&p, 1.0, 1.0), Err(Error::DegenerateVolatility));
        assert_eq!(no_emission_value(&p, 1.0), Err(Error::DegenerateVolatility));
    }

    #[test]
    fn constant_rate_value_examples() {
        let p = strong_reward();
        assert_eq!(constant_rate_value(&p, 4.0, 0.0).unwrap(), 0.0);
        // 80 * (1 - exp(5 * theta1(4)))
        assert_relative_eq!(
            constant_rate_value(&p, 4.0, 5.0).unwrap(),
            27.805_576_924_390_784,
            max_relative = 1e-9
        );
        assert_relative_eq!(constant_rate_value(&p, 4.0, 1e6).unwrap(), 80.0);
    }

    #[test]
    fn no_emission_value_examples() {
        let p = strong_reward();
        assert_eq!(no_emission_value(&p, 0.0).unwrap(), 0.0);
        // theta1(0) = (-3 - sqrt(9.8)) / 4
        assert_relative_eq!(
            no_emission_value(&p, 5.0).unwrap(),
            39.981_206_411_536_91,
            max_relative = 1e-9
        );
        let zero = p.with_lambda(0.0);
        for x in [0.0, 0.5, 3.0, 50.0] {
            assert_eq!(no_emission_value(&zero, x).unwrap(), 0.0);
        }
        assert_eq!(
            no_emission_value(&p, 2.5).unwrap(),
            constant_rate_value(&p, 0.0, 2.5).unwrap()
        );
    }

    #[test]
    fn zero_threshold_regions() {
        let p = ModelParams::new(1.0, 1.0, 0.1, 0.0, 2.0).unwrap();
        match zero_threshold_bound(&p) {
            ZeroThresholdRegion::ZeroUpTo(c) => assert_relative_eq!(c, 0.6, max_relative = 1e-15),
            other => panic!("unexpected {other:?}"),
        }
        for sigma in [0.3, 1.0, 4.0] {
            let p = ModelParams::new(-1.0, sigma, 0.2, 0.5, 2.0).unwrap();
            assert_eq!(
                zero_threshold_bound(&p),
                ZeroThresholdRegion::AllRatesZeroThreshold
            );
        }
        assert_eq!(
            zero_threshold_bound(&strong_reward()),
            ZeroThresholdRegion::NoZeroInterval
        );
    }

    #[test]
    fn zero_region_covers_rounded_grid_rate() {
        let region = ZeroThresholdRegion::ZeroUpTo((1.0 + 0.2) / 2.0);
        assert!(region.covers(2.0 * 150.0 / 500.0));
        assert!(!region.covers(2.0 * 151.0 / 500.0));
    }

    #[test]
    fn deterministic_limit_examples() {
        let p = ModelParams::new(1.0, 0.0, 0.1, 1.5, 2.0).unwrap();
        for x in [0.0, 1.0, 40.0] {
            assert_relative_eq!(deterministic_limit_value(&p, x, 0.5).unwrap(), 20.0);
            assert_relative_eq!(deterministic_limit_value(&p, x, 1.0).unwrap(), 25.0);
        }
        assert_relative_eq!(
            deterministic_limit_value(&p, 0.0, 2.0).unwrap(),
            (p.mu + p.lambda) / p.q,
            max_relative = 1e-14
        );
        assert_relative_eq!(
            deterministic_limit_value(&p, 5.0, 2.0).unwrap(),
            35.0 - 10.0 * (-0.5f64).exp(),
            max_relative = 1e-14
        );
        assert!(deterministic_limit_value(&strong_reward(), 1.0, 1.0).is_err());
        assert!(deterministic_limit_value(&p.with_mu(-0.5), 1.0, 1.0).is_err());
    }

    #[test]
    fn generator_examples() {
        let p = ModelParams::new(1.0, 1.0, 0.1, 1.5, 2.0).unwrap();
        assert_eq!(generator_apply(&p, 1.0, 0.0, 0.0, 0.0), 2.5);
        assert!(generator_apply(&p, 1.0, p.perpetuity(1.0), 0.0, 0.0).abs() < 1e-12);
        let w = constant_rate_solution(&p, 1.3).unwrap();
        for x in [0.0, 0.1, 1.0, 7.5, 30.0] {
            let (v, vx, vxx) = w.derivatives(x);
            assert!(generator_apply(&p, 1.3, v, vx, vxx).abs() < 1e-9);
        }
    }

    #[test]
    fn validation_reports_every_violation() {
        let bad = ModelParams {
            mu: 0.0,
            sigma: -1.0,
            q: 0.0,
            lambda: -2.0,
            c_bar: 0.0,
        };
        assert_eq!(bad.violations().len(), 4);
        assert!(ModelParams::new(0.0, 1.0, 0.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn closed_form_clamps_underflow() {
        let p = strong_reward();
        let w = constant_rate_solution(&p, 4.0).unwrap();
        assert_eq!(w.slope(1e5), 0.0);
        assert_eq!(w.value(1e5), 80.0);
    }
}
