//! Monte Carlo simulation of the controlled budget under a fixed strategy.
//!
//! Paths are stepped with Euler-Maruyama on a uniform grid and stopped at the
//! first grid time with `X <= 0` or at a horizon beyond which the discounted
//! payoff is negligible. Every path draws from its own ChaCha8 stream keyed by
//! `(seed, path_index)`, and the sample moments are merged chunk by chunk in
//! index order, so results do not depend on the thread schedule.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::surface::ValueSurface;

/// Paths per reduction chunk. Fixed so the merge order is part of the contract.
const CHUNK: u64 = 1024;

/// Bridge crossing probabilities below `exp(-BRIDGE_CUTOFF)` are skipped.
const BRIDGE_CUTOFF: f64 = 40.0;

#[derive(Debug, Clone, Copy)]
pub enum StrategySpec<'a> {
    /// Optimal grid policy: drop to the next level while `x <= z*(c_k)`.
    MultiThreshold(&'a ValueSurface),
    ConstantRate(f64),
    /// Deterministic rate `max(c_bar - slope * t, 0)`.
    LinearSchedule { c_bar: f64, slope: f64 },
    /// Emit `c_bar` while `x >= b`, nothing below. Not ratcheting.
    Barrier { b: f64, c_bar: f64 },
    NoEmission,
}

impl StrategySpec<'_> {
    /// Whether realized rate paths must be non-increasing.
    pub fn is_ratcheting(&self) -> bool {
        !matches!(self, StrategySpec::Barrier { .. })
    }

    pub fn label(&self) -> &'static str {
        match self {
            StrategySpec::MultiThreshold(_) => "multi_threshold",
            StrategySpec::ConstantRate(_) => "constant_rate",
            StrategySpec::LinearSchedule { .. } => "linear_schedule",
            StrategySpec::Barrier { .. } => "barrier",
            StrategySpec::NoEmission => "no_emission",
        }
    }

    fn validate(&self, params: &ModelParams) -> Result<()> {
        let bad = |name, value, reason| Err(Error::InvalidParameter { name, value, reason });
        match *self {
            StrategySpec::MultiThreshold(s) if s.params() != params => Err(Error::NotApplicable(
                "surface was solved for different model parameters",
            )),
            StrategySpec::MultiThreshold(s) if !s.is_complete() => {
                Err(Error::NotApplicable("surface is not fully solved"))
            }
            StrategySpec::ConstantRate(c) if !(c.is_finite() && c >= 0.0) => {
                bad("c", c, "rate must be finite and >= 0")
            }
            StrategySpec::LinearSchedule { c_bar, .. } if !(c_bar.is_finite() && c_bar >= 0.0) => {
                bad("c_bar", c_bar, "rate must be finite and >= 0")
            }
            StrategySpec::LinearSchedule { slope, .. } if !(slope.is_finite() && slope >= 0.0) => {
                bad("slope", slope, "slope must be finite and >= 0")
            }
            StrategySpec::Barrier { b, .. } if !(b.is_finite() && b >= 0.0) => {
                bad("b", b, "barrier must be finite and >= 0")
            }
            StrategySpec::Barrier { c_bar, .. } if !(c_bar.is_finite() && c_bar >= 0.0) => {
                bad("c_bar", c_bar, "rate must be finite and >= 0")
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct McConfig {
    pub dt: f64,
    pub n_paths: u64,
    pub seed: u64,
    /// Absolute bound on the neglected discounted tail; `None` means
    /// `1e-6 * (c_bar + lambda) / q`.
    pub tail_tol: Option<f64>,
    /// Explicit horizon, overriding the one implied by `tail_tol`.
    pub horizon: Option<f64>,
    /// Brownian-bridge check for crossings between grid points.
    pub bridge: bool,
}

impl Default for McConfig {
    fn default() -> Self {
        Self {
            dt: 1e-3,
            n_paths: 100_000,
            seed: 0,
            tail_tol: None,
            horizon: None,
            bridge: true,
        }
    }
}

impl McConfig {
    pub fn violations(&self) -> Vec<Error> {
        let mut out = Vec::new();
        if !(self.dt.is_finite() && self.dt > 0.0) {
            out.push(Error::InvalidParameter { name: "dt", value: self.dt, reason: "must be finite and > 0" });
        }
        if self.n_paths == 0 {
            out.push(Error::InvalidParameter { name: "n_paths", value: 0.0, reason: "must be >= 1" });
        }
        if let Some(t) = self.tail_tol {
            if !(t.is_finite() && t > 0.0) {
                out.push(Error::InvalidParameter { name: "tail_tol", value: t, reason: "must be finite and > 0" });
            }
        }
        if let Some(h) = self.horizon {
            if !(h.is_finite() && h > 0.0) {
                out.push(Error::InvalidParameter { name: "horizon", value: h, reason: "must be finite and > 0" });
            }
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        match self.violations().into_iter().next() {
            Some(e) => Err(e),
            None => Ok(()),
        }
    }

    /// Simulation horizon for `params`.
    pub fn horizon_for(&self, params: &ModelParams) -> f64 {
        if let Some(h) = self.horizon {
            return h;
        }
        let ceiling = params.value_ceiling();
        let tol = self.tail_tol.unwrap_or(1e-6 * ceiling);
        (ceiling / tol).ln().max(0.0) / params.q
    }

    /// Number of steps; the last grid time is at or past the horizon.
    pub fn steps_for(&self, params: &ModelParams) -> u64 {
        (self.horizon_for(params) / self.dt).floor() as u64 + 1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub mean: f64,
    /// `1.96 * sample_std / sqrt(n_paths)`; 0 when undefined.
    pub half_width_95: f64,
    pub n_paths: u64,
    /// Fewer than two samples, so no variance estimate.
    pub degenerate: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DepletionStats {
    /// Mean of `min(tau, T)`: censored paths contribute the horizon.
    pub censored: McEstimate,
    /// Mean of `tau` over the paths that deplete before the horizon; `None`
    /// if none do.
    pub depleted: Option<McEstimate>,
    pub censored_fraction: f64,
    pub horizon: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McRun {
    pub value: McEstimate,
    pub depletion: DepletionStats,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathOutcome {
    pub payoff: f64,
    /// Depletion time, or `None` if the path survived to the horizon.
    pub tau: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub t: f64,
    pub x: f64,
    pub c: f64,
}

/// Slope and zero-crossing time of the linear schedule that exhausts `x0`
/// exactly in the noiseless model.
pub fn linear_schedule(c_bar: f64, x0: f64) -> Result<(f64, f64)> {
    if !(x0.is_finite() && x0 > 0.0) {
        return Err(Error::InvalidParameter { name: "x0", value: x0, reason: "budget must be finite and > 0" });
    }
    if !(c_bar.is_finite() && c_bar > 0.0) {
        return Err(Error::InvalidParameter { name: "c_bar", value: c_bar, reason: "rate must be finite and > 0" });
    }
    Ok((c_bar * c_bar / (2.0 * x0), 2.0 * x0 / c_bar))
}

fn path_rng(seed: u64, path_index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(path_index);
    rng
}

enum Policy<'a> {
    Levels { surface: &'a ValueSurface, k: usize },
    Constant(f64),
    Linear { c_bar: f64, slope: f64 },
    Barrier { b: f64, c_bar: f64 },
}

impl Policy<'_> {
    #[inline]
    fn rate(&mut self, t: f64, x: f64) -> f64 {
        match self {
            Policy::Levels { surface, k } => {
                *k = surface.descend(x, *k);
                surface.grid().rate(*k)
            }
            Policy::Constant(c) => *c,
            Policy::Linear { c_bar, slope } => (*c_bar - *slope * t).max(0.0),
            Policy::Barrier { b, c_bar } => {
                if x >= *b {
                    *c_bar
                } else {
                    0.0
                }
            }
        }
    }
}

fn policy<'a>(strategy: &StrategySpec<'a>) -> Policy<'a> {
    match *strategy {
        StrategySpec::MultiThreshold(s) => Policy::Levels { surface: s, k: s.top() },
        StrategySpec::ConstantRate(c) => Policy::Constant(c),
        StrategySpec::LinearSchedule { c_bar, slope } => Policy::Linear { c_bar, slope },
        StrategySpec::Barrier { b, c_bar } => Policy::Barrier { b, c_bar },
        StrategySpec::NoEmission => Policy::Constant(0.0),
    }
}

fn check_inputs(params: &ModelParams, strategy: &StrategySpec<'_>, x0: f64, cfg: &McConfig) -> Result<()> {
    params.validate()?;
    if params.sigma <= 0.0 {
        return Err(Error::DegenerateVolatility);
    }
    if !(x0.is_finite() && x0 >= 0.0) {
        return Err(Error::InvalidParameter { name: "x0", value: x0, reason: "budget must be finite and >= 0" });
    }
    cfg.validate()?;
    strategy.validate(params)
}

/// Core stepping loop; `observe` sees `(t, x, c)` at every grid time.
fn run_path<F: FnMut(f64, f64, f64)>(
    params: &ModelParams,
    strategy: &StrategySpec<'_>,
    x0: f64,
    cfg: &McConfig,
    n_steps: u64,
    path_index: u64,
    mut observe: F,
) -> Result<PathOutcome> {
    let dt = cfg.dt;
    let sd = params.sigma * dt.sqrt();
    let drift_mu = params.mu * dt;
    let step_decay = (-params.q * dt).exp();
    let step_weight = (1.0 - step_decay) / params.q;
    let bridge_scale = 2.0 / (params.sigma * params.sigma * dt);
    let ratcheting = strategy.is_ratcheting();

    let mut rng = path_rng(cfg.seed, path_index);
    let mut policy = policy(strategy);
    let mut x = x0;
    let mut disc = 1.0;
    let mut payoff = 0.0;
    let mut prev_rate = f64::INFINITY;

    if x <= 0.0 {
        observe(0.0, x, policy.rate(0.0, x));
        return Ok(PathOutcome { payoff: 0.0, tau: Some(0.0) });
    }
    for step in 0..n_steps {
        let t = step as f64 * dt;
        let c = policy.rate(t, x);
        if ratcheting && c > prev_rate {
            return Err(Error::InadmissibleStrategy { path: path_index, step, from: prev_rate, to: c });
        }
        prev_rate = c;
        observe(t, x, c);
        payoff += (c + params.lambda) * disc * step_weight;
        disc *= step_decay;
        let z: f64 = rng.sample(StandardNormal);
        let x_next = x + drift_mu - c * dt + sd * z;
        let crossed = if x_next <= 0.0 {
            true
        } else if cfg.bridge {
            let e = x * x_next * bridge_scale;
            e < BRIDGE_CUTOFF && rng.random::<f64>() < (-e).exp()
        } else {
            false
        };
        x = x_next;
        if crossed {
            let tau = (step + 1) as f64 * dt;
            observe(tau, x, c);
            return Ok(PathOutcome { payoff, tau: Some(tau) });
        }
    }
    Ok(PathOutcome { payoff, tau: None })
}

/// Discounted payoff and depletion time of path `path_index`.
pub fn simulate_path(
    params: &ModelParams,
    strategy: &StrategySpec<'_>,
    x0: f64,
    cfg: &McConfig,
    path_index: u64,
) -> Result<PathOutcome> {
    check_inputs(params, strategy, x0, cfg)?;
    run_path(params, strategy, x0, cfg, cfg.steps_for(params), path_index, |_, _, _| {})
}

/// Grid trajectory `(t, X_t, C_t)` of one path, ending at depletion or the horizon.
pub fn trace_path(
    params: &ModelParams,
    strategy: &StrategySpec<'_>,
    x0: f64,
    cfg: &McConfig,
    path_index: u64,
) -> Result<Vec<TracePoint>> {
    check_inputs(params, strategy, x0, cfg)?;
    let mut out = Vec::new();
    run_path(params, strategy, x0, cfg, cfg.steps_for(params), path_index, |t, x, c| {
        out.push(TracePoint { t, x, c })
    })?;
    Ok(out)
}

/// Running mean and centered second moment.
#[derive(Debug, Clone, Copy, Default)]
struct Moments {
    n: u64,
    mean: f64,
    m2: f64,
}

impl Moments {
    fn push(&mut self, v: f64) {
        self.n += 1;
        let d = v - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (v - self.mean);
    }

    fn merge(self, other: Moments) -> Moments {
        if other.n == 0 {
            return self;
        }
        if self.n == 0 {
            return other;
        }
        let n = self.n + other.n;
        let d = other.mean - self.mean;
        let w = other.n as f64 / n as f64;
        Moments {
            n,
            mean: self.mean + d * w,
            m2: self.m2 + other.m2 + d * d * self.n as f64 * w,
        }
    }

    fn estimate(&self) -> McEstimate {
        if self.n < 2 {
            return McEstimate {
                mean: self.mean,
                half_width_95: 0.0,
                n_paths: self.n,
                degenerate: true,
            };
        }
        let var = self.m2 / (self.n - 1) as f64;
        McEstimate {
            mean: self.mean,
            half_width_95: 1.96 * (var / self.n as f64).sqrt(),
            n_paths: self.n,
            degenerate: false,
        }
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct ChunkStats {
    payoff: Moments,
    censored_tau: Moments,
    depleted_tau: Moments,
}

impl ChunkStats {
    fn merge(self, other: ChunkStats) -> ChunkStats {
        ChunkStats {
            payoff: self.payoff.merge(other.payoff),
            censored_tau: self.censored_tau.merge(other.censored_tau),
            depleted_tau: self.depleted_tau.merge(other.depleted_tau),
        }
    }
}

/// Simulate all paths once and return value and depletion statistics.
pub fn simulate(params: &ModelParams, strategy: &StrategySpec<'_>, x0: f64, cfg: &McConfig) -> Result<McRun> {
    check_inputs(params, strategy, x0, cfg)?;
    let n_steps = cfg.steps_for(params);
    let horizon = n_steps as f64 * cfg.dt;
    let n_chunks = cfg.n_paths.div_ceil(CHUNK);
    let chunks: Vec<Result<ChunkStats>> = (0..n_chunks)
        .into_par_iter()
        .map(|chunk| {
            let mut stats = ChunkStats::default();
            let end = ((chunk + 1) * CHUNK).min(cfg.n_paths);
            for path in chunk * CHUNK..end {
                let out = run_path(params, strategy, x0, cfg, n_steps, path, |_, _, _| {})?;
                stats.payoff.push(out.payoff);
                match out.tau {
                    Some(tau) => {
                        stats.censored_tau.push(tau);
                        stats.depleted_tau.push(tau);
                    }
                    None => stats.censored_tau.push(horizon),
                }
            }
            Ok(stats)
        })
        .collect();
    let mut total = ChunkStats::default();
    for chunk in chunks {
        total = total.merge(chunk?);
    }
    let survived = total.payoff.n - total.depleted_tau.n;
    Ok(McRun {
        value: total.payoff.estimate(),
        depletion: DepletionStats {
            censored: total.censored_tau.estimate(),
            depleted: (total.depleted_tau.n > 0).then(|| total.depleted_tau.estimate()),
            censored_fraction: survived as f64 / total.payoff.n as f64,
            horizon,
        },
    })
}

/// Mean discounted payoff over `cfg.n_paths` paths.
pub fn estimate_value(params: &ModelParams, strategy: &StrategySpec<'_>, x0: f64, cfg: &McConfig) -> Result<McEstimate> {
    Ok(simulate(params, strategy, x0, cfg)?.value)
}

/// Depletion-time statistics over `cfg.n_paths` paths.
pub fn depletion_stats(
    params: &ModelParams,
    strategy: &StrategySpec<'_>,
    x0: f64,
    cfg: &McConfig,
) -> Result<DepletionStats> {
    Ok(simulate(params, strategy, x0, cfg)?.depletion)
}
