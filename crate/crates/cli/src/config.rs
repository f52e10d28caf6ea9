use std::path::Path;

use serde::{Deserialize, Serialize};

use ratchet_core::analysis::StrategyKind;
use ratchet_core::mc::McConfig;
use ratchet_core::ModelParams;

use crate::error::CliError;

fn default_grid_n() -> usize {
    500
}
fn default_x0() -> f64 {
    5.0
}
fn default_x_max() -> f64 {
    10.0
}
fn default_x_points() -> usize {
    200
}
fn default_strategy() -> StrategyKind {
    StrategyKind::Optimal
}
fn default_strategies() -> Vec<StrategyKind> {
    StrategyKind::ALL.to_vec()
}
fn default_n_list() -> Vec<usize> {
    vec![25, 50, 100, 200, 400]
}

/// One JSON document drives every subcommand; fields a command does not use
/// are ignored by it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelParams,
    #[serde(default = "default_grid_n")]
    pub grid_n: usize,
    #[serde(default)]
    pub mc: McConfig,
    #[serde(default = "default_x0")]
    pub x0: f64,
    #[serde(default = "default_x_max")]
    pub x_max: f64,
    #[serde(default = "default_x_points")]
    pub x_points: usize,
    /// Strategy simulated by `simulate`.
    #[serde(default = "default_strategy")]
    pub strategy: StrategyKind,
    /// Path index to export as a trace in `simulate`.
    #[serde(default)]
    pub trace_path: Option<u64>,
    /// Rows of the `compare` table.
    #[serde(default = "default_strategies")]
    pub strategies: Vec<StrategyKind>,
    /// Drift values for the threshold-curve sweep in `compare`.
    #[serde(default)]
    pub mu_sweep: Vec<f64>,
    /// Meshes for `converge`.
    #[serde(default = "default_n_list")]
    pub n_list: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Solve,
    Simulate,
    Compare,
    Converge,
}

#[derive(Debug, Default, Clone)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub n: Option<usize>,
    pub paths: Option<u64>,
    pub dt: Option<f64>,
    pub strategy: Option<StrategyKind>,
    pub trace_path: Option<u64>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(vec![format!("cannot read {}: {e}", path.display())]))?;
        serde_json::from_str(&text).map_err(|e| CliError::Config(vec![format!("{}: {e}", path.display())]))
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(seed) = o.seed {
            self.mc.seed = seed;
        }
        if let Some(n) = o.n {
            self.grid_n = n;
        }
        if let Some(paths) = o.paths {
            self.mc.n_paths = paths;
        }
        if let Some(dt) = o.dt {
            self.mc.dt = dt;
        }
        if let Some(s) = o.strategy {
            self.strategy = s;
        }
        if o.trace_path.is_some() {
            self.trace_path = o.trace_path;
        }
    }

    /// Every precondition the command would hit, as messages.
    pub fn violations(&self, cmd: Command) -> Vec<String> {
        let mut out: Vec<String> = self.model.violations().iter().map(|e| format!("model: {e}")).collect();
        if self.model.sigma == 0.0 {
            out.push("model: sigma must be > 0 for this command".into());
        }
        if self.grid_n == 0 {
            out.push("grid_n: must be >= 1".into());
        }
        if !(self.x0.is_finite() && self.x0 >= 0.0) {
            out.push(format!("x0: must be finite and >= 0 (got {})", self.x0));
        }
        if !(self.x_max.is_finite() && self.x_max > 0.0) {
            out.push(format!("x_max: must be finite and > 0 (got {})", self.x_max));
        }
        if self.x_points < 2 {
            out.push("x_points: must be >= 2".into());
        }
        match cmd {
            Command::Solve => {}
            Command::Simulate => {
                out.extend(self.mc.violations().iter().map(|e| format!("mc: {e}")));
                if self.strategy == StrategyKind::Linear && self.x0 <= 0.0 {
                    out.push("x0: linear schedule needs x0 > 0".into());
                }
            }
            Command::Compare => {
                out.extend(self.mc.violations().iter().map(|e| format!("mc: {e}")));
                if self.strategies.is_empty() {
                    out.push("strategies: empty list, nothing to compare".into());
                }
                if self.strategies.contains(&StrategyKind::Linear) && self.x0 <= 0.0 {
                    out.push("x0: linear schedule needs x0 > 0".into());
                }
                for &mu in &self.mu_sweep {
                    if !mu.is_finite() {
                        out.push(format!("mu_sweep: non-finite drift {mu}"));
                    }
                }
            }
            Command::Converge => {
                let nested = !self.n_list.is_empty()
                    && self.n_list[0] > 0
                    && self.n_list.windows(2).all(|w| w[1] > w[0] && w[1] % w[0] == 0);
                if !nested {
                    out.push(format!(
                        "n_list: must be non-empty, ascending, each dividing the next (got {:?})",
                        self.n_list
                    ));
                }
            }
        }
        out
    }
}
