//! Experiment configuration: one JSON file drives every subcommand; the
//! command-line flags `--seed`, `--out`, and `--threads` override it.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use lostsales::demand::DemandSpec;
use lostsales::lattice::Rat;
use lostsales::policy::PolicySpec;

fn one() -> f64 {
    1.0
}

fn default_lead_time() -> usize {
    4
}

fn default_horizon() -> usize {
    8
}

fn default_tol() -> f64 {
    1e-9
}

fn default_epsilons() -> Vec<f64> {
    vec![0.5, 0.1, 0.01]
}

fn default_k_max() -> usize {
    50
}

fn default_mc_samples() -> usize {
    1_000_000
}

fn default_replications() -> usize {
    10_000
}

fn default_panel_samples() -> usize {
    30_000
}

fn default_optimizer_budget() -> u64 {
    lostsales::bounds::DEFAULT_OPTIMIZER_BUDGET
}

fn default_state_budget() -> u64 {
    20_000_000
}

fn yes() -> bool {
    true
}

fn unit_step() -> i64 {
    1
}

fn default_out() -> PathBuf {
    PathBuf::from("out")
}

/// Everything a run needs. Unknown fields are rejected so typos surface as
/// config errors, not silently ignored knobs.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Demand law for single-instance commands.
    pub demand: DemandSpec,
    /// Extra demand laws for grid commands (`ratio-table`); defaults to
    /// just `demand`.
    #[serde(default)]
    pub demands: Vec<DemandSpec>,
    #[serde(default = "one")]
    pub c: f64,
    #[serde(default = "one")]
    pub h: f64,
    #[serde(default = "default_lead_time")]
    pub lead_time: usize,
    #[serde(default = "default_horizon")]
    pub horizon: usize,
    /// Root seed; every stream in the run is derived from it.
    #[serde(default)]
    pub seed: u64,
    /// Output directory for artifacts and the run manifest.
    #[serde(default = "default_out")]
    pub out: PathBuf,
    /// Fixed-point tolerance for stationary distributions.
    #[serde(default = "default_tol")]
    pub tol: f64,

    /// Rates at which `constants` reports Theta; `lindley` analyzes the
    /// first entry.
    #[serde(default)]
    pub rates: Vec<Rat>,
    /// Epsilons at which `constants` evaluates the lead-time threshold.
    #[serde(default = "default_epsilons")]
    pub epsilons: Vec<f64>,

    /// Largest argmax index `lindley` checks tail bounds at.
    #[serde(default = "default_k_max")]
    pub k_max: usize,
    /// Monte Carlo samples for `lindley`.
    #[serde(default = "default_mc_samples")]
    pub mc_samples: usize,

    /// Rate grid step for `z-search`; defaults to a quarter lattice unit.
    #[serde(default)]
    pub grid_step: Option<Rat>,

    /// Order cap override for `dp` (lattice units).
    #[serde(default)]
    pub order_cap_units: Option<i64>,
    /// Inventory cap override for `dp` (lattice units).
    #[serde(default)]
    pub inventory_cap_units: Option<i64>,
    #[serde(default = "unit_step")]
    pub order_step_units: i64,
    #[serde(default = "default_state_budget")]
    pub state_budget: u64,
    #[serde(default = "yes")]
    pub check_cap_sensitivity: bool,
    /// Save the solved decision table as an artifact.
    #[serde(default)]
    pub keep_table: bool,

    /// Policy for `simulate`.
    #[serde(default)]
    pub policy: Option<PolicySpec>,
    #[serde(default = "default_replications")]
    pub replications: usize,

    /// Window-evaluation budget for `lower-bound` and `gap`.
    #[serde(default = "default_optimizer_budget")]
    pub optimizer_budget: u64,
    /// Coupled-panel samples for `gap`.
    #[serde(default = "default_panel_samples")]
    pub panel_samples: usize,

    /// Lead-time grid for `ratio-table`; defaults to `[lead_time]`.
    #[serde(default)]
    pub lead_times: Vec<usize>,
    /// `(c, h)` grid for `ratio-table`; defaults to `[(c, h)]`.
    #[serde(default)]
    pub cost_pairs: Vec<(f64, f64)>,
}

impl ExperimentConfig {
    pub fn lead_time_grid(&self) -> Vec<usize> {
        if self.lead_times.is_empty() {
            vec![self.lead_time]
        } else {
            self.lead_times.clone()
        }
    }

    pub fn cost_grid(&self) -> Vec<(f64, f64)> {
        if self.cost_pairs.is_empty() {
            vec![(self.c, self.h)]
        } else {
            self.cost_pairs.clone()
        }
    }

    pub fn demand_grid(&self) -> Vec<DemandSpec> {
        if self.demands.is_empty() {
            vec![self.demand.clone()]
        } else {
            self.demands.clone()
        }
    }
}
