//! Order policies.
//!
//! A policy maps the observable state (period, on-hand inventory, pipeline)
//! to a non-negative order. Admissibility means the order never peeks at
//! future demand; the only randomness a policy may use is its own stream,
//! drawn independently of the demand stream.
//!
//! The constant-order policy with rate `r` places `I^r_inf + r` in period 1
//! (a fresh stationary draw per trajectory) and exactly `r` afterwards. That
//! one randomized first order puts the post-receipt inventory process in
//! steady state immediately: every penalized period then costs
//! `h E[I^r_inf] + c (E[D] - r)` in expectation.

use crate::demand::DemandDistribution;
use crate::dp::ValueTable;
use crate::lattice::{self, Rat};
use crate::lindley::{self, SupremumSolution};
use crate::stream::Stream;
use crate::{Error, Result};
use serde::{Deserialize, Serialize};
use std::sync::Arc;

/// Observable state at the start of a period, in working lattice units.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SystemState {
    /// Period `t >= 1`.
    pub period: usize,
    /// On-hand inventory `I_t` (before this period's receipt).
    pub inventory: i64,
    /// Pipeline `x_t`; `pipeline[0] = x_{1,t}` is received this period.
    pub pipeline: Vec<i64>,
}

/// Constant-order policy: stationary first order, then rate `r` forever.
#[derive(Debug, Clone)]
pub struct ConstantOrderSpec {
    pub r: Rat,
    pub sup: Arc<SupremumSolution>,
}

/// A decision rule. One value drives any number of parallel trajectories;
/// per-trajectory randomness comes from the trajectory's policy stream.
#[derive(Debug, Clone)]
pub enum Policy {
    Constant(ConstantOrderSpec),
    BaseStock { target: Rat },
    Table(Arc<ValueTable>),
}

impl Policy {
    /// Coarsest lattice on which both demand and the policy's quantities
    /// are integers.
    pub fn working_unit(&self, d: &DemandDistribution) -> Result<Rat> {
        match self {
            Policy::Constant(spec) => {
                if spec.r.is_zero() {
                    Ok(d.unit())
                } else {
                    lattice::refine(d.unit(), spec.r)
                }
            }
            Policy::BaseStock { target } => {
                if target.is_zero() {
                    Ok(d.unit())
                } else {
                    lattice::refine(d.unit(), *target)
                }
            }
            Policy::Table(table) => {
                if table.unit() != d.unit() {
                    return Err(Error::LatticeMismatch(format!(
                        "value table lattice {} differs from demand lattice {}",
                        table.unit(),
                        d.unit()
                    )));
                }
                Ok(d.unit())
            }
        }
    }

    /// Whether the period-1 order is a random draw.
    pub fn randomized_first(&self) -> bool {
        matches!(self, Policy::Constant(_))
    }

    /// Binds the policy to a working lattice unit.
    pub fn compile(&self, d: &DemandDistribution, unit: Rat) -> Result<CompiledPolicy> {
        match self {
            Policy::Constant(spec) => {
                if spec.sup.unit != unit {
                    return Err(Error::LatticeMismatch(format!(
                        "stationary solution lattice {} differs from working lattice {unit}",
                        spec.sup.unit
                    )));
                }
                Ok(CompiledPolicy::Constant {
                    r_units: lattice::multiple_of(spec.r, unit)?,
                    sup: Arc::clone(&spec.sup),
                })
            }
            Policy::BaseStock { target } => Ok(CompiledPolicy::BaseStock {
                target_units: lattice::multiple_of(*target, unit)?,
            }),
            Policy::Table(table) => {
                if table.unit() != unit || d.unit() != unit {
                    return Err(Error::LatticeMismatch(
                        "value table policies run on the demand lattice".into(),
                    ));
                }
                Ok(CompiledPolicy::Table { table: Arc::clone(table) })
            }
        }
    }
}

/// Policy bound to a working lattice; orders are returned in those units.
#[derive(Debug, Clone)]
pub enum CompiledPolicy {
    Constant { r_units: i64, sup: Arc<SupremumSolution> },
    BaseStock { target_units: i64 },
    Table { table: Arc<ValueTable> },
}

impl CompiledPolicy {
    /// Order for `state`. `stream` is the trajectory's policy stream; only
    /// the constant policy's period-1 draw consumes it.
    pub fn order(&self, state: &SystemState, stream: &mut Stream) -> i64 {
        match self {
            CompiledPolicy::Constant { r_units, sup } => {
                if state.period == 1 {
                    sup.draw(stream) + r_units
                } else {
                    *r_units
                }
            }
            CompiledPolicy::BaseStock { target_units } => {
                let position = state.inventory + state.pipeline.iter().sum::<i64>();
                (target_units - position).max(0)
            }
            CompiledPolicy::Table { table } => table.order_for(state),
        }
    }
}

/// Constant-order policy at rate `r` with the stationary first order from
/// `sup` (which must be the solution for the same rate).
pub fn make_constant_order(r: Rat, sup: SupremumSolution) -> Result<Policy> {
    if sup.rate != r {
        return Err(Error::BadParameter(format!(
            "stationary solution was solved at rate {}, not {r}",
            sup.rate
        )));
    }
    Ok(Policy::Constant(ConstantOrderSpec { r, sup: Arc::new(sup) }))
}

/// Base-stock policy: order up to `target` inventory position.
pub fn make_base_stock(target: Rat) -> Result<Policy> {
    if target.is_negative() {
        return Err(Error::BadParameter(format!(
            "base-stock target {target} must be non-negative"
        )));
    }
    Ok(Policy::BaseStock { target })
}

/// Exact per-period stationary cost of the constant-order policy:
/// `h E[I^r_inf] + c (E[D] - r)`.
pub fn stationary_cost(
    d: &DemandDistribution,
    c: f64,
    h: f64,
    r: Rat,
    sup: &SupremumSolution,
) -> Result<f64> {
    if !(c > 0.0) || !(h > 0.0) {
        return Err(Error::BadParameter(format!(
            "costs must be positive (c = {c}, h = {h})"
        )));
    }
    if sup.rate != r {
        return Err(Error::BadParameter(format!(
            "stationary solution was solved at rate {}, not {r}",
            sup.rate
        )));
    }
    if r.to_f64() >= d.mean() {
        return Err(Error::RateTooHigh { rate: r.to_string(), mean: d.mean() });
    }
    Ok(h * sup.mean + c * (d.mean() - r.to_f64()))
}

/// One evaluated rate in the best-constant search.
#[derive(Debug, Clone, Serialize)]
pub struct RatePoint {
    pub rate: Rat,
    pub sup_mean: f64,
    /// `h E[I^v] - c v`; differs from the stationary cost by the constant
    /// `c E[D]`, so both rank rates identically.
    pub objective: f64,
    pub cost: f64,
}

/// Result of the best-constant-rate grid search.
#[derive(Debug, Clone, Serialize)]
pub struct BestConstant {
    pub z: Rat,
    pub objective: f64,
    /// Stationary per-period cost at `z`.
    pub cost: f64,
    pub grid: Vec<RatePoint>,
}

/// Grid search for `z = argmin_{v >= 0} (h E[I^v_inf] - c v)` over
/// `{0, step, 2 step, ...} intersect [0, E[D])`; ties resolve to the
/// smallest rate. Default step: a quarter of the demand lattice unit.
pub fn best_constant_z(
    d: &DemandDistribution,
    c: f64,
    h: f64,
    grid_step: Option<Rat>,
    tol: f64,
) -> Result<BestConstant> {
    if !(c > 0.0) || !(h > 0.0) {
        return Err(Error::BadParameter(format!(
            "costs must be positive (c = {c}, h = {h})"
        )));
    }
    let step = match grid_step {
        Some(s) if s.is_positive() => s,
        Some(s) => {
            return Err(Error::BadParameter(format!("grid step {s} must be positive")));
        }
        None => Rat(d.unit().0 / 4),
    };
    let mut grid = Vec::new();
    let mut best: Option<usize> = None;
    let mut k = 0i64;
    loop {
        let v = Rat(step.0 * k);
        if v.to_f64() >= d.mean() {
            break;
        }
        let sup = lindley::stationary_waiting(d, v, tol)?;
        let objective = h * sup.mean - c * v.to_f64();
        let cost = h * sup.mean + c * (d.mean() - v.to_f64());
        grid.push(RatePoint { rate: v, sup_mean: sup.mean, objective, cost });
        // Strict improvement keeps the smallest minimizer.
        if best.is_none_or(|b| objective < grid[b].objective) {
            best = Some(grid.len() - 1);
        }
        k += 1;
    }
    let best = best.expect("grid contains at least v = 0");
    Ok(BestConstant {
        z: grid[best].rate,
        objective: grid[best].objective,
        cost: grid[best].cost,
        grid,
    })
}

/// Policy specification as it appears in config files.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PolicySpec {
    /// Constant-order at an explicit rate.
    Constant { r: Rat },
    /// Constant-order at the grid-optimal rate.
    BestConstant,
    /// Order up to a fixed inventory position.
    BaseStock {
        #[serde(rename = "S")]
        s: Rat,
    },
    /// Table policy from a solved DP artifact.
    DpTable { path: String },
}

impl PolicySpec {
    /// Builds the policy, solving whatever the requested kind needs.
    pub fn build(&self, d: &DemandDistribution, c: f64, h: f64, tol: f64) -> Result<Policy> {
        match self {
            PolicySpec::Constant { r } => {
                let sup = lindley::stationary_waiting(d, *r, tol)?;
                make_constant_order(*r, sup)
            }
            PolicySpec::BestConstant => {
                let best = best_constant_z(d, c, h, None, tol)?;
                let sup = lindley::stationary_waiting(d, best.z, tol)?;
                make_constant_order(best.z, sup)
            }
            PolicySpec::BaseStock { s } => make_base_stock(*s),
            PolicySpec::DpTable { path } => {
                Ok(Policy::Table(Arc::new(ValueTable::load(std::path::Path::new(path))?)))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::{skip_free_eta, two_point};

    #[test]
    fn stationary_cost_matches_oracle() {
        let d = two_point();
        let r = Rat::new(1, 2);
        let sup = lindley::stationary_waiting(&d, r, 1e-12).unwrap();
        let cost = stationary_cost(&d, 1.0, 1.0, r, &sup).unwrap();
        let eta = skip_free_eta();
        let oracle = 0.5 * eta / (1.0 - eta) + 0.5;
        assert!((cost - oracle).abs() < 1e-9, "cost {cost} vs {oracle}");
    }

    #[test]
    fn stationary_cost_validates_inputs() {
        let d = two_point();
        let sup = lindley::stationary_waiting(&d, Rat::new(1, 2), 1e-12).unwrap();
        assert!(stationary_cost(&d, 0.0, 1.0, Rat::new(1, 2), &sup).is_err());
        assert!(stationary_cost(&d, 1.0, 1.0, Rat::new(1, 4), &sup).is_err());
    }

    #[test]
    fn tiny_penalty_prefers_zero_rate() {
        // E[I^v] >= v P(D = 0) = v/2 > 0.01 v, so v = 0 wins analytically.
        let d = two_point();
        let best = best_constant_z(&d, 0.01, 1.0, None, 1e-10).unwrap();
        assert_eq!(best.z, Rat::from_int(0));
        assert_eq!(best.grid.len(), 4); // {0, 1/4, 1/2, 3/4}
        assert!((best.objective - 0.0).abs() < 1e-12);
        assert!((best.cost - 0.01).abs() < 1e-12);
    }

    #[test]
    fn best_rate_dominates_grid() {
        let d = two_point();
        for (c, h) in [(1.0, 1.0), (9.0, 1.0), (1.0, 4.0)] {
            let best = best_constant_z(&d, c, h, None, 1e-10).unwrap();
            assert!(best.z.to_f64() < d.mean());
            for point in &best.grid {
                assert!(
                    best.cost <= point.cost + 1e-9,
                    "cost at z = {} beats {} at {}",
                    best.z,
                    point.cost,
                    point.rate
                );
            }
        }
    }

    #[test]
    fn high_penalty_pushes_rate_up() {
        let d = two_point();
        let cheap = best_constant_z(&d, 0.01, 1.0, None, 1e-10).unwrap();
        let dear = best_constant_z(&d, 50.0, 1.0, None, 1e-10).unwrap();
        assert!(dear.z > cheap.z, "{} should exceed {}", dear.z, cheap.z);
    }

    #[test]
    fn constant_policy_orders_rate_after_first_period() {
        let d = two_point();
        let r = Rat::new(1, 2);
        let sup = lindley::stationary_waiting(&d, r, 1e-12).unwrap();
        let policy = make_constant_order(r, sup).unwrap();
        let unit = policy.working_unit(&d).unwrap();
        assert_eq!(unit, Rat::new(1, 2));
        let compiled = policy.compile(&d, unit).unwrap();
        let mut stream = Stream::child(3, "policy", 0);
        let state1 = SystemState { period: 1, inventory: 0, pipeline: vec![0] };
        let first = compiled.order(&state1, &mut stream);
        assert!(first >= 1, "first order includes the rate, got {first}");
        for t in 2..6 {
            let state = SystemState { period: t, inventory: 5, pipeline: vec![1] };
            assert_eq!(compiled.order(&state, &mut stream), 1);
        }
    }

    #[test]
    fn first_order_law_is_shifted_stationary() {
        let d = two_point();
        let r = Rat::new(1, 2);
        let sup = lindley::stationary_waiting(&d, r, 1e-12).unwrap();
        let pmf = sup.pmf.clone();
        let policy = make_constant_order(r, sup).unwrap();
        let compiled = policy.compile(&d, Rat::new(1, 2)).unwrap();
        let n = 200_000;
        let mut counts = std::collections::BTreeMap::new();
        for i in 0..n {
            let mut stream = Stream::child(17, "policy-first", i as u64);
            let state = SystemState { period: 1, inventory: 0, pipeline: vec![0] };
            *counts.entry(compiled.order(&state, &mut stream)).or_insert(0usize) += 1;
        }
        // Empirical law of (first order - r) vs stationary pmf in TV.
        let tv: f64 = pmf
            .iter()
            .enumerate()
            .map(|(j, &p)| {
                let emp = counts.get(&(j as i64 + 1)).copied().unwrap_or(0) as f64 / n as f64;
                (emp - p).abs()
            })
            .sum::<f64>()
            / 2.0;
        assert!(tv < 0.01, "TV {tv}");
    }

    #[test]
    fn base_stock_orders_up_to_position() {
        let policy = make_base_stock(Rat::from_int(7)).unwrap();
        let d = two_point();
        let compiled = policy.compile(&d, Rat::from_int(1)).unwrap();
        let mut stream = Stream::child(0, "policy", 0);
        let state = SystemState { period: 3, inventory: 2, pipeline: vec![1, 3] };
        assert_eq!(compiled.order(&state, &mut stream), 1);
        let state = SystemState { period: 3, inventory: 6, pipeline: vec![1, 3] };
        assert_eq!(compiled.order(&state, &mut stream), 0);
        assert!(make_base_stock(Rat::from_int(-1)).is_err());
    }

    #[test]
    fn policy_spec_round_trip() {
        let spec: PolicySpec = serde_json::from_str(r#"{"kind":"constant","r":0.5}"#).unwrap();
        let d = two_point();
        let policy = spec.build(&d, 1.0, 1.0, 1e-10).unwrap();
        assert!(policy.randomized_first());

        let spec: PolicySpec = serde_json::from_str(r#"{"kind":"base_stock","S":7}"#).unwrap();
        let policy = spec.build(&d, 1.0, 1.0, 1e-10).unwrap();
        assert!(!policy.randomized_first());

        let spec: PolicySpec = serde_json::from_str(r#"{"kind":"best_constant"}"#).unwrap();
        assert!(spec.build(&d, 1.0, 1.0, 1e-10).is_ok());
    }
}
