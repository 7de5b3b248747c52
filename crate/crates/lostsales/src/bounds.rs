//! Closed-form constants and optimality-gap certificates for constant-order
//! policies.
//!
//! # Scalars
//!
//! For demand `D` with mean `mu`, standard deviation `sigma`, absolute
//! skewness `zeta = E[|D - mu|^3] sigma^{-3}`, newsvendor quantile `Q`, and
//! per-period floor `g`, this module evaluates the sample-size scalar
//!
//! ```text
//! m = ceil((26 (3 zeta + c mu / (h sigma) + 1))^2)
//! ```
//!
//! and the lead-time threshold
//!
//! ```text
//! y(eps) = max(2^14 h (Q + 2^{3/2} mu) (mu^2 + E[D^2])^3 sigma^{-6} m^3 / (g eps),
//!              (12 c ((2c/h)^{1/2} + 3) / g)^2 / eps^2)
//! ```
//!
//! past which the best constant-order policy is guaranteed to cost at most
//! `1 + eps` times the optimum (for horizons `T >= (1 + 3/eps) L`). At desk
//! scale `y(eps)` is astronomical; [`asymptotic_certificate`] reports that
//! honestly instead of pretending to verify the regime.
//!
//! # The window lower bound
//!
//! Conditional on entering a stretch of `L` penalized periods with pipeline
//! `x` and on-hand inventory `I`, the expected cost of those periods is the
//! explicit functional evaluated by [`crate::sim::WindowCostEvaluator`]
//! (no order placed inside the stretch arrives inside it). Minimizing that
//! functional over `x in [0, Q]^L` and `I >= 0` therefore lower-bounds the
//! window cost of an optimal policy, because some optimal policy never
//! orders above `Q`. The minimizer's inventory component provably lies
//! below `(ceil((2 c L / h)^{1/2}) + 2) mu`: starting any higher, the early
//! holding costs alone exceed `c L mu`, the value of the all-zero start.
//! [`lower_bound_optimize`] searches that box on the demand lattice by
//! multi-start coordinate descent under common random numbers.
//!
//! # The coupled gap certificate
//!
//! Both the constant-rate window cost and a refinement of the lower bound
//! are expectations over one shared panel of samples `(D_1..D_L, J)`, where
//! `J` is a stationary supremum draw at rate `r* = mean(x*)`. With prefix
//! sums `S_j` and the walk `j r* - S_j` (terminal bonus `J` at `j = k`), let
//! `i_k` be the largest argmax over `j in [0, k]` and `W_k` the attained
//! maximum; back the index into the start state via
//! `B_k = x*_{k+1-i_k} + ... + x*_k`. Over any `L` consecutive penalized
//! periods:
//!
//! * constant-rate cost:   `h sum_k E[W_k] + c L (mu - r*)`,
//! * start-state bound:    `h sum_k E[V_k] + c (E[V_L] - I* + L mu - sum x*)`
//!   with `V_k = max_j (B-sum over the last j orders - S_j + [j = k] I*)`,
//! * refined bound:        the start-state bound with `V_k` replaced by
//!   `B_k - S_{i_k}`, its value at the index `i_k` (minus the non-negative
//!   boundary term).
//!
//! A maximum dominates its value at any index, even a randomly selected
//! one, so `V_k >= B_k - S_{i_k} + [i_k = k] I*` holds sample by sample;
//! [`coupling_check`] counts violations (always zero). The observed gap
//! between the constant-rate cost and the refined bound stays below the
//! certified  `h (Q + 2^{3/2} mu) Theta_{r*}^{-3} + c I*`  whenever
//! `r* < mu`, which [`gap_certificate`] checks end to end.

use rayon::prelude::*;
use serde::Serialize;

use crate::demand::{self, DemandDistribution};
use crate::error::Error;
use crate::lattice::{Rat, Rational};
use crate::lindley::{self, walk_max_argmax};
use crate::policy;
use crate::quad;
use crate::report;
use crate::sim::WindowCostEvaluator;
use crate::stream::Stream;
use crate::Result;

/// Most scenarios the optimizer will enumerate exactly during the search;
/// above this it switches to a fixed Monte Carlo scenario matrix.
const EXACT_SEARCH_LIMIT: u128 = 200_000;

/// Scenario count of the search-phase Monte Carlo evaluator.
const SEARCH_MC_SAMPLES: usize = 4_096;

/// Scenario count of the final re-evaluation when exact enumeration is
/// unaffordable even once.
const FINAL_MC_SAMPLES: usize = 200_000;

/// Stationary-supremum tolerance used by the coupled panel.
const SUP_TOL: f64 = 1e-10;

/// Multi-start count of [`lower_bound_optimize`].
pub const DEFAULT_OPTIMIZER_STARTS: usize = 16;

/// Objective-evaluation budget that comfortably covers every desk-scale
/// instance in this crate.
pub const DEFAULT_OPTIMIZER_BUDGET: u64 = 4_000_000;

fn validate_costs(c: f64, h: f64) -> Result<()> {
    if !(c > 0.0 && c.is_finite() && h > 0.0 && h.is_finite()) {
        return Err(Error::BadParameter(format!(
            "costs must be positive and finite (c = {c}, h = {h})"
        )));
    }
    Ok(())
}

/// `m = ceil((26 (3 zeta + c mu / (h sigma) + 1))^2)`. Grows with the
/// penalty-to-holding ratio and with demand irregularity; at least `26^2`
/// for every instance.
pub fn constant_m(d: &DemandDistribution, c: f64, h: f64) -> Result<u64> {
    validate_costs(c, h)?;
    let inner = 26.0 * (3.0 * d.skewness() + c * d.mean() / (h * d.sigma()) + 1.0);
    let m = (inner * inner).ceil();
    if !(m.is_finite() && m < 9.0e15) {
        return Err(Error::BadParameter(format!("sample-size scalar {m} overflows")));
    }
    Ok(m as u64)
}

/// Which of the two max-arguments of `y(eps)` attains the value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BindingTerm {
    /// The `1/eps` term (drift constants cubed); binds for moderate `eps`.
    EpsInverse,
    /// The `1/eps^2` term; dominates for all sufficiently small `eps`.
    EpsInverseSquared,
}

/// `y(eps)` with both max-arguments, so callers can see which term binds.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct EpsilonThreshold {
    pub epsilon: f64,
    /// The threshold `y(eps)` itself.
    pub y: f64,
    pub term_eps_inverse: f64,
    pub term_eps_inverse_squared: f64,
    pub binding: BindingTerm,
}

/// Evaluates the lead-time threshold `y(eps)`; `eps` must lie in `(0, 1)`.
pub fn threshold_y(
    d: &DemandDistribution,
    c: f64,
    h: f64,
    epsilon: f64,
) -> Result<EpsilonThreshold> {
    validate_costs(c, h)?;
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::BadEpsilon(epsilon));
    }
    let scalars = demand::newsvendor(d, c, h)?;
    let m = constant_m(d, c, h)? as f64;
    let mu = d.mean();
    let moment_sum = mu * mu + d.second_moment();
    let term_eps_inverse = 2f64.powi(14)
        * h
        * (scalars.q + 2f64.powf(1.5) * mu)
        * moment_sum.powi(3)
        * d.sigma().powi(-6)
        * m.powi(3)
        / (scalars.g * epsilon);
    let base = 12.0 * c / scalars.g * ((2.0 * c / h).sqrt() + 3.0);
    let term_eps_inverse_squared = base * base / (epsilon * epsilon);
    let (y, binding) = if term_eps_inverse_squared >= term_eps_inverse {
        (term_eps_inverse_squared, BindingTerm::EpsInverseSquared)
    } else {
        (term_eps_inverse, BindingTerm::EpsInverse)
    };
    Ok(EpsilonThreshold {
        epsilon,
        y,
        term_eps_inverse,
        term_eps_inverse_squared,
        binding,
    })
}

/// `Theta_r` evaluated at one rate.
#[derive(Debug, Clone, Serialize)]
pub struct RateTheta {
    pub rate: Rat,
    pub theta: f64,
}

/// Every closed-form scalar of an instance in one serializable report.
#[derive(Debug, Clone, Serialize)]
pub struct ConstantsReport {
    /// Fingerprint of `(demand, c, h)`.
    pub instance: String,
    pub c: f64,
    pub h: f64,
    pub mean_demand: f64,
    pub second_moment: f64,
    pub sigma: f64,
    pub zeta: f64,
    pub q: f64,
    pub q_units: i64,
    pub g: f64,
    /// Best constant order rate.
    pub z: Rat,
    /// Stationary per-period cost at `z`.
    pub z_cost: f64,
    pub m: u64,
    pub thetas: Vec<RateTheta>,
    pub thresholds: Vec<EpsilonThreshold>,
}

/// Evaluates every scalar of the instance, plus `Theta_r` at the requested
/// rates and `y(eps)` at the requested epsilons.
pub fn constants_report(
    d: &DemandDistribution,
    c: f64,
    h: f64,
    rates: &[Rat],
    epsilons: &[f64],
) -> Result<ConstantsReport> {
    validate_costs(c, h)?;
    let scalars = demand::newsvendor(d, c, h)?;
    let best = policy::best_constant_z(d, c, h, None, 1e-9)?;
    let thetas = rates
        .iter()
        .map(|&r| Ok(RateTheta { rate: r, theta: lindley::theta(d, r)?.value() }))
        .collect::<Result<Vec<_>>>()?;
    let thresholds = epsilons
        .iter()
        .map(|&eps| threshold_y(d, c, h, eps))
        .collect::<Result<Vec<_>>>()?;
    Ok(ConstantsReport {
        instance: report::instance_fingerprint(d, c, h, b"constants"),
        c,
        h,
        mean_demand: d.mean(),
        second_moment: d.second_moment(),
        sigma: d.sigma(),
        zeta: d.skewness(),
        q: scalars.q,
        q_units: scalars.q_units,
        g: scalars.g,
        z: best.z,
        z_cost: best.cost,
        m: constant_m(d, c, h)?,
        thetas,
        thresholds,
    })
}

/// Hypothesis check of the asymptotic ratio guarantee at a concrete
/// `(L, T, eps)`.
#[derive(Debug, Clone, Serialize)]
pub struct AsymptoticCertificate {
    pub instance: String,
    pub epsilon: f64,
    pub lead_time: usize,
    pub horizon: usize,
    pub threshold: EpsilonThreshold,
    /// Smallest lead time the guarantee covers: `ceil(y(eps))`.
    pub required_lead_time: f64,
    /// Smallest covered horizon at the effective lead time:
    /// `ceil((1 + 3/eps) max(L, required L))`.
    pub required_horizon: f64,
    pub lead_time_ok: bool,
    pub horizon_ok: bool,
    pub hypotheses_met: bool,
    /// `1 + eps` when both hypotheses hold, absent otherwise.
    pub promised_ratio: Option<f64>,
    /// Human-readable verdict, stating non-reproducibility when the scale
    /// is out of reach.
    pub statement: String,
}

/// Checks `L >= y(eps)` and `T >= (1 + 3/eps) L`, and states plainly
/// whether the guaranteed regime is reachable at desk scale.
pub fn asymptotic_certificate(
    d: &DemandDistribution,
    c: f64,
    h: f64,
    lead_time: usize,
    horizon: usize,
    epsilon: f64,
) -> Result<AsymptoticCertificate> {
    let threshold = threshold_y(d, c, h, epsilon)?;
    let required_lead_time = threshold.y.ceil();
    let lead_time_ok = lead_time as f64 >= threshold.y;
    let effective_l = (lead_time as f64).max(required_lead_time);
    let required_horizon = ((1.0 + 3.0 / epsilon) * effective_l).ceil();
    let horizon_ok = horizon as f64 >= (1.0 + 3.0 / epsilon) * lead_time as f64;
    let hypotheses_met = lead_time_ok && horizon_ok;
    let statement = if hypotheses_met {
        format!(
            "hypotheses met: with lead time {lead_time} >= y({epsilon}) = {:.3e} and \
             horizon {horizon} >= (1 + 3/{epsilon}) L, the best constant-order policy \
             costs at most {} times the optimum over the penalized window.",
            threshold.y,
            1.0 + epsilon,
        )
    } else {
        format!(
            "hypotheses NOT met: the ratio guarantee 1 + {epsilon} requires lead time \
             L >= y({epsilon}) = {:.3e} and horizon T >= (1 + 3/{epsilon}) L = {:.3e}, \
             but this instance has L = {lead_time}, T = {horizon}. Exact dynamic \
             programming is infeasible beyond lead times of about 5, so the asymptotic \
             regime is not reproducible at desk scale; the finite-instance checks \
             (stationary-cost identity, argmax law and tail bounds, window-cost \
             exactness, conservation, DP sanity, coupling, gap certificate, ratio \
             table, and the normal-approximation bound) stand in as the verified \
             substitute.",
            threshold.y, required_horizon,
        )
    };
    Ok(AsymptoticCertificate {
        instance: report::instance_fingerprint(d, c, h, b"asymptotic"),
        epsilon,
        lead_time,
        horizon,
        threshold,
        required_lead_time,
        required_horizon,
        lead_time_ok,
        horizon_ok,
        hypotheses_met,
        promised_ratio: hypotheses_met.then_some(1.0 + epsilon),
        statement,
    })
}

/// Inventory box cap for the lower-bound search, in lattice units:
/// `ceil(((ceil((2 c L / h)^{1/2}) + 2) mu) / unit)`.
pub fn inventory_cap_units(
    d: &DemandDistribution,
    c: f64,
    h: f64,
    lead_time: usize,
) -> Result<i64> {
    validate_costs(c, h)?;
    if lead_time == 0 {
        return Err(Error::BadParameter("lead time must be at least 1".into()));
    }
    let factor = (2.0 * c / h * lead_time as f64).sqrt().ceil() + 2.0;
    let cap_value = factor * d.mean();
    Ok((cap_value / d.unit().to_f64()).ceil() as i64)
}

/// Cap audit for a solved lower bound: the mean-scaled form that the
/// minimality argument actually establishes, with the unscaled factor
/// reported alongside.
#[derive(Debug, Clone, Serialize)]
pub struct InventoryCapCheck {
    pub lead_time: usize,
    /// `ceil((2 c L / h)^{1/2}) + 2`, the bare factor.
    pub cap_factor: f64,
    /// `cap_factor * E[D]`, the bound the start inventory must respect.
    pub cap: f64,
    pub inventory_star: f64,
    pub pass: bool,
}

/// Checks `I* <= (ceil((2 c L / h)^{1/2}) + 2) E[D]`.
pub fn inventory_cap_check(
    d: &DemandDistribution,
    c: f64,
    h: f64,
    lead_time: usize,
    sol: &LowerBoundSolution,
) -> Result<InventoryCapCheck> {
    validate_costs(c, h)?;
    let cap_factor = (2.0 * c / h * lead_time as f64).sqrt().ceil() + 2.0;
    let cap = cap_factor * d.mean();
    let inventory_star = sol.inventory_star;
    Ok(InventoryCapCheck {
        lead_time,
        cap_factor,
        cap,
        inventory_star,
        pass: inventory_star <= cap + 1e-12,
    })
}

/// Optimizer diagnostics.
#[derive(Debug, Clone, Serialize)]
pub struct LowerBoundTelemetry {
    pub starts: usize,
    /// Coordinate sweeps summed over starts.
    pub sweeps: usize,
    /// Objective evaluations summed over starts.
    pub evaluations: u64,
    /// Seed of the stream the caller handed in; scenario set and random
    /// starts derive from it.
    pub seed: u64,
    /// Scenario count of the search evaluator.
    pub scenarios: usize,
    pub search_exact: bool,
    /// Whether the reported objective comes from exact enumeration.
    pub objective_exact: bool,
    pub best_start_objective: f64,
    /// Final objective of the runner-up start, as a multi-start spread
    /// diagnostic.
    pub second_best_start_objective: Option<f64>,
    /// `E[V_k]`, `k = 1..=L`, at the solution.
    pub expected_window_maxima: Vec<f64>,
    /// Mean largest-argmax index of `V_k` at the solution.
    pub mean_argmax_index: Vec<f64>,
}

/// Minimizer of the window-cost functional over the start-state box.
#[derive(Debug, Clone, Serialize)]
pub struct LowerBoundSolution {
    pub instance: String,
    pub lead_time: usize,
    /// Lattice unit of `x_star_units` and `inventory_star_units`.
    pub unit: Rat,
    pub x_star_units: Vec<i64>,
    pub x_star: Vec<f64>,
    pub inventory_star_units: i64,
    pub inventory_star: f64,
    /// Window cost at the minimizer; a lower bound on every admissible
    /// policy's cost over `L` consecutive penalized periods.
    pub objective: f64,
    /// Monte Carlo standard error of `objective` (zero when exact).
    pub objective_stderr: f64,
    /// Mean order rate of the minimizer, `sum(x*) / L`, kept exact.
    pub r_star: Rat,
    pub r_star_below_mean: bool,
    pub order_cap_units: i64,
    pub inventory_cap_units: i64,
    pub telemetry: LowerBoundTelemetry,
}

struct StartOutcome {
    x: Vec<i64>,
    inv: i64,
    objective: f64,
    sweeps: usize,
    evaluations: u64,
}

/// Full-scan coordinate descent from one start point; deterministic given
/// the evaluator and the start.
fn descend(
    eval: &WindowCostEvaluator,
    order_cap: i64,
    inventory_cap: i64,
    mut x: Vec<i64>,
    mut inv: i64,
    budget: u64,
) -> Result<StartOutcome> {
    let mut evaluations = 0u64;
    let value_of = |x: &[i64], inv: i64, evaluations: &mut u64| -> Result<f64> {
        if *evaluations >= budget {
            return Err(Error::BudgetExceeded {
                what: "lower-bound coordinate descent",
                needed: u128::from(*evaluations) + 1,
                budget: u128::from(budget),
            });
        }
        *evaluations += 1;
        Ok(eval.evaluate(x, inv).value)
    };
    let mut best = value_of(&x, inv, &mut evaluations)?;
    let mut sweeps = 0usize;
    loop {
        sweeps += 1;
        let mut improved = false;
        for coord in 0..=x.len() {
            let (cur, hi) = if coord < x.len() { (x[coord], order_cap) } else { (inv, inventory_cap) };
            let mut take = cur;
            for v in 0..=hi {
                if v == cur {
                    continue;
                }
                if coord < x.len() {
                    x[coord] = v;
                } else {
                    inv = v;
                }
                let obj = value_of(&x, inv, &mut evaluations)?;
                // Strict improvement only: keeps the scan deterministic and
                // the descent finite.
                if obj < best {
                    best = obj;
                    take = v;
                }
            }
            if coord < x.len() {
                x[coord] = take;
            } else {
                inv = take;
            }
            improved |= take != cur;
        }
        if !improved {
            break;
        }
    }
    Ok(StartOutcome { x, inv, objective: best, sweeps, evaluations })
}

/// Minimizes the window-cost functional over
/// `x in {0..Q}^L x I in {0..I_cap}` on the demand lattice, by
/// [`DEFAULT_OPTIMIZER_STARTS`] coordinate descents sharing one scenario
/// set (common random numbers make the objective a deterministic function,
/// so every descent terminates). `budget` caps objective evaluations,
/// split evenly across starts. The reported objective re-evaluates the
/// incumbent exactly when enumeration is affordable; if that exact value
/// ever exceeded the all-zero start's certain value `c L E[D]`, the
/// all-zero solution would be returned instead, so the reported objective
/// never overstates the bound.
pub fn lower_bound_optimize(
    d: &DemandDistribution,
    c: f64,
    h: f64,
    lead_time: usize,
    budget: u64,
    stream: &mut Stream,
) -> Result<LowerBoundSolution> {
    validate_costs(c, h)?;
    if lead_time == 0 {
        return Err(Error::BadParameter("lead time must be at least 1".into()));
    }
    if budget == 0 {
        return Err(Error::BadParameter("evaluation budget must be positive".into()));
    }
    let scalars = demand::newsvendor(d, c, h)?;
    let order_cap = scalars.q_units;
    let inventory_cap = inventory_cap_units(d, c, h, lead_time)?;

    let scenario_count = (d.atoms_units().len() as u128).checked_pow(lead_time as u32);
    let search_exact = matches!(scenario_count, Some(n) if n <= EXACT_SEARCH_LIMIT);
    let search_eval = if search_exact {
        WindowCostEvaluator::new_exact(d, c, h, lead_time)?
    } else {
        let mut scen = stream.substream("lb-scenarios", 0);
        WindowCostEvaluator::new_mc(d, c, h, lead_time, SEARCH_MC_SAMPLES, &mut scen)?
    };

    let starts = DEFAULT_OPTIMIZER_STARTS;
    let per_start_budget = (budget / starts as u64).max(1);
    let mean_units = (d.mean() / d.unit().to_f64()).round() as i64;
    let mut start_points = vec![
        (vec![0i64; lead_time], 0i64),
        (vec![order_cap; lead_time], 0),
        (vec![mean_units.clamp(0, order_cap); lead_time], 0),
        (vec![order_cap; lead_time], inventory_cap),
    ];
    for i in start_points.len()..starts {
        let mut s = stream.substream("lb-start", i as u64);
        let mut draw_in = |hi: i64| ((s.uniform() * (hi + 1) as f64) as i64).clamp(0, hi);
        let x = (0..lead_time).map(|_| draw_in(order_cap)).collect();
        let inv = draw_in(inventory_cap);
        start_points.push((x, inv));
    }

    let outcomes: Vec<StartOutcome> = start_points
        .into_par_iter()
        .map(|(x0, i0)| descend(&search_eval, order_cap, inventory_cap, x0, i0, per_start_budget))
        .collect::<Result<Vec<_>>>()?;

    let best_idx = outcomes
        .iter()
        .enumerate()
        .min_by(|(_, a), (_, b)| a.objective.total_cmp(&b.objective))
        .map(|(i, _)| i)
        .expect("at least one start");
    let second_best = outcomes
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != best_idx)
        .map(|(_, o)| o.objective)
        .min_by(f64::total_cmp);
    let sweeps = outcomes.iter().map(|o| o.sweeps).sum();
    let evaluations = outcomes.iter().map(|o| o.evaluations).sum();
    let best = &outcomes[best_idx];

    // Re-evaluate the incumbent on the finest affordable scenario set, and
    // never report worse than the all-zero start's certain value.
    let (final_eval, objective_exact) = final_evaluator(d, c, h, lead_time, stream)?;
    let zero_value = c * lead_time as f64 * d.mean();
    let candidate = final_eval.evaluate(&best.x, best.inv);
    let (x, inv, window) = if candidate.value <= zero_value {
        (best.x.clone(), best.inv, candidate)
    } else {
        let zeros = vec![0; lead_time];
        let window = final_eval.evaluate(&zeros, 0);
        (zeros, 0, window)
    };
    let (expected_window_maxima, mean_argmax_index) = window_maxima_stats(&final_eval, &x, inv);

    let x_sum: i64 = x.iter().sum();
    let r_star = Rat(Rational::new(x_sum, lead_time as i64) * d.unit().0);
    let unit_value = d.unit().to_f64();
    Ok(LowerBoundSolution {
        instance: report::instance_fingerprint(d, c, h, &(lead_time as u64).to_le_bytes()),
        lead_time,
        unit: d.unit(),
        x_star: x.iter().map(|&v| v as f64 * unit_value).collect(),
        x_star_units: x,
        inventory_star_units: inv,
        inventory_star: inv as f64 * unit_value,
        objective: window.value,
        objective_stderr: window.stderr,
        r_star,
        r_star_below_mean: r_star.to_f64() < d.mean(),
        order_cap_units: order_cap,
        inventory_cap_units: inventory_cap,
        telemetry: LowerBoundTelemetry {
            starts,
            sweeps,
            evaluations,
            seed: stream.seed(),
            scenarios: if search_exact {
                scenario_count.unwrap_or(0) as usize
            } else {
                SEARCH_MC_SAMPLES
            },
            search_exact,
            objective_exact,
            best_start_objective: best.objective,
            second_best_start_objective: second_best,
            expected_window_maxima,
            mean_argmax_index,
        },
    })
}

/// Finest affordable evaluator for reported objective values: exact when
/// the scenario budget allows, otherwise a fresh Monte Carlo set.
fn final_evaluator(
    d: &DemandDistribution,
    c: f64,
    h: f64,
    lead_time: usize,
    stream: &mut Stream,
) -> Result<(WindowCostEvaluator, bool)> {
    match WindowCostEvaluator::new_exact(d, c, h, lead_time) {
        Ok(e) => Ok((e, true)),
        Err(Error::BudgetExceeded { .. }) => {
            let mut s = stream.substream("lb-final", 0);
            let eval = WindowCostEvaluator::new_mc(d, c, h, lead_time, FINAL_MC_SAMPLES, &mut s)?;
            Ok((eval, false))
        }
        Err(e) => Err(e),
    }
}

/// Packages a caller-chosen feasible start state in the same reporting
/// shape as [`lower_bound_optimize`], with no search: the objective is the
/// window cost at exactly that state, so it bounds nothing by itself, but
/// every certificate built on it (coupling, gap against the certified
/// bound) is valid at any feasible point.
pub fn fixed_start_solution(
    d: &DemandDistribution,
    c: f64,
    h: f64,
    x_units: Vec<i64>,
    inventory_units: i64,
    stream: &mut Stream,
) -> Result<LowerBoundSolution> {
    validate_costs(c, h)?;
    let lead_time = x_units.len();
    if lead_time == 0 {
        return Err(Error::BadParameter("need at least one pipeline slot".into()));
    }
    if inventory_units < 0 || x_units.iter().any(|&v| v < 0) {
        return Err(Error::BadParameter("start state must be non-negative".into()));
    }
    let scalars = demand::newsvendor(d, c, h)?;
    let (final_eval, objective_exact) = final_evaluator(d, c, h, lead_time, stream)?;
    let window = final_eval.evaluate(&x_units, inventory_units);
    let (expected_window_maxima, mean_argmax_index) =
        window_maxima_stats(&final_eval, &x_units, inventory_units);
    let x_sum: i64 = x_units.iter().sum();
    let r_star = Rat(Rational::new(x_sum, lead_time as i64) * d.unit().0);
    let unit_value = d.unit().to_f64();
    let scenarios = final_eval.scenarios().count();
    Ok(LowerBoundSolution {
        instance: report::instance_fingerprint(d, c, h, &(lead_time as u64).to_le_bytes()),
        lead_time,
        unit: d.unit(),
        x_star: x_units.iter().map(|&v| v as f64 * unit_value).collect(),
        x_star_units: x_units,
        inventory_star_units: inventory_units,
        inventory_star: inventory_units as f64 * unit_value,
        objective: window.value,
        objective_stderr: window.stderr,
        r_star_below_mean: r_star.to_f64() < d.mean(),
        r_star,
        order_cap_units: scalars.q_units,
        inventory_cap_units: inventory_cap_units(d, c, h, lead_time)?,
        telemetry: LowerBoundTelemetry {
            starts: 0,
            sweeps: 0,
            evaluations: 1,
            seed: stream.seed(),
            scenarios,
            search_exact: objective_exact,
            objective_exact,
            best_start_objective: window.value,
            second_best_start_objective: None,
            expected_window_maxima,
            mean_argmax_index,
        },
    })
}

/// `E[V_k]` and the mean largest-argmax index of `V_k`, `k = 1..=L`, over
/// the evaluator's scenario set (first-`j` demand prefix convention, the
/// one the coupled panel uses).
fn window_maxima_stats(
    eval: &WindowCostEvaluator,
    x: &[i64],
    inv: i64,
) -> (Vec<f64>, Vec<f64>) {
    let l = x.len();
    let mut xsum = vec![0i64; l + 1];
    for k in 1..=l {
        xsum[k] = xsum[k - 1] + x[k - 1];
    }
    let mut mean_v = vec![0.0; l];
    let mut mean_arg = vec![0.0; l];
    for (seq, prob) in eval.scenarios() {
        let mut s = vec![0i64; l + 1];
        for j in 1..=l {
            s[j] = s[j - 1] + seq[j - 1];
        }
        for k in 1..=l {
            let (v, arg) = window_maximum(&xsum, &s, inv, k);
            mean_v[k - 1] += prob * v as f64;
            mean_arg[k - 1] += prob * arg as f64;
        }
    }
    (mean_v, mean_arg)
}

/// `V_k = max_j (sum of the last j orders - S_j + [j = k] I)` with the
/// largest attaining index.
fn window_maximum(xsum: &[i64], s: &[i64], inv: i64, k: usize) -> (i64, usize) {
    let mut best = i64::MIN;
    let mut arg = 0usize;
    for j in 0..=k {
        let mut cand = (xsum[k] - xsum[k - j]) - s[j];
        if j == k {
            cand += inv;
        }
        if cand >= best {
            best = cand;
            arg = j;
        }
    }
    (best, arg)
}

/// Second-moment accumulator over the per-sample aggregates the certificate
/// functionals combine: `a1 = sum_k W_k`, `a2 = sum_k (B_k - S_{i_k})`,
/// `a3 = sum_k V_k`, `b = V_L` (all in real value).
#[derive(Debug, Clone, Copy, Default)]
struct PanelMoments {
    a1: f64,
    a2: f64,
    a3: f64,
    b: f64,
    a1a1: f64,
    a2a2: f64,
    a3a3: f64,
    bb: f64,
    a1a2: f64,
    a1b: f64,
    a2b: f64,
    a3b: f64,
}

impl PanelMoments {
    fn push(&mut self, w: f64, a1: f64, a2: f64, a3: f64, b: f64) {
        self.a1 += w * a1;
        self.a2 += w * a2;
        self.a3 += w * a3;
        self.b += w * b;
        self.a1a1 += w * a1 * a1;
        self.a2a2 += w * a2 * a2;
        self.a3a3 += w * a3 * a3;
        self.bb += w * b * b;
        self.a1a2 += w * a1 * a2;
        self.a1b += w * a1 * b;
        self.a2b += w * a2 * b;
        self.a3b += w * a3 * b;
    }
}

/// Shared sample panel behind the constant-rate cost, the two lower-bound
/// forms, and the coupling audit. All expectations are sample means over
/// `samples` draws of `(D_1..D_L, J)` and are reported in real value.
#[derive(Debug, Clone)]
pub struct CoupledPanel {
    pub lead_time: usize,
    pub samples: usize,
    pub r_star: Rat,
    pub x_star_units: Vec<i64>,
    pub inventory_star_units: i64,
    pub unit_value: f64,
    pub mean_demand: f64,
    /// `E[V_k]`, `k = 1..=L`.
    pub mean_window_max: Vec<f64>,
    /// Mean largest-argmax index of `V_k`.
    pub mean_window_argmax: Vec<f64>,
    /// `E[W_k]` (walk maximum with terminal bonus).
    pub mean_walk_max: Vec<f64>,
    /// `E[i_k]` (largest walk argmax).
    pub mean_walk_argmax: Vec<f64>,
    /// `E[i_k r* - S_{i_k}]`.
    pub mean_walk_at_argmax: Vec<f64>,
    /// `E[B_k]`, the pipeline mass the walk index selects.
    pub mean_pipeline_window: Vec<f64>,
    /// `sum_k E[[i_k = k] J]`, the terminal-bonus mass.
    pub mean_terminal_bonus: f64,
    /// `E[V_L]`, the stand-in for the expected end-of-window inventory.
    pub mean_end_inventory: f64,
    /// Sample paths where `V_k` fell below the walk-index term; zero by
    /// construction.
    pub coupling_violations: u64,
    moments: PanelMoments,
}

/// Draws the shared panel for a solved lower bound. Needs `r* < E[D]` for
/// the stationary bonus draw.
pub fn coupled_panel(
    d: &DemandDistribution,
    sol: &LowerBoundSolution,
    samples: usize,
    stream: &mut Stream,
) -> Result<CoupledPanel> {
    if samples < 2 {
        return Err(Error::BadParameter("need at least 2 panel samples".into()));
    }
    if sol.unit != d.unit() {
        return Err(Error::LatticeMismatch(format!(
            "solution lattice {} differs from demand lattice {}",
            sol.unit, d.unit()
        )));
    }
    let l = sol.lead_time;
    let r_star = sol.r_star;
    if r_star.to_f64() >= d.mean() {
        return Err(Error::RStarDegenerate { rstar: r_star.to_string(), mean: d.mean() });
    }
    let sup = lindley::stationary_waiting(d, r_star, SUP_TOL)?;
    // Bonus draws live on the supremum lattice; scale them onto the demand
    // lattice times L, the resolution of the walk arithmetic below.
    let bonus_ratio = sup.unit.0 * Rational::from_integer(l as i64) / d.unit().0;
    if !bonus_ratio.is_integer() {
        return Err(Error::LatticeMismatch(format!(
            "supremum lattice {} does not refine the demand lattice {} over {l} periods",
            sup.unit, d.unit()
        )));
    }
    let bonus_factor = bonus_ratio.to_integer();

    let x = &sol.x_star_units;
    let inv = sol.inventory_star_units;
    let sum_x: i64 = x.iter().sum();
    let mut xsum = vec![0i64; l + 1];
    for k in 1..=l {
        xsum[k] = xsum[k - 1] + x[k - 1];
    }
    let unit_value = d.unit().to_f64();
    let li = l as i64;
    let lf = l as f64;

    let mut mean_window_max = vec![0.0; l];
    let mut mean_window_argmax = vec![0.0; l];
    let mut mean_walk_max = vec![0.0; l];
    let mut mean_walk_argmax = vec![0.0; l];
    let mut mean_walk_at_argmax = vec![0.0; l];
    let mut mean_pipeline_window = vec![0.0; l];
    let mut mean_terminal_bonus = 0.0;
    let mut mean_end_inventory = 0.0;
    let mut violations = 0u64;
    let mut moments = PanelMoments::default();
    let weight = 1.0 / samples as f64;

    let mut s = vec![0i64; l + 1];
    let mut walk = vec![0i64; l + 1];
    for _ in 0..samples {
        for j in 1..=l {
            let demand = d.draw(stream);
            s[j] = s[j - 1] + demand;
            // Walk value at index j, scaled by L to keep r* = sum_x / L
            // integral: j sum_x - L S_j.
            walk[j] = j as i64 * sum_x - li * s[j];
        }
        let bonus = sup.draw(stream) * bonus_factor;
        let mut a1 = 0.0;
        let mut a2 = 0.0;
        let mut a3 = 0.0;
        let mut end_inventory = 0.0;
        for k in 1..=l {
            let (walk_value, i_k) = walk_max_argmax(&walk[..=k], bonus);
            let (v_k, v_arg) = window_maximum(&xsum, &s, inv, k);
            let b_k = xsum[k] - xsum[k - i_k];
            let refined_term = b_k - s[i_k];
            let mut rhs = refined_term;
            if i_k == k {
                rhs += inv;
            }
            if v_k < rhs {
                violations += 1;
            }
            let walk_value = walk_value as f64 / lf * unit_value;
            let walk_at_argmax = (i_k as i64 * sum_x - li * s[i_k]) as f64 / lf * unit_value;
            let refined_value = refined_term as f64 * unit_value;
            let v_value = v_k as f64 * unit_value;
            mean_walk_max[k - 1] += weight * walk_value;
            mean_walk_argmax[k - 1] += weight * i_k as f64;
            mean_walk_at_argmax[k - 1] += weight * walk_at_argmax;
            mean_pipeline_window[k - 1] += weight * b_k as f64 * unit_value;
            mean_window_max[k - 1] += weight * v_value;
            mean_window_argmax[k - 1] += weight * v_arg as f64;
            if i_k == k {
                mean_terminal_bonus += weight * bonus as f64 / lf * unit_value;
            }
            a1 += walk_value;
            a2 += refined_value;
            a3 += v_value;
            if k == l {
                end_inventory = v_value;
            }
        }
        mean_end_inventory += weight * end_inventory;
        moments.push(weight, a1, a2, a3, end_inventory);
    }

    Ok(CoupledPanel {
        lead_time: l,
        samples,
        r_star,
        x_star_units: x.clone(),
        inventory_star_units: inv,
        unit_value,
        mean_demand: d.mean(),
        mean_window_max,
        mean_window_argmax,
        mean_walk_max,
        mean_walk_argmax,
        mean_walk_at_argmax,
        mean_pipeline_window,
        mean_terminal_bonus,
        mean_end_inventory,
        coupling_violations: violations,
        moments,
    })
}

impl CoupledPanel {
    fn x_sum_value(&self) -> f64 {
        self.x_star_units.iter().sum::<i64>() as f64 * self.unit_value
    }

    fn inventory_star_value(&self) -> f64 {
        self.inventory_star_units as f64 * self.unit_value
    }

    /// `E[V_L] - I* + L E[D] - sum x*`, the common penalty factor of both
    /// lower-bound forms.
    fn penalty_term(&self) -> f64 {
        self.mean_end_inventory - self.inventory_star_value()
            + self.lead_time as f64 * self.mean_demand
            - self.x_sum_value()
    }

    fn stderr_of(&self, variance: f64) -> f64 {
        (variance.max(0.0) / (self.samples as f64 - 1.0)).sqrt()
    }

    /// Window cost of the stationary constant-rate policy at `r*`:
    /// `h sum_k E[W_k] + c L (E[D] - r*)`, with its standard error.
    pub fn constant_policy_window_cost(&self, c: f64, h: f64) -> (f64, f64) {
        let m = &self.moments;
        let value = h * m.a1
            + c * self.lead_time as f64 * (self.mean_demand - self.r_star.to_f64());
        let var = h * h * (m.a1a1 - m.a1 * m.a1);
        (value, self.stderr_of(var))
    }

    /// Walk-form lower bound:
    /// `h sum_k E[B_k - S_{i_k}] + c (E[V_L] - I* + L E[D] - sum x*)`.
    pub fn refined_bound(&self, c: f64, h: f64) -> (f64, f64) {
        let m = &self.moments;
        let value = h * m.a2 + c * self.penalty_term();
        let var = h * h * (m.a2a2 - m.a2 * m.a2)
            + c * c * (m.bb - m.b * m.b)
            + 2.0 * h * c * (m.a2b - m.a2 * m.b);
        (value, self.stderr_of(var))
    }

    /// Direct start-state bound:
    /// `h sum_k E[V_k] + c (E[V_L] - I* + L E[D] - sum x*)`; the panel
    /// estimate of the window-cost functional itself.
    pub fn start_state_bound(&self, c: f64, h: f64) -> (f64, f64) {
        let m = &self.moments;
        let value = h * m.a3 + c * self.penalty_term();
        let var = h * h * (m.a3a3 - m.a3 * m.a3)
            + c * c * (m.bb - m.b * m.b)
            + 2.0 * h * c * (m.a3b - m.a3 * m.b);
        (value, self.stderr_of(var))
    }

    /// Constant-rate cost minus the refined bound, on shared samples.
    pub fn observed_gap(&self, c: f64, h: f64) -> (f64, f64) {
        let m = &self.moments;
        let pi = self.constant_policy_window_cost(c, h).0;
        let refined = self.refined_bound(c, h).0;
        // Random part: h (a1 - a2) - c b.
        let var_a1a2 = (m.a1a1 - m.a1 * m.a1) + (m.a2a2 - m.a2 * m.a2)
            - 2.0 * (m.a1a2 - m.a1 * m.a2);
        let var = h * h * var_a1a2 + c * c * (m.bb - m.b * m.b)
            - 2.0 * h * c * ((m.a1b - m.a1 * m.b) - (m.a2b - m.a2 * m.b));
        (pi - refined, self.stderr_of(var))
    }
}

/// Monte Carlo value of the walk-form lower bound at the solved start
/// state; a valid lower bound on the optimal policy's window cost.
pub fn refined_lower_bound(
    d: &DemandDistribution,
    c: f64,
    h: f64,
    lead_time: usize,
    sol: &LowerBoundSolution,
    samples: usize,
    stream: &mut Stream,
) -> Result<f64> {
    validate_costs(c, h)?;
    if lead_time != sol.lead_time {
        return Err(Error::BadParameter(format!(
            "lead time {lead_time} differs from the solution's {}",
            sol.lead_time
        )));
    }
    let panel = coupled_panel(d, sol, samples, stream)?;
    Ok(panel.refined_bound(c, h).0)
}

/// Counts sample paths violating `V_k >= B_k - S_{i_k} + [i_k = k] I*`.
/// A maximum dominates its value at any index, so the count is always zero;
/// a positive count would expose an indexing fault, not randomness.
pub fn coupling_check(
    d: &DemandDistribution,
    sol: &LowerBoundSolution,
    samples: usize,
    stream: &mut Stream,
) -> Result<u64> {
    let panel = coupled_panel(d, sol, samples, stream)?;
    Ok(panel.coupling_violations)
}

/// End-to-end gap certificate on one shared panel.
#[derive(Debug, Clone, Serialize)]
pub struct GapReport {
    pub instance: String,
    pub lead_time: usize,
    pub c: f64,
    pub h: f64,
    pub samples: usize,
    pub r_star: Rat,
    pub theta: f64,
    /// Constant-rate window cost (walk form) on the panel.
    pub constant_policy_window_cost: f64,
    pub constant_policy_stderr: f64,
    /// Walk-form lower bound on the panel.
    pub refined_lower_bound: f64,
    pub refined_stderr: f64,
    /// Direct start-state bound on the panel (diagnostic; equals the
    /// window-cost functional in expectation).
    pub start_state_lower_bound: f64,
    pub observed_gap: f64,
    pub observed_gap_stderr: f64,
    /// `h (Q + 2^{3/2} E[D]) Theta_{r*}^{-3} + c I*`.
    pub certified_bound: f64,
    pub coupling_violations: u64,
    /// Gap below the certified bound, refined below the constant-rate cost,
    /// and no coupling violations.
    pub pass: bool,
}

/// Evaluates the constant-rate cost and the refined bound on one coupled
/// panel and checks the observed gap against the certified bound. Requires
/// `r* < E[D]`.
pub fn gap_certificate(
    d: &DemandDistribution,
    c: f64,
    h: f64,
    lead_time: usize,
    sol: &LowerBoundSolution,
    samples: usize,
    stream: &mut Stream,
) -> Result<GapReport> {
    validate_costs(c, h)?;
    if lead_time != sol.lead_time {
        return Err(Error::BadParameter(format!(
            "lead time {lead_time} differs from the solution's {}",
            sol.lead_time
        )));
    }
    let scalars = demand::newsvendor(d, c, h)?;
    let panel = coupled_panel(d, sol, samples, stream)?;
    let theta = lindley::theta(d, panel.r_star)?.value();
    let (pi_cost, pi_stderr) = panel.constant_policy_window_cost(c, h);
    let (refined, refined_stderr) = panel.refined_bound(c, h);
    let (start_state, _) = panel.start_state_bound(c, h);
    let (gap, gap_stderr) = panel.observed_gap(c, h);
    let certified = h * (scalars.q + 2f64.powf(1.5) * d.mean()) * theta.powi(-3)
        + c * panel.inventory_star_value();
    // The refined bound cannot exceed the constant-rate cost at a window
    // minimizer; allow Monte Carlo noise on that sanity check.
    let pass = gap <= certified
        && gap + 4.0 * gap_stderr >= 0.0
        && panel.coupling_violations == 0;
    Ok(GapReport {
        instance: report::instance_fingerprint(d, c, h, &(lead_time as u64).to_le_bytes()),
        lead_time,
        c,
        h,
        samples: panel.samples,
        r_star: panel.r_star,
        theta,
        constant_policy_window_cost: pi_cost,
        constant_policy_stderr: pi_stderr,
        refined_lower_bound: refined,
        refined_stderr,
        start_state_lower_bound: start_state,
        observed_gap: gap,
        observed_gap_stderr: gap_stderr,
        certified_bound: certified,
        coupling_violations: panel.coupling_violations,
        pass,
    })
}

/// Margin report for `E[D] - r*` against the asymptotic hypothesis
/// `L >= 8 (Q / sigma + 1) m^{3/2}`.
#[derive(Debug, Clone, Serialize)]
pub struct RStarMargin {
    pub lead_time: usize,
    pub m: u64,
    /// `8 (Q / sigma + 1) m^{3/2}`; astronomical at desk scale.
    pub required_lead_time: f64,
    pub hypothesis_met: bool,
    /// `sigma m^{-1/2} / 2`, the margin the hypothesis would certify.
    pub promised_margin: f64,
    /// `E[D] - r*` as solved.
    pub observed_margin: f64,
    pub margin_positive: bool,
}

/// Reports whether the lead time reaches the regime where
/// `E[D] - r* >= sigma m^{-1/2} / 2` is guaranteed, and the margin actually
/// observed. Desk-scale lead times never reach the regime; the honest
/// output is `hypothesis_met = false` with the empirical margin alongside.
pub fn rstar_margin_check(
    d: &DemandDistribution,
    c: f64,
    h: f64,
    lead_time: usize,
    sol: &LowerBoundSolution,
) -> Result<RStarMargin> {
    validate_costs(c, h)?;
    let scalars = demand::newsvendor(d, c, h)?;
    let m = constant_m(d, c, h)?;
    let mf = m as f64;
    let required_lead_time = 8.0 * (scalars.q / d.sigma() + 1.0) * mf.powf(1.5);
    let observed_margin = d.mean() - sol.r_star.to_f64();
    Ok(RStarMargin {
        lead_time,
        m,
        required_lead_time,
        hypothesis_met: lead_time as f64 >= required_lead_time,
        promised_margin: 0.5 * d.sigma() / mf.sqrt(),
        observed_margin,
        margin_positive: observed_margin > 0.0,
    })
}

/// One normal-approximation comparison at sample size `n` and shift `y`.
#[derive(Debug, Clone, Serialize)]
pub struct SteinCheck {
    pub n: usize,
    pub shift: f64,
    pub samples: usize,
    /// Monte Carlo `E[max(0, n^{-1/2} sum X + shift)]` with
    /// `X = (D - E[D]) / sigma`.
    pub sample_mean: f64,
    pub stderr: f64,
    /// Quadrature `E[max(0, N + shift)]`.
    pub normal_value: f64,
    /// `|sample_mean - normal_value|`.
    pub lhs: f64,
    /// `3 n^{-1/2} E[|X|^3]`, the certified normal-approximation error for
    /// Lipschitz-1 functions.
    pub rhs: f64,
    pub pass: bool,
}

/// Compares the standardized demand sum against the normal limit through
/// the Lipschitz-1 test function `F(x) = max(0, x + shift)`; passes when
/// the discrepancy respects `3 n^{-1/2} E[|X|^3]` up to Monte Carlo noise.
pub fn stein_check(
    d: &DemandDistribution,
    shift: f64,
    n: usize,
    samples: usize,
    stream: &mut Stream,
) -> Result<SteinCheck> {
    if n == 0 {
        return Err(Error::BadParameter("sample size n must be at least 1".into()));
    }
    if samples < 2 {
        return Err(Error::BadParameter("need at least 2 Monte Carlo samples".into()));
    }
    if !shift.is_finite() {
        return Err(Error::BadParameter(format!("shift {shift} must be finite")));
    }
    let unit_value = d.unit().to_f64();
    let scale = 1.0 / (n as f64).sqrt();
    let mut sum = 0.0;
    let mut sumsq = 0.0;
    for _ in 0..samples {
        let mut std_sum = 0.0;
        for _ in 0..n {
            std_sum += (d.draw(stream) as f64 * unit_value - d.mean()) / d.sigma();
        }
        let f = (scale * std_sum + shift).max(0.0);
        sum += f;
        sumsq += f * f;
    }
    let nf = samples as f64;
    let sample_mean = sum / nf;
    let stderr = ((sumsq / nf - sample_mean * sample_mean).max(0.0) / (nf - 1.0)).sqrt();
    let normal_value = quad::psi(shift);
    let lhs = (sample_mean - normal_value).abs();
    let rhs = 3.0 * scale * d.skewness();
    Ok(SteinCheck {
        n,
        shift,
        samples,
        sample_mean,
        stderr,
        normal_value,
        lhs,
        rhs,
        pass: lhs <= rhs + 4.0 * stderr,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil;

    fn two_point() -> DemandDistribution {
        testutil::two_point()
    }

    /// Feasible solution pinned at a fixed start state, for tests that must
    /// not depend on where the optimizer lands.
    fn fixed_solution(
        d: &DemandDistribution,
        c: f64,
        h: f64,
        x_units: Vec<i64>,
        inventory_units: i64,
    ) -> LowerBoundSolution {
        let mut stream = Stream::from_seed(0xF1);
        fixed_start_solution(d, c, h, x_units, inventory_units, &mut stream).unwrap()
    }

    #[test]
    fn m_matches_hand_substitution_on_the_two_point_instance() {
        // zeta = sigma = E[D] = 1, c = h = 1: m = ceil((26 * 5)^2) = 16900.
        let d = two_point();
        assert_eq!(constant_m(&d, 1.0, 1.0).unwrap(), 16_900);
    }

    #[test]
    fn m_is_nonincreasing_in_h_and_at_least_26_squared() {
        let d = testutil::geometric(0.4, 1e-9);
        let mut prev = u64::MAX;
        for h in [0.25, 0.5, 1.0, 2.0, 4.0, 8.0] {
            let m = constant_m(&d, 3.0, h).unwrap();
            assert!(m <= prev, "m must not increase in h");
            assert!(m >= 26 * 26);
            prev = m;
        }
    }

    #[test]
    fn threshold_matches_an_independent_substitution() {
        // Second evaluator, written against the displayed formula with its
        // own arithmetic order.
        let d = two_point();
        let (c, h) = (1.0, 1.0);
        let eps = 0.5;
        let got = threshold_y(&d, c, h, eps).unwrap();
        let q = 0.0;
        let g = 1.0;
        let m = 16_900.0f64;
        let mu = 1.0;
        let e2 = 2.0; // E[D^2]
        let term1 = 16_384.0 * h * (q + (8.0f64).sqrt() * mu) * (mu * mu + e2).powi(3)
            / 1.0f64 // sigma^6
            * m
            * m
            * m
            / g
            / eps;
        let term2 = (12.0 * c / g * ((2.0 * c / h).sqrt() + 3.0)).powi(2) / (eps * eps);
        assert!((got.term_eps_inverse - term1).abs() / term1 < 1e-12);
        assert!((got.term_eps_inverse_squared - term2).abs() / term2 < 1e-12);
        assert!((got.y - term1.max(term2)).abs() / got.y < 1e-12);
        // At eps = 0.5 the cubic-in-m drift term is the larger by far.
        assert_eq!(got.binding, BindingTerm::EpsInverse);
        assert!(got.y > 1e18);
    }

    #[test]
    fn quadratic_term_binds_for_tiny_epsilon_and_y_decreases_in_epsilon() {
        let d = two_point();
        let tiny = threshold_y(&d, 1.0, 1.0, 1e-18).unwrap();
        assert_eq!(tiny.binding, BindingTerm::EpsInverseSquared);
        let mut prev = f64::INFINITY;
        for i in 1..10 {
            let eps = i as f64 / 10.0;
            let y = threshold_y(&d, 1.0, 1.0, eps).unwrap().y;
            assert!(y <= prev);
            prev = y;
        }
        assert!(matches!(
            threshold_y(&d, 1.0, 1.0, 1.0),
            Err(Error::BadEpsilon(_))
        ));
        assert!(matches!(
            threshold_y(&d, 1.0, 1.0, 0.0),
            Err(Error::BadEpsilon(_))
        ));
    }

    #[test]
    fn certificate_is_honest_about_desk_scale() {
        let d = two_point();
        let cert = asymptotic_certificate(&d, 1.0, 1.0, 4, 16, 0.5).unwrap();
        assert!(!cert.hypotheses_met);
        assert!(!cert.lead_time_ok);
        assert!(cert.required_lead_time > 1e9);
        assert!(cert.promised_ratio.is_none());
        assert!(cert.statement.contains("NOT met"));
        assert!(cert.statement.contains("not reproducible"));
        // Horizon check alone: T = 16 >= (1 + 6) * 4 = 28 fails too.
        assert!(!cert.horizon_ok);
        let wide = asymptotic_certificate(&d, 1.0, 1.0, 4, 28, 0.5).unwrap();
        assert!(wide.horizon_ok && !wide.hypotheses_met);
    }

    #[test]
    fn inventory_cap_substitution() {
        // c = h = 1, L = 4: factor = ceil(sqrt(8)) + 2 = 5, cap = 5 E[D].
        let d = two_point();
        assert_eq!(inventory_cap_units(&d, 1.0, 1.0, 4).unwrap(), 5);
        // The factor grows like sqrt(L).
        let c16 = inventory_cap_units(&d, 1.0, 1.0, 16).unwrap();
        let c64 = inventory_cap_units(&d, 1.0, 1.0, 64).unwrap();
        assert!(c16 < c64 && c64 <= 2 * c16 + 4);
    }

    #[test]
    fn optimizer_matches_an_exhaustive_grid_at_lead_time_two() {
        // c/h = 4 keeps Q = 2, so the box {0,1,2}^2 x {0..cap} is tiny.
        let d = two_point();
        let (c, h) = (4.0, 1.0);
        let mut stream = Stream::from_seed(7);
        let sol = lower_bound_optimize(&d, c, h, 2, 100_000, &mut stream).unwrap();
        let eval = WindowCostEvaluator::new_exact(&d, c, h, 2).unwrap();
        let cap = inventory_cap_units(&d, c, h, 2).unwrap();
        let mut best = f64::INFINITY;
        let mut arg = (vec![0i64, 0], 0i64);
        for x1 in 0..=2i64 {
            for x2 in 0..=2i64 {
                for inv in 0..=cap {
                    let v = eval.evaluate(&[x1, x2], inv).value;
                    if v < best {
                        best = v;
                        arg = (vec![x1, x2], inv);
                    }
                }
            }
        }
        assert!(
            (sol.objective - best).abs() < 1e-9,
            "optimizer {} vs grid {best} at {arg:?}",
            sol.objective
        );
        assert!(sol.objective <= c * 2.0 * d.mean() + 1e-12);
        assert!(sol.telemetry.search_exact && sol.telemetry.objective_exact);
        assert_eq!(sol.objective_stderr, 0.0);
    }

    #[test]
    fn optimizer_respects_the_zero_solution_value_bound() {
        for (c, h) in [(1.0, 1.0), (9.0, 1.0), (1.0, 4.0)] {
            let d = testutil::geometric(0.5, 1e-8);
            let mut stream = Stream::from_seed(11);
            let sol = lower_bound_optimize(&d, c, h, 3, 500_000, &mut stream).unwrap();
            assert!(sol.objective <= c * 3.0 * d.mean() + 1e-12);
            assert_eq!(sol.x_star_units.len(), 3);
            for (i, &xu) in sol.x_star_units.iter().enumerate() {
                assert!(
                    (0..=sol.order_cap_units).contains(&xu),
                    "x*[{i}] = {xu} outside [0, {}]",
                    sol.order_cap_units
                );
            }
            assert!((0..=sol.inventory_cap_units).contains(&sol.inventory_star_units));
            assert_eq!(
                sol.r_star_below_mean,
                sol.r_star.to_f64() < d.mean(),
                "degeneracy flag must match the rate"
            );
        }
    }

    #[test]
    fn optimizer_budget_is_enforced() {
        let d = two_point();
        let mut stream = Stream::from_seed(3);
        let err = lower_bound_optimize(&d, 4.0, 1.0, 2, 16, &mut stream).unwrap_err();
        assert!(matches!(err, Error::BudgetExceeded { .. }), "got {err:?}");
    }

    #[test]
    fn panel_constant_cost_matches_the_stationary_identity() {
        // E[W_k] = E[I^r_inf] for every k, so the walk-form window cost is
        // L times the stationary per-period cost; here r* = 2/3.
        let d = two_point();
        let (c, h) = (4.0, 1.0);
        let sol = fixed_solution(&d, c, h, vec![1, 0, 1], 0);
        let mut stream = Stream::from_seed(21);
        let panel = coupled_panel(&d, &sol, 60_000, &mut stream).unwrap();
        let (pi, pi_stderr) = panel.constant_policy_window_cost(c, h);
        let sup = lindley::stationary_waiting(&d, sol.r_star, 1e-12).unwrap();
        let per_period = policy::stationary_cost(&d, c, h, sol.r_star, &sup).unwrap();
        let want = 3.0 * per_period;
        assert!(
            (pi - want).abs() <= 5.0 * pi_stderr.max(1e-9),
            "panel {pi} vs exact {want} (stderr {pi_stderr})"
        );
    }

    #[test]
    fn panel_start_state_bound_matches_the_window_functional() {
        let d = two_point();
        let (c, h) = (4.0, 1.0);
        let sol = fixed_solution(&d, c, h, vec![1, 0, 1], 1);
        let mut stream = Stream::from_seed(22);
        let panel = coupled_panel(&d, &sol, 60_000, &mut stream).unwrap();
        let (start_state, stderr) = panel.start_state_bound(c, h);
        let exact = WindowCostEvaluator::new_exact(&d, c, h, 3)
            .unwrap()
            .evaluate(&sol.x_star_units, sol.inventory_star_units)
            .value;
        assert!(
            (start_state - exact).abs() <= 5.0 * stderr.max(1e-9),
            "panel {start_state} vs exact {exact} (stderr {stderr})"
        );
    }

    #[test]
    fn refined_bound_never_exceeds_the_start_state_bound() {
        for seed in [1u64, 2, 3] {
            let d = testutil::geometric(0.5, 1e-8);
            let (c, h) = (9.0, 1.0);
            let sol = fixed_solution(&d, c, h, vec![1, 0, 1, 0], 2);
            let mut stream = Stream::from_seed(seed);
            let panel = coupled_panel(&d, &sol, 20_000, &mut stream).unwrap();
            let refined = panel.refined_bound(c, h).0;
            let start_state = panel.start_state_bound(c, h).0;
            // Pathwise V_k >= B_k - S_{i_k}; averaging preserves it exactly.
            assert!(refined <= start_state + 1e-9);
            assert_eq!(panel.coupling_violations, 0);
        }
    }

    #[test]
    fn coupling_expectation_inequality_holds_on_sample_averages() {
        let d = two_point();
        let sol = fixed_solution(&d, 4.0, 1.0, vec![1, 0, 1, 1], 1);
        let mut stream = Stream::from_seed(5);
        let panel = coupled_panel(&d, &sol, 30_000, &mut stream).unwrap();
        // sum_k E[i_k r* - S_{i_k}] - sum_k E[V_k]
        //   <= r* sum_k E[i_k] - sum_k E[B_k], with the shared samples
        // making both sides exact sample identities.
        let lhs: f64 = panel.mean_walk_at_argmax.iter().sum::<f64>()
            - panel.mean_window_max.iter().sum::<f64>();
        let r = panel.r_star.to_f64();
        let rhs: f64 = r * panel.mean_walk_argmax.iter().sum::<f64>()
            - panel.mean_pipeline_window.iter().sum::<f64>();
        assert!(lhs <= rhs + 1e-9, "lhs {lhs} vs rhs {rhs}");
    }

    #[test]
    fn gap_certificate_passes_and_bounds_are_ordered() {
        let d = two_point();
        let (c, h) = (1.0, 1.0);
        let mut stream = Stream::from_seed(17);
        let sol = lower_bound_optimize(&d, c, h, 3, 500_000, &mut stream).unwrap();
        let report = gap_certificate(&d, c, h, 3, &sol, 40_000, &mut stream).unwrap();
        assert!(report.pass, "{report:?}");
        assert_eq!(report.coupling_violations, 0);
        assert!(report.refined_lower_bound <= report.constant_policy_window_cost + 1e-9);
        assert!(report.observed_gap <= report.certified_bound);
        assert!(
            (report.observed_gap
                - (report.constant_policy_window_cost - report.refined_lower_bound))
                .abs()
                < 1e-12
        );
    }

    #[test]
    fn gap_certificate_on_a_fixed_interior_solution() {
        // Not a minimizer, so only the structural facts are asserted: the
        // coupling holds, the gap respects the certified bound, and the
        // refined bound sits below the start-state bound.
        let d = two_point();
        let (c, h) = (2.0, 1.0);
        let sol = fixed_solution(&d, c, h, vec![1, 0, 1], 1);
        let mut stream = Stream::from_seed(37);
        let report = gap_certificate(&d, c, h, 3, &sol, 30_000, &mut stream).unwrap();
        assert_eq!(report.coupling_violations, 0);
        assert!(report.observed_gap <= report.certified_bound);
        assert!(report.refined_lower_bound <= report.start_state_lower_bound + 1e-9);
        assert!((report.r_star.to_f64() - 2.0 / 3.0).abs() < 1e-15);
        let want_theta = (1.0 - 2.0 / 3.0) * (1.0 - 2.0 / 3.0) / 12.0;
        assert!((report.theta - want_theta).abs() < 1e-15);
    }

    #[test]
    fn certified_bound_substitution_at_theta_one_twelfth() {
        // Two-point demand at r* = 0: Theta = 1/12, Q = 0 at c = h = 1, so
        // the bound is 2^{3/2} * 12^3 + I*.
        let d = two_point();
        let sol = zero_solution(&d, 1.0, 1.0, 2);
        let mut stream = Stream::from_seed(9);
        let report = gap_certificate(&d, 1.0, 1.0, 2, &sol, 5_000, &mut stream).unwrap();
        let want = (8.0f64).sqrt() * 12.0f64.powi(3);
        assert!((report.certified_bound - want).abs() < 1e-9);
        assert!((report.theta - 1.0 / 12.0).abs() < 1e-15);
    }

    /// All-zero start state: the pipeline-empty fallback whose objective is
    /// exactly `c L E[D]`.
    fn zero_solution(d: &DemandDistribution, c: f64, h: f64, lead_time: usize) -> LowerBoundSolution {
        fixed_solution(d, c, h, vec![0; lead_time], 0)
    }

    #[test]
    fn fixed_start_solution_reports_the_exact_window_cost() {
        let d = two_point();
        let mut stream = Stream::from_seed(2);
        let sol = fixed_start_solution(&d, 4.0, 1.0, vec![2, 1], 3, &mut stream).unwrap();
        let want = WindowCostEvaluator::new_exact(&d, 4.0, 1.0, 2)
            .unwrap()
            .evaluate(&[2, 1], 3)
            .value;
        assert_eq!(sol.objective, want);
        assert!(sol.telemetry.objective_exact);
        assert!((sol.r_star.to_f64() - 1.5).abs() < 1e-15);
        assert!(!sol.r_star_below_mean);
        assert!(fixed_start_solution(&d, 1.0, 1.0, vec![], 0, &mut stream).is_err());
        assert!(fixed_start_solution(&d, 1.0, 1.0, vec![0], -1, &mut stream).is_err());
    }

    #[test]
    fn zero_start_refined_bound_is_the_pure_penalty_value() {
        // x* = 0, I* = 0: every V_k = 0, B_k = 0, S_{i_k} = 0 at the
        // argmax (the walk at rate 0 peaks where no demand has arrived),
        // so the bound collapses to c L E[D].
        let d = two_point();
        let sol = zero_solution(&d, 1.0, 1.0, 3);
        let mut stream = Stream::from_seed(13);
        let value = refined_lower_bound(&d, 1.0, 1.0, 3, &sol, 5_000, &mut stream).unwrap();
        assert!((value - 3.0).abs() < 1e-12, "got {value}");
        let violations = coupling_check(&d, &sol, 5_000, &mut stream).unwrap();
        assert_eq!(violations, 0);
    }

    #[test]
    fn degenerate_rate_is_a_named_error() {
        let d = two_point();
        let sol = fixed_solution(&d, 1.0, 1.0, vec![1, 1], 0); // r* = 1 = E[D]
        assert!(!sol.r_star_below_mean);
        let mut stream = Stream::from_seed(1);
        let err = gap_certificate(&d, 1.0, 1.0, 2, &sol, 100, &mut stream).unwrap_err();
        assert!(matches!(err, Error::RStarDegenerate { .. }), "got {err:?}");
        let err = refined_lower_bound(&d, 1.0, 1.0, 2, &sol, 100, &mut stream).unwrap_err();
        assert!(matches!(err, Error::RStarDegenerate { .. }));
    }

    #[test]
    fn rstar_margin_reports_the_astronomical_hypothesis() {
        let d = two_point();
        let sol = zero_solution(&d, 1.0, 1.0, 4);
        let report = rstar_margin_check(&d, 1.0, 1.0, 4, &sol).unwrap();
        // 8 (0 + 1) 16900^{3/2} = 8 * 16900^{1.5} ~ 1.76e7.
        assert!((report.required_lead_time - 8.0 * 16_900.0f64.powf(1.5)).abs() < 1.0);
        assert!(!report.hypothesis_met);
        assert!(report.margin_positive);
        assert!((report.observed_margin - 1.0).abs() < 1e-15);
        assert!((report.promised_margin - 0.5 / (16_900.0f64).sqrt()).abs() < 1e-12);
    }

    /// Exact `E[max(0, n^{-1/2} sum X + shift)]` for the standardized
    /// two-point demand: `X` is a fair sign flip, so the sum is `2 K - n`
    /// with `K` binomial(n, 1/2).
    fn exact_two_point_stein(n: usize, shift: f64) -> f64 {
        let mut pmf = vec![0.0f64; n + 1];
        pmf[0] = 0.5f64.powi(n as i32);
        for k in 0..n {
            pmf[k + 1] = pmf[k] * (n - k) as f64 / (k + 1) as f64;
        }
        let scale = 1.0 / (n as f64).sqrt();
        (0..=n)
            .map(|k| pmf[k] * (scale * (2.0 * k as f64 - n as f64) + shift).max(0.0))
            .sum()
    }

    #[test]
    fn stein_check_matches_the_exact_binomial_oracle() {
        let d = two_point();
        let mut stream = Stream::from_seed(29);
        for n in [4usize, 16, 64] {
            for shift in [-1.0, 0.0, 1.0] {
                let check = stein_check(&d, shift, n, 40_000, &mut stream).unwrap();
                let exact = exact_two_point_stein(n, shift);
                assert!(
                    (check.sample_mean - exact).abs() <= 5.0 * check.stderr,
                    "n = {n}, shift = {shift}: mc {} vs exact {exact}",
                    check.sample_mean
                );
                assert!(check.pass, "n = {n}, shift = {shift}: {check:?}");
                assert!((check.rhs - 3.0 / (n as f64).sqrt()).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn stein_discrepancy_is_large_but_certified_at_n_equal_one() {
        // One standardized two-point draw: E[max(0, X)] = 1/2 against
        // psi(0) ~ 0.39894; the certified error 3 E|X|^3 = 3 easily covers
        // the true discrepancy ~ 0.101.
        let d = two_point();
        let mut stream = Stream::from_seed(31);
        let check = stein_check(&d, 0.0, 1, 60_000, &mut stream).unwrap();
        assert!((exact_two_point_stein(1, 0.0) - 0.5).abs() < 1e-15);
        assert!((check.sample_mean - 0.5).abs() <= 5.0 * check.stderr);
        assert!((check.lhs - 0.101).abs() < 0.02);
        assert!(check.pass);
    }

    #[test]
    fn constants_report_collects_consistent_scalars() {
        let d = two_point();
        let rates = [Rat::from_int(0), Rat::new(1, 2)];
        let eps = [0.5, 0.25];
        let report = constants_report(&d, 1.0, 1.0, &rates, &eps).unwrap();
        assert_eq!(report.m, 16_900);
        assert_eq!(report.q_units, 0);
        assert!((report.g - 1.0).abs() < 1e-15);
        assert!((report.sigma - 1.0).abs() < 1e-15);
        assert!((report.zeta - 1.0).abs() < 1e-15);
        // Never ordering is optimal at c = h = 1 on this instance.
        assert!(report.z.is_zero());
        assert!((report.z_cost - 1.0).abs() < 1e-12);
        assert!((report.thetas[0].theta - 1.0 / 12.0).abs() < 1e-15);
        assert!((report.thetas[1].theta - 1.0 / 48.0).abs() < 1e-15);
        assert_eq!(report.thresholds.len(), 2);
        assert!(report.thresholds[0].y >= report.thresholds[0].term_eps_inverse);
        assert!(report.thresholds[0].y >= report.thresholds[0].term_eps_inverse_squared);
    }
}
