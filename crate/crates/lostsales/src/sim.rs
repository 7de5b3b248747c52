//! Trajectory simulation and the exact window-cost functional.
//!
//! Dynamics per period: receive the head of the pipeline, place an order
//! (zero after period `T`), realize demand, lose what cannot be served.
//! Everything runs in integer lattice units; only costs and statistics are
//! floats. Demand randomness and policy randomness come from separate
//! streams so that a policy can never peek at demand through shared state.

use crate::demand::DemandDistribution;
use crate::lattice::Rat;
use crate::policy::{CompiledPolicy, Policy, SystemState};
use crate::stream::Stream;
use crate::{Error, Result};
use rayon::prelude::*;
use serde::Serialize;

/// Work cap for exact window-cost enumeration.
const WINDOW_BUDGET: u128 = 4_000_000;

/// One period of a trajectory, in lattice units.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct StepRecord {
    pub t: usize,
    /// `I_t`: on-hand at the start of the period, before the receipt.
    pub inventory: i64,
    /// `x_{1,t}`: units received this period.
    pub receipt: i64,
    /// Order placed this period (0 after period `T`).
    pub order: i64,
    pub demand: i64,
    /// `N_t`: lost sales.
    pub lost: i64,
    /// `I_{t+1}`.
    pub inventory_next: i64,
}

/// A simulated path over periods `1..=T+L`.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub unit: Rat,
    pub lead_time: usize,
    pub horizon: usize,
    pub steps: Vec<StepRecord>,
}

impl Trajectory {
    /// `C_t = h I_{t+1} + c N_t` in money.
    pub fn cost(&self, step: &StepRecord, c: f64, h: f64) -> f64 {
        let u = self.unit.to_f64();
        h * step.inventory_next as f64 * u + c * step.lost as f64 * u
    }

    /// Total cost over the penalized window `t in [L+1, T+L]`.
    pub fn window_cost(&self, c: f64, h: f64) -> f64 {
        self.steps
            .iter()
            .filter(|s| s.t > self.lead_time)
            .map(|s| self.cost(s, c, h))
            .sum()
    }
}

/// Replication statistics for a window cost.
#[derive(Debug, Clone, Serialize)]
pub struct CostSummary {
    pub mean: f64,
    pub stderr: f64,
    pub reps: usize,
    /// Penalized window `[L+1, T+L]`.
    pub window: [usize; 2],
}

/// Single-run statistics with batch-mean error bars.
#[derive(Debug, Clone, Serialize)]
pub struct LongRunSummary {
    /// Mean per-period cost over the measured stretch.
    pub per_period_mean: f64,
    /// Standard error from 30 batch means.
    pub stderr: f64,
    pub periods: usize,
    pub warmup: usize,
    pub batches: usize,
}

/// Core stepper: demands come from a closure so tests can script them.
fn run_trajectory(
    policy: &CompiledPolicy,
    unit: Rat,
    lead_time: usize,
    horizon: usize,
    mut next_demand: impl FnMut() -> i64,
    policy_stream: &mut Stream,
    mut on_step: impl FnMut(&StepRecord),
) {
    let mut inventory = 0i64;
    let mut pipeline = vec![0i64; lead_time];
    let _ = unit;
    for t in 1..=horizon + lead_time {
        let receipt = pipeline[0];
        let order = if t <= horizon {
            let state = SystemState { period: t, inventory, pipeline: pipeline.clone() };
            let q = policy.order(&state, policy_stream);
            debug_assert!(q >= 0, "orders must be non-negative");
            q
        } else {
            0
        };
        pipeline.rotate_left(1);
        pipeline[lead_time - 1] = order;
        let demand = next_demand();
        let on_hand = inventory + receipt;
        let inventory_next = (on_hand - demand).max(0);
        let lost = (demand - on_hand).max(0);
        on_step(&StepRecord { t, inventory, receipt, order, demand, lost, inventory_next });
        inventory = inventory_next;
    }
}

fn validate_horizon(lead_time: usize, horizon: usize) -> Result<()> {
    if lead_time == 0 {
        return Err(Error::BadParameter("lead time must be at least 1".into()));
    }
    if horizon == 0 {
        return Err(Error::BadParameter("horizon must be at least 1".into()));
    }
    Ok(())
}

/// One full trajectory under `policy`, demands drawn from `demand_stream`.
pub fn simulate_one(
    policy: &Policy,
    d: &DemandDistribution,
    lead_time: usize,
    horizon: usize,
    demand_stream: &mut Stream,
    policy_stream: &mut Stream,
) -> Result<Trajectory> {
    validate_horizon(lead_time, horizon)?;
    let unit = policy.working_unit(d)?;
    let scaled = d.rescale(unit)?;
    let compiled = policy.compile(&scaled, unit)?;
    let mut steps = Vec::with_capacity(horizon + lead_time);
    run_trajectory(
        &compiled,
        unit,
        lead_time,
        horizon,
        || scaled.draw(demand_stream),
        policy_stream,
        |s| steps.push(*s),
    );
    Ok(Trajectory { unit, lead_time, horizon, steps })
}

/// Scripted-demand trajectory for audits: demands are taken verbatim from
/// `demands` (lattice units on the policy's working lattice).
pub fn replay(
    policy: &Policy,
    d: &DemandDistribution,
    lead_time: usize,
    horizon: usize,
    demands: &[i64],
    policy_stream: &mut Stream,
) -> Result<Trajectory> {
    validate_horizon(lead_time, horizon)?;
    if demands.len() < horizon + lead_time {
        return Err(Error::BadParameter(format!(
            "need {} scripted demands, got {}",
            horizon + lead_time,
            demands.len()
        )));
    }
    let unit = policy.working_unit(d)?;
    let scaled = d.rescale(unit)?;
    let compiled = policy.compile(&scaled, unit)?;
    let mut steps = Vec::with_capacity(horizon + lead_time);
    let mut i = 0;
    run_trajectory(
        &compiled,
        unit,
        lead_time,
        horizon,
        || {
            let v = demands[i];
            i += 1;
            v
        },
        policy_stream,
        |s| steps.push(*s),
    );
    Ok(Trajectory { unit, lead_time, horizon, steps })
}

/// Expected window cost by independent replications. Replication `i` uses
/// the demand stream `(root_seed, "sim-demand", i)` and the policy stream
/// `(root_seed, "sim-policy", i)`; results merge in replication order.
pub fn simulate(
    policy: &Policy,
    d: &DemandDistribution,
    c: f64,
    h: f64,
    lead_time: usize,
    horizon: usize,
    reps: usize,
    root_seed: u64,
) -> Result<CostSummary> {
    validate_horizon(lead_time, horizon)?;
    if reps < 2 {
        return Err(Error::BadParameter("need at least 2 replications".into()));
    }
    let unit = policy.working_unit(d)?;
    let scaled = d.rescale(unit)?;
    let compiled = policy.compile(&scaled, unit)?;
    let u = unit.to_f64();
    let costs: Vec<f64> = (0..reps)
        .into_par_iter()
        .map(|i| {
            let mut demand_stream = Stream::child(root_seed, "sim-demand", i as u64);
            let mut policy_stream = Stream::child(root_seed, "sim-policy", i as u64);
            let mut total = 0.0;
            run_trajectory(
                &compiled,
                unit,
                lead_time,
                horizon,
                || scaled.draw(&mut demand_stream),
                &mut policy_stream,
                |s| {
                    if s.t > lead_time {
                        total += h * s.inventory_next as f64 * u + c * s.lost as f64 * u;
                    }
                },
            );
            total
        })
        .collect();
    let n = reps as f64;
    let mean = costs.iter().sum::<f64>() / n;
    let var = costs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    Ok(CostSummary {
        mean,
        stderr: (var / n).sqrt(),
        reps,
        window: [lead_time + 1, horizon + lead_time],
    })
}

/// Per-period cost of a stationary policy from one long run. The policy
/// orders every period (no terminal zero-order stretch); costs are measured
/// for `periods` periods after `warmup` periods, with error bars from 30
/// batch means (consecutive per-period costs are autocorrelated, batches
/// are nearly independent).
pub fn simulate_long_run(
    policy: &Policy,
    d: &DemandDistribution,
    c: f64,
    h: f64,
    lead_time: usize,
    periods: usize,
    warmup: usize,
    root_seed: u64,
) -> Result<LongRunSummary> {
    const BATCHES: usize = 30;
    validate_horizon(lead_time, periods)?;
    if periods < 10 * BATCHES {
        return Err(Error::BadParameter(format!(
            "need at least {} measured periods for batch means",
            10 * BATCHES
        )));
    }
    let unit = policy.working_unit(d)?;
    let scaled = d.rescale(unit)?;
    let compiled = policy.compile(&scaled, unit)?;
    let u = unit.to_f64();
    let mut demand_stream = Stream::child(root_seed, "longrun-demand", 0);
    let mut policy_stream = Stream::child(root_seed, "longrun-policy", 0);
    let batch_len = periods / BATCHES;
    let measured = batch_len * BATCHES;
    let mut batch_sums = vec![0.0f64; BATCHES];
    // Horizon = warmup + measured so ordering never stops inside the run.
    run_trajectory(
        &compiled,
        unit,
        lead_time,
        warmup + measured,
        || scaled.draw(&mut demand_stream),
        &mut policy_stream,
        |s| {
            if s.t > warmup && s.t <= warmup + measured {
                let k = (s.t - warmup - 1) / batch_len;
                batch_sums[k] += h * s.inventory_next as f64 * u + c * s.lost as f64 * u;
            }
        },
    );
    let means: Vec<f64> = batch_sums.iter().map(|b| b / batch_len as f64).collect();
    let grand = means.iter().sum::<f64>() / BATCHES as f64;
    let var =
        means.iter().map(|m| (m - grand) * (m - grand)).sum::<f64>() / (BATCHES as f64 - 1.0);
    Ok(LongRunSummary {
        per_period_mean: grand,
        stderr: (var / BATCHES as f64).sqrt(),
        periods: measured,
        warmup,
        batches: BATCHES,
    })
}

/// Expected cost of an L-period window that starts with pipeline `x` and
/// on-hand `inv`, under any policy (orders placed inside the window arrive
/// after it, so none affect these L periods):
///
/// ```text
/// h sum_{k=1}^{L} E[ max_{0<=j<=k} ( sum_{i=k+1-j}^{k} (x_i - D_i) + [j=k] inv ) ]
///   + c ( E[I_end] - inv + L E[D] - sum_i x_i )
/// ```
///
/// where `I_end` is the `k = L` maximum. `x` and `inv` live on the lattice
/// of `d`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct WindowCost {
    pub value: f64,
    pub holding: f64,
    pub penalty: f64,
    /// Monte Carlo standard error; zero in exact mode.
    pub stderr: f64,
}

/// Demand scenarios for window-cost evaluation: exact enumeration with
/// probabilities, or a fixed Monte Carlo scenario matrix (common random
/// numbers across evaluations).
#[derive(Debug, Clone)]
pub struct WindowCostEvaluator {
    lead_time: usize,
    unit_value: f64,
    mean_demand: f64,
    c: f64,
    h: f64,
    scenarios: Vec<(Vec<i64>, f64)>,
    exact: bool,
}

impl WindowCostEvaluator {
    /// Exact enumeration over all demand sequences of length `lead_time`.
    pub fn new_exact(
        d: &DemandDistribution,
        c: f64,
        h: f64,
        lead_time: usize,
    ) -> Result<Self> {
        validate_horizon(lead_time, 1)?;
        let atoms = d.atoms_units();
        let probs = d.probs();
        let needed = (atoms.len() as u128).pow(lead_time as u32);
        if needed > WINDOW_BUDGET {
            return Err(Error::BudgetExceeded {
                what: "exact window-cost enumeration",
                needed,
                budget: WINDOW_BUDGET,
            });
        }
        let mut scenarios = Vec::with_capacity(needed as usize);
        let mut idx = vec![0usize; lead_time];
        loop {
            let seq: Vec<i64> = idx.iter().map(|&i| atoms[i]).collect();
            let prob: f64 = idx.iter().map(|&i| probs[i]).product();
            scenarios.push((seq, prob));
            let mut pos = 0;
            loop {
                if pos == lead_time {
                    return Ok(WindowCostEvaluator {
                        lead_time,
                        unit_value: d.unit().to_f64(),
                        mean_demand: d.mean(),
                        c,
                        h,
                        scenarios,
                        exact: true,
                    });
                }
                idx[pos] += 1;
                if idx[pos] < atoms.len() {
                    break;
                }
                idx[pos] = 0;
                pos += 1;
            }
        }
    }

    /// Fixed scenario matrix of `samples` demand sequences.
    pub fn new_mc(
        d: &DemandDistribution,
        c: f64,
        h: f64,
        lead_time: usize,
        samples: usize,
        stream: &mut Stream,
    ) -> Result<Self> {
        validate_horizon(lead_time, 1)?;
        if samples < 2 {
            return Err(Error::BadParameter("need at least 2 scenarios".into()));
        }
        let w = 1.0 / samples as f64;
        let scenarios = (0..samples)
            .map(|_| ((0..lead_time).map(|_| d.draw(stream)).collect(), w))
            .collect();
        Ok(WindowCostEvaluator {
            lead_time,
            unit_value: d.unit().to_f64(),
            mean_demand: d.mean(),
            c,
            h,
            scenarios,
            exact: false,
        })
    }

    pub fn is_exact(&self) -> bool {
        self.exact
    }

    pub fn lead_time(&self) -> usize {
        self.lead_time
    }

    /// Demand scenarios with their probabilities, for callers that evaluate
    /// further statistics on the same scenario set.
    pub(crate) fn scenarios(&self) -> impl Iterator<Item = (&[i64], f64)> {
        self.scenarios.iter().map(|(seq, p)| (seq.as_slice(), *p))
    }

    /// Window cost for start state `(x, inv)` in lattice units.
    pub fn evaluate(&self, x: &[i64], inv: i64) -> WindowCost {
        assert_eq!(x.len(), self.lead_time, "pipeline length must equal the lead time");
        assert!(inv >= 0 && x.iter().all(|&v| v >= 0), "start state must be non-negative");
        let l = self.lead_time;
        let mut xsum = vec![0i64; l + 1];
        for k in 1..=l {
            xsum[k] = xsum[k - 1] + x[k - 1];
        }
        let mut holding_units = 0.0;
        let mut end_units = 0.0;
        let mut sq = 0.0;
        for (seq, prob) in &self.scenarios {
            let mut dsum = vec![0i64; l + 1];
            for k in 1..=l {
                dsum[k] = dsum[k - 1] + seq[k - 1];
            }
            let mut path_units = 0i64;
            let mut last = 0i64;
            for k in 1..=l {
                // max over j = 0..=k of (x-sum - d-sum over the last j
                // periods), inventory carried in only at j = k.
                let mut best = i64::MIN;
                for j in 0..=k {
                    let mut cand = (xsum[k] - xsum[k - j]) - (dsum[k] - dsum[k - j]);
                    if j == k {
                        cand += inv;
                    }
                    if cand > best {
                        best = cand;
                    }
                }
                path_units += best;
                last = best;
            }
            holding_units += prob * path_units as f64;
            end_units += prob * last as f64;
            // Per-path random part: holding sum plus the end-inventory term
            // of the penalty; everything else is deterministic in (x, inv).
            let path_random =
                (self.h * path_units as f64 + self.c * last as f64) * self.unit_value;
            sq += prob * path_random * path_random;
        }
        let holding = self.h * holding_units * self.unit_value;
        let xsum_value = xsum[l] as f64 * self.unit_value;
        let inv_value = inv as f64 * self.unit_value;
        let penalty = self.c
            * (end_units * self.unit_value - inv_value + l as f64 * self.mean_demand
                - xsum_value);
        let stderr = if self.exact {
            0.0
        } else {
            // sq and mean are probability-weighted, so sq - mean^2 is the
            // population variance and the mean's standard error divides the
            // unbiased variance by n: sqrt(var / (n - 1)).
            let n = self.scenarios.len() as f64;
            let mean = (self.h * holding_units + self.c * end_units) * self.unit_value;
            ((sq - mean * mean).max(0.0) / (n - 1.0)).sqrt()
        };
        WindowCost { value: holding + penalty, holding, penalty, stderr }
    }
}

/// One-call exact/MC window cost.
pub fn window_cost_formula(
    d: &DemandDistribution,
    c: f64,
    h: f64,
    x: &[i64],
    inv: i64,
    mc_samples: Option<(usize, &mut Stream)>,
) -> Result<WindowCost> {
    let eval = match mc_samples {
        None => WindowCostEvaluator::new_exact(d, c, h, x.len())?,
        Some((samples, stream)) => WindowCostEvaluator::new_mc(d, c, h, x.len(), samples, stream)?,
    };
    Ok(eval.evaluate(x, inv))
}

/// Lost-sales conservation over `[t1, t2)`:
/// `sum N_t - (I_{t2} - I_{t1} + sum D_t - sum receipts)`; exactly 0 on the
/// lattice for every trajectory.
pub fn conservation_check(traj: &Trajectory, t1: usize, t2: usize) -> Result<i64> {
    let last = traj.horizon + traj.lead_time;
    if !(1 <= t1 && t1 < t2 && t2 <= last + 1) {
        return Err(Error::BadParameter(format!(
            "window [{t1}, {t2}) must sit inside [1, {}]",
            last + 1
        )));
    }
    let inv_at = |t: usize| -> i64 {
        if t <= last {
            traj.steps[t - 1].inventory
        } else {
            traj.steps[last - 1].inventory_next
        }
    };
    let mut lost = 0i64;
    let mut demand = 0i64;
    let mut received = 0i64;
    for step in &traj.steps[t1 - 1..t2 - 1] {
        lost += step.lost;
        demand += step.demand;
        received += step.receipt;
    }
    Ok(lost - (inv_at(t2) - inv_at(t1) + demand - received))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lindley;
    use crate::policy::{make_base_stock, make_constant_order};
    use crate::testutil::two_point;

    fn constant_policy(r: Rat) -> Policy {
        let d = two_point();
        let sup = lindley::stationary_waiting(&d, r, 1e-12).unwrap();
        make_constant_order(r, sup).unwrap()
    }

    #[test]
    fn conservation_is_exact_everywhere() {
        let d = two_point();
        for (i, policy) in [
            constant_policy(Rat::new(1, 2)),
            make_base_stock(Rat::from_int(4)).unwrap(),
        ]
        .iter()
        .enumerate()
        {
            let mut ds = Stream::child(31, "sim-test", i as u64);
            let mut ps = Stream::child(32, "sim-test", i as u64);
            let traj = simulate_one(policy, &d, 2, 40, &mut ds, &mut ps).unwrap();
            let last = traj.horizon + traj.lead_time;
            for t1 in [1usize, 2, 7] {
                for t2 in [t1 + 1, t1 + 5, last + 1] {
                    assert_eq!(conservation_check(&traj, t1, t2).unwrap(), 0);
                }
            }
            assert!(conservation_check(&traj, 5, 5).is_err());
        }
    }

    #[test]
    fn lattice_closure_holds_on_paths() {
        let d = two_point();
        let policy = constant_policy(Rat::new(1, 2));
        let mut ds = Stream::child(41, "sim-test", 0);
        let mut ps = Stream::child(42, "sim-test", 0);
        let traj = simulate_one(&policy, &d, 3, 50, &mut ds, &mut ps).unwrap();
        assert_eq!(traj.unit, Rat::new(1, 2));
        for s in &traj.steps {
            assert!(s.inventory >= 0 && s.lost >= 0 && s.order >= 0);
            // At most one of carry-over and lost sales is positive.
            assert!(s.inventory_next == 0 || s.lost == 0);
        }
        // Orders stop after the horizon.
        for s in traj.steps.iter().filter(|s| s.t > traj.horizon) {
            assert_eq!(s.order, 0);
        }
    }

    #[test]
    fn admissibility_audit_replaying_common_prefix() {
        // Two demand scripts that agree up to period 10 must produce
        // identical orders through period 10 for a fixed policy stream.
        let d = two_point();
        let policy = make_base_stock(Rat::from_int(5)).unwrap();
        let horizon = 20;
        let l = 2;
        let mut a: Vec<i64> = (0..horizon + l).map(|i| if i % 2 == 0 { 0 } else { 2 }).collect();
        let b = a.clone();
        for v in a.iter_mut().skip(10) {
            *v = 2 - *v; // diverge after period 10
        }
        let ta = replay(&policy, &d, l, horizon, &a, &mut Stream::child(1, "p", 0)).unwrap();
        let tb = replay(&policy, &d, l, horizon, &b, &mut Stream::child(1, "p", 0)).unwrap();
        for t in 0..10 {
            assert_eq!(ta.steps[t].order, tb.steps[t].order, "order diverged at {t}");
        }
        assert_ne!(
            ta.steps.iter().map(|s| s.order).collect::<Vec<_>>(),
            tb.steps.iter().map(|s| s.order).collect::<Vec<_>>()
        );
    }

    #[test]
    fn simulate_is_deterministic_in_the_root_seed() {
        let d = two_point();
        let policy = constant_policy(Rat::new(1, 2));
        let a = simulate(&policy, &d, 1.0, 1.0, 2, 30, 50, 77).unwrap();
        let b = simulate(&policy, &d, 1.0, 1.0, 2, 30, 50, 77).unwrap();
        assert_eq!(a.mean, b.mean);
        assert_eq!(a.stderr, b.stderr);
        assert_eq!(a.window, [3, 32]);
        let c = simulate(&policy, &d, 1.0, 1.0, 2, 30, 50, 78).unwrap();
        assert_ne!(a.mean, c.mean);
    }

    #[test]
    fn constant_policy_window_cost_matches_stationary_value() {
        // E[window cost] = T (h E[I^r] + c (E[D] - r)) for the stationary
        // start; 4-sigma Monte Carlo check.
        let d = two_point();
        let r = Rat::new(1, 2);
        let sup = lindley::stationary_waiting(&d, r, 1e-12).unwrap();
        let per = crate::policy::stationary_cost(&d, 1.0, 1.0, r, &sup).unwrap();
        let policy = make_constant_order(r, sup).unwrap();
        let (l, t, reps) = (2usize, 8usize, 40_000usize);
        let summary = simulate(&policy, &d, 1.0, 1.0, l, t, reps, 2024).unwrap();
        let expect = per * t as f64;
        assert!(
            (summary.mean - expect).abs() < 4.0 * summary.stderr,
            "mean {} vs stationary {} (se {})",
            summary.mean,
            expect,
            summary.stderr
        );
    }

    #[test]
    fn stationarity_two_sample_ks_across_depths() {
        // End-of-period inventory at depths L+1, L+50, L+500 shares one law;
        // two-sample KS at alpha = 1e-3 (conservative on a lattice).
        let d = two_point();
        let policy = constant_policy(Rat::new(1, 2));
        let unit = policy.working_unit(&d).unwrap();
        let scaled = d.rescale(unit).unwrap();
        let compiled = policy.compile(&scaled, unit).unwrap();
        let l = 2usize;
        let depths = [1usize, 50, 500];
        let horizon = l + depths[2] + 1;
        let reps = 3000usize;
        let mut samples: Vec<Vec<i64>> = vec![Vec::with_capacity(reps); depths.len()];
        for i in 0..reps {
            let mut ds = Stream::child(555, "ks-demand", i as u64);
            let mut ps = Stream::child(555, "ks-policy", i as u64);
            run_trajectory(
                &compiled,
                unit,
                l,
                horizon,
                || scaled.draw(&mut ds),
                &mut ps,
                |s| {
                    for (j, &k) in depths.iter().enumerate() {
                        // End of period L+k is the start of period L+k+1.
                        if s.t == l + k {
                            samples[j].push(s.inventory_next);
                        }
                    }
                },
            );
        }
        let ks = |a: &[i64], b: &[i64]| -> f64 {
            let mut xs: Vec<i64> = a.iter().chain(b).copied().collect();
            xs.sort_unstable();
            xs.dedup();
            let mut worst = 0.0f64;
            for &x in &xs {
                let fa = a.iter().filter(|&&v| v <= x).count() as f64 / a.len() as f64;
                let fb = b.iter().filter(|&&v| v <= x).count() as f64 / b.len() as f64;
                worst = worst.max((fa - fb).abs());
            }
            worst
        };
        let n = reps as f64;
        let crit = (-(0.001f64 / 2.0).ln() / 2.0).sqrt() * (2.0 / n).sqrt();
        for j in 1..depths.len() {
            let stat = ks(&samples[0], &samples[j]);
            assert!(
                stat < crit,
                "KS {} at depth {} exceeds {}",
                stat,
                depths[j],
                crit
            );
        }
    }

    #[test]
    fn window_cost_at_lead_time_one_is_newsvendor_like() {
        // L = 1: cost = h E[(v - D)^+] + c E[(D - v)^+] with v = inv + x_1.
        let d = two_point();
        for (x1, inv) in [(0i64, 0i64), (1, 0), (0, 2), (2, 1)] {
            let wc = window_cost_formula(&d, 3.0, 2.0, &[x1], inv, None).unwrap();
            let v = (x1 + inv) as f64;
            let oracle: f64 = d
                .atoms_units()
                .iter()
                .zip(d.probs())
                .map(|(&a, &p)| {
                    p * (2.0 * (v - a as f64).max(0.0) + 3.0 * (a as f64 - v).max(0.0))
                })
                .sum();
            assert!(
                (wc.value - oracle).abs() < 1e-12,
                "window {} vs oracle {oracle} at x1={x1} inv={inv}",
                wc.value
            );
            assert_eq!(wc.stderr, 0.0);
        }
    }

    #[test]
    fn window_cost_mc_agrees_with_exact() {
        let d = two_point();
        let x = [1i64, 0, 2];
        let inv = 1i64;
        let exact = window_cost_formula(&d, 2.0, 1.0, &x, inv, None).unwrap();
        let mut stream = Stream::child(9, "window", 0);
        let mc =
            window_cost_formula(&d, 2.0, 1.0, &x, inv, Some((200_000, &mut stream))).unwrap();
        assert!(
            (mc.value - exact.value).abs() < 5.0 * mc.stderr.max(2e-3),
            "mc {} vs exact {}",
            mc.value,
            exact.value
        );
    }

    #[test]
    fn long_run_mean_tracks_stationary_cost() {
        let d = two_point();
        let r = Rat::new(1, 2);
        let sup = lindley::stationary_waiting(&d, r, 1e-12).unwrap();
        let per = crate::policy::stationary_cost(&d, 1.0, 1.0, r, &sup).unwrap();
        let policy = make_constant_order(r, sup).unwrap();
        let run = simulate_long_run(&policy, &d, 1.0, 1.0, 2, 30_000, 100, 99).unwrap();
        assert!(
            (run.per_period_mean - per).abs() < 5.0 * run.stderr,
            "long-run {} vs stationary {} (se {})",
            run.per_period_mean,
            per,
            run.stderr
        );
    }
}
