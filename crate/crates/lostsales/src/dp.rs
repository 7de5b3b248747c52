//! Exact finite-horizon dynamic programming for the lost-sales model.
//!
//! The natural state is `(I_t, x_t)` with pipeline `x_t` of length `L`, but
//! both the period cost and the reachable future depend on the pipeline head
//! only through the post-receipt on-hand `o = I + x_1`. Backward induction
//! therefore runs over the reduced state `(o, tail)` with
//! `tail = (x_2, ..., x_L)`, shrinking the table by a factor of the order
//! cap. Transitions: with demand `d` and order `q`,
//!
//! ```text
//! o'    = min((o - d)^+, I_max) + x_2
//! tail' = (x_3, ..., x_L, q)
//! ```
//!
//! Orders are capped at the newsvendor quantile `Q` by default, which is
//! lossless: some optimal policy never orders above `Q`. The inventory cap
//! `I_max` is heuristic, so solves re-run at `2 I_max` and fail loudly if
//! the value moves. Costs accrue only in the penalized window
//! `t in [L+1, T+L]`; orders stop after period `T`. The DP optimizes over
//! Markov policies on the truncated lattice (order grid = demand lattice);
//! this restriction is disclosed in reports rather than assumed away.

use crate::demand::{newsvendor, DemandDistribution};
use crate::lattice::Rat;
use crate::lindley::SupremumSolution;
use crate::policy::{best_constant_z, Policy, SystemState};
use crate::report::{instance_fingerprint, sha256_hex, ARTIFACT_VERSION};
use crate::sim::CostSummary;
use crate::{Error, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::path::Path;

const CAP_REL_TOL: f64 = 1e-6;
const TABLE_MAGIC: &str = "LSDP1";

/// Solver configuration. `new(L, T)` fills the caps from the instance:
/// order cap `Q`, inventory cap `Q (L+2) + max demand atom`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DpConfig {
    pub lead_time: usize,
    pub horizon: usize,
    /// Order cap in lattice units; `None` means the newsvendor quantile Q.
    pub order_cap_units: Option<i64>,
    /// Inventory cap in lattice units; `None` means `Q (L+2) + max atom`.
    pub inventory_cap_units: Option<i64>,
    /// Order grid step in lattice units (orders are multiples of this).
    pub order_step_units: i64,
    /// Maximum number of `(o, tail)` states per period.
    pub state_budget: u64,
    /// Re-solve at twice the inventory cap and require agreement.
    pub check_cap_sensitivity: bool,
    /// Record the argmin order for every period and state.
    pub keep_policy: bool,
    /// Record every period's value function (small instances; audits).
    pub keep_values: bool,
}

impl DpConfig {
    pub fn new(lead_time: usize, horizon: usize) -> Self {
        DpConfig {
            lead_time,
            horizon,
            order_cap_units: None,
            inventory_cap_units: None,
            order_step_units: 1,
            state_budget: 20_000_000,
            check_cap_sensitivity: true,
            keep_policy: false,
            keep_values: false,
        }
    }
}

/// Grid shape shared by the solver and the exact forward evaluators.
#[derive(Debug, Clone, Copy)]
struct Geometry {
    lead_time: usize,
    step: i64,
    cap_steps: usize,
    /// Digits of the pipeline tail run over `0..radix`.
    radix: usize,
    /// `radix^(L-2)`; weight of the newest tail slot (unused when L = 1).
    tail_pow: usize,
    /// `radix^(L-1)` tail configurations.
    tails: usize,
    i_max: i64,
    o_max: i64,
    o_range: usize,
}

impl Geometry {
    fn new(
        lead_time: usize,
        step: i64,
        cap_units: i64,
        i_max: i64,
        o_max: i64,
        budget: u64,
    ) -> Result<Geometry> {
        if lead_time == 0 {
            return Err(Error::BadParameter("lead time must be at least 1".into()));
        }
        if step < 1 {
            return Err(Error::BadParameter("order step must be at least 1 unit".into()));
        }
        if cap_units < 0 || i_max < 0 {
            return Err(Error::BadParameter("caps must be non-negative".into()));
        }
        let cap_steps = (cap_units / step) as usize;
        let radix = cap_steps + 1;
        let tails = (radix as u128).checked_pow(lead_time as u32 - 1).ok_or(
            Error::StateBudgetExceeded { states: u128::MAX, budget: budget as u128 },
        )?;
        let o_range = (o_max + 1) as u128;
        let states = tails.saturating_mul(o_range);
        if states > budget as u128 {
            return Err(Error::StateBudgetExceeded { states, budget: budget as u128 });
        }
        let tail_pow = if lead_time >= 2 { (radix as u128).pow(lead_time as u32 - 2) } else { 1 };
        Ok(Geometry {
            lead_time,
            step,
            cap_steps,
            radix,
            tail_pow: tail_pow as usize,
            tails: tails as usize,
            i_max,
            o_max,
            o_range: o_range as usize,
        })
    }

    fn states(&self) -> usize {
        self.tails * self.o_range
    }

    /// Sum of the tail pipeline in lattice units.
    fn tail_sum(&self, mut tail: usize) -> i64 {
        let mut total = 0i64;
        for _ in 1..self.lead_time {
            total += (tail % self.radix) as i64 * self.step;
            tail /= self.radix;
        }
        total
    }

    /// Next tail index and next-period receipt for order `q` (in steps).
    fn advance(&self, tail: usize, q: usize) -> (usize, i64) {
        if self.lead_time == 1 {
            (0, q as i64 * self.step)
        } else {
            (tail / self.radix + q * self.tail_pow, (tail % self.radix) as i64 * self.step)
        }
    }
}

/// Expected one-period cost at post-receipt on-hand `o`, in money.
fn expected_period_cost(atoms: &[(i64, f64)], c: f64, h: f64, unit_value: f64, o_range: usize) -> Vec<f64> {
    (0..o_range as i64)
        .map(|o| {
            atoms
                .iter()
                .map(|&(a, p)| p * (h * (o - a).max(0) as f64 + c * (a - o).max(0) as f64))
                .sum::<f64>()
                * unit_value
        })
        .collect()
}

/// `out[o] = cost(o) + min_q sum_d p_d V'[advance(tail, q)][clip(o-d) + recv]`
/// for one tail row; ties go to the smallest order.
#[allow(clippy::too_many_arguments)]
fn row_update(
    geom: &Geometry,
    atoms: &[(i64, f64)],
    exp_cost: Option<&[f64]>,
    v_next: &[f64],
    tail: usize,
    max_q: usize,
    out: &mut [f64],
    arg: &mut [u16],
) {
    let o_range = geom.o_range;
    let i_max = geom.i_max;
    let mut best = vec![f64::INFINITY; o_range];
    let mut scratch = vec![0.0f64; o_range];
    for q in 0..=max_q {
        let (tail_next, recv) = geom.advance(tail, q);
        let row = &v_next[tail_next * o_range..(tail_next + 1) * o_range];
        scratch.fill(0.0);
        for &(a, p) in atoms {
            // Three segments of o: fully lost (index recv), linear
            // (index o - a + recv), clipped at the inventory cap.
            let low = row[recv as usize];
            let high = row[(i_max + recv) as usize];
            let lo_end = a.clamp(0, o_range as i64) as usize;
            let mid_end = (a + i_max + 1).clamp(0, o_range as i64) as usize;
            for s in &mut scratch[..lo_end] {
                *s += p * low;
            }
            // Index o - a + recv for o in [lo_end, mid_end); shift once.
            if lo_end < mid_end {
                let base = (lo_end as i64 - a + recv) as usize;
                for (k, s) in scratch[lo_end..mid_end].iter_mut().enumerate() {
                    *s += p * row[base + k];
                }
            }
            for s in &mut scratch[mid_end..] {
                *s += p * high;
            }
        }
        for o in 0..o_range {
            if scratch[o] < best[o] {
                best[o] = scratch[o];
                arg[o] = q as u16;
            }
        }
    }
    match exp_cost {
        Some(cost) => {
            for o in 0..o_range {
                out[o] = cost[o] + best[o];
            }
        }
        None => out.copy_from_slice(&best),
    }
}

/// Everything a backward pass can produce.
struct PassOutput {
    opt: f64,
    policy: Option<Vec<u16>>,
    /// `values[t-1] = V_t` over flattened states, `t = 1..=T+L`.
    values: Option<Vec<Vec<f64>>>,
}

fn backward_pass(
    geom: &Geometry,
    atoms: &[(i64, f64)],
    exp_cost: &[f64],
    horizon: usize,
    keep_policy: bool,
    keep_values: bool,
) -> PassOutput {
    let states = geom.states();
    let mut v_now = vec![0.0f64; states];
    let mut v_next = vec![0.0f64; states];
    let mut arg = vec![0u16; states];
    let mut policy = keep_policy.then(|| vec![0u16; horizon * states]);
    let mut values = keep_values.then(|| vec![Vec::new(); horizon + geom.lead_time]);
    for t in (1..=horizon + geom.lead_time).rev() {
        let max_q = if t <= horizon { geom.cap_steps } else { 0 };
        let cost = (t > geom.lead_time).then_some(exp_cost);
        let vn: &[f64] = &v_next;
        v_now
            .par_chunks_mut(geom.o_range)
            .zip(arg.par_chunks_mut(geom.o_range))
            .enumerate()
            .for_each(|(tail, (out, arg_row))| {
                row_update(geom, atoms, cost, vn, tail, max_q, out, arg_row);
            });
        if t <= horizon {
            if let Some(p) = policy.as_mut() {
                p[(t - 1) * states..t * states].copy_from_slice(&arg);
            }
        }
        if let Some(v) = values.as_mut() {
            v[t - 1] = v_now.clone();
        }
        std::mem::swap(&mut v_now, &mut v_next);
    }
    // After the final swap, v_next holds V_1; the start state is (0, 0).
    PassOutput { opt: v_next[0], policy, values }
}

#[derive(Debug, Clone, Serialize)]
pub struct DpTelemetry {
    pub states_per_period: u64,
    /// Inner-loop work estimate: states x orders x atoms x periods.
    pub sweep_work: u64,
    /// Largest per-transition probability of hitting the inventory cap,
    /// over all states (reachable or not). The cap-doubling check is the
    /// actual certificate; this is a cheap static indicator.
    pub worst_case_clip_prob: f64,
    pub opt_at_doubled_cap: Option<f64>,
    pub cap_rel_diff: Option<f64>,
}

pub struct DpSolution {
    pub opt: f64,
    pub table: Option<ValueTable>,
    /// Per-period value functions when `keep_values` was set.
    pub values: Option<Vec<Vec<f64>>>,
    pub telemetry: DpTelemetry,
}

/// Caps and grid resolved against the instance.
fn resolve_geometry(
    d: &DemandDistribution,
    c: f64,
    h: f64,
    cfg: &DpConfig,
) -> Result<Geometry> {
    if !(c > 0.0 && h > 0.0 && c.is_finite() && h.is_finite()) {
        return Err(Error::BadParameter(format!(
            "costs must be positive and finite, got c={c}, h={h}"
        )));
    }
    if cfg.horizon <= cfg.lead_time {
        return Err(Error::BadParameter(format!(
            "need horizon T > lead time L, got T={} L={}",
            cfg.horizon, cfg.lead_time
        )));
    }
    let q = newsvendor(d, c, h)?.q_units;
    let cap = cfg.order_cap_units.unwrap_or(q);
    let i_max = cfg
        .inventory_cap_units
        .unwrap_or(q * (cfg.lead_time as i64 + 2) + d.max_atom_units());
    let step = cfg.order_step_units;
    // Closure bound: next on-hand = clipped inventory + one receipt.
    let o_max = i_max + (cap / step.max(1)).max(0) * step.max(1);
    Geometry::new(cfg.lead_time, step, cap, i_max, o_max, cfg.state_budget)
}

fn demand_atoms(d: &DemandDistribution) -> Vec<(i64, f64)> {
    d.atoms_units().iter().copied().zip(d.probs().iter().copied()).collect()
}

/// Exact optimal cost over the penalized window, by backward induction.
pub fn solve(d: &DemandDistribution, c: f64, h: f64, cfg: &DpConfig) -> Result<DpSolution> {
    let geom = resolve_geometry(d, c, h, cfg)?;
    let atoms = demand_atoms(d);
    let unit_value = d.unit().to_f64();
    let exp_cost = expected_period_cost(&atoms, c, h, unit_value, geom.o_range);
    let pass = backward_pass(&geom, &atoms, &exp_cost, cfg.horizon, cfg.keep_policy, cfg.keep_values);
    debug_assert!(pass.opt.is_finite() && pass.opt >= 0.0);

    // Probability that a transition would overshoot the inventory cap,
    // maximized over o (attained at o = o_max): P(D < o_max - i_max).
    let spill = geom.o_max - geom.i_max;
    let worst_case_clip_prob: f64 =
        atoms.iter().filter(|&&(a, _)| a < spill).map(|&(_, p)| p).sum();

    let mut telemetry = DpTelemetry {
        states_per_period: geom.states() as u64,
        sweep_work: geom.states() as u64
            * (geom.cap_steps as u64 + 1)
            * atoms.len() as u64
            * (cfg.horizon + geom.lead_time) as u64,
        worst_case_clip_prob,
        opt_at_doubled_cap: None,
        cap_rel_diff: None,
    };

    if cfg.check_cap_sensitivity {
        let mut wide_cfg = cfg.clone();
        wide_cfg.inventory_cap_units = Some(2 * geom.i_max);
        let wide = resolve_geometry(d, c, h, &wide_cfg)?;
        let wide_cost = expected_period_cost(&atoms, c, h, unit_value, wide.o_range);
        let wide_pass = backward_pass(&wide, &atoms, &wide_cost, cfg.horizon, false, false);
        let rel = (pass.opt - wide_pass.opt).abs() / pass.opt.abs().max(1e-12);
        telemetry.opt_at_doubled_cap = Some(wide_pass.opt);
        telemetry.cap_rel_diff = Some(rel);
        if rel >= CAP_REL_TOL {
            return Err(Error::CapTooTight {
                opt: pass.opt,
                opt_doubled: wide_pass.opt,
                rel_diff: rel,
            });
        }
    }

    let table = pass.policy.map(|policy| {
        let payload: Vec<u8> = policy.iter().flat_map(|v| v.to_le_bytes()).collect();
        let meta = TableMeta {
            version: ARTIFACT_VERSION,
            unit: d.unit(),
            lead_time: geom.lead_time,
            horizon: cfg.horizon,
            step_units: geom.step,
            cap_steps: geom.cap_steps,
            i_max_units: geom.i_max,
            opt: pass.opt,
            instance: instance_fingerprint(
                d,
                c,
                h,
                format!(
                    "dp L={} T={} step={} cap={} imax={}",
                    geom.lead_time, cfg.horizon, geom.step, geom.cap_steps, geom.i_max
                )
                .as_bytes(),
            ),
            payload_sha256: sha256_hex(&payload),
        };
        ValueTable { geom, meta, policy }
    });

    Ok(DpSolution { opt: pass.opt, table, values: pass.values, telemetry })
}

/// Per-period argmin orders from a converged solve; also a loadable policy.
#[derive(Debug, Clone)]
pub struct ValueTable {
    geom: Geometry,
    meta: TableMeta,
    policy: Vec<u16>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct TableMeta {
    version: u32,
    unit: Rat,
    lead_time: usize,
    horizon: usize,
    step_units: i64,
    cap_steps: usize,
    i_max_units: i64,
    opt: f64,
    instance: String,
    payload_sha256: String,
}

impl ValueTable {
    pub fn unit(&self) -> Rat {
        self.meta.unit
    }

    pub fn opt(&self) -> f64 {
        self.meta.opt
    }

    pub fn lead_time(&self) -> usize {
        self.meta.lead_time
    }

    pub fn horizon(&self) -> usize {
        self.meta.horizon
    }

    pub fn instance(&self) -> &str {
        &self.meta.instance
    }

    /// Argmin order (lattice units) for a state on the solve grid. States
    /// off the grid clamp componentwise; the returned order is admissible
    /// either way.
    pub fn order_for(&self, state: &SystemState) -> i64 {
        if state.period > self.meta.horizon {
            return 0;
        }
        assert_eq!(
            state.pipeline.len(),
            self.geom.lead_time,
            "pipeline length must equal the lead time"
        );
        let o = (state.inventory + state.pipeline[0]).clamp(0, self.geom.o_max) as usize;
        let mut tail = 0usize;
        let mut weight = 1usize;
        for &x in &state.pipeline[1..] {
            let digit = (x / self.geom.step).clamp(0, self.geom.cap_steps as i64) as usize;
            tail += digit * weight;
            weight *= self.geom.radix;
        }
        let states = self.geom.states();
        let idx = (state.period - 1) * states + tail * self.geom.o_range + o;
        self.policy[idx] as i64 * self.geom.step
    }

    /// Binary artifact: magic line, JSON meta line, little-endian u16
    /// payload guarded by a SHA-256 in the meta.
    pub fn save(&self, path: &Path) -> Result<()> {
        let meta = serde_json::to_string(&self.meta)
            .map_err(|e| Error::Artifact(format!("table meta serialization: {e}")))?;
        let mut bytes = Vec::with_capacity(meta.len() + 8 + self.policy.len() * 2);
        bytes.extend_from_slice(TABLE_MAGIC.as_bytes());
        bytes.push(b'\n');
        bytes.extend_from_slice(meta.as_bytes());
        bytes.push(b'\n');
        for v in &self.policy {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        crate::report::atomic_write(path, &bytes)
    }

    pub fn load(path: &Path) -> Result<ValueTable> {
        let bytes = std::fs::read(path)?;
        let fail = |msg: &str| Error::Artifact(format!("{}: {msg}", path.display()));
        let magic_end = TABLE_MAGIC.len();
        if bytes.len() < magic_end + 1 || &bytes[..magic_end] != TABLE_MAGIC.as_bytes() {
            return Err(fail("not a value-table artifact"));
        }
        let rest = &bytes[magic_end + 1..];
        let meta_end =
            rest.iter().position(|&b| b == b'\n').ok_or_else(|| fail("missing meta line"))?;
        let meta: TableMeta = serde_json::from_slice(&rest[..meta_end])
            .map_err(|e| fail(&format!("bad meta: {e}")))?;
        if meta.version != ARTIFACT_VERSION {
            return Err(fail(&format!("unsupported version {}", meta.version)));
        }
        let payload = &rest[meta_end + 1..];
        if sha256_hex(payload) != meta.payload_sha256 {
            return Err(fail("payload checksum mismatch"));
        }
        let cap = meta.cap_steps as i64 * meta.step_units;
        let o_max = meta.i_max_units + cap;
        let geom = Geometry::new(
            meta.lead_time,
            meta.step_units,
            cap,
            meta.i_max_units,
            o_max,
            u64::MAX,
        )?;
        let expect = meta.horizon * geom.states() * 2;
        if payload.len() != expect {
            return Err(fail(&format!(
                "payload is {} bytes, expected {expect}",
                payload.len()
            )));
        }
        let policy: Vec<u16> =
            payload.chunks_exact(2).map(|c| u16::from_le_bytes([c[0], c[1]])).collect();
        if policy.iter().any(|&q| q as usize > geom.cap_steps) {
            return Err(fail("order exceeds the stored cap"));
        }
        Ok(ValueTable { geom, meta, policy })
    }
}

/// Exact forward pass of the state distribution under a deterministic
/// lattice rule `(t, tail, o) -> order steps`. Returns the expected window
/// cost and the probability mass that ever hit the inventory cap.
fn forward_exact(
    geom: &Geometry,
    atoms: &[(i64, f64)],
    exp_cost: &[f64],
    horizon: usize,
    mut rule: impl FnMut(usize, usize, usize) -> usize,
) -> Result<(f64, f64)> {
    let states = geom.states();
    let mut mass = vec![0.0f64; states];
    let mut next = vec![0.0f64; states];
    mass[0] = 1.0;
    let mut cost = 0.0;
    let mut clipped = 0.0;
    for t in 1..=horizon + geom.lead_time {
        if t > geom.lead_time {
            for (idx, &m) in mass.iter().enumerate() {
                if m > 0.0 {
                    cost += m * exp_cost[idx % geom.o_range];
                }
            }
        }
        next.iter_mut().for_each(|x| *x = 0.0);
        for (idx, &m) in mass.iter().enumerate() {
            if m == 0.0 {
                continue;
            }
            let (tail, o) = (idx / geom.o_range, idx % geom.o_range);
            let q = if t <= horizon { rule(t, tail, o) } else { 0 };
            if q > geom.cap_steps {
                return Err(Error::BadParameter(format!(
                    "policy ordered {q} steps, above the cap {}",
                    geom.cap_steps
                )));
            }
            let (tail_next, recv) = geom.advance(tail, q);
            for &(a, p) in atoms {
                let raw = (o as i64 - a).max(0);
                if raw > geom.i_max {
                    clipped += m * p;
                }
                let o2 = raw.min(geom.i_max) + recv;
                if o2 > geom.o_max {
                    return Err(Error::BadParameter(
                        "forward transition left the state grid".into(),
                    ));
                }
                next[tail_next * geom.o_range + o2 as usize] += m * p;
            }
        }
        std::mem::swap(&mut mass, &mut next);
    }
    Ok((cost, clipped))
}

/// Exact expected window cost of the constant-order policy by direct
/// convolution of the inventory law (the pipeline is deterministic after
/// the randomized first order, so only on-hand needs a distribution).
/// Exact up to the stationary solution's certified residual mass.
fn exact_constant_cost(
    d: &DemandDistribution,
    c: f64,
    h: f64,
    lead_time: usize,
    horizon: usize,
    r: Rat,
    sup: &SupremumSolution,
) -> Result<f64> {
    let unit = if r.is_zero() { d.unit() } else { crate::lattice::refine(d.unit(), r)? };
    if sup.unit != unit {
        return Err(Error::LatticeMismatch(format!(
            "stationary solution lattice {} differs from working lattice {unit}",
            sup.unit
        )));
    }
    let r_units = crate::lattice::multiple_of(r, unit)?;
    let scaled = d.rescale(unit)?;
    let atoms = demand_atoms(&scaled);
    let unit_value = unit.to_f64();
    let period_cost = |pmf: &[f64]| -> f64 {
        pmf.iter()
            .enumerate()
            .map(|(k, &m)| {
                m * atoms
                    .iter()
                    .map(|&(a, p)| {
                        p * (h * (k as i64 - a).max(0) as f64 + c * (a - k as i64).max(0) as f64)
                    })
                    .sum::<f64>()
            })
            .sum::<f64>()
            * unit_value
    };
    // Periods 1..=L: no receipts, I stays 0. Start the recursion at t = L+1
    // with I = 0 and the randomized receipt I^r_inf + r.
    let mut inventory = vec![1.0f64];
    let mut total = 0.0;
    for t in lead_time + 1..=horizon + lead_time {
        let on_hand: Vec<f64> = if t == lead_time + 1 {
            // First receipt: convolve (point mass at 0) with sup + r.
            let mut z = vec![0.0; sup.pmf.len() + r_units as usize];
            z[r_units as usize..].copy_from_slice(&sup.pmf);
            z
        } else {
            let mut v = vec![0.0; inventory.len() + r_units as usize];
            v[r_units as usize..].copy_from_slice(&inventory);
            v
        };
        total += period_cost(&on_hand);
        let mut next = vec![0.0f64; on_hand.len()];
        for (k, &m) in on_hand.iter().enumerate() {
            if m == 0.0 {
                continue;
            }
            for &(a, p) in &atoms {
                next[(k as i64 - a).max(0) as usize] += m * p;
            }
        }
        while next.len() > 1 && *next.last().unwrap() == 0.0 {
            next.pop();
        }
        inventory = next;
    }
    Ok(total)
}

#[derive(Debug, Clone, Copy)]
pub enum EvalMode {
    Exact,
    Mc { reps: usize },
}

/// Expected window cost of a policy. Exact mode integrates the state
/// distribution in closed form (constant, base-stock, and table policies);
/// MC mode delegates to the trajectory simulator.
pub fn evaluate_policy(
    policy: &Policy,
    d: &DemandDistribution,
    c: f64,
    h: f64,
    lead_time: usize,
    horizon: usize,
    mode: EvalMode,
    root_seed: u64,
) -> Result<CostSummary> {
    if let EvalMode::Mc { reps } = mode {
        return crate::sim::simulate(policy, d, c, h, lead_time, horizon, reps, root_seed);
    }
    if lead_time == 0 || horizon == 0 {
        return Err(Error::BadParameter("need lead time and horizon at least 1".into()));
    }
    let mean = match policy {
        Policy::Constant(spec) => {
            exact_constant_cost(d, c, h, lead_time, horizon, spec.r, &spec.sup)?
        }
        Policy::Table(table) => {
            let scaled = d.rescale(table.unit())?;
            let atoms = demand_atoms(&scaled);
            let geom = table.geom;
            let exp_cost =
                expected_period_cost(&atoms, c, h, table.unit().to_f64(), geom.o_range);
            if horizon != table.horizon() || lead_time != table.lead_time() {
                return Err(Error::BadParameter(format!(
                    "table was solved for L={} T={}, asked to evaluate L={lead_time} T={horizon}",
                    table.lead_time(),
                    table.horizon()
                )));
            }
            let states = geom.states();
            let policy_flat = &table.policy;
            let (cost, _clipped) =
                forward_exact(&geom, &atoms, &exp_cost, horizon, |t, tail, o| {
                    policy_flat[(t - 1) * states + tail * geom.o_range + o] as usize
                })?;
            cost
        }
        Policy::BaseStock { target } => {
            let unit = policy.working_unit(d)?;
            let scaled = d.rescale(unit)?;
            let target_units = crate::lattice::multiple_of(*target, unit)?;
            let atoms = demand_atoms(&scaled);
            // Position never exceeds the target, so on-hand, receipts, and
            // tail digits all live in 0..=target and no clipping occurs.
            let geom = Geometry::new(
                lead_time,
                1,
                target_units,
                target_units,
                target_units,
                20_000_000,
            )?;
            let exp_cost = expected_period_cost(&atoms, c, h, unit.to_f64(), geom.o_range);
            let (cost, clipped) = forward_exact(&geom, &atoms, &exp_cost, horizon, |_, tail, o| {
                let position = o as i64 + geom.tail_sum(tail);
                (target_units - position).max(0) as usize
            })?;
            debug_assert_eq!(clipped, 0.0);
            cost
        }
    };
    Ok(CostSummary {
        mean,
        stderr: 0.0,
        reps: 0,
        window: [lead_time + 1, horizon + lead_time],
    })
}

/// Cost ratio of the best constant-order policy against the DP optimum.
#[derive(Debug, Clone, Serialize)]
pub struct OptRatio {
    pub lead_time: usize,
    pub horizon: usize,
    /// Best constant rate z (argmin of h E[I^v] - c v).
    pub rate: Rat,
    pub opt: f64,
    pub constant_cost: f64,
    pub ratio: f64,
    pub telemetry: DpTelemetry,
}

/// `cost(pi_z) / OPT(L, T)`: exact numerator (convolution), exact
/// denominator (backward induction).
pub fn opt_ratio(
    d: &DemandDistribution,
    c: f64,
    h: f64,
    lead_time: usize,
    horizon: usize,
    cfg: Option<DpConfig>,
    z_tol: f64,
) -> Result<OptRatio> {
    let cfg = cfg.unwrap_or_else(|| DpConfig::new(lead_time, horizon));
    let sol = solve(d, c, h, &cfg)?;
    let best = best_constant_z(d, c, h, None, z_tol)?;
    let sup = crate::lindley::stationary_waiting(d, best.z, 1e-12)?;
    let constant_cost = exact_constant_cost(d, c, h, lead_time, horizon, best.z, &sup)?;
    Ok(OptRatio {
        lead_time,
        horizon,
        rate: best.z,
        opt: sol.opt,
        constant_cost,
        ratio: constant_cost / sol.opt,
        telemetry: sol.telemetry,
    })
}

/// Largest change a policy-improvement sweep makes to any stored value:
/// recompute every period from the stored continuation and diff. Requires
/// `keep_values`.
pub fn bellman_residual(
    d: &DemandDistribution,
    c: f64,
    h: f64,
    cfg: &DpConfig,
    sol: &DpSolution,
) -> Result<f64> {
    let values = sol
        .values
        .as_ref()
        .ok_or_else(|| Error::BadParameter("solve with keep_values for this audit".into()))?;
    let geom = resolve_geometry(d, c, h, cfg)?;
    let atoms = demand_atoms(d);
    let exp_cost =
        expected_period_cost(&atoms, c, h, d.unit().to_f64(), geom.o_range);
    let states = geom.states();
    let zeros = vec![0.0f64; states];
    let mut recomputed = vec![0.0f64; states];
    let mut arg = vec![0u16; states];
    let mut worst = 0.0f64;
    for t in (1..=cfg.horizon + geom.lead_time).rev() {
        let next: &[f64] =
            if t == cfg.horizon + geom.lead_time { &zeros } else { &values[t] };
        let max_q = if t <= cfg.horizon { geom.cap_steps } else { 0 };
        let cost = (t > geom.lead_time).then_some(exp_cost.as_slice());
        for tail in 0..geom.tails {
            row_update(
                &geom,
                &atoms,
                cost,
                next,
                tail,
                max_q,
                &mut recomputed[tail * geom.o_range..(tail + 1) * geom.o_range],
                &mut arg[tail * geom.o_range..(tail + 1) * geom.o_range],
            );
        }
        for (a, b) in recomputed.iter().zip(&values[t - 1]) {
            worst = worst.max((a - b).abs());
        }
    }
    Ok(worst)
}
