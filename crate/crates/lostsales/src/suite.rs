//! Acceptance suite: the eleven checks that gate a release.
//!
//! Each check captures one verifiable claim about the model machinery, at a
//! pinned tolerance, on pinned reference instances:
//!
//!  1. stationary-cost identity of the constant-order policy, simulation
//!     against the exact supremum pmf (cross-checked against the skip-free
//!     cubic root);
//!  2. the finite-horizon argmax law equals the truncated infinite argmax,
//!     `i_k =_d min(k, i_inf)`, in total variation;
//!  3. certified geometric tails of the argmax, the double-sum bound, and
//!     the supremum second-moment bound;
//!  4. the window-cost maximum formula equals direct enumeration of the
//!     inventory dynamics;
//!  5. lost-sales conservation holds with zero lattice residual on random
//!     trajectory windows;
//!  6. DP values respect the newsvendor floor and the constant-policy
//!     ceiling, match a policy-tree search at a small instance, and are
//!     insensitive to doubling the inventory cap;
//!  7. the coupled argmax inequality holds on every sample path;
//!  8. observed constant-policy optimality gaps respect the certified
//!     closed-form bound across a lead-time/cost/demand grid;
//!  9. the best constant-order policy costs at most twice the DP optimum
//!     over a 16-instance grid (with scale-invariance twins), fractions
//!     under 1.33 and 1.12 reported, not asserted;
//! 10. normal-approximation discrepancies respect `3 n^{-1/2} E|X|^3`, and
//!     quadrature confirms the `psi(-1)` reciprocal stays below 13;
//! 11. the asymptotic ratio guarantee is stated as not desk-reproducible
//!     (its lead-time threshold is astronomical), with checks 1-10 standing
//!     in as the verified substitute.
//!
//! Every check is deterministic given the root seed, cheap enough to run on
//! every commit, and independent of the others.

use std::fmt;
use std::time::Instant;

use serde::Serialize;

use crate::bounds;
use crate::demand::{self, DemandDistribution, DemandFamily};
use crate::dp::{self, DpConfig};
use crate::error::Error;
use crate::lattice::Rat;
use crate::lindley;
use crate::policy::{make_base_stock, make_constant_order, Policy};
use crate::quad;
use crate::sim::{self, WindowCostEvaluator};
use crate::stream::Stream;
use crate::Result;

/// Verdict of one acceptance check.
#[derive(Debug, Clone, Serialize)]
pub struct CriterionResult {
    pub id: usize,
    pub name: &'static str,
    pub pass: bool,
    /// One-line evidence: key numbers, tolerances, counts.
    pub detail: String,
    pub elapsed_ms: u128,
}

impl CriterionResult {
    /// The one pass/fail line the suite prints per criterion.
    pub fn line(&self) -> String {
        format!(
            "{} {:>2} {} [{} ms]: {}",
            if self.pass { "PASS" } else { "FAIL" },
            self.id,
            self.name,
            self.elapsed_ms,
            self.detail
        )
    }
}

impl fmt::Display for CriterionResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.line())
    }
}

fn finish(id: usize, name: &'static str, pass: bool, detail: String, t0: Instant) -> CriterionResult {
    CriterionResult { id, name, pass, detail, elapsed_ms: t0.elapsed().as_millis() }
}

/// Reference instance: demand `{0, 2}` with equal mass on the unit lattice.
pub fn reference_two_point() -> Result<DemandDistribution> {
    DemandDistribution::from_pmf(&[0, 2], &[0.5, 0.5], Rat::from_int(1))
}

/// Reference truncated geometric with success probability `p`.
pub fn reference_geometric(p: f64, tail_mass: f64) -> Result<DemandDistribution> {
    DemandDistribution::truncate_family(DemandFamily::Geometric { p }, tail_mass)
}

/// Root of `x^3 + x^2 + x = 1` in `(0, 1)`: the ladder-height return
/// probability of the skip-free walk with steps `+1` and `-3`, an
/// independent closed-form check on the reference supremum pmf.
fn skip_free_root() -> f64 {
    let f = |x: f64| x * x * x + x * x + x - 1.0;
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Check 1: simulated per-period cost of the constant-rate policy at
/// `r = 1/2` on the two-point instance equals `h E[I_inf] + c (E[D] - r)`
/// within three standard errors, with `E[I_inf]` from the exact pmf and
/// cross-checked against the skip-free cubic; must finish within a minute.
pub fn stationary_cost_identity(seed: u64) -> Result<CriterionResult> {
    let t0 = Instant::now();
    let d = reference_two_point()?;
    let (c, h) = (1.0, 1.0);
    let r = Rat::new(1, 2);
    let sup = lindley::stationary_waiting(&d, r, 1e-12)?;
    // Walk steps are +1/-3 half-units, so P(sup >= j halves) = eta^j and
    // E[sup] = (1/2) eta / (1 - eta).
    let eta = skip_free_root();
    let cross = 0.5 * eta / (1.0 - eta);
    let exact = h * sup.mean + c * (d.mean() - r.to_f64());
    let policy = make_constant_order(r, sup.clone())?;
    let long = sim::simulate_long_run(
        &policy,
        &d,
        c,
        h,
        4,
        100_000,
        2_000,
        crate::stream::child_seed(seed, "acc-stationary", 0),
    )?;
    let sim_gap = (long.per_period_mean - exact).abs();
    let pass = (sup.mean - cross).abs() <= 1e-9
        && (sup.mean - 0.59575).abs() <= 1e-4
        && sim_gap <= 3.0 * long.stderr
        && t0.elapsed().as_secs() < 60;
    let detail = format!(
        "simulated {:.5} vs exact {:.5} (|diff| {:.1e} <= 3 se = {:.1e}); \
         E[sup] {:.6} vs skip-free value {:.6}",
        long.per_period_mean,
        exact,
        sim_gap,
        3.0 * long.stderr,
        sup.mean,
        cross
    );
    Ok(finish(1, "stationary-cost identity", pass, detail, t0))
}

/// Check 2: for `k in 1..=4`, the exact law of the finite-horizon argmax
/// equals the empirical law of `min(k, i_inf)` within 0.01 in total
/// variation (one million samples, truncation certified).
pub fn argmax_law_matches_truncation(seed: u64) -> Result<CriterionResult> {
    let t0 = Instant::now();
    let d = reference_two_point()?;
    let r = Rat::new(1, 2);
    let sup = lindley::stationary_waiting(&d, r, 1e-12)?;
    let mut stream = Stream::child(seed, "acc-argmax", 0);
    let mc = lindley::argmax_distribution_mc(&d, r, 1e-8, 1_000_000, &mut stream)?;
    let mut worst = 0.0f64;
    let mut tvs = Vec::new();
    for k in 1..=4usize {
        let exact = lindley::argmax_finite_exact(&d, r, k, &sup)?;
        let mut tv = 0.0;
        for (j, e) in exact.iter().enumerate() {
            let emp = if j < k { mc.pmf[j] } else { mc.upper_tail(k) };
            tv += (e - emp).abs();
        }
        tv *= 0.5;
        worst = worst.max(tv);
        tvs.push(format!("{tv:.2e}"));
    }
    let pass = worst <= 0.01;
    let detail = format!(
        "TV(exact finite argmax, empirical min(k, argmax)) for k = 1..4: [{}], max {:.2e} <= 0.01 \
         (truncation certificate {:.1e})",
        tvs.join(", "),
        worst,
        mc.tail_bound
    );
    Ok(finish(2, "finite argmax law", pass, detail, t0))
}

/// Check 3: certified tails at `r = 1/2`: geometric argmax tails for
/// `k <= 50`, the double-sum bound, and the exact supremum second moment
/// against `2 Theta^{-3} E[D]^2`.
pub fn tail_bounds_hold(seed: u64) -> Result<CriterionResult> {
    let t0 = Instant::now();
    let d = reference_two_point()?;
    let mut stream = Stream::child(seed, "acc-tails", 0);
    let rep = lindley::verify_tail_suite(&d, Rat::new(1, 2), 50, 1_000_000, &mut stream)?;
    let pass = rep.all_pass();
    let failing: Vec<&str> =
        rep.records.iter().filter(|r| !r.pass).map(|r| r.bound_name.as_str()).collect();
    let double_sum = rep.records.iter().find(|r| r.bound_name == "double_sum");
    let second = rep.records.iter().find(|r| r.bound_name == "supremum_second_moment");
    let detail = format!(
        "{} bound checks at Theta = {:.5}; double-sum {:.1} <= {:.1}; \
         E[sup^2] {:.4} <= {:.1}{}",
        rep.records.len(),
        rep.theta,
        double_sum.map_or(f64::NAN, |r| r.estimate),
        double_sum.map_or(f64::NAN, |r| r.bound_value),
        second.map_or(f64::NAN, |r| r.estimate),
        second.map_or(f64::NAN, |r| r.bound_value),
        if failing.is_empty() { String::new() } else { format!("; FAILING: {failing:?}") }
    );
    Ok(finish(3, "argmax and supremum tail bounds", pass, detail, t0))
}

/// Direct expected window cost by enumerating the inventory dynamics: start
/// at `inv`, receive `x[t]`, lose what demand exceeds, accrue
/// `h I_next + c N` per period. Written against the recursion itself, so it
/// shares nothing with the maximum-form evaluator it audits.
fn window_cost_by_dynamics(d: &DemandDistribution, c: f64, h: f64, x: &[i64], inv: i64) -> f64 {
    let atoms = d.atoms_units();
    let probs = d.probs();
    let u = d.unit().to_f64();
    let l = x.len();
    let mut idx = vec![0usize; l];
    let mut total = 0.0;
    loop {
        let mut prob = 1.0;
        let mut on_hand = inv;
        let mut cost = 0.0;
        for (t, &i) in idx.iter().enumerate() {
            prob *= probs[i];
            let available = on_hand + x[t];
            let next = (available - atoms[i]).max(0);
            let lost = (atoms[i] - available).max(0);
            cost += h * next as f64 * u + c * lost as f64 * u;
            on_hand = next;
        }
        total += prob * cost;
        let mut pos = 0;
        loop {
            if pos == l {
                return total;
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

/// Check 4: the window-cost maximum formula agrees with direct enumeration
/// of the dynamics to 1e-9 on a full start-state grid at lead times 1..=3.
pub fn window_formula_matches_dynamics() -> Result<CriterionResult> {
    let t0 = Instant::now();
    let d = reference_two_point()?;
    let mut checked = 0usize;
    let mut worst = 0.0f64;
    for lead_time in 1..=3usize {
        for (c, h) in [(1.0, 1.0), (4.0, 1.0), (1.0, 2.5)] {
            let eval = WindowCostEvaluator::new_exact(&d, c, h, lead_time)?;
            let mut x = vec![0i64; lead_time];
            loop {
                for inv in 0..=4i64 {
                    let formula = eval.evaluate(&x, inv).value;
                    let direct = window_cost_by_dynamics(&d, c, h, &x, inv);
                    worst = worst.max((formula - direct).abs());
                    checked += 1;
                }
                let mut pos = 0;
                loop {
                    if pos == lead_time {
                        break;
                    }
                    x[pos] += 1;
                    if x[pos] <= 2 {
                        break;
                    }
                    x[pos] = 0;
                    pos += 1;
                }
                if pos == lead_time {
                    break;
                }
            }
        }
    }
    let pass = worst <= 1e-9;
    let detail =
        format!("{checked} start states, max |maximum formula - dynamics| = {worst:.2e} <= 1e-9");
    Ok(finish(4, "window-cost formula exactness", pass, detail, t0))
}

/// Check 5: zero lattice residual of the lost-sales conservation identity
/// over one thousand random windows of simulated trajectories.
pub fn conservation_is_lattice_exact(seed: u64) -> Result<CriterionResult> {
    let t0 = Instant::now();
    let d = reference_two_point()?;
    let lead_time = 4usize;
    let horizon = 200usize;
    let zero_sup = lindley::stationary_waiting(&d, Rat::from_int(0), 1e-12)?;
    let half_sup = lindley::stationary_waiting(&d, Rat::new(1, 2), 1e-12)?;
    let policies: Vec<Policy> = vec![
        make_constant_order(Rat::from_int(0), zero_sup)?,
        make_constant_order(Rat::new(1, 2), half_sup)?,
        make_base_stock(Rat::from_int(3))?,
    ];
    let trajectories = policies
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let mut demand_stream = Stream::child(seed, "acc-conserve-demand", i as u64);
            let mut policy_stream = Stream::child(seed, "acc-conserve-policy", i as u64);
            sim::simulate_one(p, &d, lead_time, horizon, &mut demand_stream, &mut policy_stream)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut pick = Stream::child(seed, "acc-conserve-window", 0);
    let last = horizon + lead_time;
    let mut nonzero = 0usize;
    for _ in 0..1_000 {
        let traj = &trajectories[(pick.uniform() * trajectories.len() as f64) as usize];
        let t1 = 1 + (pick.uniform() * last as f64) as usize;
        let t2 = t1 + 1 + (pick.uniform() * (last + 1 - t1) as f64) as usize;
        if sim::conservation_check(traj, t1.min(last), t2.min(last + 1))? != 0 {
            nonzero += 1;
        }
    }
    let pass = nonzero == 0;
    let detail = format!(
        "1000 random windows over {} trajectories: {nonzero} nonzero residuals",
        trajectories.len()
    );
    Ok(finish(5, "conservation residual", pass, detail, t0))
}

/// Policy-tree value at lead time 1 by plain expectimax over histories: no
/// state reduction, no caching, no shared code with the solver.
fn policy_tree_value(
    d: &DemandDistribution,
    c: f64,
    h: f64,
    horizon: usize,
    order_cap: i64,
    t: usize,
    inv: i64,
    pipeline: i64,
) -> f64 {
    if t > horizon + 1 {
        return 0.0;
    }
    let u = d.unit().to_f64();
    let orders = if t <= horizon { 0..=order_cap } else { 0..=0 };
    let mut best = f64::INFINITY;
    for q in orders {
        let mut value = 0.0;
        for (&a, &p) in d.atoms_units().iter().zip(d.probs()) {
            let available = inv + pipeline;
            let next = (available - a).max(0);
            let lost = (a - available).max(0);
            let cost =
                if t > 1 { h * next as f64 * u + c * lost as f64 * u } else { 0.0 };
            value += p * (cost + policy_tree_value(d, c, h, horizon, order_cap, t + 1, next, q));
        }
        best = best.min(value);
    }
    best
}

/// Check 6: solver sanity. Every solved instance sits between the
/// newsvendor floor `T g` and the best-constant ceiling; cap doubling moves
/// the value by less than 1e-6 relative; and at lead time 1, horizon 3, the
/// solver matches a bare policy-tree search to 1e-9.
pub fn dp_sanity() -> Result<CriterionResult> {
    let t0 = Instant::now();
    let two = reference_two_point()?;
    let geo = reference_geometric(0.5, 1e-8)?;
    let mut pass = true;
    let mut notes = Vec::new();

    let instances: [(&str, &DemandDistribution, f64, f64); 6] = [
        ("two-point", &two, 1.0, 1.0),
        ("two-point", &two, 4.0, 1.0),
        ("two-point", &two, 9.0, 1.0),
        ("two-point", &two, 2.5, 0.5),
        ("geometric", &geo, 1.0, 1.0),
        ("geometric", &geo, 9.0, 1.0),
    ];
    let horizon = 6usize;
    let mut worst_floor_margin = f64::INFINITY;
    let mut worst_cap_diff = 0.0f64;
    for (label, d, c, h) in instances {
        let ratio = dp::opt_ratio(d, c, h, 2, horizon, None, 1e-9)?;
        let g = demand::newsvendor(d, c, h)?.g;
        let floor = horizon as f64 * g;
        worst_floor_margin = worst_floor_margin.min(ratio.opt - floor);
        if ratio.opt < floor - 1e-9 {
            pass = false;
            notes.push(format!("{label} c={c} h={h}: OPT {} under floor {floor}", ratio.opt));
        }
        if ratio.opt > ratio.constant_cost + 1e-9 {
            pass = false;
            notes.push(format!(
                "{label} c={c} h={h}: OPT {} above constant cost {}",
                ratio.opt, ratio.constant_cost
            ));
        }
        match ratio.telemetry.cap_rel_diff {
            Some(diff) if diff < 1e-6 => worst_cap_diff = worst_cap_diff.max(diff),
            other => {
                pass = false;
                notes.push(format!("{label} c={c} h={h}: cap sensitivity {other:?}"));
            }
        }
    }

    let mut worst_tree = 0.0f64;
    for (c, h) in [(1.0, 1.0), (4.0, 1.0), (9.0, 1.0)] {
        let cfg = DpConfig::new(1, 3);
        let sol = dp::solve(&two, c, h, &cfg)?;
        let cap = demand::newsvendor(&two, c, h)?.q_units;
        let tree = policy_tree_value(&two, c, h, 3, cap, 1, 0, 0);
        worst_tree = worst_tree.max((sol.opt - tree).abs());
        if (sol.opt - tree).abs() > 1e-9 {
            pass = false;
            notes.push(format!("c={c} h={h}: DP {} vs policy tree {tree}", sol.opt));
        }
    }

    let detail = format!(
        "6 solves: min(OPT - T g) = {worst_floor_margin:.2e} >= 0, OPT <= constant cost, \
         cap-doubling rel diff <= {worst_cap_diff:.1e}; policy-tree agreement {worst_tree:.2e} <= 1e-9{}",
        if notes.is_empty() { String::new() } else { format!("; {}", notes.join("; ")) }
    );
    Ok(finish(6, "solver floor/ceiling/cap/tree sanity", pass, detail, t0))
}

/// Check 7: the coupled argmax inequality holds on every one of 10^5 sample
/// paths at lead time 4 (half at the solved minimizer, half at a pinned
/// interior start state with a nontrivial rate).
pub fn coupling_holds_pathwise(seed: u64) -> Result<CriterionResult> {
    let t0 = Instant::now();
    let d = reference_two_point()?;
    let mut opt_stream = Stream::child(seed, "acc-couple-opt", 0);
    let solved = bounds::lower_bound_optimize(
        &d,
        1.0,
        1.0,
        4,
        bounds::DEFAULT_OPTIMIZER_BUDGET,
        &mut opt_stream,
    )?;
    let mut s1 = Stream::child(seed, "acc-couple", 1);
    let v1 = bounds::coupling_check(&d, &solved, 50_000, &mut s1)?;
    let mut fix_stream = Stream::child(seed, "acc-couple-fixed", 0);
    let pinned = bounds::fixed_start_solution(&d, 4.0, 1.0, vec![1, 0, 1, 1], 1, &mut fix_stream)?;
    let mut s2 = Stream::child(seed, "acc-couple", 2);
    let v2 = bounds::coupling_check(&d, &pinned, 50_000, &mut s2)?;
    let pass = v1 + v2 == 0;
    let detail = format!(
        "100000 coupled samples at lead time 4 (rates {} and {}): {} violations",
        solved.r_star,
        pinned.r_star,
        v1 + v2
    );
    Ok(finish(7, "pathwise coupling", pass, detail, t0))
}

/// Check 8: across lead times 2..4, two demand families, and c/h in
/// {1, 4, 9}, the observed optimality gap of the constant-rate policy stays
/// below the certified closed-form bound; minimizers whose rate reaches the
/// demand mean raise the named degeneracy and are logged, not asserted.
pub fn gap_certificates_hold(seed: u64) -> Result<CriterionResult> {
    let t0 = Instant::now();
    let two = reference_two_point()?;
    let geo = reference_geometric(0.5, 1e-8)?;
    let mut pass = true;
    let mut certified = 0usize;
    let mut degenerate = Vec::new();
    let mut notes = Vec::new();
    let mut cell = 0u64;
    for (label, d) in [("two-point", &two), ("geometric", &geo)] {
        for lead_time in [2usize, 3, 4] {
            for c in [1.0, 4.0, 9.0] {
                cell += 1;
                let mut opt_stream = Stream::child(seed, "acc-gap-opt", cell);
                let sol = bounds::lower_bound_optimize(
                    d,
                    c,
                    1.0,
                    lead_time,
                    bounds::DEFAULT_OPTIMIZER_BUDGET,
                    &mut opt_stream,
                )?;
                let mut panel_stream = Stream::child(seed, "acc-gap-panel", cell);
                match bounds::gap_certificate(d, c, 1.0, lead_time, &sol, 30_000, &mut panel_stream)
                {
                    Ok(rep) => {
                        certified += 1;
                        if !rep.pass {
                            pass = false;
                            notes.push(format!(
                                "{label} L={lead_time} c={c}: gap {:.4} vs bound {:.4}, \
                                 {} violations",
                                rep.observed_gap, rep.certified_bound, rep.coupling_violations
                            ));
                        }
                    }
                    Err(Error::RStarDegenerate { rstar, mean }) => {
                        degenerate.push(format!("{label} L={lead_time} c={c} (r*={rstar} >= {mean})"));
                    }
                    Err(e) => {
                        pass = false;
                        notes.push(format!("{label} L={lead_time} c={c}: {e}"));
                    }
                }
            }
        }
    }
    let detail = format!(
        "18 cells: {certified} certified within bound, {} degenerate logged [{}]{}",
        degenerate.len(),
        degenerate.join("; "),
        if notes.is_empty() { String::new() } else { format!("; FAILING: {}", notes.join("; ")) }
    );
    Ok(finish(8, "optimality-gap certificates", pass, detail, t0))
}

/// One row of the constant-policy/optimum ratio table.
#[derive(Debug, Clone, Serialize)]
pub struct RatioCell {
    pub lead_time: usize,
    pub horizon: usize,
    pub c: f64,
    pub h: f64,
    pub demand: String,
    pub rate: Option<Rat>,
    pub opt: Option<f64>,
    pub constant_cost: Option<f64>,
    pub ratio: Option<f64>,
    /// Per-cell failure; the run continues past it.
    pub error: Option<String>,
}

/// Ratio table with threshold summaries.
#[derive(Debug, Clone, Serialize)]
pub struct RatioTable {
    pub cells: Vec<RatioCell>,
    /// Fractions of error-free cells with ratio under 2, 1.33, and 1.12.
    pub fraction_under_2: f64,
    pub fraction_under_133: f64,
    pub fraction_under_112: f64,
}

impl RatioTable {
    pub fn fraction_under(cells: &[RatioCell], threshold: f64) -> f64 {
        let solved: Vec<f64> = cells.iter().filter_map(|c| c.ratio).collect();
        if solved.is_empty() {
            return 0.0;
        }
        solved.iter().filter(|&&r| r <= threshold).count() as f64 / solved.len() as f64
    }

    pub fn from_cells(cells: Vec<RatioCell>) -> RatioTable {
        let fraction_under_2 = Self::fraction_under(&cells, 2.0);
        let fraction_under_133 = Self::fraction_under(&cells, 1.33);
        let fraction_under_112 = Self::fraction_under(&cells, 1.12);
        RatioTable { cells, fraction_under_2, fraction_under_133, fraction_under_112 }
    }

    /// CSV with the fixed schema `L,c,h,demand_id,OPT,cost_pi_z,ratio`,
    /// one summary row per reported threshold. Demand ids are quoted when
    /// they contain delimiters.
    pub fn csv(&self) -> String {
        fn field(s: &str) -> String {
            if s.contains([',', '"', '\n']) {
                format!("\"{}\"", s.replace('"', "\"\""))
            } else {
                s.to_string()
            }
        }
        let mut out = String::from("L,c,h,demand_id,OPT,cost_pi_z,ratio\n");
        for cell in &self.cells {
            let fmt_opt = |v: Option<f64>| v.map_or_else(|| "error".into(), |x| format!("{x:.12}"));
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                cell.lead_time,
                cell.c,
                cell.h,
                field(&cell.demand),
                fmt_opt(cell.opt),
                fmt_opt(cell.constant_cost),
                fmt_opt(cell.ratio),
            ));
        }
        out.push_str(&format!("summary,,,fraction_under_2,,,{:.6}\n", self.fraction_under_2));
        out.push_str(&format!("summary,,,fraction_under_1.33,,,{:.6}\n", self.fraction_under_133));
        out.push_str(&format!("summary,,,fraction_under_1.12,,,{:.6}\n", self.fraction_under_112));
        out
    }
}

/// Solves every `(demand, c, h)` cell at `(lead_time, horizon)` and tabulates
/// `cost(pi_z) / OPT`. Per-cell failures are recorded and the run continues.
pub fn ratio_table(
    instances: &[(String, DemandDistribution, f64, f64)],
    lead_time: usize,
    horizon: usize,
) -> RatioTable {
    let cells = instances
        .iter()
        .map(|(label, d, c, h)| match dp::opt_ratio(d, *c, *h, lead_time, horizon, None, 1e-9) {
            Ok(r) => RatioCell {
                lead_time,
                horizon,
                c: *c,
                h: *h,
                demand: label.clone(),
                rate: Some(r.rate),
                opt: Some(r.opt),
                constant_cost: Some(r.constant_cost),
                ratio: Some(r.ratio),
                error: None,
            },
            Err(e) => RatioCell {
                lead_time,
                horizon,
                c: *c,
                h: *h,
                demand: label.clone(),
                rate: None,
                opt: None,
                constant_cost: None,
                ratio: None,
                error: Some(e.to_string()),
            },
        })
        .collect();
    RatioTable::from_cells(cells)
}

/// The 16-instance grid behind check 9: truncated geometric demand with
/// mean 1 and 5, cost ratios {1, 4, 9, 19}, and both h = 1 and h = 2 (the
/// latter are scale twins: doubling both costs must exactly double every
/// value, leaving the ratio fixed).
pub fn reference_ratio_grid() -> Result<Vec<(String, DemandDistribution, f64, f64)>> {
    let mut grid = Vec::new();
    for (mean, p) in [(1u32, 0.5f64), (5, 1.0 / 6.0)] {
        let d = reference_geometric(p, 1e-6)?;
        for ratio in [1.0f64, 4.0, 9.0, 19.0] {
            for h in [1.0f64, 2.0] {
                grid.push((format!("geometric-mean-{mean}"), d.clone(), ratio * h, h));
            }
        }
    }
    Ok(grid)
}

/// Check 9: every cell of the reference grid has `cost(pi_z) / OPT <= 2`,
/// ratios at least 1, and exact agreement between scale twins; fractions
/// under 1.33 and 1.12 are reported, not asserted.
pub fn ratio_table_within_two() -> Result<CriterionResult> {
    let t0 = Instant::now();
    let grid = reference_ratio_grid()?;
    let table = ratio_table(&grid, 4, 8);
    let mut pass = true;
    let mut notes = Vec::new();
    let mut max_ratio = 0.0f64;
    for cell in &table.cells {
        match cell.ratio {
            Some(r) => {
                max_ratio = max_ratio.max(r);
                if !(1.0 - 1e-12..=2.0).contains(&r) {
                    pass = false;
                    notes.push(format!(
                        "{} c={} h={}: ratio {r:.4} outside [1, 2]",
                        cell.demand, cell.c, cell.h
                    ));
                }
            }
            None => {
                pass = false;
                notes.push(format!(
                    "{} c={} h={}: {}",
                    cell.demand,
                    cell.c,
                    cell.h,
                    cell.error.as_deref().unwrap_or("unsolved")
                ));
            }
        }
    }
    // Scale twins: (c, h) and (2c, 2h) cells sit adjacently in the grid.
    for pair in table.cells.chunks(2) {
        if let [a, b] = pair {
            if let (Some(ra), Some(rb)) = (a.ratio, b.ratio) {
                if (ra - rb).abs() > 1e-12 {
                    pass = false;
                    notes.push(format!(
                        "scale twins {} c={}: ratios {ra} vs {rb} differ",
                        a.demand, a.c
                    ));
                }
            }
        }
    }
    let detail = format!(
        "16 cells at L=4, T=8: max ratio {max_ratio:.4} <= 2; fractions under \
         [2, 1.33, 1.12] = [{:.3}, {:.3}, {:.3}] (reported){}",
        table.fraction_under_2,
        table.fraction_under_133,
        table.fraction_under_112,
        if notes.is_empty() { String::new() } else { format!("; FAILING: {}", notes.join("; ")) }
    );
    Ok(finish(9, "constant-policy/optimum ratio table", pass, detail, t0))
}

/// Check 10: the standardized demand sum is within the certified
/// `3 n^{-1/2} E|X|^3` of the normal limit for a Lipschitz test function,
/// and quadrature confirms `1 / E[max(0, N - 1)] <= 13`.
pub fn normal_approximation_bound(seed: u64) -> Result<CriterionResult> {
    let t0 = Instant::now();
    let d = reference_two_point()?;
    let mut pass = true;
    let mut worst_slack = f64::INFINITY;
    let mut idx = 0u64;
    for n in [4usize, 16, 64] {
        for shift in [-1.0f64, 0.0, 1.0] {
            idx += 1;
            let mut stream = Stream::child(seed, "acc-normal", idx);
            let check = bounds::stein_check(&d, shift, n, 200_000, &mut stream)?;
            worst_slack = worst_slack.min(check.rhs + 4.0 * check.stderr - check.lhs);
            if !check.pass {
                pass = false;
            }
        }
    }
    let recip = 1.0 / quad::psi(-1.0);
    if recip > 13.0 {
        pass = false;
    }
    let detail = format!(
        "9 sample-size/shift comparisons, min certified slack {worst_slack:.3e} >= 0; \
         1/E[max(0, N-1)] = {recip:.4} <= 13"
    );
    Ok(finish(10, "normal-approximation bound", pass, detail, t0))
}

/// Check 11: the asymptotic near-optimality guarantee is explicitly stated
/// as not reproducible at desk scale (its lead-time threshold exceeds 1e9
/// on the reference instance), with checks 1-10 as the substitute evidence.
pub fn asymptotic_scale_statement() -> Result<CriterionResult> {
    let t0 = Instant::now();
    let d = reference_two_point()?;
    let cert = bounds::asymptotic_certificate(&d, 1.0, 1.0, 4, 28, 0.5)?;
    let pass = !cert.hypotheses_met
        && cert.required_lead_time > 1e9
        && cert.statement.contains("NOT met")
        && cert.statement.contains("not reproducible");
    let detail = format!(
        "required lead time {:.3e} (>= 1e9), hypotheses met: {}; statement: {}",
        cert.required_lead_time, cert.hypotheses_met, cert.statement
    );
    Ok(finish(11, "asymptotic regime disclosure", pass, detail, t0))
}

/// Runs one check by id, converting an error into a failed result so batch
/// callers always get a reportable line.
pub fn run_one(seed: u64, id: usize) -> CriterionResult {
    let t0 = Instant::now();
    let (name, outcome): (&'static str, Result<CriterionResult>) = match id {
        1 => ("stationary-cost identity", stationary_cost_identity(seed)),
        2 => ("finite argmax law", argmax_law_matches_truncation(seed)),
        3 => ("argmax and supremum tail bounds", tail_bounds_hold(seed)),
        4 => ("window-cost formula exactness", window_formula_matches_dynamics()),
        5 => ("conservation residual", conservation_is_lattice_exact(seed)),
        6 => ("solver floor/ceiling/cap/tree sanity", dp_sanity()),
        7 => ("pathwise coupling", coupling_holds_pathwise(seed)),
        8 => ("optimality-gap certificates", gap_certificates_hold(seed)),
        9 => ("constant-policy/optimum ratio table", ratio_table_within_two()),
        10 => ("normal-approximation bound", normal_approximation_bound(seed)),
        11 => ("asymptotic regime disclosure", asymptotic_scale_statement()),
        _ => {
            return finish(id, "unknown", false, format!("no criterion with id {id}"), t0);
        }
    };
    outcome.unwrap_or_else(|e| finish(id, name, false, format!("error: {e}"), t0))
}

/// Runs the checks with the given ids, in the order given.
pub fn run_selected(seed: u64, ids: &[usize]) -> Vec<CriterionResult> {
    ids.iter().map(|&id| run_one(seed, id)).collect()
}

/// Runs all eleven checks in order.
pub fn run_all(seed: u64) -> Vec<CriterionResult> {
    run_selected(seed, &[1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11])
}
