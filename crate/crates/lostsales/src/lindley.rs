//! Stationary supremum of the order-rate random walk and its argmax index.
//!
//! For an order rate `r < E[D]` the walk `S_k = k r - sum_{i<=k} D_i` drifts
//! down, so `I^r_inf = sup_{k>=0} S_k` is finite and equals the stationary
//! state of the Lindley recursion `W' = (W + r - D)^+`. This module solves
//! that recursion exactly on the common integer lattice of the demand and
//! the rate, computes the distribution of the largest argmax index of the
//! walk (with an optional terminal bonus), and verifies the certified
//! geometric tail
//!
//! ```text
//! P(i^r_inf >= k) <= Theta_r^{-1} (1 - Theta_r)^k,
//! Theta_r = (E[D] - r)^2 / (4 (E[D]^2 + E[D^2])).
//! ```
//!
//! Ties in every argmax resolve to the largest index; all comparisons run in
//! integer arithmetic so ties are exact, never float accidents.

use crate::demand::DemandDistribution;
use crate::lattice::{self, Rat};
use crate::stream::Stream;
use crate::{Error, Result};
use serde::Serialize;

/// Work cap for exact demand-sequence enumerations.
const ENUMERATION_BUDGET: u128 = 4_000_000;

/// Iteration cap for the Lindley recursion.
const MAX_ITERATIONS: usize = 200_000;

/// Tail-decay constant `Theta_r` in `(0, 1/8]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Theta(f64);

impl Theta {
    pub fn value(self) -> f64 {
        self.0
    }

    /// Certified bound on `P(i^r_inf >= k)`.
    pub fn tail_bound(self, k: u32) -> f64 {
        (1.0 - self.0).powi(k as i32) / self.0
    }

    /// Smallest horizon `K` with `tail_bound(K) <= tail_tol`.
    pub fn horizon_for(self, tail_tol: f64) -> usize {
        let mut k = (tail_tol * self.0).ln() / (1.0 - self.0).ln();
        if !k.is_finite() || k < 0.0 {
            k = 0.0;
        }
        let mut k = k.floor().max(0.0) as u32;
        while self.tail_bound(k) > tail_tol {
            k += 1;
        }
        k as usize
    }
}

/// `Theta_r`. Requires `0 <= r < E[D]`.
pub fn theta(d: &DemandDistribution, r: Rat) -> Result<Theta> {
    if r.is_negative() {
        return Err(Error::BadParameter(format!("order rate {r} must be non-negative")));
    }
    let rv = r.to_f64();
    if rv >= d.mean() {
        return Err(Error::RateTooHigh { rate: r.to_string(), mean: d.mean() });
    }
    let num = (d.mean() - rv) * (d.mean() - rv);
    let den = 4.0 * (d.mean() * d.mean() + d.second_moment());
    Ok(Theta(num / den))
}

/// Demand and rate rescaled onto their common integer lattice.
#[derive(Debug, Clone)]
pub struct ScaledWalk {
    pub unit: Rat,
    pub demand: DemandDistribution,
    pub r_units: i64,
}

impl ScaledWalk {
    pub fn new(d: &DemandDistribution, r: Rat) -> Result<Self> {
        if r.is_negative() {
            return Err(Error::BadParameter(format!("order rate {r} must be non-negative")));
        }
        let unit = if r.is_zero() {
            d.unit()
        } else {
            lattice::refine(d.unit(), r)?
        };
        let demand = d.rescale(unit)?;
        let r_units = lattice::multiple_of(r, unit)?;
        Ok(ScaledWalk { unit, demand, r_units })
    }
}

/// Stationary law of `I^r_inf` on the common lattice.
#[derive(Debug, Clone)]
pub struct SupremumSolution {
    pub rate: Rat,
    /// Lattice unit of `pmf` indices.
    pub unit: Rat,
    /// `pmf[j] = P(I^r_inf = j * unit)`; sums to `1 - residual`.
    pub pmf: Vec<f64>,
    /// Mass beyond the adaptive cap, certified below the tolerance.
    pub residual: f64,
    pub iterations: usize,
    /// `E[I^r_inf]` in real value.
    pub mean: f64,
    /// `E[(I^r_inf)^2]` in real value.
    pub second_moment: f64,
    tail: Vec<f64>,
    cdf: Vec<f64>,
}

impl SupremumSolution {
    fn from_pmf(rate: Rat, unit: Rat, pmf: Vec<f64>, residual: f64, iterations: usize) -> Self {
        let u = unit.to_f64();
        let mean_units: f64 = pmf.iter().enumerate().map(|(j, &p)| p * j as f64).sum();
        let m2_units: f64 = pmf.iter().enumerate().map(|(j, &p)| p * (j as f64) * (j as f64)).sum();
        let mut tail = vec![0.0; pmf.len() + 1];
        for j in (0..pmf.len()).rev() {
            tail[j] = tail[j + 1] + pmf[j];
        }
        let mut cdf = Vec::with_capacity(pmf.len());
        let mut acc = 0.0;
        for &p in &pmf {
            acc += p;
            cdf.push(acc);
        }
        SupremumSolution {
            rate,
            unit,
            pmf,
            residual,
            iterations,
            mean: mean_units * u,
            second_moment: m2_units * u * u,
            tail,
            cdf,
        }
    }

    /// `P(I^r_inf >= j * unit)` for any integer `j` (1 for `j <= 0`).
    pub fn upper_tail_units(&self, j: i64) -> f64 {
        if j <= 0 {
            1.0
        } else if (j as usize) < self.tail.len() {
            self.tail[j as usize]
        } else {
            0.0
        }
    }

    /// One draw in lattice units.
    pub fn draw(&self, stream: &mut Stream) -> i64 {
        let u = stream.uniform();
        self.cdf.partition_point(|&c| c <= u).min(self.pmf.len() - 1) as i64
    }
}

/// One application of the Lindley map to `pmf` under `walk`, with mass above
/// `cap` killed. Returns the next pmf and the killed mass.
pub fn lindley_step(pmf: &[f64], walk: &ScaledWalk, cap: usize) -> (Vec<f64>, f64) {
    let mut next = vec![0.0; cap + 1];
    let mut lost = 0.0;
    let atoms = walk.demand.atoms_units();
    let probs = walk.demand.probs();
    for (w, &mass) in pmf.iter().enumerate() {
        if mass == 0.0 {
            continue;
        }
        let base = w as i64 + walk.r_units;
        for (&a, &p) in atoms.iter().zip(probs) {
            let v = (base - a).max(0);
            if v as usize > cap {
                lost += mass * p;
            } else {
                next[v as usize] += mass * p;
            }
        }
    }
    (next, lost)
}

/// Stationary distribution of `W' = (W + r - D)^+` to successive-iterate
/// total-variation tolerance `tol`, starting from the point mass at 0. The
/// state cap grows adaptively until the killed boundary mass stays below
/// `tol / 10`.
pub fn stationary_waiting(d: &DemandDistribution, r: Rat, tol: f64) -> Result<SupremumSolution> {
    if !(tol > 0.0 && tol <= 1e-3) {
        return Err(Error::BadParameter(format!("tolerance {tol} must lie in (0, 1e-3]")));
    }
    let walk = ScaledWalk::new(d, r)?;
    let rv = r.to_f64();
    if rv >= d.mean() {
        return Err(Error::RateTooHigh { rate: r.to_string(), mean: d.mean() });
    }
    if walk.r_units == 0 {
        return Ok(SupremumSolution::from_pmf(r, walk.unit, vec![1.0], 0.0, 0));
    }

    let max_atom = walk.demand.max_atom_units();
    let mut cap = (4 * (walk.r_units + max_atom) + 64) as usize;
    loop {
        let mut pmf = vec![0.0; cap + 1];
        pmf[0] = 1.0;
        let mut lost_total = 0.0;
        let mut iterations = 0usize;
        let outcome = loop {
            if iterations >= MAX_ITERATIONS {
                break Some(Err(Error::NoConvergence { iterations, tol }));
            }
            let (next, lost) = lindley_step(&pmf, &walk, cap);
            iterations += 1;
            lost_total += lost;
            if lost_total > tol / 10.0 {
                break None; // cap too small; grow and restart
            }
            let tv: f64 = next
                .iter()
                .zip(&pmf)
                .map(|(a, b)| (a - b).abs())
                .sum::<f64>()
                / 2.0;
            pmf = next;
            if tv <= tol / 2.0 {
                break Some(Ok(()));
            }
        };
        match outcome {
            Some(Err(e)) => return Err(e),
            Some(Ok(())) => {
                // Trim trailing dead weight beyond the occupied support.
                let hi = pmf.iter().rposition(|&p| p > 0.0).unwrap_or(0);
                pmf.truncate(hi + 1);
                let sol = SupremumSolution::from_pmf(r, walk.unit, pmf, lost_total, iterations);
                debug_assert!(sol.pmf[0] > 0.0, "stationary supremum keeps an atom at 0");
                return Ok(sol);
            }
            None => {
                cap *= 2;
                if cap > 200_000_000 {
                    return Err(Error::StateBudgetExceeded {
                        states: cap as u128,
                        budget: 200_000_000,
                    });
                }
            }
        }
    }
}

/// Max and largest argmax of `values`, with `terminal_bonus` added to the
/// last entry. Ties resolve to the larger index.
pub fn walk_max_argmax(values: &[i64], terminal_bonus: i64) -> (i64, usize) {
    assert!(!values.is_empty(), "walk must have at least one value");
    let last = values.len() - 1;
    let mut best = i64::MIN;
    let mut arg = 0;
    for (j, &v) in values.iter().enumerate() {
        let v = if j == last { v + terminal_bonus } else { v };
        if v >= best {
            best = v;
            arg = j;
        }
    }
    (best, arg)
}

/// Empirical law of the largest argmax of `S_k = k r - sum D_i` over a
/// certified horizon.
#[derive(Debug, Clone, Serialize)]
pub struct ArgmaxDistribution {
    /// Horizon `K`: smallest with `Theta^{-1} (1 - Theta)^K <= tail_tol`.
    pub horizon: usize,
    /// Empirical pmf of the argmax over `{0..K}`; length `K + 1`.
    pub pmf: Vec<f64>,
    /// Certified `P(i^r_inf > K) <= Theta^{-1} (1 - Theta)^{K+1}`: the law of
    /// the truncated argmax differs from that of `i^r_inf` by at most this
    /// much in total variation.
    pub tail_bound: f64,
    pub samples: usize,
    pub theta: f64,
}

impl ArgmaxDistribution {
    /// Empirical `P(argmax >= k)`.
    pub fn upper_tail(&self, k: usize) -> f64 {
        self.pmf.iter().skip(k).sum()
    }
}

/// Monte Carlo law of `i^r_inf` truncated at the certified horizon.
pub fn argmax_distribution_mc(
    d: &DemandDistribution,
    r: Rat,
    tail_tol: f64,
    samples: usize,
    stream: &mut Stream,
) -> Result<ArgmaxDistribution> {
    if !(tail_tol > 0.0 && tail_tol < 1.0) {
        return Err(Error::BadParameter(format!("tail tolerance {tail_tol} must lie in (0, 1)")));
    }
    if samples == 0 {
        return Err(Error::BadParameter("sample count must be positive".into()));
    }
    let th = theta(d, r)?;
    let walk = ScaledWalk::new(d, r)?;
    let horizon = th.horizon_for(tail_tol);
    let mut counts = vec![0u64; horizon + 1];
    for _ in 0..samples {
        let mut s = 0i64;
        let mut best = 0i64;
        let mut arg = 0usize;
        for k in 1..=horizon {
            s += walk.r_units - walk.demand.draw(stream);
            if s >= best {
                best = s;
                arg = k;
            }
        }
        counts[arg] += 1;
    }
    let n = samples as f64;
    Ok(ArgmaxDistribution {
        horizon,
        pmf: counts.iter().map(|&c| c as f64 / n).collect(),
        tail_bound: th.tail_bound(horizon as u32 + 1),
        samples,
        theta: th.value(),
    })
}

/// Exact law of `i^r_k`: the largest argmax over `{0..k}` of the walk with
/// terminal bonus `I^r_inf` (an independent copy of the stationary supremum)
/// at index `k`. Enumerates all demand sequences; `k <= 8`.
pub fn argmax_finite_exact(
    d: &DemandDistribution,
    r: Rat,
    k: usize,
    sup: &SupremumSolution,
) -> Result<Vec<f64>> {
    if k == 0 || k > 8 {
        return Err(Error::BadParameter(format!("finite argmax horizon {k} must lie in 1..=8")));
    }
    let walk = ScaledWalk::new(d, r)?;
    if walk.unit != sup.unit {
        return Err(Error::LatticeMismatch(format!(
            "supremum solution lattice {} differs from walk lattice {}",
            sup.unit, walk.unit
        )));
    }
    let atoms = walk.demand.atoms_units();
    let probs = walk.demand.probs();
    let needed = (atoms.len() as u128).pow(k as u32);
    if needed > ENUMERATION_BUDGET {
        return Err(Error::BudgetExceeded {
            what: "exact argmax enumeration",
            needed,
            budget: ENUMERATION_BUDGET,
        });
    }

    let mut pmf = vec![0.0; k + 1];
    let mut idx = vec![0usize; k];
    loop {
        let mut prob = 1.0;
        let mut s = 0i64;
        // Largest argmax and max over indices 0..k-1 (no bonus there).
        let mut best = 0i64;
        let mut arg = 0usize;
        for (j, &a) in idx.iter().enumerate() {
            prob *= probs[a];
            if j < k - 1 {
                s += walk.r_units - atoms[a];
                if s >= best {
                    best = s;
                    arg = j + 1;
                }
            } else {
                s += walk.r_units - atoms[a];
            }
        }
        // Index k wins exactly when S_k + I >= best, i.e. I >= best - S_k.
        let p_k = sup.upper_tail_units(best - s);
        pmf[k] += prob * p_k;
        pmf[arg] += prob * (1.0 - p_k);

        // Odometer over demand sequences.
        let mut pos = 0;
        loop {
            if pos == k {
                return Ok(pmf);
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

/// One verified bound: certified value vs estimate with its standard error.
#[derive(Debug, Clone, Serialize)]
pub struct BoundCheck {
    pub bound_name: String,
    pub bound_value: f64,
    pub estimate: f64,
    pub std_error: f64,
    pub pass: bool,
}

/// Tail-bound verification report for one `(demand, rate)` pair.
#[derive(Debug, Clone, Serialize)]
pub struct TailSuiteReport {
    pub rate: Rat,
    pub theta: f64,
    pub samples: usize,
    pub records: Vec<BoundCheck>,
}

impl TailSuiteReport {
    pub fn all_pass(&self) -> bool {
        self.records.iter().all(|r| r.pass)
    }
}

/// Verifies the certified tail machinery for `i^r_inf` and `I^r_inf`:
/// geometric tail and pointwise Chernoff bounds for `k = 1..=k_max` (Monte
/// Carlo, slack four standard errors plus the truncation certificate), the
/// double-sum bound `sum_k sum_{j>=k} P(i >= j) <= Theta^{-3}` via the
/// identity `E[(i+1)(i+2)/2]`, and the exact second-moment bound
/// `E[(I^r_inf)^2] <= 2 Theta^{-3} E[D]^2`.
pub fn verify_tail_suite(
    d: &DemandDistribution,
    r: Rat,
    k_max: usize,
    samples: usize,
    stream: &mut Stream,
) -> Result<TailSuiteReport> {
    let th = theta(d, r)?;
    let arg = argmax_distribution_mc(d, r, 1e-8, samples, stream)?;
    if arg.horizon < k_max {
        return Err(Error::BadParameter(format!(
            "k_max {k_max} exceeds certified horizon {}",
            arg.horizon
        )));
    }
    let n = samples as f64;
    let mut records = Vec::new();
    for k in 1..=k_max {
        let est = arg.upper_tail(k);
        let se = (est * (1.0 - est) / n).sqrt();
        let bound = th.tail_bound(k as u32);
        records.push(BoundCheck {
            bound_name: format!("geometric_tail[k={k}]"),
            bound_value: bound,
            estimate: est,
            std_error: se,
            pass: est <= bound + 4.0 * se + arg.tail_bound,
        });
        let est_pt = arg.pmf[k];
        let se_pt = (est_pt * (1.0 - est_pt) / n).sqrt();
        let bound_pt = (1.0 - th.value()).powi(k as i32);
        records.push(BoundCheck {
            bound_name: format!("chernoff_pointwise[k={k}]"),
            bound_value: bound_pt,
            estimate: est_pt,
            std_error: se_pt,
            pass: est_pt <= bound_pt + 4.0 * se_pt + arg.tail_bound,
        });
    }

    // sum_{k>=0} sum_{j>=k} P(i >= j) = E[(i+1)(i+2)/2].
    let mean_ds: f64 = arg
        .pmf
        .iter()
        .enumerate()
        .map(|(i, &p)| p * ((i + 1) * (i + 2)) as f64 / 2.0)
        .sum();
    let m2_ds: f64 = arg
        .pmf
        .iter()
        .enumerate()
        .map(|(i, &p)| {
            let v = ((i + 1) * (i + 2)) as f64 / 2.0;
            p * v * v
        })
        .sum();
    let se_ds = ((m2_ds - mean_ds * mean_ds).max(0.0) / n).sqrt();
    let bound_ds = th.value().powi(-3);
    records.push(BoundCheck {
        bound_name: "double_sum".into(),
        bound_value: bound_ds,
        estimate: mean_ds,
        std_error: se_ds,
        pass: mean_ds <= bound_ds + 4.0 * se_ds,
    });

    let sup = stationary_waiting(d, r, 1e-12)?;
    let bound_m2 = 2.0 * th.value().powi(-3) * d.mean() * d.mean();
    records.push(BoundCheck {
        bound_name: "supremum_second_moment".into(),
        bound_value: bound_m2,
        estimate: sup.second_moment,
        std_error: 0.0,
        pass: sup.second_moment <= bound_m2,
    });

    Ok(TailSuiteReport { rate: r, theta: th.value(), samples, records })
}
