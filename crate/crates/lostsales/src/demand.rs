//! Finite lattice demand distributions.
//!
//! A demand law is a finite pmf whose atoms are non-negative integer
//! multiples of a positive rational unit. Truncated classical families
//! (geometric, Poisson) are admitted by chopping the tail at a configured
//! mass and renormalizing; the discarded mass is recorded, never hidden.
//!
//! Key invariants, enforced at construction:
//! * probabilities are non-negative and sum to 1 within `1e-12`;
//! * at least two atoms carry positive probability (`sigma > 0`);
//! * atoms are sorted, strictly increasing, non-negative integers.

use crate::lattice::{self, Rat};
use crate::stream::Stream;
use crate::{Error, Result};
use serde::{Deserialize, Serialize};

const PROB_SUM_TOL: f64 = 1e-12;

/// Discrete demand law on a rational lattice, with cached exact moments.
#[derive(Debug, Clone)]
pub struct DemandDistribution {
    unit: Rat,
    atoms: Vec<i64>,
    probs: Vec<f64>,
    cdf: Vec<f64>,
    mean: f64,
    second_moment: f64,
    sigma: f64,
    skewness: f64,
    truncated_mass: f64,
    label: String,
}

/// Classical families admitted through tail truncation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum DemandFamily {
    /// `P(D = k) = p (1-p)^k`, `k = 0, 1, ...`; mean `(1-p)/p`.
    Geometric { p: f64 },
    /// `P(D = k) = e^{-lambda} lambda^k / k!`.
    Poisson { lambda: f64 },
}

/// Newsvendor quantile and per-period newsvendor cost for a demand law.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct NewsvendorScalars {
    /// Quantile `Q = inf { s >= 0 : P(D > s) <= h / (c + h) }` in lattice units.
    pub q_units: i64,
    /// `Q` as a real value.
    pub q: f64,
    /// `g = h E[(Q - D)^+] + c E[(D - Q)^+]`; positive for any
    /// non-deterministic demand.
    pub g: f64,
}

impl DemandDistribution {
    /// Builds a demand law from an explicit pmf. Atom/probability pairs may
    /// arrive unsorted; zero-probability atoms are dropped.
    pub fn from_pmf(atoms: &[i64], probs: &[f64], unit: Rat) -> Result<Self> {
        if atoms.len() != probs.len() {
            return Err(Error::LengthMismatch { atoms: atoms.len(), probs: probs.len() });
        }
        if !unit.is_positive() {
            return Err(Error::BadParameter(format!("lattice unit {unit} must be positive")));
        }
        let mut pairs: Vec<(i64, f64)> = Vec::with_capacity(atoms.len());
        let mut sum = 0.0;
        for (&a, &p) in atoms.iter().zip(probs) {
            if a < 0 {
                return Err(Error::NegativeAtom { atom: a });
            }
            if !(p >= 0.0) || !p.is_finite() {
                return Err(Error::NonStochastic { sum: p });
            }
            sum += p;
            if p > 0.0 {
                pairs.push((a, p));
            }
        }
        if (sum - 1.0).abs() > PROB_SUM_TOL {
            return Err(Error::NonStochastic { sum });
        }
        pairs.sort_by_key(|&(a, _)| a);
        for w in pairs.windows(2) {
            if w[0].0 == w[1].0 {
                return Err(Error::DuplicateAtom { atom: w[0].0 });
            }
        }
        let label = format!(
            "pmf(unit={unit},atoms={:?})",
            pairs.iter().map(|&(a, _)| a).collect::<Vec<_>>()
        );
        Self::finish(pairs, unit, 0.0, label)
    }

    /// Truncates a classical family at upper tail mass `tail_mass`
    /// (in `(0, 1e-6]`) and renormalizes. Unit lattice.
    pub fn truncate_family(family: DemandFamily, tail_mass: f64) -> Result<Self> {
        if !(tail_mass > 0.0 && tail_mass <= 1e-6) {
            return Err(Error::BadParameter(format!(
                "tail mass {tail_mass} must lie in (0, 1e-6]"
            )));
        }
        let label;
        let mut pairs: Vec<(i64, f64)> = Vec::new();
        let truncated;
        match family {
            DemandFamily::Geometric { p } => {
                if !(p > 0.0 && p < 1.0) {
                    return Err(Error::BadParameter(format!(
                        "geometric p {p} must lie in (0, 1)"
                    )));
                }
                label = format!("geometric(p={p},tail={tail_mass:e})");
                // P(D > s) = (1-p)^(s+1); keep the smallest support with
                // tail at or below the budget.
                let mut k = 0i64;
                let mut pk = p;
                let mut tail = 1.0 - p;
                loop {
                    pairs.push((k, pk));
                    if tail <= tail_mass {
                        break;
                    }
                    k += 1;
                    pk *= 1.0 - p;
                    tail *= 1.0 - p;
                }
                truncated = tail;
            }
            DemandFamily::Poisson { lambda } => {
                if !(lambda > 0.0) || !lambda.is_finite() {
                    return Err(Error::BadParameter(format!(
                        "poisson lambda {lambda} must be positive"
                    )));
                }
                label = format!("poisson(lambda={lambda},tail={tail_mass:e})");
                let mut k = 0i64;
                let mut pk = (-lambda).exp();
                let mut cdf = pk;
                loop {
                    pairs.push((k, pk));
                    if 1.0 - cdf <= tail_mass {
                        break;
                    }
                    k += 1;
                    pk *= lambda / k as f64;
                    cdf += pk;
                }
                truncated = (1.0 - cdf).max(0.0);
            }
        }
        let norm: f64 = pairs.iter().map(|&(_, p)| p).sum();
        for (_, p) in &mut pairs {
            *p /= norm;
        }
        pairs.retain(|&(_, p)| p > 0.0);
        Self::finish(pairs, Rat::from_int(1), truncated, label)
    }

    fn finish(pairs: Vec<(i64, f64)>, unit: Rat, truncated_mass: f64, label: String) -> Result<Self> {
        if pairs.len() < 2 {
            return Err(Error::Deterministic);
        }
        let atoms: Vec<i64> = pairs.iter().map(|&(a, _)| a).collect();
        let probs: Vec<f64> = pairs.iter().map(|&(_, p)| p).collect();
        let u = unit.to_f64();
        let mut cdf = Vec::with_capacity(probs.len());
        let mut acc = 0.0;
        for &p in &probs {
            acc += p;
            cdf.push(acc);
        }
        *cdf.last_mut().expect("non-empty") = 1.0;
        let mean_units: f64 = atoms.iter().zip(&probs).map(|(&a, &p)| p * a as f64).sum();
        let m2_units: f64 = atoms.iter().zip(&probs).map(|(&a, &p)| p * (a as f64) * (a as f64)).sum();
        let var_units = (m2_units - mean_units * mean_units).max(0.0);
        let abs3_units: f64 = atoms
            .iter()
            .zip(&probs)
            .map(|(&a, &p)| p * (a as f64 - mean_units).abs().powi(3))
            .sum();
        let sigma_units = var_units.sqrt();
        if sigma_units <= 0.0 {
            return Err(Error::Deterministic);
        }
        Ok(DemandDistribution {
            unit,
            atoms,
            probs,
            cdf,
            mean: mean_units * u,
            second_moment: m2_units * u * u,
            sigma: sigma_units * u,
            // Scale-free; the lattice unit cancels.
            skewness: abs3_units / (sigma_units * sigma_units * sigma_units),
            truncated_mass,
            label,
        })
    }

    pub fn unit(&self) -> Rat {
        self.unit
    }

    /// Atoms in lattice units, sorted strictly increasing.
    pub fn atoms_units(&self) -> &[i64] {
        &self.atoms
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn max_atom_units(&self) -> i64 {
        *self.atoms.last().expect("at least two atoms")
    }

    /// `E[D]` in real value.
    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// `E[D^2]` in real value.
    pub fn second_moment(&self) -> f64 {
        self.second_moment
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// Scaled third absolute central moment `E|D - E D|^3 / sigma^3`.
    pub fn skewness(&self) -> f64 {
        self.skewness
    }

    /// Mass discarded by family truncation (0 for explicit pmfs).
    pub fn truncated_mass(&self) -> f64 {
        self.truncated_mass
    }

    /// Human-readable construction label, stable for fingerprints.
    pub fn label(&self) -> &str {
        &self.label
    }

    /// `P(D > s)` for `s` in lattice units (any integer).
    pub fn tail_units(&self, s: i64) -> f64 {
        let mut tail = 0.0;
        for (&a, &p) in self.atoms.iter().zip(&self.probs).rev() {
            if a > s {
                tail += p;
            } else {
                break;
            }
        }
        tail
    }

    /// Same pmf expressed on a finer unit; `unit` must divide the current one.
    pub fn rescale(&self, unit: Rat) -> Result<Self> {
        let factor = lattice::multiple_of(self.unit, unit)?;
        if factor <= 0 {
            return Err(Error::LatticeMismatch(format!(
                "target unit {unit} does not refine {}",
                self.unit
            )));
        }
        let atoms: Vec<i64> = self
            .atoms
            .iter()
            .map(|&a| {
                a.checked_mul(factor).ok_or_else(|| {
                    Error::LatticeMismatch(format!("atom {a} overflows on unit {unit}"))
                })
            })
            .collect::<Result<_>>()?;
        Ok(DemandDistribution {
            unit,
            atoms,
            probs: self.probs.clone(),
            cdf: self.cdf.clone(),
            mean: self.mean,
            second_moment: self.second_moment,
            sigma: self.sigma,
            skewness: self.skewness,
            truncated_mass: self.truncated_mass,
            label: self.label.clone(),
        })
    }

    /// One demand draw, in lattice units.
    pub fn draw(&self, stream: &mut Stream) -> i64 {
        let u = stream.uniform();
        let idx = self.cdf.partition_point(|&c| c <= u).min(self.atoms.len() - 1);
        self.atoms[idx]
    }

    /// Canonical bytes for fingerprinting: unit, atoms, probability bits.
    pub fn fingerprint_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(&self.unit.0.numer().to_le_bytes());
        out.extend_from_slice(&self.unit.0.denom().to_le_bytes());
        for (&a, &p) in self.atoms.iter().zip(&self.probs) {
            out.extend_from_slice(&a.to_le_bytes());
            out.extend_from_slice(&p.to_bits().to_le_bytes());
        }
        out
    }
}

/// Newsvendor quantile `Q` and cost `g` for penalty `c` and holding cost `h`.
///
/// `P(D > s)` is constant between lattice points, so the infimum over real
/// `s` lands on 0 or an atom; the scan below visits exactly those candidates.
pub fn newsvendor(d: &DemandDistribution, c: f64, h: f64) -> Result<NewsvendorScalars> {
    if !(c > 0.0) || !(h > 0.0) {
        return Err(Error::BadParameter(format!(
            "costs must be positive (c = {c}, h = {h})"
        )));
    }
    let ratio = h / (c + h);
    let mut q_units = None;
    if d.tail_units(0) <= ratio + PROB_SUM_TOL {
        q_units = Some(0);
    } else {
        for &a in d.atoms_units() {
            if d.tail_units(a) <= ratio + PROB_SUM_TOL {
                q_units = Some(a);
                break;
            }
        }
    }
    let q_units = q_units.expect("tail at the last atom is 0 <= ratio");
    let u = d.unit().to_f64();
    let mut over = 0.0; // E[(Q - D)^+] in units
    let mut under = 0.0; // E[(D - Q)^+] in units
    for (&a, &p) in d.atoms_units().iter().zip(d.probs()) {
        if a < q_units {
            over += p * (q_units - a) as f64;
        } else {
            under += p * (a - q_units) as f64;
        }
    }
    let g = (h * over + c * under) * u;
    debug_assert!(g > 0.0, "non-deterministic demand forces g > 0");
    Ok(NewsvendorScalars { q_units, q: q_units as f64 * u, g })
}

/// `n` i.i.d. draws in lattice units. `n = 0` is a contract violation.
pub fn sample(d: &DemandDistribution, stream: &mut Stream, n: usize) -> Result<Vec<i64>> {
    if n == 0 {
        return Err(Error::BadParameter("sample size must be positive".into()));
    }
    Ok((0..n).map(|_| d.draw(stream)).collect())
}

/// Demand specification as it appears in config files.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DemandSpec {
    Family {
        #[serde(flatten)]
        family: DemandFamily,
        tail_mass: f64,
    },
    Pmf {
        atoms: Vec<i64>,
        probs: Vec<f64>,
        unit: Rat,
    },
}

impl DemandSpec {
    pub fn build(&self) -> Result<DemandDistribution> {
        match self {
            DemandSpec::Pmf { atoms, probs, unit } => {
                DemandDistribution::from_pmf(atoms, probs, *unit)
            }
            DemandSpec::Family { family, tail_mass } => {
                DemandDistribution::truncate_family(*family, *tail_mass)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn two_point() -> DemandDistribution {
        DemandDistribution::from_pmf(&[0, 2], &[0.5, 0.5], Rat::from_int(1)).unwrap()
    }

    #[test]
    fn two_point_moments_match_hand_oracle() {
        let d = two_point();
        // E[D] = 1, E[D^2] = 2, var = 1, E|D-1|^3 = 1 -> zeta = 1.
        assert!((d.mean() - 1.0).abs() < 1e-15);
        assert!((d.second_moment() - 2.0).abs() < 1e-15);
        assert!((d.sigma() - 1.0).abs() < 1e-15);
        assert!((d.skewness() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn moments_match_brute_force_on_scaled_lattice() {
        let atoms = [1, 3, 4, 9];
        let probs = [0.1, 0.2, 0.3, 0.4];
        let d = DemandDistribution::from_pmf(&atoms, &probs, Rat::new(1, 2)).unwrap();
        // Independent accumulation in value space.
        let vals: Vec<f64> = atoms.iter().map(|&a| a as f64 * 0.5).collect();
        let mean: f64 = vals.iter().zip(&probs).map(|(v, p)| v * p).sum();
        let m2: f64 = vals.iter().zip(&probs).map(|(v, p)| v * v * p).sum();
        let var = m2 - mean * mean;
        let abs3: f64 = vals.iter().zip(&probs).map(|(v, p)| (v - mean).abs().powi(3) * p).sum();
        assert!((d.mean() - mean).abs() < 1e-12);
        assert!((d.second_moment() - m2).abs() < 1e-12);
        assert!((d.sigma() - var.sqrt()).abs() < 1e-12);
        assert!((d.skewness() - abs3 / var.powf(1.5)).abs() < 1e-12);
    }

    #[test]
    fn from_pmf_rejects_bad_inputs() {
        let unit = Rat::from_int(1);
        assert!(matches!(
            DemandDistribution::from_pmf(&[0, 1], &[0.6, 0.6], unit),
            Err(Error::NonStochastic { .. })
        ));
        assert!(matches!(
            DemandDistribution::from_pmf(&[0, 1], &[-0.5, 1.5], unit),
            Err(Error::NonStochastic { .. })
        ));
        assert!(matches!(
            DemandDistribution::from_pmf(&[3], &[1.0], unit),
            Err(Error::Deterministic)
        ));
        assert!(matches!(
            DemandDistribution::from_pmf(&[0, 1, 2], &[0.0, 1.0, 0.0], unit),
            Err(Error::Deterministic)
        ));
        // Zero-probability atoms are pruned, not fatal.
        let d = DemandDistribution::from_pmf(&[0, 1, 2], &[0.5, 0.5, 0.0], unit).unwrap();
        assert_eq!(d.atoms_units(), &[0, 1]);
        assert!(matches!(
            DemandDistribution::from_pmf(&[-1, 1], &[0.5, 0.5], unit),
            Err(Error::NegativeAtom { atom: -1 })
        ));
        assert!(matches!(
            DemandDistribution::from_pmf(&[2, 2], &[0.5, 0.5], unit),
            Err(Error::DuplicateAtom { atom: 2 })
        ));
        assert!(matches!(
            DemandDistribution::from_pmf(&[0, 1], &[1.0], unit),
            Err(Error::LengthMismatch { .. })
        ));
    }

    #[test]
    fn from_pmf_sorts_unsorted_input() {
        let d = DemandDistribution::from_pmf(&[5, 0, 2], &[0.2, 0.3, 0.5], Rat::from_int(1)).unwrap();
        assert_eq!(d.atoms_units(), &[0, 2, 5]);
        assert_eq!(d.probs(), &[0.3, 0.5, 0.2]);
    }

    #[test]
    fn geometric_truncation_support_matches_cdf_oracle() {
        // P(D > s) = 0.8^(s+1) <= 1e-9 first at s = 92.
        let d = DemandDistribution::truncate_family(
            DemandFamily::Geometric { p: 0.2 },
            1e-9,
        )
        .unwrap();
        assert_eq!(d.atoms_units().first(), Some(&0));
        assert_eq!(d.max_atom_units(), 92);
        assert!((d.probs().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(d.truncated_mass() > 0.0 && d.truncated_mass() <= 1e-9);
        // Mean barely moves under a 1e-9 truncation.
        assert!((d.mean() - 4.0).abs() < 1e-6);
    }

    #[test]
    fn near_one_geometric_keeps_tiny_support() {
        let d = DemandDistribution::truncate_family(
            DemandFamily::Geometric { p: 0.99 },
            1e-9,
        )
        .unwrap();
        // P(D > s) = 0.01^(s+1) <= 1e-9 first at s = 4.
        assert_eq!(d.max_atom_units(), 4);
        assert!((d.mean() - (1.0 / 0.99 - 1.0)).abs() < 1e-9);
    }

    #[test]
    fn poisson_truncation_and_degenerate_lambda() {
        assert!(matches!(
            DemandDistribution::truncate_family(DemandFamily::Poisson { lambda: 0.0 }, 1e-9),
            Err(Error::BadParameter(_))
        ));
        let d =
            DemandDistribution::truncate_family(DemandFamily::Poisson { lambda: 3.0 }, 1e-9)
                .unwrap();
        assert!((d.mean() - 3.0).abs() < 1e-6);
        assert!((d.second_moment() - 12.0).abs() < 1e-5);
    }

    #[test]
    fn tail_mass_range_is_enforced() {
        assert!(DemandDistribution::truncate_family(DemandFamily::Geometric { p: 0.2 }, 1e-5)
            .is_err());
        assert!(DemandDistribution::truncate_family(DemandFamily::Geometric { p: 0.2 }, 0.0)
            .is_err());
    }

    #[test]
    fn newsvendor_two_point_symmetric_costs() {
        let d = two_point();
        let nv = newsvendor(&d, 1.0, 1.0).unwrap();
        assert_eq!(nv.q_units, 0);
        assert!((nv.g - 1.0).abs() < 1e-12);
    }

    #[test]
    fn newsvendor_truncated_geometric_matches_tail_oracle() {
        let d = DemandDistribution::truncate_family(
            DemandFamily::Geometric { p: 0.2 },
            1e-9,
        )
        .unwrap();
        let nv = newsvendor(&d, 9.0, 1.0).unwrap();
        assert_eq!(nv.q_units, 10);
        assert!(nv.g > 0.0);
    }

    #[test]
    fn newsvendor_quantile_property_on_cost_grid() {
        let geo = DemandDistribution::truncate_family(
            DemandFamily::Geometric { p: 0.4 },
            1e-8,
        )
        .unwrap();
        for d in [&two_point(), &geo] {
            for c in [0.5, 1.0, 4.0, 9.0, 19.0] {
                for h in [0.5, 1.0, 3.0] {
                    let nv = newsvendor(d, c, h).unwrap();
                    let ratio = h / (c + h);
                    assert!(d.tail_units(nv.q_units) <= ratio + 1e-9);
                    if nv.q_units > 0 {
                        assert!(d.tail_units(nv.q_units - 1) > ratio);
                    }
                }
            }
        }
    }

    #[test]
    fn newsvendor_cost_is_minimal_over_support() {
        let d = DemandDistribution::truncate_family(
            DemandFamily::Geometric { p: 0.3 },
            1e-7,
        )
        .unwrap();
        for (c, h) in [(1.0, 1.0), (9.0, 1.0), (1.0, 4.0)] {
            let nv = newsvendor(&d, c, h).unwrap();
            let cost = |s: i64| -> f64 {
                d.atoms_units()
                    .iter()
                    .zip(d.probs())
                    .map(|(&a, &p)| {
                        p * if a < s { h * (s - a) as f64 } else { c * (a - s) as f64 }
                    })
                    .sum()
            };
            let min_over_support = (0..=d.max_atom_units())
                .map(cost)
                .fold(f64::INFINITY, f64::min);
            assert!(nv.g <= min_over_support + 1e-9);
        }
    }

    #[test]
    fn sampling_is_deterministic_and_unbiased() {
        let d = two_point();
        let mut s1 = Stream::child(99, "demand", 0);
        let mut s2 = Stream::child(99, "demand", 0);
        let a = sample(&d, &mut s1, 1000).unwrap();
        let b = sample(&d, &mut s2, 1000).unwrap();
        assert_eq!(a, b);

        let n = 200_000;
        let mut s = Stream::child(7, "demand", 1);
        let draws = sample(&d, &mut s, n).unwrap();
        let mean = draws.iter().map(|&x| x as f64).sum::<f64>() / n as f64;
        let se = d.sigma() / (n as f64).sqrt();
        assert!((mean - d.mean()).abs() < 4.0 * se, "mean {mean} vs {}", d.mean());

        assert!(sample(&d, &mut s, 0).is_err());
    }

    #[test]
    fn demand_spec_round_trip() {
        let spec: DemandSpec =
            serde_json::from_str(r#"{"atoms":[0,2],"probs":[0.5,0.5],"unit":"1"}"#).unwrap();
        let d = spec.build().unwrap();
        assert_eq!(d.atoms_units(), &[0, 2]);

        let spec: DemandSpec =
            serde_json::from_str(r#"{"family":"geometric","p":0.2,"tail_mass":1e-9}"#).unwrap();
        let d = spec.build().unwrap();
        assert_eq!(d.max_atom_units(), 92);

        let spec: DemandSpec =
            serde_json::from_str(r#"{"family":"poisson","lambda":2.0,"tail_mass":1e-9}"#).unwrap();
        assert!(spec.build().is_ok());
    }
}
