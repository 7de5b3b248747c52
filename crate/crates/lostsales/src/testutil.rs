//! Shared fixtures for unit tests.

use crate::demand::{DemandDistribution, DemandFamily};
use crate::lattice::Rat;

/// Two-point demand on {0, 2} with equal mass: mean 1, sigma 1, zeta 1.
pub fn two_point() -> DemandDistribution {
    DemandDistribution::from_pmf(&[0, 2], &[0.5, 0.5], Rat::from_int(1)).unwrap()
}

/// Truncated geometric demand.
pub fn geometric(p: f64, tail_mass: f64) -> DemandDistribution {
    DemandDistribution::truncate_family(DemandFamily::Geometric { p }, tail_mass).unwrap()
}

/// Root of x^3 + x^2 + x = 1 in (0, 1) by bisection: the ascent probability
/// of the half-unit walk that steps +1 or -3 with equal probability. For the
/// two-point demand and rate 1/2, P(sup >= n/2) equals this root to the n-th
/// power, giving a closed-form oracle for the stationary supremum.
pub fn skip_free_eta() -> f64 {
    let f = |x: f64| x * x * x + x * x + x - 1.0;
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}
