//! Crate error type. Variants name the contract that was violated, not the
//! call site; callers match on them to decide between reconfiguration and
//! hard failure.

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// Probability vector does not sum to 1 (or contains a negative entry).
    #[error("probabilities must be non-negative and sum to 1 (sum = {sum})")]
    NonStochastic { sum: f64 },

    /// Fewer than two atoms carry positive probability.
    #[error("demand must be non-deterministic (needs at least two atoms with positive probability)")]
    Deterministic,

    /// A demand atom is negative.
    #[error("demand atoms must be non-negative (found {atom})")]
    NegativeAtom { atom: i64 },

    /// The same atom appears twice in a pmf specification.
    #[error("duplicate demand atom {atom}")]
    DuplicateAtom { atom: i64 },

    /// Atom and probability vectors differ in length.
    #[error("atoms ({atoms}) and probs ({probs}) must have equal length")]
    LengthMismatch { atoms: usize, probs: usize },

    /// A scalar parameter is outside its admissible range.
    #[error("bad parameter: {0}")]
    BadParameter(String),

    /// Order rate at or above mean demand: the supremum walk has no
    /// stationary distribution.
    #[error("order rate {rate} must be below mean demand {mean}")]
    RateTooHigh { rate: String, mean: f64 },

    /// A quantity is not an integer multiple of the working lattice unit.
    #[error("lattice mismatch: {0}")]
    LatticeMismatch(String),

    /// An iterative solver exhausted its iteration budget.
    #[error("no convergence after {iterations} iterations (tolerance {tol})")]
    NoConvergence { iterations: usize, tol: f64 },

    /// An exact enumeration would exceed its configured work budget.
    #[error("{what} needs {needed} units of work, budget is {budget}")]
    BudgetExceeded {
        what: &'static str,
        needed: u128,
        budget: u128,
    },

    /// The DP state space exceeds the configured budget.
    #[error("state space of {states} states exceeds budget {budget}")]
    StateBudgetExceeded { states: u128, budget: u128 },

    /// Doubling the inventory cap moved the DP optimum: the cap truncates
    /// mass that matters.
    #[error("inventory cap too tight: optimum {opt} vs {opt_doubled} at doubled cap (rel diff {rel_diff:.2e})")]
    CapTooTight {
        opt: f64,
        opt_doubled: f64,
        rel_diff: f64,
    },

    /// The lower-bound optimizer returned a mean order rate at or above mean
    /// demand, so no stationary comparison policy exists at that rate.
    #[error("optimized mean order rate {rstar} is not below mean demand {mean}; no stationary constant-order policy exists")]
    RStarDegenerate { rstar: String, mean: f64 },

    /// Epsilon outside (0, 1).
    #[error("epsilon must lie in (0, 1), got {0}")]
    BadEpsilon(f64),

    /// An artifact on disk does not match the expected schema or checksum.
    #[error("artifact error: {0}")]
    Artifact(String),

    /// Underlying I/O failure while reading or writing an artifact.
    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
