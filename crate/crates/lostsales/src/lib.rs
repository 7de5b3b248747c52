//! Verifiable laboratory for the periodic-review lost-sales inventory model
//! with positive lead time.
//!
//! # Model
//!
//! A single item is reviewed each period `t = 1, 2, ...`. The state is the
//! on-hand inventory `I_t` plus a pipeline vector `x_t = (x_{1,t}, ..., x_{L,t})`
//! of orders placed but not yet received. Within period `t`:
//!
//! 1. `x_{1,t}` units are received and added to on-hand stock.
//! 2. A new non-negative order is placed; the pipeline shifts left and the
//!    order enters at position `L` (so an order placed in period `t` is
//!    received at the start of period `t + L`).
//! 3. Demand `D_t` is realized (i.i.d. across periods) and filled from on-hand
//!    stock. Unmet demand `N_t = (I_t + x_{1,t} - D_t)^-` is lost;
//!    `I_{t+1} = (I_t + x_{1,t} - D_t)^+` carries over.
//! 4. Cost `C_t = h I_{t+1} + c N_t` accrues (unit holding cost `h`, unit
//!    lost-sales penalty `c`).
//!
//! The system starts empty (`I_1 = 0`, `x_1 = 0`), ordering decisions are
//! made in periods `1..=T`, and only the costs of periods `L+1..=T+L` are
//! penalized; the first `L` periods are determined by the (empty) initial
//! pipeline alone, and every placed order has its full cost consequence
//! inside the penalized window.
//!
//! # What lives where
//!
//! * [`demand`]: finite lattice demand distributions, exact moments, the
//!   newsvendor quantile `Q` and per-period newsvendor cost `g`.
//! * [`lindley`]: the stationary supremum `I^r_inf` of the random walk
//!   `k r - sum D_i` via the Lindley recursion, the argmax index `i^r_k` of
//!   the walk with a terminal bonus, and certified geometric tail bounds.
//! * [`policy`]: order policies (constant-order with stationary start,
//!   base-stock, DP-table), their stationary costs, and the best constant
//!   rate `z`.
//! * [`sim`]: trajectory simulation, replication and batch-mean statistics,
//!   the exact L-period window cost functional, and conservation audits.
//! * [`dp`]: exact finite-horizon dynamic programming over the truncated
//!   lattice state space for small `L`, policy evaluation, and the
//!   constant-order-to-optimal cost ratio.
//! * [`bounds`]: closed-form constants, the lower-bound optimization over
//!   window start states, the coupled gap certificate, and the normal
//!   approximation check behind the asymptotic regime.
//! * [`suite`]: the acceptance checks wired into both `cargo test` and the
//!   command-line `verify` subcommand.
//!
//! All inventory quantities are integer multiples of a rational lattice unit
//! and are carried as integers end-to-end; probabilities and expectations are
//! `f64`. Randomness flows through named, hash-split [`stream::Stream`]s so
//! every artifact is reproducible from one root seed.

pub mod bounds;
pub mod demand;
pub mod dp;
pub mod error;
pub mod lattice;
pub mod lindley;
pub mod policy;
pub mod quad;
pub mod report;
pub mod sim;
pub mod stream;
pub mod suite;
#[cfg(test)]
pub(crate) mod testutil;

pub use error::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
