//! Baseline operating policies and water-value offer curves for a single
//! hydropower reservoir.
//!
//! The pipeline has three stages:
//!
//! 1. Fit a seasonal inflow model from historical weekly data: periodic
//!    quantile curves ([`quantile_fit`]), inflow regimes with a
//!    time-inhomogeneous Markov chain and per-regime inflow histograms
//!    ([`regime_chain`]).
//! 2. Assemble the reservoir's average-cost Markov decision model over
//!    (storage level, regime, week) states ([`mdp`]).
//! 3. Solve the induced primal/dual pair of linear programs and extract the
//!    operating policy, state values, and weekly offer curves
//!    ([`policy_pricing`]), then cross-validate by simulation ([`simulate`]).
//!
//! All optimization runs through [`convex_core`], a self-contained sparse
//! interior-point LP solver plus a log-barrier Newton method for the
//! cone-constrained transition MLE.

pub mod bundle;
pub mod config;
pub mod convex_core;
pub mod error;
pub mod ingest;
pub mod mdp;
pub mod pipeline;
pub mod policy_pricing;
pub mod quantile_fit;
pub mod regime_chain;
pub mod simulate;

pub use error::Error;

/// Hours in one weekly time step; converts MW held for a week into MWh.
pub const HOURS_PER_WEEK: f64 = 168.0;

/// Weeks per modeled operating year.
pub const WEEKS_PER_YEAR: usize = 52;

/// Default angular frequency of the seasonal bases, rad/day.
pub const OMEGA_DEFAULT: f64 = 2.0 * std::f64::consts::PI / 365.25;

/// Alternative frequency locked to the 52-week model year (364 days). The
/// day clock advances 7 days/week, so over a long record this keeps the
/// weekly grid, the fitted curves, and week-keyed statistics in phase,
/// where the 365.25-day period slips ~1.25 days per year.
pub const OMEGA_WEEKLY: f64 = 2.0 * std::f64::consts::PI / 364.0;
