//! Self-contained numerical optimization engine: sparse linear programming
//! with primal and dual solutions, vertex purification, and barrier-method
//! maximization of concave log-likelihoods under linear equalities and
//! second-order-cone constraints.
//!
//! Solvers are deterministic: fixed pivot orderings, no randomized
//! heuristics. A solver instance is single-use; concurrent instances are
//! independent.

pub mod barrier;
pub mod ipm;
pub mod ldl;
pub mod purify;
pub mod sparse;

pub use barrier::{solve_log_barrier_mle, BarrierOptions, LogTerm, MleProblem, MleSolution, SocConstraint};
pub use ipm::{solve_lp, LinearProgram, LpOptions, LpSolution, LpStatus};
pub use ldl::{default_pivot_order, KktSolver, LdlFactor, LdlSymbolic};
pub use purify::{purify_to_vertex, PurifyOptions};
pub use sparse::CscMatrix;
