//! Numerical toolkit for optimal control problems whose terminal cost is
//! piecewise constant (floor-truncated), where gradient-based solvers stall on
//! the cost plateaus.
//!
//! The crate combines three layers:
//!
//! * a smooth NLP solver (augmented Lagrangian over a projected L-BFGS inner
//!   loop) in [`solver`],
//! * a mesh-adaptive direct search with a progressive barrier in [`mads`],
//! * the variable-partition machinery in [`problem`] that turns a constrained
//!   problem with a few "singular" variables into a blackbox the direct
//!   search can drive: for fixed singular variables, a two-phase process
//!   first minimizes constraint violation, then minimizes the objective
//!   subject to staying at that violation level.
//!
//! On top of those, [`ocp`] transcribes continuous control problems with a
//! fourth-order Runge-Kutta scheme and stitches knot-to-knot segment
//! subproblems, [`smoothing`] provides the C-infinity floor approximation
//! used to precondition the terminal costs, and [`benchmarks`] defines the
//! control problems and analytic test cases exercised by the CLI.

pub mod benchmarks;
pub mod error;
pub mod exec;
pub mod mads;
pub mod ocp;
pub mod problem;
pub mod smoothing;
pub mod solver;

pub use error::Error;
pub use exec::ExecMode;
