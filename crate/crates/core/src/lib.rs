//! Universal mirror-prox solvers for monotone variational inequalities.
//!
//! The crate provides the deterministic and stochastic universal mirror-prox
//! methods, which adapt their step parameter to the (unknown) Hölder
//! continuity of the operator, together with exact and brute-force gap
//! certificates, a zoo of test problems with known constants, and the
//! experiment runner behind the `vibench` binary.

pub mod bench;
pub mod error;
pub mod extragradient;
pub mod gap;
pub mod operator;
pub mod point;
pub mod problems;
pub mod prox;
pub mod set;
pub mod suite;
pub mod sump;
pub mod ump;
pub mod verify;

pub use error::{Error, Result};
pub use operator::{FnOperator, HolderConstants, Operator, RandomState, StochasticOracle};
pub use point::Point;
pub use problems::VIProblem;
pub use set::FeasibleSet;
pub use ump::{RunOptions, RunReport, SolverState};
