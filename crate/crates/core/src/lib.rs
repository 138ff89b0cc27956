//! Homotopy stochastic conditional gradient methods with SAG estimators.
//!
//! The crate solves
//!
//! ```text
//! min_{w in W}  (1/n) sum_i f_i(x_i^T w) + g(A w)
//! ```
//!
//! over a compact set `W` given by a linear minimization oracle. `g` is
//! handled by smoothing with a decreasing parameter `beta_k`; the smooth sum
//! by a SAG table. Variant V1 uses the full smoothed gradient of `g`,
//! Variant V2 a second SAG table over the rows of `A`.

pub mod error;
pub mod estimators;
pub mod linalg;
pub mod model;
pub mod oracles;
pub mod problems;
pub mod prox;
pub mod solver;

pub use error::{Error, Result};
pub use model::{
    objective, DecisionVar, HeldOut, Layout, LinearFunctional, NonSmoothKind, NonSmoothTerm, ObjectiveValue,
    ProblemInstance, ReferenceSolution, ReferenceSource, ScalarLoss, SmoothTerm,
};
pub use oracles::{lmo, EigenSolver, FeasibleSetSpec, SetKind};
pub use prox::{ScalarProxDescriptor, VectorProxDescriptor};
pub use solver::{run, IterateTrace, SolverConfig, TraceRow, Variant};
