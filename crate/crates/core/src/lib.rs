//! Alternating least-squares matrix completion on sparse bipartite
//! observation graphs.
//!
//! Two solvers are provided: vertex least squares (VLS), where every row and
//! column vertex refits its factor against all of its neighbors, and edge
//! least squares (ELS), where every directed edge carries a message fitted
//! against all neighbors except the addressee. The [`analysis`] module
//! reconstructs, with access to the planted factors, the row-stochastic
//! matrices that drive the rank-1 iterations and checks their properties.
//!
//! Everything numeric is generic over [`Scalar`] (`f32` or `f64`); the
//! aliases below fix the common `f64` case.

// `!(a > b)` is used on purpose so NaN is rejected too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod error;
pub mod graph;
pub mod instance;
pub mod linalg;
pub mod metrics;
pub mod scalar;
pub mod solver;

pub use error::{Error, Result, Side};
pub use graph::{
    build_dual_graph, gen_er_edges, gen_random_regular_bipartite, BipartiteGraph, DualGraph,
};
pub use instance::{InitMode, InitSpec, ObservedView};
pub use scalar::Scalar;
pub use solver::{Algorithm, SolveConfig, StartState, Status};

pub type Instance = instance::Instance<f64>;
pub type FactorState = solver::FactorState<f64>;
pub type MessageState = solver::MessageState<f64>;
pub type Trace = solver::Trace<f64>;
pub type Solution = solver::Solution<f64>;
pub type TransitionMatrix = analysis::TransitionMatrix<f64>;

pub type Instance32 = instance::Instance<f32>;
pub type FactorState32 = solver::FactorState<f32>;
pub type MessageState32 = solver::MessageState<f32>;
