//! User-based charge and subsidy (UBCS) path guidance for a single
//! origin-destination network.
//!
//! The pipeline assigns the fixed O-D demand at the system optimum, routes
//! subscribers over the optimal link flows by their declared value of time,
//! and prices each path so that truthful declaration is optimal, payments
//! net to zero, and nobody is worse off than under user equilibrium.
//!
//! All numerics are generic over the scalar type. The aliases at the crate
//! root fix the scalar to `f64` (or `f32`); [`ExactLp`] runs the simplex in
//! exact rational arithmetic.

// NaN must fail validation, so `!(x > 0)` is intended.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod equilibrium;
pub mod lp;
pub mod network;
pub mod pipeline;
pub mod report;
pub mod scalar;
pub mod scheme;
pub mod verify;
pub mod vot;

pub use equilibrium::{solve_so, solve_ue, EquilibriumError, Regime, SolverOptions};
pub use lp::{solve_lp, LpError, LpStatus};
pub use network::{enumerate_paths, NetworkError, PathSet};
pub use pipeline::{run_equilibria, run_scheme, PipelineConfig, PipelineError};
pub use scalar::{Real, Scalar};
pub use scheme::{assign_outsider, assign_subscriber, build_outcome, compute_payments, cost_report, solve_subscriber_lp, SchemeError};
pub use verify::VerificationReport;
pub use vot::VotError;

use num_rational::BigRational;

pub type Network = network::Network<f64>;
pub type LinkCostFn = network::LinkCostFn<f64>;
pub type FlowSolution = equilibrium::FlowSolution<f64>;
pub type VotDistribution = vot::VotDistribution<f64>;
pub type VotSpec = vot::VotSpec<f64>;
pub type VotClassTable = vot::VotClassTable<f64>;
pub type StandardLp = lp::StandardLp<f64>;
pub type LpSolution = lp::LpSolution<f64>;
pub type SubscriberAssignment = scheme::SubscriberAssignment<f64>;
pub type UbcsOutcome = scheme::UbcsOutcome<f64>;
pub type CostReport = scheme::CostReport<f64>;
pub type Guidance = scheme::Guidance<f64>;
pub type SchemeRun = pipeline::SchemeRun<f64>;

pub type Network32 = network::Network<f32>;
pub type VotDistribution32 = vot::VotDistribution<f32>;
pub type VotSpec32 = vot::VotSpec<f32>;
pub type SchemeRun32 = pipeline::SchemeRun<f32>;

pub type ExactLp = lp::StandardLp<BigRational>;
pub type ExactLpSolution = lp::LpSolution<BigRational>;

/// Reference inputs for the three-node example network.
pub mod fixtures {
    pub const FIG1_NETWORK: &str = include_str!("../../../fixtures/fig1_network.json");
    pub const FIG2_VOT: &str = include_str!("../../../fixtures/fig2_vot.json");
}
