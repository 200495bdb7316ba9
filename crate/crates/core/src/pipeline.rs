//! End-to-end run: paths, SO and UE assignment, subscriber LP, outcome, costs
//! and verification.

use thiserror::Error;

use crate::equilibrium::{solve_so, solve_ue, EquilibriumError, FlowSolution, SolverOptions};
use crate::network::{enumerate_paths, Network, NetworkError, PathSet, DEFAULT_MAX_PATHS};
use crate::scalar::{lit, Real};
use crate::scheme::{build_outcome, cost_report, solve_subscriber_lp, CostReport, SchemeError, SubscriberAssignment, UbcsOutcome};
use crate::verify::{verify_outcome, VerificationReport, VerifyError, DEFAULT_SP_GRID};
use crate::vot::{VotClassTable, VotDistribution, VotError, DEFAULT_CLASSES};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error(transparent)]
    Equilibrium(#[from] EquilibriumError),
    #[error(transparent)]
    Vot(#[from] VotError),
    #[error(transparent)]
    Scheme(#[from] SchemeError),
    #[error(transparent)]
    Verify(#[from] VerifyError),
}

#[derive(Debug, Clone, Copy)]
pub struct PipelineConfig {
    pub classes: usize,
    pub tol: f64,
    pub max_iter: usize,
    pub max_paths: usize,
    /// Points per axis of the strategy-proofness lattice.
    pub sp_grid: usize,
    /// VOT points in the cost report.
    pub cost_grid: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            classes: DEFAULT_CLASSES,
            tol: crate::equilibrium::DEFAULT_TOL,
            max_iter: crate::equilibrium::DEFAULT_MAX_ITER,
            max_paths: DEFAULT_MAX_PATHS,
            sp_grid: DEFAULT_SP_GRID,
            cost_grid: 401,
        }
    }
}

impl PipelineConfig {
    pub fn solver_options<T: Real>(&self) -> SolverOptions<T> {
        SolverOptions { tol: lit(self.tol), max_iter: self.max_iter }
    }
}

/// Both assignments for one network.
#[derive(Debug, Clone)]
pub struct Equilibria<T> {
    pub paths: PathSet,
    pub so: FlowSolution<T>,
    pub ue: FlowSolution<T>,
}

pub fn run_equilibria<T: Real>(net: &Network<T>, cfg: &PipelineConfig) -> Result<Equilibria<T>, PipelineError> {
    let paths = enumerate_paths(net, cfg.max_paths)?;
    let so = solve_so(net, &paths, cfg.solver_options())?;
    let ue = solve_ue(net, &paths, cfg.solver_options())?;
    Ok(Equilibria { paths, so, ue })
}

#[derive(Debug, Clone)]
pub struct SchemeRun<T> {
    pub equilibria: Equilibria<T>,
    pub classes: VotClassTable<T>,
    pub assignment: SubscriberAssignment<T>,
    pub outcome: UbcsOutcome<T>,
    pub costs: CostReport<T>,
    pub verification: VerificationReport,
}

pub fn run_scheme<T: Real>(
    net: &Network<T>,
    dist: &VotDistribution<T>,
    cfg: &PipelineConfig,
) -> Result<SchemeRun<T>, PipelineError> {
    let equilibria = run_equilibria(net, cfg)?;
    let classes = dist.discretize(net.subscriber_demand, cfg.classes)?;
    let assignment = solve_subscriber_lp(&equilibria.so, &classes, net, &equilibria.paths)?;
    let outcome = build_outcome(&assignment, dist, &equilibria.so.path_times)?;
    let costs = cost_report(&outcome, &equilibria.ue, cfg.cost_grid)?;
    let verification = verify_outcome(&outcome, &costs, cfg.sp_grid)?;
    Ok(SchemeRun { equilibria, classes, assignment, outcome, costs, verification })
}
