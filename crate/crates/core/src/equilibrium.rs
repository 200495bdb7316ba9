//! System-optimal and user-equilibrium traffic assignment over an enumerated
//! path set.
//!
//! Both regimes share one Frank-Wolfe style solver. Each iteration loads the
//! cheapest path (all-or-nothing direction, under marginal costs for SO and
//! plain costs for UE) and takes the flow from the most expensive used path,
//! with the step chosen by bisection on the directional derivative. Taking
//! flow from a single away path instead of scaling every path keeps
//! convergence linear on these small path sets.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::network::{Network, PathSet};
use crate::scalar::{lit, Real};

pub const DEFAULT_TOL: f64 = 1e-8;
pub const DEFAULT_MAX_ITER: usize = 100_000;
const LINE_SEARCH_STEPS: usize = 50;

#[derive(Debug, Error)]
pub enum EquilibriumError {
    #[error("no convergence after {iterations} iterations (relative gap {gap:e})")]
    NonConvergence { gap: f64, iterations: usize },
    #[error("path set is empty")]
    NoPaths,
    #[error("tolerance must be positive")]
    BadTolerance,
    #[error("path set does not match the network ({0})")]
    Mismatch(&'static str),
    #[error("average travel time is undefined for zero demand")]
    ZeroDemand,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Regime {
    #[serde(rename = "SO")]
    SystemOptimal,
    #[serde(rename = "UE")]
    UserEquilibrium,
}

impl Regime {
    /// Per-link cost the regime equalizes across used paths.
    fn link_cost<T: Real>(self, net: &Network<T>, q: &[T]) -> Vec<T> {
        net.links
            .iter()
            .zip(q)
            .map(|(l, &x)| match self {
                Regime::SystemOptimal => l.cost.marginal(x),
                Regime::UserEquilibrium => l.cost.time(x),
            })
            .collect()
    }

    /// Total system time for SO, Beckmann potential for UE.
    pub fn objective<T: Real>(self, net: &Network<T>, q: &[T]) -> T {
        net.links.iter().zip(q).fold(T::zero(), |acc, (l, &x)| {
            acc + match self {
                Regime::SystemOptimal => x * l.cost.time(x),
                Regime::UserEquilibrium => l.cost.integral(x),
            }
        })
    }
}

/// Link and path flows for one assignment regime. Times are in minutes.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowSolution<T> {
    pub regime: Regime,
    pub demand: T,
    pub link_flows: Vec<T>,
    pub link_times: Vec<T>,
    pub path_flows: Vec<T>,
    pub path_times: Vec<T>,
    /// `Σ_a q_a t_a(q_a)` in flow-minutes.
    pub total_time: T,
    /// Common used-path time, set for UE only.
    pub ue_time: Option<T>,
    pub relative_gap: T,
    pub iterations: usize,
}

impl<T: Real> FlowSolution<T> {
    /// Mean trip time `total_time / d`.
    pub fn average_time(&self) -> Result<T, EquilibriumError> {
        if self.demand <= T::zero() {
            return Err(EquilibriumError::ZeroDemand);
        }
        Ok(self.total_time / self.demand)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SolverOptions<T> {
    pub tol: T,
    pub max_iter: usize,
}

impl<T: Real> Default for SolverOptions<T> {
    fn default() -> Self {
        SolverOptions { tol: lit(DEFAULT_TOL), max_iter: DEFAULT_MAX_ITER }
    }
}

pub fn solve_so<T: Real>(
    net: &Network<T>,
    paths: &PathSet,
    opts: SolverOptions<T>,
) -> Result<FlowSolution<T>, EquilibriumError> {
    solve(Regime::SystemOptimal, net, paths, opts)
}

pub fn solve_ue<T: Real>(
    net: &Network<T>,
    paths: &PathSet,
    opts: SolverOptions<T>,
) -> Result<FlowSolution<T>, EquilibriumError> {
    solve(Regime::UserEquilibrium, net, paths, opts)
}

fn argmin<T: Real>(v: &[T]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate().skip(1) {
        if *x < v[best] {
            best = i;
        }
    }
    best
}

pub fn solve<T: Real>(
    regime: Regime,
    net: &Network<T>,
    paths: &PathSet,
    opts: SolverOptions<T>,
) -> Result<FlowSolution<T>, EquilibriumError> {
    if paths.is_empty() {
        return Err(EquilibriumError::NoPaths);
    }
    if paths.incidence.len() != net.links.len() {
        return Err(EquilibriumError::Mismatch("incidence rows"));
    }
    if !(opts.tol > T::zero()) {
        return Err(EquilibriumError::BadTolerance);
    }
    let n_links = net.links.len();
    let d = net.demand;
    let mut f = vec![T::zero(); paths.len()];
    let mut gap = T::zero();
    let mut iterations = 0;

    if d > T::zero() {
        let c0 = regime.link_cost(net, &vec![T::zero(); n_links]);
        f[argmin(&paths.path_costs(&c0))] = d;

        let mut converged = false;
        while iterations < opts.max_iter {
            let q = paths.link_flows(n_links, &f);
            let costs = paths.path_costs(&regime.link_cost(net, &q));
            let target = argmin(&costs);
            let used_cost = f.iter().zip(&costs).fold(T::zero(), |acc, (&x, &c)| acc + x * c);
            let abs_gap = (used_cost - d * costs[target]).max(T::zero());
            let z = regime.objective(net, &q).abs();
            gap = if abs_gap <= T::zero() {
                T::zero()
            } else if z > T::zero() {
                abs_gap / z
            } else {
                abs_gap
            };
            if gap <= opts.tol {
                converged = true;
                break;
            }
            iterations += 1;

            let mut away = None;
            for r in 0..f.len() {
                if f[r] > T::zero() && away.is_none_or(|a: usize| costs[r] > costs[a]) {
                    away = Some(r);
                }
            }
            let away = away.expect("positive demand keeps some path loaded");
            if away == target {
                converged = true;
                break;
            }

            // Link-space direction: +1 on target-only links, -1 on away-only links.
            let delta: Vec<(usize, T)> = (0..n_links)
                .filter_map(|a| match (paths.uses(a, target), paths.uses(a, away)) {
                    (true, false) => Some((a, T::one())),
                    (false, true) => Some((a, -T::one())),
                    _ => None,
                })
                .collect();
            let slope = |step: T| {
                delta.iter().fold(T::zero(), |acc, &(a, dir)| {
                    let x = (q[a] + dir * step).max(T::zero());
                    let c = match regime {
                        Regime::SystemOptimal => net.links[a].cost.marginal(x),
                        Regime::UserEquilibrium => net.links[a].cost.time(x),
                    };
                    acc + dir * c
                })
            };

            let max_step = f[away];
            let step = if slope(max_step) <= T::zero() {
                max_step
            } else {
                let (mut lo, mut hi) = (T::zero(), max_step);
                for _ in 0..LINE_SEARCH_STEPS {
                    let mid = (lo + hi) / lit(2.0);
                    if slope(mid) > T::zero() {
                        hi = mid;
                    } else {
                        lo = mid;
                    }
                }
                (lo + hi) / lit(2.0)
            };
            f[target] = f[target] + step;
            f[away] = if step == max_step { T::zero() } else { f[away] - step };
        }
        if !converged {
            return Err(EquilibriumError::NonConvergence { gap: gap.to_f64_lossy(), iterations });
        }
    }

    let link_flows = paths.link_flows(n_links, &f);
    let link_times: Vec<T> = net.links.iter().zip(&link_flows).map(|(l, &x)| l.cost.time(x)).collect();
    let path_times = paths.path_costs(&link_times);
    let total_time = link_flows.iter().zip(&link_times).fold(T::zero(), |acc, (&x, &t)| acc + x * t);
    let ue_time = match regime {
        Regime::UserEquilibrium => Some(path_times[argmin(&path_times)]),
        Regime::SystemOptimal => None,
    };
    log::debug!("{regime:?} assignment: {iterations} iterations, relative gap {gap}");
    Ok(FlowSolution {
        regime,
        demand: d,
        link_flows,
        link_times,
        path_flows: f,
        path_times,
        total_time,
        ue_time,
        relative_gap: gap,
        iterations,
    })
}
