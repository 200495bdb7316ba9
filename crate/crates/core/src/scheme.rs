//! The charge-and-subsidy scheme on top of a system-optimal assignment.
//!
//! Subscribers are routed by a VOT-weighted LP that keeps the SO link flows,
//! then sorted onto paths by VOT quantile: the slowest path gets the lowest
//! VOTs. Path payments are the unique transfers that make truthful VOT
//! declaration optimal while netting to zero in expectation. Outsiders are
//! spread over the same paths in the same proportions and pay nothing.
//!
//! Units: path times in minutes, VOT in $/hour, payments and costs in $.

use rand::distributions::{Distribution, WeightedIndex};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::equilibrium::{FlowSolution, Regime};
use crate::lp::{solve_lp, LpError, LpStatus, StandardLp};
use crate::network::{Network, PathSet};
use crate::scalar::{from_usize, lit, Real, Scalar};
use crate::vot::{VotClassTable, VotDistribution, VotError};

pub const MINUTES_PER_HOUR: f64 = 60.0;

#[derive(Debug, Error)]
pub enum SchemeError {
    #[error("the scheme needs a positive subscriber demand")]
    NoSubscribers,
    #[error(transparent)]
    Lp(#[from] LpError),
    #[error(transparent)]
    Vot(#[from] VotError),
    #[error("subscriber LP is {0:?}; SO link flows and class demands are inconsistent")]
    LpNotOptimal(LpStatus),
    #[error("subscriber assignment violates {0}")]
    Invariant(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("declared VOT {vot} is outside the support [{min}, {max}]; clamp it into range or declare again")]
    VotOutOfSupport { vot: f64, min: f64, max: f64 },
    #[error("cost comparison needs a converged user-equilibrium solution")]
    NotUserEquilibrium,
    #[error("grid needs at least 2 points")]
    GridTooSmall,
}

/// Subscriber and outsider path flows from the VOT-weighted LP.
#[derive(Debug, Clone, PartialEq)]
pub struct SubscriberAssignment<T> {
    /// `class_path_flows[m][r]`: subscribers of VOT class `m` on path `r`.
    pub class_path_flows: Vec<Vec<T>>,
    pub subscriber_path_flows: Vec<T>,
    pub outsider_path_flows: Vec<T>,
    /// `Σ_m Σ_r β^m f^m_r T_r` at the optimum (minutes·$/h).
    pub weighted_cost: T,
    pub subscriber_demand: T,
    pub outsider_demand: T,
}

/// Assembles the VOT-weighted path-flow LP.
///
/// Variables are ordered class-major (`m * |R| + r`). Rows are one per link
/// (`Σ δ_{a,r} f^m_r = link_targets[a]`) followed by one per class.
pub fn subscriber_lp<T: Scalar>(
    link_targets: &[T],
    paths: &PathSet,
    classes_mean: &[T],
    classes_demand: &[T],
    times: &[T],
) -> StandardLp<T> {
    let n_paths = paths.len();
    let n_classes = classes_mean.len();
    let n_vars = n_paths * n_classes;
    let mut cost = Vec::with_capacity(n_vars);
    for beta in classes_mean {
        for t in times {
            cost.push(beta.clone() * t.clone());
        }
    }
    let mut matrix = Vec::with_capacity(link_targets.len() + n_classes);
    for a in 0..link_targets.len() {
        let mut row = vec![T::zero(); n_vars];
        for m in 0..n_classes {
            for r in 0..n_paths {
                if paths.uses(a, r) {
                    row[m * n_paths + r] = T::one();
                }
            }
        }
        matrix.push(row);
    }
    for m in 0..n_classes {
        let mut row = vec![T::zero(); n_vars];
        for r in 0..n_paths {
            row[m * n_paths + r] = T::one();
        }
        matrix.push(row);
    }
    let mut rhs = link_targets.to_vec();
    rhs.extend(classes_demand.iter().cloned());
    StandardLp { cost, matrix, rhs }
}

/// Routes subscriber classes over the paths at the SO link flows.
pub fn solve_subscriber_lp<T: Real>(
    so: &FlowSolution<T>,
    classes: &VotClassTable<T>,
    net: &Network<T>,
    paths: &PathSet,
) -> Result<SubscriberAssignment<T>, SchemeError> {
    let d = net.demand;
    let sub = net.subscriber_demand;
    if !(sub > T::zero()) {
        return Err(SchemeError::NoSubscribers);
    }
    if so.regime != Regime::SystemOptimal {
        return Err(SchemeError::InvalidInput("subscriber routing needs the SO solution".into()));
    }
    if so.path_times.len() != paths.len() || so.link_flows.len() != net.links.len() {
        return Err(SchemeError::InvalidInput("flow solution does not match the path set".into()));
    }
    let class_total = classes.total_demand();
    if (class_total - sub).abs() > T::tolerance(1e-9) * (T::one() + sub) {
        return Err(SchemeError::InvalidInput(format!("class demands sum to {class_total}, expected {sub}")));
    }

    let share = sub / d;
    let targets: Vec<T> = so.link_flows.iter().map(|&q| q * share).collect();
    let times = &so.path_times;
    let lp = subscriber_lp(&targets, paths, &classes.mean, &classes.demand, times);
    let sol = solve_lp(&lp)?;
    if sol.status != LpStatus::Optimal {
        return Err(SchemeError::LpNotOptimal(sol.status));
    }

    let n_paths = paths.len();
    let snap = T::tolerance(1e-9) * (T::one() + sub);
    let mut class_path_flows: Vec<Vec<T>> = sol.x.chunks(n_paths).map(|c| c.to_vec()).collect();
    if let Some(v) = class_path_flows.iter().flatten().find(|v| **v < -snap) {
        return Err(SchemeError::Invariant(format!("non-negativity (flow {v})")));
    }
    for f in class_path_flows.iter_mut().flatten() {
        if *f < snap {
            *f = T::zero();
        }
    }

    let class_tol = T::tolerance(1e-7) * (T::one() + sub);
    for (m, row) in class_path_flows.iter().enumerate() {
        let s = row.iter().fold(T::zero(), |acc, x| acc + *x);
        if (s - classes.demand[m]).abs() > class_tol {
            return Err(SchemeError::Invariant(format!("class {m} demand ({s} vs {})", classes.demand[m])));
        }
    }
    let subscriber_path_flows: Vec<T> =
        (0..n_paths).map(|r| class_path_flows.iter().fold(T::zero(), |acc, row| acc + row[r])).collect();
    let link_tol = T::tolerance(1e-6) * (T::one() + d);
    let sub_links = paths.link_flows(net.links.len(), &subscriber_path_flows);
    for (a, (x, target)) in sub_links.iter().zip(&targets).enumerate() {
        if (*x - *target).abs() > link_tol {
            return Err(SchemeError::Invariant(format!("link {} share ({x} vs {target})", net.links[a].id)));
        }
    }

    let outsiders = net.outsider_demand();
    let ratio = outsiders / sub;
    let outsider_path_flows = subscriber_path_flows.iter().map(|&f| f * ratio).collect();
    let weighted_cost = lp.objective_at(&sol.x);
    Ok(SubscriberAssignment {
        class_path_flows,
        subscriber_path_flows,
        outsider_path_flows,
        weighted_cost,
        subscriber_demand: sub,
        outsider_demand: outsiders,
    })
}

/// Paths sorted slowest first, with VOT partition, shares and payments.
#[derive(Debug, Clone, PartialEq)]
pub struct UbcsOutcome<T> {
    /// Original path index at each position, slowest path first.
    pub order: Vec<usize>,
    pub sorted_times: Vec<T>,
    pub subscriber_flows: Vec<T>,
    pub outsider_flows: Vec<T>,
    /// `β_0 <= β_1 <= … <= β_n`; position `i` serves VOTs in `(β_i, β_{i+1}]`.
    pub partition: Vec<T>,
    /// Share of subscribers (and of outsiders) routed to each position.
    pub rho: Vec<T>,
    /// Payment per trip in $, positive for a charge, negative for a subsidy.
    pub payments: Vec<T>,
    pub support: (T, T),
}

impl<T: Real> UbcsOutcome<T> {
    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    /// Expected trip time `Σ ρ_i T_i` for an outsider (or quitter).
    pub fn expected_time(&self) -> T {
        self.rho.iter().zip(&self.sorted_times).fold(T::zero(), |acc, (r, t)| acc + *r * *t)
    }

    /// Generalized cost in $ of a user with VOT `vot` taking position `i`.
    pub fn cost_on(&self, i: usize, vot: T) -> T {
        self.sorted_times[i] * vot / lit(MINUTES_PER_HOUR) + self.payments[i]
    }
}

/// Sorts paths by descending time and derives the VOT partition, shares and
/// payments.
pub fn build_outcome<T: Real>(
    assign: &SubscriberAssignment<T>,
    dist: &VotDistribution<T>,
    times: &[T],
) -> Result<UbcsOutcome<T>, SchemeError> {
    if !(assign.subscriber_demand > T::zero()) {
        return Err(SchemeError::NoSubscribers);
    }
    let n = assign.subscriber_path_flows.len();
    if times.len() != n {
        return Err(SchemeError::InvalidInput(format!("{} path times for {n} paths", times.len())));
    }
    let mut order: Vec<usize> = (0..n).collect();
    // Stable sort keeps ascending path index among equal times.
    order.sort_by(|&a, &b| times[b].partial_cmp(&times[a]).expect("finite path times"));

    let sorted_times: Vec<T> = order.iter().map(|&r| times[r]).collect();
    let subscriber_flows: Vec<T> = order.iter().map(|&r| assign.subscriber_path_flows[r]).collect();
    let outsider_flows: Vec<T> = order.iter().map(|&r| assign.outsider_path_flows[r]).collect();
    let total = subscriber_flows.iter().fold(T::zero(), |acc, f| acc + *f);
    let rho: Vec<T> = subscriber_flows.iter().map(|&f| f / total).collect();

    let (min, max) = dist.support();
    let mut partition = Vec::with_capacity(n + 1);
    partition.push(min);
    let last_loaded = rho.iter().rposition(|r| *r > T::zero()).unwrap_or(0);
    let mut cum = T::zero();
    for (i, r) in rho.iter().enumerate() {
        cum = cum + *r;
        let prev = partition[i];
        let b = if i >= last_loaded {
            max
        } else if *r == T::zero() {
            // Empty interval.
            prev
        } else {
            dist.inverse_cdf(cum.min(T::one()))?.max(prev)
        };
        partition.push(b);
    }

    let payments = compute_payments(&sorted_times, &partition, &rho)?;
    Ok(UbcsOutcome { order, sorted_times, subscriber_flows, outsider_flows, partition, rho, payments, support: (min, max) })
}

/// Path payments in $ for positions sorted slowest first.
///
/// `P_i = Σ_{h<i} ρ_h Σ_{g=h+1..i} s_g - Σ_{h>i} ρ_h Σ_{g=i+1..h} s_g`, where
/// `s_g = (T_{g-1} - T_g) β_g / 60` is the time saved stepping from
/// position `g-1` to `g`, priced at the VOT boundary between them.
#[allow(clippy::needless_range_loop)]
pub fn compute_payments<T: Scalar>(sorted_times: &[T], partition: &[T], rho: &[T]) -> Result<Vec<T>, SchemeError> {
    let n = sorted_times.len();
    if n == 0 || rho.len() != n || partition.len() != n + 1 {
        return Err(SchemeError::InvalidInput(format!(
            "{n} times, {} shares and {} partition points (need n, n, n + 1 with n >= 1)",
            rho.len(),
            partition.len()
        )));
    }
    if sorted_times.windows(2).any(|w| w[1] > w[0]) {
        return Err(SchemeError::InvalidInput("path times must be non-increasing".into()));
    }
    if partition.windows(2).any(|w| w[1] < w[0]) {
        return Err(SchemeError::InvalidInput("partition must be non-decreasing".into()));
    }
    if rho.iter().any(|r| *r < T::zero()) {
        return Err(SchemeError::InvalidInput("shares must be non-negative".into()));
    }
    let mass = rho.iter().fold(T::zero(), |acc, r| acc + r.clone());
    if (mass.clone() - T::one()).abs() > T::tolerance(1e-9) {
        return Err(SchemeError::InvalidInput(format!("shares sum to {mass}, expected 1")));
    }

    let hour = T::cast(MINUTES_PER_HOUR);
    let step = |g: usize| (sorted_times[g - 1].clone() - sorted_times[g].clone()) * partition[g].clone();
    let payments = (0..n)
        .map(|i| {
            let mut p = T::zero();
            for h in 0..i {
                let s = (h + 1..=i).fold(T::zero(), |acc, g| acc + step(g));
                p = p + rho[h].clone() * s;
            }
            for h in i + 1..n {
                let s = (i + 1..=h).fold(T::zero(), |acc, g| acc + step(g));
                p = p - rho[h].clone() * s;
            }
            p / hour.clone()
        })
        .collect();
    Ok(payments)
}

/// Path guidance handed to one traveler.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Guidance<T> {
    /// Position in the slowest-first order.
    pub position: usize,
    /// Index into the enumerated path set.
    pub path: usize,
    pub time: T,
    /// Charge (+) or subsidy (-); zero for outsiders.
    pub payment: T,
}

/// Routes a subscriber by declared VOT: position `i` with the VOT in
/// `(β_i, β_{i+1}]`, skipping empty intervals. The support minimum goes to
/// the first non-empty position.
pub fn assign_subscriber<T: Real>(outcome: &UbcsOutcome<T>, vot: T) -> Result<Guidance<T>, SchemeError> {
    let (min, max) = outcome.support;
    if !(vot >= min && vot <= max) {
        return Err(SchemeError::VotOutOfSupport { vot: vot.to_f64_lossy(), min: min.to_f64_lossy(), max: max.to_f64_lossy() });
    }
    let position = (0..outcome.len())
        .find(|&i| outcome.rho[i] > T::zero() && vot <= outcome.partition[i + 1])
        .or_else(|| (0..outcome.len()).rev().find(|&i| outcome.rho[i] > T::zero()))
        .ok_or_else(|| SchemeError::InvalidInput("outcome has no loaded path".into()))?;
    Ok(Guidance {
        position,
        path: outcome.order[position],
        time: outcome.sorted_times[position],
        payment: outcome.payments[position],
    })
}

/// Seeded sampler drawing outsider positions with probabilities `ρ`.
#[derive(Debug, Clone)]
pub struct OutsiderSampler {
    rng: ChaCha8Rng,
    weights: WeightedIndex<f64>,
}

impl OutsiderSampler {
    pub fn new<T: Real>(outcome: &UbcsOutcome<T>, seed: u64) -> Result<Self, SchemeError> {
        let weights = WeightedIndex::new(outcome.rho.iter().map(|r| r.to_f64_lossy()))
            .map_err(|e| SchemeError::InvalidInput(format!("outsider shares: {e}")))?;
        Ok(OutsiderSampler { rng: ChaCha8Rng::seed_from_u64(seed), weights })
    }

    pub fn next_position(&mut self) -> usize {
        self.weights.sample(&mut self.rng)
    }

    pub fn sample<T: Real>(&mut self, outcome: &UbcsOutcome<T>) -> Guidance<T> {
        let position = self.next_position();
        Guidance { position, path: outcome.order[position], time: outcome.sorted_times[position], payment: T::zero() }
    }
}

/// Single seeded outsider draw.
pub fn assign_outsider<T: Real>(outcome: &UbcsOutcome<T>, seed: u64) -> Result<Guidance<T>, SchemeError> {
    Ok(OutsiderSampler::new(outcome, seed)?.sample(outcome))
}

/// Costs in $ for one VOT under the three alternatives.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostPoint<T> {
    pub beta: T,
    /// Subscriber cost `C(β) = T_i β + P_i`.
    pub subscriber: T,
    /// Cost after quitting (outsider) `C_Q(β) = Σ ρ_h T_h β`.
    pub quitter: T,
    /// No-scheme user-equilibrium cost `C_UE(β) = T_UE β`.
    pub ue: T,
    /// `(C_UE - C) / C_UE`; `None` when `C_UE = 0`.
    pub improvement_subscriber: Option<T>,
    /// `(C_UE - C_Q) / C_UE`; `None` when `C_UE = 0`.
    pub improvement_outsider: Option<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CostReport<T> {
    pub points: Vec<CostPoint<T>>,
    pub ue_time: T,
    pub expected_time: T,
}

pub fn cost_point<T: Real>(outcome: &UbcsOutcome<T>, ue_time: T, beta: T) -> Result<CostPoint<T>, SchemeError> {
    let g = assign_subscriber(outcome, beta)?;
    let hour = lit::<T>(MINUTES_PER_HOUR);
    let subscriber = outcome.cost_on(g.position, beta);
    let quitter = outcome.expected_time() * beta / hour;
    let ue = ue_time * beta / hour;
    let ratio = |c: T| if ue > T::zero() { Some((ue - c) / ue) } else { None };
    Ok(CostPoint {
        beta,
        subscriber,
        quitter,
        ue,
        improvement_subscriber: ratio(subscriber),
        improvement_outsider: ratio(quitter),
    })
}

/// Evaluates all three costs on `grid_size` evenly spaced VOTs spanning the
/// support.
pub fn cost_report<T: Real>(
    outcome: &UbcsOutcome<T>,
    ue: &FlowSolution<T>,
    grid_size: usize,
) -> Result<CostReport<T>, SchemeError> {
    if grid_size < 2 {
        return Err(SchemeError::GridTooSmall);
    }
    let ue_time = match (ue.regime, ue.ue_time) {
        (Regime::UserEquilibrium, Some(t)) => t,
        _ => return Err(SchemeError::NotUserEquilibrium),
    };
    let (min, max) = outcome.support;
    let last = grid_size - 1;
    let points = (0..grid_size)
        .map(|k| {
            let beta = if k == last { max } else { min + (max - min) * from_usize(k) / from_usize(last) };
            cost_point(outcome, ue_time, beta)
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(CostReport { points, ue_time, expected_time: outcome.expected_time() })
}
