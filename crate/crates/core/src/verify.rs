//! Executable checks of the scheme's guarantees plus brute-force oracles for
//! the optimization stages.
//!
//! Every check reports its worst margin, pass or fail.

use serde::Serialize;
use thiserror::Error;

use crate::scalar::{lit, Real, Scalar};
use crate::scheme::{assign_subscriber, CostReport, UbcsOutcome, MINUTES_PER_HOUR};
use crate::vot::VotClassTable;

pub const DEFAULT_SP_GRID: usize = 201;
const SP_TOL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum VerifyError {
    #[error("oracle supports at most 5 classes and 4 paths, got {classes} and {paths}")]
    TooLarge { classes: usize, paths: usize },
    #[error("lattice step must be positive")]
    BadStep,
    #[error("{what} {value} is not a multiple of the lattice step")]
    OffLattice { what: &'static str, value: f64 },
    #[error("no lattice allocation satisfies both constraint families")]
    Infeasible,
    #[error("grid needs at least 2 points")]
    GridTooSmall,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StrategyProofCheck {
    pub pass: bool,
    /// Smallest `C(declared | true) - C(true | true)` found, in $.
    pub min_margin: f64,
    pub worst_true_vot: f64,
    pub worst_declared_vot: f64,
    /// Largest `|margin|` for a boundary VOT declaring into the next
    /// non-empty interval; zero in exact arithmetic.
    pub boundary_indifference: f64,
    pub lattice_points: usize,
    pub tolerance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RevenueNeutralCheck {
    pub pass: bool,
    /// `Σ ρ_i P_i` in $.
    pub residual: f64,
    pub tolerance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParetoCheck {
    pub pass: bool,
    /// Smallest `C_UE(β) - C_Q(β)` over the grid.
    pub worst_ue_minus_quitter: f64,
    /// Smallest `C_Q(β) - C(β)` over the grid.
    pub worst_quitter_minus_subscriber: f64,
    pub grid: usize,
    pub relative_tolerance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerificationReport {
    pub strategy_proof: StrategyProofCheck,
    pub revenue_neutral: RevenueNeutralCheck,
    pub pareto: ParetoCheck,
    /// Largest gap between the closed-form payments and the ones rebuilt
    /// from payment differences plus neutrality.
    pub payment_uniqueness_gap: f64,
}

impl VerificationReport {
    pub fn passed(&self) -> bool {
        self.strategy_proof.pass && self.revenue_neutral.pass && self.pareto.pass
    }
}

/// Cost in $ to a user with VOT `truth` who declares `declared`.
fn misreport_cost<T: Real>(outcome: &UbcsOutcome<T>, truth: T, declared: T) -> T {
    let g = assign_subscriber(outcome, declared).expect("lattice stays inside the support");
    outcome.cost_on(g.position, truth)
}

/// Evaluates every (true, declared) VOT pair on a `grid x grid` lattice over
/// the support, extended with the partition points.
pub fn check_strategy_proof<T: Real>(outcome: &UbcsOutcome<T>, grid: usize) -> Result<StrategyProofCheck, VerifyError> {
    if grid < 2 {
        return Err(VerifyError::GridTooSmall);
    }
    let (min, max) = outcome.support;
    let mut lattice: Vec<T> = (0..grid)
        .map(|k| if k + 1 == grid { max } else { min + (max - min) * lit(k as f64) / lit((grid - 1) as f64) })
        .collect();
    lattice.extend(outcome.partition.iter().copied());
    lattice.sort_by(|a, b| a.partial_cmp(b).expect("finite lattice"));
    lattice.dedup();

    let mut worst = (T::infinity(), min, min);
    for &truth in &lattice {
        let honest = misreport_cost(outcome, truth, truth);
        for &declared in &lattice {
            let margin = misreport_cost(outcome, truth, declared) - honest;
            if margin < worst.0 {
                worst = (margin, truth, declared);
            }
        }
    }
    Ok(StrategyProofCheck {
        pass: worst.0 >= -lit::<T>(SP_TOL),
        min_margin: worst.0.to_f64_lossy(),
        worst_true_vot: worst.1.to_f64_lossy(),
        worst_declared_vot: worst.2.to_f64_lossy(),
        boundary_indifference: boundary_indifference(outcome).to_f64_lossy(),
        lattice_points: lattice.len(),
        tolerance: SP_TOL,
    })
}

/// At each boundary between consecutive non-empty intervals, a user exactly
/// at the boundary VOT is indifferent between the two paths.
pub fn boundary_indifference<T: Real>(outcome: &UbcsOutcome<T>) -> T {
    let loaded: Vec<usize> = (0..outcome.len()).filter(|&i| outcome.rho[i] > T::zero()).collect();
    loaded.windows(2).fold(T::zero(), |worst, w| {
        let beta = outcome.partition[w[0] + 1];
        let gap = (outcome.cost_on(w[1], beta) - outcome.cost_on(w[0], beta)).abs();
        worst.max(gap)
    })
}

/// `Σ ρ_i P_i`.
pub fn revenue_residual<T: Scalar>(rho: &[T], payments: &[T]) -> T {
    rho.iter().zip(payments).fold(T::zero(), |acc, (r, p)| acc + r.clone() * p.clone())
}

pub fn check_revenue_neutral<T: Real>(outcome: &UbcsOutcome<T>) -> RevenueNeutralCheck {
    let residual = revenue_residual(&outcome.rho, &outcome.payments);
    let largest = outcome.payments.iter().fold(T::zero(), |m, p| m.max(p.abs()));
    let tolerance = lit::<T>(1e-9) * largest + lit(1e-12);
    RevenueNeutralCheck {
        pass: residual.abs() <= tolerance,
        residual: residual.to_f64_lossy(),
        tolerance: tolerance.to_f64_lossy(),
    }
}

pub fn check_pareto<T: Real>(report: &CostReport<T>) -> ParetoCheck {
    let rel = 1e-9;
    let mut pass = true;
    let mut worst_ue = T::infinity();
    let mut worst_quit = T::infinity();
    for p in &report.points {
        let tol = lit::<T>(rel) * (T::one() + p.ue);
        let a = p.ue - p.quitter;
        let b = p.quitter - p.subscriber;
        pass &= a >= -tol && b >= -tol;
        worst_ue = worst_ue.min(a);
        worst_quit = worst_quit.min(b);
    }
    ParetoCheck {
        pass: pass && !report.points.is_empty(),
        worst_ue_minus_quitter: worst_ue.to_f64_lossy(),
        worst_quitter_minus_subscriber: worst_quit.to_f64_lossy(),
        grid: report.points.len(),
        relative_tolerance: rel,
    }
}

/// Second construction of the payments: cumulative sums of the adjacent
/// payment differences `P_{i+1} - P_i = (T_i - T_{i+1}) β_{i+1} / 60`, then
/// shifted so that `Σ ρ_i P_i = 0`.
pub fn payments_from_differences<T: Scalar>(sorted_times: &[T], partition: &[T], rho: &[T]) -> Vec<T> {
    let hour = T::cast(MINUTES_PER_HOUR);
    let mut level = vec![T::zero()];
    for g in 1..sorted_times.len() {
        let diff = (sorted_times[g - 1].clone() - sorted_times[g].clone()) * partition[g].clone() / hour.clone();
        let next = level[g - 1].clone() + diff;
        level.push(next);
    }
    let mass = rho.iter().fold(T::zero(), |acc, r| acc + r.clone());
    let shift = revenue_residual(rho, &level) / mass;
    level.into_iter().map(|l| l - shift.clone()).collect()
}

pub fn payment_uniqueness_gap<T: Real>(outcome: &UbcsOutcome<T>) -> T {
    let alt = payments_from_differences(&outcome.sorted_times, &outcome.partition, &outcome.rho);
    alt.iter().zip(&outcome.payments).fold(T::zero(), |m, (a, b)| m.max((*a - *b).abs()))
}

/// Runs all three guarantee checks.
pub fn verify_outcome<T: Real>(
    outcome: &UbcsOutcome<T>,
    costs: &CostReport<T>,
    sp_grid: usize,
) -> Result<VerificationReport, VerifyError> {
    Ok(VerificationReport {
        strategy_proof: check_strategy_proof(outcome, sp_grid)?,
        revenue_neutral: check_revenue_neutral(outcome),
        pareto: check_pareto(costs),
        payment_uniqueness_gap: payment_uniqueness_gap(outcome).to_f64_lossy(),
    })
}

/// Weighted cost of the sorted assignment: highest-VOT classes fill the
/// fastest paths first, subject to per-path totals.
pub fn greedy_sort_cost<T: Real>(classes: &VotClassTable<T>, path_totals: &[T], times: &[T]) -> T {
    let mut class_order: Vec<usize> = (0..classes.len()).collect();
    class_order.sort_by(|&a, &b| classes.mean[b].partial_cmp(&classes.mean[a]).expect("finite VOT"));
    let mut path_order: Vec<usize> = (0..times.len()).collect();
    path_order.sort_by(|&a, &b| times[a].partial_cmp(&times[b]).expect("finite times"));

    let mut left: Vec<T> = path_totals.to_vec();
    let mut cost = T::zero();
    let mut p = 0;
    for m in class_order {
        let mut need = classes.demand[m];
        while need > T::zero() && p < path_order.len() {
            let r = path_order[p];
            let take = need.min(left[r]);
            cost = cost + classes.mean[m] * take * times[r];
            need = need - take;
            left[r] = left[r] - take;
            if left[r] <= T::zero() {
                p += 1;
            }
        }
    }
    cost
}

/// Exhaustive minimum of `Σ β^m f^m_r T_r` over class-to-path allocations
/// in multiples of `step`, with class totals `d̃^m` and path totals fixed.
pub fn brute_force_lp_oracle<T: Real>(
    classes: &VotClassTable<T>,
    path_totals: &[T],
    times: &[T],
    step: T,
) -> Result<T, VerifyError> {
    let (m, r) = (classes.len(), path_totals.len());
    if m > 5 || r > 4 {
        return Err(VerifyError::TooLarge { classes: m, paths: r });
    }
    if !(step > T::zero()) {
        return Err(VerifyError::BadStep);
    }
    let units = |what: &'static str, v: T| -> Result<usize, VerifyError> {
        let k = (v / step).round();
        if (k * step - v).abs() > lit::<T>(1e-9) * (T::one() + v.abs()) || k < T::zero() {
            return Err(VerifyError::OffLattice { what, value: v.to_f64_lossy() });
        }
        Ok(k.to_usize().unwrap_or(0))
    };
    let class_units = classes.demand.iter().map(|&v| units("class demand", v)).collect::<Result<Vec<_>, _>>()?;
    let mut caps = path_totals.iter().map(|&v| units("path total", v)).collect::<Result<Vec<_>, _>>()?;
    if class_units.iter().sum::<usize>() != caps.iter().sum::<usize>() {
        return Err(VerifyError::Infeasible);
    }

    struct Search<'a, T> {
        classes: &'a VotClassTable<T>,
        times: &'a [T],
        step: T,
        class_units: Vec<usize>,
        best: Option<T>,
    }

    impl<T: Real> Search<'_, T> {
        fn class(&mut self, m: usize, caps: &mut [usize], acc: T) {
            if m == self.class_units.len() {
                if self.best.is_none_or(|b| acc < b) {
                    self.best = Some(acc);
                }
                return;
            }
            let need = self.class_units[m];
            self.split(m, 0, need, caps, acc);
        }

        fn split(&mut self, m: usize, r: usize, need: usize, caps: &mut [usize], acc: T) {
            if r + 1 == caps.len() {
                if need <= caps[r] {
                    caps[r] -= need;
                    let cost = self.unit_cost(m, r) * lit(need as f64);
                    self.class(m + 1, caps, acc + cost);
                    caps[r] += need;
                }
                return;
            }
            for k in 0..=need.min(caps[r]) {
                caps[r] -= k;
                let cost = self.unit_cost(m, r) * lit(k as f64);
                self.split(m, r + 1, need - k, caps, acc + cost);
                caps[r] += k;
            }
        }

        fn unit_cost(&self, m: usize, r: usize) -> T {
            self.classes.mean[m] * self.times[r] * self.step
        }
    }

    let mut search = Search { classes, times, step, class_units, best: None };
    if r == 0 {
        return Err(VerifyError::Infeasible);
    }
    search.class(0, &mut caps, T::zero());
    search.best.ok_or(VerifyError::Infeasible)
}
