//! Dense two-phase primal simplex for `min c·x  s.t.  A x = b, x >= 0`.
//!
//! Pivoting follows Bland's rule (smallest-index entering variable, smallest
//! basic index among tied leaving candidates), so the result is deterministic
//! and the method cannot cycle on degenerate programs. Redundant equality
//! rows are detected at the end of phase 1 and dropped.
//!
//! The solver is generic over [`Scalar`]; with `BigRational` every pivot is
//! exact and all tolerances collapse to zero.

use thiserror::Error;

use crate::scalar::Scalar;

const PIVOT_TOL: f64 = 1e-10;
const FEASIBILITY_TOL: f64 = 1e-7;
const MAX_PIVOTS: usize = 200_000;

#[derive(Debug, Error)]
pub enum LpError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("numerically singular basis: residual {residual:e} exceeds {limit:e}")]
    Conditioning { residual: f64, limit: f64 },
    #[error("pivot limit of {0} reached")]
    PivotLimit(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct StandardLp<T> {
    pub cost: Vec<T>,
    /// Row-major constraint matrix, one `Vec` per equality row.
    pub matrix: Vec<Vec<T>>,
    pub rhs: Vec<T>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution<T> {
    pub status: LpStatus,
    /// Primal values; meaningful only when optimal.
    pub x: Vec<T>,
    pub objective: T,
    /// Basic variable per retained row.
    pub basis: Vec<usize>,
    /// Phase-2 reduced costs of the structural variables.
    pub reduced_costs: Vec<T>,
    /// Constraint rows found linearly dependent and dropped.
    pub redundant_rows: Vec<usize>,
    pub pivots: usize,
}

impl<T: Scalar> StandardLp<T> {
    pub fn num_vars(&self) -> usize {
        self.cost.len()
    }

    pub fn num_rows(&self) -> usize {
        self.rhs.len()
    }

    /// `‖A x - b‖∞`.
    pub fn residual(&self, x: &[T]) -> T {
        self.matrix.iter().zip(&self.rhs).fold(T::zero(), |worst, (row, b)| {
            let ax = row.iter().zip(x).fold(T::zero(), |acc, (a, v)| acc + a.clone() * v.clone());
            T::max_of(worst, (ax - b.clone()).abs())
        })
    }

    pub fn objective_at(&self, x: &[T]) -> T {
        self.cost.iter().zip(x).fold(T::zero(), |acc, (c, v)| acc + c.clone() * v.clone())
    }

    fn check(&self) -> Result<(), LpError> {
        if self.matrix.len() != self.rhs.len() {
            return Err(LpError::Dimension(format!("{} rows but {} right-hand sides", self.matrix.len(), self.rhs.len())));
        }
        if let Some((i, row)) = self.matrix.iter().enumerate().find(|(_, r)| r.len() != self.cost.len()) {
            return Err(LpError::Dimension(format!("row {i} has {} entries, expected {}", row.len(), self.cost.len())));
        }
        Ok(())
    }
}

struct Tableau<T> {
    rows: usize,
    width: usize,
    data: Vec<T>,
    /// Reduced costs; the last entry holds minus the objective value.
    obj: Vec<T>,
    basis: Vec<usize>,
    pivots: usize,
}

impl<T: Scalar> Tableau<T> {
    fn at(&self, i: usize, j: usize) -> &T {
        &self.data[i * self.width + j]
    }

    fn rhs(&self, i: usize) -> &T {
        self.at(i, self.width - 1)
    }

    fn pivot(&mut self, row: usize, col: usize) {
        let w = self.width;
        let p = self.at(row, col).clone();
        for j in 0..w {
            let v = self.data[row * w + j].clone() / p.clone();
            self.data[row * w + j] = v;
        }
        let pivot_row: Vec<T> = self.data[row * w..(row + 1) * w].to_vec();
        for i in 0..self.rows {
            if i == row {
                continue;
            }
            let f = self.at(i, col).clone();
            if f.is_zero() {
                continue;
            }
            for (j, pv) in pivot_row.iter().enumerate() {
                if !pv.is_zero() {
                    let v = self.data[i * w + j].clone() - f.clone() * pv.clone();
                    self.data[i * w + j] = v;
                }
            }
        }
        let f = self.obj[col].clone();
        if !f.is_zero() {
            for (j, pv) in pivot_row.iter().enumerate() {
                if !pv.is_zero() {
                    self.obj[j] = self.obj[j].clone() - f.clone() * pv.clone();
                }
            }
        }
        self.basis[row] = col;
        self.pivots += 1;
    }

    /// Runs Bland-rule pivots over columns `< allowed`. Returns false when
    /// the objective is unbounded below.
    fn optimize(&mut self, allowed: usize, tol: &T) -> Result<bool, LpError> {
        let neg_tol = -tol.clone();
        loop {
            let Some(col) = (0..allowed).find(|&j| self.obj[j] < neg_tol) else {
                return Ok(true);
            };
            let mut leave: Option<(usize, T)> = None;
            for i in 0..self.rows {
                let a = self.at(i, col);
                if *a <= *tol {
                    continue;
                }
                let ratio = self.rhs(i).clone() / a.clone();
                leave = match leave {
                    None => Some((i, ratio)),
                    Some((best, best_ratio)) => {
                        let slack = tol.clone() * (T::one() + best_ratio.abs());
                        let tie = (ratio.clone() - best_ratio.clone()).abs() <= slack.clone();
                        if ratio < best_ratio.clone() - slack || (tie && self.basis[i] < self.basis[best]) {
                            Some((i, ratio))
                        } else {
                            Some((best, best_ratio))
                        }
                    }
                };
            }
            let Some((row, _)) = leave else {
                return Ok(false);
            };
            if self.pivots >= MAX_PIVOTS {
                return Err(LpError::PivotLimit(MAX_PIVOTS));
            }
            self.pivot(row, col);
        }
    }
}

/// Solves a standard-form LP. Infeasible and unbounded programs are reported
/// through [`LpStatus`], not as errors.
pub fn solve_lp<T: Scalar>(lp: &StandardLp<T>) -> Result<LpSolution<T>, LpError> {
    lp.check()?;
    let n = lp.num_vars();
    let m = lp.num_rows();
    let tol = T::tolerance(PIVOT_TOL);
    let b_norm = lp.rhs.iter().fold(T::zero(), |acc, b| T::max_of(acc, b.abs()));
    let feas_tol = T::tolerance(FEASIBILITY_TOL) * (T::one() + b_norm.clone());

    // Phase 1 tableau: [A | I | b] with rows flipped so b >= 0.
    let width = n + m + 1;
    let mut data = vec![T::zero(); m * width];
    for i in 0..m {
        let flip = lp.rhs[i] < T::zero();
        for j in 0..n {
            let a = lp.matrix[i][j].clone();
            data[i * width + j] = if flip { -a } else { a };
        }
        data[i * width + n + i] = T::one();
        data[i * width + width - 1] = if flip { -lp.rhs[i].clone() } else { lp.rhs[i].clone() };
    }
    let mut obj = vec![T::zero(); width];
    for i in 0..m {
        for j in (0..n).chain(std::iter::once(width - 1)) {
            obj[j] = obj[j].clone() - data[i * width + j].clone();
        }
    }
    let mut tab = Tableau { rows: m, width, data, obj, basis: (n..n + m).collect(), pivots: 0 };

    tab.optimize(n, &tol)?;
    let infeasibility = -tab.obj[width - 1].clone();
    if infeasibility > feas_tol {
        log::debug!("phase 1 ended with infeasibility {infeasibility} after {} pivots", tab.pivots);
        return Ok(LpSolution {
            status: LpStatus::Infeasible,
            x: vec![T::zero(); n],
            objective: T::zero(),
            basis: tab.basis,
            reduced_costs: Vec::new(),
            redundant_rows: Vec::new(),
            pivots: tab.pivots,
        });
    }

    // Drive zero-valued artificials out of the basis; rows where that is
    // impossible are linear combinations of the others.
    let mut redundant = Vec::new();
    for i in 0..m {
        if tab.basis[i] < n {
            continue;
        }
        match (0..n).find(|&j| tab.at(i, j).abs() > tol) {
            Some(j) => tab.pivot(i, j),
            None => redundant.push(i),
        }
    }
    if !redundant.is_empty() {
        let keep: Vec<usize> = (0..m).filter(|i| !redundant.contains(i)).collect();
        let mut data = Vec::with_capacity(keep.len() * width);
        for &i in &keep {
            data.extend_from_slice(&tab.data[i * width..(i + 1) * width]);
        }
        tab.basis = keep.iter().map(|&i| tab.basis[i]).collect();
        tab.data = data;
        tab.rows = keep.len();
    }

    // Phase 2 reduced costs from the original objective.
    let mut obj = vec![T::zero(); width];
    obj[..n].clone_from_slice(&lp.cost);
    for i in 0..tab.rows {
        let cb = lp.cost[tab.basis[i]].clone();
        if cb.is_zero() {
            continue;
        }
        for j in (0..n).chain(std::iter::once(width - 1)) {
            obj[j] = obj[j].clone() - cb.clone() * tab.at(i, j).clone();
        }
    }
    tab.obj = obj;
    let bounded = tab.optimize(n, &tol)?;

    let mut x = vec![T::zero(); n];
    for i in 0..tab.rows {
        x[tab.basis[i]] = tab.rhs(i).clone();
    }
    let status = if bounded { LpStatus::Optimal } else { LpStatus::Unbounded };
    if status == LpStatus::Optimal {
        let residual = lp.residual(&x);
        if residual > feas_tol {
            return Err(LpError::Conditioning {
                residual: residual.to_f64_lossy(),
                limit: feas_tol.to_f64_lossy(),
            });
        }
    }
    log::debug!("simplex finished: {status:?} after {} pivots, {} redundant rows", tab.pivots, redundant.len());
    Ok(LpSolution {
        status,
        objective: lp.objective_at(&x),
        x,
        basis: tab.basis,
        reduced_costs: tab.obj[..n].to_vec(),
        redundant_rows: redundant,
        pivots: tab.pivots,
    })
}
