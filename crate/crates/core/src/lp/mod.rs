//! Embedded linear-programming solver.
//!
//! Dense bounded-variable simplex, sized for the reduced problems this crate
//! produces (hundreds of variables). One instance per worker; nothing is
//! shared. Piecewise-linear objectives are the caller's job: they enter as
//! epigraph variables bounded below by each linear segment.

mod simplex;

use crate::tol::{LP_MAX_ITER, LP_PRIMAL_TOL};
use std::time::Duration;

/// Row relation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rel {
    Le,
    Ge,
    Eq,
}

#[derive(Debug, Clone)]
pub(crate) struct RowData {
    pub name: String,
    pub coeffs: Vec<(usize, f64)>,
    pub rel: Rel,
    pub rhs: f64,
}

/// A linear program `min c'x` subject to rows `a'x (<=|>=|=) b` and variable
/// bounds `l <= x <= u` (defaults `[0, +inf)`).
#[derive(Debug, Clone, Default)]
pub struct LinearProgram {
    pub(crate) obj: Vec<f64>,
    pub(crate) lower: Vec<f64>,
    pub(crate) upper: Vec<f64>,
    pub(crate) col_names: Vec<String>,
    pub(crate) rows: Vec<RowData>,
}

impl LinearProgram {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a variable and returns its index.
    pub fn add_col(&mut self, name: impl Into<String>, obj: f64, lower: f64, upper: f64) -> usize {
        debug_assert!(lower <= upper, "inconsistent bounds");
        debug_assert!(obj.is_finite());
        self.obj.push(obj);
        self.lower.push(lower);
        self.upper.push(upper);
        self.col_names.push(name.into());
        self.obj.len() - 1
    }

    /// Adds a constraint row and returns its index.
    pub fn add_row(
        &mut self,
        name: impl Into<String>,
        coeffs: Vec<(usize, f64)>,
        rel: Rel,
        rhs: f64,
    ) -> usize {
        debug_assert!(coeffs.iter().all(|&(j, c)| j < self.obj.len() && c.is_finite()));
        debug_assert!(rhs.is_finite());
        self.rows.push(RowData {
            name: name.into(),
            coeffs,
            rel,
            rhs,
        });
        self.rows.len() - 1
    }

    pub fn set_bounds(&mut self, j: usize, lower: f64, upper: f64) {
        debug_assert!(lower <= upper);
        self.lower[j] = lower;
        self.upper[j] = upper;
    }

    pub fn n_cols(&self) -> usize {
        self.obj.len()
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    /// Column name; unnamed columns get a positional fallback.
    pub fn col_name(&self, j: usize) -> std::borrow::Cow<'_, str> {
        if self.col_names[j].is_empty() {
            std::borrow::Cow::Owned(format!("c{j}"))
        } else {
            std::borrow::Cow::Borrowed(&self.col_names[j])
        }
    }

    /// Row name; unnamed rows get a positional fallback.
    pub fn row_name(&self, i: usize) -> std::borrow::Cow<'_, str> {
        if self.rows[i].name.is_empty() {
            std::borrow::Cow::Owned(format!("r{i}"))
        } else {
            std::borrow::Cow::Borrowed(&self.rows[i].name)
        }
    }

    pub fn bounds(&self, j: usize) -> (f64, f64) {
        (self.lower[j], self.upper[j])
    }

    pub fn objective_coeff(&self, j: usize) -> f64 {
        self.obj[j]
    }

    pub(crate) fn row(&self, i: usize) -> &RowData {
        &self.rows[i]
    }

    pub fn row_coeffs(&self, i: usize) -> &[(usize, f64)] {
        &self.rows[i].coeffs
    }

    pub fn row_rel(&self, i: usize) -> Rel {
        self.rows[i].rel
    }

    pub fn row_rhs(&self, i: usize) -> f64 {
        self.rows[i].rhs
    }

    /// Row activity `a'x` for a candidate point.
    pub fn row_activity(&self, i: usize, x: &[f64]) -> f64 {
        self.rows[i].coeffs.iter().map(|&(j, c)| c * x[j]).sum()
    }

    /// Largest primal feasibility violation of a candidate point.
    pub fn primal_residual(&self, x: &[f64]) -> f64 {
        let mut res: f64 = 0.0;
        for j in 0..self.n_cols() {
            res = res.max(self.lower[j] - x[j]).max(x[j] - self.upper[j]);
        }
        for i in 0..self.n_rows() {
            let act = self.row_activity(i, x);
            let row = &self.rows[i];
            match row.rel {
                Rel::Le => res = res.max(act - row.rhs),
                Rel::Ge => res = res.max(row.rhs - act),
                Rel::Eq => res = res.max((act - row.rhs).abs()),
            }
        }
        res
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    /// Iteration cap hit; the best basis found is reported. Callers treat
    /// this like infeasibility of the current subproblem.
    Stalled,
}

/// Basis snapshot for warm restarts. Carries the basis inverse so a restart
/// on an unchanged matrix can skip refactorization; reuse is verified
/// against the new program and falls back to a fresh factorization when the
/// coefficients changed.
#[derive(Debug, Clone)]
pub struct Basis {
    pub(crate) n_structural: usize,
    pub(crate) n_rows: usize,
    pub(crate) basic: Vec<usize>,
    pub(crate) state: Vec<simplex::VarState>,
    pub(crate) binv: Vec<f64>,
}

/// Solver output.
#[derive(Debug, Clone)]
pub struct LpResult {
    pub status: LpStatus,
    pub objective: f64,
    /// Structural variable values (meaningful for `Optimal` and `Stalled`).
    pub primal: Vec<f64>,
    /// Row duals at the final basis (empty unless `Optimal`).
    pub duals: Vec<f64>,
    /// Infeasibility certificate: row multipliers `y` such that
    /// `y'b > sum_j max_{l_j<=x<=u_j} (y'A_j) x_j` (empty unless `Infeasible`).
    pub farkas: Vec<f64>,
    pub iterations: u64,
    pub wall_time: Duration,
    /// Final basis for warm restarts (absent when the solve broke down before
    /// producing one).
    pub basis: Option<Basis>,
}

/// Solves from scratch with the two-phase bounded-variable primal simplex.
/// Deterministic: identical inputs produce identical results.
pub fn solve_lp(lp: &LinearProgram) -> LpResult {
    simplex::solve(lp, None)
}

/// Re-solves a program that differs from a previously solved one by added
/// rows and/or changed bounds, starting from that solve's basis. An
/// incompatible basis falls back to a cold solve, so the result always equals
/// `solve_lp` up to degenerate ties.
pub fn warm_solve(lp: &LinearProgram, basis: &Basis) -> LpResult {
    simplex::solve(lp, Some(basis))
}

/// Verifies KKT-style optimality conditions of a result against its program;
/// returns the largest violation found. Used by tests and debug assertions.
pub fn optimality_residual(lp: &LinearProgram, res: &LpResult) -> f64 {
    if res.status != LpStatus::Optimal {
        return 0.0;
    }
    let mut worst = lp.primal_residual(&res.primal);
    // weak duality: objective equals the dual objective at the final basis
    let mut dual_obj = 0.0;
    for i in 0..lp.n_rows() {
        dual_obj += res.duals[i] * lp.row(i).rhs;
    }
    for j in 0..lp.n_cols() {
        let mut ya = 0.0;
        for i in 0..lp.n_rows() {
            if res.duals[i] != 0.0 {
                if let Some(&(_, c)) = lp.row(i).coeffs.iter().find(|&&(col, _)| col == j) {
                    ya += res.duals[i] * c;
                }
            }
        }
        let d = lp.obj[j] - ya;
        // reduced-cost contribution of the active bound
        let x = res.primal[j];
        if d.abs() > 1e-12 {
            dual_obj += d * x;
        }
    }
    worst = worst.max((dual_obj - res.objective).abs() / res.objective.abs().max(1.0));
    worst
}

pub(crate) const PRIMAL_OK: f64 = LP_PRIMAL_TOL;
pub(crate) const ITER_CAP: u64 = LP_MAX_ITER;
