//! Dense bounded-variable simplex: two-phase primal with Bland fallback for
//! cold solves, dual simplex for warm restarts whose basis is primal
//! infeasible but dual feasible (the row-addition case).
//!
//! The basis inverse is kept as a dense matrix, updated per pivot and rebuilt
//! periodically from scratch. Entering/leaving ties always break towards the
//! smallest index, so solves are reproducible.

use super::{Basis, LinearProgram, LpResult, LpStatus, Rel, ITER_CAP, PRIMAL_OK};
use crate::tol::{LP_DEGEN_SWITCH, LP_DUAL_TOL, LP_PHASE1_TOL, LP_PIVOT_TOL};
use std::time::Instant;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarState {
    Basic,
    AtLower,
    AtUpper,
    /// Nonbasic free variable parked at zero.
    FreeZero,
}

const REFRESH_EVERY: u64 = 128;

struct Tableau {
    m: usize,
    n_structural: usize,
    /// structural + slack (+ artificial) columns, sparse
    cols: Vec<Vec<(usize, f64)>>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    cost: Vec<f64>,
    rhs: Vec<f64>,
    binv: Vec<f64>,
    basic: Vec<usize>,
    state: Vec<VarState>,
    xb: Vec<f64>,
    iterations: u64,
    degenerate_run: u64,
    bland: bool,
    first_artificial: usize,
    pivots_since_factor: u64,
}

enum LoopEnd {
    Optimal,
    Unbounded,
    IterCap,
}

impl Tableau {
    fn from_lp(lp: &LinearProgram) -> Tableau {
        let m = lp.n_rows();
        let n = lp.n_cols();
        let mut cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n + m];
        let mut lower = lp.lower.clone();
        let mut upper = lp.upper.clone();
        let mut rhs = Vec::with_capacity(m);
        for (i, row) in lp.rows.iter().enumerate() {
            for &(j, c) in &row.coeffs {
                if c != 0.0 {
                    cols[j].push((i, c));
                }
            }
            cols[n + i].push((i, 1.0));
            let (sl, su) = match row.rel {
                Rel::Le => (0.0, f64::INFINITY),
                Rel::Ge => (f64::NEG_INFINITY, 0.0),
                Rel::Eq => (0.0, 0.0),
            };
            lower.push(sl);
            upper.push(su);
            rhs.push(row.rhs);
        }
        let mut cost = lp.obj.clone();
        cost.resize(n + m, 0.0);
        let state = (0..n + m)
            .map(|j| nonbasic_rest_state(lower[j], upper[j]))
            .collect();
        Tableau {
            m,
            n_structural: n,
            cols,
            lower,
            upper,
            cost,
            rhs,
            binv: Vec::new(),
            basic: Vec::new(),
            state,
            xb: Vec::new(),
            iterations: 0,
            degenerate_run: 0,
            bland: false,
            first_artificial: n + m,
            pivots_since_factor: 0,
        }
    }

    fn ncols(&self) -> usize {
        self.cols.len()
    }

    fn nonbasic_value(&self, j: usize) -> f64 {
        match self.state[j] {
            VarState::AtLower => self.lower[j],
            VarState::AtUpper => self.upper[j],
            VarState::FreeZero => 0.0,
            VarState::Basic => unreachable!("basic variable has no rest value"),
        }
    }

    /// Rebuilds the dense basis inverse by Gauss-Jordan elimination.
    /// Fails on a (numerically) singular basis.
    fn refactorize(&mut self) -> Result<(), ()> {
        let m = self.m;
        if m == 0 {
            self.binv.clear();
            return Ok(());
        }
        // assemble [B | I] and eliminate
        let mut a = vec![0.0; m * m];
        for (k, &j) in self.basic.iter().enumerate() {
            for &(i, c) in &self.cols[j] {
                a[i * m + k] = c;
            }
        }
        let mut inv = vec![0.0; m * m];
        for i in 0..m {
            inv[i * m + i] = 1.0;
        }
        for col in 0..m {
            let mut piv = col;
            let mut best = a[col * m + col].abs();
            for r in col + 1..m {
                let v = a[r * m + col].abs();
                if v > best {
                    best = v;
                    piv = r;
                }
            }
            if best < 1e-11 {
                return Err(());
            }
            if piv != col {
                for c in 0..m {
                    a.swap(piv * m + c, col * m + c);
                    inv.swap(piv * m + c, col * m + c);
                }
            }
            let p = a[col * m + col];
            for c in 0..m {
                a[col * m + c] /= p;
                inv[col * m + c] /= p;
            }
            for r in 0..m {
                if r == col {
                    continue;
                }
                let f = a[r * m + col];
                if f != 0.0 {
                    for c in 0..m {
                        a[r * m + c] -= f * a[col * m + c];
                        inv[r * m + c] -= f * inv[col * m + c];
                    }
                }
            }
        }
        self.binv = inv;
        self.pivots_since_factor = 0;
        Ok(())
    }

    /// Recomputes the basic variable values from the nonbasic rest points.
    fn recompute_xb(&mut self) {
        let m = self.m;
        let mut adj = self.rhs.clone();
        for j in 0..self.ncols() {
            if self.state[j] == VarState::Basic {
                continue;
            }
            let v = self.nonbasic_value(j);
            if v != 0.0 {
                for &(i, c) in &self.cols[j] {
                    adj[i] -= c * v;
                }
            }
        }
        self.xb = (0..m)
            .map(|i| {
                let mut s = 0.0;
                for k in 0..m {
                    s += self.binv[i * m + k] * adj[k];
                }
                s
            })
            .collect();
    }

    /// `y = c_B' B^-1` for an arbitrary cost vector.
    fn btran(&self, cost: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.m];
        self.btran_into(cost, &mut y);
        y
    }

    fn btran_into(&self, cost: &[f64], y: &mut [f64]) {
        let m = self.m;
        y.fill(0.0);
        for (k, &j) in self.basic.iter().enumerate() {
            let cb = cost[j];
            if cb != 0.0 {
                let row = &self.binv[k * m..(k + 1) * m];
                for (yi, bi) in y.iter_mut().zip(row) {
                    *yi += cb * bi;
                }
            }
        }
    }

    /// `w = B^-1 A_j`.
    fn ftran(&self, j: usize) -> Vec<f64> {
        let mut w = vec![0.0; self.m];
        self.ftran_into(j, &mut w);
        w
    }

    fn ftran_into(&self, j: usize, w: &mut [f64]) {
        let m = self.m;
        w.fill(0.0);
        for &(r, c) in &self.cols[j] {
            if c != 0.0 {
                for (i, wi) in w.iter_mut().enumerate() {
                    *wi += self.binv[i * m + r] * c;
                }
            }
        }
    }

    fn reduced_cost(&self, j: usize, y: &[f64]) -> f64 {
        let mut d = self.cost[j];
        for &(i, c) in &self.cols[j] {
            d -= y[i] * c;
        }
        d
    }

    fn pivot_update(&mut self, r: usize, w: &[f64]) {
        self.pivots_since_factor += 1;
        let m = self.m;
        let pivot = w[r];
        let inv_p = 1.0 / pivot;
        for c in 0..m {
            self.binv[r * m + c] *= inv_p;
        }
        for i in 0..m {
            if i == r {
                continue;
            }
            let f = w[i];
            if f != 0.0 {
                for c in 0..m {
                    self.binv[i * m + c] -= f * self.binv[r * m + c];
                }
            }
        }
    }

    /// Primal simplex iterations with the current `cost` vector.
    fn primal_loop(&mut self, phase1: bool) -> LoopEnd {
        let mut y = vec![0.0; self.m];
        let mut w = vec![0.0; self.m];
        loop {
            if self.iterations >= ITER_CAP {
                return LoopEnd::IterCap;
            }
            if self.iterations % REFRESH_EVERY == 0 && self.iterations > 0 {
                if self.refactorize().is_err() {
                    return LoopEnd::IterCap;
                }
                self.recompute_xb();
            }
            if phase1 {
                // artificials already driven to zero: done early
                let resid: f64 = (0..self.m)
                    .map(|i| {
                        let j = self.basic[i];
                        if j >= self.first_artificial {
                            self.xb[i].abs()
                        } else {
                            0.0
                        }
                    })
                    .sum();
                let nb_art: f64 = (self.first_artificial..self.ncols())
                    .filter(|&j| self.state[j] != VarState::Basic)
                    .map(|j| self.nonbasic_value(j).abs())
                    .sum();
                if resid + nb_art <= LP_PHASE1_TOL {
                    return LoopEnd::Optimal;
                }
            }

            self.btran_into(&self.cost, &mut y);
            // entering variable
            let mut enter: Option<(usize, f64, f64)> = None; // (j, score, direction)
            for j in 0..self.ncols() {
                if self.state[j] == VarState::Basic || self.lower[j] == self.upper[j] {
                    continue;
                }
                let d = self.reduced_cost(j, &y);
                let (eligible, dir) = match self.state[j] {
                    VarState::AtLower => (d < -LP_DUAL_TOL, 1.0),
                    VarState::AtUpper => (d > LP_DUAL_TOL, -1.0),
                    VarState::FreeZero => (d.abs() > LP_DUAL_TOL, if d > 0.0 { -1.0 } else { 1.0 }),
                    VarState::Basic => unreachable!(),
                };
                if !eligible {
                    continue;
                }
                if self.bland {
                    enter = Some((j, d.abs(), dir));
                    break;
                }
                if enter.is_none() || d.abs() > enter.unwrap().1 {
                    enter = Some((j, d.abs(), dir));
                }
            }
            let Some((j, _, dir)) = enter else {
                return LoopEnd::Optimal;
            };

            self.ftran_into(j, &mut w);
            // ratio test with bound flip
            let mut t_best = f64::INFINITY;
            let mut leave: Option<usize> = None; // row index
            for i in 0..self.m {
                let a = dir * w[i];
                let b = self.basic[i];
                if a > LP_PIVOT_TOL {
                    if self.lower[b].is_finite() {
                        let t = (self.xb[i] - self.lower[b]) / a;
                        if t < t_best - 1e-12
                            || (t < t_best + 1e-12 && better_leave(self, leave, i, &w))
                        {
                            t_best = t.max(0.0);
                            leave = Some(i);
                        }
                    }
                } else if a < -LP_PIVOT_TOL && self.upper[b].is_finite() {
                    let t = (self.xb[i] - self.upper[b]) / a;
                    if t < t_best - 1e-12 || (t < t_best + 1e-12 && better_leave(self, leave, i, &w))
                    {
                        t_best = t.max(0.0);
                        leave = Some(i);
                    }
                }
            }
            let t_flip = if self.lower[j].is_finite() && self.upper[j].is_finite() {
                self.upper[j] - self.lower[j]
            } else {
                f64::INFINITY
            };
            if t_flip < t_best {
                // entering variable runs to its opposite bound; basis unchanged
                for i in 0..self.m {
                    self.xb[i] -= dir * t_flip * w[i];
                }
                self.state[j] = match self.state[j] {
                    VarState::AtLower => VarState::AtUpper,
                    VarState::AtUpper => VarState::AtLower,
                    s => s,
                };
                self.iterations += 1;
                continue;
            }
            let Some(r) = leave else {
                if t_flip.is_finite() {
                    // tie: flip
                    for i in 0..self.m {
                        self.xb[i] -= dir * t_flip * w[i];
                    }
                    self.state[j] = match self.state[j] {
                        VarState::AtLower => VarState::AtUpper,
                        VarState::AtUpper => VarState::AtLower,
                        s => s,
                    };
                    self.iterations += 1;
                    continue;
                }
                return LoopEnd::Unbounded;
            };

            let t = t_best;
            if t <= 1e-12 {
                self.degenerate_run += 1;
                if self.degenerate_run > LP_DEGEN_SWITCH {
                    self.bland = true;
                }
            } else {
                self.degenerate_run = 0;
            }
            let entering_value = match self.state[j] {
                VarState::AtLower => self.lower[j] + dir * t,
                VarState::AtUpper => self.upper[j] + dir * t,
                VarState::FreeZero => dir * t,
                VarState::Basic => unreachable!(),
            };
            let leaving = self.basic[r];
            let a = dir * w[r];
            self.state[leaving] = if a > 0.0 {
                VarState::AtLower
            } else {
                VarState::AtUpper
            };
            for i in 0..self.m {
                if i != r {
                    self.xb[i] -= dir * t * w[i];
                }
            }
            self.pivot_update(r, &w);
            self.basic[r] = j;
            self.state[j] = VarState::Basic;
            self.xb[r] = entering_value;
            self.iterations += 1;
        }
    }

    /// Dual simplex iterations: repairs primal feasibility while keeping the
    /// reduced costs sign-feasible. Requires a dual-feasible start.
    fn dual_loop(&mut self) -> Result<LoopEnd, Vec<f64>> {
        loop {
            if self.iterations >= ITER_CAP {
                return Ok(LoopEnd::IterCap);
            }
            if self.iterations % REFRESH_EVERY == 0 && self.iterations > 0 {
                if self.refactorize().is_err() {
                    return Ok(LoopEnd::IterCap);
                }
                self.recompute_xb();
            }
            // leaving: most violated basic variable
            let mut leave: Option<(usize, f64, bool)> = None; // (row, violation, at_lower_side)
            for i in 0..self.m {
                let b = self.basic[i];
                let below = self.lower[b] - self.xb[i];
                let above = self.xb[i] - self.upper[b];
                if below > PRIMAL_OK && leave.is_none_or(|(_, v, _)| below > v) {
                    leave = Some((i, below, true));
                }
                if above > PRIMAL_OK && leave.is_none_or(|(_, v, _)| above > v) {
                    leave = Some((i, above, false));
                }
            }
            let Some((r, _, at_lower_side)) = leave else {
                return Ok(LoopEnd::Optimal);
            };

            let m = self.m;
            let y = self.btran(&self.cost);
            // row r of B^-1 applied to each nonbasic column
            let rho: Vec<f64> = (0..m).map(|k| self.binv[r * m + k]).collect();
            let mut enter: Option<(usize, f64, f64)> = None; // (j, ratio, alpha)
            for j in 0..self.ncols() {
                if self.state[j] == VarState::Basic || self.lower[j] == self.upper[j] {
                    continue;
                }
                let mut alpha = 0.0;
                for &(i, c) in &self.cols[j] {
                    alpha += rho[i] * c;
                }
                if alpha.abs() <= LP_PIVOT_TOL {
                    continue;
                }
                // x_B(r) must increase when below its lower bound, decrease
                // when above its upper bound; d/dx_j x_B(r) = -alpha
                let ok = match (self.state[j], at_lower_side) {
                    (VarState::AtLower, true) => alpha < 0.0,
                    (VarState::AtLower, false) => alpha > 0.0,
                    (VarState::AtUpper, true) => alpha > 0.0,
                    (VarState::AtUpper, false) => alpha < 0.0,
                    (VarState::FreeZero, _) => true,
                    (VarState::Basic, _) => unreachable!(),
                };
                if !ok {
                    continue;
                }
                let d = self.reduced_cost(j, &y);
                let ratio = (d / alpha).abs();
                if enter.is_none()
                    || ratio < enter.unwrap().1 - 1e-12
                    || (ratio < enter.unwrap().1 + 1e-12
                        && alpha.abs() > enter.unwrap().2.abs() + 1e-12)
                {
                    enter = Some((j, ratio, alpha));
                }
            }
            let Some((j, _, alpha)) = enter else {
                // primal infeasible; ray from the violated row
                let ray: Vec<f64> = if at_lower_side {
                    rho.iter().map(|v| -v).collect()
                } else {
                    rho
                };
                return Err(ray);
            };

            let target = if at_lower_side {
                self.lower[self.basic[r]]
            } else {
                self.upper[self.basic[r]]
            };
            let delta = (self.xb[r] - target) / alpha;
            let w = self.ftran(j);
            let leaving = self.basic[r];
            self.state[leaving] = if at_lower_side {
                VarState::AtLower
            } else {
                VarState::AtUpper
            };
            let entering_value = match self.state[j] {
                VarState::AtLower => self.lower[j] + delta,
                VarState::AtUpper => self.upper[j] + delta,
                VarState::FreeZero => delta,
                VarState::Basic => unreachable!(),
            };
            for i in 0..self.m {
                if i != r {
                    self.xb[i] -= delta * w[i];
                }
            }
            self.pivot_update(r, &w);
            self.basic[r] = j;
            self.state[j] = VarState::Basic;
            self.xb[r] = entering_value;
            self.iterations += 1;
        }
    }

    fn is_dual_feasible(&self) -> bool {
        let y = self.btran(&self.cost);
        for j in 0..self.ncols() {
            if self.state[j] == VarState::Basic || self.lower[j] == self.upper[j] {
                continue;
            }
            let d = self.reduced_cost(j, &y);
            let ok = match self.state[j] {
                VarState::AtLower => d >= -1e-7,
                VarState::AtUpper => d <= 1e-7,
                VarState::FreeZero => d.abs() <= 1e-7,
                VarState::Basic => unreachable!(),
            };
            if !ok {
                return false;
            }
        }
        true
    }

    fn primal_infeasibility(&self) -> f64 {
        (0..self.m)
            .map(|i| {
                let b = self.basic[i];
                (self.lower[b] - self.xb[i]).max(self.xb[i] - self.upper[b]).max(0.0)
            })
            .fold(0.0, f64::max)
    }

    /// Installs artificial columns for rows whose slack rest value violates
    /// the slack bounds, yielding a feasible phase-1 starting basis.
    fn install_phase1(&mut self) {
        let n = self.n_structural;
        self.basic = (0..self.m).map(|i| n + i).collect();
        for i in 0..self.m {
            self.state[n + i] = VarState::Basic;
        }
        self.refactorize().expect("slack basis is identity");
        self.recompute_xb();
        self.first_artificial = self.ncols();
        for i in 0..self.m {
            let s = n + i;
            let v = self.xb[i];
            let clamped = v.clamp(self.lower[s], self.upper[s]);
            if (v - clamped).abs() <= LP_PHASE1_TOL {
                continue;
            }
            let deficit = v - clamped;
            // park the slack at the violated bound and cover the residual
            // with a fresh artificial of phase-1 cost 1
            self.state[s] = if clamped == self.lower[s] {
                VarState::AtLower
            } else {
                VarState::AtUpper
            };
            let sign = if deficit > 0.0 { 1.0 } else { -1.0 };
            let art = self.ncols();
            self.cols.push(vec![(i, sign)]);
            self.lower.push(0.0);
            self.upper.push(f64::INFINITY);
            self.cost.push(0.0);
            self.basic[i] = art;
            self.state.push(VarState::Basic);
            self.xb[i] = deficit.abs();
        }
        // identity after the swap: artificial columns are +-1 at their row
        self.refactorize().expect("patched basis is diagonal");
        self.recompute_xb();
    }

    fn phase1_cost(&self) -> Vec<f64> {
        let mut c = vec![0.0; self.ncols()];
        for j in self.first_artificial..self.ncols() {
            c[j] = 1.0;
        }
        c
    }

    fn pin_artificials(&mut self) {
        for j in self.first_artificial..self.ncols() {
            self.lower[j] = 0.0;
            self.upper[j] = 0.0;
            if self.state[j] != VarState::Basic {
                self.state[j] = VarState::AtLower;
            }
        }
    }

    /// Degenerate pivots that swap leftover basic artificials (at value 0)
    /// for structural or slack columns, so the final basis can seed warm
    /// restarts. An artificial on a redundant row stays.
    fn drive_out_artificials(&mut self) {
        let m = self.m;
        for r in 0..m {
            if self.basic[r] < self.first_artificial {
                continue;
            }
            let rho: Vec<f64> = (0..m).map(|k| self.binv[r * m + k]).collect();
            let mut entering = None;
            for j in 0..self.first_artificial {
                if self.state[j] == VarState::Basic || self.lower[j] == self.upper[j] {
                    continue;
                }
                let mut alpha = 0.0;
                for &(i, c) in &self.cols[j] {
                    alpha += rho[i] * c;
                }
                if alpha.abs() > 1e-7 {
                    entering = Some(j);
                    break;
                }
            }
            let Some(j) = entering else { continue };
            let w = self.ftran(j);
            let leaving = self.basic[r];
            self.state[leaving] = VarState::AtLower;
            let value = self.nonbasic_value(j);
            self.pivot_update(r, &w);
            self.basic[r] = j;
            self.state[j] = VarState::Basic;
            self.xb[r] = value;
        }
    }

    fn primal_values(&self) -> Vec<f64> {
        let mut x = vec![0.0; self.n_structural];
        for (j, xj) in x.iter_mut().enumerate() {
            *xj = match self.state[j] {
                VarState::Basic => {
                    let i = self.basic.iter().position(|&b| b == j).unwrap();
                    self.xb[i]
                }
                _ => self.nonbasic_value(j),
            };
        }
        x
    }

    /// Checks that the installed inverse actually inverts the current basis
    /// matrix (columns may have changed value since the snapshot).
    fn binv_is_valid(&self) -> bool {
        let m = self.m;
        if self.binv.len() != m * m {
            return false;
        }
        let mut w = vec![0.0; m];
        for (k, &j) in self.basic.iter().enumerate() {
            self.ftran_into(j, &mut w);
            for (i, &wi) in w.iter().enumerate() {
                let expect = if i == k { 1.0 } else { 0.0 };
                if (wi - expect).abs() > 1e-8 {
                    return false;
                }
            }
        }
        true
    }

    fn snapshot_basis(&self) -> Option<Basis> {
        // a basis containing artificials cannot seed a warm start
        if self.basic.iter().any(|&j| j >= self.first_artificial) {
            return None;
        }
        Some(Basis {
            n_structural: self.n_structural,
            n_rows: self.m,
            basic: self.basic.clone(),
            state: self.state[..self.n_structural + self.m].to_vec(),
            binv: self.binv.clone(),
        })
    }
}

fn nonbasic_rest_state(lower: f64, upper: f64) -> VarState {
    if lower.is_finite() {
        VarState::AtLower
    } else if upper.is_finite() {
        VarState::AtUpper
    } else {
        VarState::FreeZero
    }
}

fn better_leave(t: &Tableau, current: Option<usize>, candidate: usize, w: &[f64]) -> bool {
    let Some(cur) = current else { return true };
    if t.bland {
        return t.basic[candidate] < t.basic[cur];
    }
    let wc = w[candidate].abs();
    let wo = w[cur].abs();
    if (wc - wo).abs() > 1e-12 {
        wc > wo
    } else {
        t.basic[candidate] < t.basic[cur]
    }
}

pub(super) fn solve(lp: &LinearProgram, warm: Option<&Basis>) -> LpResult {
    let start = Instant::now();

    if let Some(basis) = warm {
        if let Some(result) = try_warm(lp, basis, start) {
            return result;
        }
    }
    cold(lp, start)
}

fn try_warm(lp: &LinearProgram, basis: &Basis, start: Instant) -> Option<LpResult> {
    if basis.n_structural != lp.n_cols() || basis.n_rows > lp.n_rows() {
        return None;
    }
    let mut t = Tableau::from_lp(lp);
    t.basic = basis.basic.clone();
    let mut state = basis.state.clone();
    // slacks of freshly added rows become basic
    for i in basis.n_rows..lp.n_rows() {
        t.basic.push(lp.n_cols() + i);
    }
    // old state covers structurals + old slacks; splice new slack states in
    let mut full_state = Vec::with_capacity(t.ncols());
    full_state.extend_from_slice(&state[..basis.n_structural]);
    state.drain(..basis.n_structural);
    full_state.extend(state);
    full_state.resize(t.ncols(), VarState::Basic);
    t.state = full_state;
    for &j in &t.basic {
        if j >= t.ncols() {
            return None;
        }
        t.state[j] = VarState::Basic;
    }
    // bounds may have changed: re-park nonbasic variables on a vanished bound
    for j in 0..t.ncols() {
        match t.state[j] {
            VarState::AtLower if !t.lower[j].is_finite() => {
                t.state[j] = nonbasic_rest_state(t.lower[j], t.upper[j])
            }
            VarState::AtUpper if !t.upper[j].is_finite() => {
                t.state[j] = nonbasic_rest_state(t.lower[j], t.upper[j])
            }
            _ => {}
        }
    }
    // reuse the carried inverse: identical under unchanged coefficients;
    // appended rows with basic slacks extend it analytically as
    // [[B^-1, 0], [-C B^-1, I]]
    let m_old = basis.n_rows;
    let m_new = t.m;
    let mut reused = false;
    if basis.binv.len() == m_old * m_old {
        let mut inv = vec![0.0; m_new * m_new];
        for r in 0..m_old {
            inv[r * m_new..r * m_new + m_old]
                .copy_from_slice(&basis.binv[r * m_old..(r + 1) * m_old]);
        }
        for r in m_old..m_new {
            // row r of -C B^-1 where C is the new row over old basic columns
            for (k, &j) in t.basic.iter().take(m_old).enumerate() {
                let mut c_rj = 0.0;
                for &(row, v) in &t.cols[j] {
                    if row == r {
                        c_rj += v;
                    }
                }
                if c_rj != 0.0 {
                    for i in 0..m_old {
                        inv[r * m_new + i] -= c_rj * basis.binv[k * m_old + i];
                    }
                }
            }
            inv[r * m_new + r] = 1.0;
        }
        t.binv = inv;
        reused = t.binv_is_valid();
    }
    if !reused && t.refactorize().is_err() {
        return None;
    }
    t.recompute_xb();

    if t.primal_infeasibility() <= PRIMAL_OK {
        let end = t.primal_loop(false);
        return Some(finish(lp, t, end, start));
    }
    if t.is_dual_feasible() {
        match t.dual_loop() {
            Ok(LoopEnd::Optimal) => {
                let end = t.primal_loop(false);
                return Some(finish(lp, t, end, start));
            }
            Ok(LoopEnd::Unbounded) | Ok(LoopEnd::IterCap) => return None,
            Err(ray) => {
                return Some(LpResult {
                    status: LpStatus::Infeasible,
                    objective: f64::INFINITY,
                    primal: t.primal_values(),
                    duals: Vec::new(),
                    farkas: ray,
                    iterations: t.iterations,
                    wall_time: start.elapsed(),
                    basis: None,
                });
            }
        }
    }
    None
}

fn cold(lp: &LinearProgram, start: Instant) -> LpResult {
    let mut t = Tableau::from_lp(lp);
    t.install_phase1();

    if t.first_artificial < t.ncols() {
        let phase1 = t.phase1_cost();
        let real_cost = std::mem::replace(&mut t.cost, phase1);
        let end = t.primal_loop(true);
        match end {
            LoopEnd::IterCap => {
                t.cost = real_cost;
                return finish(lp, t, LoopEnd::IterCap, start);
            }
            LoopEnd::Unbounded => unreachable!("phase-1 objective is bounded below"),
            LoopEnd::Optimal => {}
        }
        let resid: f64 = (0..t.m)
            .map(|i| {
                let b = t.basic[i];
                if b >= t.first_artificial {
                    t.xb[i].abs()
                } else {
                    0.0
                }
            })
            .sum();
        if resid > LP_PHASE1_TOL {
            let farkas = t.btran(&t.cost);
            t.cost = real_cost;
            return LpResult {
                status: LpStatus::Infeasible,
                objective: f64::INFINITY,
                primal: t.primal_values(),
                duals: Vec::new(),
                farkas,
                iterations: t.iterations,
                wall_time: start.elapsed(),
                basis: None,
            };
        }
        t.pin_artificials();
        t.drive_out_artificials();
        t.cost = real_cost;
    }

    let end = t.primal_loop(false);
    finish(lp, t, end, start)
}

fn finish(lp: &LinearProgram, mut t: Tableau, end: LoopEnd, start: Instant) -> LpResult {
    // re-derive the basic values from a clean factorization when enough
    // pivots accumulated to matter; a near-fresh inverse is accurate enough
    if t.pivots_since_factor > 32 {
        if t.refactorize().is_ok() {
            t.recompute_xb();
        }
    } else {
        t.recompute_xb();
    }
    let status = match end {
        LoopEnd::Optimal => {
            if t.primal_infeasibility() > PRIMAL_OK {
                // drift was hiding an infeasible basis; one repair round
                match t.dual_loop() {
                    Ok(LoopEnd::Optimal) => LpStatus::Optimal,
                    Err(_) => LpStatus::Infeasible,
                    _ => LpStatus::Stalled,
                }
            } else {
                LpStatus::Optimal
            }
        }
        LoopEnd::Unbounded => LpStatus::Unbounded,
        LoopEnd::IterCap => LpStatus::Stalled,
    };
    let primal = t.primal_values();
    let objective = match status {
        LpStatus::Optimal | LpStatus::Stalled => lp
            .obj
            .iter()
            .zip(&primal)
            .map(|(c, v)| c * v)
            .sum(),
        LpStatus::Unbounded => f64::NEG_INFINITY,
        LpStatus::Infeasible => f64::INFINITY,
    };
    let duals = if status == LpStatus::Optimal {
        t.btran(&t.cost)
    } else {
        Vec::new()
    };
    LpResult {
        status,
        objective,
        primal,
        duals,
        farkas: Vec::new(),
        iterations: t.iterations,
        wall_time: start.elapsed(),
        basis: t.snapshot_basis(),
    }
}
