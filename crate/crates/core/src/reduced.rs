//! Reduced LP: timing optimization of one tuple with incremental collision
//! resolution.
//!
//! For a fixed tuple, only start times and durations remain free. The LP
//! minimizes the linearized movement energies (epigraph variables) plus
//! stationary power times duration, subject to the back-to-back precedence
//! chain, the cycle-time closing row, duration windows, time lags and any
//! accumulated ordering rows. A timing feasible for the LP may still collide,
//! so the maximal violation over collision candidates and cycle shifts is
//! evaluated, the worst collision is resolved by pinning one execution
//! order, and the LP is re-solved warm until collision-free or hopeless.
//! Constraints are only ever added, which makes the loop a heuristic: it can
//! declare a tuple unresolvable that an exact brancher could schedule.

use crate::lp::{warm_solve, Basis, LinearProgram, LpResult, LpStatus, Rel};
use crate::model::{ActivityRef, Cell, ItemRef, Solution, SolutionStatus, SOLUTION_FORMAT};
use crate::tol::GAMMA_TOL;
use crate::tuples::Tuple;
use std::collections::BTreeMap;

/// Which ordering row resolves a collision triple.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ResolutionKind {
    /// `s_a2 + n CT >= s_a1 + d_a1`: a1 must end before a2's shifted start.
    FirstEndsBefore,
    /// `s_a2 + d_a2 + n CT <= s_a1`: a2's shifted end must precede a1.
    SecondEndsBefore,
}

/// One accumulated ordering decision.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Resolution {
    pub a1: ActivityRef,
    pub a2: ActivityRef,
    pub n: i64,
    pub kind: ResolutionKind,
}

/// Timing of a tuple: starts and durations of the executed activities.
#[derive(Debug, Clone)]
pub struct Timing {
    pub start_static: Vec<f64>,
    pub dur_static: Vec<f64>,
    pub start_dyn: Vec<Option<f64>>,
    pub dur_dyn: Vec<Option<f64>>,
}

impl Timing {
    pub fn of(&self, a: ActivityRef) -> Option<(f64, f64)> {
        match a {
            ActivityRef::Static(s) => Some((self.start_static[s], self.dur_static[s])),
            ActivityRef::Dynamic(d) => Some((self.start_dyn[d]?, self.dur_dyn[d]?)),
        }
    }
}

/// The reduced LP with its variable maps; rows can be appended between warm
/// re-solves.
#[derive(Debug)]
pub struct ReducedLp {
    pub lp: LinearProgram,
    start_static: Vec<usize>,
    dur_static: Vec<usize>,
    start_dyn: Vec<Option<usize>>,
    dur_dyn: Vec<Option<usize>>,
    resolution_count: usize,
}

impl ReducedLp {
    pub fn start_var(&self, a: ActivityRef) -> Option<usize> {
        match a {
            ActivityRef::Static(s) => Some(self.start_static[s]),
            ActivityRef::Dynamic(d) => self.start_dyn[d],
        }
    }

    pub fn dur_var(&self, a: ActivityRef) -> Option<usize> {
        match a {
            ActivityRef::Static(s) => Some(self.dur_static[s]),
            ActivityRef::Dynamic(d) => self.dur_dyn[d],
        }
    }

    /// Appends one ordering row.
    pub fn add_resolution(&mut self, cell: &Cell, res: Resolution) {
        let ct = cell.cycle_time();
        let s1 = self.start_var(res.a1).expect("resolved activity executed");
        let s2 = self.start_var(res.a2).expect("resolved activity executed");
        let d1 = self.dur_var(res.a1).unwrap();
        let d2 = self.dur_var(res.a2).unwrap();
        let k = self.resolution_count;
        self.resolution_count += 1;
        match res.kind {
            ResolutionKind::FirstEndsBefore => {
                // s_a2 - s_a1 - d_a1 >= -n CT
                self.lp.add_row(
                    format!("colres_ge_{k}"),
                    vec![(s2, 1.0), (s1, -1.0), (d1, -1.0)],
                    Rel::Ge,
                    -(res.n as f64) * ct,
                );
            }
            ResolutionKind::SecondEndsBefore => {
                // s_a2 + d_a2 - s_a1 <= -n CT
                self.lp.add_row(
                    format!("colres_le_{k}"),
                    vec![(s2, 1.0), (d2, 1.0), (s1, -1.0)],
                    Rel::Le,
                    -(res.n as f64) * ct,
                );
            }
        }
    }

    /// Extracts the executed activities' timing from a primal point.
    pub fn timing_from(&self, cell: &Cell, primal: &[f64]) -> Timing {
        Timing {
            start_static: self.start_static.iter().map(|&v| primal[v]).collect(),
            dur_static: self.dur_static.iter().map(|&v| primal[v]).collect(),
            start_dyn: (0..cell.dynamics.len())
                .map(|d| self.start_dyn[d].map(|v| primal[v]))
                .collect(),
            dur_dyn: (0..cell.dynamics.len())
                .map(|d| self.dur_dyn[d].map(|v| primal[v]))
                .collect(),
        }
    }
}

/// Builds the reduced LP of a tuple with `segments` linearization pieces and
/// any pre-existing resolution rows.
pub fn build_reduced_lp(
    cell: &Cell,
    tuple: &Tuple,
    segments: usize,
    resolutions: &[Resolution],
) -> ReducedLp {
    let ct = cell.cycle_time();
    let mut lp = LinearProgram::new();

    let mut start_static = vec![usize::MAX; cell.statics.len()];
    let mut dur_static = vec![usize::MAX; cell.statics.len()];
    let mut start_dyn = vec![None; cell.dynamics.len()];
    let mut dur_dyn = vec![None; cell.dynamics.len()];

    let loc_of = tuple.location_of_static(cell);
    for (s, info) in cell.statics.iter().enumerate() {
        let mode = tuple.modes[s];
        let power = cell.loc_power(loc_of[s], mode);
        start_static[s] = lp.add_col("", 0.0, 0.0, f64::INFINITY);
        dur_static[s] = lp.add_col(
            "",
            power,
            cell.static_mode_min_duration(s, mode),
            info.d_max,
        );
    }
    for (r, edges) in tuple.edges.iter().enumerate() {
        for (i, &e) in edges.iter().enumerate() {
            let t = tuple.trajs[r][i];
            let tr = &cell.trajectories[t];
            let sv = lp.add_col("", 0.0, 0.0, f64::INFINITY);
            let dv = lp.add_col("", 0.0, tr.d_min, tr.d_max);
            let wv = lp.add_col("", 1.0, 0.0, f64::INFINITY);
            start_dyn[e] = Some(sv);
            dur_dyn[e] = Some(dv);
            let pwl = crate::model::pwl_approximate(&tr.energy, tr.d_min, tr.d_max, segments)
                .expect("validated trajectory energy");
            for &(k, q) in pwl.segments.iter() {
                // k d + q <= W
                lp.add_row("", vec![(dv, k), (wv, -1.0)], Rel::Le, -q);
            }
        }
    }

    // precedence chain; the movement leaving home starts a cycle earlier
    for (r, circuit) in tuple.circuits.iter().enumerate() {
        let n = circuit.len();
        for i in 0..n {
            let cur = circuit[i];
            let e = tuple.edges[r][i];
            let next = circuit[(i + 1) % n];
            let is_home = cell.statics[cur].is_home;
            let se = start_dyn[e].unwrap();
            let de = dur_dyn[e].unwrap();
            lp.add_row(
                "",
                vec![
                    (se, 1.0),
                    (start_static[cur], -1.0),
                    (dur_static[cur], -1.0),
                ],
                Rel::Eq,
                if is_home { -ct } else { 0.0 },
            );
            lp.add_row(
                "",
                vec![(start_static[next], 1.0), (se, -1.0), (de, -1.0)],
                Rel::Eq,
                0.0,
            );
        }
    }

    // time lags (endpoints of a lag are always executed: statics always,
    // dynamic endpoints are mandatory movements)
    let mut reduced = ReducedLp {
        lp,
        start_static,
        dur_static,
        start_dyn,
        dur_dyn,
        resolution_count: 0,
    };
    for (i, lag) in cell.lags.iter().enumerate() {
        let (Some(s_from), Some(s_to)) = (reduced.start_var(lag.from), reduced.start_var(lag.to))
        else {
            continue;
        };
        reduced.lp.add_row(
            format!("lag_{i}"),
            vec![(s_to, 1.0), (s_from, -1.0)],
            Rel::Ge,
            lag.length - ct * lag.height as f64,
        );
    }
    for &res in resolutions {
        reduced.add_resolution(cell, res);
    }
    reduced
}

/// Collision candidates of a tuple: activity pairs from quadruplets whose
/// both items are selected, deduplicated and in canonical order.
pub fn collision_candidates(cell: &Cell, tuple: &Tuple) -> Vec<(ActivityRef, ActivityRef)> {
    let loc_of = tuple.location_of_static(cell);
    let traj_of = tuple.executed_traj(cell);
    let selected = |a: ActivityRef, item: ItemRef| match (a, item) {
        (ActivityRef::Static(s), ItemRef::Loc(l)) => loc_of[s] == l,
        (ActivityRef::Dynamic(d), ItemRef::Traj(t)) => traj_of[d] == Some(t),
        _ => false,
    };
    let mut pairs: Vec<(ActivityRef, ActivityRef)> = cell
        .collisions
        .iter()
        .filter(|q| selected(q.a1, q.item1) && selected(q.a2, q.item2))
        .map(|q| (q.a1, q.a2))
        .collect();
    pairs.sort_unstable();
    pairs.dedup();
    pairs
}

/// The worst collision of a timing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WorstCollision {
    pub a1: ActivityRef,
    pub a2: ActivityRef,
    pub n: i64,
    pub upsilon: f64,
    pub mu: f64,
}

/// Result of the maximal-violation evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GammaResult {
    /// `max over candidates and shifts of min(upsilon, mu)`; at most 0 when
    /// no collision is active.
    pub gamma: f64,
    pub worst: Option<WorstCollision>,
}

/// Evaluates the maximal collision violation of a timing, exactly, over all
/// candidates and cycle shifts `n in -|R|..=|R|`. Ties keep the
/// lexicographically smallest `(a1, a2, n)` triple.
pub fn compute_gamma(cell: &Cell, tuple: &Tuple, timing: &Timing) -> GammaResult {
    gamma_over(cell, &collision_candidates(cell, tuple), timing)
}

pub(crate) fn gamma_over(
    cell: &Cell,
    candidates: &[(ActivityRef, ActivityRef)],
    timing: &Timing,
) -> GammaResult {
    let ct = cell.cycle_time();
    let shifts = cell.robots.len() as i64;
    let mut best: Option<WorstCollision> = None;
    for &(a1, a2) in candidates {
        let Some((s1, d1)) = timing.of(a1) else { continue };
        let Some((s2, d2)) = timing.of(a2) else { continue };
        for n in -shifts..=shifts {
            let shift = n as f64 * ct;
            let upsilon = s1 + d1 - s2 - shift;
            let mu = s2 + d2 + shift - s1;
            let value = upsilon.min(mu);
            if best.is_none_or(|w| value > w.upsilon.min(w.mu)) {
                best = Some(WorstCollision {
                    a1,
                    a2,
                    n,
                    upsilon,
                    mu,
                });
            }
        }
    }
    GammaResult {
        gamma: best.map_or(f64::NEG_INFINITY, |w| w.upsilon.min(w.mu)),
        worst: best,
    }
}

/// Ordering decision for the worst collision: the side with the smaller
/// one-sided overlap is pinned, ties prefer the first kind.
pub fn resolve_worst_collision(worst: &WorstCollision) -> Resolution {
    let kind = if worst.upsilon <= worst.mu {
        ResolutionKind::FirstEndsBefore
    } else {
        ResolutionKind::SecondEndsBefore
    };
    Resolution {
        a1: worst.a1,
        a2: worst.a2,
        n: worst.n,
        kind,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvalStatus {
    Feasible,
    LpInfeasible,
    CollisionUnresolvable,
    /// The LP-call budget ran out mid-evaluation; the result is void.
    Aborted,
}

/// Outcome of evaluating one tuple. The full [`Solution`] is assembled on
/// demand via [`assemble_solution`]; the evaluation itself only carries the
/// timing and the two scalar values, which keeps the hot loop allocation-light.
#[derive(Debug)]
pub struct TupleEvaluation {
    pub status: EvalStatus,
    /// Timing behind a feasible evaluation, for the sub-heuristics.
    pub timing: Option<Timing>,
    /// Basis of the first LP solve; primes the next evaluation of a
    /// structurally similar tuple.
    pub first_basis: Option<Basis>,
    /// Linearized objective value of a feasible evaluation.
    pub criterion: f64,
    /// Exact-model total energy of a feasible evaluation.
    pub total_energy: f64,
    pub lp_calls: u64,
    pub added_constraints: u64,
}

impl TupleEvaluation {
    /// Builds the reportable solution of a feasible evaluation.
    pub fn solution(&self, cell: &Cell, tuple: &Tuple) -> Option<Solution> {
        let timing = self.timing.as_ref()?;
        Some(assemble_solution(cell, tuple, timing, self.criterion))
    }
}

/// Permission to spend one LP solve; lets the engine enforce deterministic
/// evaluation budgets and wall-clock deadlines at solve granularity.
pub trait LpBudget {
    fn take(&mut self) -> bool;
}

/// No limit.
pub struct Unlimited;

impl LpBudget for Unlimited {
    fn take(&mut self) -> bool {
        true
    }
}

impl LpBudget for u64 {
    fn take(&mut self) -> bool {
        if *self == 0 {
            return false;
        }
        *self -= 1;
        true
    }
}

/// Evaluates a tuple: solve, detect the worst collision, pin its order,
/// re-solve warm; stop when collision-free, the LP turns infeasible, or the
/// combinatorial cap on added rows is hit.
pub fn evaluate_tuple(
    cell: &Cell,
    tuple: &Tuple,
    segments: usize,
    budget: &mut dyn LpBudget,
) -> TupleEvaluation {
    evaluate_tuple_warm(cell, tuple, segments, budget, None)
}

/// Like [`evaluate_tuple`], primed with a basis from a previous evaluation
/// of a structurally similar tuple (a dimension mismatch falls back to a
/// cold first solve).
pub fn evaluate_tuple_warm(
    cell: &Cell,
    tuple: &Tuple,
    segments: usize,
    budget: &mut dyn LpBudget,
    warm: Option<&Basis>,
) -> TupleEvaluation {
    evaluate_tuple_traced(cell, tuple, segments, budget, warm, None)
}

/// Like [`evaluate_tuple_warm`]; optionally dumps every LP iteration as LP
/// text.
pub fn evaluate_tuple_traced(
    cell: &Cell,
    tuple: &Tuple,
    segments: usize,
    budget: &mut dyn LpBudget,
    warm: Option<&Basis>,
    mut dump: Option<&mut Vec<Vec<u8>>>,
) -> TupleEvaluation {
    let mut reduced = build_reduced_lp(cell, tuple, segments, &[]);
    let candidates = collision_candidates(cell, tuple);
    let cap = candidates.len() as u64 * (2 * cell.robots.len() as u64 + 1);
    let mut lp_calls = 0u64;
    let mut added = 0u64;
    let mut basis: Option<Basis> = warm.cloned();
    let mut first_basis: Option<Basis> = None;
    let mut seen: Vec<Resolution> = Vec::new();

    loop {
        if !budget.take() {
            return TupleEvaluation {
                status: EvalStatus::Aborted,
                timing: None,
                first_basis: None,
                criterion: f64::INFINITY,
                total_energy: f64::INFINITY,
                lp_calls,
                added_constraints: added,
            };
        }
        if let Some(dump) = dump.as_deref_mut() {
            dump.push(crate::milp::export_lp_program(&reduced.lp));
        }
        let result: LpResult = match &basis {
            Some(b) => warm_solve(&reduced.lp, b),
            None => crate::lp::solve_lp(&reduced.lp),
        };
        lp_calls += 1;
        if lp_calls == 1 {
            first_basis = result.basis.clone();
        }
        match result.status {
            LpStatus::Optimal => {}
            LpStatus::Infeasible | LpStatus::Unbounded | LpStatus::Stalled => {
                return TupleEvaluation {
                    status: EvalStatus::LpInfeasible,
                    timing: None,
                    first_basis,
                    criterion: f64::INFINITY,
                    total_energy: f64::INFINITY,
                    lp_calls,
                    added_constraints: added,
                };
            }
        }
        let timing = reduced.timing_from(cell, &result.primal);
        let gamma = gamma_over(cell, &candidates, &timing);
        if gamma.gamma <= GAMMA_TOL {
            let total_energy = exact_total(cell, tuple, &timing);
            return TupleEvaluation {
                status: EvalStatus::Feasible,
                timing: Some(timing),
                first_basis,
                criterion: result.objective,
                total_energy,
                lp_calls,
                added_constraints: added,
            };
        }
        if added >= cap {
            return TupleEvaluation {
                status: EvalStatus::CollisionUnresolvable,
                timing: None,
                first_basis,
                criterion: f64::INFINITY,
                total_energy: f64::INFINITY,
                lp_calls,
                added_constraints: added,
            };
        }
        let resolution = resolve_worst_collision(&gamma.worst.unwrap());
        if seen.contains(&resolution) {
            // the pinned order re-emerged as worst: numerical dead end
            return TupleEvaluation {
                status: EvalStatus::CollisionUnresolvable,
                timing: None,
                first_basis,
                criterion: f64::INFINITY,
                total_energy: f64::INFINITY,
                lp_calls,
                added_constraints: added,
            };
        }
        seen.push(resolution);
        reduced.add_resolution(cell, resolution);
        added += 1;
        basis = result.basis;
    }
}

/// Exact-model total energy of a timing: stationary power times duration
/// plus the exact movement energies.
pub fn exact_total(cell: &Cell, tuple: &Tuple, timing: &Timing) -> f64 {
    let loc_of = tuple.location_of_static(cell);
    let mut total = 0.0;
    for (s, _) in cell.statics.iter().enumerate() {
        total += cell.loc_power(loc_of[s], tuple.modes[s]) * timing.dur_static[s];
    }
    let traj_of = tuple.executed_traj(cell);
    for (d, t) in traj_of.iter().enumerate() {
        let Some(t) = *t else { continue };
        let du = timing.dur_dyn[d].expect("executed movement has timing");
        total += cell.trajectories[t].energy.eval_unchecked(du.max(f64::MIN_POSITIVE));
    }
    total
}

/// Builds the reported solution of a feasible timing: exact per-activity
/// energies, with the LP's linearized objective kept as the criterion.
pub fn assemble_solution(cell: &Cell, tuple: &Tuple, timing: &Timing, criterion: f64) -> Solution {
    let mut start = BTreeMap::new();
    let mut duration = BTreeMap::new();
    let mut energy = BTreeMap::new();
    let mut total = 0.0;
    let loc_of = tuple.location_of_static(cell);
    for (s, info) in cell.statics.iter().enumerate() {
        let (st, du) = (timing.start_static[s], timing.dur_static[s]);
        start.insert(info.id.clone(), st);
        duration.insert(info.id.clone(), du);
        let w = cell.loc_power(loc_of[s], tuple.modes[s]) * du;
        energy.insert(info.id.clone(), w);
        total += w;
    }
    let traj_of = tuple.executed_traj(cell);
    for (d, info) in cell.dynamics.iter().enumerate() {
        let Some(t) = traj_of[d] else { continue };
        let (st, du) = (
            timing.start_dyn[d].expect("executed movement has timing"),
            timing.dur_dyn[d].expect("executed movement has timing"),
        );
        start.insert(info.id.clone(), st);
        duration.insert(info.id.clone(), du);
        let w = cell.trajectories[t]
            .energy
            .eval(du)
            .expect("movement durations are positive");
        energy.insert(info.id.clone(), w);
        total += w;
    }
    Solution {
        format: SOLUTION_FORMAT.to_owned(),
        status: SolutionStatus::Feasible,
        robots: tuple.selection_steps(cell),
        start,
        duration,
        energy,
        total_energy: total,
        criterion,
        solver: None,
    }
}
