//! Lower bounds and the exhaustive oracle.
//!
//! The instance bound sums per-robot bounds computed with all inter-robot
//! constraints dropped; the per-robot problems decompose because the
//! formulation without them is block diagonal. A robot bound enumerates its
//! circuits, location sequences and trajectory choices, solves the per-robot
//! timing LP for every combination, and takes the minimum — exactly over
//! mode assignments too when the combination count fits the budget,
//! otherwise with modes relaxed to the cheapest power per location (a valid
//! relaxation, so the bound stays a bound).
//!
//! The oracle enumerates complete cross-robot tuples and, unlike the
//! heuristic's greedy loop, resolves collisions by exhaustive disjunctive
//! branching, so on small instances it returns the true optimum.

use crate::graph::{all_pairs_min_duration, build_search_graph, enumerate_alternatives, EnumLimit};
use crate::lp::{solve_lp, LinearProgram, LpStatus, Rel};
use crate::model::{pwl_approximate, Cell, Solution};
use crate::reduced::{
    build_reduced_lp, collision_candidates, gamma_over, resolve_worst_collision, Resolution,
};
use crate::rng::SplitMix64;
use crate::tol::GAMMA_TOL;
use crate::tuples::Tuple;
use std::time::Instant;

/// How a robot's bound was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundMethod {
    /// True per-robot optimum: full enumeration incl. mode assignments.
    ExactEnumeration,
    /// Modes relaxed to the cheapest power per location, no switch minima.
    ModeRelaxation,
    /// No circuit fits the cycle time; the bound is `+inf`.
    Infeasible,
}

#[derive(Debug, Clone, Copy)]
pub struct RobotBound {
    pub bound: f64,
    pub method: BoundMethod,
    /// Combinations the exact method would enumerate.
    pub exact_combinations: u64,
}

#[derive(Debug)]
pub struct BoundReport {
    pub per_robot: Vec<RobotBound>,
    pub total: f64,
    pub wall_time_s: f64,
}

/// A circuit refined with concrete locations and trajectories.
#[derive(Debug, Clone)]
pub struct Plan {
    pub circuit: Vec<usize>,
    pub edges: Vec<usize>,
    pub locs: Vec<usize>,
    pub trajs: Vec<usize>,
}

/// All connected location/trajectory refinements of a circuit whose minimal
/// duration fits the cycle time.
pub fn enumerate_plans(cell: &Cell, circuit: &[usize], edges: &[usize]) -> Vec<Plan> {
    let ct = cell.cycle_time();
    let n = circuit.len();
    let node_min: f64 = circuit.iter().map(|&s| cell.static_min_duration(s)).sum();
    let mut out = Vec::new();
    let mut locs = vec![0usize; n];
    let mut trajs = vec![0usize; n];

    fn rec(
        cell: &Cell,
        circuit: &[usize],
        edges: &[usize],
        pos: usize,
        moves_min: f64,
        budget: f64,
        locs: &mut Vec<usize>,
        trajs: &mut Vec<usize>,
        out: &mut Vec<Plan>,
    ) {
        let n = circuit.len();
        if pos == n {
            // close the cycle back to the first location
            for &t in &cell.dynamics[edges[n - 1]].trajectories {
                let tr = &cell.trajectories[t];
                if tr.from_loc != locs[n - 1] || tr.to_loc != locs[0] {
                    continue;
                }
                if moves_min + tr.d_min > budget {
                    continue;
                }
                trajs[n - 1] = t;
                out.push(Plan {
                    circuit: circuit.to_vec(),
                    edges: edges.to_vec(),
                    locs: locs.clone(),
                    trajs: trajs.clone(),
                });
            }
            return;
        }
        for &l in &cell.statics[circuit[pos]].locations {
            locs[pos] = l;
            if pos == 0 {
                rec(cell, circuit, edges, 1, moves_min, budget, locs, trajs, out);
                continue;
            }
            for &t in &cell.dynamics[edges[pos - 1]].trajectories {
                let tr = &cell.trajectories[t];
                if tr.from_loc != locs[pos - 1] || tr.to_loc != l {
                    continue;
                }
                if moves_min + tr.d_min > budget {
                    continue;
                }
                trajs[pos - 1] = t;
                rec(
                    cell,
                    circuit,
                    edges,
                    pos + 1,
                    moves_min + tr.d_min,
                    budget,
                    locs,
                    trajs,
                    out,
                );
            }
        }
    }
    rec(
        cell,
        circuit,
        edges,
        0,
        0.0,
        ct - node_min + crate::tol::NUM_GUARD,
        &mut locs,
        &mut trajs,
        &mut out,
    );
    out
}

/// Applicable robot-local modes per static (the switch time must fit the
/// duration window).
fn applicable_modes(cell: &Cell, s: usize) -> Vec<usize> {
    let robot = &cell.robots[cell.statics[s].robot];
    (0..robot.modes.len())
        .filter(|&m| cell.static_mode_min_duration(s, m) <= cell.statics[s].d_max)
        .collect()
}

/// Per-robot timing LP for a fixed plan: minimize linearized movement energy
/// plus stationary power, subject to the circuit lasting exactly one cycle.
/// `modes[i]` is the mode of `plan.circuit[i]`; `None` relaxes modes away
/// (cheapest power, no switch minimum).
fn plan_lp(cell: &Cell, plan: &Plan, segments: usize, modes: Option<&[usize]>) -> LinearProgram {
    let ct = cell.cycle_time();
    let mut lp = LinearProgram::new();
    let mut cycle: Vec<(usize, f64)> = Vec::new();
    for (i, &s) in plan.circuit.iter().enumerate() {
        let info = &cell.statics[s];
        let (power, dmin) = match modes {
            Some(ms) => (
                cell.loc_power(plan.locs[i], ms[i]),
                cell.static_mode_min_duration(s, ms[i]),
            ),
            None => (cell.min_loc_power(plan.locs[i]), info.d_min),
        };
        let dv = lp.add_col(format!("d_{}", info.id), power, dmin, info.d_max);
        cycle.push((dv, 1.0));
    }
    for (i, &t) in plan.trajs.iter().enumerate() {
        let tr = &cell.trajectories[t];
        let id = &cell.dynamics[plan.edges[i]].id;
        let dv = lp.add_col(format!("d_{id}"), 0.0, tr.d_min, tr.d_max);
        let wv = lp.add_col(format!("W_{id}"), 1.0, 0.0, f64::INFINITY);
        cycle.push((dv, 1.0));
        let pwl = pwl_approximate(&tr.energy, tr.d_min, tr.d_max, segments)
            .expect("validated trajectory energy");
        for (b, &(k, q)) in pwl.segments.iter().enumerate() {
            lp.add_row(format!("pwl_{id}_{b}"), vec![(dv, k), (wv, -1.0)], Rel::Le, -q);
        }
    }
    lp.add_row("cycle".to_owned(), cycle, Rel::Eq, ct);
    lp
}

/// Lower bound on one robot's energy per cycle, ignoring all inter-robot
/// constraints.
pub fn robot_lower_bound(cell: &Cell, robot: usize, segments: usize, budget: u64) -> RobotBound {
    let g = build_search_graph(cell, robot);
    let u = all_pairs_min_duration(&g);
    let mut rng = SplitMix64::new(0);
    let circuits = enumerate_alternatives(
        cell,
        &g,
        &u,
        cell.cycle_time(),
        &mut rng,
        EnumLimit::Exhaustive,
    );
    debug_assert!(circuits.exhausted);
    if circuits.alternatives.is_empty() {
        return RobotBound {
            bound: f64::INFINITY,
            method: BoundMethod::Infeasible,
            exact_combinations: 0,
        };
    }

    let mode_options: Vec<Vec<usize>> = cell.robots[robot]
        .statics
        .iter()
        .map(|&s| applicable_modes(cell, s))
        .collect();
    let mode_combos: u64 = mode_options.iter().map(|m| m.len() as u64).product();

    let mut plans = Vec::new();
    for alt in &circuits.alternatives {
        plans.extend(enumerate_plans(cell, &alt.circuit, &alt.edges));
    }
    let exact_combinations = plans.len() as u64 * mode_combos;
    let exact = exact_combinations <= budget && mode_combos > 0;

    let mut best = f64::INFINITY;
    for plan in &plans {
        if exact {
            // odometer over applicable mode assignments along the circuit
            let options: Vec<&[usize]> = plan
                .circuit
                .iter()
                .map(|&s| {
                    let local = cell.robots[robot]
                        .statics
                        .iter()
                        .position(|&x| x == s)
                        .unwrap();
                    mode_options[local].as_slice()
                })
                .collect();
            let mut idx = vec![0usize; options.len()];
            'modes: loop {
                let modes: Vec<usize> = idx.iter().zip(&options).map(|(&i, o)| o[i]).collect();
                let res = solve_lp(&plan_lp(cell, plan, segments, Some(&modes)));
                if res.status == LpStatus::Optimal && res.objective < best {
                    best = res.objective;
                }
                for k in 0..idx.len() {
                    idx[k] += 1;
                    if idx[k] < options[k].len() {
                        continue 'modes;
                    }
                    idx[k] = 0;
                }
                break;
            }
        } else {
            let res = solve_lp(&plan_lp(cell, plan, segments, None));
            if res.status == LpStatus::Optimal && res.objective < best {
                best = res.objective;
            }
        }
    }

    if best.is_infinite() {
        return RobotBound {
            bound: f64::INFINITY,
            method: BoundMethod::Infeasible,
            exact_combinations,
        };
    }
    RobotBound {
        bound: best,
        method: if exact {
            BoundMethod::ExactEnumeration
        } else {
            BoundMethod::ModeRelaxation
        },
        exact_combinations,
    }
}

/// Sum of the per-robot lower bounds: a valid bound on the linearized
/// criterion of any feasible solution.
pub fn instance_lower_bound(cell: &Cell, segments: usize, budget: u64) -> BoundReport {
    let start = Instant::now();
    let per_robot: Vec<RobotBound> = (0..cell.robots.len())
        .map(|r| robot_lower_bound(cell, r, segments, budget))
        .collect();
    let total = per_robot.iter().map(|b| b.bound).sum();
    BoundReport {
        per_robot,
        total,
        wall_time_s: start.elapsed().as_secs_f64(),
    }
}

#[derive(Debug)]
pub enum OracleOutcome {
    /// Global optimum (by total energy) over all tuples and collision orders.
    Optimal(Box<Solution>),
    Infeasible,
    /// The tuple cross-product exceeds the enumeration budget.
    BudgetExceeded { combinations: u64 },
    /// Disjunctive branching exceeded the depth cap; not oracle-solvable.
    DepthExceeded,
}

const ORACLE_DEPTH_CAP: usize = 20;

struct DepthExceeded;

fn oracle_branch(
    cell: &Cell,
    tuple: &Tuple,
    segments: usize,
    resolutions: &mut Vec<Resolution>,
    best: &mut Option<Solution>,
) -> Result<(), DepthExceeded> {
    if resolutions.len() > ORACLE_DEPTH_CAP {
        return Err(DepthExceeded);
    }
    let reduced = build_reduced_lp(cell, tuple, segments, resolutions);
    let res = solve_lp(&reduced.lp);
    if res.status != LpStatus::Optimal {
        return Ok(()); // infeasible or numerically dead branch
    }
    let timing = reduced.timing_from(cell, &res.primal);
    let candidates = collision_candidates(cell, tuple);
    let gamma = gamma_over(cell, &candidates, &timing);
    if gamma.gamma <= GAMMA_TOL {
        let total = crate::reduced::exact_total(cell, tuple, &timing);
        if best.as_ref().is_none_or(|b| total < b.total_energy) {
            *best = Some(crate::reduced::assemble_solution(
                cell,
                tuple,
                &timing,
                res.objective,
            ));
        }
        return Ok(());
    }
    let worst = gamma.worst.unwrap();
    let first = resolve_worst_collision(&worst);
    let second = Resolution {
        kind: match first.kind {
            crate::reduced::ResolutionKind::FirstEndsBefore => {
                crate::reduced::ResolutionKind::SecondEndsBefore
            }
            crate::reduced::ResolutionKind::SecondEndsBefore => {
                crate::reduced::ResolutionKind::FirstEndsBefore
            }
        },
        ..first
    };
    for res in [first, second] {
        resolutions.push(res);
        oracle_branch(cell, tuple, segments, resolutions, best)?;
        resolutions.pop();
    }
    Ok(())
}

/// Exhaustively enumerates every tuple (circuits x location sequences x
/// trajectory choices x mode assignments), filters spatial compatibility,
/// and schedules each tuple exactly by branching over both orders of every
/// active collision. Ground truth for small instances.
pub fn exhaustive_oracle(cell: &Cell, segments: usize, budget: u64) -> OracleOutcome {
    let robots = cell.robots.len();
    let mut plans: Vec<Vec<Plan>> = Vec::with_capacity(robots);
    let mut mode_maps: Vec<Vec<Vec<usize>>> = Vec::with_capacity(robots);
    for r in 0..robots {
        let g = build_search_graph(cell, r);
        let u = all_pairs_min_duration(&g);
        let mut rng = SplitMix64::new(0);
        let circuits = enumerate_alternatives(
            cell,
            &g,
            &u,
            cell.cycle_time(),
            &mut rng,
            EnumLimit::Exhaustive,
        );
        if circuits.alternatives.is_empty() {
            return OracleOutcome::Infeasible;
        }
        let mut robot_plans = Vec::new();
        for alt in &circuits.alternatives {
            robot_plans.extend(enumerate_plans(cell, &alt.circuit, &alt.edges));
        }
        if robot_plans.is_empty() {
            return OracleOutcome::Infeasible;
        }
        // all applicable mode assignments, aligned with the robot's statics
        let options: Vec<Vec<usize>> = cell.robots[r]
            .statics
            .iter()
            .map(|&s| applicable_modes(cell, s))
            .collect();
        if options.iter().any(|o| o.is_empty()) {
            return OracleOutcome::Infeasible;
        }
        let mut maps = vec![Vec::new()];
        for opts in &options {
            let mut next = Vec::with_capacity(maps.len() * opts.len());
            for m in maps {
                for &o in opts {
                    let mut mm: Vec<usize> = m.clone();
                    mm.push(o);
                    next.push(mm);
                }
            }
            maps = next;
        }
        plans.push(robot_plans);
        mode_maps.push(maps);
    }

    let mut combinations: u64 = 1;
    for r in 0..robots {
        combinations =
            combinations.saturating_mul(plans[r].len() as u64 * mode_maps[r].len() as u64);
    }
    if combinations > budget {
        return OracleOutcome::BudgetExceeded { combinations };
    }

    let mut best: Option<Solution> = None;
    let mut choice = vec![(0usize, 0usize); robots]; // (plan, mode map)
    'outer: loop {
        // assemble the tuple of the current choice
        let mut circuits = Vec::with_capacity(robots);
        let mut edges = Vec::with_capacity(robots);
        let mut paths = Vec::with_capacity(robots);
        let mut trajs = Vec::with_capacity(robots);
        let mut modes = vec![0usize; cell.statics.len()];
        for r in 0..robots {
            let plan = &plans[r][choice[r].0];
            circuits.push(plan.circuit.clone());
            edges.push(plan.edges.clone());
            paths.push(plan.locs.clone());
            trajs.push(plan.trajs.clone());
            for (k, &s) in cell.robots[r].statics.iter().enumerate() {
                modes[s] = mode_maps[r][choice[r].1][k];
            }
        }
        let tuple = Tuple {
            alt: choice.iter().map(|&(p, _)| p).collect(),
            circuits,
            edges,
            paths,
            trajs,
            modes,
        };
        let loc_of = tuple.location_of_static(cell);
        let compatible = cell
            .compat
            .iter()
            .all(|pair| pair.pairs.contains(&(loc_of[pair.a], loc_of[pair.b])));
        if compatible {
            let mut resolutions = Vec::new();
            if oracle_branch(cell, &tuple, segments, &mut resolutions, &mut best).is_err() {
                return OracleOutcome::DepthExceeded;
            }
        }

        for r in 0..robots {
            choice[r].1 += 1;
            if choice[r].1 < mode_maps[r].len() {
                continue 'outer;
            }
            choice[r].1 = 0;
            choice[r].0 += 1;
            if choice[r].0 < plans[r].len() {
                continue 'outer;
            }
            choice[r].0 = 0;
        }
        break;
    }

    match best {
        Some(solution) => OracleOutcome::Optimal(Box::new(solution)),
        None => OracleOutcome::Infeasible,
    }
}
