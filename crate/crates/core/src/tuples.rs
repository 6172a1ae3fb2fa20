//! Tuples: partially fixed problems handed to the reduced LP.
//!
//! A tuple fixes, per robot, an operation order (alternative), the closed
//! path through concrete locations with one trajectory per movement, and a
//! power mode per static activity. Tuple generation favors feasibility:
//! fresh tuples combine a random alternative with its fastest path and the
//! fastest power mode, then repair spatial compatibility.

use crate::graph::{path_min_duration, Alternative};
use crate::model::{Cell, RobotSelection, SelectionStep, Solution};
use crate::rng::SplitMix64;
use crate::tol::{NUM_GUARD, REPAIR_EPS};
use thiserror::Error;

/// Enumerated alternatives per robot, shared read-only by all workers.
pub type AlternativesStore = Vec<Vec<Alternative>>;

/// A partially fixed problem: operation orders, closed paths and modes.
#[derive(Debug, Clone, PartialEq)]
pub struct Tuple {
    /// Index of the chosen alternative per robot.
    pub alt: Vec<usize>,
    /// Circuit per robot: global static indices, ending at home.
    pub circuits: Vec<Vec<usize>>,
    /// Movement per circuit slot; `edges[r][i]` connects `circuits[r][i]` to
    /// the next circuit entry (cyclically).
    pub edges: Vec<Vec<usize>>,
    /// Chosen location per circuit slot.
    pub paths: Vec<Vec<usize>>,
    /// Chosen trajectory per movement slot.
    pub trajs: Vec<Vec<usize>>,
    /// Robot-local power mode per global static index.
    pub modes: Vec<usize>,
}

#[derive(Debug, Error, PartialEq)]
pub enum TupleError {
    #[error("robot {0} has no enumerated alternatives")]
    NoAlternatives(usize),
    #[error("spatial compatibility of pair #{0} cannot be repaired")]
    RepairFailed(usize),
}

impl Tuple {
    /// Chosen location per global static index (every static is executed).
    pub fn location_of_static(&self, cell: &Cell) -> Vec<usize> {
        let mut loc = vec![usize::MAX; cell.statics.len()];
        for (r, circuit) in self.circuits.iter().enumerate() {
            for (i, &s) in circuit.iter().enumerate() {
                loc[s] = self.paths[r][i];
            }
        }
        loc
    }

    /// Chosen trajectory per global dynamic index; `None` when skipped.
    pub fn executed_traj(&self, cell: &Cell) -> Vec<Option<usize>> {
        let mut traj = vec![None; cell.dynamics.len()];
        for (r, edges) in self.edges.iter().enumerate() {
            for (i, &e) in edges.iter().enumerate() {
                traj[e] = Some(self.trajs[r][i]);
            }
        }
        traj
    }

    /// Minimal duration of a robot's path under the tuple's modes.
    pub fn robot_min_duration(&self, cell: &Cell, r: usize) -> f64 {
        path_min_duration(cell, &self.circuits[r], &self.trajs[r], &self.modes)
    }

    /// Selection steps in solution order (first activity after home through
    /// the closing movement).
    pub fn selection_steps(&self, cell: &Cell) -> Vec<RobotSelection> {
        self.circuits
            .iter()
            .enumerate()
            .map(|(r, circuit)| {
                let mut steps = Vec::with_capacity(2 * circuit.len());
                for (i, &s) in circuit.iter().enumerate() {
                    let mode = self.modes[s];
                    steps.push(SelectionStep {
                        activity: cell.statics[s].id.clone(),
                        location: Some(cell.locations[self.paths[r][i]].id.clone()),
                        mode: Some(cell.robots[r].modes[mode].id.clone()),
                        trajectory: None,
                    });
                    let e = self.edges[r][i];
                    steps.push(SelectionStep {
                        activity: cell.dynamics[e].id.clone(),
                        location: None,
                        mode: None,
                        trajectory: Some(cell.trajectories[self.trajs[r][i]].id.clone()),
                    });
                }
                RobotSelection {
                    robot: cell.robots[r].id.clone(),
                    steps,
                }
            })
            .collect()
    }
}

/// Builds a tuple from one alternative per robot: its fastest closed path and
/// the robot's fastest power mode, then repairs spatial compatibility.
pub fn tuple_from_alternatives(
    cell: &Cell,
    store: &AlternativesStore,
    choice: &[usize],
) -> Result<Tuple, TupleError> {
    let mut circuits = Vec::with_capacity(cell.robots.len());
    let mut edges = Vec::with_capacity(cell.robots.len());
    let mut paths = Vec::with_capacity(cell.robots.len());
    let mut trajs = Vec::with_capacity(cell.robots.len());
    for (r, &k) in choice.iter().enumerate() {
        let alt = &store[r][k];
        circuits.push(alt.circuit.clone());
        edges.push(alt.edges.clone());
        paths.push(alt.fastest_locations.clone());
        trajs.push(alt.fastest_trajs.clone());
    }
    let mut modes = vec![0usize; cell.statics.len()];
    for (r, rinfo) in cell.robots.iter().enumerate() {
        let _ = r;
        for &s in &rinfo.statics {
            modes[s] = rinfo.fastest_mode;
        }
    }
    let tuple = Tuple {
        alt: choice.to_vec(),
        circuits,
        edges,
        paths,
        trajs,
        modes,
    };
    fix_spatial_compatibility(cell, tuple)
}

/// Picks a random alternative per robot and builds the tuple.
pub fn generate_tuple(
    cell: &Cell,
    store: &AlternativesStore,
    rng: &mut SplitMix64,
) -> Result<Tuple, TupleError> {
    let mut choice = Vec::with_capacity(cell.robots.len());
    for (r, alts) in store.iter().enumerate() {
        if alts.is_empty() {
            return Err(TupleError::NoAlternatives(r));
        }
        choice.push(rng.next_below(alts.len()));
    }
    tuple_from_alternatives(cell, store, &choice)
}

/// Repairs violated compatible-location pairs. For each violated pair the
/// fixing location pair with the smallest prolongation score is applied,
/// where prolongation of a robot already close to the cycle time is
/// penalized: `score = sum_r delta_r / max(CT - duration_r, eps)`. Paths are
/// re-routed through the new location via the fastest local reconnection.
pub fn fix_spatial_compatibility(cell: &Cell, tuple: Tuple) -> Result<Tuple, TupleError> {
    let mut tuple = tuple;
    let ct = cell.cycle_time();
    if cell.compat.is_empty() {
        return Ok(tuple);
    }
    let max_sweeps = 2 * cell.compat.len() + 2;
    for _ in 0..max_sweeps {
        let loc_of = tuple.location_of_static(cell);
        let violated = cell
            .compat
            .iter()
            .enumerate()
            .find(|(_, pair)| !pair.pairs.contains(&(loc_of[pair.a], loc_of[pair.b])));
        let Some((pair_idx, pair)) = violated else {
            return Ok(tuple);
        };

        let durations: Vec<f64> = (0..cell.robots.len())
            .map(|r| tuple.robot_min_duration(cell, r))
            .collect();

        let mut best: Option<(f64, usize)> = None; // (score, candidate index)
        let mut reroutes: Vec<Option<Vec<Reroute>>> = Vec::new();
        for (ci, &(l1, l2)) in pair.pairs.iter().enumerate() {
            let mut plan = Vec::new();
            let mut feasible = true;
            let mut score = 0.0;
            for (s, target) in [(pair.a, l1), (pair.b, l2)] {
                if loc_of[s] == target {
                    continue;
                }
                match plan_reroute(cell, &tuple, s, target) {
                    Some(rr) => {
                        let r = cell.statics[s].robot;
                        if durations[r] + rr.delta > ct + NUM_GUARD {
                            feasible = false;
                            break;
                        }
                        score += rr.delta / (ct - durations[r]).max(REPAIR_EPS);
                        plan.push(rr);
                    }
                    None => {
                        feasible = false;
                        break;
                    }
                }
            }
            if feasible {
                if best.is_none_or(|(b, _)| score < b) {
                    best = Some((score, ci));
                }
                reroutes.push(Some(plan));
            } else {
                reroutes.push(None);
            }
        }
        let Some((_, ci)) = best else {
            return Err(TupleError::RepairFailed(pair_idx));
        };
        for rr in reroutes[ci].as_ref().unwrap() {
            rr.apply(&mut tuple);
        }
    }
    // sweeps exhausted: interacting pairs kept re-breaking each other
    let loc_of = tuple.location_of_static(cell);
    match cell
        .compat
        .iter()
        .position(|pair| !pair.pairs.contains(&(loc_of[pair.a], loc_of[pair.b])))
    {
        Some(i) => Err(TupleError::RepairFailed(i)),
        None => Ok(tuple),
    }
}

/// A planned single-location change with its fastest local reconnection.
struct Reroute {
    robot: usize,
    position: usize,
    new_loc: usize,
    in_traj: usize,
    out_traj: usize,
    delta: f64,
}

impl Reroute {
    fn apply(&self, tuple: &mut Tuple) {
        let n = tuple.circuits[self.robot].len();
        let p = self.position;
        tuple.paths[self.robot][p] = self.new_loc;
        tuple.trajs[self.robot][(p + n - 1) % n] = self.in_traj;
        tuple.trajs[self.robot][p] = self.out_traj;
    }
}

fn plan_reroute(cell: &Cell, tuple: &Tuple, s: usize, target: usize) -> Option<Reroute> {
    let r = cell.statics[s].robot;
    let circuit = &tuple.circuits[r];
    let n = circuit.len();
    let p = circuit.iter().position(|&x| x == s).expect("static on its circuit");
    let in_slot = (p + n - 1) % n;
    let prev_loc = tuple.paths[r][in_slot];
    let next_loc = tuple.paths[r][(p + 1) % n];
    let in_edge = tuple.edges[r][in_slot];
    let out_edge = tuple.edges[r][p];
    let in_traj = cell.fastest_traj_between(in_edge, prev_loc, target)?;
    let out_traj = cell.fastest_traj_between(out_edge, target, next_loc)?;
    let old = cell.trajectories[tuple.trajs[r][in_slot]].d_min
        + cell.trajectories[tuple.trajs[r][p]].d_min;
    let new = cell.trajectories[in_traj].d_min + cell.trajectories[out_traj].d_min;
    Some(Reroute {
        robot: r,
        position: p,
        new_loc: target,
        in_traj,
        out_traj,
        delta: new - old,
    })
}

/// One elite entry: a feasible solution and the tuple that produced it.
#[derive(Debug, Clone)]
pub struct EliteEntry {
    pub solution: Solution,
    pub tuple: Tuple,
}

/// Bounded pool of the best feasible solutions, ordered by total energy.
/// The one shared mutable structure of the heuristic; callers guard it with
/// a mutex, critical sections stay O(capacity).
#[derive(Debug)]
pub struct ElitePool {
    capacity: usize,
    entries: Vec<EliteEntry>,
}

impl ElitePool {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity >= 1);
        ElitePool {
            capacity,
            entries: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[EliteEntry] {
        &self.entries
    }

    pub fn best(&self) -> Option<&EliteEntry> {
        self.entries.first()
    }

    /// True when [`ElitePool::offer`] would accept a solution with this
    /// selection fingerprint and total energy; lets callers skip assembling
    /// solutions the pool would reject anyway.
    pub fn would_accept(&self, tuple: &Tuple, total_energy: f64) -> bool {
        if let Some(e) = self.entries.iter().find(|e| &e.tuple == tuple) {
            return total_energy < e.solution.total_energy;
        }
        self.entries.len() < self.capacity
            || total_energy < self.entries.last().map(|e| e.solution.total_energy).unwrap()
    }

    /// Offers a feasible solution. Accepted when the pool has room or the
    /// candidate beats the current worst; a duplicate selection (same tuple
    /// fingerprint: locations, trajectories, modes and orders) is replaced
    /// only by a strictly better one.
    pub fn offer(&mut self, solution: Solution, tuple: Tuple) -> bool {
        if let Some(i) = self.entries.iter().position(|e| e.tuple == tuple) {
            if solution.total_energy < self.entries[i].solution.total_energy {
                self.entries.remove(i);
                self.insert_sorted(EliteEntry { solution, tuple });
                return true;
            }
            return false;
        }
        if self.entries.len() < self.capacity {
            self.insert_sorted(EliteEntry { solution, tuple });
            return true;
        }
        if solution.total_energy
            < self.entries.last().map(|e| e.solution.total_energy).unwrap()
        {
            self.entries.pop();
            self.insert_sorted(EliteEntry { solution, tuple });
            return true;
        }
        false
    }

    fn insert_sorted(&mut self, entry: EliteEntry) {
        let pos = self
            .entries
            .partition_point(|e| e.solution.total_energy <= entry.solution.total_energy);
        self.entries.insert(pos, entry);
    }

    /// Distinct alternatives present in the pool, per robot, in first-seen
    /// order.
    pub fn distinct_alternatives(&self, robots: usize) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); robots];
        for e in &self.entries {
            for (r, &a) in e.tuple.alt.iter().enumerate() {
                if !out[r].contains(&a) {
                    out[r].push(a);
                }
            }
        }
        out
    }
}

/// Recombination: per robot an alternative is drawn uniformly from the
/// distinct alternatives used by elite solutions, then the tuple is built
/// like a fresh one (fastest path, fastest mode, compatibility repair).
pub fn combine_elites(
    cell: &Cell,
    pool: &ElitePool,
    store: &AlternativesStore,
    rng: &mut SplitMix64,
) -> Result<Tuple, TupleError> {
    assert!(!pool.is_empty(), "elite recombination needs a nonempty pool");
    let distinct = pool.distinct_alternatives(cell.robots.len());
    let mut choice = Vec::with_capacity(cell.robots.len());
    for (r, alts) in distinct.iter().enumerate() {
        if alts.is_empty() {
            return Err(TupleError::NoAlternatives(r));
        }
        choice.push(*rng.pick(alts));
    }
    tuple_from_alternatives(cell, store, &choice)
}
