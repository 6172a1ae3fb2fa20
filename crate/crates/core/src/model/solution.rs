//! Solution representation and the feasibility checker.
//!
//! [`check_solution`] verifies a solution against the problem semantics
//! directly (circuit structure, duration windows, cycle time, back-to-back
//! timing, time lags, spatial compatibility, collision disjointness and
//! reported energies) rather than against any solver formulation, so it can
//! serve as an independent referee for every optimizer in the crate.

use super::cell::{ActivityRef, Cell, ItemRef};
use crate::tol::{ENERGY_REL_TOL, FEAS_TOL};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;

/// Current on-disk format tag for solution files.
pub const SOLUTION_FORMAT: &str = "cellopt-solution/1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolutionStatus {
    Feasible,
    Infeasible,
    Unknown,
}

/// One selection step of a robot's closed path, in execution order.
/// Static steps carry a location and a mode, dynamic steps a trajectory.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SelectionStep {
    pub activity: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub location: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub mode: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub trajectory: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RobotSelection {
    pub robot: String,
    /// Alternating static/dynamic steps, starting with the first activity
    /// after home and ending with the movement closing the cycle back to the
    /// first location.
    pub steps: Vec<SelectionStep>,
}

/// Metadata about the solver run that produced a solution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverMeta {
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub time_limit_s: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub eval_budget: Option<u64>,
    /// Wall time of the run; written as 0 in deterministic mode so output
    /// files stay byte-identical across runs.
    pub wall_time_s: f64,
    pub lp_evaluations: u64,
    pub threads: usize,
}

/// A (candidate) solution: selections, timing and reported energies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Solution {
    pub format: String,
    pub status: SolutionStatus,
    pub robots: Vec<RobotSelection>,
    /// Start time per executed activity, seconds.
    pub start: BTreeMap<String, f64>,
    /// Duration per executed activity, seconds.
    pub duration: BTreeMap<String, f64>,
    /// Energy per executed activity, joules, under the exact energy model.
    pub energy: BTreeMap<String, f64>,
    /// Sum of `energy`, joules.
    pub total_energy: f64,
    /// Objective value under the piecewise-linearized energy model; the
    /// quantity the optimizer minimizes. At most `total_energy` plus the
    /// linearization gap.
    pub criterion: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub solver: Option<SolverMeta>,
}

impl Solution {
    /// Structural fingerprint of the selections (ignores timing), used for
    /// duplicate detection in the elite pool.
    pub fn selections(&self) -> &[RobotSelection] {
        &self.robots
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ViolationKind {
    Structure,
    DurationWindow,
    CycleTime,
    Chain,
    TimeLag,
    SpatialCompat,
    Collision,
    Energy,
}

/// One violated feasibility condition with the measured slack
/// (negative slack = amount by which the constraint is broken).
#[derive(Debug, Clone)]
pub struct SolutionViolation {
    pub kind: ViolationKind,
    pub entity: String,
    pub slack: f64,
    pub detail: String,
}

impl fmt::Display for SolutionViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "[{:?}] {}: {} (slack {:.3e})",
            self.kind, self.entity, self.detail, self.slack
        )
    }
}

/// Result of [`check_solution`].
#[derive(Debug, Clone, Default)]
pub struct FeasibilityReport {
    pub violations: Vec<SolutionViolation>,
}

impl FeasibilityReport {
    pub fn is_feasible(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for FeasibilityReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            return write!(f, "feasible");
        }
        writeln!(f, "{} violations:", self.violations.len())?;
        for v in &self.violations {
            writeln!(f, "  - {v}")?;
        }
        Ok(())
    }
}

struct Executed {
    /// Chosen location per global static index.
    loc: Vec<Option<usize>>,
    /// Chosen robot-local mode per global static index.
    mode: Vec<Option<usize>>,
    /// Chosen trajectory per global dynamic index (executed edges only).
    traj: Vec<Option<usize>>,
}

/// Checks a solution against the problem semantics. Pure: identical inputs
/// produce an identical report.
pub fn check_solution(cell: &Cell, solution: &Solution) -> FeasibilityReport {
    let mut report = FeasibilityReport::default();
    let ct = cell.cycle_time();

    let mut exec = Executed {
        loc: vec![None; cell.statics.len()],
        mode: vec![None; cell.statics.len()],
        traj: vec![None; cell.dynamics.len()],
    };

    let violate = |kind, entity: String, slack: f64, detail: String| SolutionViolation {
        kind,
        entity,
        slack,
        detail,
    };

    if solution.robots.len() != cell.robots.len() {
        report.violations.push(violate(
            ViolationKind::Structure,
            "solution".into(),
            0.0,
            format!(
                "selection count {} does not match robot count {}",
                solution.robots.len(),
                cell.robots.len()
            ),
        ));
        return report;
    }

    // pass 1: resolve selections and validate circuit structure
    for sel in &solution.robots {
        let Some(ri) = cell.robots.iter().position(|r| r.id == sel.robot) else {
            report.violations.push(violate(
                ViolationKind::Structure,
                format!("robot {}", sel.robot),
                0.0,
                "unknown robot".into(),
            ));
            continue;
        };
        let robot = &cell.robots[ri];
        let n = robot.statics.len();
        if sel.steps.len() != 2 * n {
            report.violations.push(violate(
                ViolationKind::Structure,
                format!("robot {}", sel.robot),
                0.0,
                format!(
                    "expected {} alternating steps (statics + movements), got {}",
                    2 * n,
                    sel.steps.len()
                ),
            ));
            continue;
        }
        let mut circuit: Vec<usize> = Vec::with_capacity(n);
        let mut edges: Vec<usize> = Vec::with_capacity(n);
        let mut ok = true;
        for (k, step) in sel.steps.iter().enumerate() {
            let Some(aref) = cell.activity(&step.activity) else {
                report.violations.push(violate(
                    ViolationKind::Structure,
                    format!("activity {}", step.activity),
                    0.0,
                    "unknown activity".into(),
                ));
                ok = false;
                break;
            };
            match (k % 2, aref) {
                (0, ActivityRef::Static(s)) if cell.statics[s].robot == ri => {
                    let info = &cell.statics[s];
                    let loc = step.location.as_deref().and_then(|lid| {
                        info.locations
                            .iter()
                            .copied()
                            .find(|&l| cell.locations[l].id == lid)
                    });
                    let mode = step.mode.as_deref().and_then(|mid| {
                        robot.modes.iter().position(|m| m.id == mid)
                    });
                    if loc.is_none() || mode.is_none() {
                        report.violations.push(violate(
                            ViolationKind::Structure,
                            format!("activity {}", step.activity),
                            0.0,
                            "static step must select a location of the activity and a mode of the robot".into(),
                        ));
                        ok = false;
                        break;
                    }
                    exec.loc[s] = loc;
                    exec.mode[s] = mode;
                    circuit.push(s);
                }
                (1, ActivityRef::Dynamic(d)) if cell.dynamics[d].robot == ri => {
                    let traj = step.trajectory.as_deref().and_then(|tid| {
                        cell.dynamics[d]
                            .trajectories
                            .iter()
                            .copied()
                            .find(|&t| cell.trajectories[t].id == tid)
                    });
                    let Some(traj) = traj else {
                        report.violations.push(violate(
                            ViolationKind::Structure,
                            format!("activity {}", step.activity),
                            0.0,
                            "dynamic step must select a trajectory of the activity".into(),
                        ));
                        ok = false;
                        break;
                    };
                    exec.traj[d] = Some(traj);
                    edges.push(d);
                }
                _ => {
                    report.violations.push(violate(
                        ViolationKind::Structure,
                        format!("activity {}", step.activity),
                        0.0,
                        "steps must alternate static/dynamic activities of the robot".into(),
                    ));
                    ok = false;
                    break;
                }
            }
        }
        if !ok {
            continue;
        }

        // Hamiltonian circuit over the robot's statics, ending at home
        let mut seen = vec![false; n];
        for &s in &circuit {
            let local = robot.statics.iter().position(|&x| x == s).unwrap();
            if seen[local] {
                report.violations.push(violate(
                    ViolationKind::Structure,
                    format!("robot {}", sel.robot),
                    0.0,
                    format!("static activity {} visited twice", cell.statics[s].id),
                ));
            }
            seen[local] = true;
        }
        if seen.iter().any(|&s| !s) {
            report.violations.push(violate(
                ViolationKind::Structure,
                format!("robot {}", sel.robot),
                0.0,
                "circuit does not visit every static activity".into(),
            ));
            continue;
        }
        if *circuit.last().unwrap() != robot.home {
            report.violations.push(violate(
                ViolationKind::Structure,
                format!("robot {}", sel.robot),
                0.0,
                "circuit must end at the home activity".into(),
            ));
        }
        // edges connect consecutive statics; the last edge closes the cycle
        for (k, &d) in edges.iter().enumerate() {
            let from = circuit[k];
            let to = circuit[(k + 1) % n];
            let info = &cell.dynamics[d];
            if info.from != from || info.to != to {
                report.violations.push(violate(
                    ViolationKind::Structure,
                    format!("activity {}", info.id),
                    0.0,
                    format!(
                        "movement does not connect {} -> {}",
                        cell.statics[from].id, cell.statics[to].id
                    ),
                ));
            }
            if let Some(t) = exec.traj[d] {
                let tinfo = &cell.trajectories[t];
                let from_loc = exec.loc[from];
                let to_loc = exec.loc[to];
                if from_loc != Some(tinfo.from_loc) || to_loc != Some(tinfo.to_loc) {
                    report.violations.push(violate(
                        ViolationKind::Structure,
                        format!("trajectory {} of {}", tinfo.id, info.id),
                        0.0,
                        "trajectory endpoints do not match the chosen locations".into(),
                    ));
                }
            }
        }
    }
    if !report.violations.is_empty() {
        // timing checks below assume a structurally complete solution
        return report;
    }

    let lookup = |map: &BTreeMap<String, f64>, id: &str| map.get(id).copied();
    let mut executed_ids: Vec<&str> = Vec::new();
    for (s, loc) in exec.loc.iter().enumerate() {
        if loc.is_some() {
            executed_ids.push(&cell.statics[s].id);
        }
    }
    for (d, traj) in exec.traj.iter().enumerate() {
        if traj.is_some() {
            executed_ids.push(&cell.dynamics[d].id);
        }
    }
    for id in &executed_ids {
        for (map, name) in [
            (&solution.start, "start"),
            (&solution.duration, "duration"),
            (&solution.energy, "energy"),
        ] {
            if lookup(map, id).is_none() {
                report.violations.push(SolutionViolation {
                    kind: ViolationKind::Structure,
                    entity: format!("activity {id}"),
                    slack: 0.0,
                    detail: format!("missing {name} entry"),
                });
            }
        }
    }
    if !report.violations.is_empty() {
        return report;
    }

    let s_of = |aref: ActivityRef| lookup(&solution.start, cell.act_id(aref)).unwrap();
    let d_of = |aref: ActivityRef| lookup(&solution.duration, cell.act_id(aref)).unwrap();

    // duration windows, chain consistency and cycle time per robot
    for (ri, sel) in solution.robots.iter().enumerate() {
        let robot = &cell.robots[ri];
        let mut total = 0.0;
        for step in &sel.steps {
            let aref = cell.activity(&step.activity).unwrap();
            let d = d_of(aref);
            total += d;
            match aref {
                ActivityRef::Static(s) => {
                    let info = &cell.statics[s];
                    let mode = exec.mode[s].unwrap();
                    let dmin = cell.static_mode_min_duration(s, mode);
                    if d < dmin - FEAS_TOL {
                        report.violations.push(SolutionViolation {
                            kind: ViolationKind::DurationWindow,
                            entity: format!("activity {}", info.id),
                            slack: d - dmin,
                            detail: format!(
                                "duration {d} below minimum {dmin} (incl. mode switch time)"
                            ),
                        });
                    }
                    if d > info.d_max + FEAS_TOL {
                        report.violations.push(SolutionViolation {
                            kind: ViolationKind::DurationWindow,
                            entity: format!("activity {}", info.id),
                            slack: info.d_max - d,
                            detail: format!("duration {d} above maximum {}", info.d_max),
                        });
                    }
                }
                ActivityRef::Dynamic(dy) => {
                    let t = exec.traj[dy].unwrap();
                    let tinfo = &cell.trajectories[t];
                    if d < tinfo.d_min - FEAS_TOL || d > tinfo.d_max + FEAS_TOL {
                        report.violations.push(SolutionViolation {
                            kind: ViolationKind::DurationWindow,
                            entity: format!("activity {}", cell.dynamics[dy].id),
                            slack: (d - tinfo.d_min).min(tinfo.d_max - d),
                            detail: format!(
                                "duration {d} outside trajectory window [{}, {}]",
                                tinfo.d_min, tinfo.d_max
                            ),
                        });
                    }
                }
            }
        }
        if (total - ct).abs() > FEAS_TOL {
            report.violations.push(SolutionViolation {
                kind: ViolationKind::CycleTime,
                entity: format!("robot {}", sel.robot),
                slack: ct - total,
                detail: format!("circuit duration {total} does not equal cycle time {ct}"),
            });
        }

        // back-to-back chain; the closing movement starts one cycle earlier
        let steps = &sel.steps;
        let m = steps.len();
        for k in 0..m {
            let cur = cell.activity(&steps[k].activity).unwrap();
            let next = cell.activity(&steps[(k + 1) % m].activity).unwrap();
            let expected = if matches!(cur, ActivityRef::Static(s) if s == robot.home) {
                s_of(cur) + d_of(cur) - ct
            } else {
                s_of(cur) + d_of(cur)
            };
            let actual = s_of(next);
            if (actual - expected).abs() > FEAS_TOL {
                report.violations.push(SolutionViolation {
                    kind: ViolationKind::Chain,
                    entity: format!("activity {}", cell.act_id(next)),
                    slack: actual - expected,
                    detail: format!(
                        "start {actual} does not follow the end of {} (expected {expected})",
                        cell.act_id(cur)
                    ),
                });
            }
        }
    }

    // time lags (vacuous when an endpoint is not executed)
    for (i, lag) in cell.lags.iter().enumerate() {
        let executed = |aref: ActivityRef| match aref {
            ActivityRef::Static(_) => true,
            ActivityRef::Dynamic(d) => exec.traj[d].is_some(),
        };
        if !executed(lag.from) || !executed(lag.to) {
            continue;
        }
        let lhs = s_of(lag.to);
        let rhs = s_of(lag.from) + lag.length - ct * lag.height as f64;
        if lhs < rhs - FEAS_TOL {
            report.violations.push(SolutionViolation {
                kind: ViolationKind::TimeLag,
                entity: format!("time lag #{i}"),
                slack: lhs - rhs,
                detail: format!(
                    "s({}) = {lhs} < s({}) + {} - CT*{} = {rhs}",
                    cell.act_id(lag.to),
                    cell.act_id(lag.from),
                    lag.length,
                    lag.height
                ),
            });
        }
    }

    // spatial compatibility
    for (i, pair) in cell.compat.iter().enumerate() {
        let la = exec.loc[pair.a].unwrap();
        let lb = exec.loc[pair.b].unwrap();
        if !pair.pairs.contains(&(la, lb)) {
            report.violations.push(SolutionViolation {
                kind: ViolationKind::SpatialCompat,
                entity: format!("compat pair #{i}"),
                slack: 0.0,
                detail: format!(
                    "chosen locations ({}, {}) are not compatible",
                    cell.locations[la].id, cell.locations[lb].id
                ),
            });
        }
    }

    // collisions: intervals must be disjoint for every cycle shift
    let r = cell.robots.len() as i64;
    for (i, quad) in cell.collisions.iter().enumerate() {
        let selected = |aref: ActivityRef, item: ItemRef| match (aref, item) {
            (ActivityRef::Static(s), ItemRef::Loc(l)) => exec.loc[s] == Some(l),
            (ActivityRef::Dynamic(d), ItemRef::Traj(t)) => exec.traj[d] == Some(t),
            _ => false,
        };
        if !selected(quad.a1, quad.item1) || !selected(quad.a2, quad.item2) {
            continue;
        }
        let (s1, d1) = (s_of(quad.a1), d_of(quad.a1));
        let (s2, d2) = (s_of(quad.a2), d_of(quad.a2));
        for n in -r..=r {
            let shift = n as f64 * ct;
            let upsilon = s1 + d1 - s2 - shift;
            let mu = s2 + d2 + shift - s1;
            let overlap = upsilon.min(mu);
            if overlap > FEAS_TOL {
                report.violations.push(SolutionViolation {
                    kind: ViolationKind::Collision,
                    entity: format!("collision #{i}"),
                    slack: -overlap,
                    detail: format!(
                        "{} and {} overlap by {overlap} at cycle shift n = {n}",
                        cell.act_id(quad.a1),
                        cell.act_id(quad.a2)
                    ),
                });
            }
        }
    }

    // reported energies must match the exact model
    let mut total = 0.0;
    for (s, loc) in exec.loc.iter().enumerate() {
        let (Some(loc), Some(mode)) = (*loc, exec.mode[s]) else {
            continue;
        };
        let id = &cell.statics[s].id;
        let expected = cell.loc_power(loc, mode) * lookup(&solution.duration, id).unwrap();
        let reported = lookup(&solution.energy, id).unwrap();
        total += reported;
        if (reported - expected).abs() > ENERGY_REL_TOL * expected.abs().max(1.0) {
            report.violations.push(SolutionViolation {
                kind: ViolationKind::Energy,
                entity: format!("activity {id}"),
                slack: reported - expected,
                detail: format!("reported energy {reported} != p*d = {expected}"),
            });
        }
    }
    for (dy, traj) in exec.traj.iter().enumerate() {
        let Some(t) = *traj else { continue };
        let id = &cell.dynamics[dy].id;
        let d = lookup(&solution.duration, id).unwrap();
        let reported = lookup(&solution.energy, id).unwrap();
        total += reported;
        match cell.trajectories[t].energy.eval(d) {
            Ok(expected) => {
                if (reported - expected).abs() > ENERGY_REL_TOL * expected.abs().max(1.0) {
                    report.violations.push(SolutionViolation {
                        kind: ViolationKind::Energy,
                        entity: format!("activity {id}"),
                        slack: reported - expected,
                        detail: format!("reported energy {reported} != f(d) = {expected}"),
                    });
                }
            }
            Err(_) => report.violations.push(SolutionViolation {
                kind: ViolationKind::Energy,
                entity: format!("activity {id}"),
                slack: 0.0,
                detail: format!("energy undefined at duration {d}"),
            }),
        }
    }
    if (solution.total_energy - total).abs() > ENERGY_REL_TOL * total.abs().max(1.0) {
        report.violations.push(SolutionViolation {
            kind: ViolationKind::Energy,
            entity: "solution".into(),
            slack: solution.total_energy - total,
            detail: format!(
                "total_energy {} != sum of reported energies {total}",
                solution.total_energy
            ),
        });
    }

    report
}
