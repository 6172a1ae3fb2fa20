//! Validated, index-resolved view of an [`Instance`].
//!
//! All optimization code works on a [`Cell`]: string ids are resolved once
//! into dense indices (global static/dynamic activity, location, trajectory
//! and per-robot mode tables), and cross-reference tables (adjacency, compat
//! partner sets, collision quadruplets) are precomputed. A `Cell` is immutable
//! and can be shared read-only across worker threads.

use super::validate::{validate_instance, Violation};
use super::{EnergyFunction, Instance};
use std::collections::HashMap;
use std::fmt;

/// Index-resolved reference to an activity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ActivityRef {
    /// Global static activity index.
    Static(usize),
    /// Global dynamic activity index.
    Dynamic(usize),
}

/// Kind of an activity.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ActKind {
    Static,
    Dynamic,
}

/// Index-resolved collision item: a location (static side) or a trajectory
/// (dynamic side).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ItemRef {
    Loc(usize),
    Traj(usize),
}

#[derive(Debug)]
pub struct StaticInfo {
    pub id: String,
    pub robot: usize,
    pub d_min: f64,
    pub d_max: f64,
    /// Global location indices.
    pub locations: Vec<usize>,
    /// Global dynamic indices leaving / entering this activity.
    pub out_edges: Vec<usize>,
    pub in_edges: Vec<usize>,
    pub is_home: bool,
}

#[derive(Debug)]
pub struct DynInfo {
    pub id: String,
    pub robot: usize,
    /// Global static indices of the endpoints.
    pub from: usize,
    pub to: usize,
    pub optional: bool,
    /// Global trajectory indices.
    pub trajectories: Vec<usize>,
}

#[derive(Debug)]
pub struct LocInfo {
    pub id: String,
    /// Owning global static index.
    pub owner: usize,
    /// Input power in watts per robot-local mode index.
    pub power: Vec<f64>,
}

#[derive(Debug)]
pub struct TrajInfo {
    pub id: String,
    /// Owning global dynamic index.
    pub owner: usize,
    pub from_loc: usize,
    pub to_loc: usize,
    pub d_min: f64,
    pub d_max: f64,
    pub energy: EnergyFunction,
}

#[derive(Debug)]
pub struct ModeInfo {
    pub id: String,
    pub min_switch_time: f64,
}

#[derive(Debug)]
pub struct RobotInfo {
    pub id: String,
    /// Global static index of the home activity.
    pub home: usize,
    pub statics: Vec<usize>,
    pub dynamics: Vec<usize>,
    pub modes: Vec<ModeInfo>,
    /// Robot-local index of the fastest power mode (minimal switch time,
    /// ties broken by declaration order).
    pub fastest_mode: usize,
}

#[derive(Debug)]
pub struct LagRef {
    pub from: ActivityRef,
    pub to: ActivityRef,
    pub length: f64,
    pub height: i64,
}

#[derive(Debug)]
pub struct CompatRef {
    /// Global static indices of the handover pair.
    pub a: usize,
    pub b: usize,
    /// Compatible `(location of a, location of b)` pairs, global indices.
    pub pairs: Vec<(usize, usize)>,
}

#[derive(Debug)]
pub struct QuadRef {
    pub a1: ActivityRef,
    pub item1: ItemRef,
    pub a2: ActivityRef,
    pub item2: ItemRef,
}

/// Error returned when constructing a [`Cell`] from an invalid instance.
#[derive(Debug)]
pub struct InvalidInstance(pub Vec<Violation>);

impl fmt::Display for InvalidInstance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "instance validation failed ({} violations):", self.0.len())?;
        for v in &self.0 {
            writeln!(f, "  - {v}")?;
        }
        Ok(())
    }
}

impl std::error::Error for InvalidInstance {}

/// Validated instance with resolved indices.
#[derive(Debug)]
pub struct Cell {
    instance: Instance,
    pub statics: Vec<StaticInfo>,
    pub dynamics: Vec<DynInfo>,
    pub locations: Vec<LocInfo>,
    pub trajectories: Vec<TrajInfo>,
    pub robots: Vec<RobotInfo>,
    pub lags: Vec<LagRef>,
    pub compat: Vec<CompatRef>,
    pub collisions: Vec<QuadRef>,
    act_by_id: HashMap<String, ActivityRef>,
    /// `(from static, to static) -> dynamic` lookup.
    edge_by_pair: HashMap<(usize, usize), usize>,
}

impl Cell {
    /// Validates the instance and builds the indexed view.
    pub fn new(instance: Instance) -> Result<Cell, InvalidInstance> {
        let violations = validate_instance(&instance);
        if !violations.is_empty() {
            return Err(InvalidInstance(violations));
        }

        let mut statics = Vec::new();
        let mut dynamics = Vec::new();
        let mut locations = Vec::new();
        let mut trajectories = Vec::new();
        let mut robots = Vec::new();
        let mut act_by_id = HashMap::new();
        let mut loc_by_id: HashMap<(usize, String), usize> = HashMap::new();
        let mut traj_by_id: HashMap<(usize, String), usize> = HashMap::new();

        for (ri, robot) in instance.robots.iter().enumerate() {
            let mut robot_statics = Vec::new();
            for s in &robot.static_activities {
                let sid = statics.len();
                let mut locs = Vec::new();
                for l in &s.locations {
                    let lid = locations.len();
                    let power = robot
                        .modes
                        .iter()
                        .map(|m| l.power[&m.id])
                        .collect::<Vec<_>>();
                    locations.push(LocInfo {
                        id: l.id.clone(),
                        owner: sid,
                        power,
                    });
                    loc_by_id.insert((sid, l.id.clone()), lid);
                    locs.push(lid);
                }
                statics.push(StaticInfo {
                    id: s.id.clone(),
                    robot: ri,
                    d_min: s.d_min,
                    d_max: s.d_max,
                    locations: locs,
                    out_edges: Vec::new(),
                    in_edges: Vec::new(),
                    is_home: s.id == robot.home,
                });
                act_by_id.insert(s.id.clone(), ActivityRef::Static(sid));
                robot_statics.push(sid);
            }
            let mut robot_dynamics = Vec::new();
            for e in &robot.dynamic_activities {
                let did = dynamics.len();
                let from = match act_by_id[&e.from] {
                    ActivityRef::Static(i) => i,
                    _ => unreachable!(),
                };
                let to = match act_by_id[&e.to] {
                    ActivityRef::Static(i) => i,
                    _ => unreachable!(),
                };
                let mut trajs = Vec::new();
                for t in &e.trajectories {
                    let tid = trajectories.len();
                    trajectories.push(TrajInfo {
                        id: t.id.clone(),
                        owner: did,
                        from_loc: loc_by_id[&(from, t.from_loc.clone())],
                        to_loc: loc_by_id[&(to, t.to_loc.clone())],
                        d_min: t.d_min,
                        d_max: t.d_max,
                        energy: t.energy,
                    });
                    traj_by_id.insert((did, t.id.clone()), tid);
                    trajs.push(tid);
                }
                dynamics.push(DynInfo {
                    id: e.id.clone(),
                    robot: ri,
                    from,
                    to,
                    optional: e.optional,
                    trajectories: trajs,
                });
                statics[from].out_edges.push(did);
                statics[to].in_edges.push(did);
                act_by_id.insert(e.id.clone(), ActivityRef::Dynamic(did));
                robot_dynamics.push(did);
            }
            let home = match act_by_id[&robot.home] {
                ActivityRef::Static(i) => i,
                _ => unreachable!(),
            };
            let fastest_mode = robot
                .modes
                .iter()
                .enumerate()
                .min_by(|(_, a), (_, b)| a.min_switch_time.total_cmp(&b.min_switch_time))
                .map(|(i, _)| i)
                .unwrap_or(0);
            robots.push(RobotInfo {
                id: robot.id.clone(),
                home,
                statics: robot_statics,
                dynamics: robot_dynamics,
                modes: robot
                    .modes
                    .iter()
                    .map(|m| ModeInfo {
                        id: m.id.clone(),
                        min_switch_time: m.min_switch_time,
                    })
                    .collect(),
                fastest_mode,
            });
        }

        let lags = instance
            .time_lags
            .iter()
            .map(|lag| LagRef {
                from: act_by_id[&lag.from],
                to: act_by_id[&lag.to],
                length: lag.length,
                height: lag.height,
            })
            .collect();

        let compat = instance
            .compat
            .iter()
            .map(|pair| {
                let a = match act_by_id[&pair.activity_1] {
                    ActivityRef::Static(i) => i,
                    _ => unreachable!(),
                };
                let b = match act_by_id[&pair.activity_2] {
                    ActivityRef::Static(i) => i,
                    _ => unreachable!(),
                };
                let pairs = pair
                    .pairs
                    .iter()
                    .map(|(l1, l2)| {
                        (
                            loc_by_id[&(a, l1.clone())],
                            loc_by_id[&(b, l2.clone())],
                        )
                    })
                    .collect();
                CompatRef { a, b, pairs }
            })
            .collect();

        let collisions = instance
            .collisions
            .iter()
            .map(|quad| {
                let resolve = |act: &str, item: &str| {
                    let aref = act_by_id[act];
                    let item = match aref {
                        ActivityRef::Static(s) => ItemRef::Loc(loc_by_id[&(s, item.to_owned())]),
                        ActivityRef::Dynamic(d) => ItemRef::Traj(traj_by_id[&(d, item.to_owned())]),
                    };
                    (aref, item)
                };
                let (a1, item1) = resolve(&quad.activity_1, &quad.item_1);
                let (a2, item2) = resolve(&quad.activity_2, &quad.item_2);
                QuadRef { a1, item1, a2, item2 }
            })
            .collect();

        let edge_by_pair = dynamics
            .iter()
            .enumerate()
            .map(|(i, d)| ((d.from, d.to), i))
            .collect();

        Ok(Cell {
            instance,
            statics,
            dynamics,
            locations,
            trajectories,
            robots,
            lags,
            compat,
            collisions,
            act_by_id,
            edge_by_pair,
        })
    }

    pub fn instance(&self) -> &Instance {
        &self.instance
    }

    pub fn cycle_time(&self) -> f64 {
        self.instance.cycle_time
    }

    pub fn robot_count(&self) -> usize {
        self.robots.len()
    }

    pub fn activity(&self, id: &str) -> Option<ActivityRef> {
        self.act_by_id.get(id).copied()
    }

    pub fn act_id(&self, a: ActivityRef) -> &str {
        match a {
            ActivityRef::Static(i) => &self.statics[i].id,
            ActivityRef::Dynamic(i) => &self.dynamics[i].id,
        }
    }

    pub fn act_robot(&self, a: ActivityRef) -> usize {
        match a {
            ActivityRef::Static(i) => self.statics[i].robot,
            ActivityRef::Dynamic(i) => self.dynamics[i].robot,
        }
    }

    /// The dynamic activity from one static to another, if the movement exists.
    pub fn edge_between(&self, from: usize, to: usize) -> Option<usize> {
        self.edge_by_pair.get(&(from, to)).copied()
    }

    /// Minimal stationary duration of a static activity under its robot's
    /// fastest mode: `max(d_min, min over modes of min_switch_time)`.
    pub fn static_min_duration(&self, s: usize) -> f64 {
        let info = &self.statics[s];
        let robot = &self.robots[info.robot];
        info.d_min
            .max(robot.modes[robot.fastest_mode].min_switch_time)
    }

    /// Minimal stationary duration under a specific mode:
    /// `max(d_min, min_switch_time of the mode)`.
    pub fn static_mode_min_duration(&self, s: usize, mode: usize) -> f64 {
        let info = &self.statics[s];
        info.d_min
            .max(self.robots[info.robot].modes[mode].min_switch_time)
    }

    /// Minimal duration of a dynamic activity over all its trajectories.
    pub fn dynamic_min_duration(&self, d: usize) -> f64 {
        self.dynamics[d]
            .trajectories
            .iter()
            .map(|&t| self.trajectories[t].d_min)
            .fold(f64::INFINITY, f64::min)
    }

    /// Fastest trajectory of edge `d` connecting the given location pair,
    /// ties broken by declaration order.
    pub fn fastest_traj_between(&self, d: usize, from_loc: usize, to_loc: usize) -> Option<usize> {
        self.dynamics[d]
            .trajectories
            .iter()
            .copied()
            .filter(|&t| {
                self.trajectories[t].from_loc == from_loc && self.trajectories[t].to_loc == to_loc
            })
            .min_by(|&x, &y| self.trajectories[x].d_min.total_cmp(&self.trajectories[y].d_min))
    }

    /// All trajectories of edge `d` connecting the given location pair.
    pub fn trajs_between(&self, d: usize, from_loc: usize, to_loc: usize) -> Vec<usize> {
        self.dynamics[d]
            .trajectories
            .iter()
            .copied()
            .filter(|&t| {
                self.trajectories[t].from_loc == from_loc && self.trajectories[t].to_loc == to_loc
            })
            .collect()
    }

    /// Input power of a location under a robot-local mode index.
    pub fn loc_power(&self, loc: usize, mode: usize) -> f64 {
        self.locations[loc].power[mode]
    }

    /// Lowest input power over the robot's modes at a location.
    pub fn min_loc_power(&self, loc: usize) -> f64 {
        self.locations[loc]
            .power
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }

    /// Compat pairs that involve a given static activity.
    pub fn compat_involving(&self, s: usize) -> impl Iterator<Item = &CompatRef> {
        self.compat.iter().filter(move |c| c.a == s || c.b == s)
    }
}
