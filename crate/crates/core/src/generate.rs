//! Seeded random instance generator.
//!
//! Instances are built around a feasibility witness: every robot gets a base
//! circuit whose fastest location refinement defines a reference schedule,
//! the cycle time is that schedule's longest robot duration times a slack
//! factor, and all global constraints (time lags, compatible location pairs,
//! collision quadruplets) are derived so the reference schedule satisfies
//! them. Generation is a pure function of the configuration, so equal seeds
//! produce byte-identical files.

use crate::graph::fastest_location_sequence;
use crate::model::{
    Cell, CollisionQuad, DynamicActivity, EnergyFunction, Instance, Location, PowerMode, Robot,
    SpatialCompatPair, StaticActivity, TimeLag, Trajectory, INSTANCE_FORMAT,
};
use crate::rng::SplitMix64;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

/// Inclusive integer range.
pub type Range = (usize, usize);

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorConfig {
    pub seed: u64,
    pub robot_count: usize,
    pub activities_per_robot: Range,
    pub locations_per_activity: Range,
    pub trajectories_per_edge: Range,
    pub optional_edge_probability: f64,
    pub modes_per_robot: Range,
    pub time_lag_count: usize,
    pub compat_pair_count: usize,
    pub collision_count: usize,
    /// Ratio of the cycle time to the longest fastest base-circuit duration;
    /// 1.0 leaves no slack, so only maximal-speed schedules are feasible.
    pub cycle_time_slack_factor: f64,
    /// Sampling range per energy coefficient C1..C5.
    pub energy_coeff_ranges: [(f64, f64); 5],
}

#[derive(Debug, Error)]
pub enum GenError {
    #[error("invalid generator config: {0}")]
    Config(String),
    #[error("could not sample a convex nonnegative energy function from the configured ranges")]
    EnergyRanges,
}

impl GeneratorConfig {
    /// Baseline coefficient ranges: all nonnegative, so every sampled energy
    /// function is convex and nonnegative by construction.
    pub const DEFAULT_COEFF_RANGES: [(f64, f64); 5] = [
        (5.0, 60.0),
        (0.0, 30.0),
        (30.0, 250.0),
        (0.0, 60.0),
        (0.0, 15.0),
    ];

    /// Two tiny robots; small enough for the exhaustive oracle.
    pub fn tiny(seed: u64) -> Self {
        GeneratorConfig {
            seed,
            robot_count: 2,
            activities_per_robot: (3, 4),
            locations_per_activity: (1, 2),
            trajectories_per_edge: (1, 2),
            optional_edge_probability: 0.5,
            modes_per_robot: (2, 2),
            time_lag_count: 2,
            compat_pair_count: 1,
            collision_count: 1,
            cycle_time_slack_factor: 1.4,
            energy_coeff_ranges: Self::DEFAULT_COEFF_RANGES,
        }
    }

    /// Small data set scale: 5 robots.
    pub fn s5(seed: u64) -> Self {
        GeneratorConfig {
            seed,
            robot_count: 5,
            activities_per_robot: (4, 6),
            locations_per_activity: (1, 3),
            trajectories_per_edge: (1, 2),
            optional_edge_probability: 0.4,
            modes_per_robot: (2, 3),
            time_lag_count: 4,
            compat_pair_count: 2,
            collision_count: 3,
            cycle_time_slack_factor: 1.3,
            energy_coeff_ranges: Self::DEFAULT_COEFF_RANGES,
        }
    }

    /// Medium data set scale: 8 robots.
    pub fn m8(seed: u64) -> Self {
        GeneratorConfig {
            seed,
            robot_count: 8,
            activities_per_robot: (5, 7),
            locations_per_activity: (1, 3),
            trajectories_per_edge: (1, 2),
            optional_edge_probability: 0.35,
            modes_per_robot: (2, 3),
            time_lag_count: 6,
            compat_pair_count: 3,
            collision_count: 4,
            cycle_time_slack_factor: 1.3,
            energy_coeff_ranges: Self::DEFAULT_COEFF_RANGES,
        }
    }

    /// Large data set scale: 12 robots.
    pub fn l12(seed: u64) -> Self {
        GeneratorConfig {
            seed,
            robot_count: 12,
            activities_per_robot: (5, 8),
            locations_per_activity: (1, 3),
            trajectories_per_edge: (1, 2),
            optional_edge_probability: 0.3,
            modes_per_robot: (2, 3),
            time_lag_count: 8,
            compat_pair_count: 4,
            collision_count: 6,
            cycle_time_slack_factor: 1.3,
            energy_coeff_ranges: Self::DEFAULT_COEFF_RANGES,
        }
    }

    pub fn preset(name: &str, seed: u64) -> Option<Self> {
        match name {
            "tiny" => Some(Self::tiny(seed)),
            "s5" => Some(Self::s5(seed)),
            "m8" => Some(Self::m8(seed)),
            "l12" => Some(Self::l12(seed)),
            _ => None,
        }
    }

    fn validate(&self) -> Result<(), GenError> {
        let check_range = |name: &str, (lo, hi): Range, min: usize| {
            if lo > hi {
                Err(GenError::Config(format!("{name} range [{lo}, {hi}] is empty")))
            } else if lo < min {
                Err(GenError::Config(format!("{name} must be at least {min}")))
            } else {
                Ok(())
            }
        };
        if self.robot_count == 0 {
            return Err(GenError::Config("robot_count must be positive".into()));
        }
        check_range("activities_per_robot", self.activities_per_robot, 2)?;
        check_range("locations_per_activity", self.locations_per_activity, 1)?;
        check_range("trajectories_per_edge", self.trajectories_per_edge, 1)?;
        check_range("modes_per_robot", self.modes_per_robot, 1)?;
        if !(0.0..=1.0).contains(&self.optional_edge_probability) {
            return Err(GenError::Config(
                "optional_edge_probability must be within [0, 1]".into(),
            ));
        }
        if self.cycle_time_slack_factor < 1.0 {
            return Err(GenError::Config(
                "cycle_time_slack_factor must be at least 1.0".into(),
            ));
        }
        for (i, &(lo, hi)) in self.energy_coeff_ranges.iter().enumerate() {
            if lo > hi || !lo.is_finite() || !hi.is_finite() {
                return Err(GenError::Config(format!("energy coefficient range C{} is invalid", i + 1)));
            }
        }
        if self.activities_per_robot.1 > 62 {
            return Err(GenError::Config(
                "activities_per_robot beyond 62 is not supported by the circuit search".into(),
            ));
        }
        Ok(())
    }
}

fn sample_energy(
    rng: &mut SplitMix64,
    ranges: &[(f64, f64); 5],
    d_min: f64,
    d_max: f64,
) -> Result<EnergyFunction, GenError> {
    for _ in 0..64 {
        let coeffs = [
            rng.next_range_f64(ranges[0].0, ranges[0].1),
            rng.next_range_f64(ranges[1].0, ranges[1].1),
            rng.next_range_f64(ranges[2].0, ranges[2].1),
            rng.next_range_f64(ranges[3].0, ranges[3].1),
            rng.next_range_f64(ranges[4].0, ranges[4].1),
        ];
        let f = EnergyFunction::new(coeffs);
        if f.is_convex_on(d_min, d_max) && f.is_nonnegative_on(d_min, d_max) {
            return Ok(f);
        }
    }
    Err(GenError::EnergyRanges)
}

/// Generates a validated instance. Same config, same bytes.
pub fn generate_instance(config: &GeneratorConfig) -> Result<Instance, GenError> {
    config.validate()?;
    let mut rng = SplitMix64::new(config.seed);

    let mut robots = Vec::with_capacity(config.robot_count);
    for r in 0..config.robot_count {
        robots.push(gen_robot(config, &mut rng, r)?);
    }

    // provisional instance to compute fastest base-circuit durations
    let draft = Instance {
        format: INSTANCE_FORMAT.to_owned(),
        cycle_time: 1.0,
        robots: robots.clone(),
        time_lags: Vec::new(),
        compat: Vec::new(),
        collisions: Vec::new(),
    };
    let cell = Cell::new(draft).expect("generated draft must validate");

    // base circuit of robot r: statics in declaration order, home last
    let base_circuit = |r: usize| -> Vec<usize> {
        let info = &cell.robots[r];
        let mut c: Vec<usize> = info.statics[1..].to_vec();
        c.push(info.home);
        c
    };

    let mut fastest = Vec::with_capacity(config.robot_count);
    for r in 0..config.robot_count {
        let path = fastest_location_sequence(&cell, &base_circuit(r), f64::INFINITY)
            .expect("base circuit is connected by construction");
        fastest.push(path);
    }
    let longest = fastest
        .iter()
        .map(|p| p.duration)
        .fold(0.0_f64, f64::max);
    let ct = longest * config.cycle_time_slack_factor;

    // widen each home window so idle time can be absorbed there
    for robot in &mut robots {
        let home_id = robot.home.clone();
        let home = robot
            .static_activities
            .iter_mut()
            .find(|s| s.id == home_id)
            .unwrap();
        home.d_max = home.d_max.max(home.d_min + ct);
    }

    // reference schedule: every robot runs its base circuit at fastest
    // durations, idling the remainder of the cycle at home; robots start
    // staggered across the cycle
    let mut ref_start: BTreeMap<String, f64> = BTreeMap::new();
    let mut ref_duration: BTreeMap<String, f64> = BTreeMap::new();
    let mut ref_item: BTreeMap<String, String> = BTreeMap::new();
    for r in 0..config.robot_count {
        let circuit = base_circuit(r);
        let path = &fastest[r];
        let phase = ct * r as f64 / config.robot_count as f64
            + rng.next_range_f64(0.0, 0.05 * ct);
        let n = circuit.len();
        let mut t = phase;
        for i in 0..n {
            let s = circuit[i];
            let is_home = i == n - 1;
            let d = if is_home {
                cell.static_min_duration(s) + (ct - path.duration)
            } else {
                cell.static_min_duration(s)
            };
            ref_start.insert(cell.statics[s].id.clone(), t);
            ref_duration.insert(cell.statics[s].id.clone(), d);
            ref_item.insert(
                cell.statics[s].id.clone(),
                cell.locations[path.locations[i]].id.clone(),
            );
            t += d;
            if i + 1 < n {
                let e = cell
                    .edge_between(circuit[i], circuit[i + 1])
                    .expect("base edge exists");
                let traj = path.trajectories[i];
                let d = cell.trajectories[traj].d_min;
                ref_start.insert(cell.dynamics[e].id.clone(), t);
                ref_duration.insert(cell.dynamics[e].id.clone(), d);
                ref_item.insert(cell.dynamics[e].id.clone(), cell.trajectories[traj].id.clone());
                t += d;
            }
        }
        // closing movement home -> first activity belongs to the next cycle
        let e = cell
            .edge_between(circuit[n - 1], circuit[0])
            .expect("closing edge exists");
        let traj = path.trajectories[n - 1];
        ref_start.insert(cell.dynamics[e].id.clone(), t);
        ref_duration.insert(cell.dynamics[e].id.clone(), cell.trajectories[traj].d_min);
        ref_item.insert(cell.dynamics[e].id.clone(), cell.trajectories[traj].id.clone());
    }

    // executed activities per robot in the reference, for constraint sampling
    let executed: Vec<Vec<String>> = (0..config.robot_count)
        .map(|r| {
            let circuit = base_circuit(r);
            let n = circuit.len();
            let mut ids = Vec::new();
            for i in 0..n {
                ids.push(cell.statics[circuit[i]].id.clone());
                let e = cell.edge_between(circuit[i], circuit[(i + 1) % n]).unwrap();
                ids.push(cell.dynamics[e].id.clone());
            }
            ids
        })
        .collect();
    let statics_of: Vec<Vec<String>> = (0..config.robot_count)
        .map(|r| {
            cell.robots[r]
                .statics
                .iter()
                .map(|&s| cell.statics[s].id.clone())
                .collect()
        })
        .collect();

    // time lags between static activities of different robots, satisfied by
    // the reference schedule with a margin
    let mut time_lags = Vec::new();
    if config.robot_count >= 2 {
        for _ in 0..config.time_lag_count {
            let r1 = rng.next_below(config.robot_count);
            let mut r2 = rng.next_below(config.robot_count - 1);
            if r2 >= r1 {
                r2 += 1;
            }
            let a1 = rng.pick(&statics_of[r1]).clone();
            let a2 = rng.pick(&statics_of[r2]).clone();
            let delta = ref_start[&a2] - ref_start[&a1];
            let height = rng.next_below(2) as i64;
            let margin = rng.next_range_f64(0.05, 0.25) * ct;
            time_lags.push(TimeLag {
                from: a1,
                to: a2,
                length: delta + ct * height as f64 - margin,
                height,
            });
        }
    }

    // compatible location pairs always include the reference pairing
    let mut compat: Vec<SpatialCompatPair> = Vec::new();
    if config.robot_count >= 2 {
        let mut attempts = 0;
        while compat.len() < config.compat_pair_count && attempts < 20 * (config.compat_pair_count + 1)
        {
            attempts += 1;
            let r1 = rng.next_below(config.robot_count);
            let mut r2 = rng.next_below(config.robot_count - 1);
            if r2 >= r1 {
                r2 += 1;
            }
            let v1 = rng.pick(&statics_of[r1]).clone();
            let v2 = rng.pick(&statics_of[r2]).clone();
            if compat
                .iter()
                .any(|c| c.activity_1 == v1 && c.activity_2 == v2)
            {
                continue;
            }
            let locs = |rid: usize, act: &str| -> Vec<String> {
                robots[rid]
                    .static_activities
                    .iter()
                    .find(|s| s.id == act)
                    .unwrap()
                    .locations
                    .iter()
                    .map(|l| l.id.clone())
                    .collect()
            };
            let l1s = locs(r1, &v1);
            let l2s = locs(r2, &v2);
            let ref_pair = (ref_item[&v1].clone(), ref_item[&v2].clone());
            let mut pairs = vec![ref_pair.clone()];
            for l1 in &l1s {
                for l2 in &l2s {
                    let cand = (l1.clone(), l2.clone());
                    if cand != ref_pair && rng.next_bool(0.4) {
                        pairs.push(cand);
                    }
                }
            }
            compat.push(SpatialCompatPair {
                activity_1: v1,
                activity_2: v2,
                pairs,
            });
        }
    }

    // collision quadruplets between reference items whose reference intervals
    // stay clear of each other for every cycle shift
    let mut collisions: Vec<CollisionQuad> = Vec::new();
    if config.robot_count >= 2 {
        let margin = 0.03 * ct;
        let shifts = config.robot_count as i64;
        let mut attempts = 0;
        while collisions.len() < config.collision_count
            && attempts < 60 * (config.collision_count + 1)
        {
            attempts += 1;
            let r1 = rng.next_below(config.robot_count);
            let mut r2 = rng.next_below(config.robot_count - 1);
            if r2 >= r1 {
                r2 += 1;
            }
            let a1 = rng.pick(&executed[r1]).clone();
            let a2 = rng.pick(&executed[r2]).clone();
            let (s1, d1) = (ref_start[&a1], ref_duration[&a1]);
            let (s2, d2) = (ref_start[&a2], ref_duration[&a2]);
            let clear = (-shifts..=shifts).all(|n| {
                let shift = n as f64 * ct;
                let upsilon = s1 + d1 - s2 - shift;
                let mu = s2 + d2 + shift - s1;
                upsilon.min(mu) <= -margin
            });
            if !clear {
                continue;
            }
            let quad = CollisionQuad {
                activity_1: a1.clone(),
                item_1: ref_item[&a1].clone(),
                activity_2: a2.clone(),
                item_2: ref_item[&a2].clone(),
            };
            if collisions.iter().any(|c| {
                c.activity_1 == quad.activity_1
                    && c.item_1 == quad.item_1
                    && c.activity_2 == quad.activity_2
                    && c.item_2 == quad.item_2
            }) {
                continue;
            }
            collisions.push(quad);
        }
    }

    let instance = Instance {
        format: INSTANCE_FORMAT.to_owned(),
        cycle_time: ct,
        robots,
        time_lags,
        compat,
        collisions,
    };
    debug_assert!(
        crate::model::validate_instance(&instance).is_empty(),
        "generator must produce valid instances"
    );
    Ok(instance)
}

fn gen_robot(config: &GeneratorConfig, rng: &mut SplitMix64, r: usize) -> Result<Robot, GenError> {
    let n = rng.next_range_usize(config.activities_per_robot.0, config.activities_per_robot.1);
    let mode_count = rng.next_range_usize(config.modes_per_robot.0, config.modes_per_robot.1);

    let mut modes = Vec::with_capacity(mode_count);
    for m in 0..mode_count {
        let min_switch_time = if m == 0 {
            0.0
        } else {
            rng.next_range_f64(0.5, 2.5) * m as f64
        };
        modes.push(PowerMode {
            id: format!("m{}_{}", r + 1, m),
            min_switch_time,
        });
    }

    let mut static_activities = Vec::with_capacity(n);
    for k in 0..n {
        let loc_count =
            rng.next_range_usize(config.locations_per_activity.0, config.locations_per_activity.1);
        let d_min = rng.next_range_f64(0.2, 1.5);
        let d_max = d_min + rng.next_range_f64(1.0, 6.0);
        let base_power = rng.next_range_f64(80.0, 400.0);
        let mut locations = Vec::with_capacity(loc_count);
        for l in 0..loc_count {
            let jitter = rng.next_range_f64(0.85, 1.15);
            let mut power = BTreeMap::new();
            let mut level = base_power * jitter;
            for mode in &modes {
                power.insert(mode.id.clone(), level);
                level *= rng.next_range_f64(0.25, 0.7);
            }
            locations.push(Location {
                id: format!("l{}_{}_{}", r + 1, k + 1, l + 1),
                power,
            });
        }
        static_activities.push(StaticActivity {
            id: format!("v{}_{}", r + 1, k + 1),
            d_min,
            d_max,
            locations,
        });
    }
    let home = static_activities[0].id.clone();

    // base circuit edges home -> v2 -> ... -> vn -> home, then random extras
    let mut pairs: Vec<(usize, usize)> = (0..n).map(|i| (i, (i + 1) % n)).collect();
    for from in 0..n {
        for to in 0..n {
            if from == to || (to == (from + 1) % n) {
                continue;
            }
            if rng.next_bool(config.optional_edge_probability) {
                pairs.push((from, to));
            }
        }
    }
    let mut out_degree = vec![0usize; n];
    for &(from, _) in &pairs {
        out_degree[from] += 1;
    }

    let mut dynamic_activities = Vec::with_capacity(pairs.len());
    for &(from, to) in &pairs {
        let traj_count =
            rng.next_range_usize(config.trajectories_per_edge.0, config.trajectories_per_edge.1);
        let from_act = &static_activities[from];
        let to_act = &static_activities[to];
        let id = format!("e{}_{}_{}", r + 1, from + 1, to + 1);
        let mut trajectories = Vec::with_capacity(traj_count);
        for t in 0..traj_count {
            // trajectory 0 always connects the first locations so a full
            // circuit through them exists
            let (from_loc, to_loc) = if t == 0 {
                (from_act.locations[0].id.clone(), to_act.locations[0].id.clone())
            } else {
                (
                    rng.pick(&from_act.locations).id.clone(),
                    rng.pick(&to_act.locations).id.clone(),
                )
            };
            let d_min = rng.next_range_f64(0.4, 2.0);
            let d_max = d_min * rng.next_range_f64(1.6, 3.2);
            let energy = sample_energy(rng, &config.energy_coeff_ranges, d_min, d_max)?;
            trajectories.push(Trajectory {
                id: format!("t{}_{}", id, t + 1),
                from_loc,
                to_loc,
                d_min,
                d_max,
                energy,
            });
        }
        dynamic_activities.push(DynamicActivity {
            id,
            from: from_act.id.clone(),
            to: to_act.id.clone(),
            optional: out_degree[from] > 1,
            trajectories,
        });
    }

    Ok(Robot {
        id: format!("r{}", r + 1),
        home,
        modes,
        static_activities,
        dynamic_activities,
    })
}
