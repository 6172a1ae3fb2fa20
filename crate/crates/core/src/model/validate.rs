//! Structural validation of instances.
//!
//! Violations are data, not errors: the validator walks the whole instance
//! and reports every broken rule with the entity it belongs to.

use super::{Instance, INSTANCE_FORMAT};
use std::collections::{HashMap, HashSet};
use std::fmt;

/// One violated invariant, naming the entity and the rule.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub entity: String,
    pub rule: String,
}

impl Violation {
    fn new(entity: impl Into<String>, rule: impl Into<String>) -> Self {
        Violation {
            entity: entity.into(),
            rule: rule.into(),
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.entity, self.rule)
    }
}

/// Validates every structural invariant of the model. Returns an empty list
/// iff the instance is well formed.
pub fn validate_instance(instance: &Instance) -> Vec<Violation> {
    let mut v = Vec::new();

    if instance.format != INSTANCE_FORMAT {
        v.push(Violation::new(
            "instance",
            format!(
                "unknown format tag {:?}, expected {:?}",
                instance.format, INSTANCE_FORMAT
            ),
        ));
    }
    if !(instance.cycle_time > 0.0) || !instance.cycle_time.is_finite() {
        v.push(Violation::new(
            "instance",
            format!("cycle_time must be positive and finite, got {}", instance.cycle_time),
        ));
    }
    if instance.robots.is_empty() {
        v.push(Violation::new("instance", "at least one robot required"));
    }

    // global activity registry: id -> robot index, is_static
    let mut activities: HashMap<&str, (usize, bool)> = HashMap::new();
    let mut robot_ids: HashSet<&str> = HashSet::new();

    for (ri, robot) in instance.robots.iter().enumerate() {
        let rname = format!("robot {}", robot.id);
        if !robot_ids.insert(&robot.id) {
            v.push(Violation::new(&rname, "duplicate robot id"));
        }

        // modes
        let mut mode_ids: HashSet<&str> = HashSet::new();
        let mut has_zero_switch = false;
        for m in &robot.modes {
            if !mode_ids.insert(&m.id) {
                v.push(Violation::new(
                    format!("mode {} of {}", m.id, rname),
                    "duplicate mode id",
                ));
            }
            if !(m.min_switch_time >= 0.0) || !m.min_switch_time.is_finite() {
                v.push(Violation::new(
                    format!("mode {} of {}", m.id, rname),
                    "min_switch_time must be >= 0 and finite",
                ));
            }
            if m.min_switch_time == 0.0 {
                has_zero_switch = true;
            }
        }
        if robot.modes.is_empty() {
            v.push(Violation::new(&rname, "at least one power mode required"));
        } else if !has_zero_switch {
            v.push(Violation::new(
                &rname,
                "a mode with min_switch_time = 0 (held by motors) is required",
            ));
        }

        // static activities and locations
        let mut local_statics: HashSet<&str> = HashSet::new();
        let mut loc_owner: HashMap<&str, &str> = HashMap::new();
        for s in &robot.static_activities {
            let sname = format!("static activity {}", s.id);
            if activities.insert(&s.id, (ri, true)).is_some() {
                v.push(Violation::new(&sname, "duplicate activity id"));
            }
            local_statics.insert(&s.id);
            if !(0.0 <= s.d_min && s.d_min <= s.d_max) || !s.d_max.is_finite() {
                v.push(Violation::new(
                    &sname,
                    format!("duration window must satisfy 0 <= d_min <= d_max, got [{}, {}]", s.d_min, s.d_max),
                ));
            }
            if s.locations.is_empty() {
                v.push(Violation::new(&sname, "at least one location required"));
            }
            let mut loc_ids: HashSet<&str> = HashSet::new();
            for l in &s.locations {
                let lname = format!("location {} of {}", l.id, s.id);
                if !loc_ids.insert(&l.id) {
                    v.push(Violation::new(&lname, "duplicate location id within activity"));
                }
                loc_owner.insert(&l.id, &s.id);
                for m in &robot.modes {
                    match l.power.get(&m.id) {
                        None => v.push(Violation::new(
                            &lname,
                            format!("input power missing for mode {}", m.id),
                        )),
                        Some(p) if !(*p >= 0.0) || !p.is_finite() => v.push(Violation::new(
                            &lname,
                            format!("input power for mode {} must be >= 0 and finite", m.id),
                        )),
                        _ => {}
                    }
                }
                for mode_id in l.power.keys() {
                    if !robot.modes.iter().any(|m| &m.id == mode_id) {
                        v.push(Violation::new(
                            &lname,
                            format!("input power given for unknown mode {}", mode_id),
                        ));
                    }
                }
            }
        }

        if !local_statics.contains(robot.home.as_str()) {
            v.push(Violation::new(
                &rname,
                format!("home activity {} not among the robot's static activities", robot.home),
            ));
        }

        // dynamic activities
        let mut out_count: HashMap<&str, usize> = HashMap::new();
        let mut in_count: HashMap<&str, usize> = HashMap::new();
        let mut edge_pairs: HashSet<(&str, &str)> = HashSet::new();
        for e in &robot.dynamic_activities {
            out_count
                .entry(e.from.as_str())
                .and_modify(|c| *c += 1)
                .or_insert(1);
            in_count
                .entry(e.to.as_str())
                .and_modify(|c| *c += 1)
                .or_insert(1);
        }
        for e in &robot.dynamic_activities {
            let ename = format!("dynamic activity {}", e.id);
            if activities.insert(&e.id, (ri, false)).is_some() {
                v.push(Violation::new(&ename, "duplicate activity id"));
            }
            let from_ok = local_statics.contains(e.from.as_str());
            let to_ok = local_statics.contains(e.to.as_str());
            if !from_ok || !to_ok {
                v.push(Violation::new(
                    &ename,
                    "endpoints must be static activities of the same robot",
                ));
            }
            if e.from == e.to {
                v.push(Violation::new(&ename, "self-loop movements are not allowed"));
            }
            if !edge_pairs.insert((e.from.as_str(), e.to.as_str())) {
                v.push(Violation::new(
                    &ename,
                    format!("duplicate movement {} -> {} (model trajectories as alternatives instead)", e.from, e.to),
                ));
            }
            if from_ok {
                let expect_optional = out_count[e.from.as_str()] > 1;
                if e.optional != expect_optional {
                    v.push(Violation::new(
                        &ename,
                        format!(
                            "optional flag must be {} (source has {} outgoing movements)",
                            expect_optional, out_count[e.from.as_str()]
                        ),
                    ));
                }
            }
            if e.trajectories.is_empty() {
                v.push(Violation::new(&ename, "at least one trajectory required"));
            }
            let mut traj_ids: HashSet<&str> = HashSet::new();
            for t in &e.trajectories {
                let tname = format!("trajectory {} of {}", t.id, e.id);
                if !traj_ids.insert(&t.id) {
                    v.push(Violation::new(&tname, "duplicate trajectory id within activity"));
                }
                if !(0.0 < t.d_min && t.d_min <= t.d_max) || !t.d_max.is_finite() {
                    v.push(Violation::new(
                        &tname,
                        format!(
                            "duration window must satisfy 0 < d_min <= d_max, got [{}, {}]",
                            t.d_min, t.d_max
                        ),
                    ));
                }
                if loc_owner.get(t.from_loc.as_str()) != Some(&e.from.as_str()) {
                    v.push(Violation::new(
                        &tname,
                        format!("from_loc {} is not a location of {}", t.from_loc, e.from),
                    ));
                }
                if loc_owner.get(t.to_loc.as_str()) != Some(&e.to.as_str()) {
                    v.push(Violation::new(
                        &tname,
                        format!("to_loc {} is not a location of {}", t.to_loc, e.to),
                    ));
                }
                if t.energy.coeffs.iter().any(|c| !c.is_finite()) {
                    v.push(Violation::new(&tname, "energy coefficients must be finite"));
                }
                if t.d_min > 0.0 && t.d_min <= t.d_max {
                    if !t.energy.is_convex_on(t.d_min, t.d_max) {
                        v.push(Violation::new(
                            &tname,
                            "energy function is not convex on the duration window",
                        ));
                    } else if !t.energy.is_nonnegative_on(t.d_min, t.d_max) {
                        v.push(Violation::new(
                            &tname,
                            "energy function is negative on the duration window",
                        ));
                    }
                }
            }
        }

        // every static needs at least one incoming and one outgoing movement
        for s in &robot.static_activities {
            if out_count.get(s.id.as_str()).copied().unwrap_or(0) == 0 {
                v.push(Violation::new(
                    format!("static activity {}", s.id),
                    "no outgoing dynamic activity",
                ));
            }
            if in_count.get(s.id.as_str()).copied().unwrap_or(0) == 0 {
                v.push(Violation::new(
                    format!("static activity {}", s.id),
                    "no incoming dynamic activity",
                ));
            }
        }

        // weak connectivity of the activity graph
        if robot.static_activities.len() > 1 {
            let index: HashMap<&str, usize> = robot
                .static_activities
                .iter()
                .enumerate()
                .map(|(i, s)| (s.id.as_str(), i))
                .collect();
            let mut adj: Vec<Vec<usize>> = vec![Vec::new(); robot.static_activities.len()];
            for e in &robot.dynamic_activities {
                if let (Some(&a), Some(&b)) = (index.get(e.from.as_str()), index.get(e.to.as_str()))
                {
                    adj[a].push(b);
                    adj[b].push(a);
                }
            }
            let mut seen = vec![false; adj.len()];
            let mut stack = vec![0usize];
            seen[0] = true;
            while let Some(x) = stack.pop() {
                for &y in &adj[x] {
                    if !seen[y] {
                        seen[y] = true;
                        stack.push(y);
                    }
                }
            }
            if seen.iter().any(|s| !s) {
                v.push(Violation::new(&rname, "activity graph is not connected"));
            }
        }
    }

    // cross-robot references
    for (i, lag) in instance.time_lags.iter().enumerate() {
        let lname = format!("time lag #{} ({} -> {})", i, lag.from, lag.to);
        if !lag.length.is_finite() {
            v.push(Violation::new(&lname, "length must be finite"));
        }
        for end in [&lag.from, &lag.to] {
            match activities.get(end.as_str()) {
                None => v.push(Violation::new(
                    &lname,
                    format!("references unknown activity {}", end),
                )),
                Some(&(ri, false)) => {
                    // a lag anchored to a skippable movement has no defined
                    // event time; restrict endpoints to mandatory activities
                    let robot = &instance.robots[ri];
                    if robot
                        .dynamic_activities
                        .iter()
                        .any(|e| &e.id == end && e.optional)
                    {
                        v.push(Violation::new(
                            &lname,
                            format!("endpoint {} is an optional dynamic activity", end),
                        ));
                    }
                }
                Some(_) => {}
            }
        }
    }

    for (i, pair) in instance.compat.iter().enumerate() {
        let pname = format!(
            "compat pair #{} ({}, {})",
            i, pair.activity_1, pair.activity_2
        );
        let lookup = |id: &str| activities.get(id).copied();
        match (lookup(&pair.activity_1), lookup(&pair.activity_2)) {
            (Some((r1, true)), Some((r2, true))) => {
                if r1 == r2 {
                    v.push(Violation::new(
                        &pname,
                        "handover activities must belong to distinct robots",
                    ));
                }
                if pair.pairs.is_empty() {
                    v.push(Violation::new(&pname, "compatible location pairs must be nonempty"));
                }
                let has_loc = |robot: usize, act: &str, loc: &str| {
                    instance.robots[robot]
                        .static_activities
                        .iter()
                        .find(|s| s.id == act)
                        .is_some_and(|s| s.locations.iter().any(|l| l.id == loc))
                };
                for (l1, l2) in &pair.pairs {
                    if !has_loc(r1, &pair.activity_1, l1) {
                        v.push(Violation::new(
                            &pname,
                            format!("{} is not a location of {}", l1, pair.activity_1),
                        ));
                    }
                    if !has_loc(r2, &pair.activity_2, l2) {
                        v.push(Violation::new(
                            &pname,
                            format!("{} is not a location of {}", l2, pair.activity_2),
                        ));
                    }
                }
            }
            _ => v.push(Violation::new(
                &pname,
                "both endpoints must be existing static activities",
            )),
        }
    }

    for (i, quad) in instance.collisions.iter().enumerate() {
        let qname = format!(
            "collision #{} ({}/{}, {}/{})",
            i, quad.activity_1, quad.item_1, quad.activity_2, quad.item_2
        );
        let sides = [
            (&quad.activity_1, &quad.item_1),
            (&quad.activity_2, &quad.item_2),
        ];
        let mut owners = Vec::new();
        for (act, item) in sides {
            match activities.get(act.as_str()) {
                None => v.push(Violation::new(
                    &qname,
                    format!("references unknown activity {}", act),
                )),
                Some(&(ri, is_static)) => {
                    owners.push(ri);
                    let robot = &instance.robots[ri];
                    let ok = if is_static {
                        robot
                            .static_activities
                            .iter()
                            .find(|s| &s.id == act)
                            .is_some_and(|s| s.locations.iter().any(|l| &l.id == item))
                    } else {
                        robot
                            .dynamic_activities
                            .iter()
                            .find(|e| &e.id == act)
                            .is_some_and(|e| e.trajectories.iter().any(|t| &t.id == item))
                    };
                    if !ok {
                        let kind = if is_static { "location" } else { "trajectory" };
                        v.push(Violation::new(
                            &qname,
                            format!("{} is not a {} of {}", item, kind, act),
                        ));
                    }
                }
            }
        }
        if owners.len() == 2 && owners[0] == owners[1] {
            v.push(Violation::new(
                &qname,
                "collision activities must belong to distinct robots",
            ));
        }
    }

    v
}
