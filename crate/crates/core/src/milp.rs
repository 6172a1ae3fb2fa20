//! Complete mixed-integer formulation of the cell optimization problem and
//! its export in CPLEX LP text format for external MILP solvers.
//!
//! Variables: continuous `W_a` (energy), `s_a` (start), `d_a` (duration) per
//! activity; binary `x_v^l` (location), `z_v^m` (mode), `y_e^t` (trajectory),
//! `w_e` (order selection of an optional movement), `c_o^n` (collision
//! ordering per cycle shift). Constraint rows are tagged `eq2`..`eq19` after
//! the source equation of the formulation.

use crate::lp::LinearProgram;
use crate::model::{
    pwl_approximate, ActivityRef, Cell, ItemRef, RobotSelection, SelectionStep, Solution,
    SolutionStatus,
};
use crate::tol::FEAS_TOL;
use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use thiserror::Error;

/// Kind (and identity) of a MILP variable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum VarKind {
    /// `W_a`
    Energy(ActivityRef),
    /// `s_a`
    Start(ActivityRef),
    /// `d_a`
    Duration(ActivityRef),
    /// `x_v^l`: global static, global location
    Loc(usize, usize),
    /// `z_v^m`: global static, robot-local mode
    Mode(usize, usize),
    /// `y_e^t`: global dynamic, global trajectory
    Traj(usize, usize),
    /// `w_{e,suc(e)}` of an optional movement
    OrderSel(usize),
    /// `c_o^n`: collision index, cycle shift
    CollOrder(usize, i64),
}

#[derive(Debug, Clone)]
pub struct MilpVar {
    pub name: String,
    pub kind: VarKind,
    pub lower: f64,
    pub upper: f64,
    pub binary: bool,
}

/// Row relation of the MILP.
pub use crate::lp::Rel;

#[derive(Debug, Clone)]
pub struct MilpRow {
    pub name: String,
    /// Source equation tag, `eq2`..`eq19`.
    pub tag: &'static str,
    pub coeffs: Vec<(usize, f64)>,
    pub rel: Rel,
    pub rhs: f64,
}

#[derive(Debug)]
pub struct MilpModel {
    pub variables: Vec<MilpVar>,
    pub rows: Vec<MilpRow>,
    /// Objective terms (minimize): the energy variables, coefficient 1.
    pub objective: Vec<(usize, f64)>,
    /// Big-M constant used in the energy propagation rows.
    pub upper_bound_energy: f64,
    /// Linearization pieces per trajectory energy function.
    pub segments: usize,
    index: HashMap<VarKind, usize>,
}

impl MilpModel {
    pub fn var(&self, kind: VarKind) -> usize {
        self.index[&kind]
    }

    pub fn try_var(&self, kind: VarKind) -> Option<usize> {
        self.index.get(&kind).copied()
    }

    pub fn rows_tagged<'a>(&'a self, tag: &'a str) -> impl Iterator<Item = &'a MilpRow> + 'a {
        self.rows.iter().filter(move |r| r.tag == tag)
    }
}

/// Upper bound on any single activity's energy, used as the big-M that
/// deactivates energy propagation rows. Covers the worst stationary energy
/// `max p * CT` and every linearization chord over the full duration range a
/// deactivated movement variable can take, so deactivated rows are always
/// slack.
pub fn upper_bound_energy(cell: &Cell, segments: usize) -> f64 {
    let ct = cell.cycle_time();
    let mut bound = 1.0_f64;
    for info in &cell.statics {
        let modes = cell.robots[info.robot].modes.len();
        for &l in &info.locations {
            for m in 0..modes {
                bound = bound.max(cell.loc_power(l, m) * ct);
            }
        }
    }
    for dyn_info in &cell.dynamics {
        let d_reach = dyn_info
            .trajectories
            .iter()
            .map(|&t| cell.trajectories[t].d_max)
            .fold(0.0_f64, f64::max)
            + ct;
        for &t in &dyn_info.trajectories {
            let tr = &cell.trajectories[t];
            let pwl = pwl_approximate(&tr.energy, tr.d_min, tr.d_max, segments)
                .expect("validated trajectory energy");
            for &(k, q) in &pwl.segments {
                bound = bound.max(q).max(q + k * d_reach);
            }
        }
    }
    bound
}

/// Builds the full MILP for an instance with `segments` linearization pieces
/// per trajectory energy function.
pub fn build_milp(cell: &Cell, segments: usize) -> MilpModel {
    let ct = cell.cycle_time();
    let w_bar = upper_bound_energy(cell, segments);
    let r_count = cell.robots.len() as i64;
    let big_coll = 2.0 * r_count as f64 * ct;

    let mut variables: Vec<MilpVar> = Vec::new();
    let mut index: HashMap<VarKind, usize> = HashMap::new();
    let mut names: HashMap<String, usize> = HashMap::new();

    let mut add_var = |variables: &mut Vec<MilpVar>,
                       index: &mut HashMap<VarKind, usize>,
                       name: String,
                       kind: VarKind,
                       lower: f64,
                       upper: f64,
                       binary: bool|
     -> usize {
        let mut name = sanitize(&name);
        if let Some(n) = names.get(&name) {
            // sanitization collision; disambiguate deterministically
            name = format!("{name}__{n}");
        }
        names.insert(name.clone(), variables.len());
        let id = variables.len();
        variables.push(MilpVar {
            name,
            kind,
            lower,
            upper,
            binary,
        });
        index.insert(kind, id);
        id
    };

    let all_activities: Vec<ActivityRef> = (0..cell.statics.len())
        .map(ActivityRef::Static)
        .chain((0..cell.dynamics.len()).map(ActivityRef::Dynamic))
        .collect();

    for &a in &all_activities {
        let id = cell.act_id(a);
        add_var(
            &mut variables,
            &mut index,
            format!("W_{id}"),
            VarKind::Energy(a),
            0.0,
            f64::INFINITY,
            false,
        );
        add_var(
            &mut variables,
            &mut index,
            format!("s_{id}"),
            VarKind::Start(a),
            0.0,
            f64::INFINITY,
            false,
        );
        let upper = match a {
            ActivityRef::Static(s) => cell.statics[s].d_max,
            ActivityRef::Dynamic(_) => f64::INFINITY,
        };
        add_var(
            &mut variables,
            &mut index,
            format!("d_{id}"),
            VarKind::Duration(a),
            0.0,
            upper,
            false,
        );
    }
    for (s, info) in cell.statics.iter().enumerate() {
        for &l in &info.locations {
            add_var(
                &mut variables,
                &mut index,
                format!("x_{}_{}", info.id, cell.locations[l].id),
                VarKind::Loc(s, l),
                0.0,
                1.0,
                true,
            );
        }
        for m in 0..cell.robots[info.robot].modes.len() {
            add_var(
                &mut variables,
                &mut index,
                format!("z_{}_{}", info.id, cell.robots[info.robot].modes[m].id),
                VarKind::Mode(s, m),
                0.0,
                1.0,
                true,
            );
        }
    }
    for (e, info) in cell.dynamics.iter().enumerate() {
        for &t in &info.trajectories {
            add_var(
                &mut variables,
                &mut index,
                format!("y_{}_{}", info.id, cell.trajectories[t].id),
                VarKind::Traj(e, t),
                0.0,
                1.0,
                true,
            );
        }
        if info.optional {
            add_var(
                &mut variables,
                &mut index,
                format!("w_{}", info.id),
                VarKind::OrderSel(e),
                0.0,
                1.0,
                true,
            );
        }
    }
    for (o, _) in cell.collisions.iter().enumerate() {
        for n in -r_count..=r_count {
            let suffix = if n < 0 {
                format!("m{}", -n)
            } else {
                n.to_string()
            };
            add_var(
                &mut variables,
                &mut index,
                format!("c_{o}_n{suffix}"),
                VarKind::CollOrder(o, n),
                0.0,
                1.0,
                true,
            );
        }
    }

    let model_index = index;
    let var = |kind: VarKind| -> usize { model_index[&kind] };

    let mut rows: Vec<MilpRow> = Vec::new();
    let mut counters: HashMap<&'static str, usize> = HashMap::new();
    let mut add_row = |rows: &mut Vec<MilpRow>,
                       tag: &'static str,
                       coeffs: Vec<(usize, f64)>,
                       rel: Rel,
                       rhs: f64| {
        let k = counters.entry(tag).or_insert(0);
        rows.push(MilpRow {
            name: format!("{tag}_{k}"),
            tag,
            coeffs,
            rel,
            rhs,
        });
        *k += 1;
    };

    // (2) stationary energy propagation:
    //     p d_v + Wbar z_v^m + Wbar x_v^l - W_v <= 2 Wbar
    for (s, info) in cell.statics.iter().enumerate() {
        for &l in &info.locations {
            for m in 0..cell.robots[info.robot].modes.len() {
                let p = cell.loc_power(l, m);
                add_row(
                    &mut rows,
                    "eq2",
                    vec![
                        (var(VarKind::Duration(ActivityRef::Static(s))), p),
                        (var(VarKind::Mode(s, m)), w_bar),
                        (var(VarKind::Loc(s, l)), w_bar),
                        (var(VarKind::Energy(ActivityRef::Static(s))), -1.0),
                    ],
                    Rel::Le,
                    2.0 * w_bar,
                );
            }
        }
    }

    // (3) movement energy propagation per linearization chord:
    //     k d_e + Wbar y_e^t - W_e <= Wbar - q
    for (e, info) in cell.dynamics.iter().enumerate() {
        for &t in &info.trajectories {
            let tr = &cell.trajectories[t];
            let pwl = pwl_approximate(&tr.energy, tr.d_min, tr.d_max, segments)
                .expect("validated trajectory energy");
            for &(k, q) in &pwl.segments {
                add_row(
                    &mut rows,
                    "eq3",
                    vec![
                        (var(VarKind::Duration(ActivityRef::Dynamic(e))), k),
                        (var(VarKind::Traj(e, t)), w_bar),
                        (var(VarKind::Energy(ActivityRef::Dynamic(e))), -1.0),
                    ],
                    Rel::Le,
                    w_bar - q,
                );
            }
        }
    }

    // (4) one location per static activity
    for (s, info) in cell.statics.iter().enumerate() {
        add_row(
            &mut rows,
            "eq4",
            info.locations
                .iter()
                .map(|&l| (var(VarKind::Loc(s, l)), 1.0))
                .collect(),
            Rel::Eq,
            1.0,
        );
    }
    // (5) one mode per static activity
    for (s, info) in cell.statics.iter().enumerate() {
        add_row(
            &mut rows,
            "eq5",
            (0..cell.robots[info.robot].modes.len())
                .map(|m| (var(VarKind::Mode(s, m)), 1.0))
                .collect(),
            Rel::Eq,
            1.0,
        );
    }
    // (6) one trajectory per mandatory movement
    for (e, info) in cell.dynamics.iter().enumerate() {
        if info.optional {
            continue;
        }
        add_row(
            &mut rows,
            "eq6",
            info.trajectories
                .iter()
                .map(|&t| (var(VarKind::Traj(e, t)), 1.0))
                .collect(),
            Rel::Eq,
            1.0,
        );
    }

    // (7)/(8) flow: arriving at a location means leaving from it
    for (s, info) in cell.statics.iter().enumerate() {
        for &l in &info.locations {
            let mut incoming: Vec<(usize, f64)> = Vec::new();
            for &e in &info.in_edges {
                for &t in &cell.dynamics[e].trajectories {
                    if cell.trajectories[t].to_loc == l {
                        incoming.push((var(VarKind::Traj(e, t)), 1.0));
                    }
                }
            }
            incoming.push((var(VarKind::Loc(s, l)), -1.0));
            add_row(&mut rows, "eq7", incoming, Rel::Eq, 0.0);

            let mut outgoing: Vec<(usize, f64)> = Vec::new();
            for &e in &info.out_edges {
                for &t in &cell.dynamics[e].trajectories {
                    if cell.trajectories[t].from_loc == l {
                        outgoing.push((var(VarKind::Traj(e, t)), 1.0));
                    }
                }
            }
            outgoing.push((var(VarKind::Loc(s, l)), -1.0));
            add_row(&mut rows, "eq8", outgoing, Rel::Eq, 0.0);
        }
    }

    // (9) mandatory precedences: s_a2 = s_a1 + d_a1 (a1 not home, not optional)
    let successors = |a: ActivityRef| -> Vec<ActivityRef> {
        match a {
            ActivityRef::Static(s) => cell.statics[s]
                .out_edges
                .iter()
                .map(|&e| ActivityRef::Dynamic(e))
                .collect(),
            ActivityRef::Dynamic(e) => vec![ActivityRef::Static(cell.dynamics[e].to)],
        }
    };
    for &a1 in &all_activities {
        match a1 {
            ActivityRef::Static(s) if cell.statics[s].is_home => continue,
            ActivityRef::Dynamic(e) if cell.dynamics[e].optional => continue,
            _ => {}
        }
        for a2 in successors(a1) {
            add_row(
                &mut rows,
                "eq9",
                vec![
                    (var(VarKind::Start(a2)), 1.0),
                    (var(VarKind::Start(a1)), -1.0),
                    (var(VarKind::Duration(a1)), -1.0),
                ],
                Rel::Eq,
                0.0,
            );
        }
    }
    // (10) movements leaving home start one cycle earlier:
    //      s_e = s_home + d_home - CT
    for robot in &cell.robots {
        let home = ActivityRef::Static(robot.home);
        for &e in &cell.statics[robot.home].out_edges {
            add_row(
                &mut rows,
                "eq10",
                vec![
                    (var(VarKind::Start(ActivityRef::Dynamic(e))), 1.0),
                    (var(VarKind::Start(home)), -1.0),
                    (var(VarKind::Duration(home)), -1.0),
                ],
                Rel::Eq,
                -ct,
            );
        }
    }
    // (11)-(13) optional movements: trajectory selection ties to the order
    // variable, which gates the precedence towards the successor
    for (e, info) in cell.dynamics.iter().enumerate() {
        if !info.optional {
            continue;
        }
        let mut sel: Vec<(usize, f64)> = info
            .trajectories
            .iter()
            .map(|&t| (var(VarKind::Traj(e, t)), 1.0))
            .collect();
        sel.push((var(VarKind::OrderSel(e)), -1.0));
        add_row(&mut rows, "eq11", sel, Rel::Eq, 0.0);

        let v = ActivityRef::Static(info.to);
        let ed = ActivityRef::Dynamic(e);
        add_row(
            &mut rows,
            "eq12",
            vec![
                (var(VarKind::Start(v)), 1.0),
                (var(VarKind::Start(ed)), -1.0),
                (var(VarKind::Duration(ed)), -1.0),
                (var(VarKind::OrderSel(e)), -ct),
            ],
            Rel::Ge,
            -ct,
        );
        add_row(
            &mut rows,
            "eq13",
            vec![
                (var(VarKind::Start(v)), 1.0),
                (var(VarKind::Start(ed)), -1.0),
                (var(VarKind::Duration(ed)), -1.0),
                (var(VarKind::OrderSel(e)), ct),
            ],
            Rel::Le,
            ct,
        );
    }

    // (14) stationary duration minimum per applicable mode:
    //      d_v >= max(d_min, switch time) z_v^m   (d_v <= d_max is a bound)
    for (s, info) in cell.statics.iter().enumerate() {
        for m in 0..cell.robots[info.robot].modes.len() {
            let dmin = cell.static_mode_min_duration(s, m);
            add_row(
                &mut rows,
                "eq14",
                vec![
                    (var(VarKind::Duration(ActivityRef::Static(s))), 1.0),
                    (var(VarKind::Mode(s, m)), -dmin),
                ],
                Rel::Ge,
                0.0,
            );
        }
    }
    // (15) movement duration window per trajectory:
    //      d_min y <= d_e  and  d_e <= d_max + CT (1 - y)
    for (e, info) in cell.dynamics.iter().enumerate() {
        let de = var(VarKind::Duration(ActivityRef::Dynamic(e)));
        for &t in &info.trajectories {
            let tr = &cell.trajectories[t];
            add_row(
                &mut rows,
                "eq15",
                vec![(de, 1.0), (var(VarKind::Traj(e, t)), -tr.d_min)],
                Rel::Ge,
                0.0,
            );
            add_row(
                &mut rows,
                "eq15",
                vec![(de, 1.0), (var(VarKind::Traj(e, t)), ct)],
                Rel::Le,
                tr.d_max + ct,
            );
        }
    }

    // (16) inter-robot time lags
    for lag in &cell.lags {
        add_row(
            &mut rows,
            "eq16",
            vec![
                (var(VarKind::Start(lag.to)), 1.0),
                (var(VarKind::Start(lag.from)), -1.0),
            ],
            Rel::Ge,
            lag.length - ct * lag.height as f64,
        );
    }

    // (17) spatial compatibility: a chosen location needs a compatible
    // partner. Emitted for every location of both sides; a location with no
    // partner gets an empty sum, i.e. it is forbidden outright.
    for pair in &cell.compat {
        for (this, other, swap) in [(pair.a, pair.b, false), (pair.b, pair.a, true)] {
            let _ = other;
            for &l1 in &cell.statics[this].locations {
                let partners: Vec<usize> = pair
                    .pairs
                    .iter()
                    .filter_map(|&(pa, pb)| {
                        let (mine, theirs) = if swap { (pb, pa) } else { (pa, pb) };
                        (mine == l1).then_some(theirs)
                    })
                    .collect();
                let mut coeffs = vec![(var(VarKind::Loc(this, l1)), 1.0)];
                for p in partners {
                    let owner = cell.locations[p].owner;
                    coeffs.push((var(VarKind::Loc(owner, p)), -1.0));
                }
                add_row(&mut rows, "eq17", coeffs, Rel::Le, 0.0);
            }
        }
    }

    // (18)/(19) collision resolution per cycle shift with big-M 2|R|CT
    for (o, quad) in cell.collisions.iter().enumerate() {
        let u1 = match (quad.a1, quad.item1) {
            (ActivityRef::Static(s), ItemRef::Loc(l)) => var(VarKind::Loc(s, l)),
            (ActivityRef::Dynamic(e), ItemRef::Traj(t)) => var(VarKind::Traj(e, t)),
            _ => unreachable!("validated quadruplet"),
        };
        let u2 = match (quad.a2, quad.item2) {
            (ActivityRef::Static(s), ItemRef::Loc(l)) => var(VarKind::Loc(s, l)),
            (ActivityRef::Dynamic(e), ItemRef::Traj(t)) => var(VarKind::Traj(e, t)),
            _ => unreachable!("validated quadruplet"),
        };
        for n in -r_count..=r_count {
            let c = var(VarKind::CollOrder(o, n));
            let shift = n as f64 * ct;
            // s_a2 + n CT + 2RCT (3 - c - u1 - u2) >= s_a1 + d_a1
            add_row(
                &mut rows,
                "eq18",
                vec![
                    (var(VarKind::Start(quad.a2)), 1.0),
                    (var(VarKind::Start(quad.a1)), -1.0),
                    (var(VarKind::Duration(quad.a1)), -1.0),
                    (c, -big_coll),
                    (u1, -big_coll),
                    (u2, -big_coll),
                ],
                Rel::Ge,
                -shift - 3.0 * big_coll,
            );
            // s_a1 + 2RCT (2 + c - u1 - u2) >= s_a2 + d_a2 + n CT
            add_row(
                &mut rows,
                "eq19",
                vec![
                    (var(VarKind::Start(quad.a1)), 1.0),
                    (var(VarKind::Start(quad.a2)), -1.0),
                    (var(VarKind::Duration(quad.a2)), -1.0),
                    (c, big_coll),
                    (u1, -big_coll),
                    (u2, -big_coll),
                ],
                Rel::Ge,
                shift - 2.0 * big_coll,
            );
        }
    }

    let objective = all_activities
        .iter()
        .map(|&a| (model_index[&VarKind::Energy(a)], 1.0))
        .collect();

    MilpModel {
        variables,
        rows,
        objective,
        upper_bound_energy: w_bar,
        segments,
        index: model_index,
    }
}

fn sanitize(name: &str) -> String {
    name.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '_' { c } else { '_' })
        .collect()
}

const LINE_WRAP: usize = 180;

fn push_term(out: &mut String, line_len: &mut usize, first: bool, coeff: f64, name: &str) {
    let term = if first {
        if coeff < 0.0 {
            format!("- {:.16e} {name}", -coeff)
        } else {
            format!("{coeff:.16e} {name}")
        }
    } else if coeff < 0.0 {
        format!(" - {:.16e} {name}", -coeff)
    } else {
        format!(" + {coeff:.16e} {name}")
    };
    if *line_len + term.len() > LINE_WRAP {
        out.push_str("\n   ");
        *line_len = 3;
    }
    *line_len += term.len();
    out.push_str(&term);
}

/// Serializes the model as deterministic CPLEX LP text
/// (`Minimize / Subject To / Bounds / Binary / End`).
pub fn export_lp_file(model: &MilpModel) -> Vec<u8> {
    let mut out = String::new();
    out.push_str("\\ cell energy optimization model\n");
    out.push_str("Minimize\n obj: ");
    let mut len = 6;
    for (i, &(v, c)) in model.objective.iter().enumerate() {
        push_term(&mut out, &mut len, i == 0, c, &model.variables[v].name);
    }
    out.push_str("\nSubject To\n");
    for row in &model.rows {
        let mut len = 0;
        let head = format!(" {}: ", row.name);
        len += head.len();
        out.push_str(&head);
        for (i, &(v, c)) in row.coeffs.iter().enumerate() {
            push_term(&mut out, &mut len, i == 0, c, &model.variables[v].name);
        }
        let rel = match row.rel {
            Rel::Le => "<=",
            Rel::Ge => ">=",
            Rel::Eq => "=",
        };
        let _ = write!(out, " {rel} {:.16e}\n", row.rhs);
    }
    out.push_str("Bounds\n");
    for v in &model.variables {
        if v.binary {
            continue;
        }
        match (v.lower, v.upper) {
            (lo, hi) if lo == 0.0 && hi.is_infinite() => {}
            (lo, hi) if lo.is_infinite() && hi.is_infinite() => {
                let _ = writeln!(out, " {} free", v.name);
            }
            (lo, hi) if hi.is_infinite() => {
                let _ = writeln!(out, " {} >= {lo:.16e}", v.name);
            }
            (lo, hi) if lo == 0.0 => {
                let _ = writeln!(out, " {} <= {hi:.16e}", v.name);
            }
            (lo, hi) => {
                let _ = writeln!(out, " {lo:.16e} <= {} <= {hi:.16e}", v.name);
            }
        }
    }
    let binaries: Vec<&MilpVar> = model.variables.iter().filter(|v| v.binary).collect();
    if !binaries.is_empty() {
        out.push_str("Binary\n");
        for v in binaries {
            let _ = writeln!(out, " {}", v.name);
        }
    }
    out.push_str("End\n");
    out.into_bytes()
}

/// Debug escape hatch: any [`LinearProgram`] in the same LP text format.
pub fn export_lp_program(lp: &LinearProgram) -> Vec<u8> {
    let mut out = String::new();
    out.push_str("\\ linear program dump\n");
    out.push_str("Minimize\n obj: ");
    let mut len = 6;
    let mut first = true;
    for j in 0..lp.n_cols() {
        let c = lp.objective_coeff(j);
        if c != 0.0 {
            push_term(&mut out, &mut len, first, c, &lp.col_name(j));
            first = false;
        }
    }
    if first {
        out.push('0');
    }
    out.push_str("\nSubject To\n");
    for i in 0..lp.n_rows() {
        let row = lp.row(i);
        let head = format!(" {}: ", lp.row_name(i));
        let mut len = head.len();
        out.push_str(&head);
        for (k, &(v, c)) in row.coeffs.iter().enumerate() {
            push_term(&mut out, &mut len, k == 0, c, &lp.col_name(v));
        }
        let rel = match row.rel {
            Rel::Le => "<=",
            Rel::Ge => ">=",
            Rel::Eq => "=",
        };
        let _ = write!(out, " {rel} {:.16e}\n", row.rhs);
    }
    out.push_str("Bounds\n");
    for j in 0..lp.n_cols() {
        let (lo, hi) = lp.bounds(j);
        match (lo, hi) {
            (lo, hi) if lo == 0.0 && hi.is_infinite() => {}
            (lo, hi) if lo.is_infinite() && hi.is_infinite() => {
                let _ = writeln!(out, " {} free", lp.col_name(j));
            }
            (lo, hi) if hi.is_infinite() => {
                let _ = writeln!(out, " {} >= {lo:.16e}", lp.col_name(j));
            }
            (lo, hi) if lo.is_infinite() => {
                let _ = writeln!(out, " {} <= {hi:.16e}", lp.col_name(j));
            }
            (lo, hi) => {
                let _ = writeln!(out, " {lo:.16e} <= {} <= {hi:.16e}", lp.col_name(j));
            }
        }
    }
    out.push_str("End\n");
    out.into_bytes()
}

#[derive(Debug, Error)]
pub enum LiftError {
    #[error("inconsistent assignment: {0}")]
    Inconsistent(String),
}

/// Violated rows of an assignment, `(row name, violation amount)`.
pub fn verify_assignment(model: &MilpModel, values: &[f64], tol: f64) -> Vec<(String, f64)> {
    let mut out = Vec::new();
    for row in &model.rows {
        let act: f64 = row.coeffs.iter().map(|&(v, c)| c * values[v]).sum();
        let viol = match row.rel {
            Rel::Le => act - row.rhs,
            Rel::Ge => row.rhs - act,
            Rel::Eq => (act - row.rhs).abs(),
        };
        if viol > tol {
            out.push((row.name.clone(), viol));
        }
    }
    for v in &model.variables {
        let x = values[model.index[&v.kind]];
        if x < v.lower - tol || x > v.upper + tol {
            out.push((format!("bound {}", v.name), (v.lower - x).max(x - v.upper)));
        }
        if v.binary && (x - x.round()).abs() > tol {
            out.push((format!("integrality {}", v.name), (x - x.round()).abs()));
        }
    }
    out
}

/// Slack of every deactivated big-M row (tags eq2, eq3, eq18, eq19) at an
/// assignment; a negative slack means the constant is too small.
pub fn deactivated_bigm_slacks(model: &MilpModel, values: &[f64]) -> Vec<(String, f64)> {
    let mut out = Vec::new();
    for row in &model.rows {
        if !matches!(row.tag, "eq2" | "eq3" | "eq18" | "eq19") {
            continue;
        }
        let on = |v: usize| values[v] > 0.5;
        let mut coll_order = None;
        let mut selectors_on = true;
        for &(v, _) in &row.coeffs {
            match model.variables[v].kind {
                VarKind::CollOrder(..) => coll_order = Some(on(v)),
                VarKind::Loc(..) | VarKind::Mode(..) | VarKind::Traj(..) => {
                    selectors_on &= on(v);
                }
                _ => {}
            }
        }
        let active = match row.tag {
            "eq2" | "eq3" => selectors_on,
            "eq18" => selectors_on && coll_order == Some(true),
            "eq19" => selectors_on && coll_order == Some(false),
            _ => unreachable!(),
        };
        if active {
            continue;
        }
        let act: f64 = row.coeffs.iter().map(|&(v, c)| c * values[v]).sum();
        let slack = match row.rel {
            Rel::Le => row.rhs - act,
            Rel::Ge => act - row.rhs,
            Rel::Eq => continue,
        };
        out.push((row.name.clone(), slack));
    }
    out
}

/// Converts a variable assignment (e.g. read back from an external solver)
/// into a [`Solution`]. Binary values are rounded; structural consistency is
/// verified, timing feasibility is the checker's job. Reported energies are
/// recomputed with the exact model; `criterion` keeps the assignment's
/// linearized objective value.
pub fn lift_milp_solution(
    cell: &Cell,
    model: &MilpModel,
    values: &[f64],
) -> Result<Solution, LiftError> {
    if values.len() != model.variables.len() {
        return Err(LiftError::Inconsistent(format!(
            "expected {} variable values, got {}",
            model.variables.len(),
            values.len()
        )));
    }
    let on = |kind: VarKind| values[model.var(kind)] > 0.5;

    let mut loc_of: Vec<Option<usize>> = vec![None; cell.statics.len()];
    let mut mode_of: Vec<Option<usize>> = vec![None; cell.statics.len()];
    for (s, info) in cell.statics.iter().enumerate() {
        for &l in &info.locations {
            if on(VarKind::Loc(s, l)) {
                if loc_of[s].is_some() {
                    return Err(LiftError::Inconsistent(format!(
                        "two locations selected for {}",
                        info.id
                    )));
                }
                loc_of[s] = Some(l);
            }
        }
        for m in 0..cell.robots[info.robot].modes.len() {
            if on(VarKind::Mode(s, m)) {
                if mode_of[s].is_some() {
                    return Err(LiftError::Inconsistent(format!(
                        "two modes selected for {}",
                        info.id
                    )));
                }
                mode_of[s] = Some(m);
            }
        }
        if loc_of[s].is_none() || mode_of[s].is_none() {
            return Err(LiftError::Inconsistent(format!(
                "no location or mode selected for {}",
                info.id
            )));
        }
    }
    let mut traj_of: Vec<Option<usize>> = vec![None; cell.dynamics.len()];
    for (e, info) in cell.dynamics.iter().enumerate() {
        for &t in &info.trajectories {
            if on(VarKind::Traj(e, t)) {
                if traj_of[e].is_some() {
                    return Err(LiftError::Inconsistent(format!(
                        "two trajectories selected for {}",
                        info.id
                    )));
                }
                traj_of[e] = Some(t);
            }
        }
        if !info.optional && traj_of[e].is_none() {
            return Err(LiftError::Inconsistent(format!(
                "no trajectory selected for mandatory movement {}",
                info.id
            )));
        }
        if info.optional {
            let w = on(VarKind::OrderSel(e));
            if w != traj_of[e].is_some() {
                return Err(LiftError::Inconsistent(format!(
                    "order selection of {} does not match its trajectory selection",
                    info.id
                )));
            }
        }
    }

    // walk each robot's executed movements into a circuit ending at home
    let mut robots = Vec::with_capacity(cell.robots.len());
    let mut start = BTreeMap::new();
    let mut duration = BTreeMap::new();
    let mut energy = BTreeMap::new();
    let mut total = 0.0;
    for rinfo in &cell.robots {
        let next_of = |s: usize| -> Result<usize, LiftError> {
            let executed: Vec<usize> = cell.statics[s]
                .out_edges
                .iter()
                .copied()
                .filter(|&e| traj_of[e].is_some())
                .collect();
            match executed.as_slice() {
                [e] => Ok(*e),
                _ => Err(LiftError::Inconsistent(format!(
                    "{} has {} executed outgoing movements",
                    cell.statics[s].id,
                    executed.len()
                ))),
            }
        };
        let mut steps = Vec::new();
        let first_edge = next_of(rinfo.home)?;
        let mut s = cell.dynamics[first_edge].to;
        let mut visited = 1;
        loop {
            let sid = cell.statics[s].id.clone();
            let l = loc_of[s].unwrap();
            let m = mode_of[s].unwrap();
            steps.push(SelectionStep {
                activity: sid.clone(),
                location: Some(cell.locations[l].id.clone()),
                mode: Some(rinfo.modes[m].id.clone()),
                trajectory: None,
            });
            let aref = ActivityRef::Static(s);
            start.insert(sid.clone(), values[model.var(VarKind::Start(aref))]);
            duration.insert(sid.clone(), values[model.var(VarKind::Duration(aref))]);
            let w = cell.loc_power(l, m) * values[model.var(VarKind::Duration(aref))];
            energy.insert(sid, w);
            total += w;

            let e = next_of(s)?;
            let eid = cell.dynamics[e].id.clone();
            let t = traj_of[e].unwrap();
            steps.push(SelectionStep {
                activity: eid.clone(),
                location: None,
                mode: None,
                trajectory: Some(cell.trajectories[t].id.clone()),
            });
            let aref = ActivityRef::Dynamic(e);
            let d = values[model.var(VarKind::Duration(aref))];
            start.insert(eid.clone(), values[model.var(VarKind::Start(aref))]);
            duration.insert(eid.clone(), d);
            let w = cell.trajectories[t].energy.eval(d).map_err(|_| {
                LiftError::Inconsistent(format!("movement {eid} has non-positive duration {d}"))
            })?;
            energy.insert(eid, w);
            total += w;

            let to = cell.dynamics[e].to;
            if to == rinfo.home {
                break;
            }
            s = to;
            visited += 1;
            if visited > rinfo.statics.len() {
                return Err(LiftError::Inconsistent(format!(
                    "executed movements of robot {} do not close a circuit",
                    rinfo.id
                )));
            }
        }
        // home step and the closing movement recorded at the end
        let home_id = cell.statics[rinfo.home].id.clone();
        let l = loc_of[rinfo.home].unwrap();
        let m = mode_of[rinfo.home].unwrap();
        let aref = ActivityRef::Static(rinfo.home);
        let d_home = values[model.var(VarKind::Duration(aref))];
        steps.push(SelectionStep {
            activity: home_id.clone(),
            location: Some(cell.locations[l].id.clone()),
            mode: Some(rinfo.modes[m].id.clone()),
            trajectory: None,
        });
        start.insert(home_id.clone(), values[model.var(VarKind::Start(aref))]);
        duration.insert(home_id.clone(), d_home);
        let w = cell.loc_power(l, m) * d_home;
        energy.insert(home_id, w);
        total += w;
        let t = traj_of[first_edge].unwrap();
        let first_eid = cell.dynamics[first_edge].id.clone();
        steps.push(SelectionStep {
            activity: first_eid.clone(),
            location: None,
            mode: None,
            trajectory: Some(cell.trajectories[t].id.clone()),
        });
        let aref = ActivityRef::Dynamic(first_edge);
        let d = values[model.var(VarKind::Duration(aref))];
        start.insert(first_eid.clone(), values[model.var(VarKind::Start(aref))]);
        duration.insert(first_eid.clone(), d);
        let w = cell.trajectories[t].energy.eval(d).map_err(|_| {
            LiftError::Inconsistent(format!(
                "movement {first_eid} has non-positive duration {d}"
            ))
        })?;
        energy.insert(first_eid, w);
        total += w;
        if steps.len() != 2 * rinfo.statics.len() {
            return Err(LiftError::Inconsistent(format!(
                "robot {} executes {} steps, expected {}",
                rinfo.id,
                steps.len(),
                2 * rinfo.statics.len()
            )));
        }
        robots.push(RobotSelection {
            robot: rinfo.id.clone(),
            steps,
        });
    }

    let criterion = model
        .objective
        .iter()
        .map(|&(v, c)| c * values[v])
        .sum::<f64>();
    Ok(Solution {
        format: crate::model::SOLUTION_FORMAT.to_owned(),
        status: SolutionStatus::Unknown,
        robots,
        start,
        duration,
        energy,
        total_energy: total,
        criterion,
        solver: None,
    })
}

/// Builds the MILP variable assignment a checker-feasible solution induces.
/// Unexecuted optional movements are parked at the start of their source's
/// departure with zero duration and energy.
pub fn assignment_from_solution(
    cell: &Cell,
    model: &MilpModel,
    solution: &Solution,
) -> Result<Vec<f64>, LiftError> {
    let mut values = vec![0.0; model.variables.len()];
    let set = |kind: VarKind, v: f64, values: &mut Vec<f64>| {
        values[model.var(kind)] = v;
    };

    let mut loc_of: Vec<Option<usize>> = vec![None; cell.statics.len()];
    let mut traj_of: Vec<Option<usize>> = vec![None; cell.dynamics.len()];
    for sel in &solution.robots {
        let Some(ri) = cell.robots.iter().position(|r| r.id == sel.robot) else {
            return Err(LiftError::Inconsistent(format!("unknown robot {}", sel.robot)));
        };
        for step in &sel.steps {
            let Some(aref) = cell.activity(&step.activity) else {
                return Err(LiftError::Inconsistent(format!(
                    "unknown activity {}",
                    step.activity
                )));
            };
            match aref {
                ActivityRef::Static(s) => {
                    let info = &cell.statics[s];
                    let l = info
                        .locations
                        .iter()
                        .copied()
                        .find(|&l| Some(cell.locations[l].id.as_str()) == step.location.as_deref())
                        .ok_or_else(|| {
                            LiftError::Inconsistent(format!("bad location for {}", info.id))
                        })?;
                    let m = cell.robots[ri]
                        .modes
                        .iter()
                        .position(|mo| Some(mo.id.as_str()) == step.mode.as_deref())
                        .ok_or_else(|| {
                            LiftError::Inconsistent(format!("bad mode for {}", info.id))
                        })?;
                    loc_of[s] = Some(l);
                    set(VarKind::Loc(s, l), 1.0, &mut values);
                    set(VarKind::Mode(s, m), 1.0, &mut values);
                }
                ActivityRef::Dynamic(e) => {
                    let t = cell.dynamics[e]
                        .trajectories
                        .iter()
                        .copied()
                        .find(|&t| {
                            Some(cell.trajectories[t].id.as_str()) == step.trajectory.as_deref()
                        })
                        .ok_or_else(|| {
                            LiftError::Inconsistent(format!(
                                "bad trajectory for {}",
                                cell.dynamics[e].id
                            ))
                        })?;
                    traj_of[e] = Some(t);
                    set(VarKind::Traj(e, t), 1.0, &mut values);
                    if cell.dynamics[e].optional {
                        set(VarKind::OrderSel(e), 1.0, &mut values);
                    }
                }
            }
            let s = *solution.start.get(&step.activity).ok_or_else(|| {
                LiftError::Inconsistent(format!("missing start for {}", step.activity))
            })?;
            let d = *solution.duration.get(&step.activity).ok_or_else(|| {
                LiftError::Inconsistent(format!("missing duration for {}", step.activity))
            })?;
            set(VarKind::Start(aref), s, &mut values);
            set(VarKind::Duration(aref), d, &mut values);
        }
    }

    // energies: exact stationary, linearized movement values (the rows the
    // objective presses W against)
    for (s, info) in cell.statics.iter().enumerate() {
        let l = loc_of[s]
            .ok_or_else(|| LiftError::Inconsistent(format!("{} not executed", info.id)))?;
        let m = (0..cell.robots[info.robot].modes.len())
            .find(|&m| values[model.var(VarKind::Mode(s, m))] > 0.5)
            .unwrap();
        let d = values[model.var(VarKind::Duration(ActivityRef::Static(s)))];
        set(
            VarKind::Energy(ActivityRef::Static(s)),
            cell.loc_power(l, m) * d,
            &mut values,
        );
    }
    let segments = model.segments;
    for (e, info) in cell.dynamics.iter().enumerate() {
        let aref = ActivityRef::Dynamic(e);
        match traj_of[e] {
            Some(t) => {
                let tr = &cell.trajectories[t];
                let d = values[model.var(VarKind::Duration(aref))];
                let pwl = pwl_approximate(&tr.energy, tr.d_min, tr.d_max, segments)
                    .expect("validated trajectory energy");
                set(VarKind::Energy(aref), pwl.value(d), &mut values);
            }
            None => {
                // park the phantom start where the precedence rows pin it
                let from = info.from;
                let pred = ActivityRef::Static(from);
                let s_pred = values[model.var(VarKind::Start(pred))];
                let d_pred = values[model.var(VarKind::Duration(pred))];
                let s = if cell.statics[from].is_home {
                    s_pred + d_pred - cell.cycle_time()
                } else {
                    s_pred + d_pred
                };
                set(VarKind::Start(aref), s, &mut values);
                set(VarKind::Duration(aref), 0.0, &mut values);
                set(VarKind::Energy(aref), 0.0, &mut values);
            }
        }
    }

    // collision ordering binaries
    let ct = cell.cycle_time();
    for (o, quad) in cell.collisions.iter().enumerate() {
        let selected = |aref: ActivityRef, item: ItemRef| match (aref, item) {
            (ActivityRef::Static(s), ItemRef::Loc(l)) => loc_of[s] == Some(l),
            (ActivityRef::Dynamic(e), ItemRef::Traj(t)) => traj_of[e] == Some(t),
            _ => false,
        };
        let both = selected(quad.a1, quad.item1) && selected(quad.a2, quad.item2);
        for n in -(cell.robots.len() as i64)..=(cell.robots.len() as i64) {
            let choose = if both {
                let s1 = values[model.var(VarKind::Start(quad.a1))];
                let d1 = values[model.var(VarKind::Duration(quad.a1))];
                let s2 = values[model.var(VarKind::Start(quad.a2))];
                let upsilon = s1 + d1 - s2 - n as f64 * ct;
                if upsilon <= FEAS_TOL {
                    1.0
                } else {
                    0.0
                }
            } else {
                0.0
            };
            set(VarKind::CollOrder(o, n), choose, &mut values);
        }
    }

    Ok(values)
}
