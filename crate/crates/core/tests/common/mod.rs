//! Shared test support: an independent reference LP solver and hand-built
//! instances.
//!
//! The reference simplex is deliberately naive (full tableau, Bland's rule
//! everywhere, artificials on every row) and shares no code with the crate's
//! solver, so agreement between the two is meaningful evidence.

#![allow(dead_code)]

use cellopt_core::lp::{LinearProgram, Rel};
use cellopt_core::model::{
    DynamicActivity, EnergyFunction, Instance, Location, PowerMode, Robot, StaticActivity,
    Trajectory,
};
use std::collections::BTreeMap;

#[derive(Debug, PartialEq)]
pub enum RefOutcome {
    Optimal { objective: f64, x: Vec<f64> },
    Infeasible,
    Unbounded,
}

/// Reference solve of a [`LinearProgram`] whose variable bounds are all
/// finite. Shifts variables to zero lower bounds, turns upper bounds into
/// rows, and runs a textbook two-phase tableau simplex with Bland's rule.
pub fn reference_solve(lp: &LinearProgram) -> RefOutcome {
    let n = lp.n_cols();
    let mut lower = Vec::with_capacity(n);
    let mut width = Vec::with_capacity(n);
    for j in 0..n {
        let (lo, hi) = lp.bounds(j);
        assert!(
            lo.is_finite() && hi.is_finite(),
            "reference solver needs finite bounds"
        );
        lower.push(lo);
        width.push(hi - lo);
    }

    // rows in shifted coordinates
    struct RefRow {
        coeffs: Vec<f64>,
        rel: Rel,
        rhs: f64,
    }
    let mut rows = Vec::new();
    for i in 0..lp.n_rows() {
        let mut coeffs = vec![0.0; n];
        let mut shift = 0.0;
        for &(j, c) in lp.row_coeffs(i) {
            coeffs[j] += c;
            shift += c * lower[j];
        }
        rows.push(RefRow {
            coeffs,
            rel: lp.row_rel(i),
            rhs: lp.row_rhs(i) - shift,
        });
    }
    for j in 0..n {
        let mut coeffs = vec![0.0; n];
        coeffs[j] = 1.0;
        rows.push(RefRow {
            coeffs,
            rel: Rel::Le,
            rhs: width[j],
        });
    }

    // standard form: equalities with slack/surplus, nonnegative rhs,
    // artificial basis on every row
    let m = rows.len();
    let mut ncols = n;
    let mut a: Vec<Vec<f64>> = Vec::with_capacity(m);
    let mut b = Vec::with_capacity(m);
    for row in &rows {
        let mut r = row.coeffs.clone();
        r.resize(n, 0.0);
        a.push(r);
        b.push(row.rhs);
    }
    for (i, row) in rows.iter().enumerate() {
        match row.rel {
            Rel::Le => {
                for (k, arow) in a.iter_mut().enumerate() {
                    arow.push(if k == i { 1.0 } else { 0.0 });
                }
                ncols += 1;
            }
            Rel::Ge => {
                for (k, arow) in a.iter_mut().enumerate() {
                    arow.push(if k == i { -1.0 } else { 0.0 });
                }
                ncols += 1;
            }
            Rel::Eq => {}
        }
    }
    for i in 0..m {
        if b[i] < 0.0 {
            b[i] = -b[i];
            for v in a[i].iter_mut() {
                *v = -*v;
            }
        }
    }
    let first_artificial = ncols;
    for i in 0..m {
        for (k, arow) in a.iter_mut().enumerate() {
            arow.push(if k == i { 1.0 } else { 0.0 });
        }
        ncols += 1;
    }
    let mut basis: Vec<usize> = (first_artificial..ncols).collect();

    // tableau = [a | b], pivoted in place
    let mut tab: Vec<Vec<f64>> = (0..m)
        .map(|i| {
            let mut r = a[i].clone();
            r.push(b[i]);
            r
        })
        .collect();

    let pivot = |tab: &mut Vec<Vec<f64>>, basis: &mut Vec<usize>, r: usize, j: usize| {
        let p = tab[r][j];
        for v in tab[r].iter_mut() {
            *v /= p;
        }
        for i in 0..tab.len() {
            if i == r {
                continue;
            }
            let f = tab[i][j];
            if f != 0.0 {
                for k in 0..tab[i].len() {
                    let delta = f * tab[r][k];
                    tab[i][k] -= delta;
                }
            }
        }
        basis[r] = j;
    };

    // Bland simplex on the tableau for a given cost vector; returns false on
    // unbounded
    let run = |tab: &mut Vec<Vec<f64>>,
               basis: &mut Vec<usize>,
               cost: &[f64],
               live: &dyn Fn(usize) -> bool|
     -> bool {
        loop {
            // reduced costs from scratch: r_j = c_j - c_B' T_j
            let mut entering = None;
            for j in 0..ncols {
                if !live(j) || basis.contains(&j) {
                    continue;
                }
                let mut r = cost[j];
                for (i, &bi) in basis.iter().enumerate() {
                    if cost[bi] != 0.0 {
                        r -= cost[bi] * tab[i][j];
                    }
                }
                if r < -1e-9 {
                    entering = Some(j);
                    break; // Bland: smallest index
                }
            }
            let Some(j) = entering else { return true };
            let mut leave: Option<usize> = None;
            let mut best = f64::INFINITY;
            for i in 0..m {
                if tab[i][j] > 1e-9 {
                    let ratio = tab[i][ncols] / tab[i][j];
                    if ratio < best - 1e-12
                        || (ratio < best + 1e-12
                            && leave.is_some_and(|l| basis[i] < basis[l]))
                    {
                        best = ratio;
                        leave = Some(i);
                    }
                }
            }
            let Some(r) = leave else { return false };
            pivot(tab, basis, r, j);
        }
    };

    // phase 1
    let mut cost1 = vec![0.0; ncols];
    for c in cost1.iter_mut().skip(first_artificial) {
        *c = 1.0;
    }
    assert!(run(&mut tab, &mut basis, &cost1, &|_| true), "phase 1 is bounded");
    let p1: f64 = basis
        .iter()
        .enumerate()
        .filter(|&(_, &bi)| bi >= first_artificial)
        .map(|(i, _)| tab[i][ncols])
        .sum();
    if p1 > 1e-7 {
        return RefOutcome::Infeasible;
    }
    // drive leftover artificials out where possible
    for i in 0..m {
        if basis[i] >= first_artificial {
            if let Some(j) = (0..first_artificial).find(|&j| tab[i][j].abs() > 1e-9) {
                pivot(&mut tab, &mut basis, i, j);
            }
        }
    }

    // phase 2 with artificials frozen
    let mut cost2 = vec![0.0; ncols];
    for (j, c) in cost2.iter_mut().enumerate().take(n) {
        *c = lp.objective_coeff(j);
    }
    let live = |j: usize| j < first_artificial;
    if !run(&mut tab, &mut basis, &cost2, &live) {
        return RefOutcome::Unbounded;
    }

    let mut x = lower;
    for (i, &bi) in basis.iter().enumerate() {
        if bi < n {
            x[bi] += tab[i][ncols];
        }
    }
    let objective = (0..n).map(|j| lp.objective_coeff(j) * x[j]).sum();
    RefOutcome::Optimal { objective, x }
}

/// Verifies an infeasibility certificate `y` against the program:
/// sign-consistent with the row relations and with the finite bounds, and
/// strictly separating. Returns the separation margin (positive = valid).
pub fn farkas_margin(lp: &LinearProgram, ray: &[f64]) -> f64 {
    assert_eq!(ray.len(), lp.n_rows());
    let tol = 1e-7;
    for i in 0..lp.n_rows() {
        match lp.row_rel(i) {
            Rel::Le => {
                if ray[i] > tol {
                    return f64::NEG_INFINITY;
                }
            }
            Rel::Ge => {
                if ray[i] < -tol {
                    return f64::NEG_INFINITY;
                }
            }
            Rel::Eq => {}
        }
    }
    let mut ya = vec![0.0; lp.n_cols()];
    let mut yb = 0.0;
    for i in 0..lp.n_rows() {
        yb += ray[i] * lp.row_rhs(i);
        for &(j, c) in lp.row_coeffs(i) {
            ya[j] += ray[i] * c;
        }
    }
    let mut max_term = 0.0;
    for (j, &v) in ya.iter().enumerate() {
        let (lo, hi) = lp.bounds(j);
        if v > tol {
            if !hi.is_finite() {
                return f64::NEG_INFINITY;
            }
            max_term += v * hi;
        } else if v < -tol {
            if !lo.is_finite() {
                return f64::NEG_INFINITY;
            }
            max_term += v * lo;
        }
    }
    yb - max_term
}

// ---------------------------------------------------------------------------
// hand-built instances
// ---------------------------------------------------------------------------

/// Constant-power location with the given watts for every listed mode.
pub fn loc(id: &str, modes: &[(&str, f64)]) -> Location {
    Location {
        id: id.to_owned(),
        power: modes
            .iter()
            .map(|&(m, p)| (m.to_owned(), p))
            .collect::<BTreeMap<_, _>>(),
    }
}

pub fn linear_energy(k: f64, q: f64) -> EnergyFunction {
    EnergyFunction::new([k, q, 0.0, 0.0, 0.0])
}

/// `C3/d` style convex energy.
pub fn reciprocal_energy(c3: f64) -> EnergyFunction {
    EnergyFunction::new([0.0, 0.0, c3, 0.0, 0.0])
}

/// One robot with two statics (`home`, `work`) connected both ways, one
/// location each, one mode, simple convex movement energies.
pub fn two_activity_robot(id: &str, power: f64) -> Robot {
    let modes = vec![PowerMode {
        id: format!("{id}_hold"),
        min_switch_time: 0.0,
    }];
    let mode_powers: Vec<(&str, f64)> = vec![];
    let _ = mode_powers;
    let home = StaticActivity {
        id: format!("{id}_home"),
        d_min: 0.5,
        d_max: 100.0,
        locations: vec![loc(&format!("{id}_home_l"), &[(&format!("{id}_hold"), power)])],
    };
    let work = StaticActivity {
        id: format!("{id}_work"),
        d_min: 1.0,
        d_max: 10.0,
        locations: vec![loc(&format!("{id}_work_l"), &[(&format!("{id}_hold"), power)])],
    };
    let go = DynamicActivity {
        id: format!("{id}_go"),
        from: format!("{id}_home"),
        to: format!("{id}_work"),
        optional: false,
        trajectories: vec![Trajectory {
            id: format!("{id}_go_t"),
            from_loc: format!("{id}_home_l"),
            to_loc: format!("{id}_work_l"),
            d_min: 1.0,
            d_max: 4.0,
            energy: reciprocal_energy(100.0),
        }],
    };
    let back = DynamicActivity {
        id: format!("{id}_back"),
        from: format!("{id}_work"),
        to: format!("{id}_home"),
        optional: false,
        trajectories: vec![Trajectory {
            id: format!("{id}_back_t"),
            from_loc: format!("{id}_work_l"),
            to_loc: format!("{id}_home_l"),
            d_min: 1.0,
            d_max: 4.0,
            energy: reciprocal_energy(80.0),
        }],
    };
    Robot {
        id: id.to_owned(),
        home: format!("{id}_home"),
        modes,
        static_activities: vec![home, work],
        dynamic_activities: vec![go, back],
    }
}

/// Minimal valid single-robot instance with a generous cycle time.
pub fn one_robot_instance() -> Instance {
    Instance {
        format: "cellopt/1".to_owned(),
        cycle_time: 12.0,
        robots: vec![two_activity_robot("r1", 50.0)],
        time_lags: Vec::new(),
        compat: Vec::new(),
        collisions: Vec::new(),
    }
}

/// The worked two-robot example: robot 1 with four statics and two operation
/// orders (optional movements), robot 2 with a simple three-static chain,
/// handover compatibility between `v4`/`v5` and the two cross-robot lags.
pub fn example_cell() -> Instance {
    let m1 = "m1";
    let m2 = "m2";
    let quick = |id: &str, dmin: f64, dmax: f64, locs: Vec<Location>| StaticActivity {
        id: id.to_owned(),
        d_min: dmin,
        d_max: dmax,
        locations: locs,
    };
    let traj = |id: &str, from: &str, to: &str, dmin: f64, dmax: f64| Trajectory {
        id: id.to_owned(),
        from_loc: from.to_owned(),
        to_loc: to.to_owned(),
        d_min: dmin,
        d_max: dmax,
        energy: reciprocal_energy(60.0),
    };
    let edge = |id: &str, from: &str, to: &str, optional: bool, trajs: Vec<Trajectory>| {
        DynamicActivity {
            id: id.to_owned(),
            from: from.to_owned(),
            to: to.to_owned(),
            optional,
            trajectories: trajs,
        }
    };

    let r1 = Robot {
        id: "r1".to_owned(),
        home: "v4".to_owned(),
        modes: vec![PowerMode {
            id: m1.to_owned(),
            min_switch_time: 0.0,
        }],
        static_activities: vec![
            quick("v1", 1.0, 6.0, vec![loc("l1_1", &[(m1, 100.0)])]),
            quick("v2", 1.0, 6.0, vec![loc("l2_1", &[(m1, 120.0)])]),
            quick("v3", 1.0, 6.0, vec![loc("l3_1", &[(m1, 110.0)])]),
            quick(
                "v4",
                0.5,
                100.0,
                vec![loc("l4_1", &[(m1, 40.0)]), loc("l4_2", &[(m1, 45.0)])],
            ),
        ],
        dynamic_activities: vec![
            edge(
                "e1_2",
                "v1",
                "v2",
                true,
                vec![traj("t1_2", "l1_1", "l2_1", 1.0, 4.0)],
            ),
            edge(
                "e1_3",
                "v1",
                "v3",
                true,
                vec![traj("t1_3", "l1_1", "l3_1", 1.0, 4.0)],
            ),
            edge(
                "e2_3",
                "v2",
                "v3",
                true,
                vec![traj("t2_3", "l2_1", "l3_1", 1.0, 4.0)],
            ),
            edge(
                "e2_4",
                "v2",
                "v4",
                true,
                vec![
                    traj("t2_4a", "l2_1", "l4_1", 1.0, 4.0),
                    traj("t2_4b", "l2_1", "l4_2", 1.0, 4.0),
                ],
            ),
            edge(
                "e3_2",
                "v3",
                "v2",
                true,
                vec![traj("t3_2", "l3_1", "l2_1", 1.0, 4.0)],
            ),
            edge(
                "e3_4",
                "v3",
                "v4",
                true,
                vec![
                    traj("t3_4a", "l3_1", "l4_1", 1.0, 4.0),
                    traj("t3_4b", "l3_1", "l4_2", 1.0, 4.0),
                ],
            ),
            edge(
                "e4_1",
                "v4",
                "v1",
                false,
                vec![
                    traj("t4_1a", "l4_1", "l1_1", 1.0, 4.0),
                    traj("t4_1b", "l4_2", "l1_1", 1.0, 4.0),
                ],
            ),
        ],
    };

    let r2 = Robot {
        id: "r2".to_owned(),
        home: "v7".to_owned(),
        modes: vec![PowerMode {
            id: m2.to_owned(),
            min_switch_time: 0.0,
        }],
        static_activities: vec![
            quick(
                "v5",
                1.0,
                8.0,
                vec![loc("l5_1", &[(m2, 90.0)]), loc("l5_2", &[(m2, 95.0)])],
            ),
            quick("v6", 1.0, 8.0, vec![loc("l6_1", &[(m2, 130.0)])]),
            quick("v7", 0.5, 100.0, vec![loc("l7_1", &[(m2, 35.0)])]),
        ],
        dynamic_activities: vec![
            edge(
                "e5_6",
                "v5",
                "v6",
                false,
                vec![
                    traj("t5_6a", "l5_1", "l6_1", 1.0, 4.0),
                    traj("t5_6b", "l5_2", "l6_1", 1.0, 4.0),
                ],
            ),
            edge(
                "e6_7",
                "v6",
                "v7",
                false,
                vec![traj("t6_7", "l6_1", "l7_1", 1.0, 4.0)],
            ),
            edge(
                "e7_5",
                "v7",
                "v5",
                false,
                vec![
                    traj("t7_5a", "l7_1", "l5_1", 1.0, 4.0),
                    traj("t7_5b", "l7_1", "l5_2", 1.0, 4.0),
                ],
            ),
        ],
    };

    Instance {
        format: "cellopt/1".to_owned(),
        cycle_time: 20.0,
        robots: vec![r1, r2],
        time_lags: vec![
            // the bench handover: robot 2 picks up after robot 1 has left
            cellopt_core::model::TimeLag {
                from: "e4_1".to_owned(),
                to: "v5".to_owned(),
                length: 1.5,
                height: 0,
            },
            // robot 2 must have left the bench before the next weldment lands
            cellopt_core::model::TimeLag {
                from: "e5_6".to_owned(),
                to: "v4".to_owned(),
                length: 1.5,
                height: 1,
            },
        ],
        compat: vec![cellopt_core::model::SpatialCompatPair {
            activity_1: "v4".to_owned(),
            activity_2: "v5".to_owned(),
            pairs: vec![
                ("l4_1".to_owned(), "l5_2".to_owned()),
                ("l4_2".to_owned(), "l5_1".to_owned()),
            ],
        }],
        collisions: vec![cellopt_core::model::CollisionQuad {
            activity_1: "v4".to_owned(),
            item_1: "l4_1".to_owned(),
            activity_2: "v5".to_owned(),
            item_2: "l5_2".to_owned(),
        }],
    }
}
