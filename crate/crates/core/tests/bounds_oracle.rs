//! Lower-bound validity and the exhaustive oracle's ground-truth role.

mod common;

use cellopt_core::bounds::{
    enumerate_plans, exhaustive_oracle, instance_lower_bound, robot_lower_bound, BoundMethod,
    OracleOutcome,
};
use cellopt_core::generate::{generate_instance, GeneratorConfig};
use cellopt_core::graph::{
    all_pairs_min_duration, build_search_graph, enumerate_alternatives, EnumLimit,
};
use cellopt_core::model::{check_solution, Cell};
use cellopt_core::reduced::{evaluate_tuple, EvalStatus, Unlimited};
use cellopt_core::rng::SplitMix64;

#[test]
fn single_robot_bound_is_the_exact_optimum() {
    // with one robot there are no global constraints: the bound equals the
    // oracle value
    let cell = Cell::new(common::one_robot_instance()).unwrap();
    let report = instance_lower_bound(&cell, 10, 100_000);
    assert_eq!(report.per_robot.len(), 1);
    assert_eq!(report.per_robot[0].method, BoundMethod::ExactEnumeration);
    assert!((report.total - report.per_robot[0].bound).abs() < 1e-12);
    match exhaustive_oracle(&cell, 10, 1_000_000) {
        OracleOutcome::Optimal(opt) => {
            assert!(
                (report.total - opt.criterion).abs() <= 1e-6 * opt.criterion.abs(),
                "bound {} vs oracle criterion {}",
                report.total,
                opt.criterion
            );
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn relaxation_never_exceeds_exact() {
    for seed in 0..8u64 {
        let instance = generate_instance(&GeneratorConfig::tiny(seed)).unwrap();
        let cell = Cell::new(instance).unwrap();
        for r in 0..cell.robots.len() {
            let exact = robot_lower_bound(&cell, r, 10, u64::MAX);
            let relaxed = robot_lower_bound(&cell, r, 10, 0);
            assert_eq!(exact.method, BoundMethod::ExactEnumeration);
            assert_eq!(relaxed.method, BoundMethod::ModeRelaxation);
            assert!(
                relaxed.bound <= exact.bound + 1e-9,
                "seed {seed} robot {r}: relaxed {} > exact {}",
                relaxed.bound,
                exact.bound
            );
        }
    }
}

#[test]
fn bound_is_below_every_tuple_evaluation() {
    for seed in 0..6u64 {
        let instance = generate_instance(&GeneratorConfig::tiny(seed)).unwrap();
        let cell = Cell::new(instance).unwrap();
        let bound = instance_lower_bound(&cell, 10, 100_000);
        let store: Vec<_> = (0..cell.robots.len())
            .map(|r| {
                let g = build_search_graph(&cell, r);
                let u = all_pairs_min_duration(&g);
                let mut rng = SplitMix64::new(seed + 1000 * r as u64);
                enumerate_alternatives(
                    &cell,
                    &g,
                    &u,
                    cell.cycle_time(),
                    &mut rng,
                    EnumLimit::Count(20),
                )
                .alternatives
            })
            .collect();
        let mut rng = SplitMix64::new(seed);
        for _ in 0..15 {
            let Ok(tuple) = cellopt_core::tuples::generate_tuple(&cell, &store, &mut rng) else {
                continue;
            };
            let ev = evaluate_tuple(&cell, &tuple, 10, &mut Unlimited);
            if ev.status == EvalStatus::Feasible {
                let criterion = ev.criterion;
                assert!(
                    bound.total <= criterion + 1e-6,
                    "seed {seed}: bound {} above criterion {criterion}",
                    bound.total
                );
            }
        }
    }
}

#[test]
fn oracle_never_loses_to_any_tuple_evaluation() {
    let instance = generate_instance(&GeneratorConfig::tiny(9)).unwrap();
    let cell = Cell::new(instance).unwrap();
    let OracleOutcome::Optimal(opt) = exhaustive_oracle(&cell, 10, 1_000_000) else {
        panic!("seed 9 solves");
    };
    assert!(check_solution(&cell, &opt).is_feasible());
    let store: Vec<_> = (0..cell.robots.len())
        .map(|r| {
            let g = build_search_graph(&cell, r);
            let u = all_pairs_min_duration(&g);
            let mut rng = SplitMix64::new(9 + r as u64);
            enumerate_alternatives(&cell, &g, &u, cell.cycle_time(), &mut rng, EnumLimit::Count(30))
                .alternatives
        })
        .collect();
    let mut rng = SplitMix64::new(9);
    for _ in 0..25 {
        let Ok(tuple) = cellopt_core::tuples::generate_tuple(&cell, &store, &mut rng) else {
            continue;
        };
        let ev = evaluate_tuple(&cell, &tuple, 10, &mut Unlimited);
        if ev.status == EvalStatus::Feasible {
            let total = ev.total_energy;
            assert!(opt.total_energy <= total + 1e-9);
        }
    }
}

#[test]
fn infeasible_cycle_time_is_detected_by_both() {
    let mut instance = generate_instance(&GeneratorConfig::tiny(3)).unwrap();
    instance.cycle_time = 0.25;
    let cell = Cell::new(instance).unwrap();
    match exhaustive_oracle(&cell, 10, 1_000_000) {
        OracleOutcome::Infeasible => {}
        other => panic!("expected infeasible, got {other:?}"),
    }
    let bound = instance_lower_bound(&cell, 10, 100_000);
    assert!(bound.total.is_infinite());
    assert!(bound
        .per_robot
        .iter()
        .any(|b| b.method == BoundMethod::Infeasible));
}

#[test]
fn budget_gate_reports_combination_count() {
    let instance = generate_instance(&GeneratorConfig::tiny(2)).unwrap();
    let cell = Cell::new(instance).unwrap();
    match exhaustive_oracle(&cell, 10, 1) {
        OracleOutcome::BudgetExceeded { combinations } => assert!(combinations > 1),
        other => panic!("expected budget gate, got {other:?}"),
    }
}

#[test]
fn plan_enumeration_respects_connectivity() {
    let instance = generate_instance(&GeneratorConfig::tiny(6)).unwrap();
    let cell = Cell::new(instance).unwrap();
    for r in 0..cell.robots.len() {
        let g = build_search_graph(&cell, r);
        let u = all_pairs_min_duration(&g);
        let mut rng = SplitMix64::new(6);
        let circuits =
            enumerate_alternatives(&cell, &g, &u, cell.cycle_time(), &mut rng, EnumLimit::Exhaustive);
        for alt in &circuits.alternatives {
            let plans = enumerate_plans(&cell, &alt.circuit, &alt.edges);
            assert!(!plans.is_empty(), "the fastest refinement always exists");
            for plan in &plans {
                let n = plan.circuit.len();
                for i in 0..n {
                    let t = &cell.trajectories[plan.trajs[i]];
                    assert_eq!(t.from_loc, plan.locs[i]);
                    assert_eq!(t.to_loc, plan.locs[(i + 1) % n]);
                }
            }
            // the fastest sequence is among the plans
            assert!(plans.iter().any(|p| p.locs == alt.fastest_locations));
        }
    }
}
