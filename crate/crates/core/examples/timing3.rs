// scratch profiling probe; not part of the deliverable
use cellopt_core::generate::{generate_instance, GeneratorConfig};
use cellopt_core::graph::{all_pairs_min_duration, build_search_graph, enumerate_alternatives, EnumLimit};
use cellopt_core::lp::{solve_lp, warm_solve};
use cellopt_core::model::Cell;
use cellopt_core::reduced::build_reduced_lp;
use cellopt_core::rng::SplitMix64;
use cellopt_core::tuples::generate_tuple;
use std::time::Instant;

fn main() {
    let instance = generate_instance(&GeneratorConfig::tiny(1)).unwrap();
    let cell = Cell::new(instance).unwrap();
    let store: Vec<_> = (0..cell.robots.len())
        .map(|r| {
            let g = build_search_graph(&cell, r);
            let u = all_pairs_min_duration(&g);
            let mut rng = SplitMix64::new(1 + r as u64);
            enumerate_alternatives(&cell, &g, &u, cell.cycle_time(), &mut rng, EnumLimit::Count(20)).alternatives
        })
        .collect();
    let mut rng = SplitMix64::new(1);
    let tuple = generate_tuple(&cell, &store, &mut rng).unwrap();
    let reduced = build_reduced_lp(&cell, &tuple, 10, &[]);
    let cold = solve_lp(&reduced.lp);
    println!("cold: {} iterations", cold.iterations);
    let basis = cold.basis.clone().unwrap();

    // identical re-solve
    let t = Instant::now();
    let n = 3000;
    let mut iters = 0;
    for _ in 0..n {
        let r = warm_solve(&reduced.lp, &basis);
        iters += r.iterations;
    }
    println!(
        "warm identical: {:.1} us, {:.1} iterations avg",
        t.elapsed().as_micros() as f64 / n as f64,
        iters as f64 / n as f64
    );

    // modified tuple (mode switch): same dims, different bounds/costs
    let mut modified = tuple.clone();
    let s0 = cell.robots[0].statics[1];
    if cell.robots[0].modes.len() > 1 {
        modified.modes[s0] = 1 - modified.modes[s0];
    }
    let reduced2 = build_reduced_lp(&cell, &modified, 10, &[]);
    let t = Instant::now();
    let mut iters = 0;
    for _ in 0..n {
        let r = warm_solve(&reduced2.lp, &basis);
        iters += r.iterations;
    }
    println!(
        "warm after mode switch: {:.1} us, {:.1} iterations avg",
        t.elapsed().as_micros() as f64 / n as f64,
        iters as f64 / n as f64
    );
    let coldm = solve_lp(&reduced2.lp);
    let warmm = warm_solve(&reduced2.lp, &basis);
    println!("  objective warm {} vs cold {}", warmm.objective, coldm.objective);
}
