// scratch profiling probe; not part of the deliverable
use cellopt_core::generate::{generate_instance, GeneratorConfig};
use cellopt_core::graph::{all_pairs_min_duration, build_search_graph, enumerate_alternatives, EnumLimit};
use cellopt_core::lp::solve_lp;
use cellopt_core::model::Cell;
use cellopt_core::reduced::{build_reduced_lp, evaluate_tuple, Unlimited};
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

    let n = 3000;
    let t = Instant::now();
    for _ in 0..n {
        std::hint::black_box(build_reduced_lp(&cell, &tuple, 10, &[]));
    }
    println!("build_reduced_lp: {:.1} us", t.elapsed().as_micros() as f64 / n as f64);

    let reduced = build_reduced_lp(&cell, &tuple, 10, &[]);
    println!("LP size: {} cols x {} rows", reduced.lp.n_cols(), reduced.lp.n_rows());
    let t = Instant::now();
    for _ in 0..n {
        std::hint::black_box(solve_lp(&reduced.lp));
    }
    let res = solve_lp(&reduced.lp);
    println!(
        "solve_lp: {:.1} us ({} iterations)",
        t.elapsed().as_micros() as f64 / n as f64,
        res.iterations
    );

    let t = Instant::now();
    for _ in 0..n {
        std::hint::black_box(evaluate_tuple(&cell, &tuple, 10, &mut Unlimited));
    }
    println!("evaluate_tuple: {:.1} us", t.elapsed().as_micros() as f64 / n as f64);
}
