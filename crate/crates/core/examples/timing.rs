// scratch timing probe; not part of the deliverable
use cellopt_core::generate::{generate_instance, GeneratorConfig};
use cellopt_core::heuristic::{optimize, HeuristicConfig};
use cellopt_core::model::Cell;
use std::time::Instant;

fn main() {
    let seed: u64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(1);
    let budget: u64 = std::env::args().nth(2).and_then(|s| s.parse().ok()).unwrap_or(50_000);
    let instance = generate_instance(&GeneratorConfig::tiny(seed)).unwrap();
    let cell = Cell::new(instance).unwrap();
    let t = Instant::now();
    let report = optimize(
        &cell,
        &HeuristicConfig {
            eval_budget: Some(budget),
            seed,
            ..Default::default()
        },
    );
    println!(
        "seed {seed}: {:.1}s for {} evals ({:.0}/s), best {:?}",
        t.elapsed().as_secs_f64(),
        report.total_lp_evaluations(),
        report.lp_evaluations_per_second,
        report.best.map(|b| b.total_energy)
    );
}
