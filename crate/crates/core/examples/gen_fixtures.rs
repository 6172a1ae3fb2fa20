// scratch helper to (re)generate the committed test fixtures
use cellopt_core::generate::{generate_instance, GeneratorConfig};
use cellopt_core::io::serialize_instance;
use std::fs;

fn main() {
    let dir = std::path::Path::new("crates/core/tests/fixtures");
    fs::create_dir_all(dir).unwrap();
    for (name, config) in [
        ("tiny", GeneratorConfig::tiny(1)),
        ("small", GeneratorConfig::s5(1)),
        ("medium", GeneratorConfig::m8(1)),
    ] {
        let instance = generate_instance(&config).unwrap();
        fs::write(dir.join(format!("{name}.json")), serialize_instance(&instance)).unwrap();
        println!(
            "{name}: {} robots, {} statics, {} dynamics, CT {:.3}",
            instance.robots.len(),
            instance.static_count(),
            instance.dynamic_count(),
            instance.cycle_time
        );
    }
}
