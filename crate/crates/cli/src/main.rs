//! `cellopt`: generate, validate, optimize, export, bound, check and
//! benchmark robotic-cell energy optimization instances.
//!
//! Exit codes are a stable contract: 0 success, 1 input error, 2 no solution
//! found (or a failed solution check), 3 instance proven infeasible.

use anyhow::{bail, Context, Result};
use cellopt_core::bounds::{instance_lower_bound, BoundMethod};
use cellopt_core::generate::{generate_instance, GeneratorConfig};
use cellopt_core::heuristic::{optimize, HeuristicConfig, RunReport};
use cellopt_core::io::{parse_instance, parse_solution, serialize_instance, serialize_solution};
use cellopt_core::milp::{build_milp, export_lp_file};
use cellopt_core::model::{check_solution, Cell};
use clap::{Args, Parser, Subcommand};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

#[derive(Parser)]
#[command(
    name = "cellopt",
    about = "Energy optimization of cyclic robotic cells",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a random instance from a preset or a config file
    Generate(GenerateArgs),
    /// Validate an instance file
    Validate { instance: PathBuf },
    /// Minimize the cell's energy with the parallel hybrid heuristic
    Optimize(OptimizeArgs),
    /// Export the complete mixed-integer model as CPLEX LP text
    #[command(name = "export-milp")]
    ExportMilp {
        instance: PathBuf,
        /// Output LP file
        #[arg(short, long)]
        out: PathBuf,
        /// Linearization pieces per trajectory energy function
        #[arg(long, default_value_t = 10)]
        segments: usize,
    },
    /// Lower bound on the optimal energy (per robot and total)
    Bound {
        instance: PathBuf,
        #[arg(long, default_value_t = 10)]
        segments: usize,
        /// Exact enumeration limit per robot before modes are relaxed
        #[arg(long, default_value_t = 100_000)]
        budget: u64,
    },
    /// Check a solution file against an instance
    Check {
        instance: PathBuf,
        solution: PathBuf,
    },
    /// Repeated optimization runs over instances with a CSV summary
    Bench(BenchArgs),
}

#[derive(Args)]
struct GenerateArgs {
    /// Preset: tiny, s5, m8 or l12
    #[arg(long, conflicts_with = "config")]
    preset: Option<String>,
    /// Generator configuration file (JSON)
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Override the preset's robot count
    #[arg(long)]
    robots: Option<usize>,
    /// Output instance file (stdout when omitted)
    #[arg(short, long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct OptimizeArgs {
    instance: PathBuf,
    /// Wall-clock limit in seconds
    #[arg(long, default_value_t = 60.0)]
    time_limit: f64,
    /// Worker threads (falls back to CELLOPT_THREADS, then 1)
    #[arg(long)]
    threads: Option<usize>,
    /// Non-improving iterations per tuple; defaults to 100/600/1000 by
    /// robot count
    #[arg(long)]
    phi_max: Option<u64>,
    #[arg(long, default_value_t = 10)]
    segments: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Deterministic mode: single worker, stop after --eval-budget LP
    /// evaluations instead of the wall clock
    #[arg(long)]
    deterministic: bool,
    /// LP evaluation budget for deterministic mode
    #[arg(long, default_value_t = 100_000)]
    eval_budget: u64,
    /// Output solution file
    #[arg(short, long)]
    out: Option<PathBuf>,
    /// Progress stream: one CSV line per new global best
    #[arg(long)]
    progress: Option<PathBuf>,
    /// Run report (JSON); defaults to "<out>.report.json"
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    /// Instance files
    instances: Vec<PathBuf>,
    #[arg(long, default_value_t = 10)]
    runs: usize,
    #[arg(long, default_value_t = 30.0)]
    time_limit: f64,
    /// Use a deterministic LP-evaluation budget instead of the wall clock
    #[arg(long)]
    eval_budget: Option<u64>,
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long, default_value_t = 10)]
    segments: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Lower-bound enumeration budget per robot
    #[arg(long, default_value_t = 100_000)]
    bound_budget: u64,
    /// Output CSV (stdout when omitted)
    #[arg(short, long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    match run() {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(1)
        }
    }
}

fn run() -> Result<ExitCode> {
    match Cli::parse().command {
        Command::Generate(args) => cmd_generate(args),
        Command::Validate { instance } => cmd_validate(&instance),
        Command::Optimize(args) => cmd_optimize(args),
        Command::ExportMilp {
            instance,
            out,
            segments,
        } => cmd_export_milp(&instance, &out, segments),
        Command::Bound {
            instance,
            segments,
            budget,
        } => cmd_bound(&instance, segments, budget),
        Command::Check { instance, solution } => cmd_check(&instance, &solution),
        Command::Bench(args) => cmd_bench(args),
    }
}

fn load_cell(path: &Path) -> Result<Cell> {
    let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    let instance =
        parse_instance(&bytes).with_context(|| format!("parsing {}", path.display()))?;
    Cell::new(instance).with_context(|| format!("indexing {}", path.display()))
}

fn threads_from(cli: Option<usize>) -> usize {
    cli.or_else(|| {
        std::env::var("CELLOPT_THREADS")
            .ok()
            .and_then(|v| v.parse().ok())
    })
    .unwrap_or(1)
    .max(1)
}

/// Default minimal iterations per tuple, scaled by instance size.
fn phi_max_for(robots: usize) -> u64 {
    if robots <= 5 {
        100
    } else if robots <= 8 {
        600
    } else {
        1000
    }
}

fn cmd_generate(args: GenerateArgs) -> Result<ExitCode> {
    let mut config = match (&args.preset, &args.config) {
        (Some(name), None) => GeneratorConfig::preset(name, args.seed)
            .with_context(|| format!("unknown preset {name:?} (tiny, s5, m8, l12)"))?,
        (None, Some(path)) => {
            let bytes =
                std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
            let mut config: GeneratorConfig =
                serde_json::from_slice(&bytes).context("parsing generator config")?;
            config.seed = args.seed;
            config
        }
        (None, None) => GeneratorConfig::tiny(args.seed),
        (Some(_), Some(_)) => unreachable!("clap forbids the combination"),
    };
    if let Some(robots) = args.robots {
        config.robot_count = robots;
    }
    let instance = generate_instance(&config)?;
    let bytes = serialize_instance(&instance);
    let summary = format!(
        "{} robots, {} static + {} dynamic activities, cycle time {:.3} s",
        instance.robots.len(),
        instance.static_count(),
        instance.dynamic_count(),
        instance.cycle_time
    );
    match &args.out {
        Some(path) => {
            std::fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))?;
            println!("{summary}");
            println!("wrote {}", path.display());
        }
        None => {
            use std::io::Write;
            std::io::stdout().write_all(&bytes)?;
            eprintln!("{summary}");
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_validate(path: &Path) -> Result<ExitCode> {
    let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    match parse_instance(&bytes) {
        Ok(instance) => {
            println!(
                "valid: {} robots, {} static + {} dynamic activities",
                instance.robots.len(),
                instance.static_count(),
                instance.dynamic_count()
            );
            Ok(ExitCode::SUCCESS)
        }
        Err(err) => {
            eprintln!("{err}");
            Ok(ExitCode::from(1))
        }
    }
}

fn cmd_optimize(args: OptimizeArgs) -> Result<ExitCode> {
    let cell = load_cell(&args.instance)?;
    let threads = threads_from(args.threads);
    if args.deterministic && threads != 1 {
        bail!("deterministic mode requires --threads 1");
    }
    let config = HeuristicConfig {
        time_limit: (!args.deterministic).then_some(args.time_limit),
        eval_budget: args.deterministic.then_some(args.eval_budget),
        phi_max: args.phi_max.unwrap_or_else(|| phi_max_for(cell.robots.len())),
        worker_count: threads,
        segments: args.segments,
        seed: args.seed,
        ..Default::default()
    };
    let report = optimize(&cell, &config);

    if let Some(path) = &args.progress {
        let mut text = String::from("time_s,energy_J,worker_id\n");
        for event in &report.progress {
            let _ = writeln!(text, "{},{:.16e},{}", event.time_s, event.energy, event.worker);
        }
        std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
    }
    let report_path = args
        .report
        .clone()
        .or_else(|| args.out.as_ref().map(|o| o.with_extension("report.json")));
    if let Some(path) = report_path {
        std::fs::write(&path, render_report(&report))
            .with_context(|| format!("writing {}", path.display()))?;
    }

    match &report.best {
        Some(best) => {
            println!(
                "feasible: total energy {:.3} J (criterion {:.3} J), {} LP evaluations, {:.1}/s",
                best.total_energy,
                best.criterion,
                report.total_lp_evaluations(),
                report.lp_evaluations_per_second
            );
            if let Some(path) = &args.out {
                std::fs::write(path, serialize_solution(best))
                    .with_context(|| format!("writing {}", path.display()))?;
            }
            Ok(ExitCode::SUCCESS)
        }
        None if report.infeasibility_proof => {
            let robots: Vec<&str> = report
                .alternatives_per_robot
                .iter()
                .enumerate()
                .filter(|&(_, &n)| n == 0)
                .map(|(r, _)| cell.robots[r].id.as_str())
                .collect();
            eprintln!(
                "infeasible: exhaustive enumeration found no operation order fitting the cycle time for {}",
                robots.join(", ")
            );
            Ok(ExitCode::from(3))
        }
        None => {
            eprintln!(
                "no feasible solution found ({} LP evaluations, {} tuples)",
                report.total_lp_evaluations(),
                report.tuples_processed
            );
            Ok(ExitCode::from(2))
        }
    }
}

fn render_report(report: &RunReport) -> Vec<u8> {
    // hand-assembled JSON keeps the report format independent of internals
    let mut map = serde_json::Map::new();
    map.insert("feasible".into(), report.best.is_some().into());
    if let Some(best) = &report.best {
        map.insert("total_energy".into(), best.total_energy.into());
        map.insert("criterion".into(), best.criterion.into());
    }
    map.insert(
        "lp_evaluations".into(),
        report.total_lp_evaluations().into(),
    );
    map.insert(
        "per_worker_lp_evaluations".into(),
        report.per_worker_lp_evaluations.clone().into(),
    );
    map.insert(
        "lp_evaluations_per_second".into(),
        report.lp_evaluations_per_second.into(),
    );
    map.insert("tuples_processed".into(), report.tuples_processed.into(),);
    map.insert(
        "infeasibility_proof".into(),
        report.infeasibility_proof.into(),
    );
    map.insert("wall_time_s".into(), report.wall_time_s.into());
    map.insert(
        "alternatives_per_robot".into(),
        report.alternatives_per_robot.clone().into(),
    );
    map.insert(
        "exhausted_per_robot".into(),
        report.exhausted_per_robot.clone().into(),
    );
    map.insert("elite_count".into(), report.elites.len().into());
    let mut bytes = serde_json::to_vec_pretty(&serde_json::Value::Object(map)).unwrap();
    bytes.push(b'\n');
    bytes
}

fn cmd_export_milp(instance: &Path, out: &Path, segments: usize) -> Result<ExitCode> {
    let cell = load_cell(instance)?;
    let model = build_milp(&cell, segments);
    std::fs::write(out, export_lp_file(&model))
        .with_context(|| format!("writing {}", out.display()))?;
    println!(
        "wrote {}: {} variables ({} binary), {} constraints",
        out.display(),
        model.variables.len(),
        model.variables.iter().filter(|v| v.binary).count(),
        model.rows.len()
    );
    Ok(ExitCode::SUCCESS)
}

fn cmd_bound(instance: &Path, segments: usize, budget: u64) -> Result<ExitCode> {
    let cell = load_cell(instance)?;
    let report = instance_lower_bound(&cell, segments, budget);
    for (r, bound) in report.per_robot.iter().enumerate() {
        let method = match bound.method {
            BoundMethod::ExactEnumeration => "exact enumeration",
            BoundMethod::ModeRelaxation => "mode relaxation",
            BoundMethod::Infeasible => "infeasible",
        };
        println!(
            "robot {}: {:.3} J ({method}, {} exact combinations)",
            cell.robots[r].id, bound.bound, bound.exact_combinations
        );
    }
    println!("total lower bound: {:.3} J ({:.2} s)", report.total, report.wall_time_s);
    Ok(ExitCode::SUCCESS)
}

fn cmd_check(instance: &Path, solution: &Path) -> Result<ExitCode> {
    let cell = load_cell(instance)?;
    let bytes =
        std::fs::read(solution).with_context(|| format!("reading {}", solution.display()))?;
    let solution = parse_solution(&bytes).context("parsing solution")?;
    let report = check_solution(&cell, &solution);
    if report.is_feasible() {
        println!(
            "feasible: total energy {:.3} J over {} activities",
            solution.total_energy,
            solution.energy.len()
        );
        Ok(ExitCode::SUCCESS)
    } else {
        eprintln!("{report}");
        Ok(ExitCode::from(2))
    }
}

fn cmd_bench(args: BenchArgs) -> Result<ExitCode> {
    if args.instances.is_empty() {
        bail!("no instance files given");
    }
    if args.runs == 0 {
        bail!("--runs must be positive");
    }
    let threads = threads_from(args.threads);
    let mut csv = String::from(
        "instance,runs,best,avg,worst,lower_bound,gap_percent,feasible_runs,wall_time_s\n",
    );
    for path in &args.instances {
        let cell = load_cell(path)?;
        let bound = instance_lower_bound(&cell, args.segments, args.bound_budget);
        let started = Instant::now();
        let mut criteria: Vec<f64> = Vec::new();
        for run in 0..args.runs {
            let config = HeuristicConfig {
                time_limit: args.eval_budget.is_none().then_some(args.time_limit),
                eval_budget: args.eval_budget,
                phi_max: phi_max_for(cell.robots.len()),
                worker_count: threads,
                segments: args.segments,
                seed: args.seed + run as u64,
                ..Default::default()
            };
            let report = optimize(&cell, &config);
            if let Some(best) = report.best {
                criteria.push(best.criterion);
            }
        }
        let wall = started.elapsed().as_secs_f64();
        let name = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| path.display().to_string());
        if criteria.is_empty() {
            let _ = writeln!(
                csv,
                "{name},{},,,,{:.6},,0,{wall:.3}",
                args.runs, bound.total
            );
            continue;
        }
        let best = criteria.iter().copied().fold(f64::INFINITY, f64::min);
        let worst = criteria.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let avg = criteria.iter().sum::<f64>() / criteria.len() as f64;
        let gap = if bound.total.is_finite() && bound.total > 0.0 {
            format!("{:.4}", (best - bound.total) / bound.total * 100.0)
        } else {
            String::new()
        };
        let _ = writeln!(
            csv,
            "{name},{},{best:.6},{avg:.6},{worst:.6},{:.6},{gap},{},{wall:.3}",
            args.runs,
            bound.total,
            criteria.len()
        );
    }
    match &args.out {
        Some(path) => {
            std::fs::write(path, csv).with_context(|| format!("writing {}", path.display()))?
        }
        None => print!("{csv}"),
    }
    Ok(ExitCode::SUCCESS)
}
