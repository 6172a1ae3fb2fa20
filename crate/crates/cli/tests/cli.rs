//! Command-line surface: exit codes, file outputs, determinism.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn cellopt(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cellopt"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn tmpdir(name: &str) -> PathBuf {
    let dir = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join(name);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("no signal")
}

#[test]
fn generate_is_deterministic_and_validates() {
    let dir = tmpdir("generate");
    let a = cellopt(&["generate", "--preset", "tiny", "--seed", "1", "-o", "a.json"], &dir);
    assert_eq!(code(&a), 0, "{}", String::from_utf8_lossy(&a.stderr));
    let b = cellopt(&["generate", "--preset", "tiny", "--seed", "1", "-o", "b.json"], &dir);
    assert_eq!(code(&b), 0);
    assert_eq!(
        std::fs::read(dir.join("a.json")).unwrap(),
        std::fs::read(dir.join("b.json")).unwrap(),
        "same seed, same bytes"
    );
    let v = cellopt(&["validate", "a.json"], &dir);
    assert_eq!(code(&v), 0, "{}", String::from_utf8_lossy(&v.stderr));
}

#[test]
fn generate_preset_scales_robot_count() {
    let dir = tmpdir("presets");
    let out = cellopt(&["generate", "--preset", "l12", "--seed", "3", "-o", "l12.json"], &dir);
    assert_eq!(code(&out), 0);
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("12 robots"), "{stdout}");
    let out = cellopt(&["generate", "--preset", "nope", "--seed", "1"], &dir);
    assert_eq!(code(&out), 1);
}

#[test]
fn optimize_check_pipeline() {
    let dir = tmpdir("pipeline");
    let gen = cellopt(&["generate", "--preset", "tiny", "--seed", "4", "-o", "i.json"], &dir);
    assert_eq!(code(&gen), 0);
    let opt = cellopt(
        &[
            "optimize", "i.json", "--deterministic", "--threads", "1", "--seed", "4",
            "--eval-budget", "400", "-o", "s.json",
        ],
        &dir,
    );
    assert_eq!(code(&opt), 0, "{}", String::from_utf8_lossy(&opt.stderr));
    assert!(dir.join("s.json").exists());
    assert!(dir.join("s.report.json").exists());
    let check = cellopt(&["check", "i.json", "s.json"], &dir);
    assert_eq!(code(&check), 0, "{}", String::from_utf8_lossy(&check.stderr));

    // tampering with a start time must fail the check with a named violation
    let text = std::fs::read_to_string(dir.join("s.json")).unwrap();
    let mut sol: serde_json::Value = serde_json::from_str(&text).unwrap();
    let start = sol["start"].as_object_mut().unwrap();
    let key = start.keys().next().unwrap().clone();
    let old = start[&key].as_f64().unwrap();
    start.insert(key, (old + 3.21).into());
    std::fs::write(dir.join("bad.json"), serde_json::to_vec(&sol).unwrap()).unwrap();
    let check = cellopt(&["check", "i.json", "bad.json"], &dir);
    assert_eq!(code(&check), 2);
    let stderr = String::from_utf8_lossy(&check.stderr);
    assert!(stderr.contains("violation"), "{stderr}");
}

#[test]
fn deterministic_runs_are_byte_identical() {
    let dir = tmpdir("determinism");
    let gen = cellopt(&["generate", "--preset", "tiny", "--seed", "7", "-o", "i.json"], &dir);
    assert_eq!(code(&gen), 0);
    for name in ["x.json", "y.json"] {
        let opt = cellopt(
            &[
                "optimize", "i.json", "--deterministic", "--threads", "1", "--seed", "7",
                "--eval-budget", "300", "-o", name,
            ],
            &dir,
        );
        assert_eq!(code(&opt), 0);
    }
    assert_eq!(
        std::fs::read(dir.join("x.json")).unwrap(),
        std::fs::read(dir.join("y.json")).unwrap()
    );
}

#[test]
fn deterministic_mode_rejects_multiple_threads() {
    let dir = tmpdir("detthreads");
    let gen = cellopt(&["generate", "--preset", "tiny", "--seed", "1", "-o", "i.json"], &dir);
    assert_eq!(code(&gen), 0);
    let opt = cellopt(
        &["optimize", "i.json", "--deterministic", "--threads", "2", "-o", "s.json"],
        &dir,
    );
    assert_eq!(code(&opt), 1);
}

#[test]
fn export_milp_writes_lp_text() {
    let dir = tmpdir("export");
    let gen = cellopt(&["generate", "--preset", "tiny", "--seed", "2", "-o", "i.json"], &dir);
    assert_eq!(code(&gen), 0);
    let exp = cellopt(&["export-milp", "i.json", "-o", "m.lp"], &dir);
    assert_eq!(code(&exp), 0, "{}", String::from_utf8_lossy(&exp.stderr));
    let text = std::fs::read_to_string(dir.join("m.lp")).unwrap();
    assert!(text.starts_with('\\'));
    assert!(text.contains("Minimize"));
    assert!(text.trim_end().ends_with("End"));
    // exporting twice is byte-identical
    let exp2 = cellopt(&["export-milp", "i.json", "-o", "m2.lp"], &dir);
    assert_eq!(code(&exp2), 0);
    assert_eq!(
        std::fs::read(dir.join("m.lp")).unwrap(),
        std::fs::read(dir.join("m2.lp")).unwrap()
    );
}

#[test]
fn bound_prints_per_robot_values() {
    let dir = tmpdir("bound");
    let gen = cellopt(&["generate", "--preset", "tiny", "--seed", "5", "-o", "i.json"], &dir);
    assert_eq!(code(&gen), 0);
    let out = cellopt(&["bound", "i.json"], &dir);
    assert_eq!(code(&out), 0);
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("robot r1"), "{stdout}");
    assert!(stdout.contains("total lower bound"), "{stdout}");
}

#[test]
fn bench_emits_ordered_statistics() {
    let dir = tmpdir("bench");
    for seed in ["1", "2", "3"] {
        let gen = cellopt(
            &["generate", "--preset", "tiny", "--seed", seed, "-o", &format!("i{seed}.json")],
            &dir,
        );
        assert_eq!(code(&gen), 0);
    }
    let out = cellopt(
        &[
            "bench", "i1.json", "i2.json", "i3.json", "--runs", "3", "--eval-budget", "150",
            "-o", "bench.csv",
        ],
        &dir,
    );
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.join("bench.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next().unwrap(),
        "instance,runs,best,avg,worst,lower_bound,gap_percent,feasible_runs,wall_time_s"
    );
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 3);
    for row in rows {
        let cols: Vec<&str> = row.split(',').collect();
        assert_eq!(cols.len(), 9, "{row}");
        if cols[7] != "0" {
            let best: f64 = cols[2].parse().unwrap();
            let avg: f64 = cols[3].parse().unwrap();
            let worst: f64 = cols[4].parse().unwrap();
            assert!(best <= avg && avg <= worst, "{row}");
        }
    }
}

#[test]
fn missing_input_is_an_input_error() {
    let dir = tmpdir("missing");
    let out = cellopt(&["optimize", "nope.json", "-o", "s.json"], &dir);
    assert_eq!(code(&out), 1);
    let out = cellopt(&["validate", "nope.json"], &dir);
    assert_eq!(code(&out), 1);
}
