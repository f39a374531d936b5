use std::fs;
use std::path::Path;
use std::process::Command;

use dunkl_cli::commands::{render_paths, simulate_cmd};
use dunkl_cli::config::{ExperimentConfig, Suite};
use dunkl_cli::fixtures::dump_fixtures;
use dunkl_cli::{execute, run_suite};

fn small(out: &Path, multiplicity: &str) -> ExperimentConfig {
    let text = format!(
        r#"
seed = 7
t_end = 0.5
dt = 0.01
n_paths = 200
n_max = 4
output_dir = "{}"

[[systems]]
name = "r1"
kind = "rank1"
dim = 1
multiplicities = ["{multiplicity}"]
x0 = [1.0]

[symbolic]
operator_degree = 3
intertwine_degree = 3

[density]
k = ["1"]
series_degree = 64

[paths]
refine_k = ["1"]
dump_paths = 2

[hermite]
max_degree = 2

[chaos]
dt = 0.005

[[chaos.specs]]
times = ["1/2"]
nus = [[1]]
"#,
        out.display()
    );
    ExperimentConfig::parse(&text).unwrap()
}

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_dunkl"))
}

#[test]
fn config_round_trips_through_canonical_form() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small(dir.path(), "1");
    let again = ExperimentConfig::parse(&cfg.canonical()).unwrap();
    assert_eq!(again.canonical(), cfg.canonical());
    assert_eq!(again.digest(), cfg.digest());
}

#[test]
fn symbolic_suite_passes_without_monte_carlo() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small(dir.path(), "1");
    let report = run_suite(&cfg, Suite::Symbolic).unwrap();
    assert!(report.passed, "{:?}", report.failures().map(|c| &c.name).collect::<Vec<_>>());
    assert!(report.checks.iter().all(|c| c.samples.is_none()));
    assert!(dir.path().join("report-symbolic.json").exists());
    assert!(dir.path().join("checks-symbolic.csv").exists());
}

#[test]
fn full_run_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small(dir.path(), "1");
    let (a, ra) = execute(&cfg, Suite::All).unwrap();
    let (b, rb) = execute(&cfg, Suite::All).unwrap();
    assert_eq!(a.to_json(), b.to_json());
    assert_eq!(ra.artifacts, rb.artifacts);
    let seed_changed = ExperimentConfig { seed: 8, ..cfg.clone() };
    let (c, _) = execute(&seed_changed, Suite::Paths).unwrap();
    let (d, _) = execute(&cfg, Suite::Paths).unwrap();
    assert_ne!(c.to_json(), d.to_json());
}

#[test]
fn fixtures_are_idempotent() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small(dir.path(), "1");
    let first = dump_fixtures(&cfg).unwrap();
    let texts: Vec<String> = first.iter().map(|p| fs::read_to_string(p).unwrap()).collect();
    let second = dump_fixtures(&cfg).unwrap();
    assert_eq!(first, second);
    for (p, t) in second.iter().zip(&texts) {
        assert_eq!(&fs::read_to_string(p).unwrap(), t);
    }
    let m = fs::read_to_string(dir.path().join("fixtures/rank1_k1/m.txt")).unwrap();
    assert!(m.contains("m(1) = (1/3+0*sqrt2)*x1\n"), "{m}");
}

#[test]
fn zero_multiplicity_paths_never_jump() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small(dir.path(), "0");
    let written = simulate_cmd(&cfg).unwrap();
    assert_eq!(written.len(), 6);
    let path = fs::read_to_string(dir.path().join("paths/r1/path_0.csv")).unwrap();
    let mut lines = path.lines();
    assert_eq!(lines.next(), Some("t,x1,jump_flag,jump_root"));
    assert!(lines.all(|l| l.ends_with(",0,")));
    let jumps = fs::read_to_string(dir.path().join("paths/r1/jumps_0.csv")).unwrap();
    assert_eq!(jumps.lines().count(), 1);
    assert_eq!(render_paths(&cfg).unwrap().len(), 6);

    let report = run_suite(&cfg, Suite::Paths).unwrap();
    let none = report.checks.iter().find(|c| c.name == "r1/jumps/no_jumps_at_zero_multiplicity").unwrap();
    assert!(none.passed);
}

#[test]
fn binary_honours_out_dir_override_and_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small(&dir.path().join("ignored"), "1");
    let config = dir.path().join("c.toml");
    fs::write(&config, cfg.canonical()).unwrap();
    let target = dir.path().join("override");
    let status = bin()
        .args(["run", "--suite", "symbolic", "--config"])
        .arg(&config)
        .env("DUNKL_OUT_DIR", &target)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    assert!(target.join("report-symbolic.json").exists());
    assert!(!dir.path().join("ignored").exists());

    let bad = dir.path().join("bad.toml");
    fs::write(&bad, "seed = 1\n").unwrap();
    let status = bin().args(["run", "--config"]).arg(&bad).status().unwrap();
    assert_eq!(status.code(), Some(2));

    let out = bin()
        .args(["expand", "--system", "r1", "--nus", "2", "--times", "1", "--config"])
        .arg(&config)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("constant: 4/3+0*sqrt2\n"), "{text}");
}
