//! End-to-end tests of the binary: exit codes, outputs, determinism.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn gharm(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gharm"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, content: &str) {
    fs::write(dir.join(name), content).unwrap();
}

const SOLVE_CONFIG: &str = r#"
command = "solve"

[graph]
type = "tree"
b = 2
r = 0.5
l0 = 1.0
depth = 4

[partition]
cells = [["0"], ["1"]]
values = [1.0, 0.0]

[out]
dir = "out"
"#;

#[test]
fn solve_writes_midpoint_value() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "solve.toml", SOLVE_CONFIG);
    let out = gharm(&["run", "--config", "solve.toml", "--quiet"], dir.path());
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let values = fs::read_to_string(dir.path().join("out/values.csv")).unwrap();
    let root_line = values
        .lines()
        .nth(1)
        .expect("root row follows the header");
    assert_eq!(root_line, ",5.0000000000000000e-1");
}

#[test]
fn identical_configs_produce_byte_identical_outputs() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "solve.toml", SOLVE_CONFIG);
    let run = |out: &str| {
        let s = gharm(&["run", "--config", "solve.toml", "--out", out, "--quiet"], dir.path());
        assert!(s.status.success());
        (
            fs::read(dir.path().join(out).join("values.csv")).unwrap(),
            fs::read(dir.path().join(out).join("energy.csv")).unwrap(),
        )
    };
    let a = run("out-a");
    let b = run("out-b");
    assert_eq!(a, b);
}

#[test]
fn schema_violation_exits_2_without_outputs() {
    let dir = tempfile::tempdir().unwrap();
    // Word "2" is outside the binary alphabet.
    write(
        dir.path(),
        "bad.toml",
        r#"
command = "solve"

[graph]
type = "tree"
b = 2
r = 0.5
l0 = 1.0
depth = 3

[partition]
cells = [["0"], ["2"]]
values = [1.0, 0.0]

[out]
dir = "out"
"#,
    );
    let out = gharm(&["run", "--config", "bad.toml"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(!dir.path().join("out").exists(), "no partial outputs on schema errors");
}

#[test]
fn missing_config_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = gharm(&["run", "--config", "nope.toml"], dir.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn numerical_failure_exits_3_without_outputs() {
    let dir = tempfile::tempdir().unwrap();
    // A level equal to the boundary data meets the tail region.
    write(
        dir.path(),
        "level.toml",
        r#"
command = "levelset"

[graph]
type = "tree"
b = 2
r = 0.5
l0 = 1.0
depth = 3

[partition]
cells = [["0"], ["1"]]
values = [1.0, 0.0]

[levelset]
levels = [0.996]

[out]
dir = "out"
"#,
    );
    let out = gharm(&["run", "--config", "level.toml"], dir.path());
    assert_eq!(out.status.code(), Some(3));
    assert!(!dir.path().join("out").exists());
}

#[test]
fn spectrum_neumann_ground_state_is_zero() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "interval.txt", "boundary a b\na b 1.0\n");
    write(
        dir.path(),
        "spec.toml",
        r#"
command = "spectrum"

[graph]
type = "explicit"
file = "interval.txt"

[bc]
kind = "neumann"

[mesh]
m = 60

[spectrum]
count = 2

[out]
dir = "out"
"#,
    );
    let out = gharm(&["run", "--config", "spec.toml", "--quiet"], dir.path());
    assert!(out.status.success());
    let csv = fs::read_to_string(dir.path().join("out/spectrum.csv")).unwrap();
    let first: f64 = csv
        .lines()
        .nth(1)
        .unwrap()
        .split(',')
        .nth(1)
        .unwrap()
        .parse()
        .unwrap();
    assert!(first.abs() < 1e-10, "Neumann ground state {first}");
}

#[test]
fn diverge_energies_strictly_increase() {
    let dir = tempfile::tempdir().unwrap();
    write(
        dir.path(),
        "div.toml",
        r#"
command = "diverge"

[graph]
type = "tree"
b = 2
r = 0.5
l0 = 1.0
depth = 6

[diverge]
min_depth = 3
max_depth = 6

[out]
dir = "out"
"#,
    );
    let out = gharm(&["run", "--config", "div.toml", "--quiet"], dir.path());
    assert!(out.status.success());
    let csv = fs::read_to_string(dir.path().join("out/diverge.csv")).unwrap();
    let energies: Vec<f64> = csv
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(2).unwrap().parse().unwrap())
        .collect();
    assert_eq!(energies.len(), 4);
    for w in energies.windows(2) {
        assert!(w[1] > w[0]);
    }
}

#[test]
fn sweep_respects_gh_threads_and_grid_order() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "interval.txt", "boundary a b\na b 1.0\n");
    write(
        dir.path(),
        "sweep.toml",
        r#"
command = "sweep"

[graph]
type = "explicit"
file = "interval.txt"

[bc]
kind = "robin"
k = 0.0

[sweep]
parameter = "bc.k"
values = [0.0, 1.0, 10.0]
quantity = "lambda1"

[out]
dir = "out"
"#,
    );
    let run = |threads: &str, out: &str| {
        let s = Command::new(env!("CARGO_BIN_EXE_gharm"))
            .args(["sweep", "--config", "sweep.toml", "--out", out, "--quiet"])
            .env("GH_THREADS", threads)
            .current_dir(dir.path())
            .output()
            .unwrap();
        assert!(s.status.success(), "stderr: {}", String::from_utf8_lossy(&s.stderr));
        fs::read_to_string(dir.path().join(out).join("sweep.csv")).unwrap()
    };
    let serial = run("1", "out-1");
    let parallel = run("3", "out-3");
    assert_eq!(serial, parallel, "results independent of worker count");
    let lambdas: Vec<f64> = serial
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(2).unwrap().parse().unwrap())
        .collect();
    assert!(lambdas[0] < lambdas[1] && lambdas[1] < lambdas[2], "λ₁ increasing in k");
}

#[test]
fn explicit_graph_solve_uses_vertex_groups() {
    let dir = tempfile::tempdir().unwrap();
    write(
        dir.path(),
        "star.txt",
        "boundary x y z\nc x 1.0\nc y 1.0\nc z 1.0\n",
    );
    write(
        dir.path(),
        "star.toml",
        r#"
command = "solve"

[graph]
type = "explicit"
file = "star.txt"

[partition]
cells = [["x", "y"], ["z"]]
values = [0.0, 1.0]

[out]
dir = "out"
"#,
    );
    let out = gharm(&["run", "--config", "star.toml", "--quiet"], dir.path());
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(dir.path().join("out/values.csv")).unwrap();
    let center: f64 = csv
        .lines()
        .find(|l| l.starts_with("c,"))
        .unwrap()
        .split(',')
        .nth(1)
        .unwrap()
        .parse()
        .unwrap();
    assert!((center - 1.0 / 3.0).abs() < 1e-12, "center {center}");
}

#[test]
fn measure_at_named_vertex() {
    let dir = tempfile::tempdir().unwrap();
    write(
        dir.path(),
        "measure.toml",
        r#"
command = "measure"

[graph]
type = "tree"
b = 2
r = 0.5
l0 = 1.0
depth = 4

[partition]
cells = [["0"], ["1"]]
values = [1.0, 0.0]

[query]
at = ""

[out]
dir = "out"
"#,
    );
    let out = gharm(&["run", "--config", "measure.toml", "--quiet"], dir.path());
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(dir.path().join("out/measure.csv")).unwrap();
    let weights: Vec<f64> = csv
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
        .collect();
    assert_eq!(weights.len(), 2);
    assert!((weights[0] - 0.5).abs() < 1e-12 && (weights[1] - 0.5).abs() < 1e-12);
}

#[test]
fn compare_reports_positive_gap() {
    let dir = tempfile::tempdir().unwrap();
    write(
        dir.path(),
        "compare.toml",
        r#"
command = "compare"

[graph]
type = "tree"
b = 2
r = 0.4
l0 = 1.0
depth = 2

[bc]
kind = "harmonic_clamp"
clusters = [["0"], ["1"]]

[mesh]
m = 8

[out]
dir = "out"
"#,
    );
    let out = gharm(&["run", "--config", "compare.toml", "--quiet"], dir.path());
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(dir.path().join("out/compare.csv")).unwrap();
    let mut gap = f64::NAN;
    for line in csv.lines().skip(1) {
        let mut parts = line.split(',');
        if parts.next() == Some("lambda_gap") {
            gap = parts.next().unwrap().parse().unwrap();
        }
    }
    assert!(gap > 1e-6, "lambda gap {gap}");
}

#[test]
fn verify_passes_and_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let a = gharm(&["verify"], dir.path());
    assert_eq!(a.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&a.stderr));
    let b = gharm(&["verify"], dir.path());
    assert_eq!(a.stdout, b.stdout, "verify reports must be identical");
    let text = String::from_utf8_lossy(&a.stdout);
    assert!(text.contains("PASS flux-conservation"));
    assert!(!text.contains("FAIL"));
}
