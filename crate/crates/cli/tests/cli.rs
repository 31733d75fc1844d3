use std::path::Path;
use std::process::Command;

use charflow::{parse_config, run, Overrides};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_charflow"))
}

fn write_config(dir: &Path, name: &str, body: &str) -> std::path::PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, body).unwrap();
    path
}

#[test]
fn flat_front_sheet_reproduces_the_linear_solution() {
    let dir = tempfile::tempdir().unwrap();
    let prefix = dir.path().join("flat").display().to_string();
    let text = format!(
        r#"
task = "cauchy"
n = 2
out = "{prefix}"

[hamiltonian]
builtin = "eikonal"

[cauchy]
level = 0.0
gamma = [[0.0, 1.0], [0.0]]
phi = [0.0]
p_guess = [0.0, 1.0]
s_span = [0.0, 1.5]
step = 1e-2

[cauchy.lambda]
start = -1.0
stop = 1.0
count = 21
"#
    );
    let cfg = parse_config(&text).unwrap();
    let summary = run(&cfg, &Overrides::default()).unwrap();
    assert!(summary.passed(), "report:\n{}", summary.report);

    let sheet = std::fs::read_to_string(format!("{prefix}_sheet.csv")).unwrap();
    let mut lines = sheet.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let x2_col = header.iter().position(|c| *c == "x2").unwrap();
    let z_col = header.iter().position(|c| *c == "z").unwrap();
    let mut rows = 0;
    for line in lines {
        let fields: Vec<f64> = line.split(',').map(|f| f.parse().unwrap()).collect();
        assert!(
            (fields[z_col] - fields[x2_col]).abs() <= 1e-10,
            "row {rows}: z={} x2={}",
            fields[z_col],
            fields[x2_col]
        );
        rows += 1;
    }
    assert_eq!(rows, 21 * 151);
}

#[test]
fn free_particle_action_is_quadratic_in_momentum() {
    let dir = tempfile::tempdir().unwrap();
    let prefix = dir.path().join("free").display().to_string();
    let text = format!(
        r#"
task = "hj"
n = 1
out = "{prefix}"

[hj]
builtin = "free"
q0 = [0.0]
p0 = [0.8]
t_span = [0.0, 2.0]
step = 1e-3
"#
    );
    let cfg = parse_config(&text).unwrap();
    let summary = run(&cfg, &Overrides::default()).unwrap();
    assert!(summary.passed(), "report:\n{}", summary.report);

    let csv = std::fs::read_to_string(format!("{prefix}_trajectory.csv")).unwrap();
    let last = csv.lines().last().unwrap();
    let fields: Vec<&str> = last.split(',').collect();
    let header: Vec<&str> = csv.lines().next().unwrap().split(',').collect();
    let z_col = header.iter().position(|c| *c == "z").unwrap();
    let z: f64 = fields[z_col].parse().unwrap();
    assert!((z - 0.5 * 0.8 * 0.8 * 2.0).abs() <= 1e-8, "z={z}");
}

#[test]
fn verify_task_passes_from_the_binary() {
    let dir = tempfile::tempdir().unwrap();
    let prefix = dir.path().join("v").display().to_string();
    let config = write_config(
        dir.path(),
        "verify.toml",
        &format!(
            "task = \"verify\"\nn = 2\nout = \"{prefix}\"\n\n[hamiltonian]\nbuiltin = \"oscillator\"\n"
        ),
    );
    let out = bin().arg("--config").arg(&config).output().unwrap();
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(out.status.success(), "stdout:\n{stdout}");
    assert!(stdout.contains("PASS coincidence_on_level"), "{stdout}");
    assert!(stdout.contains("0 failed"), "{stdout}");
    assert!(Path::new(&format!("{prefix}_report.txt")).exists());
}

#[test]
fn unsorted_interfaces_exit_with_code_two() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        "bad.toml",
        r#"
task = "eikonal"
n = 2

[eikonal]
interfaces = [1.0, 0.5]
n_values = [0.5, 2.0, 1.0]
x0 = [0.0, 0.0]
y0 = [0.6, 0.8]
s_max = 2.0
"#,
    );
    let out = bin().arg("--config").arg(&config).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8(out.stderr).unwrap();
    assert!(stderr.contains("increasing"), "{stderr}");
}

#[test]
fn missing_step_is_named_on_stderr() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        "nostep.toml",
        r#"
task = "characteristics"
n = 1

[hamiltonian]
builtin = "eikonal"

[characteristics]
x0 = [0.0]
y0 = [1.0]
s_span = [0.0, 1.0]
"#,
    );
    let out = bin().arg("--config").arg(&config).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8(out.stderr).unwrap();
    assert!(stderr.contains("characteristics.step"), "{stderr}");
}

#[test]
fn crushed_tolerances_exit_with_code_one() {
    let dir = tempfile::tempdir().unwrap();
    let prefix = dir.path().join("t").display().to_string();
    let config = write_config(
        dir.path(),
        "verify.toml",
        &format!(
            "task = \"verify\"\nn = 2\nout = \"{prefix}\"\n\n[hamiltonian]\nbuiltin = \"oscillator\"\n"
        ),
    );
    let out = bin()
        .arg("--config")
        .arg(&config)
        .arg("--tol-scale")
        .arg("1e-30")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("FAIL"), "{stdout}");
}

#[test]
fn algebra_reports_broken_commutation() {
    let dir = tempfile::tempdir().unwrap();
    let prefix = dir.path().join("a").display().to_string();
    let config = write_config(
        dir.path(),
        "alg.toml",
        &format!("task = \"algebra\"\nn = 1\nout = \"{prefix}\"\n\n[hamiltonian]\na = [1.0]\n"),
    );
    let out = bin().arg("--config").arg(&config).output().unwrap();
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(out.status.success(), "{stdout}");
    assert!(stdout.contains("commutation_condition = false"), "{stdout}");
    assert!(Path::new(&format!("{prefix}_generator.csv")).exists());
    assert!(Path::new(&format!("{prefix}_exponential.csv")).exists());
}

#[test]
fn repeated_runs_write_identical_bytes() {
    let body = |prefix: &str| {
        format!(
            r#"
task = "characteristics"
n = 2
out = "{prefix}"
seed = 42

[hamiltonian]
builtin = "oscillator"

[characteristics]
x0 = [1.0, 0.0]
y0 = [0.0, 1.0]
field = "contact"
s_span = [0.0, 3.0]
step = 1e-3
"#
        )
    };
    let dir_a = tempfile::tempdir().unwrap();
    let dir_b = tempfile::tempdir().unwrap();
    let prefix_a = dir_a.path().join("run").display().to_string();
    let prefix_b = dir_b.path().join("run").display().to_string();
    let cfg_a = parse_config(&body(&prefix_a)).unwrap();
    let cfg_b = parse_config(&body(&prefix_b)).unwrap();
    run(&cfg_a, &Overrides::default()).unwrap();
    run(&cfg_b, &Overrides::default()).unwrap();

    let csv_a = std::fs::read(format!("{prefix_a}_trajectory.csv")).unwrap();
    let csv_b = std::fs::read(format!("{prefix_b}_trajectory.csv")).unwrap();
    assert_eq!(csv_a, csv_b);
    let rep_a = std::fs::read(format!("{prefix_a}_report.txt")).unwrap();
    let rep_b = std::fs::read(format!("{prefix_b}_report.txt")).unwrap();
    assert_eq!(rep_a, rep_b);
}
