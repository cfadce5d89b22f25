use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_branchsys");

fn counterexample() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../docs/systems/identity_counterexample.toml")
}

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(BIN)
        .arg("--output-dir")
        .arg(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

#[test]
fn validate_standard_passes() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), &["--system", "standard", "validate"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let report = fs::read_to_string(dir.path().join("validation_report.txt")).unwrap();
    assert!(report.starts_with("# resolved configuration\n"));
    assert!(report.contains("builtin = \"standard\""));
    assert!(report.contains("overall: pass"));
}

#[test]
fn validate_counterexample_fails_at_pair_one_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(
        dir.path(),
        &["--system", counterexample().to_str().unwrap(), "validate"],
    );
    assert_eq!(code(&out), 2);
    let report = fs::read_to_string(dir.path().join("validation_report.txt")).unwrap();
    assert!(report.contains("condition 4: fail"));
    assert!(
        report.contains("pair (1,2): A(1,2) = 1 but measure(R_2 \\ D_1) = 1"),
        "{report}"
    );
}

#[test]
fn relations_counterexample_fails() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(
        dir.path(),
        &[
            "--system",
            counterexample().to_str().unwrap(),
            "--cells",
            "256",
            "relations",
        ],
    );
    assert_eq!(code(&out), 2);
    let report = fs::read_to_string(dir.path().join("relations_report.txt")).unwrap();
    assert!(report.contains("relation 3: fail"));
}

#[test]
fn relations_doubling_pass() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), &["--system", "doubling", "relations"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stdout));
}

#[test]
fn one_cell_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(&cfg, "[system]\nbuiltin = \"doubling\"\n\n[grid]\ncells = 1\n").unwrap();
    let out = run(dir.path(), &["--config", cfg.to_str().unwrap(), "validate"]);
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("at least 2"));
}

#[test]
fn config_errors_report_position() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(&cfg, "[system]\nbuiltin = \"doubling\"\ncolour = 1\n").unwrap();
    let out = run(dir.path(), &["--config", cfg.to_str().unwrap(), "validate"]);
    assert_eq!(code(&out), 1);
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 3") && err.contains("colour"), "{err}");
}

#[test]
fn unknown_builtin_and_bad_flags_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), &["--system", "no-such-system.toml", "validate"]);
    assert_eq!(code(&out), 1);
    let out = run(dir.path(), &["validate", "--frobnicate"]);
    assert_eq!(code(&out), 1);
    let out = Command::new(BIN).arg("--help").output().unwrap();
    assert_eq!(code(&out), 0);
}

#[test]
fn matrix_rep_of_doubling() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), &["--system", "doubling", "matrix-rep"]);
    assert_eq!(code(&out), 0);
    let csv = fs::read_to_string(dir.path().join("matrix.csv")).unwrap();
    assert_eq!(csv.trim_end(), "0.5,0.5\n0.5,0.5");
}

#[test]
fn matrix_rep_of_quadratic_is_a_check_failure() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), &["--system", "quadratic", "matrix-rep"]);
    assert_eq!(code(&out), 2);
    let report = fs::read_to_string(dir.path().join("matrix_report.txt")).unwrap();
    assert!(report.contains("non-constant derivative"));
}

fn zero_csv(path: &Path, cells: usize) {
    let mut text = String::from("midpoint,value\n");
    for k in 0..cells {
        text.push_str(&format!("{},0\n", (k as f64 + 0.5) / cells as f64));
    }
    fs::write(path, text).unwrap();
}

#[test]
fn pf_of_zero_is_zero() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("zero.csv");
    zero_csv(&input, 64);
    let out = run(
        dir.path(),
        &[
            "--system",
            "doubling",
            "--cells",
            "64",
            "pf",
            "--input",
            input.to_str().unwrap(),
        ],
    );
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(dir.path().join("pf_output.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("midpoint,value"));
    assert!(lines.all(|l| l.ends_with(",0")));
}

#[test]
fn pf_rejects_grid_mismatch() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("zero.csv");
    zero_csv(&input, 32);
    let out = run(
        dir.path(),
        &[
            "--system",
            "doubling",
            "--cells",
            "64",
            "pf",
            "--input",
            input.to_str().unwrap(),
        ],
    );
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("grid mismatch"));
    let out = run(dir.path(), &["--system", "doubling", "pf", "--input", "missing.csv"]);
    assert_eq!(code(&out), 1);
}

#[test]
fn invariant_and_truncation_on_doubling() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), &["--system", "doubling", "invariant"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stdout));
    let csv = fs::read_to_string(dir.path().join("invariant_density.csv")).unwrap();
    assert!(csv.lines().skip(1).all(|l| l.ends_with(",1")));
    let out = run(dir.path(), &["--system", "doubling", "truncation", "--ns", "1,2"]);
    assert_eq!(code(&out), 0);
    let report = fs::read_to_string(dir.path().join("truncation_report.txt")).unwrap();
    assert!(report.contains("# partial sum N=1") && report.contains("summary: pass"));
}

#[test]
fn outputs_are_deterministic() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    // identical relative output_dir, so the headers match too
    for dir in [a.path(), b.path()] {
        let mut text = String::from("midpoint,value\n");
        for k in 0..512 {
            let x = (k as f64 + 0.5) / 512.0;
            text.push_str(&format!("{x},{}\n", 2.0 * x));
        }
        fs::write(dir.join("in.csv"), text).unwrap();
        for args in [
            &["--system", "standard", "--cells", "512", "relations"][..],
            &[
                "--system",
                "doubling",
                "--cells",
                "512",
                "pf",
                "--input",
                "in.csv",
                "--samples",
                "20000",
            ][..],
        ] {
            let out = Command::new(BIN).current_dir(dir).args(args).output().unwrap();
            // the verdict does not matter here, only that the run completed
            assert_ne!(code(&out), 1, "{}", String::from_utf8_lossy(&out.stderr));
        }
    }
    for name in [
        "relations_report.txt",
        "pf_report.txt",
        "pf_output.csv",
        "monte_carlo.csv",
    ] {
        let read = |d: &Path| fs::read(d.join("branchsys-out").join(name)).unwrap();
        assert_eq!(read(a.path()), read(b.path()), "{name}");
    }
}

#[test]
fn export_round_trips_through_file_systems() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), &["--system", "quadratic", "export-system"]);
    assert_eq!(code(&out), 0);
    let exported = dir.path().join("system.toml");
    let out = run(dir.path(), &["--system", exported.to_str().unwrap(), "validate"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stdout));
}
