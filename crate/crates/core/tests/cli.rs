use std::process::{Command, Output};

fn cli(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cylinder-lab"))
        .args(args)
        .output()
        .expect("binary runs")
}

#[test]
fn convergents_of_silver_ratio() {
    let out = cli(&["convergents", "--alpha", "periodic:2", "--n", "4"]);
    assert!(out.status.success());
    assert_eq!(String::from_utf8(out.stdout).unwrap(), "n,p,q\n1,1,2\n2,2,5\n3,5,12\n4,12,29\n");
}

#[test]
fn usage_errors_exit_one() {
    let out = cli(&[]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
    assert_eq!(cli(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(cli(&["orbit", "--alpha", "nonsense:1", "--n", "3"]).status.code(), Some(1));
    assert_eq!(cli(&["--help"]).status.code(), Some(0));
}

#[test]
fn verify_max_level() {
    let out = cli(&["verify", "--suite", "max-level", "--trials", "100", "--seed", "7"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8(out.stdout).unwrap().starts_with("max-level: 100/100 passes"));
}

#[test]
fn experiment_outputs_are_identical_across_thread_caps() {
    let dir = tempfile::tempdir().unwrap();
    let mut files = Vec::new();
    for threads in ["1", "8"] {
        let out_dir = dir.path().join(threads);
        let status = Command::new(env!("CARGO_BIN_EXE_cylinder-lab"))
            .env("CYLINDER_LAB_THREADS", threads)
            .args(["experiment", "diverge", "--trials", "8", "--horizons", "1000,50000", "--seed", "3", "--out"])
            .arg(&out_dir)
            .output()
            .unwrap()
            .status;
        assert!(status.success());
        let read = |name: &str| std::fs::read(out_dir.join(name)).unwrap();
        files.push((read("diverge_table.csv"), read("diverge_summary.json"), read("diverge_manifest.json")));
    }
    assert_eq!(files[0], files[1]);
}

#[test]
fn counterexample_round_trips_through_prop1() {
    let dir = tempfile::tempdir().unwrap();
    let out = cli(&[
        "prop1",
        "counterexample",
        "--rule",
        "reciprocal-log-squared",
        "--markers",
        "4",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let spec = dir.path().join("counterexample.json");
    let out = cli(&["prop1", "density", "--set", spec.to_str().unwrap(), "--n", "300"]);
    assert_eq!(String::from_utf8(out.stdout).unwrap(), "density,at\n3/8,8\n");
}
