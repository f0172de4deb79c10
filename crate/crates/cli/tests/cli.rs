//! End-to-end tests of the `cavity` binary: wire formats, determinism,
//! exit codes.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn cavity(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cavity"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn tempdir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("cavity-cli-{tag}-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn read(dir: &Path, rel: &str) -> String {
    std::fs::read_to_string(dir.join(rel)).unwrap_or_else(|e| panic!("read {rel}: {e}"))
}

#[test]
fn gen_round_trips_through_the_library() {
    let dir = tempdir("gen");
    let out = cavity(
        &dir,
        &[
            "gen", "--n", "25", "--p", "0.4", "--seed", "9", "--out", "g",
        ],
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = read(&dir, "g/graph.txt");
    let graph = cavity_core::Graph::read_from(&mut text.as_bytes()).unwrap();
    assert_eq!(graph.n(), 25);
    assert_eq!(graph.seed(), 9);
    let direct = cavity_core::Graph::generate(25, 0.4, 9).unwrap();
    for i in 0..25 {
        assert_eq!(graph.missing_row(i), direct.missing_row(i));
    }
    // Manifest carries the content hash of the emitted file.
    let manifest = read(&dir, "g/manifest");
    assert!(manifest.contains("experiment = gen"));
    assert!(manifest.contains("output.graph.txt = fnv64:"));
}

#[test]
fn run_is_deterministic_and_seed_sensitive() {
    let dir = tempdir("run");
    std::fs::write(
        dir.join("exp.cfg"),
        "[model]\nn = 14\np = 0.5\nk = 3\nbeta = 1.2\nhtilde = 0.25\n\n[run]\nsteps = 20\nseed = 7\n",
    )
    .unwrap();
    let a = cavity(&dir, &["run", "--config", "exp.cfg", "--out", "a"]);
    assert!(a.status.success(), "{}", String::from_utf8_lossy(&a.stderr));
    let b = cavity(&dir, &["run", "--config", "exp.cfg", "--out", "b"]);
    assert!(b.status.success());
    assert_eq!(
        read(&dir, "a/trajectory.csv"),
        read(&dir, "b/trajectory.csv")
    );
    let c = cavity(
        &dir,
        &["run", "--config", "exp.cfg", "--seed", "8", "--out", "c"],
    );
    assert!(c.status.success());
    assert_ne!(
        read(&dir, "a/trajectory.csv"),
        read(&dir, "c/trajectory.csv")
    );
    // Header and first column shape.
    let csv = read(&dir, "a/trajectory.csv");
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "step,energy,overlap,logZsigma,state");
    assert_eq!(csv.lines().count(), 21);
}

#[test]
fn run_accepts_a_graph_file_and_pinned_start() {
    let dir = tempdir("runfile");
    assert!(cavity(
        &dir,
        &["gen", "--n", "12", "--p", "0.5", "--seed", "3", "--out", "g"]
    )
    .status
    .success());
    let out = cavity(
        &dir,
        &[
            "run",
            "--graph",
            "g/graph.txt",
            "--k",
            "3",
            "--beta",
            "1.0",
            "--htilde",
            "0.3",
            "--steps",
            "5",
            "--seed",
            "1",
            "--init",
            "1 2 3",
            "--out",
            "r",
        ],
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let manifest = read(&dir, "r/manifest");
    assert!(manifest.contains("initial_state = 1 2 3"));
    assert!(manifest.contains("input.graph = fnv64:"));
}

#[test]
fn exit_codes_map_error_classes() {
    let dir = tempdir("codes");
    // Unknown subcommand and missing keys: configuration errors.
    assert_eq!(cavity(&dir, &["bogus"]).status.code(), Some(2));
    assert_eq!(cavity(&dir, &["run"]).status.code(), Some(2));
    assert_eq!(
        cavity(&dir, &["gen", "--n", "10", "--p", "1.7", "--seed", "1"])
            .status
            .code(),
        Some(2)
    );
    // Enumeration budget: exit 3.
    let out = cavity(
        &dir,
        &[
            "exact", "--n", "20", "--p", "0.5", "--seed", "1", "--k", "8", "--beta", "1",
            "--htilde", "0.3",
        ],
    );
    assert_eq!(out.status.code(), Some(3));
    // Infeasible occupation constraints: numerical failure, exit 4.
    std::fs::write(dir.join("spec.txt"), "0 5\n1 5\n").unwrap();
    let out = cavity(
        &dir,
        &[
            "fermi",
            "--spectrum",
            "spec.txt",
            "--particles",
            "4",
            "--energy",
            "50",
        ],
    );
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn fermi_matches_library_solution() {
    let dir = tempdir("fermi");
    std::fs::write(dir.join("spec.txt"), "0 10\n").unwrap();
    let out = cavity(
        &dir,
        &[
            "fermi",
            "--spectrum",
            "spec.txt",
            "--particles",
            "4",
            "--energy",
            "0",
            "--out",
            "f",
        ],
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let csv = read(&dir, "f/fermi.csv");
    let row = csv.lines().nth(1).unwrap();
    let fields: Vec<f64> = row.split(',').map(|t| t.parse().unwrap()).collect();
    // Single level at 0, filling 0.4: entropy = -10 E(0.4).
    assert!((fields[2] - 6.730116670092563).abs() < 1e-6);
}

#[test]
fn phase_diagram_emits_csv_and_script() {
    let dir = tempdir("pd");
    let out = cavity(
        &dir,
        &[
            "phase-diagram",
            "--p",
            "0.5",
            "--cbar",
            "1.5",
            "--beta_steps",
            "12",
            "--out",
            "pd",
        ],
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let csv = read(&dir, "pd/phase_diagram.csv");
    assert_eq!(csv.lines().next().unwrap(), "beta,htilde_c,beta_c_flag");
    assert_eq!(csv.lines().count(), 13);
    // Exactly one grid point flags the low-temperature transition.
    let flags: usize = csv.lines().skip(1).filter(|l| l.ends_with(",1")).count();
    assert_eq!(flags, 1);
    let script = read(&dir, "pd/plot_phase_diagram.py");
    assert!(script.contains("phase_diagram.csv"));
    // The plot subcommand refuses missing inputs.
    assert_eq!(
        cavity(&dir, &["plot", "--kind", "selfavg", "--csv", "missing.csv"])
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn second_moment_modes_agree_through_the_cli() {
    let dir = tempdir("sm");
    let args = [
        "--n", "6", "--k", "2", "--p", "0.5", "--beta", "1.0", "--htilde", "0.3",
    ];
    let mut values = Vec::new();
    for mode in ["brute", "decomp"] {
        let mut full = vec!["second-moment", "--mode", mode, "--out", mode];
        full.extend_from_slice(&args);
        let out = cavity(&dir, &full);
        assert!(
            out.status.success(),
            "{}",
            String::from_utf8_lossy(&out.stderr)
        );
        let csv = read(&dir, &format!("{mode}/second_moment.csv"));
        let row = csv.lines().nth(1).unwrap();
        let value: f64 = row.rsplit(',').next().unwrap().parse().unwrap();
        values.push(value);
    }
    assert!((values[0] - values[1]).abs() < 1e-8 * values[0].abs());
}

#[test]
fn manifest_certifies_reruns() {
    let dir = tempdir("manifest");
    for out in ["m1", "m2"] {
        assert!(cavity(
            &dir,
            &[
                "selfavg",
                "--p",
                "0.2",
                "--cbar",
                "1.9",
                "--beta",
                "0.5",
                "--htilde",
                "0.3",
                "--seed",
                "4",
                "--replicas",
                "20",
                "--ks",
                "2,3",
                "--out",
                out,
            ],
        )
        .status
        .success());
    }
    let m1 = read(&dir, "m1/manifest").replace("m1", "OUT");
    let m2 = read(&dir, "m2/manifest").replace("m2", "OUT");
    assert_eq!(m1, m2);
    assert_eq!(read(&dir, "m1/selfavg.csv"), read(&dir, "m2/selfavg.csv"));
}
