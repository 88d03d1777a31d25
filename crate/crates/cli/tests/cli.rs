//! Black-box tests of the binary: exit codes, CSV output, determinism.

use std::path::PathBuf;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_mfelast"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

#[test]
fn usage_errors_exit_2() {
    // order outside 1..=8
    let out = run(&["solve", "--order", "9"]);
    assert_eq!(out.status.code(), Some(2));

    let out = run(&["solve", "--order", "0"]);
    assert_eq!(out.status.code(), Some(2));

    // unknown flag
    let out = run(&["solve", "--no-such-flag"]);
    assert_eq!(out.status.code(), Some(2));

    // unknown subcommand
    let out = run(&["frobnicate"]);
    assert_eq!(out.status.code(), Some(2));

    // bad enum values funnel through validation
    let out = run(&["solve", "--assembly", "magic"]);
    assert_eq!(out.status.code(), Some(2));
    let out = run(&["solve", "--pc", "amg"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn valid_combinations_exit_0() {
    let out = run(&[
        "solve", "--order", "2", "--cells", "2", "--refine", "1", "--assembly", "paop", "--pc",
        "gmg",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));

    // FA inside the GMG framework is legal
    let out = run(&[
        "solve", "--order", "1", "--cells", "2", "--refine", "1", "--assembly", "fa", "--pc",
        "gmg",
    ]);
    assert_eq!(out.status.code(), Some(0));

    let out = run(&[
        "solve", "--order", "1", "--cells", "2", "--refine", "0", "--assembly", "pa", "--pc",
        "jacobi",
    ]);
    assert_eq!(out.status.code(), Some(0));
}

#[test]
fn solve_writes_csv_and_vtk() {
    let dir = std::env::temp_dir().join("mfelast-cli-test");
    std::fs::create_dir_all(&dir).unwrap();
    let csv: PathBuf = dir.join("solve.csv");
    let vtk: PathBuf = dir.join("solve.vtk");
    let out = run(&[
        "solve",
        "--order",
        "1",
        "--cells",
        "2",
        "--refine",
        "1",
        "--csv",
        csv.to_str().unwrap(),
        "--vtk",
        vtk.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let text = std::fs::read_to_string(&csv).unwrap();
    assert!(text.starts_with(
        "variant,p,levels,ndof,iters,setup_s,solve_s,apply_s,total_s,flops,bytes_model"
    ));
    assert_eq!(text.lines().count(), 2);
    let vtk_text = std::fs::read_to_string(&vtk).unwrap();
    assert!(vtk_text.starts_with("# vtk DataFile Version 3.0"));
    assert!(vtk_text.contains("DATASET STRUCTURED_GRID"));
}

/// Non-wall-clock CSV fields of two runs with the same config and seed
/// must agree, independent of the thread count.
#[test]
fn deterministic_across_runs_and_thread_counts() {
    let dir = std::env::temp_dir().join("mfelast-cli-det");
    std::fs::create_dir_all(&dir).unwrap();
    let mut rows = Vec::new();
    for (name, threads) in [("a", "1"), ("b", "1"), ("c", "4")] {
        let csv = dir.join(format!("{name}.csv"));
        let out = run(&[
            "bench",
            "--orders",
            "2",
            "--cells",
            "2",
            "--refine",
            "1",
            "--seed",
            "7",
            "--threads",
            threads,
            "--csv",
            csv.to_str().unwrap(),
        ]);
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
        rows.push(std::fs::read_to_string(&csv).unwrap());
    }
    // wall-clock columns: setup_s, solve_s, apply_s, total_s, mdof_per_s
    let timing_cols = [5usize, 6, 7, 8, 12];
    let strip = |text: &str| -> Vec<Vec<String>> {
        text.lines()
            .skip(1)
            .map(|line| {
                line.split(',')
                    .enumerate()
                    .filter(|(i, _)| !timing_cols.contains(i))
                    .map(|(_, v)| v.to_string())
                    .collect()
            })
            .collect()
    };
    let a = strip(&rows[0]);
    assert_eq!(a, strip(&rows[1]), "same-seed reruns must agree");
    assert_eq!(a, strip(&rows[2]), "thread count must not change results");
}

#[test]
fn bench_ablation_lists_four_stages() {
    let out = run(&[
        "bench",
        "--ablation",
        "--orders",
        "2",
        "--cells",
        "2",
        "--refine",
        "0",
        "--pc",
        "jacobi",
        "--max-iters",
        "4000",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8_lossy(&out.stdout);
    for label in ["pa,", "pa+sumfac,", "pa+voigt,", "paop,"] {
        assert!(stdout.contains(label), "missing {label} in:\n{stdout}");
    }
}

#[test]
fn anisotropic_material_config() {
    let dir = std::env::temp_dir().join("mfelast-cli-mat");
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("stiffness.txt");
    // upper triangle of the isotropic matrix with lambda = 2, mu = 1
    let c = [
        [4.0, 2.0, 2.0, 0.0, 0.0, 0.0],
        [2.0, 4.0, 2.0, 0.0, 0.0, 0.0],
        [2.0, 2.0, 4.0, 0.0, 0.0, 0.0],
        [0.0, 0.0, 0.0, 1.0, 0.0, 0.0],
        [0.0, 0.0, 0.0, 0.0, 1.0, 0.0],
        [0.0, 0.0, 0.0, 0.0, 0.0, 1.0],
    ];
    let mut text = String::new();
    for i in 0..6 {
        for j in i..6 {
            text.push_str(&format!("{} ", c[i][j]));
        }
        text.push('\n');
    }
    std::fs::write(&path, text).unwrap();
    let out = run(&[
        "solve",
        "--order",
        "1",
        "--cells",
        "2",
        "--refine",
        "1",
        "--material-config",
        path.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));

    // malformed config is a usage error
    std::fs::write(&path, "1 2 3").unwrap();
    let out = run(&[
        "solve",
        "--order",
        "1",
        "--material-config",
        path.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn converge_and_verify_exit_0() {
    let out = run(&["converge", "--order", "1", "--cells", "2", "--levels", "2"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("l2_error"));

    let out = run(&["verify", "--cells", "1"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).contains("all patch tests passed"));
}
