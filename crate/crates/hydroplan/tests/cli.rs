//! Behavior of the `hydroplan` binary: per-command outputs, file shapes,
//! and the exit-code contract (0 ok, 1 usage, 2 data, 3 numerical).

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn workspace_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn hydroplan(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hydroplan"))
        .args(args)
        .output()
        .expect("binary should launch")
}

fn stdout_lines(output: &Output) -> Vec<String> {
    String::from_utf8_lossy(&output.stdout)
        .lines()
        .map(str::to_string)
        .collect()
}

fn stderr_text(output: &Output) -> String {
    String::from_utf8_lossy(&output.stderr).to_string()
}

#[test]
fn states_lists_the_2x3_space() {
    let output = hydroplan(&["states", "--m", "2", "--n", "3"]);
    assert!(output.status.success());
    let lines = stdout_lines(&output);
    assert_eq!(lines[0], "index,code,bits");
    assert_eq!(lines.len(), 26);
    assert_eq!(lines[1], "1,14,001;110");
    assert_eq!(lines[25], "25,63,111;111");
}

#[test]
fn states_handles_the_trivial_space() {
    let output = hydroplan(&["states", "--m", "1", "--n", "1"]);
    assert!(output.status.success());
    let lines = stdout_lines(&output);
    assert_eq!(lines.len(), 2);
    assert_eq!(lines[1], "1,1,1");
}

#[test]
fn states_rejects_oversized_spaces() {
    let output = hydroplan(&["states", "--m", "5", "--n", "5"]);
    assert_eq!(output.status.code(), Some(2));
    assert!(stderr_text(&output).contains("exceeds"));
}

#[test]
fn states_writes_files_when_out_is_given() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("s");
    let output = hydroplan(&["states", "--m", "2", "--n", "3", "--out", out.to_str().unwrap()]);
    assert!(output.status.success());
    let states = std::fs::read_to_string(out.join("states.csv")).unwrap();
    assert_eq!(states.lines().count(), 26);
    let map = std::fs::read_to_string(out.join("appendix_map.csv")).unwrap();
    assert_eq!(map.lines().count(), 26);
    assert!(map.lines().any(|l| l == "6,4"));
}

#[test]
fn unknown_subcommands_and_flags_are_usage_errors() {
    assert_eq!(hydroplan(&["plan"]).status.code(), Some(1));
    assert_eq!(hydroplan(&[]).status.code(), Some(1));
    assert_eq!(
        hydroplan(&["states", "--bogus", "1"]).status.code(),
        Some(1)
    );
    assert_eq!(
        hydroplan(&["game", "--u", "abc", "--v", "2"]).status.code(),
        Some(1)
    );
}

#[test]
fn estimate_with_zero_alpha_names_the_unseen_row() {
    let dir = tempfile::tempdir().unwrap();
    let obs = dir.path().join("observations.csv");
    std::fs::write(&obs, "trajectory_id,k,state_index\nt1,1,1\nt1,2,1\n").unwrap();
    let output = hydroplan(&[
        "estimate",
        "--obs",
        obs.to_str().unwrap(),
        "--alpha",
        "0",
        "--out",
        dir.path().join("o").to_str().unwrap(),
    ]);
    assert_eq!(output.status.code(), Some(2));
    assert!(stderr_text(&output).contains("never observed at stage 1"));
}

#[test]
fn estimate_emits_model_and_histogram() {
    let dir = tempfile::tempdir().unwrap();
    let root = workspace_root();
    let out = dir.path().join("run");
    let synth = hydroplan(&[
        "synth",
        "--truth",
        root.join("configs/yulin/truth_model.csv").to_str().unwrap(),
        "--trajectories",
        "50",
        "--seed",
        "7",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(synth.status.success());
    let est = hydroplan(&[
        "estimate",
        "--obs",
        out.join("observations.csv").to_str().unwrap(),
        "--hist-k",
        "5",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(est.status.success());

    let hist = std::fs::read_to_string(out.join("hist_k5.csv")).unwrap();
    assert_eq!(hist.lines().count(), 25 * 25 + 1);

    // Reloaded rows are stochastic to machine precision.
    let model = std::fs::read_to_string(out.join("transition_model.csv")).unwrap();
    let mut sums = std::collections::BTreeMap::<(usize, usize), f64>::new();
    for line in model.lines().skip(1) {
        let fields: Vec<&str> = line.split(',').collect();
        let k: usize = fields[0].parse().unwrap();
        let i: usize = fields[1].parse().unwrap();
        let p: f64 = fields[3].parse().unwrap();
        *sums.entry((k, i)).or_default() += p;
    }
    assert_eq!(sums.len(), 11 * 25);
    for (&(k, i), &sum) in &sums {
        assert!((sum - 1.0).abs() < 1e-10, "row ({k}, {i}) sums to {sum}");
    }
}

#[test]
fn solve_emits_the_four_planning_files() {
    let dir = tempfile::tempdir().unwrap();
    let root = workspace_root();
    let out = dir.path().join("run");
    let params = root.join("configs/yulin/params.json");
    assert!(hydroplan(&[
        "synth",
        "--params",
        params.to_str().unwrap(),
        "--trajectories",
        "100",
        "--out",
        out.to_str().unwrap(),
    ])
    .status
    .success());
    assert!(hydroplan(&[
        "estimate",
        "--params",
        params.to_str().unwrap(),
        "--obs",
        out.join("observations.csv").to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ])
    .status
    .success());
    let solve = hydroplan(&[
        "solve",
        "--params",
        params.to_str().unwrap(),
        "--model",
        out.join("transition_model.csv").to_str().unwrap(),
        "--obs",
        out.join("observations.csv").to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(solve.status.success());

    let values = std::fs::read_to_string(out.join("values.csv")).unwrap();
    assert_eq!(values.lines().count(), 12 * 25 + 1);
    let policy = std::fs::read_to_string(out.join("policy.csv")).unwrap();
    assert_eq!(policy.lines().count(), 11 * 25 * 6 + 1);
    let monthly = std::fs::read_to_string(out.join("monthly.csv")).unwrap();
    assert_eq!(monthly.lines().count(), 11 * 3 + 1);

    // Printed ratios are consistent with printed amounts.
    let report = std::fs::read_to_string(out.join("report.csv")).unwrap();
    let rows: Vec<Vec<String>> = report
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect();
    assert_eq!(rows.len(), 6);
    for j in 0..3 {
        let total: f64 = (0..2).map(|i| rows[i * 3 + j][2].parse::<f64>().unwrap()).sum();
        for i in 0..2 {
            let amount: f64 = rows[i * 3 + j][2].parse().unwrap();
            let printed = rows[i * 3 + j][3].trim_end_matches('%');
            if total == 0.0 {
                assert_eq!(printed, "\u{2014}");
            } else {
                let ratio: f64 = printed.parse().unwrap();
                let computed = amount / total * 100.0;
                assert!(
                    (ratio - computed).abs() <= 0.06,
                    "user {j}: printed {ratio} vs computed {computed}"
                );
            }
        }
    }
}

#[test]
fn game_emits_pattern_and_rejects_bad_payoffs() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("g");
    let output = hydroplan(&[
        "game", "--u", "2", "--v", "2", "--grid", "10", "--out",
        out.to_str().unwrap(),
    ]);
    assert!(output.status.success());
    let stdout = stdout_lines(&output);
    assert!(stdout.iter().any(|l| l == "equilibria: ESS/Unstable/Unstable/ESS/Saddle"));

    let equilibria = std::fs::read_to_string(out.join("equilibria.csv")).unwrap();
    assert_eq!(equilibria.lines().count(), 6);
    let basin = std::fs::read_to_string(out.join("basin.csv")).unwrap();
    assert_eq!(basin.lines().count(), 101);
    let separatrix = std::fs::read_to_string(out.join("separatrix.csv")).unwrap();
    assert_eq!(separatrix.lines().count(), 4);
    let trajectory = std::fs::read_to_string(out.join("trajectory.csv")).unwrap();
    assert_eq!(trajectory.lines().count(), 20_002);

    let bad = hydroplan(&["game", "--u", "1", "--v", "2"]);
    assert_eq!(bad.status.code(), Some(2));
    assert!(stderr_text(&bad).contains("greater than 1"));
}

#[test]
fn game_overflow_is_a_numerical_failure() {
    let dir = tempfile::tempdir().unwrap();
    let output = hydroplan(&[
        "game",
        "--u",
        "1e308",
        "--v",
        "1e308",
        "--grid",
        "2",
        "--out",
        dir.path().join("g").to_str().unwrap(),
    ]);
    assert_eq!(output.status.code(), Some(3));
    assert!(stderr_text(&output).contains("numerical"));
}

#[test]
fn synth_is_deterministic_and_horizon_shaped() {
    let dir = tempfile::tempdir().unwrap();
    let root = workspace_root();
    let truth = root.join("configs/yulin/truth_model.csv");
    let out_a = dir.path().join("a");
    let out_b = dir.path().join("b");
    for out in [&out_a, &out_b] {
        let output = hydroplan(&[
            "synth",
            "--truth",
            truth.to_str().unwrap(),
            "--trajectories",
            "100",
            "--seed",
            "3",
            "--out",
            out.to_str().unwrap(),
        ]);
        assert!(output.status.success());
    }
    let a = std::fs::read(out_a.join("observations.csv")).unwrap();
    let b = std::fs::read(out_b.join("observations.csv")).unwrap();
    assert_eq!(a, b);
    let text = String::from_utf8(a).unwrap();
    assert_eq!(text.lines().count(), 100 * 12 + 1);
}

#[test]
fn synth_from_an_absorbing_chain_freezes_each_trajectory() {
    let dir = tempfile::tempdir().unwrap();
    let truth = dir.path().join("identity.csv");
    let mut body = String::from("k,from_index,to_index,p\n");
    for k in 1..12 {
        body.push_str(&format!("{k},1,1,1\n"));
    }
    std::fs::write(&truth, body).unwrap();
    let out = dir.path().join("o");
    let output = hydroplan(&[
        "synth",
        "--m",
        "1",
        "--n",
        "1",
        "--truth",
        truth.to_str().unwrap(),
        "--trajectories",
        "5",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(output.status.success());
    let text = std::fs::read_to_string(out.join("observations.csv")).unwrap();
    for line in text.lines().skip(1) {
        assert!(line.ends_with(",1"), "line `{line}`");
    }
    assert_eq!(text.lines().count(), 61);
}

#[test]
fn missing_input_files_fail_before_any_output() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    let output = hydroplan(&[
        "estimate",
        "--obs",
        dir.path().join("nope.csv").to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(output.status.code(), Some(2));
    assert!(!out.exists(), "no output directory should appear");
}
