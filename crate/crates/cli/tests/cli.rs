use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use dpsketch::adversary::{play_game, F2ProbeAttack, GameConfig};
use dpsketch::robust::{epsilon0, lambda_bound, required_k, FlipModel};
use dpsketch::sketches::{AmsF2Sketch, AmsParams, Functionality, ObliviousSketch};
use dpsketch_cli::{attack_trial, params_rows, AttackArgs, ModelArg, ParamsArgs, Sizing, SizingArgs, Target};
use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_dpsketch"))
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn stdout_json(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&out.stdout)))
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn exact_mode_echoes_hand_values() {
    let dir = TempDir::new().unwrap();
    let stream = write(dir.path(), "s.txt", "1,+1\n1,+1\n2,-1\n");
    let csv = dir.path().join("steps.csv");
    let out = run(&["run", "--stream", s(&stream), "--mode", "exact", "--model", "turnstile", "--out", s(&csv)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(fs::read_to_string(&csv).unwrap(), "i,estimate,exact,within_alpha\n1,1,1,true\n2,4,4,true\n3,5,5,true\n");
    let report = stdout_json(&out);
    assert_eq!(report["summary"]["rounds"], 3);
    assert_eq!(report["summary"]["max_rel_error"], 0.0);
}

#[test]
fn empty_stream_gives_header_only() {
    let dir = TempDir::new().unwrap();
    let stream = write(dir.path(), "s.txt", "# nothing here\n");
    let csv = dir.path().join("steps.csv");
    let out = run(&["run", "--stream", s(&stream), "--out", s(&csv)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(fs::read_to_string(&csv).unwrap(), "i,estimate,exact,within_alpha\n");
    assert_eq!(stdout_json(&out)["summary"]["rounds"], 0);
}

#[test]
fn malformed_line_exits_2_with_line_number() {
    let dir = TempDir::new().unwrap();
    let stream = write(dir.path(), "s.txt", "1,1\n2;1\n");
    let out = run(&["run", "--stream", s(&stream), "--out", s(&dir.path().join("x.csv"))]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2"));
}

#[test]
fn model_violations_exit_3() {
    let dir = TempDir::new().unwrap();
    let csv = dir.path().join("x.csv");
    let stream = write(dir.path(), "s.txt", "1,1\n2,-1\n");
    let out = run(&["run", "--stream", s(&stream), "--mode", "exact", "--out", s(&csv)]);
    assert_eq!(out.status.code(), Some(3));

    let stream = write(dir.path(), "t.txt", "1,1\n2,1\n1,-1\n");
    let out = run(&["run", "--stream", s(&stream), "--mode", "exact", "--model", "tau-bounded", "--tau", "4", "--out", s(&csv)]);
    assert_eq!(out.status.code(), Some(3));
    let out = run(&["run", "--stream", s(&stream), "--mode", "exact", "--model", "tau-bounded", "--tau", "5", "--out", s(&csv)]);
    assert!(out.status.success());

    let out = run(&["run", "--stream", s(&stream), "--mode", "exact", "--model", "turnstile", "--n", "1", "--out", s(&csv)]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn auto_lambda_needs_a_flip_bound() {
    let dir = TempDir::new().unwrap();
    let stream = write(dir.path(), "s.txt", "1,1\n");
    let out = run(&["run", "--stream", s(&stream), "--model", "turnstile", "--out", s(&dir.path().join("x.csv"))]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--lambda"));
}

#[test]
fn budget_exhaustion_exits_4_and_keeps_the_prefix() {
    let dir = TempDir::new().unwrap();
    let stream = write(dir.path(), "s.txt", &"1,1\n".repeat(200));
    let csv = dir.path().join("steps.csv");
    let out = run(&["run", "--stream", s(&stream), "--eps", "500", "--k", "16", "--lambda", "1", "--out", s(&csv)]);
    assert_eq!(out.status.code(), Some(4), "{}", String::from_utf8_lossy(&out.stderr));
    let report = stdout_json(&out);
    assert_eq!(report["summary"]["halted"], true);
    assert_eq!(report["summary"]["recomputations"], 1);
    let rows = fs::read_to_string(&csv).unwrap().lines().count() - 1;
    assert_eq!(report["summary"]["rounds"], rows);
    assert!(rows < 200);
}

#[test]
fn auto_sizing_is_announced() {
    let dir = TempDir::new().unwrap();
    let stream = write(dir.path(), "s.txt", "1,1\n2,1\n");
    let out = run(&["run", "--stream", s(&stream), "--m", "100", "--n", "10", "--out", s(&dir.path().join("x.csv"))]);
    assert!(out.status.success());
    let lambda = lambda_bound(FlipModel::InsertionOnly, 0.03, 100.0, 4.0).unwrap();
    let k = required_k(1.0, 0.05, lambda, 100.0, 0.3, 0.25).unwrap();
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains(&format!("lambda = {lambda}, k = {k}")), "{stderr}");
    let report = stdout_json(&out);
    assert_eq!(report["summary"]["lambda"], lambda);
    assert_eq!(report["summary"]["k"], k as u64);
}

#[test]
fn robust_run_replays_byte_identically() {
    let dir = TempDir::new().unwrap();
    let text: String = (0..300).map(|i| format!("{},1\n", (i * 7) % 40 + 1)).collect();
    let stream = write(dir.path(), "s.txt", &text);
    let (a, b) = (dir.path().join("a.csv"), dir.path().join("b.csv"));
    let common = ["run", "--stream", s(&stream), "--k", "9", "--seed", "11"];
    let out_a = run(&[&common[..], &["--out", s(&a)]].concat());
    let out_b = run(&[&common[..], &["--out", s(&b)]].concat());
    assert_eq!(out_a.status.code(), out_b.status.code());
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    let c = dir.path().join("c.csv");
    run(&["run", "--stream", s(&stream), "--k", "9", "--seed", "12", "--out", s(&c)]);
    assert_ne!(fs::read(&a).unwrap(), fs::read(&c).unwrap());
}

#[test]
fn oblivious_distinct_counts_small_streams_exactly() {
    let dir = TempDir::new().unwrap();
    let stream = write(dir.path(), "s.txt", "3,1\n3,1\n9,1\n4,1\n");
    let csv = dir.path().join("steps.csv");
    let out = run(&["run", "--stream", s(&stream), "--functionality", "distinct", "--mode", "oblivious", "--out", s(&csv)]);
    assert!(out.status.success());
    assert_eq!(fs::read_to_string(&csv).unwrap(), "i,estimate,exact,within_alpha\n1,1,1,true\n2,1,1,true\n3,2,2,true\n4,3,3,true\n");
}

fn attack_args(target: Target, trials: u64) -> AttackArgs {
    AttackArgs {
        target,
        n: 200,
        m: 1500,
        sizing: SizingArgs {
            alpha: 0.3,
            eps: 1.0,
            delta: 0.05,
            lambda: Sizing::Auto,
            k: Sizing::Fixed(5),
            sizing_constant: 0.25,
            sketch_accuracy: None,
        },
        trials,
        seed: 40,
        probe_batch: 20,
        out: None,
    }
}

#[test]
fn attack_trial_is_a_thin_wrapper() {
    let args = attack_args(Target::Ams, 1);
    let (record, transcript) = attack_trial(&args, 40).unwrap();
    let mut sketch = AmsF2Sketch::<f64>::init(40, &AmsParams::for_accuracy(0.3, 200, 1500).unwrap());
    let direct = play_game(
        &mut sketch,
        &mut F2ProbeAttack::new(200, 1500, 20, 40),
        GameConfig { m: 1500, n: 200, functionality: Functionality::F2, alpha: 0.3 },
    );
    assert_eq!(transcript, direct);
    assert_eq!(record.failure_round, direct.failure_round());
    assert_eq!(record.max_rel_error, direct.max_relative_error());
}

#[test]
fn attack_with_zero_trials_is_empty() {
    let out = run(&["attack", "--target", "ams", "--trials", "0"]);
    assert!(out.status.success());
    let report = stdout_json(&out);
    assert_eq!(report["trials"], serde_json::json!([]));
    assert!(report["failure_rate"].is_null());
}

#[test]
fn attack_json_shape() {
    let out = run(&["attack", "--target", "robust", "--n", "100", "--m", "300", "--k", "5", "--trials", "2", "--seed", "3"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report = stdout_json(&out);
    let trials = report["trials"].as_array().unwrap();
    assert_eq!(trials.len(), 2);
    assert_eq!(trials[1]["seed"], 4);
    assert!(trials[0].get("failure_round").is_some() && trials[0].get("max_rel_error").is_some());
    assert!(report["failure_rate"].is_number());
    assert_eq!(report["config"]["k_resolved"], 5);
}

fn params_args(eps: Vec<f64>, model: ModelArg, tau: Option<f64>) -> ParamsArgs {
    ParamsArgs {
        alpha: 0.3,
        eps,
        delta: 0.05,
        m: 10_000,
        n: 1000,
        model,
        tau,
        lambda: Sizing::Auto,
        sizing_constant: 0.25,
        seed: 0,
        out: None,
    }
}

#[test]
fn params_pass_through_sizing_formulas() {
    let rows = params_rows(&params_args(vec![0.01, 0.1, 0.5, 1.0], ModelArg::InsertionOnly, None)).unwrap();
    for r in &rows {
        let lambda = lambda_bound(FlipModel::InsertionOnly, 0.03, 10_000.0, 4.0).unwrap();
        assert_eq!(r.lambda, lambda);
        assert_eq!(r.k, required_k(r.epsilon, 0.05, lambda, 10_000.0, 0.3, 0.25).unwrap());
        assert_eq!(r.epsilon0, epsilon0(r.epsilon, lambda, 0.05).unwrap());
        assert!(r.composed_epsilon < r.epsilon);
        assert!(r.composed_delta <= 0.05);
    }
}

#[test]
fn params_tau_doubling_doubles_lambda() {
    let a = params_rows(&params_args(vec![1.0], ModelArg::TauBounded, Some(2.0))).unwrap()[0].lambda;
    let b = params_rows(&params_args(vec![1.0], ModelArg::TauBounded, Some(4.0))).unwrap()[0].lambda;
    assert!(b == 2 * a || b + 1 == 2 * a, "{a} {b}");
}

#[test]
fn params_csv_from_binary() {
    let out = run(&["params", "--eps", "0.1,1"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "epsilon,delta,alpha,m,lambda,k,epsilon0,grid_size,composed_epsilon,composed_delta");
    assert_eq!(lines.len(), 3);
    assert!(lines[1].starts_with("0.1,0.05,0.3,10000,1229,2035,"));
}

#[test]
fn flipnum_reports_one_based_rounds() {
    let dir = TempDir::new().unwrap();
    let stream = write(dir.path(), "s.txt", &(1..=8).map(|i| format!("{i},1\n")).collect::<String>());
    let out = run(&["flipnum", "--stream", s(&stream), "--functionality", "distinct", "--alpha", "1"]);
    assert!(out.status.success());
    let report = stdout_json(&out);
    // distinct counts 1..8: leaves the band of 1 at 3, of 3 at 7
    assert_eq!(report["flips"], serde_json::json!([3, 7]));
    assert_eq!(report["flip_number"], 2);
    assert_eq!(report["rounds"], 8);
}
