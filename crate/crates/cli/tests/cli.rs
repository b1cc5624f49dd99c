use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};

use serde_json::Value;
use tempfile::TempDir;

fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_hitrank"));
    cmd.env_remove("HITRANK_SEED");
    cmd
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write(dir: &TempDir, name: &str, text: &str) -> PathBuf {
    let p = dir.path().join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

const CYCLE: &str = r#"{"n": 3, "arcs": [[1,3],[3,2],[2,1]]}"#;

fn cycle_patterns(dir: &TempDir) -> PathBuf {
    let d = write(dir, "cycle3.json", CYCLE);
    let out = dir.path().join("pats.json");
    let o = run(&["gen-patterns", "--digraph", s(&d), "--out", s(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    out
}

#[test]
fn gen_patterns_writes_the_cycle_matrices() {
    let dir = TempDir::new().unwrap();
    let file: Value = serde_json::from_str(&std::fs::read_to_string(cycle_patterns(&dir)).unwrap()).unwrap();
    assert_eq!(file["digraph"]["n"], 3);
    let cells: Vec<Value> = file["patterns"].as_array().unwrap().iter().map(|p| p["cells"].clone()).collect();
    assert_eq!(cells[0], serde_json::json!([[1, 0], [4, 1], [4, 0], [3, 0]]));
    assert_eq!(cells[1], serde_json::json!([[2, 0], [1, 0], [4, 2], [4, 0]]));
    assert_eq!(cells[2], serde_json::json!([[3, 0], [4, 0], [2, 0], [4, 3]]));
}

#[test]
fn gen_patterns_rejects_two_cycles() {
    let dir = TempDir::new().unwrap();
    let d = write(&dir, "bad.json", r#"{"n": 3, "arcs": [[1,2],[2,1]]}"#);
    let o = run(&["gen-patterns", "--digraph", s(&d)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("1 and 2"), "{}", stderr(&o));
}

#[test]
fn gen_patterns_on_two_isolated_vertices() {
    let dir = TempDir::new().unwrap();
    let d = write(&dir, "e2.json", r#"{"n": 2, "arcs": []}"#);
    let o = run(&["gen-patterns", "--digraph", s(&d)]);
    let file: Value = serde_json::from_str(&stdout(&o)).unwrap();
    let pats = file["patterns"].as_array().unwrap();
    assert_eq!(pats.len(), 2);
    assert_eq!(pats[0]["cells"], serde_json::json!([[1, 0], [3, 1], [3, 0]]));
    assert_eq!(pats[1]["cells"], serde_json::json!([[2, 0], [3, 0], [3, 2]]));
}

#[test]
fn compete_exact_pair() {
    let dir = TempDir::new().unwrap();
    let pats = cycle_patterns(&dir);
    let o = run(&["compete", "--patterns", s(&pats), "--select", "1,3", "--method", "exact"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let rep: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(rep["method"], "renewal-system");
    assert_eq!(rep["entries"][0]["p_exact"], "255/511");
    assert_eq!(rep["entries"][1]["p_exact"], "256/511");
    assert_eq!(rep["entries"][1]["id"], 3);
    assert_eq!(rep["uncertainty"], 0.0);
}

#[test]
fn compete_oracle_matches_exact() {
    let dir = TempDir::new().unwrap();
    let pats = cycle_patterns(&dir);
    let o = run(&["compete", "--patterns", s(&pats), "--select", "1,3", "--method", "oracle", "--eps", "1e-9"]);
    let rep: Value = serde_json::from_str(&stdout(&o)).unwrap();
    let p = rep["entries"][1]["p"].as_f64().unwrap();
    assert!((p - 256.0 / 511.0).abs() <= 1e-9);
    assert!(rep["uncertainty"].as_f64().unwrap() < 1e-9);
}

#[test]
fn compete_mc_is_reproducible() {
    let dir = TempDir::new().unwrap();
    let pats = cycle_patterns(&dir);
    let args = ["compete", "--patterns", s(&pats), "--method", "mc", "--trials", "20000", "--seed", "7"];
    let a = run(&args);
    let b = run(&args);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let rep: Value = serde_json::from_str(&stdout(&a)).unwrap();
    assert_eq!(rep["config"]["seed"], 7);
    assert_eq!(rep["config"]["trials"], 20000);
    // Worker count does not change the estimate.
    let c = run(&[&args[..], &["--workers", "3"]].concat());
    let rc: Value = serde_json::from_str(&stdout(&c)).unwrap();
    assert_eq!(rc["entries"], rep["entries"]);
}

#[test]
fn seed_comes_from_the_environment() {
    let dir = TempDir::new().unwrap();
    let pats = cycle_patterns(&dir);
    let args = ["compete", "--patterns", s(&pats), "--method", "mc", "--trials", "2000"];
    let with_env = bin().args(args).env("HITRANK_SEED", "11").output().unwrap();
    let with_flag = run(&[&args[..], &["--seed", "11"]].concat());
    assert_eq!(with_env.stdout, with_flag.stdout);
}

#[test]
fn compete_reports_tie_prone_pairs() {
    let dir = TempDir::new().unwrap();
    let p = write(
        &dir,
        "tie.json",
        r#"{"patterns": [{"k":2,"M":2,"cells":[[1,2],[2,0]]}, {"k":2,"M":2,"cells":[[1,0],[2,1]]}]}"#,
    );
    let o = run(&["compete", "--patterns", s(&p)]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("patterns 1 and 2"), "{}", stderr(&o));
}

#[test]
fn compete_rejects_unknown_ids() {
    let dir = TempDir::new().unwrap();
    let pats = cycle_patterns(&dir);
    let o = run(&["compete", "--patterns", s(&pats), "--select", "1,9"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn verify_ranking_on_every_three_vertex_digraph() {
    let dir = TempDir::new().unwrap();
    let pairs = [(1, 2), (1, 3), (2, 3)];
    for code in 0..27u32 {
        let mut arcs = Vec::new();
        let mut c = code;
        for &(i, j) in &pairs {
            match c % 3 {
                1 => arcs.push(format!("[{i},{j}]")),
                2 => arcs.push(format!("[{j},{i}]")),
                _ => {}
            }
            c /= 3;
        }
        let d = write(&dir, "d.json", &format!(r#"{{"n": 3, "arcs": [{}]}}"#, arcs.join(",")));
        let o = run(&["verify-ranking", "--digraph", s(&d), "--N", "4"]);
        assert_eq!(o.status.code(), Some(0), "code {code}: {}", stderr(&o));
    }
}

#[test]
fn verify_ranking_needs_a_large_enough_alphabet() {
    let dir = TempDir::new().unwrap();
    let d = write(&dir, "c.json", CYCLE);
    let o = run(&["verify-ranking", "--digraph", s(&d), "--N", "3"]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn generated_file_feeds_compete_and_verify() {
    let dir = TempDir::new().unwrap();
    let pats = cycle_patterns(&dir);
    let o = run(&["compete", "--patterns", s(&pats)]);
    let rep: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!(rep["entries"].as_array().unwrap().iter().all(|e| e["p_exact"] == "1/3"));
}

#[test]
fn directional_subcommands() {
    assert_eq!(stdout(&run(&["directional", "--bound", "1", "1"])).trim(), "3");
    assert_eq!(stdout(&run(&["directional", "--bound", "2", "1"])).trim(), "21");
    assert_eq!(stdout(&run(&["directional", "--min", "1", "1", "--max-n", "4"])).trim(), "3");
    let dir = TempDir::new().unwrap();
    let o = run(&["directional", "--search", "21", "2", "1", "--seed", "1"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let t = write(&dir, "t.json", &stdout(&o));
    assert_eq!(stdout(&run(&["directional", "--check", s(&t), "2", "1"])).trim(), "true");
    let c = write(&dir, "c.json", CYCLE);
    assert_eq!(stdout(&run(&["directional", "--check", s(&c), "1", "2"])).trim(), "false");
}

#[test]
fn directional_usage_errors_exit_one() {
    assert_eq!(run(&["directional"]).status.code(), Some(1));
    assert_eq!(run(&["directional", "--bound", "1"]).status.code(), Some(1));
    assert_eq!(run(&["directional", "--bound", "1", "1", "--min", "1", "1"]).status.code(), Some(1));
    assert_eq!(run(&["directional", "--bound", "0", "1"]).status.code(), Some(1));
}

#[test]
fn game_analyze() {
    let dir = TempDir::new().unwrap();
    let d = write(&dir, "c.json", CYCLE);
    let o = run(&["game", "analyze", "--digraph", s(&d), "--N", "4", "--r1", "1", "--r2", "1"]);
    let rep: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(rep["value"], "-1/511");
    assert_eq!(rep["class"], "FavorableToII");
    assert_eq!(rep["config"]["N"], 4);
    let o = run(&["game", "analyze", "--fair", "3", "--r1", "1", "--r2", "1"]);
    let rep: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!((rep["value"].as_str(), rep["class"].as_str()), (Some("0"), Some("Fair")));
}

#[test]
fn game_infeasible_sizes_exit_one() {
    let o = run(&["game", "analyze", "--fair", "3", "--r1", "2", "--r2", "2"]);
    assert_eq!(o.status.code(), Some(1));
}

fn play(args: &[&str], input: &str) -> Output {
    let mut child = bin()
        .args(args)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    child.stdin.take().unwrap().write_all(input.as_bytes()).unwrap();
    child.wait_with_output().unwrap()
}

#[test]
fn game_play_is_deterministic() {
    let dir = TempDir::new().unwrap();
    let d = write(&dir, "c.json", CYCLE);
    let tr = dir.path().join("t.json");
    let args = ["game", "play", "--digraph", s(&d), "--r1", "1", "--r2", "1", "--seed", "9", "--transcript", s(&tr)];
    let a = play(&args, "{1,2}\n{1}\n");
    assert!(a.status.success(), "{}", stderr(&a));
    let text = stdout(&a);
    assert!(text.contains("invalid choice"));
    assert!(text.contains("Player II chooses B = {3}"));
    assert!(text.contains("P(win for II) = 256/511"));
    let b = play(&args, "{1,2}\n{1}\n");
    assert_eq!(a.stdout, b.stdout);
    let t: Value = serde_json::from_str(&std::fs::read_to_string(&tr).unwrap()).unwrap();
    assert_eq!(t["p_player_one"], "255/511");
}

#[test]
fn game_play_survives_closed_input() {
    let dir = TempDir::new().unwrap();
    let d = write(&dir, "c.json", CYCLE);
    let o = play(&["game", "play", "--digraph", s(&d), "--r1", "1", "--r2", "1"], "not a set\n");
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("input ended"));
}

#[test]
fn trace_replays_injected_columns() {
    let dir = TempDir::new().unwrap();
    let p = write(
        &dir,
        "rs.json",
        r#"{"patterns": [{"k":3,"M":2,"cells":[[1,0],[2,1],[2,0]]}, {"k":3,"M":2,"cells":[[1,0],[1,0],[2,1]]}]}"#,
    );
    let c = write(&dir, "cols.json", "[[1,2,2],[1,2,1],[1,1,2],[1,1,1],[1,2,2],[2,1,1]]");
    let o = run(&["trace", "--patterns", s(&p), "--N", "2", "--columns", s(&c), "--steps", "5"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let lines: Vec<String> = stdout(&o).lines().map(str::to_string).collect();
    assert_eq!(lines[0], "m,u1,u2,u3,v1,v2,v3,matched");
    assert_eq!(lines[3], "2,1,1,2,1,1,1,2");
    assert_eq!(lines[5], "4,1,2,2,2,1,1,1");
}

#[test]
fn help_lists_every_subcommand() {
    let text = stdout(&run(&["--help"]));
    for sub in ["gen-patterns", "compete", "verify-ranking", "directional", "game", "trace"] {
        assert!(text.contains(sub), "{sub}");
    }
    assert_eq!(run(&["--help"]).status.code(), Some(0));
}
