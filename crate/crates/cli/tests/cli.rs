use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

const SINGLE: &str = r#"
theta = ["0.6"]
c = 0.09
seed = 5
partition = [["0,0"], ["0,1"]]

[sigma]
"0,0" = 0.2
"0,1" = 0.8

[noise]
samples = 20000
"#;

const TWO_STATES: &str = r#"
theta = ["0.75", "0.9"]
c = 0.15
"#;

fn mleq(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mleq"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn scenario(dir: &TempDir, name: &str, text: &str) -> PathBuf {
    let path = dir.path().join(name);
    std::fs::write(&path, text).unwrap();
    path
}

fn json(args: &[&str], path: &Path) -> (Value, i32) {
    let mut all = args.to_vec();
    all.extend(["--scenario", path.to_str().unwrap(), "--json"]);
    let out = mleq(&all);
    let code = out.status.code().unwrap();
    let value = serde_json::from_slice(&out.stdout)
        .unwrap_or_else(|_| panic!("no JSON (exit {code}): {}", String::from_utf8_lossy(&out.stderr)));
    (value, code)
}

#[test]
fn verify_single_state_example() {
    let dir = TempDir::new().unwrap();
    let path = scenario(&dir, "s.toml", SINGLE);
    let (v, code) = json(&["verify"], &path);
    assert_eq!(code, 0);
    let cand = &v["body"]["candidate"];
    assert_eq!(cand["mleq"], true);
    assert_eq!(cand["smleq"], true);
    assert_eq!(cand["contingencies"][1]["belief"].as_f64().unwrap(), 0.8);
}

#[test]
fn verify_reports_merge_failure() {
    let dir = TempDir::new().unwrap();
    let path = scenario(&dir, "s.toml", &SINGLE.replace("c = 0.09", "c = 0.1"));
    let (v, code) = json(&["verify"], &path);
    assert_eq!(code, 0);
    let cand = &v["body"]["candidate"];
    assert_eq!(cand["mleq"], false);
    let merge = cand["failures"]
        .as_array()
        .unwrap()
        .iter()
        .find(|f| f["condition"] == "merge_inequality")
        .expect("merge failure listed");
    assert!((merge["magnitude"].as_f64().unwrap() + 0.01).abs() < 1e-12);
}

#[test]
fn bad_input_exits_with_2() {
    let dir = TempDir::new().unwrap();
    let bad_theta = scenario(&dir, "a.toml", "theta = [\"1.2\"]\nc = 0.1\n");
    let out = mleq(&["verify", "--scenario", bad_theta.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("theta"));

    let unknown = scenario(&dir, "b.toml", "theta = [\"0.5\"]\nc = 0.1\nbogus = 3\n");
    let out = mleq(&["search", "--scenario", unknown.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("bogus"));

    let two = scenario(&dir, "c.toml", TWO_STATES);
    let out = mleq(&["search", "--mode", "n1", "--scenario", two.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn size_limits_exit_with_3() {
    let dir = TempDir::new().unwrap();
    let path = scenario(&dir, "s.toml", TWO_STATES);
    let out = mleq(&["search", "--max-bell", "2", "--scenario", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
    let big = scenario(
        &dir,
        "big.toml",
        "theta = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7]\nc = 0.1\n",
    );
    let out = mleq(&["search", "--grid", "2", "--scenario", big.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn search_modes() {
    let dir = TempDir::new().unwrap();
    let single = scenario(&dir, "s.toml", SINGLE);
    let (v, _) = json(&["search", "--mode", "n1"], &single);
    let eq = v["body"]["equilibria"].as_array().unwrap();
    assert_eq!(eq.len(), 2);
    assert!((eq[0]["contingencies"][0]["sigma"].as_f64().unwrap() - 0.2).abs() < 1e-12);
    assert_eq!(eq[1]["source"], "zero trust");

    let (v, _) = json(&["search", "--grid", "20"], &single);
    let eq = v["body"]["equilibria"].as_array().unwrap();
    assert_eq!(eq.len(), 2);
    assert_eq!(v["body"]["grid_points"], 441);

    let two = scenario(&dir, "t.toml", TWO_STATES);
    let (v, code) = json(&["search", "--mode", "n2"], &two);
    assert_eq!(code, 0);
    let top = v["body"]["equilibria"][0]["overall_cooperation"].as_f64().unwrap();
    assert!((top - 0.81 / 1.81).abs() < 1e-9, "{top}");
}

#[test]
fn bounds_genericity_and_maxmin() {
    let dir = TempDir::new().unwrap();
    let path = scenario(
        &dir,
        "s.toml",
        "theta = [0.2, 0.3, 0.5]\nc = 0.3\n[bounds]\ncells = [2, 3]\n",
    );
    let (v, code) = json(&["bounds"], &path);
    assert_eq!(code, 0);
    let b = &v["body"];
    assert_eq!(b["genericity"]["generic"], false);
    assert_eq!(b["genericity"]["witness"], "0.2+0.3=0.5");
    assert_eq!(b["cost_condition"]["holds"], true);
    let rows = b["maxmin"].as_array().unwrap();
    assert_eq!(rows.len(), 2);
    assert!((rows[0]["value"].as_f64().unwrap() - 0.25).abs() < 1e-10);
}

#[test]
fn bounds_falsification_finds_nothing() {
    let dir = TempDir::new().unwrap();
    let path = scenario(
        &dir,
        "s.toml",
        "theta = [\"0.7\", \"0.9\"]\nc = 0.3\n[bounds]\nfalsify = true\n",
    );
    let (v, code) = json(&["bounds", "--grid", "6"], &path);
    assert_eq!(code, 0);
    let search = &v["body"]["cost_condition"]["search"];
    assert_eq!(search["counterexamples"].as_array().unwrap().len(), 0);
    assert!(search["strong_equilibria"].as_u64().unwrap() >= 1);
}

#[test]
fn noise_closed_forms() {
    let dir = TempDir::new().unwrap();
    let path = scenario(&dir, "s.toml", SINGLE);
    let (v, code) = json(&["noise"], &path);
    assert_eq!(code, 0);
    let b = &v["body"];
    assert_eq!(b["check"]["verdict"], "fine/coarse indifferent");
    for row in b["monte_carlo"].as_array().unwrap() {
        assert!(row["z_score"].as_f64().unwrap().abs() < 4.0);
    }
}

#[test]
fn reports_are_deterministic_and_replay() {
    let dir = TempDir::new().unwrap();
    let path = scenario(&dir, "s.toml", SINGLE);
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    for out in [&a, &b] {
        let o = mleq(&[
            "noise",
            "--scenario",
            path.to_str().unwrap(),
            "--report",
            out.to_str().unwrap(),
        ]);
        assert!(o.status.success());
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());

    let o = mleq(&["replay", a.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stdout));

    // A tampered result no longer replays.
    let text = std::fs::read_to_string(&a)
        .unwrap()
        .replace("\"seed\": 5", "\"seed\": 6");
    std::fs::write(&b, text).unwrap();
    let o = mleq(&["replay", b.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn csv_extract() {
    let dir = TempDir::new().unwrap();
    let path = scenario(&dir, "s.toml", SINGLE);
    let csv = dir.path().join("out.csv");
    let o = mleq(&[
        "search",
        "--mode",
        "n1",
        "--scenario",
        path.to_str().unwrap(),
        "--csv",
        csv.to_str().unwrap(),
    ]);
    assert!(o.status.success());
    let text = std::fs::read_to_string(&csv).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "rank,source,contingency,sigma,p,belief,overall_cooperation,mleq,smleq,monotone"
    );
    assert_eq!(text.lines().count(), 5);
    assert!(text.contains("\"0,1\",8.00000000000e-1"));
}
