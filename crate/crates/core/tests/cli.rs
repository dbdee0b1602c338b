use std::fs;
use std::path::Path;
use std::process::Command;

use bridgewalk::cli::{load_config, run_command};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_bridgewalk"))
}

fn s(p: &Path) -> String {
    p.to_str().unwrap().to_string()
}

#[test]
fn kernels_csv_header_and_values() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("k.csv");
    let code = run_command(["bridgewalk", "kernels", "--model", "tree", "--b", "2", "--nmax", "200", "--out", &s(&out)]);
    assert_eq!(code, 0);
    let text = fs::read_to_string(&out).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("n,u,log_u,f,F_partial"));
    assert_eq!(lines.next(), Some("0,1,0,0,0"));
    assert_eq!(lines.next(), Some("1,0,-inf,0,0"));
    let row2: Vec<f64> = lines.next().unwrap().split(',').map(|x| x.parse().unwrap()).collect();
    assert_eq!(row2[1], 1.0 / 3.0);
    assert_eq!(text.lines().count(), 202);
}

#[test]
fn odd_tree_bridge_is_a_period_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("b.csv");
    let output = bin()
        .args(["bridge", "--model", "tree", "--b", "2", "--n", "3", "--trials", "10", "--seed", "1", "--out", &s(&out)])
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(3));
    let err = String::from_utf8(output.stderr).unwrap();
    assert!(err.starts_with("ERROR 3:"), "{err}");
    assert!(err.contains("period 2"));
    assert_eq!(err.lines().count(), 1);
}

#[test]
fn usage_errors_exit_two() {
    let output = bin().args(["kernels", "--model", "cube", "--nmax", "5", "--out", "x"]).output().unwrap();
    assert_eq!(output.status.code(), Some(2));
    assert!(String::from_utf8(output.stderr).unwrap().starts_with("ERROR 2:"));
    assert_eq!(run_command(["bridgewalk", "frobnicate"]), 2);
    assert_eq!(run_command(["bridgewalk", "kernels", "--model", "tree", "--nmax", "5", "--out", "x"]), 2);
}

#[test]
fn budget_errors_exit_three() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("v.csv");
    let code = run_command([
        "bridgewalk", "volume", "--model", "tree", "--b", "2", "--nmax", "20", "--max-keys", "1000", "--out", &s(&out),
    ]);
    assert_eq!(code, 3);
    let code = run_command(["bridgewalk", "lamplighter", "--dim", "1", "--nmax", "400", "--out", &s(&out)]);
    assert_eq!(code, 3);
}

#[test]
fn bridge_summary_and_path_dump() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("b.csv");
    let dump = dir.path().join("p.csv");
    let code = run_command([
        "bridgewalk", "bridge", "--model", "lattice", "--dim", "1", "--jumps", "1,2", "--n", "3", "--trials", "50",
        "--seed", "4", "--out", &s(&out), "--dump-paths", &s(&dump),
    ]);
    assert_eq!(code, 0);
    let summary = fs::read_to_string(&out).unwrap();
    assert!(summary.starts_with("model,n,mode,trials,seed,mean_range,var_range,ci95,mean_maxdist\n"));
    assert!(summary.lines().nth(1).unwrap().starts_with("lattice:d=1:jumps=1+2,3,bridge,50,4,"));
    let paths = fs::read_to_string(&dump).unwrap();
    let mut lines = paths.lines();
    assert_eq!(lines.next(), Some("trial,n,seed,range,max_distance,vertices"));
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(row[0], "0");
    let keys: Vec<&str> = row[5].split('|').collect();
    assert_eq!(keys.len(), 4);
    assert_eq!(keys[0], "000000000000000000");
    assert_eq!(keys[3], keys[0]);
    // max_distance is blank when the word metric needs a search
    assert_eq!(row[4], "");
}

#[test]
fn lamplighter_table() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("l.csv");
    assert_eq!(run_command(["bridgewalk", "lamplighter", "--dim", "1", "--nmax", "4", "--out", &s(&out)]), 0);
    let text = fs::read_to_string(&out).unwrap();
    assert_eq!(text, "n,r,q_r,pmf,expected_N\n2,2,0.5,1,2\n4,2,0.125,0.5,2.5\n4,3,0.25,0.5,2.5\n");
    assert_eq!(run_command(["bridgewalk", "lamplighter", "--dim", "2", "--nmax", "4", "--out", &s(&out)]), 2);
}

#[test]
fn volume_table() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("v.csv");
    assert_eq!(run_command(["bridgewalk", "volume", "--model", "lattice", "--dim", "2", "--nmax", "3", "--out", &s(&out)]), 0);
    assert_eq!(fs::read_to_string(&out).unwrap(), "n,volume\n0,1\n1,5\n2,13\n3,25\n");
}

fn write_config(dir: &Path, name: &str, body: &str) -> std::path::PathBuf {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p
}

#[test]
fn experiment_is_byte_identical_across_runs_and_workers() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("e.csv");
    let cfg = write_config(
        dir.path(),
        "exp.json",
        &format!(
            r#"{{"kind": "tree", "params": {{"b": 2}}, "n_grid": [64, 16], "trials": 3000, "seed": 5, "out": "{}"}}"#,
            s(&out)
        ),
    );
    let run = |workers: &str| {
        let o = bin().args(["experiment", "--config", &s(&cfg), "--workers", workers]).output().unwrap();
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
        fs::read(&out).unwrap()
    };
    let a = run("1");
    let b = run("1");
    let c = run("4");
    assert_eq!(a, b);
    assert_eq!(a, c);
    let text = String::from_utf8(a).unwrap();
    let ns: Vec<&str> = text.lines().skip(1).map(|l| l.split(',').nth(1).unwrap()).collect();
    assert_eq!(ns, vec!["16", "64"]);
}

#[test]
fn config_validation() {
    let dir = tempfile::tempdir().unwrap();
    let typo = write_config(
        dir.path(),
        "typo.json",
        r#"{"kind": "tree", "modle": "x", "params": {"b": 2}, "n_grid": [4], "trials": 1, "seed": 1, "out": "o.csv"}"#,
    );
    let err = load_config(&typo).unwrap_err().to_string();
    assert!(err.contains("unknown field `modle`"), "{err}");
    assert!(err.contains("line 1"), "{err}");

    let zero = write_config(
        dir.path(),
        "zero.json",
        r#"{"kind": "tree", "params": {"b": 2}, "n_grid": [4], "trials": 0, "seed": 1, "out": "o.csv"}"#,
    );
    assert!(load_config(&zero).unwrap_err().to_string().contains("`trials`"));

    let no_seed = write_config(
        dir.path(),
        "noseed.json",
        r#"{"kind": "tree", "params": {"b": 2}, "n_grid": [4], "trials": 3, "out": "o.csv"}"#,
    );
    assert!(load_config(&no_seed).unwrap_err().to_string().contains("seed"));

    let o = bin().args(["experiment", "--config", &s(&typo)]).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn config_round_trip_and_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let minimal = write_config(
        dir.path(),
        "min.json",
        r#"{"kind": "lattice", "n": 8, "trials": 10, "seed": 2, "out": "o.csv"}"#,
    );
    let cfg = load_config(&minimal).unwrap();
    assert_eq!(cfg.n_grid, vec![8]);
    assert_eq!(cfg.params.dim, Some(1));
    assert_eq!(cfg.params.jumps, Some(vec![1]));
    assert!(cfg.budget.max_attempts.is_some());
    let echoed = write_config(dir.path(), "echo.json", &serde_json::to_string(&cfg).unwrap());
    assert_eq!(load_config(&echoed).unwrap(), cfg);

    let o = bin().args(["experiment", "--config", &s(&minimal)]).current_dir(dir.path()).output().unwrap();
    assert_eq!(o.status.code(), Some(0));
    let stdout: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(stdout["mode"], "bridge");
    assert!(dir.path().join("o.csv").exists());
}
