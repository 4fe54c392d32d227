use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn roshap(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_roshap"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) {
    let out = roshap(dir, args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
}

fn code(dir: &Path, args: &[&str]) -> i32 {
    roshap(dir, args).status.code().expect("exit code")
}

fn table(path: &Path) -> (Vec<String>, Vec<Vec<f64>>) {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap().split(',').map(String::from).collect();
    let rows = lines
        .map(|l| l.split(',').map(|c| c.parse().unwrap()).collect())
        .collect();
    (header, rows)
}

#[test]
fn simulate_defaults_shape_and_rerun() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["simulate", "--seed", "1", "--out", "sim.csv"]);
    let (header, rows) = table(&d.join("sim.csv"));
    assert_eq!(header.len(), 1001);
    assert_eq!(header.last().unwrap(), "y");
    assert_eq!(rows.len(), 600);
    assert!(rows.iter().all(|r| r.len() == 1001));

    let first = fs::read(d.join("sim.csv")).unwrap();
    ok(d, &["simulate", "--seed", "1", "--out", "sim.csv"]);
    assert_eq!(fs::read(d.join("sim.csv")).unwrap(), first);

    fs::remove_file(d.join("sim.csv")).unwrap();
    ok(d, &["rerun", "--manifest", "sim.csv.manifest.json"]);
    assert_eq!(fs::read(d.join("sim.csv")).unwrap(), first);

    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(d.join("sim.csv.manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["master_seed"], 1);
    assert_eq!(manifest["config"]["d"], 1000);
}

#[test]
fn pi_signal_one_zeroes_signal_columns() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["simulate", "--seed", "4", "--out", "s.csv", "--n", "80", "--d", "12", "--s", "3", "--pi-signal", "1.0"]);
    let (_, rows) = table(&d.join("s.csv"));
    assert!(rows.iter().all(|r| r[..3].iter().all(|&v| v == 0.0)));
    assert!(rows.iter().any(|r| r[3..12].iter().any(|&v| v != 0.0)));
}

#[test]
fn simulate_config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(d.join("sim.toml"), "n = 50\nd = 7\ns = 2\n").unwrap();
    ok(d, &["simulate", "--seed", "2", "--out", "a.csv", "--config", "sim.toml", "--d", "9"]);
    let (header, rows) = table(&d.join("a.csv"));
    assert_eq!((header.len(), rows.len()), (10, 50));
    fs::write(d.join("bad.toml"), "n = 50\nbogus = 1\n").unwrap();
    assert_eq!(code(d, &["simulate", "--seed", "2", "--out", "b.csv", "--config", "bad.toml"]), 2);
}

#[test]
fn constant_target_gives_all_zero_dump() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let mut csv = String::from("a,b,y\n");
    for i in 0..30 {
        csv.push_str(&format!("{},{},2.5\n", i, (i * 7) % 5));
    }
    fs::write(d.join("c.csv"), csv).unwrap();
    ok(d, &["attribute", "--data", "c.csv", "--task", "regression", "--runs", "1", "--seed", "9", "--out-dir", "out"]);
    let (header, rows) = table(&d.join("out/u_dump.csv"));
    assert_eq!(header, ["run_id", "oob_size", "a", "b"]);
    assert_eq!(rows.len(), 1);
    assert_eq!(&rows[0][2..], &[0.0, 0.0]);
}

#[test]
fn attribute_rank_diagnose_select_eval() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["simulate", "--seed", "3", "--out", "sim.csv", "--n", "150", "--d", "25", "--s", "4"]);
    fs::write(d.join("params.toml"), "num_rounds = 20\nmax_depth = 3\n").unwrap();
    let attribute = [
        "attribute", "--data", "sim.csv", "--runs", "25", "--seed", "5", "--params-file", "params.toml",
        "--keep-samples", "x1,x2", "--out-dir", "att",
    ];
    ok(d, &attribute);
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(d.join("att/manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["runs"], 25);
    assert_eq!(manifest["config"]["bootstrap"]["params"]["num_rounds"], 20);
    assert_eq!(manifest["config"]["n_rows"], 150);

    let udump = fs::read(d.join("att/u_dump.csv")).unwrap();
    let samples = fs::read(d.join("att/samples.csv")).unwrap();
    ok(d, &["rerun", "--manifest", "att/manifest.json"]);
    assert_eq!(fs::read(d.join("att/u_dump.csv")).unwrap(), udump);
    assert_eq!(fs::read(d.join("att/samples.csv")).unwrap(), samples);

    ok(d, &[
        "rank", "--udump", "att/u_dump.csv", "--samples", "att/samples.csv", "--out", "rank.csv",
        "--svg-features", "x1", "--svg-dir", "svg",
    ]);
    let text = fs::read_to_string(d.join("rank.csv")).unwrap();
    assert!(text.starts_with("rank,feature,roshap,p0_percent,"));
    assert_eq!(text.lines().count(), 26);
    assert!(fs::read_to_string(d.join("svg/distribution_x1.svg")).unwrap().starts_with("<svg"));

    ok(d, &["rank", "--method", "info_gain", "--data", "sim.csv", "--out", "ig.csv"]);
    assert!(fs::read_to_string(d.join("ig.csv")).unwrap().starts_with("rank,feature,info_gain,"));
    assert_eq!(code(d, &["rank", "--method", "gain", "--data", "sim.csv", "--out", "g.csv"]), 2);

    ok(d, &["diagnose", "--udump", "att/u_dump.csv", "--samples", "att/samples.csv", "--feature", "x1", "--out-dir", "diag"]);
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(d.join("diag/diagnostics_x1.json")).unwrap()).unwrap();
    assert_eq!(report["runs"], 25);
    assert!(report["lyapunov_ratio"].as_f64().unwrap() > 0.0);
    assert!(d.join("diag/distribution_x1.svg").exists());

    // x3 was not retained; no dump at all is the same error.
    let missing = roshap(d, &["diagnose", "--udump", "att/u_dump.csv", "--samples", "att/samples.csv", "--feature", "x3", "--out-dir", "diag"]);
    assert_eq!(missing.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&missing.stderr).contains("diagnostics unavailable"));
    assert_eq!(code(d, &["diagnose", "--udump", "att/u_dump.csv", "--feature", "2", "--out-dir", "diag"]), 4);

    ok(d, &[
        "select-eval", "--data", "sim.csv", "--udump", "att/u_dump.csv", "--seed", "8", "--k-list", "1-3",
        "--params-file", "params.toml", "--out-dir", "eval",
    ]);
    let text = fs::read_to_string(d.join("eval/comparison.csv")).unwrap();
    assert!(text.starts_with("method,metric,mean,sd,k_count\n"));
    assert_eq!(text.lines().count(), 1 + 4 * 4);
    for metric in ["accuracy", "macro_f1", "average_precision", "auc_roc"] {
        assert!(d.join(format!("eval/comparison_{metric}.svg")).exists());
    }
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(d.join("eval/manifest.json")).unwrap()).unwrap();
    assert!(manifest["config"]["full_model"]["accuracy"].as_f64().is_some());
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    // Missing --seed, unknown flag, bad numbers: usage.
    assert_eq!(code(d, &["simulate", "--out", "x.csv"]), 2);
    assert_eq!(code(d, &["simulate", "--seed", "1", "--out", "x.csv", "--bogus"]), 2);
    assert_eq!(code(d, &["simulate", "--seed", "1", "--out", "x.csv", "--s", "5", "--d", "3"]), 2);
    // Unreadable or malformed input: data.
    assert_eq!(code(d, &["attribute", "--data", "nope.csv", "--seed", "1", "--out-dir", "o"]), 3);
    fs::write(d.join("bad.csv"), "a,y\n1,0\nNaN,1\n").unwrap();
    assert_eq!(code(d, &["attribute", "--data", "bad.csv", "--seed", "1", "--out-dir", "o"]), 3);
    fs::write(d.join("one.csv"), "a,y\n1,1\n2,1\n3,1\n").unwrap();
    assert_eq!(code(d, &["attribute", "--data", "one.csv", "--seed", "1", "--out-dir", "o"]), 3);
    // A dump without runs cannot be summarized: numeric.
    fs::write(d.join("empty.csv"), "run_id,oob_size,a,b\n").unwrap();
    assert_eq!(code(d, &["rank", "--udump", "empty.csv", "--out", "r.csv"]), 4);
}
