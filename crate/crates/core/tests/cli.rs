use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use bootrobopt::panel::{load_csv, to_returns, CsvSchema, Layout, ReturnKind};
use tempfile::TempDir;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_bootrobopt"));
    c.env_remove("BOOTROBOPT_SEED");
    c
}

fn run(dir: &Path, args: &[&str]) -> Output {
    bin().current_dir(dir).args(args).output().unwrap()
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = run(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

/// The results directory is the last line a run prints.
fn results_dir(dir: &Path, stdout: &str) -> PathBuf {
    dir.join(stdout.lines().last().unwrap().trim())
}

fn csv_rows(path: &Path) -> Vec<Vec<String>> {
    let mut r = csv::ReaderBuilder::new().has_headers(false).from_path(path).unwrap();
    r.records()
        .map(|rec| rec.unwrap().iter().map(str::to_string).collect())
        .collect()
}

const TWO_ASSETS: &str = "date,A,B\n\
    2020-01-01,100,50\n\
    2020-01-02,101,49.5\n\
    2020-01-03,,50.5\n\
    2020-01-06,102,51\n";

#[test]
fn ingest_reports_shape() {
    let tmp = TempDir::new().unwrap();
    std::fs::write(tmp.path().join("p.csv"), TWO_ASSETS).unwrap();
    let out = ok(tmp.path(), &["ingest", "p.csv"]);
    assert!(out.contains("d: 2"), "{out}");
    assert!(out.contains("T: 3"), "{out}");
    assert!(out.contains("dropped rows: 1"), "{out}");
    assert!(tmp.path().join("results/ingest/p.csv").exists());
}

#[test]
fn missing_file_is_a_usage_error() {
    let tmp = TempDir::new().unwrap();
    let out = run(tmp.path(), &["ingest", "nowhere.csv"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("nowhere.csv"));
}

#[test]
fn long_layout_matches_wide() {
    let tmp = TempDir::new().unwrap();
    std::fs::write(tmp.path().join("w.csv"), TWO_ASSETS).unwrap();
    let mut long = String::from("date,asset,price\n");
    for line in TWO_ASSETS.lines().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        for (asset, v) in [("A", f[1]), ("B", f[2])] {
            if !v.is_empty() {
                long.push_str(&format!("{},{asset},{v}\n", f[0]));
            }
        }
    }
    std::fs::write(tmp.path().join("l.csv"), long).unwrap();
    ok(tmp.path(), &["ingest", "w.csv", "--out", "w_out.csv"]);
    ok(tmp.path(), &["ingest", "l.csv", "--layout", "long", "--out", "l_out.csv"]);
    assert_eq!(
        csv_rows(&tmp.path().join("w_out.csv")),
        csv_rows(&tmp.path().join("l_out.csv"))
    );
}

#[test]
fn synth_is_reproducible_and_round_trips() {
    let tmp = TempDir::new().unwrap();
    let args = |out: &'static str| ["synth", "--out", out, "--t", "200", "--d", "3", "--seed", "5"];
    ok(tmp.path(), &args("a.csv"));
    ok(tmp.path(), &args("b.csv"));
    let a = std::fs::read(tmp.path().join("a.csv")).unwrap();
    assert_eq!(a, std::fs::read(tmp.path().join("b.csv")).unwrap());

    ok(tmp.path(), &["ingest", "a.csv", "--out", "c.csv"]);
    let schema = CsvSchema::default();
    let before = load_csv(&tmp.path().join("a.csv"), &schema).unwrap().panel;
    let after = load_csv(&tmp.path().join("c.csv"), &schema).unwrap().panel;
    assert_eq!(before.len(), 201);
    assert_eq!(before, after);
}

#[test]
fn shift_flips_the_drift() {
    let tmp = TempDir::new().unwrap();
    ok(
        tmp.path(),
        &[
            "synth", "--out", "s.csv", "--t", "400", "--d", "1", "--drift", "0.01", "--vol",
            "0.001", "--ar", "0", "--shift-at", "0.5",
        ],
    );
    let p = load_csv(&tmp.path().join("s.csv"), &CsvSchema::default()).unwrap().panel;
    let r = to_returns(&p, ReturnKind::Simple).unwrap();
    let v: Vec<f64> = r.values().iter().copied().collect();
    let mean = |s: &[f64]| s.iter().sum::<f64>() / s.len() as f64;
    assert!(mean(&v[..190]) > 0.005);
    assert!(mean(&v[210..]) < -0.005);
}

#[test]
fn portfolio_with_one_method_writes_one_row() {
    let tmp = TempDir::new().unwrap();
    ok(tmp.path(), &["synth", "--out", "p.csv", "--t", "300", "--d", "3"]);
    let out = ok(
        tmp.path(),
        &[
            "portfolio", "--data", "p.csv", "--methods", "ew", "--constraint", "long_only",
            "--warmup", "250", "--replicates", "10",
        ],
    );
    let dir = results_dir(tmp.path(), &out);
    assert!(dir.join("config.json").exists());
    let rows = csv_rows(&dir.join("metrics.csv"));
    assert_eq!(rows.len(), 2, "{rows:?}");
    assert_eq!(rows[1][0], "ew");
}

#[test]
fn single_asset_tune_writes_one_gap_row_per_rule() {
    let tmp = TempDir::new().unwrap();
    ok(tmp.path(), &["synth", "--out", "x.csv", "--t", "600", "--d", "1"]);
    let out = ok(
        tmp.path(),
        &[
            "tune", "--data", "x.csv", "--rules", "npb_50,erm,cb1", "--lookbacks", "5,20,60",
            "--replicates", "20",
        ],
    );
    let dir = results_dir(tmp.path(), &out);
    let gaps = csv_rows(&dir.join("gaps.csv"));
    assert_eq!(gaps.len(), 4);
    let rules: Vec<&str> = gaps[1..].iter().map(|r| r[1].as_str()).collect();
    assert_eq!(rules, ["npb_50", "erm", "cb1"]);

    let out = ok(
        tmp.path(),
        &["tune", "--data", "x.csv", "--rules", "erm", "--lookbacks", "5,20", "--replicates", "5"],
    );
    let header = &csv_rows(&results_dir(tmp.path(), &out).join("selection.csv"))[0];
    assert_eq!(header, &["asset", "erm"]);
}

#[test]
fn bad_input_exits_with_two() {
    let tmp = TempDir::new().unwrap();
    std::fs::write(tmp.path().join("bad.json"), r#"{"sed": 1}"#).unwrap();
    for args in [
        &["tune", "--config", "bad.json"][..],
        &["--jobs", "0", "tune"],
        &["portfolio", "--constraint", "sideways"],
        &["frobnicate"],
    ] {
        assert_eq!(run(tmp.path(), args).status.code(), Some(2), "{args:?}");
    }
}

#[test]
fn seed_falls_back_to_the_environment() {
    let tmp = TempDir::new().unwrap();
    ok(tmp.path(), &["synth", "--out", "x.csv", "--t", "300", "--d", "1"]);
    let args = ["tune", "--data", "x.csv", "--lookbacks", "5,20", "--replicates", "5"];
    let from_env = bin()
        .current_dir(tmp.path())
        .env("BOOTROBOPT_SEED", "7")
        .args(args)
        .output()
        .unwrap();
    assert!(from_env.status.success());
    let dir = results_dir(tmp.path(), &String::from_utf8(from_env.stdout).unwrap());
    let cfg: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.join("config.json")).unwrap()).unwrap();
    assert_eq!(cfg["seed"], 7);

    let mut flagged = args.to_vec();
    flagged.extend(["--seed", "7"]);
    assert_eq!(results_dir(tmp.path(), &ok(tmp.path(), &flagged)), dir);
    assert_ne!(results_dir(tmp.path(), &ok(tmp.path(), &args)), dir);
}

#[test]
fn layout_flag_reaches_the_loader() {
    let tmp = TempDir::new().unwrap();
    std::fs::write(
        tmp.path().join("l.csv"),
        "when,asset,price\n2020-01-01,A,1\n2020-01-02,A,2\n",
    )
    .unwrap();
    let schema = CsvSchema {
        date_column: "when".into(),
        layout: Layout::Long,
    };
    assert_eq!(load_csv(&tmp.path().join("l.csv"), &schema).unwrap().panel.len(), 2);
    let out = ok(
        tmp.path(),
        &["ingest", "l.csv", "--layout", "long", "--date-column", "when", "--out", "o.csv"],
    );
    assert!(out.contains("T: 2"), "{out}");
}
