use std::path::Path;
use std::process::{Command, Output};

use macomss_cli::io::read_csv_matrix;

fn bin(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_macomss"))
        .args(args)
        .current_dir(dir)
        .env_remove("MACOMSS_SEED")
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path.to_string_lossy().into_owned()
}

#[test]
fn impute_rank_one_block() {
    let dir = tempfile::tempdir().unwrap();
    let (u, v) = ([1.0, 2.0, 3.0, 4.0], [1.0, -1.0, 2.0, 0.5]);
    let mut text = String::new();
    for (i, ui) in u.iter().enumerate() {
        let row: Vec<String> = v
            .iter()
            .enumerate()
            .map(|(j, vj)| if i >= 2 && j >= 2 { "NA".into() } else { (ui * vj).to_string() })
            .collect();
        text += &(row.join(",") + "\n");
    }
    let input = write(dir.path(), "in.csv", &text);
    let out = dir.path().join("out.csv");
    let o = bin(&["impute", "--input", &input, "--m1", "2", "--m2", "2", "--output", out.to_str().unwrap()], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let done = read_csv_matrix(&out).unwrap();
    for i in 0..4 {
        for j in 0..4 {
            assert!((done.values[(i, j)] - u[i] * v[j]).abs() < 1e-10, "({i},{j})");
        }
    }
    let side: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("out.csv.report.json")).unwrap()).unwrap();
    assert_eq!(side["r_hat"], 1);
}

#[test]
fn impute_named_block_with_sporadic_gaps() {
    let dir = tempfile::tempdir().unwrap();
    let mut text = String::from("a,b,c,d,e\n");
    for i in 0..6 {
        let row: Vec<String> = (0..5)
            .map(|j| {
                let block = i < 2 && (j == 1 || j == 3);
                if block || (i, j) == (4, 0) {
                    "na".into()
                } else {
                    format!("{}", (i + 1) as f64 * 0.5 + j as f64)
                }
            })
            .collect();
        text += &(row.join(",") + "\n");
    }
    let input = write(dir.path(), "in.csv", &text);
    let out = dir.path().join("filled.csv");
    let o = bin(
        &["impute", "--input", &input, "--block-rows", "1,2", "--block-cols", "b,d", "--output", out.to_str().unwrap()],
        dir.path(),
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let done = read_csv_matrix(&out).unwrap();
    assert_eq!(done.header.as_deref().unwrap(), ["a", "b", "c", "d", "e"]);
    assert!(done.observed.iter().all(|&b| b));
    assert!(done.values.iter().all(|x| x.is_finite()));
}

#[test]
fn malformed_cell_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(dir.path(), "bad.csv", "x,y\n1,2\n3,1.2.3\n");
    let o = bin(&["impute", "--input", &input, "--m1", "1", "--m2", "1", "--output", "o.csv"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("row 3, column 2"), "{err}");
}

#[test]
fn usage_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(bin(&["impute", "--input", "x.csv"], dir.path()).status.code(), Some(1));
    assert_eq!(bin(&["frobnicate"], dir.path()).status.code(), Some(1));
    let input = write(dir.path(), "ok.csv", "1,2\n3,NA\n");
    let o = bin(&["impute", "--input", &input, "--m1", "1", "--m2", "1", "--r0", "zero", "--output", "o.csv"], dir.path());
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn eval_reports_losses() {
    let dir = tempfile::tempdir().unwrap();
    let est = write(dir.path(), "est.csv", "1,2\n3,5\n");
    let truth = write(dir.path(), "truth.csv", "1,2\n3,4\n");
    let mask = write(dir.path(), "mask.csv", "1,1\n1,0\n");
    let o = bin(&["eval", "--estimate", &est, "--truth", &truth, "--mask", &mask], dir.path());
    assert!(o.status.success());
    let r: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(r["frob_loss"].as_f64().unwrap(), 1.0);
    assert!((r["spec_loss"].as_f64().unwrap() - 1.0).abs() < 1e-12);
    assert_eq!(r["nmse_missing"].as_f64().unwrap(), 1.0 / 16.0);
    assert_eq!(r["missing_cells"], 1);
    let bad_mask = write(dir.path(), "bad.csv", "1,1\n1,2\n");
    let o = bin(&["eval", "--estimate", &est, "--truth", &truth, "--mask", &bad_mask], dir.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn run_writes_reports_and_honours_seed_env() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.toml", "p1 = 40\np2 = 40\nm1 = 15\nm2 = 15\nreplicates = 2\n");
    let o = bin(&["run", "--config", &cfg, "--workers", "2", "--out", "a"], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let o = Command::new(env!("CARGO_BIN_EXE_macomss"))
        .args(["run", "--config", &cfg, "--out", "b"])
        .current_dir(dir.path())
        .env("MACOMSS_SEED", "99")
        .output()
        .unwrap();
    assert!(o.status.success());
    let a: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("a/report.json")).unwrap()).unwrap();
    let b: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("b/report.json")).unwrap()).unwrap();
    assert_eq!(b["config"]["seed"], 99);
    assert_ne!(a["replicates"], b["replicates"]);
    let o = Command::new(env!("CARGO_BIN_EXE_macomss"))
        .args(["run", "--config", &cfg, "--out", "c"])
        .current_dir(dir.path())
        .env("MACOMSS_SEED", "nope")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(1));
}
