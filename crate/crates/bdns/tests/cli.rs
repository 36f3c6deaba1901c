use std::path::Path;

use bdns::checkpoint;
use bdns::cli::main_with;
use bdns::ledger_io;
use bdns_core::LedgerRow;
use serde_json::Value;

fn run(args: &[&str]) -> i32 {
    main_with(std::iter::once("bdns").chain(args.iter().copied()))
}

fn write_config(dir: &Path, name: &str, json: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, json).unwrap();
    p.to_str().unwrap().to_owned()
}

const SMALL_1D: &str = r#"{
  "law": {"terms": [[1.0, 1.0]]}, "nu": 0.9, "gamma": 2.0, "dim": 1,
  "cells": [32], "t_end": 0.002, "ledger_stride": 5,
  "initial": {"preset": "smooth_bump", "center": [0.5], "velocity": [0.3]},
  "study": {"sigma0": 0.05, "n_max": 2}
}"#;

fn read_json(p: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap()
}

#[test]
fn validate_law_exit_codes() {
    let shipped = concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs/saint_venant.json");
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("v.json");
    assert_eq!(run(&["validate-law", "--config", shipped, "--out", out.to_str().unwrap()]), 0);
    let v = read_json(&out);
    assert_eq!(v["pass"], true);
    assert!(v["conditions"].as_array().unwrap().iter().all(|c| c["pass"] == true));

    let constant = write_config(
        dir.path(),
        "c.json",
        r#"{"law": {"constant": 1.0}, "nu": 0.9, "gamma": 2.0, "dim": 2}"#,
    );
    assert_eq!(run(&["validate-law", "--config", &constant, "--out", out.to_str().unwrap()]), 1);
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(run(&["simulate", "--config", "missing.json"]), 2);
    assert_eq!(run(&["simulate", "--bogus"]), 2);
    assert_eq!(run(&["no-such-command"]), 2);
    assert_eq!(run(&["verify-identities", "--grids", "32,x"]), 2);
    let dir = tempfile::tempdir().unwrap();
    let broken = write_config(dir.path(), "b.json", r#"{"law": "rho"}"#);
    assert_eq!(run(&["simulate", "--config", &broken]), 2);
    assert_eq!(run(&["--help"]), 0);
}

#[test]
fn tampered_pair_fails_verification() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r.json");
    let o = out.to_str().unwrap();
    assert_eq!(run(&["verify-identities", "--law", "rho", "--dims", "1", "--grids", "32,64", "--tamper-g", "1", "--out", o]), 1);
    let v = read_json(&out);
    assert_eq!(v["verdict"], false);
    let chain = v["identities"].as_array().unwrap().iter().find(|r| r["identity"] == "bd_equality_chain").unwrap();
    assert_eq!(chain["verdict"], false);

    assert_eq!(run(&["verify-identities", "--law", "rho+rho^2", "--dims", "1", "--grids", "32,64", "--out", o]), 0);
    let v = read_json(&out);
    for r in v["identities"].as_array().unwrap() {
        for key in ["identity", "grids", "residuals", "order", "verdict"] {
            assert!(r.get(key).is_some(), "{key}");
        }
    }
}

#[test]
fn simulate_writes_ledger_and_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "run.json", SMALL_1D);
    let cp = dir.path().join("final.bdns");
    let csv = dir.path().join("ledger.csv");
    let jsonl = dir.path().join("ledger.jsonl");
    let args = [
        "simulate",
        "--config",
        &cfg,
        "--checkpoint",
        cp.to_str().unwrap(),
        "--ledger",
        csv.to_str().unwrap(),
        "--ledger-jsonl",
        jsonl.to_str().unwrap(),
    ];
    assert_eq!(run(&args), 0);

    let (header, rows) = ledger_io::read_csv(&csv).unwrap();
    assert_eq!(header, LedgerRow::columns(1));
    let lines: Vec<LedgerRow> = std::fs::read_to_string(&jsonl)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(lines.len(), rows.len());
    assert!(rows.len() > 2);
    let last = lines.last().unwrap();
    assert_eq!(rows.last().unwrap()[0], last.t);

    let (grid, state) = checkpoint::read(&cp).unwrap();
    assert_eq!(grid.sizes(), &[32]);
    assert_eq!(state.t, last.t);

    // Restart from the checkpoint and reproduce the run bit-exactly.
    let again = dir.path().join("again.bdns");
    assert_eq!(run(&[&args[..4], &[again.to_str().unwrap()]].concat()), 0);
    assert_eq!(std::fs::read(&cp).unwrap(), std::fs::read(&again).unwrap());

    let restart = SMALL_1D.replace(
        r#"{"preset": "smooth_bump", "center": [0.5], "velocity": [0.3]}"#,
        r#"{"checkpoint": "final.bdns"}"#,
    );
    let cfg2 = write_config(dir.path(), "restart.json", &restart);
    assert_eq!(run(&["simulate", "--config", &cfg2]), 0);

    let wrong = restart.replace("[32]", "[16]");
    let cfg3 = write_config(dir.path(), "wrong.json", &wrong);
    assert_eq!(run(&["simulate", "--config", &cfg3]), 2);
}

#[test]
fn study_report_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "study.json", SMALL_1D);
    let mut reports = Vec::new();
    for name in ["a", "b"] {
        let out = dir.path().join(format!("{name}.json"));
        let ledgers = dir.path().join(name);
        let args = ["stability-study", "--config", &cfg, "--out", out.to_str().unwrap(), "--ledger-dir", ledgers.to_str().unwrap()];
        assert_eq!(run(&args), 0);
        let v = read_json(&out);
        let members = v["members"].as_array().unwrap();
        assert_eq!(members.len(), 3);
        assert!(members.iter().all(|m| Path::new(m.as_str().unwrap()).exists()));
        assert_eq!(v["uniform_bounds"].as_object().unwrap().len(), 13);
        reports.push(v);
    }
    for key in ["d_rho", "d_u", "d_m", "vacuum", "uniform_bounds"] {
        assert_eq!(reports[0][key], reports[1][key], "{key}");
    }
    let d = reports[0]["d_rho"].as_array().unwrap();
    assert_eq!(d.len(), 3);
    assert_eq!(d[1][1], 0.0);
    assert_eq!(d[0][1], d[1][0]);
}
