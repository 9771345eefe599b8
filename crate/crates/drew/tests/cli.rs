use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use drew_core::channel::{apply_attack, AttackConfig, ChannelRngs};
use serde_json::Value;

fn drew(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_drew"))
        .args(args)
        .arg("--out")
        .arg(out)
        .env_remove("DREW_OUT_DIR")
        .output()
        .unwrap()
}

fn build(dir: &Path, n: usize, d: usize) -> PathBuf {
    let o = drew(
        &[
            "build",
            "--synthetic",
            &format!("N={n}"),
            &format!("d={d}"),
            "--seed",
            "3",
        ],
        dir,
    );
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    dir.join("store.drew")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn build_is_deterministic_and_reports_a_histogram() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let first = drew(
        &[
            "build",
            "--synthetic",
            "N=3000",
            "d=8",
            "--k",
            "10",
            "--n",
            "100",
            "--seed",
            "7",
        ],
        &a,
    );
    let second = drew(
        &[
            "build",
            "--synthetic",
            "N=3000",
            "d=8",
            "--k",
            "10",
            "--n",
            "100",
            "--seed",
            "7",
        ],
        &b,
    );
    assert_eq!(
        (first.status.code(), second.status.code()),
        (Some(0), Some(0))
    );
    assert_eq!(first.stdout.len(), second.stdout.len());
    assert_eq!(
        std::fs::read(a.join("store.drew")).unwrap(),
        std::fs::read(b.join("store.drew")).unwrap()
    );
    let summary: Value = serde_json::from_slice(&first.stdout).unwrap();
    let s = &summary["summary"];
    assert_eq!(
        (s["N"].as_u64(), s["d"].as_u64(), s["k"].as_u64()),
        (Some(3000), Some(8), Some(10))
    );
    let hist = s["cluster_size_histogram"].as_object().unwrap();
    let clusters: u64 = hist.values().map(|v| v.as_u64().unwrap()).sum();
    let entries: u64 = hist
        .iter()
        .map(|(size, v)| size.parse::<u64>().unwrap() * v.as_u64().unwrap())
        .sum();
    assert_eq!((clusters, entries), (1024, 3000));
}

#[test]
fn invalid_code_parameters_are_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = drew(
        &[
            "build",
            "--synthetic",
            "N=10",
            "d=4",
            "--k",
            "10",
            "--n",
            "8",
        ],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(1));
    let err: Value = serde_json::from_str(stderr(&o).trim()).unwrap();
    assert!(err["error"]["message"].as_str().unwrap().contains("k=10"));
    assert!(!dir.path().join("store.drew").exists());
    assert_eq!(
        drew(&["build", "--synthetic", "N=10"], dir.path())
            .status
            .code(),
        Some(1)
    );
    assert_eq!(drew(&["frobnicate"], dir.path()).status.code(), Some(1));
}

#[test]
fn queries_keep_order_and_naive_differs_only_when_routed() {
    let dir = tempfile::tempdir().unwrap();
    let store_path = build(dir.path(), 2000, 8);
    let store = drew::format::load(&store_path).unwrap();
    let attack = AttackConfig::new("q", 0.3, 0.25, false).unwrap();
    let mut rngs = ChannelRngs::new(5, 0);
    let mut lines = Vec::new();
    for i in 0..10_000usize {
        if i % 1000 == 999 {
            lines.push(format!(
                "{{\"query_id\": {i}, \"observed_key\": \"01\", \"observed_embedding\": [1.0]}}"
            ));
            continue;
        }
        let entry = store.entry(i % store.len());
        let a = if i % 2 == 0 {
            AttackConfig::identity()
        } else {
            attack.clone()
        };
        let q = apply_attack(&entry, &a, None, &mut rngs).unwrap();
        lines.push(
            serde_json::json!({
                "query_id": i,
                "observed_key": q.observed_key.to_string(),
                "observed_embedding": q.observed_embedding,
                "ground_truth_id": q.ground_truth_id,
            })
            .to_string(),
        );
    }
    lines.push("not json".into());
    let input = dir.path().join("q.jsonl");
    std::fs::write(&input, lines.join("\n")).unwrap();
    let run = |naive: bool| {
        let mut args = vec![
            "query",
            "--store",
            store_path.to_str().unwrap(),
            "--input",
            input.to_str().unwrap(),
        ];
        if naive {
            args.push("--naive");
        }
        let o = drew(&args, dir.path());
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        String::from_utf8(o.stdout)
            .unwrap()
            .lines()
            .map(|l| serde_json::from_str::<Value>(l).unwrap())
            .collect::<Vec<_>>()
    };
    let (routed, naive) = (run(false), run(true));
    assert_eq!(routed.len(), 10_001);
    assert_eq!(naive.len(), 10_001);
    let mut differing = 0;
    for (i, (r, n)) in routed.iter().zip(&naive).enumerate().take(10_000) {
        assert_eq!(r["query_id"].as_u64(), Some(i as u64));
        if i % 1000 == 999 {
            assert!(r["error"].is_string());
            continue;
        }
        if i % 2 == 0 {
            assert_eq!(r["matched_id"], r["ground_truth_id"]);
            assert_eq!(r["reliable"], Value::Bool(true));
        }
        if r["matched_id"] != n["matched_id"] || r["similarity"] != n["similarity"] {
            differing += 1;
            assert_eq!(r["reliable"], Value::Bool(true), "line {i}");
        }
        assert!(n["decoded_code"].is_null() && n["reliable"].is_null());
        assert_eq!(n["scope_size"].as_u64(), Some(2000));
    }
    assert!(differing > 0);
    assert_eq!(routed[10_000]["line"].as_u64(), Some(10_001));
}

#[test]
fn capacity_only_eval_and_tampered_golden() {
    let dir = tempfile::tempdir().unwrap();
    let store = build(dir.path(), 1000, 4);
    let store = store.to_str().unwrap();
    let out = dir.path().join("cap");
    let o = drew(
        &["eval", "--store", store, "--only", "capacity-curve"],
        &out,
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let report: Value =
        serde_json::from_slice(&std::fs::read(out.join("report.json")).unwrap()).unwrap();
    assert!(report["capacity"].is_array());
    assert!(report.get("epsilon").is_none() && report["attacks"].as_array().unwrap().is_empty());

    let golden = dir.path().join("golden.json");
    let g = golden.to_str().unwrap();
    let eps = [
        "eval",
        "--store",
        store,
        "--only",
        "epsilon",
        "--epsilon-trials",
        "4000",
        "--golden",
        g,
        "--seed",
        "21",
    ];
    let first = drew(&eps, &dir.path().join("cal"));
    assert_eq!(first.status.code(), Some(4), "{}", stderr(&first));
    let candidate = dir.path().join("cal/epsilon_r.candidate.json");
    std::fs::copy(&candidate, &golden).unwrap();
    let again = drew(&eps, &dir.path().join("ok"));
    assert_eq!(again.status.code(), Some(0), "{}", stderr(&again));

    let mut doc: Value = serde_json::from_slice(&std::fs::read(&golden).unwrap()).unwrap();
    assert_eq!(doc["points"][4]["p_A"].as_f64(), Some(0.25));
    let point = &mut doc["points"][4]["estimate"];
    let reliable = point["reliable"].as_u64().unwrap();
    point["errors"] = Value::from(reliable / 2);
    point["value"] = Value::from((reliable / 2) as f64 / reliable as f64);
    std::fs::write(&golden, serde_json::to_vec(&doc).unwrap()).unwrap();
    let bad = drew(&eps, &dir.path().join("bad"));
    assert_eq!(bad.status.code(), Some(3));
    assert!(
        stderr(&bad).contains("epsilon_r@p_A=0.25"),
        "{}",
        stderr(&bad)
    );
}

#[test]
fn corrupted_store_is_rejected_with_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let store = build(dir.path(), 500, 4);
    let mut bytes = std::fs::read(&store).unwrap();
    let mid = bytes.len() / 2;
    bytes[mid] ^= 0x40;
    std::fs::write(&store, &bytes).unwrap();
    let o = drew(
        &[
            "eval",
            "--store",
            store.to_str().unwrap(),
            "--only",
            "accuracy",
        ],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("checksum"), "{}", stderr(&o));
}

#[test]
fn csv_build_matches_library_ingest() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("in.csv");
    let mut text = String::from("id,v0,v1,v2\n");
    for i in 0..50 {
        text.push_str(&format!("{},{},{},{}\n", i * 3, i + 1, -(i as i64), 2));
    }
    std::fs::write(&csv, &text).unwrap();
    let o = drew(
        &[
            "build",
            "--csv",
            csv.to_str().unwrap(),
            "--k",
            "3",
            "--n",
            "12",
        ],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let store = drew::format::load(&dir.path().join("store.drew")).unwrap();
    let lib = drew::csv_io::import(text.as_bytes()).unwrap();
    assert_eq!(store.ids(), lib.ids());
    for i in 0..store.len() {
        assert_eq!(store.embedding(i), lib.embedding(i));
    }
    std::fs::write(&csv, "id,v1\n1,2\n").unwrap();
    assert_eq!(
        drew(&["build", "--csv", csv.to_str().unwrap()], dir.path())
            .status
            .code(),
        Some(2)
    );
}
