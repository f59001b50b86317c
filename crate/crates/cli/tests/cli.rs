use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn spigot(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_spigot"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn decode_conll_prefers_high_scoring_arcs() {
    let dir = tempfile::tempdir().unwrap();
    // root → 2, 2 → 1
    let scores = write(
        dir.path(),
        "scores.jsonl",
        r#"{"tokens": ["a", "b"], "scores": [[0, 0, 5], [0, 0, 0], [0, 3, 0]]}"#,
    );
    let out = spigot(&["decode", "--format", "conll", "--scores", &scores]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let heads: Vec<String> = stdout(&out)
        .lines()
        .filter(|l| !l.is_empty())
        .map(|l| l.split('\t').nth(2).unwrap().to_string())
        .collect();
    assert_eq!(heads, ["2", "0"]);
}

#[test]
fn decode_json_emits_graph_arcs() {
    let dir = tempfile::tempdir().unwrap();
    let line = r#"{"unlabeled": [[0, 0, 0], [0, 0, 2], [0, -1, 0]], "labeled": [[[0], [0], [0]], [[0], [0], [1]], [[0], [0], [0]]]}"#;
    let scores = write(dir.path(), "g.jsonl", line);
    let out = spigot(&["decode", "--format", "json", "--scores", &scores]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let rec: Value = serde_json::from_str(stdout(&out).trim()).unwrap();
    assert_eq!(rec["arcs"], serde_json::json!([[1, 2, 0]]));
}

#[test]
fn project_output_is_feasible() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(
        dir.path(),
        "p.json",
        r#"{"n": 2, "values": [2.0, -1.0, 0.3, 0.3]}"#,
    );
    let out = spigot(&["project", "--polytope", "dep", "--input", &input]);
    assert_eq!(out.status.code(), Some(0));
    let p: Vec<f64> = serde_json::from_str(stdout(&out).trim()).unwrap();
    assert_eq!(p.len(), 4);
    assert!(p.iter().all(|&x| (0.0..=1.0).contains(&x)));
    // each modifier's two candidate heads share unit mass
    assert!((p[0] + p[1] - 1.0).abs() < 1e-12 && (p[2] + p[3] - 1.0).abs() < 1e-12);

    let input = write(
        dir.path(),
        "s.json",
        r#"{"n": 2, "labels": 2, "values": [0.5, 2.0, 0.9, 0.1, -1.0, 3.0]}"#,
    );
    let out = spigot(&["project", "--polytope", "sdp", "--input", &input]);
    assert_eq!(out.status.code(), Some(0));
    let p: Vec<f64> = serde_json::from_str(stdout(&out).trim()).unwrap();
    assert!((p[0] - p[2] - p[3]).abs() < 1e-8 && (p[1] - p[4] - p[5]).abs() < 1e-8);
}

#[test]
fn marginals_of_one_word_sentence() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(dir.path(), "m.json", r#"{"n": 1, "values": [0.7]}"#);
    let out = spigot(&["marginals", "--input", &input]);
    assert_eq!(out.status.code(), Some(0));
    let v: Value = serde_json::from_str(stdout(&out).trim()).unwrap();
    assert_eq!(v["marginals"], serde_json::json!([1.0]));
    assert!((v["log_partition"].as_f64().unwrap() - 0.7).abs() < 1e-12);
}

#[test]
fn validation_failures_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let bad_json = write(dir.path(), "bad.json", "{not json");
    assert_eq!(
        spigot(&["marginals", "--input", &bad_json]).status.code(),
        Some(2)
    );
    let wrong_len = write(dir.path(), "len.json", r#"{"n": 2, "values": [1.0, 2.0]}"#);
    assert_eq!(
        spigot(&["project", "--polytope", "dep", "--input", &wrong_len])
            .status
            .code(),
        Some(2)
    );
    let nan = write(dir.path(), "nan.jsonl", r#"{"scores": [[0, 1], [0, "x"]]}"#);
    assert_eq!(spigot(&["decode", "--scores", &nan]).status.code(), Some(2));
    let cfg = write(
        dir.path(),
        "exp.cfg",
        "seeds = 1\nproxies = pipeline, nonsense\n",
    );
    let out = spigot(&[
        "experiment",
        "--config",
        &cfg,
        "--out",
        dir.path().join("o").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2"));
    let cfg = write(dir.path(), "sa.cfg", "structure = graph\nproxies = sa\n");
    let out = spigot(&[
        "experiment",
        "--config",
        &cfg,
        "--out",
        dir.path().join("o").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn gradcheck_single_block() {
    let out = spigot(&["gradcheck", "--module", "scorer", "--instances", "3"]);
    assert_eq!(out.status.code(), Some(0), "{}", stdout(&out));
    assert_eq!(
        spigot(&["gradcheck", "--module", "bogus"]).status.code(),
        Some(2)
    );
}

#[test]
fn gen_train_analyze_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write(
        dir.path(),
        "spec.cfg",
        "intermediate_size = 40\nend_size = 40\neval_size = 20\nmax_len = 6\ndata_seed = 3\n",
    );
    let data = dir.path().join("data");
    let out = spigot(&["gen", "--spec", &spec, "--out", data.to_str().unwrap()]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    for name in [
        "intermediate.jsonl",
        "end.jsonl",
        "eval.jsonl",
        "intermediate.conll",
        "meta.json",
    ] {
        assert!(data.join(name).exists(), "missing {name}");
    }

    let cfg = write(
        dir.path(),
        "train.cfg",
        "data = data\nepochs = 2\nembedding_dim = 8\nhidden_dim = 8\n",
    );
    let mut models = Vec::new();
    for proxy in ["pipeline", "spigot"] {
        let model = dir.path().join(format!("{proxy}.json"));
        let out = spigot(&[
            "train",
            "--config",
            &cfg,
            "--proxy",
            proxy,
            "--seed",
            "1",
            "--out",
            model.to_str().unwrap(),
        ]);
        assert_eq!(
            out.status.code(),
            Some(0),
            "{}",
            String::from_utf8_lossy(&out.stderr)
        );
        let lines: Vec<Value> = stdout(&out)
            .lines()
            .map(|l| serde_json::from_str(l).unwrap())
            .collect();
        // one intermediate and one end line per epoch
        assert_eq!(lines.len(), 4);
        assert_eq!(lines[3]["epoch"], 2);
        assert_eq!(lines[3]["task"], "end");
        assert!(lines[2]["uas"].as_f64().is_some());
        models.push(model);
    }

    let eval = data.join("eval.jsonl");
    let out = spigot(&[
        "analyze",
        "--a",
        models[0].to_str().unwrap(),
        "--b",
        models[1].to_str().unwrap(),
        "--data",
        eval.to_str().unwrap(),
    ]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let report: Value = serde_json::from_str(&stdout(&out)).unwrap();
    let sizes = report["same"]["size"].as_u64().unwrap() + report["diff"]["size"].as_u64().unwrap();
    assert_eq!(sizes, 20);
}

#[test]
fn training_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "t.cfg",
        "intermediate_size = 30\nend_size = 30\neval_size = 10\nepochs = 2\nembedding_dim = 6\nhidden_dim = 6\n",
    );
    let run = || {
        stdout(&spigot(&[
            "train", "--config", &cfg, "--proxy", "ste", "--seed", "4",
        ]))
    };
    assert_eq!(run(), run());
}
