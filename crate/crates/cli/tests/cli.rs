use std::collections::BTreeSet;
use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn modwatch(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_modwatch"))
        .args(args)
        .current_dir(dir)
        .env("MODWATCH_LOG", "error")
        .output()
        .unwrap()
}

fn ok(dir: &Path, args: &[&str]) {
    let out = modwatch(dir, args);
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

fn json(path: &Path) -> Value {
    serde_json::from_slice(&fs::read(path).unwrap()).unwrap()
}

fn stderr_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stderr)
        .unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&out.stderr)))
}

#[test]
fn usage_errors_exit_2_with_json() {
    let dir = tempfile::tempdir().unwrap();
    for args in [&["frobnicate"][..], &["ingest", "--bogus"], &[]] {
        let out = modwatch(dir.path(), args);
        assert_eq!(out.status.code(), Some(2), "{args:?}");
        assert_eq!(stderr_json(&out)["code"], "usage");
    }
    assert!(modwatch(dir.path(), &["--help"]).status.success());
}

#[test]
fn runtime_errors_are_json() {
    let dir = tempfile::tempdir().unwrap();
    let out = modwatch(dir.path(), &["ingest"]);
    assert_eq!(out.status.code(), Some(1));
    let err = stderr_json(&out);
    assert_eq!(err["code"], "config");
    assert!(err["message"].as_str().unwrap().contains("data"));

    fs::write(
        dir.path().join("bad.toml"),
        "[model]\nkind = \"perceptron\"\n",
    )
    .unwrap();
    let out = modwatch(dir.path(), &["--config", "bad.toml", "ingest"]);
    assert_eq!(stderr_json(&out)["code"], "config");
}

#[test]
fn fixture_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["generate", "--out", "g"]);
    let cfg = ["--config", "g/modwatch.toml", "--out", "o"];
    let run = |extra: &[&str]| ok(d, &[&cfg[..], extra].concat());

    run(&["ingest"]);
    let ingest = json(&d.join("o/ingest.json"));
    assert_eq!(ingest["reports"]["comment"]["skipped"], 0);
    let hash = ingest["provenance"]["run_config_hash"].clone();
    assert_eq!(hash.as_str().unwrap().len(), 64);

    // a sidecar entry for every state
    run(&["vectorize", "--kind", "user"]);
    let mut seen = 0;
    for f in fs::read_dir(d.join("o/vectors/user")).unwrap() {
        let f = f.unwrap().path();
        if f.file_name().unwrap().to_str().unwrap().starts_with("20") {
            seen += json(&f)["states"].as_array().unwrap().len();
        }
    }
    assert_eq!(seen as u64, ingest["states"].as_u64().unwrap());

    run(&["distances", "--kind", "vocabulary", "--p", "0.98"]);
    let text = fs::read_to_string(d.join("o/distances_vocabulary.csv")).unwrap();
    assert!(text.starts_with("subreddit,month_from,month_to,rbo_distance\n"));
    let subs: BTreeSet<&str> = text
        .lines()
        .skip(1)
        .map(|l| l.split(',').next().unwrap())
        .collect();
    assert_eq!(subs.len() as u64, ingest["subreddits"].as_u64().unwrap());
    let dist = json(&d.join("o/distances_vocabulary.json"));
    assert_eq!(dist["persistence"], 0.98);
    assert_eq!(
        dist["provenance"]["run_config_hash"], hash,
        "flags equal to the config leave the hash alone"
    );
    run(&["distances", "--kind", "user", "--p", "0.9"]);
    let user = json(&d.join("o/distances_user.json"));
    assert_eq!(
        user["provenance"]["run_config"]["distance"]["persistence"],
        0.9
    );
    assert_ne!(user["provenance"]["run_config_hash"], hash);

    run(&["features"]);
    run(&["train", "--model", "logistic", "--window", "Q1"]);
    let protocol = json(&d.join("o/protocol.json"));
    assert_eq!(protocol["report"]["window"], "Q1");
    assert!(protocol["odds_ratios"].is_object());
    run(&["evaluate"]);
    let eval = json(&d.join("o/evaluation.json"))["report"].clone();
    for field in ["auc", "f1_negative", "f1_positive", "confusion", "window"] {
        assert!(!eval[field].is_null(), "{field} missing");
    }
    for field in ["tp", "fp", "tn", "fn"] {
        assert!(eval["confusion"][field].is_u64());
    }

    // reruns are byte-identical
    let first = fs::read(d.join("o/model.json")).unwrap();
    run(&["train", "--model", "logistic", "--window", "Q1"]);
    assert_eq!(fs::read(d.join("o/model.json")).unwrap(), first);
}
