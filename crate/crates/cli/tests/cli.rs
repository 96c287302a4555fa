use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn segmatch(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_segmatch"))
        .current_dir(dir)
        .args(args)
        .env("SEGMATCH_THREADS", "2")
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = segmatch(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn tree(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push((p.strip_prefix(dir).unwrap().to_path_buf(), fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

const SMALL: &[&str] = &[
    "--audio-dim",
    "6",
    "--video-dim",
    "10",
    "--latent-dim",
    "4",
    "--noise",
    "0.1",
];

fn synth(dir: &Path, out: &str, extra: &[&str]) {
    let mut args = vec!["synth", "--out", out];
    args.extend_from_slice(SMALL);
    args.extend_from_slice(extra);
    ok(dir, &args);
}

#[test]
fn synth_is_deterministic_and_validates() {
    let tmp = tempfile::tempdir().unwrap();
    synth(tmp.path(), "a", &["--clips", "12", "--seed", "7"]);
    synth(tmp.path(), "b", &["--clips", "12", "--seed", "7"]);
    let a = tree(&tmp.path().join("a"));
    assert!(!a.is_empty());
    assert_eq!(a, tree(&tmp.path().join("b")));
    let report: Value = serde_json::from_str(&ok(
        tmp.path(),
        &["--json", "validate", "--manifest", "a/manifest.json"],
    ))
    .unwrap();
    assert_eq!(report["clips"], 12);
    assert_eq!(report["problems"].as_array().unwrap().len(), 0);
}

#[test]
fn zero_clips_is_a_usage_error() {
    let tmp = tempfile::tempdir().unwrap();
    let out = segmatch(tmp.path(), &["synth", "--out", "x", "--clips", "0"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn validate_reports_missing_files() {
    let tmp = tempfile::tempdir().unwrap();
    synth(tmp.path(), "d", &["--clips", "3"]);
    let f = fs::read_dir(tmp.path().join("d/features"))
        .unwrap()
        .next()
        .unwrap()
        .unwrap()
        .path();
    fs::remove_file(f).unwrap();
    let out = segmatch(tmp.path(), &["validate", "--manifest", "d/manifest.json"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn segmenter_choices() {
    let tmp = tempfile::tempdir().unwrap();
    synth(tmp.path(), "d", &["--clips", "5"]);
    ok(
        tmp.path(),
        &[
            "segment",
            "--manifest",
            "d/manifest.json",
            "--segmenter",
            "whole_clip",
            "--out",
            "w.seg",
            "--boundaries",
            "w.json",
        ],
    );
    let b: Value = serde_json::from_str(&fs::read_to_string(tmp.path().join("w.json")).unwrap()).unwrap();
    for clip in b.as_array().unwrap() {
        assert_eq!(clip["cut_frames"].as_array().unwrap().len(), 0);
    }

    let out = segmatch(
        tmp.path(),
        &[
            "segment",
            "--manifest",
            "d/manifest.json",
            "--segmenter",
            "olda",
            "--out",
            "o.seg",
        ],
    );
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert_eq!(err.matches("clip0000").count(), 5, "{err}");

    let s: Value = serde_json::from_str(&ok(
        tmp.path(),
        &[
            "--json",
            "segment",
            "--manifest",
            "d/manifest.json",
            "--segmenter",
            "truth",
            "--out",
            "t.seg",
        ],
    ))
    .unwrap();
    assert_eq!(s["segmenter"], "external:truth");
}

/// synth -> segment -> train -> embed -> rank/evaluate, all with `--no-timing`.
fn pipeline(dir: &Path) {
    synth(
        dir,
        "data",
        &["--clips", "40", "--val", "8", "--test", "12", "--seed", "3"],
    );
    for split in ["train", "val", "test"] {
        ok(
            dir,
            &[
                "--no-timing",
                "segment",
                "--manifest",
                &format!("data/{split}.json"),
                "--out",
                &format!("{split}.seg"),
            ],
        );
    }
    ok(
        dir,
        &[
            "--no-timing",
            "train",
            "--segments",
            "train.seg",
            "--val-segments",
            "val.seg",
            "--out",
            "net.ckpt",
            "--log",
            "train.jsonl",
            "--epochs",
            "2",
            "--batch-size",
            "10",
            "--learning-rate",
            "1e-3",
            "--seed",
            "5",
        ],
    );
    ok(
        dir,
        &[
            "--no-timing",
            "embed",
            "--checkpoint",
            "net.ckpt",
            "--segments",
            "test.seg",
            "--out",
            "test.emb",
        ],
    );
    ok(
        dir,
        &[
            "--no-timing",
            "rank",
            "--embeddings",
            "test.emb",
            "--query",
            "clip00030",
            "--out",
            "rank.json",
        ],
    );
    ok(
        dir,
        &[
            "--no-timing",
            "evaluate",
            "--embeddings",
            "test.emb",
            "--scenario",
            "all",
            "--out",
            "report.json",
            "--csv",
            "report.csv",
        ],
    );
}

#[test]
fn full_pipeline_is_reproducible() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    pipeline(a.path());
    pipeline(b.path());
    for f in [
        "net.ckpt",
        "train.jsonl",
        "test.emb",
        "rank.json",
        "report.json",
        "report.csv",
    ] {
        let x = fs::read(a.path().join(f)).unwrap();
        assert!(!x.is_empty());
        assert_eq!(x, fs::read(b.path().join(f)).unwrap(), "{f} differs between runs");
    }

    let log = fs::read_to_string(a.path().join("train.jsonl")).unwrap();
    assert_eq!(log.lines().count(), 3);
    let first: Value = serde_json::from_str(log.lines().next().unwrap()).unwrap();
    assert_eq!(first["epoch"], 0);
    assert!(first.get("wall_s").is_none());

    let rank: Value = serde_json::from_str(&fs::read_to_string(a.path().join("rank.json")).unwrap()).unwrap();
    assert_eq!(rank["query_id"], "clip00030");
    assert_eq!(rank["distance_name"], "trace");
    let results = rank["results"].as_array().unwrap();
    assert_eq!(results.len(), 10);
    let deltas: Vec<f64> = results.iter().map(|r| r["delta"].as_f64().unwrap()).collect();
    assert!(deltas.windows(2).all(|w| w[0] <= w[1]));
    assert_eq!(rank["config"]["train"]["seed"], 5);

    let reports: Value = serde_json::from_str(&fs::read_to_string(a.path().join("report.json")).unwrap()).unwrap();
    let reports = reports.as_array().unwrap();
    assert_eq!(reports.len(), 4 * 7);
    for r in reports {
        assert_eq!(r["n"], 12);
        let (r1, r10, r25) = (
            r["r_at_1"].as_f64().unwrap(),
            r["r_at_10"].as_f64().unwrap(),
            r["r_at_25"].as_f64().unwrap(),
        );
        assert!(r1 <= r10 && r10 <= r25);
        assert!(r["config"]["segmenter"]["kind"].is_string());
    }
    let vanilla_trace = reports
        .iter()
        .find(|r| r["scenario"] == "vanilla" && r["distance"] == "trace")
        .unwrap();
    assert!(vanilla_trace["mean_rank"].as_f64().unwrap() >= 1.0);
}

#[test]
fn rank_and_evaluate_check_catalog_size() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    synth(d, "data", &["--clips", "10"]);
    ok(d, &["segment", "--manifest", "data/manifest.json", "--out", "all.seg"]);
    ok(
        d,
        &[
            "train",
            "--segments",
            "all.seg",
            "--out",
            "net.ckpt",
            "--epochs",
            "1",
            "--batch-size",
            "4",
        ],
    );
    ok(
        d,
        &[
            "embed",
            "--checkpoint",
            "net.ckpt",
            "--segments",
            "all.seg",
            "--out",
            "all.emb",
        ],
    );
    let out = segmatch(d, &["evaluate", "--embeddings", "all.emb", "-n", "11"]);
    assert_eq!(out.status.code(), Some(2));
    let out = segmatch(d, &["rank", "--embeddings", "all.emb", "--query", "nope"]);
    assert_eq!(out.status.code(), Some(2));

    let top: Value = serde_json::from_str(&ok(
        d,
        &[
            "rank",
            "--embeddings",
            "all.emb",
            "--query",
            "clip00002",
            "--distance",
            "nw_dtw",
            "--top",
            "3",
        ],
    ))
    .unwrap();
    assert_eq!(top["results"].as_array().unwrap().len(), 3);
    assert_eq!(top["distance_name"], "nw_dtw");

    // A checkpoint is refused for segments from another segmenter unless forced.
    ok(
        d,
        &[
            "segment",
            "--manifest",
            "data/manifest.json",
            "--segmenter",
            "whole_clip",
            "--out",
            "whole.seg",
        ],
    );
    let out = segmatch(
        d,
        &[
            "embed",
            "--checkpoint",
            "net.ckpt",
            "--segments",
            "whole.seg",
            "--out",
            "w.emb",
        ],
    );
    assert_eq!(out.status.code(), Some(1));
    ok(
        d,
        &[
            "embed",
            "--checkpoint",
            "net.ckpt",
            "--segments",
            "whole.seg",
            "--out",
            "w.emb",
            "--force",
        ],
    );
}

#[test]
fn config_file_is_overridden_by_flags() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    synth(d, "data", &["--clips", "4"]);
    fs::write(
        d.join("run.json"),
        r#"{"manifest": "data/manifest.json", "segmenter": {"kind": "fixed", "fixed_length_frames": 5}}"#,
    )
    .unwrap();
    let s: Value =
        serde_json::from_str(&ok(d, &["--json", "--config", "run.json", "segment", "--out", "a.seg"])).unwrap();
    assert_eq!(s["segmenter"], "fixed");
    let s: Value = serde_json::from_str(&ok(
        d,
        &[
            "--json",
            "--config",
            "run.json",
            "segment",
            "--out",
            "b.seg",
            "--segmenter",
            "whole_clip",
        ],
    ))
    .unwrap();
    assert_eq!(s["segmenter"], "whole_clip");
    assert_eq!(s["segments"], 4);
}
