use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn wordseg(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_wordseg"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = wordseg(args);
    assert!(
        out.status.success(),
        "wordseg {args:?} failed:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// A synthetic corpus of `n` utterances under `dir`.
fn corpus(dir: &Path, n: usize) -> PathBuf {
    ok(&["synth", "--out-dir", s(dir), "--num-utterances", &n.to_string(), "--seed", "3"]);
    dir.join("manifest.jsonl")
}

const FAST: [&str; 8] = ["--num-units", "5", "--epochs", "2", "--emb-dim", "4", "--hidden-dim", "8"];

fn stage(cmd: &str, manifest: &Path, work: &Path, extra: &[&str]) -> Output {
    let mut args = vec![cmd, "--manifest", s(manifest), "--work-dir", s(work)];
    args.extend_from_slice(&FAST);
    args.extend_from_slice(extra);
    wordseg(&args)
}

#[test]
fn units_writes_one_code_file_per_utterance() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = corpus(dir.path(), 2);
    let work = dir.path().join("work");
    let out = stage("units", &manifest, &work, &[]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert_eq!(fs::read_dir(work.join("units/codes")).unwrap().count(), 2);
    assert!(work.join("units/codebook.ftrs").is_file());
    let config = fs::read_to_string(work.join("config.toml")).unwrap();
    assert!(config.contains("num_units = 5"));
}

#[test]
fn rerun_without_force_skips() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = corpus(dir.path(), 2);
    let work = dir.path().join("work");
    assert!(stage("units", &manifest, &work, &[]).status.success());
    let code = work.join("units/codes/synth_0000.json");
    let before = fs::metadata(&code).unwrap().modified().unwrap();
    let out = stage("units", &manifest, &work, &[]);
    assert!(out.status.success());
    assert!(stderr(&out).contains("up to date"));
    assert_eq!(fs::metadata(&code).unwrap().modified().unwrap(), before);

    let out = stage("units", &manifest, &work, &["--force"]);
    assert!(out.status.success());
    assert!(!stderr(&out).contains("up to date"));
}

#[test]
fn corrupt_features_name_the_utterance() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = corpus(dir.path(), 2);
    let path = dir.path().join("features/synth_0001.ftrs");
    let bytes = fs::read(&path).unwrap();
    fs::write(&path, &bytes[..bytes.len() / 2]).unwrap();
    let out = stage("units", &manifest, &dir.path().join("work"), &[]);
    assert!(!out.status.success());
    assert!(stderr(&out).contains("synth_0001"), "{}", stderr(&out));
}

#[test]
fn words_before_units_is_actionable() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = corpus(dir.path(), 2);
    let out = stage("words", &manifest, &dir.path().join("work"), &[]);
    assert!(!out.status.success());
    assert!(stderr(&out).contains("run `units`"), "{}", stderr(&out));
}

#[test]
fn oversized_lexicon_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = corpus(dir.path(), 2);
    let out = stage("pipeline", &manifest, &dir.path().join("work"), &["--lexicon-size", "500"]);
    assert!(!out.status.success());
    assert!(stderr(&out).contains("at most"), "{}", stderr(&out));
}

#[test]
fn pipeline_requires_lexicon_size() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = corpus(dir.path(), 2);
    let out = stage("pipeline", &manifest, &dir.path().join("work"), &[]);
    assert!(!out.status.success());
    assert!(stderr(&out).contains("--lexicon-size"));
}

#[test]
fn pipeline_is_deterministic_and_evaluates() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = corpus(dir.path(), 6);
    let (w1, w2) = (dir.path().join("w1"), dir.path().join("w2"));
    for w in [&w1, &w2] {
        let out = stage("pipeline", &manifest, w, &["--lexicon-size", "3", "--jobs", "2"]);
        assert!(out.status.success(), "{}", stderr(&out));
    }
    let seg1 = fs::read(w1.join("segments.jsonl")).unwrap();
    assert_eq!(seg1, fs::read(w2.join("segments.jsonl")).unwrap());

    let words = dir.path().join("words.tsv");
    let phones = dir.path().join("phones.tsv");
    let report = |segments: &Path| {
        let out = ok(&[
            "eval",
            "--segments",
            s(segments),
            "--word-alignments",
            s(&words),
            "--phone-alignments",
            s(&phones),
        ]);
        String::from_utf8(out.stdout).unwrap()
    };
    let text = report(&w1.join("segments.jsonl"));
    for key in ["boundary_f1=", "token_f1=", "ned=", "utterances=6"] {
        assert!(text.contains(key), "missing {key} in\n{text}");
    }

    // Utterance order in the segmentation file does not matter.
    let mut lines: Vec<&str> = std::str::from_utf8(&seg1).unwrap().lines().collect();
    lines.reverse();
    let shuffled = dir.path().join("shuffled.jsonl");
    fs::write(&shuffled, lines.join("\n") + "\n").unwrap();
    assert_eq!(report(&shuffled), text);

    let out_file = dir.path().join("report.txt");
    ok(&[
        "eval",
        "--segments",
        s(&shuffled),
        "--word-alignments",
        s(&words),
        "--phone-alignments",
        s(&phones),
        "--out",
        s(&out_file),
    ]);
    assert_eq!(fs::read_to_string(&out_file).unwrap(), text);

    let out = wordseg(&["eval", "--segments", s(&shuffled), "--word-alignments", s(&words)]);
    assert!(!out.status.success());
    assert!(stderr(&out).contains("phone alignments"));
    let out = ok(&["eval", "--segments", s(&shuffled), "--word-alignments", s(&words), "--no-ned"]);
    assert!(String::from_utf8(out.stdout).unwrap().contains("ned=NA"));
}
