use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use storyseg::pipeline::{read_json, read_trace_csv};
use storyseg::VideoFeatures;

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_storyseg"))
        .args(args)
        .current_dir(dir)
        .output()
        .unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn corpus(dir: &Path) {
    let o = run(dir, &["synth", "--out", "c", "--videos", "2"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
}

#[test]
fn help_and_version_succeed() {
    let dir = tempfile::tempdir().unwrap();
    for args in [&["--help"][..], &["--version"], &["segment", "--help"]] {
        let o = run(dir.path(), args);
        assert_eq!(code(&o), 0);
        assert!(!o.stdout.is_empty());
    }
    let o = run(dir.path(), &["--help"]);
    assert!(String::from_utf8_lossy(&o.stdout).contains("assemble-features"));
}

#[test]
fn bad_invocations_exit_with_usage_code() {
    let dir = tempfile::tempdir().unwrap();
    for args in [&[][..], &["no-such-command"], &["segment"], &["synth", "--out", "x", "--videos", "many"]] {
        let o = run(dir.path(), args);
        assert_eq!(code(&o), 1, "{args:?}: {}", stderr(&o));
    }
}

#[test]
fn invalid_parameter_values_exit_with_usage_code() {
    let dir = tempfile::tempdir().unwrap();
    corpus(dir.path());
    let o = run(dir.path(), &["segment", "--features", "c/videos/video000.features.json", "--c", "-1", "--out", "s.json"]);
    assert_eq!(code(&o), 1, "{}", stderr(&o));
    let o = run(
        dir.path(),
        &["assemble-features", "--video", "c/videos/video000.video.json", "--terms", "c/videos/video000.terms.json", "--out", "f.json"],
    );
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("--embeddings"));
}

#[test]
fn missing_input_names_the_file() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["segment", "--features", "absent.json", "--out", "s.json"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("absent.json"));
}

#[test]
fn malformed_input_names_file_and_field() {
    let dir = tempfile::tempdir().unwrap();
    corpus(dir.path());
    let path = dir.path().join("c/videos/video000.video.json");
    let text = fs::read_to_string(&path).unwrap().replacen("\"fps\"", "\"fps_typo\"", 1);
    fs::write(&path, text).unwrap();
    let o = run(
        dir.path(),
        &[
            "assemble-features", "--video", "c/videos/video000.video.json", "--terms", "c/videos/video000.terms.json",
            "--groups", "c/groups.json", "--out", "f.json",
        ],
    );
    assert_eq!(code(&o), 2);
    let err = stderr(&o);
    assert!(err.contains("video000.video.json"), "{err}");
    assert!(err.contains("fps"), "{err}");
}

#[test]
fn malformed_embeddings_name_the_line() {
    let dir = tempfile::tempdir().unwrap();
    corpus(dir.path());
    fs::write(dir.path().join("bad.txt"), "alpha 1 2\nbeta 1 x\n").unwrap();
    let o = run(
        dir.path(),
        &[
            "assemble-features", "--video", "c/videos/video000.video.json", "--terms", "c/videos/video000.terms.json",
            "--embeddings", "bad.txt", "--k", "1", "--out", "f.json",
        ],
    );
    assert_eq!(code(&o), 2);
    let err = stderr(&o);
    assert!(err.contains("bad.txt") && err.contains("line 2"), "{err}");
}

#[test]
fn assembled_features_match_generated_ones() {
    let dir = tempfile::tempdir().unwrap();
    corpus(dir.path());
    let o = run(
        dir.path(),
        &[
            "assemble-features", "--video", "c/videos/video001.video.json", "--terms", "c/videos/video001.terms.json",
            "--groups", "c/groups.json", "--out", "f.json",
        ],
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let ours: VideoFeatures = read_json(&dir.path().join("f.json")).unwrap();
    let generated: VideoFeatures = read_json(&dir.path().join("c/videos/video001.features.json")).unwrap();
    assert_eq!(ours, generated);
}

#[test]
fn automatic_segmentation_writes_sweep_trace() {
    let dir = tempfile::tempdir().unwrap();
    corpus(dir.path());
    let o = run(
        dir.path(),
        &["segment", "--features", "c/videos/video000.features.json", "--out", "s.json", "--trace", "t.csv"],
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let text = fs::read_to_string(dir.path().join("t.csv")).unwrap();
    assert!(text.starts_with("C,m,objective"));
    let trace = read_trace_csv(&dir.path().join("t.csv")).unwrap();
    assert!(!trace.is_empty());
    assert!(trace.windows(2).all(|w| w[0].c < w[1].c));
}
