use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

const SMALL: &str = r#"
seed = 5

[synth]
entities = 60
base_relations = 2
facts_per_relation = 50
clusters = 2

[model]
dim = 16
type_dim = 8
label_dim = 8
epochs = 5
batch_size = 128

[feedback]
max_iter = 2
"#;

fn kgrefine(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kgrefine"))
        .args(args)
        .env("RUST_LOG", "error")
        .output()
        .unwrap()
}

fn summary(out: &Output) -> Value {
    let stdout = String::from_utf8_lossy(&out.stdout);
    let line = stdout.lines().last().unwrap_or_else(|| {
        panic!(
            "no stdout; stderr: {}",
            String::from_utf8_lossy(&out.stderr)
        )
    });
    serde_json::from_str(line).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Writes the small config and a prepared synthetic graph into `dir`.
fn prepared(dir: &Path) -> (String, String) {
    let config = dir.join("run.toml");
    fs::write(&config, SMALL).unwrap();
    let kg = dir.join("kg");
    let out = kgrefine(&[
        "prepare",
        "--synthetic",
        "--config",
        s(&config),
        "--out",
        s(&kg),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    (s(&config).to_owned(), s(&kg).to_owned())
}

#[test]
fn no_arguments_is_a_usage_error() {
    let out = kgrefine(&[]);
    assert_eq!(out.status.code(), Some(1));
    assert!(!out.stderr.is_empty());
}

#[test]
fn version_and_help_exit_zero() {
    let out = kgrefine(&["--version"]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).contains(env!("CARGO_PKG_VERSION")));
    assert!(kgrefine(&["iterate", "--help"]).status.success());
}

#[test]
fn bad_config_reports_a_json_error() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("bad.toml");
    let (_, kg) = prepared(dir.path());
    for (name, text) in [("top", "sede = 1\n"), ("nested", "[model]\nepochz = 3\n")] {
        fs::write(&config, text).unwrap();
        let out = kgrefine(&["infer", "--config", s(&config), "--kg", &kg]);
        assert!(!out.status.success(), "{name} typo accepted");
        let v = summary(&out);
        assert_eq!(v["status"], "error");
        assert_eq!(v["exit_code"].as_i64(), out.status.code().map(i64::from));
        let stderr = String::from_utf8_lossy(&out.stderr);
        assert!(
            stderr.contains(text.split_whitespace().rev().nth(2).unwrap()),
            "{stderr}"
        );
    }
}

#[test]
fn missing_graph_directory_fails() {
    let out = kgrefine(&["infer", "--kg", "/nonexistent/graph"]);
    assert!(!out.status.success());
    assert_eq!(summary(&out)["status"], "error");
}

#[test]
fn prepare_writes_a_loadable_graph() {
    let dir = tempfile::tempdir().unwrap();
    let (_, kg) = prepared(dir.path());
    for f in [
        "triples.tsv",
        "labels.tsv",
        "truth.tsv",
        "noise.tsv",
        "stats.json",
    ] {
        assert!(Path::new(&kg).join(f).exists(), "{f} missing");
    }
    let stats: Value =
        serde_json::from_str(&fs::read_to_string(Path::new(&kg).join("stats.json")).unwrap())
            .unwrap();
    assert!(stats.is_object());

    let out_dir = dir.path().join("infer");
    let out = kgrefine(&["infer", "--kg", &kg, "--out", s(&out_dir)]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert_eq!(summary(&out)["status"], "ok");
    let inferred = fs::read_to_string(out_dir.join("inferred.tsv")).unwrap();
    assert!(inferred.lines().any(|l| l.starts_with("REL\t")));
}

#[test]
fn iterate_is_byte_for_byte_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let (config, kg) = prepared(dir.path());
    let mut reports = Vec::new();
    for run in ["a", "b"] {
        let out_dir = dir.path().join(run);
        let out = kgrefine(&[
            "iterate",
            "--config",
            &config,
            "--kg",
            &kg,
            "--out",
            s(&out_dir),
        ]);
        assert!(
            out.status.success(),
            "{}",
            String::from_utf8_lossy(&out.stderr)
        );
        for f in [
            "model.bin",
            "refined.tsv",
            "iter-1/feedback.tsv",
            "iter-1/inferred.tsv",
        ] {
            assert!(out_dir.join(f).exists(), "{f} missing");
        }
        reports.push(fs::read(out_dir.join("reports.json")).unwrap());
    }
    assert!(!reports[0].is_empty());
    assert_eq!(reports[0], reports[1]);

    // A different seed changes the run.
    let out_dir = dir.path().join("c");
    let out = kgrefine(&[
        "iterate",
        "--config",
        &config,
        "--kg",
        &kg,
        "--seed",
        "6",
        "--out",
        s(&out_dir),
    ]);
    assert!(out.status.success());
    assert_ne!(fs::read(out_dir.join("reports.json")).unwrap(), reports[0]);
}

#[test]
fn flags_override_the_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let (config, kg) = prepared(dir.path());
    let out_dir = dir.path().join("t");
    let out = kgrefine(&[
        "train",
        "--config",
        &config,
        "--kg",
        &kg,
        "--mode",
        "plain",
        "--epochs",
        "1",
        "--out",
        s(&out_dir),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let train: Value =
        serde_json::from_str(&fs::read_to_string(out_dir.join("train.json")).unwrap()).unwrap();
    let text = train.to_string();
    assert!(text.contains("\"plain\""), "{text}");
    assert!(out_dir.join("model.bin").exists());
}
