//! End-to-end runs of the `haptic-lfd` binary on a reduced configuration.

use std::path::Path;
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_haptic-lfd");

/// Small networks and short schedules so the whole pipeline runs in seconds.
const FAST: &str = r#"
[vae]
encoder_hidden = 16
decoder_hidden = 16
epochs = 3

[lfd]
epochs = 40

[tsne]
iterations = 250
"#;

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(BIN).current_dir(dir).args(args).output().expect("binary runs")
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

/// Exit code and the single stderr line of a failing invocation.
fn fails(dir: &Path, args: &[&str]) -> (i32, String) {
    let out = run(dir, args);
    let stderr = String::from_utf8(out.stderr).unwrap();
    assert_eq!(stderr.lines().count(), 1, "expected one error line, got {stderr:?}");
    (out.status.code().unwrap(), stderr.trim_end().to_string())
}

fn setup() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("fast.toml"), FAST).unwrap();
    dir
}

#[test]
fn full_pipeline_produces_reports() {
    let dir = setup();
    let d = dir.path();
    let c = ["--config", "fast.toml"];
    let with = |rest: &[&str]| -> Vec<String> { c.iter().chain(rest).map(|s| s.to_string()).collect() };
    let call = |rest: &[&str]| {
        let args = with(rest);
        ok(d, &args.iter().map(String::as_str).collect::<Vec<_>>())
    };

    call(&["collect", "--count", "24", "--out", "unsup.hlfd"]);
    assert!(d.join("unsup.hlfd.manifest.json").exists());
    call(&["demo", "--split", "friction-extrap", "--out", "demos.hlfd"]);
    call(&["pretrain", "--data", "unsup.hlfd", "--out", "enc.hlfw"]);
    call(&["train", "--demos", "demos.hlfd", "--encoder", "enc.hlfw", "--out", "pre.hlfw"]);
    call(&["train", "--demos", "demos.hlfd", "--out", "base.hlfw"]);

    let gen = call(&["generate", "--model", "pre.hlfw", "--demos", "demos.hlfd", "--object", "1", "--out", "m.csv"]);
    assert!(gen.contains("motion rmse"));
    let motion = std::fs::read_to_string(d.join("m.csv")).unwrap();
    assert_eq!(motion.lines().next(), Some("step,x,y,z"));
    assert_eq!(motion.lines().count(), 2001);

    call(&["evaluate", "--demos", "demos.hlfd", "--model", "pre.hlfw", "--model", "base.hlfw", "--out", "eval.csv"]);
    let summary = std::fs::read_to_string(d.join("eval.csv")).unwrap();
    let rows: Vec<&str> = summary.lines().collect();
    assert_eq!(rows.len(), 3);
    assert!(rows[0].starts_with("model,split,objects,motion_rmse_mean"));
    assert!(rows[1].starts_with("pre,friction-extrap,4,"));
    assert!(rows[2].starts_with("base,friction-extrap,4,"));
    let objects = std::fs::read_to_string(d.join("eval.objects.csv")).unwrap();
    assert_eq!(objects.lines().count(), 1 + 2 * 4);

    let emb = call(&["embed", "--encoder", "enc.hlfw", "--out", "emb.csv"]);
    assert!(emb.contains("silhouette"));
    let emb = std::fs::read_to_string(d.join("emb.csv")).unwrap();
    assert_eq!(emb.lines().next(), Some("object_id,stiffness_level,friction_level,dim1,dim2"));
    assert_eq!(emb.lines().count(), 1 + 12 * 5);
}

#[test]
fn collect_is_deterministic_per_seed() {
    let dir = setup();
    let d = dir.path();
    ok(d, &["--seed", "7", "collect", "-m", "1", "--out", "a.hlfd"]);
    ok(d, &["--seed", "7", "collect", "-m", "1", "--out", "b.hlfd"]);
    ok(d, &["--seed", "8", "collect", "-m", "1", "--out", "c.hlfd"]);
    let a = std::fs::read(d.join("a.hlfd")).unwrap();
    assert_eq!(a, std::fs::read(d.join("b.hlfd")).unwrap());
    assert_ne!(a, std::fs::read(d.join("c.hlfd")).unwrap());
}

#[test]
fn zero_count_is_a_config_error() {
    let dir = setup();
    let (code, line) = fails(dir.path(), &["collect", "--count", "0"]);
    assert_eq!(code, 2);
    assert!(line.starts_with("error kind=config exit=2 message="), "{line}");
    assert!(line.contains("count must be ≥ 1"), "{line}");
}

#[test]
fn unknown_split_lists_valid_names() {
    let dir = setup();
    let (code, line) = fails(dir.path(), &["demo", "--split", "sideways"]);
    assert_eq!(code, 2);
    for name in ["stiffness-interp", "stiffness-extrap", "friction-interp", "friction-extrap"] {
        assert!(line.contains(name), "{line}");
    }
}

#[test]
fn bad_config_key_is_named() {
    let dir = setup();
    std::fs::write(dir.path().join("bad.toml"), "[vae]\nlatnet_dim = 4\n").unwrap();
    let (code, line) = fails(dir.path(), &["--config", "bad.toml", "collect", "-m", "1"]);
    assert_eq!(code, 2);
    assert!(line.contains("latnet_dim"), "{line}");
}

#[test]
fn missing_config_and_unwritable_output_are_io_errors() {
    let dir = setup();
    let (code, line) = fails(dir.path(), &["--config", "nope.toml", "collect", "-m", "1"]);
    assert_eq!(code, 5);
    assert!(line.starts_with("error kind=io exit=5"), "{line}");
    let (code, _) = fails(dir.path(), &["collect", "-m", "1", "--out", "no/such/dir/x.hlfd"]);
    assert_eq!(code, 5);
}

#[test]
fn changed_config_is_a_provenance_error() {
    let dir = setup();
    let d = dir.path();
    ok(d, &["collect", "-m", "2", "--out", "u.hlfd"]);
    std::fs::write(d.join("other.toml"), "[noise]\nforce_noise_sd = 0.3\n").unwrap();
    let (code, line) = fails(d, &["--config", "other.toml", "pretrain", "--data", "u.hlfd"]);
    assert_eq!(code, 3);
    assert!(line.starts_with("error kind=provenance exit=3"), "{line}");
}

#[test]
fn corrupted_weights_are_rejected() {
    let dir = setup();
    let d = dir.path();
    ok(d, &["--config", "fast.toml", "collect", "-m", "4", "--out", "u.hlfd"]);
    ok(d, &["--config", "fast.toml", "pretrain", "--data", "u.hlfd", "--out", "e.hlfw"]);
    let p = d.join("e.hlfw");
    let mut bytes = std::fs::read(&p).unwrap();
    let n = bytes.len();
    bytes[n - 100] ^= 0x01;
    std::fs::write(&p, bytes).unwrap();
    let (code, line) = fails(d, &["--config", "fast.toml", "embed", "--encoder", "e.hlfw"]);
    assert_eq!(code, 3);
    assert!(line.contains("checksum"), "{line}");
}

#[test]
fn usage_errors_are_single_line_config_errors() {
    let dir = setup();
    let (code, line) = fails(dir.path(), &["collect"]);
    assert_eq!(code, 2);
    assert!(line.starts_with("error kind=config exit=2"), "{line}");
    assert!(run(dir.path(), &["--help"]).status.success());
}
