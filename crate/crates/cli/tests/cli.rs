//! CLI contract tests: exit codes, error surfaces, and file handling.

use std::path::PathBuf;
use std::process::Command;

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_listlab")
}

fn run(args: &[&str]) -> (i32, String, String) {
    let out = Command::new(bin()).args(args).output().expect("spawn listlab");
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8_lossy(&out.stdout).into_owned(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("listlab-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

#[test]
fn malformed_class_file_exits_2_with_position() {
    let path = scratch("bad.json");
    std::fs::write(&path, "{\n \"domain_size\": 2,\n \"label_count\": oops\n}").unwrap();
    let (code, _, err) = run(&["dim", path.to_str().unwrap(), "--kind", "littlestone", "-k", "1"]);
    assert_eq!(code, 2, "{err}");
    assert!(err.contains("line 3"), "{err}");
}

#[test]
fn budget_blowup_exits_3() {
    let (code, _, err) =
        run(&["gen", "--family", "full", "-n", "20", "--labels", "3", "--out", "/dev/null"]);
    assert_eq!(code, 3, "{err}");
}

#[test]
fn unrealizable_feedback_exits_4() {
    let class = scratch("branch.json");
    let (code, _, _) = run(&[
        "gen", "--family", "branch", "--depth", "1", "-k", "1", "--out",
        class.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    let seq = scratch("unrealizable.txt");
    std::fs::write(&seq, "0 1\n0 0\n").unwrap();
    let (code, _, err) = run(&[
        "learn",
        class.to_str().unwrap(),
        "-k",
        "1",
        "--seq",
        seq.to_str().unwrap(),
        "--seed",
        "1",
    ]);
    assert_eq!(code, 4, "{err}");
}

#[test]
fn gap_violation_exits_5() {
    let cfg = scratch("gap.json");
    std::fs::write(
        &cfg,
        "{\"tree_depth\":1024,\"k\":2,\"instance_depths\":[10,50],\
         \"learner\":\"perfect\",\"trials\":5,\"seed\":1}",
    )
    .unwrap();
    let (code, _, err) = run(&["ipp", cfg.to_str().unwrap()]);
    assert_eq!(code, 5, "{err}");

    // the same instance passes after rescaling: gaps expand linearly while
    // the interval length only grows with the squared log
    let cfg2 = scratch("gap-rescaled.json");
    std::fs::write(
        &cfg2,
        "{\"tree_depth\":1024,\"k\":2,\"instance_depths\":[10,50],\
         \"learner\":\"perfect\",\"trials\":5,\"seed\":1,\"rescale_factor\":64}",
    )
    .unwrap();
    let (code, out, err) = run(&["ipp", cfg2.to_str().unwrap()]);
    assert_eq!(code, 0, "{err}");
    assert!(out.contains("tree_depth = 65536"), "{out}");
}

#[test]
fn tower_gate_exits_3_on_ramsey_bound() {
    let (code, _, err) = run(&[
        "ramsey", "--mode", "bound", "--d", "4", "--m", "4", "--colors", "3", "--arity", "2",
    ]);
    assert_eq!(code, 3, "{err}");
    assert!(err.contains("budget"), "{err}");
}

#[test]
fn missing_seed_is_a_usage_error() {
    let (code, _, err) = run(&[
        "ramsey", "--mode", "set", "--tuple", "2", "--universe", "6", "--colors", "2",
        "--subset-size", "3",
    ]);
    assert_ne!(code, 0);
    assert!(err.contains("--seed") || err.contains("seed"), "{err}");
}

#[test]
fn gen_without_out_prints_the_class_inline() {
    let (code, out, _) = run(&["gen", "--family", "monotone", "-n", "2", "--labels", "2"]);
    assert_eq!(code, 0);
    assert!(out.contains("\"domain_size\": 2"), "{out}");
    assert!(out.contains("concepts = 3"), "{out}");
}

#[test]
fn help_mentions_the_formats_doc() {
    let (code, out, _) = run(&["--help"]);
    assert_eq!(code, 0);
    assert!(out.contains("FORMATS"), "{out}");
}
