use std::path::Path;
use std::process::{Command, Output};

fn csnet(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_csnet"))
        .args(args)
        .output()
        .expect("spawn csnet")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn write_config(dir: &Path, text: &str) -> String {
    let p = dir.join("exp.txt");
    std::fs::write(&p, text).unwrap();
    p.display().to_string()
}

const SMALL: &str = "task = classify\nalgebra = dense:2\nper_class = 3\ntest_per_class = 5\nepochs = 2\nhidden = 8\n";

#[test]
fn usage_errors_exit_2() {
    let tmp = tempfile::tempdir().unwrap();
    let unknown_task = write_config(tmp.path(), "task = regress\n");
    assert_eq!(code(&csnet(&["run", &unknown_task])), 2);

    let bad_key = write_config(tmp.path(), "task = classify\nwidth = 3\n");
    let out = csnet(&["run", &bad_key]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("width"));

    assert_eq!(code(&csnet(&["run"])), 2);
    let missing = tmp.path().join("nope.txt");
    assert_eq!(code(&csnet(&["run", missing.to_str().unwrap()])), 2);
    assert_eq!(code(&csnet(&["frobnicate"])), 2);

    let cfg = write_config(tmp.path(), SMALL);
    assert_eq!(code(&csnet(&["run", &cfg, "--set", "lr"])), 2);
    assert_eq!(code(&csnet(&["run", &cfg, "--set", "algebra=group:3"])), 2);
    assert_eq!(code(&csnet(&["report", tmp.path().to_str().unwrap()])), 2);
}

#[test]
fn runtime_errors_exit_1() {
    let tmp = tempfile::tempdir().unwrap();
    let out_dir = tmp.path().join("out");
    let cfg = write_config(
        tmp.path(),
        "task = nir2d\nalgebra = diagonal:1\nimages = /nonexistent/target.png\niterations = 1\n",
    );
    let out = csnet(&["run", &cfg, "--output", out_dir.to_str().unwrap()]);
    assert_eq!(code(&out), 1, "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn selftest_passes() {
    let out = csnet(&["selftest"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stdout));
    assert!(String::from_utf8_lossy(&out.stdout).lines().all(|l| l.starts_with("PASS")));
}

#[test]
fn run_writes_artifacts() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), SMALL);
    let dir = tmp.path().join("run");
    let out = csnet(&["run", &cfg, "--output", dir.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).contains("mean_test_accuracy = "));
    for f in [
        "config.txt",
        "run.txt",
        "metrics.csv",
        "summary.csv",
        "checkpoint.bin",
        "accuracy.csv",
        "accuracy_curve.csv",
        "accuracy_curve.png",
    ] {
        assert!(dir.join(f).is_file(), "missing {f}");
    }
}

#[test]
fn sweep_then_report() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), SMALL);
    let root = tmp.path().join("sweep");
    let out = csnet(&[
        "sweep",
        &cfg,
        "--vary",
        "algebra=diagonal:2,dense:2",
        "--vary",
        "seed=0,1",
        "--out",
        root.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let dirs: Vec<String> = String::from_utf8_lossy(&out.stdout).lines().map(str::to_string).collect();
    assert_eq!(dirs.len(), 4);

    let mut args = vec!["report"];
    args.extend(dirs.iter().map(String::as_str));
    let out = csnet(&args);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("diagonal:2") && text.contains("dense:2"), "{text}");
}

#[test]
fn bench_emits_csv() {
    let out = csnet(&["bench", "--width", "4", "--depth", "1", "--repetitions", "3"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.lines().count() > 2);
    assert_eq!(code(&csnet(&["bench", "--width", "0"])), 2);
    assert_eq!(code(&csnet(&["bench", "--repetitions", "1"])), 2);
}
