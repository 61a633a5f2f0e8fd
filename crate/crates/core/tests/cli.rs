use std::path::Path;
use std::process::{Command, Output};

fn paal(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_paal"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

const COHORT: &str = r#"
num_classes = 3
num_patients = 30
feature_dim = 4
patient_offset_scale = 1.5
noise_scale = 0.5
max_samples_per_patient = 20
data_seed = 5
"#;

const RUN: &str = r#"
strategy = "margin"
initial_budget = 8
per_round_k = 4
num_rounds = 3
seeds = [1, 2, 3]
learning_rate = 0.01
max_epochs = 40
"#;

#[test]
fn gen_data_then_run_on_csv() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("cohort.toml"), COHORT).unwrap();
    let out = paal(
        &["gen-data", "--spec", "cohort.toml", "--out-train", "train.csv", "--out-test", "test.csv"],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let train = std::fs::read_to_string(dir.path().join("train.csv")).unwrap();
    assert!(train.starts_with("sample_id,patient_id,label,f0,f1,f2,f3\n"));

    let cfg = format!("data = \"csv\"\ntrain_csv = \"train.csv\"\ntest_csv = \"test.csv\"\n{RUN}");
    std::fs::write(dir.path().join("run.toml"), cfg).unwrap();
    let out = paal(&["run", "--config", "run.toml", "--patient-aware", "--out", "res"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for seed in [1, 2, 3] {
        let curve = std::fs::read_to_string(dir.path().join(format!("res/curve_seed{seed}.csv"))).unwrap();
        assert_eq!(curve.lines().count(), 1 + 4);
        assert!(curve.starts_with("round,labeled_count,test_accuracy,epochs_run\n"));
        let sel = std::fs::read_to_string(dir.path().join(format!("res/selections_seed{seed}.csv"))).unwrap();
        assert_eq!(sel.lines().count(), 1 + 3 * 4);
    }
    let summary = std::fs::read_to_string(dir.path().join("res/summary.csv")).unwrap();
    assert!(summary.starts_with("round,labeled_count,mean_acc,stderr\n"));
    assert_eq!(std::fs::read_to_string(dir.path().join("res/failures.csv")).unwrap(), "seed,error\n");
}

#[test]
fn reruns_are_byte_identical_and_summarize_agrees() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("run.toml"), format!("{COHORT}{RUN}")).unwrap();
    for out_dir in ["a", "b"] {
        let out = paal(&["run", "--config", "run.toml", "--strategy", "badge", "--seeds", "4,5", "--out", out_dir], dir.path());
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    for name in ["curve_seed4.csv", "curve_seed5.csv", "selections_seed4.csv", "summary.csv"] {
        let a = std::fs::read(dir.path().join("a").join(name)).unwrap();
        let b = std::fs::read(dir.path().join("b").join(name)).unwrap();
        assert_eq!(a, b, "{name}");
    }
    assert!(!dir.path().join("a/curve_seed1.csv").exists());

    let written = std::fs::read(dir.path().join("a/summary.csv")).unwrap();
    std::fs::remove_file(dir.path().join("a/summary.csv")).unwrap();
    let out = paal(&["summarize", "a"], dir.path());
    assert!(out.status.success());
    assert_eq!(out.stdout, written);
    assert_eq!(std::fs::read(dir.path().join("a/summary.csv")).unwrap(), written);
}

#[test]
fn config_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("bad.toml"), "strategy = \"entropy\"\nbogus_key = 1\n").unwrap();
    let out = paal(&["run", "--config", "bad.toml", "--out", "x"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("bogus_key"));

    std::fs::write(dir.path().join("ok.toml"), format!("{COHORT}{RUN}")).unwrap();
    let out = paal(&["run", "--config", "ok.toml", "--strategy", "coreset", "--out", "x"], dir.path());
    assert_eq!(out.status.code(), Some(2));

    // budget larger than the training pool
    std::fs::write(dir.path().join("big.toml"), format!("{COHORT}{RUN}").replace("num_rounds = 3", "num_rounds = 900")).unwrap();
    let out = paal(&["run", "--config", "big.toml", "--out", "x"], dir.path());
    assert_eq!(out.status.code(), Some(2));

    std::fs::write(dir.path().join("tiny.toml"), "num_patients = 2\n").unwrap();
    let out = paal(&["gen-data", "--spec", "tiny.toml", "--out-train", "a.csv", "--out-test", "b.csv"], dir.path());
    assert_eq!(out.status.code(), Some(2));

    let out = paal(&["run", "--config", "missing.toml", "--out", "x"], dir.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn runtime_errors_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    // every seed fails: more picks per round than patients, refill disabled
    let cfg = format!("{COHORT}{RUN}allow_refill = false\n").replace("per_round_k = 4", "per_round_k = 30").replace("num_rounds = 3", "num_rounds = 1");
    std::fs::write(dir.path().join("run.toml"), cfg).unwrap();
    let out = paal(&["run", "--config", "run.toml", "--patient-aware", "--out", "res"], dir.path());
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
    let failures = std::fs::read_to_string(dir.path().join("res/failures.csv")).unwrap();
    assert_eq!(failures.lines().count(), 4);
    assert!(failures.contains("insufficient patients"));

    // malformed dataset
    std::fs::write(dir.path().join("train.csv"), "sample_id,patient_id,label,f0\n0,1,0,x\n").unwrap();
    std::fs::write(dir.path().join("csv.toml"), format!("data = \"csv\"\ntrain_csv = \"train.csv\"\ntest_csv = \"train.csv\"\n{RUN}")).unwrap();
    let out = paal(&["run", "--config", "csv.toml", "--out", "res2"], dir.path());
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("train.csv:2"));

    let out = paal(&["summarize", "nowhere"], dir.path());
    assert_eq!(out.status.code(), Some(3));
}
