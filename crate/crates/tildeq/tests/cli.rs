use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const TINY: &[&str] = &[
    "--set", "data.count_train=16",
    "--set", "data.count_val=8",
    "--set", "data.count_test=8",
    "--set", "model.hidden_size=3",
    "--set", "train.max_epochs=2",
];

fn tildeq(args: &[&str], env: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_tildeq"));
    cmd.args(args);
    for (k, v) in env {
        cmd.env(k, v);
    }
    cmd.output().unwrap()
}

fn ok(out: &Output) -> String {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn record(dir: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(dir.join("results.json")).unwrap()).unwrap()
}

#[test]
fn run_layers_config_env_and_flags() {
    let tmp = tempfile::tempdir().unwrap();
    let config = tmp.path().join("exp.conf");
    fs::write(&config, "# tiny\nname = layered\nloss = mse\nrepeats = 3\nseed = 4\n").unwrap();
    let out = tmp.path().join("run");
    let mut args = vec!["run", "-q", "--config", config.to_str().unwrap(), "--repeats", "2", "--out", out.to_str().unwrap()];
    args.extend_from_slice(TINY);
    ok(&tildeq(&args, &[("TILDEQ_SEED", "9"), ("TILDEQ_LOSS", "ashift_only")]));

    let rec = record(&out);
    assert_eq!(rec["name"], "layered");
    // the environment beats the file, flags beat the environment
    assert_eq!(rec["loss"], "ashift_only");
    assert_eq!(rec["seeds"], serde_json::json!([9, 10]));
    assert!(out.join("metrics.csv").exists());
    assert!(out.join("checkpoints/repeat_01.ckpt").exists());
    let svgs = fs::read_dir(out.join("plots"))
        .unwrap()
        .filter(|e| e.as_ref().unwrap().path().extension().is_some_and(|x| x == "svg"))
        .count();
    assert_eq!(svgs, 3);
}

#[test]
fn seed_flag_overrides_environment() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("run");
    let mut args = vec!["run", "-q", "--seed", "2", "--repeats", "1", "--out", out.to_str().unwrap()];
    args.extend_from_slice(TINY);
    ok(&tildeq(&args, &[("TILDEQ_SEED", "9")]));
    assert_eq!(record(&out)["seeds"], serde_json::json!([2]));
}

#[test]
fn bad_settings_fail_cleanly() {
    let out = tildeq(&["run", "--set", "no.such.key=1"], &[]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("no.such.key"));
    let out = tildeq(&["run", "--set", "loss=bogus"], &[]);
    assert!(!out.status.success());
    let out = tildeq(&["run"], &[("TILDEQ_TRAIN_PATIENCE", "soon")]);
    assert!(!out.status.success());
}

#[test]
fn ablate_and_plot_commands() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("ab");
    let mut args = vec!["ablate", "-q", "--repeats", "1", "--alphas", "0.9,0.2", "--out", out.to_str().unwrap()];
    args.extend_from_slice(TINY);
    let stdout = ok(&tildeq(&args, &[]));
    assert!(stdout.contains("amp_only"));
    let table = fs::read_to_string(out.join("ablation.csv")).unwrap();
    assert_eq!(table.lines().count(), 1 + 5);

    let stdout = ok(&tildeq(&["plot", "--out", out.join("alpha_0.9").to_str().unwrap(), "--samples", "2"], &[]));
    assert_eq!(stdout.lines().count(), 4);
}

#[test]
fn distort_and_metrics_commands() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().to_str().unwrap();
    ok(&tildeq(&["distort", "--kind", "amplitude_shift", "--param", "-1.5", "--len", "16", "--count", "2", "--out", dir], &[]));
    let csv = fs::read_to_string(tmp.path().join("distorted.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 32);
    let row: Vec<f64> = csv.lines().nth(1).unwrap().split(',').map(|c| c.parse().unwrap()).collect();
    assert!((row[3] - row[2] + 1.5).abs() < 1e-12);
    assert!(!tildeq(&["distort", "--kind", "warp", "--param", "1", "--out", dir], &[]).status.success());

    let truth = tmp.path().join("truth.csv");
    let pred = tmp.path().join("pred.csv");
    fs::write(&truth, "value\n0\n1\n2\n3\n").unwrap();
    fs::write(&pred, "0\n1\n2\n4\n").unwrap();
    let stdout = ok(&tildeq(&["metrics", "--truth", truth.to_str().unwrap(), "--pred", pred.to_str().unwrap()], &[]));
    let lines: Vec<&str> = stdout.lines().collect();
    assert_eq!(lines[0], "MSE,DTW,TDI,LCSS");
    let mse: f64 = lines[1].split(',').next().unwrap().parse().unwrap();
    assert_eq!(mse, 0.25);

    fs::write(&pred, "0\n1\n").unwrap();
    assert!(!tildeq(&["metrics", "--truth", truth.to_str().unwrap(), "--pred", pred.to_str().unwrap()], &[]).status.success());
}
