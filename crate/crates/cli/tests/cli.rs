use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const SMALL: &str = r#"
[model]
k = 2
hidden = 4
rnn_layers = 1
attention_dim = 4

[train]
epochs = 2
batch_size = 32
seed = 3

[synth]
nodes = 6
edges = 9
steps = 400
"#;

fn stgraph(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_stgraph"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn path(p: &Path) -> &str {
    p.to_str().expect("utf-8 temp path")
}

fn small_config(dir: &Path) -> String {
    let p = dir.join("small.toml");
    fs::write(&p, SMALL).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn missing_subcommand_is_a_usage_error() {
    let out = stgraph(&[]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
}

#[test]
fn bad_flag_values_are_usage_errors() {
    assert_eq!(stgraph(&["train", "--variant", "bogus"]).status.code(), Some(2));
    assert_eq!(stgraph(&["train", "--seed", "-1"]).status.code(), Some(2));
    assert_eq!(stgraph(&["frobnicate"]).status.code(), Some(2));
}

#[test]
fn runtime_failures_exit_one_with_a_single_line() {
    let dir = tempfile::tempdir().unwrap();
    let out = stgraph(&["evaluate", "--checkpoint", "/no/such/file", "--out", path(dir.path())]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert_eq!(err.trim_end().lines().count(), 1, "{err}");
    assert!(err.starts_with("error:"));
}

#[test]
fn unknown_config_keys_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, "[model]\nhops = 3\n").unwrap();
    let out = stgraph(&["train", "--config", path(&cfg), "--out", path(dir.path())]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn gradcheck_passes() {
    let out = stgraph(&["gradcheck", "--seed", "7"]);
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    let last = text.lines().last().unwrap();
    let worst: f64 = last.rsplit(' ').next().unwrap().parse().unwrap();
    assert!(worst < 1e-4, "{last}");
}

#[test]
fn synth_then_build_graph() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let data = dir.path().join("data");
    assert!(stgraph(&["synth", "--config", &cfg, "--out", path(&data)]).status.success());
    let readings = fs::read_to_string(data.join("readings.csv")).unwrap();
    assert_eq!(readings.lines().count(), 401);
    assert!(readings.starts_with("timestamp,s0,s1,s2,s3,s4,s5\n"));

    let graph = dir.path().join("graph");
    let out = stgraph(&[
        "build-graph",
        "--ids",
        path(&data.join("ids.txt")),
        "--distances",
        path(&data.join("distances.csv")),
        "--variant",
        "line-graph",
        "--out",
        path(&graph),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let dump = fs::read_to_string(graph.join("graph.txt")).unwrap();
    assert!(dump.contains("nodes 6"));
    assert!(dump.contains("variant line-graph"));
    assert!(fs::read_to_string(graph.join("config.toml")).unwrap().contains("edge_variant = \"line-graph\""));
}

#[test]
fn train_evaluate_forecast_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let run = dir.path().join("run");
    let out = stgraph(&["train", "--config", &cfg, "--mixing", "concat", "--out", path(&run)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let log = fs::read_to_string(run.join("train_log.csv")).unwrap();
    assert_eq!(log.lines().next(), Some("epoch,lr,train_mae,val_mae,epsilon,seconds"));
    assert_eq!(log.lines().count(), 3);
    let echo = fs::read_to_string(run.join("config.toml")).unwrap();
    assert!(echo.contains("mixing = \"concat\""));
    assert!(echo.contains("seed = 3"));

    let ck = run.join("checkpoint.bin");
    let eval = dir.path().join("eval");
    let out = stgraph(&["evaluate", "--config", &cfg, "--checkpoint", path(&ck), "--out", path(&eval)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report = fs::read_to_string(eval.join("report.csv")).unwrap();
    assert_eq!(report.lines().next(), Some("horizon,mae,rmse,mape"));
    assert_eq!(report.lines().count(), 13);
    assert!(fs::read_to_string(eval.join("report.txt")).unwrap().contains("mean"));

    let fc = dir.path().join("forecast");
    let out = stgraph(&["forecast", "--config", &cfg, "--checkpoint", path(&ck), "--out", path(&fc)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(fc.join("forecast.csv")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 13);
    assert_eq!(lines[1].split(',').count(), 7);
    assert!(lines[12].starts_with("+12,"));
}

#[test]
fn rerunning_from_the_echo_reproduces_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let first = dir.path().join("a");
    let second = dir.path().join("b");
    assert!(stgraph(&["train", "--config", &cfg, "--seed", "11", "--out", path(&first)]).status.success());
    let echo = first.join("config.toml");
    assert!(stgraph(&["train", "--config", path(&echo), "--out", path(&second)]).status.success());
    assert_eq!(
        fs::read(first.join("checkpoint.bin")).unwrap(),
        fs::read(second.join("checkpoint.bin")).unwrap()
    );
    let strip = |p: &Path| -> Vec<String> {
        fs::read_to_string(p)
            .unwrap()
            .lines()
            .map(|l| l.rsplit_once(',').map_or(l, |(head, _)| head).to_string())
            .collect()
    };
    assert_eq!(strip(&first.join("train_log.csv")), strip(&second.join("train_log.csv")));
}

#[test]
fn ablation_reports_every_variant() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let out_dir = dir.path().join("ablation");
    let out = stgraph(&["ablation", "--config", &cfg, "--epochs", "1", "--out", path(&out_dir)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let table = fs::read_to_string(out_dir.join("comparison.txt")).unwrap();
    for label in [
        "HA",
        "interaction-patterns/attention",
        "line-graph/attention",
        "identity/attention",
        "interaction-patterns/concat",
        "interaction-patterns/last-hop",
    ] {
        assert!(table.lines().any(|l| l.starts_with(label)), "{label} missing:\n{table}");
    }
    let csv = fs::read_to_string(out_dir.join("comparison.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 6 * 12);
}
