mod common;

use std::path::Path;
use std::process::{Command, Output};

use common::fast_config;
use pricewise_cli::RUN_DIR_ENV;

fn pricewise(args: &[&str]) -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_pricewise"));
    cmd.args(args).env("RUST_LOG", "warn").env_remove(RUN_DIR_ENV);
    cmd
}

fn run(cmd: &mut Command) -> Output {
    cmd.output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn write_fast_config(path: &Path, data: &Path) {
    fast_config(data, Path::new("ignored")).save(path).unwrap();
}

#[test]
fn simulate_pipeline_report_and_abtest() {
    let tmp = tempfile::tempdir().unwrap();
    let market = tmp.path().join("market");
    let out = run(&mut pricewise(&[
        "simulate",
        "--out",
        market.to_str().unwrap(),
        "--products",
        "60",
        "--market-seed",
        "4",
    ]));
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).contains("wrote 60 products"));

    let config = tmp.path().join("fast.toml");
    write_fast_config(&config, &market);
    let run_dir = tmp.path().join("run");
    // the run directory comes from the environment, the delta from a flag
    let mut pipeline = pricewise(&[
        "pipeline",
        "--config",
        config.to_str().unwrap(),
        "--delta-pct",
        "3",
    ]);
    let out = run(pipeline.env(RUN_DIR_ENV, &run_dir));
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).contains("Chosen prices"));
    let saved = std::fs::read_to_string(run_dir.join("config.toml")).unwrap();
    assert!(saved.contains("delta_pct = 3"), "{saved}");
    assert!(saved.contains(&format!("run_dir = \"{}\"", run_dir.display())));

    let out = run(&mut pricewise(&[
        "report",
        "--run-dir",
        run_dir.to_str().unwrap(),
    ]));
    assert_eq!(code(&out), 0);
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("Products"));

    let out = run(&mut pricewise(&[
        "abtest",
        "--market",
        market.to_str().unwrap(),
        "--run-dir",
        run_dir.to_str().unwrap(),
        "--days",
        "2",
    ]));
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(report["revenue_uplift_pct"].is_number());
    assert!(run_dir.join("ab_report.json").is_file());
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().to_str().unwrap();

    let invalid = run(&mut pricewise(&[
        "pipeline",
        "--data-dir",
        dir,
        "--run-dir",
        dir,
        "--delta-pct",
        "0",
    ]));
    assert_eq!(code(&invalid), 2);
    assert!(String::from_utf8_lossy(&invalid.stderr).starts_with("error: "));

    let missing = run(&mut pricewise(&[
        "ingest",
        "--data-dir",
        &format!("{dir}/absent"),
        "--run-dir",
        dir,
    ]));
    assert_eq!(code(&missing), 4);
    assert!(String::from_utf8_lossy(&missing.stderr).contains("stage ingest failed"));

    let no_run = run(&mut pricewise(&["report", "--run-dir", &format!("{dir}/absent")]));
    assert_eq!(code(&no_run), 4);

    let bad_config = tmp.path().join("bad.toml");
    std::fs::write(&bad_config, "no_such_key = 1\n").unwrap();
    let out = run(&mut pricewise(&[
        "ingest",
        "--config",
        bad_config.to_str().unwrap(),
    ]));
    assert_eq!(code(&out), 2);
}
