use std::path::Path;
use std::process::{Command, Output};

use tdlab_cli::report::{emit_report, Comparison};
use tdlab_cli::{run_experiment, CliError, ExperimentConfig, ExperimentKind, Report};

fn lab(args: &[&str], threads: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_lab"));
    cmd.args(args);
    match threads {
        Some(t) => cmd.env("LAB_THREADS", t),
        None => cmd.env_remove("LAB_THREADS"),
    };
    cmd.output().expect("lab runs")
}

fn read_dir_sorted(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), std::fs::read(e.path()).unwrap())
        })
        // timings vary by run and config.txt records the output directory
        .filter(|(name, _)| name != "timings.json" && name != "config.txt")
        .collect();
    files.sort();
    files
}

#[test]
fn unknown_kind_is_a_usage_error() {
    let out = lab(&["renewal-bogus"], None);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("unknown experiment kind"), "{err}");
}

#[test]
fn violated_precondition_is_named() {
    let out = lab(&["renewal-srt", "--p", "4", "--xi", "2"], None);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("coprime"));
    let out = lab(&["dist", "--gamma", "abc"], None);
    assert_eq!(out.status.code(), Some(2));
    let out = lab(&["dist"], Some("zero"));
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn fixtures_command_writes_both_horizons() {
    let dir = tempfile::tempdir().unwrap();
    let out = lab(&["fixtures", "--out", dir.path().to_str().unwrap()], None);
    assert!(out.status.success());
    let n2 = std::fs::read_to_string(dir.path().join("bridge_n2.csv")).unwrap();
    assert!(n2.starts_with("local_time,probability\n"));
    assert!(dir.path().join("bridge_n4.csv").exists());
}

#[test]
fn outputs_are_byte_identical_across_runs_and_worker_counts() {
    let dir = tempfile::tempdir().unwrap();
    let mut runs = Vec::new();
    for (i, threads) in ["1", "2", "2"].into_iter().enumerate() {
        let out_dir = dir.path().join(format!("run{i}"));
        let out = lab(
            &["dist", "--gamma", "0.7", "--trials", "50000", "--seed", "9", "--out", out_dir.to_str().unwrap()],
            Some(threads),
        );
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        runs.push(read_dir_sorted(&out_dir));
    }
    assert!(runs[0].iter().any(|(n, _)| n == "report.json"));
    assert!(runs[0].iter().any(|(n, _)| n == "meta.json"));
    assert_eq!(runs[0], runs[1]);
    assert_eq!(runs[1], runs[2]);
}

#[test]
fn config_file_round_trips_through_the_binary() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("out");
    let mut cfg = ExperimentConfig::new(ExperimentKind::Equidist);
    cfg.n = Some(20_000);
    cfg.p = Some(3);
    cfg.xi = Some(2);
    cfg.out = Some(out_dir.clone());
    let path = dir.path().join("cfg.txt");
    std::fs::write(&path, cfg.to_document()).unwrap();
    let out = lab(&["--config", path.to_str().unwrap()], None);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let written = std::fs::read_to_string(out_dir.join("config.txt")).unwrap();
    assert_eq!(ExperimentConfig::parse(&written).unwrap(), cfg);
    assert_eq!(written, cfg.to_document());
}

#[test]
fn stochastic_verdicts_carry_their_seed() {
    let mut cfg = ExperimentConfig::new(ExperimentKind::Dist);
    cfg.trials = Some(20_000);
    cfg.seed = Some(42);
    let outcome = run_experiment(&cfg).unwrap();
    let moments: Vec<_> = outcome.verdicts.iter().filter(|v| v.metric.starts_with("ml-moment")).collect();
    assert_eq!(moments.len(), 3);
    assert!(moments.iter().all(|v| v.seed == Some(42)));
    let json: serde_json::Value = serde_json::from_str(&tdlab_cli::report::render_report(&outcome.report())).unwrap();
    for v in json["dist"].as_array().unwrap() {
        if v["metric"].as_str().unwrap().starts_with("ml-moment") {
            assert_eq!(v["seed"], 42);
        }
    }
}

#[test]
fn verdict_flags_follow_the_stated_rule() {
    let mut cfg = ExperimentConfig::new(ExperimentKind::Equidist);
    cfg.n = Some(10_000);
    let outcome = run_experiment(&cfg).unwrap();
    for v in &outcome.verdicts {
        let expected = match v.comparison {
            Comparison::Within => (v.observed - v.target).abs() <= v.tolerance,
            Comparison::AtMost => v.observed <= v.target,
            Comparison::AtLeast => v.observed >= v.target,
        };
        assert_eq!(v.pass, expected, "{v}");
    }
}

#[test]
fn empty_report_is_a_valid_document() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("report.json");
    emit_report(&Report::new(), &path).unwrap();
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert!(v.as_object().unwrap().is_empty());
}

#[test]
fn report_io_errors_surface() {
    let dir = tempfile::tempdir().unwrap();
    let err = emit_report(&Report::new(), &dir.path().join("missing/report.json")).unwrap_err();
    assert_eq!(err.kind(), std::io::ErrorKind::NotFound);
}

#[test]
fn renewal_srt_ratio_verdict() {
    let mut cfg = ExperimentConfig::new(ExperimentKind::RenewalSrt);
    cfg.gamma = Some(0.7);
    cfg.n = Some(10_000);
    let outcome = run_experiment(&cfg).unwrap();
    let v = outcome.verdicts.iter().find(|v| v.metric == "srt-ratio").unwrap();
    assert!((0.9..=1.1).contains(&v.observed), "{v}");
    assert!(outcome.pass());
}

#[test]
fn invalid_config_is_rejected_before_dispatch() {
    let mut cfg = ExperimentConfig::new(ExperimentKind::WalkBridge);
    cfg.n = Some(5000);
    assert!(matches!(run_experiment(&cfg), Err(CliError::Usage(m)) if m.contains("at most")));
}
