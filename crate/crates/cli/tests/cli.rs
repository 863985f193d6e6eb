use std::path::Path;
use std::process::{Command, Output};

use hybrid_kf::FilterKind;
use hybrid_kf_cli::report::strip_timing_columns;
use hybrid_kf_cli::{
    run_experiment, run_trace, Benchmark, ExperimentConfig, ExperimentReport, FilterId,
};

fn bench(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bench"))
        .args(args)
        .output()
        .unwrap()
}

fn golden(name: &str) -> std::path::PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/golden")
        .join(name)
}

fn small_a() -> ExperimentConfig {
    let mut cfg = ExperimentConfig::defaults(Benchmark::A);
    cfg.mc_runs = 6;
    cfg.particles = 40;
    cfg.timing_runs = 2;
    cfg
}

#[test]
fn noise_free_series_is_tracked() {
    let mut cfg = small_a();
    cfg.mc_runs = 10;
    cfg.ts_noise_free = true;
    cfg.filters = FilterKind::ALL
        .iter()
        .map(|&k| FilterId::Kalman(k))
        .collect();
    let report = run_experiment(&cfg).unwrap();
    for r in &report.results {
        assert_eq!(r.failed_runs, 0, "{}", r.filter);
        let mse = r.mse_mean.unwrap();
        assert!(mse <= 1e-6, "{}: MSE {mse:e}", r.filter);
    }
}

#[test]
fn same_seed_gives_identical_report_bodies() {
    let cfg = small_a();
    let a = run_experiment(&cfg).unwrap();
    let b = run_experiment(&cfg).unwrap();
    assert_eq!(
        strip_timing_columns(&a.to_csv()),
        strip_timing_columns(&b.to_csv())
    );
    assert_eq!(a.metadata, b.metadata);
    let mut other = cfg.clone();
    other.seed += 1;
    let c = run_experiment(&other).unwrap();
    assert_ne!(a.metadata.sequence_digest, c.metadata.sequence_digest);
}

#[test]
fn results_do_not_depend_on_the_filter_selection() {
    let mut cfg = small_a();
    let full = run_experiment(&cfg).unwrap();
    cfg.filters = vec![FilterId::ALL[7]];
    let single = run_experiment(&cfg).unwrap();
    let pick = |r: &ExperimentReport| {
        r.results
            .iter()
            .find(|x| x.filter == FilterId::ALL[7])
            .unwrap()
            .mse_mean
    };
    assert_eq!(pick(&full), pick(&single));
}

#[test]
fn csv_has_one_row_per_filter() {
    let out = bench(&[
        "run",
        "--benchmark",
        "a",
        "--runs",
        "3",
        "--filters",
        "EKF,UKF,NewKF",
        "--format",
        "csv",
    ]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let body = String::from_utf8(out.stdout).unwrap();
    assert_eq!(body.lines().count(), 1 + 3);
}

#[test]
fn json_output_round_trips() {
    let out = bench(&[
        "run",
        "--benchmark",
        "a",
        "--runs",
        "2",
        "--filters",
        "EKF,PF",
        "--format",
        "json",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let report = ExperimentReport::from_json(&text).unwrap();
    assert_eq!(report.results.len(), 2);
    assert_eq!(report.to_json(), text);
    assert_eq!(report.metadata.version, "v0.1.0");
    assert!(report
        .metadata
        .notes
        .iter()
        .any(|n| n.contains("INCONSISTENT")));
}

#[test]
fn markdown_matches_golden_file() {
    let cfg_path = golden("pinned_a.toml");
    let out = bench(&[
        "run",
        "--config",
        cfg_path.to_str().unwrap(),
        "--format",
        "md",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let expected = std::fs::read_to_string(golden("pinned_a.md")).unwrap();
    assert_eq!(String::from_utf8(out.stdout).unwrap(), expected);
}

#[test]
fn report_written_to_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("r.md");
    let out = bench(&[
        "run",
        "--runs",
        "2",
        "--filters",
        "EKF",
        "--format",
        "md",
        "--out",
        path.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty());
    assert!(std::fs::read_to_string(&path)
        .unwrap()
        .starts_with("| Filter"));
}

#[test]
fn unwritable_output_path_fails() {
    let out = bench(&[
        "run",
        "--runs",
        "1",
        "--filters",
        "EKF",
        "--out",
        "/nonexistent-dir/x.csv",
    ]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn config_errors_exit_with_2() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    std::fs::write(&path, "mc_runs = 0\n").unwrap();
    assert_eq!(
        bench(&["run", "--config", path.to_str().unwrap()])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        bench(&["run", "--filters", "EKF,XKF"]).status.code(),
        Some(2)
    );
    std::fs::write(&path, "benchmark = \"b\"\n").unwrap();
    assert_eq!(
        bench(&[
            "run",
            "--benchmark",
            "a",
            "--config",
            path.to_str().unwrap()
        ])
        .status
        .code(),
        Some(2)
    );
}

#[test]
fn plant_leaving_domain_is_a_scenario_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("crash.toml");
    std::fs::write(
        &path,
        "benchmark = \"b\"\nmc_runs = 2\nctrl_kp = 0.0\nctrl_kd = 0.0\nctrl_current_gain = 0.0\nml_gap0 = 0.0101\n",
    )
    .unwrap();
    let out = bench(&["run", "--config", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
    assert!(
        out.stdout.is_empty(),
        "no filter output before the scenario check"
    );
}

#[test]
fn failure_threshold_exits_with_4_after_writing_report() {
    let out = bench(&[
        "run",
        "--runs",
        "30",
        "--seed",
        "2024",
        "--filters",
        "PF-EKF",
        "--format",
        "csv",
    ]);
    let body = String::from_utf8(out.stdout).unwrap();
    let failed: usize = body
        .lines()
        .nth(1)
        .unwrap()
        .split(',')
        .nth(2)
        .unwrap()
        .parse()
        .unwrap();
    assert!(failed > 0);
    assert_eq!(out.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&out.stderr).contains("PF-EKF"));
}

#[test]
fn sweep_rows() {
    let out = bench(&["sweep", "--n", "1", "--m", "1", "--j", "5"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(
        text.lines().next().unwrap(),
        "n,m,j,ukf_flops,newkf_flops,reduction"
    );
    assert_eq!(text.lines().nth(1).unwrap(), "1,1,5,117,40,0.658120");

    let out = bench(&["sweep", "--n", "1..=10,50", "--m", "half", "--j", "10n"]);
    assert_eq!(
        String::from_utf8(out.stdout).unwrap().lines().count(),
        1 + 11
    );
}

#[test]
fn large_sweep_point_reaches_quoted_reduction() {
    let out = bench(&["sweep", "--n", "100", "--m", "50", "--j", "1000"]);
    let text = String::from_utf8(out.stdout).unwrap();
    let reduction: f64 = text
        .lines()
        .nth(1)
        .unwrap()
        .rsplit(',')
        .next()
        .unwrap()
        .parse()
        .unwrap();
    assert!(reduction >= 0.70, "reduction {reduction}");
}

#[test]
fn empty_sweep_range_is_a_usage_error() {
    let out = bench(&["sweep", "--n", "5..3", "--m", "1", "--j", "5"]);
    assert_ne!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty());
}

#[test]
fn defaults_are_printable_and_loadable() {
    for b in ["a", "b"] {
        let out = bench(&["config", "--defaults", "--benchmark", b]);
        assert_eq!(out.status.code(), Some(0));
        let text = String::from_utf8(out.stdout).unwrap();
        assert!(text.contains("# master seed"));
        let cfg = ExperimentConfig::from_toml_str(&text).unwrap();
        let bm = if b == "a" { Benchmark::A } else { Benchmark::B };
        assert_eq!(cfg, ExperimentConfig::defaults(bm));
    }
}

#[test]
fn shipped_scenario_is_the_benchmark_b_default() {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios/maglev_default.toml");
    assert_eq!(
        ExperimentConfig::load(&path).unwrap(),
        ExperimentConfig::defaults(Benchmark::B)
    );
}

#[test]
fn trace_has_a_row_per_step_and_filter() {
    let mut cfg = small_a();
    cfg.filters = vec![
        FilterId::Kalman(FilterKind::Ekf),
        FilterId::Kalman(FilterKind::NewKf),
    ];
    let csv = run_trace(&cfg, 2).unwrap();
    assert_eq!(csv.lines().count(), 1 + 2 * cfg.horizon);
    assert!(csv.starts_with("filter,t,component,truth,estimate,error,variance"));

    let out = bench(&[
        "trace",
        "--benchmark",
        "b",
        "--run-index",
        "0",
        "--filters",
        "EKF",
    ]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(
        String::from_utf8(out.stdout).unwrap().lines().count(),
        1 + 2 * 3000
    );
}
