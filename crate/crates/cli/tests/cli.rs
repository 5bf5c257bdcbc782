use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

const BIN: &str = env!("CARGO_BIN_EXE_singular-hjb");

const SMALL_GRID: &str = "[grid]\ny_min = -1.0\ny_max = 1.0\nn_y = 5\ndt = 1e-3\n";

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

fn run(cmd: &str, config: &Path, extra: &[&str]) -> Output {
    run_env(cmd, config, extra, None)
}

fn run_env(cmd: &str, config: &Path, extra: &[&str], threads: Option<&str>) -> Output {
    let mut c = Command::new(BIN);
    c.arg(cmd).arg("--config").arg(config).args(extra);
    match threads {
        Some(n) => c.env("SINGULAR_HJB_THREADS", n),
        None => c.env_remove("SINGULAR_HJB_THREADS"),
    };
    c.output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn model(drift: f64, sigma_bar: f64, eta: &str, lambda: &str, pool: &str) -> String {
    format!(
        "[constants]\nhorizon = 1.0\n\n[coefficients]\n\
         drift = {{ family = \"constant\", value = {drift} }}\n\
         sigma_bar = {{ family = \"constant\", value = {sigma_bar} }}\n\
         eta = {eta}\nlambda = {lambda}\n{pool}"
    )
}

const ONE: &str = "{ family = \"constant\", value = 1.0 }";

fn benchmark(dir: &Path, extra: &str) -> PathBuf {
    write(dir, "run.toml", &format!("model = \"uhat_benchmark\"\n{SMALL_GRID}{extra}"))
}

#[test]
fn solve_benchmark_reports_converging_ladder() {
    let d = TempDir::new().unwrap();
    let cfg = benchmark(d.path(), "");
    let o = run("solve", &cfg, &[]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let report = fs::read_to_string(d.path().join("out/solve_report.txt")).unwrap();
    assert!(report.contains("deltas decreasing: true"), "{report}");
    assert!(report.contains("PASS"), "{report}");
    assert!(d.path().join("out/field.csv").exists());
    assert!(fs::read(d.path().join("out/field.bin")).unwrap().starts_with(b"SHJB1"));
}

#[test]
fn infinite_tolerance_gives_one_rung() {
    let d = TempDir::new().unwrap();
    let cfg = benchmark(d.path(), "[singular]\ntol = \"inf\"\n");
    let o = run("solve", &cfg, &[]);
    let report = fs::read_to_string(d.path().join("out/solve_report.txt")).unwrap();
    assert!(report.contains("rungs=1"), "{report}");
    // a single low rung sits far below the lower barrier
    assert_eq!(code(&o), 2);
}

#[test]
fn zero_impact_floor_is_a_fault_naming_a3() {
    let d = TempDir::new().unwrap();
    let eta = "{ family = \"tanh_affine\", base = 1.0, amplitude = 1.0, slope = 1.0 }";
    write(d.path(), "m.toml", &model(0.0, 1.0, eta, ONE, ""));
    let cfg = write(d.path(), "run.toml", &format!("model = \"m.toml\"\n{SMALL_GRID}"));
    let o = run("solve", &cfg, &[]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("(A3)"), "{}", stderr(&o));
}

#[test]
fn json_model_files_are_accepted() {
    let d = TempDir::new().unwrap();
    let json = r#"{"constants": {"horizon": 1.0},
        "coefficients": {"sigma_bar": {"family": "constant", "value": 1.0},
                         "eta": {"family": "constant", "value": 1.0},
                         "lambda": {"family": "constant", "value": 1.0}},
        "dark_pool": {"atoms": [{"id": 3, "mu": 1.0, "gamma": {"family": "constant", "value": "inf"}}]}}"#;
    write(d.path(), "m.json", json);
    let cfg = write(d.path(), "run.toml", &format!("model = \"m.json\"\n{SMALL_GRID}[verify]\nsuites = [\"oracle\"]\n"));
    let o = run("verify", &cfg, &[]);
    assert_eq!(code(&o), 0, "{}{}", stdout(&o), stderr(&o));
}

#[test]
fn invalid_configs_fail_before_running() {
    let d = TempDir::new().unwrap();
    for extra in ["[mc]\npaths = 1\n", "[singular]\ndelta = 1.5\n", "[mc]\nbogus = 1\n", "[grid]\nn_y = 2\n"] {
        let cfg = write(d.path(), "run.toml", &format!("model = \"uhat_benchmark\"\n{extra}"));
        let o = run("solve", &cfg, &[]);
        assert_eq!(code(&o), 1, "{extra}");
        assert!(!d.path().join("out").exists(), "{extra}");
    }
    let cfg = write(d.path(), "run.toml", "model = \"no_such_model\"\n");
    assert_eq!(code(&run("solve", &cfg, &[])), 1);
    assert_eq!(code(&run("bogus", &cfg, &[])), 1);
}

#[test]
fn simulate_benchmark_matches_closed_forms() {
    let d = TempDir::new().unwrap();
    let cfg = benchmark(d.path(), "[mc]\npaths = 10000\nseed = 7\n");
    let o = run("simulate", &cfg, &[]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let text = fs::read_to_string(d.path().join("out/mc_estimates.txt")).unwrap();
    let mean = |policy: &str| -> f64 {
        let line = text.lines().find(|l| l.starts_with(policy)).unwrap();
        line.split_whitespace().nth(1).unwrap().trim_start_matches("mean=").parse().unwrap()
    };
    assert!((mean("feedback") - 1.3130).abs() < 1e-3, "{text}");
    assert!((mean("twap") - 1.3333).abs() < 1e-3, "{text}");
    assert!(text.contains("gap twap-feedback="), "{text}");
}

#[test]
fn two_paths_report_a_standard_error() {
    let d = TempDir::new().unwrap();
    let cfg = write(d.path(), "run.toml", "model = \"envelope_lower\"\n[mc]\ndt = 0.01\n");
    let o = run("simulate", &cfg, &["--paths", "2", "--seed", "3"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let out = stdout(&o);
    assert!(out.contains("se=") && out.contains("n=2 seed=3"), "{out}");
}

#[test]
fn simulate_is_byte_identical_across_reruns_and_thread_caps() {
    let d = TempDir::new().unwrap();
    let cfg = write(d.path(), "run.toml", "model = \"envelope_lower\"\n[mc]\npaths = 500\ndt = 0.01\ntrajectories = 2\n");
    let mut outputs = Vec::new();
    for threads in [Some("1"), Some("3"), None] {
        let o = run_env("simulate", &cfg, &["--seed", "11"], threads);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
        let est = fs::read(d.path().join("out/mc_estimates.txt")).unwrap();
        let traj = fs::read(d.path().join("out/trajectories/feedback_00001.csv")).unwrap();
        outputs.push((est, traj));
    }
    assert!(outputs.windows(2).all(|w| w[0] == w[1]));
    assert!(d.path().join("out/trajectories/twap_00000.csv").exists());
    let bad = run_env("simulate", &cfg, &[], Some("zero"));
    assert_eq!(code(&bad), 1);
}

#[test]
fn missing_or_corrupt_field_is_a_fault() {
    let d = TempDir::new().unwrap();
    write(d.path(), "m.toml", &model(0.0, 1.0, ONE, ONE, ""));
    let cfg = write(d.path(), "run.toml", &format!("model = \"m.toml\"\n{SMALL_GRID}"));
    assert_eq!(code(&run("simulate", &cfg, &[])), 1);
    fs::create_dir_all(d.path().join("out")).unwrap();
    fs::write(d.path().join("out/field.bin"), b"not a field").unwrap();
    let o = run("simulate", &cfg, &[]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("magic"), "{}", stderr(&o));
}

#[test]
fn solve_then_simulate_uses_the_field() {
    let d = TempDir::new().unwrap();
    let lambda = "{ family = \"tanh_affine\", base = 1.0, amplitude = 0.3, slope = 1.0 }";
    let pool = "[[dark_pool.atoms]]\nid = 0\nmu = 1.0\ngamma = { family = \"constant\", value = 2.0 }\n";
    write(d.path(), "m.toml", &model(0.0, 1.0, ONE, lambda, pool));
    let cfg = write(
        d.path(),
        "run.toml",
        "model = \"m.toml\"\n[grid]\ny_min = -3.0\ny_max = 3.0\nn_y = 13\ndt = 2e-3\n[mc]\npaths = 200\ndt = 0.01\n",
    );
    let out = d.path().join("elsewhere");
    let o = run("solve", &cfg, &["--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}{}", stdout(&o), stderr(&o));
    let o = run("simulate", &cfg, &["--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let text = fs::read_to_string(out.join("mc_estimates.txt")).unwrap();
    assert_eq!(text.lines().count(), 3, "{text}");
    assert!(!d.path().join("out").exists());
}

#[test]
fn full_verify_on_benchmark_passes() {
    let d = TempDir::new().unwrap();
    let cfg = benchmark(d.path(), "[verify]\npaths = 100\n");
    let o = run("verify", &cfg, &[]);
    assert_eq!(code(&o), 0, "{}{}", stdout(&o), stderr(&o));
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(d.path().join("out/verify_summary.json")).unwrap()).unwrap();
    let rows = summary.as_array().unwrap();
    assert_eq!(rows.len(), 7);
    for r in rows {
        assert_eq!(r["status"], "pass", "{r}");
        assert!(r["worst_margin"].as_f64().unwrap() >= 0.0, "{r}");
    }
}

#[test]
fn central_drift_hook_fails_comparison() {
    let d = TempDir::new().unwrap();
    let zero = "{ family = \"constant\", value = 0.0 }";
    let steep = "{ family = \"tanh_affine\", base = 0.5, amplitude = 0.5, slope = 20.0 }";
    write(d.path(), "low.toml", &model(-1.0, 0.1, ONE, zero, ""));
    write(d.path(), "high.toml", &model(-1.0, 0.1, ONE, steep, ""));
    let body = |drift: &str| {
        format!(
            "model = \"low.toml\"\n[grid]\ny_min = -2.0\ny_max = 2.0\nn_y = 21\ndt = 0.01\n\
             [verify]\nsuites = [\"comparison\"]\ncompare_with = \"high.toml\"\ndrift = \"{drift}\"\n"
        )
    };
    let cfg = write(d.path(), "run.toml", &body("central"));
    let o = run("verify", &cfg, &[]);
    assert_eq!(code(&o), 2, "{}", stdout(&o));
    let summary = fs::read_to_string(d.path().join("out/verify_summary.json")).unwrap();
    assert!(summary.contains("\"fail\""), "{summary}");
    let cfg = write(d.path(), "run.toml", &body("upwind"));
    assert_eq!(code(&run("verify", &cfg, &[])), 0);
}

#[test]
fn empty_suite_selection_is_a_pass() {
    let d = TempDir::new().unwrap();
    let cfg = write(d.path(), "run.toml", "model = \"uhat_benchmark\"\n[verify]\nsuites = []\n");
    let o = run("verify", &cfg, &[]);
    assert_eq!(code(&o), 0);
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(d.path().join("out/verify_summary.json")).unwrap()).unwrap();
    assert_eq!(summary, serde_json::json!([]));
}

fn observed_order(out: &str) -> Vec<f64> {
    out.lines()
        .filter_map(|l| l.trim().strip_prefix("observed order "))
        .map(|s| s.parse().unwrap())
        .collect()
}

#[test]
fn convergence_orders() {
    let d = TempDir::new().unwrap();
    let pool = "[[dark_pool.atoms]]\nid = 0\nmu = 1.0\ngamma = { family = \"constant\", value = 1.0 }\n";
    write(d.path(), "pool.toml", &model(0.0, 1.0, ONE, ONE, pool));
    let cfg = write(
        d.path(),
        "run.toml",
        &format!("model = \"pool.toml\"\n{SMALL_GRID}[convergence]\nspatial = false\ndts = [0.02, 0.01, 0.005, 0.0025]\n"),
    );
    let o = run("convergence", &cfg, &[]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let p = observed_order(&stdout(&o));
    assert!((p[0] - 1.0).abs() <= 0.2, "{}", stdout(&o));
    let csv = fs::read_to_string(d.path().join("out/convergence_temporal.csv")).unwrap();
    assert!(csv.starts_with("dt,dy,N,error_vs_oracle\n"));
    assert_eq!(csv.lines().count(), 5);

    let tanh = "{ family = \"tanh_affine\", base = 1.0, amplitude = 0.5, slope = 1.0 }";
    write(d.path(), "tanh.toml", &model(0.0, 1.0, ONE, tanh, ""));
    let cfg = write(
        d.path(),
        "run.toml",
        "model = \"tanh.toml\"\n[grid]\ny_min = -4.0\ny_max = 4.0\nn_y = 11\ndt = 0.01\n\
         [convergence]\ndts = []\nrefinements = 3\n",
    );
    let o = run("convergence", &cfg, &[]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let p = observed_order(&stdout(&o));
    assert!((p[0] - 2.0).abs() <= 0.3, "{}", stdout(&o));
}

#[test]
fn one_row_ladder_prints_no_order() {
    let d = TempDir::new().unwrap();
    let cfg = benchmark(d.path(), "[convergence]\ndts = [0.01]\nspatial = false\n");
    let o = run("convergence", &cfg, &[]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(observed_order(&stdout(&o)).is_empty(), "{}", stdout(&o));
    let csv = fs::read_to_string(d.path().join("out/convergence_temporal.csv")).unwrap();
    assert_eq!(csv.lines().count(), 2);
}
