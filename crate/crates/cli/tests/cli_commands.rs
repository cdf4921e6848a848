use std::path::{Path, PathBuf};
use std::process::Command;

use lure_contract::library::{self, reference};
use lure_contract::lmi::{self, VAR_K_PSI, VAR_W, VAR_Z};
use lure_contract::model::{close_loop, Gains, NonlinearityClass};
use lure_contract::verify::{self, Certificate, TrialScheme};
use lure_contract::{Matrix, SymMatrix};
use lure_contract_cli::demo::DemoData;
use serde_json::Value;

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

struct Run {
    code: i32,
    report: Option<Value>,
    stderr: String,
}

fn run_with(args: &[&str], env: &[(&str, &str)]) -> Run {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_lure-contract"));
    cmd.args(args).env_remove("LURE_CONTRACT_SEED");
    for (k, v) in env {
        cmd.env(k, v);
    }
    let out = cmd.output().expect("binary runs");
    let stdout = String::from_utf8(out.stdout).unwrap();
    Run {
        code: out.status.code().expect("exit code"),
        report: serde_json::from_str(&stdout).ok(),
        stderr: String::from_utf8(out.stderr).unwrap(),
    }
}

fn run(args: &[&str]) -> Run {
    run_with(args, &[])
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn matrix(v: &Value) -> Matrix {
    let rows: Vec<Vec<f64>> = serde_json::from_value(v.clone()).unwrap();
    Matrix::from_rows(&rows).unwrap()
}

fn with_changes(name: &str, dir: &Path, edit: impl FnOnce(&mut Value)) -> PathBuf {
    let mut v: Value = serde_json::from_slice(&std::fs::read(fixture(name)).unwrap()).unwrap();
    edit(&mut v);
    let path = dir.join(name);
    std::fs::write(&path, serde_json::to_vec_pretty(&v).unwrap()).unwrap();
    path
}

#[test]
fn analyze_reference_finds_a_positive_certificate() {
    let f = fixture("reference.json");
    let r = run(&["analyze", path_str(&f)]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let rep = r.report.unwrap();
    assert_eq!(rep["status"], "feasible");
    assert_eq!(rep["details"]["theorem"], "dt-lip-analysis");
    let p = SymMatrix::from_matrix(&matrix(&rep["details"]["P"])).unwrap();
    assert!(p.lambda_min().unwrap() > 0.0);
    let digest = lure_contract_cli::problem::digest(&std::fs::read(&f).unwrap());
    assert_eq!(rep["input_digest"], digest.as_str());
}

#[test]
fn analysis_feasibility_persists_as_eta_grows() {
    let dir = tempfile::tempdir().unwrap();
    for eta in [0.9, 0.95, 0.99] {
        let f = with_changes("reference.json", dir.path(), |v| v["eta"] = eta.into());
        assert_eq!(run(&["analyze", path_str(&f), "--quiet"]).code, 0, "eta {eta}");
    }
}

#[test]
fn analysis_without_gains_is_a_usage_error() {
    let r = run(&["analyze", path_str(&fixture("reference_no_gains.json"))]);
    assert_eq!(r.code, 1);
    assert!(r.stderr.contains("gains"));
}

#[test]
fn explicit_theorem_must_match_the_command() {
    let f = fixture("reference.json");
    assert_eq!(run(&["analyze", path_str(&f), "--theorem", "dt-lip-synthesis", "--quiet"]).code, 1);
    assert_eq!(run(&["analyze", path_str(&f), "--theorem", "not-a-theorem", "--quiet"]).code, 1);
    assert_eq!(run(&["analyze", path_str(&f), "--theorem", "ct-lip-analysis", "--quiet"]).code, 1);
    assert_eq!(run(&["analyze", path_str(&f), "--theorem", "dt-lip-analysis", "--quiet"]).code, 0);
}

#[test]
fn synthesized_gains_are_certified_and_contract_in_simulation() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("synth.json");
    let r = run(&["synthesize", path_str(&fixture("reference_no_gains.json")), "--out", path_str(&out), "--quiet"]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let rep: Value = serde_json::from_slice(&std::fs::read(&out).unwrap()).unwrap();
    assert_eq!(rep["details"]["reaudit"]["passed"], true);
    let gains = Gains::new(matrix(&rep["details"]["gains"]["K"]), matrix(&rep["details"]["gains"]["K_psi"]));
    let p = SymMatrix::from_matrix(&matrix(&rep["details"]["P"])).unwrap();

    let trials = TrialScheme { pairs: vec![reference::initial_pair()], random_pairs: 16, ..TrialScheme::default() };
    let cert = Certificate { p, eta: reference::ETA };
    let class = NonlinearityClass::Lipschitz(reference::lipschitz());
    let report = verify::certify_empirically(
        &reference::system(),
        &gains,
        &class,
        &reference::nonlinearities(),
        &cert,
        &trials,
    )
    .unwrap();
    assert!(report.passed, "worst ratio {}", report.worst_ratio);

    // feeding the emitted gains back to analyze
    let again = with_changes("reference_no_gains.json", dir.path(), |v| v["gains"] = rep["details"]["gains"].clone());
    assert_eq!(run(&["analyze", path_str(&again), "--quiet"]).code, 0);
}

#[test]
fn sector_lyapunov_case_admits_zero_feedback() {
    let f = fixture("lyapunov_sector.json");
    let r = run(&["synthesize", path_str(&f), "--quiet"]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    // W = I, Z = 0, K_psi = 0 already satisfies the inequality
    let loaded = lure_contract_cli::problem::load(&f).unwrap();
    let NonlinearityClass::SectorBounded(s) = &loaded.class else { panic!("sector fixture") };
    let pencil = lmi::build_ct_sector_synthesis(&loaded.system, s, loaded.file.eta).unwrap();
    let m = pencil
        .evaluate_at(&[(VAR_W, &Matrix::identity(2)), (VAR_Z, &Matrix::zeros(1, 2)), (VAR_K_PSI, &Matrix::zeros(1, 1))])
        .unwrap();
    assert!(m.lambda_max().unwrap() < 0.0);
}

#[test]
fn monotone_continuous_synthesis_is_certified() {
    let r = run(&["synthesize", path_str(&fixture("monotone_ct.json"))]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let rep = r.report.unwrap();
    assert_eq!(rep["details"]["theorem"], "ct-sec-synthesis");
    assert_eq!(rep["details"]["reaudit"]["theorem"], "ct-sec-analysis");
}

#[test]
fn schema_and_precondition_failures_exit_one() {
    for (name, needle) in [
        ("eta_out_of_range.json", "eta"),
        ("bad_variant.json", "nonlinearity.variant"),
        ("ragged_matrix.json", "system.A"),
        ("unknown_psi.json", "paper9"),
    ] {
        let r = run(&["synthesize", path_str(&fixture(name))]);
        assert_eq!(r.code, 1, "{name}");
        assert!(r.stderr.contains(needle), "{name}: {}", r.stderr);
    }
    let dir = tempfile::tempdir().unwrap();
    let extra = with_changes("reference.json", dir.path(), |v| v["surprise"] = 1.into());
    assert_eq!(run(&["analyze", path_str(&extra)]).code, 1);
    let version = with_changes("reference.json", dir.path(), |v| v["schema_version"] = 2.into());
    assert_eq!(run(&["analyze", path_str(&version)]).code, 1);
    assert_eq!(run(&["analyze", "/nonexistent/problem.json"]).code, 1);
}

#[test]
fn usage_errors_exit_one_and_help_exits_zero() {
    assert_eq!(run(&["frobnicate"]).code, 1);
    assert_eq!(run(&["analyze"]).code, 1);
    assert_eq!(run(&["simulate", path_str(&fixture("reference.json")), "--steps", "many"]).code, 1);
    assert_eq!(run(&["--help"]).code, 0);
    assert_eq!(run(&["--version"]).code, 0);
}

#[test]
fn simulation_reproduces_reference_rates_and_round_trips_csv() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("csv");
    let svg = dir.path().join("x1.svg");
    let r = run(&[
        "simulate",
        path_str(&fixture("reference.json")),
        "--csv",
        path_str(&csv),
        "--plot",
        path_str(&svg),
    ]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let rep = r.report.unwrap();
    assert_eq!(rep["status"], "within-certificate");
    let worst_sq = rep["details"]["worst_squared_ratio"].as_f64().unwrap();
    assert!((worst_sq - reference::OBSERVED_RATE).abs() <= 5e-3, "{worst_sq}");
    assert!(rep["details"]["worst_ratio"].as_f64().unwrap() <= reference::ETA);
    assert!(std::fs::read_to_string(&svg).unwrap().contains("<polyline"));

    let cl = close_loop(&reference::system(), &reference::gains()).unwrap();
    let (x1, _) = reference::initial_pair();
    for psi in reference::nonlinearities() {
        let file = std::fs::File::open(csv.join(format!("{}_pair0_a.csv", psi.name()))).unwrap();
        let table = verify::read_csv(file).unwrap();
        let direct = verify::simulate_dt(&cl, &psi, &x1, reference::STEPS).unwrap();
        assert_eq!(table.states, direct.states);
        assert_eq!(table.times, direct.times);
    }
    let rates = std::fs::read_to_string(csv.join("rates.csv")).unwrap();
    assert_eq!(rates.lines().count(), 4);
}

#[test]
fn simulation_rejects_zero_steps_and_reports_open_loop_use() {
    let r = run(&["simulate", path_str(&fixture("reference.json")), "--steps", "0"]);
    assert_eq!(r.code, 1);
    let dir = tempfile::tempdir().unwrap();
    let f = with_changes("reference_no_gains.json", dir.path(), |v| v["builtin_psi"] = serde_json::json!(["zero"]));
    let r = run(&["simulate", path_str(&f), "--steps", "5"]);
    // the open loop is unstable, so the P-distance grows past η
    assert_eq!(r.code, 2, "{}", r.stderr);
    assert!(r.stderr.contains("open loop"));
}

#[test]
fn simulation_takes_pairs_from_a_file() {
    let dir = tempfile::tempdir().unwrap();
    let pairs = dir.path().join("pairs.json");
    std::fs::write(&pairs, "[[[2, 0, 0], [0, 0, 0]], [[0, 1, 0], [0, -1, 0]]]").unwrap();
    let r = run(&["simulate", path_str(&fixture("reference.json")), "--pairs", path_str(&pairs)]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    assert_eq!(r.report.unwrap()["details"]["rates"].as_array().unwrap().len(), 6);
    std::fs::write(&pairs, "[[[2, 0], [0, 0, 0]]]").unwrap();
    assert_eq!(run(&["simulate", path_str(&fixture("reference.json")), "--pairs", path_str(&pairs)]).code, 1);
}

#[test]
fn continuous_simulation_reports_rates() {
    let r = run(&["simulate", path_str(&fixture("monotone_ct.json")), "--t-end", "0.5", "--dt", "0.01"]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let rep = r.report.unwrap();
    let rates = rep["details"]["rates"].as_array().unwrap();
    assert_eq!(rates.len(), 2);
    assert!(rates.iter().all(|r| r["min_rate"].is_number()));
}

#[test]
fn check_verdicts_follow_the_class() {
    let reference = fixture("reference.json");
    let r = run(&["check", path_str(&reference), "--psi", "paper3", "--samples", "2000"]);
    assert_eq!(r.code, 0, "{}", r.stderr);

    let r = run(&["check", path_str(&fixture("double_vs_unit.json"))]);
    assert_eq!(r.code, 2);
    let rep = r.report.unwrap();
    let witness = &rep["details"]["checks"][0]["witness"];
    assert_eq!(witness["kind"], "pair");
    let (y1, y2) = (witness["y1"][0].as_f64().unwrap(), witness["y2"][0].as_f64().unwrap());
    let psi = library::double(1);
    let dpsi = psi.eval(&[y1]).unwrap()[0] - psi.eval(&[y2]).unwrap()[0];
    assert!(dpsi * dpsi > (y1 - y2) * (y1 - y2));

    let table = format!("table:{}", path_str(&fixture("tanh_table.csv")));
    assert_eq!(run(&["check", path_str(&fixture("double_vs_unit.json")), "--psi", &table]).code, 0);
    assert_eq!(run(&["check", path_str(&fixture("double_vs_unit.json")), "--psi", "table:/missing.csv"]).code, 1);
    assert_eq!(run(&["check", path_str(&fixture("bad_variant.json"))]).code, 1);
}

#[test]
fn seed_flag_overrides_environment() {
    let f = fixture("double_vs_unit.json");
    let seed_of = |r: Run| r.report.unwrap()["details"]["seed"].as_u64().unwrap();
    assert_eq!(seed_of(run_with(&["check", path_str(&f), "--samples", "100"], &[("LURE_CONTRACT_SEED", "5")])), 5);
    assert_eq!(
        seed_of(run_with(&["check", path_str(&f), "--samples", "100", "--seed", "7"], &[("LURE_CONTRACT_SEED", "5")])),
        7
    );
    assert_eq!(seed_of(run(&["check", path_str(&f), "--samples", "100"])), 0);
}

#[test]
fn commands_are_deterministic() {
    for args in [
        vec!["analyze", "reference.json"],
        vec!["synthesize", "monotone_ct.json"],
        vec!["check", "reference.json", "--samples", "500", "--seed", "3"],
        vec!["simulate", "monotone_ct.json", "--t-end", "0.2", "--dt", "0.01"],
    ] {
        let f = fixture(args[1]);
        let mut full: Vec<&str> = args.clone();
        full[1] = path_str(&f);
        let (a, b) = (run(&full).report.unwrap(), run(&full).report.unwrap());
        assert_eq!(a["details"], b["details"], "{args:?}");
        assert_eq!(a["input_digest"], b["input_digest"]);
    }
}

#[test]
fn demo_reproduces_and_writes_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("demo");
    let r = run(&["demo-paper", "--out", path_str(&out), "--quiet"]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    for f in ["report.json", "rates.csv", "trajectories_x1.svg", "paper1_a.csv", "paper3_b.csv"] {
        assert!(out.join(f).exists(), "{f}");
    }
    let rep: Value = serde_json::from_slice(&std::fs::read(out.join("report.json")).unwrap()).unwrap();
    assert!(rep["details"]["checks"].as_array().unwrap().iter().all(|c| c["passed"] == true));
}

#[test]
fn demo_into_an_unwritable_location_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    std::fs::write(&blocker, "").unwrap();
    assert_eq!(run(&["demo-paper", "--out", path_str(&blocker.join("sub")), "--quiet"]).code, 1);
}

#[test]
fn tampered_demo_data_is_caught() {
    let dir = tempfile::tempdir().unwrap();
    let tampers: Vec<Box<dyn Fn(&mut DemoData)>> = vec![
        Box::new(|d| d.z[0][2] = 0.31),
        Box::new(|d| d.w[1][1] = 0.5),
        Box::new(|d| d.observed_rate = 0.7),
        Box::new(|d| d.eta = 0.8),
        Box::new(|d| d.a[0][0] = 3.0),
    ];
    assert_eq!(lure_contract_cli::run_demo_with(&DemoData::embedded(), &dir.path().join("clean"), true), 0);
    for (i, tamper) in tampers.iter().enumerate() {
        let mut data = DemoData::embedded();
        tamper(&mut data);
        let code = lure_contract_cli::run_demo_with(&data, &dir.path().join(format!("t{i}")), true);
        assert_ne!(code, 0, "tamper {i} went unnoticed");
    }
}
