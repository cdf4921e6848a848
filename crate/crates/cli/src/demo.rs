//! The three-state design example end to end, with its published numbers
//! checked as golden values.

use std::fs;
use std::path::Path;

use lure_contract::library::{self, reference};
use lure_contract::lmi::{self, VAR_K_PSI, VAR_P, VAR_W, VAR_Z};
use lure_contract::model::{close_loop, recover_gains, Lipschitz, LureSystem, NonlinearityClass, TimeDomain};
use lure_contract::nonlin::{self, SampleScheme, DEFAULT_SAMPLES};
use lure_contract::plot::trajectory_plot;
use lure_contract::solver::{self, FeasibilityProblem};
use lure_contract::verify::{self, Trajectory};
use lure_contract::{Matrix, SymMatrix};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::problem::{digest, InputError, Rows};
use crate::report::{rows, Outcome, Report};

/// Everything the demo needs, kept as plain data so it can be tampered with
/// in tests.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemoData {
    pub a: Rows,
    pub b: Rows,
    pub b_psi: Rows,
    pub c: Rows,
    pub rho: f64,
    pub theta_y: Rows,
    pub theta_psi: Rows,
    pub eta: f64,
    pub w: Rows,
    pub z: Rows,
    pub k_psi: Rows,
    pub expected_k: Vec<f64>,
    pub gain_tolerance: f64,
    pub witness_margin: f64,
    pub positivity: f64,
    pub certificate: Rows,
    pub initial_pair: (Vec<f64>, Vec<f64>),
    pub steps: usize,
    pub observed_rate: f64,
    pub rate_tolerance: f64,
    pub class_samples: usize,
}

impl DemoData {
    pub fn embedded() -> Self {
        let lip = reference::lipschitz();
        Self {
            a: reference::a().to_rows(),
            b: reference::b().to_rows(),
            b_psi: reference::b_psi().to_rows(),
            c: reference::c().to_rows(),
            rho: lip.rho(),
            theta_y: lip.theta_y().as_matrix().to_rows(),
            theta_psi: lip.theta_psi().as_matrix().to_rows(),
            eta: reference::ETA,
            w: reference::witness_w().as_matrix().to_rows(),
            z: reference::witness_z().to_rows(),
            k_psi: reference::witness_k_psi().to_rows(),
            expected_k: reference::gains().k.row_vec(0),
            gain_tolerance: 1e-10,
            witness_margin: 1e-8,
            positivity: 1e-6,
            certificate: reference::certificate().as_matrix().to_rows(),
            initial_pair: reference::initial_pair(),
            steps: reference::STEPS,
            observed_rate: reference::OBSERVED_RATE,
            rate_tolerance: 5e-3,
            class_samples: DEFAULT_SAMPLES,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GoldenCheck {
    pub name: String,
    pub passed: bool,
    pub observed: serde_json::Value,
    pub expected: String,
}

fn golden(name: &str, passed: bool, observed: serde_json::Value, expected: String) -> GoldenCheck {
    GoldenCheck { name: name.to_string(), passed, observed, expected }
}

fn io(path: &Path, e: impl std::fmt::Display) -> InputError {
    InputError(format!("cannot write {}: {e}", path.display()))
}

/// Runs the example and writes `rates.csv`, trajectory CSVs,
/// `trajectories_x1.svg` and `report.json` into `out`.
pub fn run_demo(data: &DemoData, out: &Path) -> Result<Report, InputError> {
    fs::create_dir_all(out).map_err(|e| io(out, e))?;
    let input = serde_json::to_vec(data).expect("demo data serializes");
    let mut report = Report::new("demo-paper", digest(&input));

    let m = |r: &Rows| Matrix::from_rows(r);
    let sys = LureSystem::new(m(&data.a)?, m(&data.b)?, m(&data.b_psi)?, m(&data.c)?, TimeDomain::Discrete)?;
    let lip = Lipschitz::new(data.rho, SymMatrix::from_rows(&data.theta_y)?, SymMatrix::from_rows(&data.theta_psi)?)?;
    let w = SymMatrix::from_rows(&data.w)?;
    let (z, k_psi) = (m(&data.z)?, m(&data.k_psi)?);
    let mut checks = Vec::new();

    // witness feasibility of the synthesis inequality
    let pencil = lmi::build_dt_lip_synthesis(&sys, &lip, data.eta)?;
    let prob = FeasibilityProblem::standard(pencil);
    let x = prob.pencil.layout().assign(&[(VAR_W, w.as_matrix()), (VAR_Z, &z), (VAR_K_PSI, &k_psi)])?;
    let audit = solver::audit(&prob, &x)?;
    let w_min = w.lambda_min()?;
    checks.push(golden(
        "witness-feasible",
        audit.lambda_max <= data.witness_margin && w_min >= data.positivity,
        json!({ "lambda_max": audit.lambda_max, "W_lambda_min": w_min }),
        format!("lambda_max <= {:e} and W >= {:e} I", data.witness_margin, data.positivity),
    ));

    // gain recovery
    let gains = recover_gains(&w, &z, &k_psi)?;
    let k = gains.k.row_vec(0);
    let k_err = if k.len() == data.expected_k.len() {
        k.iter().zip(&data.expected_k).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    } else {
        f64::INFINITY
    };
    checks.push(golden(
        "gain-recovery",
        k_err <= data.gain_tolerance,
        json!({ "K": k, "max_abs_error": k_err }),
        format!("K = {:?} within {:e}", data.expected_k, data.gain_tolerance),
    ));

    // analysis at the certificate
    let cl = close_loop(&sys, &gains)?;
    let p = SymMatrix::from_rows(&data.certificate)?;
    let analysis = lmi::build_dt_lip_analysis(&cl, &lip, data.eta)?.evaluate_at(&[(VAR_P, p.as_matrix())])?;
    let a_max = analysis.lambda_max()?;
    checks.push(golden(
        "certificate-analysis",
        a_max < 0.0,
        json!({ "lambda_max": a_max }),
        "lambda_max < 0 at the published P".into(),
    ));

    // class conformance, then simulation
    let class = NonlinearityClass::Lipschitz(lip);
    let scheme = SampleScheme::default().with_count(data.class_samples);
    let psis = reference::nonlinearities();
    let mut class_reports = Vec::new();
    for psi in &psis {
        let r = nonlin::check_class(psi, &class, &scheme)?;
        checks.push(golden(
            &format!("class-{}", psi.name()),
            r.passed(),
            json!({ "worst_margin": r.worst_margin, "samples": r.samples }),
            "no violation of the Lipschitz bound".into(),
        ));
        class_reports.push(json!({ "psi": psi.name(), "report": r }));
    }

    let (x1, x2) = &data.initial_pair;
    let mut runs: Vec<(usize, usize, Trajectory)> = Vec::new();
    let mut rate_rows = Vec::new();
    let mut max_ratio = f64::NEG_INFINITY;
    let mut max_sq = f64::NEG_INFINITY;
    let rates_path = out.join("rates.csv");
    let mut rates = csv::Writer::from_path(&rates_path).map_err(|e| io(&rates_path, e))?;
    rates.write_record(["psi", "k", "distance", "ratio", "squared_ratio"]).map_err(|e| io(&rates_path, e))?;
    for (g, psi) in psis.iter().enumerate() {
        let t1 = verify::simulate_dt(&cl, psi, x1, data.steps)?;
        let t2 = verify::simulate_dt(&cl, psi, x2, data.steps)?;
        let r = verify::rate_estimate(&t1, &t2, &p)?;
        for (k, d) in r.distances.iter().enumerate() {
            let ratio = k.checked_sub(1).and_then(|i| r.ratios[i]);
            let fmt = |v: Option<f64>| v.map(|v| format!("{v:.16e}")).unwrap_or_default();
            rates
                .write_record([
                    psi.name().to_string(),
                    k.to_string(),
                    format!("{d:.16e}"),
                    fmt(ratio),
                    fmt(ratio.map(|v| v * v)),
                ])
                .map_err(|e| io(&rates_path, e))?;
        }
        for (side, t) in [("a", &t1), ("b", &t2)] {
            let path = out.join(format!("{}_{side}.csv", psi.name()));
            let file = fs::File::create(&path).map_err(|e| io(&path, e))?;
            t.write_csv(file)?;
        }
        max_ratio = max_ratio.max(r.max_ratio);
        max_sq = max_sq.max(r.max_squared_ratio);
        rate_rows.push(json!({ "psi": psi.name(), "max_ratio": r.max_ratio, "max_squared_ratio": r.max_squared_ratio }));
        runs.push((g, 0, t1));
        runs.push((g, 1, t2));
    }
    rates.flush().map_err(|e| io(&rates_path, e))?;

    checks.push(golden(
        "observed-rate",
        (max_sq - data.observed_rate).abs() <= data.rate_tolerance,
        json!({ "max_squared_ratio": max_sq, "max_ratio": max_ratio }),
        format!("max squared P-distance ratio = {} ± {}", data.observed_rate, data.rate_tolerance),
    ));
    checks.push(golden(
        "contraction",
        max_ratio <= data.eta,
        json!({ "max_ratio": max_ratio }),
        format!("every P-distance ratio <= eta = {}", data.eta),
    ));
    report.warnings.push(format!(
        "the published factor {} is matched by the squared P-distance ratio; the plain ratio is {max_ratio:.5}",
        data.observed_rate
    ));

    let refs: Vec<(usize, usize, &Trajectory)> = runs.iter().map(|(g, v, t)| (*g, *v, t)).collect();
    let svg_path = out.join("trajectories_x1.svg");
    fs::write(&svg_path, trajectory_plot("x1 for each nonlinearity and initial state", 0, &refs).to_svg())
        .map_err(|e| io(&svg_path, e))?;

    let failed: Vec<&str> = checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect();
    report.details = json!({
        "K": rows(&gains.k),
        "K_psi": rows(&gains.k_psi),
        "P": data.certificate,
        "eta": data.eta,
        "steps": data.steps,
        "rates": rate_rows,
        "class_checks": class_reports,
        "checks": checks,
        "files": ["rates.csv", "trajectories_x1.svg", "report.json"],
        "builtin_psi": library::BUILTIN_NAMES[..3],
    });
    if failed.is_empty() {
        report.finish(Outcome::Success, "reproduced");
    } else {
        report.warnings.push(format!("golden checks failed: {}", failed.join(", ")));
        report.finish(Outcome::Negative, "mismatch");
    }
    Ok(report)
}
