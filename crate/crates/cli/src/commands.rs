//! Command implementations. Each returns a finished [`Report`] or an
//! [`InputError`] (exit code 1).

use std::fs;
use std::path::{Path, PathBuf};

use lure_contract::lmi::{LmiSpec, LmiTag, VAR_K_PSI, VAR_P, VAR_W, VAR_Z};
use lure_contract::model::{close_loop, recover_gains, Gains, TimeDomain};
use lure_contract::nonlin::{self, CheckReport, SampleScheme, DEFAULT_SAMPLES, DEFAULT_TOLERANCE};
use lure_contract::plot::trajectory_plot;
use lure_contract::solver::{self, FeasibilityProblem, FeasibilityResult, SolveOptions, Status};
use lure_contract::verify::{self, RateReport, TrialScheme, Trajectory, RATIO_TOLERANCE};
use lure_contract::{library, matlin, Error, Matrix, SymMatrix};
use serde::Serialize;
use serde_json::json;

use crate::problem::{GainsSection, InputError, Loaded, StopKeyword, StopRule};
use crate::report::{rows, Outcome, Report};

/// A re-audited analysis matrix must have `λ_max < −REAUDIT_MARGIN · max(1, ‖M‖∞)`.
pub const REAUDIT_MARGIN: f64 = 1e-12;
/// Synthesis stops at the first centred iterate with this margin unless the
/// problem file says otherwise; maximizing drives `W` onto its positivity
/// floor and the recovered gains blow up.
pub const SYNTHESIS_STOP_MARGIN: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Theorem {
    Auto,
    Tag(LmiTag),
}

pub fn parse_theorem(s: &str) -> Result<Theorem, String> {
    if s == "auto" {
        return Ok(Theorem::Auto);
    }
    serde_json::from_value(serde_json::Value::String(s.to_string())).map(Theorem::Tag).map_err(|_| {
        let known: Vec<String> = LmiTag::ALL.iter().map(|t| t.to_string()).collect();
        format!("unknown theorem `{s}`; expected auto or one of {}", known.join(", "))
    })
}

#[derive(Debug, Clone, Default)]
pub struct SolverFlags {
    pub margin_min: Option<f64>,
    pub seed: Option<u64>,
}

fn solve_options(
    loaded: &Loaded,
    flags: &SolverFlags,
    default_stop: Option<f64>,
) -> Result<SolveOptions, InputError> {
    let s = loaded.solver();
    let mut opts = SolveOptions::default();
    if let Some(v) = flags.margin_min.or(s.margin_min) {
        opts.margin_min = v;
    }
    if let Some(v) = s.max_iter {
        opts.max_iter = v;
    }
    if let Some(v) = s.box_radius {
        opts.box_radius = v;
    }
    if let Some(v) = flags.seed.or(s.seed) {
        opts.seed = v;
    }
    opts.stop_at_margin = match s.stop_at_margin {
        Some(StopRule::Margin(m)) => Some(m),
        Some(StopRule::Keyword(StopKeyword::None)) => None,
        None => default_stop,
    };
    if opts.stop_at_margin.is_some_and(|m| !(m > 0.0 && m.is_finite())) {
        return Err(InputError("solver.stop_at_margin must be positive".into()));
    }
    if !(opts.margin_min > 0.0 && opts.margin_min.is_finite()) {
        return Err(InputError("margin_min must be positive".into()));
    }
    if !(opts.box_radius > 0.0 && opts.box_radius.is_finite()) {
        return Err(InputError("solver.box_radius must be positive".into()));
    }
    if opts.max_iter == 0 {
        return Err(InputError("solver.max_iter must be at least 1".into()));
    }
    Ok(opts)
}

fn status_word(s: Status) -> String {
    serde_json::to_value(s).ok().and_then(|v| v.as_str().map(str::to_string)).unwrap_or_default()
}

fn outcome(s: Status) -> Outcome {
    match s {
        Status::Feasible => Outcome::Success,
        Status::Infeasible => Outcome::Negative,
        Status::Undetermined => Outcome::Undetermined,
    }
}

fn is_numerical(e: &Error) -> bool {
    matches!(e, Error::Singular { .. } | Error::NoConvergence { .. } | Error::Divergence { .. } | Error::Degenerate)
}

/// Runs the solver; numerical breakdowns become an undetermined report
/// instead of a usage error.
fn solve_or_report(
    prob: &FeasibilityProblem,
    opts: &SolveOptions,
    report: &mut Report,
) -> Result<Option<FeasibilityResult>, InputError> {
    match solver::solve(prob, opts) {
        Ok(r) => Ok(Some(r)),
        Err(e) if is_numerical(&e) => {
            report.warnings.push(format!("solver broke down: {e}"));
            report.finish(Outcome::Undetermined, "undetermined");
            Ok(None)
        }
        Err(e) => Err(e.into()),
    }
}

fn solver_details(res: &FeasibilityResult) -> serde_json::Value {
    json!({
        "status": status_word(res.status),
        "margin": res.audit.margin,
        "lambda_max": res.audit.lambda_max,
        "positivity": res.audit.positivity,
        "iterations": res.iterations,
        "upper_bound": res.upper_bound,
        "diagnostics": res.diagnostics,
    })
}

pub fn analyze(loaded: &Loaded, theorem: Theorem, flags: &SolverFlags) -> Result<Report, InputError> {
    let gains = loaded
        .gains
        .clone()
        .ok_or_else(|| InputError("analyze needs `gains` (K and K_psi) in the problem file".into()))?;
    let tag = match theorem {
        Theorem::Auto => LmiTag::analysis_for(loaded.system.domain(), &loaded.class),
        Theorem::Tag(t) if t.is_analysis() => t,
        Theorem::Tag(t) => return Err(InputError(format!("{t} is not an analysis form"))),
    };
    let opts = solve_options(loaded, flags, None)?;
    let spec = LmiSpec::new(tag, loaded.system.clone(), loaded.class.clone(), loaded.file.eta)?;
    let pencil = spec.build(Some(&gains))?;
    let mut report = Report::new("analyze", loaded.digest.clone());
    report.warnings.extend(pencil.notes.iter().cloned());
    let prob = FeasibilityProblem::standard(pencil);
    let Some(res) = solve_or_report(&prob, &opts, &mut report)? else { return Ok(report) };
    let p = prob.pencil.layout().matrix(&res.witness, VAR_P)?;
    report.details = json!({
        "theorem": tag,
        "eta": loaded.file.eta,
        "P": rows(&p),
        "solver": solver_details(&res),
    });
    report.finish(outcome(res.status), status_word(res.status));
    Ok(report)
}

pub fn synthesize(loaded: &Loaded, theorem: Theorem, flags: &SolverFlags) -> Result<Report, InputError> {
    let sys = &loaded.system;
    let tag = match theorem {
        Theorem::Auto => LmiTag::synthesis_for(sys.domain(), &loaded.class),
        Theorem::Tag(t) if !t.is_analysis() => t,
        Theorem::Tag(t) => return Err(InputError(format!("{t} is not a synthesis form"))),
    };
    let opts = solve_options(loaded, flags, Some(SYNTHESIS_STOP_MARGIN))?;
    let spec = LmiSpec::new(tag, sys.clone(), loaded.class.clone(), loaded.file.eta)?;
    let pencil = spec.build(None)?;
    let mut report = Report::new("synthesize", loaded.digest.clone());
    report.warnings.extend(pencil.notes.iter().cloned());
    let prob = FeasibilityProblem::standard(pencil);
    let Some(res) = solve_or_report(&prob, &opts, &mut report)? else { return Ok(report) };
    report.details = json!({ "theorem": tag, "eta": loaded.file.eta, "solver": solver_details(&res) });
    if res.status != Status::Feasible {
        report.finish(outcome(res.status), status_word(res.status));
        return Ok(report);
    }
    let layout = prob.pencil.layout();
    let w = layout.sym_matrix(&res.witness, VAR_W)?;
    let z = layout.matrix(&res.witness, VAR_Z)?;
    let k_psi = match layout.group(VAR_K_PSI) {
        Some(_) => layout.matrix(&res.witness, VAR_K_PSI)?,
        None => Matrix::zeros(sys.n_u(), sys.n_psi()),
    };
    let gains = recover_gains(&w, &z, &k_psi)?;
    let p = SymMatrix::from_matrix(&matlin::inverse(w.as_matrix())?)?;
    let analysis_tag = tag.analysis_counterpart();
    let reaudit = reaudit(loaded, analysis_tag, &gains, &p);
    let details = report.details.as_object_mut().expect("object");
    details.insert("W".into(), rows(w.as_matrix()));
    details.insert("Z".into(), rows(&z));
    details.insert("P".into(), rows(p.as_matrix()));
    details.insert(
        "gains".into(),
        serde_json::to_value(GainsSection { k: gains.k.to_rows(), k_psi: gains.k_psi.to_rows() }).expect("rows"),
    );
    match reaudit {
        Ok((lambda_max, passed)) => {
            details.insert(
                "reaudit".into(),
                json!({ "theorem": analysis_tag, "lambda_max": lambda_max, "passed": passed }),
            );
            if passed {
                report.finish(Outcome::Success, "feasible");
            } else {
                report.warnings.push(format!("{analysis_tag} at P = W^-1 has lambda_max = {lambda_max:e}; gains are not certified"));
                report.finish(Outcome::Undetermined, "undetermined");
            }
        }
        Err(e) => {
            details.insert("reaudit".into(), json!({ "theorem": analysis_tag, "error": e.to_string() }));
            report.warnings.push(format!("{analysis_tag} could not be re-audited: {e}"));
            report.finish(Outcome::Undetermined, "undetermined");
        }
    }
    Ok(report)
}

fn reaudit(loaded: &Loaded, tag: LmiTag, gains: &Gains, p: &SymMatrix) -> lure_contract::Result<(f64, bool)> {
    let spec = LmiSpec::new(tag, loaded.system.clone(), loaded.class.clone(), loaded.file.eta)?;
    let m = spec.build(Some(gains))?.evaluate_at(&[(VAR_P, p.as_matrix())])?;
    let lambda_max = m.lambda_max()?;
    let passed = lambda_max < -REAUDIT_MARGIN * m.as_matrix().norm_inf().max(1.0);
    Ok((lambda_max, passed))
}

#[derive(Debug, Clone, Default)]
pub struct SimulateFlags {
    pub steps: Option<usize>,
    pub t_end: Option<f64>,
    pub dt: Option<f64>,
    pub pairs: Option<PathBuf>,
    pub csv: Option<PathBuf>,
    pub plot: Option<PathBuf>,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RateRow {
    pub psi: String,
    pub pair: usize,
    pub max_ratio: f64,
    pub max_squared_ratio: f64,
    pub min_rate: Option<f64>,
}

fn io_err(what: &str, path: &Path, e: impl std::fmt::Display) -> InputError {
    InputError(format!("cannot {what} {}: {e}", path.display()))
}

fn write_trajectory(dir: &Path, name: &str, t: &Trajectory) -> Result<PathBuf, InputError> {
    let path = dir.join(name);
    let file = fs::File::create(&path).map_err(|e| io_err("create", &path, e))?;
    t.write_csv(file)?;
    Ok(path)
}

fn read_pairs(path: &Path) -> Result<Vec<(Vec<f64>, Vec<f64>)>, InputError> {
    let bytes = fs::read(path).map_err(|e| io_err("read", path, e))?;
    let de = &mut serde_json::Deserializer::from_slice(&bytes);
    serde_path_to_error::deserialize(de)
        .map_err(|e| InputError(format!("{}: `{}`: {}", path.display(), e.path(), e.inner())))
}

pub fn simulate(loaded: &Loaded, flags: &SimulateFlags) -> Result<Report, InputError> {
    let sys = &loaded.system;
    let mut report = Report::new("simulate", loaded.digest.clone());
    let gains = match &loaded.gains {
        Some(g) => g.clone(),
        None => {
            report.warnings.push("no gains in the problem file; simulating the open loop (K = 0, K_psi = 0)".into());
            Gains::zero(sys)
        }
    };
    let cl = close_loop(sys, &gains)?;
    let psis = loaded.builtin_psis()?;
    if psis.is_empty() {
        return Err(InputError("simulate needs at least one entry in `builtin_psi`".into()));
    }
    let sim = loaded.simulation();
    let steps = flags.steps.or(sim.steps).unwrap_or(library::reference::STEPS);
    let t_end = flags.t_end.or(sim.t_end).unwrap_or(1.0);
    let dt = flags.dt.or(sim.dt).unwrap_or(1e-3);
    match sys.domain() {
        TimeDomain::Discrete if steps == 0 => return Err(InputError("steps must be at least 1".into())),
        TimeDomain::Continuous if !(t_end > 0.0 && dt > 0.0 && t_end.is_finite() && dt.is_finite()) => {
            return Err(InputError("t_end and dt must be positive".into()))
        }
        _ => {}
    }
    let explicit = match &flags.pairs {
        Some(path) => read_pairs(path)?,
        None => sim.pairs.clone(),
    };
    let trials = TrialScheme {
        random_pairs: sim.random_pairs.unwrap_or(if explicit.is_empty() { 4 } else { 0 }),
        pairs: explicit,
        seed: flags.seed.or(sim.seed).unwrap_or(0),
        ..TrialScheme::default()
    };
    let pairs = trials.all_pairs(sys.n_x());
    if pairs.is_empty() {
        return Err(InputError("no initial pairs to simulate".into()));
    }
    if pairs.iter().any(|(a, b)| a.len() != sys.n_x() || b.len() != sys.n_x()) {
        return Err(InputError(format!("every initial state must have {} entries", sys.n_x())));
    }
    let p = match &loaded.certificate {
        Some(p) => p.clone(),
        None => {
            report.warnings.push("no certificate in the problem file; distances use P = I".into());
            SymMatrix::identity(sys.n_x())
        }
    };
    if let Some(dir) = &flags.csv {
        fs::create_dir_all(dir).map_err(|e| io_err("create", dir, e))?;
    }

    let mut runs: Vec<(usize, usize, Trajectory)> = Vec::new();
    let mut table = Vec::new();
    let mut files = Vec::new();
    for (g, psi) in psis.iter().enumerate() {
        for (k, (x1, x2)) in pairs.iter().enumerate() {
            let run = |x0: &[f64]| match sys.domain() {
                TimeDomain::Discrete => verify::simulate_dt(&cl, psi, x0, steps),
                TimeDomain::Continuous => verify::simulate_ct(&cl, psi, x0, t_end, dt),
            };
            let (t1, t2) = (run(x1)?, run(x2)?);
            if let Some(dir) = &flags.csv {
                for (side, t) in [("a", &t1), ("b", &t2)] {
                    files.push(write_trajectory(dir, &format!("{}_pair{k}_{side}.csv", psi.name()), t)?);
                }
            }
            match verify::rate_estimate(&t1, &t2, &p) {
                Ok(r) => table.push(rate_row(psi.name(), k, &r)),
                Err(Error::Degenerate) => {
                    report.warnings.push(format!("{} pair {k}: trajectories coincide, no ratio", psi.name()))
                }
                Err(e) => return Err(e.into()),
            }
            runs.push((g, 0, t1));
            runs.push((g, 1, t2));
        }
    }
    if let Some(dir) = &flags.csv {
        let path = dir.join("rates.csv");
        write_rate_table(&path, &table)?;
        files.push(path);
    }
    if let Some(path) = &flags.plot {
        let refs: Vec<(usize, usize, &Trajectory)> = runs.iter().map(|(g, v, t)| (*g, *v, t)).collect();
        let svg = trajectory_plot("x1 trajectories", 0, &refs).to_svg();
        fs::write(path, svg).map_err(|e| io_err("write", path, e))?;
        files.push(path.clone());
    }

    let worst = table.iter().map(|r| r.max_ratio).fold(f64::NEG_INFINITY, f64::max);
    let worst_sq = table.iter().map(|r| r.max_squared_ratio).fold(f64::NEG_INFINITY, f64::max);
    let threshold = loaded.certificate.as_ref().map(|_| match sys.domain() {
        TimeDomain::Discrete => loaded.file.eta,
        TimeDomain::Continuous => (-loaded.file.eta * dt).exp(),
    });
    report.details = json!({
        "domain": sys.domain(),
        "steps": steps,
        "t_end": t_end,
        "dt": dt,
        "pairs": pairs,
        "rates": table,
        "worst_ratio": worst,
        "worst_squared_ratio": worst_sq,
        "threshold": threshold,
        "files": files,
    });
    match threshold {
        _ if table.is_empty() => report.finish(Outcome::Undetermined, "no-rates"),
        Some(th) if worst > th * (1.0 + RATIO_TOLERANCE) => report.finish(Outcome::Negative, "rate-exceeded"),
        Some(_) => report.finish(Outcome::Success, "within-certificate"),
        None => report.finish(Outcome::Success, "simulated"),
    }
    Ok(report)
}

fn rate_row(psi: &str, pair: usize, r: &RateReport) -> RateRow {
    RateRow {
        psi: psi.to_string(),
        pair,
        max_ratio: r.max_ratio,
        max_squared_ratio: r.max_squared_ratio,
        min_rate: r.min_rate,
    }
}

fn write_rate_table(path: &Path, table: &[RateRow]) -> Result<(), InputError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| io_err("create", path, e))?;
    w.write_record(["psi", "pair", "max_ratio", "max_squared_ratio", "min_rate"]).map_err(|e| io_err("write", path, e))?;
    for r in table {
        let min_rate = r.min_rate.map(|v| format!("{v:.16e}")).unwrap_or_default();
        w.write_record([
            r.psi.clone(),
            r.pair.to_string(),
            format!("{:.16e}", r.max_ratio),
            format!("{:.16e}", r.max_squared_ratio),
            min_rate,
        ])
        .map_err(|e| io_err("write", path, e))?;
    }
    w.flush().map_err(|e| io_err("write", path, e))
}

#[derive(Debug, Clone, Default)]
pub struct CheckFlags {
    pub psi: Vec<String>,
    pub samples: Option<usize>,
    pub seed: Option<u64>,
    pub tol: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckEntry {
    pub psi: String,
    #[serde(flatten)]
    pub report: CheckReport,
}

/// Rows of `y₁ … y_{n_y}, Ψ₁ … Ψ_{n_Ψ}` with a header line.
fn read_table(path: &Path, n_y: usize, n_psi: usize) -> Result<Vec<(Vec<f64>, Vec<f64>)>, InputError> {
    let mut r = csv::Reader::from_path(path).map_err(|e| io_err("read", path, e))?;
    let mut out = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| io_err("read", path, e))?;
        if rec.len() != n_y + n_psi {
            return Err(InputError(format!(
                "{} row {}: expected {} columns (y then psi), found {}",
                path.display(),
                i + 1,
                n_y + n_psi,
                rec.len()
            )));
        }
        let vals = rec
            .iter()
            .map(|f| f.trim().parse::<f64>())
            .collect::<Result<Vec<f64>, _>>()
            .map_err(|e| InputError(format!("{} row {}: {e}", path.display(), i + 1)))?;
        out.push((vals[..n_y].to_vec(), vals[n_y..].to_vec()));
    }
    Ok(out)
}

pub fn check(loaded: &Loaded, flags: &CheckFlags) -> Result<Report, InputError> {
    let sys = &loaded.system;
    let sources = if flags.psi.is_empty() { loaded.file.builtin_psi.clone() } else { flags.psi.clone() };
    if sources.is_empty() {
        return Err(InputError("check needs --psi or `builtin_psi` in the problem file".into()));
    }
    let tolerance = flags.tol.unwrap_or(DEFAULT_TOLERANCE);
    if !(tolerance >= 0.0 && tolerance.is_finite()) {
        return Err(InputError("--tol must be a non-negative number".into()));
    }
    let scheme = SampleScheme { tolerance, ..SampleScheme::default() }
        .with_count(flags.samples.unwrap_or(DEFAULT_SAMPLES))
        .with_seed(flags.seed.unwrap_or(0));
    let mut entries = Vec::new();
    for src in &sources {
        let report = match src.strip_prefix("table:") {
            Some(path) => {
                let samples = read_table(Path::new(path), sys.n_y(), sys.n_psi())?;
                nonlin::check_table(&samples, &loaded.class, tolerance)?
            }
            None => {
                let psi = library::by_name(src, sys.n_y(), sys.n_psi())?;
                nonlin::check_class(&psi, &loaded.class, &scheme)?
            }
        };
        entries.push(CheckEntry { psi: src.clone(), report });
    }
    let mut report = Report::new("check", loaded.digest.clone());
    let violated = entries.iter().any(|e| !e.report.passed());
    report.details = json!({ "class": loaded.class.name(), "checks": entries, "samples": scheme.count, "seed": scheme.seed });
    if violated {
        report.finish(Outcome::Negative, "violated");
    } else {
        report.warnings.push("sampling can only falsify; no violation found is not a proof".into());
        report.finish(Outcome::Success, "no-violation-found");
    }
    Ok(report)
}
