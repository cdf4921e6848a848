//! wasm-bindgen entry points for `www/index.html`. Every function takes plain
//! numbers and returns a JSON string, so the page needs no glue beyond
//! `JSON.parse`.

use lure_contract::library::reference;
use lure_contract::lmi::{self, VAR_K_PSI, VAR_P, VAR_W, VAR_Z};
use lure_contract::model::{close_loop, recover_gains, Gains, Lipschitz};
use lure_contract::plot::trajectory_plot;
use lure_contract::solver::{self, FeasibilityProblem, SolveOptions, Status};
use lure_contract::verify::{self, Trajectory};
use lure_contract::{matlin, Matrix, SymMatrix};
use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

fn respond(r: lure_contract::Result<Value>) -> String {
    match r {
        Ok(v) => v.to_string(),
        Err(e) => json!({ "error": e.to_string() }).to_string(),
    }
}

fn lipschitz(rho: f64) -> lure_contract::Result<Lipschitz> {
    let l = reference::lipschitz();
    Lipschitz::new(rho, l.theta_y().clone(), l.theta_psi().clone())
}

/// Evaluates the discrete-time Lipschitz synthesis inequality of the
/// reference plant at `W = diag(w)`, `Z`, `K_Ψ`.
#[wasm_bindgen]
pub fn audit_witness(w1: f64, w2: f64, w3: f64, z1: f64, z2: f64, z3: f64, k_psi: f64, eta: f64) -> String {
    respond((|| {
        let w = SymMatrix::diag(&[w1, w2, w3]);
        let z = Matrix::row(&[z1, z2, z3]);
        let kp = Matrix::diag(&[k_psi]);
        let pencil = lmi::build_dt_lip_synthesis(&reference::system(), &reference::lipschitz(), eta)?;
        let lambda_max = pencil.evaluate_at(&[(VAR_W, w.as_matrix()), (VAR_Z, &z), (VAR_K_PSI, &kp)])?.lambda_max()?;
        let w_min = w.lambda_min()?;
        let k = if w_min > 0.0 { Some(recover_gains(&w, &z, &kp)?.k.row_vec(0)) } else { None };
        Ok(json!({
            "lambda_max": lambda_max,
            "W_lambda_min": w_min,
            "feasible": lambda_max <= 1e-8 && w_min >= 1e-6,
            "K": k,
        }))
    })())
}

/// Simulates the reference loop under gains `(k, k_psi)` for all three
/// example nonlinearities and returns the x1 plot plus P-distance ratios.
#[wasm_bindgen]
pub fn simulate_reference(k1: f64, k2: f64, k3: f64, k_psi: f64, steps: usize) -> String {
    respond((|| {
        let gains = Gains::new(Matrix::row(&[k1, k2, k3]), Matrix::diag(&[k_psi]));
        let cl = close_loop(&reference::system(), &gains)?;
        let (x1, x2) = reference::initial_pair();
        let p = reference::certificate();
        let mut runs: Vec<(usize, usize, Trajectory)> = Vec::new();
        let mut rates = Vec::new();
        for (g, psi) in reference::nonlinearities().iter().enumerate() {
            let t1 = verify::simulate_dt(&cl, psi, &x1, steps)?;
            let t2 = verify::simulate_dt(&cl, psi, &x2, steps)?;
            let r = verify::rate_estimate(&t1, &t2, &p)?;
            rates.push(json!({ "psi": psi.name(), "max_ratio": r.max_ratio, "max_squared_ratio": r.max_squared_ratio }));
            runs.push((g, 0, t1));
            runs.push((g, 1, t2));
        }
        let refs: Vec<(usize, usize, &Trajectory)> = runs.iter().map(|(g, v, t)| (*g, *v, t)).collect();
        Ok(json!({ "svg": trajectory_plot("x1", 0, &refs).to_svg(), "rates": rates }))
    })())
}

/// Solves the synthesis inequality of the reference plant for a chosen
/// contraction factor and Lipschitz constant.
#[wasm_bindgen]
pub fn synthesize_reference(eta: f64, rho: f64) -> String {
    respond((|| {
        let sys = reference::system();
        let lip = lipschitz(rho)?;
        let prob = FeasibilityProblem::standard(lmi::build_dt_lip_synthesis(&sys, &lip, eta)?);
        let res = solver::solve(&prob, &SolveOptions::default())?;
        let mut out = json!({
            "status": serde_json::to_value(res.status).unwrap_or(Value::Null),
            "margin": res.audit.margin,
            "iterations": res.iterations,
        });
        if res.status == Status::Feasible {
            let layout = prob.pencil.layout();
            let w = layout.sym_matrix(&res.witness, VAR_W)?;
            let gains = recover_gains(&w, &layout.matrix(&res.witness, VAR_Z)?, &layout.matrix(&res.witness, VAR_K_PSI)?)?;
            let p = SymMatrix::from_matrix(&matlin::inverse(w.as_matrix())?)?;
            let cl = close_loop(&sys, &gains)?;
            let check = lmi::build_dt_lip_analysis(&cl, &lip, eta)?.evaluate_at(&[(VAR_P, p.as_matrix())])?;
            out["K"] = json!(gains.k.row_vec(0));
            out["K_psi"] = json!(gains.k_psi.row_vec(0));
            out["P"] = json!(p.as_matrix().to_rows());
            out["analysis_lambda_max"] = json!(check.lambda_max()?);
        }
        Ok(out)
    })())
}
