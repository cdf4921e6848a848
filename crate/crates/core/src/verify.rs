//! Closed-loop simulation and empirical contraction measurement.

use std::io::{Read, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matlin::{self, SymMatrix};
use crate::model::{close_loop, ClosedLoop, Gains, LureSystem, NonlinearFn, NonlinearityClass, TimeDomain};
use crate::nonlin::{self, CheckReport, SampleScheme};

/// Relative slack allowed on observed ratios before a certificate fails.
pub const RATIO_TOLERANCE: f64 = 1e-6;
/// Distances below this fraction of the initial distance are not divided by.
pub const DEGENERACY: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub domain: TimeDomain,
    /// Step indices (discrete) or times (continuous).
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub psi_name: String,
    pub initial: Vec<f64>,
    pub psi_evaluations: usize,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn n_x(&self) -> usize {
        self.initial.len()
    }

    /// Column `i` of the state sequence.
    pub fn coordinate(&self, i: usize) -> Vec<f64> {
        self.states.iter().map(|x| x[i]).collect()
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let first = match self.domain {
            TimeDomain::Discrete => "k".to_string(),
            TimeDomain::Continuous => "t".to_string(),
        };
        let header: Vec<String> = std::iter::once(first).chain((1..=self.n_x()).map(|i| format!("x{i}"))).collect();
        w.write_record(&header).map_err(csv_err)?;
        for (t, x) in self.times.iter().zip(&self.states) {
            let grid = match self.domain {
                TimeDomain::Discrete => format!("{}", *t as u64),
                TimeDomain::Continuous => format!("{t:.16e}"),
            };
            let row: Vec<String> = std::iter::once(grid).chain(x.iter().map(|v| format!("{v:.16e}"))).collect();
            w.write_record(&row).map_err(csv_err)?;
        }
        w.flush().map_err(|e| Error::Structural(format!("csv write failed: {e}")))?;
        Ok(())
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Structural(format!("csv: {e}"))
}

/// Grid and states read back from a trajectory CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryTable {
    pub domain: TimeDomain,
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
}

pub fn read_csv<R: Read>(input: R) -> Result<TrajectoryTable> {
    let mut r = csv::Reader::from_reader(input);
    let header = r.headers().map_err(csv_err)?.clone();
    let domain = match header.get(0) {
        Some("k") => TimeDomain::Discrete,
        Some("t") => TimeDomain::Continuous,
        other => return Err(Error::Structural(format!("unexpected grid column {other:?}"))),
    };
    for (i, name) in header.iter().enumerate().skip(1) {
        if name != format!("x{i}") {
            return Err(Error::Structural(format!("unexpected state column {name:?}")));
        }
    }
    let n = header.len() - 1;
    let mut times = Vec::new();
    let mut states = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(csv_err)?;
        let vals: Vec<f64> = rec
            .iter()
            .map(|f| f.trim().parse::<f64>().map_err(|e| Error::Structural(format!("bad number {f:?}: {e}"))))
            .collect::<Result<_>>()?;
        if vals.len() != n + 1 {
            return Err(Error::Structural("ragged csv row".into()));
        }
        times.push(vals[0]);
        states.push(vals[1..].to_vec());
    }
    Ok(TrajectoryTable { domain, times, states })
}

fn check_sim_inputs(cl: &ClosedLoop, psi: &NonlinearFn, x0: &[f64]) -> Result<()> {
    if x0.len() != cl.n_x() {
        return Err(Error::Dimension(format!("initial state has {} entries, system has {}", x0.len(), cl.n_x())));
    }
    if psi.n_y() != cl.c.rows() || psi.n_psi() != cl.b_cl.cols() {
        return Err(Error::Dimension(format!(
            "{} maps R^{} to R^{}, loop needs R^{} to R^{}",
            psi.name(),
            psi.n_y(),
            psi.n_psi(),
            cl.c.rows(),
            cl.b_cl.cols()
        )));
    }
    if x0.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("initial state"));
    }
    Ok(())
}

fn vector_field(cl: &ClosedLoop, psi: &NonlinearFn, x: &[f64]) -> Result<Vec<f64>> {
    let y = cl.c.mul_vec(x);
    let p = psi.eval(&y)?;
    let ax = cl.a_cl.mul_vec(x);
    let bp = cl.b_cl.mul_vec(&p);
    Ok(ax.iter().zip(&bp).map(|(a, b)| a + b).collect())
}

/// `x(k+1) = A_cl x(k) + B_cl Ψ(C x(k))` for `steps` steps.
pub fn simulate_dt(cl: &ClosedLoop, psi: &NonlinearFn, x0: &[f64], steps: usize) -> Result<Trajectory> {
    if cl.domain != TimeDomain::Discrete {
        return Err(Error::Precondition("simulate_dt needs a discrete-time loop".into()));
    }
    if steps == 0 {
        return Err(Error::Precondition("steps must be at least 1".into()));
    }
    check_sim_inputs(cl, psi, x0)?;
    let mut states = Vec::with_capacity(steps + 1);
    states.push(x0.to_vec());
    for k in 0..steps {
        let next = vector_field(cl, psi, &states[k])?;
        if next.iter().any(|v| !v.is_finite()) {
            return Err(Error::Divergence { step: k + 1 });
        }
        states.push(next);
    }
    Ok(Trajectory {
        domain: TimeDomain::Discrete,
        times: (0..=steps).map(|k| k as f64).collect(),
        states,
        psi_name: psi.name().to_string(),
        initial: x0.to_vec(),
        psi_evaluations: steps,
    })
}

/// Classical fixed-step RK4 on `ẋ = A_cl x + B_cl Ψ(C x)`; the step count is
/// `round(t_end / dt)`.
pub fn simulate_ct(cl: &ClosedLoop, psi: &NonlinearFn, x0: &[f64], t_end: f64, dt: f64) -> Result<Trajectory> {
    if cl.domain != TimeDomain::Continuous {
        return Err(Error::Precondition("simulate_ct needs a continuous-time loop".into()));
    }
    if !(dt > 0.0 && dt.is_finite() && t_end > 0.0 && t_end.is_finite()) {
        return Err(Error::Precondition("dt and t_end must be positive".into()));
    }
    let steps = (t_end / dt).round() as usize;
    if steps == 0 {
        return Err(Error::Precondition("t_end is shorter than one step".into()));
    }
    check_sim_inputs(cl, psi, x0)?;
    let axpy = |x: &[f64], a: f64, k: &[f64]| -> Vec<f64> { x.iter().zip(k).map(|(x, k)| x + a * k).collect() };
    let mut states = Vec::with_capacity(steps + 1);
    states.push(x0.to_vec());
    for n in 0..steps {
        let x = &states[n];
        let k1 = vector_field(cl, psi, x)?;
        let k2 = vector_field(cl, psi, &axpy(x, 0.5 * dt, &k1))?;
        let k3 = vector_field(cl, psi, &axpy(x, 0.5 * dt, &k2))?;
        let k4 = vector_field(cl, psi, &axpy(x, dt, &k3))?;
        let next: Vec<f64> = (0..x.len())
            .map(|i| x[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
            .collect();
        if next.iter().any(|v| !v.is_finite()) {
            return Err(Error::Divergence { step: n + 1 });
        }
        states.push(next);
    }
    Ok(Trajectory {
        domain: TimeDomain::Continuous,
        times: (0..=steps).map(|n| n as f64 * dt).collect(),
        states,
        psi_name: psi.name().to_string(),
        initial: x0.to_vec(),
        psi_evaluations: 4 * steps,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateReport {
    pub domain: TimeDomain,
    /// `‖x⁽¹⁾(k) − x⁽²⁾(k)‖_P` on the whole grid.
    pub distances: Vec<f64>,
    /// `d(k+1) / d(k)`; `None` where `d(k)` is degenerate.
    pub ratios: Vec<Option<f64>>,
    /// `d(k+1)² / d(k)²`.
    pub squared_ratios: Vec<Option<f64>>,
    pub max_ratio: f64,
    pub max_squared_ratio: f64,
    /// Continuous time only: `−ln r(k) / dt` and its minimum.
    pub rates: Option<Vec<Option<f64>>>,
    pub min_rate: Option<f64>,
    pub p: SymMatrix,
}

/// Per-step contraction of the `P`-weighted distance between two runs.
pub fn rate_estimate(t1: &Trajectory, t2: &Trajectory, p: &SymMatrix) -> Result<RateReport> {
    if t1.domain != t2.domain {
        return Err(Error::Precondition("trajectories come from different time domains".into()));
    }
    if t1.times != t2.times {
        return Err(Error::Precondition("trajectories are on different grids".into()));
    }
    if p.dim() != t1.n_x() || t2.n_x() != t1.n_x() {
        return Err(Error::Dimension("P does not match the state dimension".into()));
    }
    if matlin::cholesky(p).is_none() {
        return Err(Error::Precondition("P must be positive definite".into()));
    }
    let distances: Vec<f64> = t1
        .states
        .iter()
        .zip(&t2.states)
        .map(|(a, b)| {
            let d: Vec<f64> = a.iter().zip(b).map(|(a, b)| a - b).collect();
            matlin::weighted_norm(&d, p)
        })
        .collect();
    let floor = DEGENERACY * distances[0];
    let ratios: Vec<Option<f64>> =
        distances.windows(2).map(|w| (w[0] > floor && w[0] > 0.0).then(|| w[1] / w[0])).collect();
    let max_ratio = ratios.iter().flatten().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max_ratio.is_finite() {
        return Err(Error::Degenerate);
    }
    let squared_ratios: Vec<Option<f64>> = ratios.iter().map(|r| r.map(|r| r * r)).collect();
    let max_squared_ratio = max_ratio * max_ratio;
    let (rates, min_rate) = match t1.domain {
        TimeDomain::Discrete => (None, None),
        TimeDomain::Continuous => {
            let rates: Vec<Option<f64>> = t1
                .times
                .windows(2)
                .zip(&ratios)
                .map(|(w, r)| r.map(|r| -r.ln() / (w[1] - w[0])))
                .collect();
            let min = rates.iter().flatten().copied().fold(f64::INFINITY, f64::min);
            (Some(rates), Some(min))
        }
    };
    Ok(RateReport {
        domain: t1.domain,
        distances,
        ratios,
        squared_ratios,
        max_ratio,
        max_squared_ratio,
        rates,
        min_rate,
        p: p.clone(),
    })
}

/// A claimed contraction certificate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub p: SymMatrix,
    pub eta: f64,
}

/// Which trajectory pairs to simulate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialScheme {
    /// Explicit initial pairs, run first.
    pub pairs: Vec<(Vec<f64>, Vec<f64>)>,
    /// Additional random pairs drawn from `[lower, upper]ⁿ`.
    pub random_pairs: usize,
    pub bounds: (f64, f64),
    pub seed: u64,
    pub steps: usize,
    pub t_end: f64,
    pub dt: f64,
    /// Sampling for the class pre-check.
    pub class_check: SampleScheme,
}

impl Default for TrialScheme {
    fn default() -> Self {
        Self {
            pairs: Vec::new(),
            random_pairs: 8,
            bounds: (-5.0, 5.0),
            seed: 0,
            steps: 10,
            t_end: 1.0,
            dt: 1e-3,
            class_check: SampleScheme::default(),
        }
    }
}

impl TrialScheme {
    /// Explicit pairs followed by the seeded random draws.
    pub fn all_pairs(&self, n: usize) -> Vec<(Vec<f64>, Vec<f64>)> {
        let mut out = self.pairs.clone();
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let (lo, hi) = self.bounds;
        for _ in 0..self.random_pairs {
            let mut draw = || (0..n).map(|_| rng.gen_range(lo..=hi)).collect::<Vec<f64>>();
            out.push((draw(), draw()));
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub psi: String,
    pub pair: usize,
    pub max_ratio: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertifyReport {
    pub passed: bool,
    /// `η` (discrete) or `e^{−η dt}` (continuous).
    pub threshold: f64,
    pub worst_ratio: f64,
    pub runs: Vec<RunSummary>,
    pub class_checks: Vec<(String, CheckReport)>,
}

/// Simulates every (Ψ, pair) combination and compares the observed per-step
/// ratios with the certificate.
pub fn certify_empirically(
    sys: &LureSystem,
    gains: &Gains,
    class: &NonlinearityClass,
    psis: &[NonlinearFn],
    cert: &Certificate,
    trials: &TrialScheme,
) -> Result<CertifyReport> {
    let cl = close_loop(sys, gains)?;
    if psis.is_empty() {
        return Err(Error::Precondition("no nonlinearities to simulate".into()));
    }
    let mut class_checks = Vec::with_capacity(psis.len());
    for psi in psis {
        let report = nonlin::check_class(psi, class, &trials.class_check)?;
        if !report.passed() {
            return Err(Error::Precondition(format!("{} is outside the declared {} class", psi.name(), class.name())));
        }
        class_checks.push((psi.name().to_string(), report));
    }
    let threshold = match sys.domain() {
        TimeDomain::Discrete => cert.eta,
        TimeDomain::Continuous => (-cert.eta * trials.dt).exp(),
    };
    let pairs = trials.all_pairs(sys.n_x());
    let mut runs = Vec::new();
    let mut worst = f64::NEG_INFINITY;
    for psi in psis {
        for (k, (x1, x2)) in pairs.iter().enumerate() {
            let (t1, t2) = match sys.domain() {
                TimeDomain::Discrete => {
                    (simulate_dt(&cl, psi, x1, trials.steps)?, simulate_dt(&cl, psi, x2, trials.steps)?)
                }
                TimeDomain::Continuous => (
                    simulate_ct(&cl, psi, x1, trials.t_end, trials.dt)?,
                    simulate_ct(&cl, psi, x2, trials.t_end, trials.dt)?,
                ),
            };
            let rate = match rate_estimate(&t1, &t2, &cert.p) {
                Ok(r) => r,
                Err(Error::Degenerate) => continue,
                Err(e) => return Err(e),
            };
            worst = worst.max(rate.max_ratio);
            runs.push(RunSummary {
                psi: psi.name().to_string(),
                pair: k,
                max_ratio: rate.max_ratio,
                passed: rate.max_ratio <= threshold * (1.0 + RATIO_TOLERANCE),
            });
        }
    }
    Ok(CertifyReport { passed: runs.iter().all(|r| r.passed), threshold, worst_ratio: worst, runs, class_checks })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::library::{self, reference};
    use crate::matlin::Matrix;

    fn half_loop() -> ClosedLoop {
        ClosedLoop::new(Matrix::identity(3).scale(0.5), Matrix::zeros(3, 1), Matrix::identity(3), TimeDomain::Discrete)
            .unwrap()
    }

    #[test]
    fn geometric_decay() {
        let t = simulate_dt(&half_loop(), &library::zero(3, 1), &[1.0, 1.0, 1.0], 5).unwrap();
        for (k, x) in t.states.iter().enumerate() {
            assert_eq!(x, &vec![0.5f64.powi(k as i32); 3]);
        }
        assert!(simulate_dt(&half_loop(), &library::zero(3, 1), &[1.0; 3], 0).is_err());
    }

    #[test]
    fn half_loop_ratio_is_exact() {
        let psi = library::zero(3, 1);
        let a = simulate_dt(&half_loop(), &psi, &[1.0, 2.0, 3.0], 6).unwrap();
        let b = simulate_dt(&half_loop(), &psi, &[-1.0, 0.0, 1.0], 6).unwrap();
        let r = rate_estimate(&a, &b, &SymMatrix::identity(3)).unwrap();
        assert!(r.ratios.iter().all(|r| *r == Some(0.5)));
        assert!(matches!(rate_estimate(&a, &a, &SymMatrix::identity(3)), Err(Error::Degenerate)));
    }

    #[test]
    fn divergence_is_reported() {
        let cl = ClosedLoop::new(Matrix::diag(&[1e200]), Matrix::zeros(1, 1), Matrix::identity(1), TimeDomain::Discrete)
            .unwrap();
        let err = simulate_dt(&cl, &library::zero(1, 1), &[1e200], 5).unwrap_err();
        assert_eq!(err, Error::Divergence { step: 1 });
    }

    #[test]
    fn reference_trajectories_approach_each_other() {
        let cl = close_loop(&reference::system(), &reference::gains()).unwrap();
        let (x1, x2) = reference::initial_pair();
        let psi = library::example_log_cosh();
        let a = simulate_dt(&cl, &psi, &x1, reference::STEPS).unwrap();
        let b = simulate_dt(&cl, &psi, &x2, reference::STEPS).unwrap();
        let gap0 = (a.states[0][0] - b.states[0][0]).abs();
        let gap10 = (a.states[10][0] - b.states[10][0]).abs();
        assert!(gap10 < 0.05 * gap0);
    }

    #[test]
    fn csv_round_trip() {
        let cl = close_loop(&reference::system(), &reference::gains()).unwrap();
        let t = simulate_dt(&cl, &library::example_logistic(), &[0.1, -0.3, 2.0], 4).unwrap();
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("k,x1,x2,x3\n"));
        let back = read_csv(buf.as_slice()).unwrap();
        assert_eq!(back.states, t.states);
        assert_eq!(back.times, t.times);
    }

    #[test]
    fn open_loop_fails_certificate() {
        let sys = reference::system();
        let cert = Certificate { p: SymMatrix::identity(3), eta: 0.95 };
        let trials = TrialScheme { class_check: SampleScheme::default().with_count(200), ..TrialScheme::default() };
        let psi = [library::zero(2, 1)];
        let r = certify_empirically(&sys, &Gains::zero(&sys), &NonlinearityClass::Lipschitz(reference::lipschitz()), &psi, &cert, &trials)
            .unwrap();
        assert!(!r.passed);
        assert!(r.worst_ratio > 1.0);
    }
}
