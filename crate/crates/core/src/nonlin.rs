//! Sampling-based class membership tests for concrete nonlinearities.
//!
//! Sampling can only falsify: a clean run reports
//! [`Verdict::NoViolationFound`], never a proof. Margins are normalized so the
//! tolerance is dimensionless.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matlin::{self, Matrix, SymMatrix};
use crate::model::{Lipschitz, MonotoneBound, NonlinearFn, NonlinearityClass, SectorBound};

pub const DEFAULT_SAMPLES: usize = 10_000;
pub const DEFAULT_TOLERANCE: f64 = 1e-9;
/// Symmetry tolerance when the Jacobian comes from finite differences.
pub const FD_SYMMETRY_TOLERANCE: f64 = 1e-6;
pub const DEFAULT_FD_STEP: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "rule")]
pub enum Pairing {
    /// Both points drawn independently from the box.
    Independent,
    /// Alternate independent pairs with pairs whose second point lies within
    /// `local_radius × box width` of the first.
    Mixed { local_radius: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleScheme {
    /// One `(lower, upper)` per coordinate; a single entry applies to all.
    pub bounds: Vec<(f64, f64)>,
    pub count: usize,
    pub seed: u64,
    pub pairing: Pairing,
    pub tolerance: f64,
}

impl Default for SampleScheme {
    fn default() -> Self {
        Self {
            bounds: vec![(-5.0, 5.0)],
            count: DEFAULT_SAMPLES,
            seed: 0,
            pairing: Pairing::Mixed { local_radius: 1e-3 },
            tolerance: DEFAULT_TOLERANCE,
        }
    }
}

impl SampleScheme {
    pub fn with_count(mut self, count: usize) -> Self {
        self.count = count;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    fn validate(&self, n: usize) -> Result<()> {
        if self.count == 0 {
            return Err(Error::Precondition("sample count must be at least 1".into()));
        }
        if self.bounds.len() != 1 && self.bounds.len() != n {
            return Err(Error::Dimension(format!("{} bounds for {n} coordinates", self.bounds.len())));
        }
        if self.bounds.iter().any(|(lo, hi)| !(lo.is_finite() && hi.is_finite() && lo <= hi)) {
            return Err(Error::Precondition("sample bounds must be finite with lower ≤ upper".into()));
        }
        if !(self.tolerance >= 0.0) {
            return Err(Error::Precondition("tolerance must be non-negative".into()));
        }
        if let Pairing::Mixed { local_radius } = self.pairing {
            if !(local_radius > 0.0 && local_radius.is_finite()) {
                return Err(Error::Precondition("local radius must be positive".into()));
            }
        }
        Ok(())
    }

    fn bound(&self, i: usize) -> (f64, f64) {
        if self.bounds.len() == 1 {
            self.bounds[0]
        } else {
            self.bounds[i]
        }
    }

    /// Deterministic point sample.
    pub fn points(&self, n: usize) -> Result<Vec<Vec<f64>>> {
        self.validate(n)?;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        Ok((0..self.count).map(|_| self.draw(&mut rng, n)).collect())
    }

    /// Deterministic pair sample.
    pub fn pairs(&self, n: usize) -> Result<Vec<(Vec<f64>, Vec<f64>)>> {
        self.validate(n)?;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        Ok((0..self.count)
            .map(|k| {
                let y1 = self.draw(&mut rng, n);
                let y2 = match self.pairing {
                    Pairing::Mixed { local_radius } if k % 2 == 1 => (0..n)
                        .map(|i| {
                            let (lo, hi) = self.bound(i);
                            y1[i] + local_radius * (hi - lo).max(1.0) * rng.gen_range(-1.0..=1.0)
                        })
                        .collect(),
                    _ => self.draw(&mut rng, n),
                };
                (y1, y2)
            })
            .collect())
    }

    fn draw(&self, rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
        (0..n)
            .map(|i| {
                let (lo, hi) = self.bound(i);
                if lo == hi {
                    lo
                } else {
                    rng.gen_range(lo..=hi)
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    NoViolationFound,
    Violated,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Witness {
    Pair { y1: Vec<f64>, y2: Vec<f64> },
    Point { y: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub verdict: Verdict,
    /// Largest normalized `lhs − rhs` seen; positive means the inequality failed.
    pub worst_margin: f64,
    /// Set only on violation.
    pub witness: Option<Witness>,
    pub samples: usize,
}

impl CheckReport {
    pub fn passed(&self) -> bool {
        self.verdict == Verdict::NoViolationFound
    }
}

fn check_dims(psi: &NonlinearFn, class: &NonlinearityClass) -> Result<()> {
    class.check_dims(psi.n_y(), psi.n_psi())
}

/// Runs `margin` over the pair sample and re-evaluates the worst violating pair.
fn scan_pairs(
    psi: &NonlinearFn,
    sch: &SampleScheme,
    margin: impl Fn(&[f64], &[f64]) -> Result<Option<f64>>,
) -> Result<CheckReport> {
    let pairs = sch.pairs(psi.n_y())?;
    let mut worst = f64::NEG_INFINITY;
    let mut worst_at = None;
    let mut used = 0;
    for (k, (y1, y2)) in pairs.iter().enumerate() {
        if let Some(m) = margin(y1, y2)? {
            used += 1;
            if m > worst {
                worst = m;
                worst_at = Some(k);
            }
        }
    }
    if used == 0 {
        return Err(Error::Precondition("every sampled pair was degenerate".into()));
    }
    let mut report = CheckReport { verdict: Verdict::NoViolationFound, worst_margin: worst, witness: None, samples: used };
    if worst > sch.tolerance {
        let (y1, y2) = &pairs[worst_at.expect("worst sample recorded")];
        let again = margin(y1, y2)?.unwrap_or(f64::NEG_INFINITY);
        if again > sch.tolerance {
            report.verdict = Verdict::Violated;
            report.worst_margin = again;
            report.witness = Some(Witness::Pair { y1: y1.clone(), y2: y2.clone() });
        }
    }
    Ok(report)
}

fn scan_points(
    psi: &NonlinearFn,
    sch: &SampleScheme,
    margin: impl Fn(&[f64]) -> Result<f64>,
) -> Result<CheckReport> {
    let points = sch.points(psi.n_y())?;
    let mut worst = f64::NEG_INFINITY;
    let mut worst_at = 0;
    for (k, y) in points.iter().enumerate() {
        let m = margin(y)?;
        if m.is_nan() {
            return Err(Error::NonFinite("class margin"));
        }
        if m > worst {
            worst = m;
            worst_at = k;
        }
    }
    let mut report =
        CheckReport { verdict: Verdict::NoViolationFound, worst_margin: worst, witness: None, samples: points.len() };
    if worst > sch.tolerance {
        let y = &points[worst_at];
        let again = margin(y)?;
        if again > sch.tolerance {
            report.verdict = Verdict::Violated;
            report.worst_margin = again;
            report.witness = Some(Witness::Point { y: y.clone() });
        }
    }
    Ok(report)
}

fn diff(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

fn norm_sq(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum()
}

/// Jacobian, analytic when supplied, otherwise central differences.
pub fn jacobian(psi: &NonlinearFn, y: &[f64]) -> Result<Matrix> {
    match psi.analytic_jacobian(y) {
        Some(j) => j,
        None => jacobian_fd(psi, y, DEFAULT_FD_STEP),
    }
}

/// Central-difference Jacobian with per-coordinate step `step × max(1, |yᵢ|)`.
pub fn jacobian_fd(psi: &NonlinearFn, y: &[f64], step: f64) -> Result<Matrix> {
    if !(step > 0.0 && step.is_finite()) {
        return Err(Error::Precondition("finite-difference step must be positive".into()));
    }
    if y.len() != psi.n_y() {
        return Err(Error::Structural(format!("{} expects {} inputs", psi.name(), psi.n_y())));
    }
    let mut j = Matrix::zeros(psi.n_psi(), psi.n_y());
    let mut yp = y.to_vec();
    for i in 0..y.len() {
        let h = step * y[i].abs().max(1.0);
        yp[i] = y[i] + h;
        let fp = psi.eval(&yp)?;
        yp[i] = y[i] - h;
        let fm = psi.eval(&yp)?;
        yp[i] = y[i];
        for r in 0..psi.n_psi() {
            j[(r, i)] = (fp[r] - fm[r]) / (2.0 * h);
        }
    }
    Ok(j)
}

/// `ΔΨᵀ Θ_Ψ ΔΨ ≤ ρ² Δyᵀ Θ_y Δy` on sampled pairs.
pub fn check_lipschitz_incremental(psi: &NonlinearFn, nc: &Lipschitz, sch: &SampleScheme) -> Result<CheckReport> {
    check_dims(psi, &NonlinearityClass::Lipschitz(nc.clone()))?;
    let rho2 = nc.rho() * nc.rho();
    let scale = rho2 * nc.theta_y().lambda_max()?;
    scan_pairs(psi, sch, |y1, y2| {
        let dy = diff(y1, y2);
        if norm_sq(&dy) == 0.0 {
            return Ok(None);
        }
        Ok(Some(lipschitz_margin(nc, rho2, scale, &dy, &diff(&psi.eval(y1)?, &psi.eval(y2)?))))
    })
}

fn lipschitz_margin(nc: &Lipschitz, rho2: f64, scale: f64, dy: &[f64], dpsi: &[f64]) -> f64 {
    let lhs = nc.theta_psi().quad_form(dpsi);
    let rhs = rho2 * nc.theta_y().quad_form(dy);
    (lhs - rhs) / (scale * norm_sq(dy))
}

/// `λ_max(Jᵀ Θ_Ψ J − ρ² Θ_y) ≤ 0` on sampled points.
pub fn check_lipschitz_differential(psi: &NonlinearFn, nc: &Lipschitz, sch: &SampleScheme) -> Result<CheckReport> {
    check_dims(psi, &NonlinearityClass::Lipschitz(nc.clone()))?;
    let rho2 = nc.rho() * nc.rho();
    let scale = rho2 * nc.theta_y().lambda_max()?;
    let bound = nc.theta_y().scale(rho2);
    scan_points(psi, sch, |y| {
        let j = jacobian(psi, y)?;
        let m = SymMatrix::from_matrix(&(&(&j.transpose() * nc.theta_psi().as_matrix()) * &j))?;
        Ok(m.sub(&bound).lambda_max()? / scale)
    })
}

fn sector_scale(nc: &SectorBound) -> Result<f64> {
    Ok(nc.theta().lambda_max()? * nc.gamma().norm_2().max(1.0).powi(2))
}

/// `ΔΨᵀ Θ (ΔΨ − Γ Δy) ≤ 0` on sampled pairs.
pub fn check_sector_incremental(psi: &NonlinearFn, nc: &SectorBound, sch: &SampleScheme) -> Result<CheckReport> {
    check_dims(psi, &NonlinearityClass::SectorBounded(nc.clone()))?;
    let scale = sector_scale(nc)?;
    scan_pairs(psi, sch, |y1, y2| {
        let dy = diff(y1, y2);
        if norm_sq(&dy) == 0.0 {
            return Ok(None);
        }
        Ok(Some(sector_margin(nc, scale, &dy, &diff(&psi.eval(y1)?, &psi.eval(y2)?))))
    })
}

fn sector_margin(nc: &SectorBound, scale: f64, dy: &[f64], dpsi: &[f64]) -> f64 {
    let gap = diff(dpsi, &nc.gamma().mul_vec(dy));
    let weighted = nc.theta().as_matrix().mul_vec(&gap);
    let lhs: f64 = dpsi.iter().zip(&weighted).map(|(a, b)| a * b).sum();
    lhs / (scale * norm_sq(dy))
}

/// `λ_max(⟨Jᵀ Θ (J − Γ)⟩ / 2) ≤ 0` on sampled points.
pub fn check_sector_differential(psi: &NonlinearFn, nc: &SectorBound, sch: &SampleScheme) -> Result<CheckReport> {
    check_dims(psi, &NonlinearityClass::SectorBounded(nc.clone()))?;
    let scale = sector_scale(nc)?;
    scan_points(psi, sch, |y| {
        let j = jacobian(psi, y)?;
        let prod = &(&j.transpose() * nc.theta().as_matrix()) * &(&j - nc.gamma());
        Ok(SymMatrix::from_matrix(&prod)?.lambda_max()? / scale)
    })
}

/// `0 ⪯ sym(J) ⪯ Γ` on sampled points.
pub fn check_monotone(psi: &NonlinearFn, gamma: &SymMatrix, sch: &SampleScheme) -> Result<CheckReport> {
    let bound = MonotoneBound::new(gamma.clone())?;
    check_dims(psi, &NonlinearityClass::Monotone(bound))?;
    let scale = gamma.lambda_max()?.max(1.0);
    scan_points(psi, sch, |y| {
        let s = SymMatrix::from_matrix(&jacobian(psi, y)?)?;
        let below = -s.lambda_min()?;
        let above = s.sub(gamma).lambda_max()?;
        Ok(below.max(above) / scale)
    })
}

/// `max ‖J − Jᵀ‖_∞` on sampled points, relative to `max(1, ‖J‖_∞)`.
///
/// The tolerance is raised to [`FD_SYMMETRY_TOLERANCE`] when no analytic
/// Jacobian is available.
pub fn check_symmetry(psi: &NonlinearFn, sch: &SampleScheme) -> Result<CheckReport> {
    if psi.n_y() != psi.n_psi() {
        return Err(Error::Dimension("symmetry needs a square Jacobian".into()));
    }
    let mut sch = sch.clone();
    if !psi.has_jacobian() {
        sch.tolerance = sch.tolerance.max(FD_SYMMETRY_TOLERANCE);
    }
    scan_points(psi, &sch, |y| {
        let j = jacobian(psi, y)?;
        Ok((&j - &j.transpose()).norm_inf() / j.norm_inf().max(1.0))
    })
}

/// Runs the incremental check matching `class`; monotone classes are checked
/// through the Jacobian.
pub fn check_class(psi: &NonlinearFn, class: &NonlinearityClass, sch: &SampleScheme) -> Result<CheckReport> {
    match class {
        NonlinearityClass::Lipschitz(l) => check_lipschitz_incremental(psi, l, sch),
        NonlinearityClass::SectorBounded(s) => check_sector_incremental(psi, s, sch),
        NonlinearityClass::Monotone(m) => check_monotone(psi, m.gamma(), sch),
    }
}

/// Incremental check over every pair of tabulated samples `(y, Ψ(y))`.
/// Monotone classes are checked in their lowered sector form `(Γ, Γ⁻¹)`.
pub fn check_table(samples: &[(Vec<f64>, Vec<f64>)], class: &NonlinearityClass, tolerance: f64) -> Result<CheckReport> {
    let class = match class {
        NonlinearityClass::Monotone(m) => NonlinearityClass::SectorBounded(crate::lmi::lower_monotone(m)?),
        other => other.clone(),
    };
    let (ny, npsi) = match samples.first() {
        Some((y, p)) => (y.len(), p.len()),
        None => return Err(Error::Precondition("the table has no rows".into())),
    };
    class.check_dims(ny, npsi)?;
    if samples.iter().any(|(y, p)| y.len() != ny || p.len() != npsi) {
        return Err(Error::Structural("table rows differ in length".into()));
    }
    let margin: Box<dyn Fn(&[f64], &[f64]) -> f64> = match &class {
        NonlinearityClass::Lipschitz(l) => {
            let rho2 = l.rho() * l.rho();
            let scale = rho2 * l.theta_y().lambda_max()?;
            let l = l.clone();
            Box::new(move |dy, dp| lipschitz_margin(&l, rho2, scale, dy, dp))
        }
        NonlinearityClass::SectorBounded(s) => {
            let scale = sector_scale(s)?;
            let s = s.clone();
            Box::new(move |dy, dp| sector_margin(&s, scale, dy, dp))
        }
        NonlinearityClass::Monotone(_) => unreachable!("lowered above"),
    };
    let mut worst = f64::NEG_INFINITY;
    let mut worst_at = None;
    let mut used = 0;
    for i in 0..samples.len() {
        for j in i + 1..samples.len() {
            let dy = diff(&samples[i].0, &samples[j].0);
            if norm_sq(&dy) == 0.0 {
                continue;
            }
            used += 1;
            let m = margin(&dy, &diff(&samples[i].1, &samples[j].1));
            if m > worst {
                worst = m;
                worst_at = Some((i, j));
            }
        }
    }
    if used == 0 {
        return Err(Error::Precondition("the table needs two distinct inputs".into()));
    }
    let mut report = CheckReport { verdict: Verdict::NoViolationFound, worst_margin: worst, witness: None, samples: used };
    if worst > tolerance {
        let (i, j) = worst_at.expect("recorded");
        report.verdict = Verdict::Violated;
        report.witness = Some(Witness::Pair { y1: samples[i].0.clone(), y2: samples[j].0.clone() });
    }
    Ok(report)
}

/// Evaluates both sides of `0 ⪯ S ⪯ Γ ⟺ sym(S Γ⁻¹ (S − Γ)) ⪯ 0`, each with
/// the relative tolerance [`matlin::TOL_PSD`].
pub fn lemma3_equivalence(s: &SymMatrix, gamma: &SymMatrix) -> Result<(bool, bool)> {
    if s.dim() != gamma.dim() {
        return Err(Error::Dimension("S and Γ must have equal size".into()));
    }
    if !matlin::is_pd(gamma, 0.0)?.holds {
        return Err(Error::Precondition("Γ must be positive definite".into()));
    }
    let tol = matlin::TOL_PSD;
    let lhs = matlin::is_psd(s, tol)?.holds && matlin::is_psd(&gamma.sub(s), tol)?.holds;
    let gi = matlin::inverse(gamma.as_matrix())?;
    let prod = &(s.as_matrix() * &gi) * &(s.as_matrix() - gamma.as_matrix());
    let rhs = matlin::is_nsd(&SymMatrix::from_matrix(&prod)?, tol)?.holds;
    Ok((lhs, rhs))
}
