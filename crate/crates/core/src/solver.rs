//! Feasibility of `F(x) ⪯ 0` with positivity side constraints.
//!
//! The solver maximizes a margin `t` subject to `F(x) + tI ⪯ 0`, `X_g ⪰ εI`
//! for each positivity group and a box on the free coordinates, by log-barrier
//! path following with damped Newton steps. Linear equalities (the trace
//! normalization of homogeneous pencils) are eliminated up front.
//!
//! Verdicts never come from the solver's internal state: the returned witness
//! is always re-evaluated by [`audit`], and only a passing audit yields
//! [`Status::Feasible`].

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lmi::{AffinePencil, VarKind};
use crate::matlin::{self, Matrix, SymMatrix};

/// Relative positivity margin: `ε = DEFAULT_EPS_REL × hint`.
pub const DEFAULT_EPS_REL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PositivityConstraint {
    pub group: String,
    pub epsilon: f64,
}

/// `Σ coeffs[i].1 · x[coeffs[i].0] = rhs`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearEquality {
    pub coeffs: Vec<(usize, f64)>,
    pub rhs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityProblem {
    pub pencil: AffinePencil,
    pub positivity: Vec<PositivityConstraint>,
    /// Per-group magnitude hints; missing groups default to 1.
    pub scaling: BTreeMap<String, f64>,
    pub equalities: Vec<LinearEquality>,
}

impl FeasibilityProblem {
    /// Bare problem: only `F(x) ⪯ 0`.
    pub fn new(pencil: AffinePencil) -> Self {
        Self { pencil, positivity: Vec::new(), scaling: BTreeMap::new(), equalities: Vec::new() }
    }

    /// Every symmetric group gets `X ⪰ εI`; a homogeneous pencil additionally
    /// gets `trace(X) = n · hint` on its first symmetric group.
    pub fn standard(pencil: AffinePencil) -> Self {
        Self::standard_with(pencil, BTreeMap::new())
    }

    pub fn standard_with(pencil: AffinePencil, scaling: BTreeMap<String, f64>) -> Self {
        let mut prob = Self { pencil, positivity: Vec::new(), scaling, equalities: Vec::new() };
        let sym: Vec<(String, usize)> = prob
            .pencil
            .layout()
            .groups()
            .iter()
            .filter_map(|g| match g.kind {
                VarKind::Symmetric(n) => Some((g.name.clone(), n)),
                VarKind::Full(..) => None,
            })
            .collect();
        for (name, _) in &sym {
            let epsilon = DEFAULT_EPS_REL * prob.hint(name);
            prob.positivity.push(PositivityConstraint { group: name.clone(), epsilon });
        }
        if prob.pencil.is_homogeneous() {
            if let Some((name, n)) = sym.first() {
                let rhs = *n as f64 * prob.hint(name);
                let coeffs = diagonal_coordinates(&prob.pencil, name).into_iter().map(|i| (i, 1.0)).collect();
                prob.equalities.push(LinearEquality { coeffs, rhs });
            }
        }
        prob
    }

    pub fn hint(&self, group: &str) -> f64 {
        self.scaling.get(group).copied().unwrap_or(1.0)
    }

    pub fn validate(&self) -> Result<()> {
        let layout = self.pencil.layout();
        for (name, h) in &self.scaling {
            if layout.group(name).is_none() {
                return Err(Error::Structural(format!("scaling hint for unknown group {name}")));
            }
            if !(h.is_finite() && *h > 0.0) {
                return Err(Error::Precondition(format!("scaling hint for {name} must be positive")));
            }
        }
        for c in &self.positivity {
            match layout.group(&c.group) {
                None => return Err(Error::Structural(format!("positivity on unknown group {}", c.group))),
                Some(g) if !matches!(g.kind, VarKind::Symmetric(_)) => {
                    return Err(Error::Structural(format!("positivity on non-symmetric group {}", c.group)))
                }
                _ => {}
            }
            if !(c.epsilon.is_finite() && c.epsilon > 0.0) {
                return Err(Error::Precondition(format!("positivity margin for {} must be positive", c.group)));
            }
        }
        for eq in &self.equalities {
            if eq.coeffs.iter().any(|&(i, _)| i >= layout.len()) {
                return Err(Error::Structural("equality references a coordinate outside the layout".into()));
            }
            if !eq.rhs.is_finite() || eq.coeffs.iter().any(|(_, c)| !c.is_finite()) {
                return Err(Error::NonFinite("equality constraint"));
            }
        }
        Ok(())
    }
}

fn diagonal_coordinates(pencil: &AffinePencil, name: &str) -> Vec<usize> {
    let layout = pencil.layout();
    let g = layout.group(name).expect("group exists");
    let VarKind::Symmetric(n) = g.kind else { return Vec::new() };
    let mut out = Vec::with_capacity(n);
    let mut k = g.offset;
    for i in 0..n {
        out.push(k);
        k += n - i;
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveOptions {
    /// A witness counts as feasible only if `λ_max(F) ≤ −margin_min`.
    pub margin_min: f64,
    /// Cap on Newton steps.
    pub max_iter: usize,
    /// Zero means the deterministic centre start; other values jitter it.
    pub seed: u64,
    /// Free coordinates are confined to `|y| ≤ box_radius × hint`.
    pub box_radius: f64,
    /// Stop once the barrier gap bound drops below this (relative to `max(1, |t|)`).
    pub gap_tol: f64,
    /// Return the first centred iterate whose margin reaches this value
    /// instead of maximizing. Early central points keep symmetric variables
    /// away from their positivity floor.
    pub stop_at_margin: Option<f64>,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self { margin_min: 1e-8, max_iter: 500, seed: 0, box_radius: 1e3, gap_tol: 1e-7, stop_at_margin: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Status {
    #[serde(rename = "feasible")]
    Feasible,
    #[serde(rename = "infeasible-certified-numerically")]
    Infeasible,
    #[serde(rename = "undetermined")]
    Undetermined,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PositivityAudit {
    pub group: String,
    pub lambda_min: f64,
    pub epsilon: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub lambda_max: f64,
    /// `−λ_max(F(x))`.
    pub margin: f64,
    pub positivity: Vec<PositivityAudit>,
    pub equality_residual: f64,
}

impl AuditReport {
    pub fn passes(&self, margin_min: f64) -> bool {
        self.margin >= margin_min && self.positivity.iter().all(|p| p.holds)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityResult {
    pub status: Status,
    pub witness: Vec<f64>,
    pub audit: AuditReport,
    pub iterations: usize,
    /// Upper bound on the achievable margin inside the search box, if the
    /// final iterate was centred.
    pub upper_bound: Option<f64>,
    pub diagnostics: Vec<String>,
}

impl FeasibilityResult {
    pub fn is_feasible(&self) -> bool {
        self.status == Status::Feasible
    }
}

/// Independent re-evaluation of a witness with the dense eigen-solver.
pub fn audit(prob: &FeasibilityProblem, witness: &[f64]) -> Result<AuditReport> {
    let f = prob.pencil.evaluate(witness)?;
    let lambda_max = f.lambda_max()?;
    let layout = prob.pencil.layout();
    let mut positivity = Vec::with_capacity(prob.positivity.len());
    for c in &prob.positivity {
        let lambda_min = layout.sym_matrix(witness, &c.group)?.lambda_min()?;
        positivity.push(PositivityAudit {
            group: c.group.clone(),
            lambda_min,
            epsilon: c.epsilon,
            holds: lambda_min >= c.epsilon * (1.0 - 1e-9),
        });
    }
    let equality_residual = prob
        .equalities
        .iter()
        .map(|eq| {
            let lhs: f64 = eq.coeffs.iter().map(|&(i, c)| c * witness[i]).sum();
            (lhs - eq.rhs).abs()
        })
        .fold(0.0, f64::max);
    Ok(AuditReport { lambda_max, margin: -lambda_max, positivity, equality_residual })
}

/// Turns a candidate witness into a result. The status depends only on the
/// audit and on `upper_bound`; there is no other route to `Feasible`.
pub fn classify(
    prob: &FeasibilityProblem,
    witness: Vec<f64>,
    upper_bound: Option<f64>,
    iterations: usize,
    mut diagnostics: Vec<String>,
    opts: &SolveOptions,
) -> Result<FeasibilityResult> {
    let report = audit(prob, &witness)?;
    let status = if report.passes(opts.margin_min) {
        Status::Feasible
    } else if upper_bound.is_some_and(|ub| ub <= -opts.margin_min) {
        Status::Infeasible
    } else {
        if report.margin.abs() <= 1e-6 * prob.pencil.f0().as_matrix().max_abs().max(1.0) {
            diagnostics.push("optimal margin is approximately zero: instance lies on the feasibility boundary".into());
        }
        Status::Undetermined
    };
    Ok(FeasibilityResult { status, witness, audit: report, iterations, upper_bound, diagnostics })
}

/// Parametrization of the equality-constrained coordinates: `x = off + E y`.
struct Reduction {
    off: Vec<f64>,
    e: Vec<Vec<f64>>,
    free: Vec<usize>,
}

fn eliminate(m: usize, eqs: &[LinearEquality]) -> Result<Reduction> {
    let k = eqs.len();
    let mut a = vec![vec![0.0; m + 1]; k];
    for (r, eq) in eqs.iter().enumerate() {
        for &(i, c) in &eq.coeffs {
            a[r][i] += c;
        }
        a[r][m] = eq.rhs;
    }
    let scale = a.iter().flat_map(|r| r[..m].iter()).fold(0.0f64, |s, v| s.max(v.abs())).max(1.0);
    let mut pivots = Vec::new();
    let mut rank = 0;
    for col in 0..m {
        if rank == k {
            break;
        }
        let (best, val) = (rank..k).map(|r| (r, a[r][col].abs())).fold((rank, 0.0), |b, c| if c.1 > b.1 { c } else { b });
        if val <= 1e-12 * scale {
            continue;
        }
        a.swap(rank, best);
        let p = a[rank][col];
        for v in a[rank].iter_mut() {
            *v /= p;
        }
        for r in 0..k {
            if r != rank && a[r][col] != 0.0 {
                let f = a[r][col];
                for c in 0..=m {
                    a[r][c] -= f * a[rank][c];
                }
            }
        }
        pivots.push(col);
        rank += 1;
    }
    if a[rank..].iter().any(|row| row[m].abs() > 1e-9 * scale) {
        return Err(Error::Precondition("equality constraints are inconsistent".into()));
    }
    let free: Vec<usize> = (0..m).filter(|c| !pivots.contains(c)).collect();
    let mut off = vec![0.0; m];
    let mut e = vec![vec![0.0; free.len()]; m];
    for (r, &p) in pivots.iter().enumerate() {
        off[p] = a[r][m];
        for (j, &f) in free.iter().enumerate() {
            e[p][j] = -a[r][f];
        }
    }
    for (j, &f) in free.iter().enumerate() {
        e[f][j] = 1.0;
    }
    Ok(Reduction { off, e, free })
}

/// Symmetric block affine in the solver variables `z`.
struct Block {
    c0: Matrix,
    coef: Vec<Option<Matrix>>,
}

impl Block {
    fn at(&self, z: &[f64]) -> SymMatrix {
        let mut m = self.c0.clone();
        for (zj, cj) in z.iter().zip(&self.coef) {
            if let Some(cj) = cj {
                m = &m + &cj.scale(*zj);
            }
        }
        SymMatrix::from_matrix(&m).expect("blocks stay finite on the barrier domain")
    }
}

struct Barrier {
    blocks: Vec<Block>,
    radius: Vec<f64>,
    /// Barrier parameter: total block dimension plus two per box coordinate.
    nu: f64,
}

struct Eval {
    f: f64,
    grad: Vec<f64>,
    hess: Vec<Vec<f64>>,
}

impl Barrier {
    fn nz(&self) -> usize {
        self.radius.len() + 1
    }

    /// `−s t − Σ log det G_b(z) − Σ log(R² − y²)`, or `None` outside the domain.
    fn value(&self, z: &[f64], s: f64) -> Option<f64> {
        let ny = self.radius.len();
        let mut f = -s * z[ny];
        for (y, r) in z[..ny].iter().zip(&self.radius) {
            let slack = r * r - y * y;
            if slack <= 0.0 {
                return None;
            }
            f -= slack.ln();
        }
        for b in &self.blocks {
            let l = matlin::cholesky(&b.at(z))?;
            f -= 2.0 * (0..l.rows()).map(|i| l[(i, i)].ln()).sum::<f64>();
        }
        f.is_finite().then_some(f)
    }

    fn eval(&self, z: &[f64], s: f64) -> Option<Eval> {
        let f = self.value(z, s)?;
        let nz = self.nz();
        let ny = nz - 1;
        let mut grad = vec![0.0; nz];
        let mut hess = vec![vec![0.0; nz]; nz];
        grad[ny] = -s;
        for j in 0..ny {
            let (y, r) = (z[j], self.radius[j]);
            grad[j] += 1.0 / (r - y) - 1.0 / (r + y);
            hess[j][j] += 1.0 / (r - y).powi(2) + 1.0 / (r + y).powi(2);
        }
        for b in &self.blocks {
            let l = matlin::cholesky(&b.at(z))?;
            let ginv = matlin::cholesky_inverse(&l);
            let ginv = ginv.as_matrix();
            let mut active = Vec::new();
            for (j, cj) in b.coef.iter().enumerate() {
                if let Some(cj) = cj {
                    let mj = ginv * cj;
                    grad[j] -= mj.trace();
                    active.push((j, mj));
                }
            }
            let d = ginv.rows();
            for (a, (ja, ma)) in active.iter().enumerate() {
                for (jb, mb) in &active[a..] {
                    let mut tr = 0.0;
                    for p in 0..d {
                        for q in 0..d {
                            tr += ma[(p, q)] * mb[(q, p)];
                        }
                    }
                    hess[*ja][*jb] += tr;
                    if ja != jb {
                        hess[*jb][*ja] += tr;
                    }
                }
            }
        }
        Some(Eval { f, grad, hess })
    }
}

/// Solves `H d = rhs` for symmetric positive definite `H`, with a small ridge
/// when the plain factorization fails.
fn spd_solve(h: &[Vec<f64>], rhs: &[f64]) -> Option<Vec<f64>> {
    let n = rhs.len();
    let scale = (0..n).map(|i| h[i][i].abs()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    for ridge in [0.0, 1e-14, 1e-12, 1e-10] {
        let mut l = vec![vec![0.0; n]; n];
        let mut ok = true;
        'outer: for i in 0..n {
            for j in 0..=i {
                let mut s = h[i][j] + if i == j { ridge * scale } else { 0.0 };
                for k in 0..j {
                    s -= l[i][k] * l[j][k];
                }
                if i == j {
                    if s <= 0.0 || !s.is_finite() {
                        ok = false;
                        break 'outer;
                    }
                    l[i][i] = s.sqrt();
                } else {
                    l[i][j] = s / l[j][j];
                }
            }
        }
        if !ok {
            continue;
        }
        let mut w = rhs.to_vec();
        for i in 0..n {
            for k in 0..i {
                w[i] -= l[i][k] * w[k];
            }
            w[i] /= l[i][i];
        }
        for i in (0..n).rev() {
            for k in i + 1..n {
                w[i] -= l[k][i] * w[k];
            }
            w[i] /= l[i][i];
        }
        return Some(w);
    }
    None
}

fn sym_unit(n: usize, i: usize, j: usize) -> Matrix {
    let mut m = Matrix::zeros(n, n);
    m[(i, j)] = 1.0;
    m[(j, i)] = 1.0;
    m
}

fn build_barrier(prob: &FeasibilityProblem, red: &Reduction, opts: &SolveOptions) -> Barrier {
    let pencil = &prob.pencil;
    let layout = pencil.layout();
    let ny = red.free.len();
    let nz = ny + 1;
    let dim = pencil.dim();

    let combine = |mats: &dyn Fn(usize) -> Option<Matrix>, coeffs: &dyn Fn(usize) -> f64| -> Option<Matrix> {
        let mut acc: Option<Matrix> = None;
        for i in 0..layout.len() {
            let c = coeffs(i);
            if c == 0.0 {
                continue;
            }
            if let Some(m) = mats(i) {
                let term = m.scale(c);
                acc = Some(match acc {
                    Some(a) => &a + &term,
                    None => term,
                });
            }
        }
        acc.filter(|m| !m.is_zero())
    };

    let mut blocks = Vec::new();

    // −F(off + E y) − t I
    let f_of = |i: usize| Some(pencil.basis()[i].as_matrix().clone());
    let f_off = pencil.evaluate(&red.off).expect("offset has layout length");
    let mut coef: Vec<Option<Matrix>> =
        (0..ny).map(|j| combine(&f_of, &|i| red.e[i][j]).map(|m| -&m)).collect();
    coef.push(Some(-&Matrix::identity(dim)));
    blocks.push(Block { c0: -f_off.as_matrix(), coef });

    for c in &prob.positivity {
        let g = layout.group(&c.group).expect("validated");
        let VarKind::Symmetric(n) = g.kind else { unreachable!("validated") };
        let mut units: Vec<Option<Matrix>> = vec![None; layout.len()];
        let mut k = g.offset;
        for i in 0..n {
            for j in i..n {
                units[k] = Some(sym_unit(n, i, j));
                k += 1;
            }
        }
        let unit_of = |i: usize| units[i].clone();
        let mut c0 = Matrix::identity(n).scale(-c.epsilon);
        for (i, u) in units.iter().enumerate() {
            if let Some(u) = u {
                c0 = &c0 + &u.scale(red.off[i]);
            }
        }
        let mut coef: Vec<Option<Matrix>> = (0..ny).map(|j| combine(&unit_of, &|i| red.e[i][j])).collect();
        coef.push(None);
        blocks.push(Block { c0, coef });
    }

    let radius: Vec<f64> = red
        .free
        .iter()
        .map(|&i| opts.box_radius * prob.hint(&layout.group_of(i).expect("coordinate in layout").name))
        .collect();
    let nu = blocks.iter().map(|b| b.c0.rows()).sum::<usize>() as f64 + 2.0 * ny as f64;
    debug_assert_eq!(blocks[0].coef.len(), nz);
    Barrier { blocks, radius, nu }
}

/// Start point in the original coordinates: `hint · I` on positivity groups,
/// zero elsewhere.
fn start_point(prob: &FeasibilityProblem) -> Vec<f64> {
    let layout = prob.pencil.layout();
    let mut x = vec![0.0; layout.len()];
    for c in &prob.positivity {
        if let Some(VarKind::Symmetric(n)) = layout.group(&c.group).map(|g| g.kind) {
            let hint = prob.hint(&c.group).max(2.0 * c.epsilon);
            layout.pack(&mut x, &c.group, &Matrix::identity(n).scale(hint)).expect("group exists");
        }
    }
    x
}

pub fn solve(prob: &FeasibilityProblem, opts: &SolveOptions) -> Result<FeasibilityResult> {
    prob.validate()?;
    if !(opts.margin_min >= 0.0 && opts.box_radius > 0.0 && opts.gap_tol > 0.0)
        || opts.stop_at_margin.is_some_and(|m| !(m > 0.0 && m.is_finite()))
    {
        return Err(Error::Precondition("solver options must be positive".into()));
    }
    let layout = prob.pencil.layout();
    let red = eliminate(layout.len(), &prob.equalities)?;
    let barrier = build_barrier(prob, &red, opts);
    let ny = red.free.len();
    let to_x = |z: &[f64]| -> Vec<f64> {
        (0..layout.len())
            .map(|i| red.off[i] + red.e[i].iter().zip(&z[..ny]).map(|(e, y)| e * y).sum::<f64>())
            .collect()
    };

    let mut diagnostics = Vec::new();
    let x0 = start_point(prob);
    let mut z: Vec<f64> = red.free.iter().map(|&i| x0[i]).collect();
    for (y, r) in z.iter_mut().zip(&barrier.radius) {
        *y = y.clamp(-0.5 * r, 0.5 * r);
    }
    if opts.seed != 0 {
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
        let jittered: Vec<f64> = z
            .iter()
            .zip(&red.free)
            .map(|(y, &i)| y + 1e-3 * prob.hint(&layout.group_of(i).expect("in layout").name) * rng.gen_range(-1.0..1.0))
            .collect();
        let x = to_x(&jittered);
        let positive = prob
            .positivity
            .iter()
            .all(|c| layout.sym_matrix(&x, &c.group).ok().and_then(|m| matlin::cholesky(&m.shift(-c.epsilon))).is_some());
        if positive {
            z = jittered;
        }
    }
    let lam0 = prob.pencil.evaluate(&to_x(&z))?.lambda_max()?;
    z.push(-lam0 - 1.0);

    let mut s = 1.0;
    let mut iterations = 0;
    let mut upper_bound = None;
    'outer: loop {
        let mut centred = false;
        let mut dec2 = f64::INFINITY;
        for _ in 0..100 {
            if iterations >= opts.max_iter {
                diagnostics.push(format!("iteration cap {} reached", opts.max_iter));
                break 'outer;
            }
            let Some(ev) = barrier.eval(&z, s) else {
                diagnostics.push("iterate left the barrier domain".into());
                break 'outer;
            };
            let rhs: Vec<f64> = ev.grad.iter().map(|g| -g).collect();
            let Some(d) = spd_solve(&ev.hess, &rhs) else {
                diagnostics.push("Newton system is not positive definite".into());
                break 'outer;
            };
            let slope: f64 = ev.grad.iter().zip(&d).map(|(g, d)| g * d).sum();
            dec2 = -slope;
            if dec2 <= 1e-10 {
                centred = true;
                break;
            }
            let mut alpha = if dec2.sqrt() > 0.25 { 1.0 / (1.0 + dec2.sqrt()) } else { 1.0 };
            let accepted = loop {
                let trial: Vec<f64> = z.iter().zip(&d).map(|(z, d)| z + alpha * d).collect();
                match barrier.value(&trial, s) {
                    Some(f) if f <= ev.f + 0.25 * alpha * slope => break Some(trial),
                    _ => {}
                }
                alpha *= 0.5;
                if alpha < 1e-14 {
                    break None;
                }
            };
            iterations += 1;
            match accepted {
                Some(trial) => z = trial,
                None => {
                    // Accept stagnation as centred when the decrement is already small.
                    centred = dec2 < 1e-6;
                    break;
                }
            }
        }
        let t = z[ny];
        if centred {
            let ub = t + (barrier.nu + (barrier.nu * dec2.max(0.0)).sqrt()) / s;
            upper_bound = Some(ub);
            if ub <= -opts.margin_min {
                break;
            }
            if opts.stop_at_margin.is_some_and(|m| t >= m.max(opts.margin_min)) {
                break;
            }
            if barrier.nu / s <= opts.gap_tol * t.abs().max(1.0) {
                break;
            }
        } else {
            upper_bound = None;
            diagnostics.push(format!("centring stalled at barrier weight {s:e}"));
            break;
        }
        s *= 10.0;
    }
    if upper_bound.is_some_and(|ub| ub <= -opts.margin_min) {
        diagnostics.push(format!("margin bound holds within the search box of radius {:e}", opts.box_radius));
    }
    classify(prob, to_x(&z), upper_bound, iterations, diagnostics, opts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lmi::VarLayout;

    fn scalar_pencil(a: f64, eta: f64) -> AffinePencil {
        // 2aw + 2ηw with variable w
        let layout = VarLayout::new().symmetric("W", 1);
        AffinePencil::from_parts(layout, SymMatrix::zeros(1), vec![SymMatrix::diag(&[2.0 * a + 2.0 * eta])])
            .unwrap()
    }

    #[test]
    fn scalar_stable_is_feasible() {
        let prob = FeasibilityProblem::standard(scalar_pencil(-1.0, 0.5));
        let res = solve(&prob, &SolveOptions::default()).unwrap();
        assert_eq!(res.status, Status::Feasible);
        // trace normalization pins w = 1
        assert!((res.witness[0] - 1.0).abs() < 1e-12);
        assert!((res.audit.margin - 1.0).abs() < 1e-9);
    }

    #[test]
    fn scalar_unstable_is_infeasible() {
        let mut prob = FeasibilityProblem::new(scalar_pencil(1.0, 0.5));
        prob.positivity.push(PositivityConstraint { group: "W".into(), epsilon: 1e-6 });
        let res = solve(&prob, &SolveOptions::default()).unwrap();
        assert_eq!(res.status, Status::Infeasible, "{res:?}");
        assert!(res.upper_bound.unwrap() < 0.0);
    }

    #[test]
    fn audit_of_constant_pencil() {
        let layout = VarLayout::new().symmetric("P", 1);
        let pencil =
            AffinePencil::from_parts(layout, SymMatrix::identity(2).scale(-1.0), vec![SymMatrix::zeros(2)]).unwrap();
        let report = audit(&FeasibilityProblem::new(pencil), &[0.0]).unwrap();
        assert_eq!(report.margin, 1.0);
    }

    #[test]
    fn classify_refuses_failing_witness() {
        let prob = FeasibilityProblem::standard(scalar_pencil(1.0, 0.5));
        let res = classify(&prob, vec![1.0], Some(10.0), 0, Vec::new(), &SolveOptions::default()).unwrap();
        assert_eq!(res.status, Status::Undetermined);
    }

    #[test]
    fn elimination_respects_equalities() {
        let eqs = vec![LinearEquality { coeffs: vec![(0, 1.0), (2, 1.0)], rhs: 3.0 }];
        let red = eliminate(3, &eqs).unwrap();
        assert_eq!(red.free, vec![1, 2]);
        let y = [5.0, -2.0];
        let x: Vec<f64> = (0..3).map(|i| red.off[i] + red.e[i][0] * y[0] + red.e[i][1] * y[1]).collect();
        assert_eq!(x, vec![5.0, 5.0, -2.0]);
        let bad = vec![
            LinearEquality { coeffs: vec![(0, 1.0)], rhs: 1.0 },
            LinearEquality { coeffs: vec![(0, 2.0)], rhs: 1.0 },
        ];
        assert!(eliminate(1, &bad).is_err());
    }

    #[test]
    fn rejects_unknown_groups() {
        let mut prob = FeasibilityProblem::new(scalar_pencil(-1.0, 0.5));
        prob.positivity.push(PositivityConstraint { group: "Q".into(), epsilon: 1e-6 });
        assert!(matches!(solve(&prob, &SolveOptions::default()), Err(Error::Structural(_))));
    }

    #[test]
    fn seeded_runs_are_reproducible() {
        let prob = FeasibilityProblem::standard(scalar_pencil(-1.0, 0.5));
        let opts = SolveOptions { seed: 7, ..SolveOptions::default() };
        let a = solve(&prob, &opts).unwrap();
        let b = solve(&prob, &opts).unwrap();
        assert_eq!(a.witness, b.witness);
    }
}
