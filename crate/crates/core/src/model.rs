//! Plant, controller gains, closed loop and the nonlinearity classes.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matlin::{self, Matrix, SymMatrix};

/// Relative threshold on σ_min/σ_max for the row-rank test on `C`.
pub const RANK_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TimeDomain {
    Continuous,
    Discrete,
}

impl fmt::Display for TimeDomain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TimeDomain::Continuous => "continuous",
            TimeDomain::Discrete => "discrete",
        })
    }
}

/// Open-loop plant `x⁺ (or ẋ) = Ax + B_Ψ Ψ(y) + Bu`, `y = Cx`.
#[derive(Debug, Clone, PartialEq)]
pub struct LureSystem {
    a: Matrix,
    b: Matrix,
    b_psi: Matrix,
    c: Matrix,
    domain: TimeDomain,
}

fn dim_err(what: &str, got: (usize, usize), want: (usize, usize)) -> Error {
    Error::Dimension(format!("{what} is {}x{}, expected {}x{}", got.0, got.1, want.0, want.1))
}

impl LureSystem {
    /// Validates shapes and requires `C` to have full row rank with `n_x ≥ n_y`.
    pub fn new(a: Matrix, b: Matrix, b_psi: Matrix, c: Matrix, domain: TimeDomain) -> Result<Self> {
        let nx = a.rows();
        if !a.is_square() {
            return Err(dim_err("A", a.shape(), (nx, nx)));
        }
        if b.rows() != nx {
            return Err(dim_err("B", b.shape(), (nx, b.cols())));
        }
        if b_psi.rows() != nx {
            return Err(dim_err("B_psi", b_psi.shape(), (nx, b_psi.cols())));
        }
        if c.cols() != nx {
            return Err(dim_err("C", c.shape(), (c.rows(), nx)));
        }
        let ny = c.rows();
        if ny > nx {
            return Err(Error::Precondition(format!("n_y = {ny} exceeds n_x = {nx}")));
        }
        let sv = matlin::singular_values(&c)?;
        let smax = sv.first().copied().unwrap_or(0.0);
        let smin = sv.last().copied().unwrap_or(0.0);
        if ny > 0 && (smax == 0.0 || smin <= RANK_TOL * smax) {
            return Err(Error::Precondition(format!(
                "C must have full row rank (sigma_min = {smin:e}, sigma_max = {smax:e})"
            )));
        }
        Ok(Self { a, b, b_psi, c, domain })
    }

    pub fn a(&self) -> &Matrix {
        &self.a
    }
    pub fn b(&self) -> &Matrix {
        &self.b
    }
    pub fn b_psi(&self) -> &Matrix {
        &self.b_psi
    }
    pub fn c(&self) -> &Matrix {
        &self.c
    }
    pub fn domain(&self) -> TimeDomain {
        self.domain
    }
    pub fn n_x(&self) -> usize {
        self.a.rows()
    }
    pub fn n_u(&self) -> usize {
        self.b.cols()
    }
    pub fn n_psi(&self) -> usize {
        self.b_psi.cols()
    }
    pub fn n_y(&self) -> usize {
        self.c.rows()
    }
}

/// Controller `u = Kx + K_Ψ Ψ(y)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Gains {
    pub k: Matrix,
    pub k_psi: Matrix,
}

impl Gains {
    pub fn new(k: Matrix, k_psi: Matrix) -> Self {
        Self { k, k_psi }
    }

    pub fn zero(sys: &LureSystem) -> Self {
        Self { k: Matrix::zeros(sys.n_u(), sys.n_x()), k_psi: Matrix::zeros(sys.n_u(), sys.n_psi()) }
    }

    pub fn check_against(&self, sys: &LureSystem) -> Result<()> {
        if self.k.shape() != (sys.n_u(), sys.n_x()) {
            return Err(dim_err("K", self.k.shape(), (sys.n_u(), sys.n_x())));
        }
        if self.k_psi.shape() != (sys.n_u(), sys.n_psi()) {
            return Err(dim_err("K_psi", self.k_psi.shape(), (sys.n_u(), sys.n_psi())));
        }
        Ok(())
    }
}

/// `x⁺ (or ẋ) = A_cl x + B_cl Ψ(Cx)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ClosedLoop {
    pub a_cl: Matrix,
    pub b_cl: Matrix,
    pub c: Matrix,
    pub domain: TimeDomain,
}

impl ClosedLoop {
    /// Direct construction, for loops not derived from a plant.
    pub fn new(a_cl: Matrix, b_cl: Matrix, c: Matrix, domain: TimeDomain) -> Result<Self> {
        let nx = a_cl.rows();
        if !a_cl.is_square() || b_cl.rows() != nx || c.cols() != nx {
            return Err(Error::Dimension("closed-loop matrices are inconsistent".into()));
        }
        Ok(Self { a_cl, b_cl, c, domain })
    }

    pub fn n_x(&self) -> usize {
        self.a_cl.rows()
    }
}

/// `A_cl = A + BK`, `B_cl = B_Ψ + BK_Ψ`.
pub fn close_loop(sys: &LureSystem, gains: &Gains) -> Result<ClosedLoop> {
    gains.check_against(sys)?;
    Ok(ClosedLoop {
        a_cl: &sys.a + &(&sys.b * &gains.k),
        b_cl: &sys.b_psi + &(&sys.b * &gains.k_psi),
        c: sys.c.clone(),
        domain: sys.domain,
    })
}

/// `K = Z W⁻¹`, with `K_Ψ` passed through.
pub fn recover_gains(w: &SymMatrix, z: &Matrix, k_psi: &Matrix) -> Result<Gains> {
    if z.cols() != w.dim() {
        return Err(dim_err("Z", z.shape(), (z.rows(), w.dim())));
    }
    // W symmetric: Kᵀ = W⁻¹ Zᵀ.
    let kt = matlin::solve(w.as_matrix(), &z.transpose())?;
    Ok(Gains { k: kt.transpose(), k_psi: k_psi.clone() })
}

fn require_spd(name: &str, m: &SymMatrix) -> Result<()> {
    if !matlin::is_pd(m, 0.0)?.holds {
        return Err(Error::Precondition(format!("{name} must be positive definite")));
    }
    Ok(())
}

/// `ΔΨᵀ Θ_Ψ ΔΨ ≤ ρ² Δyᵀ Θ_y Δy`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Lipschitz {
    rho: f64,
    theta_y: SymMatrix,
    theta_psi: SymMatrix,
}

impl Lipschitz {
    pub fn new(rho: f64, theta_y: SymMatrix, theta_psi: SymMatrix) -> Result<Self> {
        if !(rho > 0.0 && rho.is_finite()) {
            return Err(Error::Precondition(format!("Lipschitz constant must be positive, got {rho}")));
        }
        require_spd("theta_y", &theta_y)?;
        require_spd("theta_psi", &theta_psi)?;
        Ok(Self { rho, theta_y, theta_psi })
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }
    pub fn theta_y(&self) -> &SymMatrix {
        &self.theta_y
    }
    pub fn theta_psi(&self) -> &SymMatrix {
        &self.theta_psi
    }
}

/// Incremental sector `[0, Γ]` with weight Θ: `ΔΨᵀ Θ (ΔΨ − Γ Δy) ≤ 0`.
///
/// `Γ` maps outputs to nonlinearity space, so it is `n_Ψ × n_y`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SectorBound {
    gamma: Matrix,
    theta: SymMatrix,
}

impl SectorBound {
    pub fn new(gamma: Matrix, theta: SymMatrix) -> Result<Self> {
        if gamma.rows() != theta.dim() {
            return Err(Error::Dimension(format!(
                "gamma has {} rows but theta has dimension {}",
                gamma.rows(),
                theta.dim()
            )));
        }
        require_spd("theta", &theta)?;
        Ok(Self { gamma, theta })
    }

    pub fn gamma(&self) -> &Matrix {
        &self.gamma
    }
    pub fn theta(&self) -> &SymMatrix {
        &self.theta
    }
}

/// `0 ⪯ sym(∂Ψ/∂y) ⪯ Γ`, square nonlinearities only.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonotoneBound {
    gamma: SymMatrix,
}

impl MonotoneBound {
    pub fn new(gamma: SymMatrix) -> Result<Self> {
        require_spd("gamma", &gamma)?;
        Ok(Self { gamma })
    }

    pub fn gamma(&self) -> &SymMatrix {
        &self.gamma
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "variant", rename_all = "snake_case")]
pub enum NonlinearityClass {
    Lipschitz(Lipschitz),
    SectorBounded(SectorBound),
    Monotone(MonotoneBound),
}

impl NonlinearityClass {
    /// Checks the class parameters against `(n_y, n_Ψ)`.
    pub fn check_dims(&self, n_y: usize, n_psi: usize) -> Result<()> {
        let ok = match self {
            Self::Lipschitz(l) => l.theta_y.dim() == n_y && l.theta_psi.dim() == n_psi,
            Self::SectorBounded(s) => s.gamma.shape() == (n_psi, n_y),
            Self::Monotone(m) => n_y == n_psi && m.gamma.dim() == n_psi,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Dimension(format!(
                "{} class parameters do not fit n_y = {n_y}, n_psi = {n_psi}",
                self.name()
            )))
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Lipschitz(_) => "lipschitz",
            Self::SectorBounded(_) => "sector_bounded",
            Self::Monotone(_) => "monotone",
        }
    }
}

type EvalFn = dyn Fn(&[f64]) -> Vec<f64> + Send + Sync;
type JacFn = dyn Fn(&[f64]) -> Matrix + Send + Sync;

/// A concrete map `Ψ: ℝ^{n_y} → ℝ^{n_Ψ}`. Evaluators must be pure.
#[derive(Clone)]
pub struct NonlinearFn {
    name: String,
    n_y: usize,
    n_psi: usize,
    eval: Arc<EvalFn>,
    jacobian: Option<Arc<JacFn>>,
}

impl NonlinearFn {
    pub fn new(
        name: impl Into<String>,
        n_y: usize,
        n_psi: usize,
        eval: impl Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
    ) -> Self {
        Self { name: name.into(), n_y, n_psi, eval: Arc::new(eval), jacobian: None }
    }

    pub fn with_jacobian(mut self, jac: impl Fn(&[f64]) -> Matrix + Send + Sync + 'static) -> Self {
        self.jacobian = Some(Arc::new(jac));
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }
    pub fn rename(&mut self, name: impl Into<String>) {
        self.name = name.into();
    }
    pub fn n_y(&self) -> usize {
        self.n_y
    }
    pub fn n_psi(&self) -> usize {
        self.n_psi
    }
    pub fn has_jacobian(&self) -> bool {
        self.jacobian.is_some()
    }

    pub fn eval(&self, y: &[f64]) -> Result<Vec<f64>> {
        if y.len() != self.n_y {
            return Err(Error::Structural(format!(
                "{} expects {} inputs, got {}",
                self.name,
                self.n_y,
                y.len()
            )));
        }
        let out = (self.eval)(y);
        if out.len() != self.n_psi {
            return Err(Error::Structural(format!(
                "{} returned {} outputs, declared {}",
                self.name,
                out.len(),
                self.n_psi
            )));
        }
        Ok(out)
    }

    /// Analytic Jacobian when one was supplied.
    pub fn analytic_jacobian(&self, y: &[f64]) -> Option<Result<Matrix>> {
        let jac = self.jacobian.as_ref()?;
        Some(if y.len() != self.n_y {
            Err(Error::Structural(format!("{} expects {} inputs", self.name, self.n_y)))
        } else {
            let j = jac(y);
            if j.shape() != (self.n_psi, self.n_y) {
                Err(Error::Structural(format!("{} Jacobian has the wrong shape", self.name)))
            } else {
                Ok(j)
            }
        })
    }
}

impl fmt::Debug for NonlinearFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("NonlinearFn")
            .field("name", &self.name)
            .field("n_y", &self.n_y)
            .field("n_psi", &self.n_psi)
            .field("jacobian", &self.jacobian.is_some())
            .finish()
    }
}
