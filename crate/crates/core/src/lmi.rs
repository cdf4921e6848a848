//! Construction of the contraction LMIs as affine pencils.
//!
//! Every builder describes its block matrix once, as a function of the decision
//! variables and a multiplier `c` applied to every constant term. That function
//! is homogeneous linear in `(x, c)`, so probing it at `(0, 1)` and `(eᵢ, 0)`
//! recovers `F₀` and each `Fᵢ` exactly, with no cancellation.
//!
//! Analysis forms take the closed loop and have the certificate `P` as their
//! only variable. Synthesis forms take the plant and have variables `W`, `Z`
//! and (except for the conservative form) `K_psi`, with `W = P⁻¹` and
//! `Z = K W`.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matlin::{self, BlockSpec, Matrix, SymMatrix};
use crate::model::{
    close_loop, ClosedLoop, Gains, Lipschitz, LureSystem, MonotoneBound, NonlinearityClass, SectorBound,
    TimeDomain,
};

pub const VAR_P: &str = "P";
pub const VAR_W: &str = "W";
pub const VAR_Z: &str = "Z";
pub const VAR_K_PSI: &str = "K_psi";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum VarKind {
    /// Upper-triangle coordinates of an `n×n` symmetric matrix.
    Symmetric(usize),
    /// Row-major coordinates of an `r×c` matrix.
    Full(usize, usize),
}

impl VarKind {
    pub fn len(&self) -> usize {
        match *self {
            VarKind::Symmetric(n) => n * (n + 1) / 2,
            VarKind::Full(r, c) => r * c,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarGroup {
    pub name: String,
    pub kind: VarKind,
    pub offset: usize,
}

/// Maps named matrix variables onto a flat coordinate vector.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct VarLayout {
    groups: Vec<VarGroup>,
    len: usize,
}

impl VarLayout {
    pub fn new() -> Self {
        Self::default()
    }

    fn push(mut self, name: &str, kind: VarKind) -> Self {
        assert!(self.group(name).is_none(), "duplicate variable group {name}");
        self.groups.push(VarGroup { name: name.to_string(), kind, offset: self.len });
        self.len += kind.len();
        self
    }

    pub fn symmetric(self, name: &str, n: usize) -> Self {
        self.push(name, VarKind::Symmetric(n))
    }

    pub fn full(self, name: &str, rows: usize, cols: usize) -> Self {
        self.push(name, VarKind::Full(rows, cols))
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn groups(&self) -> &[VarGroup] {
        &self.groups
    }

    pub fn group(&self, name: &str) -> Option<&VarGroup> {
        self.groups.iter().find(|g| g.name == name)
    }

    fn require(&self, name: &str) -> Result<&VarGroup> {
        self.group(name).ok_or_else(|| Error::Structural(format!("no variable group named {name}")))
    }

    /// Group owning coordinate `i`.
    pub fn group_of(&self, i: usize) -> Option<&VarGroup> {
        self.groups.iter().find(|g| i >= g.offset && i < g.offset + g.kind.len())
    }

    /// Reads group `name` out of `x`.
    pub fn matrix(&self, x: &[f64], name: &str) -> Result<Matrix> {
        if x.len() != self.len {
            return Err(Error::Dimension(format!("{} coordinates for a layout of {}", x.len(), self.len)));
        }
        let g = self.require(name)?;
        let v = &x[g.offset..g.offset + g.kind.len()];
        Ok(match g.kind {
            VarKind::Symmetric(n) => {
                let mut m = Matrix::zeros(n, n);
                let mut k = 0;
                for i in 0..n {
                    for j in i..n {
                        m[(i, j)] = v[k];
                        m[(j, i)] = v[k];
                        k += 1;
                    }
                }
                m
            }
            VarKind::Full(r, c) => Matrix::from_row_slice(r, c, v).map_err(|_| Error::NonFinite("variables"))?,
        })
    }

    pub fn sym_matrix(&self, x: &[f64], name: &str) -> Result<SymMatrix> {
        SymMatrix::from_matrix(&self.matrix(x, name)?)
    }

    /// Writes `m` into the coordinates of group `name`.
    pub fn pack(&self, x: &mut [f64], name: &str, m: &Matrix) -> Result<()> {
        if x.len() != self.len {
            return Err(Error::Dimension(format!("{} coordinates for a layout of {}", x.len(), self.len)));
        }
        let g = self.require(name)?;
        let v = &mut x[g.offset..g.offset + g.kind.len()];
        match g.kind {
            VarKind::Symmetric(n) => {
                if m.shape() != (n, n) {
                    return Err(Error::Dimension(format!("{name} must be {n}x{n}")));
                }
                let s = SymMatrix::from_matrix(m)?;
                let mut k = 0;
                for i in 0..n {
                    for j in i..n {
                        v[k] = s[(i, j)];
                        k += 1;
                    }
                }
            }
            VarKind::Full(r, c) => {
                if m.shape() != (r, c) {
                    return Err(Error::Dimension(format!("{name} must be {r}x{c}")));
                }
                v.copy_from_slice(m.as_slice());
            }
        }
        Ok(())
    }

    /// Packs a full assignment; every group must be given exactly once.
    pub fn assign(&self, values: &[(&str, &Matrix)]) -> Result<Vec<f64>> {
        let mut x = vec![0.0; self.len];
        for g in &self.groups {
            let hits: Vec<_> = values.iter().filter(|(n, _)| *n == g.name).collect();
            match hits.as_slice() {
                [(_, m)] => self.pack(&mut x, &g.name, m)?,
                [] => return Err(Error::Structural(format!("no value given for {}", g.name))),
                _ => return Err(Error::Structural(format!("{} given more than once", g.name))),
            }
        }
        if let Some((n, _)) = values.iter().find(|(n, _)| self.group(n).is_none()) {
            return Err(Error::Structural(format!("unknown variable {n}")));
        }
        Ok(x)
    }
}

/// Variable values handed to a block builder. `c` multiplies constant terms.
struct Vars<'a> {
    layout: &'a VarLayout,
    x: &'a [f64],
    c: f64,
}

impl Vars<'_> {
    fn get(&self, name: &str) -> Matrix {
        self.layout.matrix(self.x, name).expect("builder asked for a variable it declared")
    }

    fn constant(&self, m: &Matrix) -> Matrix {
        m.scale(self.c)
    }
}

/// `F(x) = F₀ + Σ xᵢ Fᵢ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AffinePencil {
    dim: usize,
    f0: SymMatrix,
    basis: Vec<SymMatrix>,
    layout: VarLayout,
    /// Non-fatal remarks collected while building (e.g. degenerate inputs).
    pub notes: Vec<String>,
}

impl AffinePencil {
    fn from_builder(layout: VarLayout, dim: usize, build: impl Fn(&Vars) -> Result<Matrix>) -> Result<Self> {
        let probe = |x: &[f64], c: f64| -> Result<SymMatrix> {
            let m = build(&Vars { layout: &layout, x, c })?;
            if m.shape() != (dim, dim) {
                return Err(Error::Dimension(format!("builder produced {}x{}, expected {dim}", m.rows(), m.cols())));
            }
            SymMatrix::from_matrix(&m)
        };
        let mut e = vec![0.0; layout.len()];
        let f0 = probe(&e, 1.0)?;
        let mut basis = Vec::with_capacity(layout.len());
        for i in 0..layout.len() {
            e[i] = 1.0;
            basis.push(probe(&e, 0.0)?);
            e[i] = 0.0;
        }
        Ok(Self { dim, f0, basis, layout, notes: Vec::new() })
    }

    /// Assembles a pencil from explicit parts.
    pub fn from_parts(layout: VarLayout, f0: SymMatrix, basis: Vec<SymMatrix>) -> Result<Self> {
        let dim = f0.dim();
        if basis.len() != layout.len() {
            return Err(Error::Structural(format!(
                "{} basis matrices for {} coordinates",
                basis.len(),
                layout.len()
            )));
        }
        if basis.iter().any(|b| b.dim() != dim) {
            return Err(Error::Dimension("basis matrices differ in dimension".into()));
        }
        Ok(Self { dim, f0, basis, layout, notes: Vec::new() })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
    pub fn f0(&self) -> &SymMatrix {
        &self.f0
    }
    pub fn basis(&self) -> &[SymMatrix] {
        &self.basis
    }
    pub fn layout(&self) -> &VarLayout {
        &self.layout
    }

    /// True when `F₀ = 0`, i.e. the feasible set is a cone.
    pub fn is_homogeneous(&self) -> bool {
        self.f0.as_matrix().is_zero()
    }

    pub fn evaluate(&self, x: &[f64]) -> Result<SymMatrix> {
        if x.len() != self.basis.len() {
            return Err(Error::Dimension(format!(
                "{} coordinates supplied, pencil has {}",
                x.len(),
                self.basis.len()
            )));
        }
        let mut m = self.f0.as_matrix().clone();
        for (xi, fi) in x.iter().zip(&self.basis) {
            if *xi != 0.0 {
                m = &m + &fi.as_matrix().scale(*xi);
            }
        }
        SymMatrix::from_matrix(&m)
    }

    /// Evaluates at named matrix values.
    pub fn evaluate_at(&self, values: &[(&str, &Matrix)]) -> Result<SymMatrix> {
        self.evaluate(&self.layout.assign(values)?)
    }
}

/// Which inequality a pencil encodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LmiTag {
    CtLipAnalysis,
    CtLipSynthesis,
    DtLipAnalysis,
    DtLipSynthesis,
    CtSecAnalysis,
    CtSecSynthesis,
    DtSecAnalysis,
    DtSecSynthesis,
    CtLipConservative,
}

impl LmiTag {
    pub const ALL: [LmiTag; 9] = [
        LmiTag::CtLipAnalysis,
        LmiTag::CtLipSynthesis,
        LmiTag::DtLipAnalysis,
        LmiTag::DtLipSynthesis,
        LmiTag::CtSecAnalysis,
        LmiTag::CtSecSynthesis,
        LmiTag::DtSecAnalysis,
        LmiTag::DtSecSynthesis,
        LmiTag::CtLipConservative,
    ];

    pub fn domain(self) -> TimeDomain {
        match self {
            LmiTag::DtLipAnalysis | LmiTag::DtLipSynthesis | LmiTag::DtSecAnalysis | LmiTag::DtSecSynthesis => {
                TimeDomain::Discrete
            }
            _ => TimeDomain::Continuous,
        }
    }

    pub fn is_analysis(self) -> bool {
        matches!(
            self,
            LmiTag::CtLipAnalysis | LmiTag::DtLipAnalysis | LmiTag::CtSecAnalysis | LmiTag::DtSecAnalysis
        )
    }

    pub fn is_lipschitz(self) -> bool {
        matches!(
            self,
            LmiTag::CtLipAnalysis
                | LmiTag::CtLipSynthesis
                | LmiTag::DtLipAnalysis
                | LmiTag::DtLipSynthesis
                | LmiTag::CtLipConservative
        )
    }

    /// Default analysis tag for a domain and class.
    pub fn analysis_for(domain: TimeDomain, class: &NonlinearityClass) -> LmiTag {
        match (domain, class) {
            (TimeDomain::Continuous, NonlinearityClass::Lipschitz(_)) => LmiTag::CtLipAnalysis,
            (TimeDomain::Discrete, NonlinearityClass::Lipschitz(_)) => LmiTag::DtLipAnalysis,
            (TimeDomain::Continuous, _) => LmiTag::CtSecAnalysis,
            (TimeDomain::Discrete, _) => LmiTag::DtSecAnalysis,
        }
    }

    /// Default synthesis tag for a domain and class.
    pub fn synthesis_for(domain: TimeDomain, class: &NonlinearityClass) -> LmiTag {
        match (domain, class) {
            (TimeDomain::Continuous, NonlinearityClass::Lipschitz(_)) => LmiTag::CtLipSynthesis,
            (TimeDomain::Discrete, NonlinearityClass::Lipschitz(_)) => LmiTag::DtLipSynthesis,
            (TimeDomain::Continuous, _) => LmiTag::CtSecSynthesis,
            (TimeDomain::Discrete, _) => LmiTag::DtSecSynthesis,
        }
    }

    /// Analysis form matching a synthesis form (the conservative form maps to
    /// the continuous Lipschitz analysis).
    pub fn analysis_counterpart(self) -> LmiTag {
        match self {
            LmiTag::CtLipSynthesis | LmiTag::CtLipConservative => LmiTag::CtLipAnalysis,
            LmiTag::DtLipSynthesis => LmiTag::DtLipAnalysis,
            LmiTag::CtSecSynthesis => LmiTag::CtSecAnalysis,
            LmiTag::DtSecSynthesis => LmiTag::DtSecAnalysis,
            other => other,
        }
    }
}

impl fmt::Display for LmiTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LmiTag::CtLipAnalysis => "ct-lip-analysis",
            LmiTag::CtLipSynthesis => "ct-lip-synthesis",
            LmiTag::DtLipAnalysis => "dt-lip-analysis",
            LmiTag::DtLipSynthesis => "dt-lip-synthesis",
            LmiTag::CtSecAnalysis => "ct-sec-analysis",
            LmiTag::CtSecSynthesis => "ct-sec-synthesis",
            LmiTag::DtSecAnalysis => "dt-sec-analysis",
            LmiTag::DtSecSynthesis => "dt-sec-synthesis",
            LmiTag::CtLipConservative => "ct-lip-conservative",
        })
    }
}

/// A validated request to build one inequality.
#[derive(Debug, Clone)]
pub struct LmiSpec {
    tag: LmiTag,
    system: LureSystem,
    class: NonlinearityClass,
    eta: f64,
}

impl LmiSpec {
    /// Checks tag/domain/class consistency and the rate range. Monotone classes
    /// are lowered to their sector form here.
    pub fn new(tag: LmiTag, system: LureSystem, class: NonlinearityClass, eta: f64) -> Result<Self> {
        if system.domain() != tag.domain() {
            return Err(Error::Precondition(format!("{tag} needs a {} system", tag.domain())));
        }
        check_eta(tag.domain(), eta)?;
        class.check_dims(system.n_y(), system.n_psi())?;
        let class = match class {
            NonlinearityClass::Monotone(m) => NonlinearityClass::SectorBounded(lower_monotone(&m)?),
            other => other,
        };
        match (&class, tag.is_lipschitz()) {
            (NonlinearityClass::Lipschitz(_), true) | (NonlinearityClass::SectorBounded(_), false) => {}
            _ => {
                return Err(Error::Precondition(format!(
                    "{tag} does not apply to a {} nonlinearity",
                    class.name()
                )))
            }
        }
        Ok(Self { tag, system, class, eta })
    }

    pub fn tag(&self) -> LmiTag {
        self.tag
    }
    pub fn system(&self) -> &LureSystem {
        &self.system
    }
    pub fn class(&self) -> &NonlinearityClass {
        &self.class
    }
    pub fn eta(&self) -> f64 {
        self.eta
    }

    /// Builds the pencil; analysis tags need the fixed gains.
    pub fn build(&self, gains: Option<&Gains>) -> Result<AffinePencil> {
        let eta = self.eta;
        if self.tag.is_analysis() {
            let gains = gains.ok_or_else(|| Error::Precondition(format!("{} needs controller gains", self.tag)))?;
            let cl = close_loop(&self.system, gains)?;
            return match (&self.class, self.tag) {
                (NonlinearityClass::Lipschitz(l), LmiTag::CtLipAnalysis) => build_ct_lip_analysis(&cl, l, eta),
                (NonlinearityClass::Lipschitz(l), LmiTag::DtLipAnalysis) => build_dt_lip_analysis(&cl, l, eta),
                (NonlinearityClass::SectorBounded(s), LmiTag::CtSecAnalysis) => {
                    build_ct_sector_analysis(&cl, s, eta)
                }
                (NonlinearityClass::SectorBounded(s), LmiTag::DtSecAnalysis) => {
                    build_dt_sector_analysis(&cl, s, eta)
                }
                _ => unreachable!("class/tag consistency checked at construction"),
            };
        }
        let sys = &self.system;
        match (&self.class, self.tag) {
            (NonlinearityClass::Lipschitz(l), LmiTag::CtLipSynthesis) => build_ct_lip_synthesis(sys, l, eta),
            (NonlinearityClass::Lipschitz(l), LmiTag::DtLipSynthesis) => build_dt_lip_synthesis(sys, l, eta),
            (NonlinearityClass::Lipschitz(l), LmiTag::CtLipConservative) => build_ct_lip_conservative(sys, l, eta),
            (NonlinearityClass::SectorBounded(s), LmiTag::CtSecSynthesis) => build_ct_sector_synthesis(sys, s, eta),
            (NonlinearityClass::SectorBounded(s), LmiTag::DtSecSynthesis) => build_dt_sector_synthesis(sys, s, eta),
            _ => unreachable!("class/tag consistency checked at construction"),
        }
    }
}

fn check_eta(domain: TimeDomain, eta: f64) -> Result<()> {
    match domain {
        TimeDomain::Continuous if !(eta > 0.0 && eta.is_finite()) => {
            Err(Error::Precondition(format!("continuous-time rate must be positive, got {eta}")))
        }
        TimeDomain::Discrete if !(eta > 0.0 && eta < 1.0) => {
            Err(Error::Precondition(format!("discrete-time factor must lie in (0, 1), got {eta}")))
        }
        _ => Ok(()),
    }
}

fn require_domain(actual: TimeDomain, wanted: TimeDomain) -> Result<()> {
    if actual != wanted {
        return Err(Error::Precondition(format!("expected a {wanted} system, got {actual}")));
    }
    Ok(())
}

fn check_loop_dims(cl: &ClosedLoop, class: &NonlinearityClass) -> Result<()> {
    class.check_dims(cl.c.rows(), cl.b_cl.cols())
}

fn require_nonzero_coupling(cl: &ClosedLoop) -> Result<()> {
    if cl.b_cl.is_zero() {
        return Err(Error::Precondition(
            "B_cl = 0: the multiplier in the Lipschitz constraint cannot be normalized".into(),
        ));
    }
    Ok(())
}

fn sym_block(sizes: Vec<usize>, blocks: Vec<(usize, usize, Matrix)>) -> Result<Matrix> {
    let mut spec = BlockSpec::square(sizes);
    for (i, j, m) in blocks {
        spec.set_sym(i, j, m);
    }
    matlin::assemble(&spec)
}

/// `G = Cᵀ Γᵀ Θ`.
pub fn sector_coupling(c: &Matrix, s: &SectorBound) -> Matrix {
    &(&c.transpose() * &s.gamma().transpose()) * s.theta().as_matrix()
}

/// `[[⟨P A_cl⟩ + 2ηP + ρ² Cᵀ Θ_y C, P B_cl], [•, −Θ_Ψ]] ⪯ 0`.
pub fn build_ct_lip_analysis(cl: &ClosedLoop, nc: &Lipschitz, eta: f64) -> Result<AffinePencil> {
    require_domain(cl.domain, TimeDomain::Continuous)?;
    check_eta(TimeDomain::Continuous, eta)?;
    check_loop_dims(cl, &NonlinearityClass::Lipschitz(nc.clone()))?;
    require_nonzero_coupling(cl)?;
    let (nx, npsi) = (cl.n_x(), cl.b_cl.cols());
    let output_weight = (&(&cl.c.transpose() * nc.theta_y().as_matrix()) * &cl.c).scale(nc.rho().powi(2));
    let layout = VarLayout::new().symmetric(VAR_P, nx);
    AffinePencil::from_builder(layout, nx + npsi, |v| {
        let p = v.get(VAR_P);
        let pa = &p * &cl.a_cl;
        let b11 = &(&(&pa + &pa.transpose()) + &p.scale(2.0 * eta)) + &v.constant(&output_weight);
        sym_block(
            vec![nx, npsi],
            vec![(0, 0, b11), (0, 1, &p * &cl.b_cl), (1, 1, -&v.constant(nc.theta_psi().as_matrix()))],
        )
    })
}

/// Three-block form in `(W, Z, K_psi)`:
/// `[[⟨AW + BZ⟩ + 2ηW, B_cl, WCᵀ], [•, −Θ_Ψ, 0], [•, 0, −ρ⁻² Θ_y⁻¹]] ⪯ 0`.
pub fn build_ct_lip_synthesis(sys: &LureSystem, nc: &Lipschitz, eta: f64) -> Result<AffinePencil> {
    require_domain(sys.domain(), TimeDomain::Continuous)?;
    check_eta(TimeDomain::Continuous, eta)?;
    NonlinearityClass::Lipschitz(nc.clone()).check_dims(sys.n_y(), sys.n_psi())?;
    let (nx, nu, npsi, ny) = (sys.n_x(), sys.n_u(), sys.n_psi(), sys.n_y());
    let inv_out = matlin::inverse(nc.theta_y().as_matrix())?.scale(1.0 / nc.rho().powi(2));
    let layout = VarLayout::new().symmetric(VAR_W, nx).full(VAR_Z, nu, nx).full(VAR_K_PSI, nu, npsi);
    let mut pencil = AffinePencil::from_builder(layout, nx + npsi + ny, |v| {
        let w = v.get(VAR_W);
        let awbz = &(sys.a() * &w) + &(sys.b() * &v.get(VAR_Z));
        let b11 = &(&awbz + &awbz.transpose()) + &w.scale(2.0 * eta);
        let b_cl = &v.constant(sys.b_psi()) + &(sys.b() * &v.get(VAR_K_PSI));
        sym_block(
            vec![nx, npsi, ny],
            vec![
                (0, 0, b11),
                (0, 1, b_cl),
                (0, 2, &w * &sys.c().transpose()),
                (1, 1, -&v.constant(nc.theta_psi().as_matrix())),
                (2, 2, -&v.constant(&inv_out)),
            ],
        )
    })?;
    note_zero_coupling(sys, &mut pencil);
    Ok(pencil)
}

fn note_zero_coupling(sys: &LureSystem, pencil: &mut AffinePencil) {
    if sys.b_psi().is_zero() {
        pencil
            .notes
            .push("B_psi = 0: a solution with K_psi = 0 gives B_cl = 0, outside the necessity argument".into());
    }
}

/// `[[A_clᵀPA_cl − η²P + ρ²CᵀΘ_yC, A_clᵀPB_cl], [•, B_clᵀPB_cl − Θ_Ψ]] ⪯ 0`.
pub fn build_dt_lip_analysis(cl: &ClosedLoop, nc: &Lipschitz, eta: f64) -> Result<AffinePencil> {
    require_domain(cl.domain, TimeDomain::Discrete)?;
    check_eta(TimeDomain::Discrete, eta)?;
    check_loop_dims(cl, &NonlinearityClass::Lipschitz(nc.clone()))?;
    require_nonzero_coupling(cl)?;
    let (nx, npsi) = (cl.n_x(), cl.b_cl.cols());
    let output_weight = (&(&cl.c.transpose() * nc.theta_y().as_matrix()) * &cl.c).scale(nc.rho().powi(2));
    let at = cl.a_cl.transpose();
    let bt = cl.b_cl.transpose();
    let layout = VarLayout::new().symmetric(VAR_P, nx);
    AffinePencil::from_builder(layout, nx + npsi, |v| {
        let p = v.get(VAR_P);
        let b11 = &(&(&(&at * &p) * &cl.a_cl) - &p.scale(eta * eta)) + &v.constant(&output_weight);
        let b12 = &(&at * &p) * &cl.b_cl;
        let b22 = &(&(&bt * &p) * &cl.b_cl) - &v.constant(nc.theta_psi().as_matrix());
        sym_block(vec![nx, npsi], vec![(0, 0, b11), (0, 1, b12), (1, 1, b22)])
    })
}

/// Four-block form, block order `(n_x, n_Ψ, n_y, n_x)`:
/// `[[−η²W, 0, WCᵀ, (AW+BZ)ᵀ], [•, −Θ_Ψ, 0, B_clᵀ], [•, •, −ρ⁻²Θ_y⁻¹, 0], [•, •, •, −W]] ⪯ 0`.
pub fn build_dt_lip_synthesis(sys: &LureSystem, nc: &Lipschitz, eta: f64) -> Result<AffinePencil> {
    require_domain(sys.domain(), TimeDomain::Discrete)?;
    check_eta(TimeDomain::Discrete, eta)?;
    NonlinearityClass::Lipschitz(nc.clone()).check_dims(sys.n_y(), sys.n_psi())?;
    let (nx, nu, npsi, ny) = (sys.n_x(), sys.n_u(), sys.n_psi(), sys.n_y());
    let inv_out = matlin::inverse(nc.theta_y().as_matrix())?.scale(1.0 / nc.rho().powi(2));
    let layout = VarLayout::new().symmetric(VAR_W, nx).full(VAR_Z, nu, nx).full(VAR_K_PSI, nu, npsi);
    let mut pencil = AffinePencil::from_builder(layout, 2 * nx + npsi + ny, |v| {
        let w = v.get(VAR_W);
        let awbz = &(sys.a() * &w) + &(sys.b() * &v.get(VAR_Z));
        let b_cl = &v.constant(sys.b_psi()) + &(sys.b() * &v.get(VAR_K_PSI));
        sym_block(
            vec![nx, npsi, ny, nx],
            vec![
                (0, 0, w.scale(-eta * eta)),
                (0, 2, &w * &sys.c().transpose()),
                (0, 3, awbz.transpose()),
                (1, 1, -&v.constant(nc.theta_psi().as_matrix())),
                (1, 3, b_cl.transpose()),
                (2, 2, -&v.constant(&inv_out)),
                (3, 3, -&w),
            ],
        )
    })?;
    note_zero_coupling(sys, &mut pencil);
    Ok(pencil)
}

/// `[[⟨PA_cl⟩ + 2ηP, PB_cl + G], [•, −2Θ]] ⪯ 0` with `G = CᵀΓᵀΘ`.
pub fn build_ct_sector_analysis(cl: &ClosedLoop, nc: &SectorBound, eta: f64) -> Result<AffinePencil> {
    require_domain(cl.domain, TimeDomain::Continuous)?;
    check_eta(TimeDomain::Continuous, eta)?;
    check_loop_dims(cl, &NonlinearityClass::SectorBounded(nc.clone()))?;
    let (nx, npsi) = (cl.n_x(), cl.b_cl.cols());
    let g = sector_coupling(&cl.c, nc);
    let layout = VarLayout::new().symmetric(VAR_P, nx);
    AffinePencil::from_builder(layout, nx + npsi, |v| {
        let p = v.get(VAR_P);
        let pa = &p * &cl.a_cl;
        let b11 = &(&pa + &pa.transpose()) + &p.scale(2.0 * eta);
        let b12 = &(&p * &cl.b_cl) + &v.constant(&g);
        sym_block(
            vec![nx, npsi],
            vec![(0, 0, b11), (0, 1, b12), (1, 1, v.constant(nc.theta().as_matrix()).scale(-2.0))],
        )
    })
}

/// `[[⟨AW + BZ⟩ + 2ηW, B_cl + WG], [•, −2Θ]] ⪯ 0`.
pub fn build_ct_sector_synthesis(sys: &LureSystem, nc: &SectorBound, eta: f64) -> Result<AffinePencil> {
    require_domain(sys.domain(), TimeDomain::Continuous)?;
    check_eta(TimeDomain::Continuous, eta)?;
    NonlinearityClass::SectorBounded(nc.clone()).check_dims(sys.n_y(), sys.n_psi())?;
    let (nx, nu, npsi) = (sys.n_x(), sys.n_u(), sys.n_psi());
    let g = sector_coupling(sys.c(), nc);
    let layout = VarLayout::new().symmetric(VAR_W, nx).full(VAR_Z, nu, nx).full(VAR_K_PSI, nu, npsi);
    AffinePencil::from_builder(layout, nx + npsi, |v| {
        let w = v.get(VAR_W);
        let awbz = &(sys.a() * &w) + &(sys.b() * &v.get(VAR_Z));
        let b11 = &(&awbz + &awbz.transpose()) + &w.scale(2.0 * eta);
        let b_cl = &v.constant(sys.b_psi()) + &(sys.b() * &v.get(VAR_K_PSI));
        sym_block(
            vec![nx, npsi],
            vec![(0, 0, b11), (0, 1, &b_cl + &(&w * &g)), (1, 1, v.constant(nc.theta().as_matrix()).scale(-2.0))],
        )
    })
}

/// `[[A_clᵀPA_cl − η²P, A_clᵀPB_cl + G], [•, B_clᵀPB_cl − 2Θ]] ⪯ 0`.
pub fn build_dt_sector_analysis(cl: &ClosedLoop, nc: &SectorBound, eta: f64) -> Result<AffinePencil> {
    require_domain(cl.domain, TimeDomain::Discrete)?;
    check_eta(TimeDomain::Discrete, eta)?;
    check_loop_dims(cl, &NonlinearityClass::SectorBounded(nc.clone()))?;
    let (nx, npsi) = (cl.n_x(), cl.b_cl.cols());
    let g = sector_coupling(&cl.c, nc);
    let at = cl.a_cl.transpose();
    let bt = cl.b_cl.transpose();
    let layout = VarLayout::new().symmetric(VAR_P, nx);
    AffinePencil::from_builder(layout, nx + npsi, |v| {
        let p = v.get(VAR_P);
        let b11 = &(&(&at * &p) * &cl.a_cl) - &p.scale(eta * eta);
        let b12 = &(&(&at * &p) * &cl.b_cl) + &v.constant(&g);
        let b22 = &(&(&bt * &p) * &cl.b_cl) - &v.constant(nc.theta().as_matrix()).scale(2.0);
        sym_block(vec![nx, npsi], vec![(0, 0, b11), (0, 1, b12), (1, 1, b22)])
    })
}

/// Three-block form, block order `(n_x, n_Ψ, n_x)`:
/// `[[−η²W, WG, (AW+BZ)ᵀ], [•, −2Θ, B_clᵀ], [•, •, −W]] ⪯ 0`.
pub fn build_dt_sector_synthesis(sys: &LureSystem, nc: &SectorBound, eta: f64) -> Result<AffinePencil> {
    require_domain(sys.domain(), TimeDomain::Discrete)?;
    check_eta(TimeDomain::Discrete, eta)?;
    NonlinearityClass::SectorBounded(nc.clone()).check_dims(sys.n_y(), sys.n_psi())?;
    let (nx, nu, npsi) = (sys.n_x(), sys.n_u(), sys.n_psi());
    let g = sector_coupling(sys.c(), nc);
    let layout = VarLayout::new().symmetric(VAR_W, nx).full(VAR_Z, nu, nx).full(VAR_K_PSI, nu, npsi);
    AffinePencil::from_builder(layout, 2 * nx + npsi, |v| {
        let w = v.get(VAR_W);
        let awbz = &(sys.a() * &w) + &(sys.b() * &v.get(VAR_Z));
        let b_cl = &v.constant(sys.b_psi()) + &(sys.b() * &v.get(VAR_K_PSI));
        sym_block(
            vec![nx, npsi, nx],
            vec![
                (0, 0, w.scale(-eta * eta)),
                (0, 1, &w * &g),
                (0, 2, awbz.transpose()),
                (1, 1, v.constant(nc.theta().as_matrix()).scale(-2.0)),
                (1, 2, b_cl.transpose()),
                (2, 2, -&w),
            ],
        )
    })
}

/// Single-block `⟨AW + BZ⟩ + 2(η + ρ)W ⪯ 0` in `(W, Z)`.
///
/// Only defined for square nonlinearities with `B_Ψ = C = Θ_y = Θ_Ψ = I` and
/// `K_Ψ = 0`.
pub fn build_ct_lip_conservative(sys: &LureSystem, nc: &Lipschitz, eta: f64) -> Result<AffinePencil> {
    require_domain(sys.domain(), TimeDomain::Continuous)?;
    check_eta(TimeDomain::Continuous, eta)?;
    let nx = sys.n_x();
    let eye = Matrix::identity(nx);
    let setting = sys.n_y() == nx
        && sys.n_psi() == nx
        && sys.b_psi() == &eye
        && sys.c() == &eye
        && nc.theta_y().as_matrix() == &eye
        && nc.theta_psi().as_matrix() == &eye;
    if !setting {
        return Err(Error::Precondition(
            "conservative form requires n_x = n_y = n_psi and B_psi = C = theta_y = theta_psi = I".into(),
        ));
    }
    let nu = sys.n_u();
    let rate = 2.0 * (eta + nc.rho());
    let layout = VarLayout::new().symmetric(VAR_W, nx).full(VAR_Z, nu, nx);
    AffinePencil::from_builder(layout, nx, |v| {
        let w = v.get(VAR_W);
        let awbz = &(sys.a() * &w) + &(sys.b() * &v.get(VAR_Z));
        Ok(&(&awbz + &awbz.transpose()) + &w.scale(rate))
    })
}

/// A monotone bound `Γ` is the sector `[0, Γ]` with weight `Γ⁻¹`.
pub fn lower_monotone(m: &MonotoneBound) -> Result<SectorBound> {
    let theta = SymMatrix::from_matrix(&matlin::inverse(m.gamma().as_matrix())?)?;
    SectorBound::new(m.gamma().as_matrix().clone(), theta)
}
