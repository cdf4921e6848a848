//! Problem file schema and its conversion into core types.

use std::fmt;
use std::path::Path;

use lure_contract::model::{Gains, Lipschitz, LureSystem, MonotoneBound, NonlinearityClass, SectorBound, TimeDomain};
use lure_contract::{library, Matrix, NonlinearFn, SymMatrix};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const SCHEMA_VERSION: u32 = 1;

pub type Rows = Vec<Vec<f64>>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemFile {
    pub schema_version: u32,
    pub system: SystemSection,
    pub nonlinearity: NonlinearitySection,
    pub eta: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gains: Option<GainsSection>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub builtin_psi: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub solver: Option<SolverSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub simulation: Option<SimulationSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub certificate: Option<CertificateSection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemSection {
    #[serde(rename = "A")]
    pub a: Rows,
    #[serde(rename = "B")]
    pub b: Rows,
    #[serde(rename = "B_psi")]
    pub b_psi: Rows,
    #[serde(rename = "C")]
    pub c: Rows,
    pub domain: TimeDomain,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case", deny_unknown_fields)]
pub enum NonlinearitySection {
    Lipschitz { rho: f64, theta_y: Rows, theta_psi: Rows },
    SectorBounded { gamma: Rows, theta: Rows },
    Monotone { gamma: Rows },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GainsSection {
    #[serde(rename = "K")]
    pub k: Rows,
    #[serde(rename = "K_psi")]
    pub k_psi: Rows,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    pub margin_min: Option<f64>,
    pub max_iter: Option<usize>,
    pub box_radius: Option<f64>,
    pub seed: Option<u64>,
    /// `none` maximizes the margin; a number stops at the first centred
    /// iterate reaching it.
    pub stop_at_margin: Option<StopRule>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum StopRule {
    Margin(f64),
    Keyword(StopKeyword),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StopKeyword {
    None,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationSection {
    pub steps: Option<usize>,
    pub t_end: Option<f64>,
    pub dt: Option<f64>,
    #[serde(default)]
    pub pairs: Vec<(Vec<f64>, Vec<f64>)>,
    pub random_pairs: Option<usize>,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CertificateSection {
    #[serde(rename = "P")]
    pub p: Rows,
}

/// Anything that makes the input unusable; always exit code 1.
#[derive(Debug, Clone, PartialEq)]
pub struct InputError(pub String);

impl fmt::Display for InputError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for InputError {}

impl From<lure_contract::Error> for InputError {
    fn from(e: lure_contract::Error) -> Self {
        InputError(e.to_string())
    }
}

/// A schema-checked problem with its core objects already built.
#[derive(Debug, Clone)]
pub struct Loaded {
    pub file: ProblemFile,
    pub digest: String,
    pub system: LureSystem,
    pub class: NonlinearityClass,
    pub gains: Option<Gains>,
    pub certificate: Option<SymMatrix>,
}

pub fn digest(bytes: &[u8]) -> String {
    format!("sha256:{}", hex::encode(Sha256::digest(bytes)))
}

pub fn load(path: &Path) -> Result<Loaded, InputError> {
    let bytes = std::fs::read(path).map_err(|e| InputError(format!("cannot read {}: {e}", path.display())))?;
    parse(&bytes)
}

pub fn parse(bytes: &[u8]) -> Result<Loaded, InputError> {
    let de = &mut serde_json::Deserializer::from_slice(bytes);
    let file: ProblemFile = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        InputError(format!("schema error at `{path}`: {}", e.into_inner()))
    })?;
    build(file, digest(bytes))
}

fn matrix(rows: &Rows, field: &str) -> Result<Matrix, InputError> {
    Matrix::from_rows(rows).map_err(|e| InputError(format!("{field}: {e}")))
}

fn sym(rows: &Rows, field: &str) -> Result<SymMatrix, InputError> {
    SymMatrix::from_rows(rows).map_err(|e| InputError(format!("{field}: {e}")))
}

pub fn build(file: ProblemFile, digest: String) -> Result<Loaded, InputError> {
    if file.schema_version != SCHEMA_VERSION {
        return Err(InputError(format!(
            "schema_version: expected {SCHEMA_VERSION}, found {}",
            file.schema_version
        )));
    }
    let s = &file.system;
    let system = LureSystem::new(
        matrix(&s.a, "system.A")?,
        matrix(&s.b, "system.B")?,
        matrix(&s.b_psi, "system.B_psi")?,
        matrix(&s.c, "system.C")?,
        s.domain,
    )
    .map_err(|e| InputError(format!("system: {e}")))?;
    let class = match &file.nonlinearity {
        NonlinearitySection::Lipschitz { rho, theta_y, theta_psi } => NonlinearityClass::Lipschitz(Lipschitz::new(
            *rho,
            sym(theta_y, "nonlinearity.theta_y")?,
            sym(theta_psi, "nonlinearity.theta_psi")?,
        )?),
        NonlinearitySection::SectorBounded { gamma, theta } => NonlinearityClass::SectorBounded(SectorBound::new(
            matrix(gamma, "nonlinearity.gamma")?,
            sym(theta, "nonlinearity.theta")?,
        )?),
        NonlinearitySection::Monotone { gamma } => {
            NonlinearityClass::Monotone(MonotoneBound::new(sym(gamma, "nonlinearity.gamma")?)?)
        }
    };
    class.check_dims(system.n_y(), system.n_psi()).map_err(|e| InputError(format!("nonlinearity: {e}")))?;
    let eta_ok = match system.domain() {
        TimeDomain::Continuous => file.eta > 0.0 && file.eta.is_finite(),
        TimeDomain::Discrete => file.eta > 0.0 && file.eta < 1.0,
    };
    if !eta_ok {
        let range = match system.domain() {
            TimeDomain::Continuous => "eta > 0",
            TimeDomain::Discrete => "0 < eta < 1",
        };
        return Err(InputError(format!("eta: {} violates {range}", file.eta)));
    }
    let gains = match &file.gains {
        Some(g) => {
            let gains = Gains::new(matrix(&g.k, "gains.K")?, matrix(&g.k_psi, "gains.K_psi")?);
            gains.check_against(&system).map_err(|e| InputError(format!("gains: {e}")))?;
            Some(gains)
        }
        None => None,
    };
    let certificate = match &file.certificate {
        Some(c) => {
            let p = sym(&c.p, "certificate.P")?;
            if p.dim() != system.n_x() {
                return Err(InputError(format!("certificate.P: expected {0}x{0}", system.n_x())));
            }
            Some(p)
        }
        None => None,
    };
    for name in &file.builtin_psi {
        if !library::BUILTIN_NAMES.contains(&name.as_str()) {
            return Err(InputError(format!(
                "builtin_psi: unknown nonlinearity `{name}` (known: {})",
                library::BUILTIN_NAMES.join(", ")
            )));
        }
    }
    Ok(Loaded { file, digest, system, class, gains, certificate })
}

impl Loaded {
    pub fn builtin_psis(&self) -> Result<Vec<NonlinearFn>, InputError> {
        self.file
            .builtin_psi
            .iter()
            .map(|n| Ok(library::by_name(n, self.system.n_y(), self.system.n_psi())?))
            .collect()
    }

    pub fn solver(&self) -> SolverSection {
        self.file.solver.clone().unwrap_or_default()
    }

    pub fn simulation(&self) -> SimulationSection {
        self.file.simulation.clone().unwrap_or_default()
    }
}
