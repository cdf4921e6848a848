//! Contraction certificates for Lur'e systems.
//!
//! A plant `x⁺ = Ax + B_Ψ Ψ(Cx) + Bu` (or its continuous-time analogue) under
//! the feedback `u = Kx + K_Ψ Ψ` contracts in the norm `‖·‖_P` when a family of
//! linear matrix inequalities holds. This crate builds those inequalities
//! ([`lmi`]), decides them with an embedded barrier solver ([`solver`]), checks
//! that a given Ψ belongs to the assumed class ([`nonlin`]) and measures
//! contraction on simulated trajectories ([`verify`]).

pub mod error;
pub mod library;
pub mod lmi;
pub mod matlin;
pub mod model;
pub mod nonlin;
pub mod plot;
pub mod solver;
pub mod verify;

pub use error::{Error, Result};
pub use lmi::{AffinePencil, LmiSpec, LmiTag, VarLayout};
pub use matlin::{Matrix, SymMatrix};
pub use model::{
    close_loop, recover_gains, ClosedLoop, Gains, Lipschitz, LureSystem, MonotoneBound, NonlinearFn,
    NonlinearityClass, SectorBound, TimeDomain,
};
pub use nonlin::{CheckReport, SampleScheme, Verdict};
pub use solver::{FeasibilityProblem, FeasibilityResult, SolveOptions, Status};
pub use verify::{Certificate, RateReport, Trajectory};
