//! Conservative cellular-automaton dynamics for finding cliques in dense
//! random graphs, together with the closed-form thermodynamics of the
//! associated pair measure.
//!
//! The crate splits into instance machinery and parameter-space analysis:
//!
//! - [`graph`] / [`clique`]: random instances, exact clique baselines, the
//!   lattice-gas energy.
//! - [`configuration`] / [`hamiltonian`]: k-subset states, cavity fields,
//!   the pair energy and its level decomposition, typicality diagnostics.
//! - [`sampler`]: exact kernel sampling through elementary symmetric
//!   function tables, chain execution, cycle detection, invariance checks.
//! - [`thermo`]: the per-pair weight exponent, its Legendre-dual rate
//!   function, critical lines, annealed partition function, phase report.
//! - [`second_moment`]: the quadruple decomposition behind the variance
//!   bound and the self-averaging experiment.
//! - [`fermi`]: level-occupation solver and configurational entropy
//!   estimates.
//!
//! All numerics are generic over [`scalar::Scalar`] (`f32` or `f64`);
//! the `f64` aliases below are the ones ordinary callers want.

#![forbid(unsafe_code)]
// Parameter validation deliberately writes `if !(x > lo)` so that NaN
// inputs fail validation instead of slipping through a flipped comparison.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod clique;
pub mod configuration;
pub mod error;
pub mod fermi;
pub mod graph;
pub mod hamiltonian;
pub mod numeric;
pub mod sampler;
pub mod scalar;
pub mod second_moment;
pub mod seeding;
pub mod thermo;

pub use configuration::Configuration;
pub use error::{CavityError, Result};
pub use graph::Graph;
pub use scalar::Scalar;

/// Default scalar for the shipped binaries and tests.
pub type Real = f64;

pub type ModelParams = thermo::ModelParams<Real>;
pub type PhaseReport = thermo::PhaseReport<Real>;
pub type CriticalValues = thermo::CriticalValues<Real>;
pub type FieldTable = hamiltonian::FieldTable<Real>;
pub type PairDiagnostics = hamiltonian::PairDiagnostics<Real>;
pub type StepWeights = sampler::StepWeights<Real>;
pub type Trajectory = sampler::Trajectory<Real>;
pub type LevelSpectrum = fermi::LevelSpectrum<Real>;
pub type OccupationSolution = fermi::OccupationSolution<Real>;
pub type CliqueWindow = graph::CliqueWindow<Real>;
