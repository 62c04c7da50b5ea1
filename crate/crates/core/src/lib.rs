//! Simulation of Lévy-driven SDEs with Hölder drift, deterministic per-path
//! solution of the frozen-path integral equation, and Monte Carlo checks of the
//! regularity, flow and path-by-path uniqueness properties of the solution.

pub mod config;
pub mod drift;
pub mod error;
pub mod kolmogorov;
pub mod levy_model;
pub mod path_sampler;
pub mod pathwise_solver;
pub mod quadrature;
pub mod rng;
pub mod runner;
pub mod stats;
pub mod verifier;

pub use drift::{DriftKind, DriftSpec};
pub use error::{LevyError, Result};
pub use levy_model::{CustomMeasure, Family, LevyModel, MomentCert};
pub use path_sampler::{BigJump, LevyPath, SamplerOptions, StableMethod, TimeGrid};
pub use pathwise_solver::{Method, SolutionCurve, SolverConfig};
pub use verifier::{McSetup, VerificationReport};
