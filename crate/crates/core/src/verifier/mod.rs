//! Monte Carlo and per-path checks of the flow, regularity and uniqueness
//! properties of the frozen-path solutions.
//!
//! Every experiment parallelizes over path indices and folds the per-path
//! results in index order, so a report depends only on its inputs and seed.

mod cadlag;
mod flow;
mod holder;
mod lp;
mod report;
mod uniqueness;

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use cadlag::{cadlag_in_s, CadlagParams};
pub use flow::{
    constancy_of_aux, constancy_study, flow_identity, ConstancyParams, FlowParams, RefinementLevel,
};
pub use holder::{holder_in_x, HolderParams};
pub use lp::{lp_lipschitz, LpParams};
pub use report::{ReportRow, VerificationReport, SCHEMA_VERSION};
pub use uniqueness::{
    tanaka_regime, uniqueness_multistart, Expectation, TanakaParams, UniquenessParams,
};

use crate::error::Result;
use crate::levy_model::LevyModel;
use crate::path_sampler::{sample_path_with, LevyPath, SamplerOptions, TimeGrid};
use crate::pathwise_solver::SolverConfig;

/// Monte Carlo setup shared by the path-based experiments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McSetup {
    pub n_paths: usize,
    pub seed: u64,
    pub t_end: f64,
    pub n_steps: usize,
    pub solver: SolverConfig,
    #[serde(default)]
    pub sampler: SamplerOptions,
}

impl McSetup {
    pub fn new(n_paths: usize, seed: u64, n_steps: usize) -> Self {
        Self {
            n_paths,
            seed,
            t_end: 1.0,
            n_steps,
            solver: SolverConfig::default(),
            sampler: SamplerOptions::default(),
        }
    }

    pub fn grid(&self) -> Result<Arc<TimeGrid>> {
        Ok(Arc::new(TimeGrid::uniform(self.t_end, self.n_steps)?))
    }

    pub fn path(&self, model: &LevyModel, grid: &Arc<TimeGrid>, index: usize) -> Result<LevyPath> {
        sample_path_with(model, grid, self.seed, index as u64, &self.sampler)
    }
}

/// Order-preserving parallel map over `0..n`.
pub fn par_map<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    (0..n).into_par_iter().map(f).collect()
}

/// Mean that returns the common value exactly when all entries agree.
pub fn stable_mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    let x0 = xs[0];
    x0 + xs.iter().map(|x| x - x0).sum::<f64>() / xs.len() as f64
}

#[inline]
pub(crate) fn sup_dist(a: &[f64], b: &[f64], dim: usize) -> f64 {
    a.chunks(dim)
        .zip(b.chunks(dim))
        .map(|(u, v)| crate::stats::dist(u, v))
        .fold(0.0, f64::max)
}
