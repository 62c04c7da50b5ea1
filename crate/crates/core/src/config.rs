//! Declarative experiment configuration.
//!
//! A config is a TOML document with the experiment tag at the top level and
//! one table per concern: `[model]`, `[drift]`, `[grid]`, `[solver]`,
//! `[sampler]`, `[seeds]`, `[thresholds]`, `[output]`, plus a parameter table
//! named after the experiment (`[lp]`, `[holder]`, ...). Every missing value is
//! filled in by [`ExperimentConfig::normalized`], and the normalized form is
//! what gets embedded in reports.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::drift::{DriftKind, DriftSpec, DEFAULT_CLIP};
use crate::error::{LevyError, Result};
use crate::kolmogorov::{Probe, DEFAULT_H_FD, DEFAULT_RESOLVENT_STEPS, DEFAULT_TAIL_TOL};
use crate::levy_model::{Family, LevyModel};
use crate::path_sampler::SamplerOptions;
use crate::pathwise_solver::SolverConfig;
use crate::rng::derive_seed;
use crate::verifier::RefinementLevel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentTag {
    Sample,
    Solve,
    VerifyLp,
    VerifyHolder,
    VerifyUniqueness,
    VerifyFlow,
    VerifyCadlag,
    TanakaGrid,
    KolmogorovGradient,
    KolmogorovLambda0,
}

impl ExperimentTag {
    pub const ALL: [ExperimentTag; 10] = [
        ExperimentTag::Sample,
        ExperimentTag::Solve,
        ExperimentTag::VerifyLp,
        ExperimentTag::VerifyHolder,
        ExperimentTag::VerifyUniqueness,
        ExperimentTag::VerifyFlow,
        ExperimentTag::VerifyCadlag,
        ExperimentTag::TanakaGrid,
        ExperimentTag::KolmogorovGradient,
        ExperimentTag::KolmogorovLambda0,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ExperimentTag::Sample => "sample",
            ExperimentTag::Solve => "solve",
            ExperimentTag::VerifyLp => "verify-lp",
            ExperimentTag::VerifyHolder => "verify-holder",
            ExperimentTag::VerifyUniqueness => "verify-uniqueness",
            ExperimentTag::VerifyFlow => "verify-flow",
            ExperimentTag::VerifyCadlag => "verify-cadlag",
            ExperimentTag::TanakaGrid => "tanaka-grid",
            ExperimentTag::KolmogorovGradient => "kolmogorov-gradient",
            ExperimentTag::KolmogorovLambda0 => "kolmogorov-lambda0",
        }
    }

    fn uses_model(self) -> bool {
        !matches!(
            self,
            ExperimentTag::TanakaGrid | ExperimentTag::KolmogorovGradient
        )
    }

    fn default_n_steps(self) -> usize {
        match self {
            ExperimentTag::VerifyHolder => 1024,
            ExperimentTag::TanakaGrid => 16384,
            _ => 4096,
        }
    }
}

impl fmt::Display for ExperimentTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ExperimentTag {
    type Err = LevyError;

    fn from_str(s: &str) -> Result<Self> {
        ExperimentTag::ALL
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| {
                let valid: Vec<&str> = ExperimentTag::ALL.iter().map(|t| t.as_str()).collect();
                LevyError::Config(format!(
                    "unknown experiment `{s}`; valid tags: {}",
                    valid.join(", ")
                ))
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    Json,
    Csv,
    #[default]
    Both,
}

impl OutputFormat {
    pub fn json(self) -> bool {
        matches!(self, OutputFormat::Json | OutputFormat::Both)
    }

    pub fn csv(self) -> bool {
        matches!(self, OutputFormat::Csv | OutputFormat::Both)
    }
}

fn one() -> usize {
    1
}

fn one_f() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub family: Family,
    #[serde(default = "one")]
    pub dim: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default = "one_f")]
    pub scale: f64,
    /// Mass parameter of the relativistic family.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<f64>,
    /// Jump cutoff of the truncated family.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trunc_r: Option<f64>,
    /// Diagonal of the Gaussian covariance.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q_diag: Option<Vec<f64>>,
    /// Jump rate of the compound Poisson family.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rate: Option<f64>,
}

fn missing(key: &str, family: Family) -> LevyError {
    LevyError::Config(format!(
        "missing key `model.{key}` (required by family `{}`)",
        family.name()
    ))
}

impl ModelConfig {
    pub fn build(&self) -> Result<LevyModel> {
        let f = self.family;
        let d = self.dim;
        let alpha = || self.alpha.ok_or_else(|| missing("alpha", f));
        let model =
            match f {
                Family::IsotropicStable => LevyModel::isotropic_stable(d, alpha()?, self.scale)?,
                Family::SingularStable => LevyModel::singular_stable(d, alpha()?, self.scale)?,
                Family::TemperedStable => LevyModel::tempered_stable(d, alpha()?, self.scale)?,
                Family::TruncatedStable => LevyModel::truncated_stable(
                    d,
                    alpha()?,
                    self.scale,
                    self.trunc_r.ok_or_else(|| missing("trunc_r", f))?,
                )?,
                Family::RelativisticStable => LevyModel::relativistic_stable(
                    d,
                    alpha()?,
                    self.m.ok_or_else(|| missing("m", f))?,
                    self.scale,
                )?,
                Family::Brownian => {
                    let q = self.q_diag.as_ref().ok_or_else(|| missing("q_diag", f))?;
                    if q.len() != d {
                        return Err(LevyError::Config(format!(
                            "`model.q_diag` has {} entries but `model.dim` is {d}",
                            q.len()
                        )));
                    }
                    return LevyModel::brownian(q);
                }
                Family::CompoundPoisson => {
                    LevyModel::compound_poisson(d, self.rate.ok_or_else(|| missing("rate", f))?)?
                }
                Family::Custom => return Err(LevyError::Config(
                    "family `custom` needs a radial density and cannot be configured from a file"
                        .into(),
                )),
            };
        match &self.q_diag {
            Some(q) if q.len() == d => {
                let mut full = vec![0.0; d * d];
                for (i, v) in q.iter().enumerate() {
                    full[i * d + i] = *v;
                }
                model.with_gaussian(full)
            }
            Some(q) => Err(LevyError::Config(format!(
                "`model.q_diag` has {} entries but `model.dim` is {d}",
                q.len()
            ))),
            None => Ok(model),
        }
    }
}

fn default_clip() -> f64 {
    DEFAULT_CLIP
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftConfig {
    #[serde(flatten)]
    pub kind: DriftKind,
    #[serde(default = "default_clip")]
    pub clip: f64,
    #[serde(default)]
    pub time_dependent: bool,
}

impl Default for DriftConfig {
    fn default() -> Self {
        Self {
            kind: DriftKind::Zero,
            clip: DEFAULT_CLIP,
            time_dependent: false,
        }
    }
}

impl DriftConfig {
    pub fn build(&self, dim: usize) -> Result<DriftSpec> {
        DriftSpec::build(self.kind.clone(), dim, self.clip, self.time_dependent)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    #[serde(default = "one_f")]
    pub t_end: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_steps: Option<usize>,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            t_end: 1.0,
            n_steps: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeedConfig {
    #[serde(default)]
    pub master: u64,
    #[serde(default = "one")]
    pub shards: usize,
}

impl Default for SeedConfig {
    fn default() -> Self {
        Self {
            master: 0,
            shards: 1,
        }
    }
}

impl SeedConfig {
    /// Shard seeds `derive_seed(master, i)` for `i = 0..shards`.
    pub fn shard_seeds(&self) -> Vec<u64> {
        (0..self.shards as u64)
            .map(|i| derive_seed(self.master, i))
            .collect()
    }

    /// Paths assigned to each shard, the first `n mod shards` shards taking one extra.
    pub fn split(&self, n_paths: usize) -> Vec<usize> {
        let s = self.shards;
        (0..s)
            .map(|i| n_paths / s + usize::from(i < n_paths % s))
            .collect()
    }
}

/// Every constant that enters a pass verdict.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Thresholds {
    pub max_ratio_spread: f64,
    pub max_failure_fraction: f64,
    pub holder_exponent_slack: f64,
    pub holder_required_fraction: f64,
    pub collapse_factor: f64,
    pub branch_separation: f64,
    pub max_nonconverged_fraction: f64,
    pub flow_bound_constant: f64,
    pub min_refinement_slope: f64,
    pub cadlag_rel_threshold: f64,
    pub cadlag_required_fraction: f64,
    pub gradient_lower_slack: f64,
    pub gradient_upper_slack: f64,
    pub lambda0_slope_slack: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            max_ratio_spread: 4.0,
            max_failure_fraction: 0.01,
            holder_exponent_slack: 0.1,
            holder_required_fraction: 0.95,
            collapse_factor: 10.0,
            branch_separation: 0.1,
            max_nonconverged_fraction: 0.01,
            flow_bound_constant: 1e-3,
            min_refinement_slope: 0.8,
            cadlag_rel_threshold: 0.05,
            cadlag_required_fraction: 0.95,
            gradient_lower_slack: 0.05,
            gradient_upper_slack: 0.15,
            lambda0_slope_slack: 0.15,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dir: Option<String>,
    #[serde(default)]
    pub format: OutputFormat,
    /// Also write path archives where the experiment has paths to write.
    #[serde(default)]
    pub write_paths: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SampleConfig {
    pub n_paths: usize,
}

impl Default for SampleConfig {
    fn default() -> Self {
        Self { n_paths: 1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolveConfig {
    pub s: f64,
    /// Defaults to the origin.
    pub x: Vec<f64>,
    pub n_paths: usize,
}

impl Default for SolveConfig {
    fn default() -> Self {
        Self {
            s: 0.0,
            x: Vec::new(),
            n_paths: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LpConfig {
    pub p: f64,
    pub x0: Vec<f64>,
    pub separations: Vec<f64>,
    pub s_values: Vec<f64>,
    pub n_paths: usize,
}

impl Default for LpConfig {
    fn default() -> Self {
        Self {
            p: 2.0,
            x0: Vec::new(),
            separations: vec![1.0, 0.125, 1.0 / 64.0],
            s_values: vec![0.0, 0.3, 0.7],
            n_paths: 2000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HolderConfig {
    pub s: f64,
    pub box_radius: f64,
    pub n_points: usize,
    pub n_scales: usize,
    pub min_separation: f64,
    pub max_separation: f64,
    pub n_grr: usize,
    pub n_paths: usize,
}

impl Default for HolderConfig {
    fn default() -> Self {
        Self {
            s: 0.0,
            box_radius: 1.0,
            n_points: 6,
            n_scales: 4,
            min_separation: 1e-3,
            max_separation: 0.05,
            n_grr: 16,
            n_paths: 500,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct UniquenessConfig {
    pub s0: f64,
    pub x: Vec<f64>,
    pub n_starts: usize,
    pub perturbation_scale: f64,
    pub n_paths: usize,
    /// Also run the noise-free problem and require branching there.
    pub control: bool,
}

impl Default for UniquenessConfig {
    fn default() -> Self {
        Self {
            s0: 0.0,
            x: Vec::new(),
            n_starts: 8,
            perturbation_scale: 0.5,
            n_paths: 200,
            control: true,
        }
    }
}

pub fn default_levels() -> Vec<RefinementLevel> {
    (0..5)
        .map(|i| RefinementLevel {
            n_steps: 1024 << i,
            tol: 8e-8 / (1u32 << i) as f64,
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FlowConfig {
    pub identity: bool,
    pub constancy: bool,
    pub n_triples: usize,
    pub x_range: f64,
    pub levels: Vec<RefinementLevel>,
    pub n_paths: usize,
    pub constancy_s0: f64,
    pub constancy_t: f64,
    pub constancy_x: Vec<f64>,
    pub n_s_nodes: usize,
}

impl Default for FlowConfig {
    fn default() -> Self {
        Self {
            identity: true,
            constancy: true,
            n_triples: 100,
            x_range: 1.0,
            levels: default_levels(),
            n_paths: 20,
            constancy_s0: 0.0,
            constancy_t: 1.0,
            constancy_x: Vec::new(),
            n_s_nodes: 64,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CadlagConfig {
    pub s: f64,
    pub box_radius: f64,
    pub n_x: usize,
    pub k_max: u32,
    pub n_paths: usize,
}

impl Default for CadlagConfig {
    fn default() -> Self {
        Self {
            s: 0.3,
            box_radius: 1.0,
            n_x: 5,
            k_max: 10,
            n_paths: 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TanakaConfig {
    pub alpha_list: Vec<f64>,
    pub beta_list: Vec<f64>,
    pub n_starts: usize,
    pub perturbation_scale: f64,
    pub n_paths: usize,
}

impl Default for TanakaConfig {
    fn default() -> Self {
        Self {
            alpha_list: vec![0.5, 1.0, 1.5, 2.0],
            beta_list: vec![0.25, 0.5, 0.75],
            n_starts: 8,
            perturbation_scale: 0.5,
            n_paths: 50,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GradientConfig {
    pub alpha_list: Vec<f64>,
    pub scale: f64,
    pub t_min: f64,
    pub n_times: usize,
    pub probes: Vec<Probe>,
}

impl Default for GradientConfig {
    fn default() -> Self {
        Self {
            alpha_list: vec![0.8, 1.5, 2.0],
            scale: 1.0,
            t_min: 0.05,
            n_times: 8,
            probes: Probe::standard(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Lambda0Config {
    pub lambda_grid: Vec<f64>,
    pub probes: Vec<Vec<f64>>,
    pub n_steps: usize,
    pub h_fd: f64,
    pub tail_tol: f64,
    pub n_paths: usize,
}

impl Default for Lambda0Config {
    fn default() -> Self {
        Self {
            lambda_grid: vec![1.0, 2.0, 4.0, 8.0, 16.0, 32.0, 64.0],
            probes: vec![vec![-0.5], vec![0.0], vec![0.5]],
            n_steps: DEFAULT_RESOLVENT_STEPS,
            h_fd: DEFAULT_H_FD,
            tail_tol: DEFAULT_TAIL_TOL,
            n_paths: 10_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentTag,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<ModelConfig>,
    #[serde(default)]
    pub drift: DriftConfig,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub sampler: SamplerOptions,
    #[serde(default)]
    pub seeds: SeedConfig,
    #[serde(default)]
    pub thresholds: Thresholds,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sample: Option<SampleConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub solve: Option<SolveConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lp: Option<LpConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub holder: Option<HolderConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub uniqueness: Option<UniquenessConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub flow: Option<FlowConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cadlag: Option<CadlagConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tanaka: Option<TanakaConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gradient: Option<GradientConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda0: Option<Lambda0Config>,
}

impl ExperimentConfig {
    /// A config with every block at its default.
    pub fn new(experiment: ExperimentTag) -> Self {
        Self {
            experiment,
            model: None,
            drift: DriftConfig::default(),
            grid: GridConfig::default(),
            solver: SolverConfig::default(),
            sampler: SamplerOptions::default(),
            seeds: SeedConfig::default(),
            thresholds: Thresholds::default(),
            output: OutputConfig::default(),
            sample: None,
            solve: None,
            lp: None,
            holder: None,
            uniqueness: None,
            flow: None,
            cadlag: None,
            tanaka: None,
            gradient: None,
            lambda0: None,
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| LevyError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| LevyError::Config(format!("cannot read {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| LevyError::Config(format!("{}: {e}", path.display())))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| LevyError::Config(e.to_string()))
    }

    pub fn dim(&self) -> usize {
        self.model.as_ref().map_or(1, |m| m.dim)
    }

    /// Fills the experiment's parameter table and grid size with defaults and
    /// drops parameter tables that belong to other experiments.
    pub fn normalized(&self) -> Self {
        let mut c = self.clone();
        let d = c.dim();
        let tag = c.experiment;
        c.sample = None;
        c.solve = None;
        c.lp = None;
        c.holder = None;
        c.uniqueness = None;
        c.flow = None;
        c.cadlag = None;
        c.tanaka = None;
        c.gradient = None;
        c.lambda0 = None;
        let origin = |x: &mut Vec<f64>, v: f64| {
            if x.is_empty() {
                *x = vec![v; d];
            }
        };
        match tag {
            ExperimentTag::Sample => c.sample = Some(self.sample.clone().unwrap_or_default()),
            ExperimentTag::Solve => {
                let mut p = self.solve.clone().unwrap_or_default();
                origin(&mut p.x, 0.0);
                c.solve = Some(p);
            }
            ExperimentTag::VerifyLp => {
                let mut p = self.lp.clone().unwrap_or_default();
                origin(&mut p.x0, 0.0);
                c.lp = Some(p);
            }
            ExperimentTag::VerifyHolder => c.holder = Some(self.holder.clone().unwrap_or_default()),
            ExperimentTag::VerifyUniqueness => {
                let mut p = self.uniqueness.clone().unwrap_or_default();
                origin(&mut p.x, 0.0);
                c.uniqueness = Some(p);
            }
            ExperimentTag::VerifyFlow => {
                let mut p = self.flow.clone().unwrap_or_default();
                origin(&mut p.constancy_x, 0.5);
                c.flow = Some(p);
            }
            ExperimentTag::VerifyCadlag => c.cadlag = Some(self.cadlag.clone().unwrap_or_default()),
            ExperimentTag::TanakaGrid => c.tanaka = Some(self.tanaka.clone().unwrap_or_default()),
            ExperimentTag::KolmogorovGradient => {
                c.gradient = Some(self.gradient.clone().unwrap_or_default())
            }
            ExperimentTag::KolmogorovLambda0 => {
                c.lambda0 = Some(self.lambda0.clone().unwrap_or_default())
            }
        }
        if c.grid.n_steps.is_none() {
            c.grid.n_steps = Some(match &c.flow {
                Some(f) => f.levels.iter().map(|l| l.n_steps).max().unwrap_or(4096),
                None => tag.default_n_steps(),
            });
        }
        c
    }

    /// Checks the normalized config; returns warnings that do not stop a run.
    pub fn validate(&self) -> Result<Vec<String>> {
        let mut warnings = Vec::new();
        if self.seeds.shards == 0 {
            return Err(LevyError::Config(
                "`seeds.shards` must be at least 1".into(),
            ));
        }
        if !(self.grid.t_end > 0.0) {
            return Err(LevyError::Config("`grid.t_end` must be positive".into()));
        }
        if self.grid.n_steps == Some(0) {
            return Err(LevyError::Config("`grid.n_steps` must be positive".into()));
        }
        if !self.experiment.uses_model() {
            return Ok(warnings);
        }
        let model_cfg = self.model.as_ref().ok_or_else(|| {
            LevyError::Config(format!(
                "missing table `[model]` (required by experiment `{}`)",
                self.experiment
            ))
        })?;
        if let Some(a) = model_cfg.alpha {
            if !(a > 0.0 && a <= 2.0) {
                return Err(LevyError::Config(format!(
                    "`model.alpha` must lie in (0, 2], got {a}"
                )));
            }
        }
        let model = model_cfg.build()?;
        let drift = self.drift.build(model.dim)?;
        if !drift.is_zero() {
            if !(drift.beta > 0.0) {
                return Err(LevyError::Config(
                    "drift Hölder exponent must be positive".into(),
                ));
            }
            let alpha = crate::kolmogorov::stability_index(&model)?;
            if drift.beta <= 1.0 - alpha / 2.0 {
                warnings.push(format!(
                    "beta = {} ≤ 1 − alpha/2 = {}: outside the range where pathwise uniqueness is known",
                    drift.beta,
                    1.0 - alpha / 2.0
                ));
            }
        }
        Ok(warnings)
    }
}

/// Purpose, statement checked and parameter keys of each experiment.
pub fn describe(tag: &str) -> Result<String> {
    let tag: ExperimentTag = tag.parse()?;
    let (purpose, statement, keys) = match tag {
        ExperimentTag::Sample => (
            "Samples Lévy paths on the grid and writes them as archives and CSV.",
            "Paths are càdlàg with independent stationary increments; the law of L_t has exponent tψ.",
            "[sample] n_paths",
        ),
        ExperimentTag::Solve => (
            "Solves the frozen-path equation Y_t = x + ∫_s^t b(Y_r + L_r − L_s) dr and writes the curves.",
            "X_t = Y_t + L_t − L_s solves X_t = x + ∫_s^t b(X_r) dr + L_t − L_s path by path.",
            "[solve] s, x, n_paths",
        ),
        ExperimentTag::VerifyLp => (
            "Monte Carlo Lp-Lipschitz ratios of the flow in the initial point.",
            "E sup_t |φ(s,t,x) − φ(s,t,y)|^p ≤ C|x − y|^p: the ratio stays bounded as |x − y| shrinks.",
            "[lp] p, x0, separations, s_values, n_paths; thresholds max_ratio_spread, max_failure_fraction",
        ),
        ExperimentTag::VerifyHolder => (
            "Per-path Hölder exponent of x ↦ φ(s,·,x) from multi-scale pairs.",
            "Garsia–Rodemich–Rumsey: Lp bounds with p = n_grr give exponent (n − 2d)/n on compacts.",
            "[holder] s, box_radius, n_points, n_scales, min_separation, max_separation, n_grr, n_paths; thresholds holder_exponent_slack, holder_required_fraction",
        ),
        ExperimentTag::VerifyUniqueness => (
            "Multistart Picard iteration on each path, plus a noise-free control.",
            "Path-by-path uniqueness: for almost every path the integral equation has one solution for all x; without noise the Peano branches reappear.",
            "[uniqueness] s0, x, n_starts, perturbation_scale, n_paths, control; thresholds collapse_factor, branch_separation, max_nonconverged_fraction",
        ),
        ExperimentTag::VerifyFlow => (
            "Flow identity on random triples and constancy of s ↦ φ(s,t,g(s)) under refinement.",
            "Flow identity φ(s,t,x) = φ(r,t,φ(s,r,x)) for s ≤ r ≤ t, and φ(s,t,φ(0,s,x)) = φ(0,t,x).",
            "[flow] identity, constancy, n_triples, x_range, levels, n_paths, constancy_s0, constancy_t, constancy_x, n_s_nodes; thresholds flow_bound_constant, min_refinement_slope",
        ),
        ExperimentTag::VerifyCadlag => (
            "Right-continuity of the flow in the start time.",
            "s ↦ φ(s,t,x) is càdlàg uniformly in (t, x) on compacts.",
            "[cadlag] s, box_radius, n_x, k_max, n_paths; thresholds cadlag_rel_threshold, cadlag_required_fraction",
        ),
        ExperimentTag::TanakaGrid => (
            "Multistart collapse over an (alpha, beta) grid with drift sign(x)|x|^beta.",
            "Uniqueness is asserted only for beta > 1 − alpha/2. Cells with alpha + beta < 1 are reported, not asserted: there pathwise uniqueness can fail (Tanaka-type counterexamples), and a numerical scheme cannot certify non-uniqueness.",
            "[tanaka] alpha_list, beta_list, n_starts, perturbation_scale, n_paths; thresholds collapse_factor, branch_separation",
        ),
        ExperimentTag::KolmogorovGradient => (
            "Small-time decay of sup|D P_t f| from FFT stable densities.",
            "sup_x |D P_t f(x)| ≤ c t^{−1/α} sup_x |f(x)|; the worst probe's log-log slope should sit at −1/α.",
            "[gradient] alpha_list, scale, t_min, n_times, probes; thresholds gradient_lower_slack, gradient_upper_slack",
        ),
        ExperimentTag::KolmogorovLambda0 => (
            "Monte Carlo resolvent gradients sup|Du_λ| over a λ grid.",
            "λu − ℒu − b·Du = b has ‖Du_λ‖₀ < 1/3 for λ large, with decay λ^{−(α+β−1)/(α+β)}.",
            "[lambda0] lambda_grid, probes, n_steps, h_fd, tail_tol, n_paths; thresholds lambda0_slope_slack",
        ),
    };
    Ok(format!(
        "{tag}\n  purpose: {purpose}\n  checks: {statement}\n  keys: experiment, [model] family dim alpha scale m trunc_r q_diag rate, [drift] kind ..., [grid] t_end n_steps, [solver] method tol max_iter, [sampler] stable_method epsilon, [seeds] master shards, [output] dir format write_paths\n  experiment keys: {keys}\n"
    ))
}
