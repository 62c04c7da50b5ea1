//! Executes a normalized [`ExperimentConfig`] and persists its artifacts.
//!
//! Path-count experiments are split into shards, each run with its own seed
//! `derive_seed(master, shard)`; the shard reports are merged in shard order.
//! The other experiments run once with the first shard seed.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use crate::config::{ExperimentConfig, ExperimentTag, OutputFormat};
use crate::drift::DriftSpec;
use crate::error::{LevyError, Result};
use crate::kolmogorov::{
    gradient_estimate_check, gradient_report, lambda0_report, lambda0_search, log_spaced,
    Lambda0Params,
};
use crate::levy_model::LevyModel;
use crate::path_sampler::{LevyPath, TimeGrid};
use crate::pathwise_solver::solve_frozen;
use crate::stats;
use crate::verifier::{
    cadlag_in_s, constancy_study, flow_identity, holder_in_x, lp_lipschitz, par_map, tanaka_regime,
    uniqueness_multistart, CadlagParams, ConstancyParams, Expectation, FlowParams, HolderParams,
    LpParams, McSetup, ReportRow, TanakaParams, UniquenessParams, VerificationReport,
};

pub const SEED_HASH_NOTE: &str =
    "shard seed = derive_seed(master, shard) = mix64(mix64(master) ^ mix64(shard + 0x9E3779B97F4A7C15)), mix64 = SplitMix64 finalizer";

/// A finished run: the report and every file written.
#[derive(Debug)]
pub struct RunOutcome {
    pub report: VerificationReport,
    pub warnings: Vec<String>,
    pub files: Vec<PathBuf>,
}

struct Ctx<'a> {
    cfg: &'a ExperimentConfig,
    out: Option<&'a Path>,
    files: Vec<PathBuf>,
}

impl Ctx<'_> {
    fn mc(&self, n_paths: usize, seed: u64) -> McSetup {
        McSetup {
            n_paths,
            seed,
            t_end: self.cfg.grid.t_end,
            n_steps: self.cfg.grid.n_steps.unwrap_or(4096),
            solver: self.cfg.solver,
            sampler: self.cfg.sampler,
        }
    }

    fn model(&self) -> Result<LevyModel> {
        self.cfg
            .model
            .as_ref()
            .ok_or_else(|| LevyError::Config("missing table `[model]`".into()))?
            .build()
    }

    fn create(&mut self, rel: &str) -> Result<BufWriter<File>> {
        let out = self
            .out
            .ok_or_else(|| LevyError::Config("no output directory".into()))?;
        let path = out.join(rel);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        let f = File::create(&path)?;
        self.files.push(path);
        Ok(BufWriter::new(f))
    }

    fn write_path(&mut self, path: &LevyPath, stem: &str) -> Result<()> {
        if self.out.is_none() {
            return Ok(());
        }
        let mut w = self.create(&format!("paths/{stem}.lvyp"))?;
        path.write_archive(&mut w)?;
        w.flush()?;
        let mut w = self.create(&format!("paths/{stem}.csv"))?;
        path.write_csv(&mut w)?;
        w.flush()?;
        Ok(())
    }
}

/// Validates, runs and writes the report (`report.json` / `report.csv`) plus
/// experiment artifacts into `out`.
pub fn run(cfg: &ExperimentConfig, out: &Path, format: OutputFormat) -> Result<RunOutcome> {
    fs::create_dir_all(out)?;
    let mut outcome = execute(cfg, Some(out))?;
    if format.json() {
        let path = out.join("report.json");
        fs::write(&path, outcome.report.to_json()? + "\n")?;
        outcome.files.push(path);
    }
    if format.csv() {
        let path = out.join("report.csv");
        let mut w = BufWriter::new(File::create(&path)?);
        outcome.report.write_csv(&mut w)?;
        w.flush()?;
        outcome.files.push(path);
    }
    Ok(outcome)
}

/// Runs the experiment; artifacts are written only when `out` is given.
pub fn execute(cfg: &ExperimentConfig, out: Option<&Path>) -> Result<RunOutcome> {
    let cfg = cfg.normalized();
    let warnings = cfg.validate()?;
    let mut ctx = Ctx {
        cfg: &cfg,
        out,
        files: Vec::new(),
    };
    let seeds = cfg.seeds.shard_seeds();
    let mut report = match cfg.experiment {
        ExperimentTag::TanakaGrid => tanaka(&ctx, seeds[0])?,
        ExperimentTag::KolmogorovGradient => gradient(&ctx)?,
        ExperimentTag::KolmogorovLambda0 => lambda0(&mut ctx, seeds[0])?,
        tag => {
            let n_paths = sharded_paths(&cfg);
            let mut parts = Vec::new();
            for (i, (seed, n)) in seeds.iter().zip(cfg.seeds.split(n_paths)).enumerate() {
                let label = if seeds.len() > 1 {
                    format!("shard={i}")
                } else {
                    String::new()
                };
                parts.push((label, sharded(&mut ctx, tag, i, *seed, n)?));
            }
            VerificationReport::merge(tag.as_str(), parts)
        }
    };
    report.experiment = cfg.experiment.as_str().to_string();
    report.seeds = seeds;
    report.notes.push(SEED_HASH_NOTE.to_string());
    report
        .notes
        .extend(warnings.iter().map(|w| format!("warning: {w}")));
    report.config_snapshot =
        serde_json::to_value(&cfg).map_err(|e| LevyError::Format(e.to_string()))?;
    let files = ctx.files;
    Ok(RunOutcome {
        report,
        warnings,
        files,
    })
}

fn sharded_paths(cfg: &ExperimentConfig) -> usize {
    match cfg.experiment {
        ExperimentTag::Sample => cfg.sample.as_ref().map_or(1, |p| p.n_paths),
        ExperimentTag::Solve => cfg.solve.as_ref().map_or(1, |p| p.n_paths),
        ExperimentTag::VerifyLp => cfg.lp.as_ref().map_or(0, |p| p.n_paths),
        ExperimentTag::VerifyHolder => cfg.holder.as_ref().map_or(0, |p| p.n_paths),
        ExperimentTag::VerifyUniqueness => cfg.uniqueness.as_ref().map_or(0, |p| p.n_paths),
        ExperimentTag::VerifyFlow => cfg.flow.as_ref().map_or(0, |p| p.n_paths),
        ExperimentTag::VerifyCadlag => cfg.cadlag.as_ref().map_or(0, |p| p.n_paths),
        _ => 0,
    }
}

fn sharded(
    ctx: &mut Ctx,
    tag: ExperimentTag,
    shard: usize,
    seed: u64,
    n: usize,
) -> Result<VerificationReport> {
    let cfg = ctx.cfg;
    let model = ctx.model()?;
    let b = cfg.drift.build(model.dim)?;
    let th = &cfg.thresholds;
    let mc = ctx.mc(n, seed);
    match tag {
        ExperimentTag::Sample => sample(ctx, &model, &mc, shard),
        ExperimentTag::Solve => solve(ctx, &b, &model, &mc, shard),
        ExperimentTag::VerifyLp => {
            let p = cfg.lp.as_ref().expect("normalized");
            lp_lipschitz(
                &b,
                &model,
                &LpParams {
                    p: p.p,
                    pairs: LpParams::shrinking_pairs(&p.x0, &p.separations),
                    s_values: p.s_values.clone(),
                    mc,
                    max_ratio_spread: th.max_ratio_spread,
                    max_failure_fraction: th.max_failure_fraction,
                },
            )
        }
        ExperimentTag::VerifyHolder => {
            let p = cfg.holder.as_ref().expect("normalized");
            holder_in_x(
                &b,
                &model,
                &HolderParams {
                    s: p.s,
                    box_radius: p.box_radius,
                    n_points: p.n_points,
                    n_scales: p.n_scales,
                    min_separation: p.min_separation,
                    max_separation: p.max_separation,
                    n_grr: p.n_grr,
                    mc,
                    exponent_slack: th.holder_exponent_slack,
                    required_fraction: th.holder_required_fraction,
                },
            )
        }
        ExperimentTag::VerifyUniqueness => {
            let p = cfg.uniqueness.as_ref().expect("normalized");
            let up = UniquenessParams {
                s0: p.s0,
                x: p.x.clone(),
                n_starts: p.n_starts,
                perturbation_scale: p.perturbation_scale,
                mc,
                expectation: Expectation::Collapse {
                    factor: th.collapse_factor,
                },
                max_nonconverged_fraction: th.max_nonconverged_fraction,
            };
            let main = uniqueness_multistart(&b, &model, &up)?;
            let mut parts = vec![("noise".to_string(), main)];
            if p.control && shard == 0 {
                let control = UniquenessParams {
                    mc: McSetup {
                        n_paths: 1,
                        ..up.mc.clone()
                    },
                    expectation: Expectation::Branching {
                        min_separation: th.branch_separation,
                    },
                    ..up
                };
                parts.push((
                    "control".to_string(),
                    uniqueness_multistart(&b, &LevyModel::degenerate(model.dim), &control)?,
                ));
            }
            Ok(VerificationReport::merge(tag.as_str(), parts))
        }
        ExperimentTag::VerifyFlow => {
            let p = cfg.flow.as_ref().expect("normalized");
            let mut parts = Vec::new();
            if p.identity {
                let fp = FlowParams {
                    n_triples: p.n_triples,
                    x_range: p.x_range,
                    levels: p.levels.clone(),
                    mc: mc.clone(),
                    bound_constant: th.flow_bound_constant,
                    min_refinement_slope: th.min_refinement_slope,
                };
                parts.push(("identity".to_string(), flow_identity(&b, &model, &fp)?));
            }
            if p.constancy {
                let cp = ConstancyParams {
                    s0: p.constancy_s0,
                    t: p.constancy_t,
                    x: p.constancy_x.clone(),
                    n_s_nodes: p.n_s_nodes,
                    levels: p.levels.clone(),
                    mc,
                    bound_constant: th.flow_bound_constant,
                    min_refinement_slope: th.min_refinement_slope,
                };
                parts.push(("constancy".to_string(), constancy_study(&b, &model, &cp)?));
            }
            if parts.is_empty() {
                return Err(LevyError::Config(
                    "`flow.identity` and `flow.constancy` are both off".into(),
                ));
            }
            Ok(VerificationReport::merge(tag.as_str(), parts))
        }
        ExperimentTag::VerifyCadlag => {
            let p = cfg.cadlag.as_ref().expect("normalized");
            cadlag_in_s(
                &b,
                &model,
                &CadlagParams {
                    s: p.s,
                    box_radius: p.box_radius,
                    n_x: p.n_x,
                    k_max: p.k_max,
                    mc,
                    rel_threshold: th.cadlag_rel_threshold,
                    required_fraction: th.cadlag_required_fraction,
                },
            )
        }
        _ => unreachable!("not a sharded experiment"),
    }
}

fn sample(
    ctx: &mut Ctx,
    model: &LevyModel,
    mc: &McSetup,
    shard: usize,
) -> Result<VerificationReport> {
    let grid = mc.grid()?;
    let paths: Vec<Result<LevyPath>> = par_map(mc.n_paths, |k| mc.path(model, &grid, k));
    let mut report = VerificationReport::new("sample", mc.n_paths, vec![mc.seed]);
    for (k, p) in paths.into_iter().enumerate() {
        let p = p?;
        let last = p.node(p.n_nodes() - 1);
        let sup = (0..p.n_nodes())
            .map(|i| stats::euclid(p.node(i)))
            .fold(0.0, f64::max);
        report.rows.push(
            ReportRow::new(format!("path={k}"))
                .with("terminal_norm", stats::euclid(last))
                .with("sup_norm", sup)
                .with("big_jumps", p.big_jumps.len() as f64),
        );
        ctx.write_path(&p, &format!("path_{shard:03}_{k:05}"))?;
    }
    report.pass = true;
    Ok(report)
}

fn solve(
    ctx: &mut Ctx,
    b: &DriftSpec,
    model: &LevyModel,
    mc: &McSetup,
    shard: usize,
) -> Result<VerificationReport> {
    let p = ctx.cfg.solve.clone().expect("normalized");
    if p.x.len() != model.dim {
        return Err(LevyError::Config(format!(
            "`solve.x` has {} entries but the model dimension is {}",
            p.x.len(),
            model.dim
        )));
    }
    let grid: Arc<TimeGrid> = mc.grid()?;
    let results: Vec<Result<(LevyPath, Result<crate::pathwise_solver::SolutionCurve>)>> =
        par_map(mc.n_paths, |k| {
            let path = mc.path(model, &grid, k)?;
            let curve = solve_frozen(b, &path, p.s, &p.x, &mc.solver);
            Ok((path, curve))
        });
    let mut report = VerificationReport::new("solve", mc.n_paths, vec![mc.seed]);
    let mut residual_max: f64 = 0.0;
    for (k, r) in results.into_iter().enumerate() {
        let (path, curve) = r?;
        let stem = format!("{shard:03}_{k:05}");
        match curve {
            Ok(c) => {
                residual_max = residual_max.max(c.residual);
                report.rows.push(
                    ReportRow::new(format!("path={k}"))
                        .with("iterations", c.iterations as f64)
                        .with("residual", c.residual)
                        .with("converged", 1.0),
                );
                if ctx.out.is_some() {
                    let mut w = ctx.create(&format!("curves/curve_{stem}.csv"))?;
                    c.write_csv(&mut w)?;
                    w.flush()?;
                }
            }
            Err(LevyError::Convergence {
                iterations, defect, ..
            }) => {
                report.failures += 1;
                report.rows.push(
                    ReportRow::new(format!("path={k}"))
                        .with("iterations", iterations as f64)
                        .with("residual", defect)
                        .with("converged", 0.0),
                );
            }
            Err(e) => return Err(e),
        }
        if ctx.cfg.output.write_paths {
            ctx.write_path(&path, &format!("path_{stem}"))?;
        }
    }
    report.residual_max = Some(residual_max);
    report.pass = report.failures == 0;
    Ok(report)
}

fn tanaka(ctx: &Ctx, seed: u64) -> Result<VerificationReport> {
    let p = ctx.cfg.tanaka.as_ref().expect("normalized");
    let th = &ctx.cfg.thresholds;
    tanaka_regime(&TanakaParams {
        alpha_list: p.alpha_list.clone(),
        beta_list: p.beta_list.clone(),
        n_starts: p.n_starts,
        perturbation_scale: p.perturbation_scale,
        mc: ctx.mc(p.n_paths, seed),
        collapse_factor: th.collapse_factor,
        branch_separation: th.branch_separation,
    })
}

fn gradient(ctx: &Ctx) -> Result<VerificationReport> {
    let p = ctx.cfg.gradient.as_ref().expect("normalized");
    if p.n_times < 2 || !(p.t_min > 0.0 && p.t_min < 1.0) {
        return Err(LevyError::Config(
            "`gradient` needs n_times ≥ 2 and t_min in (0, 1)".into(),
        ));
    }
    let times = log_spaced(p.t_min, 1.0, p.n_times);
    let checks = p
        .alpha_list
        .iter()
        .map(|a| gradient_estimate_check(*a, p.scale, &times, &p.probes))
        .collect::<Result<Vec<_>>>()?;
    let th = &ctx.cfg.thresholds;
    Ok(gradient_report(
        &checks,
        th.gradient_lower_slack,
        th.gradient_upper_slack,
    ))
}

fn lambda0(ctx: &mut Ctx, seed: u64) -> Result<VerificationReport> {
    let cfg = ctx.cfg;
    let p = cfg.lambda0.as_ref().expect("normalized");
    let model = ctx.model()?;
    let b = cfg.drift.build(model.dim)?;
    let params = Lambda0Params {
        lambda_grid: p.lambda_grid.clone(),
        probes: p.probes.clone(),
        n_steps: p.n_steps,
        h_fd: p.h_fd,
        tail_tol: p.tail_tol,
        n_paths: p.n_paths,
        seed,
        sampler: cfg.sampler,
        slope_slack: cfg.thresholds.lambda0_slope_slack,
    };
    let res = lambda0_search(&b, &model, &params)?;
    if ctx.out.is_some() {
        let text = serde_json::to_string_pretty(&res.record())
            .map_err(|e| LevyError::Format(e.to_string()))?;
        let mut w = ctx.create("lambda0.json")?;
        writeln!(w, "{text}")?;
        w.flush()?;
    }
    Ok(lambda0_report(&b, &model, &params, &res))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_path_sample_writes_files() {
        let text = r#"
experiment = "sample"
[model]
family = "brownian"
q_diag = [0.0]
[grid]
n_steps = 16
"#;
        let cfg = ExperimentConfig::from_toml(text).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let out = run(&cfg, dir.path(), OutputFormat::Both).unwrap();
        assert!(out.report.pass);
        let csv = fs::read_to_string(dir.path().join("paths/path_000_00000.csv")).unwrap();
        assert_eq!(csv.lines().count(), 18);
        assert!(csv.lines().skip(1).all(|l| l.ends_with(",0")));
        assert!(dir.path().join("report.json").exists());
        assert!(dir.path().join("report.csv").exists());
    }

    #[test]
    fn shards_split_paths_and_record_seeds() {
        let text = r#"
experiment = "solve"
[model]
family = "isotropic_stable"
alpha = 1.5
[drift]
kind = "sqrt_abs"
[grid]
n_steps = 64
[solve]
n_paths = 5
[seeds]
master = 3
shards = 2
"#;
        let cfg = ExperimentConfig::from_toml(text).unwrap();
        let r = execute(&cfg, None).unwrap().report;
        assert_eq!(r.n_paths, 5);
        assert_eq!(r.seeds, cfg.seeds.shard_seeds());
        assert_eq!(r.rows.len(), 5);
        assert!(r.rows[4].label.starts_with("shard=1;"));
        assert!(r.pass);
    }
}
