use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{par_map, stable_mean, sup_dist, McSetup, ReportRow, VerificationReport};
use crate::drift::DriftSpec;
use crate::error::{param_err, Result};
use crate::levy_model::LevyModel;
use crate::pathwise_solver::solve_frozen;
use crate::stats;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LpParams {
    pub p: f64,
    pub pairs: Vec<(Vec<f64>, Vec<f64>)>,
    pub s_values: Vec<f64>,
    pub mc: McSetup,
    /// Largest allowed `max R / min R` over the pairs at a fixed `s`.
    pub max_ratio_spread: f64,
    pub max_failure_fraction: f64,
}

impl LpParams {
    /// Pairs `(x₀, x₀ + δ)` for the given separations along the first axis.
    pub fn shrinking_pairs(x0: &[f64], separations: &[f64]) -> Vec<(Vec<f64>, Vec<f64>)> {
        separations
            .iter()
            .map(|d| {
                let mut y = x0.to_vec();
                y[0] += d;
                (x0.to_vec(), y)
            })
            .collect()
    }
}

/// Estimates `R(x, y, s) = Ê sup_t |Y^{s,x}_t − Y^{s,y}_t|^p / |x − y|^p` for every
/// pair and start time. Differences of `Y` equal differences of `X`, so the
/// heavy-tailed noise never enters the statistic.
pub fn lp_lipschitz(
    b: &DriftSpec,
    model: &LevyModel,
    params: &LpParams,
) -> Result<VerificationReport> {
    if !(params.p >= 2.0) {
        return Err(param_err("p", "must be at least 2"));
    }
    if params.pairs.is_empty() || params.pairs.iter().any(|(x, y)| x == y) {
        return Err(param_err(
            "pairs",
            "need at least one pair of distinct points",
        ));
    }
    if params
        .pairs
        .iter()
        .any(|(x, y)| x.len() != model.dim || y.len() != model.dim)
    {
        return Err(param_err("pairs", "points must match the model dimension"));
    }
    let mc = &params.mc;
    let grid = mc.grid()?;
    let d = model.dim;
    let mut points: Vec<Vec<f64>> = Vec::new();
    let mut pair_idx = Vec::new();
    for (x, y) in &params.pairs {
        let mut find = |v: &Vec<f64>| match points.iter().position(|p| p == v) {
            Some(i) => i,
            None => {
                points.push(v.clone());
                points.len() - 1
            }
        };
        let i = find(x);
        let j = find(y);
        pair_idx.push((i, j));
    }
    let n_cells = params.s_values.len() * params.pairs.len();

    let per_path: Vec<Result<(Vec<Option<f64>>, usize)>> = par_map(mc.n_paths, |k| {
        let path = mc.path(model, &grid, k)?;
        let mut out = Vec::with_capacity(n_cells);
        let mut failed = 0;
        for &s in &params.s_values {
            let curves: Vec<Option<Vec<f64>>> = points
                .iter()
                .map(|x| match solve_frozen(b, &path, s, x, &mc.solver) {
                    Ok(c) => Some(c.y_values().to_vec()),
                    Err(_) => {
                        failed += 1;
                        None
                    }
                })
                .collect();
            for &(i, j) in &pair_idx {
                out.push(match (&curves[i], &curves[j]) {
                    (Some(a), Some(c)) => Some(sup_dist(a, c, d).powf(params.p)),
                    _ => None,
                });
            }
        }
        Ok((out, failed))
    });

    let mut cells: Vec<Vec<f64>> = vec![Vec::with_capacity(mc.n_paths); n_cells];
    let mut failures = 0;
    for r in per_path {
        let (vals, failed) = r?;
        failures += failed;
        for (c, v) in cells.iter_mut().zip(vals) {
            if let Some(v) = v {
                c.push(v);
            }
        }
    }

    let mut report = VerificationReport::new("verify-lp", mc.n_paths, vec![mc.seed]);
    let mut ratio_max: f64 = 0.0;
    let mut spread_ok = true;
    let mut worst_spread: f64 = 1.0;
    for (si, &s) in params.s_values.iter().enumerate() {
        let mut ratios = Vec::new();
        for (pi, (x, y)) in params.pairs.iter().enumerate() {
            let vals = &cells[si * params.pairs.len() + pi];
            let denom = stats::dist(x, y).powf(params.p);
            let ratio = stable_mean(vals) / denom;
            let se = if vals.len() > 1 {
                stats::std_error(vals) / denom
            } else {
                0.0
            };
            ratios.push(ratio);
            ratio_max = ratio_max.max(ratio);
            report.rows.push(
                ReportRow::new(format!("s={s};dist={}", stats::dist(x, y)))
                    .with("s", s)
                    .with("dist", stats::dist(x, y))
                    .with("ratio", ratio)
                    .with("ratio_se", se)
                    .with("n_ok", vals.len() as f64),
            );
        }
        let hi = ratios.iter().cloned().fold(f64::MIN, f64::max);
        let lo = ratios.iter().cloned().fold(f64::MAX, f64::min);
        let spread = hi / lo;
        worst_spread = worst_spread.max(spread);
        if !(spread.is_finite() && spread <= params.max_ratio_spread) {
            spread_ok = false;
        }
    }
    let total = mc.n_paths * params.s_values.len() * points.len();
    let failure_fraction = failures as f64 / total.max(1) as f64;
    report.failures = failures;
    report.ratio_max = Some(ratio_max);
    report.pass =
        spread_ok && ratio_max.is_finite() && failure_fraction <= params.max_failure_fraction;
    report.notes.push(format!(
        "worst ratio spread across separations: {worst_spread}"
    ));
    report.config_snapshot = json!({
        "drift": b, "model": crate::path_sampler::model_id(model), "params": params,
    });
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(n_paths: usize) -> LpParams {
        LpParams {
            p: 2.0,
            pairs: LpParams::shrinking_pairs(&[0.3], &[1.0, 0.125, 1.0 / 64.0]),
            s_values: vec![0.0, 0.3, 0.7],
            mc: McSetup::new(n_paths, 5, 256),
            max_ratio_spread: 4.0,
            max_failure_fraction: 0.01,
        }
    }

    #[test]
    fn zero_drift_ratio_is_exactly_one() {
        let m = LevyModel::isotropic_stable(1, 1.5, 1.0).unwrap();
        for p in [2.0, 3.5] {
            let mut prm = params(10);
            prm.p = p;
            let r = lp_lipschitz(&DriftSpec::zero(1).unwrap(), &m, &prm).unwrap();
            assert!(r.rows.iter().all(|row| row.stats["ratio"] == 1.0));
            assert!(r.pass);
        }
    }

    #[test]
    fn linear_drift_on_zero_path_matches_exponential() {
        let lambda = 0.8;
        let r = lp_lipschitz(
            &DriftSpec::scalar_linear(lambda).unwrap(),
            &LevyModel::degenerate(1),
            &params(4),
        )
        .unwrap();
        for row in &r.rows {
            let s = row.stats["s"];
            let want = (2.0 * lambda * (1.0 - s)).exp();
            // trapezoid error on e^{λt} at Δt = 1/256
            assert!((row.stats["ratio"] / want - 1.0).abs() < 1e-5, "{row:?}");
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        let m = LevyModel::degenerate(1);
        let b = DriftSpec::zero(1).unwrap();
        let mut prm = params(2);
        prm.p = 1.5;
        assert!(lp_lipschitz(&b, &m, &prm).is_err());
        let mut prm = params(2);
        prm.pairs = vec![(vec![1.0], vec![1.0])];
        assert!(lp_lipschitz(&b, &m, &prm).is_err());
    }
}
