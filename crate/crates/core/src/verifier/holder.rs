use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{par_map, sup_dist, McSetup, ReportRow, VerificationReport};
use crate::drift::DriftSpec;
use crate::error::{param_err, Result};
use crate::levy_model::LevyModel;
use crate::pathwise_solver::solve_frozen;
use crate::rng::{CounterRng, StreamTag};
use crate::stats;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HolderParams {
    pub s: f64,
    pub box_radius: f64,
    /// Random base points per path.
    pub n_points: usize,
    /// Partners per base point, at log-spaced separations along one random direction.
    pub n_scales: usize,
    pub min_separation: f64,
    pub max_separation: f64,
    pub n_grr: usize,
    pub mc: McSetup,
    /// Subtracted from `(n_grr − 2d)/n_grr` to form the per-path exponent threshold.
    pub exponent_slack: f64,
    pub required_fraction: f64,
}

/// Slope of `log y` on `log x` with a separate intercept per group.
fn within_group_slope(groups: &[(Vec<f64>, Vec<f64>)]) -> f64 {
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    for (x, y) in groups {
        let pts: Vec<(f64, f64)> = x
            .iter()
            .zip(y)
            .filter(|(a, b)| **a > 0.0 && **b > 0.0)
            .map(|(a, b)| (a.ln(), b.ln()))
            .collect();
        if pts.len() < 2 {
            continue;
        }
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / pts.len() as f64;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / pts.len() as f64;
        for (a, b) in pts {
            sxy += (a - mx) * (b - my);
            sxx += (a - mx) * (a - mx);
        }
    }
    sxy / sxx
}

/// Per path, fits the exponent of `sup_t |φ(s,t,x) − φ(s,t,y)|` against
/// `|x − y|`. Each random base point `x` in `[−R, R]^d` gets partners at
/// several separations along one direction, and the log-log slope is fitted
/// with one intercept per base point, which removes the spread of the local
/// Lipschitz constant across the box.
pub fn holder_in_x(
    b: &DriftSpec,
    model: &LevyModel,
    params: &HolderParams,
) -> Result<VerificationReport> {
    let d = model.dim;
    if params.n_grr <= 2 * d {
        return Err(param_err("n_grr", "must exceed twice the dimension"));
    }
    if params.n_points == 0
        || params.n_scales < 2
        || !(params.box_radius > 0.0)
        || !(params.min_separation > 0.0 && params.max_separation > params.min_separation)
    {
        return Err(param_err(
            "holder",
            "need n_points ≥ 1, n_scales ≥ 2, box_radius > 0 and 0 < min_separation < max_separation",
        ));
    }
    let mc = &params.mc;
    let grid = mc.grid()?;
    let threshold = (params.n_grr - 2 * d) as f64 / params.n_grr as f64 - params.exponent_slack;
    let ratio = params.max_separation / params.min_separation;
    let seps: Vec<f64> = (0..params.n_scales)
        .map(|j| params.min_separation * ratio.powf(j as f64 / (params.n_scales - 1) as f64))
        .collect();

    let per_path: Vec<Result<(Option<f64>, usize)>> = par_map(mc.n_paths, |k| {
        let path = mc.path(model, &grid, k)?;
        let mut rng = CounterRng::new(mc.seed, k as u64, StreamTag::Probe);
        let mut groups = Vec::with_capacity(params.n_points);
        let mut failed = 0;
        for _ in 0..params.n_points {
            let x: Vec<f64> = (0..d)
                .map(|_| params.box_radius * (2.0 * rng.open01() - 1.0))
                .collect();
            let mut dir: Vec<f64> = (0..d).map(|_| 2.0 * rng.open01() - 1.0).collect();
            let n = stats::euclid(&dir).max(1e-12);
            dir.iter_mut().for_each(|v| *v /= n);
            // point the partners towards the box center so they stay inside
            if x.iter().zip(&dir).map(|(a, u)| a * u).sum::<f64>() > 0.0 {
                dir.iter_mut().for_each(|v| *v = -*v);
            }
            let cx = match solve_frozen(b, &path, params.s, &x, &mc.solver) {
                Ok(c) => c,
                Err(_) => {
                    failed += 1;
                    continue;
                }
            };
            let mut gx = Vec::with_capacity(seps.len());
            let mut gy = Vec::with_capacity(seps.len());
            for &sep in &seps {
                let y: Vec<f64> = x.iter().zip(&dir).map(|(a, u)| a + sep * u).collect();
                match solve_frozen(b, &path, params.s, &y, &mc.solver) {
                    Ok(cy) => {
                        gx.push(stats::dist(&x, &y));
                        gy.push(sup_dist(cx.y_values(), cy.y_values(), d));
                    }
                    Err(_) => failed += 1,
                }
            }
            groups.push((gx, gy));
        }
        let exponent = within_group_slope(&groups);
        Ok((Some(exponent).filter(|e| e.is_finite()), failed))
    });

    let mut exponents = Vec::new();
    let mut failures = 0;
    for r in per_path {
        let (e, f) = r?;
        failures += f;
        if let Some(e) = e {
            exponents.push(e);
        }
    }
    let above = exponents.iter().filter(|e| **e >= threshold).count();
    let fraction = above as f64 / mc.n_paths as f64;
    let mut report = VerificationReport::new("verify-holder", mc.n_paths, vec![mc.seed]);
    let mut sorted = exponents.clone();
    sorted.sort_by(f64::total_cmp);
    if !sorted.is_empty() {
        report.fitted_exponent = Some(stats::quantile(&sorted, 0.5));
        report.rows.push(
            ReportRow::new("exponents")
                .with("median", stats::quantile(&sorted, 0.5))
                .with("min", sorted[0])
                .with("max", sorted[sorted.len() - 1])
                .with("q05", stats::quantile(&sorted, 0.05))
                .with("threshold", threshold)
                .with("fraction_above", fraction),
        );
    }
    for (k, e) in exponents.iter().enumerate().take(1000) {
        report
            .rows
            .push(ReportRow::new(format!("path={k}")).with("exponent", *e));
    }
    report.failures = failures;
    report.pass = fraction >= params.required_fraction;
    report.notes.push(format!(
        "{above} of {} paths have fitted exponent ≥ {threshold}",
        mc.n_paths
    ));
    report.config_snapshot = json!({
        "drift": b, "model": crate::path_sampler::model_id(model), "params": params,
        "exponent_threshold": threshold,
    });
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(n_paths: usize) -> HolderParams {
        HolderParams {
            s: 0.0,
            box_radius: 1.0,
            n_points: 4,
            n_scales: 3,
            min_separation: 1e-3,
            max_separation: 0.05,
            n_grr: 16,
            mc: McSetup::new(n_paths, 3, 256),
            exponent_slack: 0.1,
            required_fraction: 0.95,
        }
    }

    #[test]
    fn zero_drift_exponent_is_one() {
        let m = LevyModel::isotropic_stable(1, 1.5, 1.0).unwrap();
        let r = holder_in_x(&DriftSpec::zero(1).unwrap(), &m, &params(5)).unwrap();
        assert!((r.fitted_exponent.unwrap() - 1.0).abs() < 1e-9);
        assert!(r.pass);
    }

    #[test]
    fn linear_flow_exponent_is_one() {
        let r = holder_in_x(
            &DriftSpec::scalar_linear(0.5).unwrap(),
            &LevyModel::degenerate(1),
            &params(3),
        )
        .unwrap();
        assert!((r.fitted_exponent.unwrap() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn n_grr_must_exceed_twice_dim() {
        let mut p = params(1);
        p.n_grr = 2;
        assert!(holder_in_x(&DriftSpec::zero(1).unwrap(), &LevyModel::degenerate(1), &p).is_err());
    }
}
