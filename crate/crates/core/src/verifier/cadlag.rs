use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{par_map, McSetup, ReportRow, VerificationReport};
use crate::drift::DriftSpec;
use crate::error::{param_err, Result};
use crate::levy_model::LevyModel;
use crate::pathwise_solver::solve_frozen;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CadlagParams {
    pub s: f64,
    pub box_radius: f64,
    /// Start points per axis of the x-grid.
    pub n_x: usize,
    pub k_max: u32,
    pub mc: McSetup,
    /// `D_{k_max}` must not exceed this fraction of the flow's sup-scale.
    pub rel_threshold: f64,
    pub required_fraction: f64,
}

fn x_grid(dim: usize, radius: f64, n: usize) -> Vec<Vec<f64>> {
    let axis: Vec<f64> = if n == 1 {
        vec![0.0]
    } else {
        (0..n)
            .map(|i| -radius + 2.0 * radius * i as f64 / (n - 1) as f64)
            .collect()
    };
    let mut pts = vec![Vec::new()];
    for _ in 0..dim {
        pts = pts
            .into_iter()
            .flat_map(|p| {
                axis.iter().map(move |a| {
                    let mut q = p.clone();
                    q.push(*a);
                    q
                })
            })
            .collect();
    }
    pts
}

/// Right-continuity of `s ↦ φ(s, ·, ·)`: for `s_k = s + 2^{−k}` reports
/// `D_k = sup_x sup_t |φ(s_k, t, x) − φ(s, t, x)|`. Paths with a recorded big
/// jump in `(s, s + 2^{−k_max}]` are excluded from the verdict.
pub fn cadlag_in_s(
    b: &DriftSpec,
    model: &LevyModel,
    params: &CadlagParams,
) -> Result<VerificationReport> {
    let mc = &params.mc;
    let t_end = mc.t_end;
    if !(params.s > 0.0 && params.s < t_end) {
        return Err(param_err("s", "must lie strictly inside (0, T)"));
    }
    if params.k_max == 0 || params.s + 0.5 > t_end {
        return Err(param_err("k_max", "need k_max ≥ 1 and s + 1/2 ≤ T"));
    }
    let grid = mc.grid()?;
    let d = model.dim;
    let xs = x_grid(d, params.box_radius, params.n_x);
    let k_max = params.k_max as usize;

    // per path: (excluded, D_1..D_kmax, sup-scale)
    let per_path: Vec<Result<(bool, Vec<f64>, f64)>> = par_map(mc.n_paths, |k| {
        let path = mc.path(model, &grid, k)?;
        let excluded = path.has_big_jump_in(params.s, params.s + 2f64.powi(-(params.k_max as i32)));
        let times = path.grid.times();
        let mut dk = vec![0.0f64; k_max];
        let mut scale: f64 = 0.0;
        for x in &xs {
            let base = solve_frozen(b, &path, params.s, x, &mc.solver)?;
            let base_x: Vec<Vec<f64>> = (0..times.len())
                .map(|i| {
                    if times[i] <= params.s {
                        x.clone()
                    } else {
                        base.x(i)
                    }
                })
                .collect();
            for bx in &base_x {
                scale = scale.max(crate::stats::dist(bx, x));
            }
            for (j, slot) in dk.iter_mut().enumerate() {
                let sk = params.s + 2f64.powi(-(j as i32 + 1));
                let c = solve_frozen(b, &path, sk, x, &mc.solver)?;
                for (i, &t) in times.iter().enumerate() {
                    let phi_k = if t <= sk { x.clone() } else { c.x(i) };
                    *slot = slot.max(crate::stats::dist(&phi_k, &base_x[i]));
                }
            }
        }
        Ok((excluded, dk, scale))
    });

    let mut report = VerificationReport::new("verify-cadlag", mc.n_paths, vec![mc.seed]);
    let mut considered = 0usize;
    let mut good = 0usize;
    let mut excluded_count = 0usize;
    let mut mean_dk = vec![0.0; k_max];
    for (idx, r) in per_path.into_iter().enumerate() {
        let (excluded, dk, scale) = r?;
        for (m, v) in mean_dk.iter_mut().zip(&dk) {
            *m += v / mc.n_paths as f64;
        }
        let last = dk[k_max - 1];
        let ok = last <= dk[0] && last <= params.rel_threshold * scale;
        if excluded {
            excluded_count += 1;
        } else {
            considered += 1;
            good += ok as usize;
        }
        if idx < 1000 {
            report.rows.push(
                ReportRow::new(format!("path={idx}"))
                    .with("d_1", dk[0])
                    .with("d_kmax", last)
                    .with("sup_scale", scale)
                    .with("excluded", excluded as u8 as f64)
                    .with("ok", ok as u8 as f64),
            );
        }
    }
    for (j, m) in mean_dk.iter().enumerate() {
        report.rows.push(
            ReportRow::new(format!("mean_d_{}", j + 1))
                .with("k", (j + 1) as f64)
                .with("mean_d", *m),
        );
    }
    let fraction = if considered == 0 {
        1.0
    } else {
        good as f64 / considered as f64
    };
    report.ratio_max = Some(fraction);
    report.pass = fraction >= params.required_fraction;
    report.notes.push(format!(
        "{good} of {considered} paths satisfy the right-limit check; {excluded_count} excluded for a big jump right of s"
    ));
    report.config_snapshot = json!({
        "drift": b, "model": crate::path_sampler::model_id(model), "params": params,
    });
    Ok(report)
}
