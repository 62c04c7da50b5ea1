//! Deterministic solution of the frozen-path equation
//! `Y_t = x + ∫_s^t b(r, Y_r + L_r − L_s) dr` on one realized noise path, and
//! the flow `φ(s, t, x) = Y_t + L_t − L_s` built from it.
//!
//! The path is constant on each cell `[t_j, t_{j+1})`, so the trapezoid rule on
//! a cell uses the left-limit `Y_{t_{j+1}} + L_{t_j} − L_s` at its right end. Every
//! node is treated as a potential jump time.

use std::io::Write;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::drift::DriftSpec;
use crate::error::{param_err, LevyError, Result};
use crate::path_sampler::{LevyPath, TimeGrid};

pub const DEFAULT_TOL: f64 = 1e-8;
pub const DEFAULT_MAX_ITER: usize = 200;
pub const DEFAULT_N_STEPS: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    #[default]
    Picard,
    Euler,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub method: Method,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            method: Method::Picard,
            tol: DEFAULT_TOL,
            max_iter: DEFAULT_MAX_ITER,
        }
    }
}

impl SolverConfig {
    pub fn picard(tol: f64) -> Self {
        Self {
            method: Method::Picard,
            tol,
            max_iter: DEFAULT_MAX_ITER,
        }
    }

    pub fn euler() -> Self {
        Self {
            method: Method::Euler,
            ..Self::default()
        }
    }
}

/// Solved continuous part `Y` of one trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct SolutionCurve {
    pub grid: Arc<TimeGrid>,
    pub start_time: f64,
    pub start_point: Vec<f64>,
    pub dim: usize,
    y_values: Vec<f64>,
    /// `L_{t_i} − L_s` at each node, zero for `t_i ≤ s`.
    shifts: Vec<f64>,
    first: usize,
    pub method: Method,
    pub iterations: usize,
    /// Sup-norm defect of the integral equation under the method's own quadrature.
    pub residual: f64,
    pub tol: f64,
    /// Picard increments `‖f_{k+1} − f_k‖_∞`, empty for Euler.
    pub increments: Vec<f64>,
}

impl SolutionCurve {
    #[inline]
    pub fn y(&self, i: usize) -> &[f64] {
        &self.y_values[i * self.dim..(i + 1) * self.dim]
    }

    pub fn y_values(&self) -> &[f64] {
        &self.y_values
    }

    /// Index of the first node strictly after the start time.
    pub fn first_free_node(&self) -> usize {
        self.first
    }

    /// `X_{t_i} = Y_{t_i} + L_{t_i} − L_s`.
    pub fn x(&self, i: usize) -> Vec<f64> {
        let d = self.dim;
        (0..d)
            .map(|a| self.y_values[i * d + a] + self.shifts[i * d + a])
            .collect()
    }

    /// `Y_t`, linear between nodes (and between `s` and the first free node).
    pub fn y_at(&self, t: f64) -> Result<Vec<f64>> {
        let t_end = self.grid.t_end();
        if !(0.0..=t_end).contains(&t) {
            return Err(LevyError::Domain { t, t_end });
        }
        if t <= self.start_time {
            return Ok(self.start_point.clone());
        }
        let times = self.grid.times();
        let k = self.grid.locate(t);
        if times[k] == t {
            return Ok(self.y(k).to_vec());
        }
        let (t0, y0) = if k + 1 == self.first {
            (self.start_time, self.start_point.as_slice())
        } else {
            (times[k], self.y(k))
        };
        let w = (t - t0) / (times[k + 1] - t0);
        Ok(y0
            .iter()
            .zip(self.y(k + 1))
            .map(|(a, b)| a + w * (b - a))
            .collect())
    }

    /// CSV with columns `t, Y_1..Y_d, X_1..X_d`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let d = self.dim;
        let mut header = vec!["t".to_string()];
        header.extend((1..=d).map(|k| format!("Y_{k}")));
        header.extend((1..=d).map(|k| format!("X_{k}")));
        writeln!(w, "{}", header.join(","))?;
        for (i, t) in self.grid.times().iter().enumerate() {
            let mut row = vec![format!("{t}")];
            row.extend(self.y(i).iter().map(|v| format!("{v}")));
            row.extend(self.x(i).iter().map(|v| format!("{v}")));
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }
}

struct Frozen<'a> {
    b: &'a DriftSpec,
    times: &'a [f64],
    d: usize,
    s: f64,
    x: &'a [f64],
    first: usize,
    shifts: Vec<f64>,
}

impl<'a> Frozen<'a> {
    fn new(b: &'a DriftSpec, path: &'a LevyPath, s: f64, x: &'a [f64]) -> Result<Self> {
        let t_end = path.grid.t_end();
        if !(0.0..=t_end).contains(&s) {
            return Err(LevyError::Domain { t: s, t_end });
        }
        if x.len() != path.dim || b.dim != path.dim {
            return Err(param_err(
                "x",
                "dimension must match the path and the drift",
            ));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(param_err("x", "must be finite"));
        }
        let d = path.dim;
        let times = path.grid.times();
        let first = path.grid.locate(s) + 1;
        let ls = path.node(first - 1);
        let mut shifts = vec![0.0; times.len() * d];
        for i in first..times.len() {
            for a in 0..d {
                shifts[i * d + a] = path.node(i)[a] - ls[a];
            }
        }
        Ok(Self {
            b,
            times,
            d,
            s,
            x,
            first,
            shifts,
        })
    }

    fn n_nodes(&self) -> usize {
        self.times.len()
    }

    /// Left end (time, shift index) of the cell ending at node `i ≥ first`.
    #[inline]
    fn cell_left(&self, i: usize) -> f64 {
        if i == self.first {
            self.s
        } else {
            self.times[i - 1]
        }
    }

    fn initial(&self) -> Vec<f64> {
        let mut y = vec![0.0; self.n_nodes() * self.d];
        for i in 0..self.n_nodes() {
            y[i * self.d..(i + 1) * self.d].copy_from_slice(self.x);
        }
        y
    }

    /// Applies the trapezoid Picard map to `f`, writing into `out`.
    fn picard_map(&self, f: &[f64], out: &mut [f64]) -> Result<()> {
        let d = self.d;
        let mut arg = vec![0.0; d];
        let mut bl = vec![0.0; d];
        let mut br = vec![0.0; d];
        for i in 0..self.first.min(self.n_nodes()) {
            out[i * d..(i + 1) * d].copy_from_slice(self.x);
        }
        for i in self.first..self.n_nodes() {
            let tl = self.cell_left(i);
            let h = self.times[i] - tl;
            let (yl, sh) = if i == self.first {
                (self.x, &self.shifts[(i - 1) * d..i * d])
            } else {
                (&f[(i - 1) * d..i * d], &self.shifts[(i - 1) * d..i * d])
            };
            for a in 0..d {
                arg[a] = yl[a] + sh[a];
            }
            self.b.eval(tl, &arg, &mut bl);
            for a in 0..d {
                arg[a] = f[i * d + a] + sh[a];
            }
            self.b.eval(self.times[i], &arg, &mut br);
            for a in 0..d {
                let prev = if i == self.first {
                    self.x[a]
                } else {
                    out[(i - 1) * d + a]
                };
                out[i * d + a] = prev + 0.5 * h * (bl[a] + br[a]);
            }
        }
        if out.iter().any(|v| !v.is_finite()) {
            return Err(LevyError::Numeric(
                "drift produced a non-finite value".into(),
            ));
        }
        Ok(())
    }

    fn euler(&self) -> Result<(Vec<f64>, f64)> {
        let d = self.d;
        let mut y = self.initial();
        let mut arg = vec![0.0; d];
        let mut bl = vec![0.0; d];
        let mut acc = vec![0.0; d];
        let mut residual: f64 = 0.0;
        for i in self.first..self.n_nodes() {
            let tl = self.cell_left(i);
            let h = self.times[i] - tl;
            for a in 0..d {
                let yl = if i == self.first {
                    self.x[a]
                } else {
                    y[(i - 1) * d + a]
                };
                arg[a] = yl + self.shifts[(i - 1) * d + a];
            }
            self.b.eval(tl, &arg, &mut bl);
            for a in 0..d {
                let yl = if i == self.first {
                    self.x[a]
                } else {
                    y[(i - 1) * d + a]
                };
                y[i * d + a] = yl + h * bl[a];
                acc[a] += h * bl[a];
                residual = residual.max((y[i * d + a] - self.x[a] - acc[a]).abs());
            }
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(LevyError::Numeric(
                "drift produced a non-finite value".into(),
            ));
        }
        Ok((y, residual))
    }

    fn picard(
        &self,
        mut f: Vec<f64>,
        tol: f64,
        max_iter: usize,
    ) -> Result<(Vec<f64>, usize, f64, Vec<f64>)> {
        let n = f.len();
        let mut g = vec![0.0; n];
        let mut h = vec![0.0; n];
        self.picard_map(&f, &mut g)?;
        let mut increments = Vec::new();
        let mut best = (f64::INFINITY, f.clone());
        for k in 1..=max_iter {
            let inc = sup_diff(&g, &f);
            increments.push(inc);
            self.picard_map(&g, &mut h)?;
            let res = sup_diff(&h, &g);
            if res < best.0 {
                best = (res, g.clone());
            }
            if inc <= 0.5 * tol && res <= tol {
                return Ok((g, k, res, increments));
            }
            std::mem::swap(&mut f, &mut g);
            std::mem::swap(&mut g, &mut h);
        }
        let d = self.d;
        Err(LevyError::Convergence {
            iterations: max_iter,
            defect: best.0,
            tol,
            best: Box::new(best.1.chunks(d).map(<[f64]>::to_vec).collect()),
        })
    }

    fn finish(
        self,
        y: Vec<f64>,
        path: &LevyPath,
        method: Method,
        iterations: usize,
        residual: f64,
        tol: f64,
        increments: Vec<f64>,
    ) -> SolutionCurve {
        SolutionCurve {
            grid: path.grid.clone(),
            start_time: self.s,
            start_point: self.x.to_vec(),
            dim: self.d,
            y_values: y,
            shifts: self.shifts,
            first: self.first,
            method,
            iterations,
            residual,
            tol,
            increments,
        }
    }
}

#[inline]
fn sup_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

fn check_cfg(cfg: &SolverConfig) -> Result<()> {
    if !(cfg.tol > 0.0) {
        return Err(param_err("tol", "must be positive"));
    }
    if cfg.max_iter == 0 {
        return Err(param_err("max_iter", "must be positive"));
    }
    Ok(())
}

/// Solves the frozen-path equation from `(s, x)` on the grid of `path`.
pub fn solve_frozen(
    b: &DriftSpec,
    path: &LevyPath,
    s: f64,
    x: &[f64],
    cfg: &SolverConfig,
) -> Result<SolutionCurve> {
    check_cfg(cfg)?;
    let fr = Frozen::new(b, path, s, x)?;
    match cfg.method {
        Method::Euler => {
            let (y, res) = fr.euler()?;
            Ok(fr.finish(y, path, Method::Euler, 1, res, cfg.tol, Vec::new()))
        }
        Method::Picard => {
            let init = fr.initial();
            let (y, it, res, incs) = fr.picard(init, cfg.tol, cfg.max_iter)?;
            Ok(fr.finish(y, path, Method::Picard, it, res, cfg.tol, incs))
        }
    }
}

/// Picard iteration started from an arbitrary initial curve given at every
/// grid node (row-major, `dim` per node); nodes at or before `s` are ignored.
pub fn solve_picard_from(
    b: &DriftSpec,
    path: &LevyPath,
    s: f64,
    x: &[f64],
    initial: &[f64],
    cfg: &SolverConfig,
) -> Result<SolutionCurve> {
    check_cfg(cfg)?;
    let fr = Frozen::new(b, path, s, x)?;
    if initial.len() != fr.n_nodes() * fr.d {
        return Err(param_err("initial", "must hold one d-vector per grid node"));
    }
    let mut f = initial.to_vec();
    for i in 0..fr.first.min(fr.n_nodes()) {
        f[i * fr.d..(i + 1) * fr.d].copy_from_slice(x);
    }
    let (y, it, res, incs) = fr.picard(f, cfg.tol, cfg.max_iter)?;
    Ok(fr.finish(y, path, Method::Picard, it, res, cfg.tol, incs))
}

/// `φ(s, t, x)`; equals `x` whenever `t ≤ s`.
pub fn flow(
    b: &DriftSpec,
    path: &LevyPath,
    s: f64,
    t: f64,
    x: &[f64],
    cfg: &SolverConfig,
) -> Result<Vec<f64>> {
    let t_end = path.grid.t_end();
    if !(0.0..=t_end).contains(&t) {
        return Err(LevyError::Domain { t, t_end });
    }
    if t <= s {
        return Ok(x.to_vec());
    }
    let curve = solve_frozen(b, path, s, x, cfg)?;
    flow_from_curve(&curve, path, t)
}

/// `φ(s, t, x)` read off an already solved curve.
pub fn flow_from_curve(curve: &SolutionCurve, path: &LevyPath, t: f64) -> Result<Vec<f64>> {
    if t <= curve.start_time {
        return Ok(curve.start_point.clone());
    }
    let y = curve.y_at(t)?;
    let lt = path.value_at(t)?;
    let ls = path.value_at(curve.start_time)?;
    Ok((0..curve.dim).map(|a| y[a] + lt[a] - ls[a]).collect())
}

/// `|φ(s, t, x) − φ(r, t, φ(s, r, x))|`.
pub fn flow_composition_residual(
    b: &DriftSpec,
    path: &LevyPath,
    s: f64,
    r: f64,
    t: f64,
    x: &[f64],
    cfg: &SolverConfig,
) -> Result<f64> {
    if !(s < r && r <= t) {
        return Err(param_err("times", "need s < r ≤ t"));
    }
    let from_s = solve_frozen(b, path, s, x, cfg)?;
    let direct = flow_from_curve(&from_s, path, t)?;
    let mid = flow_from_curve(&from_s, path, r)?;
    let composed = flow(b, path, r, t, &mid, cfg)?;
    Ok(crate::stats::dist(&direct, &composed))
}
