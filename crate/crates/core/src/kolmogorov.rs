//! Semigroup densities of one-dimensional symmetric stable laws, the
//! small-time decay of `‖D P_t f‖₀`, and Monte Carlo resolvents
//! `u_λ(x) = E ∫₀^∞ e^{−λt} f(X_t^x) dt` with their finite-difference gradients.

use std::f64::consts::PI;
use std::io::Write;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use statrs::function::gamma::gamma;

use crate::drift::DriftSpec;
use crate::error::{param_err, LevyError, Result};
use crate::levy_model::LevyModel;
use crate::path_sampler::{model_id, sample_path_with, SamplerOptions, TimeGrid};
use crate::pathwise_solver::{solve_frozen, SolverConfig};
use crate::stats;
use crate::verifier::{par_map, ReportRow, VerificationReport};

pub const DENSITY_POINTS: usize = 1 << 16;
/// Largest internal transform used to push periodic images away from the window.
pub const MAX_TRANSFORM_POINTS: usize = 1 << 22;
pub const ALIAS_TARGET: f64 = 1e-8;
pub const ALIAS_LIMIT: f64 = 1e-6;
pub const DEFAULT_H_FD: f64 = 1e-3;
pub const DEFAULT_TAIL_TOL: f64 = 1e-6;
pub const HORIZON_FACTOR: f64 = 12.0;
pub const DEFAULT_RESOLVENT_STEPS: usize = 2048;
pub const DU_THRESHOLD: f64 = 1.0 / 3.0;

/// Uniform window `x_j = −W + j·2W/N`, `j = 0..N`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DensityGrid {
    pub half_width: f64,
    pub n_points: usize,
}

impl DensityGrid {
    pub fn new(half_width: f64, n_points: usize) -> Result<Self> {
        if !(half_width > 0.0 && half_width.is_finite()) {
            return Err(param_err("half_width", "must be positive"));
        }
        if n_points < 16 || n_points % 2 != 0 {
            return Err(param_err("n_points", "must be even and at least 16"));
        }
        Ok(Self {
            half_width,
            n_points,
        })
    }

    /// `2¹⁶` points on half-width `max(20, 20·(t·scale)^{1/α})`.
    pub fn default_for(alpha: f64, scale: f64, t: f64) -> Self {
        Self {
            half_width: (20.0 * (t * scale).powf(1.0 / alpha)).max(20.0),
            n_points: DENSITY_POINTS,
        }
    }

    pub fn dx(&self) -> f64 {
        2.0 * self.half_width / self.n_points as f64
    }

    pub fn x(&self, j: usize) -> f64 {
        -self.half_width + j as f64 * self.dx()
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.n_points).map(|j| self.x(j)).collect()
    }
}

/// Density of `L_t` for the law with exponent `scale·|h|^α`, and its derivative.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityTable {
    pub alpha: f64,
    pub scale: f64,
    pub t: f64,
    pub grid: DensityGrid,
    pub density: Vec<f64>,
    pub derivative: Vec<f64>,
    /// Probability of `|L_t| > W`, up to `2W·alias_bound`.
    pub tail_mass: f64,
    /// Bound on the pointwise contamination by periodic images.
    pub alias_bound: f64,
    pub transform_points: usize,
}

impl DensityTable {
    pub fn x_grid(&self) -> Vec<f64> {
        self.grid.points()
    }

    /// Riemann sum over the window.
    pub fn window_mass(&self) -> f64 {
        self.density.iter().sum::<f64>() * self.grid.dx()
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "x,density,derivative")?;
        for (j, (p, dp)) in self.density.iter().zip(&self.derivative).enumerate() {
            writeln!(w, "{},{},{}", self.grid.x(j), p, dp)?;
        }
        Ok(())
    }
}

/// Leading tail `p(y) ≈ t·scale·c_α·|y|^{−1−α}` of the stable density, or the
/// Gaussian density itself when `α = 2`.
fn tail_density(alpha: f64, ts: f64, y: f64) -> f64 {
    if alpha == 2.0 {
        (-y * y / (4.0 * ts)).exp() / (4.0 * PI * ts).sqrt()
    } else {
        let c = gamma(1.0 + alpha) * (PI * alpha / 2.0).sin() / PI;
        ts * c * y.abs().powf(-1.0 - alpha)
    }
}

/// About twice the summed tail density of all images at distance `mP − W`, `m ≥ 1`.
fn alias_bound(alpha: f64, ts: f64, period: f64, w: f64) -> f64 {
    let terms = 1000;
    let mut s: f64 = (1..=terms)
        .map(|m| tail_density(alpha, ts, m as f64 * period - w))
        .sum();
    if alpha < 2.0 {
        let y = (terms as f64 + 0.5) * period - w;
        s += tail_density(alpha, ts, y) * y / (alpha * period);
    }
    // both sides; the next term of the tail expansion is below a quarter of
    // the leading one once |y| exceeds 20·(t·scale)^{1/α}
    2.5 * s
}

fn check_stable_args(alpha: f64, scale: f64, t: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha <= 2.0) {
        return Err(param_err(
            "alpha",
            format!("must lie in (0, 2], got {alpha}"),
        ));
    }
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(param_err("scale", "must be positive"));
    }
    if !(t > 0.0 && t.is_finite()) {
        return Err(param_err("t", "must be positive"));
    }
    Ok(())
}

/// Fourier inversion of `e^{−t·scale·|h|^α}` on the window `grid`.
///
/// The transform runs on a period that is a power-of-two multiple of the
/// window, chosen so that periodic images contribute less than `1e−8` to
/// each table value where that fits in `MAX_TRANSFORM_POINTS`; above `1e−6`
/// the call fails. The derivative is obtained by multiplying the transform by
/// `−ih` before inversion.
pub fn stable_density_1d(
    alpha: f64,
    scale: f64,
    t: f64,
    grid: DensityGrid,
) -> Result<DensityTable> {
    check_stable_args(alpha, scale, t)?;
    let DensityGrid {
        half_width: w,
        n_points: n,
    } = DensityGrid::new(grid.half_width, grid.n_points)?;
    let dx = grid.dx();
    let ts = t * scale;

    // the window spacing must resolve the characteristic function
    let nyquist = PI / dx;
    if ts * nyquist.powf(alpha) < 23.0 {
        let h_needed = (23.0 / ts).powf(1.0 / alpha);
        return Err(LevyError::Resolution {
            reason: format!("spacing {dx} does not resolve the density at t = {t}"),
            suggested_half_width: n as f64 * PI / (2.0 * h_needed),
        });
    }

    let mut m = n;
    let mut bound = alias_bound(alpha, ts, m as f64 * dx, w);
    while bound > ALIAS_TARGET && m < MAX_TRANSFORM_POINTS {
        m *= 2;
        bound = alias_bound(alpha, ts, m as f64 * dx, w);
    }
    if bound > ALIAS_LIMIT {
        let mut period = m as f64 * dx;
        while alias_bound(alpha, ts, period, w) > ALIAS_LIMIT {
            period *= 2.0;
        }
        return Err(LevyError::Resolution {
            reason: format!("periodic images leave error {bound:e} above {ALIAS_LIMIT:e}"),
            suggested_half_width: period * n as f64 / (2.0 * MAX_TRANSFORM_POINTS as f64),
        });
    }

    let period = m as f64 * dx;
    // density and derivative are both real, so one transform of `c + i·c'` carries both
    let mut buf: Vec<Complex64> = (0..m)
        .map(|k| {
            let kk = if k <= m / 2 {
                k as f64
            } else {
                k as f64 - m as f64
            };
            let h = 2.0 * PI * kk / period;
            let phi = (-ts * h.abs().powf(alpha)).exp() / period;
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            let dh = if k == m / 2 { 0.0 } else { h };
            Complex64::new(sign * phi * (1.0 + dh), 0.0)
        })
        .collect();
    FftPlanner::new().plan_fft_forward(m).process(&mut buf);

    let i0 = (m - n) / 2;
    let window = &buf[i0..i0 + n];
    let density: Vec<f64> = window.iter().map(|c| c.re).collect();
    let derivative: Vec<f64> = window.iter().map(|c| c.im).collect();
    let inside = density.iter().sum::<f64>() * dx;
    Ok(DensityTable {
        alpha,
        scale,
        t,
        grid,
        density,
        derivative,
        tail_mass: (1.0 - inside).max(0.0),
        alias_bound: bound,
        transform_points: m,
    })
}

/// Bounded test functions with `‖f‖₀ = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Probe {
    Step,
    /// `e·exp(−1/(1 − x²))` on `(−1, 1)`.
    Bump,
    Oscillatory {
        k: f64,
    },
}

impl Probe {
    pub fn standard() -> Vec<Probe> {
        vec![Probe::Step, Probe::Bump, Probe::Oscillatory { k: 4.0 }]
    }

    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            Probe::Step => {
                if x > 0.0 {
                    1.0
                } else if x < 0.0 {
                    -1.0
                } else {
                    0.0
                }
            }
            Probe::Bump => {
                if x.abs() < 1.0 {
                    (1.0 - 1.0 / (1.0 - x * x)).exp()
                } else {
                    0.0
                }
            }
            Probe::Oscillatory { k } => (k * x).cos(),
        }
    }

    pub fn name(&self) -> String {
        match self {
            Probe::Step => "step".into(),
            Probe::Bump => "bump".into(),
            Probe::Oscillatory { k } => format!("cos{k}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradientCheck {
    pub alpha: f64,
    pub scale: f64,
    pub t_list: Vec<f64>,
    pub probes: Vec<Probe>,
    /// `‖D P_t f‖₀` per probe (outer) and time (inner).
    pub sup_gradient: Vec<Vec<f64>>,
    pub slopes: Vec<f64>,
    /// Probe with the largest gradient at the smallest time.
    pub worst_probe: usize,
    pub worst_slope: f64,
}

impl GradientCheck {
    /// Worst slope inside `[−1/α − lower_slack, −1/α + upper_slack]`.
    pub fn within(&self, lower_slack: f64, upper_slack: f64) -> bool {
        let c = -1.0 / self.alpha;
        self.worst_slope >= c - lower_slack && self.worst_slope <= c + upper_slack
    }
}

/// Points at which `D P_t f` is evaluated.
fn gradient_eval_points() -> Vec<f64> {
    (0..=80).map(|i| -2.0 + i as f64 * 0.05).collect()
}

/// Log-log slope of `t ↦ ‖(∂p_t) ∗ f‖₀` for each probe. The worst probe is
/// the one with the largest gradient at the smallest time, i.e. the one
/// closest to saturating a `t^{−1/α}` bound.
pub fn gradient_estimate_check(
    alpha: f64,
    scale: f64,
    t_list: &[f64],
    probes: &[Probe],
) -> Result<GradientCheck> {
    if t_list.len() < 2 || t_list.iter().any(|t| !(*t > 0.0 && *t <= 1.0)) {
        return Err(param_err("t_list", "need at least two times in (0, 1]"));
    }
    if probes.is_empty() {
        return Err(param_err("probes", "need at least one probe"));
    }
    let xs = gradient_eval_points();
    let mut sup_gradient = vec![Vec::with_capacity(t_list.len()); probes.len()];
    for &t in t_list {
        let table = stable_density_1d(alpha, scale, t, DensityGrid::default_for(alpha, scale, t))?;
        let dx = table.grid.dx();
        let ys = table.x_grid();
        let per_probe = par_map(probes.len(), |pi| {
            let f = probes[pi];
            xs.iter()
                .map(|&x| {
                    let g: f64 = ys
                        .iter()
                        .zip(&table.derivative)
                        .map(|(y, dp)| dp * f.eval(x - y))
                        .sum();
                    (g * dx).abs()
                })
                .fold(0.0, f64::max)
        });
        for (acc, g) in sup_gradient.iter_mut().zip(per_probe) {
            acc.push(g);
        }
    }
    let slopes: Vec<f64> = sup_gradient
        .iter()
        .map(|g| stats::log_log_slope(t_list, g))
        .collect();
    let i_min = (0..t_list.len())
        .min_by(|a, b| t_list[*a].total_cmp(&t_list[*b]))
        .unwrap_or(0);
    let worst_probe = (0..probes.len())
        .max_by(|a, b| sup_gradient[*a][i_min].total_cmp(&sup_gradient[*b][i_min]))
        .unwrap_or(0);
    Ok(GradientCheck {
        alpha,
        scale,
        t_list: t_list.to_vec(),
        probes: probes.to_vec(),
        sup_gradient,
        worst_slope: slopes[worst_probe],
        slopes,
        worst_probe,
    })
}

/// `n` log-spaced times in `[t_min, 1]`.
pub fn log_spaced(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let r = (hi / lo).ln();
    (0..n)
        .map(|i| lo * (r * i as f64 / (n - 1) as f64).exp())
        .collect()
}

/// Scalar right-hand sides of the resolvent equation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScalarFn {
    Constant {
        value: f64,
    },
    /// `cos(k·x₁)`.
    Cos {
        k: f64,
    },
    /// Component `b_index` of the drift.
    DriftComponent {
        index: usize,
    },
}

impl ScalarFn {
    fn sup_norm(&self, b: &DriftSpec) -> f64 {
        match *self {
            ScalarFn::Constant { value } => value.abs(),
            ScalarFn::Cos { .. } => 1.0,
            ScalarFn::DriftComponent { .. } => b.sup_norm,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolventSetup {
    pub lambda: f64,
    /// Defaults to `max(12, ln(‖f‖₀/(λ·tail_tol)))/λ`.
    pub horizon: Option<f64>,
    pub n_steps: usize,
    pub tail_tol: f64,
    pub h_fd: f64,
    pub n_paths: usize,
    pub seed: u64,
    #[serde(default)]
    pub sampler: SamplerOptions,
}

impl ResolventSetup {
    pub fn new(lambda: f64, n_paths: usize, seed: u64) -> Self {
        Self {
            lambda,
            horizon: None,
            n_steps: DEFAULT_RESOLVENT_STEPS,
            tail_tol: DEFAULT_TAIL_TOL,
            h_fd: DEFAULT_H_FD,
            n_paths,
            seed,
            sampler: SamplerOptions::default(),
        }
    }

    fn horizon_for(&self, f_sup: f64) -> Result<f64> {
        let lambda = self.lambda;
        let tail = |h: f64| (-lambda * h).exp() * f_sup / lambda;
        match self.horizon {
            Some(h) => {
                if !(h > 0.0) {
                    return Err(param_err("horizon", "must be positive"));
                }
                if tail(h) > self.tail_tol {
                    return Err(LevyError::Horizon {
                        horizon: h,
                        tail: tail(h),
                        tail_tol: self.tail_tol,
                    });
                }
                Ok(h)
            }
            None => {
                let need = if f_sup > 0.0 {
                    (f_sup / (lambda * self.tail_tol)).ln()
                } else {
                    0.0
                };
                Ok(HORIZON_FACTOR.max(need) / lambda)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolventEstimate {
    pub lambda: f64,
    pub horizon: f64,
    pub x_probe: Vec<Vec<f64>>,
    pub u_values: Vec<f64>,
    pub u_se: Vec<f64>,
    /// Central differences per probe (outer) and axis (inner).
    pub du_values: Vec<Vec<f64>>,
    pub du_se: Vec<Vec<f64>>,
    pub du_sup: f64,
    /// Standard error of the entry attaining `du_sup`.
    pub du_sup_se: f64,
    pub n_paths: usize,
    pub seed: u64,
}

impl ResolventEstimate {
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "lambda,probe,x,u,u_se,axis,du,du_se")?;
        for (i, x) in self.x_probe.iter().enumerate() {
            let xs: Vec<String> = x.iter().map(|v| v.to_string()).collect();
            for (a, (du, se)) in self.du_values[i].iter().zip(&self.du_se[i]).enumerate() {
                writeln!(
                    w,
                    "{},{},{},{},{},{},{},{}",
                    self.lambda,
                    i,
                    xs.join(" "),
                    self.u_values[i],
                    self.u_se[i],
                    a,
                    du,
                    se
                )?;
            }
        }
        Ok(())
    }
}

/// Node weights of `∫₀^H e^{−λt} g(t) dt` for `g` linear between nodes, exact
/// in the exponential.
fn exponential_weights(grid: &TimeGrid, lambda: f64) -> Vec<f64> {
    let t = grid.times();
    let mut w = vec![0.0; t.len()];
    for i in 0..t.len() - 1 {
        let h = t[i + 1] - t[i];
        let z = lambda * h;
        let a = (-lambda * t[i]).exp();
        let whole = -(-z).exp_m1() / lambda;
        let right = (-(-z).exp_m1() - z * (-z).exp()) / (lambda * z);
        w[i] += a * (whole - right);
        w[i + 1] += a * right;
    }
    w
}

fn mean_se(v: &[f64]) -> (f64, f64) {
    let m = crate::verifier::stable_mean(v);
    let se = if v.len() > 1 {
        stats::std_error(v)
    } else {
        0.0
    };
    (m, if se.is_finite() { se } else { 0.0 })
}

/// Monte Carlo estimate of `u(x) = E ∫₀^H e^{−λt} f(X_t^x) dt` at each probe,
/// with `X` the solution driven by `model` and drift `b`. Gradients are
/// central differences with step `h_fd` on the same noise path.
pub fn resolvent_mc(
    b: &DriftSpec,
    f: ScalarFn,
    model: &LevyModel,
    x_probes: &[Vec<f64>],
    setup: &ResolventSetup,
) -> Result<ResolventEstimate> {
    let d = model.dim;
    if b.dim != d {
        return Err(param_err("drift", "dimension differs from the model"));
    }
    if !(setup.lambda >= 1.0) {
        return Err(param_err("lambda", "must be at least 1"));
    }
    if x_probes.is_empty() || x_probes.iter().any(|x| x.len() != d) {
        return Err(param_err("x_probes", "need probes of the model dimension"));
    }
    if let ScalarFn::DriftComponent { index } = f {
        if index >= d {
            return Err(param_err("f", "drift component out of range"));
        }
    }
    if !(setup.h_fd > 0.0) || setup.n_paths == 0 {
        return Err(param_err("resolvent", "need h_fd > 0 and n_paths > 0"));
    }
    let horizon = setup.horizon_for(f.sup_norm(b))?;
    let grid = Arc::new(TimeGrid::uniform(horizon, setup.n_steps)?);
    let weights = exponential_weights(&grid, setup.lambda);
    let solver = SolverConfig::euler();
    let n_nodes = grid.times().len();
    let h = setup.h_fd;

    let integral = |path: &crate::path_sampler::LevyPath, x: &[f64]| -> Result<f64> {
        let curve = solve_frozen(b, path, 0.0, x, &solver)?;
        let l0 = path.node(0);
        let mut xi = vec![0.0; d];
        let mut bo = vec![0.0; d];
        let mut acc = 0.0;
        for i in 0..n_nodes {
            let (y, l) = (curve.y(i), path.node(i));
            for a in 0..d {
                xi[a] = y[a] + l[a] - l0[a];
            }
            let v = match f {
                ScalarFn::Constant { value } => value,
                ScalarFn::Cos { k } => (k * xi[0]).cos(),
                ScalarFn::DriftComponent { index } => {
                    b.eval(grid.times()[i], &xi, &mut bo);
                    bo[index]
                }
            };
            acc += weights[i] * v;
        }
        Ok(acc)
    };

    let per_path: Vec<Result<(Vec<f64>, Vec<f64>)>> = par_map(setup.n_paths, |k| {
        let path = sample_path_with(model, &grid, setup.seed, k as u64, &setup.sampler)?;
        let mut u = Vec::with_capacity(x_probes.len());
        let mut du = Vec::with_capacity(x_probes.len() * d);
        for x in x_probes {
            u.push(integral(&path, x)?);
            for a in 0..d {
                let mut xp = x.clone();
                let mut xm = x.clone();
                xp[a] += h;
                xm[a] -= h;
                du.push((integral(&path, &xp)? - integral(&path, &xm)?) / (2.0 * h));
            }
        }
        Ok((u, du))
    });

    let np = x_probes.len();
    let mut u_cols = vec![Vec::with_capacity(setup.n_paths); np];
    let mut du_cols = vec![Vec::with_capacity(setup.n_paths); np * d];
    for r in per_path {
        let (u, du) = r?;
        for (c, v) in u_cols.iter_mut().zip(u) {
            c.push(v);
        }
        for (c, v) in du_cols.iter_mut().zip(du) {
            c.push(v);
        }
    }
    let (u_values, u_se): (Vec<f64>, Vec<f64>) = u_cols.iter().map(|c| mean_se(c)).unzip();
    let du_stats: Vec<(f64, f64)> = du_cols.iter().map(|c| mean_se(c)).collect();
    let du_values: Vec<Vec<f64>> = du_stats
        .chunks(d)
        .map(|c| c.iter().map(|s| s.0).collect())
        .collect();
    let du_se: Vec<Vec<f64>> = du_stats
        .chunks(d)
        .map(|c| c.iter().map(|s| s.1).collect())
        .collect();
    let (du_sup, du_sup_se) = du_stats.iter().fold((0.0, 0.0), |acc, s| {
        if s.0.abs() > acc.0 {
            (s.0.abs(), s.1)
        } else {
            acc
        }
    });
    Ok(ResolventEstimate {
        lambda: setup.lambda,
        horizon,
        x_probe: x_probes.to_vec(),
        u_values,
        u_se,
        du_values,
        du_se,
        du_sup,
        du_sup_se,
        n_paths: setup.n_paths,
        seed: setup.seed,
    })
}

/// Drift-free value `Re[e^{ikx}/(λ + ψ(k))]·(1 − e^{−(λ+ψ(k))H})` for `f = cos(k·x₁)`.
pub fn fourier_resolvent(
    model: &LevyModel,
    lambda: f64,
    k: f64,
    x: &[f64],
    horizon: f64,
) -> Result<f64> {
    let mut h = vec![0.0; model.dim];
    h[0] = k;
    let psi = model.exponent(&h)?;
    let z = psi + lambda;
    let phase = Complex64::new(0.0, k * x[0]).exp();
    Ok((phase / z * (1.0 - (-z * horizon).exp())).re)
}

/// Stability index entering the decay rates: 2 with a Gaussian part,
/// otherwise the Blumenthal–Getoor index of the jump part.
pub fn stability_index(model: &LevyModel) -> Result<f64> {
    if model.has_gaussian_part() {
        Ok(2.0)
    } else {
        model.bg_index()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lambda0Params {
    pub lambda_grid: Vec<f64>,
    pub probes: Vec<Vec<f64>>,
    pub n_steps: usize,
    pub h_fd: f64,
    pub tail_tol: f64,
    pub n_paths: usize,
    pub seed: u64,
    #[serde(default)]
    pub sampler: SamplerOptions,
    /// Added to `−(α+β−1)/(α+β)` to form the slope bound.
    pub slope_slack: f64,
}

impl Lambda0Params {
    pub fn new(n_paths: usize, seed: u64) -> Self {
        Self {
            lambda_grid: vec![1.0, 2.0, 4.0, 8.0, 16.0, 32.0, 64.0],
            probes: vec![vec![-0.5], vec![0.0], vec![0.5]],
            n_steps: DEFAULT_RESOLVENT_STEPS,
            h_fd: DEFAULT_H_FD,
            tail_tol: DEFAULT_TAIL_TOL,
            n_paths,
            seed,
            sampler: SamplerOptions::default(),
            slope_slack: 0.15,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lambda0Result {
    pub lambda0: Option<f64>,
    pub slope: Option<f64>,
    pub grid: Vec<f64>,
    pub du_sup_by_lambda: Vec<f64>,
    pub du_se_by_lambda: Vec<f64>,
    pub alpha: f64,
    pub beta: f64,
    pub slope_bound: f64,
    /// `du_sup` never rises by more than three combined standard errors.
    pub monotone: bool,
}

impl Lambda0Result {
    /// The exported record `{lambda0, slope, grid, du_sup_by_lambda}`.
    pub fn record(&self) -> Value {
        json!({
            "lambda0": self.lambda0,
            "slope": self.slope,
            "grid": self.grid,
            "du_sup_by_lambda": self.du_sup_by_lambda,
        })
    }

    pub fn pass(&self) -> bool {
        self.lambda0.is_some() && self.monotone && self.slope.is_none_or(|s| s <= self.slope_bound)
    }
}

/// Scans `λ` over the grid, estimating `sup |Du_λ|` for every drift component
/// `u_k` solving `λu_k − ℒ_b u_k = b_k`. `lambda0` is the smallest grid value
/// with `du_sup < 1/3`.
pub fn lambda0_search(
    b: &DriftSpec,
    model: &LevyModel,
    params: &Lambda0Params,
) -> Result<Lambda0Result> {
    let alpha = stability_index(model)?;
    let beta = b.beta;
    if !b.is_zero() && !(beta > 1.0 - alpha / 2.0) {
        return Err(param_err(
            "beta",
            format!(
                "need beta > 1 − alpha/2 = {}, got {beta}",
                1.0 - alpha / 2.0
            ),
        ));
    }
    if params.lambda_grid.is_empty()
        || params.lambda_grid.iter().any(|l| !(*l >= 1.0))
        || params.lambda_grid.windows(2).any(|w| w[1] <= w[0])
    {
        return Err(param_err(
            "lambda_grid",
            "must be increasing with minimum at least 1",
        ));
    }
    let mut du_sup_by_lambda = Vec::new();
    let mut du_se_by_lambda = Vec::new();
    for &lambda in &params.lambda_grid {
        let setup = ResolventSetup {
            lambda,
            horizon: None,
            n_steps: params.n_steps,
            tail_tol: params.tail_tol,
            h_fd: params.h_fd,
            n_paths: params.n_paths,
            seed: params.seed,
            sampler: params.sampler.clone(),
        };
        let (mut sup, mut se): (f64, f64) = (0.0, 0.0);
        if !b.is_zero() {
            for k in 0..model.dim {
                let est = resolvent_mc(
                    b,
                    ScalarFn::DriftComponent { index: k },
                    model,
                    &params.probes,
                    &setup,
                )?;
                if est.du_sup > sup {
                    sup = est.du_sup;
                    se = est.du_sup_se;
                }
            }
        }
        du_sup_by_lambda.push(sup);
        du_se_by_lambda.push(se);
    }
    let lambda0 = params
        .lambda_grid
        .iter()
        .zip(&du_sup_by_lambda)
        .find(|(_, v)| **v < DU_THRESHOLD)
        .map(|(l, _)| *l);
    let slope = Some(stats::log_log_slope(&params.lambda_grid, &du_sup_by_lambda))
        .filter(|s| s.is_finite());
    let monotone = (1..du_sup_by_lambda.len()).all(|i| {
        let s = (du_se_by_lambda[i].powi(2) + du_se_by_lambda[i - 1].powi(2)).sqrt();
        du_sup_by_lambda[i] <= du_sup_by_lambda[i - 1] + 3.0 * s
    });
    Ok(Lambda0Result {
        lambda0,
        slope,
        grid: params.lambda_grid.clone(),
        du_sup_by_lambda,
        du_se_by_lambda,
        alpha,
        beta,
        slope_bound: -(alpha + beta - 1.0) / (alpha + beta) + params.slope_slack,
        monotone,
    })
}

/// Report for a set of gradient checks; each must keep its worst slope in
/// `[−1/α − lower_slack, −1/α + upper_slack]`.
pub fn gradient_report(
    checks: &[GradientCheck],
    lower_slack: f64,
    upper_slack: f64,
) -> VerificationReport {
    let mut r = VerificationReport::new("kolmogorov-gradient", 0, Vec::new());
    let mut pass = true;
    for c in checks {
        let ok = c.within(lower_slack, upper_slack);
        pass &= ok;
        for (p, s) in c.probes.iter().zip(&c.slopes) {
            r.rows.push(
                ReportRow::new(format!("alpha={};probe={}", c.alpha, p.name()))
                    .with("alpha", c.alpha)
                    .with("slope", *s)
                    .with("target", -1.0 / c.alpha)
                    .with("worst", (p == &c.probes[c.worst_probe]) as u8 as f64),
            );
        }
        r.notes.push(format!(
            "alpha {}: worst probe {} slope {} ({})",
            c.alpha,
            c.probes[c.worst_probe].name(),
            c.worst_slope,
            if ok {
                "within bounds"
            } else {
                "outside bounds"
            }
        ));
    }
    r.fitted_exponent = checks.first().map(|c| c.worst_slope);
    r.pass = pass;
    r
}

/// Report wrapping a λ₀ search.
pub fn lambda0_report(
    b: &DriftSpec,
    model: &LevyModel,
    params: &Lambda0Params,
    res: &Lambda0Result,
) -> VerificationReport {
    let mut r = VerificationReport::new("kolmogorov-lambda0", params.n_paths, vec![params.seed]);
    for ((l, v), se) in res
        .grid
        .iter()
        .zip(&res.du_sup_by_lambda)
        .zip(&res.du_se_by_lambda)
    {
        r.rows.push(
            ReportRow::new(format!("lambda={l}"))
                .with("lambda", *l)
                .with("du_sup", *v)
                .with("du_se", *se),
        );
    }
    r.fitted_exponent = res.slope;
    r.ratio_max = res.du_sup_by_lambda.first().copied();
    r.pass = res.pass();
    match res.lambda0 {
        Some(l) => r.notes.push(format!("lambda0 = {l}")),
        None => r.notes.push(format!(
            "no grid value reaches du_sup < 1/3; largest lambda gives {}",
            res.du_sup_by_lambda.last().copied().unwrap_or(f64::NAN)
        )),
    }
    r.notes.push(format!(
        "decay slope {}, slope bound {}, monotone {}",
        res.slope.map_or("n/a".to_string(), |s| s.to_string()),
        res.slope_bound,
        res.monotone
    ));
    r.config_snapshot = json!({
        "drift": b, "model": model_id(model), "params": params, "record": res.record(),
    });
    r
}
