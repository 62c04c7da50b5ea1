//! Seeded càdlàg Lévy paths on a time grid.
//!
//! Stable families use exact marginal increments (Chambers–Mallows–Stuck in one
//! dimension, sub-Gaussian subordination for rotation-invariant `d > 1`). Every
//! other family goes through a Lévy–Itô truncation: jumps larger than `ε` are a
//! compound Poisson stream, jumps below `ε` are replaced by a Gaussian with the
//! matching covariance. Paths are piecewise constant between grid nodes and take
//! the left-node value, so a jump inside `(t_i, t_{i+1}]` shows up at `t_{i+1}`.

use std::f64::consts::PI;
use std::io::{Read, Write};
use std::sync::Arc;

use rand::Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{param_err, LevyError, Result};
use crate::levy_model::{Family, LevyModel, Radial};
use crate::rng::{CounterRng, StreamTag};

pub const ARCHIVE_MAGIC: &[u8; 4] = b"LVYP";
pub const ARCHIVE_VERSION: u16 = 1;
/// Default small-jump threshold of the truncation sampler.
pub const DEFAULT_EPSILON: f64 = 1e-3;

/// Strictly increasing times `0 = t₀ < … < t_n = T`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    times: Vec<f64>,
}

impl TimeGrid {
    pub fn uniform(t_end: f64, n_steps: usize) -> Result<Self> {
        if !(t_end > 0.0 && t_end.is_finite()) {
            return Err(param_err("t_end", format!("must be positive, got {t_end}")));
        }
        if n_steps == 0 {
            return Err(param_err("n_steps", "must be positive"));
        }
        let dt = t_end / n_steps as f64;
        let mut times: Vec<f64> = (0..=n_steps).map(|i| i as f64 * dt).collect();
        times[n_steps] = t_end;
        Ok(Self { times })
    }

    pub fn from_times(times: Vec<f64>) -> Result<Self> {
        if times.len() < 2 || times[0] != 0.0 {
            return Err(param_err("times", "need at least two nodes starting at 0"));
        }
        if times
            .windows(2)
            .any(|w| !(w[1] > w[0]) || !w[1].is_finite())
        {
            return Err(param_err("times", "must be strictly increasing and finite"));
        }
        Ok(Self { times })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn t_end(&self) -> f64 {
        *self.times.last().expect("grid is non-empty")
    }

    pub fn n_steps(&self) -> usize {
        self.times.len() - 1
    }

    pub fn dt(&self, i: usize) -> f64 {
        self.times[i + 1] - self.times[i]
    }

    pub fn max_dt(&self) -> f64 {
        self.times
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(0.0, f64::max)
    }

    /// Index of the largest node `t_i ≤ t`; `t` must lie in `[0, T]`.
    pub fn locate(&self, t: f64) -> usize {
        match self.times.binary_search_by(|x| x.total_cmp(&t)) {
            Ok(i) => i,
            Err(i) => i.saturating_sub(1),
        }
    }

    /// Keeps every `factor`-th node; `n_steps` must be divisible by `factor`.
    pub fn coarsen(&self, factor: usize) -> Result<Self> {
        if factor == 0 || self.n_steps() % factor != 0 {
            return Err(param_err("factor", "must divide the number of steps"));
        }
        Ok(Self {
            times: self.times.iter().step_by(factor).copied().collect(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BigJump {
    pub time: f64,
    pub size: Vec<f64>,
}

/// One realized path: cumulative values at the grid nodes plus the recorded
/// jumps of norm larger than one.
#[derive(Debug, Clone, PartialEq)]
pub struct LevyPath {
    pub grid: Arc<TimeGrid>,
    pub dim: usize,
    values: Vec<f64>,
    pub big_jumps: Vec<BigJump>,
    pub seed: u64,
    pub path_index: u64,
    pub model_id: String,
}

impl LevyPath {
    /// Builds a path from explicit node values (row-major, `dim` per node).
    pub fn from_values(grid: Arc<TimeGrid>, dim: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != (grid.n_steps() + 1) * dim {
            return Err(param_err("values", "length must be (n_steps + 1) * dim"));
        }
        if values[..dim].iter().any(|v| *v != 0.0) {
            return Err(param_err("values", "path must start at 0"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(LevyError::Numeric("path values must be finite".into()));
        }
        Ok(Self {
            grid,
            dim,
            values,
            big_jumps: Vec::new(),
            seed: 0,
            path_index: 0,
            model_id: String::from("explicit"),
        })
    }

    pub fn zero(grid: Arc<TimeGrid>, dim: usize) -> Self {
        let n = grid.n_steps() + 1;
        Self {
            grid,
            dim,
            values: vec![0.0; n * dim],
            big_jumps: Vec::new(),
            seed: 0,
            path_index: 0,
            model_id: String::from("zero"),
        }
    }

    pub fn n_nodes(&self) -> usize {
        self.grid.n_steps() + 1
    }

    #[inline]
    pub fn node(&self, i: usize) -> &[f64] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Left-node càdlàg evaluation.
    pub fn value_at(&self, t: f64) -> Result<&[f64]> {
        let t_end = self.grid.t_end();
        if !(0.0..=t_end).contains(&t) {
            return Err(LevyError::Domain { t, t_end });
        }
        Ok(self.node(self.grid.locate(t)))
    }

    /// Subsamples the path on every `factor`-th node; jumps are kept with their
    /// times moved to the coarse node where they are realized.
    pub fn coarsen(&self, factor: usize) -> Result<Self> {
        let grid = Arc::new(self.grid.coarsen(factor)?);
        let d = self.dim;
        let mut values = Vec::with_capacity((grid.n_steps() + 1) * d);
        for i in (0..self.n_nodes()).step_by(factor) {
            values.extend_from_slice(self.node(i));
        }
        let big_jumps = self
            .big_jumps
            .iter()
            .map(|j| {
                let k = self.grid.times().partition_point(|t| *t < j.time);
                let coarse = k.div_ceil(factor) * factor;
                BigJump {
                    time: self.grid.times()[coarse.min(self.grid.n_steps())],
                    size: j.size.clone(),
                }
            })
            .collect();
        Ok(Self {
            grid,
            dim: d,
            values,
            big_jumps,
            seed: self.seed,
            path_index: self.path_index,
            model_id: self.model_id.clone(),
        })
    }

    /// Whether a recorded big jump falls in `(a, b]`.
    pub fn has_big_jump_in(&self, a: f64, b: f64) -> bool {
        self.big_jumps.iter().any(|j| j.time > a && j.time <= b)
    }

    pub fn write_archive<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(ARCHIVE_MAGIC)?;
        w.write_all(&ARCHIVE_VERSION.to_le_bytes())?;
        let times = self.grid.times();
        w.write_all(&(times.len() as u64).to_le_bytes())?;
        for t in times {
            w.write_all(&t.to_le_bytes())?;
        }
        w.write_all(&(self.dim as u32).to_le_bytes())?;
        for v in &self.values {
            w.write_all(&v.to_le_bytes())?;
        }
        w.write_all(&(self.big_jumps.len() as u64).to_le_bytes())?;
        for j in &self.big_jumps {
            w.write_all(&j.time.to_le_bytes())?;
            for s in &j.size {
                w.write_all(&s.to_le_bytes())?;
            }
        }
        w.write_all(&self.seed.to_le_bytes())?;
        Ok(())
    }

    pub fn read_archive<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != ARCHIVE_MAGIC {
            return Err(LevyError::Format("bad magic bytes".into()));
        }
        let mut b2 = [0u8; 2];
        r.read_exact(&mut b2)?;
        let version = u16::from_le_bytes(b2);
        if version != ARCHIVE_VERSION {
            return Err(LevyError::Format(format!("unsupported version {version}")));
        }
        let read_u64 = |r: &mut R| -> Result<u64> {
            let mut b = [0u8; 8];
            r.read_exact(&mut b)?;
            Ok(u64::from_le_bytes(b))
        };
        let read_f64 = |r: &mut R| -> Result<f64> {
            let mut b = [0u8; 8];
            r.read_exact(&mut b)?;
            Ok(f64::from_le_bytes(b))
        };
        let n = read_u64(&mut r)? as usize;
        let times = (0..n)
            .map(|_| read_f64(&mut r))
            .collect::<Result<Vec<_>>>()?;
        let mut b4 = [0u8; 4];
        r.read_exact(&mut b4)?;
        let dim = u32::from_le_bytes(b4) as usize;
        let values = (0..n * dim)
            .map(|_| read_f64(&mut r))
            .collect::<Result<Vec<_>>>()?;
        let n_jumps = read_u64(&mut r)? as usize;
        let mut big_jumps = Vec::with_capacity(n_jumps);
        for _ in 0..n_jumps {
            let time = read_f64(&mut r)?;
            let size = (0..dim)
                .map(|_| read_f64(&mut r))
                .collect::<Result<Vec<_>>>()?;
            big_jumps.push(BigJump { time, size });
        }
        let seed = read_u64(&mut r)?;
        let grid =
            Arc::new(TimeGrid::from_times(times).map_err(|e| LevyError::Format(e.to_string()))?);
        let mut path = LevyPath::from_values(grid, dim, values)?;
        path.big_jumps = big_jumps;
        path.seed = seed;
        path.model_id = String::from("archive");
        Ok(path)
    }

    /// CSV with columns `t, L_1, …, L_d`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let header: Vec<String> = std::iter::once("t".to_string())
            .chain((1..=self.dim).map(|k| format!("L_{k}")))
            .collect();
        writeln!(w, "{}", header.join(","))?;
        for (i, t) in self.grid.times().iter().enumerate() {
            let row: Vec<String> = std::iter::once(format!("{t}"))
                .chain(self.node(i).iter().map(|v| format!("{v}")))
                .collect();
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }
}

/// Which sampler to use for stable families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum StableMethod {
    #[default]
    Exact,
    Truncation,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplerOptions {
    pub stable_method: StableMethod,
    pub epsilon: f64,
}

impl Default for SamplerOptions {
    fn default() -> Self {
        Self {
            stable_method: StableMethod::Exact,
            epsilon: DEFAULT_EPSILON,
        }
    }
}

/// Symmetric α-stable variate with exponent `|h|^α` from an angle
/// `v ∈ (−π/2, π/2)` and a unit exponential `w`.
#[inline]
pub fn cms_symmetric(alpha: f64, v: f64, w: f64) -> f64 {
    if alpha == 1.0 {
        return v.tan();
    }
    let cos_v = v.cos();
    (alpha * v).sin() / cos_v.powf(1.0 / alpha)
        * (((1.0 - alpha) * v).cos() / w).powf((1.0 - alpha) / alpha)
}

/// Positive `β`-stable variate with Laplace transform `e^{-s^β}` (Kanter).
#[inline]
pub fn positive_stable(beta: f64, u: f64, w: f64) -> f64 {
    let a = PI * u;
    ((beta * a).sin() / a.sin()).powf(1.0 / beta)
        * (((1.0 - beta) * a).sin() / w).powf((1.0 - beta) / beta)
}

#[inline]
fn cms_draw(alpha: f64, rng: &mut CounterRng) -> f64 {
    let v = PI * (rng.open01() - 0.5);
    let w = -rng.open01().ln();
    cms_symmetric(alpha, v, w)
}

/// One increment of a symmetric α-stable process with exponent `scale·|h|^α`
/// over a time step `dt`; `α = 2` is the Gaussian with variance `2·scale·dt`.
pub fn stable_increment<R: Rng + ?Sized>(
    alpha: f64,
    scale: f64,
    dt: f64,
    rng: &mut R,
) -> Result<f64> {
    if !(alpha > 0.0 && alpha <= 2.0) {
        return Err(param_err(
            "alpha",
            format!("must lie in (0,2], got {alpha}"),
        ));
    }
    if !(scale > 0.0) {
        return Err(param_err("scale", "must be positive"));
    }
    if !(dt > 0.0) {
        return Err(param_err("dt", "must be positive"));
    }
    let u: f64 = rng.random();
    let v = PI * (u - 0.5);
    let w = -(1.0 - rng.random::<f64>()).ln();
    Ok((scale * dt).powf(1.0 / alpha) * cms_symmetric(alpha, v, w))
}

fn uniform_direction(dim: usize, rng: &mut CounterRng, out: &mut [f64]) {
    if dim == 1 {
        out[0] = if rng.next_bool() { 1.0 } else { -1.0 };
        return;
    }
    loop {
        let mut n2 = 0.0;
        for o in out.iter_mut() {
            let z: f64 = rng.sample(StandardNormal);
            *o = z;
            n2 += z * z;
        }
        if n2 > 1e-300 {
            let n = n2.sqrt();
            out.iter_mut().for_each(|o| *o /= n);
            return;
        }
    }
}

trait NextBool {
    fn next_bool(&mut self) -> bool;
}

impl NextBool for CounterRng {
    #[inline]
    fn next_bool(&mut self) -> bool {
        use rand_core::RngCore;
        self.next_u64() >> 63 == 1
    }
}

fn poisson_count(mean: f64, rng: &mut CounterRng) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    Poisson::new(mean)
        .map(|p| p.sample(rng) as u64)
        .unwrap_or(0)
}

/// Samples a path with the default sampler and `path_index = 0`.
pub fn sample_path(model: &LevyModel, grid: &Arc<TimeGrid>, seed: u64) -> Result<LevyPath> {
    sample_path_with(model, grid, seed, 0, &SamplerOptions::default())
}

pub fn sample_path_with(
    model: &LevyModel,
    grid: &Arc<TimeGrid>,
    seed: u64,
    path_index: u64,
    opts: &SamplerOptions,
) -> Result<LevyPath> {
    model.validate()?;
    if !(opts.epsilon > 0.0 && opts.epsilon < 1.0) {
        return Err(param_err("epsilon", "must lie in (0,1)"));
    }
    let d = model.dim;
    let n = grid.n_steps();
    let mut increments = vec![0.0; n * d];
    let mut big_jumps = Vec::new();

    if model.has_gaussian_part() {
        let root = model.q_sqrt();
        let mut rng = CounterRng::new(seed, path_index, StreamTag::Gaussian);
        let mut z = vec![0.0; d];
        for i in 0..n {
            let sdt = grid.dt(i).sqrt();
            z.iter_mut().for_each(|x| *x = rng.sample(StandardNormal));
            for a in 0..d {
                let s: f64 = (0..d).map(|b| root[a * d + b] * z[b]).sum();
                increments[i * d + a] += sdt * s;
            }
        }
    }

    let exact_stable = opts.stable_method == StableMethod::Exact
        && matches!(
            model.family,
            Family::IsotropicStable | Family::SingularStable
        );
    if exact_stable {
        exact_stable_increments(
            model,
            grid,
            seed,
            path_index,
            &mut increments,
            &mut big_jumps,
        );
    } else if model.family != Family::Brownian {
        truncated_increments(
            model,
            grid,
            seed,
            path_index,
            opts.epsilon,
            &mut increments,
            &mut big_jumps,
        )?;
    }

    let mut values = vec![0.0; (n + 1) * d];
    for i in 0..n {
        for a in 0..d {
            values[(i + 1) * d + a] = values[i * d + a] + increments[i * d + a];
        }
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(LevyError::Numeric("sampled path is not finite".into()));
    }
    Ok(LevyPath {
        grid: grid.clone(),
        dim: d,
        values,
        big_jumps,
        seed,
        path_index,
        model_id: model_id(model),
    })
}

pub fn model_id(model: &LevyModel) -> String {
    format!(
        "{}(d={},alpha={},scale={},m={},trunc_r={})",
        model.family.name(),
        model.dim,
        model.alpha,
        model.scale,
        model.m,
        model.trunc_r
    )
}

fn exact_stable_increments(
    model: &LevyModel,
    grid: &TimeGrid,
    seed: u64,
    path_index: u64,
    increments: &mut [f64],
    big_jumps: &mut Vec<BigJump>,
) {
    let d = model.dim;
    let alpha = model.alpha;
    let mut rng = CounterRng::new(seed, path_index, StreamTag::StableIncrement);
    let mut step = vec![0.0; d];
    for i in 0..grid.n_steps() {
        let factor = (model.scale * grid.dt(i)).powf(1.0 / alpha);
        if d == 1 || model.family == Family::SingularStable {
            step.iter_mut()
                .for_each(|s| *s = factor * cms_draw(alpha, &mut rng));
        } else {
            let a = positive_stable(alpha / 2.0, rng.open01(), -rng.open01().ln());
            let amp = factor * (2.0 * a).sqrt();
            step.iter_mut()
                .for_each(|s| *s = amp * rng.sample::<f64, _>(StandardNormal));
        }
        let mut n2 = 0.0;
        for a in 0..d {
            increments[i * d + a] += step[a];
            n2 += step[a] * step[a];
        }
        // large increments stand in for the big jumps of the exact sampler
        if n2 > 1.0 {
            big_jumps.push(BigJump {
                time: grid.times()[i + 1],
                size: step.clone(),
            });
        }
    }
}

fn truncated_increments(
    model: &LevyModel,
    grid: &TimeGrid,
    seed: u64,
    path_index: u64,
    epsilon: f64,
    increments: &mut [f64],
    big_jumps: &mut Vec<BigJump>,
) -> Result<()> {
    let d = model.dim;
    let radial = model.radial()?;
    let singular = model.family == Family::SingularStable;
    // finite measures need no small-jump approximation
    let eps = match radial {
        Radial::GaussianJumps { .. } => 0.0,
        _ => epsilon,
    };
    let rate = radial.mass_above(eps) * model.axis_multiplicity();
    let small_var = if eps > 0.0 {
        let m2 = radial.second_moment_below(eps);
        if singular {
            m2
        } else {
            m2 / d as f64
        }
    } else {
        0.0
    };
    let mut jump_rng = CounterRng::new(seed, path_index, StreamTag::SmallJumps);
    let mut gauss_rng = CounterRng::new(seed, path_index, StreamTag::BigJumps);
    let mut dir = vec![0.0; d];
    for i in 0..grid.n_steps() {
        let dt = grid.dt(i);
        if small_var > 0.0 {
            let sd = (small_var * dt).sqrt();
            for a in 0..d {
                increments[i * d + a] += sd * gauss_rng.sample::<f64, _>(StandardNormal);
            }
        }
        let count = poisson_count(rate * dt, &mut jump_rng);
        for _ in 0..count {
            let r = radial.sample_radius_above(eps, &mut jump_rng);
            if singular {
                dir.iter_mut().for_each(|x| *x = 0.0);
                let axis = (jump_rng.random::<f64>() * d as f64) as usize;
                dir[axis.min(d - 1)] = if jump_rng.next_bool() { 1.0 } else { -1.0 };
            } else {
                uniform_direction(d, &mut jump_rng, &mut dir);
            }
            for a in 0..d {
                increments[i * d + a] += r * dir[a];
            }
            if r > 1.0 {
                big_jumps.push(BigJump {
                    time: grid.times()[i + 1],
                    size: dir.iter().map(|x| r * x).collect(),
                });
            }
        }
    }
    Ok(())
}

/// Compound Poisson part `C` on `[0, t_end]`: jumps of norm larger than one.
pub fn big_jump_component(model: &LevyModel, t_end: f64, seed: u64) -> Result<Vec<BigJump>> {
    big_jump_component_indexed(model, t_end, seed, 0)
}

pub fn big_jump_component_indexed(
    model: &LevyModel,
    t_end: f64,
    seed: u64,
    path_index: u64,
) -> Result<Vec<BigJump>> {
    if !(t_end > 0.0) {
        return Err(param_err("t_end", "must be positive"));
    }
    let d = model.dim;
    let radial = model.radial()?;
    let mass = model.big_jump_mass()?;
    let mut rng = CounterRng::new(seed, path_index, StreamTag::BigJumps);
    let count = poisson_count(mass * t_end, &mut rng);
    let mut jumps = Vec::with_capacity(count as usize);
    let mut dir = vec![0.0; d];
    for _ in 0..count {
        let time = t_end * rng.open01();
        let r = radial.sample_radius_above(1.0, &mut rng);
        if model.family == Family::SingularStable {
            dir.iter_mut().for_each(|x| *x = 0.0);
            let axis = ((rng.random::<f64>() * d as f64) as usize).min(d - 1);
            dir[axis] = if rng.next_bool() { 1.0 } else { -1.0 };
        } else {
            uniform_direction(d, &mut rng, &mut dir);
        }
        jumps.push(BigJump {
            time,
            size: dir.iter().map(|x| r * x).collect(),
        });
    }
    jumps.sort_by(|a, b| a.time.total_cmp(&b.time));
    Ok(jumps)
}

/// Convenience wrapper over `LevyPath::value_at`.
pub fn path_value(path: &LevyPath, t: f64) -> Result<Vec<f64>> {
    path.value_at(t).map(<[f64]>::to_vec)
}
