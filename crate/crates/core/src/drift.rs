//! Catalog of bounded Hölder drifts `b(t, x)` with declared regularity data.

use serde::{Deserialize, Serialize};

use crate::error::{param_err, LevyError, Result};
use crate::rng::{CounterRng, StreamTag};
use crate::stats;

/// Default clipping radius enforcing global boundedness.
pub const DEFAULT_CLIP: f64 = 1e6;
const SPOT_CHECKS: usize = 1000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DriftKind {
    Zero,
    /// `b(x) = A·π_M(x)` with `π_M` the projection onto the ball of radius `M`.
    Linear {
        matrix: Vec<f64>,
    },
    /// `b(x) = √min(|x|, M)`, one-dimensional.
    SqrtAbs,
    /// Componentwise `sign(x)·min(|x|, M)^β`.
    HolderPower {
        beta: f64,
    },
    /// Tent profile `height·(1 − |x − c|/r)₊` along the diagonal unit vector.
    Bump {
        center: Vec<f64>,
        radius: f64,
        height: f64,
    },
    /// One-dimensional piecewise-linear table, constant outside the nodes.
    Tabulated {
        x: Vec<f64>,
        y: Vec<f64>,
    },
}

/// A drift together with the Hölder data it is declared to satisfy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftSpec {
    pub kind: DriftKind,
    pub dim: usize,
    pub beta: f64,
    pub holder_seminorm: f64,
    pub sup_norm: f64,
    /// Multiplies the drift by `cos(2πt)` when set.
    pub time_dependent: bool,
    pub clip: f64,
}

impl DriftSpec {
    pub fn zero(dim: usize) -> Result<Self> {
        Self::build(DriftKind::Zero, dim, DEFAULT_CLIP, false)
    }

    pub fn linear(dim: usize, matrix: Vec<f64>) -> Result<Self> {
        Self::linear_clipped(dim, matrix, DEFAULT_CLIP)
    }

    pub fn linear_clipped(dim: usize, matrix: Vec<f64>, clip: f64) -> Result<Self> {
        Self::build(DriftKind::Linear { matrix }, dim, clip, false)
    }

    /// Scalar linear drift `b(x) = λx`.
    pub fn scalar_linear(lambda: f64) -> Result<Self> {
        Self::linear(1, vec![lambda])
    }

    pub fn sqrt_abs() -> Result<Self> {
        Self::build(DriftKind::SqrtAbs, 1, DEFAULT_CLIP, false)
    }

    pub fn holder_power(dim: usize, beta: f64, clip: f64) -> Result<Self> {
        Self::build(DriftKind::HolderPower { beta }, dim, clip, false)
    }

    pub fn bump(center: Vec<f64>, radius: f64, height: f64) -> Result<Self> {
        let dim = center.len();
        Self::build(
            DriftKind::Bump {
                center,
                radius,
                height,
            },
            dim,
            DEFAULT_CLIP,
            false,
        )
    }

    pub fn tabulated(x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        Self::build(DriftKind::Tabulated { x, y }, 1, DEFAULT_CLIP, false)
    }

    pub fn with_time_modulation(mut self) -> Self {
        self.time_dependent = true;
        self
    }

    /// Builds a drift, derives its declared Hölder data and runs the random
    /// spot checks of the declared bounds.
    pub fn build(kind: DriftKind, dim: usize, clip: f64, time_dependent: bool) -> Result<Self> {
        if dim == 0 || dim > 8 {
            return Err(param_err("dim", format!("must lie in 1..=8, got {dim}")));
        }
        if !(clip > 0.0 && clip.is_finite()) {
            return Err(param_err("clip", "must be positive and finite"));
        }
        let d = dim as f64;
        let (beta, seminorm, sup) = match &kind {
            DriftKind::Zero => (1.0, 0.0, 0.0),
            DriftKind::Linear { matrix } => {
                if matrix.len() != dim * dim || matrix.iter().any(|v| !v.is_finite()) {
                    return Err(param_err("matrix", "must be a finite d×d matrix"));
                }
                let op = operator_norm(matrix, dim);
                (1.0, op, op * clip)
            }
            DriftKind::SqrtAbs => {
                if dim != 1 {
                    return Err(param_err("dim", "sqrt_abs is one-dimensional"));
                }
                (0.5, 1.0, clip.sqrt())
            }
            DriftKind::HolderPower { beta } => {
                if !(*beta > 0.0 && *beta <= 1.0) {
                    return Err(param_err("beta", format!("must lie in (0,1], got {beta}")));
                }
                let b = *beta;
                (
                    b,
                    2f64.powf(1.0 - b) * d.powf((1.0 - b) / 2.0),
                    d.sqrt() * clip.powf(b),
                )
            }
            DriftKind::Bump {
                center,
                radius,
                height,
            } => {
                if center.len() != dim || !(*radius > 0.0) || !height.is_finite() {
                    return Err(param_err(
                        "bump",
                        "needs a d-dimensional center, radius > 0 and finite height",
                    ));
                }
                (1.0, height.abs() / radius, height.abs())
            }
            DriftKind::Tabulated { x, y } => {
                if dim != 1 {
                    return Err(param_err("dim", "tabulated drifts are one-dimensional"));
                }
                if x.len() < 2 || x.len() != y.len() || x.windows(2).any(|w| !(w[1] > w[0])) {
                    return Err(param_err(
                        "table",
                        "need ≥ 2 strictly increasing nodes with matching values",
                    ));
                }
                let slope = x
                    .windows(2)
                    .zip(y.windows(2))
                    .map(|(a, b)| ((b[1] - b[0]) / (a[1] - a[0])).abs())
                    .fold(0.0, f64::max);
                (1.0, slope, stats::sup_norm(y))
            }
        };
        let spec = Self {
            kind,
            dim,
            beta,
            holder_seminorm: seminorm,
            sup_norm: sup,
            time_dependent,
            clip,
        };
        spec.spot_check()?;
        Ok(spec)
    }

    /// Verifies the declared sup norm and Hölder seminorm on random pairs.
    pub fn spot_check(&self) -> Result<()> {
        let d = self.dim;
        let mut rng = CounterRng::new(0x5eed, 0, StreamTag::Probe);
        let mut x = vec![0.0; d];
        let mut y = vec![0.0; d];
        let mut bx = vec![0.0; d];
        let mut by = vec![0.0; d];
        let range = self.clip.min(1e3);
        for _ in 0..SPOT_CHECKS {
            let t = rng.open01();
            // points spread over scales from 10⁻⁶ up to the clipping radius
            let sep = 10f64.powf(-6.0 + 7.0 * rng.open01()).min(range);
            for a in 0..d {
                x[a] = range * (2.0 * rng.open01() - 1.0) * 10f64.powf(-4.0 * rng.open01());
                y[a] = x[a] + sep * (2.0 * rng.open01() - 1.0);
            }
            self.eval(t, &x, &mut bx);
            self.eval(t, &y, &mut by);
            if bx.iter().chain(&by).any(|v| !v.is_finite()) {
                return Err(LevyError::Numeric("drift evaluation is not finite".into()));
            }
            let slack = 1e-12 * (1.0 + self.sup_norm);
            if stats::euclid(&bx) > self.sup_norm * (1.0 + 1e-12) + slack {
                return Err(param_err(
                    "sup_norm",
                    format!("declared bound {} violated", self.sup_norm),
                ));
            }
            let lhs = stats::dist(&bx, &by);
            let rhs = self.holder_seminorm * stats::dist(&x, &y).powf(self.beta);
            if lhs > rhs * (1.0 + 1e-9) + slack {
                return Err(param_err(
                    "holder_seminorm",
                    format!(
                        "declared seminorm {} violated ({lhs} > {rhs})",
                        self.holder_seminorm
                    ),
                ));
            }
        }
        Ok(())
    }

    /// The Hölder norm `‖b‖₀ + [b]_β`.
    pub fn holder_norm(&self) -> f64 {
        self.sup_norm + self.holder_seminorm
    }

    pub fn is_zero(&self) -> bool {
        matches!(self.kind, DriftKind::Zero)
    }

    /// Evaluates `b(t, x)` into `out`.
    #[inline]
    pub fn eval(&self, t: f64, x: &[f64], out: &mut [f64]) {
        let m = self.clip;
        match &self.kind {
            DriftKind::Zero => out.iter_mut().for_each(|o| *o = 0.0),
            DriftKind::Linear { matrix } => {
                let d = self.dim;
                let n = stats::euclid(x);
                let shrink = if n > m { m / n } else { 1.0 };
                for a in 0..d {
                    out[a] = shrink * (0..d).map(|b| matrix[a * d + b] * x[b]).sum::<f64>();
                }
            }
            DriftKind::SqrtAbs => out[0] = x[0].abs().min(m).sqrt(),
            DriftKind::HolderPower { beta } => {
                for (o, v) in out.iter_mut().zip(x) {
                    *o = v.signum() * v.abs().min(m).powf(*beta);
                    if *v == 0.0 {
                        *o = 0.0;
                    }
                }
            }
            DriftKind::Bump {
                center,
                radius,
                height,
            } => {
                let r = stats::dist(x, center);
                let amp = height * (1.0 - r / radius).max(0.0) / (self.dim as f64).sqrt();
                out.iter_mut().for_each(|o| *o = amp);
            }
            DriftKind::Tabulated { x: xs, y: ys } => out[0] = interp(xs, ys, x[0]),
        }
        if self.time_dependent {
            let f = (2.0 * std::f64::consts::PI * t).cos();
            out.iter_mut().for_each(|o| *o *= f);
        }
    }

    /// Scalar evaluation for one-dimensional drifts.
    #[inline]
    pub fn eval1(&self, t: f64, x: f64) -> f64 {
        let mut out = [0.0];
        self.eval(t, &[x], &mut out);
        out[0]
    }
}

fn interp(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    let n = xs.len();
    if x <= xs[0] {
        return ys[0];
    }
    if x >= xs[n - 1] {
        return ys[n - 1];
    }
    let k = xs.partition_point(|v| *v <= x) - 1;
    let w = (x - xs[k]) / (xs[k + 1] - xs[k]);
    ys[k] + w * (ys[k + 1] - ys[k])
}

fn operator_norm(matrix: &[f64], dim: usize) -> f64 {
    let a = nalgebra::DMatrix::from_row_slice(dim, dim, matrix);
    a.singular_values().max()
}
