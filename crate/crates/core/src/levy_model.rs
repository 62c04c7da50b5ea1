//! Lévy processes described by their generating triplet `(Q, ν, 0)`.
//!
//! Jump measures are rotation invariant (uniform spherical part) except for the
//! singular stable family, whose measure lives on the coordinate axes. The
//! radial part of `ν` is written `ρ(r) dr`, so that
//! `ν(B) = ∫₀^∞ ρ(r) ∫_S 1_B(rξ) μ(dξ) dr` with `μ` the uniform probability on the sphere.
//!
//! Stable families are normalized so that the isotropic exponent is exactly
//! `scale · |h|^α`; tempered and truncated variants reuse the same radial intensity.

use std::f64::consts::PI;
use std::fmt;
use std::sync::{Arc, OnceLock};

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;

use crate::error::{param_err, LevyError, Result};
use crate::quadrature::{integrate, integrate_to_infinity};

/// Relative tolerance for radial quadrature of exponents.
pub const EXPONENT_REL_TOL: f64 = 1e-8;
/// Bisection tolerance (in σ) of the Blumenthal–Getoor index search.
pub const BG_BISECTION_TOL: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    IsotropicStable,
    SingularStable,
    TemperedStable,
    TruncatedStable,
    RelativisticStable,
    Brownian,
    CompoundPoisson,
    Custom,
}

impl Family {
    pub fn is_stable_type(self) -> bool {
        matches!(
            self,
            Family::IsotropicStable
                | Family::SingularStable
                | Family::TemperedStable
                | Family::TruncatedStable
                | Family::RelativisticStable
        )
    }

    pub fn name(self) -> &'static str {
        match self {
            Family::IsotropicStable => "isotropic_stable",
            Family::SingularStable => "singular_stable",
            Family::TemperedStable => "tempered_stable",
            Family::TruncatedStable => "truncated_stable",
            Family::RelativisticStable => "relativistic_stable",
            Family::Brownian => "brownian",
            Family::CompoundPoisson => "compound_poisson",
            Family::Custom => "custom",
        }
    }
}

/// Radial density `r ↦ ρ(r)` of a user supplied rotation-invariant Lévy measure.
#[derive(Clone)]
pub struct CustomMeasure(Arc<dyn Fn(f64) -> f64 + Send + Sync>);

impl CustomMeasure {
    pub fn new<F: Fn(f64) -> f64 + Send + Sync + 'static>(rho: F) -> Self {
        Self(Arc::new(rho))
    }

    pub fn eval(&self, r: f64) -> f64 {
        (self.0)(r)
    }
}

impl fmt::Debug for CustomMeasure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("CustomMeasure(<radial density>)")
    }
}

/// Certificate for the moment condition `∫_{|x|>1} |x|^θ ν(dx) < ∞`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentCert {
    pub theta: f64,
    pub finite: bool,
    /// `+∞` when the integral diverges.
    pub integral_estimate: f64,
}

#[derive(Debug, Clone)]
pub struct LevyModel {
    pub family: Family,
    pub dim: usize,
    pub alpha: f64,
    pub scale: f64,
    pub m: f64,
    pub trunc_r: f64,
    q_matrix: Vec<f64>,
    custom: Option<CustomMeasure>,
    radial_cache: Arc<OnceLock<Radial>>,
}

impl LevyModel {
    fn base(family: Family, dim: usize) -> Self {
        Self {
            family,
            dim,
            alpha: 2.0,
            scale: 1.0,
            m: 1.0,
            trunc_r: 1.0,
            q_matrix: vec![0.0; dim * dim],
            custom: None,
            radial_cache: Arc::new(OnceLock::new()),
        }
    }

    pub fn isotropic_stable(dim: usize, alpha: f64, scale: f64) -> Result<Self> {
        Self {
            alpha,
            scale,
            ..Self::base(Family::IsotropicStable, dim)
        }
        .validated()
    }

    /// `d` independent one-dimensional symmetric stable coordinates.
    pub fn singular_stable(dim: usize, alpha: f64, scale: f64) -> Result<Self> {
        Self {
            alpha,
            scale,
            ..Self::base(Family::SingularStable, dim)
        }
        .validated()
    }

    /// Radial density `κ e^{-r} r^{-1-α}`.
    pub fn tempered_stable(dim: usize, alpha: f64, scale: f64) -> Result<Self> {
        Self {
            alpha,
            scale,
            ..Self::base(Family::TemperedStable, dim)
        }
        .validated()
    }

    /// Radial density `κ r^{-1-α}` on `(0, trunc_r]`.
    pub fn truncated_stable(dim: usize, alpha: f64, scale: f64, trunc_r: f64) -> Result<Self> {
        Self {
            alpha,
            scale,
            trunc_r,
            ..Self::base(Family::TruncatedStable, dim)
        }
        .validated()
    }

    /// Exponent `scale · ((|h|² + m^{2/α})^{α/2} − m)`.
    pub fn relativistic_stable(dim: usize, alpha: f64, m: f64, scale: f64) -> Result<Self> {
        Self {
            alpha,
            scale,
            m,
            ..Self::base(Family::RelativisticStable, dim)
        }
        .validated()
    }

    pub fn brownian(q_diag: &[f64]) -> Result<Self> {
        let dim = q_diag.len();
        let mut model = Self::base(Family::Brownian, dim);
        for (i, q) in q_diag.iter().enumerate() {
            model.q_matrix[i * dim + i] = *q;
        }
        model.validated()
    }

    /// The trivial process `L ≡ 0`.
    pub fn degenerate(dim: usize) -> Self {
        Self::base(Family::Brownian, dim)
    }

    /// Jumps at total rate `scale` with standard Gaussian sizes.
    pub fn compound_poisson(dim: usize, rate: f64) -> Result<Self> {
        Self {
            scale: rate,
            ..Self::base(Family::CompoundPoisson, dim)
        }
        .validated()
    }

    /// Rotation-invariant pure-jump model with radial density `ρ`.
    pub fn custom(dim: usize, rho: CustomMeasure) -> Result<Self> {
        Self {
            custom: Some(rho),
            ..Self::base(Family::Custom, dim)
        }
        .validated()
    }

    /// Custom family without a density, only useful to exercise error paths.
    pub fn custom_without_density(dim: usize) -> Self {
        Self::base(Family::Custom, dim)
    }

    /// Adds a Gaussian component with the given symmetric covariance (row-major `d×d`).
    pub fn with_gaussian(mut self, q: Vec<f64>) -> Result<Self> {
        if q.len() != self.dim * self.dim {
            return Err(param_err(
                "q_matrix",
                format!("expected {} entries", self.dim * self.dim),
            ));
        }
        self.q_matrix = q;
        self.validated()
    }

    pub fn q_matrix(&self) -> &[f64] {
        &self.q_matrix
    }

    pub fn has_gaussian_part(&self) -> bool {
        self.q_matrix.iter().any(|q| *q != 0.0)
    }

    pub fn is_degenerate(&self) -> bool {
        self.family == Family::Brownian && !self.has_gaussian_part()
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 || self.dim > 8 {
            return Err(param_err(
                "dim",
                format!("must be in 1..=8, got {}", self.dim),
            ));
        }
        if self.family.is_stable_type() && !(self.alpha > 0.0 && self.alpha < 2.0) {
            return Err(param_err(
                "alpha",
                format!("must lie in (0,2), got {}", self.alpha),
            ));
        }
        if !(self.scale > 0.0 && self.scale.is_finite()) {
            return Err(param_err(
                "scale",
                format!("must be positive, got {}", self.scale),
            ));
        }
        if self.family == Family::RelativisticStable && !(self.m > 0.0) {
            return Err(param_err("m", format!("must be positive, got {}", self.m)));
        }
        if self.family == Family::TruncatedStable && !(self.trunc_r > 0.0) {
            return Err(param_err(
                "trunc_r",
                format!("must be positive, got {}", self.trunc_r),
            ));
        }
        let d = self.dim;
        for i in 0..d {
            for j in 0..d {
                let (a, b) = (self.q_matrix[i * d + j], self.q_matrix[j * d + i]);
                if !a.is_finite() || (a - b).abs() > 1e-12 * (1.0 + a.abs()) {
                    return Err(param_err("q_matrix", "must be finite and symmetric"));
                }
            }
        }
        if self.has_gaussian_part() {
            let eig = SymmetricEigen::new(DMatrix::from_row_slice(d, d, &self.q_matrix));
            if eig.eigenvalues.iter().any(|l| *l < -1e-12) {
                return Err(param_err("q_matrix", "must be non-negative definite"));
            }
        }
        Ok(())
    }

    fn validated(self) -> Result<Self> {
        self.validate()?;
        Ok(self)
    }

    /// Symmetric square root of `Q`, used to draw `N(0, Q dt)`.
    pub fn q_sqrt(&self) -> Vec<f64> {
        let d = self.dim;
        let eig = SymmetricEigen::new(DMatrix::from_row_slice(d, d, &self.q_matrix));
        let sq = DMatrix::from_diagonal(&eig.eigenvalues.map(|l| l.max(0.0).sqrt()));
        let root = &eig.eigenvectors * sq * eig.eigenvectors.transpose();
        let mut out = vec![0.0; d * d];
        for i in 0..d {
            for j in 0..d {
                out[i * d + j] = root[(i, j)];
            }
        }
        out
    }

    fn gaussian_exponent(&self, h: &[f64]) -> f64 {
        let d = self.dim;
        let mut acc = 0.0;
        for i in 0..d {
            for j in 0..d {
                acc += h[i] * self.q_matrix[i * d + j] * h[j];
            }
        }
        0.5 * acc
    }

    /// Radial intensity `κ` of the stable-type families (`ρ(r) = κ r^{-1-α}` near 0).
    pub fn stable_kappa(&self) -> f64 {
        let d = if self.family == Family::SingularStable {
            1
        } else {
            self.dim
        };
        self.scale * stable_radial_intensity(d, self.alpha)
    }

    pub(crate) fn radial(&self) -> Result<&Radial> {
        if let Some(r) = self.radial_cache.get() {
            return Ok(r);
        }
        let built = self.build_radial()?;
        Ok(self.radial_cache.get_or_init(|| built))
    }

    fn build_radial(&self) -> Result<Radial> {
        let kappa = self.stable_kappa();
        Ok(match self.family {
            Family::IsotropicStable | Family::SingularStable => Radial::Power {
                kappa,
                alpha: self.alpha,
                r_max: f64::INFINITY,
            },
            Family::TruncatedStable => Radial::Power {
                kappa,
                alpha: self.alpha,
                r_max: self.trunc_r,
            },
            Family::TemperedStable => Radial::Tempered {
                kappa,
                alpha: self.alpha,
            },
            Family::Brownian => Radial::Zero,
            Family::CompoundPoisson => Radial::GaussianJumps {
                rate: self.scale,
                dim: self.dim,
            },
            Family::RelativisticStable => {
                let (alpha, m, scale, dim) = (self.alpha, self.m, self.scale, self.dim);
                let r_hi = 60.0 / m.powf(1.0 / alpha);
                let rho = move |r: f64| relativistic_radial_density(dim, alpha, m, scale, r);
                Radial::Table(Arc::new(RadialTable::build(
                    &rho,
                    1e-6,
                    r_hi.max(10.0),
                    alpha,
                )))
            }
            Family::Custom => {
                let c = self.custom.clone().ok_or_else(|| {
                    LevyError::UnsupportedModel("custom family requires a radial density".into())
                })?;
                let tail = bg_index_of_density(&|r| c.eval(r));
                let rho = move |r: f64| c.eval(r);
                Radial::Table(Arc::new(RadialTable::build(&rho, 1e-6, 1e3, tail)))
            }
        })
    }

    /// Radial Lévy density `ρ(r)`.
    pub fn radial_density(&self, r: f64) -> Result<f64> {
        if self.family == Family::Custom {
            let c = self.custom.as_ref().ok_or_else(|| {
                LevyError::UnsupportedModel("custom family requires a radial density".into())
            })?;
            return Ok(c.eval(r));
        }
        Ok(self.radial()?.density(r))
    }

    /// Total mass `ν({|x| > 1})` (summed over axes for the singular family).
    pub fn big_jump_mass(&self) -> Result<f64> {
        Ok(self.radial()?.mass_above(1.0) * self.axis_multiplicity())
    }

    pub(crate) fn axis_multiplicity(&self) -> f64 {
        if self.family == Family::SingularStable {
            self.dim as f64
        } else {
            1.0
        }
    }

    /// Characteristic exponent `ψ(h)` with `E e^{i⟨h, L_t⟩} = e^{-t ψ(h)}`.
    pub fn exponent(&self, h: &[f64]) -> Result<Complex64> {
        if h.len() != self.dim {
            return Err(param_err("h", format!("expected dimension {}", self.dim)));
        }
        if h.iter().any(|x| !x.is_finite()) {
            return Err(param_err("h", "must be finite"));
        }
        let gauss = self.gaussian_exponent(h);
        let norm = h.iter().map(|x| x * x).sum::<f64>().sqrt();
        let jump = match self.family {
            Family::IsotropicStable => self.scale * norm.powf(self.alpha),
            Family::SingularStable => {
                self.scale * h.iter().map(|x| x.abs().powf(self.alpha)).sum::<f64>()
            }
            Family::RelativisticStable => {
                let mm = self.m.powf(2.0 / self.alpha);
                self.scale * ((norm * norm + mm).powf(self.alpha / 2.0) - self.m)
            }
            Family::Brownian => 0.0,
            Family::CompoundPoisson => self.scale * -(-0.5 * norm * norm).exp_m1(),
            Family::TemperedStable | Family::TruncatedStable | Family::Custom => {
                if norm == 0.0 {
                    0.0
                } else {
                    let radial = self.radial()?;
                    radial_exponent(
                        |r| radial.density(radial_clip(r, radial)),
                        radial.support_max(),
                        self.dim,
                        norm,
                    )
                }
            }
        };
        Ok(Complex64::new(gauss + jump, 0.0))
    }

    /// Blumenthal–Getoor index `inf{σ > 0 : ∫_{|y|≤1} |y|^σ ν(dy) < ∞}`.
    pub fn bg_index(&self) -> Result<f64> {
        Ok(match self.family {
            f if f.is_stable_type() => self.alpha,
            Family::Brownian | Family::CompoundPoisson => 0.0,
            _ => {
                let c = self.custom.as_ref().ok_or_else(|| {
                    LevyError::UnsupportedModel("custom family requires a radial density".into())
                })?;
                bg_index_of_density(&|r| c.eval(r))
            }
        })
    }

    pub fn moment_check(&self, theta: f64) -> Result<MomentCert> {
        if !(theta > 0.0) {
            return Err(param_err("theta", "must be positive"));
        }
        let cert = |finite: bool, v: f64| MomentCert {
            theta,
            finite,
            integral_estimate: if finite { v } else { f64::INFINITY },
        };
        Ok(match self.family {
            Family::IsotropicStable | Family::SingularStable => {
                let finite = theta < self.alpha;
                cert(
                    finite,
                    self.axis_multiplicity() * self.stable_kappa() / (self.alpha - theta),
                )
            }
            Family::TruncatedStable => {
                let v = if self.trunc_r <= 1.0 {
                    0.0
                } else {
                    let k = self.stable_kappa();
                    let e = theta - self.alpha;
                    if e.abs() < 1e-12 {
                        k * self.trunc_r.ln()
                    } else {
                        k * (self.trunc_r.powf(e) - 1.0) / e
                    }
                };
                cert(true, v)
            }
            Family::Brownian => cert(true, 0.0),
            Family::TemperedStable | Family::RelativisticStable | Family::CompoundPoisson => {
                let radial = self.radial()?;
                let q =
                    integrate_to_infinity(|r| r.powf(theta) * radial.density(r), 1.0, 1e-10, 0.0);
                cert(true, q.value)
            }
            Family::Custom => {
                let c = self.custom.as_ref().ok_or_else(|| {
                    LevyError::UnsupportedModel("custom family requires a radial density".into())
                })?;
                let rho = |r: f64| c.eval(r);
                if tail_moment_converges(&rho, theta) {
                    let q = integrate_to_infinity(|r| r.powf(theta) * rho(r), 1.0, 1e-10, 0.0);
                    cert(true, q.value)
                } else {
                    cert(false, f64::INFINITY)
                }
            }
        })
    }
}

fn radial_clip(r: f64, radial: &Radial) -> f64 {
    r.min(radial.support_max())
}

/// `κ(d, α)` such that `ρ(r) = κ r^{-1-α}` yields the exponent `|h|^α`:
/// `κ = α 2^α Γ((d+α)/2) / (Γ(d/2) Γ(1-α/2))`.
pub fn stable_radial_intensity(dim: usize, alpha: f64) -> f64 {
    let d = dim as f64;
    alpha * 2f64.powf(alpha) * gamma((d + alpha) / 2.0)
        / (gamma(d / 2.0) * gamma(1.0 - alpha / 2.0))
}

/// Surface area of the unit sphere in `R^d`.
pub fn sphere_area(dim: usize) -> f64 {
    let d = dim as f64;
    2.0 * PI.powf(d / 2.0) / gamma(d / 2.0)
}

/// Spherical average `E cos(s ξ₁)` for `ξ` uniform on the unit sphere of `R^d`.
pub fn spherical_cos_average(dim: usize, s: f64) -> f64 {
    match dim {
        1 => s.cos(),
        3 => {
            if s.abs() < 1e-4 {
                1.0 - s * s / 6.0
            } else {
                s.sin() / s
            }
        }
        _ => {
            let k = dim as i32 - 2;
            let norm = integrate(|th: f64| th.sin().powi(k), 0.0, PI, 1e-13, 0.0).value;
            let v = integrate(
                |th: f64| (s * th.cos()).cos() * th.sin().powi(k),
                0.0,
                PI,
                1e-12,
                1e-14,
            )
            .value;
            v / norm
        }
    }
}

/// `∫₀^{r_max} ρ(r) (1 − Φ_d(k r)) dr`, the jump part of a rotation-invariant exponent.
pub(crate) fn radial_exponent<F: Fn(f64) -> f64>(rho: F, r_max: f64, dim: usize, k: f64) -> f64 {
    let one_minus_phi = |s: f64| {
        if dim == 1 {
            let h = (0.5 * s).sin();
            2.0 * h * h
        } else {
            1.0 - spherical_cos_average(dim, s)
        }
    };
    let a = (1.0 / k).min(r_max);
    let inner = integrate(|r| rho(r) * one_minus_phi(k * r), 0.0, a, 1e-11, 0.0).value;
    if a >= r_max {
        return inner;
    }
    // beyond one radian: split into the plain mass and an oscillatory remainder
    let mass = if r_max.is_finite() {
        integrate(&rho, a, r_max, 1e-12, 0.0).value
    } else {
        integrate_to_infinity(&rho, a, 1e-12, 0.0).value
    };
    let osc = oscillatory_tail(
        |r| rho(r) * (1.0 - one_minus_phi(k * r)),
        a,
        r_max,
        PI / k,
        |r| 2.0 * rho(r) / k,
        (inner + mass).abs(),
    );
    inner + mass - osc
}

/// `∫_a^{r_max} g`, where `g` oscillates with half-period `half` under a slowly
/// varying envelope. Partial sums over half periods are accelerated by repeated
/// averaging once the direct remainder bound `bound(r)` is not yet small enough.
fn oscillatory_tail<G, B>(g: G, a: f64, r_max: f64, half: f64, bound: B, scale_ref: f64) -> f64
where
    G: Fn(f64) -> f64,
    B: Fn(f64) -> f64,
{
    let target = 1e-3 * EXPONENT_REL_TOL * scale_ref.max(f64::MIN_POSITIVE);
    let mut partial = Vec::with_capacity(256);
    let mut sum = 0.0;
    let mut lo = a;
    let mut hi = ((a / half).floor() + 1.0) * half;
    loop {
        let top = hi.min(r_max);
        sum += integrate(&g, lo, top, 1e-11, 1e-300).value;
        partial.push(sum);
        if top >= r_max || bound(top) < target {
            return sum;
        }
        if partial.len() >= 96 {
            break;
        }
        lo = top;
        hi = top + half;
    }
    let mut level: Vec<f64> = partial[partial.len() - 16..].to_vec();
    while level.len() > 1 {
        level = level.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
    }
    level[0]
}

/// Bisection on σ of the convergence of `∫₀¹ r^σ ρ(r) dr`, judged by the ratio of
/// consecutive decade contributions deep in the origin.
pub(crate) fn bg_index_of_density(rho: &dyn Fn(f64) -> f64) -> f64 {
    let converges = |sigma: f64| {
        let decade = |k: i32| {
            let hi = 10f64.powi(-k);
            integrate(|r| r.powf(sigma) * rho(r), hi / 10.0, hi, 1e-8, 0.0).value
        };
        let mut log_ratio = 0.0;
        let ks = [6, 7, 8, 9];
        for w in ks.windows(2) {
            let (a, b) = (decade(w[0]), decade(w[1]));
            if a <= 0.0 || b <= 0.0 {
                return true;
            }
            log_ratio += (b / a).ln();
        }
        log_ratio < 0.0
    };
    if converges(0.0) {
        return 0.0;
    }
    let (mut lo, mut hi) = (0.0, 2.0);
    while hi - lo > BG_BISECTION_TOL {
        let mid = 0.5 * (lo + hi);
        if converges(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Whether `∫₁^∞ r^θ ρ(r) dr` converges, by decade ratios far out in the tail.
pub fn tail_moment_converges(rho: &dyn Fn(f64) -> f64, theta: f64) -> bool {
    let decade = |k: i32| {
        let lo = 10f64.powi(k);
        integrate(|r| r.powf(theta) * rho(r), lo, lo * 10.0, 1e-8, 0.0).value
    };
    let mut log_ratio = 0.0;
    let ks = [4, 5, 6, 7];
    for w in ks.windows(2) {
        let (a, b) = (decade(w[0]), decade(w[1]));
        if b <= 0.0 || a <= 0.0 {
            return true;
        }
        log_ratio += (b / a).ln();
    }
    // a convergent power tail loses at least a fraction of a decade per decade
    log_ratio < -1e-3
}

fn relativistic_radial_density(dim: usize, alpha: f64, m: f64, scale: f64, r: f64) -> f64 {
    // subordinated Brownian motion: ν(x) = ∫ (4πu)^{-d/2} e^{-|x|²/4u} Π(du),
    // Π(du) = (α/2)/Γ(1-α/2) u^{-1-α/2} e^{-m^{2/α} u} du
    let d = dim as f64;
    let beta = alpha / 2.0;
    let lam = m.powf(2.0 / alpha);
    let c = scale * beta / gamma(1.0 - beta);
    let r2 = r * r;
    let f = |v: f64| {
        if v <= 0.0 {
            return 0.0;
        }
        let u = r2 * v;
        (4.0 * PI * u).powf(-d / 2.0)
            * (-1.0 / (4.0 * v)).exp()
            * u.powf(-1.0 - beta)
            * (-lam * u).exp()
            * r2
    };
    let nu = c * integrate_to_infinity(f, 0.0, 1e-10, 0.0).value;
    sphere_area(dim) * r.powf(d - 1.0) * nu
}

/// Radial part of a Lévy measure with the operations the samplers need.
#[derive(Debug, Clone)]
pub(crate) enum Radial {
    Zero,
    Power { kappa: f64, alpha: f64, r_max: f64 },
    Tempered { kappa: f64, alpha: f64 },
    GaussianJumps { rate: f64, dim: usize },
    Table(Arc<RadialTable>),
}

impl Radial {
    pub fn density(&self, r: f64) -> f64 {
        if r <= 0.0 {
            return 0.0;
        }
        match self {
            Radial::Zero => 0.0,
            Radial::Power {
                kappa,
                alpha,
                r_max,
            } => {
                if r > *r_max {
                    0.0
                } else {
                    kappa * r.powf(-1.0 - alpha)
                }
            }
            Radial::Tempered { kappa, alpha } => kappa * (-r).exp() * r.powf(-1.0 - alpha),
            Radial::GaussianJumps { rate, dim } => rate * chi_density(*dim, r),
            Radial::Table(t) => t.density(r),
        }
    }

    pub fn support_max(&self) -> f64 {
        match self {
            Radial::Power { r_max, .. } => *r_max,
            Radial::Table(t) => t.r_hi,
            _ => f64::INFINITY,
        }
    }

    /// `∫_ε^∞ ρ(r) dr`.
    pub fn mass_above(&self, eps: f64) -> f64 {
        match self {
            Radial::Zero => 0.0,
            Radial::Power {
                kappa,
                alpha,
                r_max,
            } => {
                if eps >= *r_max {
                    0.0
                } else {
                    kappa / alpha * (eps.powf(-alpha) - r_max.powf(-alpha))
                }
            }
            Radial::Tempered { .. } | Radial::GaussianJumps { .. } => {
                integrate_to_infinity(|r| self.density(r), eps, 1e-11, 0.0).value
            }
            Radial::Table(t) => t.mass_above(eps),
        }
    }

    /// `∫₀^ε r² ρ(r) dr`.
    pub fn second_moment_below(&self, eps: f64) -> f64 {
        match self {
            Radial::Zero => 0.0,
            Radial::Power {
                kappa,
                alpha,
                r_max,
            } => {
                let e = eps.min(*r_max);
                kappa * e.powf(2.0 - alpha) / (2.0 - alpha)
            }
            _ => integrate(|r| r * r * self.density(r), 0.0, eps, 1e-10, 0.0).value,
        }
    }

    /// Draws a radius from `ρ` restricted to `(ε, ∞)` and normalized.
    pub fn sample_radius_above<R: Rng + ?Sized>(&self, eps: f64, rng: &mut R) -> f64 {
        match self {
            Radial::Zero => f64::NAN,
            Radial::Power { alpha, r_max, .. } => {
                let lo = eps.powf(-alpha);
                let hi = if r_max.is_finite() {
                    r_max.powf(-alpha)
                } else {
                    0.0
                };
                let v: f64 = rng.random();
                (lo - v * (lo - hi)).powf(-1.0 / alpha)
            }
            Radial::Tempered { alpha, .. } => loop {
                let uu: f64 = 1.0 - rng.random::<f64>();
                let r = eps * uu.powf(-1.0 / alpha);
                let acc: f64 = rng.random();
                if acc < (-(r - eps)).exp() {
                    break r;
                }
            },
            Radial::GaussianJumps { dim, .. } => loop {
                let mut s = 0.0;
                for _ in 0..*dim {
                    let z: f64 = rng.sample(StandardNormal);
                    s += z * z;
                }
                let r = s.sqrt();
                if r > eps {
                    break r;
                }
            },
            Radial::Table(t) => t.sample_above(eps, rng.random()),
        }
    }
}

fn chi_density(dim: usize, r: f64) -> f64 {
    let d = dim as f64;
    r.powf(d - 1.0) * (-0.5 * r * r).exp() / (2f64.powf(d / 2.0 - 1.0) * gamma(d / 2.0))
}

/// Tabulated radial density on a log grid with cumulative tail masses.
#[derive(Debug)]
pub(crate) struct RadialTable {
    log_r: Vec<f64>,
    log_rho: Vec<f64>,
    /// `∫_{r_i}^{r_hi} ρ`.
    tail: Vec<f64>,
    r_lo: f64,
    r_hi: f64,
    /// power-law index of `ρ ~ c r^{-1-a}` below `r_lo`
    small_index: f64,
}

impl RadialTable {
    fn build(rho: &dyn Fn(f64) -> f64, r_lo: f64, r_hi: f64, small_index: f64) -> Self {
        let n = 600;
        let (la, lb) = (r_lo.ln(), r_hi.ln());
        let log_r: Vec<f64> = (0..n)
            .map(|i| la + (lb - la) * i as f64 / (n - 1) as f64)
            .collect();
        let vals: Vec<f64> = log_r.iter().map(|lr| rho(lr.exp())).collect();
        let log_rho = vals.iter().map(|v| v.max(1e-300).ln()).collect();
        let mut tail = vec![0.0; n];
        for i in (0..n - 1).rev() {
            let (a, b) = (log_r[i].exp(), log_r[i + 1].exp());
            tail[i] = tail[i + 1] + integrate(rho, a, b, 1e-10, 0.0).value;
        }
        Self {
            log_r,
            log_rho,
            tail,
            r_lo,
            r_hi,
            small_index,
        }
    }

    fn density(&self, r: f64) -> f64 {
        if r > self.r_hi {
            return 0.0;
        }
        if r < self.r_lo {
            return self.log_rho[0].exp() * (r / self.r_lo).powf(-1.0 - self.small_index);
        }
        let x = r.ln();
        let n = self.log_r.len();
        let step = (self.log_r[n - 1] - self.log_r[0]) / (n - 1) as f64;
        let i = (((x - self.log_r[0]) / step) as usize).min(n - 2);
        let w = (x - self.log_r[i]) / step;
        ((1.0 - w) * self.log_rho[i] + w * self.log_rho[i + 1]).exp()
    }

    fn mass_above(&self, eps: f64) -> f64 {
        if eps >= self.r_hi {
            return 0.0;
        }
        if eps < self.r_lo {
            let a = self.small_index;
            let c = self.log_rho[0].exp() * self.r_lo.powf(1.0 + a);
            let extra = if a.abs() < 1e-12 {
                c * (self.r_lo / eps).ln()
            } else {
                c / a * (eps.powf(-a) - self.r_lo.powf(-a))
            };
            return self.tail[0] + extra;
        }
        let x = eps.ln();
        let n = self.log_r.len();
        let step = (self.log_r[n - 1] - self.log_r[0]) / (n - 1) as f64;
        let i = (((x - self.log_r[0]) / step) as usize).min(n - 2);
        let b = self.log_r[i + 1].exp();
        let partial = integrate(|r| self.density(r), eps, b, 1e-9, 0.0).value;
        self.tail[i + 1] + partial
    }

    fn sample_above(&self, eps: f64, u: f64) -> f64 {
        let total = self.mass_above(eps);
        let target = u * total;
        // find r with mass_above(r) = total - target, bisection in log r
        let want = total - target;
        let (mut lo, mut hi) = (eps.ln(), self.r_hi.ln());
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if self.mass_above(mid.exp()) > want {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        (0.5 * (lo + hi)).exp()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn relativistic_closed_form() {
        let m = LevyModel::relativistic_stable(1, 1.0, 1.0, 1.0).unwrap();
        assert_eq!(m.exponent(&[0.0]).unwrap().re, 0.0);
        let v = m.exponent(&[3.0]).unwrap();
        assert!((v.re - (10f64.sqrt() - 1.0)).abs() < 1e-14);
        assert_eq!(v.im, 0.0);
    }

    #[test]
    fn stable_intensity_matches_cauchy() {
        // Cauchy with exponent |h| has Lévy density 1/(π x²), i.e. ρ = 2/(π r²)
        assert!((stable_radial_intensity(1, 1.0) - 2.0 / PI).abs() < 1e-14);
        // d = 3, α = 1: density c/|x|^4 with c = 1/π², ρ = 4π r² c r^{-4}
        assert!((stable_radial_intensity(3, 1.0) - 4.0 / PI).abs() < 1e-12);
    }

    #[test]
    fn radial_quadrature_reproduces_stable_exponent() {
        for &alpha in &[0.5, 1.0, 1.5] {
            let kappa = stable_radial_intensity(1, alpha);
            for &k in &[0.3, 1.0, 7.0] {
                let v = radial_exponent(|r: f64| kappa * r.powf(-1.0 - alpha), f64::INFINITY, 1, k);
                let exact = k.powf(alpha);
                assert!(
                    (v - exact).abs() < 1e-7 * exact,
                    "alpha {alpha} k {k}: {v} vs {exact}"
                );
            }
        }
    }

    #[test]
    fn tempered_matches_closed_form_in_one_dimension() {
        // ∫₀^∞ (1 − cos hr) e^{-r} r^{-1-α} dr = Γ(−α) (1 − Re (1 − ih)^α), α ≠ 1
        for &alpha in &[0.7, 1.5] {
            let model = LevyModel::tempered_stable(1, alpha, 1.0).unwrap();
            let kappa = model.stable_kappa();
            for &h in &[0.5, 2.0, 20.0] {
                let z = Complex64::new(1.0, -h).powf(alpha);
                let exact = kappa * gamma(-alpha) * (1.0 - z.re);
                let got = model.exponent(&[h]).unwrap().re;
                assert!(
                    (got - exact).abs() < 1e-7 * exact.abs(),
                    "α {alpha} h {h}: {got} vs {exact}"
                );
            }
        }
    }

    #[test]
    fn relativistic_table_reproduces_exponent() {
        let model = LevyModel::relativistic_stable(1, 1.2, 0.7, 1.0).unwrap();
        let radial = model.radial().unwrap();
        for &h in &[0.5, 3.0] {
            let quad = radial_exponent(|r| radial.density(r), radial.support_max(), 1, h);
            let exact = model.exponent(&[h]).unwrap().re;
            assert!(
                (quad - exact).abs() < 2e-3 * exact,
                "h {h}: {quad} vs {exact}"
            );
        }
    }

    #[test]
    fn custom_without_density_is_unsupported() {
        let m = LevyModel::custom_without_density(1);
        assert!(matches!(
            m.exponent(&[1.0]),
            Err(LevyError::UnsupportedModel(_))
        ));
        assert!(matches!(m.bg_index(), Err(LevyError::UnsupportedModel(_))));
    }

    #[test]
    fn bg_index_catalog_and_custom() {
        let t = LevyModel::truncated_stable(1, 1.3, 1.0, 1.0).unwrap();
        assert_eq!(t.bg_index().unwrap(), 1.3);
        assert_eq!(
            LevyModel::compound_poisson(1, 2.0)
                .unwrap()
                .bg_index()
                .unwrap(),
            0.0
        );
        let custom = LevyModel::custom(
            1,
            CustomMeasure::new(|r: f64| if r <= 1.0 { 2.0 * r.powf(-2.7) } else { 0.0 }),
        )
        .unwrap();
        let bg = custom.bg_index().unwrap();
        assert!((bg - 1.7).abs() < 0.05, "{bg}");
    }

    #[test]
    fn moment_checks() {
        let s = LevyModel::isotropic_stable(1, 1.5, 1.0).unwrap();
        assert!(s.moment_check(1.0).unwrap().finite);
        let c = s.moment_check(1.5).unwrap();
        assert!(!c.finite && c.integral_estimate.is_infinite());
        let t = LevyModel::truncated_stable(1, 0.8, 1.0, 1.0).unwrap();
        let c = t.moment_check(10.0).unwrap();
        assert!(c.finite && c.integral_estimate == 0.0);
        assert!(
            LevyModel::relativistic_stable(2, 1.0, 1.0, 1.0)
                .unwrap()
                .moment_check(5.0)
                .unwrap()
                .finite
        );
        assert!(s.moment_check(-1.0).is_err());
    }

    #[test]
    fn invalid_parameters_rejected() {
        assert!(LevyModel::isotropic_stable(1, 2.0, 1.0).is_err());
        assert!(LevyModel::isotropic_stable(1, 0.0, 1.0).is_err());
        assert!(LevyModel::isotropic_stable(0, 1.0, 1.0).is_err());
        assert!(LevyModel::brownian(&[-1.0]).is_err());
        assert!(LevyModel::degenerate(2)
            .with_gaussian(vec![1.0, 0.5, 0.4, 1.0])
            .is_err());
    }

    #[test]
    fn spherical_average_general_dimension() {
        // d = 2: J0(2) = 0.22389077914123567
        assert!((spherical_cos_average(2, 2.0) - 0.223_890_779_141_235_67).abs() < 1e-9);
        // d = 5 agrees with the series 1 - s²/10 + s⁴/280 for small s
        let s: f64 = 0.1;
        assert!(
            (spherical_cos_average(5, s) - (1.0 - s * s / 10.0 + s.powi(4) / 280.0)).abs() < 1e-10
        );
    }
}
