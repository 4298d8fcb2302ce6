//! Parameterization and eigenstructure of the model
//!
//! ```text
//! dX = (θ₂ Δ + θ₁ ∂y + η₁ ∂z + θ₀) X dt + ε dW^Q   on (0,1)², X = 0 on the boundary.
//! ```
//!
//! The operator has eigenpairs `λ_l = θ₂(π²(l₁²+l₂²) + Γ)` and
//! `e_l(y,z) = 2 sin(πl₁y) sin(πl₂z) e^{-κy/2} e^{-ηz/2}`, orthonormal for the
//! weight `e^{κy+ηz}`. Noise mode `l` is scaled by `μ_l^{-α/2}` with
//! `μ_l = π²(l₁²+l₂²) + μ₀`.

use std::collections::BTreeMap;
use std::f64::consts::{PI, SQRT_2};

use ndarray::ArrayView2;

use crate::error::{invalid, Result};

/// `π²`.
pub const PI2: f64 = PI * PI;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpdeParams {
    pub theta0: f64,
    pub theta1: f64,
    pub eta1: f64,
    pub theta2: f64,
}

impl SpdeParams {
    /// Validates `θ₂ > 0` and positivity of the operator (`λ_{1,1} > 0`).
    pub fn new(theta0: f64, theta1: f64, eta1: f64, theta2: f64) -> Result<Self> {
        let p = Self { theta0, theta1, eta1, theta2 };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.theta0, self.theta1, self.eta1, self.theta2];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(invalid("parameters must be finite"));
        }
        if self.theta2 <= 0.0 {
            return Err(invalid(format!("theta2 must be positive, got {}", self.theta2)));
        }
        let l11 = eigenvalue(self, ModeIndex::ONE);
        if l11 <= 0.0 {
            return Err(invalid(format!("operator is not positive: lambda(1,1) = {l11}")));
        }
        Ok(())
    }

    pub fn derived(&self) -> DerivedCoeffs {
        derived_coeffs(self)
    }

    /// Inverse of [`derived_coeffs`] given `θ₂`.
    pub fn from_derived(d: DerivedCoeffs, theta2: f64) -> Self {
        let theta0 = -theta2 * (d.gamma_cap - 0.25 * (d.kappa * d.kappa + d.eta * d.eta));
        Self { theta0, theta1: d.kappa * theta2, eta1: d.eta * theta2, theta2 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DerivedCoeffs {
    pub kappa: f64,
    pub eta: f64,
    pub gamma_cap: f64,
}

pub fn derived_coeffs(p: &SpdeParams) -> DerivedCoeffs {
    let kappa = p.theta1 / p.theta2;
    let eta = p.eta1 / p.theta2;
    DerivedCoeffs { kappa, eta, gamma_cap: -p.theta0 / p.theta2 + 0.25 * (kappa * kappa + eta * eta) }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec {
    pub alpha: f64,
    pub mu0: f64,
    /// `0` is accepted for noiseless paths; the estimators require `ε > 0`.
    pub epsilon: f64,
}

impl NoiseSpec {
    pub fn new(alpha: f64, mu0: f64, epsilon: f64) -> Result<Self> {
        let n = Self { alpha, mu0, epsilon };
        n.validate()?;
        Ok(n)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 3.0) {
            return Err(invalid(format!("alpha must lie in (0,3), got {}", self.alpha)));
        }
        if !self.mu0.is_finite() || 2.0 * PI2 + self.mu0 <= 0.0 {
            return Err(invalid(format!("mu0 must exceed -2 pi^2, got {}", self.mu0)));
        }
        if !(self.epsilon >= 0.0 && self.epsilon < 1.0) {
            return Err(invalid(format!("epsilon must lie in [0,1), got {}", self.epsilon)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ModeIndex {
    pub l1: u32,
    pub l2: u32,
}

impl ModeIndex {
    pub const ONE: ModeIndex = ModeIndex { l1: 1, l2: 1 };

    pub fn new(l1: u32, l2: u32) -> Result<Self> {
        if l1 == 0 || l2 == 0 {
            return Err(invalid(format!("mode indices start at 1, got ({l1},{l2})")));
        }
        Ok(Self { l1, l2 })
    }

    /// `l₁² + l₂²`.
    pub fn norm2(self) -> f64 {
        let (a, b) = (f64::from(self.l1), f64::from(self.l2));
        a * a + b * b
    }
}

/// Spectral coefficients `⟨X₀, e_l⟩`; unlisted modes are zero.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct InitialSpectrum {
    coefficients: BTreeMap<ModeIndex, f64>,
}

impl InitialSpectrum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn single(mode: ModeIndex, value: f64) -> Self {
        let mut s = Self::new();
        s.set(mode, value);
        s
    }

    /// Zero values are not stored.
    pub fn set(&mut self, mode: ModeIndex, value: f64) {
        if value == 0.0 {
            self.coefficients.remove(&mode);
        } else {
            self.coefficients.insert(mode, value);
        }
    }

    pub fn get(&self, mode: ModeIndex) -> f64 {
        self.coefficients.get(&mode).copied().unwrap_or(0.0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (ModeIndex, f64)> + '_ {
        self.coefficients.iter().map(|(&m, &v)| (m, v))
    }

    pub fn is_zero(&self) -> bool {
        self.coefficients.is_empty()
    }

    /// Largest `(l₁, l₂)` bounds over the support.
    pub fn support_extent(&self) -> (u32, u32) {
        self.coefficients.keys().fold((0, 0), |(a, b), m| (a.max(m.l1), b.max(m.l2)))
    }

    /// The mode with the largest `|⟨X₀,e_l⟩|`, the natural choice for
    /// reaction estimation.
    pub fn dominant_mode(&self) -> Option<ModeIndex> {
        self.coefficients
            .iter()
            .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
            .map(|(&m, _)| m)
    }
}

/// Compact box for `θ`; estimates are clamped to it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParamBox {
    pub theta0: (f64, f64),
    pub theta1: (f64, f64),
    pub eta1: (f64, f64),
    pub theta2: (f64, f64),
}

impl Default for ParamBox {
    fn default() -> Self {
        Self { theta0: (-5.0, 5.0), theta1: (-2.0, 2.0), eta1: (-2.0, 2.0), theta2: (0.01, 5.0) }
    }
}

impl ParamBox {
    pub fn contains(&self, p: &SpdeParams) -> bool {
        let inside = |v: f64, (lo, hi): (f64, f64)| v >= lo && v <= hi;
        inside(p.theta0, self.theta0)
            && inside(p.theta1, self.theta1)
            && inside(p.eta1, self.eta1)
            && inside(p.theta2, self.theta2)
    }
}

pub fn eigenvalue(p: &SpdeParams, l: ModeIndex) -> f64 {
    eigenvalue_from(p.theta2, p.derived().gamma_cap, l)
}

#[inline]
pub fn eigenvalue_from(theta2: f64, gamma_cap: f64, l: ModeIndex) -> f64 {
    theta2 * (PI2 * l.norm2() + gamma_cap)
}

/// One-dimensional factor `√2 sin(πly) e^{-ay/2}`; `e_l = factor(l₁,κ,y)·factor(l₂,η,z)`.
#[inline]
pub fn basis_factor(l: u32, a: f64, y: f64) -> f64 {
    SQRT_2 * sin_pi(f64::from(l) * y) * (-0.5 * a * y).exp()
}

/// `sin(πx)`, exactly zero at integers.
#[inline]
pub fn sin_pi(x: f64) -> f64 {
    let r = x.rem_euclid(2.0);
    if r == 0.0 || r == 1.0 {
        return 0.0;
    }
    let (r, sign) = if r > 1.0 { (r - 1.0, -1.0) } else { (r, 1.0) };
    sign * (PI * r.min(1.0 - r)).sin()
}

/// `sin(π num / den)` with the argument reduced in integers, so grid nodes
/// on the boundary give exactly zero.
pub fn sin_pi_ratio(num: u64, den: u64) -> f64 {
    let p = num % (2 * den);
    if p % den == 0 {
        return 0.0;
    }
    let (p, sign) = if p > den { (p - den, -1.0) } else { (p, 1.0) };
    let p = p.min(den - p);
    sign * (PI * p as f64 / den as f64).sin()
}

pub fn eigenfunction(p: &SpdeParams, l: ModeIndex, y: f64, z: f64) -> f64 {
    let d = p.derived();
    basis_factor(l.l1, d.kappa, y) * basis_factor(l.l2, d.eta, z)
}

pub fn mu_weight(noise: &NoiseSpec, l: ModeIndex) -> Result<f64> {
    let mu = PI2 * l.norm2() + noise.mu0;
    if mu > 0.0 {
        Ok(mu)
    } else {
        Err(invalid(format!("mu({},{}) = {mu} is not positive", l.l1, l.l2)))
    }
}

/// Midpoint-rule approximation of `∬ f g e^{κy+ηz} dy dz`, with `f[j][k]` and
/// `g[j][k]` sampled at `((j+½)/ny, (k+½)/nz)`.
pub fn weighted_inner_product(
    f: ArrayView2<f64>,
    g: ArrayView2<f64>,
    kappa: f64,
    eta: f64,
) -> Result<f64> {
    let (ny, nz) = f.dim();
    if g.dim() != (ny, nz) {
        return Err(crate::Error::DimensionMismatch(format!(
            "grid functions differ in shape: {:?} vs {:?}",
            f.dim(),
            g.dim()
        )));
    }
    if ny < 2 || nz < 2 {
        return Err(invalid("inner product grid needs at least 2x2 points"));
    }
    let (hy, hz) = (1.0 / ny as f64, 1.0 / nz as f64);
    let wz: Vec<f64> = (0..nz).map(|k| (eta * (k as f64 + 0.5) * hz).exp()).collect();
    let mut total = 0.0;
    for j in 0..ny {
        let wy = (kappa * (j as f64 + 0.5) * hy).exp();
        let row: f64 = (0..nz).map(|k| f[[j, k]] * g[[j, k]] * wz[k]).sum();
        total += wy * row;
    }
    Ok(total * hy * hz)
}

/// Samples `f` at the cell midpoints used by [`weighted_inner_product`].
pub fn sample_midpoints(
    ny: usize,
    nz: usize,
    f: impl Fn(f64, f64) -> f64,
) -> ndarray::Array2<f64> {
    ndarray::Array2::from_shape_fn((ny, nz), |(j, k)| {
        f((j as f64 + 0.5) / ny as f64, (k as f64 + 0.5) / nz as f64)
    })
}

/// `‖A^{(1+α₀)/2} X₀‖² = Σ λ_l^{1+α₀} ⟨X₀,e_l⟩²`.
pub fn check_a1(spectrum: &InitialSpectrum, p: &SpdeParams, alpha0: f64) -> f64 {
    spectrum.iter().map(|(l, c)| eigenvalue(p, l).powf(1.0 + alpha0) * c * c).sum()
}
