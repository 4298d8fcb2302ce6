//! Small-dispersion Ornstein-Uhlenbeck process
//!
//! ```text
//! dx = -λ x dt + ε μ^{-α/2} dW,   x(0) = x₀,
//! ```
//!
//! observed at `t = ih`, `h = 1/n`. Exact simulation, the Gaussian
//! quasi-likelihood contrast and its minimization.

use rand_distr::{Distribution, StandardNormal};

use crate::error::{invalid, Error, Result};
use crate::optim::grid_brent;
use crate::rng::{self, role};

/// `(1 - e^{-2λt}) / (2λ)`, continuous through `λ = 0` and valid for `λ < 0`.
#[inline]
pub fn variance_factor(lambda: f64, t: f64) -> f64 {
    let x = lambda * t;
    if x.abs() < 1e-12 {
        t * (1.0 - x)
    } else {
        -(-2.0 * x).exp_m1() / (2.0 * lambda)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OuParams {
    pub lambda: f64,
    pub mu: f64,
    pub alpha: f64,
    pub epsilon: f64,
    pub x0: f64,
    pub n: usize,
}

impl OuParams {
    pub fn h(&self) -> f64 {
        1.0 / self.n as f64
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mu > 0.0) {
            return Err(invalid(format!("mu must be positive, got {}", self.mu)));
        }
        if !(self.alpha > 0.0 && self.alpha < 3.0) {
            return Err(invalid(format!("alpha must lie in (0,3), got {}", self.alpha)));
        }
        if !(self.epsilon >= 0.0 && self.epsilon < 1.0) {
            return Err(invalid(format!("epsilon must lie in [0,1), got {}", self.epsilon)));
        }
        if self.x0 == 0.0 || !self.x0.is_finite() {
            return Err(invalid("x0 must be finite and nonzero"));
        }
        if self.n == 0 || !self.lambda.is_finite() {
            return Err(invalid("need n >= 1 and finite lambda"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OuPath {
    /// `x(ih)`, `i = 0..=n`.
    pub values: Vec<f64>,
}

impl OuPath {
    pub fn n(&self) -> usize {
        self.values.len().saturating_sub(1)
    }
}

pub fn simulate_ou(params: &OuParams, seed: u64) -> Result<OuPath> {
    params.validate()?;
    let h = params.h();
    let decay = (-params.lambda * h).exp();
    let sd = params.epsilon
        * params.mu.powf(-0.5 * params.alpha)
        * variance_factor(params.lambda, h).sqrt();
    let mut stream = rng::stream(seed, &[role::OU_PATH]);
    let mut values = Vec::with_capacity(params.n + 1);
    let mut x = params.x0;
    values.push(x);
    for _ in 0..params.n {
        let z: f64 = StandardNormal.sample(&mut stream);
        x = decay * x + sd * z;
        values.push(x);
    }
    Ok(OuPath { values })
}

/// `Σ (x_i - e^{-λh} x_{i-1})²`.
pub fn residual_energy(lambda: f64, values: &[f64], h: f64) -> f64 {
    let decay = (-lambda * h).exp();
    values.windows(2).map(|w| (w[1] - decay * w[0]).powi(2)).sum()
}

/// `Σ (x_i - e^{-λh}x_{i-1})² / (ε² s/μ^α) + n log(s/(μ^α h))`,
/// `s = (1 - e^{-2λh})/(2λ)`.
pub fn contrast_v(lambda: f64, mu: f64, values: &[f64], epsilon: f64, alpha: f64, h: f64) -> f64 {
    let n = values.len().saturating_sub(1) as f64;
    let s = variance_factor(lambda, h);
    let mu_a = mu.powf(alpha);
    residual_energy(lambda, values, h) * mu_a / (epsilon * epsilon * s) + n * (s / (mu_a * h)).ln()
}

/// Stationary point of [`contrast_v`] in `μ` at fixed `λ`:
/// `μ^α = n ε² s / RSS(λ)`.
pub fn profiled_mu(lambda: f64, values: &[f64], epsilon: f64, alpha: f64, h: f64) -> f64 {
    let n = values.len().saturating_sub(1) as f64;
    let rss = residual_energy(lambda, values, h);
    (n * epsilon * epsilon * variance_factor(lambda, h) / rss).powf(1.0 / alpha)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OuFit {
    pub lambda_hat: f64,
    /// Only in the unknown-`μ` variant.
    pub mu_hat: Option<f64>,
    pub contrast: f64,
    pub lambda_at_bound: bool,
    pub mu_at_bound: bool,
    pub converged: bool,
}

pub const DEFAULT_LAMBDA_BOX: (f64, f64) = (0.01, 50.0);
pub const DEFAULT_MU_BOX: (f64, f64) = (1e-4, 1e3);
const GRID_POINTS: usize = 400;
const LAMBDA_TOLERANCE: f64 = 1e-10;

fn at_bound(v: f64, (lo, hi): (f64, f64)) -> bool {
    let tol = 1e-8 * (hi - lo);
    v - lo <= tol || hi - v <= tol
}

/// Minimum-contrast estimate of `λ` (and `μ` when `mu_known` is `None`).
pub fn fit_ou(
    values: &[f64],
    epsilon: f64,
    alpha: f64,
    h: f64,
    mu_known: Option<f64>,
    lambda_box: (f64, f64),
    mu_box: (f64, f64),
) -> Result<OuFit> {
    if values.len() < 3 {
        return Err(invalid("need at least two transitions"));
    }
    if !(epsilon > 0.0) || !(h > 0.0) || !(alpha > 0.0 && alpha < 3.0) {
        return Err(invalid("fit_ou needs epsilon > 0, h > 0 and alpha in (0,3)"));
    }
    if !(lambda_box.0 < lambda_box.1) || !(mu_box.0 > 0.0 && mu_box.0 < mu_box.1) {
        return Err(invalid("empty lambda or mu box"));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(invalid("path contains non-finite values"));
    }
    let lagged: f64 = values[..values.len() - 1].iter().map(|v| v * v).sum();
    if lagged == 0.0 {
        return Err(Error::Degenerate("path is identically zero: contrast is flat in lambda".into()));
    }
    match mu_known {
        Some(mu) => {
            if !(mu > 0.0) {
                return Err(invalid(format!("known mu must be positive, got {mu}")));
            }
            let f = |l: f64| contrast_v(l, mu, values, epsilon, alpha, h);
            let (l, v, ok) = grid_brent(f, lambda_box.0, lambda_box.1, GRID_POINTS, LAMBDA_TOLERANCE);
            Ok(OuFit {
                lambda_hat: l,
                mu_hat: None,
                contrast: v,
                lambda_at_bound: at_bound(l, lambda_box),
                mu_at_bound: false,
                converged: ok,
            })
        }
        None => {
            let mu_of = |l: f64| profiled_mu(l, values, epsilon, alpha, h).clamp(mu_box.0, mu_box.1);
            let f = |l: f64| {
                let v = contrast_v(l, mu_of(l), values, epsilon, alpha, h);
                if v.is_nan() {
                    f64::INFINITY
                } else {
                    v
                }
            };
            let (l, v, ok) = grid_brent(f, lambda_box.0, lambda_box.1, GRID_POINTS, LAMBDA_TOLERANCE);
            let mu = mu_of(l);
            Ok(OuFit {
                lambda_hat: l,
                mu_hat: Some(mu),
                contrast: v,
                lambda_at_bound: at_bound(l, lambda_box),
                mu_at_bound: at_bound(mu, mu_box),
                converged: ok,
            })
        }
    }
}

/// `G = s(λ,1) μ^α x₀²` and `H = α²/(2μ²)`, the Fisher information entries
/// for `λ` (rate `ε⁻¹`) and `μ` (rate `√n`).
pub fn information(lambda: f64, mu: f64, alpha: f64, x0: f64) -> (f64, f64) {
    (variance_factor(lambda, 1.0) * mu.powf(alpha) * x0 * x0, alpha * alpha / (2.0 * mu * mu))
}
