//! The Bessel integral
//!
//! ```text
//! φ_{r,α}(θ₂) = 2/(θ₂^{1-α} π) ∫₀^∞ x^{-1-2α} (1 - e^{-x²}) (J₀(√2 r x/√θ₂) - 2 J₀(r x/√θ₂) + 1) dx
//! ```
//!
//! which is the limit of the normalized expected squared triple increment.
//! The integrand is `O(x^{5-2α})` at the origin, so the integral is proper
//! there. On `[0, X]` it is integrated adaptively; beyond `X` the Gaussian
//! factor is below double precision and the remaining Bessel moments are
//! evaluated in closed form.

use std::f64::consts::{PI, SQRT_2};

use crate::error::{invalid, Error, Result};
use crate::model::{DerivedCoeffs, PI2};
use crate::quad::integrate;
use crate::special::{bessel_j0, bessel_j1};

pub const DEFAULT_ABS_TOLERANCE: f64 = 1e-9;
/// Large φ values (α near 3, small θ₂) need a relative floor.
pub const DEFAULT_REL_TOLERANCE: f64 = 1e-12;
const MAX_PANELS: usize = 20_000;

fn check_domain(r: f64, alpha: f64, theta2: f64) -> Result<()> {
    if !(r > 0.0 && r.is_finite()) {
        return Err(invalid(format!("r must be positive, got {r}")));
    }
    if !(alpha > 0.0 && alpha < 3.0) {
        return Err(invalid(format!("alpha must lie in (0,3), got {alpha}")));
    }
    if !(theta2 > 0.0 && theta2.is_finite()) {
        return Err(invalid(format!("theta2 must be positive, got {theta2}")));
    }
    Ok(())
}

pub fn phi(r: f64, alpha: f64, theta2: f64) -> Result<f64> {
    phi_with_tol(r, alpha, theta2, DEFAULT_ABS_TOLERANCE, DEFAULT_REL_TOLERANCE)
}

/// φ with explicit tolerances on the final value.
pub fn phi_with_tol(r: f64, alpha: f64, theta2: f64, abs_tol: f64, rel_tol: f64) -> Result<f64> {
    check_domain(r, alpha, theta2)?;
    let b = r / theta2.sqrt();
    let a = SQRT_2 * b;
    let prefactor = 2.0 / (theta2.powf(1.0 - alpha) * PI);

    let integrand = |x: f64| {
        if x == 0.0 {
            return 0.0;
        }
        let damping = -(-x * x).exp_m1();
        let bessel = if b * x < 2.0 {
            bessel_combination_series(b * x)
        } else {
            bessel_j0(a * x) - 2.0 * bessel_j0(b * x) + 1.0
        };
        x.powf(-1.0 - 2.0 * alpha) * damping * bessel
    };

    let upper = 6.5f64.max(60.0 / b);
    let quarter_period = 2.0 * PI / (4.0 * a);
    let mut breaks = vec![0.0];
    if upper > 1.0 {
        breaks.push(1.0);
        let pieces = ((upper - 1.0) / quarter_period).ceil().max(1.0) as usize;
        let width = (upper - 1.0) / pieces as f64;
        breaks.extend((1..=pieces).map(|i| 1.0 + width * i as f64));
    } else {
        breaks.push(upper);
    }

    let tail = bessel_tail(a, b, alpha, upper)?;
    // Tolerances are converted to the scale of the raw integral.
    let scale = 1.0 / prefactor;
    let head = integrate(integrand, &breaks, abs_tol * scale, rel_tol, MAX_PANELS);
    let total = head.value + tail;
    let target = (abs_tol * scale).max(rel_tol * total.abs());
    if !head.converged && head.error > target {
        return Err(Error::Quadrature { error: head.error * prefactor, tolerance: target * prefactor });
    }
    Ok(prefactor * total)
}

/// `J₀(√2 u) - 2J₀(u) + 1 = Σ_{k≥2} (-1)^k (2^k - 2) (u/2)^{2k} / (k!)²`,
/// accurate where the closed form cancels.
fn bessel_combination_series(u: f64) -> f64 {
    let q = 0.25 * u * u;
    let mut power = q * q / 4.0;
    let mut sum = 0.0;
    for k in 2..40 {
        let term = power * ((1u64 << k) - 2) as f64;
        sum += if k % 2 == 0 { term } else { -term };
        if term < 1e-17 * sum.abs() {
            break;
        }
        power *= q / ((k + 1) * (k + 1)) as f64;
    }
    sum
}

/// `∫_X^∞ x^{-1-2α} (J₀(ax) - 2J₀(bx) + 1) dx`.
fn bessel_tail(a: f64, b: f64, alpha: f64, x: f64) -> Result<f64> {
    let nu = 1.0 + 2.0 * alpha;
    let power = x.powf(-2.0 * alpha) / (2.0 * alpha);
    Ok(power + a.powf(2.0 * alpha) * bessel_moment(nu, a * x)?
        - 2.0 * b.powf(2.0 * alpha) * bessel_moment(nu, b * x)?)
}

/// `T_ν(U) = ∫_U^∞ u^{-ν} J₀(u) du` for `ν > 1/2`, `U ≳ 50`, from the
/// integration-by-parts recursion
/// `T_ν = -U^{-ν} J₁(U) + (ν+1) U^{-ν-1} J₀(U) - (ν+1)² T_{ν+2}`.
pub fn bessel_moment(nu: f64, u: f64) -> Result<f64> {
    let (j0, j1) = (bessel_j0(u), bessel_j1(u));
    let mut sum = 0.0;
    let mut weight = 1.0;
    let mut v = nu;
    for _ in 0..200 {
        let head = -u.powf(-v) * j1 + (v + 1.0) * u.powf(-v - 1.0) * j0;
        sum += weight * head;
        weight *= -(v + 1.0) * (v + 1.0);
        v += 2.0;
        // |T_v(U)| ≤ U^{1-v}/(v-1).
        let remainder = weight.abs() * u.powf(1.0 - v) / (v - 1.0);
        if remainder < 1e-16 * sum.abs().max(u.powf(-nu)) {
            return Ok(sum);
        }
        if remainder > 1e3 * u.powf(1.0 - nu) {
            break;
        }
    }
    Err(Error::Quadrature { error: f64::NAN, tolerance: 1e-16 })
}

/// Independent approximation of φ by the lattice sum
///
/// ```text
/// 4 Δ^{-α} Σ_{l₁,l₂=1}^{L} (1 - e^{-λΔ})/(λ μ'^α) (cos(π r l₁ √Δ) - 1)(cos(π r l₂ √Δ) - 1),
/// ```
///
/// `λ = θ₂(π²(l₁²+l₂²) + Γ)`, `μ' = π²(l₁²+l₂²)`. The truncated sum misses a
/// tail of order `L^{-2α}`; it is extrapolated from the sums at `L/2` and `L`.
pub fn phi_lattice_oracle(
    r: f64,
    alpha: f64,
    theta2: f64,
    aux: DerivedCoeffs,
    delta_t: f64,
    cutoff: usize,
) -> Result<f64> {
    check_domain(r, alpha, theta2)?;
    if !(delta_t > 0.0 && delta_t < 1.0) {
        return Err(invalid(format!("delta_t must lie in (0,1), got {delta_t}")));
    }
    if cutoff < 4 {
        return Err(Error::CutoffTooSmall(format!("cutoff {cutoff} < 4")));
    }
    let half = cutoff / 2;
    let step = PI * r * delta_t.sqrt();
    let c: Vec<f64> = (0..=cutoff).map(|l| (step * l as f64).cos() - 1.0).collect();
    let (mut full, mut inner) = (0.0, 0.0);
    for l1 in 1..=cutoff {
        let mut row_full = 0.0;
        let mut row_inner = 0.0;
        let sq1 = (l1 * l1) as f64;
        for l2 in 1..=cutoff {
            let norm = PI2 * (sq1 + (l2 * l2) as f64);
            let lambda = theta2 * (norm + aux.gamma_cap);
            let term = -(-lambda * delta_t).exp_m1() / (lambda * norm.powf(alpha)) * c[l2];
            row_full += term;
            if l2 <= half {
                row_inner += term;
            }
        }
        full += row_full * c[l1];
        if l1 <= half {
            inner += row_inner * c[l1];
        }
    }
    let correction = (full - inner) / (4f64.powf(alpha) - 1.0);
    if correction.abs() > 0.05 * full.abs() {
        return Err(Error::CutoffTooSmall(format!(
            "tail extrapolation is {:.2}% of the truncated sum at L = {cutoff}",
            100.0 * correction.abs() / full.abs()
        )));
    }
    Ok(4.0 * delta_t.powf(-alpha) * (full + correction))
}
