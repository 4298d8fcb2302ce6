//! Reaction parameter from one approximate coordinate process.
//!
//! The coordinate `x_l(t) = ⟨X_t, e_l⟩` is approximated from gridded data
//! with the closed-form antiderivatives
//!
//! ```text
//! g_l(x; a) = √2 e^{ax/2} ((a/2) sin(πlx) - πl cos(πlx)) / ((a/2)² + (πl)²)
//! ```
//!
//! and left-endpoint cells. The OU fitter then gives `λ̂`, which is mapped
//! back to `θ̂₀` through the eigenvalue formula.

use ndarray::{Array1, Axis};
use rayon::prelude::*;

use crate::coeff::CoeffEstimate;
use crate::error::{invalid, Error, Result};
use crate::model::{ModeIndex, NoiseSpec, PI2};
use crate::ou::{fit_ou, information};
use crate::sim::FieldData;

use std::f64::consts::{PI, SQRT_2};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TemporalThinning {
    pub n: usize,
    /// `⌊N/n⌋`.
    pub step: usize,
    pub big_n: usize,
}

impl TemporalThinning {
    pub fn new(n: usize, big_n: usize) -> Result<Self> {
        if n == 0 || n > big_n {
            return Err(invalid(format!("need 1 <= n <= N, got n = {n}, N = {big_n}")));
        }
        Ok(Self { n, step: big_n / n, big_n })
    }

    /// `Δ_n = ⌊N/n⌋/N`.
    pub fn h(&self) -> f64 {
        self.step as f64 / self.big_n as f64
    }

    pub fn index(&self, i: usize) -> usize {
        i * self.step
    }
}

pub fn g_l(x: f64, a: f64, l: u32) -> f64 {
    let pl = PI * f64::from(l);
    let half = 0.5 * a;
    SQRT_2 * (half * x).exp() * (half * (pl * x).sin() - pl * (pl * x).cos()) / (half * half + pl * pl)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ApproxCoordinatePath {
    /// `x̂(t̃_i)`, `i = 0..=n`.
    pub values: Vec<f64>,
    pub mode: ModeIndex,
    pub kappa: f64,
    pub eta: f64,
    pub h: f64,
}

/// `δ_j g = g(x_j) - g(x_{j-1})` for `j = 1..=m`, stored at index `j-1`.
fn cell_weights(m: usize, a: f64, l: u32) -> Array1<f64> {
    let g: Vec<f64> = (0..=m).map(|j| g_l(j as f64 / m as f64, a, l)).collect();
    Array1::from_iter(g.windows(2).map(|w| w[1] - w[0]))
}

pub fn approx_coordinate_path(
    field: &FieldData,
    mode: ModeIndex,
    kappa_hat: f64,
    eta_hat: f64,
    thinning: TemporalThinning,
) -> Result<ApproxCoordinatePath> {
    if thinning.big_n != field.time_grid.n {
        return Err(Error::DimensionMismatch(format!(
            "thinning built for N = {}, field has N = {}",
            thinning.big_n, field.time_grid.n
        )));
    }
    let (m1, m2) = (field.grid.m1, field.grid.m2);
    let wy = cell_weights(m1, kappa_hat, mode.l1);
    let wz = cell_weights(m2, eta_hat, mode.l2);
    let values = (0..=thinning.n)
        .into_par_iter()
        .map(|i| {
            let slab = field.data.index_axis(Axis(0), thinning.index(i));
            // Left endpoints: nodes 0..m-1.
            let left = slab.slice(ndarray::s![..m1, ..m2]);
            wy.dot(&left.dot(&wz))
        })
        .collect();
    Ok(ApproxCoordinatePath { values, mode, kappa: kappa_hat, eta: eta_hat, h: thinning.h() })
}

/// Fisher information entries and their inverses.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AsymptoticVariances {
    /// `G = s(λ,1) μ^α x₀²`.
    pub g: f64,
    /// `H = α²/(2μ²)`.
    pub h: f64,
    /// `𝒢 = G⁻¹`.
    pub script_g: f64,
    /// Diagonal of `𝓘 = diag(G, H)⁻¹`.
    pub script_i: (f64, f64),
}

pub fn asymptotic_variances(lambda_star: f64, mu_star: f64, x0: f64, alpha: f64) -> Result<AsymptoticVariances> {
    if x0 == 0.0 || !x0.is_finite() {
        return Err(invalid("x0 must be nonzero"));
    }
    if !(mu_star > 0.0) {
        return Err(invalid(format!("mu must be positive, got {mu_star}")));
    }
    let (g, h) = information(lambda_star, mu_star, alpha, x0);
    Ok(AsymptoticVariances { g, h, script_g: 1.0 / g, script_i: (1.0 / g, 1.0 / h) })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReactionEstimate {
    pub lambda_hat: f64,
    pub mu_hat: Option<f64>,
    pub theta0_hat: f64,
    pub mu0_hat: Option<f64>,
    /// `ε √𝒢` and `√(𝓘₂₂/n)` at the estimates.
    pub lambda_sd: f64,
    pub mu_sd: Option<f64>,
    pub contrast: f64,
    pub lambda_at_bound: bool,
    pub mu_at_bound: bool,
    pub converged: bool,
}

/// `θ̂₀ = -λ̂ + θ̂₂((κ̂²+η̂²)/4 + π²(l₁²+l₂²))`.
pub fn theta0_from_lambda(lambda: f64, theta2: f64, kappa: f64, eta: f64, mode: ModeIndex) -> f64 {
    -lambda + theta2 * ((kappa * kappa + eta * eta) / 4.0 + PI2 * mode.norm2())
}

/// Fits `λ` (and `μ` when `mu0_known` is `None`) to the path. `x0` is the
/// initial coefficient used in the asymptotic standard deviations.
#[allow(clippy::too_many_arguments)]
pub fn estimate_reaction(
    path: &ApproxCoordinatePath,
    coeff: &CoeffEstimate,
    noise: &NoiseSpec,
    mu0_known: Option<f64>,
    lambda_box: (f64, f64),
    mu_box: (f64, f64),
    x0: f64,
) -> Result<ReactionEstimate> {
    let n = path.values.len().saturating_sub(1);
    if n < 2 {
        return Err(invalid("need n >= 2"));
    }
    let shift = PI2 * path.mode.norm2();
    let mu_known = match mu0_known {
        Some(mu0) => {
            let mu = shift + mu0;
            if !(mu > 0.0) {
                return Err(invalid(format!("known mu = {mu} is not positive")));
            }
            Some(mu)
        }
        None => None,
    };
    let fit = fit_ou(&path.values, noise.epsilon, noise.alpha, path.h, mu_known, lambda_box, mu_box)?;
    let mu_used = fit.mu_hat.or(mu_known).expect("one of the two is set");
    let theta0_hat = theta0_from_lambda(fit.lambda_hat, coeff.theta2_hat, coeff.kappa_hat, coeff.eta_hat, path.mode);
    let var = asymptotic_variances(fit.lambda_hat, mu_used, x0, noise.alpha)?;
    Ok(ReactionEstimate {
        lambda_hat: fit.lambda_hat,
        mu_hat: fit.mu_hat,
        theta0_hat,
        mu0_hat: fit.mu_hat.map(|mu| mu - shift),
        lambda_sd: noise.epsilon * var.script_g.sqrt(),
        mu_sd: fit.mu_hat.map(|_| (var.script_i.1 / n as f64).sqrt()),
        contrast: fit.contrast,
        lambda_at_bound: fit.lambda_at_bound,
        mu_at_bound: fit.mu_at_bound,
        converged: fit.converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{eigenfunction, SpdeParams};
    use crate::sim::{FieldMeta, SpatialGrid, TimeGrid, Truncation};
    use ndarray::Array3;
    use proptest::prelude::*;

    fn mode_field(p: &SpdeParams, mode: ModeIndex, c: f64, n: usize, m: usize) -> FieldData {
        let data = Array3::from_shape_fn((n + 1, m + 1, m + 1), |(_, j, k)| {
            c * eigenfunction(p, mode, j as f64 / m as f64, k as f64 / m as f64)
        });
        FieldData {
            time_grid: TimeGrid::new(n).unwrap(),
            grid: SpatialGrid::new(m, m).unwrap(),
            data,
            meta: FieldMeta {
                params: *p,
                noise: NoiseSpec { alpha: 0.5, mu0: 0.0, epsilon: 0.1 },
                truncation: Truncation { l1: 1, l2: 1 },
                tail_cutoff: None,
                seed: 0,
            },
        }
    }

    fn coeff(kappa: f64, eta: f64, theta2: f64) -> CoeffEstimate {
        CoeffEstimate {
            kappa_hat: kappa,
            eta_hat: eta,
            theta2_hat: theta2,
            theta1_hat: kappa * theta2,
            eta1_hat: eta * theta2,
            contrast: 0.0,
            iterations: 0,
            kappa_at_bound: false,
            eta_at_bound: false,
            theta2_at_bound: false,
            budget_exhausted: false,
        }
    }

    #[test]
    fn thinning_indices() {
        let t = TemporalThinning::new(50, 1000).unwrap();
        assert_eq!(t.step, 20);
        assert_eq!(t.index(50), 1000);
        assert!((t.h() - 0.02).abs() < 1e-16);
        let t = TemporalThinning::new(3, 10).unwrap();
        assert_eq!(t.index(3), 9);
        assert!(TemporalThinning::new(11, 10).is_err());
    }

    #[test]
    fn g_without_drift() {
        for l in 1..5u32 {
            for &x in &[0.0, 0.13, 0.5, 0.91] {
                let expected = -SQRT_2 * (PI * f64::from(l) * x).cos() / (PI * f64::from(l));
                assert!((g_l(x, 0.0, l) - expected).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn g_is_an_antiderivative() {
        let mut rng = crate::rng::stream(5, &[]);
        use rand::Rng;
        for _ in 0..20 {
            let x: f64 = rng.random_range(0.0..1.0);
            let a: f64 = rng.random_range(-3.0..3.0);
            let l: u32 = rng.random_range(1..6);
            let h = 1e-6;
            let fd = (g_l(x + h, a, l) - g_l(x - h, a, l)) / (2.0 * h);
            let exact = SQRT_2 * (PI * f64::from(l) * x).sin() * (0.5 * a * x).exp();
            assert!((fd - exact).abs() <= 1e-6 * exact.abs().max(1.0), "{x} {a} {l}");
        }
    }

    #[test]
    fn weights_telescope() {
        let w = cell_weights(37, 0.8, 3);
        assert!((w.sum() - (g_l(1.0, 0.8, 3) - g_l(0.0, 0.8, 3))).abs() < 1e-14);
    }

    #[test]
    fn single_mode_recovered_with_first_order_error() {
        let p = SpdeParams::new(0.0, 0.2, 0.2, 0.2).unwrap();
        let d = p.derived();
        let mut previous = f64::INFINITY;
        for m in [50, 100, 200, 400] {
            let f = mode_field(&p, ModeIndex::ONE, 3.0, 2, m);
            let path = approx_coordinate_path(&f, ModeIndex::ONE, d.kappa, d.eta, TemporalThinning::new(2, 2).unwrap())
                .unwrap();
            let err = (path.values[0] - 3.0).abs();
            assert!(err < previous && err < 20.0 / m as f64, "M={m}: {err}");
            previous = err;
            let other = approx_coordinate_path(&f, ModeIndex::new(2, 2).unwrap(), d.kappa, d.eta, TemporalThinning::new(2, 2).unwrap())
                .unwrap();
            assert!(other.values[1].abs() < 20.0 / m as f64);
        }
        let mut zero = mode_field(&p, ModeIndex::ONE, 0.0, 2, 20);
        zero.data.fill(0.0);
        let path = approx_coordinate_path(&zero, ModeIndex::ONE, 1.0, 1.0, TemporalThinning::new(2, 2).unwrap()).unwrap();
        assert!(path.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn theta0_round_trip() {
        let t0 = theta0_from_lambda(4.047842, 0.2, 1.0, 1.0, ModeIndex::ONE);
        assert!(t0.abs() < 1e-6, "{t0}");
    }

    #[test]
    fn asymptotic_variance_examples() {
        let v = asymptotic_variances(4.047842, 0.239209, 3.0, 0.5).unwrap();
        let expected = -(-8.095684f64).exp_m1() / 8.095684 * 0.239209f64.sqrt() * 9.0;
        assert!((v.g - expected).abs() < 1e-14 * expected);
        assert!((v.script_g * v.g - 1.0).abs() < 1e-15);
        assert_eq!(asymptotic_variances(1.0, 1.0, 1.0, 2.0).unwrap().h, 2.0);
        let small = asymptotic_variances(1e-10, 4.0, 2.0, 0.5).unwrap();
        assert!((small.g - 2.0 * 4.0).abs() < 1e-8);
        assert!(asymptotic_variances(1.0, 1.0, 0.0, 1.0).is_err());
    }

    #[test]
    fn known_and_unknown_mu_agree_on_ou_data() {
        let params = crate::ou::OuParams { lambda: 4.047842, mu: 0.239209, alpha: 0.5, epsilon: 0.01, x0: 3.0, n: 500 };
        let ou = crate::ou::simulate_ou(&params, 3).unwrap();
        let path = ApproxCoordinatePath { values: ou.values, mode: ModeIndex::ONE, kappa: 1.0, eta: 1.0, h: params.h() };
        let noise = NoiseSpec::new(0.5, 0.239209 - 2.0 * PI2, 0.01).unwrap();
        let c = coeff(1.0, 1.0, 0.2);
        let known = estimate_reaction(&path, &c, &noise, Some(noise.mu0), (0.01, 50.0), (1e-4, 1e3), 3.0).unwrap();
        let unknown = estimate_reaction(&path, &c, &noise, None, (0.01, 50.0), (1e-4, 1e3), 3.0).unwrap();
        assert!((known.lambda_hat - 4.047842).abs() < 5.0 * known.lambda_sd);
        assert!((known.lambda_hat - unknown.lambda_hat).abs() < 1e-3 * known.lambda_hat);
        let mu0 = unknown.mu0_hat.unwrap();
        assert_eq!(mu0, unknown.mu_hat.unwrap() - 2.0 * PI2);
        assert!(known.mu_hat.is_none() && known.mu_sd.is_none());
    }

    proptest! {
        #[test]
        fn theta0_map_inverts_eigenvalue(
            theta0 in -5.0f64..5.0, theta1 in -2.0f64..2.0, eta1 in -2.0f64..2.0, theta2 in 0.05f64..5.0,
            l1 in 1u32..6, l2 in 1u32..6,
        ) {
            let p = SpdeParams { theta0, theta1, eta1, theta2 };
            let d = p.derived();
            let mode = ModeIndex { l1, l2 };
            let lambda = crate::model::eigenvalue(&p, mode);
            let back = theta0_from_lambda(lambda, theta2, d.kappa, d.eta, mode);
            let scale = lambda.abs().max(theta0.abs()).max(1.0);
            prop_assert!((back - theta0).abs() <= 1e-12 * scale);
        }
    }
}
