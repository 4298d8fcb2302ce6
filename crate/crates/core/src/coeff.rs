//! Minimum-contrast estimation of `(κ, η, θ₂)` from triple increments.
//!
//! With thinned nodes `ỹ_j = b + jδ`, `z̃_k = b + kδ`, the normalized sums
//!
//! ```text
//! V_{jk} = (ε² N Δ^α)^{-1} Σ_i (T_{ijk} X)²
//! ```
//!
//! concentrate on `e^{-κȳ_j - ηz̄_k} φ_{r,α}(θ₂)` with `r = δ/√Δ`. The
//! estimator minimizes the least-squares distance between the two.

use ndarray::{Array2, Zip};

use crate::error::{invalid, Error, Result};
use crate::model::{basis_factor, derived_coeffs, eigenvalue_from, NoiseSpec, SpdeParams, PI2};
use crate::optim::{bisect, nelder_mead, NelderMeadOptions};
use crate::phi::phi;
use crate::sim::{FieldData, SpatialGrid, TimeGrid};

#[derive(Debug, Clone, PartialEq)]
pub struct SpatialThinning {
    pub b: f64,
    pub m1: usize,
    pub delta: f64,
    /// `δ/√Δ`.
    pub r: f64,
    pub grid: SpatialGrid,
    pub time_grid: TimeGrid,
    /// Grid indices of `ỹ_0..ỹ_{m1}` and `z̃_0..z̃_{m1}`.
    pub y_index: Vec<usize>,
    pub z_index: Vec<usize>,
    /// Cell midpoints `ȳ_1..ȳ_{m1}` and `z̄_1..z̄_{m1}`.
    pub ybar: Vec<f64>,
    pub zbar: Vec<f64>,
}

fn align(coordinate: &'static str, value: f64, intervals: usize) -> Result<usize> {
    let scaled = value * intervals as f64;
    let index = scaled.round();
    if (scaled - index).abs() > 1e-9 || index < 0.0 || index > intervals as f64 {
        return Err(Error::MisalignedThinning { coordinate, value, intervals });
    }
    Ok(index as usize)
}

impl SpatialThinning {
    /// `m2 = m1`. Every thinned node must be a grid node; nothing is snapped.
    pub fn new(b: f64, m1: usize, grid: SpatialGrid, time_grid: TimeGrid) -> Result<Self> {
        if !(b > 0.0 && b < 0.5) {
            return Err(invalid(format!("b must lie in (0, 1/2), got {b}")));
        }
        if m1 == 0 {
            return Err(invalid("m1 must be positive"));
        }
        let delta = (1.0 - 2.0 * b) / m1 as f64;
        let nodes: Vec<f64> = (0..=m1).map(|j| b + j as f64 * delta).collect();
        let y_index = nodes.iter().map(|&v| align("y", v, grid.m1)).collect::<Result<Vec<_>>>()?;
        let z_index = nodes.iter().map(|&v| align("z", v, grid.m2)).collect::<Result<Vec<_>>>()?;
        let mids: Vec<f64> = nodes.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
        Ok(Self {
            b,
            m1,
            delta,
            r: delta / time_grid.dt().sqrt(),
            grid,
            time_grid,
            y_index,
            z_index,
            ybar: mids.clone(),
            zbar: mids,
        })
    }

    /// `m = m1 · m2`.
    pub fn cells(&self) -> usize {
        self.m1 * self.m1
    }

    /// Thinned node `ỹ_j` (equal to `z̃_j`).
    pub fn node(&self, j: usize) -> f64 {
        self.b + j as f64 * self.delta
    }

    fn check_field(&self, field: &FieldData) -> Result<()> {
        if field.grid != self.grid || field.time_grid != self.time_grid {
            return Err(Error::DimensionMismatch("thinning was built for a different grid".into()));
        }
        Ok(())
    }
}

/// Spatial double difference at thinned cell `(j,k)` and time index `i`.
#[inline]
fn double_difference(field: &FieldData, th: &SpatialThinning, i: usize, j: usize, k: usize) -> f64 {
    let (y0, y1) = (th.y_index[j - 1], th.y_index[j]);
    let (z0, z1) = (th.z_index[k - 1], th.z_index[k]);
    let x = &field.data;
    x[[i, y1, z1]] - x[[i, y0, z1]] - x[[i, y1, z0]] + x[[i, y0, z0]]
}

/// `T_{i,j,k}X`, the alternating sum over the cube of neighbouring
/// `(t, ỹ, z̃)` nodes.
pub fn triple_increment(field: &FieldData, th: &SpatialThinning, i: usize, j: usize, k: usize) -> Result<f64> {
    th.check_field(field)?;
    if i == 0 || i > field.time_grid.n || j == 0 || j > th.m1 || k == 0 || k > th.m1 {
        return Err(invalid(format!("triple increment index ({i},{j},{k}) out of range")));
    }
    Ok(double_difference(field, th, i, j, k) - double_difference(field, th, i - 1, j, k))
}

#[derive(Debug, Clone, PartialEq)]
pub struct IncrementStats {
    /// `v[[j-1, k-1]] = V_{jk}`.
    pub v: Array2<f64>,
    pub r: f64,
    pub alpha: f64,
    pub epsilon: f64,
    pub n: usize,
}

pub fn increment_stats(field: &FieldData, th: &SpatialThinning, alpha: f64, epsilon: f64) -> Result<IncrementStats> {
    th.check_field(field)?;
    if !(epsilon > 0.0) {
        return Err(invalid("increment statistics need epsilon > 0"));
    }
    if !(alpha > 0.0 && alpha < 3.0) {
        return Err(invalid(format!("alpha must lie in (0,3), got {alpha}")));
    }
    let n = field.time_grid.n;
    let m = th.m1;
    let mut v = Array2::<f64>::zeros((m, m));
    Zip::indexed(&mut v).par_for_each(|(j, k), out| {
        let mut previous = double_difference(field, th, 0, j + 1, k + 1);
        let mut sum = 0.0;
        for i in 1..=n {
            let current = double_difference(field, th, i, j + 1, k + 1);
            sum += (current - previous).powi(2);
            previous = current;
        }
        *out = sum;
    });
    let dt = field.time_grid.dt();
    let norm = epsilon * epsilon * n as f64 * dt.powf(alpha);
    v.mapv_inplace(|s| s / norm);
    Ok(IncrementStats { v, r: th.r, alpha, epsilon, n })
}

fn weights(th: &SpatialThinning, kappa: f64, eta: f64) -> Array2<f64> {
    Array2::from_shape_fn((th.m1, th.m1), |(j, k)| (-kappa * th.ybar[j] - eta * th.zbar[k]).exp())
}

/// `(1/m) Σ (V_{jk} - e^{-κȳ_j-ηz̄_k} φ_{r,α}(θ₂))²`.
pub fn contrast_u(stats: &IncrementStats, kappa: f64, eta: f64, theta2: f64, th: &SpatialThinning) -> Result<f64> {
    if stats.v.dim() != (th.m1, th.m1) {
        return Err(Error::DimensionMismatch("statistics and thinning disagree".into()));
    }
    let p = phi(stats.r, stats.alpha, theta2)?;
    let w = weights(th, kappa, eta);
    let total: f64 = stats.v.iter().zip(w.iter()).map(|(v, w)| (v - w * p).powi(2)).sum();
    Ok(total / th.cells() as f64)
}

/// Compact box `Ξ` for `(κ, η, θ₂)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoeffBox {
    pub kappa: (f64, f64),
    pub eta: (f64, f64),
    pub theta2: (f64, f64),
}

impl Default for CoeffBox {
    fn default() -> Self {
        Self { kappa: (-10.0, 10.0), eta: (-10.0, 10.0), theta2: (0.01, 5.0) }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoeffEstimate {
    pub kappa_hat: f64,
    pub eta_hat: f64,
    pub theta2_hat: f64,
    pub theta1_hat: f64,
    pub eta1_hat: f64,
    pub contrast: f64,
    pub iterations: usize,
    pub kappa_at_bound: bool,
    pub eta_at_bound: bool,
    pub theta2_at_bound: bool,
    /// The simplex stopped on its iteration budget.
    pub budget_exhausted: bool,
}

impl CoeffEstimate {
    pub fn any_bound_hit(&self) -> bool {
        self.kappa_at_bound || self.eta_at_bound || self.theta2_at_bound
    }
}

/// Offsets of the deterministic starting points around the log-linear fit.
const START_OFFSETS: [(f64, f64); 3] = [(0.0, 0.0), (0.5, -0.5), (-0.5, 0.5)];

fn near(v: f64, (lo, hi): (f64, f64)) -> bool {
    let tol = 1e-7 * (hi - lo);
    v - lo <= tol || hi - v <= tol
}

/// Least squares of `log V = c - κȳ - ηz̄` over cells with `V > 0`.
fn log_linear_start(stats: &IncrementStats, th: &SpatialThinning) -> Result<(f64, f64, f64)> {
    let mut rows = Vec::new();
    for ((j, k), &v) in stats.v.indexed_iter() {
        if v > 0.0 && v.is_finite() {
            rows.push((th.ybar[j], th.zbar[k], v.ln()));
        }
    }
    let m = th.cells();
    if rows.is_empty() {
        return Err(Error::Degenerate("all increment statistics are nonpositive".into()));
    }
    if 2 * rows.len() < m {
        return Err(Error::Degenerate(format!("{} of {m} cells are nonpositive", m - rows.len())));
    }
    // Normal equations for (c, κ, η) with regressors (1, -ȳ, -z̄).
    let mut ata = [[0.0f64; 3]; 3];
    let mut atb = [0.0f64; 3];
    for &(y, z, l) in &rows {
        let x = [1.0, -y, -z];
        for a in 0..3 {
            atb[a] += x[a] * l;
            for b in 0..3 {
                ata[a][b] += x[a] * x[b];
            }
        }
    }
    let solution = solve3(ata, atb).ok_or_else(|| Error::Degenerate("log-linear design is singular".into()))?;
    Ok((solution[0], solution[1], solution[2]))
}

fn solve3(mut a: [[f64; 3]; 3], mut b: [f64; 3]) -> Option<[f64; 3]> {
    for col in 0..3 {
        let pivot = (col..3).max_by(|&p, &q| a[p][col].abs().total_cmp(&a[q][col].abs()))?;
        if a[pivot][col].abs() < 1e-14 {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..3 {
            let f = a[row][col] / a[col][col];
            for c in col..3 {
                a[row][c] -= f * a[col][c];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = [0.0; 3];
    for row in (0..3).rev() {
        let s: f64 = (row + 1..3).map(|c| a[row][c] * x[c]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    Some(x)
}

/// Minimizes [`contrast_u`] over `Ξ`.
///
/// For fixed `(κ, η)` the contrast is a quadratic in `c = φ(θ₂)`, minimized
/// at `c* = ΣVw/Σw²` (clamped to the range of φ over the `θ₂` box). Since φ
/// is strictly decreasing, `θ₂` is recovered from `c*` by bisection. The
/// simplex therefore only searches `(κ, η)`.
pub fn fit_coeff(stats: &IncrementStats, th: &SpatialThinning, xi: CoeffBox) -> Result<CoeffEstimate> {
    if stats.v.dim() != (th.m1, th.m1) {
        return Err(Error::DimensionMismatch("statistics and thinning disagree".into()));
    }
    if th.cells() < 4 {
        return Err(invalid("need at least 4 cells"));
    }
    if !(xi.theta2.0 > 0.0 && xi.theta2.0 < xi.theta2.1 && xi.kappa.0 < xi.kappa.1 && xi.eta.0 < xi.eta.1) {
        return Err(invalid("invalid coefficient box"));
    }
    let (intercept, k0, e0) = log_linear_start(stats, th)?;
    let phi_low = phi(stats.r, stats.alpha, xi.theta2.1)?;
    let phi_high = phi(stats.r, stats.alpha, xi.theta2.0)?;
    let m = th.cells() as f64;
    let v2: f64 = stats.v.iter().map(|v| v * v).sum();

    let profile = |k: f64, e: f64| -> (f64, f64) {
        let w = weights(th, k, e);
        let vw: f64 = stats.v.iter().zip(w.iter()).map(|(v, w)| v * w).sum();
        let ww: f64 = w.iter().map(|w| w * w).sum();
        let c = (vw / ww).clamp(phi_low, phi_high);
        ((v2 - 2.0 * c * vw + c * c * ww) / m, c)
    };

    let lower = [xi.kappa.0, xi.eta.0];
    let upper = [xi.kappa.1, xi.eta.1];
    let options = NelderMeadOptions { max_iterations: 1000, f_tolerance: 1e-14, x_tolerance: 1e-10, initial_step: 0.01 };
    let mut best: Option<crate::optim::Minimum> = None;
    let mut iterations = 0;
    for (dk, de) in START_OFFSETS {
        let start = [k0 + dk, e0 + de];
        let run = nelder_mead(|x| profile(x[0], x[1]).0, &start, &lower, &upper, options);
        iterations += run.iterations;
        if best.as_ref().is_none_or(|b| run.value < b.value) {
            best = Some(run);
        }
    }
    let best = best.expect("at least one start");
    let (kappa, eta) = (best.x[0], best.x[1]);
    let (_, c) = profile(kappa, eta);

    let theta2 = if c >= phi_high {
        xi.theta2.0
    } else if c <= phi_low {
        xi.theta2.1
    } else {
        // Bisection in log θ₂.
        let target = c.ln();
        let f = |s: f64| phi(stats.r, stats.alpha, s.exp()).map_or(f64::NAN, |p| p.ln() - target);
        let s = bisect(f, xi.theta2.0.ln(), xi.theta2.1.ln(), 1e-15)
            .ok_or_else(|| Error::Degenerate("could not invert phi".into()))?;
        s.exp()
    };
    let _ = intercept;
    let contrast = contrast_u(stats, kappa, eta, theta2, th)?;
    Ok(CoeffEstimate {
        kappa_hat: kappa,
        eta_hat: eta,
        theta2_hat: theta2,
        theta1_hat: kappa * theta2,
        eta1_hat: eta * theta2,
        contrast,
        iterations,
        kappa_at_bound: near(kappa, xi.kappa),
        eta_at_bound: near(eta, xi.eta),
        theta2_at_bound: near(theta2, xi.theta2),
        budget_exhausted: !best.converged,
    })
}

/// `Cov[T_{i,j,k}X, T_{i',j',k'}X]` for the field truncated to `l₁, l₂ ≤ L`.
///
/// With `q = e^{-λΔ}`, `w = (1-q)/(λμ^α)` and `w_J = (1-q)² q^J/(λμ^α)`:
///
/// ```text
/// i = i':  ε² Σ_l [w - ½ w_{2(i-1)}] D
/// i ≠ i': -½ ε² Σ_l [w_{|i-i'|-1} + w_{i+i'-2}] D
/// ```
///
/// where `D` is the product of the four basis differences over the cells.
#[allow(clippy::too_many_arguments)]
pub fn cov_triple_increment_oracle(
    params: &SpdeParams,
    noise: &NoiseSpec,
    th: &SpatialThinning,
    (i, ip): (usize, usize),
    (j, k): (usize, usize),
    (jp, kp): (usize, usize),
    cutoff: usize,
) -> Result<f64> {
    if cutoff == 0 {
        return Err(Error::CutoffTooSmall("cutoff must be at least 1".into()));
    }
    let n = th.time_grid.n;
    let m = th.m1;
    for (idx, hi) in [(i, n), (ip, n), (j, m), (k, m), (jp, m), (kp, m)] {
        if idx == 0 || idx > hi {
            return Err(invalid("covariance index out of range"));
        }
    }
    let d = derived_coeffs(params);
    let dt = th.time_grid.dt();
    let diff = |l: usize, a: f64, c: usize| {
        basis_factor(l as u32, a, th.node(c)) - basis_factor(l as u32, a, th.node(c - 1))
    };
    let dy: Vec<f64> = (1..=cutoff).map(|l| diff(l, d.kappa, j) * diff(l, d.kappa, jp)).collect();
    let dz: Vec<f64> = (1..=cutoff).map(|l| diff(l, d.eta, k) * diff(l, d.eta, kp)).collect();
    let mut total = 0.0;
    for l1 in 1..=cutoff {
        for l2 in 1..=cutoff {
            let norm = (l1 * l1 + l2 * l2) as f64;
            let mode = crate::model::ModeIndex { l1: l1 as u32, l2: l2 as u32 };
            let lambda = eigenvalue_from(params.theta2, d.gamma_cap, mode);
            let mu = PI2 * norm + noise.mu0;
            let q = (-lambda * dt).exp();
            let one_minus_q = -(-lambda * dt).exp_m1();
            let base = 1.0 / (lambda * mu.powf(noise.alpha));
            let w_j = |jj: usize| one_minus_q * one_minus_q * q.powi(jj as i32) * base;
            let weight = if i == ip {
                one_minus_q * base - 0.5 * w_j(2 * (i - 1))
            } else {
                -0.5 * (w_j(i.abs_diff(ip) - 1) + w_j(i + ip - 2))
            };
            total += weight * dy[l1 - 1] * dz[l2 - 1];
        }
    }
    Ok(noise.epsilon * noise.epsilon * total)
}
