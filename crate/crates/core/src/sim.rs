//! Exact spectral simulation on the space-time grid.
//!
//! Each retained mode is an independent Ornstein-Uhlenbeck process sampled
//! with its exact transition law. The field on the grid is assembled
//! separably as `X_t = A C_t Bᵀ`, with `A[j][l₁] = √2 sin(πl₁y_j) e^{-κy_j/2}`
//! and `B` likewise in `z`.
//!
//! Optionally the modes beyond the explicit block, up to a much larger
//! cutoff, are added through their aliases on the grid (see [`AliasedTail`]).

use ndarray::{s, Array2, Array3, ArrayView2, Axis, Zip};
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::model::{
    basis_factor, derived_coeffs, eigenvalue_from, mu_weight, sin_pi_ratio, InitialSpectrum,
    ModeIndex, NoiseSpec, SpdeParams, PI2,
};
use crate::ou::variance_factor;
use crate::rng::{self, role};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TimeGrid {
    pub n: usize,
}

impl TimeGrid {
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(invalid("time grid needs N >= 1"));
        }
        Ok(Self { n })
    }

    pub fn dt(&self) -> f64 {
        1.0 / self.n as f64
    }

    pub fn time(&self, i: usize) -> f64 {
        i as f64 / self.n as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SpatialGrid {
    pub m1: usize,
    pub m2: usize,
}

impl SpatialGrid {
    pub fn new(m1: usize, m2: usize) -> Result<Self> {
        if m1 < 2 || m2 < 2 {
            return Err(invalid(format!("spatial grid needs M1, M2 >= 2, got {m1}x{m2}")));
        }
        Ok(Self { m1, m2 })
    }
}

/// Explicit mode block `l₁ ≤ L1`, `l₂ ≤ L2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Truncation {
    pub l1: usize,
    pub l2: usize,
}

impl Truncation {
    pub fn new(l1: usize, l2: usize) -> Result<Self> {
        if l1 == 0 || l2 == 0 {
            return Err(invalid("truncation needs L1, L2 >= 1"));
        }
        Ok(Self { l1, l2 })
    }
}

/// Mode paths `x_{l₁,l₂}(t_i)`, stored mode-major: `data[[l₁-1, l₂-1, i]]`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientPaths {
    pub truncation: Truncation,
    pub time_grid: TimeGrid,
    pub data: Array3<f64>,
}

impl CoefficientPaths {
    pub fn get(&self, l: ModeIndex, i: usize) -> f64 {
        self.data[[l.l1 as usize - 1, l.l2 as usize - 1, i]]
    }

    /// The `L1 × L2` coefficient matrix at time index `i`.
    pub fn at_time(&self, i: usize) -> ArrayView2<'_, f64> {
        self.data.index_axis(Axis(2), i)
    }
}

/// Generating configuration carried with a field.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldMeta {
    pub params: SpdeParams,
    pub noise: NoiseSpec,
    pub truncation: Truncation,
    /// Cutoff of the aliased tail, if one was added.
    pub tail_cutoff: Option<usize>,
    pub seed: u64,
}

/// `data[[i, j, k]] = X_{t_i}(y_j, z_k)`; boundary slices are exactly zero.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldData {
    pub time_grid: TimeGrid,
    pub grid: SpatialGrid,
    pub data: Array3<f64>,
    pub meta: FieldMeta,
}

impl FieldData {
    pub fn value(&self, i: usize, j: usize, k: usize) -> f64 {
        self.data[[i, j, k]]
    }
}

fn check_support(spectrum: &InitialSpectrum, truncation: Truncation) -> Result<()> {
    let (e1, e2) = spectrum.support_extent();
    if e1 as usize > truncation.l1 || e2 as usize > truncation.l2 {
        return Err(invalid(format!(
            "initial spectrum reaches mode ({e1},{e2}) beyond the truncation {}x{}",
            truncation.l1, truncation.l2
        )));
    }
    Ok(())
}

/// Exact OU sampling of every mode in the block. Mode `l` draws from its own
/// stream keyed by `(seed, l₁, l₂)`.
pub fn simulate_coordinates(
    params: &SpdeParams,
    noise: &NoiseSpec,
    spectrum: &InitialSpectrum,
    truncation: Truncation,
    time_grid: TimeGrid,
    seed: u64,
) -> Result<CoefficientPaths> {
    params.validate()?;
    noise.validate()?;
    check_support(spectrum, truncation)?;
    let gamma = derived_coeffs(params).gamma_cap;
    let dt = time_grid.dt();
    let steps = time_grid.n;
    let mut data = Array3::<f64>::zeros((truncation.l1, truncation.l2, steps + 1));
    data.axis_iter_mut(Axis(0)).into_par_iter().enumerate().for_each(|(a, mut plane)| {
        for (b, mut path) in plane.axis_iter_mut(Axis(0)).enumerate() {
            let l = ModeIndex { l1: a as u32 + 1, l2: b as u32 + 1 };
            let lambda = eigenvalue_from(params.theta2, gamma, l);
            let mu = PI2 * l.norm2() + noise.mu0;
            let decay = (-lambda * dt).exp();
            let sd = noise.epsilon * mu.powf(-0.5 * noise.alpha) * variance_factor(lambda, dt).sqrt();
            let mut stream = rng::stream(seed, &[role::COORDINATE, u64::from(l.l1), u64::from(l.l2)]);
            let mut x = spectrum.get(l);
            path[0] = x;
            for i in 1..=steps {
                let z: f64 = StandardNormal.sample(&mut stream);
                x = decay * x + sd * z;
                path[i] = x;
            }
        }
    });
    Ok(CoefficientPaths { truncation, time_grid, data })
}

/// Mean and variance of `x_l(t)`.
pub fn coordinate_moments(
    params: &SpdeParams,
    noise: &NoiseSpec,
    spectrum: &InitialSpectrum,
    l: ModeIndex,
    t: f64,
) -> Result<(f64, f64)> {
    if !(0.0..=1.0).contains(&t) {
        return Err(invalid(format!("t must lie in [0,1], got {t}")));
    }
    let lambda = eigenvalue_from(params.theta2, derived_coeffs(params).gamma_cap, l);
    let mu = mu_weight(noise, l)?;
    let mean = (-lambda * t).exp() * spectrum.get(l);
    let var = noise.epsilon * noise.epsilon * variance_factor(lambda, t) / mu.powf(noise.alpha);
    Ok((mean, var))
}

/// `basis[[j, l-1]] = √2 sin(π l j/M) e^{-a j/(2M)}`, exact zeros at `j ∈ {0, M}`.
pub fn basis_matrix(m: usize, modes: usize, a: f64) -> Array2<f64> {
    Array2::from_shape_fn((m + 1, modes), |(j, col)| {
        let y = j as f64 / m as f64;
        std::f64::consts::SQRT_2
            * sin_pi_ratio(((col + 1) * j) as u64, m as u64)
            * (-0.5 * a * y).exp()
    })
}

fn new_field(
    coeffs: &CoefficientPaths,
    grid: SpatialGrid,
    meta: FieldMeta,
) -> FieldData {
    FieldData {
        time_grid: coeffs.time_grid,
        grid,
        data: Array3::zeros((coeffs.time_grid.n + 1, grid.m1 + 1, grid.m2 + 1)),
        meta,
    }
}

/// `X_{t_i}(y_j, z_k) = Σ_l x_l(t_i) e_l(y_j, z_k)` over the explicit block.
pub fn assemble_field(
    coeffs: &CoefficientPaths,
    params: &SpdeParams,
    grid: SpatialGrid,
    meta: FieldMeta,
) -> Result<FieldData> {
    if meta.truncation != coeffs.truncation {
        return Err(Error::DimensionMismatch("metadata truncation differs from coefficients".into()));
    }
    let d = derived_coeffs(params);
    let a = basis_matrix(grid.m1, coeffs.truncation.l1, d.kappa);
    let b = basis_matrix(grid.m2, coeffs.truncation.l2, d.eta);
    let mut field = new_field(coeffs, grid, meta);
    field.data.axis_iter_mut(Axis(0)).into_par_iter().enumerate().for_each(|(i, mut slab)| {
        let c = coeffs.at_time(i);
        slab.assign(&a.dot(&c).dot(&b.t()));
    });
    Ok(field)
}

/// Direct double sum over the block at an arbitrary point.
pub fn naive_point(coeffs: &CoefficientPaths, params: &SpdeParams, t_index: usize, y: f64, z: f64) -> f64 {
    let d = derived_coeffs(params);
    let mut total = 0.0;
    for a in 1..=coeffs.truncation.l1 {
        let fy = basis_factor(a as u32, d.kappa, y);
        for b in 1..=coeffs.truncation.l2 {
            total += coeffs.data[[a - 1, b - 1, t_index]] * fy * basis_factor(b as u32, d.eta, z);
        }
    }
    total
}

/// Modes `l ≤ l_max` outside the explicit block, folded onto the grid.
///
/// On nodes `y_j = j/M`, `sin(π a y_j) = ± sin(π p y_j)` with `p` the fold of
/// `a` into `1..M-1` (or zero). All tail modes of one folded pair `(p,q)` add
/// up to a single Gaussian per time step. Tail modes start at zero and decorrelate within
/// one step (`λΔ` is large for all of them), so that Gaussian is independent
/// over time with variance `ε² Σ μ^{-α}/(2λ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct AliasedTail {
    pub cutoff: usize,
    /// Standard deviations indexed `[p-1, q-1]`.
    pub sd: Array2<f64>,
    /// Smallest `λΔ` over the tail modes.
    pub min_decay: f64,
}

/// Minimal `λΔ` admitted for the independence approximation.
pub const TAIL_MIN_DECAY: f64 = 20.0;

/// Signed fold of mode `a` on an `M`-grid: `(p, ±1)` or `None` if the mode
/// vanishes on every node.
pub fn fold_mode(a: usize, m: usize) -> Option<(usize, f64)> {
    let r = a % (2 * m);
    if r == 0 || r == m {
        None
    } else if r < m {
        Some((r, 1.0))
    } else {
        Some((2 * m - r, -1.0))
    }
}

impl AliasedTail {
    pub fn new(
        params: &SpdeParams,
        noise: &NoiseSpec,
        truncation: Truncation,
        grid: SpatialGrid,
        time_grid: TimeGrid,
        cutoff: usize,
    ) -> Result<Self> {
        if cutoff < truncation.l1.max(truncation.l2) {
            return Err(invalid("tail cutoff must not be below the explicit block"));
        }
        let gamma = derived_coeffs(params).gamma_cap;
        let dt = time_grid.dt();
        // Smallest eigenvalue outside the block.
        let edge = (truncation.l1 + 1).pow(2).min((truncation.l2 + 1).pow(2)) + 1;
        let min_decay = params.theta2 * (PI2 * edge as f64 + gamma) * dt;
        if cutoff > truncation.l1.min(truncation.l2) && min_decay < TAIL_MIN_DECAY {
            return Err(invalid(format!(
                "tail modes decay by only lambda*dt = {min_decay:.2} per step (need >= {TAIL_MIN_DECAY}); enlarge the explicit block"
            )));
        }
        let (m1, m2) = (grid.m1, grid.m2);
        // Modes grouped by their y-fold; rows are accumulated independently in
        // a fixed order, so the result does not depend on the thread count.
        let mut by_fold: Vec<Vec<usize>> = vec![Vec::new(); m1];
        for a in 1..=cutoff {
            if let Some((p, _)) = fold_mode(a, m1) {
                by_fold[p].push(a);
            }
        }
        let mut var = Array2::<f64>::zeros((m1 - 1, m2 - 1));
        var.axis_iter_mut(Axis(0)).into_par_iter().enumerate().for_each(|(row, mut out)| {
            for &a in &by_fold[row + 1] {
                let sq_a = (a * a) as f64;
                for bm in 1..=cutoff {
                    if a <= truncation.l1 && bm <= truncation.l2 {
                        continue;
                    }
                    let Some((q, _)) = fold_mode(bm, m2) else { continue };
                    let norm = PI2 * (sq_a + (bm * bm) as f64);
                    let lambda = params.theta2 * (norm + gamma);
                    let mu = norm + noise.mu0;
                    out[q - 1] += mu.powf(-noise.alpha) / (2.0 * lambda);
                }
            }
        });
        let eps2 = noise.epsilon * noise.epsilon;
        let sd = var.mapv(|v| (eps2 * v).sqrt());
        Ok(Self { cutoff, sd, min_decay })
    }
}

/// [`assemble_field`] plus the aliased tail. Tail noise at step `i` comes from
/// a stream keyed by `(seed, i)`.
pub fn assemble_field_with_tail(
    coeffs: &CoefficientPaths,
    params: &SpdeParams,
    grid: SpatialGrid,
    tail: &AliasedTail,
    meta: FieldMeta,
) -> Result<FieldData> {
    if tail.sd.dim() != (grid.m1 - 1, grid.m2 - 1) {
        return Err(Error::DimensionMismatch("tail built for a different grid".into()));
    }
    if meta.truncation != coeffs.truncation {
        return Err(Error::DimensionMismatch("metadata truncation differs from coefficients".into()));
    }
    let d = derived_coeffs(params);
    let t = coeffs.truncation;
    let k1 = t.l1.max(grid.m1 - 1);
    let k2 = t.l2.max(grid.m2 - 1);
    let a = basis_matrix(grid.m1, k1, d.kappa);
    let b = basis_matrix(grid.m2, k2, d.eta);
    let seed = meta.seed;
    let mut field = new_field(coeffs, grid, meta);
    field.data.axis_iter_mut(Axis(0)).into_par_iter().enumerate().for_each(|(i, mut slab)| {
        let mut c = Array2::<f64>::zeros((k1, k2));
        c.slice_mut(s![..t.l1, ..t.l2]).assign(&coeffs.at_time(i));
        if i > 0 {
            let mut stream = rng::stream(seed, &[role::ALIASED_TAIL, i as u64]);
            let mut folded = c.slice_mut(s![..grid.m1 - 1, ..grid.m2 - 1]);
            Zip::from(&mut folded).and(&tail.sd).for_each(|cell, &sd| {
                let z: f64 = StandardNormal.sample(&mut stream);
                *cell += sd * z;
            });
        }
        slab.assign(&a.dot(&c).dot(&b.t()));
    });
    Ok(field)
}

/// Simulates coefficients and assembles the field, with the tail if
/// `tail` is given.
#[allow(clippy::too_many_arguments)]
pub fn simulate_field(
    params: &SpdeParams,
    noise: &NoiseSpec,
    spectrum: &InitialSpectrum,
    truncation: Truncation,
    time_grid: TimeGrid,
    grid: SpatialGrid,
    tail: Option<&AliasedTail>,
    seed: u64,
) -> Result<FieldData> {
    let coeffs = simulate_coordinates(params, noise, spectrum, truncation, time_grid, seed)?;
    let meta = FieldMeta {
        params: *params,
        noise: *noise,
        truncation,
        tail_cutoff: tail.map(|t| t.cutoff),
        seed,
    };
    match tail {
        Some(tail) => assemble_field_with_tail(&coeffs, params, grid, tail, meta),
        None => assemble_field(&coeffs, params, grid, meta),
    }
}
