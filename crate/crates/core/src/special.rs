//! Bessel functions of the first kind, orders 0 and 1.
//!
//! Three regimes, each accurate to roughly 1e-14 absolute:
//! * `x <= 8`: the defining power series;
//! * `8 < x < 25`: Miller's backward recurrence normalised by
//!   `J0 + 2 (J2 + J4 + ...) = 1`;
//! * `x >= 25`: Hankel's asymptotic expansion, summed to its smallest term.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

const SERIES_LIMIT: f64 = 8.0;
const ASYMPTOTIC_LIMIT: f64 = 25.0;

/// J0(x). Even in `x`.
pub fn bessel_j0(x: f64) -> f64 {
    let x = x.abs();
    if x <= SERIES_LIMIT {
        series(x, 0)
    } else if x < ASYMPTOTIC_LIMIT {
        miller(x).0
    } else {
        hankel(x, 0)
    }
}

/// J1(x). Odd in `x`.
pub fn bessel_j1(x: f64) -> f64 {
    let ax = x.abs();
    let v = if ax <= SERIES_LIMIT {
        series(ax, 1)
    } else if ax < ASYMPTOTIC_LIMIT {
        miller(ax).1
    } else {
        hankel(ax, 1)
    };
    if x < 0.0 {
        -v
    } else {
        v
    }
}

fn series(x: f64, order: u32) -> f64 {
    let q = -0.25 * x * x;
    let mut term = if order == 0 { 1.0 } else { 0.5 * x };
    let mut sum = term;
    for k in 1..200u32 {
        let k = f64::from(k);
        term *= q / (k * (k + f64::from(order)));
        sum += term;
        if term.abs() < 1e-18 * sum.abs().max(1e-300) {
            break;
        }
    }
    sum
}

/// Returns `(J0(x), J1(x))`.
fn miller(x: f64) -> (f64, f64) {
    let start = 2 * (((x + 50.0) / 2.0).ceil() as usize);
    let two_over_x = 2.0 / x;
    let mut above = 0.0_f64; // J_{k+1}
    let mut current = 1e-30_f64; // J_k
    let mut norm = 0.0;
    let mut j1 = 0.0;
    for k in (1..=start).rev() {
        // J_{k-1} = (2k/x) J_k - J_{k+1}
        let below = k as f64 * two_over_x * current - above;
        above = current;
        current = below;
        let order = k - 1;
        if order == 1 {
            j1 = current;
        }
        if order > 0 && order % 2 == 0 {
            norm += 2.0 * current;
        }
    }
    norm += current;
    (current / norm, j1 / norm)
}

fn hankel(x: f64, order: u32) -> f64 {
    let four_nu2 = 4.0 * f64::from(order * order);
    let eight_x = 8.0 * x;
    let mut p = 1.0;
    let mut q = 0.0;
    let mut term = 1.0_f64;
    let mut previous = f64::INFINITY;
    for k in 1..200u32 {
        let odd = f64::from(2 * k - 1);
        let next = term * (four_nu2 - odd * odd) / (f64::from(k) * eight_x);
        if next.abs() >= previous || next.abs() < 1e-18 {
            break;
        }
        previous = next.abs();
        term = next;
        // k = 1, 2, 3, 4, ... contributes +Q, -P, -Q, +P, ...
        match k % 4 {
            1 => q += term,
            2 => p -= term,
            3 => q -= term,
            _ => p += term,
        }
    }
    let (s, c) = x.sin_cos();
    let (cos_chi, sin_chi) = if order == 0 {
        ((c + s) * FRAC_1_SQRT_2, (s - c) * FRAC_1_SQRT_2)
    } else {
        ((s - c) * FRAC_1_SQRT_2, -(s + c) * FRAC_1_SQRT_2)
    };
    (2.0 / (PI * x)).sqrt() * (p * cos_chi - q * sin_chi)
}
