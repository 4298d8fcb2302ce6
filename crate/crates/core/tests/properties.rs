use proptest::prelude::*;

use spde2d::coeff::{contrast_u, fit_coeff, increment_stats, CoeffBox, IncrementStats, SpatialThinning};
use spde2d::field_io::{read_binary, write_binary};
use spde2d::model::{InitialSpectrum, ModeIndex, NoiseSpec, SpdeParams};
use spde2d::phi::phi;
use spde2d::sim::{simulate_field, FieldData, SpatialGrid, TimeGrid, Truncation};

fn small_field(seed: u64) -> FieldData {
    simulate_field(
        &SpdeParams::new(0.0, 0.2, 0.2, 0.2).unwrap(),
        &NoiseSpec::new(0.5, -19.5, 0.1).unwrap(),
        &InitialSpectrum::single(ModeIndex::ONE, 3.0),
        Truncation::new(24, 24).unwrap(),
        TimeGrid::new(80).unwrap(),
        SpatialGrid::new(40, 40).unwrap(),
        None,
        seed,
    )
    .unwrap()
}

#[test]
fn phi_is_positive_and_decreasing_on_the_documented_grids() {
    for &alpha in &[0.5, 1.0, 1.5, 2.5] {
        for &r in &[0.5, 1.8974] {
            let mut previous = f64::INFINITY;
            for i in 0..50 {
                let v = phi(r, alpha, 0.05 + 1.95 * i as f64 / 49.0).unwrap();
                assert!(v > 0.0 && v < previous, "alpha {alpha} r {r} step {i}");
                previous = v;
            }
        }
    }
}

#[test]
fn estimates_are_invariant_under_sign_flip() {
    let field = small_field(5);
    let th = SpatialThinning::new(0.05, 6, field.grid, field.time_grid).unwrap();
    let mut flipped = field.clone();
    flipped.data.mapv_inplace(|v| -v);
    let a = increment_stats(&field, &th, 0.5, 0.1).unwrap();
    let b = increment_stats(&flipped, &th, 0.5, 0.1).unwrap();
    assert_eq!(a, b);
    let ea = fit_coeff(&a, &th, CoeffBox::default()).unwrap();
    let eb = fit_coeff(&b, &th, CoeffBox::default()).unwrap();
    assert_eq!(ea, eb);
    assert_eq!(ea.theta1_hat, ea.kappa_hat * ea.theta2_hat);
}

#[test]
fn simulated_fields_survive_the_binary_container() {
    let f = small_field(6);
    let mut bytes = Vec::new();
    write_binary(&f, &mut bytes).unwrap();
    assert_eq!(read_binary(bytes.as_slice()).unwrap(), f);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn phi_decreases_between_any_two_points(r in 0.2f64..3.0, alpha in 0.1f64..2.9, t in 0.05f64..3.0, f in 1.05f64..3.0) {
        let a = phi(r, alpha, t).unwrap();
        let b = phi(r, alpha, t * f).unwrap();
        prop_assert!(a > b && b > 0.0);
    }

    #[test]
    fn contrast_is_nonnegative(seed in 0u64..1000, kappa in -3.0f64..3.0, eta in -3.0f64..3.0, theta2 in 0.05f64..3.0) {
        let th = SpatialThinning::new(0.05, 15, SpatialGrid::new(200, 200).unwrap(), TimeGrid::new(1000).unwrap()).unwrap();
        let mut rng = spde2d::rng::stream(seed, &[]);
        use rand::Rng;
        let v = ndarray::Array2::from_shape_fn((15, 15), |_| rng.random_range(0.0..5.0));
        let stats = IncrementStats { v, r: th.r, alpha: 0.5, epsilon: 0.1, n: 1000 };
        prop_assert!(contrast_u(&stats, kappa, eta, theta2, &th).unwrap() >= 0.0);
    }

    #[test]
    fn aligned_thinnings_are_accepted_and_r_is_derived(p in 1usize..20, q in 1usize..6, m1 in 1usize..20, n in 10usize..2000) {
        let big_m = 2 * p + m1 * q;
        let b = p as f64 / big_m as f64;
        let grid = SpatialGrid::new(big_m, big_m).unwrap();
        let th = SpatialThinning::new(b, m1, grid, TimeGrid::new(n).unwrap()).unwrap();
        prop_assert_eq!(th.y_index.len(), m1 + 1);
        prop_assert_eq!(th.y_index[m1], p + m1 * q);
        prop_assert!((th.r - th.delta * (n as f64).sqrt()).abs() <= 1e-12 * th.r);
    }
}
