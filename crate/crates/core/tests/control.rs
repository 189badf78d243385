use mlt::control::{gain_from_value, hamiltonian_sign_solution, riccati_residual, solve_linear, solve_lqr};
use mlt::linalg::{lyapunov_residual, spectral_abscissa, symmetric_min_eigenvalue};
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn hurwitz(n: usize, seed: u64) -> DMatrix<f64> {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    let a = DMatrix::from_fn(n, n, |_, _| r.random_range(-1.0..1.0));
    let shift = spectral_abscissa(&a).unwrap() + r.random_range(0.05..1.0);
    a - DMatrix::identity(n, n) * shift
}

fn spd(n: usize, seed: u64) -> DMatrix<f64> {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    let g = DMatrix::from_fn(n, n, |_, _| r.random_range(-1.0..1.0));
    &g * g.transpose() + DMatrix::identity(n, n) * 0.1
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn lyapunov_solution_is_symmetric_and_positive(seed in 0u64..100_000, n in 1usize..25) {
        let a = hurwitz(n, seed);
        let c = spd(n, seed ^ 7);
        let p = solve_linear(&a, &c).unwrap();
        prop_assert!(lyapunov_residual(&a, &p, &c) <= 1e-8 * c.norm().max(1.0));
        prop_assert!((&p - p.transpose()).amax() <= 1e-9 * p.amax().max(1.0));
        prop_assert!(symmetric_min_eigenvalue(&p) > 0.0);
    }

    #[test]
    fn lqr_stabilizes_unstable_pairs(seed in 0u64..100_000, n in 2usize..15, m in 1usize..4) {
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        let a = DMatrix::from_fn(n, n, |_, _| r.random_range(-1.0..1.0)) + DMatrix::identity(n, n) * 0.5;
        let b = DMatrix::from_fn(n, m, |_, _| r.random_range(-1.0..1.0));
        let rd: Vec<f64> = (0..m).map(|_| r.random_range(0.5..2.0)).collect();
        let c = spd(n, seed ^ 9);
        let p = solve_lqr(&a, &b, &rd, &c).unwrap();
        let k = gain_from_value(&p, &b, &rd);
        let scale = c.norm().max(2.0 * (&p * &a).norm()).max((&p * &b * &k).norm());
        prop_assert!(riccati_residual(&a, &b, &rd, &c, &p) <= 1e-8 * scale);
        prop_assert!((&p - p.transpose()).amax() <= 1e-10 * p.amax());
        prop_assert!(spectral_abscissa(&(&a - &b * k)).unwrap() < 0.0);
    }
}

#[test]
fn unstable_operator_rejected_by_lyapunov_path() {
    let a = DMatrix::from_row_slice(2, 2, &[0.1, 0.0, 0.0, -1.0]);
    assert!(solve_linear(&a, &DMatrix::identity(2, 2)).is_err());
}

#[test]
fn uncontrollable_unstable_mode_fails() {
    let a = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
    let b = DMatrix::from_column_slice(2, 1, &[0.0, 1.0]);
    assert!(solve_lqr(&a, &b, &[1.0], &DMatrix::identity(2, 2)).is_err());
}

#[test]
fn sign_solution_matches_newton() {
    let a = DMatrix::from_row_slice(3, 3, &[0.2, 1.0, 0.0, 0.0, 0.1, 1.0, -0.3, 0.0, 0.4]);
    let b = DMatrix::from_column_slice(3, 1, &[0.0, 0.0, 1.0]);
    let c = DMatrix::identity(3, 3);
    let p1 = hamiltonian_sign_solution(&a, &b, &[1.0], &c).unwrap();
    let p2 = solve_lqr(&a, &b, &[1.0], &c).unwrap();
    assert!((&p1 - &p2).amax() <= 1e-8 * p2.amax());
}

#[test]
fn scalar_riccati_closed_form() {
    // p² − 2ap − q = 0 with b = r = 1.
    let (a, q) = (0.5, 2.0);
    let p = solve_lqr(
        &DMatrix::from_element(1, 1, a),
        &DMatrix::from_element(1, 1, 1.0),
        &[1.0],
        &DMatrix::from_element(1, 1, q),
    )
    .unwrap();
    let want = a + (a * a + q).sqrt();
    assert!((p[(0, 0)] - want).abs() < 1e-10);
}
