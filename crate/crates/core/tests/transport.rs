use mlt::graph::{LaplacianKind, WeightedGraph};
use mlt::linalg::{matrix_exponential, norm1};
use mlt::transport::{
    assemble_from_laplacians, integrate_coupled, integrate_single_layer, rk4_linear, Integrator, LatentState,
};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_graph(n: usize, density: f64, seed: u64) -> WeightedGraph {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    let mut w = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i + 1..n {
            if r.random::<f64>() < density {
                let v = r.random_range(0.05..1.0);
                w[(i, j)] = v;
                w[(j, i)] = v;
            }
        }
    }
    WeightedGraph::new(w).unwrap()
}

fn random_state(n: usize, seed: u64) -> DVector<f64> {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    DVector::from_fn(n, |_, _| r.random_range(0.0..2.0))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn diffusion_conserves_mass(seed in 0u64..10_000, n in 4usize..30, c in 0.01f64..3.0, t in 0.0f64..10.0) {
        let g = random_graph(n, 0.3, seed);
        let u0 = random_state(n, seed ^ 1);
        let u = integrate_single_layer(&u0, &g.laplacian(LaplacianKind::Combinatorial), c, t, Integrator::MatrixExponential).unwrap();
        prop_assert!((u.sum() - u0.sum()).abs() <= 1e-9 * u0.sum().max(1.0));
    }

    #[test]
    fn diffusion_smooths_monotonically(seed in 0u64..10_000, n in 4usize..30, c in 0.01f64..3.0) {
        let g = random_graph(n, 0.3, seed);
        let lap = g.laplacian(LaplacianKind::Combinatorial);
        let u0 = random_state(n, seed ^ 2);
        let mut prev_max = u0.max();
        let mut prev_min = u0.min();
        for t in [0.1, 0.5, 1.0, 2.0, 5.0] {
            let u = integrate_single_layer(&u0, &lap, c, t, Integrator::MatrixExponential).unwrap();
            prop_assert!(u.max() <= prev_max + 1e-10);
            prop_assert!(u.min() >= prev_min - 1e-10);
            prev_max = u.max();
            prev_min = u.min();
        }
    }

    #[test]
    fn exponential_inverts_negation(seed in 0u64..10_000, n in 1usize..12, scale in 0.0f64..5.0) {
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        let raw = DMatrix::from_fn(n, n, |_, _| r.random_range(-1.0..1.0));
        let a = if norm1(&raw) > 0.0 { &raw * (scale / norm1(&raw)) } else { raw };
        let prod = matrix_exponential(&a).unwrap() * matrix_exponential(&(-&a)).unwrap();
        prop_assert!((prod - DMatrix::identity(n, n)).amax() <= 1e-8);
    }

    #[test]
    fn uncoupled_layers_evolve_independently(seed in 0u64..10_000, n in 3usize..15, t in 0.0f64..4.0) {
        let gs = random_graph(n, 0.4, seed);
        let gf = random_graph(n, 0.4, seed + 1);
        let (ls, lf) = (gs.laplacian(LaplacianKind::Combinatorial), gf.laplacian(LaplacianKind::Combinatorial));
        let zero = DMatrix::zeros(n, n);
        let op = assemble_from_laplacians(&ls, &lf, &zero, &zero, 0.0, 0.0, 0.7, 1.3).unwrap();
        let us = random_state(n, seed ^ 3);
        let uf = random_state(n, seed ^ 4);
        let out = integrate_coupled(&LatentState::new(us.clone(), uf.clone()).unwrap(), &op, t, Integrator::MatrixExponential).unwrap();
        let es = integrate_single_layer(&us, &ls, 0.7, t, Integrator::MatrixExponential).unwrap();
        let ef = integrate_single_layer(&uf, &lf, 1.3, t, Integrator::MatrixExponential).unwrap();
        prop_assert!((out.u_s - es).amax() <= 1e-10);
        prop_assert!((out.u_f - ef).amax() <= 1e-10);
    }
}

#[test]
fn exponential_and_rk4_agree_on_coupled_system() {
    let n = 20;
    let gs = random_graph(n, 0.3, 11);
    let gf = random_graph(n, 0.3, 12);
    let mut r = ChaCha8Rng::seed_from_u64(13);
    let ms = DMatrix::from_fn(n, n, |i, j| if i == j { 1.0 } else { 0.0 } + r.random_range(-0.05..0.05));
    let mf = DMatrix::from_fn(n, n, |i, j| if i == j { 1.0 } else { 0.0 } + r.random_range(-0.05..0.05));
    let op = assemble_from_laplacians(
        &gs.laplacian(LaplacianKind::Combinatorial),
        &gf.laplacian(LaplacianKind::Combinatorial),
        &ms,
        &mf,
        0.1,
        -0.05,
        0.5,
        0.5,
    )
    .unwrap();
    let s0 = LatentState::new(random_state(n, 1), random_state(n, 2)).unwrap();
    let a = integrate_coupled(&s0, &op, 2.0, Integrator::MatrixExponential).unwrap().stacked();
    let b = integrate_coupled(&s0, &op, 2.0, Integrator::Rk4 { dt: 1e-3 }).unwrap().stacked();
    assert!((&a - &b).norm() <= 1e-9 * a.norm());
}

#[test]
fn rk4_on_scalar_decay() {
    let a = DMatrix::from_element(1, 1, -1.0);
    let v = rk4_linear(&a, &DVector::from_element(1, 1.0), 1.0, 1e-3).unwrap();
    assert!((v[0] - (-1.0f64).exp()).abs() < 1e-13);
}

#[test]
fn rejects_bad_durations() {
    let g = random_graph(5, 0.5, 0);
    let lap = g.laplacian(LaplacianKind::Combinatorial);
    let u0 = random_state(5, 0);
    assert!(integrate_single_layer(&u0, &lap, 1.0, -1.0, Integrator::MatrixExponential).is_err());
    assert!(integrate_single_layer(&u0, &lap, 1.0, f64::NAN, Integrator::MatrixExponential).is_err());
    assert!(integrate_single_layer(&u0, &lap, 1.0, 1.0, Integrator::Rk4 { dt: 0.0 }).is_err());
    assert!(integrate_single_layer(&u0, &lap, -1.0, 1.0, Integrator::MatrixExponential).is_err());
}
