use mlt::geneassoc::{bootstrap_selection, nn_lasso, nn_lasso_path, BootstrapOptions, ExpressionMatrix, Standardized};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Minimizer over every support: the restricted stationary point with
/// nonnegative entries and the smallest objective.
fn brute_force(s: &Standardized, lambda: f64) -> DVector<f64> {
    let n = s.x.nrows() as f64;
    let p = s.x.ncols();
    let mut best = (s.objective(&DVector::zeros(p), lambda), DVector::zeros(p));
    for mask in 1u32..(1 << p) {
        let cols: Vec<usize> = (0..p).filter(|j| mask & (1 << j) != 0).collect();
        let xs = s.x.select_columns(&cols);
        let gram = xs.transpose() * &xs;
        let rhs = xs.transpose() * &s.y - DVector::from_element(cols.len(), n * lambda);
        let Some(sol) = gram.lu().solve(&rhs) else { continue };
        if sol.iter().any(|v| *v < 0.0) {
            continue;
        }
        let mut beta = DVector::zeros(p);
        for (k, &j) in cols.iter().enumerate() {
            beta[j] = sol[k];
        }
        let obj = s.objective(&beta, lambda);
        if obj < best.0 {
            best = (obj, beta);
        }
    }
    best.1
}

fn draw(seed: u64) -> (Vec<f64>, DMatrix<f64>) {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    let n = r.random_range(4..=12);
    let g = r.random_range(1..=3);
    let x = DMatrix::from_fn(n, g, |_, _| r.random::<f64>());
    let w: Vec<f64> = (0..g).map(|_| r.random_range(-1.0..2.0)).collect();
    let y = (0..n)
        .map(|i| (0..g).map(|j| w[j] * x[(i, j)]).sum::<f64>() + 0.3 * r.random_range(-1.0..1.0))
        .collect();
    (y, x)
}

#[test]
fn coordinate_descent_matches_brute_force() {
    for seed in 0..100 {
        let (y, x) = draw(seed);
        let s = Standardized::new(&y, &x).unwrap();
        let lmax = (s.x.transpose() * &s.y).amax() / s.x.nrows() as f64;
        for frac in [0.0, 0.05, 0.3, 0.7] {
            let lambda = frac * lmax;
            let fit = nn_lasso(&y, &x, lambda).unwrap();
            let want = brute_force(&s, lambda);
            for (k, &j) in s.kept.iter().enumerate() {
                assert!(
                    (fit.beta[j] - want[k]).abs() <= 1e-6,
                    "draw {seed} λ {lambda}: gene {j} {} vs {}",
                    fit.beta[j],
                    want[k]
                );
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn large_lambda_selects_nothing(seed in 0u64..100_000, bump in 1.0f64..10.0) {
        let (y, x) = draw(seed);
        let s = Standardized::new(&y, &x).unwrap();
        let lmax = (s.x.transpose() * &s.y).max().max(0.0) / s.x.nrows() as f64;
        let fit = nn_lasso(&y, &x, lmax * bump + 1e-12).unwrap();
        prop_assert!(fit.beta.iter().all(|b| *b == 0.0));
    }

    #[test]
    fn objective_never_increases(seed in 0u64..100_000, frac in 0.0f64..1.0) {
        let (y, x) = draw(seed);
        let s = Standardized::new(&y, &x).unwrap();
        let lmax = (s.x.transpose() * &s.y).amax() / s.x.nrows() as f64;
        let fit = nn_lasso(&y, &x, frac * lmax).unwrap();
        prop_assert!(fit.converged);
        for w in fit.objective.windows(2) {
            prop_assert!(w[1] <= w[0] + 1e-12 * w[0].abs().max(1.0));
        }
        prop_assert!(fit.beta.iter().all(|b| *b >= 0.0));
    }

    #[test]
    fn orthogonal_design_supports_are_nested(coef in proptest::collection::vec(-2.0f64..2.0, 3)) {
        // Three orthogonal zero-mean ±1 columns of a Hadamard matrix.
        let h = [
            [1.0, 1.0, 1.0], [-1.0, 1.0, 1.0], [1.0, -1.0, 1.0], [-1.0, -1.0, 1.0],
            [1.0, 1.0, -1.0], [-1.0, 1.0, -1.0], [1.0, -1.0, -1.0], [-1.0, -1.0, -1.0],
        ];
        let x = DMatrix::from_fn(8, 3, |i, j| h[i][j]);
        let y: Vec<f64> = (0..8).map(|i| (0..3).map(|j| coef[j] * h[i][j]).sum()).collect();
        let s = Standardized::new(&y, &x).unwrap();
        let lambdas: Vec<f64> = (0..30).map(|k| 0.1 * k as f64).collect();
        let path = nn_lasso_path(&s, &lambdas).unwrap();
        for (w, l) in path.windows(2).zip(&lambdas) {
            for j in 0..3 {
                prop_assert!(!(w[1].beta[j] > 0.0 && w[0].beta[j] == 0.0));
            }
            for j in 0..3 {
                let want = (coef[j] - l).max(0.0);
                prop_assert!((w[0].beta[j] - want).abs() <= 1e-8);
            }
        }
    }
}

#[test]
fn bootstrap_selection_is_reproducible() {
    let mut r = ChaCha8Rng::seed_from_u64(5);
    let x = DMatrix::from_fn(40, 4, |_, _| r.random::<f64>());
    let y: Vec<f64> = (0..40).map(|i| 2.0 * x[(i, 1)] + 0.1 * r.random::<f64>()).collect();
    let ex = ExpressionMatrix::new(x, (0..4).map(|j| format!("g{j}")).collect()).unwrap();
    let opts = BootstrapOptions {
        n_boot: 30,
        ..Default::default()
    };
    let a = bootstrap_selection(&y, &ex, &opts).unwrap();
    let b = bootstrap_selection(&y, &ex, &opts).unwrap();
    assert_eq!(a, b);
    assert!(a.frequency[1] >= 0.95);
    let c = bootstrap_selection(&y, &ex, &BootstrapOptions { seed: 1, ..opts }).unwrap();
    assert_eq!(c.lambdas, a.lambdas);
}
