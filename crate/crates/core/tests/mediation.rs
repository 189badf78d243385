use mlt::mediation::{mediate, MediationOptions};
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

struct Data {
    x: Vec<f64>,
    m: Vec<f64>,
    y: Vec<f64>,
    cov: DMatrix<f64>,
}

fn data(n: usize, a: f64, b: f64, c: f64, seed: u64) -> Data {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    let mut z = || -> f64 { r.sample(StandardNormal) };
    let cov = DMatrix::from_fn(n, 2, |_, _| z());
    let x: Vec<f64> = (0..n).map(|_| z()).collect();
    let m: Vec<f64> = (0..n).map(|i| a * x[i] + 0.3 * cov[(i, 0)] + z()).collect();
    let y: Vec<f64> = (0..n).map(|i| c * x[i] + b * m[i] - 0.2 * cov[(i, 1)] + z()).collect();
    Data { x, m, y, cov }
}

fn names() -> Vec<String> {
    vec!["age".into(), "sex".into()]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn total_effect_splits_into_direct_and_indirect(
        seed in 0u64..100_000,
        a in -2.0f64..2.0,
        b in -2.0f64..2.0,
        c in -2.0f64..2.0,
        n in 20usize..80,
    ) {
        let d = data(n, a, b, c, seed);
        let opts = MediationOptions { n_boot: 20, ..Default::default() };
        let res = mediate(&d.x, &d.m, &d.y, &d.cov, &names(), &opts, 0).unwrap();
        let scale = res.c_total.abs().max(res.c_prime.abs()).max((res.a * res.b).abs()).max(1.0);
        prop_assert!((res.c_total - (res.c_prime + res.a * res.b)).abs() <= 1e-8 * scale);
        prop_assert!((res.indirect - res.a * res.b).abs() <= 1e-12 * scale);
        prop_assert!(res.ci_low <= res.ci_high);
    }
}

#[test]
fn planted_effects_are_recovered() {
    let d = data(400, 0.8, 0.6, 0.2, 3);
    let res = mediate(&d.x, &d.m, &d.y, &d.cov, &names(), &MediationOptions::default(), 0).unwrap();
    assert!((res.a - 0.8).abs() < 0.15);
    assert!((res.b - 0.6).abs() < 0.15);
    assert!(res.ci_low > 0.0 && res.p_indirect < 0.01);
    assert_eq!(res.covariates.len(), 2);
    assert_eq!(res.covariates[0].name, "age");
}

#[test]
fn null_mediator_is_not_significant() {
    let d = data(300, 0.0, 0.0, 0.5, 4);
    let res = mediate(&d.x, &d.m, &d.y, &d.cov, &names(), &MediationOptions::default(), 0).unwrap();
    assert!(res.ci_low <= 0.0 && res.ci_high >= 0.0);
}

#[test]
fn bootstrap_is_keyed_and_reproducible() {
    let d = data(60, 0.5, 0.5, 0.0, 5);
    let opts = MediationOptions { n_boot: 200, ..Default::default() };
    let a = mediate(&d.x, &d.m, &d.y, &d.cov, &names(), &opts, 7).unwrap();
    let b = mediate(&d.x, &d.m, &d.y, &d.cov, &names(), &opts, 7).unwrap();
    assert_eq!(a, b);
    let c = mediate(&d.x, &d.m, &d.y, &d.cov, &names(), &opts, 8).unwrap();
    assert_eq!(a.indirect, c.indirect);
    assert_ne!((a.ci_low, a.ci_high), (c.ci_low, c.ci_high));
}

#[test]
fn collinear_mediator_rejected() {
    let d = data(30, 1.0, 1.0, 0.0, 6);
    let m: Vec<f64> = d.x.iter().map(|v| 3.0 * v).collect();
    assert!(mediate(&d.x, &m, &d.y, &d.cov, &names(), &MediationOptions::default(), 0).is_err());
    let short = &d.y[..10];
    assert!(mediate(&d.x, &d.m, short, &d.cov, &names(), &MediationOptions::default(), 0).is_err());
}
