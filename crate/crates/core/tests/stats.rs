use mlt::graph::WeightedGraph;
use mlt::model::PropagationDecomposition;
use mlt::stats::{
    dominance_test, gam_fit, neighbor_mean_map, pearson, permutation_from_rotation, spin_permutation_test,
    DominanceScope, GamOptions, NeighborAggregate, RegionalStatMap, SpinOptions, StatKind,
};
use mlt::synth::generate_atlas;
use nalgebra::{DMatrix, Matrix3};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_graph(n: usize, seed: u64) -> WeightedGraph {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    let mut w = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i + 1..n {
            if r.random::<f64>() < 0.3 {
                let v = r.random_range(0.1..1.0);
                w[(i, j)] = v;
                w[(j, i)] = v;
            }
        }
    }
    WeightedGraph::new(w).unwrap()
}

fn decomps(n_subjects: usize, n_regions: usize, seed: u64) -> Vec<PropagationDecomposition> {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    (0..n_subjects)
        .map(|s| PropagationDecomposition {
            subject: format!("S{s}"),
            contribution_s: (0..n_regions).map(|i| 0.01 * i as f64 + r.random_range(-0.05..0.05)).collect(),
            contribution_f: (0..n_regions).map(|_| r.random_range(-0.05..0.05)).collect(),
        })
        .collect()
}

fn x_rotation(angle: f64) -> Matrix3<f64> {
    let (s, c) = angle.sin_cos();
    Matrix3::new(1.0, 0.0, 0.0, 0.0, c, -s, 0.0, s, c)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn neighbor_mean_of_constant_is_constant(seed in 0u64..100_000, n in 3usize..40, v in -5.0f64..5.0) {
        let g = random_graph(n, seed);
        let map = RegionalStatMap::new(vec![v; n], StatKind::TValue).unwrap();
        let Ok(nm) = neighbor_mean_map(&map, &g, NeighborAggregate::Mean) else { return Ok(()) };
        for i in nm.connected() {
            prop_assert!((nm.map.values()[i] - v).abs() <= 1e-12 * v.abs().max(1.0));
        }
    }

    #[test]
    fn dominance_ignores_common_shift(seed in 0u64..100_000, shift in -10.0f64..10.0) {
        let base = decomps(25, 6, seed);
        let shifted: Vec<_> = base
            .iter()
            .map(|d| PropagationDecomposition {
                subject: d.subject.clone(),
                contribution_s: d.contribution_s.iter().map(|v| v + shift).collect(),
                contribution_f: d.contribution_f.iter().map(|v| v + shift).collect(),
            })
            .collect();
        let a = dominance_test(&base, DominanceScope::Region, 0.05).unwrap();
        let b = dominance_test(&shifted, DominanceScope::Region, 0.05).unwrap();
        for (x, y) in a.iter().zip(&b) {
            prop_assert_eq!(x.label, y.label);
            prop_assert!((x.t - y.t).abs() <= 1e-6 * x.t.abs().max(1.0));
        }
    }

    #[test]
    fn smoothing_residuals_orthogonal_to_lines(seed in 0u64..100_000, log_lambda in -3.0f64..6.0) {
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        let xs: Vec<f64> = (0..60).map(|_| r.random_range(55.0..90.0)).collect();
        let ys: Vec<f64> = xs.iter().map(|x| (x / 7.0).sin() + r.random_range(-0.3..0.3)).collect();
        let f = gam_fit(&xs, &ys, &GamOptions { lambda: Some(10f64.powf(log_lambda)), ..Default::default() }).unwrap();
        let res: Vec<f64> = xs.iter().zip(&ys).map(|(x, y)| y - f.eval(*x).unwrap()).collect();
        let scale: f64 = ys.iter().map(|y| y.abs()).sum::<f64>();
        prop_assert!(res.iter().sum::<f64>().abs() <= 1e-8 * scale);
        let xm = xs.iter().sum::<f64>() / xs.len() as f64;
        let cross: f64 = xs.iter().zip(&res).map(|(x, e)| (x - xm) * e).sum();
        prop_assert!(cross.abs() <= 1e-8 * scale * 35.0);
    }

    #[test]
    fn correlation_is_affine_invariant(seed in 0u64..100_000, a in 0.1f64..10.0, b in -5.0f64..5.0) {
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        let x: Vec<f64> = (0..30).map(|_| r.random::<f64>()).collect();
        let y: Vec<f64> = x.iter().map(|v| v + r.random::<f64>()).collect();
        let z: Vec<f64> = y.iter().map(|v| a * v + b).collect();
        let c1 = pearson(&x, &y).unwrap();
        let c2 = pearson(&x, &z).unwrap();
        prop_assert!((c1.r - c2.r).abs() <= 1e-12);
        prop_assert!((c1.p - c2.p).abs() <= 1e-9);
    }

    #[test]
    fn spin_permutation_commutes_with_midline_preserving_rotation(seed in 0u64..100_000, angle in 0.0f64..6.28) {
        let atlas = generate_atlas(40, seed % 7).unwrap();
        let q = x_rotation(angle);
        let rows = [
            [q[(0, 0)], q[(0, 1)], q[(0, 2)]],
            [q[(1, 0)], q[(1, 1)], q[(1, 2)]],
            [q[(2, 0)], q[(2, 1)], q[(2, 2)]],
        ];
        let turned = atlas.rotated(&rows).unwrap();
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        let rot = mlt::stats::random_rotation(&mut r);
        let order: Vec<usize> = (0..40).rev().collect();
        let p1 = permutation_from_rotation(&atlas, &rot, &order);
        let p2 = permutation_from_rotation(&turned, &(q * rot * q.transpose()), &order);
        prop_assert_eq!(p1, p2);
    }
}

#[test]
fn spin_p_values_stable_under_global_rotation() {
    let atlas = generate_atlas(80, 3).unwrap();
    let vals: Vec<f64> = atlas.regions().iter().map(|r| r.sphere_xyz[2] + 0.3 * r.sphere_xyz[1]).collect();
    let map = RegionalStatMap::new(vals, StatKind::TValue).unwrap();
    let opts = SpinOptions {
        n_perm: 2000,
        seed: 4,
        ..Default::default()
    };
    let lobe = |i: usize| Some(atlas.lobe_of(i).as_str());
    let base = spin_permutation_test(&map, &atlas, lobe, &opts).unwrap();
    let q = x_rotation(1.1);
    let rows = [[1.0, 0.0, 0.0], [0.0, q[(1, 1)], q[(1, 2)]], [0.0, q[(2, 1)], q[(2, 2)]]];
    let turned = atlas.rotated(&rows).unwrap();
    let lobe2 = |i: usize| Some(turned.lobe_of(i).as_str());
    let moved = spin_permutation_test(&map, &turned, lobe2, &opts).unwrap();
    for (a, b) in base.iter().zip(&moved) {
        assert_eq!(a.group, b.group);
        assert_eq!(a.observed, b.observed);
        // Same rotation law, different draws: agreement to Monte Carlo error.
        assert!((a.p_spin - b.p_spin).abs() <= 0.05, "{}: {} vs {}", a.group, a.p_spin, b.p_spin);
    }
}

#[test]
fn lobe_dominance_averages_regions() {
    let atlas = generate_atlas(60, 0).unwrap();
    let d = decomps(10, 60, 1);
    let lobes = dominance_test(&d, DominanceScope::Lobe(&atlas), 0.05).unwrap();
    assert_eq!(lobes.len(), atlas.lobes().len());
    for (res, lobe) in lobes.iter().zip(atlas.lobes()) {
        assert_eq!(res.scope, lobe.as_str());
        let members = atlas.lobe_members(lobe);
        let mean: f64 = d
            .iter()
            .map(|s| members.iter().map(|&i| s.contribution_s[i] - s.contribution_f[i]).sum::<f64>() / members.len() as f64)
            .sum::<f64>()
            / d.len() as f64;
        assert!((res.mean_diff - mean).abs() < 1e-12);
    }
}
