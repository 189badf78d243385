use nalgebra::{Matrix3, Quaternion, UnitQuaternion, Vector3};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{mean, sample_sd, RegionalStatMap};
use crate::atlas::{Hemisphere, ParcellationAtlas};
use crate::error::{MltError, Result};
use crate::rng;

const TAG_SPIN: u64 = 0x5_914;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpinOptions {
    pub n_perm: usize,
    pub seed: u64,
    /// Use the identity rotation for every permutation.
    #[serde(default)]
    pub identity_rotation: bool,
}

impl Default for SpinOptions {
    fn default() -> Self {
        SpinOptions {
            n_perm: 1000,
            seed: 0,
            identity_rotation: false,
        }
    }
}

/// Uniformly distributed rotation (normalized Gaussian quaternion).
pub fn random_rotation<R: Rng>(r: &mut R) -> Matrix3<f64> {
    loop {
        let q: [f64; 4] = std::array::from_fn(|_| r.sample(StandardNormal));
        let norm = q.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 1e-12 {
            let uq = UnitQuaternion::from_quaternion(Quaternion::new(q[0], q[1], q[2], q[3]));
            return uq.to_rotation_matrix().into_inner();
        }
    }
}

/// Reassignment induced by rotating the right hemisphere by `rot` and the left
/// by its mirror image. Targets are visited in `order`; each takes the nearest
/// still-unassigned rotated region of its hemisphere. Entry `i` of the result
/// is the region whose value moves to region `i`.
pub fn permutation_from_rotation(atlas: &ParcellationAtlas, rot: &Matrix3<f64>, order: &[usize]) -> Vec<usize> {
    let flip = Matrix3::from_diagonal(&Vector3::new(-1.0, 1.0, 1.0));
    let mirrored = flip * rot * flip;
    let regs = atlas.regions();
    let hemi: Vec<Hemisphere> = regs.iter().map(|r| r.hemisphere()).collect();
    let rotated: Vec<Vector3<f64>> = regs
        .iter()
        .zip(&hemi)
        .map(|(r, h)| {
            let p = Vector3::from(r.sphere_xyz);
            match h {
                Hemisphere::Right => rot * p,
                Hemisphere::Left => mirrored * p,
            }
        })
        .collect();
    let mut taken = vec![false; regs.len()];
    let mut perm = vec![usize::MAX; regs.len()];
    for &j in order {
        let target = Vector3::from(regs[j].sphere_xyz);
        let mut best = usize::MAX;
        let mut best_dot = f64::NEG_INFINITY;
        for k in 0..regs.len() {
            if taken[k] || hemi[k] != hemi[j] {
                continue;
            }
            let d = rotated[k].dot(&target);
            if d > best_dot {
                best_dot = d;
                best = k;
            }
        }
        taken[best] = true;
        perm[j] = best;
    }
    perm
}

/// `n_perm` spin permutations, each from its own keyed random stream.
pub fn spin_permutations(atlas: &ParcellationAtlas, opts: &SpinOptions) -> Vec<Vec<usize>> {
    (0..opts.n_perm)
        .into_par_iter()
        .map(|p| {
            let mut r = rng::stream(opts.seed, &[TAG_SPIN, p as u64]);
            let rot = if opts.identity_rotation {
                Matrix3::identity()
            } else {
                random_rotation(&mut r)
            };
            let mut order: Vec<usize> = (0..atlas.len()).collect();
            order.shuffle(&mut r);
            permutation_from_rotation(atlas, &rot, &order)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpinGroupResult {
    pub group: String,
    pub n_regions: usize,
    /// Group mean of the map.
    pub observed: f64,
    pub null_mean: f64,
    pub null_sd: f64,
    pub z: f64,
    /// One-tailed `(1 + #{null ≥ observed}) / (n_perm + 1)`.
    pub p_spin: f64,
}

/// Spin test of the group means of `values`. Groups with fewer than three
/// regions are skipped.
pub fn spin_permutation_test<G: ToString + PartialEq + Clone>(
    values: &RegionalStatMap,
    atlas: &ParcellationAtlas,
    group_fn: impl Fn(usize) -> Option<G>,
    opts: &SpinOptions,
) -> Result<Vec<SpinGroupResult>> {
    if values.len() != atlas.len() {
        return Err(MltError::Dimension {
            what: "map vs atlas".into(),
            expected: atlas.len(),
            got: values.len(),
        });
    }
    if opts.n_perm < 2 {
        return Err(MltError::Validation("spin test needs at least 2 permutations".into()));
    }
    let mut groups: Vec<(G, Vec<usize>)> = Vec::new();
    for i in 0..atlas.len() {
        if let Some(g) = group_fn(i) {
            match groups.iter_mut().find(|(h, _)| *h == g) {
                Some((_, m)) => m.push(i),
                None => groups.push((g, vec![i])),
            }
        }
    }
    groups.retain(|(g, m)| {
        if m.len() < 3 {
            log::info!("spin test: group {} has {} regions; skipped", g.to_string(), m.len());
            false
        } else {
            true
        }
    });
    let perms = spin_permutations(atlas, opts);
    let v = values.values();
    Ok(groups
        .into_iter()
        .map(|(g, members)| {
            let observed = members.iter().map(|&i| v[i]).sum::<f64>() / members.len() as f64;
            let null: Vec<f64> = perms
                .iter()
                .map(|perm| members.iter().map(|&i| v[perm[i]]).sum::<f64>() / members.len() as f64)
                .collect();
            let null_mean = mean(&null);
            let null_sd = sample_sd(&null);
            let exceed = null.iter().filter(|x| **x >= observed).count();
            SpinGroupResult {
                group: g.to_string(),
                n_regions: members.len(),
                observed,
                null_mean,
                null_sd,
                z: if null_sd > 0.0 { (observed - null_mean) / null_sd } else { 0.0 },
                p_spin: (1 + exceed) as f64 / (opts.n_perm + 1) as f64,
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::atlas::Lobe;
    use crate::stats::StatKind;
    use crate::synth::generate_atlas;

    #[test]
    fn identity_rotation_gives_identity_permutation() {
        let atlas = generate_atlas(40, 1).unwrap();
        let opts = SpinOptions {
            n_perm: 3,
            identity_rotation: true,
            ..Default::default()
        };
        for p in spin_permutations(&atlas, &opts) {
            assert_eq!(p, (0..40).collect::<Vec<_>>());
        }
    }

    #[test]
    fn permutations_stay_within_hemisphere() {
        let atlas = generate_atlas(60, 2).unwrap();
        for p in spin_permutations(&atlas, &SpinOptions { n_perm: 20, ..Default::default() }) {
            let mut sorted = p.clone();
            sorted.sort_unstable();
            assert_eq!(sorted, (0..60).collect::<Vec<_>>());
            for (i, &j) in p.iter().enumerate() {
                assert_eq!(atlas.regions()[i].hemisphere(), atlas.regions()[j].hemisphere());
            }
        }
    }

    #[test]
    fn lobe_indicator_is_significant() {
        let atlas = generate_atlas(160, 0).unwrap();
        let v: Vec<f64> = atlas.regions().iter().map(|r| (r.lobe == Lobe::Occipital) as u8 as f64).collect();
        let map = RegionalStatMap::new(v, StatKind::ZScore).unwrap();
        let res = spin_permutation_test(&map, &atlas, |i| Some(atlas.lobe_of(i)), &SpinOptions { n_perm: 500, ..Default::default() }).unwrap();
        let occ = res.iter().find(|r| r.group == "occipital").unwrap();
        assert!(occ.p_spin <= 0.01, "{occ:?}");
    }
}
