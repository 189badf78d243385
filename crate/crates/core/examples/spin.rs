//! Spin permutation test of lobe means on a map with one elevated lobe.

use mlt::atlas::Lobe;
use mlt::stats::{spin_permutation_test, RegionalStatMap, SpinOptions, StatKind};
use mlt::synth::generate_atlas;

fn main() -> mlt::Result<()> {
    let atlas = generate_atlas(80, 3)?;
    let values: Vec<f64> = atlas
        .regions()
        .iter()
        .enumerate()
        .map(|(i, r)| if r.lobe == Lobe::Temporal { 2.0 } else { 0.0 } + 0.3 * ((i * 37 % 11) as f64 - 5.0) / 5.0)
        .collect();
    let map = RegionalStatMap::new(values, StatKind::TValue)?;
    let opts = SpinOptions {
        n_perm: 1000,
        seed: 0,
        identity_rotation: false,
    };
    for g in spin_permutation_test(&map, &atlas, |i| Some(atlas.regions()[i].lobe), &opts)? {
        println!("{:<12} n={:>2} mean {:>6.3} z {:>6.2} p_spin {:.4}", g.group, g.n_regions, g.observed, g.z, g.p_spin);
    }
    Ok(())
}
