//! Split each subject's change into layer contributions and test which
//! layer dominates, per region and per lobe.

use mlt::cohort::Cohort;
use mlt::model::decompose;
use mlt::stats::{dominance_test, DominanceScope};
use mlt::synth::{generate_cohort, SynthConfig};

fn main() -> mlt::Result<()> {
    let syn = generate_cohort(&SynthConfig {
        n_regions: 40,
        n_subjects: 120,
        seed: 2,
        ..SynthConfig::default()
    })?;
    let set = Cohort::new(syn.scans.clone())?.training_set(&syn.connectome)?;
    let d = decompose(&set, &syn.ground_truth)?;
    let regions = dominance_test(&d, DominanceScope::Region, 0.05)?;
    let agree = regions.iter().zip(&syn.planted_dominance).filter(|(r, p)| r.label == **p).count();
    println!("region labels match the planted map in {agree}/{}", regions.len());
    for r in dominance_test(&d, DominanceScope::Lobe(&syn.atlas), 0.05)? {
        println!("{:<12} {:<4} t={:>7.2} p_sc={:.2e} p_fc={:.2e}", r.scope, r.label.as_str(), r.t, r.p_sc, r.p_fc);
    }
    Ok(())
}
