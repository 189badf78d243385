//! Regional mediation of the FC-layer effect on cognition through the SC layer.

use mlt::cohort::Cohort;
use mlt::mediation::{mediation_scan, MediationData, MediationDirection, MediationOptions};
use mlt::model::decompose;
use mlt::synth::{generate_cohort, SynthConfig};

fn main() -> mlt::Result<()> {
    let syn = generate_cohort(&SynthConfig {
        n_regions: 40,
        n_subjects: 200,
        seed: 5,
        ..SynthConfig::default()
    })?;
    let cohort = Cohort::new(syn.scans.clone())?;
    let set = cohort.training_set(&syn.connectome)?;
    let data = MediationData::from_cohort(&cohort, &decompose(&set, &syn.ground_truth)?)?;
    let opts = MediationOptions {
        n_boot: 500,
        ..MediationOptions::default()
    };
    let scan = mediation_scan(&data, MediationDirection::UfViaUs, &opts)?;
    println!("planted {:?}", syn.planted_mediation);
    println!("significant indirect {:?}", scan.significant_indirect);
    for &i in syn.planted_mediation.iter().take(5) {
        let r = &scan.results[i];
        println!(
            "region {i}: a {:.3} b {:.3} c' {:.3} c {:.3} = c' + ab {:.3}, CI ({:.3}, {:.3})",
            r.a,
            r.b,
            r.c_prime,
            r.c_total,
            r.c_prime + r.a * r.b,
            r.ci_low,
            r.ci_high
        );
    }
    Ok(())
}
