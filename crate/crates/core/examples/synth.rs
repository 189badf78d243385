//! Generate a small synthetic cohort and summarize it.

use mlt::cohort::Cohort;
use mlt::synth::{generate_cohort, SynthConfig};

fn main() -> mlt::Result<()> {
    let cfg = SynthConfig {
        n_regions: 40,
        n_subjects: 30,
        seed: 7,
        ..SynthConfig::default()
    };
    let syn = generate_cohort(&cfg)?;
    let cohort = Cohort::new(syn.scans.clone())?;
    println!("{} subjects, {} scans, {} regions", cohort.n_subjects(), syn.scans.len(), cohort.n_regions());
    println!("lobes: {:?}", syn.atlas.lobes());
    let sc_edges = syn.connectome.sc.weights().iter().filter(|w| **w > 0.0).count() / 2;
    let fc_edges = syn.connectome.fc.weights().iter().filter(|w| **w > 0.0).count() / 2;
    println!("SC edges {sc_edges}, FC edges {fc_edges}");
    println!("planted dominance: {:?}", syn.planted_dominance.iter().map(|d| d.as_str()).collect::<Vec<_>>());
    println!("planted genes {:?}, mediation regions {:?}", syn.planted_genes, syn.planted_mediation);
    Ok(())
}
