//! Bootstrap selection frequencies of nonnegative LASSO on the planted
//! gene panel.

use mlt::cohort::Cohort;
use mlt::geneassoc::{bootstrap_selection, neglog10p_target, nn_lasso, BootstrapOptions};
use mlt::model::decompose;
use mlt::stats::{dominance_test, DominanceScope};
use mlt::synth::{generate_cohort, SynthConfig};
use nalgebra::DMatrix;

fn main() -> mlt::Result<()> {
    // A single fit of y = 2 g0; β is on the standardized scale.
    let x = DMatrix::from_column_slice(4, 2, &[0.0, 1.0, 2.0, 3.0, 1.0, 0.0, 1.0, 0.0]);
    let y: Vec<f64> = (0..4).map(|i| 2.0 * x[(i, 0)]).collect();
    println!("nn_lasso beta at λ=0.1: {:?}", nn_lasso(&y, &x, 0.1)?.beta.as_slice());

    let syn = generate_cohort(&SynthConfig {
        n_regions: 80,
        n_subjects: 120,
        seed: 4,
        ..SynthConfig::default()
    })?;
    let set = Cohort::new(syn.scans.clone())?.training_set(&syn.connectome)?;
    let dom = dominance_test(&decompose(&set, &syn.ground_truth)?, DominanceScope::Region, 0.05)?;
    let p_sc: Vec<f64> = dom.iter().map(|d| d.p_sc.max(1e-300)).collect();
    let target = neglog10p_target(&p_sc)?;
    let opts = BootstrapOptions {
        n_boot: 50,
        ..BootstrapOptions::default()
    };
    let prof = bootstrap_selection(target.values(), &syn.expression, &opts)?;
    println!("reference λ {:.4} (planted gene {})", prof.reference_lambda, syn.planted_genes[0]);
    for (name, s) in prof.gene_names.iter().zip(&prof.frequency) {
        println!("{name:<8} {s:.2}");
    }
    Ok(())
}
