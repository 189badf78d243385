//! Fit all three ablations on a held-out split and compare errors.

use mlt::cohort::Cohort;
use mlt::model::{evaluate, fit, subject_folds, Ablation, FitOptions, TransportParameters};
use mlt::synth::{generate_cohort, SynthConfig};

fn main() -> mlt::Result<()> {
    let syn = generate_cohort(&SynthConfig {
        n_regions: 40,
        n_subjects: 80,
        seed: 1,
        ..SynthConfig::default()
    })?;
    let set = Cohort::new(syn.scans.clone())?.training_set(&syn.connectome)?;
    let folds = subject_folds(&set, 5, 0)?;
    let train_idx: Vec<usize> = (0..set.len()).filter(|i| !folds[0].contains(i)).collect();
    let (train, test) = (set.subset(&train_idx), set.subset(&folds[0]));
    println!("generator: held-out relative MAE {:.4}", evaluate(&test, &syn.ground_truth)?.relative_mae);
    for ablation in Ablation::ALL {
        let mut p0 = TransportParameters::initial(set.n(), 0);
        p0.ablation = ablation;
        let opts = FitOptions {
            ablation,
            max_iters: 150,
            ..FitOptions::adam()
        };
        let f = fit(&train, &p0, &opts)?;
        println!(
            "{:<6} loss {:.3e} -> {:.3e}, held-out relative MAE {:.4}",
            ablation.as_str(),
            f.initial_loss(),
            f.final_loss(),
            evaluate(&test, &f.params)?.relative_mae
        );
    }
    Ok(())
}
