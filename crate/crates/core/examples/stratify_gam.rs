//! Stratify a cohort by covariates, then smooth regional rates against
//! baseline age.

use mlt::cohort::Cohort;
use mlt::stats::{cohort_rates, gam_fit, stratify, GamOptions, StratifyKey};
use mlt::synth::{generate_cohort, SynthConfig};

fn main() -> mlt::Result<()> {
    let syn = generate_cohort(&SynthConfig {
        n_regions: 20,
        n_subjects: 150,
        seed: 6,
        ..SynthConfig::default()
    })?;
    let cohort = Cohort::new(syn.scans.clone())?;
    for key in [StratifyKey::AgeBins, StratifyKey::Abeta, StratifyKey::DiagnosisBinary, StratifyKey::Apoe4] {
        let s = stratify(&cohort, key);
        let sizes: Vec<String> = s.groups.iter().map(|(g, ids)| format!("{g}={}", ids.len())).collect();
        println!("{:<17} {}  omitted {}", key.as_str(), sizes.join(" "), s.omitted);
    }

    let rates = cohort_rates(&cohort)?;
    let ages: Vec<f64> = rates.iter().map(|r| r.1).collect();
    let region0: Vec<f64> = rates.iter().map(|r| r.2.values()[0]).collect();
    let gam = gam_fit(&ages, &region0, &GamOptions::default())?;
    println!("GAM of region 0 rate on age: λ {:.3e}, edf {:.2}", gam.lambda, gam.edf);
    for age in [60.0, 70.0, 80.0] {
        if age >= gam.x_min && age <= gam.x_max {
            let (fit, lo, hi) = gam.eval_with_ci(age)?;
            println!("  age {age}: {fit:.4} ({lo:.4}, {hi:.4}), slope {:.2e}", gam.derivative(age)?);
        }
    }
    Ok(())
}
