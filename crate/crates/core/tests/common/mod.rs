#![allow(dead_code)]

use mlt::cohort::Cohort;
use mlt::model::{GainSource, TrainingSet, TransportParameters};
use mlt::synth::{generate_cohort, SynthConfig, SyntheticCohort};
use nalgebra::DMatrix;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;

pub fn small_cohort(n_regions: usize, n_subjects: usize, seed: u64) -> (SyntheticCohort, TrainingSet) {
    let cfg = SynthConfig {
        n_regions,
        n_subjects,
        seed,
        ..SynthConfig::default()
    };
    let syn = generate_cohort(&cfg).expect("synthetic cohort");
    let set = Cohort::new(syn.scans.clone())
        .expect("cohort")
        .training_set(&syn.connectome)
        .expect("training set");
    (syn, set)
}

/// Parameters scattered around the default start so every group is active.
pub fn random_params(n: usize, seed: u64) -> TransportParameters {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    let mut p = TransportParameters::initial(n, seed);
    let mut u = |lo: f64, hi: f64| r.random_range(lo..hi);
    p.h_s = (0..n).map(|_| u(0.3, 0.8)).collect();
    p.h_f = (0..n).map(|_| u(0.3, 0.8)).collect();
    p.gate = (0..n).map(|_| u(0.2, 0.8)).collect();
    p.c = u(0.05, 1.0);
    p.lambda_s = u(-0.2, 0.2);
    p.lambda_f = u(-0.2, 0.2);
    p.m_s = DMatrix::from_fn(n, n, |i, j| if i == j { 1.0 } else { 0.0 } + u(-0.1, 0.1));
    p.m_f = DMatrix::from_fn(n, n, |i, j| if i == j { 1.0 } else { 0.0 } + u(-0.1, 0.1));
    p.k_source = GainSource::Learned {
        k_s: (0..n).map(|_| u(-0.3, 0.3)).collect(),
        k_f: (0..n).map(|_| u(-0.3, 0.3)).collect(),
    };
    p
}
