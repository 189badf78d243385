use mlt::atlas::UNIT_NORM_TOL;
use mlt::cohort::Cohort;
use mlt::stats::pearson;
use mlt::synth::{generate_atlas, generate_cohort, ConnectomeProfile, SynthConfig};

fn small(seed: u64) -> SynthConfig {
    SynthConfig {
        n_regions: 40,
        n_subjects: 37,
        seed,
        ..SynthConfig::default()
    }
}

#[test]
fn same_seed_same_cohort() {
    let a = generate_cohort(&small(3)).unwrap();
    let b = generate_cohort(&small(3)).unwrap();
    assert_eq!(a, b);
    let c = generate_cohort(&small(4)).unwrap();
    assert_ne!(a.scans, c.scans);
}

#[test]
fn scan_counts_follow_allocation() {
    let cfg = small(5);
    let syn = generate_cohort(&cfg).unwrap();
    let cohort = Cohort::new(syn.scans.clone()).unwrap();
    let mut hist = vec![0usize; cfg.scans_per_subject.len()];
    for (_, scans) in cohort.subjects() {
        hist[scans.len() - 1] += 1;
    }
    assert_eq!(hist, cfg.scan_count_allocation());
    assert_eq!(hist.iter().sum::<usize>(), cfg.n_subjects);
}

#[test]
fn default_allocation_matches_weights() {
    assert_eq!(SynthConfig::default().scan_count_allocation(), vec![20, 110, 40, 20, 10]);
}

#[test]
fn scans_respect_intervals_and_ranges() {
    let cfg = small(6);
    let syn = generate_cohort(&cfg).unwrap();
    let cohort = Cohort::new(syn.scans.clone()).unwrap();
    for (_, scans) in cohort.subjects() {
        assert!(scans[0].age >= cfg.age_range.0 && scans[0].age <= cfg.age_range.1);
        for w in scans.windows(2) {
            let months = (w[1].age - w[0].age) * 12.0;
            assert!(months >= cfg.interval_months.0 as f64 - 1e-9 && months <= cfg.interval_months.1 as f64 + 1e-9);
        }
        assert!(scans.iter().flat_map(|s| &s.suvr).all(|v| *v > 0.0));
    }
}

#[test]
fn atlas_is_on_the_sphere_with_mirror_partners() {
    let a = generate_atlas(60, 2).unwrap();
    let half = a.len() / 2;
    for (i, r) in a.regions().iter().enumerate() {
        let norm: f64 = r.sphere_xyz.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!((norm - 1.0).abs() <= UNIT_NORM_TOL);
        if i < half {
            let m = &a.regions()[i + half];
            assert_eq!(r.lobe, m.lobe);
            assert!((r.sphere_xyz[0] + m.sphere_xyz[0]).abs() < 1e-12);
            assert_ne!(r.hemisphere(), m.hemisphere());
        }
    }
    assert_eq!(a.lobes(), mlt::atlas::Lobe::ALL.to_vec());
}

#[test]
fn structural_weights_decay_with_distance() {
    for profile in [ConnectomeProfile::DistanceDecay, ConnectomeProfile::Modular] {
        let syn = generate_cohort(&SynthConfig { profile, ..small(7) }).unwrap();
        let regs = syn.atlas.regions();
        let (mut d, mut w) = (Vec::new(), Vec::new());
        for i in 0..regs.len() {
            for j in i + 1..regs.len() {
                let wij = syn.connectome.sc.weight(i, j);
                if wij > 0.0 {
                    let dot: f64 = (0..3).map(|k| regs[i].sphere_xyz[k] * regs[j].sphere_xyz[k]).sum();
                    d.push(dot.clamp(-1.0, 1.0).acos());
                    w.push(wij);
                }
            }
        }
        assert!(pearson(&d, &w).unwrap().r < -0.3, "{profile:?}");
    }
}

#[test]
fn planted_truth_is_consistent() {
    let syn = generate_cohort(&small(8)).unwrap();
    assert_eq!(syn.planted_dominance.len(), 40);
    assert_eq!(syn.planted_genes, vec![0, 1]);
    assert_eq!(syn.expression.n_regions(), 40);
    assert!(syn.expression.values().iter().all(|v| (0.0..=1.0).contains(v)));
    assert!(!syn.planted_mediation.is_empty());
    assert!(syn.planted_mediation.iter().all(|&i| i < 40));
}

#[test]
fn invalid_configs_rejected() {
    for cfg in [
        SynthConfig { n_regions: 13, ..small(0) },
        SynthConfig { n_subjects: 0, ..small(0) },
        SynthConfig { noise_sd: -1.0, ..small(0) },
        SynthConfig { interval_months: (18, 12), ..small(0) },
    ] {
        assert!(generate_cohort(&cfg).is_err());
    }
}
