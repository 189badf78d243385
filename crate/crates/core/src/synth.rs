//! Deterministic synthetic atlases, connectomes and longitudinal cohorts with
//! known ground truth.

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, LogNormal, Normal};
use serde::{Deserialize, Serialize};

use crate::atlas::{Lobe, ParcellationAtlas, Region};
use crate::cohort::{Apoe4, Diagnosis, ScanRecord, Sex, SubjectCovariates};
use crate::control::CostWeights;
use crate::error::{MltError, Result};
use crate::geneassoc::ExpressionMatrix;
use crate::graph::{LayeredConnectome, WeightedGraph};
use crate::model::{forward_predict, Ablation, GainSource, PropagationDecomposition, TransportParameters};
use crate::rng;
use crate::stats::DominanceLabel;

const TAG_ATLAS: u64 = 0xA71A5;
const TAG_FC: u64 = 0xFC;
const TAG_SUBJECT: u64 = 0x5B1EC7;
const TAG_ALLOC: u64 = 0xA110C;
const TAG_GENES: u64 = 0x6E4E;
const TAG_TRUTH: u64 = 0x7247;

/// Cortical lobes from top to bottom of the lattice, with their share of
/// cortical regions.
const CORTICAL_BANDS: [(Lobe, f64); 6] = [
    (Lobe::Frontal, 0.27),
    (Lobe::Parietal, 0.17),
    (Lobe::Insula, 0.06),
    (Lobe::Occipital, 0.12),
    (Lobe::Temporal, 0.22),
    (Lobe::Limbic, 0.16),
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConnectomeProfile {
    #[default]
    DistanceDecay,
    Modular,
}

/// Knobs of the planted ground-truth dynamics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TruthConfig {
    pub c: f64,
    pub lambda: f64,
    /// Per-year growth on the dominant layer of a region.
    pub growth: f64,
    /// Per-year clearance on the other layer.
    pub clearance: f64,
    pub gate: f64,
    /// Lobes whose regions are planted SC-dominant; all others are FC-dominant.
    pub sc_lobes: Vec<Lobe>,
}

impl Default for TruthConfig {
    fn default() -> Self {
        TruthConfig {
            c: 1.0,
            lambda: 0.05,
            growth: 0.3,
            clearance: 0.02,
            gate: 0.5,
            sc_lobes: vec![Lobe::Frontal, Lobe::Parietal, Lobe::Occipital, Lobe::Subcortical],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub n_regions: usize,
    pub n_subjects: usize,
    /// Relative frequency of subjects with 1, 2, ... scans.
    pub scans_per_subject: Vec<f64>,
    pub age_range: (f64, f64),
    /// Inter-scan interval range in whole months (inclusive).
    pub interval_months: (u32, u32),
    pub noise_sd: f64,
    pub profile: ConnectomeProfile,
    pub n_genes: usize,
    pub truth: TruthConfig,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_regions: 160,
            n_subjects: 200,
            scans_per_subject: vec![0.10, 0.55, 0.20, 0.10, 0.05],
            age_range: (55.0, 85.0),
            interval_months: (12, 18),
            noise_sd: 0.02,
            profile: ConnectomeProfile::DistanceDecay,
            n_genes: 18,
            truth: TruthConfig::default(),
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_regions < 14 || self.n_regions % 2 != 0 {
            return Err(MltError::Validation(format!(
                "n_regions must be even and at least 14, got {}",
                self.n_regions
            )));
        }
        if self.n_subjects == 0 {
            return Err(MltError::Validation("n_subjects must be positive".into()));
        }
        if self.scans_per_subject.is_empty()
            || self.scans_per_subject.iter().any(|w| !(w.is_finite() && *w >= 0.0))
            || self.scans_per_subject.iter().sum::<f64>() <= 0.0
        {
            return Err(MltError::Validation("scans_per_subject must be nonnegative weights with positive sum".into()));
        }
        if !(self.noise_sd >= 0.0 && self.noise_sd.is_finite()) {
            return Err(MltError::Validation(format!("noise_sd must be nonnegative, got {}", self.noise_sd)));
        }
        let (lo, hi) = self.age_range;
        if !(18.0 <= lo && lo <= hi && hi <= 110.0) {
            return Err(MltError::Validation(format!("age range ({lo}, {hi}) invalid")));
        }
        let (mlo, mhi) = self.interval_months;
        if mlo == 0 || mlo > mhi {
            return Err(MltError::Validation(format!("interval months ({mlo}, {mhi}) invalid")));
        }
        if self.n_genes < 2 {
            return Err(MltError::Validation("need at least two genes".into()));
        }
        Ok(())
    }

    /// Exact number of subjects with each scan count (largest remainder).
    pub fn scan_count_allocation(&self) -> Vec<usize> {
        let total: f64 = self.scans_per_subject.iter().sum();
        let quotas: Vec<f64> = self
            .scans_per_subject
            .iter()
            .map(|w| w / total * self.n_subjects as f64)
            .collect();
        let mut counts: Vec<usize> = quotas.iter().map(|q| q.floor() as usize).collect();
        let mut left = self.n_subjects - counts.iter().sum::<usize>();
        let mut by_rem: Vec<usize> = (0..quotas.len()).collect();
        by_rem.sort_by(|&a, &b| {
            let (ra, rb) = (quotas[a] - quotas[a].floor(), quotas[b] - quotas[b].floor());
            rb.total_cmp(&ra).then(a.cmp(&b))
        });
        for &i in by_rem.iter().cycle() {
            if left == 0 {
                break;
            }
            counts[i] += 1;
            left -= 1;
        }
        counts
    }
}

fn geodesic(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    (a[0] * b[0] + a[1] * b[1] + a[2] * b[2]).clamp(-1.0, 1.0).acos()
}

/// Fibonacci lattice on each hemisphere, left the mirror image of right,
/// lobes by latitude bands. Region `i` and `i + n/2` are mirror partners.
pub fn generate_atlas(n: usize, seed: u64) -> Result<ParcellationAtlas> {
    if n < 14 || n % 2 != 0 {
        return Err(MltError::Validation(format!("atlas size must be even and >= 14, got {n}")));
    }
    let m = n / 2;
    let mut r = rng::stream(seed, &[TAG_ATLAS]);
    let spin: f64 = r.random_range(0.0..std::f64::consts::TAU);
    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    let pts: Vec<[f64; 3]> = (0..m)
        .map(|k| {
            let x = (k as f64 + 0.5) / m as f64;
            let rho = (1.0 - x * x).sqrt();
            let phi = spin + k as f64 * golden;
            [x, rho * phi.cos(), rho * phi.sin()]
        })
        .collect();

    let n_sub = ((12.0 / 160.0) * n as f64 / 2.0).round().max(1.0) as usize;
    let n_cort = m - n_sub;
    let mut by_z: Vec<usize> = (0..m).collect();
    by_z.sort_by(|&a, &b| pts[b][2].total_cmp(&pts[a][2]).then(a.cmp(&b)));
    let mut lobe_of = vec![Lobe::Subcortical; m];
    // subcortical: the points nearest the medial plane (smallest x)
    let mut by_x: Vec<usize> = (0..m).collect();
    by_x.sort_by(|&a, &b| pts[a][0].total_cmp(&pts[b][0]).then(a.cmp(&b)));
    let sub: std::collections::BTreeSet<usize> = by_x.into_iter().take(n_sub).collect();
    let cortical: Vec<usize> = by_z.into_iter().filter(|k| !sub.contains(k)).collect();
    let mut start = 0usize;
    let mut acc = 0.0;
    for (b, (lobe, share)) in CORTICAL_BANDS.iter().enumerate() {
        acc += share;
        let end = if b + 1 == CORTICAL_BANDS.len() {
            n_cort
        } else {
            ((acc * n_cort as f64).round() as usize).clamp(start + 1, n_cort)
        };
        for &k in &cortical[start..end] {
            lobe_of[k] = *lobe;
        }
        start = end;
    }

    let mut regions = Vec::with_capacity(n);
    for (hemi, sign) in [("lh", -1.0), ("rh", 1.0)] {
        for k in 0..m {
            let p = pts[k];
            let xyz = [sign * p[0], p[1], p[2]];
            let norm = (xyz[0] * xyz[0] + xyz[1] * xyz[1] + xyz[2] * xyz[2]).sqrt();
            regions.push(Region {
                index: regions.len(),
                label: format!("{hemi}_{}_{k:03}", lobe_of[k]),
                lobe: lobe_of[k],
                sphere_xyz: [xyz[0] / norm, xyz[1] / norm, xyz[2] / norm],
            });
        }
    }
    ParcellationAtlas::new(regions)
}

fn normalize_mean_degree(w: &mut DMatrix<f64>) {
    let n = w.nrows() as f64;
    let mean_deg = w.sum() / n;
    if mean_deg > 0.0 {
        *w /= mean_deg;
    }
}

/// Mean angular spacing of `n` points on the unit sphere.
fn lattice_spacing(n: usize) -> f64 {
    (4.0 * std::f64::consts::PI / n as f64).sqrt()
}

/// Structural graph from geodesic distance, functional graph from a latent
/// network model; both scaled to mean degree 1.
pub fn generate_connectome(
    atlas: &ParcellationAtlas,
    seed: u64,
    profile: ConnectomeProfile,
) -> Result<LayeredConnectome> {
    let n = atlas.len();
    let regs = atlas.regions();
    let sigma = 1.1 * lattice_spacing(n);
    let cutoff = 2.5 * sigma;
    let mut sc: DMatrix<f64> = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            let d = geodesic(&regs[i].sphere_xyz, &regs[j].sphere_xyz);
            if d <= cutoff {
                let mut w = (-d / sigma).exp();
                if profile == ConnectomeProfile::Modular && regs[i].lobe != regs[j].lobe {
                    w *= 0.2;
                }
                sc[(i, j)] = w;
                sc[(j, i)] = w;
            }
        }
    }
    normalize_mean_degree(&mut sc);

    let mut r = rng::stream(seed, &[TAG_FC]);
    let k_nets = 7usize;
    let m = n / 2;
    let nets: Vec<usize> = (0..m).map(|_| r.random_range(0..k_nets)).collect();
    let noise = Normal::new(0.0, 0.2).expect("valid normal");
    let mut load: DMatrix<f64> = DMatrix::zeros(n, k_nets);
    for i in 0..n {
        let net = nets[i % m];
        for k in 0..k_nets {
            load[(i, k)] = noise.sample(&mut r) + if k == net { 0.8 } else { 0.0 };
        }
    }
    let mut cov = &load * load.transpose();
    for i in 0..n {
        cov[(i, i)] += 0.5;
    }
    let corr = DMatrix::from_fn(n, n, |i, j| {
        let v: f64 = cov[(i, j)] / (cov[(i, i)] * cov[(j, j)]).sqrt();
        if v < 0.2 {
            0.0
        } else {
            v
        }
    });
    let (fc_graph, _) = WeightedGraph::from_correlations(&corr)?;
    let mut fc = fc_graph.weights().clone();
    normalize_mean_degree(&mut fc);
    LayeredConnectome::new(atlas.clone(), WeightedGraph::new(sc)?, WeightedGraph::new(fc)?)
}

/// Planted dominance label per region.
pub fn planted_dominance(atlas: &ParcellationAtlas, truth: &TruthConfig) -> Vec<DominanceLabel> {
    atlas
        .regions()
        .iter()
        .map(|r| {
            if truth.sc_lobes.contains(&r.lobe) {
                DominanceLabel::SC
            } else {
                DominanceLabel::FC
            }
        })
        .collect()
}

/// Ground-truth parameters: each region grows on its dominant layer and is
/// slowly cleared on the other.
pub fn ground_truth_params(atlas: &ParcellationAtlas, truth: &TruthConfig, seed: u64) -> Result<TransportParameters> {
    let n = atlas.len();
    let labels = planted_dominance(atlas, truth);
    let mut r = rng::stream(seed, &[TAG_TRUTH]);
    let jitter = Normal::new(0.0, 0.05).expect("valid normal");
    let gate: Vec<f64> = (0..n)
        .map(|_| (truth.gate + jitter.sample(&mut r)).clamp(0.05, 0.95))
        .collect();
    let rate = |dominant: bool| if dominant { -truth.growth } else { truth.clearance };
    let k_s = labels.iter().map(|l| rate(*l == DominanceLabel::SC)).collect();
    let k_f = labels.iter().map(|l| rate(*l == DominanceLabel::FC)).collect();
    let p = TransportParameters {
        h_s: vec![0.5; n],
        h_f: vec![0.5; n],
        gate,
        m_s: DMatrix::identity(n, n),
        m_f: DMatrix::identity(n, n),
        lambda_s: truth.lambda,
        lambda_f: truth.lambda,
        c: truth.c,
        k_source: GainSource::Learned { k_s, k_f },
        cost: CostWeights::uniform(n, 1.0, 1.0)?,
        ablation: Ablation::ScFc,
    };
    p.validate()?;
    Ok(p)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticCohort {
    pub config: SynthConfig,
    pub atlas: ParcellationAtlas,
    pub connectome: LayeredConnectome,
    pub ground_truth: TransportParameters,
    pub scans: Vec<ScanRecord>,
    /// Noise-free layer contributions of every subject with two or more scans.
    pub decompositions: Vec<PropagationDecomposition>,
    pub planted_dominance: Vec<DominanceLabel>,
    /// Regions whose SC-layer change drives the cognitive score.
    pub planted_mediation: Vec<usize>,
    pub expression: ExpressionMatrix,
    pub planted_genes: Vec<usize>,
}

struct Subject {
    id: String,
    n_scans: usize,
    cov: SubjectCovariates,
    truth: Vec<DVector<f64>>,
    ages: Vec<f64>,
    observed: Vec<Vec<f64>>,
    contrib: Vec<(DVector<f64>, DVector<f64>)>,
    mmse_base: f64,
    mmse_noise: Vec<f64>,
}

fn baseline_amplitude(d: Diagnosis) -> f64 {
    match d {
        Diagnosis::CN => 0.15,
        Diagnosis::SMC => 0.2,
        Diagnosis::EMCI => 0.3,
        Diagnosis::LMCI => 0.45,
        Diagnosis::AD => 0.65,
    }
}

/// Full synthetic cohort for `config`.
pub fn generate_cohort(config: &SynthConfig) -> Result<SyntheticCohort> {
    config.validate()?;
    let atlas = generate_atlas(config.n_regions, config.seed)?;
    let connectome = generate_connectome(&atlas, config.seed, config.profile)?;
    let truth = ground_truth_params(&atlas, &config.truth, config.seed)?;
    generate_cohort_with(config, connectome, truth)
}

/// Cohort over a given connectome and ground truth.
pub fn generate_cohort_with(
    config: &SynthConfig,
    connectome: LayeredConnectome,
    truth: TransportParameters,
) -> Result<SyntheticCohort> {
    config.validate()?;
    truth.validate()?;
    let atlas = connectome.atlas.clone();
    let n = atlas.len();
    if truth.n() != n {
        return Err(MltError::Dimension {
            what: "ground truth vs atlas".into(),
            expected: n,
            got: truth.n(),
        });
    }
    let regs = atlas.regions();
    let spacing = lattice_spacing(n);

    // scan counts: exact allocation, shuffled over subjects
    let mut counts: Vec<usize> = config
        .scan_count_allocation()
        .iter()
        .enumerate()
        .flat_map(|(k, &c)| std::iter::repeat_n(k + 1, c))
        .collect();
    counts.shuffle(&mut rng::stream(config.seed, &[TAG_ALLOC]));

    let seeds: Vec<usize> = {
        let mut temporal: Vec<usize> = (0..n)
            .filter(|&i| matches!(regs[i].lobe, Lobe::Temporal | Lobe::Limbic))
            .collect();
        // "entorhinal-like": the lowest temporal/limbic region of each hemisphere
        temporal.sort_by(|&a, &b| regs[a].sphere_xyz[2].total_cmp(&regs[b].sphere_xyz[2]).then(a.cmp(&b)));
        let mut s = Vec::new();
        for hemi in [crate::atlas::Hemisphere::Left, crate::atlas::Hemisphere::Right] {
            if let Some(&i) = temporal.iter().find(|&&i| regs[i].hemisphere() == hemi) {
                s.push(i);
            }
        }
        s
    };
    let bump = |center: usize, width: f64| -> DVector<f64> {
        DVector::from_fn(n, |i, _| {
            let d = geodesic(&regs[i].sphere_xyz, &regs[center].sphere_xyz);
            (-(d * d) / (2.0 * width * width)).exp()
        })
    };

    let dx_weights = [0.35, 0.10, 0.20, 0.20, 0.15];
    let mut subjects = Vec::with_capacity(config.n_subjects);
    for (si, &n_scans) in counts.iter().enumerate() {
        let mut r = rng::stream(config.seed, &[TAG_SUBJECT, si as u64]);
        let u: f64 = r.random();
        let mut acc = 0.0;
        let mut diagnosis = Diagnosis::AD;
        for (d, w) in Diagnosis::ALL.iter().zip(dx_weights) {
            acc += w;
            if u < acc {
                diagnosis = *d;
                break;
            }
        }
        let sex = if r.random_bool(0.5) { Sex::Female } else { Sex::Male };
        let apoe4 = if r.random_bool(0.35) { Apoe4::Carrier } else { Apoe4::Noncarrier };
        let abeta = if r.random_bool(0.85) {
            let mu: f64 = if diagnosis.is_impaired() { 160.0 } else { 215.0 };
            Some(LogNormal::new(mu.ln(), 0.25).expect("valid lognormal").sample(&mut r))
        } else {
            None
        };
        let age0 = r.random_range(config.age_range.0..=config.age_range.1);
        let mut amp = baseline_amplitude(diagnosis) * LogNormal::new(0.0, 0.3).expect("valid").sample(&mut r);
        if apoe4 == Apoe4::Carrier {
            amp *= 1.2;
        }
        let mut x0 = DVector::from_element(n, 1.0);
        for &s in &seeds {
            x0 += bump(s, 2.0 * spacing) * amp;
        }
        for _ in 0..3 {
            let c = r.random_range(0..n);
            let a = r.random_range(0.0..0.6) * amp;
            x0 += bump(c, 1.5 * spacing) * a;
        }
        let rough = Normal::new(0.0, 0.04).expect("valid normal");
        for v in x0.iter_mut() {
            *v += rough.sample(&mut r);
            *v = v.max(0.5);
        }

        let noise = Normal::new(0.0, config.noise_sd.max(f64::MIN_POSITIVE)).expect("valid normal");
        let mut truth_traj = vec![x0.clone()];
        let mut ages = vec![age0];
        let mut contrib = Vec::new();
        for _ in 1..n_scans {
            let months = r.random_range(config.interval_months.0..=config.interval_months.1);
            let dt = months as f64 / 12.0;
            let pred = forward_predict(truth_traj.last().expect("nonempty"), dt, &connectome, &truth)?;
            contrib.push((pred.contribution_s.clone(), pred.contribution_f.clone()));
            truth_traj.push(pred.x_hat1);
            ages.push(ages.last().expect("nonempty") + dt);
        }
        let observed: Vec<Vec<f64>> = truth_traj
            .iter()
            .map(|x| {
                x.iter()
                    .map(|v| {
                        let e = if config.noise_sd > 0.0 { noise.sample(&mut r) } else { 0.0 };
                        (v + e).max(1e-3)
                    })
                    .collect()
            })
            .collect();
        let impaired = if diagnosis.is_impaired() { 3.0 } else { 0.0 };
        let mmse_base = 29.3 - impaired - 0.05 * (age0 - 70.0);
        let mmse_noise: Vec<f64> = (0..n_scans).map(|_| Normal::new(0.0, 0.6).expect("valid").sample(&mut r)).collect();
        subjects.push(Subject {
            id: format!("S{si:04}"),
            n_scans,
            cov: SubjectCovariates {
                age: age0,
                sex,
                apoe4,
                abeta_pgml: abeta,
                diagnosis,
                mmse: None,
            },
            truth: truth_traj,
            ages,
            observed,
            contrib,
            mmse_base,
            mmse_noise,
        });
    }

    // cognitive score: decline driven by the SC-layer change in the planted
    // mediation regions (SC-dominant regions of the parietal lobe, falling
    // back to all SC-dominant regions)
    let planted_dominance = planted_dominance(&atlas, &config.truth);
    let mut planted_mediation: Vec<usize> = (0..n)
        .filter(|&i| planted_dominance[i] == DominanceLabel::SC && regs[i].lobe == Lobe::Parietal)
        .collect();
    if planted_mediation.is_empty() {
        planted_mediation = (0..n).filter(|&i| planted_dominance[i] == DominanceLabel::SC).collect();
    }
    let load = |c: &[(DVector<f64>, DVector<f64>)]| -> f64 {
        if c.is_empty() {
            return 0.0;
        }
        let k = c.len() as f64;
        planted_mediation
            .iter()
            .map(|&i| c.iter().map(|(s, _)| s[i]).sum::<f64>() / k)
            .sum()
    };
    let loads: Vec<f64> = subjects.iter().filter(|s| s.n_scans > 1).map(|s| load(&s.contrib)).collect();
    let kappa = if loads.len() > 1 {
        let mean = loads.iter().sum::<f64>() / loads.len() as f64;
        let sd = (loads.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (loads.len() - 1) as f64).sqrt();
        if sd > 0.0 {
            2.5 / sd
        } else {
            0.0
        }
    } else {
        0.0
    };

    let mut scans = Vec::new();
    let mut decompositions = Vec::new();
    for s in &subjects {
        for k in 0..s.n_scans {
            let decline = kappa * load(&s.contrib[..k]);
            let mmse = (s.mmse_base - decline + s.mmse_noise[k]).round().clamp(0.0, 30.0) as u8;
            let mut cov = s.cov.clone();
            cov.age = s.ages[k];
            cov.mmse = Some(mmse);
            scans.push(ScanRecord {
                subject_id: s.id.clone(),
                age: s.ages[k],
                suvr: s.observed[k].clone(),
                covariates: cov,
            });
        }
        if s.n_scans > 1 {
            let k = s.contrib.len() as f64;
            let mut cs = vec![0.0; n];
            let mut cf = vec![0.0; n];
            for (a, b) in &s.contrib {
                for i in 0..n {
                    cs[i] += a[i] / k;
                    cf[i] += b[i] / k;
                }
            }
            decompositions.push(PropagationDecomposition {
                subject: s.id.clone(),
                contribution_s: cs,
                contribution_f: cf,
            });
        }
        debug_assert_eq!(s.truth.len(), s.n_scans);
    }

    let (expression, planted_genes) = generate_expression(&atlas, &planted_dominance, config.n_genes, config.seed)?;
    Ok(SyntheticCohort {
        config: config.clone(),
        atlas,
        connectome,
        ground_truth: truth,
        scans,
        decompositions,
        planted_dominance,
        planted_mediation,
        expression,
        planted_genes,
    })
}

/// Smooth random expression fields; gene 0 tracks the SC-dominance map and
/// gene 1 the FC-dominance map.
pub fn generate_expression(
    atlas: &ParcellationAtlas,
    dominance: &[DominanceLabel],
    n_genes: usize,
    seed: u64,
) -> Result<(ExpressionMatrix, Vec<usize>)> {
    let n = atlas.len();
    let regs = atlas.regions();
    let spacing = lattice_spacing(n);
    let mut r = rng::stream(seed, &[TAG_GENES]);
    let noise = Normal::new(0.0, 0.05).expect("valid normal");
    let mut raw: DMatrix<f64> = DMatrix::zeros(n, n_genes);
    for g in 0..n_genes {
        match g {
            0 | 1 => {
                let target = if g == 0 { DominanceLabel::SC } else { DominanceLabel::FC };
                for i in 0..n {
                    let v: f64 = if dominance[i] == target { 0.75 } else { 0.35 };
                    raw[(i, g)] = (v + noise.sample(&mut r)).clamp(0.0, 1.0);
                }
            }
            _ => {
                for _ in 0..4 {
                    let c = r.random_range(0..n);
                    let a: f64 = r.random_range(0.2..1.0);
                    for i in 0..n {
                        let d = geodesic(&regs[i].sphere_xyz, &regs[c].sphere_xyz);
                        raw[(i, g)] += a * (-(d * d) / (2.0 * (3.0 * spacing).powi(2))).exp();
                    }
                }
                for i in 0..n {
                    raw[(i, g)] += noise.sample(&mut r);
                }
            }
        }
    }
    let names = (0..n_genes).map(|g| format!("GENE{g:02}")).collect();
    Ok((ExpressionMatrix::from_raw(raw, names)?, vec![0, 1]))
}
