//! Product-of-coefficients mediation between the two layer contributions and
//! a cognitive outcome, with subject-bootstrap intervals.

mod ols;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cohort::{Apoe4, Cohort, Sex};
use crate::error::{MltError, Result};
use crate::model::PropagationDecomposition;
use crate::rng;
use ols::ols;

const TAG_MEDIATION: u64 = 0x3ED1A7E;
const MAX_REDRAWS: u64 = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MediationOptions {
    pub n_boot: usize,
    pub seed: u64,
    pub alpha: f64,
}

impl Default for MediationOptions {
    fn default() -> Self {
        MediationOptions {
            n_boot: 2000,
            seed: 0,
            alpha: 0.05,
        }
    }
}

/// Covariate coefficient in the mediator and outcome regressions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovariateEffect {
    pub name: String,
    pub in_mediator_model: f64,
    pub p_mediator_model: f64,
    pub in_outcome_model: f64,
    pub p_outcome_model: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MediationResult {
    pub region: usize,
    pub a: f64,
    pub b: f64,
    pub c_prime: f64,
    /// Total effect of the predictor without the mediator.
    pub c_total: f64,
    pub indirect: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub p_direct: f64,
    pub p_indirect: f64,
    pub covariates: Vec<CovariateEffect>,
}

fn design(x: &[f64], m: Option<&[f64]>, cov: &DMatrix<f64>, rows: &[usize]) -> DMatrix<f64> {
    let extra = usize::from(m.is_some());
    DMatrix::from_fn(rows.len(), 2 + extra + cov.ncols(), |r, c| {
        let i = rows[r];
        match (c, m) {
            (0, _) => 1.0,
            (1, _) => x[i],
            (2, Some(m)) => m[i],
            _ => cov[(i, c - 2 - extra)],
        }
    })
}

struct Point {
    a: f64,
    b: f64,
    c_prime: f64,
    c_total: f64,
    p_direct: f64,
    covariates: Vec<(f64, f64, f64, f64)>,
}

fn point(x: &[f64], m: &[f64], y: &[f64], cov: &DMatrix<f64>, rows: &[usize], full: bool) -> Result<Point> {
    let mv = DVector::from_iterator(rows.len(), rows.iter().map(|&i| m[i]));
    let yv = DVector::from_iterator(rows.len(), rows.iter().map(|&i| y[i]));
    let fm = ols(&design(x, None, cov, rows), &mv)?;
    let fy = ols(&design(x, Some(m), cov, rows), &yv)?;
    let (c_total, covariates) = if full {
        let ft = ols(&design(x, None, cov, rows), &yv)?;
        let effects = (0..cov.ncols())
            .map(|k| (fm.beta[2 + k], fm.p(2 + k), fy.beta[3 + k], fy.p(3 + k)))
            .collect();
        (ft.beta[1], effects)
    } else {
        (f64::NAN, Vec::new())
    };
    Ok(Point {
        a: fm.beta[1],
        b: fy.beta[2],
        c_prime: fy.beta[1],
        c_total,
        p_direct: if full { fy.p(1) } else { f64::NAN },
        covariates,
    })
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Mediation of `x → y` through `m` adjusting for the columns of
/// `covariates`. `key` separates the bootstrap streams of different calls
/// sharing one seed.
pub fn mediate(
    x: &[f64],
    m: &[f64],
    y: &[f64],
    covariates: &DMatrix<f64>,
    covariate_names: &[String],
    opts: &MediationOptions,
    key: u64,
) -> Result<MediationResult> {
    let n = x.len();
    if m.len() != n || y.len() != n || covariates.nrows() != n {
        return Err(MltError::Dimension {
            what: "mediation inputs".into(),
            expected: n,
            got: m.len().min(y.len()).min(covariates.nrows()),
        });
    }
    if covariate_names.len() != covariates.ncols() {
        return Err(MltError::Dimension {
            what: "covariate names".into(),
            expected: covariates.ncols(),
            got: covariate_names.len(),
        });
    }
    if n < 20 {
        return Err(MltError::Validation(format!("mediation needs at least 20 subjects, got {n}")));
    }
    if opts.n_boot < 2 {
        return Err(MltError::Validation("mediation needs at least 2 bootstrap resamples".into()));
    }
    if !x.iter().chain(m).chain(y).chain(covariates.iter()).all(|v| v.is_finite()) {
        return Err(MltError::NonFinite("mediation inputs".into()));
    }
    let all: Vec<usize> = (0..n).collect();
    let est = point(x, m, y, covariates, &all, true)?;
    let indirect = est.a * est.b;

    let mut boot: Vec<f64> = (0..opts.n_boot as u64)
        .into_par_iter()
        .map(|b| {
            for attempt in 0..MAX_REDRAWS {
                let mut r = rng::stream(opts.seed, &[TAG_MEDIATION, key, b, attempt]);
                let rows: Vec<usize> = (0..n).map(|_| r.random_range(0..n)).collect();
                match point(x, m, y, covariates, &rows, false) {
                    Ok(p) => return Ok(p.a * p.b),
                    Err(MltError::Singular(_)) => continue,
                    Err(e) => return Err(e),
                }
            }
            Err(MltError::Singular(format!("bootstrap resample {b} stayed collinear")))
        })
        .collect::<Result<_>>()?;
    boot.sort_by(f64::total_cmp);
    let below = boot.iter().filter(|v| **v <= 0.0).count();
    let above = boot.iter().filter(|v| **v >= 0.0).count();
    let p_indirect = (2.0 * (1 + below.min(above)) as f64 / (opts.n_boot + 1) as f64).min(1.0);

    Ok(MediationResult {
        region: 0,
        a: est.a,
        b: est.b,
        c_prime: est.c_prime,
        c_total: est.c_total,
        indirect,
        ci_low: quantile(&boot, 0.025),
        ci_high: quantile(&boot, 0.975),
        p_direct: est.p_direct,
        p_indirect,
        covariates: covariate_names
            .iter()
            .zip(est.covariates)
            .map(|(name, (am, pm, ay, py))| CovariateEffect {
                name: name.clone(),
                in_mediator_model: am,
                p_mediator_model: pm,
                in_outcome_model: ay,
                p_outcome_model: py,
            })
            .collect(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MediationDirection {
    /// FC contribution as predictor, SC contribution as mediator.
    UfViaUs,
    /// SC contribution as predictor, FC contribution as mediator.
    UsViaUf,
}

impl MediationDirection {
    pub fn as_str(&self) -> &'static str {
        match self {
            MediationDirection::UfViaUs => "uf_via_us",
            MediationDirection::UsViaUf => "us_via_uf",
        }
    }
}

impl std::str::FromStr for MediationDirection {
    type Err = MltError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uf_via_us" => Ok(MediationDirection::UfViaUs),
            "us_via_uf" => Ok(MediationDirection::UsViaUf),
            other => Err(MltError::Validation(format!("unknown mediation direction {other:?}"))),
        }
    }
}

/// Per-subject outcome and covariates aligned with a decomposition list.
#[derive(Debug, Clone, PartialEq)]
pub struct MediationData {
    pub subjects: Vec<String>,
    pub contribution_s: Vec<Vec<f64>>,
    pub contribution_f: Vec<Vec<f64>>,
    pub outcome: Vec<f64>,
    pub covariates: DMatrix<f64>,
    pub covariate_names: Vec<String>,
}

impl MediationData {
    /// Outcome is the MMSE of each subject's last scan; covariates are age at
    /// that scan, sex (male = 1) and APOE4 (carrier = 1). Subjects without a
    /// last-scan MMSE are left out.
    pub fn from_cohort(cohort: &Cohort, decomps: &[PropagationDecomposition]) -> Result<Self> {
        let mut subjects = Vec::new();
        let mut cs = Vec::new();
        let mut cf = Vec::new();
        let mut outcome = Vec::new();
        let mut cov = Vec::new();
        let mut skipped = 0;
        for d in decomps {
            let scans = cohort
                .subjects()
                .iter()
                .find(|(id, _)| *id == d.subject)
                .map(|(_, s)| s)
                .ok_or_else(|| MltError::Validation(format!("subject {} not in cohort", d.subject)))?;
            let last = scans.last().expect("subjects have scans");
            let Some(mmse) = last.covariates.mmse else {
                skipped += 1;
                continue;
            };
            subjects.push(d.subject.clone());
            cs.push(d.contribution_s.clone());
            cf.push(d.contribution_f.clone());
            outcome.push(mmse as f64);
            cov.push([
                last.age,
                (last.covariates.sex == Sex::Male) as u8 as f64,
                (last.covariates.apoe4 == Apoe4::Carrier) as u8 as f64,
            ]);
        }
        if skipped > 0 {
            log::info!("{skipped} subjects without MMSE left out of mediation");
        }
        Ok(MediationData {
            covariates: DMatrix::from_fn(cov.len(), 3, |i, j| cov[i][j]),
            covariate_names: vec!["age".into(), "sex".into(), "apoe4".into()],
            subjects,
            contribution_s: cs,
            contribution_f: cf,
            outcome,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MediationScan {
    pub direction: MediationDirection,
    pub seed: u64,
    pub alpha: f64,
    pub results: Vec<MediationResult>,
    pub significant_direct: Vec<usize>,
    pub significant_indirect: Vec<usize>,
}

/// `mediate` in every region with the direction's predictor and mediator.
pub fn mediation_scan(data: &MediationData, direction: MediationDirection, opts: &MediationOptions) -> Result<MediationScan> {
    let n_regions = data.contribution_s.first().map(|v| v.len()).unwrap_or(0);
    let results: Vec<MediationResult> = (0..n_regions)
        .into_par_iter()
        .map(|i| {
            let s: Vec<f64> = data.contribution_s.iter().map(|v| v[i]).collect();
            let f: Vec<f64> = data.contribution_f.iter().map(|v| v[i]).collect();
            let (x, m) = match direction {
                MediationDirection::UfViaUs => (f, s),
                MediationDirection::UsViaUf => (s, f),
            };
            let mut r = mediate(&x, &m, &data.outcome, &data.covariates, &data.covariate_names, opts, i as u64)
                .map_err(|e| match e {
                    MltError::Singular(msg) => MltError::Singular(format!("region {i}: {msg}")),
                    other => other,
                })?;
            r.region = i;
            Ok(r)
        })
        .collect::<Result<_>>()?;
    Ok(MediationScan {
        direction,
        seed: opts.seed,
        alpha: opts.alpha,
        significant_direct: results.iter().filter(|r| r.p_direct < opts.alpha).map(|r| r.region).collect(),
        significant_indirect: results.iter().filter(|r| r.p_indirect < opts.alpha).map(|r| r.region).collect(),
        results,
    })
}
