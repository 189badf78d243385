use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{t_two_sided, RegionalStatMap, StatKind};
use crate::cohort::{Cohort, Sex};
use crate::error::{MltError, Result};

const LOG_PSI_RANGE: (f64, f64) = (-12.0, 12.0);

/// Long-format data for a random-intercept model: one row per observation.
#[derive(Debug, Clone, PartialEq)]
pub struct MixedDesign {
    pub names: Vec<String>,
    pub x: DMatrix<f64>,
    pub y: DVector<f64>,
    /// Group (subject) index of every row.
    pub groups: Vec<usize>,
}

impl MixedDesign {
    /// `groups` holds arbitrary subject labels; they are mapped to indices.
    pub fn new(names: Vec<String>, x: DMatrix<f64>, y: DVector<f64>, groups: &[String]) -> Result<Self> {
        if x.ncols() != names.len() {
            return Err(MltError::Dimension {
                what: "design columns vs names".into(),
                expected: names.len(),
                got: x.ncols(),
            });
        }
        if x.nrows() != y.len() || groups.len() != y.len() {
            return Err(MltError::Dimension {
                what: "design rows".into(),
                expected: y.len(),
                got: x.nrows().min(groups.len()),
            });
        }
        if !x.iter().chain(y.iter()).all(|v| v.is_finite()) {
            return Err(MltError::NonFinite("mixed-model data".into()));
        }
        let mut ids: BTreeMap<&str, usize> = BTreeMap::new();
        let groups = groups
            .iter()
            .map(|g| {
                let k = ids.len();
                *ids.entry(g.as_str()).or_insert(k)
            })
            .collect();
        Ok(MixedDesign { names, x, y, groups })
    }

    fn n_groups(&self) -> usize {
        self.groups.iter().max().map(|m| m + 1).unwrap_or(0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixedFit {
    pub names: Vec<String>,
    pub beta: Vec<f64>,
    pub se: Vec<f64>,
    pub t: Vec<f64>,
    pub p: Vec<f64>,
    pub df: f64,
    /// Between-subject to residual variance ratio.
    pub psi: f64,
    pub sigma2: f64,
    pub target: usize,
}

impl MixedFit {
    pub fn target_t(&self) -> f64 {
        self.t[self.target]
    }

    pub fn target_p(&self) -> f64 {
        self.p[self.target]
    }
}

struct Sufficient<'a> {
    design: &'a MixedDesign,
    xtx: DMatrix<f64>,
    xty: DVector<f64>,
    yty: f64,
    /// Per group: size, column sums of X, sum of y.
    per_group: Vec<(f64, DVector<f64>, f64)>,
}

impl<'a> Sufficient<'a> {
    fn new(d: &'a MixedDesign) -> Self {
        let p = d.x.ncols();
        let mut per_group = vec![(0.0, DVector::zeros(p), 0.0); d.n_groups()];
        for (r, &g) in d.groups.iter().enumerate() {
            per_group[g].0 += 1.0;
            per_group[g].1 += d.x.row(r).transpose();
            per_group[g].2 += d.y[r];
        }
        Sufficient {
            design: d,
            xtx: d.x.transpose() * &d.x,
            xty: d.x.transpose() * &d.y,
            yty: d.y.norm_squared(),
            per_group,
        }
    }

    /// GLS pieces at variance ratio `psi`: (XᵀV⁻¹X, β̂, rᵀV⁻¹r, log|V|).
    fn gls(&self, psi: f64) -> Option<(DMatrix<f64>, DVector<f64>, f64, f64)> {
        let mut a = self.xtx.clone();
        let mut b = self.xty.clone();
        let mut logdet = 0.0;
        for (ni, s, t) in &self.per_group {
            let w = psi / (1.0 + psi * ni);
            a -= s * s.transpose() * w;
            b -= s * (w * t);
            logdet += (psi * ni).ln_1p();
        }
        let chol = a.clone().cholesky()?;
        let beta = chol.solve(&b);
        let d = self.design;
        let r = &d.y - &d.x * &beta;
        let mut group_sums = vec![0.0; self.per_group.len()];
        for (k, &g) in d.groups.iter().enumerate() {
            group_sums[g] += r[k];
        }
        let rss = r.norm_squared()
            - self
                .per_group
                .iter()
                .zip(&group_sums)
                .map(|((ni, _, _), s)| psi / (1.0 + psi * ni) * s * s)
                .sum::<f64>();
        // below rounding level of the data the fit is exact
        let floor = (64.0 * f64::EPSILON).powi(2) * self.yty.max(f64::MIN_POSITIVE);
        Some((a, beta, if rss <= floor { 0.0 } else { rss }, logdet))
    }

    fn reml(&self, psi: f64, dof: f64) -> f64 {
        match self.gls(psi) {
            Some((a, _, rss, logdet)) => {
                let ld = a.cholesky().map(|c| 2.0 * c.l().diagonal().iter().map(|v| v.ln()).sum::<f64>());
                match ld {
                    Some(ld) if rss > 0.0 => -0.5 * (dof * rss.ln() + logdet + ld),
                    _ => f64::NEG_INFINITY,
                }
            }
            None => f64::NEG_INFINITY,
        }
    }
}

fn golden_max(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - g * (hi - lo);
    let mut x2 = lo + g * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    while hi - lo > 1e-9 {
        if f1 >= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - g * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + g * (hi - lo);
            f2 = f(x2);
        }
    }
    0.5 * (lo + hi)
}

/// Random-intercept linear mixed model by profiled REML; Wald t for every
/// coefficient with `n_obs − n_fixed` degrees of freedom.
pub fn mixed_effects_t(design: &MixedDesign, target: &str) -> Result<MixedFit> {
    let n = design.y.len();
    let p = design.x.ncols();
    let target = design
        .names
        .iter()
        .position(|s| s == target)
        .ok_or_else(|| MltError::Validation(format!("no coefficient named {target:?}")))?;
    if n < 2 {
        return Err(MltError::Validation("mixed model needs at least two observations".into()));
    }
    if design.n_groups() < 2 {
        return Err(MltError::Validation("mixed model needs at least two subjects".into()));
    }
    if n <= p {
        return Err(MltError::Validation(format!("{n} observations for {p} fixed effects")));
    }
    let suff = Sufficient::new(design);
    let eig = suff.xtx.clone().symmetric_eigen();
    let emax = eig.eigenvalues.amax();
    if eig.eigenvalues.min() <= 1e-10 * emax.max(1e-300) {
        return Err(MltError::Singular("design matrix is rank deficient".into()));
    }
    let dof = (n - p) as f64;

    let psi = {
        let f = |u: f64| suff.reml(u.exp(), dof);
        let (lo, hi) = LOG_PSI_RANGE;
        let steps = 48;
        let grid: Vec<f64> = (0..=steps).map(|k| lo + (hi - lo) * k as f64 / steps as f64).collect();
        let vals: Vec<f64> = grid.iter().map(|&u| f(u)).collect();
        let best = (0..grid.len()).fold(0, |b, k| if vals[k] > vals[b] { k } else { b });
        let a = grid[best.saturating_sub(1)];
        let b = grid[(best + 1).min(steps)];
        let u = golden_max(f, a, b);
        let candidate = u.exp();
        if suff.reml(0.0, dof) >= suff.reml(candidate, dof) {
            0.0
        } else {
            candidate
        }
    };

    let (a, beta, rss, _) = suff
        .gls(psi)
        .ok_or_else(|| MltError::Singular("GLS normal equations are not positive definite".into()))?;
    let sigma2 = rss / dof;
    let ainv = a
        .try_inverse()
        .ok_or_else(|| MltError::Singular("GLS normal equations".into()))?;
    let mut se = Vec::with_capacity(p);
    let mut t = Vec::with_capacity(p);
    let mut pv = Vec::with_capacity(p);
    for j in 0..p {
        let s = (sigma2 * ainv[(j, j)]).max(0.0).sqrt();
        let tj = if s > 0.0 {
            beta[j] / s
        } else if beta[j].abs() <= 1e-12 * beta.amax().max(1.0) {
            0.0
        } else {
            beta[j].signum() * f64::INFINITY
        };
        se.push(s);
        t.push(tj);
        pv.push(if tj.is_infinite() { 0.0 } else { t_two_sided(tj, dof) });
    }
    Ok(MixedFit {
        names: design.names.clone(),
        beta: beta.iter().copied().collect(),
        se,
        t,
        p: pv,
        df: dof,
        psi,
        sigma2,
        target,
    })
}

/// Per-region t of the impaired-group coefficient with SUVR as response,
/// a random intercept per subject and sex as covariate (dropped when every
/// subject has the same sex).
pub fn extent_map(cohort: &Cohort) -> Result<RegionalStatMap> {
    let scans: Vec<_> = cohort.scans().collect();
    let ids: Vec<String> = scans.iter().map(|s| s.subject_id.clone()).collect();
    let group: Vec<f64> = scans
        .iter()
        .map(|s| if s.covariates.diagnosis.is_impaired() { 1.0 } else { 0.0 })
        .collect();
    let male: Vec<f64> = scans
        .iter()
        .map(|s| if s.covariates.sex == Sex::Male { 1.0 } else { 0.0 })
        .collect();
    let with_sex = male.iter().any(|v| *v == 1.0) && male.iter().any(|v| *v == 0.0);
    let mut names = vec!["intercept".to_string(), "group".to_string()];
    if with_sex {
        names.push("sex".into());
    }
    let x = DMatrix::from_fn(scans.len(), names.len(), |r, c| match c {
        0 => 1.0,
        1 => group[r],
        _ => male[r],
    });
    let mut out = Vec::with_capacity(cohort.n_regions());
    for i in 0..cohort.n_regions() {
        let y = DVector::from_iterator(scans.len(), scans.iter().map(|s| s.suvr[i]));
        let d = MixedDesign::new(names.clone(), x.clone(), y, &ids)?;
        out.push(mixed_effects_t(&d, "group")?.target_t());
    }
    RegionalStatMap::new(out, StatKind::TValue)
}
