use nalgebra::{DMatrix, DVector};

use crate::error::{MltError, Result};

const MAX_SWEEPS: usize = 10_000;
const CHANGE_TOL: f64 = 1e-9;

/// Centered target and columns scaled to zero mean and unit population
/// variance; constant columns are dropped.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardized {
    pub x: DMatrix<f64>,
    pub y: DVector<f64>,
    /// Original column index of every kept column.
    pub kept: Vec<usize>,
    pub means: Vec<f64>,
    pub sds: Vec<f64>,
    pub y_mean: f64,
    pub n_genes: usize,
}

impl Standardized {
    pub fn new(y: &[f64], x: &DMatrix<f64>) -> Result<Self> {
        let n = x.nrows();
        if y.len() != n {
            return Err(MltError::Dimension {
                what: "target vs expression rows".into(),
                expected: n,
                got: y.len(),
            });
        }
        if n < 2 {
            return Err(MltError::Validation("need at least two regions".into()));
        }
        if !y.iter().chain(x.iter()).all(|v| v.is_finite()) {
            return Err(MltError::NonFinite("regression inputs".into()));
        }
        let mut kept = Vec::new();
        let mut means = Vec::new();
        let mut sds = Vec::new();
        for j in 0..x.ncols() {
            let col = x.column(j);
            let m = col.mean();
            let sd = (col.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n as f64).sqrt();
            if sd > 1e-12 * m.abs().max(1.0) {
                kept.push(j);
                means.push(m);
                sds.push(sd);
            } else {
                log::info!("predictor column {j} is constant; dropped");
            }
        }
        if kept.is_empty() {
            return Err(MltError::Degenerate {
                scope: "lasso".into(),
                reason: "all predictors are constant".into(),
            });
        }
        let xs = DMatrix::from_fn(n, kept.len(), |i, k| (x[(i, kept[k])] - means[k]) / sds[k]);
        let y_mean = y.iter().sum::<f64>() / n as f64;
        Ok(Standardized {
            x: xs,
            y: DVector::from_iterator(n, y.iter().map(|v| v - y_mean)),
            kept,
            means,
            sds,
            y_mean,
            n_genes: x.ncols(),
        })
    }

    /// `(1/2n)‖y − Xβ‖² + λ‖β‖₁` for coefficients on the kept columns.
    pub fn objective(&self, beta: &DVector<f64>, lambda: f64) -> f64 {
        let n = self.x.nrows() as f64;
        (&self.y - &self.x * beta).norm_squared() / (2.0 * n) + lambda * beta.iter().map(|b| b.abs()).sum::<f64>()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LassoFit {
    pub lambda: f64,
    /// Coefficients on the standardized scale, one per input column; dropped
    /// columns carry 0.
    pub beta: Vec<f64>,
    pub sweeps: usize,
    /// Objective after every sweep.
    pub objective: Vec<f64>,
    pub converged: bool,
}

impl LassoFit {
    pub fn selected(&self) -> Vec<bool> {
        self.beta.iter().map(|b| *b != 0.0).collect()
    }
}

fn descend(s: &Standardized, lambda: f64, beta: &mut DVector<f64>) -> (usize, Vec<f64>, bool) {
    let n = s.x.nrows() as f64;
    let p = s.x.ncols();
    let z: Vec<f64> = (0..p).map(|j| s.x.column(j).norm_squared() / n).collect();
    let mut resid = &s.y - &s.x * &*beta;
    let mut trace = Vec::new();
    for sweep in 1..=MAX_SWEEPS {
        let mut max_change: f64 = 0.0;
        for j in 0..p {
            let col = s.x.column(j);
            let rho = col.dot(&resid) / n + z[j] * beta[j];
            let new = (rho - lambda).max(0.0) / z[j];
            let delta = new - beta[j];
            if delta != 0.0 {
                resid.axpy(-delta, &col, 1.0);
                beta[j] = new;
                max_change = max_change.max(delta.abs());
            }
        }
        trace.push(s.objective(beta, lambda));
        if max_change < CHANGE_TOL {
            return (sweep, trace, true);
        }
    }
    (MAX_SWEEPS, trace, false)
}

fn expand(s: &Standardized, beta: &DVector<f64>) -> Vec<f64> {
    let mut out = vec![0.0; s.n_genes];
    for (k, &j) in s.kept.iter().enumerate() {
        out[j] = beta[k];
    }
    out
}

/// Nonnegative LASSO by cyclic coordinate descent on standardized columns.
pub fn nn_lasso(y: &[f64], x: &DMatrix<f64>, lambda: f64) -> Result<LassoFit> {
    let s = Standardized::new(y, x)?;
    Ok(nn_lasso_path(&s, &[lambda])?.remove(0))
}

/// Fits along `lambdas` (any order), warm-starting from the previous value
/// in decreasing-λ order.
pub fn nn_lasso_path(s: &Standardized, lambdas: &[f64]) -> Result<Vec<LassoFit>> {
    if let Some(l) = lambdas.iter().find(|l| !(l.is_finite() && **l >= 0.0)) {
        return Err(MltError::Validation(format!("lambda must be nonnegative, got {l}")));
    }
    let mut order: Vec<usize> = (0..lambdas.len()).collect();
    order.sort_by(|&a, &b| lambdas[b].total_cmp(&lambdas[a]).then(a.cmp(&b)));
    let mut beta = DVector::zeros(s.x.ncols());
    let mut out: Vec<Option<LassoFit>> = vec![None; lambdas.len()];
    for i in order {
        let (sweeps, objective, converged) = descend(s, lambdas[i], &mut beta);
        if !converged {
            log::warn!("coordinate descent at lambda {} stopped after {sweeps} sweeps", lambdas[i]);
        }
        out[i] = Some(LassoFit {
            lambda: lambdas[i],
            beta: expand(s, &beta),
            sweeps,
            objective,
            converged,
        });
    }
    Ok(out.into_iter().map(|f| f.expect("every lambda fitted")).collect())
}

/// Prediction on the original scale for rows of `x`.
pub(crate) fn predict(s: &Standardized, beta: &[f64], x: &DMatrix<f64>) -> Vec<f64> {
    (0..x.nrows())
        .map(|i| {
            s.y_mean
                + s.kept
                    .iter()
                    .enumerate()
                    .map(|(k, &j)| beta[j] * (x[(i, j)] - s.means[k]) / s.sds[k])
                    .sum::<f64>()
        })
        .collect()
}
