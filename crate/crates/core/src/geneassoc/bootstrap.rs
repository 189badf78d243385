use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::expression::ExpressionMatrix;
use super::lasso::{nn_lasso_path, predict, Standardized};
use crate::error::{MltError, Result};
use crate::rng;

const TAG_CV: u64 = 0xC5;
const TAG_BOOT: u64 = 0xB007;
const MAX_REDRAWS: u64 = 10;

/// 15 log-spaced values from 1e-4 to 1.
pub fn default_lambda_grid() -> Vec<f64> {
    (0..15).map(|i| 10f64.powf(-4.0 + 4.0 * i as f64 / 14.0)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapOptions {
    pub lambdas: Vec<f64>,
    pub n_boot: usize,
    pub seed: u64,
    /// Folds of the cross-validation that picks the reference λ.
    pub cv_folds: usize,
    /// Scale the target to unit variance so λ is in correlation units.
    pub standardize_target: bool,
    /// Take the largest λ whose CV error is within one standard error of the
    /// minimum instead of the minimizer itself.
    pub one_se_rule: bool,
}

impl Default for BootstrapOptions {
    fn default() -> Self {
        BootstrapOptions {
            lambdas: default_lambda_grid(),
            n_boot: 100,
            seed: 0,
            cv_folds: 5,
            standardize_target: true,
            one_se_rule: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionProfile {
    pub gene_names: Vec<String>,
    pub lambdas: Vec<f64>,
    pub cv_mse: Vec<f64>,
    /// Standard error of `cv_mse` across folds.
    pub cv_se: Vec<f64>,
    pub reference_index: usize,
    pub reference_lambda: f64,
    /// Selection frequency of every gene at the reference λ.
    pub frequency: Vec<f64>,
    /// `path[g][l]`: selection frequency of gene `g` at `lambdas[l]`.
    pub path: Vec<Vec<f64>>,
    pub n_boot: usize,
    pub seed: u64,
}

fn population_sd(y: &[f64]) -> f64 {
    let m = y.iter().sum::<f64>() / y.len() as f64;
    (y.iter().map(|v| (v - m).powi(2)).sum::<f64>() / y.len() as f64).sqrt()
}

/// Mean squared error and its standard error across folds, per λ.
fn cv_mse(y: &[f64], x: &ExpressionMatrix, opts: &BootstrapOptions) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = y.len();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut rng::stream(opts.seed, &[TAG_CV]));
    let mut fold_mse = vec![vec![0.0; opts.cv_folds]; opts.lambdas.len()];
    for k in 0..opts.cv_folds {
        let test: Vec<usize> = idx.iter().copied().skip(k).step_by(opts.cv_folds).collect();
        let mut train: Vec<usize> = idx.iter().copied().filter(|i| !test.contains(i)).collect();
        train.sort_unstable();
        let ytr: Vec<f64> = train.iter().map(|&i| y[i]).collect();
        let s = Standardized::new(&ytr, &x.select_rows(&train))?;
        let xte = x.select_rows(&test);
        for (l, fit) in nn_lasso_path(&s, &opts.lambdas)?.iter().enumerate() {
            let pred = predict(&s, &fit.beta, &xte);
            fold_mse[l][k] =
                test.iter().zip(&pred).map(|(&i, p)| (y[i] - p).powi(2)).sum::<f64>() / test.len() as f64;
        }
    }
    let k = opts.cv_folds as f64;
    let mean: Vec<f64> = fold_mse.iter().map(|f| f.iter().sum::<f64>() / k).collect();
    let se = fold_mse
        .iter()
        .zip(&mean)
        .map(|(f, m)| (f.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (k - 1.0)).sqrt() / k.sqrt())
        .collect();
    Ok((mean, se))
}

/// Selection frequencies of the nonnegative LASSO over region bootstrap
/// resamples, at every λ and at the cross-validated reference λ.
pub fn bootstrap_selection(y: &[f64], x: &ExpressionMatrix, opts: &BootstrapOptions) -> Result<SelectionProfile> {
    let n = x.n_regions();
    if y.len() != n {
        return Err(MltError::Dimension {
            what: "target vs expression regions".into(),
            expected: n,
            got: y.len(),
        });
    }
    if n < 10 {
        return Err(MltError::Validation(format!("bootstrap selection needs at least 10 regions, got {n}")));
    }
    if opts.n_boot == 0 || opts.lambdas.is_empty() {
        return Err(MltError::Validation("need at least one resample and one lambda".into()));
    }
    if opts.cv_folds < 2 || opts.cv_folds > n {
        return Err(MltError::Validation(format!("cv folds must lie in [2, {n}], got {}", opts.cv_folds)));
    }
    let sd = population_sd(y);
    if !(sd > 0.0) {
        return Err(MltError::Degenerate {
            scope: "lasso target".into(),
            reason: "zero variance".into(),
        });
    }
    let y: Vec<f64> = if opts.standardize_target {
        y.iter().map(|v| v / sd).collect()
    } else {
        y.to_vec()
    };

    let (cv, cv_se) = cv_mse(&y, x, opts)?;
    let best = (0..cv.len()).fold(0, |b, l| if cv[l] < cv[b] { l } else { b });
    let reference_index = if opts.one_se_rule {
        let bound = cv[best] + cv_se[best];
        (0..cv.len())
            .filter(|&l| cv[l] <= bound)
            .max_by(|&a, &b| opts.lambdas[a].total_cmp(&opts.lambdas[b]))
            .unwrap_or(best)
    } else {
        best
    };

    let g = x.n_genes();
    let indicators: Vec<Vec<Vec<bool>>> = (0..opts.n_boot as u64)
        .into_par_iter()
        .map(|b| {
            for attempt in 0..MAX_REDRAWS {
                let mut r = rng::stream(opts.seed, &[TAG_BOOT, b, attempt]);
                let rows: Vec<usize> = (0..n).map(|_| r.random_range(0..n)).collect();
                let yb: Vec<f64> = rows.iter().map(|&i| y[i]).collect();
                if population_sd(&yb) == 0.0 {
                    continue;
                }
                let s = match Standardized::new(&yb, &x.select_rows(&rows)) {
                    Ok(s) => s,
                    Err(MltError::Degenerate { .. }) => continue,
                    Err(e) => return Err(e),
                };
                return Ok(nn_lasso_path(&s, &opts.lambdas)?.iter().map(|f| f.selected()).collect());
            }
            Err(MltError::Degenerate {
                scope: format!("bootstrap resample {b}"),
                reason: format!("target had zero variance in {MAX_REDRAWS} draws"),
            })
        })
        .collect::<Result<_>>()?;

    let mut path = vec![vec![0.0; opts.lambdas.len()]; g];
    for per_lambda in &indicators {
        for (l, sel) in per_lambda.iter().enumerate() {
            for (j, &on) in sel.iter().enumerate() {
                if on {
                    path[j][l] += 1.0;
                }
            }
        }
    }
    for row in &mut path {
        for v in row.iter_mut() {
            *v /= opts.n_boot as f64;
        }
    }
    Ok(SelectionProfile {
        gene_names: x.gene_names().to_vec(),
        lambdas: opts.lambdas.clone(),
        cv_mse: cv,
        cv_se,
        reference_index,
        reference_lambda: opts.lambdas[reference_index],
        frequency: path.iter().map(|p| p[reference_index]).collect(),
        path,
        n_boot: opts.n_boot,
        seed: opts.seed,
    })
}
