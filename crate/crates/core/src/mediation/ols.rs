use nalgebra::{DMatrix, DVector};

use crate::error::{MltError, Result};
use crate::stats::t_two_sided;

pub(crate) struct Ols {
    pub beta: DVector<f64>,
    pub se: DVector<f64>,
    pub df: f64,
}

impl Ols {
    pub fn p(&self, j: usize) -> f64 {
        if self.se[j] > 0.0 {
            t_two_sided(self.beta[j] / self.se[j], self.df)
        } else if self.beta[j] == 0.0 {
            1.0
        } else {
            0.0
        }
    }
}

/// Least squares via QR with a collinearity check on the design.
pub(crate) fn ols(x: &DMatrix<f64>, y: &DVector<f64>) -> Result<Ols> {
    let (n, p) = x.shape();
    if n <= p {
        return Err(MltError::Validation(format!("{n} observations for {p} coefficients")));
    }
    let qr = x.clone().qr();
    let r = qr.r();
    let diag_max = r.diagonal().amax();
    if r.diagonal().iter().any(|d| d.abs() <= 1e-10 * diag_max.max(1e-300)) {
        return Err(MltError::Singular("collinear regression design".into()));
    }
    let qty = qr.q().transpose() * y;
    let beta = r
        .solve_upper_triangular(&qty)
        .ok_or_else(|| MltError::Singular("collinear regression design".into()))?;
    let resid = y - x * &beta;
    let df = (n - p) as f64;
    let s2 = resid.norm_squared() / df;
    let rinv = r
        .solve_upper_triangular(&DMatrix::identity(p, p))
        .ok_or_else(|| MltError::Singular("collinear regression design".into()))?;
    let cov_diag = DVector::from_fn(p, |j, _| rinv.row(j).norm_squared());
    Ok(Ols {
        se: cov_diag.map(|v| (s2 * v).sqrt()),
        beta,
        df,
    })
}
