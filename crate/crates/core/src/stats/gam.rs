use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{MltError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GamOptions {
    /// Number of equal spline intervals over the data range.
    pub n_knots: usize,
    /// Order of the coefficient difference penalty.
    pub penalty_order: usize,
    /// Fixed smoothing parameter; chosen by GCV when absent.
    pub lambda: Option<f64>,
}

impl Default for GamOptions {
    fn default() -> Self {
        GamOptions {
            n_knots: 20,
            penalty_order: 2,
            lambda: None,
        }
    }
}

/// Penalized cubic B-spline smooth of one predictor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GamFit {
    pub x_min: f64,
    pub x_max: f64,
    pub n_intervals: usize,
    pub coef: Vec<f64>,
    /// Posterior covariance of the coefficients, row-major.
    pub cov: Vec<f64>,
    pub lambda: f64,
    pub edf: f64,
    pub sigma2: f64,
    pub gcv: f64,
}

fn span(x: f64, x_min: f64, h: f64, n_int: usize) -> (usize, f64) {
    let s = (((x - x_min) / h).floor().max(0.0) as usize).min(n_int - 1);
    (s, (x - x_min) / h - s as f64)
}

fn local_basis(u: f64) -> [f64; 4] {
    let v = 1.0 - u;
    [
        v * v * v / 6.0,
        (3.0 * u * u * u - 6.0 * u * u + 4.0) / 6.0,
        (-3.0 * u * u * u + 3.0 * u * u + 3.0 * u + 1.0) / 6.0,
        u * u * u / 6.0,
    ]
}

fn local_derivative(u: f64) -> [f64; 4] {
    let v = 1.0 - u;
    [
        -v * v / 2.0,
        (3.0 * u * u - 4.0 * u) / 2.0,
        (-3.0 * u * u + 2.0 * u + 1.0) / 2.0,
        u * u / 2.0,
    ]
}

fn difference_matrix(k: usize, order: usize) -> DMatrix<f64> {
    let mut d = DMatrix::<f64>::identity(k, k);
    for _ in 0..order {
        let r = d.nrows();
        d = DMatrix::from_fn(r - 1, k, |i, j| d[(i + 1, j)] - d[(i, j)]);
    }
    d
}

struct Solved {
    coef: DVector<f64>,
    ainv: DMatrix<f64>,
    rss: f64,
    edf: f64,
}

/// Least squares on the stacked system `[B; √λ D] β ≈ [y; 0]` by QR, which
/// stays accurate for very large `λ`.
fn solve(b: &DMatrix<f64>, d: &DMatrix<f64>, btb: &DMatrix<f64>, y: &DVector<f64>, lambda: f64) -> Result<Solved> {
    let (n, k) = b.shape();
    let m = d.nrows();
    let sl = lambda.sqrt();
    let stacked = DMatrix::from_fn(n + m, k, |i, j| if i < n { b[(i, j)] } else { sl * d[(i - n, j)] });
    let mut rhs = DVector::zeros(n + m);
    rhs.rows_mut(0, n).copy_from(y);
    let qr = stacked.qr();
    let r = qr.r();
    let qty = qr.q().transpose() * rhs;
    let singular = || MltError::Singular("penalized spline system".into());
    let coef = r.solve_upper_triangular(&qty).ok_or_else(singular)?;
    let rinv = r.solve_upper_triangular(&DMatrix::identity(k, k)).ok_or_else(singular)?;
    let ainv = &rinv * rinv.transpose();
    let rss = (y - b * &coef).norm_squared();
    let edf = (&ainv * btb).trace();
    Ok(Solved { coef, ainv, rss, edf })
}

/// Fit the smooth; `lambda` by generalized cross-validation over 25
/// log-spaced values in `[1e-4, 1e4]` unless fixed in `opts`.
pub fn gam_fit(xs: &[f64], ys: &[f64], opts: &GamOptions) -> Result<GamFit> {
    if xs.len() != ys.len() {
        return Err(MltError::Dimension {
            what: "GAM inputs".into(),
            expected: xs.len(),
            got: ys.len(),
        });
    }
    if !xs.iter().chain(ys).all(|v| v.is_finite()) {
        return Err(MltError::NonFinite("GAM inputs".into()));
    }
    let mut distinct = xs.to_vec();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    if distinct.len() < 2 {
        return Err(MltError::Degenerate {
            scope: "gam".into(),
            reason: "all x values are equal".into(),
        });
    }
    if distinct.len() < 10 {
        return Err(MltError::Validation(format!(
            "GAM needs at least 10 distinct x values, got {}",
            distinct.len()
        )));
    }
    if opts.n_knots < 1 || opts.penalty_order < 1 || opts.penalty_order >= opts.n_knots + 3 {
        return Err(MltError::Validation("invalid spline configuration".into()));
    }
    let n_int = opts.n_knots;
    let (x_min, x_max) = (distinct[0], *distinct.last().expect("nonempty"));
    let h = (x_max - x_min) / n_int as f64;
    let k = n_int + 3;
    let n = xs.len();
    let mut b = DMatrix::zeros(n, k);
    for (r, &x) in xs.iter().enumerate() {
        let (s, u) = span(x, x_min, h, n_int);
        for (j, v) in local_basis(u).iter().enumerate() {
            b[(r, s + j)] = *v;
        }
    }
    let y = DVector::from_column_slice(ys);
    let btb = b.transpose() * &b;
    let d = difference_matrix(k, opts.penalty_order);

    let gcv = |s: &Solved| n as f64 * s.rss / (n as f64 - s.edf).powi(2);
    let (lambda, sol) = match opts.lambda {
        Some(l) if l >= 0.0 && l.is_finite() => (l, solve(&b, &d, &btb, &y, l)?),
        Some(l) => return Err(MltError::Validation(format!("smoothing parameter must be nonnegative, got {l}"))),
        None => {
            let mut best: Option<(f64, Solved, f64)> = None;
            for i in 0..25 {
                let l = 10f64.powf(-4.0 + 8.0 * i as f64 / 24.0);
                let s = solve(&b, &d, &btb, &y, l)?;
                let g = gcv(&s);
                if best.as_ref().is_none_or(|(_, _, bg)| g < *bg) {
                    best = Some((l, s, g));
                }
            }
            let (l, s, _) = best.expect("nonempty grid");
            (l, s)
        }
    };
    let resid_df = (n as f64 - sol.edf).max(1.0);
    let sigma2 = sol.rss / resid_df;
    let cov = &sol.ainv * sigma2;
    let mut cov_rm = Vec::with_capacity(k * k);
    for i in 0..k {
        for j in 0..k {
            cov_rm.push(cov[(i, j)]);
        }
    }
    Ok(GamFit {
        x_min,
        x_max,
        n_intervals: n_int,
        coef: sol.coef.iter().copied().collect(),
        cov: cov_rm,
        lambda,
        edf: sol.edf,
        sigma2,
        gcv: gcv(&sol),
    })
}

impl GamFit {
    fn check(&self, x: f64) -> Result<(usize, f64)> {
        let tol = 1e-9 * (self.x_max - self.x_min);
        if !(x >= self.x_min - tol && x <= self.x_max + tol) {
            return Err(MltError::Validation(format!(
                "x = {x} outside the fitted range [{}, {}]",
                self.x_min, self.x_max
            )));
        }
        let h = (self.x_max - self.x_min) / self.n_intervals as f64;
        Ok(span(x, self.x_min, h, self.n_intervals))
    }

    pub fn eval(&self, x: f64) -> Result<f64> {
        let (s, u) = self.check(x)?;
        Ok(local_basis(u).iter().enumerate().map(|(j, b)| b * self.coef[s + j]).sum())
    }

    /// Fitted value with a pointwise 95% interval.
    pub fn eval_with_ci(&self, x: f64) -> Result<(f64, f64, f64)> {
        let (s, u) = self.check(x)?;
        let bs = local_basis(u);
        let k = self.coef.len();
        let mut var = 0.0;
        for a in 0..4 {
            for c in 0..4 {
                var += bs[a] * bs[c] * self.cov[(s + a) * k + s + c];
            }
        }
        let f = self.eval(x)?;
        let half = 1.959963984540054 * var.max(0.0).sqrt();
        Ok((f, f - half, f + half))
    }

    pub fn derivative(&self, x: f64) -> Result<f64> {
        let (s, u) = self.check(x)?;
        let h = (self.x_max - self.x_min) / self.n_intervals as f64;
        Ok(local_derivative(u).iter().enumerate().map(|(j, b)| b * self.coef[s + j]).sum::<f64>() / h)
    }
}

/// Slope of the smooth at `x` (value units per unit of `x`).
pub fn gam_derivative(fit: &GamFit, x: f64) -> Result<f64> {
    fit.derivative(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(n: usize, lo: f64, hi: f64) -> Vec<f64> {
        (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
    }

    #[test]
    fn reproduces_a_line() {
        let xs = grid(50, 55.0, 90.0);
        let ys: Vec<f64> = xs.iter().map(|x| 0.3 - 0.02 * x).collect();
        let f = gam_fit(&xs, &ys, &GamOptions::default()).unwrap();
        for (x, y) in xs.iter().zip(&ys) {
            assert!((f.eval(*x).unwrap() - y).abs() < 1e-8);
            assert!((f.derivative(*x).unwrap() + 0.02).abs() < 1e-8);
        }
    }

    #[test]
    fn quadratic_fit_and_slope() {
        let xs = grid(200, 0.0, 10.0);
        let ys: Vec<f64> = xs.iter().map(|x| x * x).collect();
        let f = gam_fit(&xs, &ys, &GamOptions::default()).unwrap();
        let err = xs.iter().zip(&ys).map(|(x, y)| (f.eval(*x).unwrap() - y).abs()).fold(0.0, f64::max);
        assert!(err <= 1e-3, "{err}");
        assert!((f.derivative(3.0).unwrap() - 6.0).abs() <= 0.05);
    }

    #[test]
    fn heavy_smoothing_is_least_squares_line() {
        let xs = grid(40, 0.0, 4.0);
        let ys: Vec<f64> = xs.iter().map(|x| (2.0 * x).sin() + 0.5 * x).collect();
        let f = gam_fit(&xs, &ys, &GamOptions { lambda: Some(1e12), ..Default::default() }).unwrap();
        let n = xs.len() as f64;
        let mx = xs.iter().sum::<f64>() / n;
        let my = ys.iter().sum::<f64>() / n;
        let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
        let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
        let slope = sxy / sxx;
        for &x in &xs {
            let line = my + slope * (x - mx);
            assert!((f.eval(x).unwrap() - line).abs() < 1e-6, "at {x}");
        }
    }

    #[test]
    fn constant_data_has_zero_slope() {
        let xs = grid(30, 60.0, 80.0);
        let f = gam_fit(&xs, &[1.7; 30], &GamOptions::default()).unwrap();
        assert!(f.derivative(71.3).unwrap().abs() < 1e-8);
        let (v, lo, hi) = f.eval_with_ci(70.0).unwrap();
        assert!(lo <= v && v <= hi);
    }

    #[test]
    fn degenerate_inputs() {
        assert!(matches!(gam_fit(&[3.0; 20], &[1.0; 20], &GamOptions::default()), Err(MltError::Degenerate { .. })));
        let xs = grid(30, 0.0, 1.0);
        let f = gam_fit(&xs, &xs, &GamOptions::default()).unwrap();
        assert!(f.derivative(1.5).is_err());
    }
}
