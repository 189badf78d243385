//! Batched propagation `v_i(dt_i) = exp(A dt_i) v_i(0)` for many columns that
//! share one generator, with a reverse pass giving the gradient with respect
//! to `A` and the initial states.
//!
//! Each interval is split as `dt = k h + r` with `0 ≤ r < h`. The `k` whole
//! steps apply `E = exp(A h)` to all still-active columns at once; the
//! remainder is a truncated Taylor series in Horner form. The reverse pass is
//! the exact adjoint of these discrete operations, with `E` differentiated
//! through its Fréchet derivative.

use nalgebra::DMatrix;

use crate::error::{MltError, Result};
use crate::linalg::{expm_frechet, matrix_exponential, norm1};

/// Target `‖A τ‖₁` for one Taylor sub-step.
const TAYLOR_THETA: f64 = 0.5;

pub(crate) struct Tape {
    order: Vec<usize>,
    active: Vec<usize>,
    e: DMatrix<f64>,
    step_inputs: Vec<DMatrix<f64>>,
    rem_cols: Vec<usize>,
    rem_scale: Vec<Vec<f64>>,
    taylor: Vec<(DMatrix<f64>, Vec<DMatrix<f64>>)>,
    degree: usize,
    base_step: f64,
}

fn taylor_degree(theta: f64) -> usize {
    let mut term = 1.0;
    let mut m = 0usize;
    loop {
        m += 1;
        term *= theta / m as f64;
        if term <= 1e-17 || m >= 30 {
            return m;
        }
    }
}

fn scale_columns(m: &mut DMatrix<f64>, s: &[f64]) {
    for (j, mut col) in m.column_iter_mut().enumerate() {
        col *= s[j];
    }
}

fn gather(v: &DMatrix<f64>, cols: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(v.nrows(), cols.len(), |i, j| v[(i, cols[j])])
}

fn scatter(v: &mut DMatrix<f64>, cols: &[usize], src: &DMatrix<f64>) {
    for (j, &c) in cols.iter().enumerate() {
        v.column_mut(c).copy_from(&src.column(j));
    }
}

/// Propagate the columns of `v0` over their intervals.
pub(crate) fn forward(
    a: &DMatrix<f64>,
    base_step: f64,
    v0: &DMatrix<f64>,
    dts: &[f64],
) -> Result<(DMatrix<f64>, Tape)> {
    let d = a.nrows();
    let s = v0.ncols();
    debug_assert_eq!(dts.len(), s);
    let mut steps = Vec::with_capacity(s);
    let mut rems = Vec::with_capacity(s);
    for &dt in dts {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(MltError::Validation(format!("interval must be positive, got {dt}")));
        }
        let q = dt / base_step;
        let k = if (q - q.round()).abs() < 1e-9 { q.round() } else { q.floor() };
        let r = dt - k * base_step;
        steps.push(k as usize);
        rems.push(if r.abs() <= 1e-12 * dt.max(1.0) { 0.0 } else { r.max(0.0) });
    }

    let mut order: Vec<usize> = (0..s).collect();
    order.sort_by(|&i, &j| steps[j].cmp(&steps[i]).then(i.cmp(&j)));
    let kmax = order.first().map(|&i| steps[i]).unwrap_or(0);
    let active: Vec<usize> = (0..kmax)
        .map(|t| order.iter().take_while(|&&i| steps[i] > t).count())
        .collect();

    let mut v = gather(v0, &order);
    let e = if kmax > 0 {
        matrix_exponential(&(a * base_step))?
    } else {
        DMatrix::identity(d, d)
    };
    let mut step_inputs = Vec::with_capacity(kmax);
    for &c in &active {
        let head = v.columns(0, c).into_owned();
        let next = &e * &head;
        v.columns_mut(0, c).copy_from(&next);
        step_inputs.push(head);
    }

    let rem_cols: Vec<usize> = (0..s).filter(|&p| rems[order[p]] > 0.0).collect();
    let mut taylor = Vec::new();
    let mut rem_scale: Vec<Vec<f64>> = Vec::new();
    let mut degree = 0;
    if !rem_cols.is_empty() {
        let rmax = rem_cols.iter().map(|&p| rems[order[p]]).fold(0.0, f64::max);
        let anorm = norm1(a);
        let substeps = ((anorm * rmax / TAYLOR_THETA).ceil() as usize).max(1);
        let theta = anorm * rmax / substeps as f64;
        degree = taylor_degree(theta);
        let tau: Vec<f64> = rem_cols.iter().map(|&p| rems[order[p]] / substeps as f64).collect();
        rem_scale = (1..=degree)
            .map(|j| tau.iter().map(|t| t / j as f64).collect())
            .collect();
        let mut u = gather(&v, &rem_cols);
        for _ in 0..substeps {
            let mut q = u.clone();
            let mut olds = Vec::with_capacity(degree);
            for j in (1..=degree).rev() {
                let mut aq = a * &q;
                scale_columns(&mut aq, &rem_scale[j - 1]);
                olds.push(q);
                q = &u + aq;
            }
            taylor.push((u, olds));
            u = q;
        }
        scatter(&mut v, &rem_cols, &u);
    }

    if !v.iter().all(|x| x.is_finite()) {
        return Err(MltError::NonFinite("propagated state".into()));
    }
    let mut out = DMatrix::zeros(d, s);
    for (p, &i) in order.iter().enumerate() {
        out.column_mut(i).copy_from(&v.column(p));
    }
    Ok((
        out,
        Tape {
            order,
            active,
            e,
            step_inputs,
            rem_cols,
            rem_scale,
            taylor,
            degree,
            base_step,
        },
    ))
}

/// Given the adjoint of the propagated states, return `(∂/∂A, ∂/∂v0)`.
pub(crate) fn backward(
    tape: &Tape,
    a: &DMatrix<f64>,
    w_end: &DMatrix<f64>,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let d = a.nrows();
    let mut abar = DMatrix::zeros(d, d);
    let mut w = gather(w_end, &tape.order);
    let at = a.transpose();

    if !tape.rem_cols.is_empty() {
        let mut wr = gather(&w, &tape.rem_cols);
        for (_u, olds) in tape.taylor.iter().rev() {
            let mut ubar = DMatrix::zeros(d, wr.ncols());
            let mut qbar = wr;
            // forward visited j = degree..1; olds[degree - j] is the input at j
            for j in 1..=tape.degree {
                ubar += &qbar;
                let mut t = qbar;
                scale_columns(&mut t, &tape.rem_scale[j - 1]);
                abar += &t * olds[tape.degree - j].transpose();
                qbar = &at * t;
            }
            ubar += qbar;
            wr = ubar;
        }
        scatter(&mut w, &tape.rem_cols, &wr);
    }

    if !tape.active.is_empty() {
        let et = tape.e.transpose();
        let mut ebar = DMatrix::zeros(d, d);
        for (t, &c) in tape.active.iter().enumerate().rev() {
            let wc = w.columns(0, c).into_owned();
            ebar += &wc * tape.step_inputs[t].transpose();
            let prev = &et * wc;
            w.columns_mut(0, c).copy_from(&prev);
        }
        let (_, l) = expm_frechet(&(&at * tape.base_step), &ebar)?;
        abar += l * tape.base_step;
    }

    let mut w0 = DMatrix::zeros(d, w_end.ncols());
    for (p, &i) in tape.order.iter().enumerate() {
        w0.column_mut(i).copy_from(&w.column(p));
    }
    Ok((abar, w0))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn test_generator(d: usize) -> DMatrix<f64> {
        DMatrix::from_fn(d, d, |i, j| {
            let x = ((i * 31 + j * 17) % 23) as f64 / 23.0 - 0.5;
            if i == j {
                x - 1.0
            } else {
                0.6 * x
            }
        })
    }

    #[test]
    fn matches_dense_exponential() {
        let a = test_generator(6);
        let v0 = DMatrix::from_fn(6, 4, |i, j| (i as f64 + 1.0) * (j as f64 - 1.5));
        let dts = [1.25, 0.05, 2.0 / 3.0, 1.0 / 12.0];
        let (v, _) = forward(&a, 1.0 / 12.0, &v0, &dts).unwrap();
        for (j, &dt) in dts.iter().enumerate() {
            let want = matrix_exponential(&(&a * dt)).unwrap() * v0.column(j);
            assert!((v.column(j) - want).amax() < 1e-12, "column {j}");
        }
    }

    #[test]
    fn adjoint_matches_directional_derivative() {
        // ⟨W, dV⟩ must equal ⟨Ā, dA⟩ + ⟨W0, dV0⟩ for a central difference dV.
        let a = test_generator(5);
        let v0 = DMatrix::from_fn(5, 3, |i, j| ((i + 2 * j) % 4) as f64 - 1.0);
        let dts = [0.9, 0.31, 0.5];
        let w = DMatrix::from_fn(5, 3, |i, j| ((3 * i + j) % 5) as f64 * 0.2 - 0.3);
        let da = DMatrix::from_fn(5, 5, |i, j| ((i + j) % 3) as f64 * 0.1 - 0.1);
        let dv = DMatrix::from_fn(5, 3, |i, j| ((i * j) % 2) as f64 * 0.3);
        let (_, tape) = forward(&a, 0.25, &v0, &dts).unwrap();
        let (abar, w0) = backward(&tape, &a, &w).unwrap();
        let eps = 1e-6;
        let f = |s: f64| {
            let (v, _) = forward(&(&a + &da * s), 0.25, &(&v0 + &dv * s), &dts).unwrap();
            w.dot(&v)
        };
        let fd = (f(eps) - f(-eps)) / (2.0 * eps);
        let an = abar.dot(&da) + w0.dot(&dv);
        assert!((fd - an).abs() <= 1e-7 * an.abs().max(1.0), "{fd} vs {an}");
    }
}
