//! Continuous Lyapunov equation `P A + Aᵀ P + C = 0` by Bartels–Stewart.
//!
//! `A = U T Uᵀ` (real Schur form, `T` upper quasi-triangular). With
//! `Y = Uᵀ P U` the equation becomes `Tᵀ Y + Y T = -Uᵀ C U`, which is solved
//! block by block in increasing block-row / block-column order: every block
//! `Y_ij` only depends on blocks `Y_kj (k < i)` and `Y_ik (k < j)`.

use nalgebra::{DMatrix, Schur};

use crate::error::{MltError, Result};

/// Real Schur factors `(U, T)` with `A = U T Uᵀ`.
pub fn real_schur(a: &DMatrix<f64>) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    if !a.iter().all(|v| v.is_finite()) {
        return Err(MltError::NonFinite("Schur decomposition input".into()));
    }
    let schur = Schur::try_new(a.clone(), f64::EPSILON, 0)
        .ok_or_else(|| MltError::NoConvergence {
            iterations: 0,
            residual: f64::NAN,
        })?;
    Ok(schur.unpack())
}

/// Diagonal block boundaries of a quasi-triangular matrix: `(start, size)`.
fn diagonal_blocks(t: &DMatrix<f64>) -> Vec<(usize, usize)> {
    let n = t.nrows();
    let mut blocks = Vec::new();
    let mut i = 0;
    while i < n {
        if i + 1 < n && t[(i + 1, i)] != 0.0 {
            blocks.push((i, 2));
            i += 2;
        } else {
            blocks.push((i, 1));
            i += 1;
        }
    }
    blocks
}

/// Eigenvalues `(re, im)` read off the diagonal blocks of a real Schur form.
pub fn schur_eigenvalues(t: &DMatrix<f64>) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(t.nrows());
    for (s, size) in diagonal_blocks(t) {
        if size == 1 {
            out.push((t[(s, s)], 0.0));
        } else {
            let (a, b, c, d) = (t[(s, s)], t[(s, s + 1)], t[(s + 1, s)], t[(s + 1, s + 1)]);
            let half_tr = 0.5 * (a + d);
            let disc = 0.25 * (a - d) * (a - d) + b * c;
            if disc >= 0.0 {
                let r = disc.sqrt();
                out.push((half_tr + r, 0.0));
                out.push((half_tr - r, 0.0));
            } else {
                let im = (-disc).sqrt();
                out.push((half_tr, im));
                out.push((half_tr, -im));
            }
        }
    }
    out
}

/// Largest real part over the spectrum of `a`.
pub fn spectral_abscissa(a: &DMatrix<f64>) -> Result<f64> {
    if a.nrows() == 0 {
        return Ok(f64::NEG_INFINITY);
    }
    let (_, t) = real_schur(a)?;
    Ok(schur_eigenvalues(&t)
        .into_iter()
        .map(|(re, _)| re)
        .fold(f64::NEG_INFINITY, f64::max))
}

/// Solve `P A + Aᵀ P + C = 0` for `P`.
///
/// Requires `λ_i(A) + λ_j(A) ≠ 0` for all eigenvalue pairs; a singular block
/// system is reported as `NotHurwitz` with the spectral abscissa.
pub fn solve_lyapunov(a: &DMatrix<f64>, c: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(MltError::Dimension {
            what: "Lyapunov operator columns".into(),
            expected: n,
            got: a.ncols(),
        });
    }
    if c.shape() != (n, n) {
        return Err(MltError::Dimension {
            what: "Lyapunov constant term".into(),
            expected: n,
            got: c.nrows(),
        });
    }
    let (u, t) = real_schur(a)?;
    let f = -(u.transpose() * c * &u);
    let y = solve_quasi_triangular(&t, &f).map_err(|e| match e {
        MltError::Singular(_) => {
            let abscissa = schur_eigenvalues(&t)
                .into_iter()
                .map(|(re, _)| re)
                .fold(f64::NEG_INFINITY, f64::max);
            MltError::NotHurwitz { abscissa }
        }
        other => other,
    })?;
    let p = &u * y * u.transpose();
    // Symmetrize to remove rounding asymmetry; the exact solution is symmetric
    // whenever C is.
    if is_symmetric(c) {
        Ok((&p + p.transpose()) * 0.5)
    } else {
        Ok(p)
    }
}

fn is_symmetric(c: &DMatrix<f64>) -> bool {
    let n = c.nrows();
    (0..n).all(|i| (0..i).all(|j| c[(i, j)] == c[(j, i)]))
}

/// Solve `Tᵀ Y + Y T = F` for upper quasi-triangular `T`.
fn solve_quasi_triangular(t: &DMatrix<f64>, f: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = t.nrows();
    let blocks = diagonal_blocks(t);
    let mut y = DMatrix::<f64>::zeros(n, n);

    for &(ri, pi) in &blocks {
        for &(cj, qj) in &blocks {
            // rhs = F_ij - sum_{k < ri} T_{k,i}ᵀ Y_{k,j} - sum_{k < cj} Y_{i,k} T_{k,j}
            let mut rhs = [[0.0f64; 2]; 2];
            for a in 0..pi {
                for b in 0..qj {
                    let row = ri + a;
                    let col = cj + b;
                    let mut acc = f[(row, col)];
                    for k in 0..ri {
                        acc -= t[(k, row)] * y[(k, col)];
                    }
                    for k in 0..cj {
                        acc -= y[(row, k)] * t[(k, col)];
                    }
                    rhs[a][b] = acc;
                }
            }
            let block = solve_small_sylvester(t, ri, pi, cj, qj, &rhs)?;
            for a in 0..pi {
                for b in 0..qj {
                    y[(ri + a, cj + b)] = block[a][b];
                }
            }
        }
    }
    Ok(y)
}

/// `T_iiᵀ X + X T_jj = R` for blocks of size `p x q` (p, q ≤ 2), solved as a
/// Kronecker system of order `p q`.
fn solve_small_sylvester(
    t: &DMatrix<f64>,
    ri: usize,
    p: usize,
    cj: usize,
    q: usize,
    rhs: &[[f64; 2]; 2],
) -> Result<[[f64; 2]; 2]> {
    let m = p * q;
    // unknown index: x[a][b] -> a + p * b (column-major)
    let mut k = DMatrix::<f64>::zeros(m, m);
    let mut r = nalgebra::DVector::<f64>::zeros(m);
    for a in 0..p {
        for b in 0..q {
            let row = a + p * b;
            r[row] = rhs[a][b];
            // (T_iiᵀ X)_{ab} = sum_c T_ii[c, a] X[c, b]
            for c in 0..p {
                k[(row, c + p * b)] += t[(ri + c, ri + a)];
            }
            // (X T_jj)_{ab} = sum_d X[a, d] T_jj[d, b]
            for d in 0..q {
                k[(row, a + p * d)] += t[(cj + d, cj + b)];
            }
        }
    }
    let scale = k.amax().max(f64::MIN_POSITIVE);
    let lu = k.lu();
    let det = lu.determinant();
    if det.abs() <= (f64::EPSILON * scale).powi(m as i32) {
        return Err(MltError::Singular("Lyapunov block system".into()));
    }
    let x = lu
        .solve(&r)
        .ok_or_else(|| MltError::Singular("Lyapunov block system".into()))?;
    let mut out = [[0.0; 2]; 2];
    for a in 0..p {
        for b in 0..q {
            out[a][b] = x[a + p * b];
        }
    }
    Ok(out)
}

/// Frobenius norm of `P A + Aᵀ P + C`.
pub fn lyapunov_residual(a: &DMatrix<f64>, p: &DMatrix<f64>, c: &DMatrix<f64>) -> f64 {
    (p * a + a.transpose() * p + c).norm()
}
