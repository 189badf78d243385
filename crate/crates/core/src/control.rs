//! Quadratic state cost, value matrix and state feedback for the coupled flow.
//!
//! Two value-matrix equations are available:
//!
//! * [`ValueMode::LinearLyapunov`]: `P A + Aᵀ P + C = 0` (a Lyapunov equation);
//! * [`ValueMode::QuadraticLqr`]: `P A + Aᵀ P − P M R̃⁻¹ Mᵀ P + C = 0`, the
//!   continuous-time algebraic Riccati equation, solved by Newton–Kleinman.
//!
//! `C = blkdiag(diag q, diag r)` and `R̃ = blkdiag(diag r, diag r)`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{MltError, Result};
use crate::linalg::{norm1, solve_lyapunov, spectral_abscissa};
use crate::transport::{BlockOperator, LatentState};

pub const NEWTON_MAX_ITERS: usize = 100;
pub const RESIDUAL_TOL: f64 = 1e-8;
const SIGN_MAX_ITERS: usize = 100;
const SIGN_TOL: f64 = 1e-13;

/// Diagonal state-cost weights for the two layers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostWeights {
    pub q: Vec<f64>,
    pub r: Vec<f64>,
}

impl CostWeights {
    pub fn new(q: Vec<f64>, r: Vec<f64>) -> Result<Self> {
        let w = CostWeights { q, r };
        w.validate()?;
        Ok(w)
    }

    pub fn uniform(n: usize, q: f64, r: f64) -> Result<Self> {
        CostWeights::new(vec![q; n], vec![r; n])
    }

    pub fn validate(&self) -> Result<()> {
        if self.q.len() != self.r.len() {
            return Err(MltError::Dimension {
                what: "cost weight r".into(),
                expected: self.q.len(),
                got: self.r.len(),
            });
        }
        if let Some(v) = self.q.iter().chain(&self.r).find(|v| !(v.is_finite() && **v > 0.0)) {
            return Err(MltError::Invariant(format!(
                "cost weights must be strictly positive, found {v}"
            )));
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.q.len()
    }

    /// `blkdiag(diag q, diag r)`
    pub fn state_cost(&self) -> DMatrix<f64> {
        DMatrix::from_diagonal(&DVector::from_iterator(
            2 * self.n(),
            self.q.iter().chain(&self.r).copied(),
        ))
    }

    /// Diagonal of `R̃ = blkdiag(diag r, diag r)`.
    pub fn stacked_r(&self) -> Vec<f64> {
        self.r.iter().chain(&self.r).copied().collect()
    }
}

/// Symmetric `2N x 2N` value matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueMatrix {
    p: DMatrix<f64>,
}

impl ValueMatrix {
    pub fn new(p: DMatrix<f64>) -> Result<Self> {
        if p.nrows() != p.ncols() {
            return Err(MltError::Dimension {
                what: "value matrix columns".into(),
                expected: p.nrows(),
                got: p.ncols(),
            });
        }
        if !p.iter().all(|v| v.is_finite()) {
            return Err(MltError::NonFinite("value matrix".into()));
        }
        let asym = (&p - p.transpose()).amax();
        if asym > 1e-10 * p.amax().max(1.0) {
            return Err(MltError::Invariant(format!("value matrix asymmetric by {asym:.3e}")));
        }
        Ok(ValueMatrix { p })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.p
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.p
    }

    fn half(&self) -> usize {
        self.p.nrows() / 2
    }

    pub fn p_ss(&self) -> DMatrix<f64> {
        let n = self.half();
        self.p.view((0, 0), (n, n)).into_owned()
    }

    pub fn p_sf(&self) -> DMatrix<f64> {
        let n = self.half();
        self.p.view((0, n), (n, n)).into_owned()
    }

    pub fn p_ff(&self) -> DMatrix<f64> {
        let n = self.half();
        self.p.view((n, n), (n, n)).into_owned()
    }

    /// `½ uᵀ P u`
    pub fn value(&self, u: &DVector<f64>) -> f64 {
        0.5 * u.dot(&(&self.p * u))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ValueMode {
    LinearLyapunov,
    QuadraticLqr { m: DMatrix<f64> },
}

/// Solve for the value matrix of `op` under `weights`.
pub fn solve_value_matrix(
    op: &BlockOperator,
    weights: &CostWeights,
    mode: &ValueMode,
) -> Result<ValueMatrix> {
    weights.validate()?;
    if weights.n() != op.n() {
        return Err(MltError::Dimension {
            what: "cost weights vs operator regions".into(),
            expected: op.n(),
            got: weights.n(),
        });
    }
    let c = weights.state_cost();
    let p = match mode {
        ValueMode::LinearLyapunov => solve_linear(op.matrix(), &c)?,
        ValueMode::QuadraticLqr { m } => solve_lqr(op.matrix(), m, &weights.stacked_r(), &c)?,
    };
    ValueMatrix::new(p)
}

/// Tolerance on the Riccati residual, relative to the size of its terms.
fn riccati_tol(a: &DMatrix<f64>, b: &DMatrix<f64>, r_diag: &[f64], c: &DMatrix<f64>, p: &DMatrix<f64>) -> f64 {
    let pa = p * a;
    let quad = p * b * gain_from_value(p, b, r_diag);
    RESIDUAL_TOL * c.norm().max(2.0 * pa.norm()).max(quad.norm()).max(1.0)
}

/// `P A + Aᵀ P + C = 0`; `A` must be Hurwitz.
pub fn solve_linear(a: &DMatrix<f64>, c: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let abscissa = spectral_abscissa(a)?;
    if abscissa >= 0.0 {
        return Err(MltError::NotHurwitz { abscissa });
    }
    solve_lyapunov(a, c)
}

/// Frobenius norm of `P A + Aᵀ P − P B R⁻¹ Bᵀ P + C`.
pub fn riccati_residual(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    r_diag: &[f64],
    c: &DMatrix<f64>,
    p: &DMatrix<f64>,
) -> f64 {
    let k = gain_from_value(p, b, r_diag);
    let pbk = p * b * k;
    (p * a + a.transpose() * p - pbk + c).norm()
}

/// `R⁻¹ Bᵀ P` for diagonal `R`.
pub fn gain_from_value(p: &DMatrix<f64>, b: &DMatrix<f64>, r_diag: &[f64]) -> DMatrix<f64> {
    let mut k = b.transpose() * p;
    for (i, mut row) in k.row_iter_mut().enumerate() {
        row /= r_diag[i];
    }
    k
}

/// Stabilizing Riccati solution from the sign of the Hamiltonian
/// `[[A, −B R⁻¹ Bᵀ], [−C, −Aᵀ]]`, by the scaled Newton iteration
/// `Z ← (μ Z + (μ Z)⁻¹) / 2`.
pub fn hamiltonian_sign_solution(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    r_diag: &[f64],
    c: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    let mut g = b.clone();
    for (j, mut col) in g.column_iter_mut().enumerate() {
        col /= r_diag[j];
    }
    let g = g * b.transpose();
    let mut z = DMatrix::zeros(2 * n, 2 * n);
    z.view_mut((0, 0), (n, n)).copy_from(a);
    z.view_mut((0, n), (n, n)).copy_from(&(-g));
    z.view_mut((n, 0), (n, n)).copy_from(&(-c));
    z.view_mut((n, n), (n, n)).copy_from(&(-a.transpose()));
    let singular = || MltError::Singular("Hamiltonian has eigenvalues on the imaginary axis".into());
    let mut converged = false;
    for _ in 0..SIGN_MAX_ITERS {
        let lu = z.clone().lu();
        let log_det: f64 = lu.u().diagonal().iter().map(|d| d.abs().ln()).sum();
        if !log_det.is_finite() {
            return Err(singular());
        }
        let inv = lu.try_inverse().ok_or_else(singular)?;
        let mu = (-log_det / (2 * n) as f64).exp();
        let next = (&z * mu + inv / mu) * 0.5;
        let change = norm1(&(&next - &z));
        z = next;
        if !z.iter().all(|v| v.is_finite()) {
            return Err(singular());
        }
        if change <= SIGN_TOL * norm1(&z) {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(singular());
    }
    // sign(H) [I; P] = −[I; P]
    let mut lhs = DMatrix::zeros(2 * n, n);
    lhs.view_mut((0, 0), (n, n)).copy_from(&z.view((0, n), (n, n)));
    lhs.view_mut((n, 0), (n, n)).copy_from(&(z.view((n, n), (n, n)) + DMatrix::identity(n, n)));
    let mut rhs = DMatrix::zeros(2 * n, n);
    rhs.view_mut((0, 0), (n, n)).copy_from(&(-(z.view((0, 0), (n, n)) + DMatrix::identity(n, n))));
    rhs.view_mut((n, 0), (n, n)).copy_from(&(-z.view((n, 0), (n, n))));
    let p = lhs
        .svd(true, true)
        .solve(&rhs, 1e-14)
        .map_err(|e| MltError::Singular(format!("Hamiltonian subspace solve: {e}")))?;
    Ok((&p + p.transpose()) * 0.5)
}

/// Newton–Kleinman for `P A + Aᵀ P − P B R⁻¹ Bᵀ P + C = 0`.
///
/// Seeded with the Lyapunov solution when `A` is Hurwitz, otherwise with the
/// Hamiltonian sign-function solution.
pub fn solve_lqr(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    r_diag: &[f64],
    c: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    if b.nrows() != n || r_diag.len() != b.ncols() || c.shape() != (n, n) {
        return Err(MltError::Dimension {
            what: "LQR input/weight shapes".into(),
            expected: n,
            got: b.nrows(),
        });
    }
    if r_diag.iter().any(|r| !(*r > 0.0)) {
        return Err(MltError::Invariant("control weights must be positive".into()));
    }
    let abscissa = spectral_abscissa(a)?;
    let seed = if abscissa < 0.0 {
        solve_lyapunov(a, c)?
    } else {
        hamiltonian_sign_solution(a, b, r_diag, c)?
    };
    let residual = riccati_residual(a, b, r_diag, c, &seed);
    if residual <= riccati_tol(a, b, r_diag, c, &seed) && stabilizes(a, b, r_diag, &seed)? {
        return Ok(seed);
    }
    let mut gain = gain_from_value(&seed, b, r_diag);
    let closed = spectral_abscissa(&(a - b * &gain))?;
    if closed >= 0.0 {
        return Err(MltError::NotHurwitz { abscissa: closed });
    }

    let mut best: Option<(f64, DMatrix<f64>)> = None;
    let mut stalled = 0;
    for _ in 0..NEWTON_MAX_ITERS {
        let closed = a - b * &gain;
        let mut rk = gain.clone();
        for (i, mut row) in rk.row_iter_mut().enumerate() {
            row *= r_diag[i];
        }
        let rhs = c + gain.transpose() * rk;
        let p = solve_lyapunov(&closed, &rhs)?;
        let p = (&p + p.transpose()) * 0.5;
        let residual = riccati_residual(a, b, r_diag, c, &p);
        if !residual.is_finite() {
            break;
        }
        let tol = riccati_tol(a, b, r_diag, c, &p);
        gain = gain_from_value(&p, b, r_diag);
        if best.as_ref().is_none_or(|(r, _)| residual < *r) {
            best = Some((residual, p));
            stalled = 0;
        } else {
            stalled += 1;
        }
        let (r_best, p_best) = best.as_ref().expect("set above");
        if *r_best <= tol && (residual <= tol || stalled >= 2) {
            let p = p_best.clone();
            if !stabilizes(a, b, r_diag, &p)? {
                return Err(MltError::NotHurwitz {
                    abscissa: spectral_abscissa(&(a - b * gain_from_value(&p, b, r_diag)))?,
                });
            }
            return Ok(p);
        }
        if stalled >= 5 {
            break;
        }
    }
    Err(MltError::NoConvergence {
        iterations: NEWTON_MAX_ITERS,
        residual: best.map(|b| b.0).unwrap_or(f64::INFINITY),
    })
}

fn stabilizes(a: &DMatrix<f64>, b: &DMatrix<f64>, r_diag: &[f64], p: &DMatrix<f64>) -> Result<bool> {
    Ok(spectral_abscissa(&(a - b * gain_from_value(p, b, r_diag)))? < 0.0)
}

/// `K = R̃⁻¹ Mᵀ P`, so that `A − M K` is the closed-loop generator.
pub fn feedback_gain(p: &ValueMatrix, m: &DMatrix<f64>, weights: &CostWeights) -> Result<DMatrix<f64>> {
    weights.validate()?;
    let r = weights.stacked_r();
    if m.nrows() != p.matrix().nrows() || m.ncols() != r.len() {
        return Err(MltError::Dimension {
            what: "coupling map vs value matrix".into(),
            expected: p.matrix().nrows(),
            got: m.nrows(),
        });
    }
    Ok(gain_from_value(p.matrix(), m, &r))
}

/// `A − M K`.
pub fn closed_loop_operator(op: &BlockOperator, m: &DMatrix<f64>, k: &DMatrix<f64>) -> Result<BlockOperator> {
    let n2 = op.matrix().nrows();
    if m.nrows() != n2 || k.ncols() != n2 || m.ncols() != k.nrows() {
        return Err(MltError::Dimension {
            what: "closed loop M K vs operator".into(),
            expected: n2,
            got: if m.nrows() != n2 { m.nrows() } else { k.ncols() },
        });
    }
    BlockOperator::new(op.matrix() - m * k)
}

/// `½ Σ q_i u_s,i² + ½ Σ r_i u_f,i²`
pub fn cost_functional(state: &LatentState, weights: &CostWeights) -> Result<f64> {
    if state.n() != weights.n() {
        return Err(MltError::Dimension {
            what: "state vs cost weights".into(),
            expected: weights.n(),
            got: state.n(),
        });
    }
    let s: f64 = state.u_s.iter().zip(&weights.q).map(|(u, q)| q * u * u).sum();
    let f: f64 = state.u_f.iter().zip(&weights.r).map(|(u, r)| r * u * u).sum();
    Ok(0.5 * (s + f))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn diag(v: &[f64]) -> DMatrix<f64> {
        DMatrix::from_diagonal(&DVector::from_column_slice(v))
    }

    #[test]
    fn scalar_linear_value() {
        let p = solve_linear(&diag(&[-1.0]), &diag(&[2.0])).unwrap();
        assert!((p[(0, 0)] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn decoupled_linear_value() {
        let op = BlockOperator::new(-DMatrix::identity(2, 2)).unwrap();
        let w = CostWeights::new(vec![2.0], vec![4.0]).unwrap();
        let p = solve_value_matrix(&op, &w, &ValueMode::LinearLyapunov).unwrap();
        assert!((p.matrix() - diag(&[1.0, 2.0])).amax() < 1e-14);
    }

    #[test]
    fn zero_cost_gives_zero_value() {
        let a = DMatrix::from_row_slice(2, 2, &[-1.0, 0.5, 0.0, -2.0]);
        let p = solve_linear(&a, &DMatrix::zeros(2, 2)).unwrap();
        assert_eq!(p.amax(), 0.0);
    }

    #[test]
    fn linear_mode_rejects_unstable_operator() {
        let op = BlockOperator::new(diag(&[0.5, -1.0])).unwrap();
        let w = CostWeights::uniform(1, 1.0, 1.0).unwrap();
        match solve_value_matrix(&op, &w, &ValueMode::LinearLyapunov) {
            Err(MltError::NotHurwitz { abscissa }) => assert!((abscissa - 0.5).abs() < 1e-12),
            other => panic!("expected NotHurwitz, got {other:?}"),
        }
    }

    #[test]
    fn scalar_riccati_closed_form() {
        // p a + a p - p^2 b^2 / r + c = 0  =>  p = r (a + sqrt(a^2 + b^2 c / r)) / b^2
        let (a, b, r, c) = (0.7, 1.3, 0.5, 2.0);
        let p = solve_lqr(&diag(&[a]), &diag(&[b]), &[r], &diag(&[c])).unwrap();
        let want = r * (a + (a * a + b * b * c / r).sqrt()) / (b * b);
        assert!((p[(0, 0)] - want).abs() < 1e-10);
        let k = gain_from_value(&p, &diag(&[b]), &[r]);
        assert!(a - b * k[(0, 0)] < 0.0);
    }

    #[test]
    fn lqr_with_zero_input_is_lyapunov() {
        let a = DMatrix::from_row_slice(2, 2, &[-1.0, 0.3, -0.2, -0.5]);
        let c = diag(&[1.0, 2.0]);
        let lin = solve_linear(&a, &c).unwrap();
        let lqr = solve_lqr(&a, &DMatrix::zeros(2, 2), &[1.0, 1.0], &c).unwrap();
        assert_eq!(lin, lqr);
    }

    #[test]
    fn gain_examples() {
        let p = ValueMatrix::new(diag(&[1.0, 2.0])).unwrap();
        let w = CostWeights::uniform(1, 1.0, 1.0).unwrap();
        let m = DMatrix::identity(2, 2);
        let k = feedback_gain(&p, &m, &w).unwrap();
        assert_eq!(k, diag(&[1.0, 2.0]));
        let w3 = CostWeights::uniform(1, 1.0, 3.0).unwrap();
        let k3 = feedback_gain(&p, &m, &w3).unwrap();
        assert!((k3 * 3.0 - &k).amax() < 1e-15);
        let zero = ValueMatrix::new(DMatrix::zeros(2, 2)).unwrap();
        assert_eq!(feedback_gain(&zero, &m, &w).unwrap().amax(), 0.0);
    }

    #[test]
    fn scalar_closed_loop() {
        let op = BlockOperator::new(diag(&[-1.0, -1.0])).unwrap();
        let id = DMatrix::identity(2, 2);
        let cl = closed_loop_operator(&op, &id, &id).unwrap();
        assert_eq!(cl.matrix(), &diag(&[-2.0, -2.0]));
        let same = closed_loop_operator(&op, &id, &DMatrix::zeros(2, 2)).unwrap();
        assert_eq!(same, op);
    }

    #[test]
    fn cost_examples() {
        let w = CostWeights::uniform(3, 1.0, 1.0).unwrap();
        let s = LatentState::new(
            DVector::from_vec(vec![1.0, 0.0, 0.0]),
            DVector::from_vec(vec![0.0, 1.0, 0.0]),
        )
        .unwrap();
        assert_eq!(cost_functional(&s, &w).unwrap(), 1.0);
        assert_eq!(cost_functional(&LatentState::zeros(3), &w).unwrap(), 0.0);
        let s2 = LatentState::new(&s.u_s * 2.0, &s.u_f * 2.0).unwrap();
        assert_eq!(cost_functional(&s2, &w).unwrap(), 4.0);
    }

    #[test]
    fn weights_must_be_positive() {
        assert!(CostWeights::new(vec![1.0, 0.0], vec![1.0, 1.0]).is_err());
        assert!(CostWeights::new(vec![1.0], vec![1.0, 1.0]).is_err());
    }
}
