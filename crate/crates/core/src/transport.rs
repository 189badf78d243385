//! Diffusion on one graph layer and the coupled two-layer flow.

use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{MltError, Result};
use crate::graph::{LaplacianKind, LayeredConnectome};
use crate::linalg::{matrix_exponential, matrix_exponential_symmetric, spectral_abscissa};

/// Trajectories whose norm exceeds this are reported as unstable.
pub const OVERFLOW_GUARD: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Integrator {
    MatrixExponential,
    Rk4 { dt: f64 },
}

impl Default for Integrator {
    fn default() -> Self {
        Integrator::MatrixExponential
    }
}

/// Potentials on the structural (`u_s`) and functional (`u_f`) layers.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentState {
    pub u_s: DVector<f64>,
    pub u_f: DVector<f64>,
}

impl LatentState {
    pub fn new(u_s: DVector<f64>, u_f: DVector<f64>) -> Result<Self> {
        if u_s.len() != u_f.len() {
            return Err(MltError::Dimension {
                what: "FC layer state".into(),
                expected: u_s.len(),
                got: u_f.len(),
            });
        }
        if !u_s.iter().chain(u_f.iter()).all(|v| v.is_finite()) {
            return Err(MltError::NonFinite("latent state".into()));
        }
        Ok(LatentState { u_s, u_f })
    }

    pub fn zeros(n: usize) -> Self {
        LatentState {
            u_s: DVector::zeros(n),
            u_f: DVector::zeros(n),
        }
    }

    pub fn n(&self) -> usize {
        self.u_s.len()
    }

    /// `[u_s; u_f]`
    pub fn stacked(&self) -> DVector<f64> {
        let n = self.n();
        DVector::from_fn(2 * n, |i, _| if i < n { self.u_s[i] } else { self.u_f[i - n] })
    }

    pub fn from_stacked(v: &DVector<f64>) -> Result<Self> {
        if v.len() % 2 != 0 {
            return Err(MltError::Dimension {
                what: "stacked state length (must be even)".into(),
                expected: v.len() + 1,
                got: v.len(),
            });
        }
        let n = v.len() / 2;
        LatentState::new(v.rows(0, n).into_owned(), v.rows(n, n).into_owned())
    }
}

/// The `2N x 2N` generator of the coupled flow.
#[derive(Debug, Clone)]
pub struct BlockOperator {
    a: DMatrix<f64>,
    abscissa: OnceLock<f64>,
}

impl PartialEq for BlockOperator {
    fn eq(&self, other: &Self) -> bool {
        self.a == other.a
    }
}

impl BlockOperator {
    pub fn new(a: DMatrix<f64>) -> Result<Self> {
        if a.nrows() != a.ncols() || a.nrows() % 2 != 0 {
            return Err(MltError::Dimension {
                what: "block operator must be square with even order".into(),
                expected: a.nrows(),
                got: a.ncols(),
            });
        }
        if !a.iter().all(|v| v.is_finite()) {
            return Err(MltError::NonFinite("block operator".into()));
        }
        Ok(BlockOperator {
            a,
            abscissa: OnceLock::new(),
        })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.a
    }

    /// Number of regions (half the operator order).
    pub fn n(&self) -> usize {
        self.a.nrows() / 2
    }

    pub fn block(&self, row: usize, col: usize) -> DMatrix<f64> {
        let n = self.n();
        self.a.view((row * n, col * n), (n, n)).into_owned()
    }

    /// Largest real part of the spectrum, computed once.
    pub fn spectral_abscissa(&self) -> Result<f64> {
        if let Some(v) = self.abscissa.get() {
            return Ok(*v);
        }
        let v = spectral_abscissa(&self.a)?;
        Ok(*self.abscissa.get_or_init(|| v))
    }
}

/// `[[-c_s L_s, λ_s M_s], [λ_f M_f, -c_f L_f]]` from explicit Laplacians.
#[allow(clippy::too_many_arguments)]
pub fn assemble_from_laplacians(
    lap_s: &DMatrix<f64>,
    lap_f: &DMatrix<f64>,
    m_s: &DMatrix<f64>,
    m_f: &DMatrix<f64>,
    lambda_s: f64,
    lambda_f: f64,
    c_s: f64,
    c_f: f64,
) -> Result<BlockOperator> {
    let n = lap_s.nrows();
    for (what, m) in [
        ("SC Laplacian", lap_s),
        ("FC Laplacian", lap_f),
        ("SC coupling matrix", m_s),
        ("FC coupling matrix", m_f),
    ] {
        if m.shape() != (n, n) {
            return Err(MltError::Dimension {
                what: what.into(),
                expected: n,
                got: if m.nrows() != n { m.nrows() } else { m.ncols() },
            });
        }
    }
    let mut a = DMatrix::zeros(2 * n, 2 * n);
    a.view_mut((0, 0), (n, n)).copy_from(&(lap_s * -c_s));
    a.view_mut((0, n), (n, n)).copy_from(&(m_s * lambda_s));
    a.view_mut((n, 0), (n, n)).copy_from(&(m_f * lambda_f));
    a.view_mut((n, n), (n, n)).copy_from(&(lap_f * -c_f));
    BlockOperator::new(a)
}

/// Block operator over a connectome with combinatorial Laplacians and one
/// shared diffusivity.
pub fn assemble_block_operator(
    connectome: &LayeredConnectome,
    m_s: &DMatrix<f64>,
    m_f: &DMatrix<f64>,
    lambda_s: f64,
    lambda_f: f64,
    c: f64,
) -> Result<BlockOperator> {
    let lap_s = connectome.sc.laplacian(LaplacianKind::Combinatorial);
    let lap_f = connectome.fc.laplacian(LaplacianKind::Combinatorial);
    assemble_from_laplacians(&lap_s, &lap_f, m_s, m_f, lambda_s, lambda_f, c, c)
}

fn check_duration(t: f64, method: Integrator) -> Result<()> {
    if !t.is_finite() || t < 0.0 {
        return Err(MltError::Validation(format!(
            "integration time must be finite and nonnegative, got {t}"
        )));
    }
    if let Integrator::Rk4 { dt } = method {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(MltError::Validation(format!("rk4 step must be positive, got {dt}")));
        }
    }
    Ok(())
}

/// Classical RK4 for `v' = A v` with `ceil(t / dt)` equal steps.
pub fn rk4_linear(a: &DMatrix<f64>, v0: &DVector<f64>, t: f64, dt: f64) -> Result<DVector<f64>> {
    if t == 0.0 {
        return Ok(v0.clone());
    }
    let steps = (t / dt).ceil().max(1.0) as usize;
    let h = t / steps as f64;
    let mut v = v0.clone();
    for step in 0..steps {
        let k1 = a * &v;
        let k2 = a * (&v + &k1 * (0.5 * h));
        let k3 = a * (&v + &k2 * (0.5 * h));
        let k4 = a * (&v + &k3 * h);
        v += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
        if !v.iter().all(|x| x.is_finite()) {
            return Err(MltError::NonFinite(format!("rk4 state at step {step}")));
        }
    }
    Ok(v)
}

/// `exp(-c L t) u0`.
pub fn integrate_single_layer(
    u0: &DVector<f64>,
    laplacian: &DMatrix<f64>,
    c: f64,
    t: f64,
    method: Integrator,
) -> Result<DVector<f64>> {
    let n = u0.len();
    if laplacian.shape() != (n, n) {
        return Err(MltError::Dimension {
            what: "Laplacian order vs state".into(),
            expected: n,
            got: laplacian.nrows(),
        });
    }
    if !(c >= 0.0 && c.is_finite()) {
        return Err(MltError::Validation(format!("diffusivity must be nonnegative, got {c}")));
    }
    check_duration(t, method)?;
    if !u0.iter().chain(laplacian.iter()).all(|v| v.is_finite()) {
        return Err(MltError::NonFinite("single-layer inputs".into()));
    }
    let gen = laplacian * (-c);
    match method {
        Integrator::MatrixExponential => {
            let e = if laplacian == &laplacian.transpose() {
                matrix_exponential_symmetric(&(gen * t))?
            } else {
                matrix_exponential(&(gen * t))?
            };
            Ok(e * u0)
        }
        Integrator::Rk4 { dt } => rk4_linear(&gen, u0, t, dt),
    }
}

/// `exp(A t) [u_s; u_f]`.
pub fn integrate_coupled(
    state0: &LatentState,
    op: &BlockOperator,
    t: f64,
    method: Integrator,
) -> Result<LatentState> {
    if state0.n() != op.n() {
        return Err(MltError::Dimension {
            what: "state vs operator regions".into(),
            expected: op.n(),
            got: state0.n(),
        });
    }
    check_duration(t, method)?;
    let abscissa = op.spectral_abscissa()?;
    if abscissa > 0.0 {
        log::warn!("coupled operator has positive spectral abscissa {abscissa:.6}");
    }
    let v0 = state0.stacked();
    let result = match method {
        Integrator::MatrixExponential => matrix_exponential(&(op.matrix() * t)).map(|e| e * &v0),
        Integrator::Rk4 { dt } => rk4_linear(op.matrix(), &v0, t, dt),
    };
    let v = match result {
        Ok(v) => v,
        Err(MltError::ExpmOverflow { .. }) | Err(MltError::NonFinite(_)) => {
            return Err(MltError::Unstable {
                abscissa,
                guard: OVERFLOW_GUARD,
            })
        }
        Err(e) => return Err(e),
    };
    if !(v.norm() <= OVERFLOW_GUARD) {
        return Err(MltError::Unstable {
            abscissa,
            guard: OVERFLOW_GUARD,
        });
    }
    LatentState::from_stacked(&v)
}
