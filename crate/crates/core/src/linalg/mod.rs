//! Dense linear-algebra kernels shared by the transport and control layers.

mod expm;
mod lyapunov;

pub use expm::{expm_frechet, matrix_exponential, matrix_exponential_symmetric, norm1};
pub use lyapunov::{
    lyapunov_residual, real_schur, schur_eigenvalues, solve_lyapunov, spectral_abscissa,
};

use nalgebra::DMatrix;

/// Largest eigenvalue of a symmetric matrix.
pub fn symmetric_max_eigenvalue(a: &DMatrix<f64>) -> f64 {
    a.clone()
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Smallest eigenvalue of a symmetric matrix.
pub fn symmetric_min_eigenvalue(a: &DMatrix<f64>) -> f64 {
    a.clone()
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}
