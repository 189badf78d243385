//! Lyapunov and Riccati value matrices and the resulting feedback.

use mlt::control::{gain_from_value, riccati_residual, solve_linear, solve_lqr};
use mlt::linalg::{lyapunov_residual, spectral_abscissa};
use nalgebra::DMatrix;

fn main() -> mlt::Result<()> {
    let stable = DMatrix::from_row_slice(2, 2, &[-1.0, 0.5, 0.0, -2.0]);
    let q = DMatrix::identity(2, 2);
    let p = solve_linear(&stable, &q)?;
    println!("Lyapunov P = {p:.4}residual {:.1e}", lyapunov_residual(&stable, &p, &q));

    // An unstable pair steered by one input.
    let a = DMatrix::from_row_slice(2, 2, &[0.3, 1.0, 0.0, 0.2]);
    let b = DMatrix::from_column_slice(2, 1, &[0.0, 1.0]);
    let p = solve_lqr(&a, &b, &[1.0], &q)?;
    let k = gain_from_value(&p, &b, &[1.0]);
    println!("Riccati residual {:.1e}", riccati_residual(&a, &b, &[1.0], &q, &p));
    println!(
        "open-loop abscissa {:.3}, closed-loop abscissa {:.3}",
        spectral_abscissa(&a)?,
        spectral_abscissa(&(&a - &b * &k))?
    );
    Ok(())
}
