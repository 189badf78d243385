//! Heat diffusion on a ring and on a coupled two-layer system.

use mlt::graph::{LaplacianKind, WeightedGraph};
use mlt::transport::{assemble_from_laplacians, integrate_coupled, integrate_single_layer, Integrator, LatentState};
use nalgebra::{DMatrix, DVector};

fn main() -> mlt::Result<()> {
    let n = 8;
    let ring = WeightedGraph::new(DMatrix::from_fn(n, n, |i, j| {
        if (i + 1) % n == j || (j + 1) % n == i {
            1.0
        } else {
            0.0
        }
    }))?;
    let lap = ring.laplacian(LaplacianKind::Combinatorial);
    let mut u0 = DVector::zeros(n);
    u0[0] = 1.0;
    for t in [0.1, 1.0, 10.0] {
        let u = integrate_single_layer(&u0, &lap, 1.0, t, Integrator::MatrixExponential)?;
        let r = integrate_single_layer(&u0, &lap, 1.0, t, Integrator::Rk4 { dt: 1e-3 })?;
        println!(
            "t={t:>4}: mass {:.12}  seed {:.4}  opposite {:.4}  |expm-rk4| {:.1e}",
            u.sum(),
            u[0],
            u[n / 2],
            (&u - &r).amax()
        );
    }

    // SC layer feeds the FC layer through an identity coupling.
    let id = DMatrix::identity(n, n);
    let op = assemble_from_laplacians(&lap, &lap, &DMatrix::zeros(n, n), &id, 0.0, 0.2, 1.0, 0.5)?;
    let s0 = LatentState::new(u0.clone(), DVector::zeros(n))?;
    let s1 = integrate_coupled(&s0, &op, 2.0, Integrator::MatrixExponential)?;
    println!("coupled: SC mass {:.4}, FC mass {:.4}", s1.u_s.sum(), s1.u_f.sum());
    Ok(())
}
