//! Matrix exponential by scaling and squaring with diagonal Padé
//! approximants, and its Fréchet derivative.
//!
//! The Fréchet derivative `L(A, E)` is the upper-right block of
//! `exp([[A, E], [0, A]])`. Instead of exponentiating the `2n x 2n` augmented
//! matrix directly, the same Padé/squaring pipeline runs on the
//! block-upper-triangular pair `(X, L)`, whose products cost three `n x n`
//! multiplications instead of eight.

use nalgebra::DMatrix;

use crate::error::{MltError, Result};

const THETA: [(usize, f64); 5] = [
    (3, 1.495_585_217_958_292e-2),
    (5, 2.539_398_330_063_23e-1),
    (7, 9.504_178_996_162_932e-1),
    (9, 2.097_847_961_257_068),
    (13, 5.371_920_351_148_152),
];

const B3: [f64; 4] = [120.0, 60.0, 12.0, 1.0];
const B5: [f64; 6] = [30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0];
const B7: [f64; 8] = [
    17_297_280.0,
    8_648_640.0,
    1_995_840.0,
    277_200.0,
    25_200.0,
    1_512.0,
    56.0,
    1.0,
];
const B9: [f64; 10] = [
    17_643_225_600.0,
    8_821_612_800.0,
    2_075_673_600.0,
    302_702_400.0,
    30_270_240.0,
    2_162_160.0,
    110_880.0,
    3_960.0,
    90.0,
    1.0,
];
const B13: [f64; 14] = [
    64_764_752_532_480_000.0,
    32_382_376_266_240_000.0,
    7_771_770_303_897_600.0,
    1_187_353_796_428_800.0,
    129_060_195_264_000.0,
    10_559_470_521_600.0,
    670_442_572_800.0,
    33_522_128_640.0,
    1_323_241_920.0,
    40_840_800.0,
    960_960.0,
    16_380.0,
    182.0,
    1.0,
];

/// Past this many squarings `exp(A)` overflows for any matrix with a
/// positive eigenvalue of comparable size; refuse instead of returning inf.
const MAX_SQUARINGS: i32 = 60;

/// Operations the Padé pipeline needs. Implemented for plain matrices and for
/// the block-triangular Fréchet pair.
trait PadeAlgebra: Clone {
    fn identity_like(&self) -> Self;
    fn mul(&self, rhs: &Self) -> Self;
    fn axpy(&mut self, alpha: f64, x: &Self);
    fn scale_mut(&mut self, alpha: f64);
    /// `q^{-1} p`
    fn solve(q: &Self, p: &Self) -> Option<Self>;
    fn all_finite(&self) -> bool;
}

impl PadeAlgebra for DMatrix<f64> {
    fn identity_like(&self) -> Self {
        DMatrix::identity(self.nrows(), self.ncols())
    }
    fn mul(&self, rhs: &Self) -> Self {
        self * rhs
    }
    fn axpy(&mut self, alpha: f64, x: &Self) {
        *self += x * alpha;
    }
    fn scale_mut(&mut self, alpha: f64) {
        *self *= alpha;
    }
    fn solve(q: &Self, p: &Self) -> Option<Self> {
        q.clone().lu().solve(p)
    }
    fn all_finite(&self) -> bool {
        self.iter().all(|v| v.is_finite())
    }
}

/// `[[x, l], [0, x]]` stored as its two distinct blocks.
#[derive(Clone)]
struct FrechetPair {
    x: DMatrix<f64>,
    l: DMatrix<f64>,
}

impl PadeAlgebra for FrechetPair {
    fn identity_like(&self) -> Self {
        let n = self.x.nrows();
        FrechetPair {
            x: DMatrix::identity(n, n),
            l: DMatrix::zeros(n, n),
        }
    }
    fn mul(&self, rhs: &Self) -> Self {
        let x = &self.x * &rhs.x;
        let mut l = &self.x * &rhs.l;
        l.gemm(1.0, &self.l, &rhs.x, 1.0);
        FrechetPair { x, l }
    }
    fn axpy(&mut self, alpha: f64, other: &Self) {
        self.x += &other.x * alpha;
        self.l += &other.l * alpha;
    }
    fn scale_mut(&mut self, alpha: f64) {
        self.x *= alpha;
        self.l *= alpha;
    }
    fn solve(q: &Self, p: &Self) -> Option<Self> {
        let lu = q.x.clone().lu();
        let x = lu.solve(&p.x)?;
        let rhs = &p.l - &q.l * &x;
        let l = lu.solve(&rhs)?;
        Some(FrechetPair { x, l })
    }
    fn all_finite(&self) -> bool {
        self.x.iter().chain(self.l.iter()).all(|v| v.is_finite())
    }
}

pub fn norm1(a: &DMatrix<f64>) -> f64 {
    a.column_iter()
        .map(|c| c.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Pick the Padé degree and the number of squarings for a given 1-norm.
fn pade_plan(norm: f64) -> (usize, i32) {
    for &(m, theta) in &THETA[..4] {
        if norm <= theta {
            return (m, 0);
        }
    }
    let theta13 = THETA[4].1;
    let s = (norm / theta13).log2().ceil().max(0.0) as i32;
    (13, s)
}

fn pade_odd_even<T: PadeAlgebra>(a: &T, coeffs: &[f64]) -> (T, T) {
    // U = A * sum_{k odd} b_k A^{k-1},  V = sum_{k even} b_k A^k
    let ident = a.identity_like();
    let a2 = a.mul(a);
    let mut powers = vec![ident.clone(), a2.clone()];
    let top = coeffs.len() - 1;
    while powers.len() - 1 < top / 2 {
        let next = powers.last().unwrap().mul(&a2);
        powers.push(next);
    }
    let mut u_inner = ident.clone();
    u_inner.scale_mut(coeffs[1]);
    let mut v = ident;
    v.scale_mut(coeffs[0]);
    for (k, p) in powers.iter().enumerate().skip(1) {
        if 2 * k + 1 <= top {
            u_inner.axpy(coeffs[2 * k + 1], p);
        }
        if 2 * k <= top {
            v.axpy(coeffs[2 * k], p);
        }
    }
    (a.mul(&u_inner), v)
}

fn pade13<T: PadeAlgebra>(a: &T) -> (T, T) {
    let b = &B13;
    let ident = a.identity_like();
    let a2 = a.mul(a);
    let a4 = a2.mul(&a2);
    let a6 = a4.mul(&a2);

    let mut w1 = a6.clone();
    w1.scale_mut(b[13]);
    w1.axpy(b[11], &a4);
    w1.axpy(b[9], &a2);
    let mut w2 = a6.clone();
    w2.scale_mut(b[7]);
    w2.axpy(b[5], &a4);
    w2.axpy(b[3], &a2);
    w2.axpy(b[1], &ident);
    let mut inner_u = a6.mul(&w1);
    inner_u.axpy(1.0, &w2);
    let u = a.mul(&inner_u);

    let mut z1 = a6.clone();
    z1.scale_mut(b[12]);
    z1.axpy(b[10], &a4);
    z1.axpy(b[8], &a2);
    let mut v = a6.mul(&z1);
    v.axpy(b[6], &a6);
    v.axpy(b[4], &a4);
    v.axpy(b[2], &a2);
    v.axpy(b[0], &ident);
    (u, v)
}

fn scaling_and_squaring<T: PadeAlgebra>(mut a: T, norm: f64) -> Result<T> {
    if !norm.is_finite() {
        return Err(MltError::NonFinite("matrix exponential input".into()));
    }
    let (m, s) = pade_plan(norm);
    if s > MAX_SQUARINGS {
        return Err(MltError::ExpmOverflow { norm });
    }
    if s > 0 {
        a.scale_mut(0.5f64.powi(s));
    }
    let (u, v) = match m {
        3 => pade_odd_even(&a, &B3),
        5 => pade_odd_even(&a, &B5),
        7 => pade_odd_even(&a, &B7),
        9 => pade_odd_even(&a, &B9),
        _ => pade13(&a),
    };
    let mut p = v.clone();
    p.axpy(1.0, &u);
    let mut q = v;
    q.axpy(-1.0, &u);
    let mut r = T::solve(&q, &p)
        .ok_or_else(|| MltError::Singular("Padé denominator in matrix exponential".into()))?;
    for _ in 0..s {
        r = r.mul(&r);
    }
    if !r.all_finite() {
        return Err(MltError::ExpmOverflow { norm });
    }
    Ok(r)
}

/// `exp(A)` for a square matrix.
pub fn matrix_exponential(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    check_square(a)?;
    let norm = norm1(a);
    scaling_and_squaring(a.clone(), norm)
}

/// `exp(A)` for symmetric `A` through its eigendecomposition.
pub fn matrix_exponential_symmetric(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    check_square(a)?;
    let eig = a.clone().symmetric_eigen();
    if eig.eigenvalues.iter().any(|&l| l > 700.0) {
        return Err(MltError::ExpmOverflow { norm: norm1(a) });
    }
    let v = &eig.eigenvectors;
    let mut scaled = v.clone();
    for (j, mut col) in scaled.column_iter_mut().enumerate() {
        col *= eig.eigenvalues[j].exp();
    }
    Ok(scaled * v.transpose())
}

/// Returns `(exp(A), L(A, E))` where `L` is the Fréchet derivative of the
/// exponential at `A` in direction `E`.
pub fn expm_frechet(a: &DMatrix<f64>, e: &DMatrix<f64>) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    check_square(a)?;
    if e.shape() != a.shape() {
        return Err(MltError::Dimension {
            what: "Fréchet direction".into(),
            expected: a.nrows(),
            got: e.nrows(),
        });
    }
    // L is linear in E, so the squaring count only depends on A.
    let norm = norm1(a);
    let pair = FrechetPair {
        x: a.clone(),
        l: e.clone(),
    };
    let r = scaling_and_squaring(pair, norm)?;
    Ok((r.x, r.l))
}

fn check_square(a: &DMatrix<f64>) -> Result<()> {
    if a.nrows() != a.ncols() {
        return Err(MltError::Dimension {
            what: "square matrix columns".into(),
            expected: a.nrows(),
            got: a.ncols(),
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn max_abs_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
        (a - b).amax()
    }

    #[test]
    fn zero_matrix_gives_identity() {
        let z = DMatrix::<f64>::zeros(4, 4);
        let e = matrix_exponential(&z).unwrap();
        assert_eq!(e, DMatrix::identity(4, 4));
    }

    #[test]
    fn diagonal_matrix() {
        let a = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1.5, -2.0, 0.25]));
        let e = matrix_exponential(&a).unwrap();
        for (i, v) in [1.5f64, -2.0, 0.25].iter().enumerate() {
            assert!((e[(i, i)] - v.exp()).abs() < 1e-14 * v.exp().max(1.0));
        }
        assert!(e[(0, 1)].abs() < 1e-15);
    }

    #[test]
    fn nilpotent_closed_form() {
        let a = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]);
        let e = matrix_exponential(&a).unwrap();
        let want = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 0.0, 1.0]);
        assert!(max_abs_diff(&e, &want) < 1e-15);
    }

    #[test]
    fn rotation_generator_large_norm() {
        // exp([[0, w], [-w, 0]]) = [[cos w, sin w], [-sin w, cos w]]
        let w = 37.0f64;
        let a = DMatrix::from_row_slice(2, 2, &[0.0, w, -w, 0.0]);
        let e = matrix_exponential(&a).unwrap();
        let want = DMatrix::from_row_slice(2, 2, &[w.cos(), w.sin(), -w.sin(), w.cos()]);
        assert!(max_abs_diff(&e, &want) < 1e-12);
    }

    #[test]
    fn symmetric_route_agrees_with_pade() {
        let a = DMatrix::from_fn(6, 6, |i, j| ((i + 2 * j) % 5) as f64 * 0.3 - 0.5);
        let s = &a + a.transpose();
        let e1 = matrix_exponential(&s).unwrap();
        let e2 = matrix_exponential_symmetric(&s).unwrap();
        assert!(max_abs_diff(&e1, &e2) < 1e-10 * e1.amax());
    }

    #[test]
    fn overflow_is_reported() {
        let a = DMatrix::from_diagonal_element(2, 2, 1e300);
        match matrix_exponential(&a) {
            Err(MltError::ExpmOverflow { norm }) => assert!(norm >= 1e300),
            other => panic!("expected overflow, got {other:?}"),
        }
    }

    #[test]
    fn frechet_matches_augmented_exponential() {
        // Independent route: exponentiate the 2n x 2n block matrix outright.
        let n = 5;
        let a = DMatrix::from_fn(n, n, |i, j| ((3 * i + 7 * j) % 11) as f64 / 4.0 - 1.3);
        let e = DMatrix::from_fn(n, n, |i, j| ((5 * i + j) % 7) as f64 / 3.0 - 1.0);
        let mut aug = DMatrix::zeros(2 * n, 2 * n);
        aug.view_mut((0, 0), (n, n)).copy_from(&a);
        aug.view_mut((n, n), (n, n)).copy_from(&a);
        aug.view_mut((0, n), (n, n)).copy_from(&e);
        let big = matrix_exponential(&aug).unwrap();
        let (ex, l) = expm_frechet(&a, &e).unwrap();
        let scale = big.amax();
        assert!(max_abs_diff(&ex, &big.view((0, 0), (n, n)).into_owned()) < 1e-12 * scale);
        assert!(max_abs_diff(&l, &big.view((0, n), (n, n)).into_owned()) < 1e-12 * scale);
    }

    #[test]
    fn frechet_matches_central_differences() {
        let n = 4;
        let a = DMatrix::from_fn(n, n, |i, j| ((i * 5 + j * 3) % 7) as f64 / 5.0 - 0.6);
        let e = DMatrix::from_fn(n, n, |i, j| if i == j { 0.5 } else { (i as f64 - j as f64) / 7.0 });
        let h = 1e-6;
        let plus = matrix_exponential(&(&a + &e * h)).unwrap();
        let minus = matrix_exponential(&(&a - &e * h)).unwrap();
        let fd = (plus - minus) / (2.0 * h);
        let (_, l) = expm_frechet(&a, &e).unwrap();
        assert!(max_abs_diff(&fd, &l) < 1e-7 * l.amax().max(1.0));
    }
}
