//! Small dense complex linear algebra used by the per-bin kernels.

use nalgebra::DMatrix;
use num_complex::Complex64;

pub type CMatrix = DMatrix<Complex64>;

pub fn zeros(rows: usize, cols: usize) -> CMatrix {
    CMatrix::zeros(rows, cols)
}

pub fn identity(n: usize) -> CMatrix {
    CMatrix::identity(n, n)
}

pub fn trace_re(a: &CMatrix) -> f64 {
    (0..a.nrows().min(a.ncols())).map(|i| a[(i, i)].re).sum()
}

/// `(A + A^H) / 2`.
pub fn hermitian_part(a: &CMatrix) -> CMatrix {
    (a + a.adjoint()).scale(0.5)
}

pub fn add_diagonal(a: &mut CMatrix, value: f64) {
    for i in 0..a.nrows().min(a.ncols()) {
        a[(i, i)] += Complex64::new(value, 0.0);
    }
}

/// Solves `A X = B` for Hermitian `A`: Cholesky first, full-pivot LU when
/// `A` is not numerically positive definite. `None` if `A` is singular.
pub fn hermitian_solve(a: &CMatrix, b: &CMatrix) -> Option<CMatrix> {
    let accurate = |x: &CMatrix| {
        x.iter().all(|v| v.re.is_finite() && v.im.is_finite())
            && (a * x - b).norm() <= 1e-8 * (a.norm() * x.norm() + b.norm())
    };
    if let Some(chol) = a.clone().cholesky() {
        let x = chol.solve(b);
        if accurate(&x) {
            return Some(x);
        }
    }
    let lu = a.clone().full_piv_lu();
    let x = lu.solve(b)?;
    accurate(&x).then_some(x)
}

/// Log-determinant and inverse of a Hermitian positive definite matrix.
pub fn hpd_logdet_inverse(a: &CMatrix) -> Option<(f64, CMatrix)> {
    let chol = a.clone().cholesky()?;
    let l = chol.l_dirty();
    let mut logdet = 0.0;
    for i in 0..a.nrows() {
        let d = l[(i, i)].re;
        if !(d > 0.0) || !d.is_finite() {
            return None;
        }
        logdet += 2.0 * d.ln();
    }
    Some((logdet, chol.inverse()))
}

/// `v^H A v` for Hermitian `A`, real part only.
pub fn quadratic_form(a: &CMatrix, v: &[Complex64]) -> f64 {
    let n = v.len();
    let mut acc = Complex64::new(0.0, 0.0);
    for i in 0..n {
        let mut row = Complex64::new(0.0, 0.0);
        for j in 0..n {
            row += a[(i, j)] * v[j];
        }
        acc += v[i].conj() * row;
    }
    acc.re
}
