//! Small dense helpers shared by the FIM and optimizer code.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::wavefront::CVector;

/// `aᴴb`.
pub fn inner(a: &CVector, b: &CVector) -> Complex64 {
    a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum()
}

pub fn norm_sqr(a: &CVector) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum()
}

/// Inverse of a symmetric positive-definite matrix, or `None` when it is not
/// numerically positive definite. Jacobi scaling keeps badly scaled
/// coordinates (metres vs radians) from hurting the factorization.
pub fn spd_inverse(m: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let n = m.nrows();
    if n == 0 {
        return Some(DMatrix::zeros(0, 0));
    }
    let d: Vec<f64> = (0..n).map(|i| m[(i, i)]).collect();
    if d.iter().any(|&v| !(v > 0.0) || !v.is_finite()) {
        return None;
    }
    let s: Vec<f64> = d.iter().map(|v| 1.0 / v.sqrt()).collect();
    let scaled = DMatrix::from_fn(n, n, |i, j| 0.5 * (m[(i, j)] + m[(j, i)]) * s[i] * s[j]);
    let chol = scaled.cholesky()?;
    // Reject numerically singular matrices: reciprocal condition estimate from the factor.
    let l = chol.l();
    let (lo, hi) = (0..n).fold((f64::INFINITY, 0.0f64), |(lo, hi), i| {
        let v = l[(i, i)] * l[(i, i)];
        (lo.min(v), hi.max(v))
    });
    if lo <= 1e-13 * hi {
        return None;
    }
    let inv = chol.inverse();
    Some(DMatrix::from_fn(n, n, |i, j| inv[(i, j)] * s[i] * s[j]))
}

/// Orthonormal basis of the span of `vectors` by twice-applied modified
/// Gram–Schmidt. Directions whose residual falls below `rel_tol` of the
/// original norm are dropped.
pub fn orthonormal_basis(vectors: &[&CVector], rel_tol: f64) -> Vec<CVector> {
    let mut basis: Vec<CVector> = Vec::new();
    for v in vectors {
        let n0 = v.norm();
        if n0 == 0.0 {
            continue;
        }
        let mut r = (*v).clone();
        for _ in 0..2 {
            for q in &basis {
                let c = inner(q, &r);
                r -= q * c;
            }
        }
        let nr = r.norm();
        if nr > rel_tol * n0 {
            basis.push(r / Complex64::new(nr, 0.0));
        }
    }
    basis
}
