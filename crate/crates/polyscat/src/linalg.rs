//! Dense complex least squares with truncated-SVD regularization.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

/// Result of a truncated-SVD least-squares solve.
pub struct TsvdSolution {
    pub weights: DVector<Complex64>,
    /// retained rank after truncation
    pub rank: usize,
    pub sigma_max: f64,
    /// smallest retained singular value
    pub sigma_min_kept: f64,
}

impl TsvdSolution {
    pub fn condition(&self) -> f64 {
        if self.sigma_min_kept > 0.0 {
            self.sigma_max / self.sigma_min_kept
        } else {
            f64::INFINITY
        }
    }
}

/// Real 2m x 2n embedding [[Re A, -Im A], [Im A, Re A]] of a complex matrix.
///
/// The embedding is used because the real-valued SVD is substantially more
/// accurate than the complex one; its singular values are those of A, each
/// doubled, and least squares on the embedding solves the complex problem
/// exactly (the embedded normal equations represent A^H A and A^H b, so the
/// minimizer keeps the complex structure).
fn real_embedding(a: &DMatrix<Complex64>) -> DMatrix<f64> {
    let (m, n) = a.shape();
    DMatrix::from_fn(2 * m, 2 * n, |i, j| {
        let z = a[(i % m, j % n)];
        match (i >= m, j >= n) {
            (false, false) | (true, true) => z.re,
            (false, true) => -z.im,
            (true, false) => z.im,
        }
    })
}

/// Minimum-norm least squares min ||A w - b|| with singular values below
/// `rel_cutoff * sigma_max` discarded.
pub fn tsvd_least_squares(
    a: DMatrix<Complex64>,
    b: &DVector<Complex64>,
    rel_cutoff: f64,
) -> TsvdSolution {
    let (m, n) = a.shape();
    let ar = real_embedding(&a);
    let br = DVector::from_fn(2 * m, |i, _| if i < m { b[i].re } else { b[i - m].im });
    let svd = ar.svd(true, true);
    let u = svd.u.as_ref().expect("svd with u");
    let vt = svd.v_t.as_ref().expect("svd with v_t");
    let sigma = &svd.singular_values;
    let sigma_max = sigma.iter().cloned().fold(0.0_f64, f64::max);
    let cutoff = rel_cutoff * sigma_max;
    let mut wr = DVector::from_element(2 * n, 0.0);
    let mut rank_real: usize = 0;
    let mut sigma_min_kept = sigma_max;
    let utb = u.transpose() * br;
    for (i, &s) in sigma.iter().enumerate() {
        if s > cutoff && s > 0.0 {
            rank_real += 1;
            sigma_min_kept = sigma_min_kept.min(s);
            let coeff = utb[i] / s;
            for j in 0..2 * n {
                wr[j] += vt[(i, j)] * coeff;
            }
        }
    }
    let weights = DVector::from_fn(n, |j, _| Complex64::new(wr[j], wr[n + j]));
    TsvdSolution {
        weights,
        // embedded singular values come in equal pairs
        rank: rank_real.div_ceil(2),
        sigma_max,
        sigma_min_kept,
    }
}

/// Smallest singular value of a dense complex matrix.
pub fn smallest_singular_value(a: DMatrix<Complex64>) -> f64 {
    singular_extremes(&a).0
}

/// (smallest, largest) singular values of a dense complex matrix.
pub fn singular_extremes(a: &DMatrix<Complex64>) -> (f64, f64) {
    let svd = real_embedding(a).svd(false, false);
    let smin = svd.singular_values.iter().cloned().fold(f64::MAX, f64::min);
    let smax = svd.singular_values.iter().cloned().fold(0.0_f64, f64::max);
    (smin, smax)
}

/// Determinant of a small dense complex matrix by LU.
pub fn determinant(a: &DMatrix<Complex64>) -> Complex64 {
    a.clone().lu().determinant()
}
