//! Dense linear algebra used by the regressors: column-major matrices,
//! column-pivoted Householder QR, one-sided Jacobi SVD and Cholesky.

// index loops read closer to the factorization recurrences
#![allow(clippy::needless_range_loop)]

mod cholesky;
mod matrix;
mod qr;
mod svd;

pub use cholesky::Cholesky;
pub use matrix::{relative_diff, Matrix};
pub use qr::ColPivQr;
pub use svd::{rank_tolerance, JacobiSvd};

use crate::scalar::Scalar;

/// Rank and Moore–Penrose pseudoinverse of a tall matrix.
#[derive(Debug, Clone)]
pub struct RankRevealed<S> {
    pub rank: usize,
    pub singular_values: Vec<S>,
    pub pinv: Matrix<S>,
}

/// Factors `A = H R Pᵀ` by pivoted QR, then `R = U Σ Vᵀ` by Jacobi, giving
/// `A⁺ = P V Σ⁺ Uᵀ Hᵀ`. Singular values at or below
/// `max(rows, cols) · ε · σ_max` are treated as zero.
///
/// Running Jacobi on the small `N x N` triangular factor instead of the
/// `T x N` input keeps the cost dominated by one QR.
pub fn rank_revealing_pinv<S: Scalar>(a: &Matrix<S>) -> RankRevealed<S> {
    let (m, n) = a.shape();
    assert!(m >= n, "rank_revealing_pinv expects rows >= cols");
    let qr = ColPivQr::new(a);
    let r = qr.r();
    let svd = JacobiSvd::new(&r);
    let tol = rank_tolerance(m, n, svd.sigma_max());
    let rank = svd.rank(tol);

    // core = V Σ⁺ Uᵀ (n x n), the pseudoinverse of R
    let mut core = Matrix::zeros(n, n);
    for k in 0..rank {
        let inv = S::one() / svd.sigma[k];
        let vk = svd.v.column(k);
        let uk = svd.u.column(k);
        for j in 0..n {
            let f = uk[j] * inv;
            if f != S::zero() {
                crate::scalar::axpy(f, vk, core.column_mut(j));
            }
        }
    }

    // pinv(A)ᵀ = H [coreᵀ Pᵀ ; 0]; build it column by column, then transpose.
    let perm = qr.permutation();
    let mut pinv_t = Matrix::zeros(m, n);
    for (i, &orig) in perm.iter().enumerate() {
        // column `orig` of pinv(A)ᵀ is H · [row i of core]ᵀ padded with zeros
        let col = pinv_t.column_mut(orig);
        for j in 0..n {
            col[j] = core[(i, j)];
        }
        qr.apply_q(col);
    }

    RankRevealed { rank, singular_values: svd.sigma, pinv: pinv_t.transpose() }
}

/// Singular values and numerical rank without forming the pseudoinverse.
pub fn numerical_rank<S: Scalar>(a: &Matrix<S>) -> (usize, Vec<S>) {
    let (m, n) = a.shape();
    let svd = if m >= n { JacobiSvd::new(&ColPivQr::new(a).r()) } else { JacobiSvd::new(&a.transpose()) };
    let tol = rank_tolerance(m, n, svd.sigma_max());
    (svd.rank(tol), svd.sigma)
}
