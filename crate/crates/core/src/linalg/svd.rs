use crate::linalg::Matrix;
use crate::scalar::{dot, norm2, Scalar};

const MAX_SWEEPS: usize = 80;

/// Thin SVD `A = U diag(σ) Vᵀ` of a matrix with `rows >= cols`, computed by
/// one-sided (Hestenes) Jacobi rotations. Singular values are sorted
/// non-increasingly.
#[derive(Debug, Clone)]
pub struct JacobiSvd<S> {
    pub u: Matrix<S>,
    pub sigma: Vec<S>,
    pub v: Matrix<S>,
}

impl<S: Scalar> JacobiSvd<S> {
    pub fn new(a: &Matrix<S>) -> Self {
        let (m, n) = a.shape();
        assert!(m >= n, "JacobiSvd expects rows >= cols, got {m}x{n}");
        let mut w = a.clone();
        let mut v = Matrix::identity(n);
        let tol = S::epsilon() * S::from_usize_lossy(m).sqrt();

        for _ in 0..MAX_SWEEPS {
            let mut rotated = false;
            for p in 0..n {
                for q in p + 1..n {
                    let alpha = dot(w.column(p), w.column(p));
                    let beta = dot(w.column(q), w.column(q));
                    let gamma = dot(w.column(p), w.column(q));
                    if gamma == S::zero() || gamma.abs() <= tol * (alpha * beta).sqrt() {
                        continue;
                    }
                    rotated = true;
                    let zeta = (beta - alpha) / (gamma + gamma);
                    let t = zeta.signum() / (zeta.abs() + (S::one() + zeta * zeta).sqrt());
                    let c = S::one() / (S::one() + t * t).sqrt();
                    let s = c * t;
                    rotate(&mut w, p, q, c, s);
                    rotate(&mut v, p, q, c, s);
                }
            }
            if !rotated {
                break;
            }
        }

        let mut sigma: Vec<S> = w.columns().map(norm2).collect();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&i, &j| sigma[j].partial_cmp(&sigma[i]).unwrap_or(std::cmp::Ordering::Equal));

        let mut u = Matrix::zeros(m, n);
        let mut v_sorted = Matrix::zeros(n, n);
        for (dst, &src) in order.iter().enumerate() {
            let s = sigma[src];
            if s > S::zero() {
                for (o, x) in u.column_mut(dst).iter_mut().zip(w.column(src)) {
                    *o = *x / s;
                }
            }
            v_sorted.column_mut(dst).copy_from_slice(v.column(src));
        }
        sigma = order.iter().map(|&i| sigma[i]).collect();

        Self { u, sigma, v: v_sorted }
    }

    pub fn sigma_max(&self) -> S {
        self.sigma.first().copied().unwrap_or_else(S::zero)
    }

    /// Number of singular values strictly above `tol`.
    pub fn rank(&self, tol: S) -> usize {
        self.sigma.iter().take_while(|s| **s > tol).count()
    }
}

fn rotate<S: Scalar>(m: &mut Matrix<S>, p: usize, q: usize, c: S, s: S) {
    let rows = m.rows();
    let data = m.as_mut_slice();
    let (left, right) = data.split_at_mut(q * rows);
    let cp = &mut left[p * rows..(p + 1) * rows];
    let cq = &mut right[..rows];
    for (x, y) in cp.iter_mut().zip(cq.iter_mut()) {
        let xp = *x;
        let yq = *y;
        *x = c * xp - s * yq;
        *y = s * xp + c * yq;
    }
}

/// Conventional numerical-rank threshold `max(rows, cols) · ε · σ_max`.
pub fn rank_tolerance<S: Scalar>(rows: usize, cols: usize, sigma_max: S) -> S {
    S::from_usize_lossy(rows.max(cols)) * S::epsilon() * sigma_max
}
