use crate::linalg::Matrix;
use crate::scalar::{dot, Scalar};

/// Householder QR with column pivoting, `A P = H R`.
///
/// Reflectors are stored LAPACK-style below the diagonal of `packed` with an
/// implicit unit leading entry; `R` occupies the upper triangle. Column
/// pivoting orders `|R[k,k]|` non-increasingly, which makes the leading block
/// of `R` rank-revealing and drives the basic least-squares solution.
#[derive(Debug, Clone)]
pub struct ColPivQr<S> {
    packed: Matrix<S>,
    tau: Vec<S>,
    perm: Vec<usize>,
}

impl<S: Scalar> ColPivQr<S> {
    pub fn new(a: &Matrix<S>) -> Self {
        let (m, n) = a.shape();
        let mut packed = a.clone();
        let steps = m.min(n);
        let mut tau = vec![S::zero(); steps];
        let mut perm: Vec<usize> = (0..n).collect();

        let mut norms: Vec<S> = packed.columns().map(crate::scalar::norm2).collect();
        let mut ref_norms = norms.clone();
        let recompute_below = S::epsilon().sqrt();

        for k in 0..steps {
            // pivot: largest remaining partial column norm
            let mut piv = k;
            for j in k + 1..n {
                if norms[j] > norms[piv] {
                    piv = j;
                }
            }
            if piv != k {
                swap_columns(&mut packed, k, piv);
                norms.swap(k, piv);
                ref_norms.swap(k, piv);
                perm.swap(k, piv);
            }

            tau[k] = make_reflector(&mut packed.column_mut(k)[k..]);

            if tau[k] != S::zero() {
                let (head, tail) = packed.as_mut_slice().split_at_mut((k + 1) * m);
                let v = &head[k * m + k..k * m + m];
                for col in tail.chunks_exact_mut(m) {
                    apply_reflector(v, tau[k], &mut col[k..]);
                }
            }

            // downdate trailing partial norms
            for j in k + 1..n {
                if norms[j] == S::zero() {
                    continue;
                }
                let r = packed[(k, j)].abs() / norms[j];
                let shrink = (S::one() - r * r).max(S::zero());
                let updated = norms[j] * shrink.sqrt();
                if updated <= recompute_below * ref_norms[j] {
                    let fresh = crate::scalar::norm2(&packed.column(j)[k + 1..]);
                    norms[j] = fresh;
                    ref_norms[j] = fresh;
                } else {
                    norms[j] = updated;
                }
            }
        }

        Self { packed, tau, perm }
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.packed.rows()
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.packed.cols()
    }

    /// `perm[i]` is the original column that ended up at position `i`.
    pub fn permutation(&self) -> &[usize] {
        &self.perm
    }

    pub fn r_diagonal(&self) -> Vec<S> {
        (0..self.tau.len()).map(|k| self.packed[(k, k)]).collect()
    }

    /// Upper-triangular factor, `min(m, n) x n`.
    pub fn r(&self) -> Matrix<S> {
        let p = self.tau.len();
        let n = self.cols();
        let mut r = Matrix::zeros(p, n);
        for j in 0..n {
            for i in 0..(j + 1).min(p) {
                r[(i, j)] = self.packed[(i, j)];
            }
        }
        r
    }

    /// Overwrites `b` with `Hᵀ b`.
    pub fn apply_qt(&self, b: &mut [S]) {
        let m = self.rows();
        assert_eq!(b.len(), m, "apply_qt length");
        for k in 0..self.tau.len() {
            if self.tau[k] != S::zero() {
                apply_reflector(&self.packed.column(k)[k..], self.tau[k], &mut b[k..]);
            }
        }
    }

    /// Overwrites `b` with `H b`.
    pub fn apply_q(&self, b: &mut [S]) {
        let m = self.rows();
        assert_eq!(b.len(), m, "apply_q length");
        for k in (0..self.tau.len()).rev() {
            if self.tau[k] != S::zero() {
                apply_reflector(&self.packed.column(k)[k..], self.tau[k], &mut b[k..]);
            }
        }
    }

    /// Basic least-squares solution of `A x ≈ b` using the leading `rank`
    /// pivoted columns. All entries outside those pivots are exactly zero.
    pub fn solve_basic(&self, b: &[S], rank: usize) -> Vec<S> {
        let n = self.cols();
        let rank = rank.min(self.tau.len());
        let mut work = b.to_vec();
        self.apply_qt(&mut work);

        // back substitution on R[..rank, ..rank]
        let mut z = vec![S::zero(); rank];
        for i in (0..rank).rev() {
            let mut acc = work[i];
            for j in i + 1..rank {
                acc -= self.packed[(i, j)] * z[j];
            }
            z[i] = acc / self.packed[(i, i)];
        }

        let mut x = vec![S::zero(); n];
        for (i, zi) in z.into_iter().enumerate() {
            x[self.perm[i]] = zi;
        }
        x
    }
}

fn swap_columns<S: Scalar>(m: &mut Matrix<S>, a: usize, b: usize) {
    let rows = m.rows();
    let (lo, hi) = if a < b { (a, b) } else { (b, a) };
    let data = m.as_mut_slice();
    let (left, right) = data.split_at_mut(hi * rows);
    left[lo * rows..(lo + 1) * rows].swap_with_slice(&mut right[..rows]);
}

/// Turns `x` into the reflector `v` (with `v[0]` replaced by `beta`) and
/// returns `tau` such that `(I - tau v vᵀ) x = beta e₁`.
fn make_reflector<S: Scalar>(x: &mut [S]) -> S {
    let tail_norm = crate::scalar::norm2(&x[1..]);
    if tail_norm == S::zero() {
        return S::zero();
    }
    let x0 = x[0];
    let norm = x0.hypot(tail_norm);
    let beta = if x0 >= S::zero() { -norm } else { norm };
    let scale = S::one() / (x0 - beta);
    for v in &mut x[1..] {
        *v *= scale;
    }
    x[0] = beta;
    (beta - x0) / beta
}

/// `y ← (I - tau v vᵀ) y` with `v[0]` taken as one.
#[inline]
fn apply_reflector<S: Scalar>(v: &[S], tau: S, y: &mut [S]) {
    let w = y[0] + dot(&v[1..], &y[1..]);
    let tw = tau * w;
    y[0] -= tw;
    for (yi, vi) in y[1..].iter_mut().zip(&v[1..]) {
        *yi -= tw * *vi;
    }
}
