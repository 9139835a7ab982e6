//! Class-specific regressors and the least-squares machinery built on them.
//!
//! A regressor `Q` (T x N) holds one class's gallery vectors as columns. Test
//! vectors are reconstructed as their orthogonal projection onto `col(Q)` and
//! scored by the Euclidean norm of the residual.

use std::sync::OnceLock;

use rand::distr::{Distribution, Uniform};

use crate::error::{Error, Result};
use crate::linalg::{numerical_rank, rank_revealing_pinv, Cholesky, ColPivQr, Matrix};
use crate::preprocess::ImageVector;
use crate::scalar::{norm2, Scalar};
use crate::seed::rng_from_seed;

/// Largest change the perturbation remedy may apply to any entry.
pub const PERTURBATION_BOUND: f64 = 0.5;

#[derive(Debug, Clone)]
pub struct Regressor<S> {
    class_id: u32,
    q: Matrix<S>,
    rank: usize,
    pinv: Option<Matrix<S>>,
    perturbation_seed: Option<u64>,
    qr: OnceLock<ColPivQr<S>>,
}

impl<S: PartialEq> PartialEq for Regressor<S> {
    fn eq(&self, other: &Self) -> bool {
        self.class_id == other.class_id
            && self.q == other.q
            && self.rank == other.rank
            && self.pinv == other.pinv
            && self.perturbation_seed == other.perturbation_seed
    }
}

/// `Γ` (N x M): column `m` holds the regression coefficients of test vector `m`.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterMatrix<S>(pub Matrix<S>);

impl<S: Scalar> ParameterMatrix<S> {
    pub fn matrix(&self) -> &Matrix<S> {
        &self.0
    }

    /// Nonzero entries in column `m`.
    pub fn nonzeros(&self, m: usize) -> usize {
        self.0.column(m).iter().filter(|v| **v != S::zero()).count()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Reconstruction<S> {
    /// `X̂` (T x M), the projections of the test columns onto `col(Q)`.
    pub x_hat: Matrix<S>,
    /// `d[m] = ‖x_m − x̂_m‖₂`
    pub distances: Vec<S>,
}

/// Which least-squares route [`Regressor::reconstruct_with`] takes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SolvePath {
    /// Cached pseudoinverse when present, otherwise the QR basic solution.
    #[default]
    Auto,
    /// `X̂ = Q (Q̃ X)`; the pseudoinverse is computed on the fly if not cached.
    Pinv,
    /// Basic solution from the column-pivoted QR factorization.
    Qr,
    /// `Γ = (QᵀQ)⁻¹ Qᵀ X` in matrix form.
    Normal,
    /// Normal equations solved one test vector at a time.
    NormalPerVector,
}

/// Gram-matrix factorization reused across per-vector normal-equation solves.
#[derive(Debug, Clone)]
pub struct NormalEquations<'a, S> {
    q: &'a Matrix<S>,
    chol: Cholesky<S>,
}

impl<S: Scalar> NormalEquations<'_, S> {
    /// `γ = (QᵀQ)⁻¹ Qᵀ x`
    pub fn gamma(&self, x: &[S]) -> Result<Vec<S>> {
        let mut g = self.q.tr_mul_vec(x)?;
        self.chol.solve_in_place(&mut g);
        Ok(g)
    }

    /// `x̂ = Q γ`
    pub fn reconstruct_vector(&self, x: &[S]) -> Result<Vec<S>> {
        self.q.mul_vec(&self.gamma(x)?)
    }
}

/// Builds `Q = [q₁ … q_N]` from equal-length image vectors and records its numerical rank.
pub fn build_regressor<S: Scalar>(images: &[ImageVector<S>], class_id: u32) -> Result<Regressor<S>> {
    if images.is_empty() {
        return Err(Error::InvalidInput(format!("class {class_id}: regressor needs at least one image")));
    }
    let cols: Vec<&[S]> = images.iter().map(ImageVector::values).collect();
    let q = Matrix::from_columns(&cols)?;
    Regressor::from_matrix(q, class_id)
}

impl<S: Scalar> Regressor<S> {
    pub fn from_matrix(q: Matrix<S>, class_id: u32) -> Result<Self> {
        let (t, n) = q.shape();
        if n == 0 || t == 0 {
            return Err(Error::InvalidInput(format!("class {class_id}: regressor must be non-empty")));
        }
        if t < n {
            return Err(Error::TooFewPixels { rows: t, cols: n });
        }
        if q.as_slice().iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!("class {class_id}: regressor has non-finite entries")));
        }
        let (rank, _) = numerical_rank(&q);
        Ok(Self { class_id, q, rank, pinv: None, perturbation_seed: None, qr: OnceLock::new() })
    }

    /// Reassembles a regressor from stored parts without refactoring `Q`.
    pub(crate) fn from_parts(
        class_id: u32,
        q: Matrix<S>,
        rank: usize,
        pinv: Option<Matrix<S>>,
        perturbation_seed: Option<u64>,
    ) -> Result<Self> {
        let (t, n) = q.shape();
        if n == 0 || t < n || rank > n {
            return Err(Error::Format(format!("class {class_id}: inconsistent regressor shape {t}x{n}, rank {rank}")));
        }
        if let Some(p) = &pinv {
            if p.shape() != (n, t) {
                return Err(Error::Format(format!("class {class_id}: pseudoinverse shape {:?}", p.shape())));
            }
        }
        Ok(Self { class_id, q, rank, pinv, perturbation_seed, qr: OnceLock::new() })
    }

    #[inline]
    pub fn class_id(&self) -> u32 {
        self.class_id
    }

    #[inline]
    pub fn matrix(&self) -> &Matrix<S> {
        &self.q
    }

    /// `T`, the image vector length.
    #[inline]
    pub fn rows(&self) -> usize {
        self.q.rows()
    }

    /// `N`, the number of gallery images.
    #[inline]
    pub fn cols(&self) -> usize {
        self.q.cols()
    }

    #[inline]
    pub fn rank(&self) -> usize {
        self.rank
    }

    #[inline]
    pub fn is_rank_deficient(&self) -> bool {
        self.rank < self.cols()
    }

    pub fn pinv(&self) -> Option<&Matrix<S>> {
        self.pinv.as_ref()
    }

    pub fn is_perturbed(&self) -> bool {
        self.perturbation_seed.is_some()
    }

    pub fn perturbation_seed(&self) -> Option<u64> {
        self.perturbation_seed
    }

    fn qr(&self) -> &ColPivQr<S> {
        self.qr.get_or_init(|| ColPivQr::new(&self.q))
    }

    /// `Q* = Q + ε`, every `ε` uniform on `[−0.5, 0.5]` from `seed`. Meant for
    /// pixel-scale matrices. Any cached pseudoinverse is dropped.
    pub fn perturb(&self, seed: u64) -> Result<Self> {
        let mut rng = rng_from_seed(seed);
        let noise = Uniform::new_inclusive(-PERTURBATION_BOUND, PERTURBATION_BOUND)
            .map_err(|e| Error::InvalidConfig(e.to_string()))?;
        let data: Vec<S> = self.q.as_slice().iter().map(|v| *v + S::lit(noise.sample(&mut rng))).collect();
        let q = Matrix::from_col_major(self.rows(), self.cols(), data)?;
        let mut out = Self::from_matrix(q, self.class_id)?;
        out.perturbation_seed = Some(seed);
        Ok(out)
    }

    /// Caches `Q̃ = Q⁺` and refreshes the rank from the same factorization.
    pub fn precompute_pinv(mut self) -> Self {
        let rr = rank_revealing_pinv(&self.q);
        self.rank = rr.rank;
        self.pinv = Some(rr.pinv);
        self
    }

    /// Replaces the columns by `f(column)`, keeping class id and perturbation seed.
    pub(crate) fn map_columns<F>(&self, mut f: F) -> Result<Self>
    where
        F: FnMut(&[S]) -> Result<Vec<S>>,
    {
        let cols = self.q.columns().map(&mut f).collect::<Result<Vec<_>>>()?;
        let mut out = Self::from_matrix(Matrix::from_columns(&cols)?, self.class_id)?;
        out.perturbation_seed = self.perturbation_seed;
        Ok(out)
    }

    fn check_rows(&self, x: &Matrix<S>) -> Result<()> {
        if x.rows() != self.rows() {
            return Err(Error::InvalidInput(format!(
                "test matrix has {} rows, regressor for class {} has T = {}",
                x.rows(),
                self.class_id,
                self.rows()
            )));
        }
        Ok(())
    }

    fn singular(&self) -> Error {
        Error::Singular { class_id: self.class_id, rank: self.rank, cols: self.cols() }
    }

    /// Factors `QᵀQ` for repeated normal-equation solves. Fails on rank deficiency.
    pub fn normal_equations(&self) -> Result<NormalEquations<'_, S>> {
        if self.is_rank_deficient() {
            return Err(self.singular());
        }
        let gram = self.q.tr_matmul(&self.q)?;
        let chol = Cholesky::new(&gram).ok_or_else(|| self.singular())?;
        Ok(NormalEquations { q: &self.q, chol })
    }

    /// `Γ = (QᵀQ)⁻¹ Qᵀ X`. Requires full column rank.
    pub fn solve_gamma_normal(&self, x: &Matrix<S>) -> Result<ParameterMatrix<S>> {
        self.check_rows(x)?;
        let ne = self.normal_equations()?;
        let qtx = self.q.tr_matmul(x)?;
        Ok(ParameterMatrix(ne.chol.solve_matrix(&qtx)))
    }

    /// Basic least-squares solution: at most `rank` nonzero coefficients per
    /// column, placed on the leading pivot columns of the factorization.
    pub fn solve_gamma_qr(&self, x: &Matrix<S>) -> Result<ParameterMatrix<S>> {
        self.check_rows(x)?;
        let qr = self.qr();
        let cols: Vec<Vec<S>> = x.columns().map(|col| qr.solve_basic(col, self.rank)).collect();
        if cols.is_empty() {
            return Ok(ParameterMatrix(Matrix::zeros(self.cols(), 0)));
        }
        Ok(ParameterMatrix(Matrix::from_columns(&cols)?))
    }

    /// `Γ = Q̃ X` with the cached pseudoinverse, or a freshly computed one.
    pub fn solve_gamma_pinv(&self, x: &Matrix<S>) -> Result<ParameterMatrix<S>> {
        self.check_rows(x)?;
        match &self.pinv {
            Some(p) => Ok(ParameterMatrix(p.matmul(x)?)),
            None => Ok(ParameterMatrix(rank_revealing_pinv(&self.q).pinv.matmul(x)?)),
        }
    }

    /// Reconstructs every column of `X` with the default route.
    pub fn reconstruct(&self, x: &Matrix<S>) -> Result<Reconstruction<S>> {
        self.reconstruct_with(x, SolvePath::Auto)
    }

    pub fn reconstruct_with(&self, x: &Matrix<S>, path: SolvePath) -> Result<Reconstruction<S>> {
        self.check_rows(x)?;
        let x_hat = match path {
            SolvePath::Auto if self.pinv.is_some() => self.q.matmul(&self.solve_gamma_pinv(x)?.0)?,
            SolvePath::Auto | SolvePath::Qr => self.q.matmul(&self.solve_gamma_qr(x)?.0)?,
            SolvePath::Pinv => self.q.matmul(&self.solve_gamma_pinv(x)?.0)?,
            SolvePath::Normal => self.q.matmul(&self.solve_gamma_normal(x)?.0)?,
            SolvePath::NormalPerVector => {
                let ne = self.normal_equations()?;
                let mut out = Matrix::zeros(x.rows(), x.cols());
                for (m, col) in x.columns().enumerate() {
                    out.column_mut(m).copy_from_slice(&ne.reconstruct_vector(col)?);
                }
                out
            }
        };
        let distances = residual_distances(x, &x_hat)?;
        Ok(Reconstruction { x_hat, distances })
    }
}

/// Column-wise Euclidean norms of `X − X̂`.
pub fn residual_distances<S: Scalar>(x: &Matrix<S>, x_hat: &Matrix<S>) -> Result<Vec<S>> {
    if x.shape() != x_hat.shape() {
        return Err(Error::InvalidInput(format!(
            "residual shapes differ: {:?} vs {:?}",
            x.shape(),
            x_hat.shape()
        )));
    }
    Ok(x.columns()
        .zip(x_hat.columns())
        .map(|(a, b)| {
            let diff: Vec<S> = a.iter().zip(b).map(|(u, v)| *u - *v).collect();
            norm2(&diff)
        })
        .collect())
}
