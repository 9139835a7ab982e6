//! Gallery formation and set classification by weighted voting over
//! reconstruction errors.

use std::collections::HashSet;

use rand::seq::index::sample;

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::preprocess::{finish_vector, pixel_stage, ImageVector, PreprocessConfig, Raster};
use crate::regression::{build_regressor, Regressor, SolvePath};
use crate::scalar::Scalar;
use crate::seed::{derive_seed, rng_from_seed};

/// How a rank-deficient regressor is handled at gallery formation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Remedy {
    /// Add uniform `[−0.5, 0.5]` noise to the pixel-scale matrix.
    #[default]
    Perturb,
    /// Keep the singular matrix and reconstruct through the QR basic solution.
    Qr,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GalleryOptions {
    /// Images drawn per class; classes with fewer use all of theirs.
    pub gallery_size: usize,
    pub seed: u64,
    pub remedy: Remedy,
    /// Cache pseudoinverses for the fast reconstruction path.
    pub precompute_pinv: bool,
}

impl Default for GalleryOptions {
    fn default() -> Self {
        Self { gallery_size: usize::MAX, seed: 0, remedy: Remedy::Perturb, precompute_pinv: true }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gallery<S> {
    regressors: Vec<Regressor<S>>,
    labels: Vec<String>,
    preprocess: PreprocessConfig,
}

impl<S: Scalar> Gallery<S> {
    pub fn new(regressors: Vec<Regressor<S>>, labels: Vec<String>, preprocess: PreprocessConfig) -> Result<Self> {
        if regressors.is_empty() {
            return Err(Error::InvalidInput("gallery needs at least one class".into()));
        }
        if labels.len() != regressors.len() {
            return Err(Error::InvalidInput(format!(
                "{} labels for {} regressors",
                labels.len(),
                regressors.len()
            )));
        }
        let t = regressors[0].rows();
        if let Some(r) = regressors.iter().find(|r| r.rows() != t) {
            return Err(Error::InvalidInput(format!(
                "class {} has T = {}, expected {t}",
                r.class_id(),
                r.rows()
            )));
        }
        let mut seen = HashSet::new();
        if let Some(r) = regressors.iter().find(|r| !seen.insert(r.class_id())) {
            return Err(Error::InvalidInput(format!("duplicate class id {}", r.class_id())));
        }
        Ok(Self { regressors, labels, preprocess })
    }

    pub fn regressors(&self) -> &[Regressor<S>] {
        &self.regressors
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn preprocess_config(&self) -> &PreprocessConfig {
        &self.preprocess
    }

    pub fn num_classes(&self) -> usize {
        self.regressors.len()
    }

    /// Image vector length `T` shared by all regressors.
    pub fn vector_len(&self) -> usize {
        self.regressors[0].rows()
    }

    /// Copy of the gallery with every pseudoinverse dropped, so reconstruction
    /// falls back to the QR route.
    pub fn without_pinv(&self) -> Result<Self> {
        let regs = self
            .regressors
            .iter()
            .map(|r| {
                crate::regression::Regressor::from_parts(
                    r.class_id(),
                    r.matrix().clone(),
                    r.rank(),
                    None,
                    r.perturbation_seed(),
                )
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(regs, self.labels.clone(), self.preprocess)
    }
}

/// Builds one regressor per class from raw rasters.
///
/// Per class, `min(gallery_size, available)` images are drawn without
/// replacement, preprocessed and stacked. A rank-deficient class is repaired
/// per `opts.remedy`: perturbation is applied to the pixel-scale matrix, ahead
/// of standardization. Pseudoinverses are cached for every regressor that is
/// of full rank or was repaired by perturbation.
pub fn form_gallery<S: Scalar>(
    classes: &[(String, Vec<Raster<S>>)],
    cfg: &PreprocessConfig,
    opts: &GalleryOptions,
) -> Result<Gallery<S>> {
    cfg.validate()?;
    if classes.is_empty() {
        return Err(Error::InvalidInput("no gallery classes supplied".into()));
    }
    let t = cfg.vector_len();
    let mut rng = rng_from_seed(opts.seed);
    let mut regressors = Vec::with_capacity(classes.len());
    let mut labels = Vec::with_capacity(classes.len());

    for (idx, (label, images)) in classes.iter().enumerate() {
        if images.is_empty() {
            return Err(Error::InvalidInput(format!("gallery class `{label}` has no images")));
        }
        let n = opts.gallery_size.min(images.len());
        if n > t {
            return Err(Error::TooFewPixels { rows: t, cols: n });
        }
        let mut picked = sample(&mut rng, images.len(), n).into_vec();
        picked.sort_unstable();

        let class_id = u32::try_from(idx).map_err(|_| Error::InvalidInput("too many classes".into()))?;
        let pixels = picked
            .iter()
            .map(|&i| pixel_stage(&images[i], cfg))
            .collect::<Result<Vec<ImageVector<S>>>>()?;
        let finished = pixels.iter().map(|v| finish_vector(v.clone(), cfg)).collect::<Result<Vec<_>>>()?;
        let mut reg = build_regressor(&finished, class_id)?;

        if reg.is_rank_deficient() {
            match opts.remedy {
                Remedy::Perturb => {
                    let seed = derive_seed(opts.seed, u64::from(class_id));
                    let raw = build_regressor(&pixels, class_id)?.perturb(seed)?;
                    let dims = cfg.target_dims;
                    reg = raw.map_columns(|c| {
                        Ok(finish_vector(ImageVector::new(c.to_vec(), dims)?, cfg)?.into_values())
                    })?;
                    if reg.is_rank_deficient() {
                        log::warn!("class `{label}` still rank deficient after perturbation (rank {})", reg.rank());
                    }
                }
                Remedy::Qr => {
                    log::info!("class `{label}` rank {} < {}; using QR basic solution", reg.rank(), reg.cols());
                }
            }
        }

        let use_pinv = opts.precompute_pinv && !(opts.remedy == Remedy::Qr && reg.is_rank_deficient());
        if use_pinv {
            reg = reg.precompute_pinv();
        }
        regressors.push(reg);
        labels.push(label.clone());
    }
    Gallery::new(regressors, labels, *cfg)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum VoteStrategy<S> {
    /// `θ = exp(−α d)`, summed per class.
    Exponential { alpha: S },
    /// One vote per image for its nearest class.
    Majority,
    /// Votes from the `k` smallest distances pooled over all (class, image) pairs.
    Knn { k: usize },
}

impl<S: Scalar> VoteStrategy<S> {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Exponential { .. } => "exponential",
            Self::Majority => "majority",
            Self::Knn { .. } => "knn",
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Self::Exponential { alpha } if !(alpha > S::zero() && alpha.is_finite()) => {
                Err(Error::InvalidConfig(format!("alpha must be positive, got {alpha}")))
            }
            Self::Knn { k } if k == 0 || k % 2 == 0 => {
                Err(Error::InvalidConfig(format!("k must be a positive odd integer, got {k}")))
            }
            _ => Ok(()),
        }
    }
}

/// Test image set as a `T x M` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct TestSet<S> {
    pub x: Matrix<S>,
    pub set_id: String,
}

impl<S: Scalar> TestSet<S> {
    pub fn new(x: Matrix<S>, set_id: impl Into<String>) -> Result<Self> {
        if x.cols() == 0 {
            return Err(Error::InvalidInput("test set needs at least one image".into()));
        }
        Ok(Self { x, set_id: set_id.into() })
    }

    pub fn from_vectors(vectors: &[ImageVector<S>], set_id: impl Into<String>) -> Result<Self> {
        let cols: Vec<&[S]> = vectors.iter().map(ImageVector::values).collect();
        Self::new(Matrix::from_columns(&cols)?, set_id)
    }

    /// Runs the full preprocessing pipeline over each raster.
    pub fn from_rasters(rasters: &[Raster<S>], cfg: &PreprocessConfig, set_id: impl Into<String>) -> Result<Self> {
        let vectors = rasters
            .iter()
            .map(|r| crate::preprocess::preprocess_pipeline(r, cfg))
            .collect::<Result<Vec<_>>>()?;
        Self::from_vectors(&vectors, set_id)
    }

    pub fn len(&self) -> usize {
        self.x.cols()
    }

    pub fn is_empty(&self) -> bool {
        self.x.cols() == 0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassificationResult<S> {
    /// `C x M` reconstruction errors.
    pub distances: Matrix<S>,
    /// `C x M` exponential vote weights; `None` for the other strategies.
    pub theta: Option<Matrix<S>>,
    /// Accumulated score per class.
    pub scores: Vec<S>,
    pub predicted: usize,
    pub tie: bool,
}

/// `θ_c^m = exp(−α d_c^m)` and `Θ_c = Σ_m θ_c^m`.
pub fn vote_exponential<S: Scalar>(distances: &Matrix<S>, alpha: S) -> Result<(Matrix<S>, Vec<S>)> {
    VoteStrategy::Exponential { alpha }.validate()?;
    let theta = distances.map(|d| (-alpha * d).exp());
    let scores = (0..theta.rows())
        .map(|c| {
            let mut acc = S::zero();
            for m in 0..theta.cols() {
                acc += theta[(c, m)];
            }
            acc
        })
        .collect();
    Ok((theta, scores))
}

/// Lowest class index with the smallest distance in column `m`.
fn nearest_class<S: Scalar>(distances: &Matrix<S>, m: usize) -> usize {
    let mut best = 0;
    for c in 1..distances.rows() {
        if distances[(c, m)] < distances[(best, m)] {
            best = c;
        }
    }
    best
}

pub fn vote_majority<S: Scalar>(distances: &Matrix<S>) -> Vec<S> {
    let mut scores = vec![S::zero(); distances.rows()];
    for m in 0..distances.cols() {
        scores[nearest_class(distances, m)] += S::one();
    }
    scores
}

/// Global top-`k` over all `C · M` (class, distance) pairs. Equal distances
/// are ordered by class index, then image index.
pub fn vote_knn<S: Scalar>(distances: &Matrix<S>, k: usize) -> Result<Vec<S>> {
    VoteStrategy::<S>::Knn { k }.validate()?;
    let (c, m) = distances.shape();
    if k > c * m {
        return Err(Error::InvalidConfig(format!("k = {k} exceeds the {} available distances", c * m)));
    }
    let mut pairs: Vec<(S, usize, usize)> =
        (0..c).flat_map(|ci| (0..m).map(move |mi| (ci, mi))).map(|(ci, mi)| (distances[(ci, mi)], ci, mi)).collect();
    pairs.sort_by(|a, b| {
        a.0.partial_cmp(&b.0).unwrap_or(std::cmp::Ordering::Equal).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2))
    });
    let mut scores = vec![S::zero(); c];
    for &(_, ci, _) in &pairs[..k] {
        scores[ci] += S::one();
    }
    Ok(scores)
}

/// Argmax; exact ties go to the smallest index and set the tie flag.
pub fn decide<S: Scalar>(scores: &[S]) -> (usize, bool) {
    let mut best = 0;
    for (i, s) in scores.iter().enumerate().skip(1) {
        if *s > scores[best] {
            best = i;
        }
    }
    let tie = scores.iter().enumerate().any(|(i, s)| i != best && *s == scores[best]);
    (best, tie)
}

fn distance_matrix<S: Scalar>(gallery: &Gallery<S>, x: &Matrix<S>, path: SolvePath) -> Result<Matrix<S>> {
    if x.rows() != gallery.vector_len() {
        return Err(Error::InvalidInput(format!(
            "test vectors have length {}, gallery expects T = {}",
            x.rows(),
            gallery.vector_len()
        )));
    }
    let mut d = Matrix::zeros(gallery.num_classes(), x.cols());
    for (c, reg) in gallery.regressors().iter().enumerate() {
        // the normal equations cannot serve a singular regressor
        let route = match path {
            SolvePath::Normal | SolvePath::NormalPerVector if reg.is_rank_deficient() => SolvePath::Qr,
            p => p,
        };
        let rec = reg.reconstruct_with(x, route)?;
        for (m, v) in rec.distances.into_iter().enumerate() {
            d[(c, m)] = v;
        }
    }
    Ok(d)
}

fn score<S: Scalar>(distances: Matrix<S>, vote: &VoteStrategy<S>) -> Result<ClassificationResult<S>> {
    let (theta, scores) = match *vote {
        VoteStrategy::Exponential { alpha } => {
            let (t, s) = vote_exponential(&distances, alpha)?;
            (Some(t), s)
        }
        VoteStrategy::Majority => (None, vote_majority(&distances)),
        VoteStrategy::Knn { k } => (None, vote_knn(&distances, k)?),
    };
    let (predicted, tie) = decide(&scores);
    Ok(ClassificationResult { distances, theta, scores, predicted, tie })
}

/// Classifies a test set with the default reconstruction route.
pub fn classify_set<S: Scalar>(
    gallery: &Gallery<S>,
    test: &TestSet<S>,
    vote: &VoteStrategy<S>,
) -> Result<ClassificationResult<S>> {
    classify_set_with(gallery, test, vote, SolvePath::Auto)
}

/// Like [`classify_set`] but forces a reconstruction route. Singular
/// regressors always fall back to the QR basic solution under the
/// normal-equation routes.
pub fn classify_set_with<S: Scalar>(
    gallery: &Gallery<S>,
    test: &TestSet<S>,
    vote: &VoteStrategy<S>,
    path: SolvePath,
) -> Result<ClassificationResult<S>> {
    vote.validate()?;
    score(distance_matrix(gallery, &test.x, path)?, vote)
}

/// Running accumulators for one-image-at-a-time classification.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct StreamState<S> {
    scores: Vec<S>,
    distance_columns: Vec<Vec<S>>,
}

impl<S: Scalar> StreamState<S> {
    pub fn new() -> Self {
        Self { scores: Vec::new(), distance_columns: Vec::new() }
    }

    pub fn images_seen(&self) -> usize {
        self.distance_columns.len()
    }

    pub fn scores(&self) -> &[S] {
        &self.scores
    }

    /// Adds one image's votes and re-decides.
    pub fn push(
        &mut self,
        gallery: &Gallery<S>,
        image: &ImageVector<S>,
        vote: &VoteStrategy<S>,
    ) -> Result<ClassificationResult<S>> {
        vote.validate()?;
        if matches!(vote, VoteStrategy::Knn { .. }) {
            return Err(Error::UnsupportedStreaming("knn"));
        }
        let c = gallery.num_classes();
        if self.scores.is_empty() {
            self.scores = vec![S::zero(); c];
        } else if self.scores.len() != c {
            return Err(Error::InvalidInput(format!("stream state tracks {} classes, gallery has {c}", self.scores.len())));
        }
        let x = Matrix::from_col_major(image.len(), 1, image.values().to_vec())?;
        let d = distance_matrix(gallery, &x, SolvePath::Auto)?;
        let column: Vec<S> = d.column(0).to_vec();

        match *vote {
            VoteStrategy::Exponential { alpha } => {
                for (s, dc) in self.scores.iter_mut().zip(&column) {
                    *s += (-alpha * *dc).exp();
                }
            }
            VoteStrategy::Majority => self.scores[nearest_class(&d, 0)] += S::one(),
            VoteStrategy::Knn { .. } => unreachable!(),
        }
        self.distance_columns.push(column);

        let distances = Matrix::from_columns(&self.distance_columns)?;
        let theta = match *vote {
            VoteStrategy::Exponential { alpha } => Some(distances.map(|v| (-alpha * v).exp())),
            _ => None,
        };
        let (predicted, tie) = decide(&self.scores);
        Ok(ClassificationResult { distances, theta, scores: self.scores.clone(), predicted, tie })
    }
}

/// Functional form of [`StreamState::push`].
pub fn classify_stream<S: Scalar>(
    gallery: &Gallery<S>,
    mut state: StreamState<S>,
    next_image: &ImageVector<S>,
    vote: &VoteStrategy<S>,
) -> Result<(StreamState<S>, ClassificationResult<S>)> {
    let result = state.push(gallery, next_image, vote)?;
    Ok((state, result))
}
