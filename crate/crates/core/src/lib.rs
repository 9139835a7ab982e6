//! Image set classification by linear-regression reconstruction.
//!
//! Every gallery class is a column subspace `Q_c` of vectorized images. Each
//! image in a test set is projected onto every class subspace by least
//! squares; the residual norms feed a vote (exponential by default) and the
//! class with the largest accumulated score labels the whole set.
//!
//! The numerical code is generic over [`Scalar`] (`f32`, `f64`); the aliases
//! at the crate root fix the double-precision instantiation used by the
//! harness.

pub mod classifier;
pub mod container;
pub mod error;
pub mod linalg;
pub mod preprocess;
pub mod regression;
pub mod scalar;
pub mod seed;

pub use classifier::{
    classify_set, classify_set_with, classify_stream, decide, form_gallery, vote_exponential, vote_knn,
    vote_majority, ClassificationResult, Gallery, GalleryOptions, Remedy, StreamState, TestSet, VoteStrategy,
};
pub use error::{Error, Result};
pub use linalg::Matrix;
pub use preprocess::{
    downsample, equalize_histogram, preprocess_pipeline, standardize, to_grayscale, vectorize, ImageVector,
    PreprocessConfig, Raster,
};
pub use regression::{
    build_regressor, residual_distances, ParameterMatrix, Reconstruction, Regressor, SolvePath,
};
pub use scalar::Scalar;

pub type Matrix64 = Matrix<f64>;
pub type Raster64 = Raster<f64>;
pub type ImageVector64 = ImageVector<f64>;
pub type Regressor64 = Regressor<f64>;
pub type Gallery64 = Gallery<f64>;
pub type TestSet64 = TestSet<f64>;
pub type VoteStrategy64 = VoteStrategy<f64>;
pub type ClassificationResult64 = ClassificationResult<f64>;

pub type Matrix32 = Matrix<f32>;
pub type Regressor32 = Regressor<f32>;
pub type Gallery32 = Gallery<f32>;
