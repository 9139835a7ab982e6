//! Raster → vector preprocessing: grayscale, area downsampling, histogram
//! equalization, column-major vectorization and standardization.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Row-major intensity image with 1 or 3 interleaved channels, values in `[0, 255]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Raster<S> {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<S>,
}

impl<S: Scalar> Raster<S> {
    pub fn new(width: usize, height: usize, channels: usize, data: Vec<S>) -> Result<Self> {
        if channels != 1 && channels != 3 {
            return Err(Error::InvalidInput(format!("raster must have 1 or 3 channels, got {channels}")));
        }
        if width == 0 || height == 0 {
            return Err(Error::InvalidInput("raster dimensions must be non-zero".into()));
        }
        if data.len() != width * height * channels {
            return Err(Error::InvalidInput(format!(
                "{width}x{height}x{channels} raster needs {} values, got {}",
                width * height * channels,
                data.len()
            )));
        }
        let hi = S::lit(255.0);
        if let Some(v) = data.iter().find(|v| !(**v >= S::zero() && **v <= hi)) {
            return Err(Error::InvalidInput(format!("pixel value {v} outside [0, 255]")));
        }
        Ok(Self { width, height, channels, data })
    }

    pub fn from_u8(width: usize, height: usize, channels: usize, data: &[u8]) -> Result<Self> {
        Self::new(width, height, channels, data.iter().map(|&v| S::lit(f64::from(v))).collect())
    }

    /// Single-channel raster from nested rows.
    pub fn from_rows(rows: &[&[S]]) -> Result<Self> {
        let height = rows.len();
        let width = rows.first().map_or(0, |r| r.len());
        if rows.iter().any(|r| r.len() != width) {
            return Err(Error::InvalidInput("ragged raster rows".into()));
        }
        Self::new(width, height, 1, rows.iter().flat_map(|r| r.iter().copied()).collect())
    }

    pub fn filled(width: usize, height: usize, channels: usize, value: S) -> Result<Self> {
        Self::new(width, height, channels, vec![value; width * height * channels])
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn channels(&self) -> usize {
        self.channels
    }

    #[inline]
    pub fn data(&self) -> &[S] {
        &self.data
    }

    /// Single-channel pixel at `(row, col)`.
    #[inline]
    pub fn at(&self, row: usize, col: usize) -> S {
        debug_assert_eq!(self.channels, 1);
        self.data[row * self.width + col]
    }

    fn require_gray(&self, op: &str) -> Result<()> {
        if self.channels != 1 {
            return Err(Error::InvalidInput(format!("{op} needs a single-channel raster, got {} channels", self.channels)));
        }
        Ok(())
    }
}

/// Flattened `a x b` image, column by column.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageVector<S> {
    values: Vec<S>,
    dims: (usize, usize),
}

impl<S: Scalar> ImageVector<S> {
    pub fn new(values: Vec<S>, dims: (usize, usize)) -> Result<Self> {
        if values.len() != dims.0 * dims.1 {
            return Err(Error::InvalidInput(format!(
                "vector of length {} does not match dims {}x{}",
                values.len(),
                dims.0,
                dims.1
            )));
        }
        Ok(Self { values, dims })
    }

    pub fn values(&self) -> &[S] {
        &self.values
    }

    pub fn into_values(self) -> Vec<S> {
        self.values
    }

    /// `(a, b)` = (rows, cols) of the source raster.
    pub fn dims(&self) -> (usize, usize) {
        self.dims
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Inverse of [`vectorize`]: rebuilds the `a x b` single-channel raster.
    pub fn to_raster(&self) -> Result<Raster<S>> {
        let (a, b) = self.dims;
        let mut data = vec![S::zero(); a * b];
        for c in 0..b {
            for r in 0..a {
                data[r * b + c] = self.values[c * a + r];
            }
        }
        Raster::new(b, a, 1, data)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PreprocessConfig {
    /// `(a, b)`: output rows and columns.
    pub target_dims: (usize, usize),
    pub equalize: bool,
    pub standardize: bool,
}

impl PreprocessConfig {
    pub fn new(rows: usize, cols: usize) -> Self {
        Self { target_dims: (rows, cols), equalize: false, standardize: false }
    }

    pub fn with_equalize(mut self, on: bool) -> Self {
        self.equalize = on;
        self
    }

    pub fn with_standardize(mut self, on: bool) -> Self {
        self.standardize = on;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.target_dims.0 == 0 || self.target_dims.1 == 0 {
            return Err(Error::InvalidConfig(format!(
                "target dims must be at least 1x1, got {}x{}",
                self.target_dims.0, self.target_dims.1
            )));
        }
        Ok(())
    }

    /// Vector length `T = a · b`.
    pub fn vector_len(&self) -> usize {
        self.target_dims.0 * self.target_dims.1
    }
}

/// ITU-R BT.601 luma, rounded and clamped. Single-channel input passes through.
pub fn to_grayscale<S: Scalar>(img: &Raster<S>) -> Result<Raster<S>> {
    match img.channels {
        1 => Ok(img.clone()),
        3 => {
            let (wr, wg, wb) = (S::lit(0.299), S::lit(0.587), S::lit(0.114));
            let hi = S::lit(255.0);
            let data = img
                .data
                .chunks_exact(3)
                .map(|px| (wr * px[0] + wg * px[1] + wb * px[2]).round().max(S::zero()).min(hi))
                .collect();
            Ok(Raster { width: img.width, height: img.height, channels: 1, data })
        }
        c => Err(Error::InvalidInput(format!("grayscale conversion needs 1 or 3 channels, got {c}"))),
    }
}

/// Overlap weights between `n_out` equal output bins and `n_in` unit source
/// cells covering the same interval. Row `o` lists `(source index, weight)`
/// with weights summing to one.
fn box_weights<S: Scalar>(n_in: usize, n_out: usize) -> Vec<Vec<(usize, S)>> {
    // Work in units of 1/n_out of a source pixel so bin edges are integers:
    // output bin o spans [o·n_in, (o+1)·n_in), source cell i spans [i·n_out, (i+1)·n_out).
    let total = S::from_usize_lossy(n_in);
    (0..n_out)
        .map(|o| {
            let lo = o * n_in;
            let hi = lo + n_in;
            let first = lo / n_out;
            let last = (hi - 1) / n_out;
            (first..=last)
                .map(|i| {
                    let cell_lo = i * n_out;
                    let cell_hi = cell_lo + n_out;
                    let overlap = hi.min(cell_hi) - lo.max(cell_lo);
                    (i, S::from_usize_lossy(overlap) / total)
                })
                .collect()
        })
        .collect()
}

/// Area-weighted box averaging down to `rows x cols`. Upsampling is rejected.
pub fn downsample<S: Scalar>(img: &Raster<S>, rows: usize, cols: usize) -> Result<Raster<S>> {
    img.require_gray("downsample")?;
    if rows == 0 || cols == 0 {
        return Err(Error::InvalidInput("downsample target must be at least 1x1".into()));
    }
    if rows > img.height || cols > img.width {
        return Err(Error::InvalidInput(format!(
            "cannot downsample {}x{} to larger {}x{}",
            img.height, img.width, rows, cols
        )));
    }
    if rows == img.height && cols == img.width {
        return Ok(img.clone());
    }

    let wy = box_weights::<S>(img.height, rows);
    let wx = box_weights::<S>(img.width, cols);

    // horizontal pass: height x cols
    let mut tmp = vec![S::zero(); img.height * cols];
    for y in 0..img.height {
        let src = &img.data[y * img.width..(y + 1) * img.width];
        for (ox, taps) in wx.iter().enumerate() {
            tmp[y * cols + ox] = taps.iter().map(|&(i, w)| w * src[i]).sum();
        }
    }

    let hi = S::lit(255.0);
    let mut out = vec![S::zero(); rows * cols];
    for (oy, taps) in wy.iter().enumerate() {
        for ox in 0..cols {
            let v: S = taps.iter().map(|&(i, w)| w * tmp[i * cols + ox]).sum();
            out[oy * cols + ox] = v.max(S::zero()).min(hi);
        }
    }
    Ok(Raster { width: cols, height: rows, channels: 1, data: out })
}

/// Classic 256-bin CDF equalization. Non-integer inputs are binned at their
/// nearest level. A constant image maps to all zeros.
pub fn equalize_histogram<S: Scalar>(img: &Raster<S>) -> Result<Raster<S>> {
    img.require_gray("equalize_histogram")?;
    let level = |v: S| -> usize { v.round().max(S::zero()).min(S::lit(255.0)).to_usize().unwrap_or(0) };

    let mut hist = [0usize; 256];
    for &v in &img.data {
        hist[level(v)] += 1;
    }
    let mut cdf = [0usize; 256];
    let mut run = 0;
    for (c, h) in cdf.iter_mut().zip(hist) {
        run += h;
        *c = run;
    }
    let total = img.data.len();
    let cdf_min = cdf.iter().copied().find(|&c| c > 0).unwrap_or(0);

    let lut: Vec<S> = if total == cdf_min {
        vec![S::zero(); 256]
    } else {
        let denom = (total - cdf_min) as f64;
        cdf.iter()
            .map(|&c| {
                let num = c.saturating_sub(cdf_min) as f64;
                S::lit((num / denom * 255.0).round())
            })
            .collect()
    };

    let data = img.data.iter().map(|&v| lut[level(v)]).collect();
    Ok(Raster { width: img.width, height: img.height, channels: 1, data })
}

/// Column concatenation: pixel `(r, c)` lands at index `c · a + r`.
pub fn vectorize<S: Scalar>(img: &Raster<S>) -> Result<ImageVector<S>> {
    img.require_gray("vectorize")?;
    let (a, b) = (img.height, img.width);
    let mut values = Vec::with_capacity(a * b);
    for c in 0..b {
        for r in 0..a {
            values.push(img.data[r * b + c]);
        }
    }
    Ok(ImageVector { values, dims: (a, b) })
}

/// Output of [`standardize`]. `degenerate` marks a constant input, for which
/// the vector is all zeros.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardized<S> {
    pub vector: ImageVector<S>,
    pub degenerate: bool,
}

/// Zero mean, unit population standard deviation.
pub fn standardize<S: Scalar>(v: &ImageVector<S>) -> Result<Standardized<S>> {
    let n = v.values.len();
    if n < 2 {
        return Err(Error::InvalidInput(format!("standardize needs at least 2 values, got {n}")));
    }
    let count = S::from_usize_lossy(n);
    let mean = v.values.iter().copied().sum::<S>() / count;
    let var = v.values.iter().map(|x| (*x - mean) * (*x - mean)).sum::<S>() / count;
    let std = var.sqrt();
    if std == S::zero() || !std.is_finite() {
        log::warn!("standardize: constant {}x{} image vector, returning zeros", v.dims.0, v.dims.1);
        return Ok(Standardized {
            vector: ImageVector { values: vec![S::zero(); n], dims: v.dims },
            degenerate: true,
        });
    }
    let values = v.values.iter().map(|x| (*x - mean) / std).collect();
    Ok(Standardized { vector: ImageVector { values, dims: v.dims }, degenerate: false })
}

/// Grayscale, downsample and optionally equalize; output stays on the `[0, 255]` pixel scale.
pub fn pixel_stage<S: Scalar>(img: &Raster<S>, cfg: &PreprocessConfig) -> Result<ImageVector<S>> {
    cfg.validate()?;
    let gray = to_grayscale(img)?;
    let (a, b) = cfg.target_dims;
    let small = downsample(&gray, a, b)?;
    let small = if cfg.equalize { equalize_histogram(&small)? } else { small };
    vectorize(&small)
}

/// Applies the trailing intensity normalization that leaves the pixel scale.
pub fn finish_vector<S: Scalar>(v: ImageVector<S>, cfg: &PreprocessConfig) -> Result<ImageVector<S>> {
    if cfg.standardize {
        Ok(standardize(&v)?.vector)
    } else {
        Ok(v)
    }
}

/// grayscale → downsample → equalize? → vectorize → standardize?
pub fn preprocess_pipeline<S: Scalar>(img: &Raster<S>, cfg: &PreprocessConfig) -> Result<ImageVector<S>> {
    finish_vector(pixel_stage(img, cfg)?, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rgb(px: [f64; 3]) -> Raster<f64> {
        Raster::new(1, 1, 3, px.to_vec()).unwrap()
    }

    #[test]
    fn grayscale_examples() {
        assert_eq!(to_grayscale(&rgb([50.0, 50.0, 50.0])).unwrap().data(), &[50.0]);
        assert_eq!(to_grayscale(&rgb([255.0, 255.0, 255.0])).unwrap().data(), &[255.0]);
        // 0.299 * 255 = 76.245
        assert_eq!(to_grayscale(&rgb([255.0, 0.0, 0.0])).unwrap().data(), &[76.0]);
    }

    #[test]
    fn grayscale_passthrough_and_bad_channels() {
        let g = Raster::<f64>::from_rows(&[&[1.0, 2.0]]).unwrap();
        assert_eq!(to_grayscale(&g).unwrap(), g);
        assert!(Raster::<f64>::new(1, 1, 2, vec![0.0, 0.0]).is_err());
        assert!(Raster::<f64>::new(1, 1, 1, vec![256.0]).is_err());
    }

    #[test]
    fn downsample_examples() {
        let img = Raster::<f64>::from_rows(&[&[0.0, 0.0], &[100.0, 100.0]]).unwrap();
        assert_eq!(downsample(&img, 1, 1).unwrap().data(), &[50.0]);
        assert_eq!(downsample(&img, 2, 2).unwrap(), img);

        let flat = Raster::<f64>::filled(8, 8, 1, 37.0).unwrap();
        let small = downsample(&flat, 4, 4).unwrap();
        assert!(small.data().iter().all(|v| (*v - 37.0).abs() < 1e-12));

        assert!(downsample(&img, 3, 1).is_err());
    }

    #[test]
    fn downsample_fractional_ratio() {
        // 3 -> 2 columns: bins cover 1.5 source pixels each
        let img = Raster::<f64>::from_rows(&[&[0.0, 30.0, 90.0]]).unwrap();
        let out = downsample(&img, 1, 2).unwrap();
        assert!((out.data()[0] - (0.0 + 0.5 * 30.0) / 1.5).abs() < 1e-12);
        assert!((out.data()[1] - (0.5 * 30.0 + 90.0) / 1.5).abs() < 1e-12);
    }

    #[test]
    fn equalize_examples() {
        let img = Raster::<f64>::from_rows(&[&[10.0, 10.0], &[10.0, 200.0]]).unwrap();
        assert_eq!(equalize_histogram(&img).unwrap().data(), &[0.0, 0.0, 0.0, 255.0]);

        let flat = Raster::<f64>::filled(3, 3, 1, 90.0).unwrap();
        assert!(equalize_histogram(&flat).unwrap().data().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn equalize_uniform_histogram_is_fixed_point() {
        // Brute-force oracle: with one pixel per level, cdf(v) = v + 1,
        // cdf_min = 1, P = 256, so out(v) = round(v / 255 · 255) = v.
        let data: Vec<f64> = (0..256).map(f64::from).collect();
        let img = Raster::new(16, 16, 1, data.clone()).unwrap();
        let out = equalize_histogram(&img).unwrap();
        for (o, i) in out.data().iter().zip(&data) {
            assert!((o - i).abs() <= 0.5);
        }
    }

    #[test]
    fn vectorize_examples() {
        let one = Raster::<f64>::from_rows(&[&[7.0]]).unwrap();
        assert_eq!(vectorize(&one).unwrap().values(), &[7.0]);
        let sq = Raster::<f64>::from_rows(&[&[1.0, 2.0], &[3.0, 4.0]]).unwrap();
        assert_eq!(vectorize(&sq).unwrap().values(), &[1.0, 3.0, 2.0, 4.0]);
        let col = Raster::<f64>::from_rows(&[&[5.0], &[6.0], &[8.0]]).unwrap();
        assert_eq!(vectorize(&col).unwrap().values(), &[5.0, 6.0, 8.0]);
        assert!(vectorize(&rgb([1.0, 2.0, 3.0])).is_err());
    }

    #[test]
    fn standardize_examples() {
        let v = ImageVector::<f64>::new(vec![0.0, 2.0], (2, 1)).unwrap();
        let s = standardize(&v).unwrap();
        assert!(!s.degenerate);
        assert!((s.vector.values()[0] + 1.0).abs() < 1e-15);
        assert!((s.vector.values()[1] - 1.0).abs() < 1e-15);

        let c = ImageVector::<f64>::new(vec![4.0; 6], (2, 3)).unwrap();
        let s = standardize(&c).unwrap();
        assert!(s.degenerate);
        assert!(s.vector.values().iter().all(|x| *x == 0.0));

        let fixed = ImageVector::<f64>::new(vec![-1.0, 1.0, -1.0, 1.0], (2, 2)).unwrap();
        let s = standardize(&fixed).unwrap();
        for (a, b) in s.vector.values().iter().zip(fixed.values()) {
            assert!((a - b).abs() < 1e-12);
        }

        assert!(standardize(&ImageVector::<f64>::new(vec![1.0], (1, 1)).unwrap()).is_err());
    }

    #[test]
    fn pipeline_constant_rgb() {
        let img = Raster::<f64>::filled(6, 4, 3, 120.0).unwrap();
        let v = preprocess_pipeline(&img, &PreprocessConfig::new(2, 3)).unwrap();
        assert_eq!(v.len(), 6);
        assert!(v.values().iter().all(|x| *x == 120.0));
    }

    #[test]
    fn pipeline_identity_dims_is_composition() {
        let data: Vec<f64> = (0..4 * 3 * 3).map(|i| f64::from((i * 37) % 256)).collect();
        let img = Raster::new(4, 3, 3, data).unwrap();
        let v = preprocess_pipeline(&img, &PreprocessConfig::new(3, 4)).unwrap();
        assert_eq!(v, vectorize(&to_grayscale(&img).unwrap()).unwrap());
    }

    #[test]
    fn invalid_config_rejected() {
        let img = Raster::<f64>::filled(2, 2, 1, 1.0).unwrap();
        assert!(preprocess_pipeline(&img, &PreprocessConfig::new(0, 2)).is_err());
    }
}
