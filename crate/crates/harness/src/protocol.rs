//! Split-and-repeat evaluation and timing.

use std::time::Instant;

use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};
use setrecon_core::seed::{derive_seed, rng_from_seed};
use setrecon_core::{
    classify_set_with, downsample, form_gallery, to_grayscale, GalleryOptions, PreprocessConfig, Raster, Remedy,
    SolvePath, TestSet, VoteStrategy,
};

use crate::error::{HarnessError, Result};
use crate::manifest::DatasetManifest;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    #[default]
    Exponential,
    Majority,
    Knn,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum RemedyKind {
    #[default]
    Perturb,
    Qr,
}

impl From<RemedyKind> for Remedy {
    fn from(r: RemedyKind) -> Self {
        match r {
            RemedyKind::Perturb => Remedy::Perturb,
            RemedyKind::Qr => Remedy::Qr,
        }
    }
}

/// `fast` reconstructs through cached pseudoinverses in one batched product,
/// `naive` solves the normal equations image by image.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    #[default]
    Fast,
    Naive,
}

impl Mode {
    fn solve_path(self) -> SolvePath {
        match self {
            Mode::Fast => SolvePath::Auto,
            Mode::Naive => SolvePath::NormalPerVector,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProtocolConfig {
    pub repeats: usize,
    pub gallery_sets_per_class: usize,
    /// Images drawn from each gallery set; `None` keeps them all.
    pub gallery_images_per_set: Option<usize>,
    /// `(rows, cols)` after downsampling.
    pub dims: (usize, usize),
    pub alpha: f64,
    pub strategy: Strategy,
    /// Neighbour count for the knn strategy.
    pub k: usize,
    pub remedy: RemedyKind,
    pub equalize: bool,
    pub standardize: bool,
    pub seed: u64,
    /// Round-robin k-fold split by set. Repeat `r` draws both gallery and
    /// test sets from fold `r mod folds` only.
    pub folds: Option<usize>,
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        Self {
            repeats: 10,
            gallery_sets_per_class: 1,
            gallery_images_per_set: None,
            dims: (32, 32),
            alpha: 0.2,
            strategy: Strategy::Exponential,
            k: 1,
            remedy: RemedyKind::Perturb,
            equalize: false,
            standardize: false,
            seed: 0,
            folds: None,
        }
    }
}

impl ProtocolConfig {
    pub fn preprocess(&self) -> PreprocessConfig {
        PreprocessConfig::new(self.dims.0, self.dims.1).with_equalize(self.equalize).with_standardize(self.standardize)
    }

    pub fn vote(&self) -> VoteStrategy<f64> {
        match self.strategy {
            Strategy::Exponential => VoteStrategy::Exponential { alpha: self.alpha },
            Strategy::Majority => VoteStrategy::Majority,
            Strategy::Knn => VoteStrategy::Knn { k: self.k },
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(HarnessError::InvalidParams(m.into()));
        if self.repeats == 0 {
            return fail("repeats must be at least 1");
        }
        if self.gallery_sets_per_class == 0 {
            return fail("gallery_sets_per_class must be at least 1");
        }
        if self.gallery_images_per_set == Some(0) {
            return fail("gallery_images_per_set must be at least 1");
        }
        if self.folds == Some(0) {
            return fail("folds must be at least 1");
        }
        self.preprocess().validate()?;
        self.vote().validate()?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SetPrediction {
    /// `<class>/<set>`.
    pub set_id: String,
    pub true_label: String,
    pub predicted_label: String,
    pub decided_by_tie: bool,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepeatReport {
    pub repeat: usize,
    pub seed: u64,
    pub gallery_seed: u64,
    pub gallery_sets: Vec<String>,
    pub gallery_images: usize,
    pub accuracy: f64,
    pub gallery_seconds: f64,
    pub sets: Vec<SetPrediction>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub root: String,
    pub classes: usize,
    pub sets: usize,
    pub images: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolReport {
    pub config: ProtocolConfig,
    pub mode: Mode,
    pub dataset: DatasetSummary,
    pub master_seed: u64,
    pub repeats: Vec<RepeatReport>,
    pub mean_accuracy: f64,
    /// Population standard deviation over repeats.
    pub std_accuracy: f64,
    pub mean_gallery_seconds: f64,
    pub mean_set_seconds: f64,
}

impl ProtocolReport {
    pub fn accuracies(&self) -> Vec<f64> {
        self.repeats.iter().map(|r| r.accuracy).collect()
    }

    /// Every prediction in report order.
    pub fn predictions(&self) -> Vec<&str> {
        self.repeats.iter().flat_map(|r| r.sets.iter().map(|s| s.predicted_label.as_str())).collect()
    }
}

/// Mean and population standard deviation.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (0.0, 0.0);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Every image as grayscale at the target size, still on the pixel scale.
///
/// Running the full pipeline on these gives the same vectors as on the
/// originals, because grayscale and downsampling are then no-ops.
pub fn load_reduced(manifest: &DatasetManifest, dims: (usize, usize)) -> Result<Vec<Vec<Vec<Raster<f64>>>>> {
    manifest
        .classes
        .iter()
        .map(|c| {
            c.sets
                .iter()
                .map(|s| {
                    s.images
                        .iter()
                        .map(|p| {
                            let raw = crate::io::load_raster(p)?;
                            let small = to_grayscale(&raw).and_then(|g| downsample(&g, dims.0, dims.1));
                            small.map_err(|e| HarnessError::Protocol(format!("{}: {e}", p.display())))
                        })
                        .collect()
                })
                .collect()
        })
        .collect()
}

struct Split {
    /// Per class, chosen gallery sets with their sampled image indices.
    gallery: Vec<Vec<(usize, Vec<usize>)>>,
    /// `(class, set)` pairs held out for testing.
    tests: Vec<(usize, usize)>,
}

fn sorted_sample<R: Rng + ?Sized>(rng: &mut R, len: usize, n: usize) -> Vec<usize> {
    let mut v = sample(rng, len, n.min(len)).into_vec();
    v.sort_unstable();
    v
}

fn pools(manifest: &DatasetManifest, cfg: &ProtocolConfig, repeat: usize) -> Vec<Vec<usize>> {
    manifest
        .classes
        .iter()
        .map(|c| match cfg.folds {
            Some(k) => (0..c.sets.len()).filter(|i| i % k == repeat % k).collect(),
            None => (0..c.sets.len()).collect(),
        })
        .collect()
}

/// Checks every repeat's split up front so failures name all short classes.
fn check_feasible(manifest: &DatasetManifest, cfg: &ProtocolConfig) -> Result<()> {
    let distinct = cfg.folds.map_or(1, |k| k.min(cfg.repeats));
    let mut problems = Vec::new();
    for r in 0..distinct {
        let pools = pools(manifest, cfg, r);
        for (c, pool) in pools.iter().enumerate() {
            if pool.len() < cfg.gallery_sets_per_class {
                let fold = cfg.folds.map(|k| format!(" in fold {}", r % k)).unwrap_or_default();
                problems.push(format!(
                    "class `{}`{fold}: {} gallery sets required, {} available",
                    manifest.classes[c].label,
                    cfg.gallery_sets_per_class,
                    pool.len()
                ));
            }
        }
        let tests: usize = pools.iter().map(|p| p.len().saturating_sub(cfg.gallery_sets_per_class)).sum();
        if tests == 0 {
            problems.push(format!("no test sets remain after taking {} gallery sets per class", cfg.gallery_sets_per_class));
        }
    }
    if problems.is_empty() {
        Ok(())
    } else {
        problems.dedup();
        Err(HarnessError::Protocol(format!("split infeasible: {}", problems.join("; "))))
    }
}

fn draw_split<R: Rng + ?Sized>(rng: &mut R, manifest: &DatasetManifest, cfg: &ProtocolConfig, repeat: usize) -> Split {
    let mut gallery = Vec::with_capacity(manifest.classes.len());
    let mut tests = Vec::new();
    for (c, pool) in pools(manifest, cfg, repeat).into_iter().enumerate() {
        let picked: Vec<usize> =
            sorted_sample(rng, pool.len(), cfg.gallery_sets_per_class).into_iter().map(|i| pool[i]).collect();
        let mut chosen = Vec::with_capacity(picked.len());
        for &s in &picked {
            let len = manifest.classes[c].sets[s].images.len();
            let idx = match cfg.gallery_images_per_set {
                Some(n) => sorted_sample(rng, len, n),
                None => (0..len).collect(),
            };
            chosen.push((s, idx));
        }
        tests.extend(pool.into_iter().filter(|s| !picked.contains(s)).map(|s| (c, s)));
        gallery.push(chosen);
    }
    Split { gallery, tests }
}

/// Runs the protocol with the fast reconstruction path.
pub fn run_protocol(manifest: &DatasetManifest, cfg: &ProtocolConfig) -> Result<ProtocolReport> {
    run_protocol_with(manifest, cfg, Mode::Fast)
}

/// For each repeat: seeded choice of gallery sets and images, gallery
/// formation, then classification of every held-out set. Only
/// `classify_set` is inside the per-set timer; gallery formation is timed
/// on its own.
pub fn run_protocol_with(manifest: &DatasetManifest, cfg: &ProtocolConfig, mode: Mode) -> Result<ProtocolReport> {
    cfg.validate()?;
    check_feasible(manifest, cfg)?;
    let pre = cfg.preprocess();
    let vote = cfg.vote();
    let images = load_reduced(manifest, cfg.dims)?;

    // test vectors do not depend on the split
    let test_sets: Vec<Vec<TestSet<f64>>> = manifest
        .classes
        .iter()
        .zip(&images)
        .map(|(c, sets)| {
            c.sets
                .iter()
                .zip(sets)
                .map(|(s, imgs)| TestSet::from_rasters(imgs, &pre, format!("{}/{}", c.label, s.set_id)))
                .collect::<setrecon_core::Result<Vec<_>>>()
        })
        .collect::<setrecon_core::Result<_>>()?;

    let mut repeats = Vec::with_capacity(cfg.repeats);
    for r in 0..cfg.repeats {
        let seed = derive_seed(cfg.seed, r as u64);
        let mut rng = rng_from_seed(derive_seed(seed, 0));
        let split = draw_split(&mut rng, manifest, cfg, r);

        let classes: Vec<(String, Vec<Raster<f64>>)> = split
            .gallery
            .iter()
            .enumerate()
            .map(|(c, sets)| {
                let pool = &images[c];
                let imgs = sets.iter().flat_map(|(s, idx)| idx.iter().map(move |&i| pool[*s][i].clone())).collect();
                (manifest.classes[c].label.clone(), imgs)
            })
            .collect();
        let gallery_images = classes.iter().map(|(_, v)| v.len()).sum();
        let gallery_sets = split
            .gallery
            .iter()
            .enumerate()
            .flat_map(|(c, sets)| {
                sets.iter().map(move |(s, _)| format!("{}/{}", manifest.classes[c].label, manifest.classes[c].sets[*s].set_id))
            })
            .collect();

        let gallery_seed = derive_seed(seed, 1);
        let opts = GalleryOptions {
            gallery_size: usize::MAX,
            seed: gallery_seed,
            remedy: cfg.remedy.into(),
            precompute_pinv: mode == Mode::Fast,
        };
        let start = Instant::now();
        let gallery = form_gallery(&classes, &pre, &opts)?;
        let gallery_seconds = start.elapsed().as_secs_f64();

        let mut sets = Vec::with_capacity(split.tests.len());
        let mut correct = 0usize;
        for &(c, s) in &split.tests {
            let test = &test_sets[c][s];
            let start = Instant::now();
            let result = classify_set_with(&gallery, test, &vote, mode.solve_path())?;
            let seconds = start.elapsed().as_secs_f64();
            correct += usize::from(result.predicted == c);
            sets.push(SetPrediction {
                set_id: test.set_id.clone(),
                true_label: manifest.classes[c].label.clone(),
                predicted_label: gallery.labels()[result.predicted].clone(),
                decided_by_tie: result.tie,
                seconds,
            });
        }
        let accuracy = correct as f64 / sets.len() as f64;
        log::info!("repeat {r}: accuracy {accuracy:.4} over {} sets", sets.len());
        repeats.push(RepeatReport {
            repeat: r,
            seed,
            gallery_seed,
            gallery_sets,
            gallery_images,
            accuracy,
            gallery_seconds,
            sets,
        });
    }

    let accs: Vec<f64> = repeats.iter().map(|r| r.accuracy).collect();
    let (mean_accuracy, std_accuracy) = mean_std(&accs);
    let gallery_secs: Vec<f64> = repeats.iter().map(|r| r.gallery_seconds).collect();
    let set_secs: Vec<f64> = repeats.iter().flat_map(|r| r.sets.iter().map(|s| s.seconds)).collect();
    Ok(ProtocolReport {
        config: cfg.clone(),
        mode,
        dataset: DatasetSummary {
            root: manifest.root.display().to_string(),
            classes: manifest.classes.len(),
            sets: manifest.set_count(),
            images: manifest.image_count(),
        },
        master_seed: cfg.seed,
        repeats,
        mean_accuracy,
        std_accuracy,
        mean_gallery_seconds: mean_std(&gallery_secs).0,
        mean_set_seconds: mean_std(&set_secs).0,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingTable {
    pub mode: Mode,
    pub mean_gallery_seconds: f64,
    pub mean_set_seconds: f64,
    pub test_sets: usize,
    pub predictions: Vec<String>,
}

/// Gallery-formation and per-set classification times for one mode.
pub fn benchmark_timing(manifest: &DatasetManifest, cfg: &ProtocolConfig, mode: Mode) -> Result<TimingTable> {
    let report = run_protocol_with(manifest, cfg, mode)?;
    let predictions: Vec<String> = report.predictions().into_iter().map(str::to_owned).collect();
    Ok(TimingTable {
        mode,
        mean_gallery_seconds: report.mean_gallery_seconds,
        mean_set_seconds: report.mean_set_seconds,
        test_sets: predictions.len(),
        predictions,
    })
}
