use std::collections::BTreeMap;
use std::fmt;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::{Map, Value};
use setrecon::io::{has_image_extension, load_raster};
use setrecon::protocol::{Mode, RemedyKind, Strategy};
use setrecon::{
    emit_report, generate_synthetic, ingest_dataset, run_protocol_with, Preset, ProtocolConfig, ReportFormat,
    SynthParams,
};
use setrecon_core::container::{read_gallery, write_gallery};
use setrecon_core::{classify_set, form_gallery, GalleryOptions, PreprocessConfig, TestSet, VoteStrategy};

#[derive(Parser)]
#[command(name = "setrecon", version, about = "Image set classification by linear-regression reconstruction")]
struct Cli {
    /// JSON file supplying defaults for any flag of the chosen subcommand.
    /// Keys are flag names with underscores; a top-level object keyed by
    /// subcommand name (e.g. "benchmark") scopes them.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a seeded synthetic corpus in the ingestion layout.
    Synth(SynthArgs),
    /// Form a gallery from every set of every class and save it.
    BuildGallery(BuildArgs),
    /// Classify one directory of images against a saved gallery.
    Classify(ClassifyArgs),
    /// Run the split-and-repeat protocol and write a report.
    Benchmark(BenchArgs),
}

/// `AxB`: rows by columns.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Dims(usize, usize);

impl FromStr for Dims {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let (a, b) = s.split_once(['x', 'X']).ok_or_else(|| format!("expected AxB, got `{s}`"))?;
        let parse = |v: &str| v.trim().parse::<usize>().map_err(|e| format!("bad dimension `{v}`: {e}"));
        Ok(Dims(parse(a)?, parse(b)?))
    }
}

impl fmt::Display for Dims {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}", self.0, self.1)
    }
}

impl Serialize for Dims {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Dims {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Args, Serialize, Deserialize)]
struct SynthArgs {
    #[arg(long)]
    classes: Option<usize>,
    #[arg(long)]
    sets: Option<usize>,
    #[arg(long)]
    images: Option<usize>,
    #[arg(long)]
    dims: Option<Dims>,
    #[arg(long)]
    rank: Option<usize>,
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Serialize, Deserialize)]
struct BuildArgs {
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    dims: Option<Dims>,
    /// Images drawn per class; all of them when omitted.
    #[arg(long)]
    gallery_images: Option<usize>,
    #[arg(long, value_enum)]
    remedy: Option<RemedyKind>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    equalize: bool,
    #[arg(long)]
    standardize: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Serialize, Deserialize)]
struct ClassifyArgs {
    #[arg(long)]
    gallery: Option<PathBuf>,
    /// Directory holding the test set's images.
    #[arg(long)]
    set: Option<PathBuf>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long, value_enum)]
    strategy: Option<Strategy>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    json: bool,
    /// Include the full class-by-image distance matrix.
    #[arg(long, short)]
    verbose: bool,
}

#[derive(Args, Serialize, Deserialize)]
struct BenchArgs {
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long, value_enum)]
    preset: Option<Preset>,
    #[arg(long, value_enum)]
    mode: Option<Mode>,
    #[arg(long)]
    repeats: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    report: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<ReportFormat>,
    // overrides on top of the preset
    #[arg(long)]
    dims: Option<Dims>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    gallery_sets: Option<usize>,
    #[arg(long)]
    gallery_images: Option<usize>,
    #[arg(long, value_enum)]
    strategy: Option<Strategy>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long, value_enum)]
    remedy: Option<RemedyKind>,
    #[arg(long)]
    equalize: bool,
    #[arg(long)]
    standardize: bool,
    #[arg(long)]
    folds: Option<usize>,
}

/// Fills flags left unset on the command line from the config object.
fn merge_config<T: Serialize + DeserializeOwned>(args: T, config: Option<&Map<String, Value>>, section: &str) -> Result<T> {
    let Some(config) = config else { return Ok(args) };
    let scoped = match config.get(section) {
        Some(Value::Object(m)) => m,
        _ => config,
    };
    let Value::Object(mut merged) = serde_json::to_value(&args)? else { unreachable!("args serialize to an object") };
    for (key, value) in scoped {
        match merged.get_mut(key) {
            Some(slot @ (Value::Null | Value::Bool(false))) => *slot = value.clone(),
            Some(_) => {}
            None => log::warn!("config key `{key}` is not an option of `{section}`"),
        }
    }
    serde_json::from_value(Value::Object(merged)).with_context(|| format!("invalid config for `{section}`"))
}

fn required<T>(v: Option<T>, flag: &str) -> Result<T> {
    v.with_context(|| format!("missing --{flag} (pass the flag or set it in --config)"))
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let config = match &cli.config {
        Some(path) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            match serde_json::from_str::<Value>(&text).with_context(|| format!("parsing {}", path.display()))? {
                Value::Object(m) => Some(m),
                _ => bail!("{} must hold a JSON object", path.display()),
            }
        }
        None => None,
    };
    let config = config.as_ref();

    match cli.command {
        Command::Synth(a) => synth(merge_config(a, config, "synth")?),
        Command::BuildGallery(a) => build_gallery(merge_config(a, config, "build_gallery")?),
        Command::Classify(a) => classify(merge_config(a, config, "classify")?),
        Command::Benchmark(a) => benchmark(merge_config(a, config, "benchmark")?),
    }
}

fn synth(a: SynthArgs) -> Result<()> {
    let dims = required(a.dims, "dims")?;
    let params = SynthParams {
        classes: required(a.classes, "classes")?,
        sets: required(a.sets, "sets")?,
        images: required(a.images, "images")?,
        dims: (dims.0, dims.1),
        rank: required(a.rank, "rank")?,
        sigma: a.sigma.unwrap_or(0.0),
        seed: a.seed.unwrap_or(0),
    };
    let out = required(a.out, "out")?;
    let truth = generate_synthetic(&params, &out)?;
    println!(
        "wrote {} classes x {} sets x {} images ({dims}) to {}",
        truth.classes.len(),
        params.sets,
        params.images,
        out.display()
    );
    Ok(())
}

fn build_gallery(a: BuildArgs) -> Result<()> {
    let data = required(a.data, "data")?;
    let dims = required(a.dims, "dims")?;
    let out = required(a.out, "out")?;
    let manifest = ingest_dataset(&data)?;
    let mut classes = Vec::with_capacity(manifest.classes.len());
    for c in &manifest.classes {
        let imgs = c.sets.iter().flat_map(|s| &s.images).map(|p| load_raster(p)).collect::<setrecon::Result<Vec<_>>>()?;
        classes.push((c.label.clone(), imgs));
    }
    let cfg = PreprocessConfig::new(dims.0, dims.1).with_equalize(a.equalize).with_standardize(a.standardize);
    let opts = GalleryOptions {
        gallery_size: a.gallery_images.unwrap_or(usize::MAX),
        seed: a.seed.unwrap_or(0),
        remedy: a.remedy.unwrap_or_default().into(),
        precompute_pinv: true,
    };
    let gallery = form_gallery(&classes, &cfg, &opts)?;
    let file = File::create(&out).with_context(|| format!("creating {}", out.display()))?;
    let mut w = BufWriter::new(file);
    write_gallery(&gallery, &mut w)?;
    w.flush()?;
    for (label, reg) in gallery.labels().iter().zip(gallery.regressors()) {
        let note = if reg.is_perturbed() { ", perturbed" } else { "" };
        println!("{label}: N = {}, rank {}{note}", reg.cols(), reg.rank());
    }
    println!("gallery of {} classes (T = {}) written to {}", gallery.num_classes(), gallery.vector_len(), out.display());
    Ok(())
}

fn set_images(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    for entry in fs::read_dir(dir).with_context(|| format!("reading {}", dir.display()))? {
        let path = entry?.path();
        let hidden = path.file_name().and_then(|n| n.to_str()).is_some_and(|n| n.starts_with('.'));
        if path.is_file() && !hidden {
            if !has_image_extension(&path) {
                bail!("{} is not a supported image (png, pgm, pnm, bmp)", path.display());
            }
            files.push(path);
        }
    }
    files.sort();
    if files.is_empty() {
        bail!("{} holds no images", dir.display());
    }
    Ok(files)
}

#[derive(Serialize)]
struct ClassifyRecord {
    set_id: String,
    predicted_label: String,
    tie: bool,
    #[serde(rename = "Theta")]
    theta: BTreeMap<String, f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    distances: Option<BTreeMap<String, Vec<f64>>>,
}

fn classify(a: ClassifyArgs) -> Result<()> {
    let gallery_path = required(a.gallery, "gallery")?;
    let set_dir = required(a.set, "set")?;
    let strategy = a.strategy.unwrap_or_default();
    let vote = match strategy {
        Strategy::Exponential => VoteStrategy::Exponential { alpha: required(a.alpha, "alpha")? },
        Strategy::Majority => VoteStrategy::Majority,
        Strategy::Knn => VoteStrategy::Knn { k: required(a.k, "k")? },
    };
    let file = File::open(&gallery_path).with_context(|| format!("opening {}", gallery_path.display()))?;
    let gallery = read_gallery::<f64, _>(BufReader::new(file))?;

    let rasters = set_images(&set_dir)?.iter().map(|p| load_raster(p)).collect::<setrecon::Result<Vec<_>>>()?;
    let set_id = set_dir.file_name().map_or_else(|| set_dir.display().to_string(), |n| n.to_string_lossy().into_owned());
    let test = TestSet::from_rasters(&rasters, gallery.preprocess_config(), set_id)?;
    let result = classify_set(&gallery, &test, &vote)?;

    let labels = gallery.labels();
    let record = ClassifyRecord {
        set_id: test.set_id.clone(),
        predicted_label: labels[result.predicted].clone(),
        tie: result.tie,
        theta: labels.iter().cloned().zip(result.scores.iter().copied()).collect(),
        distances: a.verbose.then(|| {
            labels
                .iter()
                .enumerate()
                .map(|(c, l)| (l.clone(), (0..test.len()).map(|m| result.distances[(c, m)]).collect()))
                .collect()
        }),
    };

    if a.json {
        println!("{}", serde_json::to_string_pretty(&record)?);
        return Ok(());
    }
    let tie = if record.tie { " (tie)" } else { "" };
    println!("{}: {}{tie}", record.set_id, record.predicted_label);
    for (label, score) in &record.theta {
        println!("  {label:<20} {score:.6}");
    }
    if let Some(d) = &record.distances {
        for (label, row) in d {
            let cells: Vec<String> = row.iter().map(|v| format!("{v:.4}")).collect();
            println!("  d[{label}] = {}", cells.join(" "));
        }
    }
    Ok(())
}

fn benchmark(a: BenchArgs) -> Result<()> {
    let data = required(a.data, "data")?;
    let report_path = required(a.report, "report")?;
    let mut cfg: ProtocolConfig = a.preset.unwrap_or(Preset::Custom).config();
    if let Some(v) = a.repeats {
        cfg.repeats = v;
    }
    if let Some(v) = a.seed {
        cfg.seed = v;
    }
    if let Some(Dims(r, c)) = a.dims {
        cfg.dims = (r, c);
    }
    if let Some(v) = a.alpha {
        cfg.alpha = v;
    }
    if let Some(v) = a.gallery_sets {
        cfg.gallery_sets_per_class = v;
    }
    if a.gallery_images.is_some() {
        cfg.gallery_images_per_set = a.gallery_images;
    }
    if let Some(v) = a.strategy {
        cfg.strategy = v;
    }
    if let Some(v) = a.k {
        cfg.k = v;
    }
    if let Some(v) = a.remedy {
        cfg.remedy = v;
    }
    if a.folds.is_some() {
        cfg.folds = a.folds;
    }
    cfg.equalize |= a.equalize;
    cfg.standardize |= a.standardize;

    let manifest = ingest_dataset(&data)?;
    let mode = a.mode.unwrap_or_default();
    let report = run_protocol_with(&manifest, &cfg, mode)?;
    emit_report(&report, a.format.unwrap_or_default(), &report_path)?;
    println!(
        "accuracy {:.2} ± {:.2} % over {} repeats; {:?} mode, {:.6} s per set, {:.6} s per gallery",
        100.0 * report.mean_accuracy,
        100.0 * report.std_accuracy,
        report.repeats.len(),
        mode,
        report.mean_set_seconds,
        report.mean_gallery_seconds
    );
    Ok(())
}
