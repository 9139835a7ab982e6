//! Seeded synthetic corpus whose classes lie on random linear subspaces.
//!
//! Each class draws a `T x rank` basis with entries in `[0, 1]`. An image is
//! `255 · u · B · c` with `c` on the probability simplex and `u ∈ [0.5, 1]`,
//! so noiseless pixels stay inside `[0, 255]` without any offset and every
//! image lies exactly in its class subspace up to 8-bit rounding. Gaussian
//! noise of standard deviation `sigma` (pixel units) is added before clamping.

use std::fs;
use std::path::Path;

use rand::Rng;
use rand_distr::{Exp1, StandardNormal};
use serde::{Deserialize, Serialize};
use setrecon_core::seed::{derive_seed, rng_from_seed};

use crate::error::{io_err, HarnessError, Result};
use crate::io::save_gray_png;

pub const GROUND_TRUTH_FILE: &str = "ground_truth.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthParams {
    pub classes: usize,
    pub sets: usize,
    pub images: usize,
    /// `(rows, cols)` of every image.
    pub dims: (usize, usize),
    pub rank: usize,
    pub sigma: f64,
    pub seed: u64,
}

impl SynthParams {
    pub fn validate(&self) -> Result<()> {
        let t = self.dims.0 * self.dims.1;
        let fail = |m: String| Err(HarnessError::InvalidParams(m));
        if self.classes == 0 || self.sets == 0 || self.images == 0 {
            return fail("classes, sets and images must all be at least 1".into());
        }
        if t == 0 {
            return fail(format!("image dims {}x{} are empty", self.dims.0, self.dims.1));
        }
        if self.rank == 0 || self.rank > t {
            return fail(format!("rank must lie in 1..={t} for {}x{} images, got {}", self.dims.0, self.dims.1, self.rank));
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return fail(format!("sigma must be finite and non-negative, got {}", self.sigma));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthClass {
    pub label: String,
    pub sets: Vec<String>,
}

/// Written next to the classes as `ground_truth.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub params: SynthParams,
    pub classes: Vec<SynthClass>,
}

fn padded(prefix: &str, i: usize, count: usize) -> String {
    let width = count.saturating_sub(1).to_string().len().max(2);
    format!("{prefix}_{i:0width$}")
}

pub fn generate_synthetic(p: &SynthParams, out: &Path) -> Result<GroundTruth> {
    p.validate()?;
    let (a, b) = p.dims;
    let t = a * b;
    let r = p.rank;
    let mut truth = GroundTruth { params: p.clone(), classes: Vec::with_capacity(p.classes) };

    for c in 0..p.classes {
        let mut rng = rng_from_seed(derive_seed(p.seed, c as u64));
        // column-major T x r
        let basis: Vec<f64> = (0..t * r).map(|_| rng.random::<f64>()).collect();
        let label = padded("class", c, p.classes);
        let mut set_ids = Vec::with_capacity(p.sets);

        for s in 0..p.sets {
            let set_id = padded("set", s, p.sets);
            let dir = out.join(&label).join(&set_id);
            fs::create_dir_all(&dir).map_err(io_err(&dir))?;
            for i in 0..p.images {
                let scale = 255.0 * rng.random_range(0.5..=1.0);
                let mut coef: Vec<f64> = (0..r).map(|_| rng.sample::<f64, _>(Exp1)).collect();
                let total: f64 = coef.iter().sum();
                coef.iter_mut().for_each(|x| *x *= scale / total);

                let mut pixels = vec![0u8; t];
                for k in 0..t {
                    let clean: f64 = (0..r).map(|j| basis[j * t + k] * coef[j]).sum();
                    let noise = if p.sigma > 0.0 { p.sigma * rng.sample::<f64, _>(StandardNormal) } else { 0.0 };
                    // vector index k = col · a + row, PNG is row-major
                    let (row, col) = (k % a, k / a);
                    pixels[row * b + col] = (clean + noise).round().clamp(0.0, 255.0) as u8;
                }
                save_gray_png(&dir.join(format!("{}.png", padded("img", i, p.images))), b as u32, a as u32, pixels)?;
            }
            set_ids.push(set_id);
        }
        truth.classes.push(SynthClass { label, sets: set_ids });
    }

    let path = out.join(GROUND_TRUTH_FILE);
    let json = serde_json::to_string_pretty(&truth).map_err(|e| HarnessError::Report(e.to_string()))?;
    fs::write(&path, json).map_err(io_err(&path))?;
    Ok(truth)
}
