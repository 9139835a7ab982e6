//! One line per acceptance criterion, written straight to stderr so it shows
//! even when libtest captures output. Criteria run one at a time because
//! several of them measure wall-clock time.

use std::io::Write;
use std::path::Path;
use std::process::Command;
use std::sync::Mutex;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use setrecon::protocol::{benchmark_timing, Mode, RemedyKind};
use setrecon::{generate_synthetic, ingest_dataset, run_protocol, Preset, ProtocolConfig, SynthParams};
use setrecon_core::linalg::{relative_diff, Matrix};
use setrecon_core::{
    classify_set, classify_stream, form_gallery, GalleryOptions, ImageVector, PreprocessConfig, Raster, Regressor,
    Remedy, SolvePath, StreamState, TestSet, VoteStrategy,
};

static SERIAL: Mutex<()> = Mutex::new(());

fn verdict(id: u32, pass: bool, detail: String) {
    let status = if pass { "PASS" } else { "FAIL" };
    let _ = writeln!(std::io::stderr().lock(), "acceptance {id}: {status} | {detail}");
    assert!(pass, "criterion {id}: {detail}");
}

fn gaussian(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Matrix<f64> {
    let data = (0..rows * cols).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
    Matrix::from_col_major(rows, cols, data).unwrap()
}

#[test]
fn criterion_1_solver_properties() {
    let _guard = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let (t, n, m) = (400, 50, 40);
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (mut idem, mut orth, mut agree) = (0f64, 0f64, 0f64);
    for _ in 0..200 {
        let q = gaussian(t, n, &mut rng);
        let x = gaussian(t, m, &mut rng);
        let reg = Regressor::from_matrix(q.clone(), 0).unwrap().precompute_pinv();
        assert_eq!(reg.rank(), n);
        let normal = reg.reconstruct_with(&x, SolvePath::Normal).unwrap().x_hat;
        let qr = reg.reconstruct_with(&x, SolvePath::Qr).unwrap().x_hat;
        let pinv = reg.reconstruct_with(&x, SolvePath::Pinv).unwrap().x_hat;

        let again = reg.reconstruct_with(&pinv, SolvePath::Pinv).unwrap().x_hat;
        idem = idem.max(relative_diff(&again, &pinv));
        let resid = x.sub(&pinv).unwrap();
        orth = orth.max(q.tr_matmul(&resid).unwrap().frobenius_norm() / (q.frobenius_norm() * x.frobenius_norm()));
        agree = agree
            .max(relative_diff(&normal, &qr))
            .max(relative_diff(&normal, &pinv))
            .max(relative_diff(&qr, &pinv));
    }
    let secs = start.elapsed().as_secs_f64();
    let pass = idem < 1e-8 && orth < 1e-8 && agree < 1e-6 && secs < 30.0;
    verdict(
        1,
        pass,
        format!("200 problems 400x50x40: idempotence {idem:.2e}, orthogonality {orth:.2e} (< 1e-8), path agreement {agree:.2e} (< 1e-6), {secs:.2} s (< 30 s)"),
    );
}

#[test]
fn criterion_2_batch_equals_per_vector() {
    let _guard = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst = 0f64;
    for _ in 0..50 {
        let reg = Regressor::from_matrix(gaussian(400, 50, &mut rng), 0).unwrap();
        let x = gaussian(400, 40, &mut rng);
        let batch = reg.reconstruct_with(&x, SolvePath::Normal).unwrap();
        let single = reg.reconstruct_with(&x, SolvePath::NormalPerVector).unwrap();
        worst = worst.max(relative_diff(&single.x_hat, &batch.x_hat));
        let g_batch = reg.solve_gamma_normal(&x).unwrap();
        let ne = reg.normal_equations().unwrap();
        let g_cols: Vec<Vec<f64>> = x.columns().map(|c| ne.gamma(c).unwrap()).collect();
        worst = worst.max(relative_diff(&Matrix::from_columns(&g_cols).unwrap(), g_batch.matrix()));
        for (a, b) in single.distances.iter().zip(&batch.distances) {
            worst = worst.max((a - b).abs() / b);
        }
    }
    verdict(2, worst < 1e-12, format!("50 instances: worst relative difference {worst:.2e} (< 1e-12)"));
}

fn pixel_raster(rng: &mut ChaCha8Rng) -> Raster<f64> {
    let data: Vec<u8> = (0..16 * 16).map(|_| rng.random()).collect();
    Raster::from_u8(16, 16, 1, &data).unwrap()
}

#[test]
fn criterion_3_singularity_remedies() {
    let _guard = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut classes: Vec<(String, Vec<Raster<f64>>)> =
        (0..3).map(|c| (format!("c{c}"), (0..6).map(|_| pixel_raster(&mut rng)).collect())).collect();
    // class 0 gets an exact duplicate column
    let dup = classes[0].1[2].clone();
    classes[0].1.push(dup);
    let cfg = PreprocessConfig::new(16, 16);
    let raw = {
        let cols: Vec<Vec<f64>> =
            classes[0].1.iter().map(|r| setrecon_core::vectorize(r).unwrap().into_values()).collect();
        Matrix::from_columns(&cols).unwrap()
    };
    let test = TestSet::from_rasters(&classes[0].1[..4], &cfg, "c0-probe").unwrap();
    let vote = VoteStrategy::Exponential { alpha: 0.2 };

    let mut notes = Vec::new();
    let mut pass = true;
    for remedy in [Remedy::Perturb, Remedy::Qr] {
        let opts = GalleryOptions { seed: 2024, remedy, ..Default::default() };
        let outcome = form_gallery(&classes, &cfg, &opts).and_then(|g| classify_set(&g, &test, &vote).map(|r| (g, r)));
        match outcome {
            Ok((g, r)) => {
                let reg = &g.regressors()[0];
                pass &= r.predicted == 0;
                match remedy {
                    Remedy::Perturb => {
                        let shift = reg.matrix().sub(&raw).unwrap().max_abs();
                        pass &= reg.is_perturbed() && shift <= 0.5 && reg.rank() == reg.cols();
                        notes.push(format!("perturb: max shift {shift:.3} (<= 0.5), rank {}/{}", reg.rank(), reg.cols()));
                    }
                    Remedy::Qr => {
                        pass &= reg.rank() == 6 && reg.pinv().is_none();
                        notes.push(format!("qr: rank {}/{}, classified as c{}", reg.rank(), reg.cols(), r.predicted));
                    }
                }
            }
            Err(e) => {
                pass = false;
                notes.push(format!("{remedy:?} failed: {e}"));
            }
        }
    }
    verdict(3, pass, notes.join("; "));
}

fn synth_corpus(dir: &Path, classes: usize, sets: usize, images: usize, sigma: f64, seed: u64) {
    let p = SynthParams { classes, sets, images, dims: (32, 32), rank: 10, sigma, seed };
    generate_synthetic(&p, dir).unwrap();
}

#[test]
fn criterion_4_synthetic_oracle() {
    let _guard = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let start = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    synth_corpus(dir.path(), 8, 5, 41, 0.0, 4);
    let manifest = ingest_dataset(dir.path()).unwrap();
    let cfg = ProtocolConfig { dims: (32, 32), standardize: true, repeats: 10, seed: 40, ..Default::default() };
    let report = run_protocol(&manifest, &cfg).unwrap();
    let secs = start.elapsed().as_secs_f64();

    // sanity curve: noise until within-class residuals rival between-class ones
    let sigmas = [0.0, 100.0, 150.0, 200.0, 300.0];
    let mut curve = Vec::new();
    for &sigma in &sigmas {
        let d = tempfile::tempdir().unwrap();
        synth_corpus(d.path(), 8, 5, 41, sigma, 4);
        let m = ingest_dataset(d.path()).unwrap();
        curve.push(run_protocol(&m, &ProtocolConfig { repeats: 3, ..cfg.clone() }).unwrap().mean_accuracy);
    }
    let monotone = curve.windows(2).all(|w| w[1] <= w[0]);
    let degraded = curve.last() < curve.first();

    let pass = report.mean_accuracy == 1.0 && report.std_accuracy == 0.0 && secs < 60.0 && monotone && degraded;
    let pts: Vec<String> = sigmas.iter().zip(&curve).map(|(s, a)| format!("{s}:{a:.3}")).collect();
    verdict(
        4,
        pass,
        format!(
            "C=8 T=1024 rank 10, 10 repeats: accuracy {:.3} ± {:.3}, {secs:.1} s (< 60 s); sigma curve [{}] monotone {monotone}",
            report.mean_accuracy,
            report.std_accuracy,
            pts.join(", ")
        ),
    );
}

#[test]
fn criterion_5_fast_path_speedup() {
    let _guard = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let dir = tempfile::tempdir().unwrap();
    // 5 gallery sets x 41 = 205 gallery images per class, one 41-image test set per class
    synth_corpus(dir.path(), 8, 6, 41, 5.0, 5);
    let manifest = ingest_dataset(dir.path()).unwrap();
    let cfg = ProtocolConfig { repeats: 2, seed: 50, ..Preset::Eth80.config() };
    let fast = benchmark_timing(&manifest, &cfg, Mode::Fast).unwrap();
    let naive = benchmark_timing(&manifest, &cfg, Mode::Naive).unwrap();
    let ratio = fast.mean_set_seconds / naive.mean_set_seconds;
    let same = fast.predictions == naive.predictions;
    verdict(
        5,
        ratio <= 0.7 && same,
        format!(
            "8 classes x 205 gallery images at 32x32: fast {:.5} s/set, naive {:.5} s/set, ratio {ratio:.3} (<= 0.7), identical predictions {same} over {} sets",
            fast.mean_set_seconds, naive.mean_set_seconds, fast.test_sets
        ),
    );
}

#[test]
fn criterion_6_streaming_equivalence() {
    let _guard = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let (c, t, n) = (6, 120, 12);
    let regs = (0..c).map(|i| Regressor::from_matrix(gaussian(t, n, &mut rng), i as u32).unwrap().precompute_pinv()).collect();
    let labels = (0..c).map(|i| format!("c{i}")).collect();
    let gallery = setrecon_core::Gallery::new(regs, labels, PreprocessConfig::new(t, 1)).unwrap();

    let (mut decisions_equal, mut worst) = (true, 0f64);
    for s in 0..100 {
        let m = rng.random_range(1..=30);
        let x = gaussian(t, m, &mut rng);
        let vote = if s % 2 == 0 { VoteStrategy::Exponential { alpha: 0.3 } } else { VoteStrategy::Majority };
        let batch = classify_set(&gallery, &TestSet::new(x.clone(), "s").unwrap(), &vote).unwrap();
        let mut state = StreamState::new();
        let mut last = None;
        for col in x.columns() {
            let (next, r) = classify_stream(&gallery, state, &ImageVector::new(col.to_vec(), (t, 1)).unwrap(), &vote).unwrap();
            state = next;
            last = Some(r);
        }
        let last = last.unwrap();
        decisions_equal &= last.predicted == batch.predicted && last.tie == batch.tie;
        for (a, b) in last.scores.iter().zip(&batch.scores) {
            worst = worst.max((a - b).abs());
        }
    }
    verdict(
        6,
        decisions_equal && worst <= 1e-12,
        format!("100 sets (exponential and majority): decisions equal {decisions_equal}, max |Theta diff| {worst:.2e} (<= 1e-12)"),
    );
}

fn strip_timing(v: &mut serde_json::Value) {
    match v {
        serde_json::Value::Object(m) => {
            m.retain(|k, _| !k.ends_with("seconds"));
            m.values_mut().for_each(strip_timing);
        }
        serde_json::Value::Array(a) => a.iter_mut().for_each(strip_timing),
        _ => {}
    }
}

fn without_last_column(csv: &str) -> String {
    csv.lines().map(|l| l.rsplit_once(',').map_or(l, |(head, _)| head)).collect::<Vec<_>>().join("\n")
}

#[test]
fn criterion_7_cli_determinism() {
    let _guard = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    synth_corpus(&data, 4, 4, 12, 20.0, 7);
    let bin = env!("CARGO_BIN_EXE_setrecon");
    let mut same = true;
    for format in ["json", "csv"] {
        let mut outputs = Vec::new();
        for run in 0..2 {
            let report = dir.path().join(format!("run{run}.{format}"));
            let status = Command::new(bin)
                .args(["benchmark", "--data", data.to_str().unwrap(), "--preset", "custom", "--mode", "fast"])
                .args(["--repeats", "4", "--seed", "77", "--format", format, "--report", report.to_str().unwrap()])
                .output()
                .unwrap();
            assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
            let text = std::fs::read_to_string(&report).unwrap();
            outputs.push(if format == "json" {
                let mut v: serde_json::Value = serde_json::from_str(&text).unwrap();
                strip_timing(&mut v);
                serde_json::to_string(&v).unwrap()
            } else {
                without_last_column(&text)
            });
        }
        same &= outputs[0] == outputs[1];
    }
    verdict(7, same, format!("two `benchmark` runs, json and csv: identical modulo timing fields = {same}"));
}

#[test]
fn criterion_8_eth80_accuracy() {
    let _guard = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let Some(root) = std::env::var_os("ETH80_DIR") else {
        let _ = writeln!(
            std::io::stderr().lock(),
            "acceptance 8: SKIP | set ETH80_DIR to a pre-cropped ETH-80 tree (class/object/images) to run the eth80 preset"
        );
        return;
    };
    let manifest = ingest_dataset(Path::new(&root)).unwrap();
    let cfg = ProtocolConfig { repeats: 10, seed: 0, remedy: RemedyKind::Perturb, ..Preset::Eth80.config() };
    let report = run_protocol(&manifest, &cfg).unwrap();
    let mean = report.mean_accuracy;
    verdict(
        8,
        (0.88..=1.0).contains(&mean),
        format!("ETH-80, eth80 preset, 10 repeats: {:.2} ± {:.2} % (within [88, 100])", 100.0 * mean, 100.0 * report.std_accuracy),
    );
}
