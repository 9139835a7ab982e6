use std::path::Path;

use setrecon::protocol::{mean_std, DatasetSummary, Mode, RepeatReport, SetPrediction};
use setrecon::report::{accuracies_from_rows, csv_rows, CsvRow};
use setrecon::{emit_report, ProtocolConfig, ProtocolReport, ReportFormat};

fn prediction(set: &str, truth: &str, predicted: &str) -> SetPrediction {
    SetPrediction {
        set_id: set.into(),
        true_label: truth.into(),
        predicted_label: predicted.into(),
        decided_by_tie: false,
        seconds: 0.001,
    }
}

fn report(repeats: Vec<Vec<SetPrediction>>) -> ProtocolReport {
    let repeats: Vec<RepeatReport> = repeats
        .into_iter()
        .enumerate()
        .map(|(i, sets)| RepeatReport {
            repeat: i,
            seed: i as u64,
            gallery_seed: 0,
            gallery_sets: vec![],
            gallery_images: 0,
            accuracy: sets.iter().filter(|s| s.true_label == s.predicted_label).count() as f64 / sets.len() as f64,
            gallery_seconds: 0.0,
            sets,
        })
        .collect();
    let (mean_accuracy, std_accuracy) = mean_std(&repeats.iter().map(|r| r.accuracy).collect::<Vec<_>>());
    ProtocolReport {
        config: ProtocolConfig::default(),
        mode: Mode::Fast,
        dataset: DatasetSummary { root: "x".into(), classes: 2, sets: 4, images: 8 },
        master_seed: 0,
        repeats,
        mean_accuracy,
        std_accuracy,
        mean_gallery_seconds: 0.0,
        mean_set_seconds: 0.001,
    }
}

fn read_rows(path: &Path) -> Vec<CsvRow> {
    csv::Reader::from_path(path).unwrap().deserialize().collect::<Result<_, _>>().unwrap()
}

#[test]
fn one_repeat_three_sets_gives_three_rows() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("r.csv");
    let r = report(vec![vec![prediction("a/1", "a", "a"), prediction("a/2", "a", "b"), prediction("b/1", "b", "b")]]);
    emit_report(&r, ReportFormat::Csv, &path).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 4);
    assert_eq!(lines[0], "repeat,set_id,true_label,predicted_label,decided_by_tie,seconds");
    assert_eq!(read_rows(&path), csv_rows(&r));
}

#[test]
fn json_and_csv_agree_on_aggregates() {
    let dir = tempfile::tempdir().unwrap();
    let r = report(vec![
        vec![prediction("a/1", "a", "a"), prediction("b/1", "b", "a")],
        vec![prediction("a/2", "a", "a"), prediction("b/2", "b", "b")],
        vec![prediction("a/3", "a", "b"), prediction("b/3", "b", "a")],
    ]);
    let (jp, cp) = (dir.path().join("r.json"), dir.path().join("r.csv"));
    emit_report(&r, ReportFormat::Json, &jp).unwrap();
    emit_report(&r, ReportFormat::Csv, &cp).unwrap();

    let parsed: ProtocolReport = serde_json::from_str(&std::fs::read_to_string(&jp).unwrap()).unwrap();
    assert_eq!(parsed, r);
    let accs = accuracies_from_rows(&read_rows(&cp));
    assert_eq!(accs, parsed.accuracies());
    assert_eq!(mean_std(&accs), (parsed.mean_accuracy, parsed.std_accuracy));
}

#[test]
fn bad_paths_are_errors() {
    let r = report(vec![vec![prediction("a/1", "a", "a")]]);
    assert!(emit_report(&r, ReportFormat::Json, Path::new("")).is_err());
    assert!(emit_report(&r, ReportFormat::Csv, Path::new("/nonexistent-dir/r.csv")).is_err());
}
