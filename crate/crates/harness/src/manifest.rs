//! Directory-layout ingestion: `root/<class>/<set>/<image files>`.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{io_err, HarnessError, Result};
use crate::io::{load_raster, probe};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SetEntry {
    pub set_id: String,
    pub images: Vec<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassEntry {
    pub label: String,
    pub sets: Vec<SetEntry>,
}

/// Classes, sets and image paths in lexicographic order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub root: PathBuf,
    pub classes: Vec<ClassEntry>,
}

impl DatasetManifest {
    pub fn image_count(&self) -> usize {
        self.classes.iter().flat_map(|c| &c.sets).map(|s| s.images.len()).sum()
    }

    pub fn set_count(&self) -> usize {
        self.classes.iter().map(|c| c.sets.len()).sum()
    }

    /// Decodes every image. Indexing mirrors the manifest: `[class][set][image]`.
    pub fn load(&self) -> Result<Vec<Vec<Vec<setrecon_core::Raster<f64>>>>> {
        self.classes
            .iter()
            .map(|c| c.sets.iter().map(|s| s.images.iter().map(|p| load_raster(p)).collect()).collect())
            .collect()
    }
}

fn is_hidden(path: &Path) -> bool {
    path.file_name().and_then(|n| n.to_str()).is_some_and(|n| n.starts_with('.'))
}

fn sorted_entries(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for entry in fs::read_dir(dir).map_err(io_err(dir))? {
        let path = entry.map_err(io_err(dir))?.path();
        if !is_hidden(&path) {
            out.push(path);
        }
    }
    out.sort();
    Ok(out)
}

fn name_of(path: &Path) -> String {
    path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default()
}

/// Walks `root` and validates every image header.
///
/// Regular files directly under `root` are ignored so metadata such as a
/// ground-truth record can sit next to the classes. Every other problem is
/// collected and reported together.
pub fn ingest_dataset(root: &Path) -> Result<DatasetManifest> {
    if !root.is_dir() {
        return Err(HarnessError::Ingest(vec![format!("{} is not a directory", root.display())]));
    }
    let mut problems = Vec::new();
    let mut classes = Vec::new();

    for class_dir in sorted_entries(root)?.into_iter().filter(|p| p.is_dir()) {
        let label = name_of(&class_dir);
        let mut sets = Vec::new();
        for set_dir in sorted_entries(&class_dir)? {
            if !set_dir.is_dir() {
                problems.push(format!("{}: file outside a set directory", set_dir.display()));
                continue;
            }
            let mut images = Vec::new();
            for file in sorted_entries(&set_dir)? {
                if file.is_dir() {
                    problems.push(format!("{}: nested directory inside a set", file.display()));
                } else if let Err(e) = probe(&file) {
                    problems.push(format!("unreadable image {e}"));
                } else {
                    images.push(file);
                }
            }
            if images.is_empty() {
                problems.push(format!("{}: set has no images", set_dir.display()));
            }
            sets.push(SetEntry { set_id: name_of(&set_dir), images });
        }
        if sets.is_empty() {
            problems.push(format!("{}: class has no sets", class_dir.display()));
        }
        classes.push(ClassEntry { label, sets });
    }

    if classes.is_empty() {
        problems.insert(0, format!("{}: no class directories", root.display()));
    }
    if !problems.is_empty() {
        return Err(HarnessError::Ingest(problems));
    }
    Ok(DatasetManifest { root: root.to_path_buf(), classes })
}
