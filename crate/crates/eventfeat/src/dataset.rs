//! Dataset layout: one subdirectory per class holding `.bin` event files,
//! either directly under the root (split here) or under `train/` and
//! `test/` (`Train/` and `Test/` also work).

use std::path::{Path, PathBuf};

use eventfeat_core::events::{parse_event_file, write_event_file, EventStream, SensorGeometry};
use eventfeat_core::rng;
use rayon::prelude::*;

use crate::config::PipelineConfig;
use crate::error::{HarnessError, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Recording {
    pub path: PathBuf,
    pub label: u32,
    pub stream: EventStream,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    /// Class names; a label indexes this list.
    pub classes: Vec<String>,
    pub train: Vec<Recording>,
    pub test: Vec<Recording>,
}

fn sorted_entries(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| HarnessError::io(dir, e))?
        .map(|e| e.map(|e| e.path()).map_err(|e| HarnessError::io(dir, e)))
        .collect::<Result<_>>()?;
    out.sort();
    Ok(out)
}

fn class_dirs(dir: &Path) -> Result<Vec<(String, PathBuf)>> {
    Ok(sorted_entries(dir)?
        .into_iter()
        .filter(|p| p.is_dir())
        .filter_map(|p| Some((p.file_name()?.to_str()?.to_string(), p)))
        .collect())
}

fn split_dir(root: &Path, name: &str) -> Option<PathBuf> {
    let capitalized = format!("{}{}", name[..1].to_uppercase(), &name[1..]);
    [root.join(name), root.join(capitalized)].into_iter().find(|p| p.is_dir())
}

fn event_files(dir: &Path) -> Result<Vec<PathBuf>> {
    Ok(sorted_entries(dir)?
        .into_iter()
        .filter(|p| p.is_file() && p.extension().is_some_and(|e| e == "bin"))
        .collect())
}

pub fn read_recording(path: &Path, geometry: SensorGeometry, downsample: usize) -> Result<EventStream> {
    let bytes = std::fs::read(path).map_err(|e| HarnessError::io(path, e))?;
    let stream = parse_event_file(&bytes, geometry).map_err(|e| HarnessError::Data(format!("{}: {e}", path.display())))?;
    Ok(if downsample > 1 { stream.downsample(downsample) } else { stream })
}

pub fn write_recording(path: &Path, stream: &EventStream) -> Result<()> {
    let bytes = write_event_file(stream)?;
    std::fs::write(path, bytes).map_err(|e| HarnessError::io(path, e))
}

fn read_all(files: Vec<(PathBuf, u32)>, cfg: &PipelineConfig) -> Result<Vec<Recording>> {
    files
        .into_par_iter()
        .map(|(path, label)| {
            let stream = read_recording(&path, cfg.raw_geometry(), cfg.downsample)?;
            Ok(Recording { path, label, stream })
        })
        .collect()
}

/// Loads a dataset. Without `train/` and `test/` subdirectories each class
/// is shuffled with the config seed and its first `round(n *
/// test_fraction)` files (at least one when the class has two or more) are
/// held out.
pub fn load_dataset(root: &Path, cfg: &PipelineConfig) -> Result<Dataset> {
    if !root.is_dir() {
        return Err(HarnessError::Data(format!("dataset directory {} not found", root.display())));
    }
    let (classes, train_files, test_files) = if let (Some(train_dir), Some(test_dir)) = (split_dir(root, "train"), split_dir(root, "test")) {
        let train_classes = class_dirs(&train_dir)?;
        let classes: Vec<String> = train_classes.iter().map(|(n, _)| n.clone()).collect();
        let mut train = Vec::new();
        for (label, (_, dir)) in train_classes.iter().enumerate() {
            train.extend(event_files(dir)?.into_iter().map(|p| (p, label as u32)));
        }
        let mut test = Vec::new();
        for (name, dir) in class_dirs(&test_dir)? {
            let label = classes
                .iter()
                .position(|c| *c == name)
                .ok_or_else(|| HarnessError::Data(format!("test class {name:?} has no training directory")))?;
            test.extend(event_files(&dir)?.into_iter().map(|p| (p, label as u32)));
        }
        (classes, train, test)
    } else {
        let dirs = class_dirs(root)?;
        let classes: Vec<String> = dirs.iter().map(|(n, _)| n.clone()).collect();
        let mut r = rng::seeded(cfg.seed ^ SPLIT_SALT);
        let (mut train, mut test) = (Vec::new(), Vec::new());
        for (label, (_, dir)) in dirs.iter().enumerate() {
            let mut files = event_files(dir)?;
            rng::shuffle(&mut r, &mut files);
            let n = files.len();
            let mut held = (n as f64 * cfg.test_fraction).round() as usize;
            if n >= 2 {
                held = held.clamp(1, n - 1);
            }
            for (i, p) in files.into_iter().enumerate() {
                if i < held { &mut test } else { &mut train }.push((p, label as u32));
            }
        }
        (classes, train, test)
    };
    if classes.len() < 2 {
        return Err(HarnessError::Data(format!("dataset {} needs at least two class directories", root.display())));
    }
    if train_files.is_empty() {
        return Err(HarnessError::Data(format!("dataset {} has no .bin event files", root.display())));
    }
    Ok(Dataset {
        classes,
        train: read_all(train_files, cfg)?,
        test: read_all(test_files, cfg)?,
    })
}

// Keeps the split stream apart from the other seeded streams.
const SPLIT_SALT: u64 = 0x5EED_5B17;
