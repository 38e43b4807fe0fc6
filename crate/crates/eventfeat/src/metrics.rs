//! CSV outputs.

use std::fmt::Write as _;
use std::path::Path;

use crate::config::PipelineConfig;
use crate::error::{HarnessError, Result};
use crate::pipeline::Evaluation;

pub const METRICS_HEADER: &str = "setting,formulation,K,Bx,By,Tl,intervals,accuracy,seconds";

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRow {
    pub setting: String,
    pub formulation: String,
    pub basis_size: usize,
    pub block_width: usize,
    pub block_height: usize,
    pub volume_length: usize,
    pub intervals: usize,
    pub accuracy: f64,
    pub seconds: f64,
}

impl MetricsRow {
    pub fn new(setting: impl Into<String>, cfg: &PipelineConfig, accuracy: f64, seconds: f64) -> Self {
        Self {
            setting: setting.into(),
            formulation: cfg.formulation.name().to_string(),
            basis_size: cfg.basis_size,
            block_width: cfg.volume.width,
            block_height: cfg.volume.height,
            volume_length: cfg.volume.length,
            intervals: cfg.intervals,
            accuracy,
            seconds,
        }
    }

    /// With `timing` off the seconds column is written as 0 so the file is
    /// reproducible byte for byte.
    pub fn to_csv(&self, timing: bool) -> String {
        format!(
            "{},{},{},{},{},{},{},{:.6},{:.3}",
            self.setting,
            self.formulation,
            self.basis_size,
            self.block_width,
            self.block_height,
            self.volume_length,
            self.intervals,
            self.accuracy,
            if timing { self.seconds } else { 0.0 }
        )
    }
}

fn write(path: &Path, text: String) -> Result<()> {
    std::fs::write(path, text).map_err(|e| HarnessError::io(path, e))
}

pub fn metrics_csv(rows: &[MetricsRow], timing: bool) -> String {
    let mut s = format!("{METRICS_HEADER}\n");
    for r in rows {
        s.push_str(&r.to_csv(timing));
        s.push('\n');
    }
    s
}

pub fn write_metrics(path: &Path, rows: &[MetricsRow], timing: bool) -> Result<()> {
    write(path, metrics_csv(rows, timing))
}

/// `label,class,count,accuracy`; classes absent from the test split get an
/// empty accuracy.
pub fn per_class_csv(classes: &[String], eval: &Evaluation) -> String {
    let mut s = String::from("label,class,count,accuracy\n");
    for (i, name) in classes.iter().enumerate() {
        let n: usize = eval.confusion[i].iter().sum();
        let acc = eval.class_accuracy(i).map(|a| format!("{a:.6}")).unwrap_or_default();
        let _ = writeln!(s, "{i},{name},{n},{acc}");
    }
    s
}

pub fn write_per_class(path: &Path, classes: &[String], eval: &Evaluation) -> Result<()> {
    write(path, per_class_csv(classes, eval))
}

/// Rows are true classes, columns predicted classes.
pub fn confusion_csv(classes: &[String], eval: &Evaluation) -> String {
    let mut s = String::from("true\\predicted");
    for name in classes {
        let _ = write!(s, ",{name}");
    }
    s.push('\n');
    for (name, row) in classes.iter().zip(&eval.confusion) {
        s.push_str(name);
        for n in row {
            let _ = write!(s, ",{n}");
        }
        s.push('\n');
    }
    s
}

pub fn write_confusion(path: &Path, classes: &[String], eval: &Evaluation) -> Result<()> {
    write(path, confusion_csv(classes, eval))
}
