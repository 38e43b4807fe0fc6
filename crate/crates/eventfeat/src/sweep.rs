//! One-at-a-time parameter sweeps around a base config.

use crate::config::PipelineConfig;
use crate::dataset::Dataset;
use crate::error::Result;
use crate::metrics::MetricsRow;
use crate::pipeline;

/// Configs for every sweep value, each differing from `base` in one
/// parameter. An interval count below the volume length shortens the
/// volume to fit. Without any sweep values the base config runs alone.
pub fn settings(base: &PipelineConfig) -> Vec<(String, PipelineConfig)> {
    let mut out = Vec::new();
    for &k in &base.sweep_basis_size {
        let mut c = base.clone();
        c.basis_size = k;
        out.push((format!("basis_size={k}"), c));
    }
    for &t in &base.sweep_intervals {
        let mut c = base.clone();
        c.intervals = t;
        c.volume.length = c.volume.length.min(t);
        out.push((format!("intervals={t}"), c));
    }
    for &v in &base.sweep_volume {
        let mut c = base.clone();
        c.volume = v;
        out.push((format!("volume={v}"), c));
    }
    if out.is_empty() {
        out.push(("base".to_string(), base.clone()));
    }
    out
}

pub fn run_sweep(base: &PipelineConfig, data: &Dataset, mut progress: impl FnMut(&MetricsRow)) -> Result<Vec<MetricsRow>> {
    let all = settings(base);
    for (_, c) in &all {
        c.validate()?;
    }
    let mut rows = Vec::with_capacity(all.len());
    for (name, c) in all {
        let out = pipeline::run(&c, data)?;
        let row = MetricsRow::new(name, &c, out.evaluation.accuracy, out.seconds);
        progress(&row);
        rows.push(row);
    }
    Ok(rows)
}
