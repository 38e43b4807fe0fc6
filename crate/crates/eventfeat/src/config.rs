//! Flat `key = value` pipeline configuration.
//!
//! Lines starting with `#` and text after an unquoted `#` are comments.
//! Every key is optional; [`KEYS`] lists them with their defaults.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use eventfeat_core::direct::DirectHyperparams;
use eventfeat_core::events::SensorGeometry;
use eventfeat_core::inverse::InverseHyperparams;
use eventfeat_core::volumes::AccumulationConfig;

use crate::error::{HarnessError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Formulation {
    Inverse,
    Direct,
}

impl Formulation {
    pub fn name(self) -> &'static str {
        match self {
            Formulation::Inverse => "inverse",
            Formulation::Direct => "direct",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "inverse" => Some(Formulation::Inverse),
            "direct" => Some(Formulation::Direct),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EncoderKind {
    /// Triangle encoding against the normalized basis vectors.
    Triangle,
    /// The learner's own codes (LASSO or soft threshold).
    Native,
}

/// `T_l x B_x x B_y`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VolumeShape {
    pub length: usize,
    pub width: usize,
    pub height: usize,
}

impl VolumeShape {
    pub fn parse(s: &str) -> Option<Self> {
        let parts: Vec<usize> = s.split('x').map(|p| p.trim().parse().ok()).collect::<Option<_>>()?;
        match parts[..] {
            [length, width, height] => Some(Self { length, width, height }),
            _ => None,
        }
    }
}

impl std::fmt::Display for VolumeShape {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}x{}x{}", self.length, self.width, self.height)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub dataset: Option<PathBuf>,
    pub sensor_width: usize,
    pub sensor_height: usize,
    pub downsample: usize,
    pub test_fraction: f64,
    pub duration_us: u64,
    pub delta_t: Option<u64>,
    pub intervals: usize,
    pub volume: VolumeShape,
    pub stride: usize,
    pub temporal_stride: usize,
    pub formulation: Formulation,
    pub basis_size: usize,
    pub sample_count: usize,
    pub normalize_epsilon: f64,
    pub whitening_epsilon: f64,
    pub inverse: InverseHyperparams,
    pub direct: DirectHyperparams,
    pub encoder: EncoderKind,
    pub svm_grid: Vec<f64>,
    pub svm_folds: usize,
    pub seed: u64,
    pub timing: bool,
    pub sweep_basis_size: Vec<usize>,
    pub sweep_intervals: Vec<usize>,
    pub sweep_volume: Vec<VolumeShape>,
    pub dump_count: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            dataset: None,
            sensor_width: 34,
            sensor_height: 34,
            downsample: 1,
            test_fraction: 0.2,
            duration_us: 300_000,
            delta_t: None,
            intervals: 7,
            volume: VolumeShape { length: 4, width: 12, height: 12 },
            stride: 1,
            temporal_stride: 1,
            formulation: Formulation::Inverse,
            basis_size: 1700,
            sample_count: 50_000,
            normalize_epsilon: 1e-8,
            whitening_epsilon: 0.1,
            inverse: InverseHyperparams::default(),
            direct: DirectHyperparams::default(),
            encoder: EncoderKind::Triangle,
            svm_grid: vec![0.01, 0.1, 1.0, 10.0, 100.0],
            svm_folds: 5,
            seed: 0,
            timing: true,
            sweep_basis_size: Vec::new(),
            sweep_intervals: Vec::new(),
            sweep_volume: Vec::new(),
            dump_count: 16,
        }
    }
}

/// Recognized keys and a one-line description each.
pub const KEYS: &[(&str, &str)] = &[
    ("dataset", "dataset root (overridden by --dataset)"),
    ("sensor_width", "sensor width in pixels before downsampling [34]"),
    ("sensor_height", "sensor height in pixels before downsampling [34]"),
    ("downsample", "integer factor applied to event coordinates [1]"),
    ("test_fraction", "held-out fraction when the dataset has no train/test split [0.2]"),
    ("duration_us", "recording length used to derive delta_t [300000]"),
    ("delta_t", "accumulation interval in microseconds [duration_us / intervals, rounded up]"),
    ("intervals", "accumulation intervals per recording [7]"),
    ("volume", "local volume T_l x B_x x B_y [4x12x12]"),
    ("stride", "spatial lattice step [1]"),
    ("temporal_stride", "temporal lattice step when T_l < intervals [1]"),
    ("formulation", "inverse | direct [inverse]"),
    ("basis_size", "number of basis vectors K [1700]"),
    ("sample_count", "random volumes for unsupervised learning [50000]"),
    ("normalize.epsilon", "variance guard in volume normalization [1e-8]"),
    ("whitening.epsilon", "ZCA regularizer [0.1]"),
    ("inverse.lambda0", "L1 weight [1]"),
    ("inverse.lambda1", "regularizer weight [1]"),
    ("inverse.lambda2", "Frobenius weight inside the regularizer [0]"),
    ("inverse.lambda3", "Gram deviation weight inside the regularizer [0]"),
    ("inverse.lambda4", "log-determinant weight inside the regularizer [0]"),
    ("inverse.iterations", "alternating iterations [10]"),
    ("inverse.tolerance", "coordinate descent stop on summed change per sweep [1e-6]"),
    ("inverse.max_sweeps", "coordinate descent sweep cap [1000]"),
    ("inverse.target_sparsity", "optional support cap s, 0 for none [0]"),
    ("direct.lambda0", "threshold [0.5]"),
    ("direct.lambda1", "regularizer weight [1]"),
    ("direct.lambda2", "Frobenius weight [1]"),
    ("direct.lambda3", "Gram deviation weight, monitored only [0]"),
    ("direct.lambda4", "log-determinant weight [1]"),
    ("direct.iterations", "alternating iterations [10]"),
    ("encoder", "triangle | native [triangle]"),
    ("svm.grid", "comma-separated regularization candidates [0.01,0.1,1,10,100]"),
    ("svm.folds", "cross-validation folds [5]"),
    ("seed", "base seed (overridden by --seed) [0]"),
    ("metrics.timing", "write wall-clock seconds to metrics, else 0 [true]"),
    ("sweep.basis_size", "comma-separated K values for `sweep`"),
    ("sweep.intervals", "comma-separated interval counts for `sweep`"),
    ("sweep.volume", "comma-separated T_lxB_xxB_y shapes for `sweep`"),
    ("dump.count", "basis vectors rendered by `dump-basis` [16]"),
];

fn bad(field: &str, message: impl Into<String>) -> HarnessError {
    HarnessError::config(field, message)
}

fn num<T: std::str::FromStr>(field: &str, value: &str) -> Result<T> {
    value.parse().map_err(|_| bad(field, format!("cannot parse {value:?}")))
}

fn list<T: std::str::FromStr>(field: &str, value: &str) -> Result<Vec<T>> {
    if value.is_empty() {
        return Ok(Vec::new());
    }
    value.split(',').map(|v| num(field, v.trim())).collect()
}

fn fmt_list<T: std::fmt::Debug>(items: &[T]) -> String {
    items.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(",")
}

impl PipelineConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        let mut seen = std::collections::HashSet::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(bad(&format!("line {}", n + 1), "expected `key = value`"));
            };
            let (key, value) = (key.trim(), value.trim());
            if !seen.insert(key.to_string()) {
                return Err(bad(key, "duplicate key"));
            }
            cfg.set(key, value)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        Self::parse(&text)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "dataset" => self.dataset = Some(PathBuf::from(value)),
            "sensor_width" => self.sensor_width = num(key, value)?,
            "sensor_height" => self.sensor_height = num(key, value)?,
            "downsample" => self.downsample = num(key, value)?,
            "test_fraction" => self.test_fraction = num(key, value)?,
            "duration_us" => self.duration_us = num(key, value)?,
            "delta_t" => self.delta_t = Some(num(key, value)?),
            "intervals" => self.intervals = num(key, value)?,
            "volume" => self.volume = VolumeShape::parse(value).ok_or_else(|| bad(key, "expected T_lxB_xxB_y"))?,
            "stride" => self.stride = num(key, value)?,
            "temporal_stride" => self.temporal_stride = num(key, value)?,
            "formulation" => {
                self.formulation = Formulation::parse(value).ok_or_else(|| bad(key, "expected inverse or direct"))?
            }
            "basis_size" => self.basis_size = num(key, value)?,
            "sample_count" => self.sample_count = num(key, value)?,
            "normalize.epsilon" => self.normalize_epsilon = num(key, value)?,
            "whitening.epsilon" => self.whitening_epsilon = num(key, value)?,
            "inverse.lambda0" => self.inverse.lambda0 = num(key, value)?,
            "inverse.lambda1" => self.inverse.lambda1 = num(key, value)?,
            "inverse.lambda2" => self.inverse.lambda2 = num(key, value)?,
            "inverse.lambda3" => self.inverse.lambda3 = num(key, value)?,
            "inverse.lambda4" => self.inverse.lambda4 = num(key, value)?,
            "inverse.iterations" => self.inverse.num_iterations = num(key, value)?,
            "inverse.tolerance" => self.inverse.tolerance = num(key, value)?,
            "inverse.max_sweeps" => self.inverse.max_sweeps = num(key, value)?,
            "inverse.target_sparsity" => {
                let s: usize = num(key, value)?;
                self.inverse.target_sparsity = (s > 0).then_some(s);
            }
            "direct.lambda0" => self.direct.lambda0 = num(key, value)?,
            "direct.lambda1" => self.direct.lambda1 = num(key, value)?,
            "direct.lambda2" => self.direct.lambda2 = num(key, value)?,
            "direct.lambda3" => self.direct.lambda3 = num(key, value)?,
            "direct.lambda4" => self.direct.lambda4 = num(key, value)?,
            "direct.iterations" => self.direct.num_iterations = num(key, value)?,
            "encoder" => {
                self.encoder = match value {
                    "triangle" => EncoderKind::Triangle,
                    "native" => EncoderKind::Native,
                    _ => return Err(bad(key, "expected triangle or native")),
                }
            }
            "svm.grid" => self.svm_grid = list(key, value)?,
            "svm.folds" => self.svm_folds = num(key, value)?,
            "seed" => self.seed = num(key, value)?,
            "metrics.timing" => self.timing = num(key, value)?,
            "sweep.basis_size" => self.sweep_basis_size = list(key, value)?,
            "sweep.intervals" => self.sweep_intervals = list(key, value)?,
            "sweep.volume" => {
                self.sweep_volume = value
                    .split(',')
                    .filter(|s| !s.trim().is_empty())
                    .map(|s| VolumeShape::parse(s).ok_or_else(|| bad(key, format!("bad shape {s:?}"))))
                    .collect::<Result<_>>()?
            }
            "dump.count" => self.dump_count = num(key, value)?,
            _ => return Err(bad(key, "unknown key")),
        }
        Ok(())
    }

    /// Checks ranges and cross-field consistency.
    pub fn validate(&self) -> Result<()> {
        let positive = |field: &str, v: usize| if v == 0 { Err(bad(field, "must be at least 1")) } else { Ok(()) };
        positive("sensor_width", self.sensor_width)?;
        positive("sensor_height", self.sensor_height)?;
        positive("downsample", self.downsample)?;
        positive("intervals", self.intervals)?;
        positive("stride", self.stride)?;
        positive("temporal_stride", self.temporal_stride)?;
        positive("basis_size", self.basis_size)?;
        positive("sample_count", self.sample_count)?;
        positive("volume", self.volume.length.min(self.volume.width).min(self.volume.height))?;
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            return Err(bad("test_fraction", "must lie strictly between 0 and 1"));
        }
        if self.delta_t() == 0 {
            return Err(bad(if self.delta_t.is_some() { "delta_t" } else { "duration_us" }, "interval duration must be positive"));
        }
        if self.volume.length > self.intervals {
            return Err(bad("volume", format!("T_l = {} exceeds intervals = {}", self.volume.length, self.intervals)));
        }
        let g = self.geometry();
        if self.volume.width > g.width || self.volume.height > g.height {
            return Err(bad("volume", format!("block exceeds the {}x{} sensor", g.width, g.height)));
        }
        for (field, v) in [("normalize.epsilon", self.normalize_epsilon), ("whitening.epsilon", self.whitening_epsilon)] {
            if !(v >= 0.0) {
                return Err(bad(field, "must be non-negative"));
            }
        }
        let h = &self.inverse;
        for (field, v) in [
            ("inverse.lambda1", h.lambda1),
            ("inverse.lambda2", h.lambda2),
            ("inverse.lambda3", h.lambda3),
            ("inverse.lambda4", h.lambda4),
            ("direct.lambda1", self.direct.lambda1),
            ("direct.lambda2", self.direct.lambda2),
            ("direct.lambda3", self.direct.lambda3),
            ("direct.lambda4", self.direct.lambda4),
        ] {
            if !(v >= 0.0) {
                return Err(bad(field, "must be non-negative"));
            }
        }
        if !(h.lambda0 > 0.0) {
            return Err(bad("inverse.lambda0", "must be positive"));
        }
        if !(self.direct.lambda0 > 0.0) {
            return Err(bad("direct.lambda0", "must be positive"));
        }
        if !(h.tolerance > 0.0) {
            return Err(bad("inverse.tolerance", "must be positive"));
        }
        positive("inverse.max_sweeps", h.max_sweeps)?;
        if self.svm_grid.is_empty() || self.svm_grid.iter().any(|c| !(*c > 0.0)) {
            return Err(bad("svm.grid", "needs at least one positive value"));
        }
        if self.svm_folds < 2 {
            return Err(bad("svm.folds", "must be at least 2"));
        }
        if self.formulation == Formulation::Inverse && self.sample_count < self.basis_size {
            return Err(bad("sample_count", "must be at least basis_size for the inverse formulation"));
        }
        Ok(())
    }

    /// Sensor geometry after downsampling.
    pub fn geometry(&self) -> SensorGeometry {
        SensorGeometry {
            width: self.sensor_width,
            height: self.sensor_height,
        }
        .downsampled(self.downsample)
    }

    pub fn raw_geometry(&self) -> SensorGeometry {
        SensorGeometry {
            width: self.sensor_width,
            height: self.sensor_height,
        }
    }

    pub fn delta_t(&self) -> u64 {
        self.delta_t.unwrap_or_else(|| self.duration_us.div_ceil(self.intervals.max(1) as u64))
    }

    pub fn accumulation(&self) -> AccumulationConfig {
        AccumulationConfig {
            delta_t: self.delta_t(),
            num_intervals: self.intervals,
            volume_length: self.volume.length,
            block_width: self.volume.width,
            block_height: self.volume.height,
            stride: self.stride,
            temporal_stride: self.temporal_stride,
        }
    }

    pub fn volume_dim(&self) -> usize {
        self.volume.length * self.volume.width * self.volume.height
    }

    pub fn inverse_hyper(&self) -> InverseHyperparams {
        InverseHyperparams {
            num_atoms: self.basis_size,
            ..self.inverse
        }
    }

    pub fn direct_hyper(&self) -> DirectHyperparams {
        DirectHyperparams {
            num_atoms: self.basis_size,
            ..self.direct
        }
    }

    /// Canonical text form; `parse(to_text())` reproduces the config
    /// exactly, floats included.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let mut put = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        if let Some(d) = &self.dataset {
            put("dataset", d.display().to_string());
        }
        put("sensor_width", self.sensor_width.to_string());
        put("sensor_height", self.sensor_height.to_string());
        put("downsample", self.downsample.to_string());
        put("test_fraction", format!("{:?}", self.test_fraction));
        put("duration_us", self.duration_us.to_string());
        if let Some(dt) = self.delta_t {
            put("delta_t", dt.to_string());
        }
        put("intervals", self.intervals.to_string());
        put("volume", self.volume.to_string());
        put("stride", self.stride.to_string());
        put("temporal_stride", self.temporal_stride.to_string());
        put("formulation", self.formulation.name().to_string());
        put("basis_size", self.basis_size.to_string());
        put("sample_count", self.sample_count.to_string());
        put("normalize.epsilon", format!("{:?}", self.normalize_epsilon));
        put("whitening.epsilon", format!("{:?}", self.whitening_epsilon));
        let h = &self.inverse;
        put("inverse.lambda0", format!("{:?}", h.lambda0));
        put("inverse.lambda1", format!("{:?}", h.lambda1));
        put("inverse.lambda2", format!("{:?}", h.lambda2));
        put("inverse.lambda3", format!("{:?}", h.lambda3));
        put("inverse.lambda4", format!("{:?}", h.lambda4));
        put("inverse.iterations", h.num_iterations.to_string());
        put("inverse.tolerance", format!("{:?}", h.tolerance));
        put("inverse.max_sweeps", h.max_sweeps.to_string());
        put("inverse.target_sparsity", h.target_sparsity.unwrap_or(0).to_string());
        let g = &self.direct;
        put("direct.lambda0", format!("{:?}", g.lambda0));
        put("direct.lambda1", format!("{:?}", g.lambda1));
        put("direct.lambda2", format!("{:?}", g.lambda2));
        put("direct.lambda3", format!("{:?}", g.lambda3));
        put("direct.lambda4", format!("{:?}", g.lambda4));
        put("direct.iterations", g.num_iterations.to_string());
        put(
            "encoder",
            match self.encoder {
                EncoderKind::Triangle => "triangle",
                EncoderKind::Native => "native",
            }
            .to_string(),
        );
        put("svm.grid", fmt_list(&self.svm_grid));
        put("svm.folds", self.svm_folds.to_string());
        put("seed", self.seed.to_string());
        put("metrics.timing", self.timing.to_string());
        put("sweep.basis_size", fmt_list(&self.sweep_basis_size));
        put("sweep.intervals", fmt_list(&self.sweep_intervals));
        put(
            "sweep.volume",
            self.sweep_volume.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(","),
        );
        put("dump.count", self.dump_count.to_string());
        s
    }
}
