//! Interval accumulation and local volumes.
//!
//! An [`AccumulatedGrid`] stacks one signed polarity-count image per
//! accumulation interval. A [`LocalVolume`] is a `volume_length x
//! block_height x block_width` crop of that stack flattened interval-major,
//! then row-major within each interval.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::events::{EventStream, SensorGeometry};
use crate::math;
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AccumulationConfig {
    /// Interval duration in microseconds.
    pub delta_t: u64,
    pub num_intervals: usize,
    /// Intervals per local volume.
    pub volume_length: usize,
    pub block_width: usize,
    pub block_height: usize,
    /// Spatial step between lattice sites.
    pub stride: usize,
    /// Temporal step between lattice sites when `volume_length <
    /// num_intervals`.
    pub temporal_stride: usize,
}

impl AccumulationConfig {
    /// Full-length volumes (2D case) with unit strides.
    pub fn new(delta_t: u64, num_intervals: usize, block_width: usize, block_height: usize) -> Self {
        Self {
            delta_t,
            num_intervals,
            volume_length: num_intervals,
            block_width,
            block_height,
            stride: 1,
            temporal_stride: 1,
        }
    }

    #[inline]
    pub fn volume_dim(&self) -> usize {
        self.block_width * self.block_height * self.volume_length
    }

    pub fn validate(&self, geometry: SensorGeometry) -> Result<()> {
        if self.delta_t == 0 {
            return Err(Error::InvalidConfig("delta_t must be positive"));
        }
        if self.volume_length == 0 || self.volume_length > self.num_intervals {
            return Err(Error::InvalidConfig("volume_length must be in 1..=num_intervals"));
        }
        if self.block_width == 0 || self.block_width > geometry.width {
            return Err(Error::InvalidConfig("block_width must be in 1..=sensor width"));
        }
        if self.block_height == 0 || self.block_height > geometry.height {
            return Err(Error::InvalidConfig("block_height must be in 1..=sensor height"));
        }
        if self.stride == 0 || self.temporal_stride == 0 {
            return Err(Error::InvalidConfig("strides must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AccumulatedGrid {
    geometry: SensorGeometry,
    num_intervals: usize,
    /// `[interval][row][column]`, row-major.
    values: Vec<f64>,
}

impl AccumulatedGrid {
    pub fn zeros(geometry: SensorGeometry, num_intervals: usize) -> Self {
        Self {
            geometry,
            num_intervals,
            values: alloc::vec![0.0; num_intervals * geometry.pixels()],
        }
    }

    pub fn from_values(geometry: SensorGeometry, num_intervals: usize, values: Vec<f64>) -> Result<Self> {
        let expected = num_intervals * geometry.pixels();
        if values.len() != expected {
            return Err(Error::ShapeMismatch {
                expected,
                found: values.len(),
            });
        }
        Ok(Self {
            geometry,
            num_intervals,
            values,
        })
    }

    #[inline]
    pub fn geometry(&self) -> SensorGeometry {
        self.geometry
    }

    #[inline]
    pub fn num_intervals(&self) -> usize {
        self.num_intervals
    }

    #[inline]
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    fn offset(&self, interval: usize, y: usize, x: usize) -> usize {
        (interval * self.geometry.height + y) * self.geometry.width + x
    }

    #[inline]
    pub fn get(&self, interval: usize, y: usize, x: usize) -> f64 {
        self.values[self.offset(interval, y, x)]
    }
}

/// Where a volume came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct VolumeOrigin {
    /// Lattice index for lattice extraction; grid index for random samples.
    pub block: usize,
    pub interval: usize,
    pub x: usize,
    pub y: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LocalVolume {
    pub data: Vec<f64>,
    pub origin: VolumeOrigin,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Accumulation {
    pub grid: AccumulatedGrid,
    /// Events at or after `num_intervals * delta_t`.
    pub dropped: usize,
}

/// Sums event polarities into `num_intervals` bins of `delta_t` microseconds.
pub fn accumulate(stream: &EventStream, config: &AccumulationConfig) -> Accumulation {
    let mut grid = AccumulatedGrid::zeros(stream.geometry(), config.num_intervals);
    let horizon = config.delta_t.saturating_mul(config.num_intervals as u64);
    let mut dropped = 0;
    for e in stream.events() {
        if e.t >= horizon {
            dropped += 1;
            continue;
        }
        let interval = (e.t / config.delta_t) as usize;
        let i = grid.offset(interval, e.y as usize, e.x as usize);
        grid.values[i] += e.polarity.sign() as f64;
    }
    Accumulation { grid, dropped }
}

pub fn extract_volume(
    grid: &AccumulatedGrid,
    config: &AccumulationConfig,
    x0: usize,
    y0: usize,
    l0: usize,
) -> Result<LocalVolume> {
    let g = grid.geometry;
    if x0 + config.block_width > g.width
        || y0 + config.block_height > g.height
        || l0 + config.volume_length > grid.num_intervals
    {
        return Err(Error::OutOfBounds {
            x: x0,
            y: y0,
            interval: l0,
        });
    }
    let mut data = Vec::with_capacity(config.volume_dim());
    for l in l0..l0 + config.volume_length {
        for y in y0..y0 + config.block_height {
            let start = grid.offset(l, y, x0);
            data.extend_from_slice(&grid.values[start..start + config.block_width]);
        }
    }
    Ok(LocalVolume {
        data,
        origin: VolumeOrigin {
            block: 0,
            interval: l0,
            x: x0,
            y: y0,
        },
    })
}

/// Top-left corners of the extraction lattice, in block order
/// (interval-major, then row-major).
pub fn lattice_sites(geometry: SensorGeometry, num_intervals: usize, config: &AccumulationConfig) -> Result<Vec<VolumeOrigin>> {
    if config.block_width == 0
        || config.block_height == 0
        || config.block_width > geometry.width
        || config.block_height > geometry.height
        || config.volume_length == 0
        || config.volume_length > num_intervals
    {
        return Err(Error::OutOfBounds {
            x: 0,
            y: 0,
            interval: 0,
        });
    }
    let stride = config.stride.max(1);
    let tstride = config.temporal_stride.max(1);
    let nx = (geometry.width - config.block_width) / stride + 1;
    let ny = (geometry.height - config.block_height) / stride + 1;
    let nt = (num_intervals - config.volume_length) / tstride + 1;
    let mut sites = Vec::with_capacity(nx * ny * nt);
    for lt in 0..nt {
        for by in 0..ny {
            for bx in 0..nx {
                sites.push(VolumeOrigin {
                    block: sites.len(),
                    interval: lt * tstride,
                    x: bx * stride,
                    y: by * stride,
                });
            }
        }
    }
    Ok(sites)
}

/// Every volume on the stride lattice. With full-length volumes this is one
/// volume per spatial site.
pub fn extract_grid_volumes(grid: &AccumulatedGrid, config: &AccumulationConfig) -> Result<Vec<LocalVolume>> {
    lattice_sites(grid.geometry, grid.num_intervals, config)?
        .into_iter()
        .map(|site| {
            let mut v = extract_volume(grid, config, site.x, site.y, site.interval)?;
            v.origin.block = site.block;
            Ok(v)
        })
        .collect()
}

// Redraws allowed per requested volume before giving up.
const RETRIES_PER_DRAW: usize = 64;

/// Uniform random volumes over `(grid, x0, y0, l0)`, skipping all-zero
/// crops. `origin.block` holds the source grid index.
pub fn sample_random_volumes(
    grids: &[AccumulatedGrid],
    config: &AccumulationConfig,
    count: usize,
    seed: u64,
) -> Result<Vec<LocalVolume>> {
    if count == 0 {
        return Err(Error::InvalidConfig("sample count must be at least 1"));
    }
    let usable: Vec<usize> = (0..grids.len())
        .filter(|&i| {
            let g = &grids[i];
            config.block_width <= g.geometry.width
                && config.block_height <= g.geometry.height
                && config.volume_length <= g.num_intervals
                && config.volume_length > 0
        })
        .collect();
    if usable.is_empty() {
        return Err(Error::InsufficientData {
            drawn: 0,
            requested: count,
        });
    }

    let mut rng = rng::seeded(seed);
    let mut out = Vec::with_capacity(count);
    let mut budget = count.saturating_mul(RETRIES_PER_DRAW);
    while out.len() < count {
        if budget == 0 {
            return Err(Error::InsufficientData {
                drawn: out.len(),
                requested: count,
            });
        }
        budget -= 1;
        let gi = usable[rng::index(&mut rng, usable.len())];
        let g = &grids[gi];
        let x0 = rng::index(&mut rng, g.geometry.width - config.block_width + 1);
        let y0 = rng::index(&mut rng, g.geometry.height - config.block_height + 1);
        let l0 = rng::index(&mut rng, g.num_intervals - config.volume_length + 1);
        let mut v = extract_volume(g, config, x0, y0, l0)?;
        if v.data.iter().all(|&a| a == 0.0) {
            continue;
        }
        v.origin.block = gi;
        out.push(v);
    }
    Ok(out)
}

/// `(v - mean) / sqrt(var + epsilon)` with the population variance.
pub fn normalize_volume(v: &LocalVolume, epsilon: f64) -> LocalVolume {
    let mut out = v.clone();
    normalize_in_place(&mut out.data, epsilon);
    out
}

pub fn normalize_in_place(data: &mut [f64], epsilon: f64) {
    if data.is_empty() {
        return;
    }
    let n = data.len() as f64;
    let mean = data.iter().sum::<f64>() / n;
    let var = data.iter().map(|a| (a - mean) * (a - mean)).sum::<f64>() / n;
    let denom = math::sqrt(var + epsilon);
    for a in data.iter_mut() {
        let centered = *a - mean;
        *a = if denom > 0.0 { centered / denom } else { 0.0 };
    }
}
