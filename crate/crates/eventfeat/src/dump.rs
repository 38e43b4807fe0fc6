//! Basis visualization: one row per basis vector, one tile per time slice.
//!
//! Each vector is scaled by its largest magnitude, so mid-gray is zero,
//! white the largest positive and black the largest negative entry.

use std::path::Path;

use image::{GrayImage, Luma};

use crate::container::Basis;
use crate::config::VolumeShape;
use crate::error::{HarnessError, Result};

const SCALE: u32 = 6;
const GAP: u32 = 2;
const BACKGROUND: u8 = 32;

pub fn render(basis: &Basis, shape: VolumeShape, count: usize) -> Result<GrayImage> {
    let (t, bw, bh) = (shape.length, shape.width, shape.height);
    if t * bw * bh != basis.dim() {
        return Err(HarnessError::config("volume", "volume shape does not match the basis dimension"));
    }
    let rows = basis.rows();
    let n = count.min(rows.nrows()).max(1);
    let tile_w = bw as u32 * SCALE;
    let tile_h = bh as u32 * SCALE;
    let width = GAP + t as u32 * (tile_w + GAP);
    let height = GAP + n as u32 * (tile_h + GAP);
    let mut img = GrayImage::from_pixel(width, height, Luma([BACKGROUND]));
    for k in 0..n.min(rows.nrows()) {
        let v: Vec<f64> = rows.row(k).iter().copied().collect();
        let peak = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        for l in 0..t {
            for y in 0..bh {
                for x in 0..bw {
                    let value = v[(l * bh + y) * bw + x];
                    let g = if peak > 0.0 { 127.5 + 127.5 * value / peak } else { 127.5 };
                    let px = Luma([g.round().clamp(0.0, 255.0) as u8]);
                    let x0 = GAP + l as u32 * (tile_w + GAP) + x as u32 * SCALE;
                    let y0 = GAP + k as u32 * (tile_h + GAP) + y as u32 * SCALE;
                    for dy in 0..SCALE {
                        for dx in 0..SCALE {
                            img.put_pixel(x0 + dx, y0 + dy, px);
                        }
                    }
                }
            }
        }
    }
    Ok(img)
}

pub fn write_png(basis: &Basis, shape: VolumeShape, count: usize, path: &Path) -> Result<()> {
    render(basis, shape, count)?
        .save(path)
        .map_err(|e| HarnessError::Data(format!("{}: {e}", path.display())))
}
