//! Seeded 4-class synthetic event benchmark.
//!
//! Each recording shows one soft-edged shape (horizontal bar, vertical bar,
//! diagonal bar or blob) on a 34x34 sensor, placed with random jitter and
//! moved along a three-segment triangular saccade over 300 ms. Events come
//! from the contrast-threshold camera model, plus a few uniform noise
//! events.

use std::path::Path;

use eventfeat_core::events::{synthesize_events, CameraModel, Event, EventStream, Polarity, SensorGeometry};
use eventfeat_core::rng::{self, SeededRng};
use rayon::prelude::*;

use crate::dataset::write_recording;
use crate::error::{HarnessError, Result};

pub const CLASSES: [&str; 4] = ["hbar", "vbar", "dbar", "blob"];
pub const SIZE: usize = 34;
pub const TRAIN_PER_CLASS: usize = 200;
pub const TEST_PER_CLASS: usize = 100;
pub const DURATION_US: u64 = 300_000;
const FRAME_STEP_US: u64 = 2_000;
const CONTRAST: f64 = 0.15;
const NOISE_EVENTS: usize = 20;

#[derive(Debug, Clone, Copy)]
struct Scene {
    class: usize,
    cx: f64,
    cy: f64,
    angle: f64,
    half_length: f64,
    half_width: f64,
    radius: f64,
    saccade: f64,
}

fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

impl Scene {
    fn random(class: usize, r: &mut SeededRng) -> Self {
        let base = match class {
            0 => 0.0,
            1 => std::f64::consts::FRAC_PI_2,
            _ => std::f64::consts::FRAC_PI_4,
        };
        Self {
            class,
            cx: 17.0 + rng::uniform(r, -5.0, 5.0),
            cy: 17.0 + rng::uniform(r, -5.0, 5.0),
            angle: base + rng::uniform(r, -0.15, 0.15),
            half_length: rng::uniform(r, 7.0, 10.0),
            half_width: rng::uniform(r, 1.2, 2.2),
            radius: rng::uniform(r, 3.5, 5.5),
            saccade: rng::uniform(r, 2.0, 3.0),
        }
    }

    /// Shape coverage in [0, 1] at pixel centre `(x, y)` with the scene
    /// shifted by `(dx, dy)`.
    fn coverage(&self, x: f64, y: f64, dx: f64, dy: f64) -> f64 {
        const SOFT: f64 = 0.35;
        let (px, py) = (x - self.cx - dx, y - self.cy - dy);
        if self.class == 3 {
            return logistic((self.radius - (px * px + py * py).sqrt()) / SOFT);
        }
        let (c, s) = (self.angle.cos(), self.angle.sin());
        let along = px * c + py * s;
        let across = -px * s + py * c;
        logistic((self.half_width - across.abs()) / SOFT) * logistic((self.half_length - along.abs()) / SOFT)
    }

    /// Saccade offset at time `t`: (0,0) -> (a,a) -> (-a,a) -> (0,0).
    fn offset(&self, t: u64) -> (f64, f64) {
        let a = self.saccade;
        let seg = DURATION_US as f64 / 3.0;
        let u = t as f64 / seg;
        let lerp = |p: (f64, f64), q: (f64, f64), f: f64| (p.0 + (q.0 - p.0) * f, p.1 + (q.1 - p.1) * f);
        match u {
            u if u < 1.0 => lerp((0.0, 0.0), (a, a), u),
            u if u < 2.0 => lerp((a, a), (-a, a), u - 1.0),
            u => lerp((-a, a), (0.0, 0.0), (u - 2.0).min(1.0)),
        }
    }

    fn log_frame(&self, t: u64) -> Vec<f64> {
        let (dx, dy) = self.offset(t);
        let mut f = Vec::with_capacity(SIZE * SIZE);
        for y in 0..SIZE {
            for x in 0..SIZE {
                f.push((0.2 + 0.8 * self.coverage(x as f64, y as f64, dx, dy)).ln());
            }
        }
        f
    }
}

pub fn geometry() -> SensorGeometry {
    SensorGeometry { width: SIZE, height: SIZE }
}

/// One recording, fully determined by `(seed, class, index, split)`.
pub fn render_recording(seed: u64, class: usize, index: usize, test: bool) -> EventStream {
    let stream_seed = seed
        .wrapping_mul(0x9E37_79B9_7F4A_7C15)
        .wrapping_add((class as u64) << 32 | (index as u64) << 1 | test as u64);
    let mut r = rng::seeded(stream_seed);
    let scene = Scene::random(class, &mut r);
    let times: Vec<u64> = (0..=DURATION_US / FRAME_STEP_US).map(|i| i * FRAME_STEP_US).collect();
    let frames: Vec<Vec<f64>> = times.iter().map(|&t| scene.log_frame(t)).collect();
    let refs: Vec<&[f64]> = frames.iter().map(|f| f.as_slice()).collect();
    let camera = CameraModel::from_frame(geometry(), CONTRAST, &frames[0]).expect("valid camera");
    let mut events = synthesize_events(&refs, &times, &camera).expect("valid frames").into_events();
    for _ in 0..NOISE_EVENTS {
        events.push(Event {
            x: rng::index(&mut r, SIZE) as u16,
            y: rng::index(&mut r, SIZE) as u16,
            t: rng::index(&mut r, DURATION_US as usize) as u64,
            polarity: if rng::index(&mut r, 2) == 0 { Polarity::Off } else { Polarity::On },
        });
    }
    EventStream::new(geometry(), events).expect("events inside the sensor")
}

/// Writes `out/{train,test}/<class>/NNNN.bin` with the standard split
/// sizes.
pub fn make_synthetic_benchmark(seed: u64, out: &Path) -> Result<()> {
    make_benchmark(seed, out, TRAIN_PER_CLASS, TEST_PER_CLASS)
}

/// Like [`make_synthetic_benchmark`] with custom per-class counts. A
/// recording does not depend on the counts, so smaller sets are prefixes of
/// larger ones.
pub fn make_benchmark(seed: u64, out: &Path, train_per_class: usize, test_per_class: usize) -> Result<()> {
    let mut jobs = Vec::new();
    for (split, count) in [("train", train_per_class), ("test", test_per_class)] {
        for (c, name) in CLASSES.iter().enumerate() {
            let dir = out.join(split).join(name);
            std::fs::create_dir_all(&dir).map_err(|e| HarnessError::io(&dir, e))?;
            for i in 0..count {
                jobs.push((dir.join(format!("{i:04}.bin")), c, i, split == "test"));
            }
        }
    }
    jobs.into_par_iter()
        .try_for_each(|(path, c, i, test)| write_recording(&path, &render_recording(seed, c, i, test)))
}
