//! Event records, the 5-byte binary codec and a brightness-change simulator.
//!
//! A record is five bytes:
//!
//! ```text
//! byte 0   x
//! byte 1   y
//! byte 2   bit 7: polarity (1 = ON/+1, 0 = OFF/-1), bits 6..0: timestamp bits 22..16
//! byte 3   timestamp bits 15..8
//! byte 4   timestamp bits 7..0
//! ```
//!
//! Timestamps are microseconds, so a file spans at most 2^23 us (~8.4 s).

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math;

pub const RECORD_LEN: usize = 5;
pub const MAX_TIMESTAMP: u64 = (1 << 23) - 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Polarity {
    On,
    Off,
}

impl Polarity {
    /// +1 for ON, -1 for OFF.
    #[inline]
    pub fn sign(self) -> i32 {
        match self {
            Polarity::On => 1,
            Polarity::Off => -1,
        }
    }

    // The datasets never document which bit value means ON. Keep the
    // mapping here and nowhere else.
    #[inline]
    fn from_bit(bit: bool) -> Self {
        if bit {
            Polarity::On
        } else {
            Polarity::Off
        }
    }

    #[inline]
    fn bit(self) -> u8 {
        match self {
            Polarity::On => 0x80,
            Polarity::Off => 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Event {
    pub x: u16,
    pub y: u16,
    /// Microseconds.
    pub t: u64,
    pub polarity: Polarity,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SensorGeometry {
    pub width: usize,
    pub height: usize,
}

impl SensorGeometry {
    pub fn new(width: usize, height: usize) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidConfig("sensor dimensions must be at least 1"));
        }
        Ok(Self { width, height })
    }

    #[inline]
    pub fn pixels(&self) -> usize {
        self.width * self.height
    }

    #[inline]
    pub fn contains(&self, x: usize, y: usize) -> bool {
        x < self.width && y < self.height
    }

    /// Geometry after integer division of coordinates by `factor`.
    pub fn downsampled(&self, factor: usize) -> Self {
        let f = factor.max(1);
        Self {
            width: self.width.div_ceil(f),
            height: self.height.div_ceil(f),
        }
    }
}

/// Events sorted by timestamp, all inside the sensor.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EventStream {
    geometry: SensorGeometry,
    events: Vec<Event>,
}

impl EventStream {
    /// Validates coordinates and stable-sorts by timestamp.
    pub fn new(geometry: SensorGeometry, mut events: Vec<Event>) -> Result<Self> {
        for (index, e) in events.iter().enumerate() {
            if !geometry.contains(e.x as usize, e.y as usize) {
                return Err(Error::CoordinateOutOfRange {
                    index,
                    x: e.x as u32,
                    y: e.y as u32,
                });
            }
        }
        if events.windows(2).any(|w| w[1].t < w[0].t) {
            events.sort_by_key(|e| e.t);
        }
        Ok(Self { geometry, events })
    }

    pub fn empty(geometry: SensorGeometry) -> Self {
        Self {
            geometry,
            events: Vec::new(),
        }
    }

    #[inline]
    pub fn geometry(&self) -> SensorGeometry {
        self.geometry
    }

    #[inline]
    pub fn events(&self) -> &[Event] {
        &self.events
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.events.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn into_events(self) -> Vec<Event> {
        self.events
    }

    /// Integer-divides coordinates by `factor`, keeping event order.
    pub fn downsample(&self, factor: usize) -> Self {
        let f = factor.max(1);
        let events = self
            .events
            .iter()
            .map(|e| Event {
                x: e.x / f as u16,
                y: e.y / f as u16,
                ..*e
            })
            .collect();
        Self {
            geometry: self.geometry.downsampled(f),
            events,
        }
    }
}

/// Decodes a byte buffer of 5-byte records.
pub fn parse_event_file(bytes: &[u8], geometry: SensorGeometry) -> Result<EventStream> {
    if !bytes.len().is_multiple_of(RECORD_LEN) {
        return Err(Error::TruncatedRecord { len: bytes.len() });
    }
    let mut events = Vec::with_capacity(bytes.len() / RECORD_LEN);
    for (index, rec) in bytes.chunks_exact(RECORD_LEN).enumerate() {
        let x = rec[0] as u16;
        let y = rec[1] as u16;
        if !geometry.contains(x as usize, y as usize) {
            return Err(Error::CoordinateOutOfRange {
                index,
                x: x as u32,
                y: y as u32,
            });
        }
        let t = (((rec[2] & 0x7F) as u64) << 16) | ((rec[3] as u64) << 8) | rec[4] as u64;
        events.push(Event {
            x,
            y,
            t,
            polarity: Polarity::from_bit(rec[2] & 0x80 != 0),
        });
    }
    EventStream::new(geometry, events)
}

/// Encodes a stream as 5-byte records, in stream order.
pub fn write_event_file(stream: &EventStream) -> Result<Vec<u8>> {
    let mut out = Vec::with_capacity(stream.len() * RECORD_LEN);
    for (index, e) in stream.events().iter().enumerate() {
        if e.t > MAX_TIMESTAMP {
            return Err(Error::TimestampOverflow { index, t: e.t });
        }
        if e.x > 0xFF || e.y > 0xFF {
            return Err(Error::CoordinateOverflow {
                index,
                x: e.x as u32,
                y: e.y as u32,
            });
        }
        out.extend_from_slice(&[
            e.x as u8,
            e.y as u8,
            e.polarity.bit() | ((e.t >> 16) as u8 & 0x7F),
            (e.t >> 8) as u8,
            e.t as u8,
        ]);
    }
    Ok(out)
}

/// Per-pixel contrast-threshold model.
#[derive(Debug, Clone, PartialEq)]
pub struct CameraModel {
    geometry: SensorGeometry,
    contrast_threshold: f64,
    /// Row-major `height x width` reference log-brightness.
    reference: Vec<f64>,
}

impl CameraModel {
    pub fn new(geometry: SensorGeometry, contrast_threshold: f64, reference: Vec<f64>) -> Result<Self> {
        if !(contrast_threshold > 0.0) {
            return Err(Error::InvalidConfig("contrast threshold must be positive"));
        }
        if reference.len() != geometry.pixels() {
            return Err(Error::ShapeMismatch {
                expected: geometry.pixels(),
                found: reference.len(),
            });
        }
        Ok(Self {
            geometry,
            contrast_threshold,
            reference,
        })
    }

    /// Camera whose reference is a given frame.
    pub fn from_frame(geometry: SensorGeometry, contrast_threshold: f64, frame: &[f64]) -> Result<Self> {
        Self::new(geometry, contrast_threshold, frame.to_vec())
    }

    pub fn geometry(&self) -> SensorGeometry {
        self.geometry
    }

    pub fn contrast_threshold(&self) -> f64 {
        self.contrast_threshold
    }

    pub fn reference(&self) -> &[f64] {
        &self.reference
    }
}

// Relative slack so that a change of exactly n*C fires n events despite
// rounding in the log-brightness arithmetic.
const CROSSING_SLACK: f64 = 1e-9;

/// Simulates the events produced while log-brightness moves linearly
/// between consecutive frames.
///
/// Each pixel fires one event per crossed multiple of the contrast threshold
/// `C` and its reference advances by `polarity * C` per event. Crossing times
/// are interpolated inside the frame interval and rounded to the nearest
/// microsecond. A mismatch between the camera reference and the first frame
/// fires at `frame_times[0]`.
pub fn synthesize_events(frames: &[&[f64]], frame_times: &[u64], camera: &CameraModel) -> Result<EventStream> {
    let geometry = camera.geometry;
    let pixels = geometry.pixels();
    if frames.len() != frame_times.len() {
        return Err(Error::ShapeMismatch {
            expected: frames.len(),
            found: frame_times.len(),
        });
    }
    for f in frames {
        if f.len() != pixels {
            return Err(Error::ShapeMismatch {
                expected: pixels,
                found: f.len(),
            });
        }
    }
    if let Some(i) = frame_times.windows(2).position(|w| w[1] <= w[0]) {
        return Err(Error::NonMonotonicTimestamps { index: i + 1 });
    }

    let c = camera.contrast_threshold;
    let slack = c * CROSSING_SLACK;
    let mut reference = camera.reference.clone();
    let mut events = Vec::new();

    // The camera reference acts as the trace value just before frame 0.
    let mut prev: &[f64] = &camera.reference;
    let mut prev_t = frame_times.first().copied().unwrap_or(0);
    for (frame, &t1) in frames.iter().zip(frame_times) {
        let t0 = prev_t;
        for p in 0..pixels {
            let (l0, l1) = (prev[p], frame[p]);
            let r = &mut reference[p];
            loop {
                let polarity = if l1 - *r >= c - slack {
                    Polarity::On
                } else if *r - l1 >= c - slack {
                    Polarity::Off
                } else {
                    break;
                };
                *r += polarity.sign() as f64 * c;
                let t = crossing_time(l0, l1, *r, t0, t1);
                events.push(Event {
                    x: (p % geometry.width) as u16,
                    y: (p / geometry.width) as u16,
                    t,
                    polarity,
                });
            }
        }
        prev = frame;
        prev_t = t1;
    }
    events.sort_by_key(|e| e.t);
    EventStream::new(geometry, events)
}

fn crossing_time(l0: f64, l1: f64, level: f64, t0: u64, t1: u64) -> u64 {
    if t1 == t0 || l1 == l0 {
        return t1;
    }
    let frac = ((level - l0) / (l1 - l0)).clamp(0.0, 1.0);
    t0 + math::floor(frac * (t1 - t0) as f64 + 0.5) as u64
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn geom(w: usize, h: usize) -> SensorGeometry {
        SensorGeometry::new(w, h).unwrap()
    }

    #[test]
    fn decodes_on_event() {
        let s = parse_event_file(&[0x0A, 0x05, 0x80, 0x00, 0x64], geom(34, 34)).unwrap();
        assert_eq!(
            s.events(),
            &[Event {
                x: 10,
                y: 5,
                t: 100,
                polarity: Polarity::On
            }]
        );
    }

    #[test]
    fn decodes_all_zero_record() {
        let s = parse_event_file(&[0; 5], geom(1, 1)).unwrap();
        assert_eq!(s.events()[0].polarity, Polarity::Off);
        assert_eq!((s.events()[0].x, s.events()[0].y, s.events()[0].t), (0, 0, 0));
    }

    #[test]
    fn rejects_truncated_input() {
        assert_eq!(
            parse_event_file(&[0; 7], geom(4, 4)),
            Err(Error::TruncatedRecord { len: 7 })
        );
    }

    #[test]
    fn reports_out_of_range_record_index() {
        let bytes = [0, 0, 0, 0, 1, 9, 0, 0, 0, 2];
        assert_eq!(
            parse_event_file(&bytes, geom(4, 4)),
            Err(Error::CoordinateOutOfRange { index: 1, x: 9, y: 0 })
        );
    }

    #[test]
    fn timestamp_uses_all_23_bits() {
        let s = parse_event_file(&[1, 2, 0xFF, 0xFF, 0xFF], geom(4, 4)).unwrap();
        assert_eq!(s.events()[0].t, MAX_TIMESTAMP);
        assert_eq!(s.events()[0].polarity, Polarity::On);
    }

    #[test]
    fn inversions_are_stable_sorted() {
        // t = 5, 3, 3 with distinct x to observe stability.
        let bytes = [0, 0, 0, 0, 5, 1, 0, 0, 0, 3, 2, 0, 0x80, 0, 3];
        let s = parse_event_file(&bytes, geom(4, 4)).unwrap();
        let xs: Vec<u16> = s.events().iter().map(|e| e.x).collect();
        assert_eq!(xs, vec![1, 2, 0]);
    }

    #[test]
    fn write_rejects_overflowing_timestamp() {
        let s = EventStream::new(
            geom(4, 4),
            vec![Event {
                x: 0,
                y: 0,
                t: MAX_TIMESTAMP + 1,
                polarity: Polarity::On,
            }],
        )
        .unwrap();
        assert!(matches!(write_event_file(&s), Err(Error::TimestampOverflow { index: 0, .. })));
    }

    #[test]
    fn empty_stream_writes_nothing() {
        assert!(write_event_file(&EventStream::empty(geom(2, 2))).unwrap().is_empty());
    }

    #[test]
    fn rise_of_two_thresholds_fires_two_on_events() {
        let g = geom(2, 1);
        let f0 = [0.0, 0.0];
        let f1 = [0.6, 0.0];
        let cam = CameraModel::from_frame(g, 0.3, &f0).unwrap();
        let s = synthesize_events(&[&f0, &f1], &[0, 1000], &cam).unwrap();
        assert_eq!(s.len(), 2);
        assert!(s.events().iter().all(|e| e.polarity == Polarity::On && e.x == 0));
        // Crossings at 0.3 and 0.6 of a linear ramp.
        assert_eq!(s.events()[0].t, 500);
        assert_eq!(s.events()[1].t, 1000);
    }

    #[test]
    fn constant_frames_fire_nothing() {
        let g = geom(3, 2);
        let f = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6];
        let cam = CameraModel::from_frame(g, 0.2, &f).unwrap();
        let s = synthesize_events(&[&f, &f, &f], &[0, 10, 20], &cam).unwrap();
        assert!(s.is_empty());
    }

    #[test]
    fn synthesis_validates_inputs() {
        let g = geom(2, 1);
        let cam = CameraModel::from_frame(g, 0.3, &[0.0, 0.0]).unwrap();
        let short = [0.0];
        assert!(matches!(
            synthesize_events(&[&short], &[0], &cam),
            Err(Error::ShapeMismatch { .. })
        ));
        let f = [0.0, 0.0];
        assert_eq!(
            synthesize_events(&[&f, &f], &[5, 5], &cam),
            Err(Error::NonMonotonicTimestamps { index: 1 })
        );
        assert!(CameraModel::new(g, 0.0, vec![0.0; 2]).is_err());
    }

    #[test]
    fn downsample_divides_coordinates() {
        let s = EventStream::new(
            geom(34, 34),
            vec![Event {
                x: 33,
                y: 7,
                t: 1,
                polarity: Polarity::On,
            }],
        )
        .unwrap();
        let d = s.downsample(4);
        assert_eq!(d.geometry(), geom(9, 9));
        assert_eq!((d.events()[0].x, d.events()[0].y), (8, 1));
    }
}
