//! Pooled feature file: `EVFF0001`, the class names, then the train and
//! test splits.
//!
//! Names are a `u64` count followed by `u64` length-prefixed UTF-8 strings.
//! Each split is a `u64` count, a `u64` dimension and per record a `u32`
//! label (`u32::MAX` for none) and the little-endian `f64` values.

use std::path::Path;

use eventfeat_core::features::FeatureVector;

use crate::error::{HarnessError, Result};

pub const MAGIC: &[u8; 8] = b"EVFF0001";

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSet {
    pub classes: Vec<String>,
    pub train: Vec<FeatureVector>,
    pub test: Vec<FeatureVector>,
}

fn put_u64(out: &mut Vec<u8>, v: u64) {
    out.extend_from_slice(&v.to_le_bytes());
}

fn put_split(out: &mut Vec<u8>, split: &[FeatureVector]) {
    put_u64(out, split.len() as u64);
    put_u64(out, split.first().map_or(0, |f| f.data.len()) as u64);
    for f in split {
        out.extend_from_slice(&f.label.unwrap_or(u32::MAX).to_le_bytes());
        for x in &f.data {
            out.extend_from_slice(&x.to_le_bytes());
        }
    }
}

struct Cursor<'a>(&'a [u8]);

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.0.len() < n {
            return Err(HarnessError::Data("feature file: truncated".into()));
        }
        let (head, tail) = self.0.split_at(n);
        self.0 = tail;
        Ok(head)
    }

    fn u64(&mut self) -> Result<usize> {
        let v = u64::from_le_bytes(self.take(8)?.try_into().unwrap());
        usize::try_from(v).map_err(|_| HarnessError::Data("feature file: bad length".into()))
    }

    fn split(&mut self) -> Result<Vec<FeatureVector>> {
        let (n, d) = (self.u64()?, self.u64()?);
        let record = d.checked_mul(8).and_then(|b| b.checked_add(4));
        if record.and_then(|r| r.checked_mul(n)).is_none_or(|b| b > self.0.len()) {
            return Err(HarnessError::Data("feature file: truncated".into()));
        }
        (0..n)
            .map(|_| {
                let label = u32::from_le_bytes(self.take(4)?.try_into().unwrap());
                let data = self
                    .take(8 * d)?
                    .chunks_exact(8)
                    .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                    .collect();
                Ok(FeatureVector {
                    data,
                    label: (label != u32::MAX).then_some(label),
                })
            })
            .collect()
    }
}

impl FeatureSet {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = MAGIC.to_vec();
        put_u64(&mut out, self.classes.len() as u64);
        for c in &self.classes {
            put_u64(&mut out, c.len() as u64);
            out.extend_from_slice(c.as_bytes());
        }
        put_split(&mut out, &self.train);
        put_split(&mut out, &self.test);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 8 || &bytes[..8] != MAGIC {
            return Err(HarnessError::Data("feature file: missing EVFF0001 header".into()));
        }
        let mut c = Cursor(&bytes[8..]);
        let n = c.u64()?;
        let mut classes = Vec::new();
        for _ in 0..n {
            let len = c.u64()?;
            let name = std::str::from_utf8(c.take(len)?)
                .map_err(|_| HarnessError::Data("feature file: class name is not UTF-8".into()))?;
            classes.push(name.to_string());
        }
        let train = c.split()?;
        let test = c.split()?;
        if !c.0.is_empty() {
            return Err(HarnessError::Data("feature file: trailing bytes".into()));
        }
        Ok(Self { classes, train, test })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()).map_err(|e| HarnessError::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| HarnessError::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}
