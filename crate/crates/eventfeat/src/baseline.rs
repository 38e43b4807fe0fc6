//! Nearest-centroid classifier on the accumulated grids.
//!
//! Each grid is flattened and scaled to unit L2 norm (all-zero grids stay
//! zero); a test grid takes the label of the closest class mean, with ties
//! going to the lower label.

use eventfeat_core::volumes::AccumulatedGrid;

use crate::error::{HarnessError, Result};
use crate::pipeline::Evaluation;

fn unit(grid: &AccumulatedGrid) -> Vec<f64> {
    let v = grid.values();
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if n > 0.0 {
        v.iter().map(|x| x / n).collect()
    } else {
        v.to_vec()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NearestCentroid {
    /// One centroid per class label; `None` for classes without examples.
    pub centroids: Vec<Option<Vec<f64>>>,
}

impl NearestCentroid {
    pub fn fit(grids: &[AccumulatedGrid], labels: &[u32], num_classes: usize) -> Result<Self> {
        let dim = grids
            .first()
            .map(|g| g.values().len())
            .ok_or_else(|| HarnessError::Data("baseline needs training grids".into()))?;
        let mut sums = vec![vec![0.0; dim]; num_classes];
        let mut counts = vec![0usize; num_classes];
        for (g, &l) in grids.iter().zip(labels) {
            let v = unit(g);
            if v.len() != dim || l as usize >= num_classes {
                return Err(HarnessError::Data("baseline: inconsistent grids or labels".into()));
            }
            for (s, x) in sums[l as usize].iter_mut().zip(&v) {
                *s += x;
            }
            counts[l as usize] += 1;
        }
        let centroids = sums
            .into_iter()
            .zip(counts)
            .map(|(s, n)| (n > 0).then(|| s.into_iter().map(|x| x / n as f64).collect()))
            .collect();
        Ok(Self { centroids })
    }

    pub fn predict(&self, grid: &AccumulatedGrid) -> u32 {
        let v = unit(grid);
        let mut best = (f64::INFINITY, 0u32);
        for (label, c) in self.centroids.iter().enumerate() {
            if let Some(c) = c {
                let d: f64 = c.iter().zip(&v).map(|(a, b)| (a - b) * (a - b)).sum();
                if d < best.0 {
                    best = (d, label as u32);
                }
            }
        }
        best.1
    }

    pub fn evaluate(&self, grids: &[AccumulatedGrid], labels: &[u32]) -> Evaluation {
        let predictions = grids.iter().map(|g| self.predict(g)).collect();
        Evaluation::from_predictions(labels, predictions, self.centroids.len())
    }
}
