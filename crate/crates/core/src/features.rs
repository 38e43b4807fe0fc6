//! Triangle encoding against learned prototypes and 2x2 quadrant pooling.

use alloc::vec::Vec;

use crate::direct::Transform;
use crate::error::{Error, Result};
use crate::inverse::{self, Dictionary, InverseHyperparams};
use crate::math;
use crate::Matrix;
use crate::volumes::{self, AccumulatedGrid, AccumulationConfig, VolumeOrigin};
use crate::whitening::WhiteningModel;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BasisKind {
    Inverse,
    Direct,
}

/// `K x d` unit-norm encoding prototypes, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct BasisView {
    prototypes: Vec<f64>,
    /// The same prototypes as a `K x d` matrix for batched distances.
    matrix: Matrix,
    k: usize,
    d: usize,
    kind: BasisKind,
}

impl BasisView {
    /// Rows are normalized; all-zero rows stay zero.
    pub fn from_rows(mut prototypes: Vec<f64>, k: usize, d: usize, kind: BasisKind) -> Result<Self> {
        if k == 0 || d == 0 {
            return Err(Error::EmptyInput);
        }
        if prototypes.len() != k * d {
            return Err(Error::ShapeMismatch {
                expected: k * d,
                found: prototypes.len(),
            });
        }
        for row in prototypes.chunks_exact_mut(d) {
            math::normalize(row);
        }
        let matrix = Matrix::from_row_slice(k, d, &prototypes);
        Ok(Self {
            prototypes,
            matrix,
            k,
            d,
            kind,
        })
    }

    /// Dictionary atoms as prototypes.
    pub fn from_dictionary(dict: &Dictionary) -> Result<Self> {
        Self::from_rows(dict.matrix().as_slice().to_vec(), dict.num_atoms(), dict.dim(), BasisKind::Inverse)
    }

    /// Transform rows as prototypes.
    pub fn from_transform(a: &Transform) -> Result<Self> {
        Self::from_rows(a.rows_t().as_slice().to_vec(), a.num_rows(), a.dim(), BasisKind::Direct)
    }

    #[inline]
    pub fn num_prototypes(&self) -> usize {
        self.k
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.d
    }

    #[inline]
    pub fn kind(&self) -> BasisKind {
        self.kind
    }

    #[inline]
    pub fn prototype(&self, k: usize) -> &[f64] {
        &self.prototypes[k * self.d..(k + 1) * self.d]
    }
}

/// `f_k = max(0, mean(z) - z_k)` with `z_k = ||v - p_k||`.
pub fn triangle_encode(basis: &BasisView, v: &[f64]) -> Result<Vec<f64>> {
    if v.len() != basis.d {
        return Err(Error::DimensionMismatch {
            expected: basis.d,
            found: v.len(),
        });
    }
    let z: Vec<f64> = (0..basis.k)
        .map(|k| {
            let p = basis.prototype(k);
            let mut acc = 0.0;
            for (a, b) in v.iter().zip(p) {
                acc += (a - b) * (a - b);
            }
            math::sqrt(acc)
        })
        .collect();
    let mu = z.iter().sum::<f64>() / basis.k as f64;
    Ok(z.into_iter().map(|zk| (mu - zk).max(0.0)).collect())
}

/// How volumes are mapped to codes.
#[derive(Debug, Clone, PartialEq)]
pub enum Encoder {
    /// Triangle encoding against the unit-normalized prototypes.
    Triangle(BasisView),
    /// The learner's own codes: soft-threshold for a transform.
    NativeDirect { transform: Transform, lambda0: f64 },
    /// The learner's own codes: LASSO for a dictionary.
    NativeInverse { dictionary: Dictionary, hyper: InverseHyperparams },
}

impl Encoder {
    pub fn num_codes(&self) -> usize {
        match self {
            Encoder::Triangle(b) => b.num_prototypes(),
            Encoder::NativeDirect { transform, .. } => transform.num_rows(),
            Encoder::NativeInverse { dictionary, .. } => dictionary.num_atoms(),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Encoder::Triangle(b) => b.dim(),
            Encoder::NativeDirect { transform, .. } => transform.dim(),
            Encoder::NativeInverse { dictionary, .. } => dictionary.dim(),
        }
    }

    /// Codes for every column of a `d x n` matrix of whitened volumes.
    ///
    /// Triangle distances use `||v||^2 + ||p||^2 - 2 p.v` from one matrix
    /// product, so they can differ from [`triangle_encode`] in the last few
    /// bits. Each column's result depends only on that column.
    pub fn encode_columns(&self, volumes: &Matrix) -> Result<Vec<Vec<f64>>> {
        if volumes.nrows() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: volumes.nrows(),
            });
        }
        let columns = volumes.ncols();
        match self {
            Encoder::Triangle(b) => {
                let g = &b.matrix * volumes;
                let proto_sq: Vec<f64> = (0..b.k).map(|k| math::dot(b.prototype(k), b.prototype(k))).collect();
                Ok((0..columns)
                    .map(|j| {
                        let v = volumes.column(j);
                        let v_sq = math::dot(v.as_slice(), v.as_slice());
                        let gj = g.column(j);
                        let z: Vec<f64> = (0..b.k)
                            .map(|k| math::sqrt((v_sq + proto_sq[k] - 2.0 * gj[k]).max(0.0)))
                            .collect();
                        let mu = z.iter().sum::<f64>() / b.k as f64;
                        z.into_iter().map(|zk| (mu - zk).max(0.0)).collect()
                    })
                    .collect())
            }
            Encoder::NativeDirect { transform, lambda0 } => {
                let g = transform.matrix() * volumes;
                Ok((0..columns)
                    .map(|j| g.column(j).iter().map(|&x| math::soft_threshold(x, *lambda0)).collect())
                    .collect())
            }
            Encoder::NativeInverse { .. } => (0..columns).map(|j| self.encode(volumes.column(j).as_slice())).collect(),
        }
    }

    pub fn encode(&self, v: &[f64]) -> Result<Vec<f64>> {
        match self {
            Encoder::Triangle(b) => triangle_encode(b, v),
            Encoder::NativeDirect { transform, lambda0 } => crate::direct::threshold_code(transform, v, *lambda0),
            Encoder::NativeInverse { dictionary, hyper } => inverse::lasso_code(dictionary, v, hyper),
        }
    }
}

/// Pooled `4K` representation of one recording.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub data: Vec<f64>,
    pub label: Option<u32>,
}

/// Quadrant of a lattice site: 0 top-left, 1 top-right, 2 bottom-left,
/// 3 bottom-right. Boundaries sit at `floor(n / 2)`; a volume whose center
/// lies exactly on a boundary goes left/top.
pub fn quadrant(site: &VolumeOrigin, config: &AccumulationConfig, width: usize, height: usize) -> usize {
    // Twice the center coordinate keeps everything in integers.
    let right = 2 * site.x + config.block_width > 2 * (width / 2);
    let bottom = 2 * site.y + config.block_height > 2 * (height / 2);
    (bottom as usize) * 2 + right as usize
}

/// Volumes encoded per matrix product; bounds memory on large sensors.
const ENCODE_CHUNK: usize = 512;

/// Extracts the lattice, normalizes, whitens and encodes every volume, then
/// sums codes per quadrant (ordered TL, TR, BL, BR).
///
/// Quadrant sums reduce in lattice order with a pairwise tree, so the result
/// does not depend on how the per-volume work was scheduled.
pub fn encode_recording(
    encoder: &Encoder,
    whitening: &WhiteningModel,
    grid: &AccumulatedGrid,
    config: &AccumulationConfig,
    normalize_epsilon: f64,
) -> Result<FeatureVector> {
    let d = config.volume_dim();
    if encoder.dim() != d || whitening.dim() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: if encoder.dim() != d { encoder.dim() } else { whitening.dim() },
        });
    }
    let g = grid.geometry();
    let sites = volumes::lattice_sites(g, grid.num_intervals(), config).map_err(|_| Error::EmptyLattice)?;
    if sites.is_empty() {
        return Err(Error::EmptyLattice);
    }
    let k = encoder.num_codes();
    let mut codes: Vec<(usize, Vec<f64>)> = Vec::with_capacity(sites.len());
    for chunk in sites.chunks(ENCODE_CHUNK) {
        let mut batch = Matrix::zeros(d, chunk.len());
        for (j, site) in chunk.iter().enumerate() {
            let mut v = volumes::extract_volume(grid, config, site.x, site.y, site.interval)?;
            volumes::normalize_in_place(&mut v.data, normalize_epsilon);
            batch.column_mut(j).copy_from_slice(&v.data);
        }
        let white = whitening.apply_columns(&batch)?;
        let encoded = encoder.encode_columns(&white)?;
        codes.extend(chunk.iter().map(|s| s.block).zip(encoded));
    }
    pool_quadrants(&sites, &codes, config, g.width, g.height, k)
}

/// Sums `(block, code)` pairs into the four quadrant blocks. `codes` may be
/// in any order.
pub fn pool_quadrants(
    sites: &[VolumeOrigin],
    codes: &[(usize, Vec<f64>)],
    config: &AccumulationConfig,
    width: usize,
    height: usize,
    k: usize,
) -> Result<FeatureVector> {
    let mut by_block: Vec<Option<&[f64]>> = alloc::vec![None; sites.len()];
    for (block, code) in codes {
        if code.len() != k {
            return Err(Error::DimensionMismatch {
                expected: k,
                found: code.len(),
            });
        }
        let slot = by_block.get_mut(*block).ok_or(Error::EmptyLattice)?;
        *slot = Some(code.as_slice());
    }
    let mut data = Vec::with_capacity(4 * k);
    for q in 0..4 {
        let members: Vec<&[f64]> = sites
            .iter()
            .filter(|s| quadrant(s, config, width, height) == q)
            .filter_map(|s| by_block[s.block])
            .collect();
        data.extend(math::pairwise_sum(&members, k));
    }
    Ok(FeatureVector { data, label: None })
}
