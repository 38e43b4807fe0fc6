//! Model container: `EVFT0001`, then tagged, length-prefixed sections.
//!
//! Each section is a 4-byte tag, a little-endian `u64` byte length and the
//! payload. Matrices are stored as `u64` rows, `u64` cols and row-major
//! little-endian `f64`s, so a load after a save reproduces every bit.
//!
//! | tag    | payload                                               |
//! |--------|-------------------------------------------------------|
//! | `CONF` | UTF-8 config text                                     |
//! | `WHIT` | epsilon, mean (1 x d), transform (d x d)              |
//! | `BASI` | kind byte (0 inverse, 1 direct), matrix               |
//! | `SVMM` | reg_c, classes, weights (C x D), bias, mean, scale    |

use std::path::Path;

use eventfeat_core::classifier::LinearSvmModel;
use eventfeat_core::direct::Transform;
use eventfeat_core::inverse::Dictionary;
use eventfeat_core::whitening::WhiteningModel;
use eventfeat_core::Matrix;

use crate::config::PipelineConfig;
use crate::error::{HarnessError, Result};

pub const MAGIC: &[u8; 8] = b"EVFT0001";

#[derive(Debug, Clone, PartialEq)]
pub enum Basis {
    /// Atoms as columns, `d x K`.
    Inverse(Dictionary),
    /// Rows `a_k`, `K x d`.
    Direct(Transform),
}

impl Basis {
    pub fn num_vectors(&self) -> usize {
        match self {
            Basis::Inverse(d) => d.num_atoms(),
            Basis::Direct(t) => t.num_rows(),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Basis::Inverse(d) => d.dim(),
            Basis::Direct(t) => t.dim(),
        }
    }

    /// Basis vectors as rows (`K x d`).
    pub fn rows(&self) -> Matrix {
        match self {
            Basis::Inverse(d) => d.matrix().transpose(),
            Basis::Direct(t) => t.matrix(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelContainer {
    pub config: PipelineConfig,
    pub whitening: WhiteningModel,
    pub basis: Basis,
    pub svm: Option<LinearSvmModel>,
}

struct Writer(Vec<u8>);

impl Writer {
    fn u64(&mut self, v: u64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }

    fn f64(&mut self, v: f64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }

    fn f64s(&mut self, v: &[f64]) {
        for &x in v {
            self.f64(x);
        }
    }

    fn matrix(&mut self, m: &Matrix) {
        self.u64(m.nrows() as u64);
        self.u64(m.ncols() as u64);
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                self.f64(m[(i, j)]);
            }
        }
    }

    fn section(&mut self, tag: &[u8; 4], body: Writer) {
        self.0.extend_from_slice(tag);
        self.u64(body.0.len() as u64);
        self.0.extend_from_slice(&body.0);
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    what: &'static str,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.buf.len() < n {
            return Err(HarnessError::Data(format!("model file: truncated {} section", self.what)));
        }
        let (head, tail) = self.buf.split_at(n);
        self.buf = tail;
        Ok(head)
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn len(&mut self) -> Result<usize> {
        let n = self.u64()?;
        usize::try_from(n).map_err(|_| HarnessError::Data(format!("model file: bad length in {} section", self.what)))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        // Check before allocating so a corrupt count cannot exhaust memory.
        if n.checked_mul(8).is_none_or(|b| b > self.buf.len()) {
            return Err(HarnessError::Data(format!("model file: truncated {} section", self.what)));
        }
        (0..n).map(|_| self.f64()).collect()
    }

    fn matrix(&mut self) -> Result<Matrix> {
        let rows = self.len()?;
        let cols = self.len()?;
        let data = self.f64s(rows.saturating_mul(cols))?;
        Ok(Matrix::from_row_slice(rows, cols, &data))
    }
}

impl ModelContainer {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Writer(MAGIC.to_vec());

        let mut conf = Writer(Vec::new());
        conf.0.extend_from_slice(self.config.to_text().as_bytes());
        out.section(b"CONF", conf);

        let mut whit = Writer(Vec::new());
        whit.f64(self.whitening.epsilon);
        whit.matrix(&Matrix::from_row_slice(1, self.whitening.mean.len(), &self.whitening.mean));
        whit.matrix(&self.whitening.transform);
        out.section(b"WHIT", whit);

        let mut basis = Writer(Vec::new());
        match &self.basis {
            Basis::Inverse(d) => {
                basis.0.push(0);
                basis.matrix(d.matrix());
            }
            Basis::Direct(t) => {
                basis.0.push(1);
                basis.matrix(&t.matrix());
            }
        }
        out.section(b"BASI", basis);

        if let Some(svm) = &self.svm {
            let mut s = Writer(Vec::new());
            let d = svm.mean.len();
            s.f64(svm.reg_c);
            s.u64(svm.classes.len() as u64);
            for &c in &svm.classes {
                s.u64(c as u64);
            }
            s.matrix(&Matrix::from_row_slice(svm.classes.len(), d, &svm.weights));
            s.f64s(&svm.bias);
            s.u64(d as u64);
            s.f64s(&svm.mean);
            s.f64s(&svm.scale);
            out.section(b"SVMM", s);
        }
        out.0
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 8 || &bytes[..8] != MAGIC {
            return Err(HarnessError::Data("model file: missing EVFT0001 header".into()));
        }
        let mut r = Reader { buf: &bytes[8..], what: "header" };
        let (mut config, mut whitening, mut basis, mut svm) = (None, None, None, None);
        while !r.buf.is_empty() {
            let tag: [u8; 4] = r.take(4)?.try_into().unwrap();
            let n = r.len()?;
            let mut s = Reader { buf: r.take(n)?, what: "section" };
            match &tag {
                b"CONF" => {
                    s.what = "CONF";
                    let text = std::str::from_utf8(s.buf).map_err(|_| HarnessError::Data("model file: config is not UTF-8".into()))?;
                    config = Some(PipelineConfig::parse(text)?);
                }
                b"WHIT" => {
                    s.what = "WHIT";
                    let epsilon = s.f64()?;
                    let mean = s.matrix()?;
                    let transform = s.matrix()?;
                    if mean.nrows() != 1 || transform.nrows() != mean.ncols() || transform.ncols() != mean.ncols() {
                        return Err(HarnessError::Data("model file: whitening shapes disagree".into()));
                    }
                    whitening = Some(WhiteningModel {
                        mean: mean.as_slice().to_vec(),
                        transform,
                        epsilon,
                    });
                }
                b"BASI" => {
                    s.what = "BASI";
                    let kind = s.take(1)?[0];
                    let m = s.matrix()?;
                    basis = Some(match kind {
                        0 => Basis::Inverse(Dictionary::new(m)?),
                        1 => Basis::Direct(Transform::new(&m)?),
                        _ => return Err(HarnessError::Data(format!("model file: unknown basis kind {kind}"))),
                    });
                }
                b"SVMM" => {
                    s.what = "SVMM";
                    let reg_c = s.f64()?;
                    let c = s.len()?;
                    let classes = (0..c)
                        .map(|_| s.u64().map(|v| v as u32))
                        .collect::<Result<Vec<_>>>()?;
                    let weights = s.matrix()?;
                    let bias = s.f64s(c)?;
                    let d = s.len()?;
                    let mean = s.f64s(d)?;
                    let scale = s.f64s(d)?;
                    if weights.nrows() != c || weights.ncols() != d {
                        return Err(HarnessError::Data("model file: classifier shapes disagree".into()));
                    }
                    let mut w = Vec::with_capacity(c * d);
                    for i in 0..c {
                        w.extend(weights.row(i).iter());
                    }
                    svm = Some(LinearSvmModel {
                        classes,
                        weights: w,
                        bias,
                        reg_c,
                        mean,
                        scale,
                    });
                }
                _ => {
                    return Err(HarnessError::Data(format!(
                        "model file: unknown section {:?}",
                        String::from_utf8_lossy(&tag)
                    )))
                }
            }
        }
        let missing = |what: &str| HarnessError::Data(format!("model file: missing {what} section"));
        let model = Self {
            config: config.ok_or_else(|| missing("CONF"))?,
            whitening: whitening.ok_or_else(|| missing("WHIT"))?,
            basis: basis.ok_or_else(|| missing("BASI"))?,
            svm,
        };
        model.check_dimensions()?;
        Ok(model)
    }

    /// The volume size of the config, whitening and basis must agree.
    pub fn check_dimensions(&self) -> Result<()> {
        let d = self.config.volume_dim();
        if self.whitening.dim() != d || self.basis.dim() != d {
            return Err(HarnessError::config(
                "volume",
                format!(
                    "config implies d = {d}, model has whitening d = {} and basis d = {}",
                    self.whitening.dim(),
                    self.basis.dim()
                ),
            ));
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()).map_err(|e| HarnessError::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| HarnessError::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}
