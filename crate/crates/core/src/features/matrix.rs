use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scaling {
    Raw,
    #[default]
    Minmax01,
}

/// Provenance of one feature row.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeatureLabel {
    pub featurizer: String,
    pub index: usize,
}

impl FeatureLabel {
    pub fn new(featurizer: &str, index: usize) -> Self {
        FeatureLabel {
            featurizer: featurizer.to_string(),
            index,
        }
    }
}

impl std::fmt::Display for FeatureLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}:{}", self.featurizer, self.index)
    }
}

/// Data matrix `X`: rows are feature dimensions, columns are time steps.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix<T: Real = f64> {
    pub values: DMatrix<T>,
    pub labels: Vec<FeatureLabel>,
    pub scaling: Scaling,
}

impl<T: Real> FeatureMatrix<T> {
    pub fn new(values: DMatrix<T>, labels: Vec<FeatureLabel>, scaling: Scaling) -> Result<Self> {
        if labels.len() != values.nrows() {
            return Err(Error::Dimension(format!(
                "{} labels for {} feature rows",
                labels.len(),
                values.nrows()
            )));
        }
        if values.iter().any(|v| !v.is_finite_value()) {
            return Err(Error::Validation("feature matrix has non-finite entries".into()));
        }
        Ok(FeatureMatrix {
            values,
            labels,
            scaling,
        })
    }

    /// Unlabelled matrix; rows are labelled `name:i`.
    pub fn from_values(name: &str, values: DMatrix<T>) -> Result<Self> {
        let labels = (0..values.nrows()).map(|i| FeatureLabel::new(name, i)).collect();
        Self::new(values, labels, Scaling::Raw)
    }

    pub fn n_features(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_steps(&self) -> usize {
        self.values.ncols()
    }

    /// Maps every row affinely onto `[0, 1]`; constant rows become 0.
    pub fn minmax01(mut self) -> Self {
        for mut row in self.values.row_iter_mut() {
            let lo = row.min();
            let hi = row.max();
            let span = hi - lo;
            for v in row.iter_mut() {
                *v = if span > T::zero() {
                    (*v - lo) / span
                } else {
                    T::zero()
                };
            }
        }
        self.scaling = Scaling::Minmax01;
        self
    }

    pub fn with_scaling(self, scaling: Scaling) -> Self {
        match scaling {
            Scaling::Raw => self,
            Scaling::Minmax01 => self.minmax01(),
        }
    }

    /// Stacks `parts` row-wise; all must share the step count.
    pub fn concat(parts: Vec<FeatureMatrix<T>>) -> Result<Self> {
        let n = parts
            .first()
            .map(|p| p.n_steps())
            .ok_or_else(|| Error::InvalidArgument("nothing to concatenate".into()))?;
        if let Some(bad) = parts.iter().find(|p| p.n_steps() != n) {
            return Err(Error::Dimension(format!(
                "cannot concatenate {} steps with {n}",
                bad.n_steps()
            )));
        }
        let rows: usize = parts.iter().map(|p| p.n_features()).sum();
        let mut values = DMatrix::zeros(rows, n);
        let mut labels = Vec::with_capacity(rows);
        let mut r = 0;
        for p in parts {
            values.rows_mut(r, p.n_features()).copy_from(&p.values);
            r += p.n_features();
            labels.extend(p.labels);
        }
        Ok(FeatureMatrix {
            values,
            labels,
            scaling: Scaling::Raw,
        })
    }

    pub fn cast<U: Real>(&self) -> FeatureMatrix<U> {
        FeatureMatrix {
            values: self.values.map(|v| U::lit(v.to_f64_lossy())),
            labels: self.labels.clone(),
            scaling: self.scaling,
        }
    }

    /// CSV with a header row `feature,0,1,…,n-1` and one row per feature
    /// (`featurizer:index`, then one value per time step).
    pub fn to_csv(&self) -> String {
        let mut out = String::from("feature");
        for t in 0..self.n_steps() {
            let _ = write!(out, ",{t}");
        }
        out.push('\n');
        for (label, row) in self.labels.iter().zip(self.values.row_iter()) {
            let _ = write!(out, "{label}");
            for v in row.iter() {
                let _ = write!(out, ",{v}");
            }
            out.push('\n');
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let err = |line: usize, msg: String| Error::Parse {
            path: "<features csv>".into(),
            line,
            message: msg,
        };
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, header) = lines.next().ok_or_else(|| err(1, "empty CSV".into()))?;
        let n = header.split(',').count().saturating_sub(1);
        let mut labels = Vec::new();
        let mut data = Vec::new();
        for (i, line) in lines {
            let mut cells = line.split(',');
            let label = cells.next().unwrap_or_default();
            let (name, idx) = label
                .rsplit_once(':')
                .ok_or_else(|| err(i + 1, format!("bad feature label `{label}`")))?;
            let idx = idx
                .parse()
                .map_err(|_| err(i + 1, format!("bad feature index `{idx}`")))?;
            labels.push(FeatureLabel::new(name, idx));
            let row = cells
                .map(|c| {
                    c.trim()
                        .parse::<f64>()
                        .map(T::lit)
                        .map_err(|_| err(i + 1, format!("bad value `{c}`")))
                })
                .collect::<Result<Vec<T>>>()?;
            if row.len() != n {
                return Err(err(i + 1, format!("{} values, header has {n} steps", row.len())));
            }
            data.extend(row);
        }
        let values = DMatrix::from_row_slice(labels.len(), n, &data);
        FeatureMatrix::new(values, labels, Scaling::Raw)
    }

    /// Little-endian binary layout:
    /// `b"MSFM"`, `u32` version (1), `u8` scaling (0 raw, 1 minmax01),
    /// `u64` rows, `u64` cols, per row a `u32` byte length plus UTF-8 label,
    /// then `rows * cols` `f64` values in row-major order.
    pub fn to_binary(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(32 + 8 * self.values.len());
        out.extend_from_slice(BIN_MAGIC);
        out.extend_from_slice(&BIN_VERSION.to_le_bytes());
        out.push(match self.scaling {
            Scaling::Raw => 0,
            Scaling::Minmax01 => 1,
        });
        out.extend_from_slice(&(self.n_features() as u64).to_le_bytes());
        out.extend_from_slice(&(self.n_steps() as u64).to_le_bytes());
        for l in &self.labels {
            let s = l.to_string();
            out.extend_from_slice(&(s.len() as u32).to_le_bytes());
            out.extend_from_slice(s.as_bytes());
        }
        for row in self.values.row_iter() {
            for v in row.iter() {
                out.extend_from_slice(&v.to_f64_lossy().to_le_bytes());
            }
        }
        out
    }

    pub fn from_binary(bytes: &[u8]) -> Result<Self> {
        let mut r = ByteReader { bytes, pos: 0 };
        if r.take(4)? != BIN_MAGIC {
            return Err(Error::Validation("not a feature matrix file".into()));
        }
        let version = u32::from_le_bytes(r.array()?);
        if version != BIN_VERSION {
            return Err(Error::Validation(format!("unsupported version {version}")));
        }
        let scaling = match r.take(1)?[0] {
            0 => Scaling::Raw,
            1 => Scaling::Minmax01,
            s => return Err(Error::Validation(format!("unknown scaling tag {s}"))),
        };
        let rows = u64::from_le_bytes(r.array()?) as usize;
        let cols = u64::from_le_bytes(r.array()?) as usize;
        let mut labels = Vec::with_capacity(rows);
        for _ in 0..rows {
            let len = u32::from_le_bytes(r.array()?) as usize;
            let s = std::str::from_utf8(r.take(len)?)
                .map_err(|_| Error::Validation("label is not UTF-8".into()))?;
            let (name, idx) = s
                .rsplit_once(':')
                .and_then(|(n, i)| Some((n, i.parse().ok()?)))
                .ok_or_else(|| Error::Validation(format!("bad label `{s}`")))?;
            labels.push(FeatureLabel::new(name, idx));
        }
        let mut data = Vec::with_capacity(rows * cols);
        for _ in 0..rows * cols {
            data.push(T::lit(f64::from_le_bytes(r.array()?)));
        }
        if r.pos != bytes.len() {
            return Err(Error::Validation("trailing bytes after matrix".into()));
        }
        FeatureMatrix::new(DMatrix::from_row_slice(rows, cols, &data), labels, scaling)
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_csv()).map_err(|e| Error::io(format!("writing {}", path.display()), e))
    }

    pub fn write_binary(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_binary())
            .map_err(|e| Error::io(format!("writing {}", path.display()), e))
    }

    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path)
            .map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
        Self::from_csv(&text)
    }
}

const BIN_MAGIC: &[u8; 4] = b"MSFM";
const BIN_VERSION: u32 = 1;

struct ByteReader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> ByteReader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos + n;
        let s = self
            .bytes
            .get(self.pos..end)
            .ok_or_else(|| Error::Validation("truncated feature matrix file".into()))?;
        self.pos = end;
        Ok(s)
    }

    fn array<const N: usize>(&mut self) -> Result<[u8; N]> {
        Ok(self.take(N)?.try_into().expect("length checked"))
    }
}
