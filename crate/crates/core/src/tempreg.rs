//! Sequential-neighbor weights and the temporal Laplacian `L = D̃ - W`.
//!
//! The Laplacian is stored in banded form: the weight between steps `i` and
//! `i + k` lives in `bands[k - 1][i]`, for `k` up to the bandwidth.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WeightMode {
    #[default]
    Binary,
    Gaussian,
    Logarithmic,
    Exponential,
}

impl WeightMode {
    pub const ALL: [WeightMode; 4] = [
        WeightMode::Binary,
        WeightMode::Gaussian,
        WeightMode::Logarithmic,
        WeightMode::Exponential,
    ];

    pub fn name(self) -> &'static str {
        match self {
            WeightMode::Binary => "binary",
            WeightMode::Gaussian => "gaussian",
            WeightMode::Logarithmic => "logarithmic",
            WeightMode::Exponential => "exponential",
        }
    }
}

impl fmt::Display for WeightMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for WeightMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        WeightMode::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown weight mode `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TemporalWeightConfig {
    /// Sequential neighbors on each side.
    pub s: usize,
    pub mode: WeightMode,
    /// Gaussian width; `None` means `s / 2`.
    pub gaussian_sigma: Option<f64>,
    pub exp_theta: f64,
}

impl Default for TemporalWeightConfig {
    fn default() -> Self {
        TemporalWeightConfig {
            s: 3,
            mode: WeightMode::Binary,
            gaussian_sigma: None,
            exp_theta: 1.0,
        }
    }
}

impl TemporalWeightConfig {
    pub fn new(s: usize, mode: WeightMode) -> Self {
        TemporalWeightConfig {
            s,
            mode,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(sigma) = self.gaussian_sigma {
            if !(sigma > 0.0) {
                return Err(Error::InvalidArgument(format!("gaussian_sigma must be positive, got {sigma}")));
            }
        }
        if !(self.exp_theta > 0.0) {
            return Err(Error::InvalidArgument(format!("exp_theta must be positive, got {}", self.exp_theta)));
        }
        Ok(())
    }

    /// Weight `g(offset)` for `1 ≤ offset ≤ s`; zero outside the window.
    pub fn weight(&self, offset: usize) -> f64 {
        if offset == 0 || offset > self.s {
            return 0.0;
        }
        let j = offset as f64;
        let s = self.s as f64;
        match self.mode {
            WeightMode::Binary => 1.0,
            WeightMode::Gaussian => {
                let sigma = self.gaussian_sigma.unwrap_or(s / 2.0);
                (-j * j / (2.0 * sigma * sigma)).exp()
            }
            WeightMode::Logarithmic if self.s == 1 => 1.0,
            WeightMode::Logarithmic => 1.0 - j.ln() / s.ln(),
            WeightMode::Exponential => (-(j - 1.0) / self.exp_theta).exp(),
        }
    }
}

/// Dense `n × n` weight matrix `W`.
pub fn weight_matrix<T: Real>(n: usize, cfg: &TemporalWeightConfig) -> Result<DMatrix<T>> {
    cfg.validate()?;
    Ok(DMatrix::from_fn(n, n, |i, j| T::lit(cfg.weight(i.abs_diff(j)))))
}

#[derive(Debug, Clone, PartialEq)]
pub struct TemporalLaplacian<T: Real> {
    n: usize,
    degree: DVector<T>,
    bands: Vec<Vec<T>>,
}

/// Validates `W` and builds `L = D̃ - W`.
pub fn temporal_laplacian<T: Real>(w: &DMatrix<T>) -> Result<TemporalLaplacian<T>> {
    if !w.is_square() {
        return Err(Error::Dimension(format!("W is {}×{}", w.nrows(), w.ncols())));
    }
    let n = w.nrows();
    let scale = w.amax().max(T::one());
    let tol = T::lit(1e-12) * scale;
    let mut bandwidth = 0;
    for i in 0..n {
        if w[(i, i)] != T::zero() {
            return Err(Error::Validation(format!("W has nonzero diagonal at {i}")));
        }
        for j in 0..n {
            let v = w[(i, j)];
            if v < T::zero() {
                return Err(Error::Validation(format!("W has negative entry at ({i}, {j})")));
            }
            if (v - w[(j, i)]).abs() > tol {
                return Err(Error::Validation(format!("W is not symmetric at ({i}, {j})")));
            }
            if v != T::zero() {
                bandwidth = bandwidth.max(i.abs_diff(j));
            }
        }
    }
    let bands = (1..=bandwidth)
        .map(|k| (0..n - k).map(|i| w[(i, i + k)]).collect())
        .collect();
    Ok(TemporalLaplacian::from_bands(n, bands))
}

impl<T: Real> TemporalLaplacian<T> {
    /// Builds the banded Laplacian directly from a weighting config.
    pub fn from_config(n: usize, cfg: &TemporalWeightConfig) -> Result<Self> {
        cfg.validate()?;
        let bandwidth = cfg.s.min(n.saturating_sub(1));
        let bands = (1..=bandwidth)
            .map(|k| vec![T::lit(cfg.weight(k)); n - k])
            .collect();
        Ok(Self::from_bands(n, bands))
    }

    fn from_bands(n: usize, bands: Vec<Vec<T>>) -> Self {
        let mut degree = DVector::zeros(n);
        for (k0, band) in bands.iter().enumerate() {
            let k = k0 + 1;
            for (i, &w) in band.iter().enumerate() {
                degree[i] += w;
                degree[i + k] += w;
            }
        }
        TemporalLaplacian { n, degree, bands }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn bandwidth(&self) -> usize {
        self.bands.len()
    }

    /// Diagonal of `D̃`.
    pub fn degree(&self) -> &DVector<T> {
        &self.degree
    }

    pub fn weight(&self, i: usize, j: usize) -> T {
        let k = i.abs_diff(j);
        if k == 0 || k > self.bands.len() {
            T::zero()
        } else {
            self.bands[k - 1][i.min(j)]
        }
    }

    pub fn weights_dense(&self) -> DMatrix<T> {
        DMatrix::from_fn(self.n, self.n, |i, j| self.weight(i, j))
    }

    pub fn dense(&self) -> DMatrix<T> {
        DMatrix::from_fn(self.n, self.n, |i, j| {
            if i == j {
                self.degree[i]
            } else {
                -self.weight(i, j)
            }
        })
    }

    /// `V L` for a matrix with `n` columns, in `O(rows · n · bandwidth)`.
    pub fn right_apply(&self, v: &DMatrix<T>) -> DMatrix<T> {
        assert_eq!(v.ncols(), self.n, "right_apply: column count");
        let mut out = DMatrix::zeros(v.nrows(), self.n);
        self.right_apply_into(v, &mut out);
        out
    }

    pub(crate) fn right_apply_into(&self, v: &DMatrix<T>, out: &mut DMatrix<T>) {
        for j in 0..self.n {
            let d = self.degree[j];
            out.column_mut(j).zip_apply(&v.column(j), |o, x| *o = d * x);
        }
        for (k0, band) in self.bands.iter().enumerate() {
            let k = k0 + 1;
            for (i, &w) in band.iter().enumerate() {
                if w == T::zero() {
                    continue;
                }
                for r in 0..v.nrows() {
                    let (a, b) = (v[(r, i)], v[(r, i + k)]);
                    out[(r, i)] -= w * b;
                    out[(r, i + k)] -= w * a;
                }
            }
        }
    }

    /// Dense banded matrix `shift·I + scale·L` in LAPACK-style lower band
    /// storage: `band[k][i]` holds entry `(i + k, i)`.
    pub(crate) fn shifted_lower_band(&self, shift: T, scale: T) -> Vec<Vec<T>> {
        let mut out = Vec::with_capacity(self.bands.len() + 1);
        out.push(self.degree.iter().map(|&d| shift + scale * d).collect());
        for band in &self.bands {
            out.push(band.iter().map(|&w| -scale * w).collect());
        }
        out
    }
}

/// `tr(Z L Zᵀ)`.
pub fn regularizer_value<T: Real>(z: &DMatrix<T>, l: &TemporalLaplacian<T>) -> Result<T> {
    if z.ncols() != l.n() {
        return Err(Error::Dimension(format!(
            "Z has {} columns, Laplacian is {}×{}",
            z.ncols(),
            l.n(),
            l.n()
        )));
    }
    Ok(z.dot(&l.right_apply(z)))
}
