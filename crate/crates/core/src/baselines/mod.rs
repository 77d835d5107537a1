//! Comparison methods: PCA and TICA projections clustered with k-means,
//! and sparse subspace clustering.

pub mod kmeans;
mod ssc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::sorted_symmetric_eigen;
use crate::Real;

pub use kmeans::{kmeans, kmeans_fit, KMeansFit};
pub use ssc::{lasso_cd, ssc_cluster, ssc_model, LassoFit, SscLambda, SscModel};

pub const DEFAULT_VARIANCE_FRACTION: f64 = 0.95;
pub const DEFAULT_TICA_LAG: usize = 10;
/// Relative eigenvalue cutoff for rank decisions and TICA whitening.
pub const REL_RANK_EPS: f64 = 1e-10;

fn row_means<T: Real>(x: &DMatrix<T>) -> DVector<T> {
    let n = T::from_count(x.ncols());
    DVector::from_iterator(x.nrows(), x.row_iter().map(|r| r.sum() / n))
}

fn centered<T: Real>(x: &DMatrix<T>, mean: &DVector<T>) -> DMatrix<T> {
    let mut c = x.clone();
    for mut col in c.column_iter_mut() {
        col -= mean;
    }
    c
}

fn components_for<T: Real>(values: &[T], fraction: f64) -> usize {
    let total = values.iter().fold(T::zero(), |a, &v| a + v);
    if total <= T::zero() {
        return 1;
    }
    let mut acc = T::zero();
    for (i, &v) in values.iter().enumerate() {
        acc += v;
        if acc >= T::lit(fraction) * total {
            return i + 1;
        }
    }
    values.len()
}

#[derive(Debug, Clone)]
pub struct Pca<T: Real> {
    pub mean: DVector<T>,
    /// Covariance eigenvalues, descending.
    pub variances: DVector<T>,
    /// Principal axes as columns, same order.
    pub axes: DMatrix<T>,
    pub rank: usize,
}

pub fn pca<T: Real>(x: &DMatrix<T>) -> Result<Pca<T>> {
    let n = x.ncols();
    if n < 2 {
        return Err(Error::InvalidArgument("PCA needs at least 2 time steps".into()));
    }
    let mean = row_means(x);
    let xc = centered(x, &mean);
    let cov = &xc * xc.transpose() / T::from_count(n - 1);
    let (mut variances, axes) = sorted_symmetric_eigen(&cov);
    variances.apply(|v| *v = v.max(T::zero()));
    let cutoff = T::lit(REL_RANK_EPS) * variances.max().max(T::lit(f64::MIN_POSITIVE));
    let rank = variances.iter().filter(|&&v| v > cutoff).count();
    Ok(Pca { mean, variances, axes, rank })
}

impl<T: Real> Pca<T> {
    pub fn dims_for_variance(&self, fraction: f64) -> usize {
        components_for(self.variances.as_slice(), fraction).min(self.rank.max(1))
    }

    pub fn project(&self, x: &DMatrix<T>, dims: usize) -> Result<DMatrix<T>> {
        if dims == 0 || dims > self.rank {
            return Err(Error::InvalidArgument(format!(
                "PCA dims must be in 1..={}, got {dims}",
                self.rank
            )));
        }
        Ok(self.axes.columns(0, dims).transpose() * centered(x, &self.mean))
    }
}

/// Rows are the projections onto the leading `dims` principal axes.
pub fn pca_project<T: Real>(x: &DMatrix<T>, dims: usize) -> Result<DMatrix<T>> {
    pca(x)?.project(x, dims)
}

#[derive(Debug, Clone)]
pub struct Tica<T: Real> {
    pub lag: usize,
    pub mean: DVector<T>,
    pub c0: DMatrix<T>,
    pub ct: DMatrix<T>,
    /// Generalized eigenvalues, descending.
    pub eigenvalues: DVector<T>,
    /// Independent components as columns, `C0`-orthonormal.
    pub components: DMatrix<T>,
}

/// Symmetrized time-lagged covariance estimate and its generalized
/// eigenproblem `Ct v = λ C0 v`, solved in the whitened space of `C0`.
pub fn tica<T: Real>(x: &DMatrix<T>, lag: usize) -> Result<Tica<T>> {
    let n = x.ncols();
    if lag == 0 || lag >= n {
        return Err(Error::InvalidArgument(format!("TICA lag must satisfy 1 <= lag < n, got lag={lag}, n={n}")));
    }
    let mean = row_means(x);
    let xc = centered(x, &mean);
    let pairs = n - lag;
    let x0 = xc.columns(0, pairs);
    let x1 = xc.columns(lag, pairs);
    let norm = T::from_count(2 * pairs);
    let c0 = (&x0 * x0.transpose() + &x1 * x1.transpose()) / norm;
    let ct = (&x0 * x1.transpose() + &x1 * x0.transpose()) / norm;

    let (vals, vecs) = sorted_symmetric_eigen(&c0);
    let cutoff = T::lit(REL_RANK_EPS) * vals.max().max(T::lit(f64::MIN_POSITIVE));
    let kept: Vec<usize> = (0..vals.len()).filter(|&i| vals[i] > cutoff).collect();
    if kept.is_empty() {
        return Err(Error::LinearAlgebra("TICA instantaneous covariance is zero".into()));
    }
    let whiten = DMatrix::from_columns(
        &kept.iter().map(|&i| vecs.column(i) / vals[i].sqrt()).collect::<Vec<_>>(),
    );
    let reduced = whiten.transpose() * &ct * &whiten;
    let (eigenvalues, rot) = sorted_symmetric_eigen(&reduced);
    let components = whiten * rot;
    Ok(Tica { lag, mean, c0, ct, eigenvalues, components })
}

impl<T: Real> Tica<T> {
    /// Dimensions reaching `fraction` of the kinetic variance `Σ λ²`.
    pub fn dims_for_kinetic_variance(&self, fraction: f64) -> usize {
        let sq: Vec<T> = self.eigenvalues.iter().map(|&l| l * l).collect();
        components_for(&sq, fraction)
    }

    pub fn project(&self, x: &DMatrix<T>, dims: usize) -> Result<DMatrix<T>> {
        if dims == 0 || dims > self.components.ncols() {
            return Err(Error::InvalidArgument(format!(
                "TICA dims must be in 1..={}, got {dims}",
                self.components.ncols()
            )));
        }
        Ok(self.components.columns(0, dims).transpose() * centered(x, &self.mean))
    }
}

pub fn tica_project<T: Real>(x: &DMatrix<T>, lag: usize, dims: usize) -> Result<DMatrix<T>> {
    tica(x, lag)?.project(x, dims)
}
