//! Temporal subspace clustering for molecular-dynamics trajectories.
//!
//! The pipeline runs in four stages:
//!
//! 1. [`features`] turns a [`trajio::Trajectory`] into a data matrix `X`
//!    (feature dimensions × time steps).
//! 2. [`tempreg`] builds the temporal Laplacian that couples neighboring
//!    time steps.
//! 3. [`dictlearn`] learns a nonnegative dictionary `D` and coding `Z` with
//!    `X ≈ DZ` by ADMM.
//! 4. [`graphclust`] clusters the cosine affinity of the columns of `Z`
//!    into a discrete trajectory, which [`msm`] turns into a Markov state
//!    model and scores with VAMP-r.
//!
//! [`baselines`] provides PCA/TICA + k-means and sparse subspace clustering
//! on the same inputs, [`bench`] generates synthetic trajectories with
//! planted states, and [`pipeline`] drives everything from a config file.
//!
//! Numerical code is generic over [`Real`] (`f32`/`f64`).

pub mod baselines;
pub mod bench;
pub mod dictlearn;
pub mod error;
pub mod features;
pub mod graphclust;
pub mod linalg;
pub mod msm;
pub mod pipeline;
mod scalar;
pub mod tempreg;
pub mod trajio;

pub use error::{Error, Result};
pub use scalar::Real;

pub type AdmmState64 = dictlearn::AdmmState<f64>;
pub type AdmmState32 = dictlearn::AdmmState<f32>;
pub type FeatureMatrix64 = features::FeatureMatrix<f64>;
pub type FeatureMatrix32 = features::FeatureMatrix<f32>;
pub type TemporalLaplacian64 = tempreg::TemporalLaplacian<f64>;
pub type TemporalLaplacian32 = tempreg::TemporalLaplacian<f32>;
pub type AffinityGraph64 = graphclust::AffinityGraph<f64>;
pub type AffinityGraph32 = graphclust::AffinityGraph<f32>;
pub type VampComputation64 = msm::VampComputation<f64>;
pub type VampComputation32 = msm::VampComputation<f32>;
