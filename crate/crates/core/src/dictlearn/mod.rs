//! Nonnegative dictionary learning with temporal Laplacian regularization,
//! solved by ADMM.
//!
//! The objective is
//!
//! ```text
//! min_{D,Z} ‖X − DZ‖²_F + λ₁‖Z‖²_F + λ₂ tr(Z L Zᵀ)
//! s.t. Z ≥ 0, D ≥ 0, ‖dᵢ‖₂ ≤ 1
//! ```
//!
//! split with auxiliaries `U = D`, `V = Z` and multipliers `Λ`, `Π`. Each
//! iteration updates V, U, Z, D, Π, Λ in that order.

mod update;

use std::time::Instant;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::tempreg::{regularizer_value, TemporalLaplacian};

pub use update::{update_d, update_multipliers, update_u, update_v, update_z, VOperator};

/// Which penalty is attached to which constraint.
///
/// `Lagrangian` pairs α with `U = D` (and Λ) and β with `V = Z` (and Π).
/// `Algorithm1` swaps them.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MultiplierPairing {
    #[default]
    Lagrangian,
    Algorithm1,
}

/// Linear solver for the V subproblem.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VSolver {
    /// Matrix-free preconditioned conjugate gradient.
    Cg,
    /// Exact: Gram eigenbasis plus one banded Cholesky per dictionary row.
    #[default]
    Eigenbasis,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    /// Dictionary size.
    pub d: usize,
    pub lambda1: f64,
    pub lambda2: f64,
    pub alpha: f64,
    pub beta: f64,
    /// Multiplier step scale.
    pub nu: f64,
    pub max_iters: usize,
    /// Relative primal-residual tolerance.
    pub tol: f64,
    pub seed: u64,
    pub cg_tol: f64,
    pub cg_max_iters: usize,
    pub pairing: MultiplierPairing,
    pub v_solver: VSolver,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            d: 60,
            lambda1: 0.01,
            lambda2: 15.0,
            alpha: 0.1,
            beta: 0.1,
            nu: 1.0,
            max_iters: 20,
            tol: 1e-4,
            seed: 0,
            cg_tol: 1e-10,
            cg_max_iters: 5000,
            pairing: MultiplierPairing::Lagrangian,
            v_solver: VSolver::Eigenbasis,
        }
    }
}

impl SolverConfig {
    /// Penalty on `‖U − D‖²` (and step for Λ).
    pub fn rho_u(&self) -> f64 {
        match self.pairing {
            MultiplierPairing::Lagrangian => self.alpha,
            MultiplierPairing::Algorithm1 => self.beta,
        }
    }

    /// Penalty on `‖V − Z‖²` (and step for Π).
    pub fn rho_v(&self) -> f64 {
        match self.pairing {
            MultiplierPairing::Lagrangian => self.beta,
            MultiplierPairing::Algorithm1 => self.alpha,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [("alpha", self.alpha), ("beta", self.beta), ("nu", self.nu)];
        for (name, v) in positive {
            if !(v > 0.0) {
                return Err(Error::InvalidArgument(format!("{name} must be positive, got {v}")));
            }
        }
        for (name, v) in [("lambda1", self.lambda1), ("lambda2", self.lambda2)] {
            if !(v >= 0.0) {
                return Err(Error::InvalidArgument(format!("{name} must be nonnegative, got {v}")));
            }
        }
        if self.d == 0 {
            return Err(Error::InvalidArgument("dictionary size must be at least 1".into()));
        }
        Ok(())
    }
}

/// All ADMM variables.
#[derive(Debug, Clone, PartialEq)]
pub struct AdmmState<T: Real> {
    /// Dictionary, `d_feat × d`.
    pub d: DMatrix<T>,
    /// Coding matrix, `d × n`.
    pub z: DMatrix<T>,
    pub u: DMatrix<T>,
    pub v: DMatrix<T>,
    /// Multiplier for `V − Z`.
    pub pi: DMatrix<T>,
    /// Multiplier for `U − D`.
    pub lam: DMatrix<T>,
    pub iter: usize,
    pub primal_res_u: f64,
    pub primal_res_v: f64,
}

pub const INITIAL_CODE: f64 = 1e-3;

/// Seeds `D` with `d` distinct data columns (clipped at 0, unit-normalized),
/// `Z` with a small positive constant, `U = D`, `V = Z`, multipliers zero.
pub fn init_state<T: Real>(x: &DMatrix<T>, cfg: &SolverConfig) -> Result<(AdmmState<T>, Vec<usize>)> {
    let (d_feat, n) = x.shape();
    if cfg.d > n {
        return Err(Error::InvalidArgument(format!(
            "dictionary size {} exceeds {n} time steps",
            cfg.d
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let picks = rand::seq::index::sample(&mut rng, n, cfg.d).into_vec();
    let mut d = DMatrix::zeros(d_feat, cfg.d);
    for (c, &j) in picks.iter().enumerate() {
        let mut col = x.column(j).map(|v| v.max(T::zero()));
        let norm = col.norm();
        if norm > T::zero() {
            col /= norm;
        }
        d.set_column(c, &col);
    }
    let z = DMatrix::from_element(cfg.d, n, T::lit(INITIAL_CODE));
    Ok((
        AdmmState {
            u: d.clone(),
            v: z.clone(),
            pi: DMatrix::zeros(cfg.d, n),
            lam: DMatrix::zeros(d_feat, cfg.d),
            d,
            z,
            iter: 0,
            primal_res_u: 0.0,
            primal_res_v: 0.0,
        },
        picks,
    ))
}

/// `‖X − DZ‖² + λ₁‖Z‖² + λ₂ tr(Z L Zᵀ)`.
pub fn objective<T: Real>(
    x: &DMatrix<T>,
    d: &DMatrix<T>,
    z: &DMatrix<T>,
    lambda1: T,
    lambda2: T,
    laplacian: &TemporalLaplacian<T>,
) -> Result<T> {
    if d.nrows() != x.nrows() || z.ncols() != x.ncols() || d.ncols() != z.nrows() {
        return Err(Error::Dimension(format!(
            "X {:?}, D {:?}, Z {:?}",
            x.shape(),
            d.shape(),
            z.shape()
        )));
    }
    let fit = (x - d * z).norm_squared();
    Ok(fit + lambda1 * z.norm_squared() + lambda2 * regularizer_value(z, laplacian)?)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IterationRecord {
    pub iter: usize,
    pub objective: f64,
    /// `‖V − Z‖_F`.
    pub primal_res_v: f64,
    /// `‖U − D‖_F`.
    pub primal_res_u: f64,
    /// `‖V − Z‖_F / ‖Z‖_F`.
    pub rel_res_v: f64,
    /// `‖U − D‖_F / ‖D‖_F`.
    pub rel_res_u: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Diagnostics {
    pub sampled_columns: Vec<usize>,
    pub iterations: Vec<IterationRecord>,
    /// Cumulative wall time after each iteration.
    pub wall_seconds: Vec<f64>,
    pub converged: bool,
}

impl Diagnostics {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("diagnostics serialize")
    }
}

#[derive(Debug, Clone)]
pub struct FitResult<T: Real> {
    pub state: AdmmState<T>,
    pub diagnostics: Diagnostics,
}

impl<T: Real> FitResult<T> {
    pub fn dictionary(&self) -> &DMatrix<T> {
        &self.state.d
    }

    pub fn coding(&self) -> &DMatrix<T> {
        &self.state.z
    }
}

fn relative(abs: f64, norm: f64) -> f64 {
    if norm > 0.0 {
        abs / norm
    } else {
        abs
    }
}

fn check_finite<T: Real>(m: &DMatrix<T>, variable: &'static str, iteration: usize) -> Result<()> {
    if m.iter().all(|v| v.is_finite_value()) {
        Ok(())
    } else {
        Err(Error::NonFinite { variable, iteration })
    }
}

/// Runs ADMM until the relative primal residual drops below `tol` or
/// `max_iters` is reached.
pub fn fit<T: Real>(x: &DMatrix<T>, laplacian: &TemporalLaplacian<T>, cfg: &SolverConfig) -> Result<FitResult<T>> {
    cfg.validate()?;
    if laplacian.n() != x.ncols() {
        return Err(Error::Dimension(format!(
            "Laplacian is for {} steps, X has {}",
            laplacian.n(),
            x.ncols()
        )));
    }
    check_finite(x, "X", 0)?;
    let (mut state, sampled_columns) = init_state(x, cfg)?;
    let mut diag = Diagnostics {
        sampled_columns,
        iterations: Vec::new(),
        wall_seconds: Vec::new(),
        converged: false,
    };
    let start = Instant::now();
    let (l1, l2) = (T::lit(cfg.lambda1), T::lit(cfg.lambda2));
    for it in 1..=cfg.max_iters {
        state.v = update_v(&state, x, laplacian, cfg)?;
        check_finite(&state.v, "V", it)?;
        state.u = update_u(&state, x, cfg)?;
        check_finite(&state.u, "U", it)?;
        state.z = update_z(&state, cfg);
        state.d = update_d(&state, cfg);
        update_multipliers(&mut state, cfg);
        check_finite(&state.pi, "Pi", it)?;
        check_finite(&state.lam, "Lambda", it)?;
        state.iter = it;

        let res_v = (&state.v - &state.z).norm().to_f64_lossy();
        let res_u = (&state.u - &state.d).norm().to_f64_lossy();
        let z_norm = state.z.norm().to_f64_lossy();
        let d_norm = state.d.norm().to_f64_lossy();
        state.primal_res_v = res_v;
        state.primal_res_u = res_u;
        let obj = objective(x, &state.d, &state.z, l1, l2, laplacian)?.to_f64_lossy();
        if !obj.is_finite() {
            return Err(Error::NonFinite {
                variable: "objective",
                iteration: it,
            });
        }
        diag.iterations.push(IterationRecord {
            iter: it,
            objective: obj,
            primal_res_v: res_v,
            primal_res_u: res_u,
            rel_res_v: relative(res_v, z_norm),
            rel_res_u: relative(res_u, d_norm),
        });
        diag.wall_seconds.push(start.elapsed().as_secs_f64());
        if res_v.max(res_u) / 1f64.max(z_norm).max(d_norm) < cfg.tol {
            diag.converged = true;
            break;
        }
    }
    Ok(FitResult {
        state,
        diagnostics: diag,
    })
}
