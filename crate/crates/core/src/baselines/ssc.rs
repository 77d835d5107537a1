//! Sparse subspace clustering: LASSO self-expression of every column by
//! the others, then spectral clustering of `|C| + |C|ᵀ`.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graphclust::{spectral_clustering, AffinityGraph, DiscreteTrajectory};
use crate::Real;

pub const LASSO_TOL: f64 = 1e-6;
pub const LASSO_MAX_SWEEPS: usize = 1000;

/// Sparsity weight for each column's LASSO problem.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SscLambda {
    Fixed(f64),
    /// Fraction of the smallest weight that zeroes every coefficient,
    /// `‖X_{-i}ᵀ x_i‖_∞`, taken per column.
    Relative(f64),
}

impl Default for SscLambda {
    fn default() -> Self {
        SscLambda::Relative(0.01)
    }
}

impl SscLambda {
    fn validate(self) -> Result<()> {
        let v = match self {
            SscLambda::Fixed(v) | SscLambda::Relative(v) => v,
        };
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::InvalidArgument(format!("SSC lambda must be positive, got {v}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SscModel<T: Real> {
    /// Column `i` expresses `x_i`; the diagonal is zero.
    pub c: DMatrix<T>,
    pub lambdas: Vec<T>,
}

#[derive(Debug, Clone)]
pub struct LassoFit<T: Real> {
    pub coef: Vec<T>,
    /// Objective after each full sweep.
    pub history: Vec<T>,
    pub sweeps: usize,
}

fn soft(v: f64, t: f64) -> f64 {
    v.signum() * (v.abs() - t).max(0.0)
}

/// Coordinate descent for `½‖b − A c‖² + λ‖c‖₁` with `c_skip = 0` held fixed.
///
/// Full sweeps alternate with sweeps over the active set until the largest
/// coefficient change drops below `tol`.
pub fn lasso_cd<T: Real>(
    a: &DMatrix<T>,
    b: &[T],
    lambda: T,
    skip: Option<usize>,
    tol: f64,
    max_sweeps: usize,
) -> LassoFit<T> {
    let p = a.ncols();
    let lam = lambda.to_f64_lossy();
    let cols: Vec<Vec<f64>> = a.column_iter().map(|c| c.iter().map(|v| v.to_f64_lossy()).collect()).collect();
    let sq: Vec<f64> = cols.iter().map(|c| c.iter().map(|v| v * v).sum()).collect();
    let mut residual: Vec<f64> = b.iter().map(|v| v.to_f64_lossy()).collect();
    let mut coef = vec![0.0f64; p];
    let objective = |r: &[f64], c: &[f64]| {
        0.5 * r.iter().map(|v| v * v).sum::<f64>() + lam * c.iter().map(|v| v.abs()).sum::<f64>()
    };
    let mut history = vec![T::lit(objective(&residual, &coef))];

    let step = |j: usize, coef: &mut [f64], residual: &mut [f64]| -> f64 {
        if Some(j) == skip || sq[j] == 0.0 {
            return 0.0;
        }
        let col = &cols[j];
        let rho: f64 = col.iter().zip(residual.iter()).map(|(x, r)| x * r).sum::<f64>() + sq[j] * coef[j];
        let new = soft(rho, lam) / sq[j];
        let delta = new - coef[j];
        if delta != 0.0 {
            for (r, x) in residual.iter_mut().zip(col) {
                *r -= delta * x;
            }
            coef[j] = new;
        }
        delta.abs() * sq[j].sqrt()
    };

    let mut sweeps = 0;
    while sweeps < max_sweeps {
        let mut change = 0.0f64;
        for j in 0..p {
            change = change.max(step(j, &mut coef, &mut residual));
        }
        sweeps += 1;
        history.push(T::lit(objective(&residual, &coef)));
        if change < tol {
            break;
        }
        // Settle the active set before the next full pass.
        let active: Vec<usize> = (0..p).filter(|&j| coef[j] != 0.0).collect();
        while sweeps < max_sweeps {
            let mut inner = 0.0f64;
            for &j in &active {
                inner = inner.max(step(j, &mut coef, &mut residual));
            }
            sweeps += 1;
            history.push(T::lit(objective(&residual, &coef)));
            if inner < tol {
                break;
            }
        }
    }
    LassoFit { coef: coef.into_iter().map(T::lit).collect(), history, sweeps }
}

/// Self-expression coefficients for every column of `x`.
pub fn ssc_model<T: Real>(x: &DMatrix<T>, lambda: SscLambda) -> Result<SscModel<T>> {
    lambda.validate()?;
    let n = x.ncols();
    if n < 2 {
        return Err(Error::InvalidArgument("SSC needs at least 2 time steps".into()));
    }
    if x.iter().any(|v| !v.is_finite_value()) {
        return Err(Error::Validation("SSC input contains non-finite values".into()));
    }
    let gram_max = |i: usize| {
        (0..n)
            .filter(|&j| j != i)
            .map(|j| x.column(j).dot(&x.column(i)).abs())
            .fold(T::zero(), |m, v| m.max(v))
    };
    let solved: Vec<(Vec<T>, T)> = (0..n)
        .into_par_iter()
        .map(|i| {
            let lam = match lambda {
                SscLambda::Fixed(v) => T::lit(v),
                SscLambda::Relative(f) => gram_max(i) * T::lit(f),
            };
            let b: Vec<T> = x.column(i).iter().copied().collect();
            if lam <= T::zero() {
                return (vec![T::zero(); n], lam);
            }
            (lasso_cd(x, &b, lam, Some(i), LASSO_TOL, LASSO_MAX_SWEEPS).coef, lam)
        })
        .collect();
    let mut c = DMatrix::zeros(n, n);
    let mut lambdas = Vec::with_capacity(n);
    for (i, (coef, lam)) in solved.into_iter().enumerate() {
        c.set_column(i, &nalgebra::DVector::from_vec(coef));
        c[(i, i)] = T::zero();
        lambdas.push(lam);
    }
    Ok(SscModel { c, lambdas })
}

pub fn ssc_cluster<T: Real>(x: &DMatrix<T>, lambda: SscLambda, k: usize, seed: u64) -> Result<DiscreteTrajectory> {
    let model = ssc_model(x, lambda)?;
    let abs = model.c.abs();
    let w = &abs + abs.transpose();
    Ok(spectral_clustering(&AffinityGraph::from_weights(w)?, k, seed)?.dtraj)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bench::ari;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn orthogonal_subspaces_separated() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let mut x = DMatrix::zeros(3, 20);
        for j in 0..20 {
            let s = rng.gen_range(0.5..2.0) * if rng.gen::<bool>() { 1.0 } else { -1.0 };
            x[(if j < 10 { 0 } else { 1 }, j)] = s;
        }
        let d = ssc_cluster(&x, SscLambda::default(), 2, 1).unwrap();
        let truth = DiscreteTrajectory::new((0..20).map(|j| j / 10).collect(), 2).unwrap();
        assert_eq!(ari(&d, &truth).unwrap(), 1.0);
    }

    #[test]
    fn duplicate_column_takes_the_weight() {
        let x = DMatrix::from_column_slice(3, 3, &[1.0, 2.0, 0.5, 1.0, 2.0, 0.5, -0.3, 0.1, 1.0]);
        let m = ssc_model::<f64>(&x, SscLambda::Fixed(0.1)).unwrap();
        // Oracle: with only the duplicate active, c = (‖y‖² − λ)/‖y‖².
        let sq = 1.0 + 4.0 + 0.25;
        assert!((m.c[(1, 0)] - (sq - 0.1) / sq).abs() < 1e-5);
        assert_eq!(m.c[(2, 0)], 0.0);
        for i in 0..3 {
            assert_eq!(m.c[(i, i)], 0.0);
        }
    }

    #[test]
    fn nonpositive_lambda_rejected() {
        let x = DMatrix::from_element(2, 3, 1.0);
        assert!(ssc_model(&x, SscLambda::Fixed(0.0)).is_err());
        assert!(ssc_model(&x, SscLambda::Relative(-1.0)).is_err());
    }

    proptest! {
        #[test]
        fn lasso_objective_never_increases(seed in 0u64..300, lam in 0.001f64..1.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a = DMatrix::from_fn(6, 12, |_, _| rng.gen::<f64>() - 0.5);
            let b: Vec<f64> = (0..6).map(|_| rng.gen::<f64>()).collect();
            let fit = lasso_cd(&a, &b, lam, Some(3), 1e-9, 1000);
            prop_assert_eq!(fit.coef[3], 0.0);
            for w in fit.history.windows(2) {
                prop_assert!(w[1] <= w[0] + 1e-12);
            }
        }

        #[test]
        fn diagonal_is_zero(seed in 0u64..100) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let x = DMatrix::from_fn(4, 10, |_, _| rng.gen::<f64>());
            let m = ssc_model(&x, SscLambda::default()).unwrap();
            for i in 0..10 {
                prop_assert_eq!(m.c[(i, i)], 0.0);
            }
        }
    }
}
