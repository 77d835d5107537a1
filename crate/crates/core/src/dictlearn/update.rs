//! Individual ADMM block updates.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg::{add_scaled, banded_cholesky, banded_cholesky_solve, sorted_symmetric_eigen};
use crate::scalar::Real;
use crate::tempreg::TemporalLaplacian;

use super::{AdmmState, SolverConfig, VSolver};

/// Matrix-free operator of the V subproblem:
/// `M(V) = G V + λ₂ V L` with `G = UᵀU + (λ₁ + ρ_V) I`.
pub struct VOperator<'a, T: Real> {
    pub gram: DMatrix<T>,
    pub lambda2: T,
    pub laplacian: &'a TemporalLaplacian<T>,
}

impl<'a, T: Real> VOperator<'a, T> {
    pub fn new(u: &DMatrix<T>, shift: T, lambda2: T, laplacian: &'a TemporalLaplacian<T>) -> Self {
        let mut gram = u.transpose() * u;
        for i in 0..gram.nrows() {
            gram[(i, i)] += shift;
        }
        VOperator {
            gram,
            lambda2,
            laplacian,
        }
    }

    pub fn apply(&self, v: &DMatrix<T>) -> DMatrix<T> {
        let mut out = self.laplacian.right_apply(v);
        out *= self.lambda2;
        out.gemm(T::one(), &self.gram, v, T::one());
        out
    }

    /// Assembles `I ⊗ G + λ₂ L ⊗ I` acting on column-stacked `vec(V)`.
    pub fn kronecker_dense(&self) -> DMatrix<T> {
        let d = self.gram.nrows();
        let n = self.laplacian.n();
        let l = self.laplacian.dense();
        DMatrix::from_fn(d * n, d * n, |r, c| {
            let (ri, rj) = (r % d, r / d);
            let (ci, cj) = (c % d, c / d);
            let mut v = T::zero();
            if rj == cj {
                v += self.gram[(ri, ci)];
            }
            if ri == ci {
                v += self.lambda2 * l[(rj, cj)];
            }
            v
        })
    }

    /// Preconditioned conjugate gradient from `x0`, Jacobi preconditioner.
    pub fn solve_cg(&self, rhs: &DMatrix<T>, x0: &DMatrix<T>, tol: T, max_iters: usize) -> Result<DMatrix<T>> {
        let b_norm = rhs.norm();
        if b_norm == T::zero() {
            return Ok(DMatrix::zeros(rhs.nrows(), rhs.ncols()));
        }
        let deg = self.laplacian.degree();
        let precond = DMatrix::from_fn(rhs.nrows(), rhs.ncols(), |i, j| {
            T::one() / (self.gram[(i, i)] + self.lambda2 * deg[j])
        });
        let mut x = x0.clone();
        let mut r = rhs - self.apply(&x);
        let mut z = r.component_mul(&precond);
        let mut p = z.clone();
        let mut rz = r.dot(&z);
        let mut res = r.norm() / b_norm;
        for _ in 0..max_iters {
            if res <= tol {
                return Ok(x);
            }
            let mp = self.apply(&p);
            let alpha = rz / p.dot(&mp);
            add_scaled(&mut x, alpha, &p);
            add_scaled(&mut r, -alpha, &mp);
            res = r.norm() / b_norm;
            z = r.component_mul(&precond);
            let rz_new = r.dot(&z);
            let beta = rz_new / rz;
            rz = rz_new;
            p *= beta;
            p += &z;
        }
        if res <= tol {
            Ok(x)
        } else {
            Err(Error::CgNotConverged {
                iterations: max_iters,
                residual: res.to_f64_lossy(),
            })
        }
    }

    /// Exact solve: diagonalize `G = Q diag(μ) Qᵀ`, then every row of `QᵀV`
    /// solves the banded SPD system `(μᵢ I + λ₂ L) v = b`.
    pub fn solve_eigenbasis(&self, rhs: &DMatrix<T>) -> Result<DMatrix<T>> {
        let (mu, q) = sorted_symmetric_eigen(&self.gram);
        let mut rotated = q.transpose() * rhs;
        let n = rotated.ncols();
        let mut row = vec![T::zero(); n];
        for i in 0..rotated.nrows() {
            let band = self.laplacian.shifted_lower_band(mu[i], self.lambda2);
            let factor = banded_cholesky(&band)?;
            for (j, slot) in row.iter_mut().enumerate() {
                *slot = rotated[(i, j)];
            }
            banded_cholesky_solve(&factor, &mut row);
            for (j, &v) in row.iter().enumerate() {
                rotated[(i, j)] = v;
            }
        }
        Ok(q * rotated)
    }
}

/// Solves the V subproblem for the current `U`, `Z`, `Π`.
pub fn update_v<T: Real>(
    state: &AdmmState<T>,
    x: &DMatrix<T>,
    laplacian: &TemporalLaplacian<T>,
    cfg: &SolverConfig,
) -> Result<DMatrix<T>> {
    let rho = T::lit(cfg.rho_v());
    let op = VOperator::new(&state.u, T::lit(cfg.lambda1) + rho, T::lit(cfg.lambda2), laplacian);
    let mut rhs = state.u.transpose() * x - &state.pi;
    add_scaled(&mut rhs, rho, &state.z);
    match cfg.v_solver {
        VSolver::Cg => op.solve_cg(&rhs, &state.v, T::lit(cfg.cg_tol), cfg.cg_max_iters),
        VSolver::Eigenbasis => op.solve_eigenbasis(&rhs),
    }
}

/// `U = (X Vᵀ − Λ + ρ_U D)(V Vᵀ + ρ_U I)⁻¹`.
pub fn update_u<T: Real>(state: &AdmmState<T>, x: &DMatrix<T>, cfg: &SolverConfig) -> Result<DMatrix<T>> {
    let rho = T::lit(cfg.rho_u());
    let mut rhs = x * state.v.transpose() - &state.lam;
    add_scaled(&mut rhs, rho, &state.d);
    let mut gram = &state.v * state.v.transpose();
    for i in 0..gram.nrows() {
        gram[(i, i)] += rho;
    }
    let chol = gram
        .cholesky()
        .ok_or_else(|| Error::LinearAlgebra("V Vᵀ + ρI is not positive definite".into()))?;
    // U G = R with G symmetric  ⇔  G Uᵀ = Rᵀ
    Ok(chol.solve(&rhs.transpose()).transpose())
}

/// `Z = max(V + Π/ρ_V, 0)`.
pub fn update_z<T: Real>(state: &AdmmState<T>, cfg: &SolverConfig) -> DMatrix<T> {
    let inv = T::one() / T::lit(cfg.rho_v());
    state.v.zip_map(&state.pi, |v, p| (v + p * inv).max(T::zero()))
}

/// `D = max(U + Λ/ρ_U, 0)`, then columns projected into the unit ball.
pub fn update_d<T: Real>(state: &AdmmState<T>, cfg: &SolverConfig) -> DMatrix<T> {
    let inv = T::one() / T::lit(cfg.rho_u());
    let mut d = state.u.zip_map(&state.lam, |u, l| (u + l * inv).max(T::zero()));
    project_unit_columns(&mut d);
    d
}

pub(crate) fn project_unit_columns<T: Real>(d: &mut DMatrix<T>) {
    for mut col in d.column_iter_mut() {
        let norm = col.norm();
        if norm > T::one() {
            col /= norm;
        }
    }
}

/// `Π += ν ρ_V (V − Z)`, `Λ += ν ρ_U (U − D)`.
pub fn update_multipliers<T: Real>(state: &mut AdmmState<T>, cfg: &SolverConfig) {
    let step_v = T::lit(cfg.nu * cfg.rho_v());
    let step_u = T::lit(cfg.nu * cfg.rho_u());
    state.pi += (&state.v - &state.z) * step_v;
    state.lam += (&state.u - &state.d) * step_u;
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dictlearn::MultiplierPairing;
    use crate::tempreg::{TemporalWeightConfig, WeightMode};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cfg() -> SolverConfig {
        SolverConfig::default()
    }

    fn state(dfeat: usize, d: usize, n: usize, rng: &mut ChaCha8Rng) -> AdmmState<f64> {
        let mut r = |rows, cols| DMatrix::from_fn(rows, cols, |_, _| rng.gen_range(-1.0..1.0));
        AdmmState {
            d: r(dfeat, d).abs(),
            z: r(d, n).abs(),
            u: r(dfeat, d),
            v: r(d, n),
            pi: r(d, n),
            lam: r(dfeat, d),
            iter: 0,
            primal_res_u: 0.0,
            primal_res_v: 0.0,
        }
    }

    fn dense_v_oracle(s: &AdmmState<f64>, x: &DMatrix<f64>, l: &TemporalLaplacian<f64>, c: &SolverConfig) -> DMatrix<f64> {
        // Independent assembly of the Kronecker system from dense pieces.
        let (d, n) = (s.v.nrows(), s.v.ncols());
        let g = s.u.transpose() * &s.u + DMatrix::identity(d, d) * (c.lambda1 + c.rho_v());
        let ld = l.dense();
        let mut m = DMatrix::zeros(d * n, d * n);
        for j in 0..n {
            m.view_mut((j * d, j * d), (d, d)).copy_from(&g);
            for k in 0..n {
                for i in 0..d {
                    m[(j * d + i, k * d + i)] += c.lambda2 * ld[(j, k)];
                }
            }
        }
        let rhs = s.u.transpose() * x - &s.pi + &s.z * c.rho_v();
        let b = nalgebra::DVector::from_column_slice(rhs.as_slice());
        let sol = m.lu().solve(&b).unwrap();
        DMatrix::from_column_slice(d, n, sol.as_slice())
    }

    #[test]
    fn decoupled_ridge_example() {
        let c = SolverConfig { lambda1: 0.9, beta: 0.1, lambda2: 0.0, ..cfg() };
        let n = 3;
        let s = AdmmState {
            u: DMatrix::identity(3, 3),
            v: DMatrix::zeros(3, n),
            z: DMatrix::zeros(3, n),
            pi: DMatrix::zeros(3, n),
            d: DMatrix::zeros(3, 3),
            lam: DMatrix::zeros(3, 3),
            iter: 0,
            primal_res_u: 0.0,
            primal_res_v: 0.0,
        };
        let x = DMatrix::identity(3, 3) * 2.0;
        let l = TemporalLaplacian::from_config(n, &TemporalWeightConfig::new(2, WeightMode::Binary)).unwrap();
        for solver in [VSolver::Cg, VSolver::Eigenbasis] {
            let v = update_v(&s, &x, &l, &SolverConfig { v_solver: solver, ..c.clone() }).unwrap();
            assert!((v - DMatrix::identity(3, 3)).amax() < 1e-9);
        }
    }

    #[test]
    fn single_step_is_ridge() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let s = state(5, 3, 1, &mut rng);
        let x = DMatrix::from_fn(5, 1, |_, _| rng.gen_range(0.0..1.0));
        let l = TemporalLaplacian::from_config(1, &TemporalWeightConfig::default()).unwrap();
        let c = cfg();
        let g = s.u.transpose() * &s.u + DMatrix::identity(3, 3) * (c.lambda1 + c.rho_v());
        let expect = g.lu().solve(&(s.u.transpose() * &x - &s.pi + &s.z * c.rho_v())).unwrap();
        for solver in [VSolver::Cg, VSolver::Eigenbasis] {
            let v = update_v(&s, &x, &l, &SolverConfig { v_solver: solver, ..c.clone() }).unwrap();
            assert!((v - &expect).amax() < 1e-8);
        }
    }

    #[test]
    fn v_update_matches_dense_kronecker() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let s = state(6, 4, 8, &mut rng);
        let x = DMatrix::from_fn(6, 8, |_, _| rng.gen_range(0.0..1.0));
        let l = TemporalLaplacian::from_config(8, &TemporalWeightConfig::new(3, WeightMode::Gaussian)).unwrap();
        let c = cfg();
        let oracle = dense_v_oracle(&s, &x, &l, &c);
        for solver in [VSolver::Cg, VSolver::Eigenbasis] {
            let v = update_v(&s, &x, &l, &SolverConfig { v_solver: solver, ..c.clone() }).unwrap();
            assert!((&v - &oracle).norm() / oracle.norm() < 1e-6, "{solver:?}");
        }
        // the operator's own Kronecker assembly agrees with the oracle's
        let op = VOperator::new(&s.u, c.lambda1 + c.rho_v(), c.lambda2, &l);
        let vec_v = nalgebra::DVector::from_column_slice(oracle.as_slice());
        let lhs = op.kronecker_dense() * vec_v;
        let applied = op.apply(&oracle);
        assert!((lhs - nalgebra::DVector::from_column_slice(applied.as_slice())).amax() < 1e-9);
    }

    #[test]
    fn v_operator_is_positive_definite() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let s = state(5, 4, 10, &mut rng);
        let l = TemporalLaplacian::from_config(10, &TemporalWeightConfig::new(3, WeightMode::Binary)).unwrap();
        let op = VOperator::new(&s.u, 0.11, 15.0, &l);
        for _ in 0..50 {
            let p = DMatrix::from_fn(4, 10, |_, _| rng.gen_range(-1.0..1.0));
            assert!(p.dot(&op.apply(&p)) > 0.0);
        }
    }

    #[test]
    fn cg_reports_non_convergence() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let s = state(5, 4, 30, &mut rng);
        let x = DMatrix::from_fn(5, 30, |_, _| rng.gen_range(0.0..1.0));
        let l = TemporalLaplacian::from_config(30, &TemporalWeightConfig::new(3, WeightMode::Binary)).unwrap();
        let c = SolverConfig { v_solver: VSolver::Cg, cg_max_iters: 1, cg_tol: 1e-14, ..cfg() };
        match update_v(&s, &x, &l, &c) {
            Err(Error::CgNotConverged { iterations, residual }) => {
                assert_eq!(iterations, 1);
                assert!(residual > 1e-14);
            }
            other => panic!("expected CG failure, got {other:?}"),
        }
    }

    #[test]
    fn u_update_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let mut s = state(6, 4, 9, &mut rng);
        let x = DMatrix::from_fn(6, 9, |_, _| rng.gen_range(0.0..1.0));
        let c = cfg();
        let u = update_u(&s, &x, &c).unwrap();
        // dense oracle via explicit inverse
        let rho = c.rho_u();
        let g = &s.v * s.v.transpose() + DMatrix::identity(4, 4) * rho;
        let expect = (&x * s.v.transpose() - &s.lam + &s.d * rho) * g.try_inverse().unwrap();
        assert!((&u - &expect).amax() < 1e-8 * expect.amax().max(1.0));

        // zero data, zero multipliers, zero dictionary
        s.lam.fill(0.0);
        s.d.fill(0.0);
        assert_eq!(update_u(&s, &DMatrix::zeros(6, 9), &c).unwrap().amax(), 0.0);

        // identity coding: U → X as ρ → 0
        let mut s = state(3, 3, 3, &mut rng);
        s.v = DMatrix::identity(3, 3);
        s.lam.fill(0.0);
        let x = DMatrix::from_fn(3, 3, |i, j| (i + 2 * j) as f64);
        let tiny = SolverConfig { alpha: 1e-12, beta: 1e-12, ..cfg() };
        assert!((update_u(&s, &x, &tiny).unwrap() - &x).amax() < 1e-9);
    }

    #[test]
    fn projection_examples() {
        let c = SolverConfig { beta: 1.0, alpha: 1.0, ..cfg() };
        let mut s = AdmmState::<f64> {
            v: DMatrix::from_row_slice(2, 2, &[-1.0, 2.0, 3.0, -4.0]),
            pi: DMatrix::zeros(2, 2),
            u: DMatrix::from_row_slice(2, 2, &[3.0, 0.3, 4.0, 0.4]),
            lam: DMatrix::zeros(2, 2),
            z: DMatrix::zeros(2, 2),
            d: DMatrix::zeros(2, 2),
            iter: 0,
            primal_res_u: 0.0,
            primal_res_v: 0.0,
        };
        assert_eq!(update_z(&s, &c), DMatrix::from_row_slice(2, 2, &[0.0, 2.0, 3.0, 0.0]));
        let d = update_d(&s, &c);
        assert!((d[(0, 0)] - 0.6).abs() < 1e-15 && (d[(1, 0)] - 0.8).abs() < 1e-15);
        assert_eq!((d[(0, 1)], d[(1, 1)]), (0.3, 0.4));
        s.u[(0, 0)] = -5.0;
        assert_eq!(update_d(&s, &c)[(0, 0)], 0.0);
    }

    #[test]
    fn multiplier_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        let mut s = state(3, 2, 2, &mut rng);
        s.z = s.v.clone();
        s.d = s.u.clone();
        let before = (s.pi.clone(), s.lam.clone());
        update_multipliers(&mut s, &cfg());
        assert_eq!((s.pi.clone(), s.lam.clone()), before);

        let mut s = state(3, 2, 2, &mut rng);
        let before = (s.pi.clone(), s.lam.clone());
        update_multipliers(&mut s, &SolverConfig { nu: 0.0, ..cfg() });
        assert_eq!((s.pi.clone(), s.lam.clone()), before);

        let mut s = state(2, 2, 2, &mut rng);
        s.z = DMatrix::zeros(2, 2);
        s.v = DMatrix::from_element(2, 2, 1.0);
        s.pi = DMatrix::zeros(2, 2);
        update_multipliers(&mut s, &SolverConfig { nu: 1.0, beta: 0.1, ..cfg() });
        assert!((s.pi - DMatrix::from_element(2, 2, 0.1)).amax() < 1e-15);
    }

    #[test]
    fn pairing_swaps_penalties() {
        let c = SolverConfig { alpha: 0.3, beta: 0.7, ..cfg() };
        assert_eq!((c.rho_u(), c.rho_v()), (0.3, 0.7));
        let a1 = SolverConfig { pairing: MultiplierPairing::Algorithm1, ..c };
        assert_eq!((a1.rho_u(), a1.rho_v()), (0.7, 0.3));
    }
}
