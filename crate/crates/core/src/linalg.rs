//! Dense linear-algebra helpers shared by the solvers.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Eigenvalues below this are dropped by pseudo-inverse square roots.
pub const DEFAULT_RANK_EPS: f64 = 1e-10;

/// Symmetric eigendecomposition with eigenvalues sorted in descending order.
pub fn sorted_symmetric_eigen<T: Real>(m: &DMatrix<T>) -> (DVector<T>, DMatrix<T>) {
    let sym = (m + m.transpose()) * T::lit(0.5);
    let eig = sym.symmetric_eigen();
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .partial_cmp(&eig.eigenvalues[a])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    let values = DVector::from_iterator(order.len(), order.iter().map(|&i| eig.eigenvalues[i]));
    let vectors = DMatrix::from_columns(
        &order
            .iter()
            .map(|&i| eig.eigenvectors.column(i).into_owned())
            .collect::<Vec<_>>(),
    );
    (values, vectors)
}

/// Pseudo-inverse square root of a symmetric PSD matrix, discarding
/// eigenvalues below `eps`.
pub fn sym_pinv_sqrt<T: Real>(c: &DMatrix<T>, eps: T) -> DMatrix<T> {
    let (vals, vecs) = sorted_symmetric_eigen(c);
    let n = c.nrows();
    let mut out = DMatrix::zeros(n, n);
    for (i, &lam) in vals.iter().enumerate() {
        if lam < eps {
            continue;
        }
        let v = vecs.column(i);
        out += v * v.transpose() * (T::one() / lam.sqrt());
    }
    out
}

/// Cholesky factor of an SPD banded matrix in lower band storage
/// (`band[k][i]` = entry `(i + k, i)`), returned in the same layout.
pub fn banded_cholesky<T: Real>(band: &[Vec<T>]) -> Result<Vec<Vec<T>>> {
    let n = band[0].len();
    let b = band.len() - 1;
    let mut l: Vec<Vec<T>> = band.to_vec();
    for j in 0..n {
        let mut d = l[0][j];
        for k in 1..=b.min(j) {
            let x = l[k][j - k];
            d -= x * x;
        }
        if !(d > T::zero()) {
            return Err(Error::LinearAlgebra(format!(
                "banded matrix not positive definite at pivot {j}"
            )));
        }
        let d = d.sqrt();
        l[0][j] = d;
        for i in j + 1..=(j + b).min(n - 1) {
            let mut s = l[i - j][j];
            for m in i.saturating_sub(b)..j {
                s -= l[i - m][m] * l[j - m][m];
            }
            l[i - j][j] = s / d;
        }
    }
    Ok(l)
}

/// Solves `L Lᵀ x = y` in place given a factor from [`banded_cholesky`].
pub fn banded_cholesky_solve<T: Real>(l: &[Vec<T>], y: &mut [T]) {
    let n = y.len();
    let b = l.len() - 1;
    for i in 0..n {
        let mut s = y[i];
        for k in 1..=b.min(i) {
            s -= l[k][i - k] * y[i - k];
        }
        y[i] = s / l[0][i];
    }
    for i in (0..n).rev() {
        let mut s = y[i];
        for k in 1..=b.min(n - 1 - i) {
            s -= l[k][i] * y[i + k];
        }
        y[i] = s / l[0][i];
    }
}

/// `a += s · b` for equally shaped matrices.
pub(crate) fn add_scaled<T: Real>(a: &mut DMatrix<T>, s: T, b: &DMatrix<T>) {
    a.zip_apply(b, |x, y| *x += s * y);
}

/// Below this size the dense eigensolver is used directly.
const DENSE_EIGEN_LIMIT: usize = 300;
const KRYLOV_OVERSAMPLE: usize = 8;
const KRYLOV_TOL: f64 = 1e-9;

/// The `k` algebraically largest eigenpairs of a symmetric matrix, values
/// in descending order.
///
/// Large inputs use block Krylov iteration with Rayleigh–Ritz extraction;
/// the block size exceeds `k`, so repeated eigenvalues up to that
/// multiplicity are resolved. Deterministic for a fixed `seed`.
pub fn top_eigenpairs<T: Real>(a: &DMatrix<T>, k: usize, seed: u64) -> (DVector<T>, DMatrix<T>) {
    let n = a.nrows();
    let k = k.min(n);
    let block = (k + KRYLOV_OVERSAMPLE).min(n);
    if n <= DENSE_EIGEN_LIMIT || 4 * block >= n {
        let (vals, vecs) = sorted_symmetric_eigen(a);
        return (vals.rows(0, k).into_owned(), vecs.columns(0, k).into_owned());
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut basis: Vec<DVector<T>> = Vec::new();
    let mut images: Vec<DVector<T>> = Vec::new();
    let mut next = random_block(&mut rng, n, block);
    loop {
        let fresh = orthonormalize_against(&basis, next, &mut rng);
        for q in fresh {
            images.push(a * &q);
            basis.push(q);
        }
        let q = DMatrix::from_columns(&basis);
        let aq = DMatrix::from_columns(&images);
        let h = q.transpose() * &aq;
        let (theta, s) = sorted_symmetric_eigen(&h);
        let sk = s.columns(0, k);
        let y = &q * sk;
        let ay = &aq * sk;
        let scale = theta.iter().fold(T::zero(), |m, t| m.max(t.abs())).max(T::lit(1e-300));
        let converged = (0..k).all(|i| {
            let r = ay.column(i) - y.column(i) * theta[i];
            r.norm() <= T::lit(KRYLOV_TOL) * scale
        });
        if converged {
            return (theta.rows(0, k).into_owned(), y);
        }
        if basis.len() + block >= n {
            let (vals, vecs) = sorted_symmetric_eigen(a);
            return (vals.rows(0, k).into_owned(), vecs.columns(0, k).into_owned());
        }
        let start = images.len() - block.min(images.len());
        next = images[start..].to_vec();
    }
}

fn random_block<T: Real>(rng: &mut ChaCha8Rng, n: usize, p: usize) -> Vec<DVector<T>> {
    (0..p)
        .map(|_| {
            DVector::from_fn(n, |_, _| {
                let x: f64 = StandardNormal.sample(rng);
                T::lit(x)
            })
        })
        .collect()
}

/// Block Gram–Schmidt (applied twice) against `basis`; rank-deficient
/// directions are replaced by fresh random vectors.
fn orthonormalize_against<T: Real>(
    basis: &[DVector<T>],
    block: Vec<DVector<T>>,
    rng: &mut ChaCha8Rng,
) -> Vec<DVector<T>> {
    let n = block.first().map_or(0, |v| v.len());
    let mut out: Vec<DVector<T>> = Vec::with_capacity(block.len());
    for mut v in block {
        for attempt in 0..4 {
            let before = v.norm();
            for _ in 0..2 {
                for q in basis.iter().chain(out.iter()) {
                    let c = q.dot(&v);
                    v.axpy(-c, q, T::one());
                }
            }
            let after = v.norm();
            if after > T::lit(1e-10) * before && after > T::zero() {
                out.push(v / after);
                break;
            }
            if attempt == 3 || basis.len() + out.len() >= n {
                break;
            }
            v = random_block(rng, n, 1).pop().expect("one vector");
        }
    }
    out
}
