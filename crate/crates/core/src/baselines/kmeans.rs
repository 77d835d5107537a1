//! Seeded k-means++ with Lloyd refinement and best-of-restarts selection.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::graphclust::DiscreteTrajectory;
use crate::Real;

pub const DEFAULT_RESTARTS: usize = 10;
pub const MAX_LLOYD_ITERS: usize = 300;
pub const MOVE_TOL: f64 = 1e-8;

#[derive(Debug, Clone)]
pub struct KMeansFit<T: Real> {
    pub labels: Vec<usize>,
    /// `p × k`, one centroid per column.
    pub centroids: DMatrix<T>,
    pub inertia: T,
    /// Inertia after every assignment step of the winning restart.
    pub history: Vec<T>,
}

/// Clusters the columns of `y` into `k` groups.
pub fn kmeans<T: Real>(y: &DMatrix<T>, k: usize, seed: u64) -> Result<DiscreteTrajectory> {
    let fit = kmeans_fit(y, k, seed, DEFAULT_RESTARTS)?;
    DiscreteTrajectory::new(fit.labels, k)
}

pub fn kmeans_fit<T: Real>(y: &DMatrix<T>, k: usize, seed: u64, restarts: usize) -> Result<KMeansFit<T>> {
    let n = y.ncols();
    if k == 0 || k > n {
        return Err(Error::InvalidArgument(format!(
            "k-means needs 1 <= k <= n, got k={k}, n={n}"
        )));
    }
    if y.iter().any(|v| !v.is_finite_value()) {
        return Err(Error::Validation("k-means input contains non-finite values".into()));
    }
    let fits: Vec<KMeansFit<T>> = (0..restarts.max(1))
        .into_par_iter()
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(r as u64);
            lloyd(y, plus_plus(y, k, &mut rng))
        })
        .collect();
    // Ties go to the lowest restart index.
    let best = fits
        .into_iter()
        .reduce(|a, b| if b.inertia < a.inertia { b } else { a })
        .expect("at least one restart");
    Ok(best)
}

fn sq_dist<T: Real>(y: &DMatrix<T>, i: usize, c: &DMatrix<T>, j: usize) -> T {
    y.column(i)
        .iter()
        .zip(c.column(j).iter())
        .fold(T::zero(), |acc, (&a, &b)| acc + (a - b) * (a - b))
}

fn plus_plus<T: Real>(y: &DMatrix<T>, k: usize, rng: &mut ChaCha8Rng) -> DMatrix<T> {
    let n = y.ncols();
    let mut centroids = DMatrix::zeros(y.nrows(), k);
    let first = rng.gen_range(0..n);
    centroids.set_column(0, &y.column(first));
    let mut d2: Vec<f64> = (0..n).map(|i| sq_dist(y, i, &centroids, 0).to_f64_lossy()).collect();
    let mut chosen = vec![first];
    for c in 1..k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.gen::<f64>() * total;
            let mut pick = n - 1;
            for (i, &w) in d2.iter().enumerate() {
                if w > 0.0 && target < w {
                    pick = i;
                    break;
                }
                target -= w;
            }
            if d2[pick] == 0.0 {
                pick = d2.iter().rposition(|&w| w > 0.0).unwrap_or(pick);
            }
            pick
        } else {
            // All points coincide with a chosen center; take unused indices in order.
            (0..n).find(|i| !chosen.contains(i)).unwrap_or(0)
        };
        chosen.push(pick);
        centroids.set_column(c, &y.column(pick));
        for (i, w) in d2.iter_mut().enumerate() {
            *w = w.min(sq_dist(y, i, &centroids, c).to_f64_lossy());
        }
    }
    centroids
}

fn assign<T: Real>(y: &DMatrix<T>, centroids: &DMatrix<T>, labels: &mut [usize], dist: &mut [T]) -> T {
    let k = centroids.ncols();
    let mut inertia = T::zero();
    for i in 0..y.ncols() {
        let mut best = (0, sq_dist(y, i, centroids, 0));
        for j in 1..k {
            let d = sq_dist(y, i, centroids, j);
            if d < best.1 {
                best = (j, d);
            }
        }
        labels[i] = best.0;
        dist[i] = best.1;
        inertia += best.1;
    }
    inertia
}

fn lloyd<T: Real>(y: &DMatrix<T>, mut centroids: DMatrix<T>) -> KMeansFit<T> {
    let (p, n, k) = (y.nrows(), y.ncols(), centroids.ncols());
    let mut labels = vec![0usize; n];
    let mut dist = vec![T::zero(); n];
    let mut history = Vec::new();
    let mut inertia = assign(y, &centroids, &mut labels, &mut dist);
    history.push(inertia);
    for _ in 0..MAX_LLOYD_ITERS {
        let mut sums = DMatrix::<T>::zeros(p, k);
        let mut counts = vec![0usize; k];
        for i in 0..n {
            let mut col = sums.column_mut(labels[i]);
            col += y.column(i);
            counts[labels[i]] += 1;
        }
        let mut next = centroids.clone();
        let mut taken: Vec<usize> = Vec::new();
        for j in 0..k {
            if counts[j] > 0 {
                next.set_column(j, &(sums.column(j) / T::from_count(counts[j])));
            } else {
                // Empty cluster: move it onto the point worst served by its centroid.
                let far = (0..n)
                    .filter(|i| !taken.contains(i))
                    .fold(None, |best: Option<usize>, i| match best {
                        Some(b) if dist[b] >= dist[i] => Some(b),
                        _ => Some(i),
                    });
                if let Some(f) = far {
                    taken.push(f);
                    dist[f] = T::zero();
                    next.set_column(j, &y.column(f));
                }
            }
        }
        let shift = (0..k)
            .map(|j| (next.column(j) - centroids.column(j)).norm())
            .fold(T::zero(), |m, v| m.max(v));
        centroids = next;
        inertia = assign(y, &centroids, &mut labels, &mut dist);
        history.push(inertia);
        if shift < T::lit(MOVE_TOL) {
            break;
        }
    }
    KMeansFit { labels, centroids, inertia, history }
}
