//! Cosine affinity of coding columns and normalized spectral clustering.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::DMatrix;

use crate::baselines::kmeans;
use crate::error::{Error, Result};
use crate::linalg::top_eigenpairs;
use crate::Real;

/// Pairwise cosine similarity between time steps.
///
/// `raw` keeps signed similarities; `clustering` has negatives clipped to 0
/// and is what [`spectral_clustering`] consumes.
#[derive(Debug, Clone, PartialEq)]
pub struct AffinityGraph<T: Real> {
    raw: DMatrix<T>,
    clustering: DMatrix<T>,
}

impl<T: Real> AffinityGraph<T> {
    /// Wraps a precomputed nonnegative symmetric weight matrix.
    pub fn from_weights(w: DMatrix<T>) -> Result<Self> {
        if !w.is_square() {
            return Err(Error::Dimension(format!(
                "affinity must be square, got {}x{}",
                w.nrows(),
                w.ncols()
            )));
        }
        let scale = w.iter().fold(T::one(), |m, v| m.max(v.abs()));
        for i in 0..w.nrows() {
            for j in 0..w.ncols() {
                let v = w[(i, j)];
                if !v.is_finite_value() || v < T::zero() {
                    return Err(Error::Validation(format!("affinity entry ({i},{j}) = {v} is not a nonnegative number")));
                }
                if (v - w[(j, i)]).abs() > T::lit(1e-12) * scale {
                    return Err(Error::Validation(format!("affinity is not symmetric at ({i},{j})")));
                }
            }
        }
        Ok(AffinityGraph { raw: w.clone(), clustering: w })
    }

    pub fn n(&self) -> usize {
        self.raw.nrows()
    }

    pub fn raw(&self) -> &DMatrix<T> {
        &self.raw
    }

    pub fn clustering(&self) -> &DMatrix<T> {
        &self.clustering
    }

    /// Number of connected components of the clustering graph.
    pub fn components(&self) -> usize {
        let n = self.n();
        let mut seen = vec![false; n];
        let mut count = 0;
        let mut stack = Vec::new();
        for start in 0..n {
            if seen[start] {
                continue;
            }
            count += 1;
            seen[start] = true;
            stack.push(start);
            while let Some(i) = stack.pop() {
                for j in 0..n {
                    if !seen[j] && j != i && self.clustering[(i, j)] > T::zero() {
                        seen[j] = true;
                        stack.push(j);
                    }
                }
            }
        }
        count
    }
}

/// Cosine similarity between the columns of `z`. All-zero columns give an
/// all-zero row and column.
pub fn affinity<T: Real>(z: &DMatrix<T>) -> Result<AffinityGraph<T>> {
    if z.iter().any(|v| !v.is_finite_value()) {
        return Err(Error::Validation("coding matrix contains non-finite values".into()));
    }
    let n = z.ncols();
    let mut unit = z.clone();
    let mut nonzero = vec![false; n];
    for (j, mut col) in unit.column_iter_mut().enumerate() {
        let norm = col.norm();
        if norm > T::zero() {
            col /= norm;
            nonzero[j] = true;
        }
    }
    let mut raw = unit.transpose() * &unit;
    for i in 0..n {
        raw[(i, i)] = if nonzero[i] { T::one() } else { T::zero() };
        for j in 0..i {
            let v = raw[(i, j)].min(T::one()).max(-T::one());
            raw[(i, j)] = v;
            raw[(j, i)] = v;
        }
    }
    let clustering = raw.map(|v| v.max(T::zero()));
    Ok(AffinityGraph { raw, clustering })
}

/// Per-time-step cluster labels in `0..k`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DiscreteTrajectory {
    labels: Vec<usize>,
    k: usize,
}

impl DiscreteTrajectory {
    pub fn new(labels: Vec<usize>, k: usize) -> Result<Self> {
        if let Some((t, &l)) = labels.iter().enumerate().find(|(_, &l)| l >= k) {
            return Err(Error::Validation(format!("label {l} at step {t} is not below k={k}")));
        }
        Ok(DiscreteTrajectory { labels, k })
    }

    /// Uses `max + 1` as the number of states.
    pub fn from_labels(labels: Vec<usize>) -> Self {
        let k = labels.iter().max().map_or(0, |m| m + 1);
        DiscreteTrajectory { labels, k }
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Maximal constant-label runs as `(label, start, length)`.
    pub fn runs(&self) -> Vec<(usize, usize, usize)> {
        let mut out: Vec<(usize, usize, usize)> = Vec::new();
        for (t, &l) in self.labels.iter().enumerate() {
            match out.last_mut() {
                Some(run) if run.0 == l => run.2 += 1,
                _ => out.push((l, t, 1)),
            }
        }
        out
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::with_capacity(6 + 4 * self.labels.len());
        s.push_str("state\n");
        for l in &self.labels {
            let _ = writeln!(s, "{l}");
        }
        s
    }

    pub fn from_csv(text: &str, path: &Path) -> Result<Self> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        match lines.next() {
            Some((_, h)) if h.trim() == "state" => {}
            Some((i, _)) => {
                return Err(Error::Parse {
                    path: path.into(),
                    line: i + 1,
                    message: "expected header `state`".into(),
                })
            }
            None => {
                return Err(Error::Parse { path: path.into(), line: 1, message: "empty file".into() })
            }
        }
        let labels = lines
            .map(|(i, l)| {
                l.trim().parse::<usize>().map_err(|e| Error::Parse {
                    path: path.into(),
                    line: i + 1,
                    message: format!("bad state `{}`: {e}", l.trim()),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self::from_labels(labels))
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
        Self::from_csv(&text, path)
    }

    /// Horizontal strip, one colored rect per run; x is in frames.
    pub fn to_svg(&self) -> String {
        let n = self.labels.len().max(1);
        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="800" height="40" viewBox="0 0 {n} 1" preserveAspectRatio="none">"#
        );
        for (label, start, len) in self.runs() {
            let _ = writeln!(
                s,
                r#"<rect x="{start}" y="0" width="{len}" height="1" fill="{}"><title>state {label}</title></rect>"#,
                state_color(label)
            );
        }
        s.push_str("</svg>\n");
        s
    }
}

const PALETTE: [&str; 10] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22",
    "#17becf",
];

fn state_color(label: usize) -> String {
    if label < PALETTE.len() {
        return PALETTE[label].to_string();
    }
    // Golden-ratio hue walk for larger label sets.
    let hue = (label as f64 * 0.618_033_988_749_895).fract();
    let (r, g, b) = hsv_to_rgb(hue, 0.65, 0.9);
    format!("#{r:02x}{g:02x}{b:02x}")
}

fn hsv_to_rgb(h: f64, s: f64, v: f64) -> (u8, u8, u8) {
    let i = (h * 6.0).floor();
    let f = h * 6.0 - i;
    let (p, q, t) = (v * (1.0 - s), v * (1.0 - f * s), v * (1.0 - (1.0 - f) * s));
    let (r, g, b) = match i as i32 % 6 {
        0 => (v, t, p),
        1 => (q, v, p),
        2 => (p, v, t),
        3 => (p, q, v),
        4 => (t, p, v),
        _ => (v, p, q),
    };
    let c = |x: f64| (x * 255.0).round() as u8;
    (c(r), c(g), c(b))
}

#[derive(Debug, Clone)]
pub struct SpectralResult {
    pub dtraj: DiscreteTrajectory,
    /// Connected components of the input graph.
    pub components: usize,
}

impl SpectralResult {
    pub fn warning(&self) -> Option<String> {
        (self.components > self.dtraj.k()).then(|| {
            format!(
                "affinity graph has {} connected components, more than k={}",
                self.components,
                self.dtraj.k()
            )
        })
    }
}

/// Normalized spectral clustering: top-`k` eigenvectors of
/// `D^{-1/2} G D^{-1/2}`, rows scaled to unit length, then k-means.
pub fn spectral_clustering<T: Real>(g: &AffinityGraph<T>, k: usize, seed: u64) -> Result<SpectralResult> {
    let n = g.n();
    if k == 0 || k > n {
        return Err(Error::InvalidArgument(format!(
            "spectral clustering needs 1 <= k <= n, got k={k}, n={n}"
        )));
    }
    let w = g.clustering();
    let inv_sqrt: Vec<T> = w
        .row_iter()
        .map(|r| {
            let deg = r.sum();
            if deg > T::zero() { T::one() / deg.sqrt() } else { T::zero() }
        })
        .collect();
    let a = DMatrix::from_fn(n, n, |i, j| inv_sqrt[i] * w[(i, j)] * inv_sqrt[j]);
    let (_, vecs) = top_eigenpairs(&a, k, seed);
    let mut embed = vecs.transpose();
    for mut col in embed.column_iter_mut() {
        let norm = col.norm();
        if norm > T::zero() {
            col /= norm;
        }
    }
    let dtraj = kmeans::kmeans(&embed, k, seed)?;
    Ok(SpectralResult { dtraj, components: g.components() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bench::ari;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn graph_of(cols: &[[f64; 2]]) -> AffinityGraph<f64> {
        let z = DMatrix::from_fn(2, cols.len(), |r, c| cols[c][r]);
        affinity(&z).unwrap()
    }

    #[test]
    fn cosine_examples() {
        let g = graph_of(&[[1.0, 2.0], [1.0, 2.0]]);
        assert!((g.raw()[(0, 1)] - 1.0).abs() < 1e-15);
        let g = graph_of(&[[1.0, 0.0], [0.0, 1.0]]);
        assert_eq!(g.raw()[(0, 1)], 0.0);
        let g = graph_of(&[[1.0, 1.0], [1.0, 0.0]]);
        assert!((g.raw()[(0, 1)] - 0.5f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn zero_column_has_zero_row() {
        let g = graph_of(&[[1.0, 1.0], [0.0, 0.0], [2.0, 0.5]]);
        assert!(g.raw().row(1).iter().all(|&v| v == 0.0));
        assert!(g.raw().column(1).iter().all(|&v| v == 0.0));
        assert_eq!(g.raw()[(0, 0)], 1.0);
        assert_eq!(g.raw()[(2, 2)], 1.0);
    }

    #[test]
    fn negatives_clipped_only_in_clustering_graph() {
        let g = graph_of(&[[1.0, 0.0], [-1.0, 0.0]]);
        assert_eq!(g.raw()[(0, 1)], -1.0);
        assert_eq!(g.clustering()[(0, 1)], 0.0);
    }

    fn blocks(sizes: &[usize]) -> (AffinityGraph<f64>, Vec<usize>) {
        let truth: Vec<usize> = sizes.iter().enumerate().flat_map(|(b, &s)| std::iter::repeat(b).take(s)).collect();
        let n = truth.len();
        let w = DMatrix::from_fn(n, n, |i, j| if truth[i] == truth[j] { 1.0 } else { 0.0 });
        (AffinityGraph::from_weights(w).unwrap(), truth)
    }

    #[test]
    fn two_blocks_are_separated() {
        let (g, truth) = blocks(&[7, 5]);
        let out = spectral_clustering(&g, 2, 3).unwrap();
        let planted = DiscreteTrajectory::new(truth, 2).unwrap();
        assert_eq!(ari(&out.dtraj, &planted).unwrap(), 1.0);
        assert_eq!(out.components, 2);
        assert!(out.warning().is_none());
    }

    #[test]
    fn k_one_gives_single_label() {
        let (g, _) = blocks(&[4, 4]);
        let out = spectral_clustering(&g, 1, 0).unwrap();
        assert!(out.dtraj.labels().iter().all(|&l| l == 0));
        assert!(out.warning().is_some());
    }

    #[test]
    fn k_equals_n_gives_singletons() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let z = DMatrix::from_fn(4, 9, |_, _| rng.gen::<f64>() + 0.01);
        let g = affinity(&z).unwrap();
        let out = spectral_clustering(&g, 9, 1).unwrap();
        let mut labels = out.dtraj.labels().to_vec();
        labels.sort_unstable();
        labels.dedup();
        assert_eq!(labels.len(), 9);
    }

    #[test]
    fn k_above_n_rejected() {
        let (g, _) = blocks(&[2]);
        assert!(spectral_clustering(&g, 3, 0).is_err());
    }

    #[test]
    fn csv_and_svg() {
        let d = DiscreteTrajectory::new(vec![0, 0, 1, 1, 0], 2).unwrap();
        let csv = d.to_csv();
        assert_eq!(csv, "state\n0\n0\n1\n1\n0\n");
        let back = DiscreteTrajectory::from_csv(&csv, Path::new("d.csv")).unwrap();
        assert_eq!(back, d);
        assert_eq!(d.to_svg().matches("<rect").count(), 3);
        assert!(DiscreteTrajectory::from_csv("label\n1\n", Path::new("x")).is_err());
        assert!(DiscreteTrajectory::new(vec![0, 2], 2).is_err());
    }

    #[test]
    fn noisy_blocks_invariant_under_permutation() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let truth: Vec<usize> = (0..30).map(|i| i / 10).collect();
        let w = {
            let mut w = DMatrix::from_fn(30, 30, |i, j| {
                if truth[i] == truth[j] { 0.8 } else { 0.05 }
            });
            for i in 0..30 {
                for j in 0..i {
                    let e = 0.1 * rng.gen::<f64>();
                    w[(i, j)] += e;
                    w[(j, i)] = w[(i, j)];
                }
            }
            w
        };
        let perm: Vec<usize> = {
            let mut p: Vec<usize> = (0..30).collect();
            for i in (1..30).rev() {
                p.swap(i, rng.gen_range(0..=i));
            }
            p
        };
        let wp = DMatrix::from_fn(30, 30, |i, j| w[(perm[i], perm[j])]);
        let a = spectral_clustering(&AffinityGraph::from_weights(w).unwrap(), 3, 2).unwrap().dtraj;
        let b = spectral_clustering(&AffinityGraph::from_weights(wp).unwrap(), 3, 2).unwrap().dtraj;
        let truth_p = DiscreteTrajectory::new(perm.iter().map(|&i| truth[i]).collect(), 3).unwrap();
        let truth = DiscreteTrajectory::new(truth, 3).unwrap();
        assert_eq!(ari(&a, &truth).unwrap(), 1.0);
        assert_eq!(ari(&b, &truth_p).unwrap(), 1.0);
    }

    proptest! {
        #[test]
        fn affinity_is_scale_invariant(seed in 0u64..1000, c in 1e-3f64..1e3) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let z = DMatrix::from_fn(5, 12, |_, _| rng.gen::<f64>());
            let a = affinity(&z).unwrap();
            let b = affinity(&(&z * c)).unwrap();
            prop_assert!((a.raw() - b.raw()).amax() < 1e-12);
            prop_assert!((a.raw() - a.raw().transpose()).amax() == 0.0);
        }
    }
}
