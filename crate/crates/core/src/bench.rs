//! Synthetic metastable trajectories and partition-agreement metrics.

use std::collections::HashMap;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::FeatureMatrix;
use crate::graphclust::DiscreteTrajectory;

/// Hidden Markov chain with Gaussian emissions around well-separated centers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSpec {
    pub n_states: usize,
    /// Probability of staying in the current state at each step.
    pub stay_prob: f64,
    pub n_frames: usize,
    pub d_feat: usize,
    /// Distance between any two state centers, in units of the noise σ.
    pub state_separation: f64,
    /// Centered moving-average width applied to the emitted series; 0 or 1 disables it.
    pub smoothing_window: usize,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            n_states: 3,
            stay_prob: 0.995,
            n_frames: 2000,
            d_feat: 10,
            state_separation: 4.0,
            smoothing_window: 5,
            seed: 0,
        }
    }
}

const NOISE_SIGMA: f64 = 1.0;

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_states < 2 {
            return Err(Error::InvalidArgument(format!("n_states must be >= 2, got {}", self.n_states)));
        }
        if !(self.stay_prob > 0.0 && self.stay_prob <= 1.0) {
            return Err(Error::InvalidArgument(format!("stay_prob must be in (0, 1], got {}", self.stay_prob)));
        }
        if self.n_frames == 0 {
            return Err(Error::InvalidArgument("n_frames must be positive".into()));
        }
        if self.d_feat < self.n_states {
            return Err(Error::InvalidArgument(format!(
                "d_feat ({}) must be at least n_states ({})",
                self.d_feat, self.n_states
            )));
        }
        if !(self.state_separation >= 0.0 && self.state_separation.is_finite()) {
            return Err(Error::InvalidArgument("state_separation must be finite and nonnegative".into()));
        }
        Ok(())
    }

    /// Center of state `i`: a scaled basis vector, so every pair sits
    /// `state_separation · σ` apart.
    pub fn center(&self, i: usize) -> Vec<f64> {
        let mut c = vec![0.0; self.d_feat];
        c[i] = self.state_separation * NOISE_SIGMA / 2f64.sqrt();
        c
    }
}

/// Draws the planted labels and the `d_feat × n_frames` emission matrix,
/// shifted so its minimum is zero.
pub fn synth_trajectory(spec: &SynthSpec) -> Result<(FeatureMatrix, DiscreteTrajectory)> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let k = spec.n_states;
    let mut labels = Vec::with_capacity(spec.n_frames);
    let mut state = rng.gen_range(0..k);
    for t in 0..spec.n_frames {
        if t > 0 && rng.gen::<f64>() >= spec.stay_prob {
            let jump = rng.gen_range(1..k);
            state = (state + jump) % k;
        }
        labels.push(state);
    }
    let centers: Vec<Vec<f64>> = (0..k).map(|i| spec.center(i)).collect();
    let mut emitted = DMatrix::from_fn(spec.d_feat, spec.n_frames, |r, t| centers[labels[t]][r]);
    for v in emitted.iter_mut() {
        let e: f64 = StandardNormal.sample(&mut rng);
        *v += NOISE_SIGMA * e;
    }
    let mut values = moving_average(&emitted, spec.smoothing_window);
    let min = values.min();
    values.apply(|v| *v -= min);
    Ok((FeatureMatrix::from_values("synth", values)?, DiscreteTrajectory::new(labels, k)?))
}

fn moving_average(x: &DMatrix<f64>, window: usize) -> DMatrix<f64> {
    if window <= 1 {
        return x.clone();
    }
    let n = x.ncols();
    let before = (window - 1) / 2;
    let after = window - 1 - before;
    DMatrix::from_fn(x.nrows(), n, |r, t| {
        let lo = t.saturating_sub(before);
        let hi = (t + after).min(n - 1);
        (lo..=hi).map(|s| x[(r, s)]).sum::<f64>() / (hi - lo + 1) as f64
    })
}

fn choose2(x: u64) -> f64 {
    (x as f64) * (x.saturating_sub(1) as f64) / 2.0
}

/// Adjusted Rand index between two labelings of the same time steps.
pub fn ari(a: &DiscreteTrajectory, b: &DiscreteTrajectory) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Dimension(format!("labelings have lengths {} and {}", a.len(), b.len())));
    }
    let mut table: HashMap<(usize, usize), u64> = HashMap::new();
    let mut rows: HashMap<usize, u64> = HashMap::new();
    let mut cols: HashMap<usize, u64> = HashMap::new();
    for (&x, &y) in a.labels().iter().zip(b.labels()) {
        *table.entry((x, y)).or_default() += 1;
        *rows.entry(x).or_default() += 1;
        *cols.entry(y).or_default() += 1;
    }
    let index: f64 = table.values().map(|&c| choose2(c)).sum();
    let sum_a: f64 = rows.values().map(|&c| choose2(c)).sum();
    let sum_b: f64 = cols.values().map(|&c| choose2(c)).sum();
    let total = choose2(a.len() as u64);
    let expected = if total > 0.0 { sum_a * sum_b / total } else { 0.0 };
    let max_index = 0.5 * (sum_a + sum_b);
    let denom = max_index - expected;
    if denom == 0.0 {
        // Both partitions trivial in the same way (all-in-one or all singletons).
        return Ok(1.0);
    }
    Ok((index - expected) / denom)
}

/// Number of maximal constant-label runs.
pub fn segment_count(d: &DiscreteTrajectory) -> usize {
    d.runs().len()
}
