//! Markov state models on discrete trajectories and VAMP-r scoring.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graphclust::DiscreteTrajectory;
use crate::linalg::{sym_pinv_sqrt, DEFAULT_RANK_EPS};
use crate::Real;

pub const DEFAULT_M: usize = 5;
pub const DEFAULT_R: f64 = 2.0;

#[derive(Debug, Clone, PartialEq)]
pub struct TransitionModel<T: Real> {
    pub tau: usize,
    pub counts: DMatrix<u64>,
    /// Row-stochastic; states never left from get a self-loop.
    pub p: DMatrix<T>,
}

fn check_lag(dtraj: &DiscreteTrajectory, tau: usize) -> Result<()> {
    if tau == 0 || tau >= dtraj.len() {
        return Err(Error::InvalidArgument(format!(
            "lag must satisfy 1 <= tau < n, got tau={tau}, n={}",
            dtraj.len()
        )));
    }
    Ok(())
}

fn lagged_counts(dtraj: &DiscreteTrajectory, tau: usize) -> DMatrix<u64> {
    let k = dtraj.k();
    let l = dtraj.labels();
    let mut counts = DMatrix::<u64>::zeros(k, k);
    for t in 0..l.len() - tau {
        counts[(l[t], l[t + tau])] += 1;
    }
    counts
}

pub fn transition_matrix<T: Real>(dtraj: &DiscreteTrajectory, tau: usize) -> Result<TransitionModel<T>> {
    check_lag(dtraj, tau)?;
    let counts = lagged_counts(dtraj, tau);
    let k = dtraj.k();
    let mut p = DMatrix::<T>::zeros(k, k);
    for i in 0..k {
        let total: u64 = counts.row(i).iter().sum();
        if total == 0 {
            p[(i, i)] = T::one();
            continue;
        }
        for j in 0..k {
            p[(i, j)] = T::from_count(counts[(i, j)] as usize) / T::from_count(total as usize);
        }
    }
    Ok(TransitionModel { tau, counts, p })
}

/// Koopman estimate on one-hot state indicators (no mean removal).
#[derive(Debug, Clone, PartialEq)]
pub struct VampComputation<T: Real> {
    pub c00: DMatrix<T>,
    pub c01: DMatrix<T>,
    pub c11: DMatrix<T>,
    pub koopman: DMatrix<T>,
    /// Top `m` singular values of `koopman`, descending; zero past its size.
    pub sigma: DVector<T>,
    pub m: usize,
}

impl<T: Real> VampComputation<T> {
    pub fn score(&self, r: f64) -> T {
        self.sigma.iter().fold(T::zero(), |acc, &s| acc + s.powf(T::lit(r)))
    }
}

pub fn koopman_matrix<T: Real>(dtraj: &DiscreteTrajectory, tau: usize, m: usize) -> Result<VampComputation<T>> {
    koopman_matrix_with_eps(dtraj, tau, m, DEFAULT_RANK_EPS)
}

pub fn koopman_matrix_with_eps<T: Real>(
    dtraj: &DiscreteTrajectory,
    tau: usize,
    m: usize,
    eps: f64,
) -> Result<VampComputation<T>> {
    check_lag(dtraj, tau)?;
    if m == 0 {
        return Err(Error::InvalidArgument("m must be at least 1".into()));
    }
    let k = dtraj.k();
    let n_pairs = T::from_count(dtraj.len() - tau);
    let counts = lagged_counts(dtraj, tau);
    let c01 = counts.map(|c| T::from_count(c as usize) / n_pairs);
    let c00 = DMatrix::from_diagonal(&DVector::from_iterator(k, c01.row_iter().map(|r| r.sum())));
    let c11 = DMatrix::from_diagonal(&DVector::from_iterator(k, c01.column_iter().map(|c| c.sum())));
    let koopman = sym_pinv_sqrt(&c00, T::lit(eps)) * &c01 * sym_pinv_sqrt(&c11, T::lit(eps));
    let mut sv: Vec<T> = koopman.clone().svd(false, false).singular_values.iter().copied().collect();
    sv.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
    let sigma = DVector::from_fn(m, |i, _| sv.get(i).copied().unwrap_or_else(T::zero));
    Ok(VampComputation { c00, c01, c11, koopman, sigma, m })
}

/// Sum of the `r`-th powers of the top `m` Koopman singular values.
pub fn vamp_r(dtraj: &DiscreteTrajectory, tau: usize, m: usize, r: f64) -> Result<f64> {
    if !(r >= 1.0) {
        return Err(Error::InvalidArgument(format!("VAMP order r must be >= 1, got {r}")));
    }
    Ok(koopman_matrix::<f64>(dtraj, tau, m)?.score(r))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRow {
    pub method: String,
    pub k: usize,
    pub tau: usize,
    pub m: usize,
    pub r: f64,
    pub score: f64,
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub fn score_table_csv(rows: &[ScoreRow]) -> String {
    let mut s = String::from("method,k,tau,m,r,score\n");
    for row in rows {
        let _ = writeln!(s, "{},{},{},{},{},{}", csv_field(&row.method), row.k, row.tau, row.m, row.r, row.score);
    }
    s
}

/// Rows sorted by descending score. All rows must share one lag time:
/// VAMP scores at different τ are not comparable.
pub fn rank(rows: &[ScoreRow]) -> Result<Vec<&ScoreRow>> {
    if let Some(first) = rows.first() {
        if let Some(other) = rows.iter().find(|r| r.tau != first.tau) {
            return Err(Error::InvalidArgument(format!(
                "refusing to rank scores across lag times (tau={} and tau={})",
                first.tau, other.tau
            )));
        }
    }
    let mut out: Vec<&ScoreRow> = rows.iter().collect();
    out.sort_by(|a, b| b.score.total_cmp(&a.score).then_with(|| a.method.cmp(&b.method)).then(a.k.cmp(&b.k)));
    Ok(out)
}

/// Plain-text ranking with one section per (τ, k) cell.
pub fn ranking_report(rows: &[ScoreRow]) -> String {
    let mut groups: BTreeMap<(usize, usize), Vec<ScoreRow>> = BTreeMap::new();
    for r in rows {
        groups.entry((r.tau, r.k)).or_default().push(r.clone());
    }
    let mut s = String::new();
    for ((tau, k), group) in &groups {
        let _ = writeln!(s, "[tau={tau} k={k}]");
        for (i, row) in rank(group).expect("single tau per group").iter().enumerate() {
            let _ = writeln!(s, "{}. {} {}", i + 1, row.method, row.score);
        }
        s.push('\n');
    }
    s
}
