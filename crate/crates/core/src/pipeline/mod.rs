//! Config-driven orchestration: featurize, cluster, score, sweep.
//!
//! Every command reads a [`PipelineConfig`] and writes into its
//! `output_dir`. File names:
//!
//! | file | written by |
//! |------|------------|
//! | `features.csv`, `features.bin` | featurize, synth |
//! | `planted.csv` | featurize, synth (synthetic input only) |
//! | `dtraj_{method}_k{k}.csv`, `.svg` | cluster |
//! | `diagnostics_moscito.json` | cluster |
//! | `scores.csv`, `ranking.txt` | score |
//! | `sweep_{axis}.csv` | sweep |
//! | `runtime.json` | runtime |

mod config;

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use crate::baselines::{kmeans, pca, ssc_model, tica};
use crate::bench::{ari, segment_count, synth_trajectory};
use crate::dictlearn::{self, IterationRecord};
use crate::error::{Error, Result};
use crate::features::{assemble_features, FeatureMatrix};
use crate::graphclust::{affinity, spectral_clustering, AffinityGraph, DiscreteTrajectory};
use crate::msm::{rank, ranking_report, score_table_csv, vamp_r, ScoreRow};
use crate::tempreg::TemporalLaplacian;
use crate::trajio::{load_topology, load_trajectory};

pub use config::{BaselinesConfig, ClusteringConfig, FeaturesConfig, InputConfig, Method, MsmConfig, PipelineConfig};

/// What a command did.
#[derive(Debug, Clone, Default)]
pub struct Report {
    pub written: Vec<PathBuf>,
    pub warnings: Vec<String>,
    /// Inputs that were expected but absent.
    pub missing: Vec<PathBuf>,
}

/// Writes through a sibling temp file and a rename, so readers never see a
/// partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(format!("creating {}", dir.display()), e))?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, bytes).map_err(|e| Error::io(format!("writing {}", tmp.display()), e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(format!("renaming to {}", path.display()), e))
}

fn emit(report: &mut Report, path: PathBuf, bytes: &[u8]) -> Result<()> {
    write_atomic(&path, bytes)?;
    report.written.push(path);
    Ok(())
}

pub fn dtraj_path(dir: &Path, method: Method, k: usize) -> PathBuf {
    dir.join(format!("dtraj_{method}_k{k}.csv"))
}

/// Feature matrix for the configured input, plus planted labels for
/// synthetic data.
pub fn load_features(cfg: &PipelineConfig) -> Result<(FeatureMatrix, Option<DiscreteTrajectory>)> {
    cfg.validate_input()?;
    cfg.validate()?;
    if let Some(spec) = &cfg.input.synth {
        let (x, planted) = synth_trajectory(spec)?;
        return Ok((x.with_scaling(cfg.features.scaling), Some(planted)));
    }
    let topo_path = cfg.input.topology.as_ref().expect("validated");
    let traj_path = cfg.input.trajectory.as_ref().expect("validated");
    let topo = load_topology(topo_path)?;
    let traj = load_trajectory(traj_path, &topo)?;
    let selection: BTreeSet<_> = cfg.features.selection.iter().copied().collect();
    let x = assemble_features(&traj, &selection, cfg.features.scaling, &cfg.features.options())?;
    Ok((x, None))
}

fn write_features(report: &mut Report, dir: &Path, x: &FeatureMatrix, planted: Option<&DiscreteTrajectory>) -> Result<()> {
    emit(report, dir.join("features.csv"), x.to_csv().as_bytes())?;
    emit(report, dir.join("features.bin"), &x.to_binary())?;
    if let Some(p) = planted {
        emit(report, dir.join("planted.csv"), p.to_csv().as_bytes())?;
    }
    Ok(())
}

pub fn cmd_featurize(cfg: &PipelineConfig) -> Result<Report> {
    let (x, planted) = load_features(cfg)?;
    let mut report = Report::default();
    write_features(&mut report, &cfg.output_dir, &x, planted.as_ref())?;
    Ok(report)
}

/// Writes the synthetic features and planted labels.
pub fn cmd_synth(cfg: &PipelineConfig) -> Result<Report> {
    if cfg.input.synth.is_none() {
        return Err(Error::Config("missing `[input.synth]` table".into()));
    }
    cmd_featurize(cfg)
}

#[derive(Debug, Clone, Serialize)]
struct SolverDiagnostics<'a> {
    n_features: usize,
    n_steps: usize,
    sampled_columns: &'a [usize],
    converged: bool,
    iterations: &'a [IterationRecord],
}

/// Output of one MOSCITO fit: the coding graph plus diagnostics.
pub struct MoscitoFit {
    pub graph: AffinityGraph<f64>,
    pub fit: dictlearn::FitResult<f64>,
}

pub fn fit_moscito(cfg: &PipelineConfig, x: &FeatureMatrix) -> Result<MoscitoFit> {
    let laplacian = TemporalLaplacian::from_config(x.n_steps(), &cfg.tempreg)?;
    let fit = dictlearn::fit(&x.values, &laplacian, &cfg.solver_config())?;
    let graph = affinity(fit.coding())?;
    Ok(MoscitoFit { graph, fit })
}

/// One discrete trajectory per requested `k` for `method`.
pub fn cluster_method(
    cfg: &PipelineConfig,
    method: Method,
    x: &FeatureMatrix,
    ks: &[usize],
    warnings: &mut Vec<String>,
) -> Result<Vec<DiscreteTrajectory>> {
    let seed = cfg.seed;
    let b = &cfg.baselines;
    let spectral_all = |graph: &AffinityGraph<f64>, warnings: &mut Vec<String>| {
        ks.iter()
            .map(|&k| {
                let out = spectral_clustering(graph, k, seed)?;
                if let Some(w) = out.warning() {
                    warnings.push(format!("{method} k={k}: {w}"));
                }
                Ok(out.dtraj)
            })
            .collect::<Result<Vec<_>>>()
    };
    match method {
        Method::Moscito => spectral_all(&fit_moscito(cfg, x)?.graph, warnings),
        Method::PcaKmeans => {
            let model = pca(&x.values)?;
            let dims = b.pca_dims.unwrap_or_else(|| model.dims_for_variance(b.variance_fraction));
            let y = model.project(&x.values, dims)?;
            ks.iter().map(|&k| kmeans(&y, k, seed)).collect()
        }
        Method::TicaKmeans => {
            let model = tica(&x.values, b.tica_lag)?;
            let dims = b.tica_dims.unwrap_or_else(|| model.dims_for_kinetic_variance(b.variance_fraction));
            let y = model.project(&x.values, dims)?;
            ks.iter().map(|&k| kmeans(&y, k, seed)).collect()
        }
        Method::Ssc => {
            let model = ssc_model(&x.values, b.ssc_lambda)?;
            let abs = model.c.abs();
            let graph = AffinityGraph::from_weights(&abs + abs.transpose())?;
            spectral_all(&graph, warnings)
        }
    }
}

pub fn cmd_cluster(cfg: &PipelineConfig) -> Result<Report> {
    let (x, planted) = load_features(cfg)?;
    let dir = &cfg.output_dir;
    let mut report = Report::default();
    if let Some(p) = &planted {
        emit(&mut report, dir.join("planted.csv"), p.to_csv().as_bytes())?;
    }
    for &method in &cfg.methods {
        let dtrajs = if method == Method::Moscito {
            let m = fit_moscito(cfg, &x)?;
            let diag = SolverDiagnostics {
                n_features: x.n_features(),
                n_steps: x.n_steps(),
                sampled_columns: &m.fit.diagnostics.sampled_columns,
                converged: m.fit.diagnostics.converged,
                iterations: &m.fit.diagnostics.iterations,
            };
            let json = serde_json::to_string_pretty(&diag).expect("diagnostics serialize") + "\n";
            emit(&mut report, dir.join("diagnostics_moscito.json"), json.as_bytes())?;
            cfg.clustering
                .k
                .iter()
                .map(|&k| {
                    let out = spectral_clustering(&m.graph, k, cfg.seed)?;
                    if let Some(w) = out.warning() {
                        report.warnings.push(format!("{method} k={k}: {w}"));
                    }
                    Ok(out.dtraj)
                })
                .collect::<Result<Vec<_>>>()?
        } else {
            cluster_method(cfg, method, &x, &cfg.clustering.k, &mut report.warnings)?
        };
        for (&k, d) in cfg.clustering.k.iter().zip(&dtrajs) {
            let path = dtraj_path(dir, method, k);
            emit(&mut report, path.with_extension("svg"), d.to_svg().as_bytes())?;
            emit(&mut report, path, d.to_csv().as_bytes())?;
        }
    }
    Ok(report)
}

/// VAMP-r rows for every (method, k, τ) whose trajectory file exists.
pub fn score_rows(cfg: &PipelineConfig, report: &mut Report) -> Result<Vec<ScoreRow>> {
    let mut cells = Vec::new();
    for &method in &cfg.methods {
        for &k in &cfg.clustering.k {
            let path = dtraj_path(&cfg.output_dir, method, k);
            if path.exists() {
                cells.push((method, k, path));
            } else {
                report.missing.push(path);
            }
        }
    }
    if cells.is_empty() {
        return Err(Error::Validation(format!(
            "no discrete trajectories found in {}; run `cluster` first",
            cfg.output_dir.display()
        )));
    }
    let loaded: Vec<(Method, usize, DiscreteTrajectory)> = cells
        .into_iter()
        .map(|(m, k, p)| Ok((m, k, DiscreteTrajectory::read_csv(&p)?)))
        .collect::<Result<_>>()?;
    let grid: Vec<(usize, usize)> = (0..loaded.len())
        .flat_map(|i| cfg.msm.tau.iter().map(move |&t| (i, t)))
        .collect();
    grid.par_iter()
        .map(|&(i, tau)| {
            let (method, k, d) = &loaded[i];
            Ok(ScoreRow {
                method: method.name().to_string(),
                k: *k,
                tau,
                m: cfg.msm.m,
                r: cfg.msm.r,
                score: vamp_r(d, tau, cfg.msm.m, cfg.msm.r)?,
            })
        })
        .collect()
}

pub fn cmd_score(cfg: &PipelineConfig) -> Result<Report> {
    cfg.validate()?;
    let mut report = Report::default();
    let rows = score_rows(cfg, &mut report)?;
    let dir = &cfg.output_dir;
    emit(&mut report, dir.join("scores.csv"), score_table_csv(&rows).as_bytes())?;
    emit(&mut report, dir.join("ranking.txt"), ranking_report(&rows).as_bytes())?;
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub value: String,
    pub k: usize,
    pub tau: usize,
    pub m: usize,
    pub r: f64,
    pub score: f64,
    pub segments: usize,
    /// Agreement with planted labels, for synthetic input.
    pub ari: Option<f64>,
}

/// Runs MOSCITO once per value of `axis`, scoring the first `k` and `τ`.
pub fn sweep(cfg: &PipelineConfig, axis: &str, values: &[String]) -> Result<Vec<SweepRow>> {
    if values.is_empty() {
        return Err(Error::Config("sweep needs at least one value".into()));
    }
    let variants = values.iter().map(|v| cfg.with_value(axis, v)).collect::<Result<Vec<_>>>()?;
    cfg.validate()?;
    for c in &variants {
        c.validate()?;
    }
    let reloads_input = variants.iter().any(|c| c.input != cfg.input || c.features != cfg.features);
    let shared = if reloads_input { None } else { Some(load_features(cfg)?) };
    variants
        .par_iter()
        .zip(values.par_iter())
        .map(|(c, value)| {
            let owned;
            let (x, planted) = match &shared {
                Some(s) => s,
                None => {
                    owned = load_features(c)?;
                    &owned
                }
            };
            let k = c.clustering.k[0];
            let tau = c.msm.tau[0];
            let d = spectral_clustering(&fit_moscito(c, x)?.graph, k, c.seed)?.dtraj;
            Ok(SweepRow {
                value: value.clone(),
                k,
                tau,
                m: c.msm.m,
                r: c.msm.r,
                score: vamp_r(&d, tau, c.msm.m, c.msm.r)?,
                segments: segment_count(&d),
                ari: planted.as_ref().map(|p| ari(&d, p)).transpose()?,
            })
        })
        .collect()
}

pub fn sweep_csv(axis: &str, rows: &[SweepRow]) -> String {
    let mut s = format!("{axis},k,tau,m,r,score,segments,ari\n");
    for row in rows {
        let ari = row.ari.map(|a| a.to_string()).unwrap_or_default();
        s.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            row.value, row.k, row.tau, row.m, row.r, row.score, row.segments, ari
        ));
    }
    s
}

pub fn cmd_sweep(cfg: &PipelineConfig, axis: &str, values: &[String]) -> Result<Report> {
    let rows = sweep(cfg, axis, values)?;
    let mut report = Report::default();
    let name: String = axis.chars().map(|c| if c.is_ascii_alphanumeric() || c == '_' { c } else { '_' }).collect();
    emit(&mut report, cfg.output_dir.join(format!("sweep_{name}.csv")), sweep_csv(axis, &rows).as_bytes())?;
    Ok(report)
}

#[derive(Debug, Clone, Serialize)]
pub struct StageTime {
    pub stage: &'static str,
    pub seconds: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RuntimeReport {
    pub n_features: usize,
    pub n_steps: usize,
    pub iterations: usize,
    pub stages: Vec<StageTime>,
    /// Solver wall time divided by the iteration count.
    pub seconds_per_iteration: f64,
}

/// Wall time per stage with the solver forced to run exactly `max_iters`
/// iterations.
pub fn runtime(cfg: &PipelineConfig) -> Result<RuntimeReport> {
    let mut stages = Vec::new();
    let mut timed = |stage: &'static str, start: Instant| stages.push(StageTime { stage, seconds: start.elapsed().as_secs_f64() });

    let t = Instant::now();
    let (x, _) = load_features(cfg)?;
    timed("featurize", t);
    let t = Instant::now();
    let laplacian = TemporalLaplacian::from_config(x.n_steps(), &cfg.tempreg)?;
    timed("laplacian", t);
    let solver = dictlearn::SolverConfig { tol: 0.0, ..cfg.solver_config() };
    let t = Instant::now();
    let fit = dictlearn::fit(&x.values, &laplacian, &solver)?;
    let solve_secs = t.elapsed().as_secs_f64();
    timed("solver", t);
    let t = Instant::now();
    let graph = affinity(fit.coding())?;
    timed("affinity", t);
    let t = Instant::now();
    let d = spectral_clustering(&graph, cfg.clustering.k[0], cfg.seed)?.dtraj;
    timed("spectral", t);
    let t = Instant::now();
    vamp_r(&d, cfg.msm.tau[0], cfg.msm.m, cfg.msm.r)?;
    timed("score", t);

    let iterations = fit.diagnostics.iterations.len();
    Ok(RuntimeReport {
        n_features: x.n_features(),
        n_steps: x.n_steps(),
        iterations,
        stages,
        seconds_per_iteration: if iterations > 0 { solve_secs / iterations as f64 } else { 0.0 },
    })
}

pub fn cmd_runtime(cfg: &PipelineConfig) -> Result<(Report, RuntimeReport)> {
    let rt = runtime(cfg)?;
    let mut report = Report::default();
    let json = serde_json::to_string_pretty(&rt).expect("runtime serializes") + "\n";
    emit(&mut report, cfg.output_dir.join("runtime.json"), json.as_bytes())?;
    Ok((report, rt))
}

/// Scores grouped into per-τ rankings; never compares across lag times.
pub fn rank_by_tau(rows: &[ScoreRow]) -> Result<Vec<(usize, Vec<ScoreRow>)>> {
    let taus: BTreeSet<usize> = rows.iter().map(|r| r.tau).collect();
    taus.into_iter()
        .map(|tau| {
            let group: Vec<ScoreRow> = rows.iter().filter(|r| r.tau == tau).cloned().collect();
            Ok((tau, rank(&group)?.into_iter().cloned().collect()))
        })
        .collect()
}
