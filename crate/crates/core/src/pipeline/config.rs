use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::baselines::{SscLambda, DEFAULT_TICA_LAG, DEFAULT_VARIANCE_FRACTION};
use crate::bench::SynthSpec;
use crate::dictlearn::SolverConfig;
use crate::error::{Error, Result};
use crate::features::{AngleEncoding, FeatureOptions, Featurizer, Scaling};
use crate::msm::{DEFAULT_M, DEFAULT_R};
use crate::tempreg::TemporalWeightConfig;

/// Where the data matrix comes from: a trajectory with its topology, or a
/// synthetic generator.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InputConfig {
    pub trajectory: Option<PathBuf>,
    pub topology: Option<PathBuf>,
    pub synth: Option<SynthSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeaturesConfig {
    pub selection: Vec<Featurizer>,
    pub scaling: Scaling,
    pub angles: AngleEncoding,
    pub probe_radius: f64,
    pub sphere_points: usize,
}

impl Default for FeaturesConfig {
    fn default() -> Self {
        let opts = FeatureOptions::default();
        FeaturesConfig {
            selection: vec![Featurizer::Backbone],
            scaling: Scaling::Minmax01,
            angles: opts.angles,
            probe_radius: opts.probe_radius,
            sphere_points: opts.sphere_points,
        }
    }
}

impl FeaturesConfig {
    pub fn options(&self) -> FeatureOptions {
        FeatureOptions {
            angles: self.angles,
            probe_radius: self.probe_radius,
            sphere_points: self.sphere_points,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClusteringConfig {
    pub k: Vec<usize>,
}

impl Default for ClusteringConfig {
    fn default() -> Self {
        ClusteringConfig { k: vec![10] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MsmConfig {
    pub tau: Vec<usize>,
    pub m: usize,
    pub r: f64,
}

impl Default for MsmConfig {
    fn default() -> Self {
        MsmConfig { tau: vec![1], m: DEFAULT_M, r: DEFAULT_R }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BaselinesConfig {
    /// Fixed PCA dimension; unset picks enough components for `variance_fraction`.
    pub pca_dims: Option<usize>,
    pub variance_fraction: f64,
    pub tica_lag: usize,
    /// Fixed TICA dimension; unset uses `variance_fraction` of kinetic variance.
    pub tica_dims: Option<usize>,
    pub ssc_lambda: SscLambda,
}

impl Default for BaselinesConfig {
    fn default() -> Self {
        BaselinesConfig {
            pca_dims: None,
            variance_fraction: DEFAULT_VARIANCE_FRACTION,
            tica_lag: DEFAULT_TICA_LAG,
            tica_dims: None,
            ssc_lambda: SscLambda::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Moscito,
    PcaKmeans,
    TicaKmeans,
    Ssc,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Moscito, Method::PcaKmeans, Method::TicaKmeans, Method::Ssc];

    pub fn name(self) -> &'static str {
        match self {
            Method::Moscito => "moscito",
            Method::PcaKmeans => "pca_kmeans",
            Method::TicaKmeans => "tica_kmeans",
            Method::Ssc => "ssc",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown method `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// Drives the solver initialization, k-means and spectral clustering.
    /// Overrides `solver.seed`. Synthetic data keeps `input.synth.seed`.
    pub seed: u64,
    pub output_dir: PathBuf,
    pub methods: Vec<Method>,
    pub input: InputConfig,
    pub features: FeaturesConfig,
    pub tempreg: TemporalWeightConfig,
    pub solver: SolverConfig,
    pub clustering: ClusteringConfig,
    pub msm: MsmConfig,
    pub baselines: BaselinesConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            seed: 0,
            output_dir: PathBuf::from("out"),
            methods: vec![Method::Moscito],
            input: InputConfig::default(),
            features: FeaturesConfig::default(),
            tempreg: TemporalWeightConfig::default(),
            solver: SolverConfig::default(),
            clustering: ClusteringConfig::default(),
            msm: MsmConfig::default(),
            baselines: BaselinesConfig::default(),
        }
    }
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.message().trim().to_string()))
    }

    /// Reads a config file; relative paths inside it are taken relative to
    /// the file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(format!("reading config {}", path.display()), e))?;
        let mut cfg = Self::from_toml(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })?;
        let base = path.parent().unwrap_or(Path::new(""));
        let rebase = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let Some(p) = cfg.input.trajectory.as_mut() {
            rebase(p);
        }
        if let Some(p) = cfg.input.topology.as_mut() {
            rebase(p);
        }
        rebase(&mut cfg.output_dir);
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Solver settings with the pipeline seed applied.
    pub fn solver_config(&self) -> SolverConfig {
        SolverConfig { seed: self.seed, ..self.solver.clone() }
    }

    /// Exactly one input source, with paths where required.
    pub fn validate_input(&self) -> Result<()> {
        match (&self.input.trajectory, &self.input.topology, &self.input.synth) {
            (Some(_), Some(_), None) | (None, None, Some(_)) => {}
            (Some(_), None, _) => {
                return Err(Error::Config("missing `input.topology` (required with `input.trajectory`)".into()))
            }
            (None, Some(_), _) => {
                return Err(Error::Config("missing `input.trajectory` (required with `input.topology`)".into()))
            }
            (Some(_), Some(_), Some(_)) => {
                return Err(Error::Config("`input.synth` cannot be combined with `input.trajectory`".into()))
            }
            (None, None, None) => {
                return Err(Error::Config(
                    "missing input: set `input.trajectory` and `input.topology`, or an `[input.synth]` table".into(),
                ))
            }
        }
        if let Some(spec) = &self.input.synth {
            spec.validate().map_err(|e| Error::Config(format!("input.synth: {e}")))?;
        }
        Ok(())
    }

    /// Everything except the input section.
    pub fn validate(&self) -> Result<()> {
        let cfg_err = |section: &str, e: Error| Error::Config(format!("{section}: {e}"));
        if self.features.selection.is_empty() {
            return Err(Error::Config("`features.selection` is empty".into()));
        }
        self.tempreg.validate().map_err(|e| cfg_err("tempreg", e))?;
        self.solver.validate().map_err(|e| cfg_err("solver", e))?;
        if self.clustering.k.is_empty() || self.clustering.k.contains(&0) {
            return Err(Error::Config("`clustering.k` must list positive cluster counts".into()));
        }
        if self.msm.tau.is_empty() || self.msm.tau.contains(&0) {
            return Err(Error::Config("`msm.tau` must list positive lag times".into()));
        }
        if self.msm.m == 0 {
            return Err(Error::Config("`msm.m` must be at least 1".into()));
        }
        if !(self.msm.r >= 1.0) {
            return Err(Error::Config("`msm.r` must be at least 1".into()));
        }
        if self.methods.is_empty() {
            return Err(Error::Config("`methods` is empty".into()));
        }
        let frac = self.baselines.variance_fraction;
        if !(frac > 0.0 && frac <= 1.0) {
            return Err(Error::Config("`baselines.variance_fraction` must be in (0, 1]".into()));
        }
        Ok(())
    }

    /// Sets one leaf by dotted path (or a short alias such as `s`, `d`,
    /// `lambda2`, `weight_mode`) from its text form.
    pub fn with_value(&self, axis: &str, value: &str) -> Result<Self> {
        let path = resolve_axis(axis)?;
        let mut doc = toml::Value::try_from(self).expect("config serializes");
        let mut node = &mut doc;
        let (last, parents) = path.split_last().expect("non-empty path");
        for key in parents {
            node = node
                .as_table_mut()
                .and_then(|t| t.get_mut(*key))
                .ok_or_else(|| Error::Config(format!("unknown sweep axis `{axis}`")))?;
        }
        let table = node
            .as_table_mut()
            .ok_or_else(|| Error::Config(format!("unknown sweep axis `{axis}`")))?;
        let parsed = parse_scalar(value, table.get(*last));
        table.insert(last.to_string(), parsed);
        let cfg: PipelineConfig = doc
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(format!("axis `{axis}` = `{value}`: {}", e.message().trim())))?;
        Ok(cfg)
    }
}

const ALIASES: &[(&str, &str)] = &[
    ("s", "tempreg.s"),
    ("weight_mode", "tempreg.mode"),
    ("gaussian_sigma", "tempreg.gaussian_sigma"),
    ("exp_theta", "tempreg.exp_theta"),
    ("d", "solver.d"),
    ("lambda1", "solver.lambda1"),
    ("lambda2", "solver.lambda2"),
    ("alpha", "solver.alpha"),
    ("beta", "solver.beta"),
    ("nu", "solver.nu"),
    ("max_iters", "solver.max_iters"),
    ("k", "clustering.k"),
    ("tau", "msm.tau"),
    ("m", "msm.m"),
    ("r", "msm.r"),
];

/// Leaves that may be swept. Section names alone are not leaves.
const SWEEPABLE: &[&str] = &[
    "seed",
    "tempreg",
    "solver",
    "clustering",
    "msm",
    "features",
    "baselines",
    "input.synth",
];

fn resolve_axis(axis: &str) -> Result<Vec<&str>> {
    let full = ALIASES.iter().find(|(a, _)| *a == axis).map_or(axis, |(_, p)| p);
    let parts: Vec<&str> = full.split('.').collect();
    let prefix_ok = SWEEPABLE.iter().any(|s| {
        let sp: Vec<&str> = s.split('.').collect();
        (parts.len() > sp.len() && parts[..sp.len()] == sp[..]) || (full == "seed" && *s == "seed")
    });
    if parts.iter().any(|p| p.is_empty()) || !prefix_ok {
        return Err(Error::Config(format!("unknown sweep axis `{axis}`")));
    }
    Ok(parts)
}

fn parse_scalar(text: &str, current: Option<&toml::Value>) -> toml::Value {
    use toml::Value;
    let guess = if let Ok(i) = text.parse::<i64>() {
        Value::Integer(i)
    } else if let Ok(f) = text.parse::<f64>() {
        Value::Float(f)
    } else if let Ok(b) = text.parse::<bool>() {
        Value::Boolean(b)
    } else {
        Value::String(text.to_string())
    };
    match (current, guess) {
        (Some(Value::Float(_)), Value::Integer(i)) => Value::Float(i as f64),
        (Some(Value::Array(items)), v) => {
            let v = match (items.first(), v) {
                (Some(Value::Float(_)), Value::Integer(i)) => Value::Float(i as f64),
                (_, v) => v,
            };
            Value::Array(vec![v])
        }
        (_, v) => v,
    }
}
