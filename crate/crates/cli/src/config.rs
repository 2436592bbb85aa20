//! Run configuration files.
//!
//! A config is a JSON object. Relative paths inside it resolve against the
//! directory holding the config file.

use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

use mcmlab::mcmcb::McmcbConfig;
use mcmlab::noise::{
    sample_random_usi, sample_spam, MCMLayerSpec, RawInstrumentModel, SamplerConfig, SpamConfig,
};
use mcmlab::ptg::{LabelledMonomial, LayerDef, LscbConfig};
use mcmlab::rc::RcOptions;
use mcmlab::rng::labeled_rng;

use crate::{CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
#[clap(rename_all = "snake_case")]
pub enum Command {
    Simulate,
    Mcmcb,
    Sweep,
    Ptg,
    Lscb,
    Report,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::Mcmcb => "mcmcb",
            Command::Sweep => "sweep",
            Command::Ptg => "ptg",
            Command::Lscb => "lscb",
            Command::Report => "report",
        }
    }

    pub fn needs_seed(self) -> bool {
        matches!(
            self,
            Command::Simulate | Command::Mcmcb | Command::Sweep | Command::Lscb
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Must match the command given on the command line when present.
    #[serde(default)]
    pub command: Option<Command>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub model: Option<ModelSpec>,
    /// MCM-CB parameters for `mcmcb` and `sweep`; the run seed replaces
    /// `protocol.seed`.
    #[serde(default)]
    pub protocol: Option<McmcbConfig>,
    #[serde(default)]
    pub simulate: Option<SimulateSpec>,
    #[serde(default)]
    pub sweep: Option<SweepSpec>,
    #[serde(default)]
    pub layers: Option<Source<Vec<LayerDef>>>,
    #[serde(default)]
    pub queries: Option<Source<Vec<LabelledMonomial>>>,
    #[serde(default)]
    pub lscb: Option<LscbSpec>,
    #[serde(default)]
    pub report: Option<ReportSpec>,
    #[serde(default)]
    pub format: FormatFlags,
}

/// Where the instrument model comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelSpec {
    File {
        path: PathBuf,
    },
    Inline {
        model: RawInstrumentModel,
    },
    Noiseless {
        layer: MCMLayerSpec,
    },
    /// Drawn from `labeled_rng(seed, "model", 0)`; SPAM from the `"spam"` stream.
    Sampled {
        layer: MCMLayerSpec,
        sampler: SamplerConfig,
        #[serde(default)]
        spam: Option<SpamConfig>,
    },
}

/// A value given inline or as `{"file": path}` holding the same JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Source<T> {
    File { file: PathBuf },
    Inline(T),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateSpec {
    /// Unmeasured-register Pauli of the subexperiment.
    pub pauli: String,
    pub depth: usize,
    pub shots: usize,
    #[serde(default)]
    pub rc: RcOptions,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub layer: MCMLayerSpec,
    /// Template recipe; its `p` is replaced by each grid value.
    pub sampler: SamplerConfig,
    pub grid: Grid,
    #[serde(default)]
    pub spam: Option<SpamConfig>,
    #[serde(default)]
    pub k_scaling: Option<KScalingSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Grid {
    Values {
        values: Vec<f64>,
    },
    /// `count` evenly spaced values in `[start, stop)`.
    Range {
        start: f64,
        stop: f64,
        count: usize,
    },
}

impl Grid {
    pub fn values(&self) -> Vec<f64> {
        match self {
            Grid::Values { values } => values.clone(),
            Grid::Range { start, stop, count } => (0..*count)
                .map(|i| start + (stop - start) * i as f64 / *count as f64)
                .collect(),
        }
    }
}

/// Resampling study of `sigma(F_hat)` against `K` on the analytic decay pool
/// of one sampled model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KScalingSpec {
    pub p: f64,
    pub ks: Vec<usize>,
    pub repetitions: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LscbSpec {
    /// Edge labels of the closed walk, in traversal order.
    pub cycle: Vec<String>,
    #[serde(default)]
    pub protocol: LscbConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReportSpec {
    /// `results.json` written by `mcmcb`.
    pub results: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FormatFlags {
    #[serde(default = "yes")]
    pub shots_jsonl: bool,
    #[serde(default = "yes")]
    pub pretty_json: bool,
}

fn yes() -> bool {
    true
}

impl Default for FormatFlags {
    fn default() -> Self {
        FormatFlags {
            shots_jsonl: true,
            pretty_json: true,
        }
    }
}

pub fn config_error(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(path.to_path_buf(), e))?;
    serde_json::from_str(&text).map_err(|e| config_error(format!("{}: {e}", path.display())))
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<RunConfig> {
        read_json(path)
    }

    pub fn require<'a, T>(field: &'a Option<T>, name: &str, cmd: Command) -> Result<&'a T> {
        field
            .as_ref()
            .ok_or_else(|| config_error(format!("`{name}` is required for {}", cmd.name())))
    }
}

impl<T: serde::de::DeserializeOwned + Clone> Source<T> {
    pub fn resolve(&self, base: &Path) -> Result<T> {
        match self {
            Source::Inline(v) => Ok(v.clone()),
            Source::File { file } => read_json(&base.join(file)),
        }
    }
}

impl ModelSpec {
    pub fn resolve(&self, base: &Path, seed: u64) -> Result<RawInstrumentModel> {
        let model = match self {
            ModelSpec::File { path } => {
                let p = base.join(path);
                let text = std::fs::read_to_string(&p).map_err(|e| CliError::Io(p.clone(), e))?;
                RawInstrumentModel::from_json(&text)?
            }
            ModelSpec::Inline { model } => model.clone(),
            ModelSpec::Noiseless { layer } => RawInstrumentModel::noiseless(layer.clone()),
            ModelSpec::Sampled { layer, sampler, spam } => {
                sampled_model(layer, sampler, spam.as_ref(), seed)?
            }
        };
        model.validate()?;
        Ok(model)
    }
}

pub fn sampled_model(
    layer: &MCMLayerSpec,
    sampler: &SamplerConfig,
    spam: Option<&SpamConfig>,
    seed: u64,
) -> Result<RawInstrumentModel> {
    layer.validate()?;
    let mut model = sample_random_usi(layer, sampler, &mut labeled_rng(seed, "model", 0))?;
    if let Some(s) = spam {
        model.spam = sample_spam(layer.n, s, &mut labeled_rng(seed, "spam", 0))?;
    }
    Ok(model)
}

/// `template` with its error rate replaced by `p`.
pub fn with_rate(template: &SamplerConfig, p: f64) -> Result<SamplerConfig> {
    let mut s = template.clone();
    match &mut s {
        SamplerConfig::Sparse { p: q, .. } | SamplerConfig::DepolarizingCrosstalk { p: q, .. } => *q = p,
        SamplerConfig::Named { .. } => return Err(config_error("named models have no rate to sweep")),
    }
    Ok(s)
}
