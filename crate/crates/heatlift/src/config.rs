//! Experiment configuration: JSON file, `--set` overrides and CLI flags,
//! resolved into one [`ExperimentConfig`].

use std::fmt;
use std::path::{Path, PathBuf};

use heatlift_core::audit::AuditSettings;
use heatlift_core::convergence::ConvergenceSettings;
use heatlift_core::ldp::{ChaosSettings, ModeControl};
use heatlift_core::sampler::SpectralConfig;
use heatlift_core::scan::{BoundId, ScanGrid};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::error::{RunError, RunResult};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    #[default]
    Sample,
    CovCheck,
    BoundsScan,
    LiftCheck,
    Converge,
    Tails,
    Chaos,
    Cm,
    Schilder,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::Sample => "sample",
            Experiment::CovCheck => "cov-check",
            Experiment::BoundsScan => "bounds-scan",
            Experiment::LiftCheck => "lift-check",
            Experiment::Converge => "converge",
            Experiment::Tails => "tails",
            Experiment::Chaos => "chaos",
            Experiment::Cm => "cm",
            Experiment::Schilder => "schilder",
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SampleParams {
    pub replica: u64,
    /// Also write the field in the binary cache format.
    pub binary: bool,
    /// Also write the full-grid lift in the binary sheet format.
    pub lift_cache: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CovCheckParams {
    pub times: Vec<f64>,
    pub positions: Vec<f64>,
    pub tolerance: f64,
    /// Replicas for the sampler-versus-oracle comparison; 0 skips it.
    pub mc_replicas: usize,
    pub mc_points: usize,
    pub mc_z_limit: f64,
}

impl Default for CovCheckParams {
    fn default() -> Self {
        CovCheckParams {
            times: vec![0.2, 0.4, 0.6, 0.8, 1.0],
            positions: vec![0.0, 0.25, 0.5, 0.75, 1.0],
            tolerance: 1e-8,
            mc_replicas: 0,
            mc_points: 20,
            mc_z_limit: 4.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoundsScanParams {
    pub bounds: Vec<BoundId>,
    pub kappa: f64,
    pub grid: ScanGrid,
}

impl Default for BoundsScanParams {
    fn default() -> Self {
        BoundsScanParams {
            bounds: BoundId::ALL.to_vec(),
            kappa: 0.5,
            grid: ScanGrid::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TailsParams {
    pub delta: f64,
    pub eps_list: Vec<f64>,
    pub k_list: Vec<u32>,
    pub replicas: usize,
}

impl Default for TailsParams {
    fn default() -> Self {
        TailsParams {
            delta: 0.5,
            eps_list: vec![1.0, 0.5, 0.25],
            k_list: vec![2, 4],
            replicas: 1000,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CmParams {
    pub controls: Vec<ModeControl>,
    pub q: f64,
    /// Weight exponent of the dyadic `q`-variation sum; defaults to `q − 0.75`.
    pub gamma: Option<f64>,
    pub k_list: Vec<u32>,
}

impl Default for CmParams {
    fn default() -> Self {
        CmParams {
            controls: vec![ModeControl::constant(1, 0, 1.0, 1.0)],
            q: 1.5,
            gamma: None,
            k_list: (2..=8).collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SchilderParams {
    pub t: f64,
    pub x: f64,
    /// Threshold `a`; defaults to the pointwise standard deviation.
    pub threshold: Option<f64>,
    pub eps_list: Vec<f64>,
}

impl Default for SchilderParams {
    fn default() -> Self {
        SchilderParams {
            t: 1.0,
            x: 0.0,
            threshold: None,
            eps_list: vec![0.5, 0.25, 0.125],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub threads: usize,
    pub format: OutputFormat,
    pub output_dir: PathBuf,
    pub spectral: SpectralConfig,
    pub sample: SampleParams,
    pub cov_check: CovCheckParams,
    pub bounds_scan: BoundsScanParams,
    pub lift_check: AuditSettings,
    pub converge: ConvergenceSettings,
    pub tails: TailsParams,
    pub chaos: ChaosSettings,
    pub cm: CmParams,
    pub schilder: SchilderParams,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            experiment: Experiment::default(),
            threads: 1,
            format: OutputFormat::default(),
            output_dir: PathBuf::from("heatlift-out"),
            spectral: SpectralConfig::default(),
            sample: SampleParams::default(),
            cov_check: CovCheckParams::default(),
            bounds_scan: BoundsScanParams::default(),
            lift_check: AuditSettings::default(),
            converge: ConvergenceSettings::default(),
            tails: TailsParams::default(),
            chaos: ChaosSettings::default(),
            cm: CmParams::default(),
            schilder: SchilderParams::default(),
        }
    }
}

impl ExperimentConfig {
    /// SHA-256 of the resolved configuration without `output_dir`, so the
    /// same run written to two places hashes the same.
    pub fn content_hash(&self) -> String {
        let bytes = serde_json::to_vec(&self.hashed_view()).expect("value serializes");
        hex::encode(Sha256::digest(&bytes))
    }

    /// The resolved configuration without `output_dir`: what the hash
    /// covers and what `config.json` records.
    pub fn hashed_view(&self) -> Value {
        let mut v = serde_json::to_value(self).expect("config serializes");
        if let Value::Object(map) = &mut v {
            map.remove("output_dir");
        }
        v
    }

    pub fn validate(&self) -> RunResult<()> {
        if self.threads == 0 {
            return Err(RunError::Config("threads must be at least 1".into()));
        }
        self.spectral.validate()?;
        Ok(())
    }
}

/// Overrides applied on top of the file, in order: `--set` entries, then
/// the dedicated flags.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub sets: Vec<String>,
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub out: Option<PathBuf>,
}

/// Reads a config or a manifest. A manifest is recognized by its embedded
/// `config` object and contributes exactly that.
pub fn read_config_value(path: &Path) -> RunResult<Value> {
    let text = std::fs::read_to_string(path).map_err(|e| RunError::io(path, e))?;
    let v: Value = serde_json::from_str(&text)
        .map_err(|e| RunError::Config(format!("{}: {e}", path.display())))?;
    match v {
        Value::Object(mut map) if map.contains_key("config_hash") => {
            map.remove("config").ok_or_else(|| {
                RunError::Config(format!("{}: manifest without config", path.display()))
            })
        }
        Value::Object(_) => Ok(v),
        _ => Err(RunError::Config(format!(
            "{}: expected a JSON object",
            path.display()
        ))),
    }
}

fn set_path(root: &mut Value, assignment: &str) -> RunResult<()> {
    let (path, raw) = assignment
        .split_once('=')
        .ok_or_else(|| RunError::Config(format!("--set expects path=value, got {assignment:?}")))?;
    // Bare words are taken as strings so `--set format=json` works unquoted.
    let value: Value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let mut node = root;
    let parts: Vec<&str> = path.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        let map = match node {
            Value::Object(m) => m,
            _ => {
                return Err(RunError::Config(format!(
                    "--set {path}: {part:?} is not inside an object"
                )))
            }
        };
        if i + 1 == parts.len() {
            map.insert(part.to_string(), value);
            return Ok(());
        }
        node = map
            .entry(part.to_string())
            .or_insert_with(|| Value::Object(Default::default()));
    }
    Err(RunError::Config(format!(
        "--set has an empty path: {assignment:?}"
    )))
}

pub fn resolve(
    experiment: Experiment,
    file: Option<&Path>,
    overrides: &Overrides,
) -> RunResult<ExperimentConfig> {
    let mut v = match file {
        Some(p) => read_config_value(p)?,
        None => Value::Object(Default::default()),
    };
    for s in &overrides.sets {
        set_path(&mut v, s)?;
    }
    let mut cfg: ExperimentConfig =
        serde_json::from_value(v).map_err(|e| RunError::Config(format!("invalid config: {e}")))?;
    cfg.experiment = experiment;
    if let Some(seed) = overrides.seed {
        cfg.spectral.seed = seed;
    }
    if let Some(t) = overrides.threads {
        cfg.threads = t;
    }
    if let Some(out) = &overrides.out {
        cfg.output_dir = out.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}
