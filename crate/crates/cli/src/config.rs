//! Run configuration: parsing, preset/flag overrides, validation.

use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context};
use ncgft::afcore::{validate_embedding, AlgebraProfile, EmbeddingSpec};
use ncgft::exec::Execution;
use ncgft::presets::{case_layout, default_diagonal};
use ncgft::ssbm::{PathSpec, ScanOptions};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Toml,
    Json,
}

impl Format {
    pub fn from_path(path: &Path) -> anyhow::Result<Self> {
        match path
            .extension()
            .and_then(|e| e.to_str())
            .map(str::to_ascii_lowercase)
            .as_deref()
        {
            Some("toml") => Ok(Self::Toml),
            Some("json") => Ok(Self::Json),
            _ => bail!(
                "cannot tell the format of {}: use a .toml or .json extension",
                path.display()
            ),
        }
    }
}

/// Optimizer and detection settings; everything in [`ScanOptions`] except the seed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OptimizerConfig {
    pub restarts: usize,
    pub init_range: f64,
    pub max_iter: usize,
    pub grad_tol: f64,
    pub threshold: f64,
    pub resolution: f64,
    pub bidirectional: bool,
    pub execution: Execution,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        let o = ScanOptions::default();
        Self {
            restarts: o.restarts,
            init_range: o.init_range,
            max_iter: o.max_iter,
            grad_tol: o.grad_tol,
            threshold: o.threshold,
            resolution: o.resolution,
            bidirectional: o.bidirectional,
            execution: o.execution,
        }
    }
}

fn default_path() -> PathSpec {
    default_diagonal(161)
}

fn default_out() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Named case; fills `source`, `target` and `multiplicity` when they are left empty.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    #[serde(default)]
    pub source: Vec<usize>,
    #[serde(default)]
    pub target: Vec<usize>,
    /// `multiplicity[j][i]`: copies of source summand `i` in target block `j`.
    #[serde(default)]
    pub multiplicity: Vec<Vec<usize>>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
    #[serde(default = "default_out")]
    pub out: PathBuf,
    /// λ for `masses`; defaults to all ones.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambdas: Option<Vec<f64>>,
    /// Dimension vectors for `k0`; defaults to the unit vectors.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub k0: Vec<Vec<usize>>,
    #[serde(default)]
    pub optimizer: OptimizerConfig,
    #[serde(default = "default_path")]
    pub path: PathSpec,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            preset: None,
            source: Vec::new(),
            target: Vec::new(),
            multiplicity: Vec::new(),
            seed: 0,
            threads: None,
            out: default_out(),
            lambdas: None,
            k0: Vec::new(),
            optimizer: OptimizerConfig::default(),
            path: default_path(),
        }
    }
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub preset: Option<String>,
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub out: Option<PathBuf>,
}

pub fn parse_config(text: &str, format: Format) -> anyhow::Result<RunConfig> {
    match format {
        Format::Toml => {
            toml::from_str(text).map_err(|e| anyhow!("invalid config: {}", e.message()))
        }
        Format::Json => serde_json::from_str(text).map_err(|e| anyhow!("invalid config: {e}")),
    }
}

pub fn load_config(path: &Path) -> anyhow::Result<RunConfig> {
    let format = Format::from_path(path)?;
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse_config(&text, format).with_context(|| format!("in {}", path.display()))
}

impl RunConfig {
    /// Applies overrides and the preset, then validates the embedding.
    ///
    /// The result is a fixed point: resolving it again changes nothing.
    pub fn resolve(mut self, overrides: &Overrides) -> anyhow::Result<(Self, EmbeddingSpec)> {
        if let Some(p) = &overrides.preset {
            self.preset = Some(p.clone());
        }
        if let Some(s) = overrides.seed {
            self.seed = s;
        }
        if let Some(t) = overrides.threads {
            self.threads = Some(t);
        }
        if let Some(o) = &overrides.out {
            self.out = o.clone();
        }
        if let Some(name) = &self.preset {
            let (src, tgt, mult) = case_layout(name)?;
            if self.source.is_empty() && self.target.is_empty() && self.multiplicity.is_empty() {
                self.source = src;
                self.target = tgt;
                self.multiplicity = mult;
            } else if (&self.source, &self.target, &self.multiplicity) != (&src, &tgt, &mult) {
                bail!("preset '{name}' conflicts with the explicit source/target/multiplicity");
            }
        }
        if self.source.is_empty() || self.target.is_empty() {
            bail!("no algebras given: set source, target and multiplicity or use --preset");
        }
        if self.threads == Some(0) {
            bail!("threads must be at least 1");
        }
        let spec = validate_embedding(
            AlgebraProfile::new(self.source.clone())?,
            AlgebraProfile::new(self.target.clone())?,
            self.multiplicity.clone(),
        )?;
        let rank = spec.source().rank();
        if let Some(l) = &self.lambdas {
            if l.len() != rank {
                bail!(
                    "lambdas has {} entries, source has {rank} summands",
                    l.len()
                );
            }
        }
        if let Some(v) = self.k0.iter().find(|v| v.len() != rank) {
            bail!(
                "k0 vector {v:?} has {} entries, source has {rank} summands",
                v.len()
            );
        }
        self.path.points(rank)?;
        self.scan_options().validate()?;
        Ok((self, spec))
    }

    pub fn scan_options(&self) -> ScanOptions {
        let o = &self.optimizer;
        ScanOptions {
            restarts: o.restarts,
            init_range: o.init_range,
            max_iter: o.max_iter,
            grad_tol: o.grad_tol,
            seed: self.seed,
            threshold: o.threshold,
            resolution: o.resolution,
            bidirectional: o.bidirectional,
            execution: o.execution,
        }
    }

    /// Short case label, e.g. `M2+M3->M5`.
    pub fn case_name(&self) -> String {
        let side = |d: &[usize]| {
            d.iter()
                .map(|n| format!("M{n}"))
                .collect::<Vec<_>>()
                .join("+")
        };
        format!("{}->{}", side(&self.source), side(&self.target))
    }
}
