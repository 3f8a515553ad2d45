//! Experiment description read from a TOML file, and the feasibility report
//! produced by `validate`.
//!
//! ```toml
//! model = "aklt"          # aklt | ghz | random
//! n_sites = 8             # physical sites (spins for the random model)
//! template = true         # optimize the symmetric template of S
//!
//! [lambda]
//! start = 0.0
//! stop = 1.0
//! steps = 21
//!
//! [sector]
//! enabled = true          # restrict to the ground-state sector of the model
//! # momentum, sz_total, q_eigen, parity, reversal override individual labels
//!
//! [optimizer]
//! grad_tol = 1e-7
//! max_iter = 500
//! init = "warm"           # canonical | warm | file
//! # init_file = "start.json"   (JSON array of parameters for the first point)
//!
//! [random_model]
//! seed = 0
//! t = 0.0
//! n_instances = 1         # seeds seed, seed+1, …
//!
//! [ode]
//! enabled = false
//! h_p = 1e-4
//! h_lambda = 1e-4
//! reproject_every = 0
//!
//! [output]
//! dir = "out"
//! formats = ["csv", "json", "dat"]
//! ```
//!
//! The only environment override is `PARENTGAP_OUT_DIR`, which replaces `output.dir`.

use crate::error::{Error, Result};
use crate::model::Model;
use crate::parent::MAX_HAMILTONIAN_DIM;
use crate::spectra::EigenSettings;
use crate::symmetry::{build_sector, symmetric_s_template, SectorSpec};
use crate::tensor::checked_dim;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

pub const OUT_DIR_ENV: &str = "PARENTGAP_OUT_DIR";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LambdaGrid {
    pub start: f64,
    pub stop: f64,
    pub steps: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SectorConfig {
    pub enabled: bool,
    pub momentum: Option<i64>,
    pub sz_total: Option<i64>,
    pub q_eigen: Option<i8>,
    pub parity: Option<i8>,
    pub reversal: Option<i8>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InitMode {
    Canonical,
    Warm,
    File,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OptimizerConfig {
    pub grad_tol: f64,
    pub max_iter: usize,
    pub init: InitMode,
    pub init_file: Option<PathBuf>,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self { grad_tol: 1e-7, max_iter: 500, init: InitMode::Warm, init_file: None }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RandomModelConfig {
    pub seed: u64,
    pub t: f64,
    pub n_instances: usize,
}

impl Default for RandomModelConfig {
    fn default() -> Self {
        Self { seed: 0, t: 0.0, n_instances: 1 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OdeConfig {
    pub enabled: bool,
    pub h_p: f64,
    pub h_lambda: f64,
    pub reproject_every: usize,
}

impl Default for OdeConfig {
    fn default() -> Self {
        Self { enabled: false, h_p: 1e-4, h_lambda: 1e-4, reproject_every: 0 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Csv,
    Json,
    Dat,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub dir: PathBuf,
    pub formats: Vec<OutputFormat>,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { dir: PathBuf::from("out"), formats: vec![OutputFormat::Csv, OutputFormat::Json, OutputFormat::Dat] }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: Model,
    pub n_sites: usize,
    pub lambda: LambdaGrid,
    #[serde(default)]
    pub template: bool,
    #[serde(default)]
    pub sector: SectorConfig,
    #[serde(default)]
    pub optimizer: OptimizerConfig,
    #[serde(default)]
    pub random_model: RandomModelConfig,
    #[serde(default)]
    pub ode: OdeConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

fn cfg_err(path: &str, msg: impl Into<String>) -> Error {
    Error::Config { path: path.into(), msg: msg.into() }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| {
            let msg = e.message().to_string();
            // the toml error names the offending key in its message; keep the span as a path hint
            let path = e.span().map(|s| format!("byte {}..{}", s.start, s.end)).unwrap_or_else(|| "<root>".into());
            cfg_err(&path, msg)
        })?;
        cfg.check()?;
        Ok(cfg)
    }

    /// Reads a config file and applies the output-dir environment override.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut cfg = Self::from_toml_str(&text)?;
        if let Ok(dir) = std::env::var(OUT_DIR_ENV) {
            if !dir.is_empty() {
                cfg.output.dir = PathBuf::from(dir);
            }
        }
        if cfg.optimizer.init == InitMode::File {
            if let Some(f) = &cfg.optimizer.init_file {
                if f.is_relative() {
                    let base = path.parent().unwrap_or(Path::new("."));
                    cfg.optimizer.init_file = Some(base.join(f));
                }
            }
        }
        Ok(cfg)
    }

    /// Field-level invariants.
    pub fn check(&self) -> Result<()> {
        if self.lambda.steps < 2 {
            return Err(cfg_err("lambda.steps", "need at least 2 grid points"));
        }
        if !(self.lambda.stop > self.lambda.start) {
            return Err(cfg_err("lambda.stop", "must exceed lambda.start"));
        }
        let (lo, hi) = self.model.lambda_range();
        if self.lambda.start < lo || self.lambda.stop > hi {
            return Err(cfg_err("lambda", format!("grid must lie in [{lo}, {hi}] for {}", self.model.name())));
        }
        if !(self.optimizer.grad_tol > 0.0) {
            return Err(cfg_err("optimizer.grad_tol", "must be positive"));
        }
        if self.optimizer.max_iter == 0 {
            return Err(cfg_err("optimizer.max_iter", "must be positive"));
        }
        if self.optimizer.init == InitMode::File && self.optimizer.init_file.is_none() {
            return Err(cfg_err("optimizer.init_file", "required when init = \"file\""));
        }
        if self.random_model.n_instances == 0 {
            return Err(cfg_err("random_model.n_instances", "must be at least 1"));
        }
        if self.model != Model::Random && self.random_model.n_instances != 1 {
            return Err(cfg_err("random_model.n_instances", "only the random model has instances"));
        }
        if self.model == Model::Random && self.n_sites % 2 != 0 {
            return Err(cfg_err("n_sites", "the random model needs an even number of spins"));
        }
        let min_sites = self.model.block_len() + 1;
        let chain = self.model.chain_sites(self.n_sites).unwrap_or(0);
        if chain < min_sites {
            return Err(cfg_err("n_sites", format!("need at least {min_sites} chain sites for {}-site terms", self.model.block_len())));
        }
        if self.template && self.model == Model::Random {
            return Err(cfg_err("template", "the random model has no symmetric template"));
        }
        if self.ode.enabled && !self.template {
            return Err(cfg_err("ode.enabled", "ODE following needs template = true"));
        }
        if !(self.ode.h_p > 0.0) || !(self.ode.h_lambda > 0.0) {
            return Err(cfg_err("ode", "finite-difference steps must be positive"));
        }
        if let Some(spec) = self.sector_spec() {
            spec.validate(self.model).map_err(|e| cfg_err("sector", e.to_string()))?;
        }
        Ok(())
    }

    /// Sector labels: the model's ground sector with per-label overrides, or `None` when disabled.
    pub fn sector_spec(&self) -> Option<SectorSpec> {
        if !self.sector.enabled {
            return None;
        }
        let mut spec = self.model.ground_sector();
        let s = &self.sector;
        if s.momentum.is_some() {
            spec.momentum = s.momentum;
        }
        if s.sz_total.is_some() {
            spec.sz_total = s.sz_total;
        }
        if s.q_eigen.is_some() {
            spec.q_eigen = s.q_eigen;
        }
        if s.parity.is_some() {
            spec.parity = s.parity;
        }
        if s.reversal.is_some() {
            spec.reversal = s.reversal;
        }
        Some(spec)
    }

    pub fn lambdas(&self) -> Vec<f64> {
        crate::path::linspace(self.lambda.start, self.lambda.stop, self.lambda.steps)
    }

    pub fn seeds(&self) -> Vec<u64> {
        (0..self.random_model.n_instances as u64).map(|i| self.random_model.seed + i).collect()
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ValidationReport {
    pub model: Model,
    pub n_sites: usize,
    pub chain_sites: usize,
    pub phys_dim: usize,
    pub kernel_dim: usize,
    pub full_dim: usize,
    pub sector_dim: Option<usize>,
    pub working_dim: usize,
    pub n_params: usize,
    pub solver: String,
    pub estimated_memory_bytes: u64,
    pub ok: bool,
    pub messages: Vec<String>,
}

impl std::fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "model            {}", self.model.name())?;
        writeln!(f, "sites            {} ({} chain sites, d = {})", self.n_sites, self.chain_sites, self.phys_dim)?;
        writeln!(f, "kernel dim M     {}", self.kernel_dim)?;
        writeln!(f, "full dim         {}", self.full_dim)?;
        match self.sector_dim {
            Some(d) => writeln!(f, "sector dim       {d}")?,
            None => writeln!(f, "sector dim       (full space)")?,
        }
        writeln!(f, "parameters       {}", self.n_params)?;
        writeln!(f, "solver           {}", self.solver)?;
        writeln!(f, "memory estimate  {:.1} MiB", self.estimated_memory_bytes as f64 / (1u64 << 20) as f64)?;
        for m in &self.messages {
            writeln!(f, "note             {m}")?;
        }
        write!(f, "status           {}", if self.ok { "ok" } else { "refused" })
    }
}

/// Feasibility report without running anything expensive.
pub fn validate(cfg: &ExperimentConfig) -> ValidationReport {
    let model = cfg.model;
    let d = model.phys_dim();
    let chain = model.chain_sites(cfg.n_sites).unwrap_or(0);
    let kernel_dim = match model {
        Model::Aklt => 5,
        Model::Ghz => 4,
        Model::Random => 12,
    };
    let n_params = if cfg.template {
        symmetric_s_template(model).map(|t| t.n_params()).unwrap_or(0)
    } else {
        kernel_dim * kernel_dim
    };
    let mut messages = Vec::new();
    let mut ok = true;
    if let Err(e) = cfg.check() {
        ok = false;
        messages.push(e.to_string());
    }
    let full = checked_dim(d, chain, MAX_HAMILTONIAN_DIM - 1);
    let full_dim = match &full {
        Ok(n) => *n,
        Err(_) => {
            ok = false;
            messages.push(format!(
                "size guard: {d}^{chain} states reach the 2^20 limit on assembled Hamiltonians; reduce n_sites"
            ));
            d.checked_pow(chain as u32).unwrap_or(usize::MAX)
        }
    };
    let mut sector_dim = None;
    if ok {
        if let Some(spec) = cfg.sector_spec() {
            match build_sector(model, cfg.n_sites, &spec) {
                Ok(w) => sector_dim = Some(w.d_g),
                Err(e) => {
                    ok = false;
                    messages.push(e.to_string());
                }
            }
        }
    }
    let working_dim = sector_dim.unwrap_or(full_dim);
    let dense = working_dim <= EigenSettings::default().dense_threshold;
    let ld = d.pow(model.block_len() as u32) as u64;
    let sparse_bytes = (full_dim as u64).saturating_mul(chain as u64 * ld).saturating_mul(20);
    let work = working_dim as u64;
    let dense_bytes = if dense { work * work * 16 * (n_params as u64 + 4) } else { work * 16 * 64 };
    if model == Model::Random {
        messages.push(format!("{} spins blocked into {chain} sites of dimension {d}", cfg.n_sites));
    }
    ValidationReport {
        model,
        n_sites: cfg.n_sites,
        chain_sites: chain,
        phys_dim: d,
        kernel_dim,
        full_dim,
        sector_dim,
        working_dim,
        n_params,
        solver: if dense { "dense".into() } else { "iterative".into() },
        estimated_memory_bytes: sparse_bytes.saturating_add(dense_bytes),
        ok,
        messages,
    }
}
