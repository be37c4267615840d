use std::path::{Path, PathBuf};

use peps_core::eigen::EigenSettings;
use peps_core::{LatticeKind, Settings};
use serde::{Deserialize, Serialize};

use crate::Failure;

/// Where the PEPS of a command comes from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Model {
    /// Classical Ising PEPS at inverse temperature `beta`.
    Ising,
    /// Seeded random complex tensors.
    Random,
}

/// Contents of a `--config` file. Every key is optional; command-line flags
/// take precedence.
#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub lattice: Option<LatticeKind>,
    pub dims: Option<Vec<usize>>,
    pub bond_dim: Option<usize>,
    pub phys_dim: Option<usize>,
    pub model: Option<Model>,
    pub beta: Option<f64>,
    pub betas: Option<Vec<f64>>,
    pub weights: Option<Vec<f64>>,
    pub region: Option<Vec<usize>>,
    pub blocks: Option<Vec<usize>>,
    pub max_region: Option<usize>,
    pub levels: Option<usize>,
    pub input: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub rtol: Option<f64>,
    pub cap: Option<u64>,
    pub eigen: Option<EigenSettings>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self, Failure> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Failure::input(format!("cannot read config {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| Failure::input(format!("config {}: {e}", path.display())))
    }
}

/// Fully resolved parameters of one run, recorded in the report.
#[derive(Clone, Debug, Serialize)]
pub struct RunConfig {
    pub command: String,
    pub lattice: LatticeKind,
    pub dims: Vec<usize>,
    pub bond_dim: usize,
    pub phys_dim: usize,
    pub model: Model,
    pub beta: f64,
    pub betas: Vec<f64>,
    pub weights: Option<Vec<f64>>,
    pub region: Option<Vec<usize>>,
    pub blocks: Option<Vec<usize>>,
    pub max_region: usize,
    pub levels: usize,
    pub input: Option<PathBuf>,
    pub out: PathBuf,
    pub seed: u64,
    pub rtol: f64,
    pub cap: u64,
    pub eigen: EigenSettings,
}

/// Default β grid of the gap scan: 0.1 to 0.5 in steps of 0.02.
pub fn default_betas() -> Vec<f64> {
    (0..=20).map(|k| (10 + 2 * k) as f64 / 100.0).collect()
}

impl RunConfig {
    pub fn settings(&self) -> Settings {
        Settings {
            rtol: self.rtol,
            state_cap: self.cap as u128,
            seed: self.seed,
            ..Settings::default()
        }
    }

    pub fn validate(&self) -> Result<(), Failure> {
        if !(self.rtol > 0.0 && self.rtol < 1.0) {
            return Err(Failure::input("rtol must lie in (0, 1)"));
        }
        if !self.beta.is_finite() || self.beta < 0.0 {
            return Err(Failure::input("beta must be finite and nonnegative"));
        }
        if self.betas.is_empty() || self.betas.iter().any(|b| !b.is_finite() || *b < 0.0) {
            return Err(Failure::input("betas must be a nonempty list of nonnegative numbers"));
        }
        if self.phys_dim == 0 || self.bond_dim == 0 {
            return Err(Failure::input("dimensions must be positive"));
        }
        if let Some(b) = &self.blocks {
            if b.len() != 2 || b.contains(&0) {
                return Err(Failure::input("blocks must be two positive integers"));
            }
        }
        Ok(())
    }

    /// Makes `input` absolute and creates the output directory.
    pub fn resolve_paths(&mut self) -> Result<(), Failure> {
        if let Some(p) = &self.input {
            self.input = Some(
                std::fs::canonicalize(p).map_err(|e| Failure::input(format!("input {}: {e}", p.display())))?,
            );
        }
        std::fs::create_dir_all(&self.out)
            .map_err(|e| Failure::input(format!("cannot create {}: {e}", self.out.display())))?;
        self.out = std::fs::canonicalize(&self.out)
            .map_err(|e| Failure::input(format!("output {}: {e}", self.out.display())))?;
        Ok(())
    }
}
