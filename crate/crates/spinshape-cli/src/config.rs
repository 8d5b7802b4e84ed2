//! Run configuration: JSON file with a flat documented schema, overridable
//! field by field from the command line. Defaults reproduce the reference
//! setup (γ = 2.5, β = 1, λ = 1 on a [−20, 20] box with 2000 points).

use anyhow::{bail, Context};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    /// Adjoint-exact factorized discretization H∓ = A±A∓ (default).
    Factorized,
    /// 3-point Laplacian plus pointwise potential and Zeeman term.
    Direct,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Csv,
    Json,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub half_width: f64,
    pub points: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            half_width: 20.0,
            points: 2000,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    /// How many of the lowest eigenvalues to extract beyond the predicted
    /// bound set.
    pub k_levels: usize,
    pub tol: f64,
    pub scheme: Scheme,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            k_levels: 6,
            tol: 1e-12,
            scheme: Scheme::Factorized,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub format: OutputFormat,
    pub directory: PathBuf,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            format: OutputFormat::Csv,
            directory: PathBuf::from("."),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub gamma: f64,
    pub beta: f64,
    pub lambda: f64,
    pub grid: GridConfig,
    pub solver: SolverConfig,
    pub output: OutputConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            gamma: 2.5,
            beta: 1.0,
            lambda: 1.0,
            grid: GridConfig::default(),
            solver: SolverConfig::default(),
            output: OutputConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config file {}", path.display()))?;
        let cfg: Self = serde_json::from_str(&text)
            .with_context(|| format!("cannot parse config file {}", path.display()))?;
        Ok(cfg)
    }

    #[allow(clippy::neg_cmp_op_on_partial_ord)] // !(x > 0) deliberately rejects NaN
    pub fn validate(&self) -> anyhow::Result<()> {
        if !self.gamma.is_finite() || self.gamma <= 0.0 {
            bail!("gamma = {} must be finite and positive", self.gamma);
        }
        if !self.beta.is_finite() || !self.lambda.is_finite() {
            bail!("beta and lambda must be finite");
        }
        if self.grid.points < 16 {
            bail!("grid.points = {} must be at least 16", self.grid.points);
        }
        if !self.grid.half_width.is_finite() || self.grid.half_width <= 0.0 {
            bail!(
                "grid.half-width = {} must be positive",
                self.grid.half_width
            );
        }
        if !(self.solver.tol > 0.0) {
            bail!("solver.tol = {} must be positive", self.solver.tol);
        }
        if self.solver.k_levels == 0 {
            bail!("solver.k-levels must be at least 1");
        }
        Ok(())
    }

    /// Worker cap from SPINSHAPE_THREADS; unset or unparsable means the
    /// deterministic single-worker default.
    pub fn workers() -> usize {
        std::env::var("SPINSHAPE_THREADS")
            .ok()
            .and_then(|v| v.parse::<usize>().ok())
            .filter(|&n| n >= 1)
            .unwrap_or(1)
    }
}
