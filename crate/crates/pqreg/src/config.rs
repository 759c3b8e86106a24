//! Experiment configuration: a versioned JSON document whose every field has
//! a default, so a file only needs the keys it changes.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use pqreg_core::boundary::epsilon_max;
use pqreg_core::{BoundarySpec, Grid, Integrand};
use serde::{Deserialize, Serialize};

pub const CONFIG_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("{path}:{line}:{column}: {message}")]
    Parse {
        path: String,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

fn invalid(msg: impl Into<String>) -> ConfigError {
    ConfigError::Invalid(msg.into())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum IntegrandConfig {
    AnisotropicPower { p: f64, q: f64 },
    Hong,
    Quadratic,
}

impl IntegrandConfig {
    pub fn build(&self) -> pqreg_core::Result<Integrand> {
        match *self {
            IntegrandConfig::AnisotropicPower { p, q } => Integrand::anisotropic_power(p, q),
            IntegrandConfig::Hong => Ok(Integrand::hong()),
            IntegrandConfig::Quadratic => Ok(Integrand::quadratic()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BoundaryConfig {
    /// `a·x + b`
    Affine { slope: [f64; 2], offset: f64 },
    /// `A sin(ω₁x₁) cos(ω₂x₂)`
    Trig {
        amplitude: f64,
        frequencies: [f64; 2],
    },
    /// `x₁² - x₂²`
    Saddle,
}

impl BoundaryConfig {
    pub fn build(&self, epsilon: f64) -> BoundarySpec {
        let spec = match *self {
            BoundaryConfig::Affine { slope, offset } => BoundarySpec::affine(slope, offset),
            BoundaryConfig::Trig {
                amplitude,
                frequencies,
            } => BoundarySpec::trig(amplitude, frequencies),
            BoundaryConfig::Saddle => BoundarySpec::custom(|x| x[0] * x[0] - x[1] * x[1]),
        };
        spec.with_epsilon(epsilon)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    /// Nodes per side, odd.
    pub n: usize,
    /// The domain is `[-L, L]²`.
    pub half_width: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            n: 65,
            half_width: 2.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Radii {
    pub inner: f64,
    pub outer: f64,
}

impl Default for Radii {
    fn default() -> Self {
        Radii {
            inner: 0.5,
            outer: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub tol_per_node: f64,
    pub max_iterations: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        let d = pqreg_core::SolveConfig::default();
        SolverConfig {
            tol_per_node: d.tol_per_node,
            max_iterations: d.max_iterations,
        }
    }
}

impl SolverConfig {
    pub fn build(&self) -> pqreg_core::SolveConfig {
        pqreg_core::SolveConfig {
            tol_per_node: self.tol_per_node,
            max_iterations: self.max_iterations,
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProbeConfig {
    pub trials: usize,
    pub amplitude: f64,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        ProbeConfig {
            trials: 100,
            amplitude: 1e-3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum FieldFormat {
    #[default]
    Csv,
    Binary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    /// Directory for reports and field dumps; nothing is written when absent.
    pub dir: Option<PathBuf>,
    pub field_format: FieldFormat,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub config_version: u32,
    pub integrand: IntegrandConfig,
    pub boundary: BoundaryConfig,
    pub grid: GridConfig,
    /// Grid sizes for refinement studies.
    pub grid_sizes: Vec<usize>,
    /// Regularization parameters, strictly decreasing in `(0, 1)`.
    pub sigma: Vec<f64>,
    /// Mollification radii.
    pub epsilon: Vec<f64>,
    pub radii: Radii,
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    pub solver: SolverConfig,
    pub probe: ProbeConfig,
    pub output: OutputConfig,
    pub seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            config_version: CONFIG_VERSION,
            integrand: IntegrandConfig::AnisotropicPower { p: 2.0, q: 3.0 },
            boundary: BoundaryConfig::Trig {
                amplitude: 1.0,
                frequencies: [0.5 * PI, 0.5 * PI],
            },
            grid: GridConfig::default(),
            grid_sizes: vec![33, 65, 129],
            sigma: vec![1e-2, 5e-3, 2.5e-3, 1.25e-3],
            epsilon: vec![0.05],
            radii: Radii::default(),
            alpha: vec![0.0, 1.0, 2.0],
            beta: vec![2.0],
            solver: SolverConfig::default(),
            probe: ProbeConfig::default(),
            output: OutputConfig::default(),
            seed: 0,
        }
    }
}

/// Presence check for `config_version`, which has no default in files.
#[derive(Deserialize)]
struct VersionProbe {
    config_version: Option<u32>,
}

impl ExperimentConfig {
    pub fn from_json_str(text: &str, origin: &str) -> Result<Self, ConfigError> {
        let parse_err = |e: serde_json::Error| ConfigError::Parse {
            path: origin.to_string(),
            line: e.line(),
            column: e.column(),
            message: {
                let full = e.to_string();
                let suffix = format!(" at line {} column {}", e.line(), e.column());
                full.strip_suffix(&suffix).unwrap_or(&full).to_string()
            },
        };
        let probe: VersionProbe = serde_json::from_str(text).map_err(parse_err)?;
        match probe.config_version {
            Some(CONFIG_VERSION) => {}
            Some(v) => {
                return Err(invalid(format!(
                    "unsupported config_version {v}, expected {CONFIG_VERSION}"
                )))
            }
            None => return Err(invalid("missing config_version")),
        }
        let cfg: ExperimentConfig = serde_json::from_str(text).map_err(parse_err)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json_str(&text, &path.display().to_string())
    }

    pub fn grid(&self) -> Result<Grid, ConfigError> {
        Grid::new(self.grid.n, self.grid.half_width).map_err(|e| invalid(e.to_string()))
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.config_version != CONFIG_VERSION {
            return Err(invalid(format!(
                "unsupported config_version {}",
                self.config_version
            )));
        }
        self.integrand
            .build()
            .map_err(|e| invalid(format!("integrand: {e}")))?;
        let grid = self.grid()?;
        for &n in &self.grid_sizes {
            Grid::new(n, self.grid.half_width).map_err(|e| invalid(format!("grid_sizes: {e}")))?;
        }
        if self.sigma.is_empty() {
            return Err(invalid("sigma list is empty"));
        }
        if self.sigma.iter().any(|&s| !(s > 0.0 && s < 1.0)) {
            return Err(invalid("sigma values must lie in (0, 1)"));
        }
        if self.sigma.windows(2).any(|w| w[1] >= w[0]) {
            return Err(invalid("sigma values must be strictly decreasing"));
        }
        let eps_max = epsilon_max(&grid);
        if self.epsilon.is_empty() {
            return Err(invalid("epsilon list is empty"));
        }
        if self.epsilon.iter().any(|&e| !(e >= 0.0 && e < eps_max)) {
            return Err(invalid(format!("epsilon values must lie in [0, {eps_max})")));
        }
        let Radii { inner, outer } = self.radii;
        if !(inner > 0.0 && inner < outer && outer <= self.grid.half_width) {
            return Err(invalid("radii need 0 < inner < outer ≤ half_width"));
        }
        if self.alpha.iter().any(|&a| !(a >= 0.0 && a.is_finite())) {
            return Err(invalid("alpha values must be finite and ≥ 0"));
        }
        if self.beta.iter().any(|&b| !(b >= 2.0 && b.is_finite())) {
            return Err(invalid("beta values must be finite and ≥ 2"));
        }
        if !(self.solver.tol_per_node > 0.0) || self.solver.max_iterations == 0 {
            return Err(invalid("solver tolerance and iteration budget must be positive"));
        }
        if self.probe.trials == 0 || !(self.probe.amplitude > 0.0) {
            return Err(invalid("probe trials and amplitude must be positive"));
        }
        Ok(())
    }
}
