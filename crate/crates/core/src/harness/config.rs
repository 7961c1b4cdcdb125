//! Strict JSON run configuration.
//!
//! Unknown keys are rejected everywhere (typos must not silently change an
//! experiment), and validation reports every violation it finds, not just
//! the first.  A `notes` field is allowed at the top level since JSON has no
//! comments.

use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

/// Which model(s) an experiment integrates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelChoice {
    Chemostat,
    Direct,
    Both,
}

impl ModelChoice {
    pub fn runs_chemostat(self) -> bool {
        matches!(self, ModelChoice::Chemostat | ModelChoice::Both)
    }

    pub fn runs_direct(self) -> bool {
        matches!(self, ModelChoice::Direct | ModelChoice::Both)
    }
}

/// Uniform grid description.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub min: f64,
    pub max: f64,
    pub points: usize,
}

impl GridSpec {
    fn default_trait() -> Self {
        GridSpec { min: -2.0, max: 2.0, points: 201 }
    }
}

/// Coefficient tables: the Gaussian benchmark family or external CSV files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum CoefficientSpec {
    /// Normalized Gaussian uptake kernel and inflow, `a(x) = 1 - x^2`.
    Gaussian { sigma_k: f64, sigma_in: f64, m_in: f64, m: f64 },
    /// Paths to `(x, a)`, `(y, m, R_in)` and dense `K` tables; relative paths
    /// resolve against the config file's directory.
    Csv { xa: String, ymr: String, k: String },
}

/// Timescale separation and mutation size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScalesSpec {
    pub epsilon: f64,
    pub mu: f64,
}

/// Initial data: a normalized Gaussian bump for `n`, and `R0 = r0_scale R_in`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InitialSpec {
    pub center: f64,
    pub variance: f64,
    pub mass: f64,
    pub r0_scale: f64,
}

impl Default for InitialSpec {
    fn default() -> Self {
        InitialSpec { center: -0.8, variance: 0.005, mass: 1.0, r0_scale: 1.0 }
    }
}

/// Integration horizon, step and sampling stride.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TimeSpec {
    pub t_end: f64,
    pub dt: f64,
    pub sample_every: usize,
}

impl Default for TimeSpec {
    fn default() -> Self {
        TimeSpec { t_end: 30.0, dt: 0.01, sample_every: 100 }
    }
}

/// One arm of a ratio study: absolute `m` and inflow mass `m_in`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RatioArm {
    pub m: f64,
    pub m_in: f64,
}

/// The experiment to run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum ExperimentSpec {
    /// One integration per selected model; time series and final densities.
    Single,
    /// One model comparison per epsilon, strictly decreasing order.
    EpsilonSweep { epsilons: Vec<f64> },
    /// Chemostat runs across `(m, m_in)` arms; the first arm is the baseline.
    RatioStudy { arms: Vec<RatioArm> },
    /// Long run tracking peak counts and the density history.
    Branching,
}

fn default_output_dir() -> String {
    "out".into()
}

/// A complete, self-contained description of one invocation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub notes: Option<String>,
    pub model: ModelChoice,
    #[serde(default = "GridSpec::default_trait")]
    pub grid_x: GridSpec,
    #[serde(default = "GridSpec::default_trait")]
    pub grid_y: GridSpec,
    pub coefficients: CoefficientSpec,
    pub scales: ScalesSpec,
    #[serde(default)]
    pub initial: InitialSpec,
    #[serde(default)]
    pub time: TimeSpec,
    #[serde(default = "default_output_dir")]
    pub output_dir: String,
    pub experiment: ExperimentSpec,
    /// Directory the config was loaded from; resolves relative CSV paths.
    #[serde(skip)]
    pub base_dir: Option<PathBuf>,
}

impl RunConfig {
    /// Resolves a coefficient-table path against the config's directory.
    pub fn resolve_path(&self, p: &str) -> PathBuf {
        let path = Path::new(p);
        if path.is_absolute() {
            path.to_path_buf()
        } else {
            match &self.base_dir {
                Some(base) => base.join(path),
                None => path.to_path_buf(),
            }
        }
    }

    /// Checks every value constraint and returns all violations at once.
    pub fn validate(&self) -> Result<()> {
        let mut problems: Vec<String> = Vec::new();
        let mut check_grid = |name: &str, g: &GridSpec| {
            if !g.min.is_finite() || !g.max.is_finite() || g.min >= g.max {
                problems.push(format!("{name}: need finite min < max, got [{}, {}]", g.min, g.max));
            }
            if g.points < 3 {
                problems.push(format!("{name}: need at least 3 points, got {}", g.points));
            }
        };
        check_grid("grid_x", &self.grid_x);
        check_grid("grid_y", &self.grid_y);

        match &self.coefficients {
            CoefficientSpec::Gaussian { sigma_k, sigma_in, m_in, m } => {
                for (name, v) in
                    [("sigma_k", sigma_k), ("sigma_in", sigma_in), ("m_in", m_in), ("m", m)]
                {
                    if !(*v > 0.0) || !v.is_finite() {
                        problems
                            .push(format!("coefficients.{name} must be positive and finite, got {v}"));
                    }
                }
            }
            CoefficientSpec::Csv { xa, ymr, k } => {
                for (name, p) in [("xa", xa), ("ymr", ymr), ("k", k)] {
                    let full = self.resolve_path(p);
                    if !full.is_file() {
                        problems.push(format!(
                            "coefficients.{name}: no such file {}",
                            full.display()
                        ));
                    }
                }
            }
        }

        if !(self.scales.epsilon > 0.0) || !self.scales.epsilon.is_finite() {
            problems.push(format!(
                "scales.epsilon must be positive and finite, got {}",
                self.scales.epsilon
            ));
        }
        if !(self.scales.mu >= 0.0) || !self.scales.mu.is_finite() {
            problems.push(format!(
                "scales.mu must be nonnegative and finite, got {}",
                self.scales.mu
            ));
        }

        if !(self.initial.variance > 0.0) || !self.initial.variance.is_finite() {
            problems.push(format!(
                "initial.variance must be positive and finite, got {}",
                self.initial.variance
            ));
        }
        if !(self.initial.mass > 0.0) || !self.initial.mass.is_finite() {
            problems
                .push(format!("initial.mass must be positive and finite, got {}", self.initial.mass));
        }
        if !self.initial.center.is_finite() {
            problems.push(format!("initial.center must be finite, got {}", self.initial.center));
        }
        if !(self.initial.r0_scale >= 0.0) || !self.initial.r0_scale.is_finite() {
            problems.push(format!(
                "initial.r0_scale must be nonnegative and finite, got {}",
                self.initial.r0_scale
            ));
        }

        if !(self.time.t_end > 0.0) || !self.time.t_end.is_finite() {
            problems.push(format!("time.t_end must be positive and finite, got {}", self.time.t_end));
        }
        if !(self.time.dt > 0.0) || !self.time.dt.is_finite() {
            problems.push(format!("time.dt must be positive and finite, got {}", self.time.dt));
        } else if self.time.t_end.is_finite() && self.time.dt > self.time.t_end {
            problems.push(format!(
                "time.dt ({}) must not exceed time.t_end ({})",
                self.time.dt, self.time.t_end
            ));
        }
        if self.time.sample_every == 0 {
            problems.push("time.sample_every must be at least 1".into());
        }

        if self.output_dir.is_empty() {
            problems.push("output_dir must not be empty".into());
        }

        match &self.experiment {
            ExperimentSpec::Single | ExperimentSpec::Branching => {}
            ExperimentSpec::EpsilonSweep { epsilons } => {
                if self.model != ModelChoice::Both {
                    problems.push("epsilon_sweep compares both models; set model = both".into());
                }
                if epsilons.is_empty() {
                    problems.push("epsilon_sweep.epsilons must not be empty".into());
                }
                for (i, e) in epsilons.iter().enumerate() {
                    if !(*e > 0.0) || !e.is_finite() {
                        problems.push(format!(
                            "epsilon_sweep.epsilons[{i}] must be positive and finite, got {e}"
                        ));
                    }
                }
                if epsilons.windows(2).any(|p| p[1] >= p[0]) {
                    problems.push("epsilon_sweep.epsilons must be strictly decreasing".into());
                }
            }
            ExperimentSpec::RatioStudy { arms } => {
                if !self.model.runs_chemostat() {
                    problems.push(
                        "ratio_study integrates the chemostat; set model = chemostat or both"
                            .into(),
                    );
                }
                if !matches!(self.coefficients, CoefficientSpec::Gaussian { .. }) {
                    problems.push(
                        "ratio_study overrides m and m_in, which requires gaussian coefficients"
                            .into(),
                    );
                }
                if arms.is_empty() {
                    problems.push("ratio_study.arms must not be empty".into());
                }
                for (i, arm) in arms.iter().enumerate() {
                    if !(arm.m > 0.0) || !arm.m.is_finite() || !(arm.m_in > 0.0) || !arm.m_in.is_finite() {
                        problems.push(format!(
                            "ratio_study.arms[{i}] needs positive finite m and m_in, got m = {}, m_in = {}",
                            arm.m, arm.m_in
                        ));
                    }
                }
            }
        }

        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(problems.join("; ")))
        }
    }
}

/// Reads, parses and validates a config file.  Parse errors (including
/// unknown keys) name the offending key and position.
pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let mut cfg: RunConfig = serde_json::from_str(&text)
        .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    cfg.base_dir = path.parent().map(|p| p.to_path_buf());
    cfg.validate()?;
    Ok(cfg)
}
