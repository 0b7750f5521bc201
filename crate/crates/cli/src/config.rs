//! Experiment configuration files (JSON).

use std::path::{Path, PathBuf};

use adsis_core::model::sample_uniform_activities;
use adsis_core::simulator::DecayMethod;
use adsis_core::{ActivityDistribution, ModelError, Seed, StreamDomain};
use serde::{Deserialize, Serialize};

use crate::plot::PlotSpec;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("invalid config: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("config kind is {found:?} but the command runs {expected:?}")]
    KindMismatch { expected: ExperimentKind, found: ExperimentKind },
    #[error("sweep list `{0}` is empty")]
    EmptySweep(&'static str),
    #[error("{field} = {value} is out of range")]
    OutOfRange { field: String, value: f64 },
    #[error("a seed is required for {0}")]
    MissingSeed(&'static str),
    #[error("exact experiments need n <= 6, got {0}")]
    ExactTooLarge(usize),
    #[error("allocate needs an `allocation` section")]
    MissingAllocation,
    #[error("allocation needs exactly one of `budget_fraction` and `alpha_bar`")]
    AllocationTarget,
    #[error("no table named `{0}` in this run")]
    UnknownTable(String),
    #[error("monte_carlo.runs must be at least 1")]
    NoRuns,
    #[error("invalid model: {0}")]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Simulate,
    Bound,
    Exact,
    Allocate,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::Simulate => "simulate",
            Self::Bound => "bound",
            Self::Exact => "exact",
            Self::Allocate => "allocate",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub model: ModelSpec,
    pub sweep: Sweep,
    #[serde(default)]
    pub monte_carlo: MonteCarloSettings,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub allocation: Option<AllocationSettings>,
    #[serde(default)]
    pub output: OutputSettings,
}

/// Where the per-node rates come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum ModelSpec {
    Sampled {
        n: usize,
        activities: ActivityDistribution,
        #[serde(default)]
        chi: RateSpec,
        #[serde(default)]
        pi: RateSpec,
    },
    Explicit { a: Vec<f64>, chi: Vec<f64>, pi: Vec<f64> },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RateSpec {
    /// Uniform on `(lo, hi]`.
    Uniform { lo: f64, hi: f64 },
    Constant { value: f64 },
}

impl Default for RateSpec {
    fn default() -> Self {
        Self::Uniform { lo: 0.0, hi: 1.0 }
    }
}

/// Per-node rates shared by every sweep point.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    pub a: Vec<f64>,
    pub chi: Vec<f64>,
    pub pi: Vec<f64>,
}

impl ModelSpec {
    pub fn n(&self) -> usize {
        match self {
            Self::Sampled { n, .. } => *n,
            Self::Explicit { a, .. } => a.len(),
        }
    }

    fn is_stochastic(&self) -> bool {
        matches!(self, Self::Sampled { .. })
    }

    /// Activities come from stream `Activities` of the seed, adaptation
    /// factors and acceptance rates from their own streams.
    pub fn network(&self, seed: Option<u64>) -> Result<Network, ConfigError> {
        match self {
            Self::Explicit { a, chi, pi } => Ok(Network { a: a.clone(), chi: chi.clone(), pi: pi.clone() }),
            Self::Sampled { n, activities, chi, pi } => {
                let seed = Seed(seed.ok_or(ConfigError::MissingSeed("a sampled model"))?);
                let a = activities.sample(*n, &mut seed.stream(StreamDomain::Activities, 0))?;
                let draw = |spec: &RateSpec, domain| -> Result<Vec<f64>, ConfigError> {
                    Ok(match *spec {
                        RateSpec::Uniform { lo, hi } => {
                            sample_uniform_activities(*n, lo, hi, &mut seed.stream(domain, 0))?
                        }
                        RateSpec::Constant { value } => vec![value; *n],
                    })
                };
                Ok(Network {
                    a,
                    chi: draw(chi, StreamDomain::Adaptation)?,
                    pi: draw(pi, StreamDomain::Acceptance)?,
                })
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sweep {
    pub m: Vec<usize>,
    pub beta: Vec<f64>,
    pub delta: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MonteCarloSettings {
    pub runs: usize,
    pub stop_threshold: f64,
    pub max_horizon: Option<usize>,
    pub method: DecayMethod,
}

impl Default for MonteCarloSettings {
    fn default() -> Self {
        Self { runs: 2000, stop_threshold: 0.1, max_horizon: None, method: DecayMethod::TailSlope }
    }
}

/// Cost model and targets of an allocation sweep. `chi_lower` and
/// `pi_lower` are swept; exactly one of `budget_fraction` (of `C_max`) and
/// `alpha_bar` must be given.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AllocationSettings {
    pub p: f64,
    pub q: f64,
    pub chi_lower: Vec<f64>,
    pub pi_lower: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub budget_fraction: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub alpha_bar: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSettings {
    /// File stem of the emitted tables; defaults to the experiment kind.
    pub name: Option<String>,
    /// Used when neither `--out` nor the environment names a directory.
    pub dir: Option<PathBuf>,
    pub plots: Vec<PlotSpec>,
}

fn unit_closed(x: f64) -> bool {
    (0.0..=1.0).contains(&x)
}

fn check(field: &str, value: f64, ok: bool) -> Result<(), ConfigError> {
    if ok {
        Ok(())
    } else {
        Err(ConfigError::OutOfRange { field: field.to_string(), value })
    }
}

impl ExperimentConfig {
    /// Reads a config. A missing `kind` is filled in from `kind`; a
    /// different one is rejected.
    pub fn load(path: &Path, kind: ExperimentKind) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| ConfigError::Read { path: path.to_path_buf(), source })?;
        Self::parse(&text, kind)
    }

    pub fn parse(text: &str, kind: ExperimentKind) -> Result<Self, ConfigError> {
        let mut value: serde_json::Value = serde_json::from_str(text)?;
        if let Some(obj) = value.as_object_mut() {
            obj.entry("kind").or_insert_with(|| serde_json::Value::String(kind.name().into()));
        }
        let config: Self = serde_json::from_value(value)?;
        if config.kind != kind {
            return Err(ConfigError::KindMismatch { expected: kind, found: config.kind });
        }
        config.validate()?;
        Ok(config)
    }

    pub fn name(&self) -> String {
        self.output.name.clone().unwrap_or_else(|| self.kind.name().to_string())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let s = &self.sweep;
        if s.m.is_empty() {
            return Err(ConfigError::EmptySweep("m"));
        }
        if s.beta.is_empty() {
            return Err(ConfigError::EmptySweep("beta"));
        }
        if s.delta.is_empty() {
            return Err(ConfigError::EmptySweep("delta"));
        }
        let n = self.model.n();
        for &m in &s.m {
            check("m", m as f64, m >= 1 && m < n.max(1))?;
        }
        for &b in &s.beta {
            check("beta", b, unit_closed(b))?;
        }
        for &d in &s.delta {
            check("delta", d, d > 0.0 && d <= 1.0)?;
        }
        if self.seed.is_none() {
            if self.kind == ExperimentKind::Simulate {
                return Err(ConfigError::MissingSeed("simulate"));
            }
            if self.model.is_stochastic() {
                return Err(ConfigError::MissingSeed("a sampled model"));
            }
        }
        match self.kind {
            ExperimentKind::Simulate => {
                let mc = &self.monte_carlo;
                if mc.runs == 0 {
                    return Err(ConfigError::NoRuns);
                }
                check("monte_carlo.stop_threshold", mc.stop_threshold, mc.stop_threshold > 0.0)?;
            }
            ExperimentKind::Exact if n > 6 => return Err(ConfigError::ExactTooLarge(n)),
            ExperimentKind::Allocate => {
                let a = self.allocation.as_ref().ok_or(ConfigError::MissingAllocation)?;
                if a.budget_fraction.is_empty() == a.alpha_bar.is_empty() {
                    return Err(ConfigError::AllocationTarget);
                }
                if a.chi_lower.is_empty() {
                    return Err(ConfigError::EmptySweep("allocation.chi_lower"));
                }
                if a.pi_lower.is_empty() {
                    return Err(ConfigError::EmptySweep("allocation.pi_lower"));
                }
                check("allocation.p", a.p, a.p > 0.0 && a.p.is_finite())?;
                check("allocation.q", a.q, a.q > 0.0 && a.q.is_finite())?;
                for &x in a.chi_lower.iter().chain(&a.pi_lower) {
                    check("allocation lower bound", x, x > 0.0 && x <= 1.0)?;
                }
                for &f in &a.budget_fraction {
                    check("allocation.budget_fraction", f, f >= 0.0 && f.is_finite())?;
                }
                for &x in &a.alpha_bar {
                    check("allocation.alpha_bar", x, x.is_finite())?;
                }
            }
            _ => {}
        }
        self.model.network(self.seed)?;
        Ok(())
    }
}
