use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::baselines::{InjectionConfig, InjectionKind};
use crate::error::{ModShiftError, Result};
use crate::shift::{validate_gamma, SchemeKind};

/// Generating weights: the ramp `[1, 2, …, d]` or an explicit vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum WStarSpec {
    Named(String),
    Custom(Vec<f64>),
}

impl Default for WStarSpec {
    fn default() -> Self {
        WStarSpec::Named("ramp".into())
    }
}

/// A single flat JSON document. Defaults reproduce the reference setup:
/// 100 agents with 1000 samples each, `d = 60`, ramp weights, label noise
/// 0.1, channel noise variance 0.1, `η = 0.005`, 10 local epochs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub d: usize,
    #[serde(alias = "K")]
    pub agents: usize,
    #[serde(alias = "m_k")]
    pub samples_per_agent: usize,
    pub w_star: WStarSpec,
    pub label_noise_std: f64,
    /// Effective per-entry noise variance `σ²/h²` on every link.
    pub channel_noise_var: f64,
    /// Overrides `channel_noise_var` on Eve's links.
    pub eve_channel_noise_var: Option<f64>,
    pub eta: f64,
    #[serde(alias = "R")]
    pub local_epochs: usize,
    #[serde(alias = "N")]
    pub rounds: usize,
    pub scheme: SchemeKind,
    pub custom_gamma: Option<Vec<f64>>,
    /// With `scheme = "custom"`: every agent draws its own fixed random valid `γ`.
    pub random_agent_gammas: bool,
    #[serde(rename = "baseline.kind")]
    pub baseline_kind: Option<InjectionKind>,
    #[serde(rename = "baseline.beta_sq")]
    pub baseline_beta_sq: Option<f64>,
    #[serde(rename = "baseline.lambda_sq")]
    pub baseline_lambda_sq: Option<f64>,
    pub master_seed: u64,
    /// Std of a per-agent perturbation of the generating weights (0 = IID).
    pub heterogeneity: f64,
    pub trace_path: Option<String>,
    pub summary_path: Option<String>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            d: 60,
            agents: 100,
            samples_per_agent: 1000,
            w_star: WStarSpec::default(),
            label_noise_std: 0.1,
            channel_noise_var: 0.1,
            eve_channel_noise_var: None,
            eta: 0.005,
            local_epochs: 10,
            rounds: 200,
            scheme: SchemeKind::Max,
            custom_gamma: None,
            random_agent_gammas: false,
            baseline_kind: None,
            baseline_beta_sq: None,
            baseline_lambda_sq: None,
            master_seed: 1,
            heterogeneity: 0.0,
            trace_path: None,
            summary_path: None,
        }
    }
}

impl ExperimentConfig {
    pub fn from_json_str(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json_str(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn eve_noise_var(&self) -> f64 {
        self.eve_channel_noise_var.unwrap_or(self.channel_noise_var)
    }

    pub fn noiseless(&self) -> bool {
        self.channel_noise_var == 0.0 && self.eve_noise_var() == 0.0
    }

    pub fn w_star(&self) -> Result<Vec<f64>> {
        match &self.w_star {
            WStarSpec::Named(name) if name == "ramp" => Ok((1..=self.d).map(|i| i as f64).collect()),
            WStarSpec::Named(other) => Err(ModShiftError::Config(format!(
                "unknown w_star '{other}', expected \"ramp\" or a vector"
            ))),
            WStarSpec::Custom(v) if v.len() == self.d => Ok(v.clone()),
            WStarSpec::Custom(v) => Err(ModShiftError::DimensionMismatch {
                expected: self.d,
                found: v.len(),
            }),
        }
    }

    /// The injection baseline, if one is configured.
    pub fn baseline(&self) -> Result<Option<InjectionConfig>> {
        let Some(kind) = self.baseline_kind else {
            if self.baseline_beta_sq.is_some() || self.baseline_lambda_sq.is_some() {
                return Err(ModShiftError::Config(
                    "baseline parameters given without baseline.kind".into(),
                ));
            }
            return Ok(None);
        };
        let cfg = match kind {
            InjectionKind::Gaussian => {
                let beta_sq = self.baseline_beta_sq.ok_or_else(|| {
                    ModShiftError::Config("gaussian baseline needs baseline.beta_sq".into())
                })?;
                InjectionConfig::gaussian(beta_sq)?
            }
            InjectionKind::Laplace => {
                let lambda_sq = self.baseline_lambda_sq.ok_or_else(|| {
                    ModShiftError::Config("laplace baseline needs baseline.lambda_sq".into())
                })?;
                InjectionConfig::laplace_from_sq(lambda_sq)?
            }
        };
        Ok(Some(cfg))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(ModShiftError::Config(msg.into()));
        if self.d < 2 {
            return bad("d must be >= 2");
        }
        if self.agents == 0 || self.samples_per_agent == 0 {
            return bad("agents and samples_per_agent must be positive");
        }
        if !(self.eta > 0.0) || !self.eta.is_finite() {
            return bad("eta must be positive");
        }
        if self.local_epochs == 0 || self.rounds == 0 {
            return bad("local_epochs and rounds must be positive");
        }
        if !(self.label_noise_std >= 0.0) || !(self.heterogeneity >= 0.0) {
            return bad("label_noise_std and heterogeneity must be >= 0");
        }
        if !(self.channel_noise_var >= 0.0) || !(self.eve_noise_var() >= 0.0) {
            return bad("channel noise variances must be >= 0");
        }
        let w = self.w_star()?;
        if w.iter().any(|x| !x.is_finite()) {
            return bad("w_star has non-finite entries");
        }
        let baseline = self.baseline()?;
        if baseline.is_some() && self.scheme != SchemeKind::None {
            return bad("a run uses one privacy mechanism: set scheme to \"none\" when a baseline is configured");
        }
        match self.scheme {
            SchemeKind::Custom => {
                match (&self.custom_gamma, self.random_agent_gammas) {
                    (Some(_), true) => return bad("custom_gamma and random_agent_gammas are exclusive"),
                    (None, false) => return bad("custom scheme needs custom_gamma or random_agent_gammas"),
                    (Some(g), false) => {
                        if g.len() != self.d {
                            return Err(ModShiftError::DimensionMismatch {
                                expected: self.d,
                                found: g.len(),
                            });
                        }
                        if !validate_gamma(g) {
                            return Err(ModShiftError::ConstraintViolation {
                                sum: g.iter().sum(),
                            });
                        }
                    }
                    (None, true) => {}
                }
            }
            _ => {
                if self.custom_gamma.is_some() || self.random_agent_gammas {
                    return bad("custom_gamma / random_agent_gammas require scheme \"custom\"");
                }
            }
        }
        Ok(())
    }

    /// Short label of the privacy mechanism, e.g. `max` or `gaussian_1`.
    pub fn mechanism_label(&self) -> String {
        match (self.baseline_kind, self.scheme) {
            (Some(InjectionKind::Gaussian), _) => {
                format!("gaussian_{}", self.baseline_beta_sq.unwrap_or(f64::NAN))
            }
            (Some(InjectionKind::Laplace), _) => {
                format!("laplace_{}", self.baseline_lambda_sq.unwrap_or(f64::NAN))
            }
            (None, SchemeKind::Custom) if self.random_agent_gammas => "custom_per_agent".into(),
            (None, kind) => kind.name().into(),
        }
    }
}
