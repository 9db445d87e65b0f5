//! Declarative scenario descriptions.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{check_nonneg, check_positive, invalid, Error, Result};
use crate::gumbel_scm::CfMode;
use crate::hawkes::DEFAULT_EVENT_CAP;
use crate::intensity::IntensityConfig;
use crate::sir::{default_seeds, EdgeNoise, Intervention, SbmProbabilities, SeedSpec, SirParams};

pub const DEFAULT_GRID_POINTS: usize = 200;
pub const DEFAULT_BOOTSTRAP_RESAMPLES: usize = 1000;
pub const DEFAULT_SIGMA: f64 = 0.5;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default)]
    pub name: String,
    pub seed: u64,
    pub horizon: f64,
    pub n_observed: usize,
    pub n_counterfactual: usize,
    pub process: ProcessConfig,
    pub intervention: InterventionSpec,
    #[serde(default)]
    pub grouping: Grouping,
    /// Counts used for grouping and group means are taken in this window;
    /// `[0, horizon]` when absent.
    #[serde(default)]
    pub window: Option<[f64; 2]>,
    #[serde(default = "default_grid_points")]
    pub grid_points: usize,
    #[serde(default = "default_bootstrap")]
    pub bootstrap_resamples: usize,
    /// Posterior noise samples per thinning decision; exact probabilities
    /// when absent.
    #[serde(default)]
    pub cf_noise_samples: Option<usize>,
    /// Draw a new intervention noise per factual realization instead of one
    /// per scenario.
    #[serde(default)]
    pub epsilon_per_realization: bool,
    /// Counterfactual replicates per realization written to `raw_events/`.
    #[serde(default = "default_raw_replicates")]
    pub raw_replicates: usize,
}

fn default_grid_points() -> usize {
    DEFAULT_GRID_POINTS
}

fn default_bootstrap() -> usize {
    DEFAULT_BOOTSTRAP_RESAMPLES
}

fn default_raw_replicates() -> usize {
    1
}

fn default_sigma() -> f64 {
    DEFAULT_SIGMA
}

fn default_cap() -> usize {
    DEFAULT_EVENT_CAP
}

fn default_beta() -> f64 {
    SirParams::default().beta
}

fn default_delta() -> f64 {
    SirParams::default().delta
}

fn default_seed_specs() -> Vec<SeedSpec> {
    default_seeds()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProcessConfig {
    Poisson {
        intensity: IntensityConfig,
        /// Dominating rate; the larger of both intensity bounds when absent.
        #[serde(default)]
        lambda_max: Option<f64>,
        #[serde(default)]
        share_rejections: bool,
    },
    Hawkes {
        mu: f64,
        alpha: f64,
        omega: f64,
        #[serde(default)]
        lambda_max: Option<f64>,
        #[serde(default = "default_cap")]
        event_cap: usize,
    },
    Sir {
        /// Geography file; the bundled one when absent. Relative paths are
        /// resolved against the config file.
        #[serde(default)]
        geography: Option<PathBuf>,
        #[serde(default)]
        probs: Option<SbmProbabilities>,
        #[serde(default = "default_beta")]
        beta: f64,
        #[serde(default = "default_delta")]
        delta: f64,
        #[serde(default = "default_seed_specs")]
        seeds: Vec<SeedSpec>,
        /// Network stream seed; the scenario seed when absent.
        #[serde(default)]
        network_seed: Option<u64>,
        #[serde(default)]
        edge_noise: EdgeNoise,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InterventionSpec {
    Identity,
    /// Explicit counterfactual process of the same kind as the factual one.
    Intensity {
        intensity: IntensityConfig,
    },
    /// `phi_i -> max(phi_i + eps, 0)` for one RBF component, `eps ~ N(0, sigma)`
    /// unless `shift` fixes it. The component is drawn uniformly unless given.
    AmplitudeShift {
        #[serde(default = "default_sigma")]
        sigma: f64,
        #[serde(default)]
        shift: Option<f64>,
        #[serde(default)]
        component: Option<usize>,
    },
    /// `alpha -> max(alpha + eps, 0)`, `eps ~ N(0, sigma)` unless `shift` fixes it.
    AlphaShift {
        #[serde(default = "default_sigma")]
        sigma: f64,
        #[serde(default)]
        shift: Option<f64>,
    },
    Sir {
        intervention: Intervention,
    },
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Grouping {
    /// Empirical 1/3 and 2/3 quantiles of the observed counts, right-closed.
    #[default]
    Tercile,
    /// Right-closed bins `(-inf, u_0], (u_0, u_1], ..., (u_k, inf)`.
    Bins { upper: Vec<usize> },
}

impl ScenarioConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let c: Self = serde_json::from_str(text)?;
        c.validate()?;
        Ok(c)
    }

    /// Reads a config and resolves relative file references against its
    /// directory.
    pub fn from_file(path: &Path) -> Result<Self> {
        let mut c = Self::from_json(&std::fs::read_to_string(path)?)?;
        if let ProcessConfig::Sir { geography: Some(g), .. } = &mut c.process {
            if g.is_relative() {
                if let Some(dir) = path.parent() {
                    *g = dir.join(&*g);
                }
            }
        }
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        check_positive("horizon", self.horizon)?;
        if self.n_observed == 0 {
            return Err(invalid("n_observed", "must be >= 1"));
        }
        if self.n_counterfactual == 0 {
            return Err(invalid("n_counterfactual", "must be >= 1"));
        }
        if self.grid_points < 2 {
            return Err(invalid("grid_points", "must be >= 2"));
        }
        if self.cf_noise_samples == Some(0) {
            return Err(invalid("cf_noise_samples", "must be >= 1"));
        }
        if let Some([a, b]) = self.window {
            if !(0.0 <= a && a < b && b <= self.horizon) {
                return Err(invalid("window", "must satisfy 0 <= start < end <= horizon"));
            }
        }
        if let Grouping::Bins { upper } = &self.grouping {
            if upper.windows(2).any(|w| w[0] >= w[1]) {
                return Err(invalid("grouping", "bin bounds must be strictly increasing"));
            }
        }
        let kind_mismatch = |what: &str| Err(Error::Config(format!("{what} does not apply to this process")));
        match (&self.process, &self.intervention) {
            (_, InterventionSpec::Identity) => {}
            (ProcessConfig::Poisson { .. }, InterventionSpec::Intensity { intensity }) => {
                intensity.to_poisson()?;
            }
            (ProcessConfig::Hawkes { .. }, InterventionSpec::Intensity { intensity }) => {
                intensity.to_hawkes()?;
            }
            (ProcessConfig::Poisson { intensity, .. }, InterventionSpec::AmplitudeShift { sigma, component, .. }) => {
                check_nonneg("sigma", *sigma)?;
                match (intensity, component) {
                    (IntensityConfig::Rbf { components, .. }, Some(i)) if *i >= components.len() => {
                        return Err(invalid("component", format!("index {i} out of range")));
                    }
                    (IntensityConfig::Rbf { components, .. }, _) if components.is_empty() => {
                        return Err(invalid("components", "amplitude shift needs at least one"));
                    }
                    (IntensityConfig::Rbf { .. }, _) => {}
                    _ => return kind_mismatch("amplitude_shift"),
                }
            }
            (ProcessConfig::Hawkes { .. }, InterventionSpec::AlphaShift { sigma, .. }) => {
                check_nonneg("sigma", *sigma)?;
            }
            (ProcessConfig::Sir { .. }, InterventionSpec::Sir { intervention }) => {
                intervention.validate()?;
            }
            (_, other) => {
                let name = match other {
                    InterventionSpec::Intensity { .. } => "intensity",
                    InterventionSpec::AmplitudeShift { .. } => "amplitude_shift",
                    InterventionSpec::AlphaShift { .. } => "alpha_shift",
                    _ => "sir",
                };
                return kind_mismatch(name);
            }
        }
        match &self.process {
            ProcessConfig::Poisson {
                intensity, lambda_max, ..
            } => {
                intensity.to_poisson()?;
                if let Some(l) = lambda_max {
                    check_positive("lambda_max", *l)?;
                }
            }
            ProcessConfig::Hawkes {
                mu,
                alpha,
                omega,
                lambda_max,
                event_cap,
            } => {
                crate::intensity::HawkesParams::new(*mu, *alpha, *omega)?;
                if let Some(l) = lambda_max {
                    check_positive("lambda_max", *l)?;
                }
                if *event_cap == 0 {
                    return Err(invalid("event_cap", "must be >= 1"));
                }
            }
            ProcessConfig::Sir {
                probs,
                beta,
                delta,
                seeds,
                ..
            } => {
                SirParams::new(*beta, *delta)?;
                if let Some(p) = probs {
                    p.validate()?;
                }
                if seeds.iter().all(|s| s.count == 0) {
                    return Err(Error::EmptyInput("seeds"));
                }
            }
        }
        Ok(())
    }

    pub fn cf_mode(&self) -> CfMode {
        match self.cf_noise_samples {
            Some(samples) => CfMode::MonteCarlo { samples },
            None => CfMode::Exact,
        }
    }

    pub fn window(&self) -> [f64; 2] {
        self.window.unwrap_or([0.0, self.horizon])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_hawkes_scenario_with_defaults() {
        let text = r#"{
            "seed": 1, "horizon": 5, "n_observed": 10, "n_counterfactual": 2,
            "process": {"kind": "hawkes", "mu": 1, "alpha": 1, "omega": 1},
            "intervention": {"kind": "intensity", "intensity": {"kind": "hawkes", "mu": 1, "alpha": 1.44, "omega": 1}}
        }"#;
        let c = ScenarioConfig::from_json(text).unwrap();
        assert_eq!(c.grouping, Grouping::Tercile);
        assert_eq!(c.grid_points, 200);
        assert_eq!(c.cf_mode(), CfMode::Exact);
        assert_eq!(c.window(), [0.0, 5.0]);
    }

    #[test]
    fn rejects_mismatched_intervention() {
        let text = r#"{
            "seed": 1, "horizon": 5, "n_observed": 10, "n_counterfactual": 2,
            "process": {"kind": "hawkes", "mu": 1, "alpha": 1, "omega": 1},
            "intervention": {"kind": "amplitude_shift"}
        }"#;
        assert!(ScenarioConfig::from_json(text).is_err());
        let text = text.replace(r#""n_observed": 10"#, r#""n_observed": 0"#);
        assert!(ScenarioConfig::from_json(&text).is_err());
    }

    #[test]
    fn unknown_fields_are_errors() {
        let text = r#"{
            "seed": 1, "horizon": 5, "n_observed": 10, "n_counterfactual": 2, "typo": 3,
            "process": {"kind": "hawkes", "mu": 1, "alpha": 1, "omega": 1},
            "intervention": {"kind": "identity"}
        }"#;
        assert!(ScenarioConfig::from_json(text).is_err());
    }
}
