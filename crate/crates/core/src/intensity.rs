//! Intensity functions consumed by the thinning samplers.

use serde::{Deserialize, Serialize};

use crate::error::{check_nonneg, check_positive, invalid, Error, Result};

/// A deterministic rate function on `[0, T]` with a computable constant bound.
pub trait Intensity: Send + Sync {
    fn evaluate(&self, t: f64) -> f64;

    /// A constant that dominates `evaluate` on `[0, horizon]`.
    fn upper_bound(&self, horizon: f64) -> Result<f64>;
}

impl<I: Intensity + ?Sized> Intensity for &I {
    fn evaluate(&self, t: f64) -> f64 {
        (**self).evaluate(t)
    }
    fn upper_bound(&self, horizon: f64) -> Result<f64> {
        (**self).upper_bound(horizon)
    }
}

fn check_horizon(horizon: f64) -> Result<()> {
    check_positive("horizon", horizon)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConstantIntensity {
    rate: f64,
}

impl ConstantIntensity {
    pub fn new(rate: f64) -> Result<Self> {
        check_nonneg("rate", rate)?;
        Ok(Self { rate })
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }
}

impl Intensity for ConstantIntensity {
    fn evaluate(&self, _t: f64) -> f64 {
        self.rate
    }
    fn upper_bound(&self, horizon: f64) -> Result<f64> {
        check_horizon(horizon)?;
        Ok(self.rate)
    }
}

/// Shape of each RBF component.
///
/// `Gaussian` is `phi * exp(-alpha * (t - tau)^2)`. `Literal` is the one-sided
/// `phi * exp(-alpha * (t - tau))`, which peaks at `t = 0` on the positive axis.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RbfForm {
    #[default]
    Gaussian,
    Literal,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RbfComponent {
    pub phi: f64,
    pub alpha: f64,
    pub tau: f64,
}

impl RbfComponent {
    fn validate(&self) -> Result<()> {
        check_nonneg("phi", self.phi)?;
        check_nonneg("alpha", self.alpha)?;
        check_nonneg("tau", self.tau)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RbfMixtureIntensity {
    components: Vec<RbfComponent>,
    #[serde(default)]
    form: RbfForm,
}

impl RbfMixtureIntensity {
    pub fn new(components: Vec<RbfComponent>, form: RbfForm) -> Result<Self> {
        for c in &components {
            c.validate()?;
        }
        Ok(Self { components, form })
    }

    pub fn gaussian(components: Vec<RbfComponent>) -> Result<Self> {
        Self::new(components, RbfForm::Gaussian)
    }

    pub fn components(&self) -> &[RbfComponent] {
        &self.components
    }

    pub fn form(&self) -> RbfForm {
        self.form
    }

    /// Copy with component `index` amplitude replaced by `max(phi + shift, 0)`.
    pub fn with_amplitude_shift(&self, index: usize, shift: f64) -> Result<Self> {
        let mut components = self.components.clone();
        let c = components
            .get_mut(index)
            .ok_or_else(|| invalid("component", format!("index {index} out of range")))?;
        c.phi = (c.phi + shift).max(0.0);
        Self::new(components, self.form)
    }
}

impl Intensity for RbfMixtureIntensity {
    fn evaluate(&self, t: f64) -> f64 {
        self.components
            .iter()
            .map(|c| {
                let d = t - c.tau;
                match self.form {
                    RbfForm::Gaussian => c.phi * (-c.alpha * d * d).exp(),
                    RbfForm::Literal => c.phi * (-c.alpha * d).exp(),
                }
            })
            .sum()
    }

    fn upper_bound(&self, horizon: f64) -> Result<f64> {
        check_horizon(horizon)?;
        let bound: f64 = match self.form {
            RbfForm::Gaussian => self.components.iter().map(|c| c.phi).sum(),
            // Decreasing in t, so the maximum on [0, T] sits at t = 0.
            RbfForm::Literal => self.components.iter().map(|c| c.phi * (c.alpha * c.tau).exp()).sum(),
        };
        if bound.is_finite() {
            Ok(bound)
        } else {
            Err(Error::Unbounded { horizon })
        }
    }
}

/// Parameters of a linear Hawkes process with kernel `g(t) = exp(-omega t)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HawkesParams {
    pub mu: f64,
    pub alpha: f64,
    pub omega: f64,
}

impl HawkesParams {
    pub fn new(mu: f64, alpha: f64, omega: f64) -> Result<Self> {
        let p = Self { mu, alpha, omega };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        check_nonneg("mu", self.mu)?;
        check_nonneg("alpha", self.alpha)?;
        check_positive("omega", self.omega)
    }

    pub fn kernel(&self, dt: f64) -> f64 {
        if dt < 0.0 {
            0.0
        } else {
            (-self.omega * dt).exp()
        }
    }

    pub fn branching_ratio(&self) -> f64 {
        self.alpha / self.omega
    }

    /// Smallest dominating rate valid for every branch of this process.
    pub fn branch_bound(&self) -> f64 {
        self.mu.max(self.alpha)
    }
}

/// One component of the Hawkes superposition: the background process or
/// the offspring process of a single event.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum BranchKernel {
    Background { mu: f64 },
    Offspring { parent_time: f64, alpha: f64, omega: f64 },
}

impl BranchKernel {
    pub fn background(params: &HawkesParams) -> Self {
        BranchKernel::Background { mu: params.mu }
    }

    pub fn offspring(params: &HawkesParams, parent_time: f64) -> Self {
        BranchKernel::Offspring {
            parent_time,
            alpha: params.alpha,
            omega: params.omega,
        }
    }

    /// Start of the kernel's support.
    pub fn onset(&self) -> f64 {
        match *self {
            BranchKernel::Background { .. } => 0.0,
            BranchKernel::Offspring { parent_time, .. } => parent_time,
        }
    }
}

impl Intensity for BranchKernel {
    fn evaluate(&self, t: f64) -> f64 {
        match *self {
            BranchKernel::Background { mu } => mu,
            BranchKernel::Offspring {
                parent_time,
                alpha,
                omega,
            } => {
                if t < parent_time {
                    0.0
                } else {
                    alpha * (-omega * (t - parent_time)).exp()
                }
            }
        }
    }

    fn upper_bound(&self, horizon: f64) -> Result<f64> {
        check_horizon(horizon)?;
        Ok(match *self {
            BranchKernel::Background { mu } => mu,
            BranchKernel::Offspring { alpha, .. } => alpha,
        })
    }
}

/// `mu + alpha * sum_{t_i < t} exp(-omega (t - t_i))`.
pub fn hawkes_total_intensity(params: &HawkesParams, history: &[f64], t: f64) -> Result<f64> {
    if let Some(index) = history.windows(2).position(|w| !(w[0] <= w[1])) {
        return Err(Error::InvalidSequence {
            index: index + 1,
            horizon: f64::INFINITY,
        });
    }
    let excitation: f64 = history
        .iter()
        .take_while(|&&ti| ti < t)
        .map(|&ti| params.kernel(t - ti))
        .sum();
    Ok(params.mu + params.alpha * excitation)
}

/// Per-edge transmission kernel: `beta` on `[start, end)`, zero elsewhere.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SirEdgeKernel {
    pub beta: f64,
    pub infectious_start: f64,
    pub infectious_end: f64,
}

impl SirEdgeKernel {
    pub fn new(beta: f64, infectious_start: f64, infectious_end: f64) -> Result<Self> {
        check_nonneg("beta", beta)?;
        Ok(Self {
            beta,
            infectious_start,
            infectious_end,
        })
    }

    pub fn silent() -> Self {
        Self {
            beta: 0.0,
            infectious_start: f64::INFINITY,
            infectious_end: f64::INFINITY,
        }
    }
}

impl Intensity for SirEdgeKernel {
    fn evaluate(&self, t: f64) -> f64 {
        if t >= self.infectious_start && t < self.infectious_end {
            self.beta
        } else {
            0.0
        }
    }
    fn upper_bound(&self, horizon: f64) -> Result<f64> {
        check_horizon(horizon)?;
        Ok(self.beta)
    }
}

/// Deterministic intensities accepted by the Poisson samplers.
#[derive(Clone, Debug, PartialEq)]
pub enum PoissonIntensity {
    Constant(ConstantIntensity),
    Rbf(RbfMixtureIntensity),
}

impl Intensity for PoissonIntensity {
    fn evaluate(&self, t: f64) -> f64 {
        match self {
            PoissonIntensity::Constant(c) => c.evaluate(t),
            PoissonIntensity::Rbf(r) => r.evaluate(t),
        }
    }
    fn upper_bound(&self, horizon: f64) -> Result<f64> {
        match self {
            PoissonIntensity::Constant(c) => c.upper_bound(horizon),
            PoissonIntensity::Rbf(r) => r.upper_bound(horizon),
        }
    }
}

/// JSON process description, tagged by `kind`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum IntensityConfig {
    Constant {
        rate: f64,
    },
    Rbf {
        components: Vec<RbfComponent>,
        #[serde(default)]
        rbf_form: RbfForm,
    },
    Hawkes {
        mu: f64,
        alpha: f64,
        omega: f64,
    },
}

impl IntensityConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let config: Self = serde_json::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            IntensityConfig::Constant { rate } => check_nonneg("rate", *rate),
            IntensityConfig::Rbf { components, .. } => components.iter().try_for_each(RbfComponent::validate),
            IntensityConfig::Hawkes { mu, alpha, omega } => HawkesParams::new(*mu, *alpha, *omega).map(|_| ()),
        }
    }

    pub fn to_poisson(&self) -> Result<PoissonIntensity> {
        match self {
            IntensityConfig::Constant { rate } => Ok(PoissonIntensity::Constant(ConstantIntensity::new(*rate)?)),
            IntensityConfig::Rbf { components, rbf_form } => Ok(PoissonIntensity::Rbf(RbfMixtureIntensity::new(
                components.clone(),
                *rbf_form,
            )?)),
            IntensityConfig::Hawkes { .. } => Err(Error::Config(
                "a hawkes process has a stochastic intensity; expected `constant` or `rbf`".into(),
            )),
        }
    }

    pub fn to_hawkes(&self) -> Result<HawkesParams> {
        match self {
            IntensityConfig::Hawkes { mu, alpha, omega } => HawkesParams::new(*mu, *alpha, *omega),
            _ => Err(Error::Config("expected a `hawkes` process".into())),
        }
    }
}

impl From<&PoissonIntensity> for IntensityConfig {
    fn from(p: &PoissonIntensity) -> Self {
        match p {
            PoissonIntensity::Constant(c) => IntensityConfig::Constant { rate: c.rate() },
            PoissonIntensity::Rbf(r) => IntensityConfig::Rbf {
                components: r.components().to_vec(),
                rbf_form: r.form(),
            },
        }
    }
}

impl From<HawkesParams> for IntensityConfig {
    fn from(p: HawkesParams) -> Self {
        IntensityConfig::Hawkes {
            mu: p.mu,
            alpha: p.alpha,
            omega: p.omega,
        }
    }
}
