//! Gumbel-Max structural causal model of a single thinning decision.
//!
//! A candidate event at time `t` is accepted when
//! `argmax_x log p(x | lambda) + U_x` is 1, with `p(1 | lambda) = lambda / lambda_max`
//! and `U_0, U_1` i.i.d. standard Gumbel. Counterfactuals condition the noise on
//! the factual decision and replay the argmax under a different intensity.

use serde::{Deserialize, Serialize};

use crate::error::{check_positive, invalid, Error, Result};
use crate::randomness::Stream;

/// Relative slack tolerated when comparing an intensity against `lambda_max`.
pub const BOUND_SLACK: f64 = 1e-12;

/// Default number of posterior noise samples in Monte-Carlo mode.
pub const DEFAULT_CF_NOISE_SAMPLES: usize = 100;

/// How counterfactual acceptance probabilities are obtained.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase")]
pub enum CfMode {
    /// Closed-form posterior probability.
    #[default]
    Exact,
    /// Average of `samples` abducted-noise argmax indicators.
    MonteCarlo { samples: usize },
}

impl CfMode {
    pub fn monte_carlo(samples: usize) -> Result<Self> {
        if samples == 0 {
            return Err(invalid("cf_noise_samples", "must be >= 1"));
        }
        Ok(CfMode::MonteCarlo { samples })
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ThinningDecision {
    pub t: f64,
    pub x_obs: bool,
    pub lambda_obs: f64,
    pub lambda_max: f64,
}

impl ThinningDecision {
    pub fn new(t: f64, x_obs: bool, lambda_obs: f64, lambda_max: f64) -> Result<Self> {
        check_bounded(t, lambda_obs, lambda_max)?;
        Ok(Self {
            t,
            x_obs,
            lambda_obs,
            lambda_max,
        })
    }
}

/// Gumbel noise for outcomes 0 and 1.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PosteriorNoise {
    pub u0: f64,
    pub u1: f64,
}

impl PosteriorNoise {
    /// Decision the noise induces under intensity `lambda`; ties go to 1.
    pub fn argmax(&self, lambda: f64, lambda_max: f64) -> bool {
        let [l0, l1] = log_probs(clamped_ratio(lambda, lambda_max));
        l1 + self.u1 >= l0 + self.u0
    }
}

fn check_bounded(t: f64, lambda: f64, lambda_max: f64) -> Result<()> {
    check_positive("lambda_max", lambda_max)?;
    if !(lambda >= 0.0) {
        return Err(invalid("lambda", format!("must be >= 0, got {lambda}")));
    }
    if lambda > lambda_max * (1.0 + BOUND_SLACK) {
        return Err(Error::DominatingRateViolated {
            t,
            intensity: lambda,
            lambda_max,
        });
    }
    Ok(())
}

fn clamped_ratio(lambda: f64, lambda_max: f64) -> f64 {
    (lambda / lambda_max).clamp(0.0, 1.0)
}

/// `[log p(X=0), log p(X=1)]`, with `log 0 = -inf`.
fn log_probs(p: f64) -> [f64; 2] {
    [(1.0 - p).ln(), p.ln()]
}

pub fn thinning_prob(lambda: f64, lambda_max: f64) -> Result<f64> {
    check_bounded(f64::NAN, lambda, lambda_max)?;
    Ok(clamped_ratio(lambda, lambda_max))
}

/// Draws a fresh Gumbel pair and returns the factual accept decision.
pub fn sample_factual(lambda: f64, lambda_max: f64, stream: &mut Stream) -> Result<bool> {
    check_bounded(f64::NAN, lambda, lambda_max)?;
    let noise = PosteriorNoise {
        u0: stream.gumbel(),
        u1: stream.gumbel(),
    };
    Ok(noise.argmax(lambda, lambda_max))
}

fn check_possible(x_obs: bool, lambda_obs: f64, lambda_max: f64) -> Result<()> {
    let p = clamped_ratio(lambda_obs, lambda_max);
    let impossible = if x_obs { p == 0.0 } else { p == 1.0 };
    if impossible {
        Err(Error::ImpossibleObservation {
            x_obs,
            lambda_obs,
            lambda_max,
        })
    } else {
        Ok(())
    }
}

/// Samples the Gumbel noise from its posterior given the factual decision.
///
/// Top-down construction: the maximum of the two perturbed scores is a
/// Gumbel with location `log(p + (1 - p)) = 0`; the observed outcome takes
/// that maximum and the other outcome is a Gumbel truncated above at it.
pub fn abduct_noise(decision: &ThinningDecision, stream: &mut Stream) -> Result<PosteriorNoise> {
    let ThinningDecision {
        x_obs,
        lambda_obs,
        lambda_max,
        ..
    } = *decision;
    check_possible(x_obs, lambda_obs, lambda_max)?;
    let logp = log_probs(clamped_ratio(lambda_obs, lambda_max));
    let (obs, other) = if x_obs { (1, 0) } else { (0, 1) };

    let top = stream.gumbel();
    let u_obs = top - logp[obs];
    let u_other = if logp[other] == f64::NEG_INFINITY {
        // Outcome has no mass under the factual intensity, so the
        // observation carries no information about its noise.
        stream.gumbel()
    } else {
        let phi = logp[other];
        let u = stream.uniform();
        // truncated Gumbel(phi) below `top`, minus its location
        -((-(top - phi)).exp() - u.ln()).ln()
    };

    let mut noise = if x_obs {
        PosteriorNoise { u0: u_other, u1: u_obs }
    } else {
        PosteriorNoise { u0: u_obs, u1: u_other }
    };
    // Rounding can leave the truncated score level with the maximum.
    while noise.argmax(lambda_obs, lambda_max) != x_obs {
        if x_obs {
            noise.u0 = noise.u0.next_down();
        } else {
            noise.u1 = noise.u1.next_down();
        }
    }
    Ok(noise)
}

/// Closed-form `P(X' = 1 | X = x_obs, lambda_obs; do(lambda_cf))`.
pub fn counterfactual_prob_exact(x_obs: bool, lambda_obs: f64, lambda_cf: f64, lambda_max: f64) -> Result<f64> {
    check_bounded(f64::NAN, lambda_obs, lambda_max)?;
    check_bounded(f64::NAN, lambda_cf, lambda_max)?;
    let (obs, cf, max) = (lambda_obs.min(lambda_max), lambda_cf.min(lambda_max), lambda_max);
    Ok(if x_obs {
        if cf >= obs {
            1.0
        } else {
            cf / obs
        }
    } else if cf <= obs {
        0.0
    } else {
        (cf - obs) / (max - obs)
    })
}

/// Monte-Carlo estimate of the counterfactual acceptance probability from
/// `samples` abducted noise draws.
pub fn counterfactual_prob_montecarlo(
    x_obs: bool,
    lambda_obs: f64,
    lambda_cf: f64,
    lambda_max: f64,
    samples: usize,
    stream: &mut Stream,
) -> Result<f64> {
    check_bounded(f64::NAN, lambda_cf, lambda_max)?;
    if samples == 0 {
        return Err(invalid("samples", "must be >= 1"));
    }
    let decision = ThinningDecision::new(f64::NAN, x_obs, lambda_obs, lambda_max)?;
    let mut hits = 0usize;
    for _ in 0..samples {
        if abduct_noise(&decision, stream)?.argmax(lambda_cf, lambda_max) {
            hits += 1;
        }
    }
    Ok(hits as f64 / samples as f64)
}

/// Samples the counterfactual decision for one candidate event.
pub fn counterfactual_sample(
    x_obs: bool,
    lambda_obs: f64,
    lambda_cf: f64,
    lambda_max: f64,
    mode: CfMode,
    stream: &mut Stream,
) -> Result<bool> {
    check_bounded(f64::NAN, lambda_obs, lambda_max)?;
    check_bounded(f64::NAN, lambda_cf, lambda_max)?;
    check_possible(x_obs, lambda_obs, lambda_max)?;
    let p = match mode {
        CfMode::Exact => counterfactual_prob_exact(x_obs, lambda_obs, lambda_cf, lambda_max)?,
        CfMode::MonteCarlo { samples } => {
            counterfactual_prob_montecarlo(x_obs, lambda_obs, lambda_cf, lambda_max, samples, stream)?
        }
    };
    Ok(stream.bernoulli(p))
}
