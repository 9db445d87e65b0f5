//! Counterfactuals of inhomogeneous Poisson processes from observed events.
//!
//! The factual thinning trace is unknown for real observations, so plausible
//! rejected candidates are resampled from the complementary rate
//! `lambda_max - lambda_m(t)` and merged with the observed events before the
//! counterfactual acceptance pass.

use rayon::prelude::*;

use crate::error::{check_positive, Error, Result};
use crate::gumbel_scm::CfMode;
use crate::intensity::Intensity;
use crate::randomness::{stage, Label, Stream, StreamKey};
use crate::thinning::{acceptance_pass, lewis_sample_window, merge_candidates, EventSequence};

/// One event of a counterfactual branch. `observed` is the index of the
/// injected observation it replays, if any.
#[derive(Clone, Copy, Debug, PartialEq)]
pub(crate) struct BranchEvent {
    pub time: f64,
    pub observed: Option<usize>,
}

fn check_observed(observed: &[f64], start: f64, end: f64) -> Result<()> {
    for (index, w) in observed.iter().enumerate() {
        let ordered = index == 0 || observed[index - 1] < *w;
        if !(*w >= start && *w <= end && ordered) {
            return Err(Error::InvalidSequence { index, horizon: end });
        }
    }
    Ok(())
}

/// Rejected candidates of a thinning run of `lambda_m` over `(start, end]`,
/// i.e. a Poisson draw with rate `lambda_max - lambda_m(t)`.
pub(crate) fn rejections_window<M: Intensity + ?Sized>(
    lambda_m: &M,
    lambda_max: f64,
    start: f64,
    end: f64,
    stream: &mut Stream,
) -> Result<Vec<f64>> {
    Ok(lewis_sample_window(lambda_m, lambda_max, start, end, stream)?.rejected)
}

/// Counterfactual of one superposition branch on `(start, end]` given the
/// observed events attributed to it.
#[allow(clippy::too_many_arguments)]
pub(crate) fn counterfactual_branch<M, C>(
    lambda_m: &M,
    lambda_cf: &C,
    observed: &[f64],
    rejected: &[f64],
    lambda_max: f64,
    mode: CfMode,
    stream: &mut Stream,
) -> Result<Vec<BranchEvent>>
where
    M: Intensity + ?Sized,
    C: Intensity + ?Sized,
{
    let candidates = merge_candidates(observed, rejected);
    let decisions = acceptance_pass(lambda_m, lambda_cf, &candidates, lambda_max, mode, stream)?;
    let mut next_observed = 0;
    let mut out = Vec::new();
    for (&(time, was_observed), keep) in candidates.iter().zip(decisions) {
        let observed = was_observed.then(|| {
            next_observed += 1;
            next_observed - 1
        });
        if keep {
            out.push(BranchEvent { time, observed });
        }
    }
    Ok(out)
}

/// Plausible rejected events given `observed`: a draw from the Poisson
/// process with rate `lambda_max - lambda_m(t)` on `[0, horizon]`.
pub fn sample_plausible_rejections<M: Intensity + ?Sized>(
    lambda_m: &M,
    observed: &EventSequence,
    lambda_max: f64,
    horizon: f64,
    stream: &mut Stream,
) -> Result<EventSequence> {
    check_positive("horizon", horizon)?;
    check_observed(observed.times(), 0.0, horizon)?;
    let rejected = rejections_window(lambda_m, lambda_max, 0.0, horizon, stream)?;
    EventSequence::new(rejected, horizon)
}

/// One counterfactual sequence under `lambda_cf` for events observed
/// under `lambda_m`.
pub fn counterfactual_poisson<M, C>(
    lambda_m: &M,
    lambda_cf: &C,
    observed: &EventSequence,
    lambda_max: f64,
    horizon: f64,
    mode: CfMode,
    stream: &mut Stream,
) -> Result<EventSequence>
where
    M: Intensity + ?Sized,
    C: Intensity + ?Sized,
{
    let rejected = sample_plausible_rejections(lambda_m, observed, lambda_max, horizon, stream)?;
    counterfactual_with_rejections(
        lambda_m,
        lambda_cf,
        observed,
        rejected.times(),
        lambda_max,
        horizon,
        mode,
        stream,
    )
}

#[allow(clippy::too_many_arguments)]
fn counterfactual_with_rejections<M, C>(
    lambda_m: &M,
    lambda_cf: &C,
    observed: &EventSequence,
    rejected: &[f64],
    lambda_max: f64,
    horizon: f64,
    mode: CfMode,
    stream: &mut Stream,
) -> Result<EventSequence>
where
    M: Intensity + ?Sized,
    C: Intensity + ?Sized,
{
    let events = counterfactual_branch(
        lambda_m,
        lambda_cf,
        observed.times(),
        rejected,
        lambda_max,
        mode,
        stream,
    )?;
    Ok(EventSequence::from_sorted_unchecked(
        events.into_iter().map(|e| e.time).collect(),
        horizon,
    ))
}

/// Options for batches of counterfactual replicates.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ReplicateOptions {
    pub mode: CfMode,
    /// Reuse one rejection set across replicates instead of abducting a
    /// fresh one per replicate.
    pub share_rejections: bool,
}

/// `replicates` counterfactual sequences, each on its own keyed stream.
/// Output order and values do not depend on the thread count.
#[allow(clippy::too_many_arguments)]
pub fn counterfactual_poisson_replicates<M, C>(
    lambda_m: &M,
    lambda_cf: &C,
    observed: &EventSequence,
    lambda_max: f64,
    horizon: f64,
    replicates: usize,
    options: ReplicateOptions,
    key: &StreamKey,
) -> Result<Vec<EventSequence>>
where
    M: Intensity + ?Sized,
    C: Intensity + ?Sized,
{
    let shared = if options.share_rejections {
        let mut s = key.stage(stage::REJECTIONS).stream();
        Some(sample_plausible_rejections(
            lambda_m, observed, lambda_max, horizon, &mut s,
        )?)
    } else {
        None
    };
    (0..replicates as u64)
        .into_par_iter()
        .map(|r| {
            let mut s = key.child(Label::Replicate, r).stream();
            match &shared {
                Some(rejected) => counterfactual_with_rejections(
                    lambda_m,
                    lambda_cf,
                    observed,
                    rejected.times(),
                    lambda_max,
                    horizon,
                    options.mode,
                    &mut s,
                ),
                None => {
                    counterfactual_poisson(lambda_m, lambda_cf, observed, lambda_max, horizon, options.mode, &mut s)
                }
            }
        })
        .collect()
}
