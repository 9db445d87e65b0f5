//! Lewis' thinning sampler and the counterfactual acceptance pass.

use serde::{Deserialize, Serialize};

use crate::error::{check_positive, Error, Result};
use crate::gumbel_scm::{counterfactual_sample, CfMode, BOUND_SLACK};
use crate::intensity::Intensity;
use crate::randomness::Stream;

/// Strictly increasing event times on `[0, horizon]`.
#[derive(Clone, Debug, PartialEq)]
pub struct EventSequence {
    times: Vec<f64>,
    horizon: f64,
}

impl EventSequence {
    pub fn new(times: Vec<f64>, horizon: f64) -> Result<Self> {
        check_positive("horizon", horizon)?;
        for (i, &t) in times.iter().enumerate() {
            let ordered = i == 0 || times[i - 1] < t;
            if !(t >= 0.0 && t <= horizon && ordered) {
                return Err(Error::InvalidSequence { index: i, horizon });
            }
        }
        Ok(Self { times, horizon })
    }

    pub fn empty(horizon: f64) -> Result<Self> {
        Self::new(Vec::new(), horizon)
    }

    pub(crate) fn from_sorted_unchecked(times: Vec<f64>, horizon: f64) -> Self {
        debug_assert!(times.windows(2).all(|w| w[0] < w[1]));
        Self { times, horizon }
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn into_times(self) -> Vec<f64> {
        self.times
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// `N(t)`: number of events at or before `t`.
    pub fn count_until(&self, t: f64) -> usize {
        self.times.partition_point(|&s| s <= t)
    }

    pub fn count_in(&self, start: f64, end: f64) -> usize {
        self.count_until(end) - self.times.partition_point(|&s| s < start)
    }

    pub fn contains(&self, t: f64) -> bool {
        self.times.binary_search_by(|s| s.total_cmp(&t)).is_ok()
    }

    pub fn is_subset_of(&self, other: &EventSequence) -> bool {
        self.times.iter().all(|&t| other.contains(t))
    }
}

/// Accepted and rejected candidates of one thinning run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThinningRecord {
    pub accepted: Vec<f64>,
    pub rejected: Vec<f64>,
    pub lambda_max: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizon: Option<f64>,
}

impl ThinningRecord {
    pub fn accepted_sequence(&self) -> Result<EventSequence> {
        EventSequence::new(self.accepted.clone(), self.resolved_horizon())
    }

    pub fn rejected_sequence(&self) -> Result<EventSequence> {
        EventSequence::new(self.rejected.clone(), self.resolved_horizon())
    }

    fn resolved_horizon(&self) -> f64 {
        self.horizon.unwrap_or_else(|| {
            self.accepted
                .iter()
                .chain(&self.rejected)
                .fold(f64::MIN_POSITIVE, |a, &b| a.max(b))
        })
    }

    /// All candidates in time order, flagged with their factual decision.
    pub fn candidates(&self) -> Vec<(f64, bool)> {
        merge_candidates(&self.accepted, &self.rejected)
    }
}

/// Evaluates `intensity` at `t` and checks it against `lambda_max`.
pub(crate) fn bounded_eval<I: Intensity + ?Sized>(intensity: &I, t: f64, lambda_max: f64) -> Result<f64> {
    let v = intensity.evaluate(t);
    if !(v >= 0.0) || v > lambda_max * (1.0 + BOUND_SLACK) {
        return Err(Error::DominatingRateViolated {
            t,
            intensity: v,
            lambda_max,
        });
    }
    Ok(v.min(lambda_max))
}

/// Lewis' thinning on `[0, horizon]`.
pub fn lewis_sample<I: Intensity + ?Sized>(
    intensity: &I,
    lambda_max: f64,
    horizon: f64,
    stream: &mut Stream,
) -> Result<ThinningRecord> {
    check_positive("horizon", horizon)?;
    let mut record = lewis_sample_window(intensity, lambda_max, 0.0, horizon, stream)?;
    record.horizon = Some(horizon);
    Ok(record)
}

/// Lewis' thinning restricted to candidates in `(start, end]`.
///
/// Equivalent in law to [`lewis_sample`] when the intensity vanishes
/// outside the window.
pub fn lewis_sample_window<I: Intensity + ?Sized>(
    intensity: &I,
    lambda_max: f64,
    start: f64,
    end: f64,
    stream: &mut Stream,
) -> Result<ThinningRecord> {
    let mut accepted = Vec::new();
    let mut rejected = Vec::new();
    lewis_sample_window_with(intensity, lambda_max, start, end, stream, |t, accept| {
        if accept {
            accepted.push(t);
        } else {
            rejected.push(t);
        }
        true
    })?;
    Ok(ThinningRecord {
        accepted,
        rejected,
        lambda_max,
        horizon: None,
    })
}

/// Core thinning loop. `visit` sees every candidate and may stop the
/// sampler early by returning `false`.
pub(crate) fn lewis_sample_window_with<I, F>(
    intensity: &I,
    lambda_max: f64,
    start: f64,
    end: f64,
    stream: &mut Stream,
    mut visit: F,
) -> Result<()>
where
    I: Intensity + ?Sized,
    F: FnMut(f64, bool) -> bool,
{
    check_positive("lambda_max", lambda_max)?;
    if !(end > start) {
        return Ok(());
    }
    let mut s = start;
    loop {
        s += stream.exponential(lambda_max)?;
        if s > end {
            return Ok(());
        }
        let lambda = bounded_eval(intensity, s, lambda_max)?;
        let accept = stream.uniform() <= lambda / lambda_max;
        if !visit(s, accept) {
            return Ok(());
        }
    }
}

/// Merges observed (accepted) and rejected times into one strictly
/// increasing candidate list. A rejected time colliding with an earlier
/// candidate is moved up by one ulp.
pub(crate) fn merge_candidates(accepted: &[f64], rejected: &[f64]) -> Vec<(f64, bool)> {
    let mut out: Vec<(f64, bool)> = Vec::with_capacity(accepted.len() + rejected.len());
    let (mut i, mut j) = (0, 0);
    let mut pending: Option<f64> = rejected.first().copied();
    while i < accepted.len() || pending.is_some() {
        let take_accepted = match pending {
            None => true,
            Some(r) => i < accepted.len() && accepted[i] <= r,
        };
        if take_accepted {
            let a = accepted[i];
            out.push((a, true));
            i += 1;
            if let Some(r) = pending {
                if r == a {
                    pending = Some(r.next_up());
                }
            }
        } else {
            let mut r = pending.expect("pending rejected candidate");
            if let Some(&(last, _)) = out.last() {
                if r <= last {
                    r = last.next_up();
                }
            }
            if i < accepted.len() && accepted[i] == r {
                pending = Some(r.next_up());
                continue;
            }
            out.push((r, false));
            j += 1;
            pending = rejected.get(j).copied();
        }
    }
    out
}

/// Replays each candidate's accept decision under `lambda_cf`, conditioning
/// the Gumbel noise on its factual decision under `lambda_m`. Returns one
/// counterfactual decision per candidate.
pub(crate) fn acceptance_pass<M, C>(
    lambda_m: &M,
    lambda_cf: &C,
    candidates: &[(f64, bool)],
    lambda_max: f64,
    mode: CfMode,
    stream: &mut Stream,
) -> Result<Vec<bool>>
where
    M: Intensity + ?Sized,
    C: Intensity + ?Sized,
{
    candidates
        .iter()
        .map(|&(t, x_obs)| {
            let obs = bounded_eval(lambda_m, t, lambda_max)?;
            let cf = bounded_eval(lambda_cf, t, lambda_max)?;
            counterfactual_sample(x_obs, obs, cf, lambda_max, mode, stream).map_err(|e| match e {
                Error::ImpossibleObservation { x_obs: true, .. } => Error::ZeroIntensityAtEvent { t },
                other => other,
            })
        })
        .collect()
}

/// Counterfactual accepted events for a recorded thinning run.
pub fn counterfactual_acceptance<M, C>(
    lambda_m: &M,
    lambda_cf: &C,
    record: &ThinningRecord,
    mode: CfMode,
    stream: &mut Stream,
) -> Result<EventSequence>
where
    M: Intensity + ?Sized,
    C: Intensity + ?Sized,
{
    let candidates = record.candidates();
    let decisions = acceptance_pass(lambda_m, lambda_cf, &candidates, record.lambda_max, mode, stream)?;
    let times = candidates
        .iter()
        .zip(decisions)
        .filter_map(|(&(t, _), keep)| keep.then_some(t))
        .collect();
    Ok(EventSequence::from_sorted_unchecked(times, record.resolved_horizon()))
}
