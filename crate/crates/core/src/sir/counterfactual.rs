//! Counterfactual outbreaks given an observed one.
//!
//! Each directed edge `i -> j` is a thinning process with kernel
//! `beta * 1[t_i <= t < tau_i]`. Factually, the edge carried no event
//! before `j` stopped being susceptible, except on the infector edge, whose
//! single event is the observed infection of `j`. Counterfactual infection
//! times are the earliest counterfactually accepted candidates, explored in
//! time order from the seeds.

use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use crate::error::{check_positive, invalid, Error, Result};
use crate::gumbel_scm::{counterfactual_sample, CfMode};
use crate::intensity::SirEdgeKernel;
use crate::randomness::{stage, Stream, StreamKey};
use crate::thinning::{bounded_eval, lewis_sample_window_with};

use super::intervention::CounterfactualRates;
use super::network::ContactNetwork;
use super::outbreak::{check_seeds, edge_key, recovery_key, Infector, Outbreak, Pending, SirParams};

/// How the counterfactual treats edges that did not carry the observed
/// infection of their target.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeNoise {
    /// Condition on the observation: the edge fired no event before its
    /// target was infected or its source recovered. Identity interventions
    /// reproduce the observation exactly.
    #[default]
    Abducted,
    /// Draw each such edge afresh from its counterfactual kernel, ignoring
    /// what the observation says about it.
    Fresh,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SirCfOptions {
    #[serde(default)]
    pub mode: CfMode,
    #[serde(default)]
    pub edge_noise: EdgeNoise,
}

struct Context<'a> {
    network: &'a ContactNetwork,
    beta_m: f64,
    rates: &'a CounterfactualRates,
    observed: &'a Outbreak,
    beta_max: f64,
    options: SirCfOptions,
    key: StreamKey,
}

impl Context<'_> {
    /// Factual kernel of `i -> j`: infectious period of `i`, cut where `j`
    /// stopped being susceptible. On the infector edge it includes the
    /// observed infection time.
    fn factual_kernel(&self, i: usize, j: usize) -> SirEdgeKernel {
        let o = self.observed;
        if !o.is_infected(i) {
            return SirEdgeKernel::silent();
        }
        let t_j = o.infection_time(j);
        let end = if o.infector(j) == Some(Infector::Node(i)) {
            t_j.next_up()
        } else {
            o.recovery_time(i).min(t_j)
        };
        SirEdgeKernel {
            beta: self.beta_m,
            infectious_start: o.infection_time(i),
            infectious_end: end,
        }
    }

    /// Earliest counterfactual event of `i -> j` strictly before `limit`.
    fn earliest(&self, i: usize, j: usize, start: f64, end: f64, limit: f64) -> Result<Option<f64>> {
        let cf = SirEdgeKernel {
            beta: self.rates.rate(i, j),
            infectious_start: start,
            infectious_end: end.min(self.rates.cutoff(i, j)),
        };
        let window_end = cf.infectious_end.min(limit);
        if cf.beta == 0.0 || !(window_end > start) {
            return Ok(None);
        }
        let carried = self.observed.infector(j) == Some(Infector::Node(i));
        if !carried && self.options.edge_noise == EdgeNoise::Fresh {
            return self.fresh(&cf, i, j, start, window_end);
        }
        let m = self.factual_kernel(i, j);
        let observed = carried
            .then(|| self.observed.infection_time(j))
            .filter(|&t| t >= start && t < window_end);

        let mut s = edge_key(&self.key, self.network, i, j).stream();
        let mut pending_obs = observed;
        let mut cursor = start;
        let mut next_rejected = self.next_rejected(&m, &mut cursor, window_end, &mut s)?;
        loop {
            let (t, x_obs) = match (pending_obs, next_rejected) {
                (None, None) => return Ok(None),
                (Some(o), Some(r)) if r == o => {
                    // an exact tie moves the rejected candidate past the observation
                    cursor = o.next_up();
                    next_rejected = Some(cursor);
                    continue;
                }
                (Some(o), Some(r)) if r < o => {
                    next_rejected = self.next_rejected(&m, &mut cursor, window_end, &mut s)?;
                    (r, false)
                }
                (Some(o), _) => {
                    pending_obs = None;
                    (o, true)
                }
                (None, Some(r)) => {
                    next_rejected = self.next_rejected(&m, &mut cursor, window_end, &mut s)?;
                    (r, false)
                }
            };
            if t >= window_end {
                continue;
            }
            let lo = bounded_eval(&m, t, self.beta_max)?;
            let lc = bounded_eval(&cf, t, self.beta_max)?;
            let accept = counterfactual_sample(x_obs, lo, lc, self.beta_max, self.options.mode, &mut s).map_err(
                |e| match e {
                    Error::ImpossibleObservation { x_obs: true, .. } => Error::ZeroIntensityAtEvent { t },
                    other => other,
                },
            )?;
            if accept {
                return Ok(Some(t));
            }
        }
    }

    /// First event of a fresh Lewis sample of `cf` in `(start, end)`.
    fn fresh(&self, cf: &SirEdgeKernel, i: usize, j: usize, start: f64, end: f64) -> Result<Option<f64>> {
        let mut s = edge_key(&self.key, self.network, i, j)
            .stage(stage::COUNTERFACTUAL)
            .stream();
        let mut first = None;
        lewis_sample_window_with(cf, self.beta_max, start, end, &mut s, |t, accept| {
            if t >= end {
                return false;
            }
            if accept {
                first = Some(t);
            }
            !accept
        })?;
        Ok(first)
    }

    /// Next candidate of the rejected process `beta_max - m(t)` after
    /// `cursor`, drawn by thinning at `beta_max` and discarding the
    /// candidates that would have been factual events.
    fn next_rejected(&self, m: &SirEdgeKernel, cursor: &mut f64, end: f64, s: &mut Stream) -> Result<Option<f64>> {
        loop {
            *cursor += s.exponential(self.beta_max)?;
            if *cursor >= end {
                *cursor = f64::INFINITY;
                return Ok(None);
            }
            let lm = bounded_eval(m, *cursor, self.beta_max)?;
            if s.uniform() > lm / self.beta_max {
                return Ok(Some(*cursor));
            }
        }
    }
}

/// Samples a counterfactual outbreak under `rates`, holding fixed the
/// noise consistent with `observed`.
#[allow(clippy::too_many_arguments)]
pub fn counterfactual_outbreak(
    network: &ContactNetwork,
    params: &SirParams,
    rates: &CounterfactualRates,
    observed: &Outbreak,
    horizon: f64,
    options: SirCfOptions,
    stream: &mut Stream,
) -> Result<Outbreak> {
    counterfactual_outbreak_keyed(network, params, rates, observed, horizon, options, &stream.split_key())
}

pub fn counterfactual_outbreak_keyed(
    network: &ContactNetwork,
    params: &SirParams,
    rates: &CounterfactualRates,
    observed: &Outbreak,
    horizon: f64,
    options: SirCfOptions,
    key: &StreamKey,
) -> Result<Outbreak> {
    params.validate()?;
    check_positive("horizon", horizon)?;
    if observed.node_count() != network.node_count() {
        return Err(invalid("observed", "node count differs from network"));
    }
    let seeds = observed.seeds();
    check_seeds(network, &seeds)?;

    let ctx = Context {
        network,
        beta_m: params.beta,
        rates,
        observed,
        beta_max: params.beta.max(rates.max_rate()),
        options,
        key: key.clone(),
    };
    let n = network.node_count();
    let mut infection = vec![f64::INFINITY; n];
    let mut recovery = vec![f64::INFINITY; n];
    let mut infector: Vec<Option<Infector>> = vec![None; n];
    let mut processed = vec![false; n];
    let mut queue = BinaryHeap::new();
    for &s in &seeds {
        infection[s] = 0.0;
        infector[s] = Some(Infector::Seed);
        queue.push(Pending { time: 0.0, node: s });
    }

    while let Some(Pending { time, node: i }) = queue.pop() {
        if processed[i] || time != infection[i] {
            continue;
        }
        processed[i] = true;
        // reuse the observed recovery noise when the infection time is unchanged
        let tau = if observed.is_infected(i) && observed.infection_time(i) == time {
            observed.recovery_time(i)
        } else {
            time + recovery_key(&ctx.key, i).stream().exponential(params.delta)?
        };
        recovery[i] = tau;
        if ctx.beta_max == 0.0 {
            continue;
        }
        for &j in network.neighbors(i) {
            let j = j as usize;
            if processed[j] {
                continue;
            }
            // candidates must beat the current tentative time and the horizon
            let limit = infection[j].min(horizon.next_up());
            if let Some(t) = ctx.earliest(i, j, time, tau, limit)? {
                infection[j] = t;
                infector[j] = Some(Infector::Node(i));
                queue.push(Pending { time: t, node: j });
            }
        }
    }
    Outbreak::new(infection, recovery, infector, horizon)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::randomness::Label;
    use crate::sir::geography::{Geography, SbmProbabilities};
    use crate::sir::network::generate_network_keyed;
    use crate::sir::outbreak::sample_outbreak_keyed;

    fn small_world() -> (ContactNetwork, SirParams) {
        let g = Geography::bundled().with_total_nodes(1500);
        let net = generate_network_keyed(&g, &SbmProbabilities::default(), &StreamKey::new(7)).unwrap();
        (net, SirParams::default())
    }

    #[test]
    fn identity_reproduces_observation() {
        let (net, params) = small_world();
        let rates = CounterfactualRates::identity(&params);
        for r in 0..10 {
            let key = StreamKey::new(8).child(Label::Run, r);
            let seeds: Vec<usize> = (0..5).map(|k| (k * 277 + r as usize * 13) % 1500).collect();
            let obs = sample_outbreak_keyed(&net, &params, &seeds, 365.0, &key).unwrap();
            let cf = counterfactual_outbreak_keyed(
                &net,
                &params,
                &rates,
                &obs,
                365.0,
                SirCfOptions::default(),
                &key.child(Label::Replicate, 0),
            )
            .unwrap();
            assert_eq!(cf, obs);
        }
    }

    #[test]
    fn zero_rate_keeps_only_seeds() {
        let (net, params) = small_world();
        let key = StreamKey::new(9);
        let obs = sample_outbreak_keyed(&net, &params, &[1, 2, 3], 365.0, &key).unwrap();
        let rates = CounterfactualRates::uniform(0.0).unwrap();
        let cf =
            counterfactual_outbreak_keyed(&net, &params, &rates, &obs, 365.0, SirCfOptions::default(), &key).unwrap();
        assert_eq!(cf.infected_count(), 3);
    }

    #[test]
    fn outputs_are_valid_outbreaks() {
        let (net, params) = small_world();
        let key = StreamKey::new(10);
        let obs = sample_outbreak_keyed(&net, &params, &[5, 600, 1200], 365.0, &key).unwrap();
        for beta in [0.02, 0.05, 0.1] {
            let rates = CounterfactualRates::uniform(beta).unwrap();
            let cf = counterfactual_outbreak_keyed(&net, &params, &rates, &obs, 365.0, SirCfOptions::default(), &key)
                .unwrap();
            cf.validate().unwrap();
            cf.validate_against(&net).unwrap();
        }
    }

    #[test]
    fn single_edge_decisions_respect_monotonicity() {
        // two nodes, one edge: the infection can only survive a rate cut
        let net = ContactNetwork::from_edges(vec![0, 0], &[(0, 1)]).unwrap();
        let params = SirParams::default();
        let root = StreamKey::new(11);
        let lower = CounterfactualRates::uniform(params.beta * 0.5).unwrap();
        let higher = CounterfactualRates::uniform(params.beta * 2.0).unwrap();
        let (mut kept, mut infected) = (0, 0);
        for r in 0..20_000 {
            let key = root.child(Label::Run, r);
            let obs = sample_outbreak_keyed(&net, &params, &[0], 1e6, &key).unwrap();
            let down =
                counterfactual_outbreak_keyed(&net, &params, &lower, &obs, 1e6, SirCfOptions::default(), &key).unwrap();
            let up = counterfactual_outbreak_keyed(&net, &params, &higher, &obs, 1e6, SirCfOptions::default(), &key)
                .unwrap();
            if !obs.is_infected(1) {
                assert!(!down.is_infected(1));
            } else {
                infected += 1;
                kept += (down.infection_time(1) == obs.infection_time(1)) as usize;
                assert!(!(down.infection_time(1) < obs.infection_time(1)));
                assert!(up.is_infected(1));
                assert!(up.infection_time(1) <= obs.infection_time(1));
            }
        }
        // halving the rate keeps an observed transmission with probability 1/2
        let frac = kept as f64 / infected as f64;
        assert!((frac - 0.5).abs() < 0.02, "{frac}");
    }
}
