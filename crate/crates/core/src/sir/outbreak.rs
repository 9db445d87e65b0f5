//! Forward simulation of the networked SIR model.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use crate::error::{check_nonneg, check_positive, invalid, Error, Result};
use crate::randomness::{stage, Label, Stream, StreamKey};

use super::network::ContactNetwork;

/// Per-edge infection rate and recovery rate, both per day.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SirParams {
    pub beta: f64,
    pub delta: f64,
}

impl Default for SirParams {
    fn default() -> Self {
        Self {
            beta: 1.0 / 15.3,
            delta: 1.0 / 11.4,
        }
    }
}

impl SirParams {
    pub fn new(beta: f64, delta: f64) -> Result<Self> {
        let p = Self { beta, delta };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        check_nonneg("beta", self.beta)?;
        check_positive("delta", self.delta)
    }

    /// Probability that one infectious contact transmits before recovery.
    pub fn transmissibility(&self) -> f64 {
        self.beta / (self.beta + self.delta)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Infector {
    Seed,
    Node(usize),
}

/// Infection history of every node. Uninfected nodes have infinite times
/// and no infector.
#[derive(Clone, Debug, PartialEq)]
pub struct Outbreak {
    infection: Vec<f64>,
    recovery: Vec<f64>,
    infector: Vec<Option<Infector>>,
    horizon: f64,
}

impl Outbreak {
    pub fn new(infection: Vec<f64>, recovery: Vec<f64>, infector: Vec<Option<Infector>>, horizon: f64) -> Result<Self> {
        let n = infection.len();
        if recovery.len() != n || infector.len() != n {
            return Err(invalid("outbreak", "column lengths differ"));
        }
        let o = Self {
            infection,
            recovery,
            infector,
            horizon,
        };
        o.validate()?;
        Ok(o)
    }

    /// Checks the per-node invariants, including infector timing.
    pub fn validate(&self) -> Result<()> {
        let n = self.infection.len();
        for j in 0..n {
            let (t, tau) = (self.infection[j], self.recovery[j]);
            let bad = |reason: String| invalid("outbreak", format!("node {j}: {reason}"));
            match self.infector[j] {
                None => {
                    if t.is_finite() || tau.is_finite() {
                        return Err(bad("has times but no infector".into()));
                    }
                }
                Some(src) => {
                    if !(t >= 0.0 && t <= self.horizon && tau > t) {
                        return Err(bad(format!("infection {t}, recovery {tau}")));
                    }
                    match src {
                        Infector::Seed if t != 0.0 => return Err(bad("seed infected after time 0".into())),
                        Infector::Node(i) => {
                            if i >= n {
                                return Err(Error::UnknownNode { node: i, nodes: n });
                            }
                            if !(self.infection[i] < t && t < self.recovery[i]) {
                                return Err(bad(format!("infector {i} was not infectious at {t}")));
                            }
                        }
                        Infector::Seed => {}
                    }
                }
            }
        }
        Ok(())
    }

    /// Checks that every infector is a contact of its infectee.
    pub fn validate_against(&self, network: &ContactNetwork) -> Result<()> {
        if network.node_count() != self.node_count() {
            return Err(invalid("outbreak", "node count differs from network"));
        }
        for (j, src) in self.infector.iter().enumerate() {
            if let Some(Infector::Node(i)) = *src {
                if !network.has_edge(i, j) {
                    return Err(invalid("outbreak", format!("infector {i} of {j} is not a contact")));
                }
            }
        }
        Ok(())
    }

    pub fn node_count(&self) -> usize {
        self.infection.len()
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn infection_time(&self, node: usize) -> f64 {
        self.infection[node]
    }

    pub fn recovery_time(&self, node: usize) -> f64 {
        self.recovery[node]
    }

    pub fn infector(&self, node: usize) -> Option<Infector> {
        self.infector[node]
    }

    pub fn is_infected(&self, node: usize) -> bool {
        self.infector[node].is_some()
    }

    pub fn infected_count(&self) -> usize {
        self.infector.iter().filter(|x| x.is_some()).count()
    }

    pub fn seeds(&self) -> Vec<usize> {
        (0..self.node_count())
            .filter(|&j| self.infector[j] == Some(Infector::Seed))
            .collect()
    }

    /// Infections at or before `t`.
    pub fn cumulative_at(&self, t: f64) -> usize {
        self.infection.iter().filter(|&&ti| ti <= t).count()
    }

    /// Nodes with `infection <= t < recovery`.
    pub fn active_at(&self, t: f64) -> usize {
        self.infection
            .iter()
            .zip(&self.recovery)
            .filter(|&(&ti, &ri)| ti <= t && t < ri)
            .count()
    }

    /// First time the number of active infections reaches `threshold`, or
    /// infinity if it never does.
    pub fn activation_time(&self, threshold: usize) -> f64 {
        let mut events: Vec<(f64, i32)> = Vec::new();
        for j in 0..self.node_count() {
            if self.is_infected(j) {
                events.push((self.infection[j], 1));
                events.push((self.recovery[j], -1));
            }
        }
        // recoveries first on ties: the interval is half-open
        events.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let mut active = 0i64;
        for (t, step) in events {
            active += step as i64;
            if step > 0 && active >= threshold as i64 {
                return t;
            }
        }
        f64::INFINITY
    }

    /// Cumulative infections per district.
    pub fn infections_by_district(&self, network: &ContactNetwork, districts: usize) -> Vec<usize> {
        let mut counts = vec![0; districts];
        for j in 0..self.node_count() {
            if self.is_infected(j) {
                counts[network.district_of(j)] += 1;
            }
        }
        counts
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub(crate) struct Pending {
    pub time: f64,
    pub node: usize,
}

impl Eq for Pending {}

impl Ord for Pending {
    // min-heap on (time, node)
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .time
            .total_cmp(&self.time)
            .then_with(|| other.node.cmp(&self.node))
    }
}

impl PartialOrd for Pending {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

pub(crate) fn edge_key(key: &StreamKey, network: &ContactNetwork, from: usize, to: usize) -> StreamKey {
    key.child(Label::Edge, (from * network.node_count() + to) as u64)
}

pub(crate) fn recovery_key(key: &StreamKey, node: usize) -> StreamKey {
    key.child(Label::Node, node as u64).stage(stage::RECOVERY)
}

pub(crate) fn check_seeds(network: &ContactNetwork, seeds: &[usize]) -> Result<()> {
    if seeds.is_empty() {
        return Err(Error::EmptyInput("seeds"));
    }
    seeds.iter().try_for_each(|&s| network.check_node(s))
}

/// State of a race simulation, possibly stopped early.
pub(crate) struct RaceState {
    pub infection: Vec<f64>,
    pub recovery: Vec<f64>,
    pub infector: Vec<Option<Infector>>,
}

/// Exponential-race simulation. Nodes popped after `until` are left
/// unprocessed; their tentative infection and infector are still reported.
pub(crate) fn run_races(
    network: &ContactNetwork,
    params: &SirParams,
    seeds: &[usize],
    horizon: f64,
    until: impl Fn(&RaceState) -> f64,
    key: &StreamKey,
) -> Result<RaceState> {
    params.validate()?;
    check_seeds(network, seeds)?;
    let n = network.node_count();
    let mut state = RaceState {
        infection: vec![f64::INFINITY; n],
        recovery: vec![f64::INFINITY; n],
        infector: vec![None; n],
    };
    let mut processed = vec![false; n];
    let mut queue = BinaryHeap::new();
    for &s in seeds {
        state.infection[s] = 0.0;
        state.infector[s] = Some(Infector::Seed);
        queue.push(Pending { time: 0.0, node: s });
    }
    while let Some(Pending { time, node: i }) = queue.pop() {
        if processed[i] || time != state.infection[i] {
            continue;
        }
        if time > until(&state) {
            break;
        }
        processed[i] = true;
        let tau = time + recovery_key(key, i).stream().exponential(params.delta)?;
        state.recovery[i] = tau;
        if params.beta == 0.0 {
            continue;
        }
        for &j in network.neighbors(i) {
            let j = j as usize;
            if processed[j] {
                continue;
            }
            let c = time + edge_key(key, network, i, j).stream().exponential(params.beta)?;
            if c < tau && c <= horizon && c < state.infection[j] {
                state.infection[j] = c;
                state.infector[j] = Some(Infector::Node(i));
                queue.push(Pending { time: c, node: j });
            }
        }
    }
    Ok(state)
}

/// Samples an outbreak on `[0, horizon]` started by `seeds` at time 0.
pub fn sample_outbreak(
    network: &ContactNetwork,
    params: &SirParams,
    seeds: &[usize],
    horizon: f64,
    stream: &mut Stream,
) -> Result<Outbreak> {
    sample_outbreak_keyed(network, params, seeds, horizon, &stream.split_key())
}

/// As [`sample_outbreak`], with every node and edge drawing from a
/// sub-stream of `key`.
pub fn sample_outbreak_keyed(
    network: &ContactNetwork,
    params: &SirParams,
    seeds: &[usize],
    horizon: f64,
    key: &StreamKey,
) -> Result<Outbreak> {
    check_positive("horizon", horizon)?;
    let state = run_races(network, params, seeds, horizon, |_| f64::INFINITY, key)?;
    Ok(Outbreak {
        infection: state.infection,
        recovery: state.recovery,
        infector: state.infector,
        horizon,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults() {
        let p = SirParams::default();
        assert!((1.0 / p.beta - 15.3).abs() < 1e-12);
        assert!((1.0 / p.delta - 11.4).abs() < 1e-12);
        assert!(SirParams::new(-1.0, 1.0).is_err());
        assert!(SirParams::new(1.0, 0.0).is_err());
    }

    #[test]
    fn degenerate_rates_infect_only_seeds() {
        let net = ContactNetwork::star(20);
        let key = StreamKey::new(1);
        let o = sample_outbreak_keyed(&net, &SirParams::new(0.0, 0.1).unwrap(), &[0], 100.0, &key).unwrap();
        assert_eq!(o.infected_count(), 1);
        let o = sample_outbreak_keyed(&net, &SirParams::new(0.1, 1e12).unwrap(), &[0], 100.0, &key).unwrap();
        assert_eq!(o.infected_count(), 1);
    }

    #[test]
    fn star_leaf_infection_probability() {
        let net = ContactNetwork::star(5);
        let params = SirParams::default();
        let root = StreamKey::new(2);
        let mut hits = 0;
        for r in 0..10_000 {
            let o = sample_outbreak_keyed(&net, &params, &[0], 1e6, &root.child(Label::Run, r)).unwrap();
            o.validate().unwrap();
            o.validate_against(&net).unwrap();
            hits += o.is_infected(1) as usize;
        }
        let freq = hits as f64 / 10_000.0;
        assert!((freq - params.transmissibility()).abs() < 0.015, "{freq}");
    }

    #[test]
    fn unknown_seed_is_an_error() {
        let net = ContactNetwork::star(3);
        let key = StreamKey::new(3);
        let err = sample_outbreak_keyed(&net, &SirParams::default(), &[9], 10.0, &key);
        assert!(matches!(err, Err(Error::UnknownNode { .. })));
        let err = sample_outbreak_keyed(&net, &SirParams::default(), &[], 10.0, &key);
        assert!(matches!(err, Err(Error::EmptyInput(_))));
    }

    #[test]
    fn activation_time_counts_active_cases() {
        let o = Outbreak::new(
            vec![0.0, 1.0, 2.0, f64::INFINITY],
            vec![1.5, 3.0, 4.0, f64::INFINITY],
            vec![
                Some(Infector::Seed),
                Some(Infector::Node(0)),
                Some(Infector::Node(1)),
                None,
            ],
            10.0,
        )
        .unwrap();
        assert_eq!(o.activation_time(1), 0.0);
        assert_eq!(o.activation_time(2), 1.0);
        assert_eq!(o.activation_time(3), f64::INFINITY);
        assert_eq!(o.active_at(2.0), 2);
        assert_eq!(o.cumulative_at(2.0), 3);
    }
}
