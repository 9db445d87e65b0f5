//! Interventions and the per-edge counterfactual rates they induce.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{check_fraction, check_nonneg, invalid, Result};
use crate::randomness::Stream;

use super::network::ContactNetwork;
use super::outbreak::{Outbreak, SirParams};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Intervention {
    /// No change; the counterfactual replays the observation.
    None,
    /// Replace the per-edge rate everywhere from time 0.
    GlobalBeta { beta: f64 },
    /// Every contact is dropped with probability `reduction` once the active
    /// infections reach `threshold`.
    ContactReductionGlobal { threshold: usize, reduction: f64 },
    /// Contacts inside the district with the most active infections are
    /// dropped with probability `within_reduction`; with `cross_isolation`
    /// all of its contacts to other districts are dropped too.
    DistrictIsolation {
        threshold: usize,
        within_reduction: f64,
        #[serde(default = "default_true")]
        cross_isolation: bool,
    },
    /// `ceil(coverage * |V|)` nodes chosen uniformly have their inbound rate
    /// scaled by `1 - efficacy` from time 0.
    Vaccination { coverage: f64, efficacy: f64 },
}

fn default_true() -> bool {
    true
}

impl Intervention {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Intervention::None => Ok(()),
            Intervention::GlobalBeta { beta } => check_nonneg("beta", beta),
            Intervention::ContactReductionGlobal { threshold, reduction } => {
                check_threshold(threshold)?;
                check_fraction("reduction", reduction)
            }
            Intervention::DistrictIsolation {
                threshold,
                within_reduction,
                ..
            } => {
                check_threshold(threshold)?;
                check_fraction("within_reduction", within_reduction)
            }
            Intervention::Vaccination { coverage, efficacy } => {
                check_fraction("coverage", coverage)?;
                check_fraction("efficacy", efficacy)
            }
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let i: Self = serde_json::from_str(text)?;
        i.validate()?;
        Ok(i)
    }
}

fn check_threshold(threshold: usize) -> Result<()> {
    if threshold == 0 {
        Err(invalid("threshold", "must be at least 1"))
    } else {
        Ok(())
    }
}

/// Counterfactual rate of every directed edge:
/// `beta * inbound_scale[to]` from time 0, switched to zero from
/// `activation_time` on for removed edges.
#[derive(Clone, Debug, PartialEq)]
pub struct CounterfactualRates {
    beta: f64,
    activation_time: f64,
    removed: HashSet<(u32, u32)>,
    inbound_scale: Option<Vec<f64>>,
}

impl CounterfactualRates {
    pub fn uniform(beta: f64) -> Result<Self> {
        check_nonneg("beta", beta)?;
        Ok(Self {
            beta,
            activation_time: f64::INFINITY,
            removed: HashSet::new(),
            inbound_scale: None,
        })
    }

    pub fn identity(params: &SirParams) -> Self {
        Self::uniform(params.beta).expect("validated params")
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn activation_time(&self) -> f64 {
        self.activation_time
    }

    pub fn removed_edges(&self) -> usize {
        self.removed.len()
    }

    /// Rate of `from -> to` while the edge is active.
    pub fn rate(&self, _from: usize, to: usize) -> f64 {
        match &self.inbound_scale {
            Some(scale) => self.beta * scale[to],
            None => self.beta,
        }
    }

    /// Time from which the edge carries no infections.
    pub fn cutoff(&self, from: usize, to: usize) -> f64 {
        let key = (from.min(to) as u32, from.max(to) as u32);
        if self.removed.contains(&key) {
            self.activation_time
        } else {
            f64::INFINITY
        }
    }

    pub fn max_rate(&self) -> f64 {
        match &self.inbound_scale {
            Some(scale) => self.beta * scale.iter().copied().fold(0.0, f64::max),
            None => self.beta,
        }
    }
}

/// Translates an intervention into counterfactual edge rates. Threshold
/// activation is read off the observed trajectory, which the counterfactual
/// follows exactly until the intervention starts.
pub fn apply_intervention(
    intervention: &Intervention,
    observed: &Outbreak,
    network: &ContactNetwork,
    params: &SirParams,
    stream: &mut Stream,
) -> Result<CounterfactualRates> {
    intervention.validate()?;
    params.validate()?;
    let mut rates = CounterfactualRates::identity(params);
    match *intervention {
        Intervention::None => {}
        Intervention::GlobalBeta { beta } => rates.beta = beta,
        Intervention::ContactReductionGlobal { threshold, reduction } => {
            rates.activation_time = observed.activation_time(threshold);
            if rates.activation_time.is_finite() {
                for (a, b) in network.edges() {
                    if stream.bernoulli(reduction) {
                        rates.removed.insert((a as u32, b as u32));
                    }
                }
            }
        }
        Intervention::DistrictIsolation {
            threshold,
            within_reduction,
            cross_isolation,
        } => {
            let t = observed.activation_time(threshold);
            rates.activation_time = t;
            if t.is_finite() {
                let target = most_active_district(observed, network, t);
                for (a, b) in network.edges() {
                    let (da, db) = (network.district_of(a), network.district_of(b));
                    if da != target && db != target {
                        continue;
                    }
                    let drop = if da == db {
                        stream.bernoulli(within_reduction)
                    } else {
                        cross_isolation
                    };
                    if drop {
                        rates.removed.insert((a as u32, b as u32));
                    }
                }
            }
        }
        Intervention::Vaccination { coverage, efficacy } => {
            let n = network.node_count();
            let k = ((coverage * n as f64).ceil() as usize).min(n);
            let mut nodes: Vec<usize> = (0..n).collect();
            // partial Fisher-Yates
            for i in 0..k {
                let j = i + stream.index(n - i);
                nodes.swap(i, j);
            }
            let mut scale = vec![1.0; n];
            for &v in &nodes[..k] {
                scale[v] = 1.0 - efficacy;
            }
            rates.inbound_scale = Some(scale);
        }
    }
    Ok(rates)
}

/// District with the most active infections at `t`; ties go to the lowest
/// district index.
pub fn most_active_district(observed: &Outbreak, network: &ContactNetwork, t: f64) -> usize {
    let districts = network.districts().iter().copied().max().map_or(0, |d| d as usize + 1);
    let mut active = vec![0usize; districts];
    for j in 0..observed.node_count() {
        if observed.infection_time(j) <= t && t < observed.recovery_time(j) {
            active[network.district_of(j)] += 1;
        }
    }
    let mut best = 0;
    for (d, &a) in active.iter().enumerate() {
        if a > active[best] {
            best = d;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::randomness::StreamKey;
    use crate::sir::outbreak::sample_outbreak_keyed;

    #[test]
    fn json_round_trip() {
        let cases = [
            r#"{"kind":"none"}"#,
            r#"{"kind":"contact_reduction_global","threshold":300,"reduction":0.05}"#,
            r#"{"kind":"district_isolation","threshold":600,"within_reduction":0.5}"#,
            r#"{"kind":"vaccination","coverage":0.8,"efficacy":0.6}"#,
        ];
        for text in cases {
            let i = Intervention::from_json(text).unwrap();
            let back: Intervention = serde_json::from_str(&serde_json::to_string(&i).unwrap()).unwrap();
            assert_eq!(back, i);
        }
        assert!(Intervention::from_json(r#"{"kind":"vaccination","coverage":1.5,"efficacy":0.6}"#).is_err());
        assert!(
            Intervention::from_json(r#"{"kind":"contact_reduction_global","threshold":0,"reduction":0.5}"#).is_err()
        );
    }

    #[test]
    fn vaccination_scales_inbound_rates() {
        let net = ContactNetwork::star(9);
        let params = SirParams::default();
        let key = StreamKey::new(1);
        let obs = sample_outbreak_keyed(&net, &params, &[0], 100.0, &key).unwrap();
        let mut s = key.stream();
        let full = Intervention::Vaccination {
            coverage: 1.0,
            efficacy: 1.0,
        };
        let rates = apply_intervention(&full, &obs, &net, &params, &mut s).unwrap();
        assert_eq!(rates.max_rate(), 0.0);
        let half = Intervention::Vaccination {
            coverage: 0.5,
            efficacy: 0.6,
        };
        let rates = apply_intervention(&half, &obs, &net, &params, &mut s).unwrap();
        let scaled = (0..10).filter(|&v| rates.rate(0, v) < params.beta).count();
        assert_eq!(scaled, 5);
    }

    #[test]
    fn unreached_threshold_is_identity() {
        let net = ContactNetwork::star(4);
        let params = SirParams::default();
        let key = StreamKey::new(2);
        let obs = sample_outbreak_keyed(&net, &params, &[0], 100.0, &key).unwrap();
        let i = Intervention::ContactReductionGlobal {
            threshold: 100,
            reduction: 1.0,
        };
        let rates = apply_intervention(&i, &obs, &net, &params, &mut key.stream()).unwrap();
        assert_eq!(rates, CounterfactualRates::identity(&params));
    }
}
