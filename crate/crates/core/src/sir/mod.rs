//! Networked SIR epidemics: contact networks, forward and counterfactual
//! outbreaks, interventions and reproduction-number calibration.

pub mod counterfactual;
pub mod geography;
pub mod intervention;
pub mod network;
pub mod outbreak;
pub mod r0;

pub use counterfactual::{counterfactual_outbreak, counterfactual_outbreak_keyed, EdgeNoise, SirCfOptions};
pub use geography::{Country, District, Geography, SbmProbabilities};
pub use intervention::{apply_intervention, CounterfactualRates, Intervention};
pub use network::{generate_network, generate_network_keyed, ContactNetwork};
pub use outbreak::{sample_outbreak, sample_outbreak_keyed, Infector, Outbreak, SirParams};
pub use r0::{calibrate, estimate_r0, estimate_r0_keyed, CalibrationGrid, R0Estimate, WHO_R0};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::randomness::Stream;

/// Number of index cases placed in a district.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedSpec {
    pub district: String,
    pub count: usize,
}

/// Six index cases in four districts of the forest region.
pub fn default_seeds() -> Vec<SeedSpec> {
    [("Gueckedou", 3), ("Macenta", 1), ("Kissidougou", 1), ("Nzerekore", 1)]
        .into_iter()
        .map(|(d, c)| SeedSpec {
            district: d.to_string(),
            count: c,
        })
        .collect()
}

/// Draws distinct seed nodes uniformly within each listed district.
pub fn sample_seeds(
    network: &ContactNetwork,
    geography: &Geography,
    spec: &[SeedSpec],
    stream: &mut Stream,
) -> Result<Vec<usize>> {
    let ranges = network.district_ranges(geography.districts().len());
    let mut seeds = Vec::new();
    for s in spec {
        let range = ranges[geography.district_index(&s.district)?].clone();
        if s.count > range.len() {
            return Err(invalid(
                "seeds",
                format!(
                    "{} seeds requested in {} with {} nodes",
                    s.count,
                    s.district,
                    range.len()
                ),
            ));
        }
        let mut nodes: Vec<usize> = range.collect();
        for i in 0..s.count {
            let j = i + stream.index(nodes.len() - i);
            nodes.swap(i, j);
        }
        seeds.extend_from_slice(&nodes[..s.count]);
    }
    if seeds.is_empty() {
        return Err(crate::error::Error::EmptyInput("seeds"));
    }
    Ok(seeds)
}
