//! Reproduction-number estimates and block-model calibration.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::randomness::{stage, Label, Stream, StreamKey};
use crate::stats;

use super::geography::{Country, Geography, SbmProbabilities};
use super::network::{generate_network_keyed, ContactNetwork};
use super::outbreak::{run_races, Infector, SirParams};

pub const MIN_R0_RUNS: usize = 30;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct R0Estimate {
    pub country: Country,
    pub mean: f64,
    pub lo: f64,
    pub hi: f64,
    pub runs: usize,
}

/// Country of every node.
pub fn node_countries(network: &ContactNetwork, geography: &Geography) -> Vec<Country> {
    network
        .districts()
        .iter()
        .map(|&d| geography.districts()[d as usize].country)
        .collect()
}

/// Direct secondary infections of one index case per country, per run.
fn r0_samples(
    network: &ContactNetwork,
    geography: &Geography,
    params: &SirParams,
    n_runs: usize,
    key: &StreamKey,
) -> Result<Vec<(Country, Vec<f64>)>> {
    if n_runs < MIN_R0_RUNS {
        return Err(invalid("runs", format!("need at least {MIN_R0_RUNS}, got {n_runs}")));
    }
    let countries = node_countries(network, geography);
    let pools: Vec<(Country, Vec<usize>)> = Country::ALL
        .iter()
        .map(|&c| {
            (
                c,
                (0..countries.len()).filter(|&v| countries[v] == c).collect::<Vec<_>>(),
            )
        })
        .filter(|(_, nodes)| !nodes.is_empty())
        .collect();
    if pools.is_empty() {
        return Err(Error::EmptyInput("network"));
    }
    let per_run: Vec<Vec<f64>> = (0..n_runs as u64)
        .into_par_iter()
        .map(|r| {
            let run = key.child(Label::Run, r);
            let mut pick = run.stage(stage::SEEDS).stream();
            let seeds: Vec<usize> = pools.iter().map(|(_, nodes)| nodes[pick.index(nodes.len())]).collect();
            // secondary infections of a seed are settled once it recovers
            let state = run_races(
                network,
                params,
                &seeds,
                f64::INFINITY,
                |s| seeds.iter().map(|&v| s.recovery[v]).fold(0.0, f64::max),
                &run.stage(stage::FACTUAL),
            )?;
            let mut counts = vec![0.0; seeds.len()];
            for inf in &state.infector {
                if let Some(Infector::Node(i)) = *inf {
                    if let Some(k) = seeds.iter().position(|&s| s == i) {
                        counts[k] += 1.0;
                    }
                }
            }
            Ok(counts)
        })
        .collect::<Result<_>>()?;
    Ok(pools
        .iter()
        .enumerate()
        .map(|(k, (c, _))| (*c, per_run.iter().map(|run| run[k]).collect()))
        .collect())
}

/// Mean direct secondary infections of a random index case in each
/// country, with a 95% normal interval over runs.
pub fn estimate_r0(
    network: &ContactNetwork,
    geography: &Geography,
    params: &SirParams,
    n_runs: usize,
    stream: &mut Stream,
) -> Result<Vec<R0Estimate>> {
    estimate_r0_keyed(network, geography, params, n_runs, &stream.split_key())
}

pub fn estimate_r0_keyed(
    network: &ContactNetwork,
    geography: &Geography,
    params: &SirParams,
    n_runs: usize,
    key: &StreamKey,
) -> Result<Vec<R0Estimate>> {
    Ok(r0_samples(network, geography, params, n_runs, key)?
        .into_iter()
        .map(|(country, xs)| {
            let (mean, lo, hi) = stats::normal_ci(&xs, 0.95);
            R0Estimate {
                country,
                mean,
                lo,
                hi,
                runs: xs.len(),
            }
        })
        .collect())
}

/// Candidate values per probability; the search covers their product.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CalibrationGrid {
    pub within: Vec<f64>,
    pub guinea: Vec<f64>,
    pub liberia: Vec<f64>,
    pub sierra_leone: Vec<f64>,
    pub cross_country: Vec<f64>,
}

impl CalibrationGrid {
    pub fn single(p: SbmProbabilities) -> Self {
        Self {
            within: vec![p.within],
            guinea: vec![p.guinea],
            liberia: vec![p.liberia],
            sierra_leone: vec![p.sierra_leone],
            cross_country: vec![p.cross_country],
        }
    }

    pub fn points(&self) -> Vec<SbmProbabilities> {
        let mut out = Vec::new();
        for &within in &self.within {
            for &guinea in &self.guinea {
                for &liberia in &self.liberia {
                    for &sierra_leone in &self.sierra_leone {
                        for &cross_country in &self.cross_country {
                            out.push(SbmProbabilities {
                                within,
                                guinea,
                                liberia,
                                sierra_leone,
                                cross_country,
                            });
                        }
                    }
                }
            }
        }
        out
    }
}

/// Target R0 per country, in `Country::ALL` order.
pub const WHO_R0: [f64; 3] = [1.71, 1.83, 2.02];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub probs: SbmProbabilities,
    pub estimates: Vec<R0Estimate>,
    pub loss: f64,
}

/// Exhaustive grid search minimizing the squared distance between
/// simulated and target R0. All grid points share network and run streams.
pub fn calibrate(
    geography: &Geography,
    params: &SirParams,
    targets: [f64; 3],
    grid: &CalibrationGrid,
    n_runs: usize,
    stream: &mut Stream,
) -> Result<Calibration> {
    let key = stream.split_key();
    let points = grid.points();
    if points.is_empty() {
        return Err(Error::EmptyInput("calibration grid"));
    }
    let mut best: Option<Calibration> = None;
    for probs in points {
        let network = generate_network_keyed(geography, &probs, &key.stage(stage::NETWORK))?;
        let estimates = estimate_r0_keyed(&network, geography, params, n_runs, &key)?;
        let loss: f64 = estimates
            .iter()
            .map(|e| (e.mean - targets[e.country.index()]).powi(2))
            .sum();
        if best.as_ref().is_none_or(|b| loss < b.loss) {
            best = Some(Calibration { probs, estimates, loss });
        }
    }
    Ok(best.expect("nonempty grid"))
}
