//! Batch Monte Carlo studies: factual realizations, interventions,
//! counterfactual replicates, grouping and aggregation.
//!
//! Every realization `r` draws from `key.child(Realization, r)` and every
//! replicate `k` of it from a further `child(Replicate, k)`, so outputs do
//! not depend on the number of worker threads.

pub mod bootstrap;
pub mod config;
pub mod summary;

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cf_poisson::{counterfactual_poisson_replicates, ReplicateOptions};
use crate::error::{Error, Result};
use crate::hawkes::{counterfactual_hawkes, default_lambda_max, sample_hawkes_capped, HawkesCfOptions, Origin};
use crate::intensity::{HawkesParams, Intensity, IntensityConfig, PoissonIntensity, RbfMixtureIntensity};
use crate::io::write_outbreak_csv;
use crate::randomness::{stage, Label, StreamKey};
use crate::sir::{
    apply_intervention, counterfactual_outbreak_keyed, generate_network_keyed, sample_outbreak_keyed, sample_seeds,
    ContactNetwork, Geography, Outbreak, SirCfOptions, SirParams,
};
use crate::thinning::{lewis_sample, EventSequence};

pub use bootstrap::bootstrap_ci;
pub use config::{Grouping, InterventionSpec, ProcessConfig, ScenarioConfig};
pub use summary::{GroupSummary, GroupedSummary, RealizationSummary};

/// Confidence level of all reported bands.
pub const BAND_LEVEL: f64 = 0.95;

/// Raw samples kept for `raw_events/`.
#[derive(Clone, Debug, PartialEq)]
pub enum RawRealization {
    Events {
        factual: Vec<f64>,
        counterfactual: Vec<Vec<(f64, Option<Origin>)>>,
    },
    Outbreaks {
        factual: Outbreak,
        counterfactual: Vec<Outbreak>,
    },
}

/// Mean cumulative infections per district at the horizon.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DistrictRow {
    pub district: String,
    pub country: String,
    pub observed_mean: f64,
    pub cf_mean: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Meta {
    pub config: ScenarioConfig,
    pub seed: u64,
    /// Intervention noise actually drawn, one entry per scenario or per
    /// realization.
    pub epsilon: Vec<f64>,
    /// RBF component shifted by an amplitude intervention.
    pub component: Vec<usize>,
    pub truncated_factual: usize,
    pub truncated_counterfactual: usize,
    pub observed_mean: f64,
    pub cf_mean: f64,
    pub rel_change: f64,
    pub wall_time_seconds: f64,
    pub version: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScenarioOutput {
    pub summary: GroupedSummary,
    pub realizations: Vec<RealizationSummary>,
    pub raw: Vec<RawRealization>,
    pub districts: Option<Vec<DistrictRow>>,
    pub meta: Meta,
}

/// District id and country code.
type DistrictName = (String, String);

struct Realized {
    summary: RealizationSummary,
    raw: RawRealization,
    truncated_factual: bool,
    districts: Option<(Vec<f64>, Vec<f64>)>,
}

/// Counterfactual intensity choice for one realization.
struct Draw {
    epsilon: Option<f64>,
    component: Option<usize>,
}

fn draw_intervention(spec: &InterventionSpec, components: usize, key: &StreamKey) -> Result<Draw> {
    let mut s = key.stage(stage::INTERVENTION).stream();
    Ok(match *spec {
        InterventionSpec::AmplitudeShift {
            sigma,
            shift,
            component,
        } => {
            let component = match component {
                Some(c) => c,
                None => s.index(components),
            };
            let eps = match shift {
                Some(e) => e,
                None => s.normal(sigma)?,
            };
            Draw {
                epsilon: Some(eps),
                component: Some(component),
            }
        }
        InterventionSpec::AlphaShift { sigma, shift } => Draw {
            epsilon: Some(match shift {
                Some(e) => e,
                None => s.normal(sigma)?,
            }),
            component: None,
        },
        _ => Draw {
            epsilon: None,
            component: None,
        },
    })
}

fn window_count(times: &[f64], window: [f64; 2]) -> usize {
    times.partition_point(|&t| t <= window[1]) - times.partition_point(|&t| t < window[0])
}

fn mean_curve(curves: &[Vec<f64>], points: usize) -> Vec<f64> {
    let mut out = vec![0.0; points];
    for c in curves {
        for (o, v) in out.iter_mut().zip(c) {
            *o += v;
        }
    }
    out.iter_mut().for_each(|o| *o /= curves.len() as f64);
    out
}

fn realization_summary(
    factual: &[f64],
    counterfactuals: &[&[f64]],
    grid: &[f64],
    window: [f64; 2],
    truncated: usize,
) -> RealizationSummary {
    let curves: Vec<Vec<f64>> = counterfactuals
        .iter()
        .map(|c| summary::counts_on_grid(c, grid))
        .collect();
    let cf_mean_count = counterfactuals
        .iter()
        .map(|c| window_count(c, window) as f64)
        .sum::<f64>()
        / counterfactuals.len() as f64;
    RealizationSummary {
        observed_count: window_count(factual, window),
        cf_mean_count,
        factual_curve: summary::counts_on_grid(factual, grid),
        cf_curve: mean_curve(&curves, grid.len()),
        truncated,
    }
}

/// Runs a scenario from its own seed.
pub fn run_scenario(config: &ScenarioConfig) -> Result<ScenarioOutput> {
    run_scenario_keyed(config, &StreamKey::new(config.seed))
}

pub fn run_scenario_keyed(config: &ScenarioConfig, key: &StreamKey) -> Result<ScenarioOutput> {
    config.validate()?;
    let start = Instant::now();
    let grid = summary::time_grid(config.horizon, config.grid_points);
    let (realized, draws, district_names) = match &config.process {
        ProcessConfig::Poisson { .. } => {
            let (r, d) = run_poisson(config, key, &grid)?;
            (r, d, None)
        }
        ProcessConfig::Hawkes { .. } => {
            let (r, d) = run_hawkes(config, key, &grid)?;
            (r, d, None)
        }
        ProcessConfig::Sir { .. } => {
            let (r, names) = run_sir(config, key, &grid)?;
            (r, Vec::new(), Some(names))
        }
    };

    let realizations: Vec<RealizationSummary> = realized.iter().map(|r| r.summary.clone()).collect();
    let summary = summary::summarize(
        &realizations,
        &config.grouping,
        &grid,
        BAND_LEVEL,
        config.bootstrap_resamples.max(1),
        &key.stage(stage::BOOTSTRAP),
    )?;
    let n = realizations.len() as f64;
    let observed_mean = realizations.iter().map(|r| r.observed_count as f64).sum::<f64>() / n;
    let cf_mean = realizations.iter().map(|r| r.cf_mean_count).sum::<f64>() / n;

    let districts = district_names.map(|names: Vec<DistrictName>| {
        let d = names.len();
        let (mut obs, mut cf) = (vec![0.0; d], vec![0.0; d]);
        for r in &realized {
            if let Some((o, c)) = &r.districts {
                for k in 0..d {
                    obs[k] += o[k] / n;
                    cf[k] += c[k] / n;
                }
            }
        }
        names
            .into_iter()
            .enumerate()
            .map(|(k, (district, country))| DistrictRow {
                district,
                country,
                observed_mean: obs[k],
                cf_mean: cf[k],
            })
            .collect()
    });

    let meta = Meta {
        config: config.clone(),
        seed: key.master_seed(),
        epsilon: draws.iter().filter_map(|d| d.epsilon).collect(),
        component: draws.iter().filter_map(|d| d.component).collect(),
        truncated_factual: realized.iter().filter(|r| r.truncated_factual).count(),
        truncated_counterfactual: realizations.iter().map(|r| r.truncated).sum(),
        observed_mean,
        cf_mean,
        rel_change: summary::relative_change(observed_mean, cf_mean),
        wall_time_seconds: start.elapsed().as_secs_f64(),
        version: env!("CARGO_PKG_VERSION").to_string(),
    };
    Ok(ScenarioOutput {
        summary,
        realizations,
        raw: realized.into_iter().map(|r| r.raw).collect(),
        districts,
        meta,
    })
}

/// One intervention draw per scenario, or per realization when requested.
fn draws_for(config: &ScenarioConfig, components: usize, key: &StreamKey) -> Result<Vec<Draw>> {
    if config.epsilon_per_realization {
        (0..config.n_observed as u64)
            .map(|r| draw_intervention(&config.intervention, components, &key.child(Label::Realization, r)))
            .collect()
    } else {
        Ok(vec![draw_intervention(&config.intervention, components, key)?])
    }
}

fn run_poisson(config: &ScenarioConfig, key: &StreamKey, grid: &[f64]) -> Result<(Vec<Realized>, Vec<Draw>)> {
    let ProcessConfig::Poisson {
        intensity,
        lambda_max,
        share_rejections,
    } = &config.process
    else {
        unreachable!("dispatched on process kind")
    };
    let horizon = config.horizon;
    let lm = intensity.to_poisson()?;
    let components = match &lm {
        PoissonIntensity::Rbf(r) => r.components().len(),
        PoissonIntensity::Constant(_) => 0,
    };
    let draws = draws_for(config, components, key)?;
    let counterfactual_for = |draw: &Draw| -> Result<PoissonIntensity> {
        match &config.intervention {
            InterventionSpec::Intensity { intensity } => intensity.to_poisson(),
            InterventionSpec::AmplitudeShift { .. } => match &lm {
                PoissonIntensity::Rbf(r) => Ok(PoissonIntensity::Rbf(RbfMixtureIntensity::with_amplitude_shift(
                    r,
                    draw.component.unwrap_or(0),
                    draw.epsilon.unwrap_or(0.0),
                )?)),
                PoissonIntensity::Constant(_) => Err(Error::Config("amplitude_shift needs an rbf process".into())),
            },
            _ => Ok(lm.clone()),
        }
    };
    let lmax_factual = match lambda_max {
        Some(l) => *l,
        None => lm.upper_bound(horizon)?,
    };
    let options = ReplicateOptions {
        mode: config.cf_mode(),
        share_rejections: *share_rejections,
    };
    let window = config.window();
    let realized = (0..config.n_observed as u64)
        .into_par_iter()
        .map(|r| -> Result<Realized> {
            let rkey = key.child(Label::Realization, r);
            let draw = &draws[if config.epsilon_per_realization { r as usize } else { 0 }];
            let lcf = counterfactual_for(draw)?;
            let lmax = match lambda_max {
                Some(l) => *l,
                None => lmax_factual.max(lcf.upper_bound(horizon)?),
            };
            let record = lewis_sample(&lm, lmax_factual, horizon, &mut rkey.stage(stage::FACTUAL).stream())?;
            let observed = record.accepted_sequence()?;
            let cfs = counterfactual_poisson_replicates(
                &lm,
                &lcf,
                &observed,
                lmax,
                horizon,
                config.n_counterfactual,
                options,
                &rkey.stage(stage::COUNTERFACTUAL),
            )?;
            let slices: Vec<&[f64]> = cfs.iter().map(EventSequence::times).collect();
            Ok(Realized {
                summary: realization_summary(observed.times(), &slices, grid, window, 0),
                raw: RawRealization::Events {
                    factual: observed.times().to_vec(),
                    counterfactual: cfs
                        .iter()
                        .take(config.raw_replicates)
                        .map(|c| c.times().iter().map(|&t| (t, None)).collect())
                        .collect(),
                },
                truncated_factual: false,
                districts: None,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((realized, draws))
}

fn run_hawkes(config: &ScenarioConfig, key: &StreamKey, grid: &[f64]) -> Result<(Vec<Realized>, Vec<Draw>)> {
    let ProcessConfig::Hawkes {
        mu,
        alpha,
        omega,
        lambda_max,
        event_cap,
    } = &config.process
    else {
        unreachable!("dispatched on process kind")
    };
    let horizon = config.horizon;
    let pm = HawkesParams::new(*mu, *alpha, *omega)?;
    let draws = draws_for(config, 0, key)?;
    let counterfactual_for = |draw: &Draw| -> Result<HawkesParams> {
        match &config.intervention {
            InterventionSpec::Intensity { intensity } => intensity.to_hawkes(),
            InterventionSpec::AlphaShift { .. } => {
                HawkesParams::new(pm.mu, (pm.alpha + draw.epsilon.unwrap_or(0.0)).max(0.0), pm.omega)
            }
            _ => Ok(pm),
        }
    };
    let options = HawkesCfOptions {
        mode: config.cf_mode(),
        event_cap: *event_cap,
    };
    let window = config.window();
    let realized = (0..config.n_observed as u64)
        .into_par_iter()
        .map(|r| -> Result<Realized> {
            let rkey = key.child(Label::Realization, r);
            let draw = &draws[if config.epsilon_per_realization { r as usize } else { 0 }];
            let pcf = counterfactual_for(draw)?;
            let lmax = lambda_max.unwrap_or_else(|| default_lambda_max(&pm, &pcf));
            let lmax_factual = lambda_max.unwrap_or_else(|| pm.branch_bound());
            let factual = sample_hawkes_capped(
                &pm,
                lmax_factual,
                horizon,
                *event_cap,
                &mut rkey.stage(stage::FACTUAL).stream(),
            )?;
            let mut cfs = Vec::with_capacity(config.n_counterfactual);
            for k in 0..config.n_counterfactual as u64 {
                let mut s = rkey.child(Label::Replicate, k).stream();
                cfs.push(counterfactual_hawkes(
                    &pm,
                    &pcf,
                    &factual.events,
                    lmax,
                    horizon,
                    options,
                    &mut s,
                )?);
            }
            let seqs: Vec<Vec<f64>> = cfs.iter().map(|c| c.events.iter().map(|e| e.time).collect()).collect();
            let slices: Vec<&[f64]> = seqs.iter().map(Vec::as_slice).collect();
            let truncated = cfs.iter().filter(|c| c.truncated).count();
            Ok(Realized {
                summary: realization_summary(factual.events.times(), &slices, grid, window, truncated),
                raw: RawRealization::Events {
                    factual: factual.events.times().to_vec(),
                    counterfactual: cfs
                        .iter()
                        .take(config.raw_replicates)
                        .map(|c| c.events.iter().map(|e| (e.time, Some(e.origin))).collect())
                        .collect(),
                },
                truncated_factual: factual.truncated,
                districts: None,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((realized, draws))
}

/// Bundled or file geography plus the network of a SIR scenario.
pub fn sir_world(config: &ScenarioConfig) -> Result<(Geography, ContactNetwork)> {
    let ProcessConfig::Sir {
        geography,
        probs,
        network_seed,
        ..
    } = &config.process
    else {
        return Err(Error::Config("not a sir scenario".into()));
    };
    let geo = match geography {
        Some(path) => Geography::from_json(&fs::read_to_string(path)?)?,
        None => Geography::bundled(),
    };
    let probs = probs.unwrap_or_default();
    let net_key = StreamKey::new(network_seed.unwrap_or(config.seed)).stage(stage::NETWORK);
    let network = generate_network_keyed(&geo, &probs, &net_key)?;
    Ok((geo, network))
}

fn infection_times(o: &Outbreak) -> Vec<f64> {
    let mut t: Vec<f64> = (0..o.node_count())
        .map(|v| o.infection_time(v))
        .filter(|t| t.is_finite())
        .collect();
    t.sort_by(f64::total_cmp);
    t
}

fn run_sir(config: &ScenarioConfig, key: &StreamKey, grid: &[f64]) -> Result<(Vec<Realized>, Vec<DistrictName>)> {
    let ProcessConfig::Sir {
        beta,
        delta,
        seeds,
        edge_noise,
        ..
    } = &config.process
    else {
        unreachable!("dispatched on process kind")
    };
    let intervention = match &config.intervention {
        InterventionSpec::Sir { intervention } => intervention.clone(),
        _ => crate::sir::Intervention::None,
    };
    let horizon = config.horizon;
    let params = SirParams::new(*beta, *delta)?;
    let (geo, network) = sir_world(config)?;
    let n_districts = geo.districts().len();
    let options = SirCfOptions {
        mode: config.cf_mode(),
        edge_noise: *edge_noise,
    };
    let window = config.window();
    let realized = (0..config.n_observed as u64)
        .into_par_iter()
        .map(|r| -> Result<Realized> {
            let rkey = key.child(Label::Realization, r);
            let seed_nodes = sample_seeds(&network, &geo, seeds, &mut rkey.stage(stage::SEEDS).stream())?;
            let observed = sample_outbreak_keyed(&network, &params, &seed_nodes, horizon, &rkey.stage(stage::FACTUAL))?;
            let cfs = (0..config.n_counterfactual as u64)
                .into_par_iter()
                .map(|k| {
                    let rep = rkey.child(Label::Replicate, k);
                    let rates = apply_intervention(
                        &intervention,
                        &observed,
                        &network,
                        &params,
                        &mut rep.stage(stage::INTERVENTION).stream(),
                    )?;
                    counterfactual_outbreak_keyed(
                        &network,
                        &params,
                        &rates,
                        &observed,
                        horizon,
                        options,
                        &rep.stage(stage::COUNTERFACTUAL),
                    )
                })
                .collect::<Result<Vec<_>>>()?;
            let factual_times = infection_times(&observed);
            let cf_times: Vec<Vec<f64>> = cfs.iter().map(infection_times).collect();
            let slices: Vec<&[f64]> = cf_times.iter().map(Vec::as_slice).collect();
            let obs_d: Vec<f64> = observed
                .infections_by_district(&network, n_districts)
                .into_iter()
                .map(|c| c as f64)
                .collect();
            let mut cf_d = vec![0.0; n_districts];
            for c in &cfs {
                for (acc, v) in cf_d.iter_mut().zip(c.infections_by_district(&network, n_districts)) {
                    *acc += v as f64 / cfs.len() as f64;
                }
            }
            Ok(Realized {
                summary: realization_summary(&factual_times, &slices, grid, window, 0),
                raw: RawRealization::Outbreaks {
                    factual: observed,
                    counterfactual: cfs.into_iter().take(config.raw_replicates).collect(),
                },
                truncated_factual: false,
                districts: Some((obs_d, cf_d)),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let names = geo
        .districts()
        .iter()
        .map(|d| (d.id.clone(), d.country.to_string()))
        .collect();
    Ok((realized, names))
}

/// Writes `summary.csv`, `groups.csv`, `realizations.csv`, `meta.json`,
/// `raw_events/` and, for epidemics, `districts.csv` into `dir`.
pub fn write_outputs(
    output: &ScenarioOutput,
    dir: &Path,
    district_ids: Option<&[String]>,
    network: Option<&ContactNetwork>,
) -> Result<()> {
    fs::create_dir_all(dir.join("raw_events"))?;
    summary::write_summary_csv(BufWriter::new(File::create(dir.join("summary.csv"))?), &output.summary)?;
    summary::write_groups_csv(BufWriter::new(File::create(dir.join("groups.csv"))?), &output.summary)?;

    let mut w = csv::Writer::from_path(dir.join("realizations.csv"))?;
    w.write_record(["realization", "observed_count", "cf_mean_count", "truncated"])?;
    for (i, r) in output.realizations.iter().enumerate() {
        w.write_record([
            i.to_string(),
            r.observed_count.to_string(),
            r.cf_mean_count.to_string(),
            r.truncated.to_string(),
        ])?;
    }
    w.flush()?;

    fs::write(dir.join("meta.json"), serde_json::to_string_pretty(&output.meta)?)?;

    let raw = dir.join("raw_events");
    let mut factual_w: Option<csv::Writer<File>> = None;
    let mut cf_w: Option<csv::Writer<File>> = None;
    for (r, item) in output.raw.iter().enumerate() {
        match item {
            RawRealization::Events {
                factual,
                counterfactual,
            } => {
                let fw = match &mut factual_w {
                    Some(w) => w,
                    None => {
                        let mut w = csv::Writer::from_path(raw.join("factual.csv"))?;
                        w.write_record(["realization", "t"])?;
                        factual_w.insert(w)
                    }
                };
                for t in factual {
                    fw.write_record([r.to_string(), t.to_string()])?;
                }
                let cw = match &mut cf_w {
                    Some(w) => w,
                    None => {
                        let mut w = csv::Writer::from_path(raw.join("counterfactual.csv"))?;
                        w.write_record(["realization", "replicate", "t", "origin"])?;
                        cf_w.insert(w)
                    }
                };
                for (k, events) in counterfactual.iter().enumerate() {
                    for (t, origin) in events {
                        cw.write_record([
                            r.to_string(),
                            k.to_string(),
                            t.to_string(),
                            origin.map(|o| o.as_str()).unwrap_or("").to_string(),
                        ])?;
                    }
                }
            }
            RawRealization::Outbreaks {
                factual,
                counterfactual,
            } => {
                let (Some(ids), Some(net)) = (district_ids, network) else {
                    return Err(Error::Config(
                        "writing outbreaks needs the network and district ids".into(),
                    ));
                };
                write_outbreak_csv(
                    BufWriter::new(File::create(raw.join(format!("factual_{r}.csv")))?),
                    factual,
                    net,
                    ids,
                )?;
                for (k, o) in counterfactual.iter().enumerate() {
                    write_outbreak_csv(
                        BufWriter::new(File::create(raw.join(format!("counterfactual_{r}_{k}.csv")))?),
                        o,
                        net,
                        ids,
                    )?;
                }
            }
        }
    }
    if let Some(w) = &mut factual_w {
        w.flush()?;
    }
    if let Some(w) = &mut cf_w {
        w.flush()?;
    }

    if let Some(rows) = &output.districts {
        let mut w = csv::Writer::from_path(dir.join("districts.csv"))?;
        w.write_record(["district", "country", "observed_mean", "cf_mean", "rel_change"])?;
        for d in rows {
            w.write_record([
                d.district.clone(),
                d.country.clone(),
                d.observed_mean.to_string(),
                d.cf_mean.to_string(),
                summary::relative_change(d.observed_mean, d.cf_mean).to_string(),
            ])?;
        }
        w.flush()?;
    }
    Ok(())
}

/// Runs `config` and writes its outputs, loading the SIR world when needed.
pub fn run_and_write(config: &ScenarioConfig, dir: &Path) -> Result<ScenarioOutput> {
    let output = run_scenario(config)?;
    if matches!(config.process, ProcessConfig::Sir { .. }) {
        let (geo, net) = sir_world(config)?;
        let ids: Vec<String> = geo.districts().iter().map(|d| d.id.clone()).collect();
        write_outputs(&output, dir, Some(&ids), Some(&net))?;
    } else {
        write_outputs(&output, dir, None, None)?;
    }
    Ok(output)
}

/// Default intensity pair used by the RBF study and tests: three bumps,
/// with the middle one raised by roughly half its amplitude.
pub fn example_rbf() -> IntensityConfig {
    IntensityConfig::Rbf {
        components: vec![
            crate::intensity::RbfComponent {
                phi: 2.0,
                alpha: 0.5,
                tau: 2.0,
            },
            crate::intensity::RbfComponent {
                phi: 3.0,
                alpha: 0.3,
                tau: 5.0,
            },
            crate::intensity::RbfComponent {
                phi: 1.5,
                alpha: 0.8,
                tau: 8.0,
            },
        ],
        rbf_form: Default::default(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hawkes_config(alpha_cf: f64) -> ScenarioConfig {
        ScenarioConfig::from_json(&format!(
            r#"{{"seed": 3, "horizon": 5, "n_observed": 60, "n_counterfactual": 5, "bootstrap_resamples": 50,
                "process": {{"kind": "hawkes", "mu": 1, "alpha": 0.5, "omega": 1}},
                "intervention": {{"kind": "intensity", "intensity": {{"kind": "hawkes", "mu": 1, "alpha": {alpha_cf}, "omega": 1}}}}}}"#
        ))
        .unwrap()
    }

    #[test]
    fn identity_has_zero_relative_difference() {
        let out = run_scenario(&hawkes_config(0.5)).unwrap();
        for g in &out.summary.groups {
            assert!(g.curve.iter().all(|p| p.rel_diff == 0.0 && p.mean_cf == p.mean_factual));
        }
        assert_eq!(out.meta.rel_change, 0.0);
    }

    #[test]
    fn groups_partition_and_results_are_thread_independent() {
        let c = hawkes_config(0.8);
        let a = run_scenario(&c).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let b = pool.install(|| run_scenario(&c)).unwrap();
        assert_eq!(a.summary, b.summary);
        assert_eq!(a.realizations, b.realizations);
        let total: usize = a.summary.groups.iter().map(|g| g.members.len()).sum();
        assert_eq!(total, 60);
        assert!(a.meta.rel_change > 0.0);
    }

    #[test]
    fn amplitude_shift_draws_once_per_scenario() {
        let c = ScenarioConfig {
            name: "rbf".into(),
            seed: 9,
            horizon: 10.0,
            n_observed: 20,
            n_counterfactual: 3,
            process: ProcessConfig::Poisson {
                intensity: example_rbf(),
                lambda_max: None,
                share_rejections: false,
            },
            intervention: InterventionSpec::AmplitudeShift {
                sigma: 0.5,
                shift: None,
                component: None,
            },
            grouping: Grouping::Tercile,
            window: None,
            grid_points: 20,
            bootstrap_resamples: 20,
            cf_noise_samples: None,
            epsilon_per_realization: false,
            raw_replicates: 1,
        };
        let out = run_scenario(&c).unwrap();
        assert_eq!(out.meta.epsilon.len(), 1);
        assert_eq!(out.meta.component.len(), 1);
        let per = ScenarioConfig {
            epsilon_per_realization: true,
            ..c
        };
        assert_eq!(run_scenario(&per).unwrap().meta.epsilon.len(), 20);
    }

    #[test]
    fn outputs_are_written() {
        let dir = tempfile::tempdir().unwrap();
        let out = run_and_write(&hawkes_config(0.8), dir.path()).unwrap();
        for f in [
            "summary.csv",
            "groups.csv",
            "realizations.csv",
            "meta.json",
            "raw_events/factual.csv",
            "raw_events/counterfactual.csv",
        ] {
            assert!(dir.path().join(f).exists(), "{f}");
        }
        let text = fs::read_to_string(dir.path().join("summary.csv")).unwrap();
        assert!(text.starts_with("group,t,mean_factual,mean_cf,lo,hi,rel_diff\n"));
        assert_eq!(
            text.lines().count(),
            1 + 200 * out.summary.groups.iter().filter(|g| !g.members.is_empty()).count()
        );
    }
}
