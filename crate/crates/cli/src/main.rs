//! `cftpp`: samplers, counterfactuals, epidemic studies and batch
//! experiments behind one executable.
//!
//! Exit codes: 0 success, 1 usage error, 2 runtime error. Data goes to
//! files or stdout, diagnostics to stderr.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};

use cftpp::experiments::{self, ScenarioConfig};
use cftpp::gumbel_scm::CfMode;
use cftpp::hawkes::{
    counterfactual_hawkes, default_lambda_max, sample_hawkes_capped, HawkesCfOptions, DEFAULT_EVENT_CAP,
};
use cftpp::intensity::{HawkesParams, Intensity, IntensityConfig, PoissonIntensity};
use cftpp::io;
use cftpp::randomness::{stage, Label, StreamKey};
use cftpp::sir::{
    apply_intervention, calibrate, counterfactual_outbreak_keyed, default_seeds, estimate_r0_keyed,
    generate_network_keyed, sample_outbreak_keyed, sample_seeds, CalibrationGrid, ContactNetwork, EdgeNoise, Geography,
    Intervention, SbmProbabilities, SirCfOptions, SirParams, WHO_R0,
};
use cftpp::thinning::lewis_sample;

#[derive(Parser)]
#[command(name = "cftpp", version, about = "Counterfactual temporal point processes")]
struct Cli {
    /// Worker threads; results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample an inhomogeneous Poisson process by thinning.
    SimulatePoisson(SimulatePoisson),
    /// Sample an exponential-kernel Hawkes process.
    SimulateHawkes(SimulateHawkes),
    /// Counterfactual events of an observed Poisson sequence.
    CfPoisson(CfPoisson),
    /// Counterfactual events of an observed Hawkes sequence.
    CfHawkes(CfHawkes),
    /// Epidemic model on the contact network.
    #[command(subcommand)]
    Sir(SirCommand),
    /// Batch experiments from a scenario file.
    #[command(subcommand)]
    Experiment(ExperimentCommand),
    /// Run the quick oracle and property checks.
    Validate {
        #[arg(long)]
        seed: u64,
    },
}

#[derive(Args)]
struct Output {
    /// Output path; never overwritten unless --force.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    force: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Constant,
    Rbf,
}

/// A Poisson intensity given as a constant rate or a JSON description.
#[derive(Args)]
struct PoissonSpec {
    #[arg(long, value_enum)]
    kind: Option<Kind>,
    #[arg(long, conflicts_with = "intensity")]
    rate: Option<f64>,
    /// Intensity JSON, inline or as a file path.
    #[arg(long)]
    intensity: Option<String>,
}

#[derive(Args)]
struct SimulatePoisson {
    #[command(flatten)]
    spec: PoissonSpec,
    #[arg(long)]
    horizon: f64,
    /// Dominating rate; the intensity bound when absent.
    #[arg(long)]
    lambda_max: Option<f64>,
    #[arg(long)]
    seed: u64,
    /// Also write the accepted and rejected candidates as JSON.
    #[arg(long)]
    record: Option<PathBuf>,
    #[command(flatten)]
    output: Output,
}

#[derive(Args)]
struct HawkesArgs {
    #[arg(long)]
    mu: f64,
    #[arg(long)]
    alpha: f64,
    #[arg(long)]
    omega: f64,
}

#[derive(Args)]
struct SimulateHawkes {
    #[command(flatten)]
    params: HawkesArgs,
    #[arg(long)]
    horizon: f64,
    #[arg(long)]
    lambda_max: Option<f64>,
    #[arg(long, default_value_t = DEFAULT_EVENT_CAP)]
    event_cap: usize,
    #[arg(long)]
    seed: u64,
    #[command(flatten)]
    output: Output,
}

#[derive(Args)]
struct CfCommon {
    /// Observed events (`.json` array or CSV with header `t`).
    #[arg(long)]
    events: PathBuf,
    #[arg(long)]
    horizon: f64,
    #[arg(long)]
    lambda_max: Option<f64>,
    /// One replicate writes a plain event file; more write `replicate,t,...`.
    #[arg(long, default_value_t = 1)]
    replicates: usize,
    /// Posterior noise draws per decision; exact probabilities when absent.
    #[arg(long)]
    noise_samples: Option<usize>,
    #[arg(long)]
    seed: u64,
    #[command(flatten)]
    output: Output,
}

#[derive(Args)]
struct CfPoisson {
    #[command(flatten)]
    spec: PoissonSpec,
    #[arg(long, conflicts_with = "cf_intensity")]
    cf_rate: Option<f64>,
    #[arg(long)]
    cf_intensity: Option<String>,
    /// Reuse one set of plausible rejections across replicates.
    #[arg(long)]
    share_rejections: bool,
    #[command(flatten)]
    common: CfCommon,
}

#[derive(Args)]
struct CfHawkes {
    #[command(flatten)]
    params: HawkesArgs,
    /// Counterfactual parameters default to the factual ones.
    #[arg(long)]
    cf_mu: Option<f64>,
    #[arg(long)]
    cf_alpha: Option<f64>,
    #[arg(long)]
    cf_omega: Option<f64>,
    #[arg(long, default_value_t = DEFAULT_EVENT_CAP)]
    event_cap: usize,
    #[command(flatten)]
    common: CfCommon,
}

#[derive(Args)]
struct World {
    /// Geography JSON; the bundled one when absent.
    #[arg(long)]
    geography: Option<PathBuf>,
    /// Rescale the geography to this many nodes.
    #[arg(long)]
    nodes: Option<usize>,
    /// Block probabilities JSON, inline or as a file path.
    #[arg(long)]
    probs: Option<String>,
    /// Seed of the contact network; --seed when absent.
    #[arg(long)]
    network_seed: Option<u64>,
    #[arg(long, default_value_t = SirParams::default().beta)]
    beta: f64,
    #[arg(long, default_value_t = SirParams::default().delta)]
    delta: f64,
}

#[derive(Clone, Copy, ValueEnum)]
enum EdgeNoiseArg {
    Abducted,
    Fresh,
}

#[derive(Subcommand)]
enum SirCommand {
    /// Sample an observed outbreak.
    Simulate {
        #[command(flatten)]
        world: World,
        #[arg(long)]
        horizon: f64,
        /// Seed nodes; the default district seeding when absent.
        #[arg(long, value_delimiter = ',')]
        seed_nodes: Vec<usize>,
        #[arg(long)]
        seed: u64,
        #[command(flatten)]
        output: Output,
    },
    /// Counterfactual outbreaks of an observed one under an intervention.
    Counterfactual {
        #[command(flatten)]
        world: World,
        #[arg(long)]
        observed: PathBuf,
        #[arg(long)]
        horizon: f64,
        /// Intervention JSON, inline or as a file path.
        #[arg(long)]
        intervention: String,
        #[arg(long, default_value_t = 1)]
        replicates: usize,
        #[arg(long, value_enum, default_value_t = EdgeNoiseArg::Abducted)]
        edge_noise: EdgeNoiseArg,
        #[arg(long)]
        noise_samples: Option<usize>,
        #[arg(long)]
        seed: u64,
        /// Output directory.
        #[command(flatten)]
        output: Output,
    },
    /// Per-country reproduction number estimates.
    R0 {
        #[command(flatten)]
        world: World,
        #[arg(long, default_value_t = 1000)]
        runs: usize,
        #[arg(long)]
        seed: u64,
        /// JSON output file; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        force: bool,
    },
    /// Grid search of block probabilities against target R0 values.
    Calibrate {
        #[command(flatten)]
        world: World,
        /// Candidate grid JSON, inline or as a file path.
        #[arg(long)]
        grid: Option<String>,
        /// Targets for Guinea, Liberia and Sierra Leone.
        #[arg(long, value_delimiter = ',', num_args = 3)]
        targets: Option<Vec<f64>>,
        #[arg(long, default_value_t = 200)]
        runs: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        force: bool,
    },
}

#[derive(Subcommand)]
enum ExperimentCommand {
    /// Run a scenario and write its outputs to a directory.
    Run {
        config: PathBuf,
        /// Overrides the seed in the scenario file.
        #[arg(long)]
        seed: Option<u64>,
        #[command(flatten)]
        output: Output,
    },
}

/// Errors reported with exit code 1.
#[derive(Debug)]
struct Usage(String);

impl std::fmt::Display for Usage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

fn usage<T>(msg: impl Into<String>) -> anyhow::Result<T> {
    Err(Usage(msg.into()).into())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.is::<Usage>() {
                ExitCode::from(1)
            } else {
                ExitCode::from(2)
            }
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return usage("--threads must be >= 1");
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring worker threads")?;
    }
    match cli.command {
        Command::SimulatePoisson(a) => simulate_poisson(a),
        Command::SimulateHawkes(a) => simulate_hawkes(a),
        Command::CfPoisson(a) => cf_poisson(a),
        Command::CfHawkes(a) => cf_hawkes(a),
        Command::Sir(c) => sir(c),
        Command::Experiment(ExperimentCommand::Run { config, seed, output }) => experiment(&config, seed, &output),
        Command::Validate { seed } => validate(seed),
    }
}

/// Inline JSON when it starts with `{` or `[`, otherwise a file path.
fn json_arg(arg: &str) -> anyhow::Result<String> {
    let trimmed = arg.trim_start();
    if trimmed.starts_with('{') || trimmed.starts_with('[') {
        Ok(arg.to_string())
    } else {
        fs::read_to_string(arg).with_context(|| format!("reading {arg}"))
    }
}

fn prepare_file(path: &Path, force: bool) -> anyhow::Result<()> {
    if path.exists() && !force {
        return usage(format!("{} exists; pass --force to overwrite", path.display()));
    }
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    Ok(())
}

fn prepare_dir(path: &Path, force: bool) -> anyhow::Result<()> {
    if path.is_file() {
        return usage(format!("{} is a file, expected a directory", path.display()));
    }
    let non_empty = path.is_dir() && fs::read_dir(path)?.next().is_some();
    if non_empty && !force {
        return usage(format!("{} is not empty; pass --force to overwrite", path.display()));
    }
    fs::create_dir_all(path).with_context(|| format!("creating {}", path.display()))?;
    Ok(())
}

fn poisson_intensity(
    kind: Option<Kind>,
    rate: Option<f64>,
    json: Option<&str>,
    flag: &str,
) -> anyhow::Result<PoissonIntensity> {
    let config = match (rate, json) {
        (Some(rate), None) => IntensityConfig::Constant { rate },
        (None, Some(j)) => IntensityConfig::from_json(&json_arg(j)?)?,
        _ => return usage(format!("give exactly one of --{flag}rate or --{flag}intensity")),
    };
    match (kind, &config) {
        (Some(Kind::Constant), IntensityConfig::Constant { .. })
        | (Some(Kind::Rbf), IntensityConfig::Rbf { .. })
        | (None, _) => {}
        _ => return usage("--kind does not match the given intensity"),
    }
    Ok(config.to_poisson()?)
}

fn cf_mode(samples: Option<usize>) -> anyhow::Result<CfMode> {
    Ok(match samples {
        Some(n) => CfMode::monte_carlo(n)?,
        None => CfMode::Exact,
    })
}

fn simulate_poisson(a: SimulatePoisson) -> anyhow::Result<()> {
    let lm = poisson_intensity(a.spec.kind, a.spec.rate, a.spec.intensity.as_deref(), "")?;
    prepare_file(&a.output.out, a.output.force)?;
    if let Some(r) = &a.record {
        prepare_file(r, a.output.force)?;
    }
    let lmax = match a.lambda_max {
        Some(l) => l,
        None => lm.upper_bound(a.horizon)?,
    };
    let mut s = StreamKey::new(a.seed).stage(stage::FACTUAL).stream();
    let record = lewis_sample(&lm, lmax, a.horizon, &mut s)?;
    io::write_events(&a.output.out, &record.accepted)?;
    if let Some(r) = &a.record {
        io::write_record_json(r, &record)?;
    }
    eprintln!(
        "{} events, {} rejected candidates",
        record.accepted.len(),
        record.rejected.len()
    );
    Ok(())
}

fn hawkes_params(h: &HawkesArgs) -> anyhow::Result<HawkesParams> {
    Ok(HawkesParams::new(h.mu, h.alpha, h.omega)?)
}

fn simulate_hawkes(a: SimulateHawkes) -> anyhow::Result<()> {
    let p = hawkes_params(&a.params)?;
    prepare_file(&a.output.out, a.output.force)?;
    let lmax = a.lambda_max.unwrap_or_else(|| p.branch_bound());
    let mut s = StreamKey::new(a.seed).stage(stage::FACTUAL).stream();
    let h = sample_hawkes_capped(&p, lmax, a.horizon, a.event_cap, &mut s)?;
    if h.truncated {
        eprintln!("warning: event cap {} reached, sequence truncated", a.event_cap);
    }
    io::write_events(&a.output.out, h.events.times())?;
    eprintln!("{} events", h.events.len());
    Ok(())
}

fn check_replicates(n: usize) -> anyhow::Result<()> {
    if n == 0 {
        return usage("--replicates must be >= 1");
    }
    Ok(())
}

fn cf_poisson(a: CfPoisson) -> anyhow::Result<()> {
    let c = &a.common;
    check_replicates(c.replicates)?;
    let lm = poisson_intensity(a.spec.kind, a.spec.rate, a.spec.intensity.as_deref(), "")?;
    let lcf = poisson_intensity(None, a.cf_rate, a.cf_intensity.as_deref(), "cf-")?;
    let observed = io::read_events(&c.events, c.horizon)?;
    prepare_file(&c.output.out, c.output.force)?;
    let lmax = match c.lambda_max {
        Some(l) => l,
        None => lm.upper_bound(c.horizon)?.max(lcf.upper_bound(c.horizon)?),
    };
    let options = cftpp::cf_poisson::ReplicateOptions {
        mode: cf_mode(c.noise_samples)?,
        share_rejections: a.share_rejections,
    };
    let key = StreamKey::new(c.seed).stage(stage::COUNTERFACTUAL);
    let cfs = cftpp::cf_poisson::counterfactual_poisson_replicates(
        &lm,
        &lcf,
        &observed,
        lmax,
        c.horizon,
        c.replicates,
        options,
        &key,
    )?;
    if let [single] = cfs.as_slice() {
        io::write_events(&c.output.out, single.times())?;
    } else {
        let mut w = BufWriter::new(File::create(&c.output.out)?);
        writeln!(w, "replicate,t")?;
        for (k, seq) in cfs.iter().enumerate() {
            for t in seq.times() {
                writeln!(w, "{k},{t}")?;
            }
        }
        w.flush()?;
    }
    let mean = cfs.iter().map(|s| s.len()).sum::<usize>() as f64 / cfs.len() as f64;
    eprintln!("observed {} events, counterfactual mean {mean}", observed.len());
    Ok(())
}

fn cf_hawkes(a: CfHawkes) -> anyhow::Result<()> {
    let c = &a.common;
    check_replicates(c.replicates)?;
    let pm = hawkes_params(&a.params)?;
    let pcf = HawkesParams::new(
        a.cf_mu.unwrap_or(pm.mu),
        a.cf_alpha.unwrap_or(pm.alpha),
        a.cf_omega.unwrap_or(pm.omega),
    )?;
    let observed = io::read_events(&c.events, c.horizon)?;
    prepare_file(&c.output.out, c.output.force)?;
    let lmax = c.lambda_max.unwrap_or_else(|| default_lambda_max(&pm, &pcf));
    let options = HawkesCfOptions {
        mode: cf_mode(c.noise_samples)?,
        event_cap: a.event_cap,
    };
    let key = StreamKey::new(c.seed).stage(stage::COUNTERFACTUAL);
    let cfs = (0..c.replicates as u64)
        .map(|k| {
            let mut s = key.child(Label::Replicate, k).stream();
            counterfactual_hawkes(&pm, &pcf, &observed, lmax, c.horizon, options, &mut s)
        })
        .collect::<cftpp::Result<Vec<_>>>()?;
    let truncated = cfs.iter().filter(|h| h.truncated).count();
    if truncated > 0 {
        eprintln!("warning: {truncated} replicates hit the event cap");
    }
    if let [single] = cfs.as_slice() {
        io::write_events(&c.output.out, single.sequence().times())?;
    } else {
        io::write_hawkes_cf_csv(BufWriter::new(File::create(&c.output.out)?), &cfs)?;
    }
    let mean = cfs.iter().map(|h| h.len()).sum::<usize>() as f64 / cfs.len() as f64;
    eprintln!("observed {} events, counterfactual mean {mean}", observed.len());
    Ok(())
}

struct LoadedWorld {
    geography: Geography,
    network: ContactNetwork,
    params: SirParams,
}

fn load_world(w: &World, seed: u64) -> anyhow::Result<LoadedWorld> {
    let mut geography = match &w.geography {
        Some(p) => Geography::from_json(&fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?)?,
        None => Geography::bundled(),
    };
    if let Some(n) = w.nodes {
        geography = geography.with_total_nodes(n);
    }
    let probs = match &w.probs {
        Some(p) => SbmProbabilities::from_json(&json_arg(p)?)?,
        None => SbmProbabilities::default(),
    };
    let key = StreamKey::new(w.network_seed.unwrap_or(seed)).stage(stage::NETWORK);
    let network = generate_network_keyed(&geography, &probs, &key)?;
    let params = SirParams::new(w.beta, w.delta)?;
    Ok(LoadedWorld {
        geography,
        network,
        params,
    })
}

fn district_ids(g: &Geography) -> Vec<String> {
    g.districts().iter().map(|d| d.id.clone()).collect()
}

fn write_json_out(value: &serde_json::Value, out: Option<&Path>, force: bool) -> anyhow::Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    match out {
        Some(p) => {
            prepare_file(p, force)?;
            fs::write(p, text + "\n")?;
        }
        None => {
            let mut out = std::io::stdout().lock();
            writeln!(out, "{text}")
                .and_then(|_| out.flush())
                .or_else(ignore_broken_pipe)?;
        }
    }
    Ok(())
}

fn sir(c: SirCommand) -> anyhow::Result<()> {
    match c {
        SirCommand::Simulate {
            world,
            horizon,
            seed_nodes,
            seed,
            output,
        } => {
            prepare_file(&output.out, output.force)?;
            let w = load_world(&world, seed)?;
            let key = StreamKey::new(seed);
            let seeds = if seed_nodes.is_empty() {
                sample_seeds(
                    &w.network,
                    &w.geography,
                    &default_seeds(),
                    &mut key.stage(stage::SEEDS).stream(),
                )?
            } else {
                seed_nodes
            };
            let o = sample_outbreak_keyed(&w.network, &w.params, &seeds, horizon, &key.stage(stage::FACTUAL))?;
            io::write_outbreak_csv(
                BufWriter::new(File::create(&output.out)?),
                &o,
                &w.network,
                &district_ids(&w.geography),
            )?;
            eprintln!("{} infections on {} nodes", o.infected_count(), o.node_count());
            Ok(())
        }
        SirCommand::Counterfactual {
            world,
            observed,
            horizon,
            intervention,
            replicates,
            edge_noise,
            noise_samples,
            seed,
            output,
        } => {
            check_replicates(replicates)?;
            let iv = Intervention::from_json(&json_arg(&intervention)?)?;
            let w = load_world(&world, seed)?;
            let obs = io::read_outbreak(&observed, horizon)?;
            obs.validate_against(&w.network)?;
            prepare_dir(&output.out, output.force)?;
            let options = SirCfOptions {
                mode: cf_mode(noise_samples)?,
                edge_noise: match edge_noise {
                    EdgeNoiseArg::Abducted => EdgeNoise::Abducted,
                    EdgeNoiseArg::Fresh => EdgeNoise::Fresh,
                },
            };
            let ids = district_ids(&w.geography);
            let nd = ids.len();
            let key = StreamKey::new(seed);
            let mut cf_counts = Vec::with_capacity(replicates);
            let mut cf_districts = vec![0.0; nd];
            for k in 0..replicates as u64 {
                let rep = key.child(Label::Replicate, k);
                let rates = apply_intervention(
                    &iv,
                    &obs,
                    &w.network,
                    &w.params,
                    &mut rep.stage(stage::INTERVENTION).stream(),
                )?;
                let cf = counterfactual_outbreak_keyed(
                    &w.network,
                    &w.params,
                    &rates,
                    &obs,
                    horizon,
                    options,
                    &rep.stage(stage::COUNTERFACTUAL),
                )?;
                io::write_outbreak_csv(
                    BufWriter::new(File::create(output.out.join(format!("counterfactual_{k}.csv")))?),
                    &cf,
                    &w.network,
                    &ids,
                )?;
                for (acc, v) in cf_districts.iter_mut().zip(cf.infections_by_district(&w.network, nd)) {
                    *acc += v as f64 / replicates as f64;
                }
                cf_counts.push(cf.infected_count());
            }
            let obs_districts = obs.infections_by_district(&w.network, nd);
            let mut dw = BufWriter::new(File::create(output.out.join("districts.csv"))?);
            writeln!(dw, "district,country,observed,cf_mean")?;
            for (k, d) in w.geography.districts().iter().enumerate() {
                writeln!(
                    dw,
                    "{},{},{},{}",
                    d.id,
                    d.country.name(),
                    obs_districts[k],
                    cf_districts[k]
                )?;
            }
            dw.flush()?;
            let observed_n = obs.infected_count();
            let mean = cf_counts.iter().sum::<usize>() as f64 / replicates as f64;
            let reduction = if observed_n == 0 {
                0.0
            } else {
                1.0 - mean / observed_n as f64
            };
            let summary = serde_json::json!({
                "observed_infections": observed_n,
                "counterfactual_infections": cf_counts,
                "counterfactual_mean": mean,
                "mean_reduction": reduction,
                "intervention": iv,
                "seed": seed,
            });
            fs::write(
                output.out.join("summary.json"),
                serde_json::to_string_pretty(&summary)? + "\n",
            )?;
            eprintln!("observed {observed_n} infections, counterfactual mean {mean}");
            Ok(())
        }
        SirCommand::R0 {
            world,
            runs,
            seed,
            out,
            force,
        } => {
            let w = load_world(&world, seed)?;
            let est = estimate_r0_keyed(&w.network, &w.geography, &w.params, runs, &StreamKey::new(seed))?;
            write_json_out(&serde_json::to_value(est)?, out.as_deref(), force)
        }
        SirCommand::Calibrate {
            world,
            grid,
            targets,
            runs,
            seed,
            out,
            force,
        } => {
            let w = load_world(&world, seed)?;
            let grid: CalibrationGrid = match grid {
                Some(g) => serde_json::from_str(&json_arg(&g)?).context("parsing calibration grid")?,
                None => CalibrationGrid::single(SbmProbabilities::default()),
            };
            let targets = match targets.as_deref() {
                Some([a, b, c]) => [*a, *b, *c],
                Some(_) => return usage("--targets takes three values"),
                None => WHO_R0,
            };
            let mut s = StreamKey::new(seed).stream();
            let cal = calibrate(&w.geography, &w.params, targets, &grid, runs, &mut s)?;
            write_json_out(&serde_json::to_value(cal)?, out.as_deref(), force)
        }
    }
}

fn experiment(config: &Path, seed: Option<u64>, output: &Output) -> anyhow::Result<()> {
    let mut c = ScenarioConfig::from_file(config).with_context(|| format!("loading {}", config.display()))?;
    if let Some(s) = seed {
        c.seed = s;
    }
    prepare_dir(&output.out, output.force)?;
    let out = experiments::run_and_write(&c, &output.out)?;
    for g in &out.summary.groups {
        eprintln!(
            "{}: {} realizations, observed mean {:.3}, counterfactual mean {:.3}, change {:+.1}%",
            g.label,
            g.members.len(),
            g.observed_mean,
            g.cf_mean,
            100.0 * g.rel_change
        );
    }
    if out.meta.truncated_factual + out.meta.truncated_counterfactual > 0 {
        eprintln!(
            "warning: event cap reached in {} factual and {} counterfactual samples",
            out.meta.truncated_factual, out.meta.truncated_counterfactual
        );
    }
    Ok(())
}

fn ignore_broken_pipe(e: std::io::Error) -> std::io::Result<()> {
    if e.kind() == std::io::ErrorKind::BrokenPipe {
        Ok(())
    } else {
        Err(e)
    }
}

fn validate(seed: u64) -> anyhow::Result<()> {
    let checks = cftpp::validate::run_all(seed)?;
    let mut failed = 0;
    for c in &checks {
        let line = format!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
        writeln!(std::io::stdout(), "{line}").or_else(ignore_broken_pipe)?;
        failed += usize::from(!c.passed);
    }
    if failed > 0 {
        bail!("{failed} of {} checks failed", checks.len());
    }
    Ok(())
}
