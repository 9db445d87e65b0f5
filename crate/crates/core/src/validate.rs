//! Fast self-checks run by `cftpp validate`. Each check compares a sampler
//! against a closed form or a structural property with a small budget;
//! the full-size versions live in the test suites.

use serde::Serialize;

use crate::cf_poisson::counterfactual_poisson;
use crate::error::Result;
use crate::gumbel_scm::{
    counterfactual_prob_exact, counterfactual_prob_montecarlo, counterfactual_sample, sample_factual, CfMode,
};
use crate::hawkes::{counterfactual_hawkes, sample_hawkes, HawkesCfOptions};
use crate::intensity::{HawkesParams, RbfComponent, RbfMixtureIntensity};
use crate::randomness::{stage, Label, StreamKey};
use crate::sir::{
    counterfactual_outbreak_keyed, generate_network_keyed, sample_outbreak_keyed, CounterfactualRates, Geography,
    SbmProbabilities, SirCfOptions, SirParams,
};
use crate::stats;
use crate::thinning::lewis_sample;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &'static str, passed: bool, detail: String) -> Check {
    Check { name, passed, detail }
}

/// Runs every check; an `Err` means a sampler failed outright.
pub fn run_all(seed: u64) -> Result<Vec<Check>> {
    let key = StreamKey::new(seed);
    Ok(vec![
        exact_vs_abduction(&key.child(Label::Block, 0))?,
        monotonicity(&key.child(Label::Block, 1))?,
        marginal_identity()?,
        poisson_identity_and_subset(&key.child(Label::Block, 3))?,
        hawkes_identity(&key.child(Label::Block, 4))?,
        hawkes_critical_mean(&key.child(Label::Block, 5))?,
        sir_identity(&key.child(Label::Block, 6))?,
    ])
}

fn exact_vs_abduction(key: &StreamKey) -> Result<Check> {
    const K: usize = 20_000;
    let mut worst = 0.0f64;
    let mut s = key.stream();
    for lmax in [1.0, 3.0] {
        for i in 1..=4 {
            for j in 0..=4 {
                let lo = lmax * i as f64 / 5.0;
                let lc = lmax * j as f64 / 4.0;
                for x in [false, true] {
                    let p = counterfactual_prob_exact(x, lo, lc, lmax)?;
                    let q = counterfactual_prob_montecarlo(x, lo, lc, lmax, K, &mut s)?;
                    let se = (p * (1.0 - p) / K as f64).sqrt().max(1.0 / K as f64);
                    worst = worst.max((p - q).abs() / se);
                }
            }
        }
    }
    Ok(check(
        "exact probabilities match abduction",
        worst <= 4.0,
        format!("max deviation {worst:.2} standard errors"),
    ))
}

fn monotonicity(key: &StreamKey) -> Result<Check> {
    let mut s = key.stream();
    let mut flips = 0usize;
    for _ in 0..100_000 {
        let lmax = 0.1 + 4.0 * s.uniform();
        let lo = lmax * (0.01 + 0.98 * s.uniform());
        let lc = lmax * s.uniform();
        let x = sample_factual(lo, lmax, &mut s)?;
        let y = counterfactual_sample(x, lo, lc, lmax, CfMode::Exact, &mut s)?;
        // raising the intensity never un-accepts, lowering never accepts
        if (lc >= lo && x && !y) || (lc <= lo && !x && y) {
            flips += 1;
        }
    }
    Ok(check(
        "no forbidden flips",
        flips == 0,
        format!("{flips} flips in 100000 trials"),
    ))
}

fn marginal_identity() -> Result<Check> {
    let mut worst = 0.0f64;
    for lo in [0.2, 0.7, 1.3, 1.9] {
        for lc in [0.0, 0.5, 1.0, 1.5, 2.0] {
            let lmax = 2.0;
            let a = lo / lmax;
            let p = a * counterfactual_prob_exact(true, lo, lc, lmax)?
                + (1.0 - a) * counterfactual_prob_exact(false, lo, lc, lmax)?;
            worst = worst.max((p - lc / lmax).abs());
        }
    }
    Ok(check(
        "counterfactual marginal equals interventional",
        worst < 1e-12,
        format!("max error {worst:.1e}"),
    ))
}

fn poisson_identity_and_subset(key: &StreamKey) -> Result<Check> {
    let lm = RbfMixtureIntensity::gaussian(vec![
        RbfComponent {
            phi: 2.0,
            alpha: 0.5,
            tau: 2.0,
        },
        RbfComponent {
            phi: 1.0,
            alpha: 0.3,
            tau: 6.0,
        },
    ])?;
    let half = RbfMixtureIntensity::gaussian(vec![
        RbfComponent {
            phi: 1.0,
            alpha: 0.5,
            tau: 2.0,
        },
        RbfComponent {
            phi: 0.5,
            alpha: 0.3,
            tau: 6.0,
        },
    ])?;
    let (lmax, horizon) = (4.0, 8.0);
    let mut bad = 0usize;
    for r in 0..200 {
        let rk = key.child(Label::Realization, r);
        let observed = lewis_sample(&lm, lmax, horizon, &mut rk.stage(stage::FACTUAL).stream())?.accepted_sequence()?;
        let mut s = rk.stage(stage::COUNTERFACTUAL).stream();
        let same = counterfactual_poisson(&lm, &lm, &observed, lmax, horizon, CfMode::Exact, &mut s)?;
        let lower = counterfactual_poisson(&lm, &half, &observed, lmax, horizon, CfMode::Exact, &mut s)?;
        if same != observed || !lower.is_subset_of(&observed) {
            bad += 1;
        }
    }
    Ok(check(
        "poisson identity and subset",
        bad == 0,
        format!("{bad} of 200 realizations violated"),
    ))
}

fn hawkes_identity(key: &StreamKey) -> Result<Check> {
    let p = HawkesParams::new(1.0, 0.8, 1.0)?;
    let mut bad = 0usize;
    for r in 0..100 {
        let rk = key.child(Label::Realization, r);
        let obs = sample_hawkes(&p, 1.0, 5.0, &mut rk.stage(stage::FACTUAL).stream())?;
        let cf = counterfactual_hawkes(
            &p,
            &p,
            &obs.events,
            1.0,
            5.0,
            HawkesCfOptions::default(),
            &mut rk.stage(stage::COUNTERFACTUAL).stream(),
        )?;
        if cf.sequence() != obs.events {
            bad += 1;
        }
    }
    Ok(check(
        "hawkes identity",
        bad == 0,
        format!("{bad} of 100 realizations differed"),
    ))
}

fn hawkes_critical_mean(key: &StreamKey) -> Result<Check> {
    let p = HawkesParams::new(1.0, 1.0, 1.0)?;
    let counts: Vec<f64> = (0..4000)
        .map(|r| {
            sample_hawkes(&p, 1.0, 5.0, &mut key.child(Label::Realization, r).stream()).map(|h| h.events.len() as f64)
        })
        .collect::<Result<_>>()?;
    let m = stats::mean(&counts);
    let se = stats::standard_error(&counts);
    // mu * (T + alpha * T^2 / 2) at the critical point
    let expected = 17.5;
    Ok(check(
        "critical hawkes mean",
        (m - expected).abs() <= 4.0 * se,
        format!("mean {m:.3} vs {expected} (se {se:.3})"),
    ))
}

fn sir_identity(key: &StreamKey) -> Result<Check> {
    let geo = Geography::bundled().with_total_nodes(800);
    let net = generate_network_keyed(&geo, &SbmProbabilities::default(), &key.stage(stage::NETWORK))?;
    let params = SirParams::default();
    let rates = CounterfactualRates::identity(&params);
    let mut bad = 0usize;
    for r in 0..5u64 {
        let rk = key.child(Label::Realization, r);
        let seeds = [(r as usize * 97) % net.node_count()];
        let obs = sample_outbreak_keyed(&net, &params, &seeds, 100.0, &rk.stage(stage::FACTUAL))?;
        let cf = counterfactual_outbreak_keyed(
            &net,
            &params,
            &rates,
            &obs,
            100.0,
            SirCfOptions::default(),
            &rk.stage(stage::COUNTERFACTUAL),
        )?;
        if cf != obs {
            bad += 1;
        }
    }
    Ok(check(
        "sir identity",
        bad == 0,
        format!("{bad} of 5 outbreaks differed"),
    ))
}

#[cfg(test)]
mod tests {
    #[test]
    fn all_checks_pass() {
        for c in super::run_all(11).unwrap() {
            assert!(c.passed, "{}: {}", c.name, c.detail);
        }
    }
}
