use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn cftpp(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cftpp"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str], dir: &Path) -> Output {
    let out = cftpp(args, dir);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

const SIM: &[&str] = &[
    "simulate-poisson",
    "--kind",
    "constant",
    "--rate",
    "2",
    "--horizon",
    "10",
    "--seed",
    "1",
    "--out",
];

#[test]
fn simulate_is_deterministic_and_sized() {
    let d = tempfile::tempdir().unwrap();
    ok(&[SIM, &["a.csv"]].concat(), d.path());
    ok(&[SIM, &["b.csv"]].concat(), d.path());
    let a = fs::read(d.path().join("a.csv")).unwrap();
    assert_eq!(a, fs::read(d.path().join("b.csv")).unwrap());
    let rows = String::from_utf8(a).unwrap().lines().count() - 1;
    // Poisson(20): well inside 6 standard deviations
    assert!((20usize.abs_diff(rows)) < 27, "{rows} rows");
}

#[test]
fn never_overwrites_without_force() {
    let d = tempfile::tempdir().unwrap();
    ok(&[SIM, &["e.csv"]].concat(), d.path());
    fs::write(d.path().join("e.csv"), "sentinel").unwrap();
    let out = cftpp(&[SIM, &["e.csv"]].concat(), d.path());
    assert_eq!(code(&out), 1);
    assert_eq!(fs::read_to_string(d.path().join("e.csv")).unwrap(), "sentinel");
    ok(&[SIM, &["e.csv", "--force"]].concat(), d.path());
    assert!(fs::read_to_string(d.path().join("e.csv")).unwrap().starts_with("t\n"));
}

#[test]
fn exit_codes() {
    let d = tempfile::tempdir().unwrap();
    assert_eq!(
        code(&cftpp(
            &["simulate-poisson", "--rate", "2", "--horizon", "1", "--out", "x.csv"],
            d.path()
        )),
        1
    );
    assert_eq!(code(&cftpp(&["no-such-command"], d.path())), 1);
    assert_eq!(code(&cftpp(&["--help"], d.path())), 0);
    let out = cftpp(
        &[
            "cf-poisson",
            "--rate",
            "1",
            "--cf-rate",
            "2",
            "--horizon",
            "5",
            "--events",
            "missing.csv",
            "--seed",
            "1",
            "--out",
            "o.csv",
        ],
        d.path(),
    );
    assert_eq!(code(&out), 2);
    let out = cftpp(
        &[
            "simulate-poisson",
            "--rate=-1",
            "--horizon",
            "5",
            "--seed",
            "1",
            "--out",
            "n.csv",
        ],
        d.path(),
    );
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("rate"));
}

#[test]
fn cf_hawkes_identity_returns_the_input() {
    let d = tempfile::tempdir().unwrap();
    let p = d.path();
    let params = ["--mu", "1", "--alpha", "0.8", "--omega", "1", "--horizon", "6"];
    ok(
        &[&["simulate-hawkes"][..], &params, &["--seed", "3", "--out", "h.json"]].concat(),
        p,
    );
    let before = fs::read(p.join("h.json")).unwrap();
    ok(
        &[
            &["cf-hawkes"][..],
            &params,
            &["--events", "h.json", "--seed", "4", "--out", "cf.json"],
        ]
        .concat(),
        p,
    );
    assert_eq!(fs::read(p.join("cf.json")).unwrap(), before);
    // inputs are left untouched
    assert_eq!(fs::read(p.join("h.json")).unwrap(), before);
    ok(
        &[
            &["cf-hawkes"][..],
            &params,
            &[
                "--cf-alpha",
                "1.2",
                "--replicates",
                "3",
                "--events",
                "h.json",
                "--seed",
                "4",
                "--out",
                "many.csv",
            ],
        ]
        .concat(),
        p,
    );
    let text = fs::read_to_string(p.join("many.csv")).unwrap();
    assert!(text.starts_with("replicate,t,origin\n"));
}

#[test]
fn cf_poisson_accepts_simulated_output_and_chains() {
    let d = tempfile::tempdir().unwrap();
    let p = d.path();
    ok(&[SIM, &["e.csv"]].concat(), p);
    let cf = [
        "cf-poisson",
        "--rate",
        "2",
        "--cf-rate",
        "1",
        "--horizon",
        "10",
        "--seed",
        "5",
    ];
    ok(&[&cf[..], &["--events", "e.csv", "--out", "c.csv"]].concat(), p);
    let obs = fs::read_to_string(p.join("e.csv")).unwrap();
    let sub = fs::read_to_string(p.join("c.csv")).unwrap();
    assert!(sub.lines().skip(1).all(|l| obs.lines().any(|o| o == l)));
    // a counterfactual file is itself a valid observation
    ok(&[&cf[..], &["--events", "c.csv", "--out", "c2.csv"]].concat(), p);
}

#[test]
fn sir_identity_through_files() {
    let d = tempfile::tempdir().unwrap();
    let p = d.path();
    let world = ["--nodes", "600", "--network-seed", "9"];
    ok(
        &[
            &["sir", "simulate"][..],
            &world,
            &["--horizon", "200", "--seed", "2", "--out", "obs.csv"],
        ]
        .concat(),
        p,
    );
    ok(
        &[
            &["sir", "counterfactual"][..],
            &world,
            &[
                "--observed",
                "obs.csv",
                "--horizon",
                "200",
                "--intervention",
                r#"{"kind":"none"}"#,
                "--seed",
                "3",
                "--out",
                "cf",
            ],
        ]
        .concat(),
        p,
    );
    assert_eq!(
        fs::read(p.join("obs.csv")).unwrap(),
        fs::read(p.join("cf/counterfactual_0.csv")).unwrap()
    );
    let summary: serde_json::Value = serde_json::from_slice(&fs::read(p.join("cf/summary.json")).unwrap()).unwrap();
    assert_eq!(summary["mean_reduction"], 0.0);
}

#[test]
fn experiment_outputs_do_not_depend_on_threads() {
    let d = tempfile::tempdir().unwrap();
    let p = d.path();
    fs::write(
        p.join("s.json"),
        r#"{"seed": 4, "horizon": 5, "n_observed": 40, "n_counterfactual": 4, "bootstrap_resamples": 50,
            "process": {"kind": "hawkes", "mu": 1, "alpha": 0.6, "omega": 1},
            "intervention": {"kind": "alpha_shift", "shift": 0.3}}"#,
    )
    .unwrap();
    ok(&["--threads", "1", "experiment", "run", "s.json", "--out", "one"], p);
    ok(&["--threads", "4", "experiment", "run", "s.json", "--out", "four"], p);
    for f in [
        "summary.csv",
        "groups.csv",
        "realizations.csv",
        "raw_events/factual.csv",
        "raw_events/counterfactual.csv",
    ] {
        assert_eq!(
            fs::read(p.join("one").join(f)).unwrap(),
            fs::read(p.join("four").join(f)).unwrap(),
            "{f}"
        );
    }
    let meta: serde_json::Value = serde_json::from_slice(&fs::read(p.join("one/meta.json")).unwrap()).unwrap();
    assert_eq!(meta["seed"], 4);
    assert_eq!(meta["epsilon"][0], 0.3);
    // a non-empty output directory is refused
    assert_eq!(code(&cftpp(&["experiment", "run", "s.json", "--out", "one"], p)), 1);
}

#[test]
fn validate_passes() {
    let d = tempfile::tempdir().unwrap();
    let out = ok(&["validate", "--seed", "1"], d.path());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.lines().count() >= 5 && text.lines().all(|l| l.starts_with("PASS")));
}
